// Administrative command line for the MOOClet engine.
//
// Talks to a running server by default (--server, MOOCLET_TOKEN); with
// --local DIR it embeds an engine persisted in DIR and acts as admin.

#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <memory>
#include <sstream>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "mooclet/api.hpp"
#include "mooclet/config.hpp"
#include "mooclet/engine.hpp"
#include "mooclet/http_server.hpp"
#include "mooclet/simulator.hpp"

namespace {

using nlohmann::json;
using mooclet::api::Request;
using mooclet::api::Response;

enum Exit { kOk = 0, kValidation = 1, kNotFound = 2, kInternal = 3 };

int exit_code_for(std::string_view wire_code) {
  if (wire_code == "not_found" || wire_code == "permission") return kNotFound;
  if (wire_code == "internal") return kInternal;
  return kValidation;
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw mooclet::Error(mooclet::ErrorCode::not_found, "cannot read " + path);
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw mooclet::Error(mooclet::ErrorCode::internal, "cannot write " + path);
}

struct Options {
  std::string server = "127.0.0.1:8080";
  std::string token;
  std::string local;
  std::string format = "text";
  std::uint64_t seed = 0;
};

class Client {
 public:
  explicit Client(const Options& opt) : opt_(opt) {}

  Response call(Request request) {
    if (!opt_.local.empty()) {
      ensure_local();
      request.headers["Authorization"] = "Bearer local";
      return service_->route(request);
    }
    request.headers["Authorization"] = "Bearer " + opt_.token;
    const auto colon = opt_.server.rfind(':');
    if (colon == std::string::npos)
      throw mooclet::Error(mooclet::ErrorCode::validation, "--server must be host:port");
    return mooclet::http_call(opt_.server.substr(0, colon), std::stoi(opt_.server.substr(colon + 1)),
                              request);
  }

 private:
  void ensure_local() {
    if (service_) return;
    mooclet::EngineOptions eo;
    eo.data_dir = opt_.local;
    eo.seed = opt_.seed;
    engine_ = std::make_unique<mooclet::Engine>(std::move(eo));
    service_ = std::make_unique<mooclet::api::Service>(
        *engine_, std::vector<mooclet::Principal>{{"local", "local", mooclet::Role::admin, 0.0}});
  }

  const Options& opt_;
  std::unique_ptr<mooclet::Engine> engine_;
  std::unique_ptr<mooclet::api::Service> service_;
};

// Prints a response; `text` renders a successful JSON body for humans.
int emit(const Options& opt, const Response& r, const std::function<void(const json&)>& text) {
  const bool is_json = r.content_type.starts_with("application/json");
  if (r.status >= 400) {
    json body = is_json ? json::parse(r.body, nullptr, false) : json();
    std::string code = "internal", message = r.body;
    if (body.is_object() && body.contains("error")) {
      code = body["error"].value("code", "internal");
      message = body["error"].value("message", "");
    }
    if (opt.format == "json") std::cout << json{{"error", {{"code", code}, {"message", message}}}}.dump() << "\n";
    else std::cerr << "error (" << code << "): " << message << "\n";
    return exit_code_for(code);
  }
  if (!is_json) {
    if (opt.format == "json") std::cout << json{{"body", r.body}}.dump() << "\n";
    else std::cout << r.body;
    return kOk;
  }
  const json body = json::parse(r.body);
  if (opt.format == "json") std::cout << body.dump() << "\n";
  else text(body);
  return kOk;
}

json policy_body(const std::string& kind, double alpha, double beta, const std::string& context_var,
                 const std::string& version) {
  json params = {{"alpha", alpha}, {"beta", beta}};
  if (!context_var.empty()) params["context_variable"] = context_var;
  if (!version.empty()) params["version"] = version;
  return {{"kind", kind}, {"parameters", params}};
}

json parse_cli_value(const std::string& text) {
  json v = json::parse(text, nullptr, false);
  if (!v.is_discarded() && v.is_primitive() && !v.is_null()) return v;
  return text;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Administer MOOClets, the variable store and policy simulations"};
  app.require_subcommand(1);
  Options opt;
  if (const char* t = std::getenv("MOOCLET_TOKEN")) opt.token = t;
  if (const char* s = std::getenv("MOOCLET_SERVER")) opt.server = s;
  app.add_option("--server", opt.server, "Server address host:port (env MOOCLET_SERVER)");
  app.add_option("--token", opt.token, "Bearer token (env MOOCLET_TOKEN)");
  app.add_option("--local", opt.local, "Embed the engine, persisted in this directory");
  app.add_option("--seed", opt.seed, "Seed for the embedded engine");
  app.add_option("--format", opt.format, "Output format")->check(CLI::IsMember({"text", "json"}));

  Client client(opt);
  std::function<int()> action;

  // mooclet create|list|pin
  auto* mooclet_cmd = app.add_subcommand("mooclet", "Manage MOOClets");
  mooclet_cmd->require_subcommand(1);
  std::string name, policy = "uniform_random", context_var, policy_version, id, version;
  double alpha = 1.0, beta = 1.0;
  bool no_sticky = false, unpin = false;
  auto add_policy_flags = [&](CLI::App* cmd) {
    cmd->add_option("--policy", policy, "uniform_random|weighted_random|pinned|thompson_bernoulli|contextual_thompson");
    cmd->add_option("--alpha", alpha, "Beta prior alpha");
    cmd->add_option("--beta", beta, "Beta prior beta");
    cmd->add_option("--context-var", context_var, "Context variable for contextual_thompson");
    cmd->add_option("--policy-version", policy_version, "Version served by a pinned policy");
  };

  auto* create = mooclet_cmd->add_subcommand("create", "Create a MOOClet");
  create->add_option("--name", name, "Name")->required();
  add_policy_flags(create);
  create->add_flag("--no-sticky", no_sticky, "Let learners receive different versions over time");
  create->callback([&] {
    action = [&] {
      Request r{"POST", "/v1/mooclets", {}, {},
                json{{"name", name}, {"policy", policy_body(policy, alpha, beta, context_var, policy_version)},
                     {"sticky", !no_sticky}}.dump()};
      return emit(opt, client.call(r), [](const json& b) { std::cout << b["id"].get<std::string>() << "\n"; });
    };
  });

  auto* list = mooclet_cmd->add_subcommand("list", "List MOOClets");
  list->callback([&] {
    action = [&] {
      return emit(opt, client.call({"GET", "/v1/mooclets", {}, {}, ""}), [](const json& b) {
        for (const auto& m : b["mooclets"]) {
          std::cout << m["id"].get<std::string>() << "\t" << m["name"].get<std::string>() << "\t"
                    << m["policy"]["kind"].get<std::string>() << "\t" << m["versions"].size() << " versions";
          if (!m["pinned_version"].is_null()) std::cout << "\tpinned=" << m["pinned_version"].get<std::string>();
          std::cout << "\n";
        }
      });
    };
  });

  auto* pin = mooclet_cmd->add_subcommand("pin", "Pin a version, or unpin");
  pin->add_option("--id", id, "MOOClet id")->required();
  auto* pin_version = pin->add_option("--version", version, "Version id to pin");
  pin->add_flag("--unpin", unpin, "Remove the pin")->excludes(pin_version);
  pin->callback([&] {
    action = [&] {
      if (!unpin && version.empty()) {
        std::cerr << "error (validation): pass --version or --unpin\n";
        return int{kValidation};
      }
      Request r{"POST", "/v1/mooclet/" + id + "/pin", {}, {},
                json{{"version", unpin ? json(nullptr) : json(version)}}.dump()};
      return emit(opt, client.call(r), [](const json& b) {
        std::cout << b["id"].get<std::string>() << " pinned="
                  << (b["pinned_version"].is_null() ? std::string("none") : b["pinned_version"].get<std::string>())
                  << "\n";
      });
    };
  });

  // version add
  auto* version_cmd = app.add_subcommand("version", "Manage versions");
  version_cmd->require_subcommand(1);
  std::string content = "null", content_file;
  double weight = 1.0;
  auto* vadd = version_cmd->add_subcommand("add", "Add a version to a MOOClet");
  vadd->add_option("--mooclet", id, "MOOClet id")->required();
  vadd->add_option("--name", name, "Name");
  auto* content_opt = vadd->add_option("--content", content, "Content document (JSON, or plain text)");
  vadd->add_option("--content-file", content_file, "Read the content document from a file")->excludes(content_opt);
  vadd->add_option("--weight", weight, "Nonnegative weight");
  vadd->callback([&] {
    action = [&] {
      const std::string raw = content_file.empty() ? content : read_file(content_file);
      json doc = json::parse(raw, nullptr, false);
      if (doc.is_discarded()) doc = raw;
      Request r{"POST", "/v1/mooclet/" + id + "/versions", {}, {},
                json{{"name", name}, {"content", doc}, {"weight", weight}}.dump()};
      return emit(opt, client.call(r), [](const json& b) { std::cout << b["id"].get<std::string>() << "\n"; });
    };
  });

  // policy set
  auto* policy_cmd = app.add_subcommand("policy", "Manage assignment policies");
  policy_cmd->require_subcommand(1);
  auto* pset = policy_cmd->add_subcommand("set", "Set a MOOClet's policy");
  pset->add_option("--mooclet", id, "MOOClet id")->required();
  add_policy_flags(pset);
  pset->callback([&] {
    action = [&] {
      Request r{"POST", "/v1/mooclet/" + id + "/policy", {}, {},
                policy_body(policy, alpha, beta, context_var, policy_version).dump()};
      return emit(opt, client.call(r), [](const json& b) {
        std::cout << b["id"].get<std::string>() << " policy=" << b["policy"]["kind"].get<std::string>() << "\n";
      });
    };
  });

  // value push
  auto* value_cmd = app.add_subcommand("value", "Write to the User Variable Store");
  value_cmd->require_subcommand(1);
  std::string learner, variable, value_text;
  auto* vpush = value_cmd->add_subcommand("push", "Append one value");
  vpush->add_option("--learner", learner, "Learner identity")->required();
  vpush->add_option("--variable", variable, "Variable name")->required();
  vpush->add_option("--value", value_text, "Value (number, true/false, or text)")->required();
  vpush->callback([&] {
    action = [&] {
      Request r{"POST", "/v1/value", {}, {},
                json{{"learner", learner}, {"variable", variable}, {"value", parse_cli_value(value_text)}}.dump()};
      return emit(opt, client.call(r), [](const json& b) {
        std::cout << b["timestamp"].get<std::string>() << "\t" << b["learner"].get<std::string>() << "\t"
                  << b["variable"].get<std::string>() << "\t" << b["value"].dump() << "\n";
      });
    };
  });

  // vars list|define
  auto* vars_cmd = app.add_subcommand("vars", "Inspect the variable catalog");
  vars_cmd->require_subcommand(1);
  auto* vlist = vars_cmd->add_subcommand("list", "List every variable being collected");
  vlist->callback([&] {
    action = [&] {
      return emit(opt, client.call({"GET", "/v1/variables", {}, {}, ""}), [](const json& b) {
        for (const auto& v : b["variables"])
          std::cout << v["name"].get<std::string>() << "\t" << v["kind"].get<std::string>() << "\t"
                    << v["value_type"].get<std::string>() << "\t" << v["description"].get<std::string>() << "\n";
      });
    };
  });
  std::string kind = "outcome", value_type = "number", description;
  std::vector<double> bounds;
  auto* vdefine = vars_cmd->add_subcommand("define", "Declare a variable");
  vdefine->add_option("--name", name, "Variable name")->required();
  vdefine->add_option("--kind", kind, "outcome|covariate|context|system");
  vdefine->add_option("--type", value_type, "number|text|boolean");
  vdefine->add_option("--description", description, "Description");
  vdefine->add_option("--bounds", bounds, "Clamp bounds lo hi for noisy sums")->expected(2);
  vdefine->callback([&] {
    action = [&] {
      json body = {{"name", name}, {"kind", kind}, {"value_type", value_type}, {"description", description}};
      if (!bounds.empty()) body["bounds"] = bounds;
      return emit(opt, client.call({"POST", "/v1/variables", {}, {}, body.dump()}),
                  [](const json& b) { std::cout << b["name"].get<std::string>() << "\n"; });
    };
  });

  // export
  std::string out_path;
  auto* export_cmd = app.add_subcommand("export", "Export records as CSV");
  export_cmd->add_option("--out", out_path, "Write to a file instead of standard output");
  export_cmd->add_option("--learner", learner, "Only this learner pseudonym");
  export_cmd->add_option("--variable", variable, "Only this variable");
  export_cmd->callback([&] {
    action = [&] {
      Request r{"GET", "/v1/export", {}, {}, ""};
      if (!learner.empty()) r.query["learner"] = learner;
      if (!variable.empty()) r.query["variable"] = variable;
      auto resp = client.call(r);
      if (resp.status < 400 && !out_path.empty()) {
        write_file(out_path, resp.body);
        if (opt.format == "json") std::cout << json{{"path", out_path}, {"bytes", resp.body.size()}}.dump() << "\n";
        else std::cout << "wrote " << resp.body.size() << " bytes to " << out_path << "\n";
        return int{kOk};
      }
      return emit(opt, resp, [](const json&) {});
    };
  });

  // rubric seed|list|options
  auto* rubric_cmd = app.add_subcommand("rubric", "Manage the design rubric");
  rubric_cmd->require_subcommand(1);
  std::string questions_file, question;
  auto* rseed = rubric_cmd->add_subcommand("seed", "Create one question per nonblank line of a file");
  rseed->add_option("--file", questions_file, "Plain-text question file")->required();
  rseed->callback([&] {
    action = [&] {
      std::istringstream lines(read_file(questions_file));
      std::string line;
      int rc = kOk;
      while (rc == kOk && std::getline(lines, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        Request r{"POST", "/v1/rubric/questions", {}, {}, json{{"prompt", line}}.dump()};
        rc = emit(opt, client.call(r), [](const json& b) {
          std::cout << b["id"].get<std::string>() << "\t" << b["prompt"].get<std::string>() << "\n";
        });
      }
      return rc;
    };
  });
  auto* rlist = rubric_cmd->add_subcommand("list", "List questions");
  rlist->callback([&] {
    action = [&] {
      return emit(opt, client.call({"GET", "/v1/rubric/questions", {}, {}, ""}), [](const json& b) {
        for (const auto& q : b["questions"])
          std::cout << q["id"].get<std::string>() << "\t" << q["prompt"].get<std::string>() << "\n";
      });
    };
  });
  auto* roptions = rubric_cmd->add_subcommand("options", "Show a question's ranked options");
  roptions->add_option("--question", question, "Question id")->required();
  roptions->callback([&] {
    action = [&] {
      return emit(opt, client.call({"GET", "/v1/rubric/question/" + question + "/options", {}, {}, ""}),
                  [](const json& b) {
                    for (const auto& o : b["options"])
                      std::cout << o["count"].get<std::size_t>() << "\t" << o["label"].get<std::string>() << "\n";
                  });
    };
  });

  // sim run|compare
  auto* sim_cmd = app.add_subcommand("sim", "Run policy simulations");
  sim_cmd->require_subcommand(1);
  std::string sim_config, trace_path;
  std::optional<std::uint64_t> sim_seed;
  auto* srun = sim_cmd->add_subcommand("run", "Run one simulation");
  srun->add_option("--config", sim_config, "Simulation config (JSON)")->required();
  srun->add_option("--seed", sim_seed, "Override the config's seed");
  srun->add_option("--out", out_path, "Write the report to a file");
  srun->add_option("--trace", trace_path, "Write the per-step trace CSV to a file");
  srun->callback([&] {
    action = [&] {
      auto cfg = mooclet::sim::config_from_json(json::parse(read_file(sim_config)));
      if (sim_seed) cfg.seed = *sim_seed;
      const auto report = mooclet::sim::run_simulation(cfg);
      const json j = mooclet::sim::to_json(report);
      if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
      if (!trace_path.empty()) write_file(trace_path, mooclet::sim::trace_csv(report));
      if (opt.format == "json") {
        std::cout << j.dump() << "\n";
      } else {
        std::cout << "seed " << cfg.seed << ", horizon " << cfg.horizon << "\n";
        for (const auto& a : report.arms)
          std::cout << "  " << a.arm << "\t" << a.assignments << " assignments\n";
        std::cout << "cumulative regret " << report.cumulative_regret << "\n"
                  << "best-arm share, final window " << report.final_window_best_arm_share << "\n";
        for (const auto& b : report.buckets)
          std::cout << "  bucket " << b.bucket << ": best-arm share, final quarter "
                    << b.best_arm_share_final_quarter << "\n";
      }
      return int{kOk};
    };
  });
  auto* scompare = sim_cmd->add_subcommand("compare", "Compare policies on paired seeds");
  scompare->add_option("--config", sim_config, "Comparison config (JSON)")->required();
  scompare->add_option("--out", out_path, "Write the comparison to a file");
  scompare->callback([&] {
    action = [&] {
      const json cfg = json::parse(read_file(sim_config));
      const auto cmp = mooclet::sim::compare_policies(mooclet::sim::config_from_json(cfg),
                                                      mooclet::sim::runs_from_json(cfg));
      const json j = mooclet::sim::to_json(cmp);
      if (!out_path.empty()) write_file(out_path, j.dump(2) + "\n");
      if (opt.format == "json") {
        std::cout << j.dump() << "\n";
      } else {
        for (const auto& row : cmp.rows)
          std::cout << row.label << "\tmean regret " << row.mean_regret << "\tmean final-window best-arm share "
                    << row.mean_final_window_share << "\n";
      }
      return int{kOk};
    };
  });

  // serve
  std::string serve_config;
  auto* serve = app.add_subcommand("serve", "Run the HTTP service");
  serve->add_option("--config", serve_config, "Service config file")->required();
  serve->callback([&] {
    action = [&] {
      const auto cfg = mooclet::load_config(serve_config);
      mooclet::EngineOptions eo;
      eo.data_dir = cfg.data_dir;
      eo.seed = cfg.seed;
      eo.noise_test_mode = cfg.noise_test_mode;
      eo.snapshot_every = cfg.snapshot_every;
      mooclet::Engine engine(std::move(eo));
      mooclet::api::Service service(engine, cfg.principals);
      mooclet::HttpServer server(service);
      const int port = server.bind(cfg.host, cfg.port);
      if (port < 0) {
        std::cerr << "error (internal): cannot bind " << cfg.host << ":" << cfg.port << "\n";
        return int{kInternal};
      }
      std::cerr << "listening on " << cfg.host << ":" << port << "\n";
      server.listen();
      return int{kOk};
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : int{kValidation};
  }
  try {
    return action ? action() : int{kValidation};
  } catch (const mooclet::Error& e) {
    const auto code = mooclet::api::wire_code(e.code());
    if (opt.format == "json") std::cout << json{{"error", {{"code", code}, {"message", e.what()}}}}.dump() << "\n";
    else std::cerr << "error (" << code << "): " << e.what() << "\n";
    return exit_code_for(code);
  } catch (const json::exception& e) {
    std::cerr << "error (validation): " << e.what() << "\n";
    return kValidation;
  } catch (const std::exception& e) {
    std::cerr << "error (internal): " << e.what() << "\n";
    return kInternal;
  }
}
