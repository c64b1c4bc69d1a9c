#include "mooclet/config.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "mooclet/errors.hpp"

namespace mooclet {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <class T>
T number(std::string_view text, int line) {
  T out{};
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
  if (ec != std::errc{} || ptr != text.data() + text.size())
    fail(ErrorCode::validation, "config line " + std::to_string(line) + ": bad number '" +
                                    std::string(text) + "'");
  return out;
}

bool boolean(std::string_view text, int line) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  fail(ErrorCode::validation, "config line " + std::to_string(line) + ": bad boolean '" +
                                  std::string(text) + "'");
}

}  // namespace

ServiceConfig parse_config(std::string_view text) {
  ServiceConfig cfg;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line = 0;
  while (std::getline(in, raw)) {
    ++line;
    auto s = trim(raw);
    if (s.empty() || s.front() == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string_view::npos)
      fail(ErrorCode::validation, "config line " + std::to_string(line) + ": expected key = value");
    const auto key = trim(s.substr(0, eq));
    const auto value = trim(s.substr(eq + 1));
    if (key == "listen") {
      const auto colon = value.rfind(':');
      if (colon == std::string_view::npos)
        fail(ErrorCode::validation, "config line " + std::to_string(line) + ": listen needs host:port");
      cfg.host = std::string(value.substr(0, colon));
      cfg.port = number<int>(value.substr(colon + 1), line);
    } else if (key == "data_dir") {
      if (value.empty()) cfg.data_dir.reset();
      else cfg.data_dir = std::filesystem::path(std::string(value));
    } else if (key == "noise_test_mode") {
      cfg.noise_test_mode = boolean(value, line);
    } else if (key == "seed") {
      cfg.seed = number<std::uint64_t>(value, line);
    } else if (key == "snapshot_every") {
      cfg.snapshot_every = number<std::uint64_t>(value, line);
    } else if (key == "principal") {
      std::istringstream fields{std::string(value)};
      std::string name, role, token, epsilon;
      fields >> name >> role >> token >> epsilon;
      auto parsed = parse_role(role);
      if (token.empty() || !parsed)
        fail(ErrorCode::validation, "config line " + std::to_string(line) +
                                        ": principal = <name> <role> <token> [epsilon_total]");
      Principal p{name, token, *parsed, 0.0};
      if (!epsilon.empty()) p.epsilon_total = number<double>(epsilon, line);
      cfg.principals.push_back(std::move(p));
    } else {
      fail(ErrorCode::validation, "config line " + std::to_string(line) + ": unknown key '" +
                                      std::string(key) + "'");
    }
  }
  return cfg;
}

ServiceConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorCode::not_found, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str());
}

}  // namespace mooclet
