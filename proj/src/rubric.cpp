#include "mooclet/rubric.hpp"

#include <algorithm>
#include <cctype>
#include <set>

#include "mooclet/errors.hpp"

namespace mooclet {

using nlohmann::json;

std::string_view to_string(RespondentRole role) noexcept {
  return role == RespondentRole::instructor ? "instructor" : "researcher";
}

std::optional<RespondentRole> parse_respondent_role(std::string_view text) noexcept {
  if (text == "instructor") return RespondentRole::instructor;
  if (text == "researcher") return RespondentRole::researcher;
  return std::nullopt;
}

std::string normalize_label(std::string_view label) {
  std::string out;
  bool pending_space = false;
  for (unsigned char c : label) {
    if (std::isspace(c)) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += static_cast<char>(std::tolower(c));
  }
  return out;
}

namespace {

OptionEntry* find_option(Question& q, const std::string& normalized) {
  for (auto& o : q.options)
    if (normalize_label(o.label) == normalized) return &o;
  return nullptr;
}

}  // namespace

Rubric::Rubric(ClockFn clock) : stamper_(std::move(clock)) {}

Question& Rubric::require(const std::string& question_id) {
  auto it = questions_.find(question_id);
  if (it == questions_.end()) fail(ErrorCode::not_found, "question '" + question_id + "' not found");
  return it->second;
}

const Question& Rubric::require(const std::string& question_id) const {
  return const_cast<Rubric*>(this)->require(question_id);
}

Question Rubric::add_question(std::string prompt, const std::vector<std::string>& seed_options) {
  if (normalize_label(prompt).empty()) fail(ErrorCode::validation, "question prompt must be nonempty");
  std::lock_guard lock(mu_);
  Question q{"q" + std::to_string(next_id_), std::move(prompt), {}};
  std::set<std::string> seen;
  for (const auto& label : seed_options) {
    const auto norm = normalize_label(label);
    if (norm.empty()) fail(ErrorCode::validation, "option labels must be nonempty");
    if (!seen.insert(norm).second)
      fail(ErrorCode::validation, "duplicate option label '" + label + "'");
    q.options.push_back({label, 0, true});
  }
  if (sink_) sink_({{"type", "rubric.question"}, {"question", q}});
  apply_question(q);
  return q;
}

std::vector<Question> Rubric::seed_from_text(std::string_view text) {
  std::vector<Question> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    auto line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (!normalize_label(line).empty()) out.push_back(add_question(std::string(line)));
    start = end + 1;
  }
  return out;
}

void Rubric::apply_question(Question question) {
  const auto n = std::stoull(question.id.substr(1));
  next_id_ = std::max<std::size_t>(next_id_, n + 1);
  questions_.insert_or_assign(question.id, std::move(question));
}

ResponseRecord Rubric::submit_response(const std::string& question_id, RespondentRole role,
                                       std::optional<std::string> free_text,
                                       std::vector<std::string> selections) {
  if (free_text && normalize_label(*free_text).empty()) free_text.reset();
  if (!free_text && selections.empty())
    fail(ErrorCode::validation, "a response needs free text or at least one selection");
  std::lock_guard lock(mu_);
  Question& q = require(question_id);
  for (const auto& s : selections)
    if (find_option(q, normalize_label(s)) == nullptr)
      fail(ErrorCode::validation, "no option '" + s + "' on question " + question_id);
  ResponseRecord r{question_id, role, std::move(free_text), std::move(selections),
                   stamper_.next()};
  if (sink_) sink_({{"type", "rubric.response"}, {"response", r}});
  apply_response(r);
  return r;
}

// A response adds at most one to any label, whether it selected the label,
// wrote it as free text, or both.
void Rubric::apply_response(const ResponseRecord& r) {
  stamper_.observe(r.timestamp);
  Question& q = require(r.question);
  std::set<std::string> touched;
  for (const auto& s : r.selections) touched.insert(normalize_label(s));
  if (r.free_text) {
    const auto norm = normalize_label(*r.free_text);
    if (find_option(q, norm) == nullptr) {
      q.options.push_back({*r.free_text, 1, false});
      touched.erase(norm);
    } else {
      touched.insert(norm);
    }
  }
  for (const auto& norm : touched)
    if (auto* o = find_option(q, norm)) ++o->count;
  responses_.push_back(r);
}

std::vector<OptionEntry> Rubric::options(const std::string& question_id) const {
  std::lock_guard lock(mu_);
  auto out = require(question_id).options;
  std::sort(out.begin(), out.end(), [](const OptionEntry& a, const OptionEntry& b) {
    if (a.count != b.count) return a.count > b.count;
    return normalize_label(a.label) < normalize_label(b.label);
  });
  return out;
}

std::vector<Question> Rubric::questions() const {
  std::lock_guard lock(mu_);
  std::vector<Question> out;
  for (const auto& [id, q] : questions_) out.push_back(q);
  std::sort(out.begin(), out.end(), [](const Question& a, const Question& b) {
    return std::stoull(a.id.substr(1)) < std::stoull(b.id.substr(1));
  });
  return out;
}

std::vector<ResponseRecord> Rubric::responses(const std::string& question_id) const {
  std::lock_guard lock(mu_);
  require(question_id);
  std::vector<ResponseRecord> out;
  for (const auto& r : responses_)
    if (r.question == question_id) out.push_back(r);
  return out;
}

void Rubric::apply(const json& event) {
  std::lock_guard lock(mu_);
  const auto type = event.at("type").get<std::string>();
  if (type == "rubric.question") apply_question(event.at("question").get<Question>());
  else if (type == "rubric.response") apply_response(event.at("response").get<ResponseRecord>());
}

json Rubric::snapshot(const std::function<void()>& under_lock) const {
  std::lock_guard lock(mu_);
  json qs = json::array();
  for (const auto& [id, q] : questions_) qs.push_back(q);
  if (under_lock) under_lock();
  return {{"questions", qs}, {"responses", responses_}};
}

void Rubric::restore(const json& snapshot) {
  std::lock_guard lock(mu_);
  questions_.clear();
  responses_.clear();
  next_id_ = 1;
  for (const auto& q : snapshot.at("questions")) apply_question(q.get<Question>());
  for (const auto& r : snapshot.at("responses")) {
    auto rec = r.get<ResponseRecord>();
    stamper_.observe(rec.timestamp);
    responses_.push_back(std::move(rec));
  }
}

void to_json(json& j, const OptionEntry& option) {
  j = {{"label", option.label}, {"count", option.count}, {"seeded", option.seeded}};
}

void from_json(const json& j, OptionEntry& option) {
  option.label = j.at("label").get<std::string>();
  option.count = j.at("count").get<std::size_t>();
  option.seeded = j.at("seeded").get<bool>();
}

void to_json(json& j, const Question& question) {
  j = {{"id", question.id}, {"prompt", question.prompt}, {"options", question.options}};
}

void from_json(const json& j, Question& question) {
  question.id = j.at("id").get<std::string>();
  question.prompt = j.at("prompt").get<std::string>();
  question.options = j.at("options").get<std::vector<OptionEntry>>();
}

void to_json(json& j, const ResponseRecord& response) {
  j = {{"question", response.question},
       {"role", to_string(response.role)},
       {"free_text", response.free_text ? json(*response.free_text) : json(nullptr)},
       {"selections", response.selections},
       {"timestamp", format_timestamp(response.timestamp)}};
}

void from_json(const json& j, ResponseRecord& response) {
  response.question = j.at("question").get<std::string>();
  response.role = parse_respondent_role(j.at("role").get<std::string>()).value();
  const auto& t = j.at("free_text");
  response.free_text = t.is_null() ? std::nullopt : std::optional<std::string>(t.get<std::string>());
  response.selections = j.at("selections").get<std::vector<std::string>>();
  response.timestamp = parse_timestamp(j.at("timestamp").get<std::string>()).value();
}

}  // namespace mooclet
