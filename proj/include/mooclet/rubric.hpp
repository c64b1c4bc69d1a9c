#pragma once

#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mooclet/clock.hpp"

namespace mooclet {

enum class RespondentRole { instructor, researcher };

std::string_view to_string(RespondentRole role) noexcept;
std::optional<RespondentRole> parse_respondent_role(std::string_view text) noexcept;

// Lowercase, trim, collapse internal runs of whitespace.
std::string normalize_label(std::string_view label);

struct OptionEntry {
  std::string label;  // as first written
  std::size_t count = 0;
  bool seeded = false;
  bool operator==(const OptionEntry&) const = default;
};

struct Question {
  std::string id;
  std::string prompt;
  std::vector<OptionEntry> options;  // insertion order; see Rubric::options
  bool operator==(const Question&) const = default;
};

struct ResponseRecord {
  std::string question;
  RespondentRole role = RespondentRole::instructor;
  std::optional<std::string> free_text;
  std::vector<std::string> selections;
  Timestamp timestamp = 0;
  bool operator==(const ResponseRecord&) const = default;
};

// Survey questions whose option lists grow from respondents' free text.
class Rubric {
 public:
  using Sink = std::function<void(const nlohmann::json&)>;

  explicit Rubric(ClockFn clock);

  void set_sink(Sink sink) { sink_ = std::move(sink); }

  Question add_question(std::string prompt,
                        const std::vector<std::string>& seed_options = {});
  // One question per nonblank line.
  std::vector<Question> seed_from_text(std::string_view text);

  ResponseRecord submit_response(const std::string& question_id,
                                 RespondentRole role,
                                 std::optional<std::string> free_text,
                                 std::vector<std::string> selections);

  // Descending count, ties by normalized label.
  std::vector<OptionEntry> options(const std::string& question_id) const;
  std::vector<Question> questions() const;
  std::vector<ResponseRecord> responses(const std::string& question_id) const;

  void apply(const nlohmann::json& event);
  nlohmann::json snapshot(const std::function<void()>& under_lock = {}) const;
  void restore(const nlohmann::json& snapshot);

 private:
  Question& require(const std::string& question_id);
  const Question& require(const std::string& question_id) const;
  void apply_question(Question question);
  void apply_response(const ResponseRecord& response);

  mutable std::mutex mu_;
  Stamper stamper_;
  Sink sink_;
  std::size_t next_id_ = 1;
  std::map<std::string, Question> questions_;
  std::vector<ResponseRecord> responses_;
};

void to_json(nlohmann::json& j, const OptionEntry& option);
void from_json(const nlohmann::json& j, OptionEntry& option);
void to_json(nlohmann::json& j, const Question& question);
void from_json(const nlohmann::json& j, Question& question);
void to_json(nlohmann::json& j, const ResponseRecord& response);
void from_json(const nlohmann::json& j, ResponseRecord& response);

}  // namespace mooclet
