#include "mooclet/journal.hpp"

#include <string>

#include "mooclet/errors.hpp"

namespace mooclet {

namespace fs = std::filesystem;
using nlohmann::json;

Journal::Journal(std::optional<fs::path> dir) : dir_(std::move(dir)) {
  if (dir_) fs::create_directories(*dir_);
}

std::uint64_t Journal::append(json event) {
  std::lock_guard lock(mu_);
  event["seq"] = ++seq_;
  if (dir_) {
    if (!log_.is_open()) {
      log_.open(*dir_ / "events.log", std::ios::app | std::ios::binary);
      if (!log_) fail(ErrorCode::internal, "cannot open " + (*dir_ / "events.log").string());
    }
    log_ << event.dump() << '\n';
    log_.flush();
    if (!log_) fail(ErrorCode::internal, "write to events.log failed");
  }
  return seq_;
}

std::uint64_t Journal::seq() const {
  std::lock_guard lock(mu_);
  return seq_;
}

std::uint64_t Journal::snapshot_seq() const {
  std::lock_guard lock(mu_);
  return snapshot_seq_;
}

void Journal::load(const std::function<void(const json&)>& on_snapshot,
                   const std::function<void(const json&)>& on_event) {
  std::lock_guard lock(mu_);
  if (!dir_) return;
  std::uint64_t base = 0;
  if (std::ifstream in(*dir_ / "snapshot.json"); in) {
    json snap = json::parse(in);
    base = snap.at("seq").get<std::uint64_t>();
    on_snapshot(snap.at("state"));
  }
  snapshot_seq_ = base;
  seq_ = base;
  const auto path = *dir_ / "events.log";
  std::ifstream in(path, std::ios::binary);
  std::string line;
  std::streamoff good = 0;
  std::optional<std::streamoff> torn;
  bool unterminated = false;
  while (std::getline(in, line)) {
    const std::streamoff start = good;
    good = in.eof() ? start + static_cast<std::streamoff>(line.size()) : static_cast<std::streamoff>(in.tellg());
    unterminated = in.eof();
    if (line.empty()) continue;
    json event = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (event.is_discarded()) {
      // Only a torn final line is tolerated; it is cut off so that later
      // appends start on a fresh line.
      if (in.eof() || in.peek() == std::char_traits<char>::eof()) {
        torn = start;
        break;
      }
      fail(ErrorCode::state_corruption, "corrupt line in events.log");
    }
    const auto seq = event.at("seq").get<std::uint64_t>();
    if (seq <= base) continue;
    if (seq != seq_ + 1) fail(ErrorCode::state_corruption, "gap in events.log sequence");
    seq_ = seq;
    on_event(event);
  }
  in.close();
  if (torn) {
    fs::resize_file(path, static_cast<std::uintmax_t>(*torn));
  } else if (unterminated) {
    std::ofstream(path, std::ios::app | std::ios::binary) << '\n';
  }
}

void Journal::write_snapshot(std::uint64_t seq, const json& state) {
  if (!dir_) return;
  const auto tmp = *dir_ / "snapshot.json.tmp";
  {
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    out << json{{"seq", seq}, {"state", state}}.dump() << '\n';
    out.flush();
    if (!out) fail(ErrorCode::internal, "failed to write snapshot");
  }
  fs::rename(tmp, *dir_ / "snapshot.json");
  std::lock_guard lock(mu_);
  snapshot_seq_ = seq;
}

}  // namespace mooclet
