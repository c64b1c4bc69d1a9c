#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>

#include <nlohmann/json.hpp>

namespace mooclet {

// Append-only mutation log with periodic full-state snapshots.
//
// Layout of the data directory:
//   events.log     one JSON object per line, each carrying a "seq" field
//   snapshot.json  {"seq": N, "state": {...}} covering events 1..N
//
// Without a directory the journal only counts sequence numbers.
class Journal {
 public:
  explicit Journal(std::optional<std::filesystem::path> dir = std::nullopt);

  Journal(const Journal&) = delete;
  Journal& operator=(const Journal&) = delete;

  bool persistent() const noexcept { return dir_.has_value(); }
  const std::optional<std::filesystem::path>& dir() const noexcept { return dir_; }

  // Stamps `event` with the next sequence number and writes it.
  std::uint64_t append(nlohmann::json event);
  std::uint64_t seq() const;

  // Reads the snapshot (if any) and then every logged event after it.
  // Truncated trailing lines from an interrupted write are ignored.
  void load(const std::function<void(const nlohmann::json&)>& on_snapshot,
            const std::function<void(const nlohmann::json&)>& on_event);

  void write_snapshot(std::uint64_t seq, const nlohmann::json& state);
  std::uint64_t snapshot_seq() const;

 private:
  mutable std::mutex mu_;
  std::optional<std::filesystem::path> dir_;
  std::ofstream log_;
  std::uint64_t seq_ = 0;
  std::uint64_t snapshot_seq_ = 0;
};

}  // namespace mooclet
