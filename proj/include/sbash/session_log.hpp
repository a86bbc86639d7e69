#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <mutex>
#include <optional>
#include <string>

#include "sbash/dispatch.hpp"

namespace sbash {

using TimePoint = std::chrono::system_clock::time_point;

/// UTC, millisecond precision: 2026-10-16T09:12:01.123Z
std::string format_timestamp(TimePoint t);

struct SessionRecord {
  std::string session_id;
  std::string peer_address;
  TimePoint start_time;
  std::optional<TimePoint> end_time;
  std::string username;
  std::string profile_id;
};

struct CommandRecord {
  std::string session_id;
  std::uint64_t seq = 0;
  TimePoint timestamp;
  std::string raw_input;
  CommandVariant command_class = CommandVariant::Rejected;
  std::string output;
  double latency_ms = 0;
  std::optional<std::string> backend_error;
};

/// One JSON object, no trailing newline. Sessions are written twice, with
/// "event" set to "open" and then "close".
std::string to_json_line(const SessionRecord& record, std::string_view event);
std::string to_json_line(const CommandRecord& record);

/// Append-only JSON Lines file shared by all sessions. Each record goes out
/// in a single write(2) on an O_APPEND descriptor under a mutex, so lines
/// never interleave. While the file cannot be written, lines wait in memory
/// (oldest dropped beyond `buffer_cap`) and are retried on the next append.
class JsonlSink {
 public:
  explicit JsonlSink(std::filesystem::path path, std::size_t buffer_cap = 10000);
  ~JsonlSink();
  JsonlSink(const JsonlSink&) = delete;
  JsonlSink& operator=(const JsonlSink&) = delete;

  /// Returns false when the line had to be buffered.
  bool append(const SessionRecord& record, std::string_view event);
  bool append(const CommandRecord& record);
  bool append_line(std::string line);

  /// Retries buffered lines; true when none remain.
  bool flush();

  std::size_t buffered() const;
  std::size_t dropped() const;
  std::size_t written() const;
  const std::filesystem::path& path() const { return path_; }

 private:
  bool ensure_open_locked();
  bool write_locked(const std::string& line);
  bool drain_locked();

  std::filesystem::path path_;
  std::size_t cap_;
  mutable std::mutex mu_;
  int fd_ = -1;
  std::deque<std::string> pending_;
  std::size_t dropped_ = 0;
  std::size_t written_ = 0;
};

}  // namespace sbash
