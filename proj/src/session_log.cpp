#include "sbash/session_log.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <cerrno>
#include <cstdio>
#include <ctime>

#include <json.hpp>

namespace sbash {

using nlohmann::json;

std::string format_timestamp(TimePoint t) {
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(t.time_since_epoch()).count();
  std::time_t secs = static_cast<std::time_t>(ms / 1000);
  long frac = static_cast<long>(ms % 1000);
  if (frac < 0) {
    frac += 1000;
    --secs;
  }
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03ldZ", tm.tm_year + 1900,
                tm.tm_mon + 1, tm.tm_mday, tm.tm_hour, tm.tm_min, tm.tm_sec, frac);
  return buf;
}

std::string to_json_line(const SessionRecord& r, std::string_view event) {
  json j = {{"type", "session"},
            {"event", event},
            {"session_id", r.session_id},
            {"peer_address", r.peer_address},
            {"username", r.username},
            {"profile_id", r.profile_id},
            {"start_time", format_timestamp(r.start_time)},
            {"end_time", r.end_time ? json(format_timestamp(*r.end_time)) : json(nullptr)}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

std::string to_json_line(const CommandRecord& r) {
  json j = {{"type", "command"},
            {"session_id", r.session_id},
            {"seq", r.seq},
            {"timestamp", format_timestamp(r.timestamp)},
            {"raw_input", r.raw_input},
            {"class", to_string(r.command_class)},
            {"output", r.output},
            {"latency_ms", r.latency_ms},
            {"backend_error", r.backend_error ? json(*r.backend_error) : json(nullptr)}};
  return j.dump(-1, ' ', false, json::error_handler_t::replace);
}

JsonlSink::JsonlSink(std::filesystem::path path, std::size_t buffer_cap)
    : path_(std::move(path)), cap_(buffer_cap) {
  std::lock_guard lock(mu_);
  ensure_open_locked();
}

JsonlSink::~JsonlSink() {
  std::lock_guard lock(mu_);
  drain_locked();
  if (fd_ >= 0) ::close(fd_);
}

bool JsonlSink::ensure_open_locked() {
  if (fd_ >= 0) return true;
  fd_ = ::open(path_.c_str(), O_WRONLY | O_APPEND | O_CREAT | O_CLOEXEC, 0640);
  return fd_ >= 0;
}

bool JsonlSink::write_locked(const std::string& line) {
  if (!ensure_open_locked()) return false;
  std::size_t off = 0;
  while (off < line.size()) {
    const ssize_t n = ::write(fd_, line.data() + off, line.size() - off);
    if (n < 0) {
      if (errno == EINTR) continue;
      ::close(fd_);
      fd_ = -1;
      return false;
    }
    off += static_cast<std::size_t>(n);
  }
  ++written_;
  return true;
}

bool JsonlSink::drain_locked() {
  while (!pending_.empty()) {
    if (!write_locked(pending_.front())) return false;
    pending_.pop_front();
  }
  return true;
}

bool JsonlSink::append_line(std::string line) {
  line += '\n';
  std::lock_guard lock(mu_);
  if (drain_locked() && write_locked(line)) return true;
  pending_.push_back(std::move(line));
  while (pending_.size() > cap_) {
    pending_.pop_front();
    ++dropped_;
  }
  return false;
}

bool JsonlSink::append(const SessionRecord& record, std::string_view event) {
  return append_line(to_json_line(record, event));
}

bool JsonlSink::append(const CommandRecord& record) { return append_line(to_json_line(record)); }

bool JsonlSink::flush() {
  std::lock_guard lock(mu_);
  return drain_locked();
}

std::size_t JsonlSink::buffered() const {
  std::lock_guard lock(mu_);
  return pending_.size();
}

std::size_t JsonlSink::dropped() const {
  std::lock_guard lock(mu_);
  return dropped_;
}

std::size_t JsonlSink::written() const {
  std::lock_guard lock(mu_);
  return written_;
}

}  // namespace sbash
