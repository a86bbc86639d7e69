#pragma once

#include <atomic>
#include <cstdint>
#include <map>
#include <mutex>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "sbash/dispatch.hpp"
#include "sbash/session_log.hpp"
#include "sbash/vfs.hpp"

namespace sbash {

enum class Transport { Tcp, Ssh };

/// "tcp" or "ssh"; throws ParseError.
Transport parse_transport(std::string_view text);

struct ServerOptions {
  std::string bind = "127.0.0.1:2222";  // host:port, port 0 picks a free one
  Transport transport = Transport::Tcp;
  std::size_t max_line = 8192;
};

/// Removes telnet IAC sequences and ANSI/VT escape sequences, applies
/// backspace/DEL, and drops remaining control bytes other than TAB.
std::string clean_terminal_input(std::string_view raw);

/// Converts bare "\n" to "\r\n" for a raw terminal.
std::string to_crlf(std::string_view text);

/// Telnet-style line service: banner, login and password prompts, then a
/// prompt loop feeding Session::dispatch. Each connection runs on its own
/// thread with its own mutated copy of the base filesystem.
class Server {
 public:
  Server(const SystemProfile& profile, const VfsState& base_state, const Pipeline* pipeline,
         JsonlSink& sink, ServerOptions options, Clock clock = system_clock_seconds);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting. Throws BindError.
  void start();
  std::uint16_t port() const { return port_; }
  /// Closes the listening socket and every session, joins all threads and
  /// flushes the log. Safe to call more than once.
  void stop();

  std::uint64_t sessions_started() const { return counter_.load(); }

 private:
  void accept_loop();
  void run_session(int fd, std::string peer, std::uint64_t number);

  const SystemProfile& profile_;
  const VfsState& base_;
  const Pipeline* pipeline_;
  JsonlSink& sink_;
  ServerOptions options_;
  Clock clock_;

  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> stopping_{false};
  std::atomic<std::uint64_t> counter_{0};
  std::thread acceptor_;
  std::mutex mu_;
  std::map<std::uint64_t, int> open_fds_;
  std::vector<std::thread> workers_;
};

}  // namespace sbash
