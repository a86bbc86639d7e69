#include "sbash/listener.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "sbash/errors.hpp"

namespace sbash {

Transport parse_transport(std::string_view text) {
  if (text == "tcp") return Transport::Tcp;
  if (text == "ssh") return Transport::Ssh;
  throw ParseError("transport must be tcp or ssh, got '" + std::string(text) + "'");
}

std::string clean_terminal_input(std::string_view raw) {
  constexpr unsigned char kIac = 255, kSb = 250, kSe = 240;
  std::string out;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    const auto c = static_cast<unsigned char>(raw[i]);
    if (c == kIac) {
      if (i + 1 >= raw.size()) break;
      const auto cmd = static_cast<unsigned char>(raw[i + 1]);
      if (cmd == kIac) {
        ++i;  // escaped 0xFF data byte; not printable input, dropped
      } else if (cmd == kSb) {
        i += 2;
        while (i + 1 < raw.size() && !(static_cast<unsigned char>(raw[i]) == kIac &&
                                       static_cast<unsigned char>(raw[i + 1]) == kSe))
          ++i;
        ++i;
      } else if (cmd >= 251 && cmd <= 254) {
        i += 2;
      } else {
        ++i;
      }
      continue;
    }
    if (c == 0x1b) {
      if (i + 1 >= raw.size()) break;
      const char kind = raw[i + 1];
      if (kind == '[') {
        i += 2;
        while (i < raw.size() && !(raw[i] >= 0x40 && raw[i] <= 0x7e)) ++i;
      } else if (kind == 'O' || kind == ']' ) {
        if (kind == ']') {
          i += 2;
          while (i < raw.size() && raw[i] != '\a' &&
                 !(raw[i] == 0x1b && i + 1 < raw.size() && raw[i + 1] == '\\'))
            ++i;
          if (i < raw.size() && raw[i] == 0x1b) ++i;
        } else {
          i += 2;
        }
      } else {
        ++i;
      }
      continue;
    }
    if (c == 0x08 || c == 0x7f) {
      if (!out.empty()) {
        // Remove a whole UTF-8 character.
        while (!out.empty() && (static_cast<unsigned char>(out.back()) & 0xC0) == 0x80)
          out.pop_back();
        if (!out.empty()) out.pop_back();
      }
      continue;
    }
    if (c < 0x20 && c != '\t') continue;
    out += static_cast<char>(c);
  }
  return out;
}

std::string to_crlf(std::string_view text) {
  std::string out;
  out.reserve(text.size() + text.size() / 16);
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] == '\n' && (i == 0 || text[i - 1] != '\r')) out += '\r';
    out += text[i];
  }
  return out;
}

namespace {

bool send_all(int fd, std::string_view data) {
  while (!data.empty()) {
    const ssize_t n = ::send(fd, data.data(), data.size(), MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      return false;
    }
    data.remove_prefix(static_cast<std::size_t>(n));
  }
  return true;
}

/// Buffered line reader over a socket. Lines end at LF or CR; a CR LF or
/// CR NUL pair counts once.
class LineReader {
 public:
  LineReader(int fd, std::size_t max_line) : fd_(fd), max_(max_line) {}

  bool read_line(std::string& line) {
    line.clear();
    while (true) {
      while (pos_ < buf_.size()) {
        const char c = buf_[pos_++];
        if (skip_next_lf_) {
          skip_next_lf_ = false;
          if (c == '\n' || c == '\0') continue;
        }
        if (c == '\r' || c == '\n') {
          skip_next_lf_ = c == '\r';
          compact();
          return true;
        }
        if (line.size() < max_) line += c;
      }
      compact();
      char chunk[4096];
      const ssize_t n = ::recv(fd_, chunk, sizeof chunk, 0);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) return false;
      buf_.append(chunk, static_cast<std::size_t>(n));
    }
  }

 private:
  void compact() {
    buf_.erase(0, pos_);
    pos_ = 0;
  }

  int fd_;
  std::size_t max_;
  std::string buf_;
  std::size_t pos_ = 0;
  bool skip_next_lf_ = false;
};

std::string peer_string(const sockaddr_storage& addr) {
  char host[NI_MAXHOST], serv[NI_MAXSERV];
  if (getnameinfo(reinterpret_cast<const sockaddr*>(&addr), sizeof addr, host, sizeof host, serv,
                  sizeof serv, NI_NUMERICHOST | NI_NUMERICSERV) != 0)
    return "unknown";
  if (addr.ss_family == AF_INET6) return "[" + std::string(host) + "]:" + serv;
  return std::string(host) + ":" + serv;
}

}  // namespace

Server::Server(const SystemProfile& profile, const VfsState& base_state, const Pipeline* pipeline,
               JsonlSink& sink, ServerOptions options, Clock clock)
    : profile_(profile),
      base_(base_state),
      pipeline_(pipeline),
      sink_(sink),
      options_(std::move(options)),
      clock_(std::move(clock)) {}

Server::~Server() { stop(); }

void Server::start() {
  if (options_.transport == Transport::Ssh)
    throw BindError("the ssh transport is not built into this binary; use --transport tcp");
  const auto colon = options_.bind.rfind(':');
  if (colon == std::string::npos) throw BindError("bind address must be host:port");
  std::string host = options_.bind.substr(0, colon);
  const std::string port = options_.bind.substr(colon + 1);
  if (host.size() >= 2 && host.front() == '[' && host.back() == ']')
    host = host.substr(1, host.size() - 2);

  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  hints.ai_flags = AI_PASSIVE | AI_NUMERICSERV;
  addrinfo* res = nullptr;
  if (const int rc = getaddrinfo(host.empty() ? nullptr : host.c_str(), port.c_str(), &hints, &res);
      rc != 0)
    throw BindError("cannot resolve " + options_.bind + ": " + gai_strerror(rc));

  std::string last_error = "no usable address";
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    const int fd = ::socket(ai->ai_family, ai->ai_socktype | SOCK_CLOEXEC, ai->ai_protocol);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    if (::bind(fd, ai->ai_addr, ai->ai_addrlen) == 0 && ::listen(fd, 64) == 0) {
      listen_fd_ = fd;
      break;
    }
    last_error = std::strerror(errno);
    ::close(fd);
  }
  freeaddrinfo(res);
  if (listen_fd_ < 0) throw BindError("cannot bind " + options_.bind + ": " + last_error);

  sockaddr_storage local{};
  socklen_t len = sizeof local;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&local), &len);
  port_ = ntohs(local.ss_family == AF_INET6
                    ? reinterpret_cast<sockaddr_in6*>(&local)->sin6_port
                    : reinterpret_cast<sockaddr_in*>(&local)->sin_port);
  acceptor_ = std::thread([this] { accept_loop(); });
}

void Server::accept_loop() {
  while (!stopping_) {
    sockaddr_storage addr{};
    socklen_t len = sizeof addr;
    const int fd = ::accept4(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len, SOCK_CLOEXEC);
    if (fd < 0) {
      if (errno == EINTR || errno == ECONNABORTED) continue;
      break;  // listening socket shut down
    }
    std::lock_guard lock(mu_);
    if (stopping_) {
      ::close(fd);
      break;
    }
    const std::uint64_t number = counter_++;
    open_fds_[number] = fd;
    workers_.emplace_back([this, fd, peer = peer_string(addr), number] {
      run_session(fd, peer, number);
    });
  }
}

void Server::run_session(int fd, std::string peer, std::uint64_t number) {
  SessionRecord rec;
  rec.session_id = "s" + std::to_string(number) + "-" + std::to_string(::getpid());
  rec.peer_address = std::move(peer);
  rec.start_time = std::chrono::system_clock::now();
  rec.profile_id = profile_.system_id;

  LineReader reader(fd, options_.max_line);
  std::string line;
  bool open = true;
  if (!profile_.banner.empty()) open = send_all(fd, to_crlf(profile_.banner));
  open = open && send_all(fd, "login: ") && reader.read_line(line);
  std::string login = clean_terminal_input(line);
  open = open && send_all(fd, "Password: ") && reader.read_line(line);

  const UserAccount* account = profile_.find_user(login);
  if (account == nullptr) account = &profile_.default_account();
  rec.username = login.empty() ? account->name : login;
  sink_.append(rec, "open");

  if (open) {
    VfsState state = mutate(base_, profile_.mutation_seed + number);
    state.session_user = account->name;
    if (const VfsNode* home = find_node(state, account->home); home && home->is_dir())
      state.cwd = account->home;
    Session session(profile_, std::move(state), pipeline_, clock_);
    std::uint64_t seq = 0;
    open = send_all(fd, "\r\n" + session.prompt());
    while (open && !stopping_ && reader.read_line(line)) {
      const std::string input = clean_terminal_input(line);
      CommandRecord cmd;
      cmd.session_id = rec.session_id;
      cmd.seq = seq++;
      cmd.timestamp = std::chrono::system_clock::now();
      cmd.raw_input = input;
      auto response = session.dispatch(input);
      cmd.command_class = response.command_class.variant;
      cmd.output = response.output;
      cmd.latency_ms = response.latency_ms;
      cmd.backend_error = response.backend_error;
      sink_.append(cmd);
      if (!response.output.empty() && response.output.back() != '\n') response.output += '\n';
      open = send_all(fd, to_crlf(response.output));
      if (response.end_session) break;
      open = open && send_all(fd, session.prompt());
    }
  }

  {
    std::lock_guard lock(mu_);
    open_fds_.erase(number);
  }
  ::close(fd);
  rec.end_time = std::chrono::system_clock::now();
  sink_.append(rec, "close");
}

void Server::stop() {
  if (stopping_.exchange(true)) {
    if (acceptor_.joinable()) acceptor_.join();
    return;
  }
  if (listen_fd_ >= 0) ::shutdown(listen_fd_, SHUT_RDWR);
  if (acceptor_.joinable()) acceptor_.join();
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
  std::vector<std::thread> workers;
  {
    std::lock_guard lock(mu_);
    for (const auto& [n, fd] : open_fds_) ::shutdown(fd, SHUT_RDWR);
    workers.swap(workers_);
  }
  for (auto& t : workers) t.join();
  sink_.flush();
}

}  // namespace sbash
