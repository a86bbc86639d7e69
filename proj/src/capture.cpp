#include "sbash/capture.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cctype>
#include <cerrno>
#include <cstdlib>
#include <cstring>
#include <ctime>

#include "sbash/errors.hpp"

namespace sbash {

namespace {

constexpr char kMarkerByte = '\x1e';
// Prints RS 'M' <status> RS after every command. Typed as octal escapes so
// the terminal echo of this line never contains the marker byte itself.
constexpr std::string_view kMarkerLine = "printf '\\036M%d\\036' $?\n";

std::vector<std::string> split_ws(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::vector<std::string> reference_argv(std::string_view reference) {
  if (reference == "local") return {"bash", "--norc", "--noprofile"};
  if (reference.starts_with("exec:")) {
    auto argv = split_ws(reference.substr(5));
    if (argv.empty()) throw ReferenceUnreachable("exec: reference names no program");
    return argv;
  }
  if (reference.starts_with("ssh://")) {
    std::string target(reference.substr(6));
    if (!target.empty() && target.back() == '/') target.pop_back();
    std::vector<std::string> argv = {"ssh", "-T", "-o", "BatchMode=yes"};
    const auto at = target.find('@');
    const auto colon = target.rfind(':');
    if (colon != std::string::npos && (at == std::string::npos || colon > at)) {
      argv.insert(argv.end(), {"-p", target.substr(colon + 1)});
      target.resize(colon);
    }
    if (target.empty()) throw ReferenceUnreachable("ssh reference names no host");
    argv.insert(argv.end(), {target, "bash", "--norc", "--noprofile"});
    return argv;
  }
  throw ReferenceUnreachable("unsupported reference '" + std::string(reference) +
                             "' (expected local, exec:<program> or ssh://host)");
}

struct Child {
  pid_t pid = -1;
  int in = -1;
  int out = -1;
};

Child spawn(const std::vector<std::string>& argv, const std::string& user) {
  int in_pipe[2], out_pipe[2], err_pipe[2];
  if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0 ||
      pipe2(err_pipe, O_CLOEXEC) != 0)
    throw ReferenceUnreachable(std::string("pipe: ") + std::strerror(errno));
  const pid_t pid = fork();
  if (pid < 0) throw ReferenceUnreachable(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    setsid();
    dup2(in_pipe[0], 0);
    dup2(out_pipe[1], 1);
    dup2(out_pipe[1], 2);
    setenv("SBASH_REF_USER", user.c_str(), 1);
    std::vector<char*> args;
    for (const auto& a : argv) args.push_back(const_cast<char*>(a.c_str()));
    args.push_back(nullptr);
    execvp(args[0], args.data());
    const int e = errno;
    [[maybe_unused]] auto n = write(err_pipe[1], &e, sizeof e);
    _exit(127);
  }
  close(in_pipe[0]);
  close(out_pipe[1]);
  close(err_pipe[1]);
  int exec_errno = 0;
  const ssize_t n = read(err_pipe[0], &exec_errno, sizeof exec_errno);
  close(err_pipe[0]);
  if (n == sizeof exec_errno) {
    close(in_pipe[1]);
    close(out_pipe[0]);
    waitpid(pid, nullptr, 0);
    throw ReferenceUnreachable("cannot run '" + argv[0] + "': " + std::strerror(exec_errno));
  }
  fcntl(in_pipe[1], F_SETFL, O_NONBLOCK);
  return {pid, in_pipe[1], out_pipe[0]};
}

void reap(Child& c, bool kill_it) {
  if (c.in >= 0) close(c.in);
  if (c.out >= 0) close(c.out);
  c.in = c.out = -1;
  if (c.pid > 0) {
    if (kill_it) kill(-c.pid, SIGKILL);
    waitpid(c.pid, nullptr, 0);
    c.pid = -1;
  }
}

std::size_t count_markers(std::string_view s) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != kMarkerByte || i + 1 >= s.size() || s[i + 1] != 'M') continue;
    std::size_t j = i + 2;
    while (j < s.size() && (std::isdigit(static_cast<unsigned char>(s[j])) || s[j] == '-')) ++j;
    if (j < s.size() && j > i + 2 && s[j] == kMarkerByte) {
      ++n;
      i = j;
    }
  }
  return n;
}

}  // namespace

std::vector<CapturedStep> split_transcript(std::string_view transcript,
                                           const std::vector<std::string>& commands) {
  struct Marker {
    std::size_t begin, end;
    int status;
  };
  std::vector<Marker> markers;
  for (std::size_t i = 0; i < transcript.size(); ++i) {
    if (transcript[i] != kMarkerByte || i + 1 >= transcript.size() || transcript[i + 1] != 'M')
      continue;
    std::size_t j = i + 2;
    while (j < transcript.size() &&
           (std::isdigit(static_cast<unsigned char>(transcript[j])) || transcript[j] == '-'))
      ++j;
    if (j < transcript.size() && j > i + 2 && transcript[j] == kMarkerByte) {
      markers.push_back({i, j + 1, std::atoi(std::string(transcript.substr(i + 2, j - i - 2)).c_str())});
      i = j;
    }
  }

  std::vector<CapturedStep> steps(commands.size());
  for (std::size_t k = 0; k < commands.size(); ++k) steps[k].command = commands[k];
  if (markers.empty()) return steps;
  for (std::size_t k = 0; k < commands.size(); ++k) {
    const std::size_t from = markers[k].end;
    std::size_t to = transcript.size();
    if (k + 1 < markers.size()) {
      to = markers[k + 1].begin;
      steps[k].exit_status = markers[k + 1].status;
      steps[k].completed = true;
    }
    if (from > transcript.size() || k >= markers.size()) break;
    std::string out;
    const auto raw = transcript.substr(from, to - from);
    for (std::size_t i = 0; i < raw.size(); ++i) {
      if (raw[i] == '\r' && i + 1 < raw.size() && raw[i + 1] == '\n') continue;
      out += raw[i];
    }
    steps[k].output = std::move(out);
    if (!steps[k].completed) break;
  }
  return steps;
}

std::vector<CapturedStep> run_reference_session(std::string_view reference,
                                                const std::vector<std::string>& commands,
                                                const CaptureOptions& options) {
  const auto argv = reference_argv(reference);
  std::string input(kMarkerLine);
  for (const auto& c : commands) {
    if (c.find('\n') != std::string::npos)
      throw ValidationError("command", "commands must be single lines");
    input += c;
    input += '\n';
    input += kMarkerLine;
  }

  // The child may exit early (for example after `exit`); writing then must
  // not kill us.
  struct sigaction ignore{}, old{};
  ignore.sa_handler = SIG_IGN;
  sigaction(SIGPIPE, &ignore, &old);

  Child child = spawn(argv, options.user);
  std::string transcript;
  std::size_t written = 0;
  std::size_t seen_markers = 0;
  bool timed_out = false;
  auto deadline = std::chrono::steady_clock::now() + options.timeout;
  char buf[8192];
  while (true) {
    pollfd fds[2];
    nfds_t nfds = 0;
    fds[nfds++] = {child.out, POLLIN, 0};
    if (child.in >= 0) fds[nfds++] = {child.in, POLLOUT, 0};
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    const int rc = poll(fds, nfds, static_cast<int>(left.count()));
    if (rc < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (nfds == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t n = write(child.in, input.data() + written, input.size() - written);
      if (n > 0) written += static_cast<std::size_t>(n);
      if (n < 0 && errno != EAGAIN && errno != EINTR) written = input.size();
      if (written == input.size()) {
        close(child.in);
        child.in = -1;
      }
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t n = read(child.out, buf, sizeof buf);
      if (n < 0 && errno == EINTR) continue;
      if (n <= 0) break;
      transcript.append(buf, static_cast<std::size_t>(n));
      const std::size_t markers = count_markers(transcript);
      if (markers > seen_markers) {
        seen_markers = markers;
        deadline = std::chrono::steady_clock::now() + options.timeout;
      }
      if (seen_markers == commands.size() + 1) {
        // Drain briefly so the shell can exit on its own.
        deadline = std::min(deadline, std::chrono::steady_clock::now() + std::chrono::seconds(2));
      }
    }
  }
  sigaction(SIGPIPE, &old, nullptr);
  reap(child, true);

  if (seen_markers == 0) {
    std::string head = transcript.substr(0, 300);
    throw ReferenceUnreachable("reference shell did not start" +
                               (head.empty() ? std::string() : ": " + head));
  }
  auto steps = split_transcript(transcript, commands);
  if (timed_out)
    for (auto& s : steps)
      if (!s.completed) {
        s.timed_out = true;
        s.output.clear();
      }
  return steps;
}

std::vector<CommandSpec> parse_command_list(std::string_view text) {
  std::vector<CommandSpec> out;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string_view::npos || tab + 1 == line.size())
      throw ParseError("commands line " + std::to_string(line_no) +
                       ": expected category<TAB>command");
    out.push_back({std::string(line.substr(tab + 1)), parse_category(line.substr(0, tab))});
  }
  if (out.empty()) throw ParseError("command list is empty");
  return out;
}

EvalSuite capture_ground_truth(const std::vector<CommandSpec>& commands,
                               std::string_view reference, const CaptureOptions& options) {
  EvalSuite suite;
  suite.reference = std::string(reference);
  suite.user = options.user;
  suite.captured_at = static_cast<std::int64_t>(std::time(nullptr));
  for (const auto& spec : commands) {
    const auto steps = run_reference_session(reference, {spec.command}, options);
    EvalCase c;
    c.command = spec.command;
    c.category = spec.category;
    c.timed_out = steps[0].timed_out;
    if (!c.timed_out) c.ground_truth = steps[0].output;
    suite.cases.push_back(std::move(c));
  }
  return suite;
}

}  // namespace sbash
