#pragma once

#include <chrono>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/evalharness.hpp"

namespace sbash {

/// Where reference output comes from:
///   local                     bash on this machine (no isolation; smoke tests)
///   exec:<program> [args...]  a wrapper reading commands on stdin and
///                             writing the terminal transcript to stdout,
///                             e.g. tools/refshell.sh
///   ssh://[user@]host[:port]  bash on a remote host over OpenSSH
/// The session user is exported to the wrapper as SBASH_REF_USER.
struct CaptureOptions {
  std::string user = "root";
  std::chrono::milliseconds timeout{10000};  // per command
};

struct CapturedStep {
  std::string command;
  std::string output;  // stdout and stderr as the terminal showed them, LF line ends
  int exit_status = -1;
  bool timed_out = false;
  bool completed = false;  // the shell reached this command's end marker
};

/// Runs `commands` one after another in a single reference shell session.
/// Throws ReferenceUnreachable when the shell never comes up.
std::vector<CapturedStep> run_reference_session(std::string_view reference,
                                                const std::vector<std::string>& commands,
                                                const CaptureOptions& options);

struct CommandSpec {
  std::string command;
  Category category = Category::Reconnaissance;
};

/// "category<TAB>command" per line; blank lines and lines starting with '#'
/// are skipped. Throws ParseError.
std::vector<CommandSpec> parse_command_list(std::string_view text);

/// Captures each command in a fresh reference session. A command that
/// times out gets an empty ground truth with `timed_out` set.
EvalSuite capture_ground_truth(const std::vector<CommandSpec>& commands,
                               std::string_view reference, const CaptureOptions& options);

/// Splits a raw transcript at the end markers the capture script emits.
/// Everything before the first marker (terminal echo, banners) is dropped.
std::vector<CapturedStep> split_transcript(std::string_view transcript,
                                           const std::vector<std::string>& commands);

}  // namespace sbash
