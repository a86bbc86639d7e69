#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "sbash/genclient.hpp"
#include "sbash/profile.hpp"
#include "sbash/vfs.hpp"

namespace sbash {

enum class CommandVariant { Native, Ai, NonExisting, Rejected };

std::string_view to_string(CommandVariant variant);

struct SanitizedInput {
  std::string head;
  std::vector<std::string> argv;
  bool compound = false;     // pipes, lists or redirections
  bool needs_shell = false;  // expansions or globbing the emulation cannot do

  bool operator==(const SanitizedInput&) const = default;
};

struct Rejected {
  std::string reason;
  std::string head;  // first whitespace-separated token, used for the error line

  bool operator==(const Rejected&) const = default;
};

using SanitizeResult = std::variant<SanitizedInput, Rejected>;

/// Natural-language probes have more than this many tokens and none of
/// them is a known command.
inline constexpr std::size_t kMaxWordsWithoutCommand = 6;

/// Rejects empty lines, heads outside [A-Za-z0-9._/-], an unquoted '?', and
/// long lines without any known command word. Rejected lines never reach
/// the model.
SanitizeResult sanitize(std::string_view raw_line, const SystemProfile& profile);

struct CommandClass {
  CommandVariant variant = CommandVariant::Rejected;
  std::vector<std::string> argv;  // Native and Ai only
  std::string head;

  bool operator==(const CommandClass&) const = default;
};

/// Native when the head is a native command and the arguments lie inside
/// the emulated flag set; Ai when the head is any other known command (or a
/// compound line led by one); NonExisting otherwise.
CommandClass classify(const SanitizedInput& input, const SystemProfile& profile);

struct Response {
  std::string output;
  double latency_ms = 0;
  CommandClass command_class;
  std::optional<std::string> backend_error;  // real cause, for the log only
  bool end_session = false;
};

/// One attacker session: owns its filesystem state and routes each line.
class Session {
 public:
  /// `pipeline` may be null, in which case AI-path commands fail as if the
  /// backend were down.
  Session(const SystemProfile& profile, VfsState state, const Pipeline* pipeline,
          Clock clock = system_clock_seconds);

  Response dispatch(std::string_view raw_line);

  const VfsState& state() const { return state_; }
  std::string prompt() const;

 private:
  std::string not_found(const std::string& head) const;
  std::string path_failure(const std::string& head) const;

  const SystemProfile& profile_;
  VfsState state_;
  const Pipeline* pipeline_;
  Clock clock_;
};

}  // namespace sbash
