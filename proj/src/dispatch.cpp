#include "sbash/dispatch.hpp"

#include <algorithm>
#include <chrono>

#include "sbash/errors.hpp"
#include "sbash/shell_words.hpp"

namespace sbash {

std::string_view to_string(CommandVariant variant) {
  switch (variant) {
    case CommandVariant::Native: return "native";
    case CommandVariant::Ai: return "ai";
    case CommandVariant::NonExisting: return "non_existing";
    case CommandVariant::Rejected: return "rejected";
  }
  return "rejected";
}

namespace {

bool plausible_head(std::string_view head) {
  return !head.empty() && std::all_of(head.begin(), head.end(), [](char c) {
    return (c >= 'A' && c <= 'Z') || (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') ||
           c == '.' || c == '_' || c == '/' || c == '-';
  });
}

std::string first_raw_token(std::string_view line) {
  const auto start = line.find_first_not_of(" \t");
  if (start == std::string_view::npos) return {};
  const auto end = line.find_first_of(" \t", start);
  return std::string(line.substr(start, end == std::string_view::npos ? end : end - start));
}

std::string_view basename_of(std::string_view path) {
  const auto slash = path.rfind('/');
  return slash == std::string_view::npos ? path : path.substr(slash + 1);
}

bool known(const SystemProfile& profile, std::string_view word) {
  return profile.command_db.contains(word) || profile.command_db.contains(basename_of(word));
}

}  // namespace

SanitizeResult sanitize(std::string_view raw_line, const SystemProfile& profile) {
  const auto words = split_shell_words(raw_line);
  const std::string raw_head = first_raw_token(raw_line);
  if (words.words.empty()) return Rejected{"empty", raw_head};

  const std::string& head = words.words.front();
  if (!plausible_head(head)) return Rejected{"head", raw_head};
  if (words.bare_question) return Rejected{"natural-language", raw_head};
  if (words.words.size() > kMaxWordsWithoutCommand &&
      std::none_of(words.words.begin(), words.words.end(),
                   [&](const std::string& w) { return known(profile, w); }))
    return Rejected{"natural-language", raw_head};

  return SanitizedInput{head, words.words, words.compound, words.needs_shell};
}

CommandClass classify(const SanitizedInput& input, const SystemProfile& profile) {
  CommandClass c;
  c.head = input.head;
  if (!known(profile, input.head)) {
    c.variant = CommandVariant::NonExisting;
    return c;
  }
  c.argv = input.argv;
  const bool native = profile.native_commands.contains(input.head) && !input.compound &&
                      !input.needs_shell && native_supports(input.argv);
  c.variant = native ? CommandVariant::Native : CommandVariant::Ai;
  return c;
}

Session::Session(const SystemProfile& profile, VfsState state, const Pipeline* pipeline,
                 Clock clock)
    : profile_(profile), state_(std::move(state)), pipeline_(pipeline), clock_(std::move(clock)) {}

std::string Session::prompt() const {
  return render_prompt_line(profile_, state_.session_user, state_.cwd);
}

std::string Session::not_found(const std::string& head) const {
  return render_error(profile_, error_kind::kNotFound, head) + "\n";
}

// bash looks a command containing '/' up as a path instead of on PATH.
std::string Session::path_failure(const std::string& head) const {
  const VfsNode* n = find_node(state_, head);
  std::string_view kind = error_kind::kNoSuchFile;
  if (n != nullptr) kind = n->is_dir() ? error_kind::kIsDirectory : error_kind::kPermissionDenied;
  return render_error(profile_, kind, "bash: " + head) + "\n";
}

Response Session::dispatch(std::string_view raw_line) {
  const auto started = std::chrono::steady_clock::now();
  Response r;
  const auto sanitized = sanitize(raw_line, profile_);
  if (const auto* rej = std::get_if<Rejected>(&sanitized)) {
    r.command_class.variant = CommandVariant::Rejected;
    r.command_class.head = rej->head;
    if (rej->reason != "empty") r.output = not_found(rej->head);
  } else {
    const auto& input = std::get<SanitizedInput>(sanitized);
    r.command_class = classify(input, profile_);
    if (r.command_class.variant == CommandVariant::NonExisting &&
        input.head.find('/') != std::string::npos) {
      // An executable the attacker can see is run like any unknown program.
      const VfsNode* n = find_node(state_, input.head);
      if (n != nullptr && n->kind == NodeKind::File && (n->mode & 0111)) {
        r.command_class.variant = CommandVariant::Ai;
        r.command_class.argv = input.argv;
      }
    }
    switch (r.command_class.variant) {
      case CommandVariant::NonExisting:
        r.output = input.head.find('/') == std::string::npos ? not_found(input.head)
                                                            : path_failure(input.head);
        break;
      case CommandVariant::Native: {
        ExecContext ctx{profile_, clock_};
        auto res = exec_native(state_, r.command_class.argv, ctx);
        r.output = std::move(res.output);
        r.end_session = res.end_session;
        break;
      }
      case CommandVariant::Ai:
        try {
          if (pipeline_ == nullptr)
            throw GenerationError(GenerationError::Kind::BackendUnavailable,
                                  "no generation backend configured");
          r.output = pipeline_->run(raw_line).text;
        } catch (const GenerationError& e) {
          r.backend_error = e.what();
          r.output = not_found(input.head);
        }
        break;
      case CommandVariant::Rejected:
        break;
    }
  }
  r.latency_ms =
      std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - started)
          .count();
  return r;
}

}  // namespace sbash
