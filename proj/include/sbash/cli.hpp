#pragma once

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/profile.hpp"

namespace sbash {

enum class Subcommand { Serve, Ingest, Capture, Eval, Report };

std::string_view to_string(Subcommand subcommand);

enum class FlagSource { Cli, Env, Profile, Default };

std::string_view to_string(FlagSource source);

struct ResolvedFlag {
  std::string value;
  FlagSource source = FlagSource::Default;

  bool operator==(const ResolvedFlag&) const = default;
};

/// A parsed command line. Every flag of the chosen subcommand is present in
/// `flags`, with the place its value came from.
struct Invocation {
  Subcommand subcommand = Subcommand::Serve;
  std::map<std::string, ResolvedFlag, std::less<>> flags;  // keyed without leading dashes
  int verbosity = 0;
  std::optional<std::string> help_text;  // set when --help was given

  const std::string& get(std::string_view name) const;
  bool has(std::string_view name) const;
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

/// Reads the process environment.
std::optional<std::string> process_env(const std::string& name);

/// Resolves CLI > environment > built-in default. Profile values are
/// applied afterwards by apply_profile_defaults. Throws UsageError.
Invocation parse_args(const std::vector<std::string>& args, const EnvLookup& env = process_env);

/// Fills flags that were neither given nor set in the environment from the
/// profile (llm-url, embed-url, model, kb-dir, store).
void apply_profile_defaults(Invocation& invocation, const SystemProfile& profile);

/// Top-level help listing every subcommand.
std::string usage_text();

/// Executes a parsed invocation. Returns 0 on success, 2 on runtime failure.
int run(const Invocation& invocation, std::ostream& out, std::ostream& err);

/// parse_args + run with the stable exit codes: 0 ok, 1 usage, 2 runtime.
int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const EnvLookup& env = process_env);

}  // namespace sbash
