#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <vector>

namespace sbash {

namespace error_kind {
inline constexpr std::string_view kNotFound = "not_found";
inline constexpr std::string_view kNoSuchFile = "no_such_file";
inline constexpr std::string_view kPermissionDenied = "permission_denied";
inline constexpr std::string_view kIsDirectory = "is_directory";
inline constexpr std::string_view kNotDirectory = "not_directory";
}  // namespace error_kind

/// System prompt used for tuned generation when a profile does not set one.
extern const std::string kDefaultTunedSystemPrompt;

struct UserAccount {
  std::string name;
  std::string home;
  int uid = 0;

  bool operator==(const UserAccount&) const = default;
};

/// The system declaration: one parameter set that configures every other
/// component for a given target system. Immutable after load.
struct SystemProfile {
  std::string system_id;
  std::string hostname;
  std::vector<UserAccount> users;
  std::string default_user;
  std::string prompt_template;
  std::map<std::string, std::string, std::less<>> error_templates;
  std::set<std::string, std::less<>> command_db;
  std::set<std::string, std::less<>> native_commands;
  std::filesystem::path fs_template;
  std::filesystem::path kb_source_dir;
  std::filesystem::path kb_store;
  std::string system_prompt_tuned;
  std::uint64_t mutation_seed = 0;
  std::string banner;

  // Service defaults, overridable from the command line or environment.
  std::string llm_url;
  std::string embed_url;
  std::string model;

  const UserAccount* find_user(std::string_view name) const;
  const UserAccount& default_account() const;

  bool operator==(const SystemProfile&) const = default;
};

/// Parses profile text. Relative paths resolve against `base_dir`.
/// Throws ParseError or ValidationError.
SystemProfile parse_profile(std::string_view text,
                            const std::filesystem::path& base_dir);

SystemProfile load_profile(const std::filesystem::path& path);

/// Canonical profile text; parse_profile(serialize_profile(p)) == p.
std::string serialize_profile(const SystemProfile& profile);

/// Checks every profile invariant, throwing ValidationError naming the field.
void validate_profile(const SystemProfile& profile);

/// Expands the prompt template for `user` in `cwd`; the user's home renders
/// as "~". Throws UnknownUser.
std::string render_prompt_line(const SystemProfile& profile,
                               std::string_view user, std::string_view cwd);

/// Substitutes `cmd` into the error template for `kind`. Throws
/// UnknownErrorKind.
std::string render_error(const SystemProfile& profile, std::string_view kind,
                         std::string_view cmd);

}  // namespace sbash
