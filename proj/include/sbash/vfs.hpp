#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/fs_template.hpp"
#include "sbash/profile.hpp"

namespace sbash {

inline constexpr std::uint64_t kDirectorySize = 4096;

/// A node of the virtual filesystem tree. Directory children are kept
/// sorted by name in byte order, which is also the listing order of the
/// C locale.
struct VfsNode {
  std::string name;
  NodeKind kind = NodeKind::Directory;
  std::vector<VfsNode> children;
  std::optional<std::string> content;  // nullopt: size-only stub
  std::string link_target;
  std::string owner = "root";
  std::uint32_t mode = 0755;
  std::uint64_t size = kDirectorySize;
  std::int64_t mtime = 0;

  bool is_dir() const { return kind == NodeKind::Directory; }

  VfsNode* child(std::string_view child_name);
  const VfsNode* child(std::string_view child_name) const;
  /// Inserts or replaces the child with the same name; returns a reference
  /// valid until the next modification of this directory.
  VfsNode& put(VfsNode node);
  bool erase(std::string_view child_name);

  bool operator==(const VfsNode&) const = default;
};

/// Per-session emulated filesystem. `cwd` is the logical working directory
/// as the shell reports it.
struct VfsState {
  VfsNode root;
  std::string cwd = "/";
  std::string oldpwd;
  std::string session_user;

  bool operator==(const VfsState&) const = default;
};

struct NativeResult {
  std::string stdout_text;
  std::string stderr_text;
  std::string output;  // stdout and stderr interleaved as a terminal shows them
  int exit_code = 0;
  bool state_changed = false;
  bool end_session = false;
};

using Clock = std::function<std::int64_t()>;

/// Wall clock in epoch seconds.
std::int64_t system_clock_seconds();

struct ExecContext {
  const SystemProfile& profile;
  Clock clock = system_clock_seconds;
  int terminal_width = 80;
};

/// Builds the tree from template records. Every parent must be declared
/// before or after its children; "/" may be omitted.
VfsNode tree_from_records(const std::vector<TemplateRecord>& records);
/// Pre-order listing, children in name order, "/" first.
std::vector<TemplateRecord> records_from_tree(const VfsNode& root);

/// Loads a template file and places the session in the default user's home.
/// Throws ParseError or MissingHome.
VfsState build_from_template(const std::filesystem::path& template_path,
                             const SystemProfile& profile);
VfsState build_from_records(const std::vector<TemplateRecord>& records,
                            const SystemProfile& profile);

/// Deterministic realism perturbation: stub file sizes within +/-20%,
/// mtimes shifted back by up to 90 days, and 0-3 decoy files under /tmp and
/// /home/*. Never removes or renames nodes.
VfsState mutate(const VfsState& state, std::uint64_t seed);

/// Whether `argv` lies inside the natively emulated command and flag
/// whitelist. Arguments are already unquoted words.
bool native_supports(std::span<const std::string> argv);

/// Runs a whitelisted command against the tree. Failures are reported
/// in-band through exit_code and stderr, never thrown.
NativeResult exec_native(VfsState& state, std::span<const std::string> argv,
                         const ExecContext& ctx);

/// Walks the tree and returns a description of the first broken invariant,
/// or nullopt when the state is consistent.
std::optional<std::string> validate_state(const VfsState& state);

/// Node lookup following symlinks (hop-limited), or nullptr.
const VfsNode* find_node(const VfsState& state, std::string_view path);

}  // namespace sbash
