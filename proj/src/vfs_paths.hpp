#pragma once

// Path handling shared by the tree builder and the native command emulation.

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/vfs.hpp"

namespace sbash::detail {

using Components = std::vector<std::string>;

inline constexpr int kMaxSymlinkHops = 40;

Components split_path(std::string_view path);
std::string join_path(const Components& parts);

enum class Lookup { Ok, NoEntry, NotDirectory, Loop, Access };

struct Resolved {
  Lookup status = Lookup::Ok;
  Components physical;  // physical location of the node when status == Ok
};

/// Kernel-style lookup: relative paths start at `base`, symlinks are
/// followed for intermediate components and, if `follow_last`, for the final
/// one. A trailing slash forces the final component to be a directory.
/// `may_search`, when set, is asked about every directory looked up in;
/// a refusal yields Lookup::Access.
using SearchCheck = std::function<bool(const VfsNode&)>;
Resolved resolve(const VfsNode& root, const Components& base,
                 std::string_view path, bool follow_last,
                 const SearchCheck& may_search = {});

/// Direct descent without following symlinks.
VfsNode* node_at(VfsNode& root, const Components& physical);
const VfsNode* node_at(const VfsNode& root, const Components& physical);

/// Textual canonicalization used by `cd`: joins onto `cwd` when relative
/// and folds "." and ".." without touching the tree. A leading "//" (exactly
/// two slashes) survives, as it does in bash.
std::string logical_join(std::string_view cwd, std::string_view path);

/// Physical location of the logical working directory.
Components physical_cwd(const VfsState& state);

}  // namespace sbash::detail
