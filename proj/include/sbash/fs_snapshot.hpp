#pragma once

// Conversion between a real directory tree and template records. Used to
// capture the decoy filesystem from a reference machine and to rebuild that
// filesystem on disk for differential runs against a real shell.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sbash/fs_template.hpp"

namespace sbash {

struct SnapshotOptions {
  /// Directories recursed completely, along with their ancestors. Any other
  /// directory met during recursion lists its entries, but its
  /// subdirectories are recorded empty.
  std::vector<std::string> deep = {"/etc",  "/root",     "/home",     "/tmp",  "/usr/bin",
                                   "/usr/sbin", "/var/log", "/srv", "/boot", "/mnt", "/media"};
  /// Files under these prefixes keep their bytes when they look like text.
  std::vector<std::string> content = {"/etc", "/root", "/home"};
  /// Paths dropped together with everything below them.
  std::vector<std::string> exclude;
  /// Directories recorded without children.
  std::vector<std::string> empty = {"/proc", "/sys", "/dev", "/run"};
  std::uint64_t max_content_bytes = 16 * 1024;
};

/// Walks `source_root` (mapped to "/") without following symlinks. Owners
/// are resolved through the host's passwd database.
std::vector<TemplateRecord> snapshot_tree(const std::filesystem::path& source_root,
                                          const SnapshotOptions& options);

struct MaterializeOptions {
  /// Directories created but left empty, typically because the caller
  /// bind-mounts the real ones over them.
  std::vector<std::string> skip_contents;
  /// Apply owners with lchown. Needs root.
  bool apply_owners = true;
};

/// Writes the records below `dest` (created if missing). Stub files are
/// filled with zero bytes so sizes and block counts match a real file.
/// Owner names are resolved through the passwd/group records contained in
/// the template itself, falling back to uid 0.
void materialize_tree(const std::vector<TemplateRecord>& records,
                      const std::filesystem::path& dest, const MaterializeOptions& options);

/// True when `path` equals `prefix` or lies below it.
bool path_within(std::string_view path, std::string_view prefix);

}  // namespace sbash
