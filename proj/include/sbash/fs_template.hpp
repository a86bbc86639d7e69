#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sbash {

enum class NodeKind { File, Directory, Symlink };

std::string_view to_string(NodeKind kind);

/// One line of a filesystem template:
///   path<TAB>kind<TAB>size<TAB>mode<TAB>owner<TAB>mtime[<TAB>extra]
/// `extra` is the escaped link target for symlinks and the escaped content
/// for files whose bytes were captured. Files without `extra` are size-only
/// stubs.
struct TemplateRecord {
  std::string path;
  NodeKind kind = NodeKind::File;
  std::uint64_t size = 0;
  std::uint32_t mode = 0644;
  std::string owner;
  std::int64_t mtime = 0;
  std::optional<std::string> extra;

  bool operator==(const TemplateRecord&) const = default;
};

inline constexpr std::string_view kTemplateHeader = "# sbash-fs-template v1";

/// Backslash escaping for template fields: \\ \t \n \r and \xHH for the
/// remaining control bytes. All other bytes pass through.
std::string escape_field(std::string_view raw);
std::string unescape_field(std::string_view escaped);

/// Throws ParseError naming the offending line.
std::vector<TemplateRecord> parse_template_records(std::string_view text);
std::string format_template_records(const std::vector<TemplateRecord>& records);

}  // namespace sbash
