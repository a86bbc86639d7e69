#include "sbash/fs_template.hpp"

#include <charconv>
#include <cstdio>

#include "sbash/errors.hpp"

namespace sbash {

std::string_view to_string(NodeKind kind) {
  switch (kind) {
    case NodeKind::File: return "file";
    case NodeKind::Directory: return "dir";
    case NodeKind::Symlink: return "link";
  }
  return "file";
}

std::string escape_field(std::string_view raw) {
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(raw.size());
  for (unsigned char c : raw) {
    switch (c) {
      case '\\': out += "\\\\"; break;
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\r': out += "\\r"; break;
      default:
        if (c < 0x20 || c == 0x7f) {
          out += "\\x";
          out += kHex[c >> 4];
          out += kHex[c & 0xf];
        } else {
          out += static_cast<char>(c);
        }
    }
  }
  return out;
}

std::string unescape_field(std::string_view s) {
  auto hex = [](char c) -> int {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
  };
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\') {
      out += s[i];
      continue;
    }
    if (i + 1 >= s.size()) throw ParseError("dangling backslash");
    const char e = s[++i];
    switch (e) {
      case '\\': out += '\\'; break;
      case 't': out += '\t'; break;
      case 'n': out += '\n'; break;
      case 'r': out += '\r'; break;
      case 'x': {
        const int hi = i + 1 < s.size() ? hex(s[i + 1]) : -1;
        const int lo = i + 2 < s.size() ? hex(s[i + 2]) : -1;
        if (hi < 0 || lo < 0) throw ParseError("bad \\x escape");
        out += static_cast<char>(hi * 16 + lo);
        i += 2;
        break;
      }
      default: throw ParseError(std::string("unknown escape \\") + e);
    }
  }
  return out;
}

namespace {

template <typename T>
T parse_number(std::string_view field, int base, std::size_t line_no,
               const char* what) {
  T value{};
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), value, base);
  if (ec != std::errc{} || ptr != field.data() + field.size() || field.empty())
    throw ParseError("template line " + std::to_string(line_no) + ": bad " + what);
  return value;
}

}  // namespace

std::vector<TemplateRecord> parse_template_records(std::string_view text) {
  std::vector<TemplateRecord> records;
  std::size_t pos = 0, line_no = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string_view::npos
                                              ? std::string_view::npos
                                              : tab - start));
      if (tab == std::string_view::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 6 && fields.size() != 7)
      throw ParseError("template line " + std::to_string(line_no) +
                       ": expected 6 or 7 tab-separated fields");

    TemplateRecord r;
    try {
      r.path = unescape_field(fields[0]);
      if (fields.size() == 7) r.extra = unescape_field(fields[6]);
    } catch (const ParseError& e) {
      throw ParseError("template line " + std::to_string(line_no) + ": " + e.what());
    }
    if (r.path.empty() || r.path.front() != '/')
      throw ParseError("template line " + std::to_string(line_no) +
                       ": path must be absolute");
    if (fields[1] == "dir") r.kind = NodeKind::Directory;
    else if (fields[1] == "file") r.kind = NodeKind::File;
    else if (fields[1] == "link") r.kind = NodeKind::Symlink;
    else
      throw ParseError("template line " + std::to_string(line_no) +
                       ": unknown kind '" + std::string(fields[1]) + "'");
    r.size = parse_number<std::uint64_t>(fields[2], 10, line_no, "size");
    r.mode = parse_number<std::uint32_t>(fields[3], 8, line_no, "mode");
    r.owner = std::string(fields[4]);
    r.mtime = parse_number<std::int64_t>(fields[5], 10, line_no, "mtime");
    if (r.kind == NodeKind::Symlink && !r.extra)
      throw ParseError("template line " + std::to_string(line_no) +
                       ": symlink without target");
    if (r.kind == NodeKind::Directory && r.extra)
      throw ParseError("template line " + std::to_string(line_no) +
                       ": directory with content");
    if (r.kind == NodeKind::File && r.extra && r.extra->size() != r.size)
      throw ParseError("template line " + std::to_string(line_no) +
                       ": size does not match content length");
    records.push_back(std::move(r));
  }
  return records;
}

std::string format_template_records(const std::vector<TemplateRecord>& records) {
  std::string out(kTemplateHeader);
  out += '\n';
  char mode[16];
  for (const auto& r : records) {
    std::snprintf(mode, sizeof mode, "%04o", r.mode);
    out += escape_field(r.path);
    out += '\t';
    out += to_string(r.kind);
    out += '\t';
    out += std::to_string(r.size);
    out += '\t';
    out += mode;
    out += '\t';
    out += r.owner;
    out += '\t';
    out += std::to_string(r.mtime);
    if (r.extra) {
      out += '\t';
      out += escape_field(*r.extra);
    }
    out += '\n';
  }
  return out;
}

}  // namespace sbash
