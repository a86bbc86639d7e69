// Emulation of the natively handled commands against the virtual tree.
// Output formats and messages follow bash 5.1 / GNU coreutils 8.32 in the
// C locale with an 80-column terminal.

#include <algorithm>
#include <cstdio>
#include <ctime>

#include "sbash/vfs.hpp"
#include "vfs_paths.hpp"

namespace sbash {

namespace {

using detail::Components;
using detail::Lookup;

constexpr std::int64_t kSixMonths = 31556952 / 2;

bool is_flag(const std::string& arg) { return arg.size() > 1 && arg[0] == '-'; }

/// Every flag argument is a single-dash cluster of letters from `allowed`.
bool flags_within(std::span<const std::string> args, std::string_view allowed) {
  for (const auto& a : args) {
    if (!is_flag(a)) continue;
    if (a[1] == '-') return false;
    for (std::size_t i = 1; i < a.size(); ++i)
      if (allowed.find(a[i]) == std::string_view::npos) return false;
  }
  return true;
}

std::size_t operand_count(std::span<const std::string> args) {
  return static_cast<std::size_t>(
      std::count_if(args.begin(), args.end(), [](const auto& a) { return !is_flag(a); }));
}

std::string squote(std::string_view name) { return "'" + std::string(name) + "'"; }

bool shell_special(unsigned char c) {
  return std::string_view(" !\"$&'()*;<=>?[\\^`|").find(static_cast<char>(c)) !=
             std::string_view::npos ||
         c < 0x20 || c >= 0x7f;
}

/// Characters that may appear inside a double-quoted name unescaped.
bool double_quote_safe(unsigned char c) {
  return c >= 0x20 && c < 0x7f &&
         std::string_view("!\"$&()*;<=>[^`|\\?#~{}").find(static_cast<char>(c)) ==
             std::string_view::npos;
}

/// Name as `ls` shows it on a terminal (--quoting-style=shell-escape).
/// The flag says whether quoting was applied.
std::pair<std::string, bool> ls_quote(std::string_view name) {
  bool needs = name.empty() || name == "{" || name == "}" ||
               (!name.empty() && (name[0] == '#' || name[0] == '~'));
  for (const unsigned char c : name) needs |= shell_special(c);
  if (!needs) return {std::string(name), false};

  if (name.find('\'') != std::string_view::npos &&
      std::all_of(name.begin(), name.end(),
                  [](char c) { return double_quote_safe(static_cast<unsigned char>(c)); }))
    return {"\"" + std::string(name) + "\"", true};

  std::string out = "'";
  bool escaped = false;  // inside a $'...' section
  for (const unsigned char c : name) {
    if (c == '\'') {
      out += "'\\''";
      escaped = false;
      continue;
    }
    if (c < 0x20 || c >= 0x7f) {
      if (!escaped) out += "'$'";
      escaped = true;
      constexpr std::string_view kLetters = "\a\b\t\n\v\f\r";
      if (c >= '\a' && c <= '\r') {
        out += '\\';
        out += "abtnvfr"[kLetters.find(static_cast<char>(c))];
      } else {
        char buf[8];
        std::snprintf(buf, sizeof buf, "\\%03o", c);
        out += buf;
      }
      continue;
    }
    if (escaped) out += "''";
    escaped = false;
    out += static_cast<char>(c);
  }
  return {out + "'", true};
}

std::string strip_trailing_slashes(std::string_view p) {
  while (p.size() > 1 && p.back() == '/') p.remove_suffix(1);
  return std::string(p);
}

std::string dirname_of(std::string_view p) {
  if (p.empty()) return {};
  auto s = strip_trailing_slashes(p);
  const auto slash = s.rfind('/');
  if (slash == std::string::npos) return ".";
  if (slash == 0) return "/";
  return strip_trailing_slashes(s.substr(0, slash));
}

std::string basename_of(std::string_view p) {
  auto s = strip_trailing_slashes(p);
  if (s == "/") return "/";
  const auto slash = s.rfind('/');
  return slash == std::string::npos ? s : s.substr(slash + 1);
}

std::string concat_path(std::string_view dir, std::string_view base) {
  std::string out(dir);
  if (out.empty() || out.back() != '/') out += '/';
  out += base;
  return out;
}

bool is_prefix(const Components& prefix, const Components& of) {
  return prefix.size() <= of.size() && std::equal(prefix.begin(), prefix.end(), of.begin());
}

std::uint64_t blocks_kib(const VfsNode& n) {
  switch (n.kind) {
    case NodeKind::Symlink: return n.link_target.size() < 60 ? 0 : 4;
    case NodeKind::File:
    case NodeKind::Directory: return (n.size + 4095) / 4096 * 4;
  }
  return 0;
}

std::uint64_t link_count(const VfsNode& n) {
  if (!n.is_dir()) return 1;
  return 2 + static_cast<std::uint64_t>(std::count_if(
                 n.children.begin(), n.children.end(),
                 [](const VfsNode& c) { return c.is_dir(); }));
}

std::string mode_string(const VfsNode& n) {
  std::string s(10, '-');
  s[0] = n.kind == NodeKind::Directory ? 'd' : n.kind == NodeKind::Symlink ? 'l' : '-';
  const char* rwx = "rwxrwxrwx";
  for (int i = 0; i < 9; ++i)
    if (n.mode & (0400u >> i)) s[1 + i] = rwx[i];
  auto special = [&](std::uint32_t bit, int pos, char set, char unset_exec) {
    if (n.mode & bit) s[pos] = s[pos] == 'x' || s[pos] == set ? set : unset_exec;
  };
  special(04000, 3, 's', 'S');
  special(02000, 6, 's', 'S');
  special(01000, 9, 't', 'T');
  return s;
}

std::string format_time(std::int64_t mtime, std::int64_t now) {
  static const char* kMonths[] = {"Jan", "Feb", "Mar", "Apr", "May", "Jun",
                                  "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"};
  std::time_t t = static_cast<std::time_t>(mtime);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  const bool recent = now - kSixMonths < mtime && mtime <= now;
  if (recent)
    std::snprintf(buf, sizeof buf, "%s %2d %02d:%02d", kMonths[tm.tm_mon], tm.tm_mday,
                  tm.tm_hour, tm.tm_min);
  else
    std::snprintf(buf, sizeof buf, "%s %2d  %d", kMonths[tm.tm_mon], tm.tm_mday,
                  tm.tm_year + 1900);
  return buf;
}

std::string pad_left(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

struct ListEntry {
  std::string name;
  const VfsNode* node;
  std::string shown = {};  // quoted and possibly padded form of `name`
};

/// Fills in `shown`. When `align` is set and some name needed quotes, the
/// others get a leading space so the names line up past the opening quote.
void quote_entries(std::vector<ListEntry>& entries, bool align) {
  bool some_quoted = false;
  std::vector<bool> quoted(entries.size());
  for (std::size_t i = 0; i < entries.size(); ++i) {
    auto [text, q] = ls_quote(entries[i].name);
    entries[i].shown = std::move(text);
    quoted[i] = q;
    some_quoted |= q;
  }
  if (align && some_quoted)
    for (std::size_t i = 0; i < entries.size(); ++i)
      if (!quoted[i]) entries[i].shown.insert(0, 1, ' ');
}

/// GNU ls multi-column layout: the widest column count whose line fits,
/// entries running down columns, padding with tabs of width 8.
std::string format_columns(const std::vector<ListEntry>& entries, std::size_t width) {
  constexpr std::size_t kMinColumnWidth = 3;
  const std::size_t n = entries.size();
  if (n == 0) return {};
  std::size_t max_idx = width / kMinColumnWidth + (width % kMinColumnWidth != 0);
  const std::size_t max_cols = std::min(max_idx, n);

  struct ColumnInfo {
    bool valid = true;
    std::size_t line_len;
    std::vector<std::size_t> col_arr;
  };
  std::vector<ColumnInfo> info(max_cols);
  for (std::size_t i = 0; i < max_cols; ++i) {
    info[i].line_len = (i + 1) * kMinColumnWidth;
    info[i].col_arr.assign(i + 1, kMinColumnWidth);
  }
  for (std::size_t f = 0; f < n; ++f) {
    const std::size_t len = entries[f].shown.size();
    for (std::size_t i = 0; i < max_cols; ++i) {
      if (!info[i].valid) continue;
      const std::size_t idx = f / ((n + i) / (i + 1));
      const std::size_t real = len + (idx == i ? 0 : 2);
      if (info[i].col_arr[idx] < real) {
        info[i].line_len += real - info[i].col_arr[idx];
        info[i].col_arr[idx] = real;
        info[i].valid = info[i].line_len < width;
      }
    }
  }
  std::size_t cols = max_cols;
  for (; cols > 1; --cols)
    if (info[cols - 1].valid) break;

  const auto& fmt = info[cols - 1];
  const std::size_t rows = n / cols + (n % cols != 0);
  std::string out;
  for (std::size_t row = 0; row < rows; ++row) {
    std::size_t col = 0, f = row, pos = 0;
    while (true) {
      const auto& name = entries[f].shown;
      const std::size_t max_len = fmt.col_arr[col++];
      out += name;
      f += rows;
      if (f >= n) break;
      std::size_t from = pos + name.size();
      const std::size_t to = pos + max_len;
      while (from < to) {
        if (to / 8 > (from + 1) / 8) {
          out += '\t';
          from += 8 - from % 8;
        } else {
          out += ' ';
          ++from;
        }
      }
      pos += max_len;
    }
    out += '\n';
  }
  return out;
}

std::string format_long(const std::vector<ListEntry>& entries, std::int64_t now) {
  std::size_t wl = 0, wo = 0, ws = 0;
  for (const auto& e : entries) {
    wl = std::max(wl, std::to_string(link_count(*e.node)).size());
    wo = std::max(wo, e.node->owner.size());
    ws = std::max(ws, std::to_string(e.node->size).size());
  }
  std::string out;
  for (const auto& e : entries) {
    const auto& n = *e.node;
    out += mode_string(n);
    out += ' ';
    out += pad_left(std::to_string(link_count(n)), wl);
    out += ' ';
    out += pad_right(n.owner, wo);
    out += ' ';
    out += pad_right(n.owner, wo);
    out += ' ';
    out += pad_left(std::to_string(n.size), ws);
    out += ' ';
    out += format_time(n.mtime, now);
    out += ' ';
    out += e.shown;
    if (n.kind == NodeKind::Symlink) out += " -> " + ls_quote(n.link_target).first;
    out += '\n';
  }
  return out;
}

void sort_entries(std::vector<ListEntry>& v) {
  std::sort(v.begin(), v.end(),
            [](const ListEntry& a, const ListEntry& b) { return a.name < b.name; });
}

class NativeShell {
 public:
  NativeShell(VfsState& state, const ExecContext& ctx, NativeResult& result)
      : st_(state), ctx_(ctx), res_(result), now_(ctx.clock()) {}

  void run(std::span<const std::string> raw_argv) {
    std::vector<std::string> argv;
    argv.reserve(raw_argv.size());
    for (const auto& a : raw_argv) argv.push_back(expand_tilde(a));
    const std::string& cmd = argv.front();
    std::span<const std::string> args(argv.begin() + 1, argv.end());

    if (cmd == "cd") cd(args);
    else if (cmd == "pwd") out(st_.cwd + "\n");
    else if (cmd == "whoami") out(st_.session_user + "\n");
    else if (cmd == "hostname") out(ctx_.profile.hostname + "\n");
    else if (cmd == "echo") echo(args);
    else if (cmd == "cat") cat(args);
    else if (cmd == "ls") ls(args);
    else if (cmd == "mkdir") mkdir(args);
    else if (cmd == "touch") touch(args);
    else if (cmd == "rm") rm(args);
    else if (cmd == "mv") move_or_copy(args, /*copy=*/false);
    else if (cmd == "cp") move_or_copy(args, /*copy=*/true);
    else if (cmd == "exit" || cmd == "logout") {
      out("logout\n");
      res_.end_session = true;
    } else {
      fail_line(render_error(ctx_.profile, "not_found", cmd), 127);
    }
  }

 private:
  void out(std::string_view s) {
    res_.stdout_text += s;
    res_.output += s;
  }

  void err(std::string_view s) {
    res_.stderr_text += s;
    res_.output += s;
  }

  void fail_line(const std::string& line, int code) {
    err(line + "\n");
    res_.exit_code = code;
  }

  void fail(std::string_view kind, const std::string& prefix, int code = 1) {
    fail_line(render_error(ctx_.profile, kind, prefix), code);
  }

  void fail_lookup(Lookup status, const std::string& prefix, int code = 1) {
    switch (status) {
      case Lookup::NotDirectory: fail("not_directory", prefix, code); break;
      case Lookup::Loop: fail_line(prefix + ": Too many levels of symbolic links", code); break;
      case Lookup::Access: fail("permission_denied", prefix, code); break;
      default: fail("no_such_file", prefix, code); break;
    }
  }

  void changed() { res_.state_changed = true; }

  std::string home_of(std::string_view user) const {
    const auto* u = ctx_.profile.find_user(user);
    return u ? u->home : "/";
  }

  std::string expand_tilde(const std::string& arg) const {
    if (arg.empty() || arg[0] != '~') return arg;
    const auto slash = arg.find('/');
    const auto user = arg.substr(1, slash == std::string::npos ? std::string::npos : slash - 1);
    std::string home;
    if (user.empty()) home = home_of(st_.session_user);
    else if (const auto* u = ctx_.profile.find_user(user)) home = u->home;
    else return arg;
    return slash == std::string::npos ? home : home + arg.substr(slash);
  }

  Components pcwd() const { return detail::physical_cwd(st_); }

  bool superuser() const {
    const auto* u = ctx_.profile.find_user(st_.session_user);
    return u != nullptr && u->uid == 0;
  }

  /// Mode check for `bits` (4 read, 2 write, 1 search) with the owner
  /// triplet for the owner and the "other" triplet for everyone else.
  bool permits(const VfsNode& n, std::uint32_t bits) const {
    if (superuser()) return true;
    const std::uint32_t granted = n.owner == st_.session_user ? (n.mode >> 6) & 7 : n.mode & 7;
    return (granted & bits) == bits;
  }

  /// Sticky directories only let owners remove or rename entries.
  bool may_unlink(const VfsNode& dir, const VfsNode& entry) const {
    return superuser() || !(dir.mode & 01000) || entry.owner == st_.session_user ||
           dir.owner == st_.session_user;
  }

  detail::SearchCheck search_check() const {
    if (superuser()) return {};
    return [this](const VfsNode& dir) { return permits(dir, 1); };
  }

  detail::Resolved lookup(std::string_view path, bool follow_last) const {
    return detail::resolve(st_.root, pcwd(), path, follow_last, search_check());
  }

  VfsNode* node(const Components& phys) { return detail::node_at(st_.root, phys); }

  void touch_parent(const Components& phys) {
    if (phys.empty()) return;
    Components parent(phys.begin(), phys.end() - 1);
    if (auto* p = node(parent)) p->mtime = now_;
  }

  // --- cd -----------------------------------------------------------------

  void cd(std::span<const std::string> args) {
    if (args.size() > 1) return fail_line("bash: cd: too many arguments", 1);
    std::string target;
    bool print = false;
    if (args.empty()) {
      target = home_of(st_.session_user);
    } else if (args[0] == "-") {
      if (st_.oldpwd.empty()) return fail_line("bash: cd: OLDPWD not set", 1);
      target = st_.oldpwd;
      print = true;
    } else {
      target = args[0];
    }
    const std::string logical = detail::logical_join(st_.cwd, target);
    auto r = detail::resolve(st_.root, {}, logical, true, search_check());
    const VfsNode* n = r.status == Lookup::Ok ? node(r.physical) : nullptr;
    if (n == nullptr || !n->is_dir()) {
      auto direct = lookup(target, true);
      if (direct.status == Lookup::Ok && !node(direct.physical)->is_dir())
        return fail("not_directory", "bash: cd: " + target);
      return fail_lookup(direct.status == Lookup::Ok ? Lookup::NoEntry : direct.status,
                         "bash: cd: " + target);
    }
    if (!permits(*n, 1)) return fail("permission_denied", "bash: cd: " + target);
    st_.oldpwd = st_.cwd;
    st_.cwd = logical;
    changed();
    if (print) out(st_.cwd + "\n");
  }

  // --- echo ---------------------------------------------------------------

  void echo(std::span<const std::string> args) {
    bool newline = true;
    std::size_t i = 0;
    for (; i < args.size(); ++i) {
      const auto& a = args[i];
      if (a.size() < 2 || a[0] != '-' ||
          a.find_first_not_of("nE", 1) != std::string::npos)
        break;
      if (a.find('n') != std::string::npos) newline = false;
    }
    std::string text;
    for (std::size_t j = i; j < args.size(); ++j) {
      if (j > i) text += ' ';
      text += args[j];
    }
    if (newline) text += '\n';
    out(text);
  }

  // --- cat ----------------------------------------------------------------

  void cat(std::span<const std::string> args) {
    for (const auto& a : args) {
      auto r = lookup(a, true);
      if (r.status != Lookup::Ok) {
        fail_lookup(r.status, "cat: " + ls_quote(a).first);
        continue;
      }
      const VfsNode* n = node(r.physical);
      if (!permits(*n, 4)) {
        fail("permission_denied", "cat: " + ls_quote(a).first);
        continue;
      }
      if (n->is_dir()) {
        fail("is_directory", "cat: " + ls_quote(a).first);
        continue;
      }
      if (n->content) out(*n->content);
    }
  }

  // --- ls -----------------------------------------------------------------

  void ls(std::span<const std::string> args) {
    bool long_format = false, all = false, one_per_line = false;
    std::vector<std::string> operands;
    for (const auto& a : args) {
      if (is_flag(a)) {
        long_format |= a.find('l') != std::string::npos;
        all |= a.find('a') != std::string::npos;
        one_per_line |= a.find('1') != std::string::npos;
      } else {
        operands.push_back(a);
      }
    }
    const bool had_operands = !operands.empty();
    if (!had_operands) operands.push_back(".");

    std::vector<ListEntry> files;
    std::vector<std::pair<std::string, Components>> dirs;
    for (const auto& op : operands) {
      auto r = lookup(op, false);
      if (r.status != Lookup::Ok) {
        fail_lookup(r.status, "ls: cannot access " + squote(op), 2);
        continue;
      }
      const VfsNode* n = node(r.physical);
      if (n->kind == NodeKind::Symlink && !long_format) {
        auto followed = lookup(op, true);
        if (followed.status == Lookup::Ok && node(followed.physical)->is_dir()) {
          dirs.emplace_back(op, followed.physical);
          continue;
        }
      }
      if (n->is_dir()) dirs.emplace_back(op, r.physical);
      else files.push_back({op, n});
    }
    sort_entries(files);
    std::sort(dirs.begin(), dirs.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    auto render = [&](std::vector<ListEntry>& entries) {
      quote_entries(entries, !one_per_line || long_format);
      if (long_format) return format_long(entries, now_);
      if (one_per_line) {
        std::string s;
        for (const auto& e : entries) s += e.shown + "\n";
        return s;
      }
      return format_columns(entries, static_cast<std::size_t>(ctx_.terminal_width));
    };

    bool printed = false;
    if (!files.empty()) {
      out(render(files));
      printed = true;
    }
    const bool headers = operands.size() > 1 || !files.empty();
    for (const auto& [display, phys] : dirs) {
      const VfsNode* dir = node(phys);
      if (!permits(*dir, 4)) {
        fail("permission_denied", "ls: cannot open directory " + squote(display), 2);
        continue;
      }
      if (printed) out("\n");
      printed = true;
      if (headers) out(ls_quote(display).first + ":\n");
      std::vector<ListEntry> entries;
      if (all) {
        entries.push_back({".", dir});
        Components parent = phys;
        if (!parent.empty()) parent.pop_back();
        entries.push_back({"..", node(parent)});
      }
      for (const auto& c : dir->children)
        if (all || c.name.front() != '.') entries.push_back({c.name, &c});
      sort_entries(entries);
      if (long_format) {
        std::uint64_t total = 0;
        for (const auto& e : entries) total += blocks_kib(*e.node);
        out("total " + std::to_string(total) + "\n");
      }
      out(render(entries));
    }
  }

  // --- mkdir / touch ------------------------------------------------------

  VfsNode new_node(std::string name, NodeKind kind) const {
    VfsNode n;
    n.name = std::move(name);
    n.kind = kind;
    n.owner = st_.session_user;
    n.mtime = now_;
    if (kind == NodeKind::Directory) {
      n.mode = 0755;
      n.size = kDirectorySize;
    } else {
      n.mode = 0644;
      n.size = 0;
      n.content = std::string();
    }
    return n;
  }

  void mkdir(std::span<const std::string> args) {
    const bool parents = std::any_of(args.begin(), args.end(),
                                     [](const auto& a) { return is_flag(a); });
    if (operand_count(args) == 0)
      return fail_line("mkdir: missing operand\nTry 'mkdir --help' for more information.", 1);
    for (const auto& op : args) {
      if (is_flag(op)) continue;
      const std::string prefix = "mkdir: cannot create directory " + squote(op);
      if (parents) {
        if (op.empty()) fail_lookup(Lookup::NoEntry, prefix);
        else mkdir_parents(op);
        continue;
      }
      auto pr = lookup(dirname_of(op), true);
      if (pr.status != Lookup::Ok) {
        fail_lookup(pr.status, prefix);
        continue;
      }
      VfsNode* parent = node(pr.physical);
      if (!parent->is_dir()) {
        fail("not_directory", prefix);
        continue;
      }
      if (!permits(*parent, 1)) {
        fail("permission_denied", prefix);
        continue;
      }
      const auto base = basename_of(op);
      if (base == "/" || base == "." || base == ".." || parent->child(base) != nullptr) {
        fail("file_exists", prefix);
        continue;
      }
      if (!permits(*parent, 2)) {
        fail("permission_denied", prefix);
        continue;
      }
      parent->put(new_node(base, NodeKind::Directory));
      parent->mtime = now_;
      changed();
    }
  }

  void mkdir_parents(const std::string& op) {
    Components phys = op.starts_with('/') ? Components{} : pcwd();
    std::string typed = op.starts_with('/') ? "" : "";
    const auto parts = detail::split_path(op);
    for (std::size_t i = 0; i < parts.size(); ++i) {
      typed += (i == 0 && !op.starts_with('/')) ? parts[i] : "/" + parts[i];
      const auto& comp = parts[i];
      if (comp == ".") continue;
      if (comp == "..") {
        if (!phys.empty()) phys.pop_back();
        continue;
      }
      VfsNode* dir = node(phys);
      VfsNode* next = dir->child(comp);
      if (!permits(*dir, 1) || (next == nullptr && !permits(*dir, 2))) {
        fail("permission_denied", "mkdir: cannot create directory " + squote(typed));
        return;
      }
      if (next == nullptr) {
        dir->put(new_node(comp, NodeKind::Directory));
        dir->mtime = now_;
        changed();
        phys.push_back(comp);
        continue;
      }
      auto r = detail::resolve(st_.root, phys, comp, true, search_check());
      if (r.status != Lookup::Ok || !node(r.physical)->is_dir()) {
        const bool last = i + 1 == parts.size();
        fail(last ? "file_exists" : "not_directory",
             "mkdir: cannot create directory " + squote(typed));
        return;
      }
      phys = r.physical;
    }
  }

  void touch(std::span<const std::string> args) {
    if (args.empty())
      return fail_line("touch: missing file operand\nTry 'touch --help' for more information.", 1);
    for (const auto& op : args) {
      const std::string prefix = "touch: cannot touch " + squote(op);
      auto r = lookup(op, true);
      if (r.status == Lookup::Ok) {
        VfsNode* n = node(r.physical);
        if (n->owner != st_.session_user && !permits(*n, 2)) {
          fail("permission_denied", prefix);
          continue;
        }
        n->mtime = now_;
        changed();
        continue;
      }
      auto pr = lookup(dirname_of(op), true);
      if (r.status != Lookup::NoEntry || pr.status != Lookup::Ok ||
          !node(pr.physical)->is_dir()) {
        fail_lookup(r.status == Lookup::NoEntry && pr.status == Lookup::Ok
                        ? Lookup::NotDirectory
                        : (pr.status == Lookup::Ok ? r.status : pr.status),
                    prefix);
        continue;
      }
      VfsNode* parent = node(pr.physical);
      if (!permits(*parent, 3)) {
        fail("permission_denied", prefix);
        continue;
      }
      parent->put(new_node(basename_of(op), NodeKind::File));
      parent->mtime = now_;
      changed();
    }
  }

  // --- rm -----------------------------------------------------------------

  void rm(std::span<const std::string> args) {
    bool recursive = false, force = false;
    for (const auto& a : args) {
      if (!is_flag(a)) continue;
      recursive |= a.find_first_of("rR") != std::string::npos;
      force |= a.find('f') != std::string::npos;
    }
    if (operand_count(args) == 0) {
      if (!force)
        fail_line("rm: missing operand\nTry 'rm --help' for more information.", 1);
      return;
    }
    const Components cwd_phys = pcwd();
    for (const auto& op : args) {
      if (is_flag(op)) continue;
      const auto base = basename_of(op);
      if (base == "." || base == "..") {
        fail_line("rm: refusing to remove '.' or '..' directory: skipping " + squote(op), 1);
        continue;
      }
      auto r = lookup(op, false);
      const std::string prefix = "rm: cannot remove " + squote(op);
      if (r.status != Lookup::Ok) {
        if (!(force && r.status == Lookup::NoEntry)) fail_lookup(r.status, prefix);
        continue;
      }
      if (r.physical.empty()) {
        if (recursive)
          fail_line("rm: it is dangerous to operate recursively on '/'\n"
                    "rm: use --no-preserve-root to override this failsafe", 1);
        else
          fail("is_directory", prefix);
        continue;
      }
      const VfsNode* n = node(r.physical);
      if (n->is_dir() && !recursive) {
        fail("is_directory", prefix);
        continue;
      }
      Components parent(r.physical.begin(), r.physical.end() - 1);
      const VfsNode* pdir = node(parent);
      if (!force && n->kind != NodeKind::Symlink && !permits(*n, 2)) {
        // An interactive rm asks first; the answer is taken to be "no".
        out("rm: remove write-protected " + kind_phrase(*n) + " " + squote(op) + "? ");
        continue;
      }
      if (!permits(*pdir, 3) || (n->is_dir() && !subtree_writable(*n))) {
        fail("permission_denied", prefix);
        continue;
      }
      if (!may_unlink(*pdir, *n)) {
        fail("not_permitted", prefix);
        continue;
      }
      if (is_prefix(r.physical, cwd_phys)) {
        fail("permission_denied", prefix);
        continue;
      }
      node(parent)->erase(r.physical.back());
      node(parent)->mtime = now_;
      changed();
    }
  }

  static std::string kind_phrase(const VfsNode& n) {
    if (n.is_dir()) return "directory";
    return n.size == 0 ? "regular empty file" : "regular file";
  }

  bool subtree_writable(const VfsNode& dir) const {
    if (dir.children.empty()) return true;
    if (!permits(dir, 7)) return false;
    return std::all_of(dir.children.begin(), dir.children.end(), [this](const VfsNode& c) {
      return !c.is_dir() || subtree_writable(c);
    });
  }

  // --- mv / cp ------------------------------------------------------------

  static void restamp(VfsNode& n, const std::string& owner, std::int64_t now) {
    n.owner = owner;
    n.mtime = now;
    n.mode &= ~022u;
    for (auto& c : n.children) restamp(c, owner, now);
  }

  void merge_copy(VfsNode& dst, const VfsNode& src) {
    for (const auto& c : src.children) {
      VfsNode* existing = dst.child(c.name);
      if (existing && existing->is_dir() && c.is_dir()) {
        merge_copy(*existing, c);
        existing->mtime = now_;
        continue;
      }
      VfsNode copy = c;
      restamp(copy, st_.session_user, now_);
      dst.put(std::move(copy));
    }
    dst.mtime = now_;
  }

  void move_or_copy(std::span<const std::string> args, bool copy) {
    const std::string tool = copy ? "cp" : "mv";
    bool recursive = false;
    std::vector<std::string> ops;
    for (const auto& a : args) {
      if (is_flag(a)) recursive = true;
      else ops.push_back(a);
    }
    if (ops.empty())
      return fail_line(tool + ": missing file operand\nTry '" + tool +
                           " --help' for more information.", 1);
    if (ops.size() == 1)
      return fail_line(tool + ": missing destination file operand after " +
                           squote(ops[0]) + "\nTry '" + tool + " --help' for more information.", 1);

    const std::string dest = ops.back();
    ops.pop_back();
    auto dr = lookup(dest, true);
    const bool dest_is_dir = dr.status == Lookup::Ok && node(dr.physical)->is_dir();
    if (ops.size() > 1 && !dest_is_dir)
      return fail_line(tool + ": target " + squote(dest) + " is not a directory", 1);

    const Components cwd_phys = pcwd();
    for (const auto& src : ops) {
      auto sr = lookup(src, copy && !recursive);
      if (sr.status != Lookup::Ok) {
        fail_lookup(sr.status, tool + ": cannot stat " + squote(src));
        continue;
      }
      const VfsNode* sn = node(sr.physical);
      if (copy && sn->is_dir() && !recursive) {
        fail_line("cp: -r not specified; omitting directory " + squote(src), 1);
        continue;
      }

      Components target;
      std::string target_display;
      if (dest_is_dir) {
        const std::string base = sr.physical.empty() ? "/" : basename_of(src);
        target = dr.physical;
        target.push_back(base);
        target_display = concat_path(dest, base);
      } else {
        auto pr = lookup(dirname_of(dest), true);
        if (pr.status != Lookup::Ok || !node(pr.physical)->is_dir()) {
          fail_lookup(pr.status == Lookup::Ok ? Lookup::NotDirectory : pr.status,
                      tool + ": cannot " + (copy ? "create regular file " + squote(dest)
                                                 : "move " + squote(src) + " to " + squote(dest)));
          continue;
        }
        target = pr.physical;
        target.push_back(basename_of(dest));
        target_display = dest;
      }

      if (target == sr.physical) {
        fail_line(tool + ": " + squote(src) + " and " + squote(target_display) +
                      " are the same file", 1);
        continue;
      }
      if (sn->is_dir() && is_prefix(sr.physical, target)) {
        if (copy)
          fail_line("cp: cannot copy a directory, " + squote(src) + ", into itself, " +
                        squote(target_display), 1);
        else
          fail_line("mv: cannot move " + squote(src) + " to a subdirectory of itself, " +
                        squote(target_display), 1);
        continue;
      }
      if (!copy && (sr.physical.empty() || is_prefix(sr.physical, cwd_phys))) {
        fail("busy", "mv: cannot move " + squote(src) + " to " + squote(target_display));
        continue;
      }

      Components target_parent(target.begin(), target.end() - 1);
      VfsNode* tparent = node(target_parent);
      VfsNode* existing = tparent->child(target.back());
      if (copy) {
        if (sn->kind == NodeKind::File && !permits(*sn, 4)) {
          fail("permission_denied", "cp: cannot open " + squote(src) + " for reading");
          continue;
        }
        if (existing != nullptr && existing->kind == NodeKind::File && !sn->is_dir() &&
            !permits(*existing, 2)) {
          fail("permission_denied", "cp: cannot open " + squote(target_display) + " for writing");
          continue;
        }
        if (existing == nullptr && !permits(*tparent, 3)) {
          fail("permission_denied", std::string("cp: cannot create ") +
                                        (sn->is_dir() ? "directory " : "regular file ") +
                                        squote(target_display));
          continue;
        }
      } else {
        const VfsNode* sparent = node(Components(sr.physical.begin(), sr.physical.end() - 1));
        const std::string what = "mv: cannot move " + squote(src) + " to " + squote(target_display);
        if (!permits(*sparent, 3) || !permits(*tparent, 3)) {
          fail("permission_denied", what);
          continue;
        }
        if (!may_unlink(*sparent, *sn) || (existing != nullptr && !may_unlink(*tparent, *existing))) {
          fail("not_permitted", what);
          continue;
        }
      }
      if (existing != nullptr) {
        if (existing->is_dir() && !sn->is_dir()) {
          fail_line(tool + ": cannot overwrite directory " + squote(target_display) +
                        " with non-directory", 1);
          continue;
        }
        if (!existing->is_dir() && sn->is_dir()) {
          fail_line(tool + ": cannot overwrite non-directory " + squote(target_display) +
                        " with directory " + squote(src), 1);
          continue;
        }
        if (!copy && existing->is_dir() && !existing->children.empty()) {
          fail_line("mv: cannot move " + squote(src) + " to " + squote(target_display) +
                        ": Directory not empty", 1);
          continue;
        }
      }

      if (copy) {
        if (existing != nullptr && existing->is_dir()) {
          merge_copy(*existing, *sn);
        } else if (existing != nullptr && existing->kind == NodeKind::File &&
                   sn->kind == NodeKind::File) {
          existing->content = sn->content;
          existing->size = sn->size;
          existing->mtime = now_;
        } else {
          VfsNode c = *sn;
          c.name = target.back();
          restamp(c, st_.session_user, now_);
          tparent->put(std::move(c));
          tparent->mtime = now_;
        }
      } else {
        VfsNode moved = *sn;
        Components src_parent(sr.physical.begin(), sr.physical.end() - 1);
        node(src_parent)->erase(sr.physical.back());
        node(src_parent)->mtime = now_;
        moved.name = target.back();
        VfsNode* tp = node(target_parent);
        tp->put(std::move(moved));
        tp->mtime = now_;
      }
      changed();
    }
  }

  VfsState& st_;
  const ExecContext& ctx_;
  NativeResult& res_;
  std::int64_t now_;
};

}  // namespace

bool native_supports(std::span<const std::string> argv) {
  if (argv.empty()) return false;
  const std::string& cmd = argv[0];
  auto args = argv.subspan(1);
  auto no_dashdash = std::none_of(args.begin(), args.end(),
                                  [](const auto& a) { return a == "--"; });
  if (!no_dashdash) return false;

  if (cmd == "pwd" || cmd == "whoami" || cmd == "hostname" || cmd == "logout")
    return args.empty();
  if (cmd == "exit")
    return args.empty() ||
           (args.size() == 1 && !args[0].empty() &&
            args[0].find_first_not_of("0123456789") == std::string::npos);
  if (cmd == "cd") return args.empty() || args[0] == "-" || !is_flag(args[0]);
  if (cmd == "ls") return flags_within(args, "la1");
  if (cmd == "mkdir") return flags_within(args, "p");
  if (cmd == "rm") return flags_within(args, "rRf");
  if (cmd == "cp") return flags_within(args, "rR");
  if (cmd == "touch" || cmd == "mv") return flags_within(args, "");
  if (cmd == "cat")
    return !args.empty() && flags_within(args, "") &&
           std::none_of(args.begin(), args.end(), [](const auto& a) { return a == "-"; });
  if (cmd == "echo") {
    for (const auto& a : args) {
      if (a.size() < 2 || a[0] != '-' || a.find_first_not_of("neE", 1) != std::string::npos)
        break;
      if (a.find('e') != std::string::npos) return false;
    }
    return true;
  }
  return false;
}

NativeResult exec_native(VfsState& state, std::span<const std::string> argv,
                         const ExecContext& ctx) {
  NativeResult result;
  if (argv.empty()) return result;
  NativeShell(state, ctx, result).run(argv);
  return result;
}

}  // namespace sbash
