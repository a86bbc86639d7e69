#include "sbash/vfs.hpp"

#include <algorithm>
#include <chrono>
#include <deque>
#include <fstream>
#include <sstream>

#include "sbash/errors.hpp"
#include "vfs_paths.hpp"

namespace sbash {

namespace {

auto name_less = [](const VfsNode& node, std::string_view name) {
  return node.name < name;
};

// splitmix64; spelled out so mutation output does not depend on the
// standard library's distribution implementations.
class SplitMix64 {
 public:
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform integer in [0, bound).
  std::uint64_t below(std::uint64_t bound) { return bound ? next() % bound : 0; }

 private:
  std::uint64_t state_;
};

struct Decoy {
  const char* name;
  const char* content;  // nullptr: binary stub
  std::uint64_t stub_size;
};

constexpr Decoy kTmpDecoys[] = {
    {"tmp.Xk3lq0Zp7c", nullptr, 0},
    {"sess_9f2c4e1a7b", "user_id|i:1;auth|b:1;\n", 0},
    {"backup.tar.gz", nullptr, 48213},
    {"update.log", "Hit:1 http://archive.ubuntu.com/ubuntu jammy InRelease\n", 0},
};

constexpr Decoy kHomeDecoys[] = {
    {"notes.txt", "rotate db creds before friday\nbackup job moved to 02:00\n", 0},
    {"db_backup.sql", nullptr, 183402},
    {"todo.txt", "- patch nginx\n- clean /var/log\n", 0},
    {".mysql_history", "show databases;\nuse app;\nselect * from users limit 5;\n", 0},
};

void jitter(VfsNode& node, SplitMix64& rng, bool is_root) {
  constexpr std::int64_t kNinetyDays = 90LL * 24 * 3600;
  if (!is_root) node.mtime -= static_cast<std::int64_t>(rng.below(kNinetyDays + 1));
  if (node.kind == NodeKind::File && !node.content && node.size > 0) {
    const auto permille = static_cast<std::int64_t>(rng.below(401)) - 200;
    const auto delta = static_cast<std::int64_t>(node.size) * permille / 1000;
    node.size = static_cast<std::uint64_t>(static_cast<std::int64_t>(node.size) + delta);
  }
  for (auto& c : node.children) jitter(c, rng, false);
}

std::optional<std::string> validate_node(const VfsNode& node, const std::string& path) {
  switch (node.kind) {
    case NodeKind::Directory:
      if (node.content) return path + ": directory carries content";
      for (std::size_t i = 0; i < node.children.size(); ++i) {
        const auto& c = node.children[i];
        if (c.name.empty() || c.name.find('/') != std::string::npos || c.name == "." ||
            c.name == "..")
          return path + ": invalid child name '" + c.name + "'";
        if (i > 0 && !(node.children[i - 1].name < c.name))
          return path + ": children not unique and ordered at '" + c.name + "'";
        auto child_path = (path == "/" ? "" : path) + "/" + c.name;
        if (auto err = validate_node(c, child_path)) return err;
      }
      return std::nullopt;
    case NodeKind::File:
      if (!node.children.empty()) return path + ": file with children";
      if (node.content && node.content->size() != node.size)
        return path + ": size does not match content length";
      return std::nullopt;
    case NodeKind::Symlink:
      if (!node.children.empty()) return path + ": symlink with children";
      if (node.link_target.empty()) return path + ": symlink without target";
      return std::nullopt;
  }
  return std::nullopt;
}

void collect_records(const VfsNode& node, const std::string& path,
                     std::vector<TemplateRecord>& out) {
  TemplateRecord r;
  r.path = path;
  r.kind = node.kind;
  r.size = node.size;
  r.mode = node.mode;
  r.owner = node.owner;
  r.mtime = node.mtime;
  if (node.kind == NodeKind::Symlink) r.extra = node.link_target;
  else if (node.kind == NodeKind::File) r.extra = node.content;
  out.push_back(std::move(r));
  for (const auto& c : node.children)
    collect_records(c, (path == "/" ? "" : path) + "/" + c.name, out);
}

}  // namespace

VfsNode* VfsNode::child(std::string_view child_name) {
  auto it = std::lower_bound(children.begin(), children.end(), child_name, name_less);
  return it != children.end() && it->name == child_name ? &*it : nullptr;
}

const VfsNode* VfsNode::child(std::string_view child_name) const {
  auto it = std::lower_bound(children.begin(), children.end(), child_name, name_less);
  return it != children.end() && it->name == child_name ? &*it : nullptr;
}

VfsNode& VfsNode::put(VfsNode node) {
  auto it = std::lower_bound(children.begin(), children.end(), node.name, name_less);
  if (it != children.end() && it->name == node.name) {
    *it = std::move(node);
    return *it;
  }
  return *children.insert(it, std::move(node));
}

bool VfsNode::erase(std::string_view child_name) {
  auto it = std::lower_bound(children.begin(), children.end(), child_name, name_less);
  if (it == children.end() || it->name != child_name) return false;
  children.erase(it);
  return true;
}

std::int64_t system_clock_seconds() {
  return std::chrono::duration_cast<std::chrono::seconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

namespace detail {

Components split_path(std::string_view path) {
  Components out;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    auto j = path.find('/', i);
    if (j == std::string_view::npos) j = path.size();
    if (j > i) out.emplace_back(path.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string join_path(const Components& parts) {
  if (parts.empty()) return "/";
  std::string out;
  for (const auto& p : parts) {
    out += '/';
    out += p;
  }
  return out;
}

VfsNode* node_at(VfsNode& root, const Components& physical) {
  VfsNode* cur = &root;
  for (const auto& name : physical) {
    if (!cur->is_dir()) return nullptr;
    cur = cur->child(name);
    if (cur == nullptr) return nullptr;
  }
  return cur;
}

const VfsNode* node_at(const VfsNode& root, const Components& physical) {
  return node_at(const_cast<VfsNode&>(root), physical);
}

Resolved resolve(const VfsNode& root, const Components& base,
                 std::string_view path, bool follow_last, const SearchCheck& may_search) {
  Resolved res;
  if (path.empty()) {  // the kernel's ENOENT for ""
    res.status = Lookup::NoEntry;
    return res;
  }
  Components stack = path.starts_with('/') ? Components{} : base;
  std::deque<std::string> pending;
  for (auto& c : split_path(path)) pending.push_back(std::move(c));
  const bool want_dir = !path.empty() && path.back() == '/';
  if (want_dir) follow_last = true;
  int hops = 0;

  while (!pending.empty()) {
    const std::string comp = std::move(pending.front());
    pending.pop_front();
    const VfsNode* cur = node_at(root, stack);
    if (cur == nullptr || !cur->is_dir()) {
      res.status = Lookup::NotDirectory;
      return res;
    }
    if (may_search && !may_search(*cur)) {
      res.status = Lookup::Access;
      return res;
    }
    if (comp == ".") continue;
    if (comp == "..") {
      if (!stack.empty()) stack.pop_back();
      continue;
    }
    const VfsNode* next = cur->child(comp);
    if (next == nullptr) {
      res.status = Lookup::NoEntry;
      stack.push_back(comp);
      res.physical = std::move(stack);
      return res;
    }
    if (next->kind == NodeKind::Symlink && (!pending.empty() || follow_last)) {
      if (++hops > kMaxSymlinkHops) {
        res.status = Lookup::Loop;
        return res;
      }
      auto target = split_path(next->link_target);
      if (next->link_target.starts_with('/')) stack.clear();
      pending.insert(pending.begin(), target.begin(), target.end());
      continue;
    }
    stack.push_back(comp);
  }
  const VfsNode* final_node = node_at(root, stack);
  if (want_dir && (final_node == nullptr || !final_node->is_dir())) {
    res.status = Lookup::NotDirectory;
    return res;
  }
  res.physical = std::move(stack);
  return res;
}

std::string logical_join(std::string_view cwd, std::string_view path) {
  const bool absolute = path.starts_with('/');
  const std::string_view anchor = absolute ? path : cwd;
  const bool double_slash = anchor.starts_with("//") && !anchor.starts_with("///");
  Components parts = absolute ? Components{} : split_path(cwd);
  for (auto& c : split_path(path)) {
    if (c == ".") continue;
    if (c == "..") {
      if (!parts.empty()) parts.pop_back();
      continue;
    }
    parts.push_back(std::move(c));
  }
  return double_slash ? "/" + join_path(parts) : join_path(parts);
}

Components physical_cwd(const VfsState& state) {
  auto r = resolve(state.root, {}, state.cwd, true);
  return r.physical;
}

}  // namespace detail

VfsNode tree_from_records(const std::vector<TemplateRecord>& records) {
  using detail::Components;
  std::vector<std::pair<Components, const TemplateRecord*>> order;
  order.reserve(records.size());
  for (const auto& r : records) order.emplace_back(detail::split_path(r.path), &r);
  std::stable_sort(order.begin(), order.end(),
                   [](const auto& a, const auto& b) { return a.first < b.first; });

  VfsNode root;
  root.name = "";
  for (const auto& [parts, rec] : order) {
    VfsNode node;
    node.kind = rec->kind;
    node.size = rec->size;
    node.mode = rec->mode;
    node.owner = rec->owner;
    node.mtime = rec->mtime;
    if (rec->kind == NodeKind::Symlink) node.link_target = rec->extra.value_or("");
    if (rec->kind == NodeKind::File) node.content = rec->extra;

    if (parts.empty()) {
      if (rec->kind != NodeKind::Directory) throw ParseError("template: / must be a directory");
      node.children = std::move(root.children);
      root = std::move(node);
      continue;
    }
    Components parent_parts(parts.begin(), parts.end() - 1);
    VfsNode* parent = detail::node_at(root, parent_parts);
    if (parent == nullptr || !parent->is_dir())
      throw ParseError("template: parent directory of " + rec->path + " not declared");
    if (parent->child(parts.back()) != nullptr)
      throw ParseError("template: duplicate entry " + rec->path);
    node.name = parts.back();
    parent->put(std::move(node));
  }
  return root;
}

std::vector<TemplateRecord> records_from_tree(const VfsNode& root) {
  std::vector<TemplateRecord> out;
  collect_records(root, "/", out);
  return out;
}

VfsState build_from_records(const std::vector<TemplateRecord>& records,
                            const SystemProfile& profile) {
  VfsState state;
  state.root = tree_from_records(records);
  const auto& account = profile.default_account();
  const auto* home = find_node(state, account.home);
  if (home == nullptr || !home->is_dir())
    throw MissingHome("home directory " + account.home + " of '" + account.name +
                      "' is not in the filesystem template");
  state.cwd = detail::logical_join("/", account.home);
  state.session_user = account.name;
  return state;
}

VfsState build_from_template(const std::filesystem::path& template_path,
                             const SystemProfile& profile) {
  std::ifstream in(template_path, std::ios::binary);
  if (!in) throw ParseError("cannot read filesystem template " + template_path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return build_from_records(parse_template_records(ss.str()), profile);
}

VfsState mutate(const VfsState& state, std::uint64_t seed) {
  VfsState out = state;
  SplitMix64 rng(seed);
  jitter(out.root, rng, true);

  std::vector<detail::Components> targets;
  if (auto* tmp = out.root.child("tmp"); tmp && tmp->is_dir()) targets.push_back({"tmp"});
  if (auto* home = out.root.child("home"); home && home->is_dir())
    for (const auto& c : home->children)
      if (c.is_dir()) targets.push_back({"home", c.name});
  if (targets.empty()) return out;

  const auto decoys = rng.below(4);
  for (std::uint64_t i = 0; i < decoys; ++i) {
    const auto& where = targets[rng.below(targets.size())];
    VfsNode* dir = detail::node_at(out.root, where);
    const bool in_home = where.front() == "home";
    const Decoy& d = in_home ? kHomeDecoys[rng.below(std::size(kHomeDecoys))]
                             : kTmpDecoys[rng.below(std::size(kTmpDecoys))];
    const auto age = static_cast<std::int64_t>(rng.below(7 * 24 * 3600));
    if (dir->child(d.name) != nullptr) continue;
    VfsNode f;
    f.name = d.name;
    f.kind = NodeKind::File;
    f.mode = 0644;
    f.owner = in_home ? dir->owner : "root";
    f.mtime = dir->mtime - age;
    if (d.content) {
      f.content = d.content;
      f.size = f.content->size();
    } else {
      f.size = d.stub_size;
    }
    dir->put(std::move(f));
  }
  return out;
}

const VfsNode* find_node(const VfsState& state, std::string_view path) {
  auto r = detail::resolve(state.root, detail::physical_cwd(state), path, true);
  if (r.status != detail::Lookup::Ok) return nullptr;
  return detail::node_at(state.root, r.physical);
}

std::optional<std::string> validate_state(const VfsState& state) {
  if (!state.root.is_dir()) return "root is not a directory";
  if (auto err = validate_node(state.root, "/")) return err;
  auto r = detail::resolve(state.root, {}, state.cwd, true);
  if (r.status != detail::Lookup::Ok) return "cwd " + state.cwd + " does not resolve";
  const auto* n = detail::node_at(state.root, r.physical);
  if (n == nullptr || !n->is_dir()) return "cwd " + state.cwd + " is not a directory";
  return std::nullopt;
}

}  // namespace sbash
