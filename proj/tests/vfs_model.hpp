#pragma once

// Reference model for randomized native-command sequences: the playground
// below kRoot is a flat map from absolute path to kind, and every command
// is re-derived from that map without touching the real tree code.

#include <algorithm>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sbash/dispatch.hpp"
#include "support.hpp"

namespace sbash::testing {

class VfsModel {
 public:
  static constexpr const char* kRoot = "/tmp/p";

  enum class Kind { File, Dir };

  VfsModel() : cwd_(kRoot) { nodes_[kRoot] = Kind::Dir; }

  const std::string& cwd() const { return cwd_; }
  const std::map<std::string, Kind>& nodes() const { return nodes_; }

  std::string absolute(const std::string& op) const {
    std::vector<std::string> parts;
    const std::string joined = op.starts_with('/') ? op : cwd_ + "/" + op;
    std::size_t i = 0;
    while (i < joined.size()) {
      auto j = joined.find('/', i);
      if (j == std::string::npos) j = joined.size();
      const std::string c = joined.substr(i, j - i);
      if (c == "..") {
        if (!parts.empty()) parts.pop_back();
      } else if (!c.empty() && c != ".") {
        parts.push_back(c);
      }
      i = j + 1;
    }
    std::string out;
    for (const auto& p : parts) out += "/" + p;
    return out.empty() ? "/" : out;
  }

  static std::string parent(const std::string& p) { return p.substr(0, p.rfind('/')); }
  static std::string base(const std::string& p) { return p.substr(p.rfind('/') + 1); }
  static bool within(const std::string& p, const std::string& dir) {
    return p == dir || p.starts_with(dir + "/");
  }

  std::optional<Kind> kind(const std::string& p) const {
    auto it = nodes_.find(p);
    if (it == nodes_.end()) return std::nullopt;
    return it->second;
  }
  bool is_dir(const std::string& p) const { return kind(p) == Kind::Dir; }

  std::vector<std::string> children(const std::string& dir) const {
    std::vector<std::string> out;
    for (const auto& [p, k] : nodes_)
      if (p != dir && parent(p) == dir) out.push_back(base(p));
    return out;
  }

  /// Applies `argv` to the model. Returns false when the command must fail
  /// (with the model untouched) and nullopt when the case is outside what
  /// the model covers and should not be issued.
  std::optional<bool> apply(const std::vector<std::string>& argv) {
    const std::string& cmd = argv[0];
    if (cmd == "pwd" || cmd == "ls") return true;
    if (cmd == "cd") {
      const auto p = absolute(argv[1]);
      if (!within(p, kRoot)) return std::nullopt;
      if (!is_dir(p)) return false;
      cwd_ = p;
      return true;
    }
    if (cmd == "mkdir" && argv[1] == "-p") {
      const auto p = absolute(argv[2]);
      std::vector<std::string> chain;
      for (auto q = p; q != kRoot; q = parent(q)) chain.push_back(q);
      std::reverse(chain.begin(), chain.end());
      for (const auto& q : chain) {
        if (kind(q) == Kind::File) return false;
        nodes_[q] = Kind::Dir;
      }
      return true;
    }
    if (cmd == "mkdir") {
      const auto p = absolute(argv[1]);
      if (kind(p) || !is_dir(parent(p))) return false;
      nodes_[p] = Kind::Dir;
      return true;
    }
    if (cmd == "touch") {
      const auto p = absolute(argv[1]);
      if (kind(p)) return true;
      if (!is_dir(parent(p))) return false;
      nodes_[p] = Kind::File;
      return true;
    }
    if (cmd == "rm") {
      const bool recursive = argv[1] == "-r";
      const auto p = absolute(argv[recursive ? 2 : 1]);
      if (p == kRoot || !within(p, kRoot)) return std::nullopt;
      if (!kind(p)) return false;
      if (is_dir(p) && !recursive) return false;
      if (within(cwd_, p)) return false;  // the emulation refuses to pull the floor away
      erase_tree(p);
      return true;
    }
    if (cmd == "mv" || cmd == "cp") return move_or_copy(cmd == "cp", argv);
    return std::nullopt;
  }

 private:
  void erase_tree(const std::string& p) {
    for (auto it = nodes_.begin(); it != nodes_.end();)
      it = within(it->first, p) ? nodes_.erase(it) : std::next(it);
  }

  std::optional<bool> move_or_copy(bool copy, const std::vector<std::string>& argv) {
    const bool recursive = argv[1] == "-r";
    const auto src = absolute(argv[recursive ? 2 : 1]);
    const auto dst = absolute(argv[recursive ? 3 : 2]);
    if (src == kRoot) return std::nullopt;
    const auto sk = kind(src);
    if (!sk) return false;
    if (copy && *sk == Kind::Dir && !recursive) return false;
    std::string target = is_dir(dst) ? dst + "/" + base(src) : dst;
    if (!is_dir(dst) && !is_dir(parent(dst))) return false;
    if (target == src) return false;
    if (*sk == Kind::Dir && within(target, src)) return false;
    if (!copy && within(cwd_, src)) return false;
    const auto tk = kind(target);
    if (tk == Kind::Dir && *sk == Kind::File) return false;
    if (tk == Kind::File && *sk == Kind::Dir) return false;
    if (tk == Kind::Dir) {
      if (copy) return std::nullopt;  // merge copies are left to the unit tests
      if (!children(target).empty()) return false;
    }
    std::map<std::string, Kind> moved;
    for (const auto& [p, k] : nodes_)
      if (within(p, src)) moved[target + p.substr(src.size())] = k;
    if (!copy) erase_tree(src);
    if (tk == Kind::Dir) erase_tree(target);
    for (const auto& [p, k] : moved) nodes_[p] = k;
    return true;
  }

  std::string cwd_;
  std::map<std::string, Kind> nodes_;
};

/// One random command over the names a, b and c, relative or absolute.
inline std::vector<std::string> random_command(Gen& g, const VfsModel& model) {
  static const std::vector<std::string> names = {"a", "b", "c"};
  auto path = [&] {
    std::string p = g.pick(names);
    if (g.chance(0.3)) p += "/" + g.pick(names);
    if (g.chance(0.2)) p = model.cwd() + "/" + p;
    return p;
  };
  switch (g.below(11)) {
    case 0: return {"mkdir", path()};
    case 1: return {"mkdir", "-p", path()};
    case 2: return {"touch", path()};
    case 3: return {"rm", path()};
    case 4: return {"rm", "-r", path()};
    case 5: return {"cd", path()};
    case 6: return {"cd", model.cwd() == VfsModel::kRoot ? std::string(VfsModel::kRoot) : ".."};
    case 7: return {"mv", path(), path()};
    case 8: return {"cp", path(), path()};
    case 9: return {"cp", "-r", path(), path()};
    default: return g.chance(0.5) ? std::vector<std::string>{"ls"} : std::vector<std::string>{"pwd"};
  }
}

inline std::string join_words(const std::vector<std::string>& argv) {
  std::string s;
  for (const auto& a : argv) s += (s.empty() ? "" : " ") + a;
  return s;
}

/// Runs `steps` random commands through a session and checks it against the
/// model after each one. Returns a failure description or nullopt.
inline std::optional<std::string> run_model_sequence(const SystemProfile& profile,
                                                     const VfsState& base, std::uint64_t seed,
                                                     int steps) {
  Gen g(seed);
  Session s(profile, base, nullptr, fixed_clock(1792140000));
  s.dispatch(std::string("mkdir ") + VfsModel::kRoot);
  s.dispatch(std::string("cd ") + VfsModel::kRoot);
  VfsModel model;
  std::string log;
  for (int i = 0; i < steps; ++i) {
    const auto argv = random_command(g, model);
    VfsModel next = model;
    const auto expect = next.apply(argv);
    if (!expect) continue;
    const std::string line = join_words(argv);
    log += "  $ " + line + "\n";
    const auto r = s.dispatch(line);
    auto fail = [&](const std::string& why) {
      return "seed " + std::to_string(seed) + ": " + why + "\n" + log + "output: " + r.output;
    };
    if (r.command_class.variant != CommandVariant::Native) return fail("not handled natively");
    if (*expect) model = next;
    if (argv[0] == "pwd") {
      if (r.output != model.cwd() + "\n") return fail("pwd mismatch");
    } else if (argv[0] == "ls") {
      std::string want;
      const auto kids = model.children(model.cwd());
      // Short names, so one row separated by two spaces.
      for (const auto& k : kids) want += (want.empty() ? "" : "  ") + k;
      if (!kids.empty()) want += "\n";
      if (r.output != want) return fail("ls mismatch, want '" + want + "'");
    } else if (*expect != r.output.empty()) {
      return fail(*expect ? "unexpected error output" : "missing error output");
    }
    if (auto bad = validate_state(s.state())) return fail("invalid state: " + *bad);
    if (s.state().cwd != model.cwd()) return fail("cwd mismatch: " + s.state().cwd);
    for (const auto& [p, k] : model.nodes()) {
      const VfsNode* n = find_node(s.state(), p);
      if (n == nullptr) return fail("missing " + p);
      if (n->is_dir() != (k == VfsModel::Kind::Dir)) return fail("kind mismatch at " + p);
    }
    std::size_t real_count = 0;
    std::function<void(const VfsNode&)> count = [&](const VfsNode& n) {
      ++real_count;
      for (const auto& c : n.children) count(c);
    };
    count(*find_node(s.state(), VfsModel::kRoot));
    if (real_count != model.nodes().size()) return fail("extra nodes in the tree");
  }
  return std::nullopt;
}

}  // namespace sbash::testing
