#include "sbash/fs_snapshot.hpp"

#include <fcntl.h>
#include <pwd.h>
#include <sys/stat.h>
#include <unistd.h>

#include <algorithm>
#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include "sbash/errors.hpp"

namespace fs = std::filesystem;

namespace sbash {

bool path_within(std::string_view path, std::string_view prefix) {
  if (prefix == "/") return true;
  if (!path.starts_with(prefix)) return false;
  return path.size() == prefix.size() || path[prefix.size()] == '/';
}

namespace {

bool any_within(std::string_view path, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(),
                     [&](const std::string& p) { return path_within(path, p); });
}

/// A deep prefix strictly below `path` means we still need to descend.
bool leads_to(std::string_view path, const std::vector<std::string>& prefixes) {
  return std::any_of(prefixes.begin(), prefixes.end(), [&](const std::string& p) {
    return p.size() > path.size() && path_within(p, path);
  });
}

std::string owner_name(uid_t uid) {
  if (const passwd* pw = getpwuid(uid)) return pw->pw_name;
  return std::to_string(uid);
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Walker {
 public:
  Walker(fs::path root, const SnapshotOptions& opts) : root_(std::move(root)), opts_(opts) {}

  std::vector<TemplateRecord> run() {
    visit("/", Depth::Full);
    return std::move(out_);
  }

 private:
  // Full: recurse. Listed: record children, which are not listed in turn.
  enum class Depth { None, Listed, Full };

  fs::path host_path(const std::string& vpath) const {
    return vpath == "/" ? root_ : root_ / vpath.substr(1);
  }

  Depth child_depth(const std::string& child, Depth parent) const {
    if (any_within(child, opts_.deep) || leads_to(child, opts_.deep)) return Depth::Full;
    return parent == Depth::Full ? Depth::Listed : Depth::None;
  }

  void visit(const std::string& vpath, Depth depth) {
    if (vpath != "/" && any_within(vpath, opts_.exclude)) return;
    struct stat st{};
    const auto host = host_path(vpath);
    if (lstat(host.c_str(), &st) != 0) return;

    TemplateRecord r;
    r.path = vpath;
    r.mode = st.st_mode & 07777;
    r.owner = owner_name(st.st_uid);
    r.mtime = st.st_mtim.tv_sec;
    r.size = static_cast<std::uint64_t>(st.st_size);
    if (S_ISDIR(st.st_mode)) {
      r.kind = NodeKind::Directory;
    } else if (S_ISLNK(st.st_mode)) {
      r.kind = NodeKind::Symlink;
      std::error_code ec;
      r.extra = fs::read_symlink(host, ec).string();
      r.size = r.extra->size();
    } else if (S_ISREG(st.st_mode)) {
      r.kind = NodeKind::File;
      if (any_within(vpath, opts_.content) && r.size <= opts_.max_content_bytes) {
        auto bytes = read_file(host);
        if (bytes.size() == r.size && bytes.find('\0') == std::string::npos)
          r.extra = std::move(bytes);
      }
    } else {
      return;  // sockets, fifos and devices have no template kind
    }
    out_.push_back(r);

    if (r.kind != NodeKind::Directory || depth == Depth::None) return;
    if (vpath != "/" && any_within(vpath, opts_.empty)) return;

    std::vector<std::string> names;
    std::error_code ec;
    for (const auto& entry : fs::directory_iterator(host, ec))
      names.push_back(entry.path().filename());
    std::sort(names.begin(), names.end());
    for (const auto& name : names) {
      const std::string child = vpath == "/" ? "/" + name : vpath + "/" + name;
      visit(child, child_depth(child, depth));
    }
  }

  fs::path root_;
  const SnapshotOptions& opts_;
  std::vector<TemplateRecord> out_;
};

/// name -> (uid, primary gid) from the template's /etc/passwd.
std::map<std::string, std::pair<uid_t, gid_t>> template_accounts(
    const std::vector<TemplateRecord>& records) {
  std::map<std::string, std::pair<uid_t, gid_t>> accounts;
  for (const auto& r : records) {
    if (r.path != "/etc/passwd" || !r.extra) continue;
    std::istringstream in(*r.extra);
    std::string line;
    while (std::getline(in, line)) {
      std::vector<std::string> f;
      std::istringstream ls(line);
      std::string field;
      while (std::getline(ls, field, ':')) f.push_back(field);
      if (f.size() < 4) continue;
      try {
        accounts[f[0]] = {static_cast<uid_t>(std::stoul(f[2])),
                          static_cast<gid_t>(std::stoul(f[3]))};
      } catch (const std::exception&) {
      }
    }
  }
  return accounts;
}

void check(int rc, const std::string& what, const fs::path& p) {
  if (rc != 0) throw Error(what + " " + p.string() + ": " + std::strerror(errno));
}

}  // namespace

std::vector<TemplateRecord> snapshot_tree(const fs::path& source_root,
                                          const SnapshotOptions& options) {
  return Walker(source_root, options).run();
}

void materialize_tree(const std::vector<TemplateRecord>& records, const fs::path& dest,
                      const MaterializeOptions& options) {
  fs::create_directories(dest);
  const auto accounts = template_accounts(records);
  auto target = [&](const std::string& vpath) {
    return vpath == "/" ? dest : dest / vpath.substr(1);
  };
  auto skipped = [&](const std::string& vpath) {
    return std::any_of(options.skip_contents.begin(), options.skip_contents.end(),
                       [&](const std::string& p) { return vpath != p && path_within(vpath, p); });
  };

  std::vector<const TemplateRecord*> order;
  for (const auto& r : records)
    if (!skipped(r.path)) order.push_back(&r);
  // Parents before children: a plain path sort puts "/a" before "/a/b".
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->path < b->path; });

  for (const auto* r : order) {
    const auto p = target(r->path);
    switch (r->kind) {
      case NodeKind::Directory:
        if (!fs::is_directory(p)) check(::mkdir(p.c_str(), 0700), "mkdir", p);
        break;
      case NodeKind::Symlink:
        ::unlink(p.c_str());
        check(::symlink(r->extra->c_str(), p.c_str()), "symlink", p);
        break;
      case NodeKind::File: {
        std::ofstream f(p, std::ios::binary | std::ios::trunc);
        if (!f) throw Error("cannot write " + p.string());
        if (r->extra) {
          f << *r->extra;
        } else {
          const std::string zeros(64 * 1024, '\0');
          for (std::uint64_t left = r->size; left > 0;) {
            const auto n = std::min<std::uint64_t>(left, zeros.size());
            f.write(zeros.data(), static_cast<std::streamsize>(n));
            left -= n;
          }
        }
        break;
      }
    }
  }

  // Metadata deepest first so directory mtimes survive child creation.
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const auto* r = *it;
    const auto p = target(r->path);
    if (options.apply_owners) {
      auto acc = accounts.find(r->owner);
      const uid_t uid = acc == accounts.end() ? 0 : acc->second.first;
      const gid_t gid = acc == accounts.end() ? 0 : acc->second.second;
      check(::lchown(p.c_str(), uid, gid), "lchown", p);
    }
    if (r->kind != NodeKind::Symlink) check(::chmod(p.c_str(), r->mode), "chmod", p);
    timespec times[2];
    times[0].tv_sec = times[1].tv_sec = r->mtime;
    times[0].tv_nsec = times[1].tv_nsec = 0;
    check(::utimensat(AT_FDCWD, p.c_str(), times, AT_SYMLINK_NOFOLLOW), "utimensat", p);
  }
}

}  // namespace sbash
