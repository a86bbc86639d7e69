#pragma once

// Shared fixtures and generators for the unit tests and the acceptance run.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <unistd.h>

#include "sbash/profile.hpp"
#include "sbash/vfs.hpp"

namespace sbash::testing {

inline std::filesystem::path source_dir() { return SBASH_SOURCE_DIR; }

inline std::filesystem::path profile_path() {
  return source_dir() / "profiles" / "ubuntu-bash" / "profile.conf";
}

inline const SystemProfile& shipped_profile() {
  static const SystemProfile p = load_profile(profile_path());
  return p;
}

/// Unmutated template state, session in root's home.
inline const VfsState& shipped_state() {
  static const VfsState s = build_from_template(shipped_profile().fs_template, shipped_profile());
  return s;
}

inline std::string read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Scratch directory removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::string tmpl = (std::filesystem::temp_directory_path() / "sbash-test.XXXXXX").string();
    path_ = mkdtemp(tmpl.data());
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

/// Seeded generator helpers; every property test prints its seed on failure
/// through the assertion messages.
class Gen {
 public:
  explicit Gen(std::uint64_t seed) : rng_(seed) {}

  std::size_t below(std::size_t n) { return n == 0 ? 0 : std::uniform_int_distribution<std::size_t>(0, n - 1)(rng_); }
  bool chance(double p) { return std::bernoulli_distribution(p)(rng_); }
  double real(double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng_); }

  std::string string_from(std::string_view alphabet, std::size_t max_len) {
    std::string s(below(max_len + 1), ' ');
    for (auto& c : s) c = alphabet[below(alphabet.size())];
    return s;
  }

  std::string bytes(std::size_t max_len) {
    std::string s(below(max_len + 1), '\0');
    for (auto& c : s) c = static_cast<char>(below(256));
    return s;
  }

  template <typename T>
  const T& pick(const std::vector<T>& v) {
    return v[below(v.size())];
  }

  std::mt19937_64& engine() { return rng_; }

 private:
  std::mt19937_64 rng_;
};

inline Clock fixed_clock(std::int64_t t) {
  return [t] { return t; };
}

}  // namespace sbash::testing
