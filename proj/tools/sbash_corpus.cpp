// Captures native-command sequences from a reference shell and compares
// the emulator against a captured corpus.
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>

#include "sbash/corpus.hpp"
#include "sbash/errors.hpp"

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw sbash::UnreadableFile("cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Native-command corpus capture and check", "sbash-corpus"};
  app.require_subcommand(1);

  std::string sequences, ref, out;
  int timeout_ms = 15000;
  auto* cap = app.add_subcommand("capture", "run sequences on the reference shell");
  cap->add_option("--sequences", sequences, "sequence text file")->required();
  cap->add_option("--ref", ref, "reference (exec:<program> [args], ssh://host, local)")->required();
  cap->add_option("--out", out, "captured corpus JSON")->required();
  cap->add_option("--timeout-ms", timeout_ms, "per-command timeout")->capture_default_str();

  std::string corpus_path, profile_path;
  auto* check = app.add_subcommand("check", "replay a captured corpus through the emulator");
  check->add_option("--corpus", corpus_path, "captured corpus JSON")->required();
  check->add_option("--profile", profile_path, "system profile")->required();

  CLI11_PARSE(app, argc, argv);
  try {
    if (cap->parsed()) {
      sbash::CaptureOptions opts;
      opts.timeout = std::chrono::milliseconds(timeout_ms);
      const auto corpus =
          sbash::capture_corpus(sbash::parse_sequences(slurp(sequences)), ref, opts);
      std::ofstream(out, std::ios::binary) << sbash::serialize_corpus(corpus);
      std::cout << "captured " << corpus.sequences.size() << " sequences\n";
      return 0;
    }
    const auto profile = sbash::load_profile(profile_path);
    const auto base = sbash::build_from_template(profile.fs_template, profile);
    const auto corpus = sbash::load_corpus(corpus_path);
    std::size_t same = 0, total = 0;
    for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
      const auto& s = corpus.sequences[i];
      std::vector<std::string> cmds;
      for (const auto& st : s.steps) cmds.push_back(st.command);
      const auto got = sbash::replay_sequence(profile, base, s.user, cmds, s.captured_at);
      ++total;
      bool ok = true;
      for (std::size_t k = 0; k < cmds.size(); ++k) {
        if (got[k] == s.steps[k].output) continue;
        ok = false;
        std::cout << "sequence " << i << " step " << k << " [" << s.user << "] " << cmds[k]
                  << "\n--- reference\n" << s.steps[k].output << "--- emulator\n" << got[k]
                  << "---\n";
      }
      same += ok;
    }
    std::cout << same << "/" << total << " sequences identical\n";
    return same == total ? 0 : 1;
  } catch (const std::exception& e) {
    std::cerr << "sbash-corpus: " << e.what() << '\n';
    return 2;
  }
}
