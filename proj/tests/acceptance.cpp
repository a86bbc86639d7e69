// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Each check reuses the oracles the unit tests use.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <string>

#include "eval_fixture.hpp"
#include "listener_scenario.hpp"
#include "oracles.hpp"
#include "sbash/corpus.hpp"
#include "sbash/dispatch.hpp"
#include "sbash/evalharness.hpp"
#include "sbash/genclient.hpp"
#include "sbash/metrics.hpp"
#include "support.hpp"
#include "vfs_model.hpp"

namespace {

using namespace sbash;
using namespace sbash::testing;

// A failed check throws this with the reason; anything else thrown is also
// reported as a failure.
struct Failed {
  std::string why;
};

void require(bool ok, const std::string& why) {
  if (!ok) throw Failed{why};
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(double v) {
  std::ostringstream ss;
  ss.precision(2);
  ss << std::fixed << v;
  return ss.str();
}

// --- 1 ------------------------------------------------------------------------

std::string metric_oracle() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen g(1);
  for (int i = 0; i < 1000; ++i) {
    const auto a = g.string_from("abcde \n", 60);
    const auto b = g.string_from("abcde \n", 60);
    require(levenshtein_distance(a, b) == oracle_distance(a, b), "pair " + std::to_string(i) + " disagrees");
  }
  require(levenshtein_distance("kitten", "sitting") == 3, "kitten/sitting distance");
  const double sim = levenshtein_similarity("kitten", "sitting");
  require(std::abs(sim - 57.14) <= 0.01, "kitten/sitting similarity " + fmt(sim));
  const double secs = seconds_since(t0);
  require(secs < 5, "took " + fmt(secs) + " s");
  return "1000 pairs match the DP oracle, kitten/sitting = 3 (" + fmt(sim) + "%), " + fmt(secs) + " s";
}

// --- 2 ------------------------------------------------------------------------

std::string retrieval() {
  const auto t0 = std::chrono::steady_clock::now();
  Gen g(2);
  MockEmbedding m;
  const auto store = index_chunks(synthetic_chunks(g, 50), m);
  for (int q = 0; q < 100; ++q) {
    const auto query = g.string_from("abcdefgh -", 30);
    const auto problem =
        compare_top_k(retrieve(store, query, 5, m), brute_force_ranking(store, m.embed_one(query)), 5);
    require(problem.empty(), "query '" + query + "': " + problem);
  }
  const double secs = seconds_since(t0);
  require(secs < 5, "took " + fmt(secs) + " s");
  return "100 queries, top-5 equals the brute-force sort, " + fmt(secs) + " s";
}

// --- 3 ------------------------------------------------------------------------

std::string state_management() {
  Session s(shipped_profile(), shipped_state(), nullptr, fixed_clock(1792140000));
  s.dispatch("cd /tmp");
  const auto pwd = s.dispatch("pwd").output;
  require(pwd == "/tmp\n", "pwd after cd /tmp gave '" + pwd + "'");
  s.dispatch("mkdir /tmp/x");
  const auto ls = s.dispatch("ls /tmp").output;
  require((" " + ls).find(" x\n") != std::string::npos || (" " + ls).find(" x ") != std::string::npos,
          "ls /tmp gave '" + ls + "'");
  for (std::uint64_t seed = 1000; seed < 1200; ++seed) {
    const auto failure = run_model_sequence(shipped_profile(), shipped_state(), seed, 30);
    require(!failure, "seed " + std::to_string(seed) + ": " + failure.value_or(""));
  }
  return "cd/pwd and mkdir/ls hold; 200 random sequences agree with the tree model";
}

// --- 4 ------------------------------------------------------------------------

std::string injection_gate() {
  const auto& probes = injection_probes();
  require(probes.size() >= 20, "only " + std::to_string(probes.size()) + " probes");
  StubChatBackend backend(StubScript{});
  GenerationConfig config;
  config.model_name = "stub";
  Pipeline pipeline(shipped_profile(), config, backend);
  Session s(shipped_profile(), shipped_state(), &pipeline, fixed_clock(1792140000));
  for (const auto& p : probes) {
    const auto r = s.dispatch(p);
    require(r.output.ends_with(": command not found\n"), "'" + p + "' -> '" + r.output + "'");
  }
  require(backend.call_count() == 0, std::to_string(backend.call_count()) + " backend calls");
  return std::to_string(probes.size()) + " probes answered not-found, 0 backend calls";
}

// --- 5 ------------------------------------------------------------------------

std::string prompt_matrix() {
  const auto& profile = shipped_profile();
  require(profile.system_prompt_tuned == kDefaultTunedSystemPrompt,
          "profile fixture's tuned prompt differs from the reference text");
  KnowledgeChunk a, b;
  a.chunk_id = "uname#0000";
  b.chunk_id = "uname#0001";
  a.command = b.command = "uname";
  a.source = b.source = "uname.txt";
  a.text = "uname prints the kernel name\n";
  b.text = "-a prints all information";
  const std::vector<ScoredChunk> chunks = {{a, 0.9}, {b, 0.8}};
  const std::string command = "uname -a";
  std::set<std::string> distinct;
  for (auto mode : {RagMode::Rag, RagMode::NonRag})
    for (auto tuning : {Tuning::Tuned, Tuning::Untuned}) {
      GenerationConfig c;
      c.model_name = "m";
      c.mode = mode;
      c.tuning = tuning;
      const auto bundle = assemble_prompt(c, profile, command, chunks);
      const std::string where = std::string(to_string(mode)) + "/" + std::string(to_string(tuning));
      const auto& user = bundle.messages.back();
      require(user.role == "user" && user.content == bundle.user_message, where + ": last message is not the user message");
      require(bundle.user_message.ends_with(kOutputOnlyInstruction + "\n" + command), where + ": command not last");
      if (tuning == Tuning::Tuned) {
        require(bundle.system_prompt == profile.system_prompt_tuned, where + ": system prompt rewritten");
        require(bundle.messages.size() == 2 && bundle.messages[0].role == "system" &&
                    bundle.messages[0].content == profile.system_prompt_tuned,
                where + ": system message missing");
      } else {
        require(bundle.system_prompt.empty() && bundle.messages.size() == 1, where + ": untuned sends a system message");
      }
      std::string all;
      for (const auto& msg : bundle.messages) all += msg.content;
      const bool has_a = all.find(a.text) != std::string::npos;
      const bool has_b = all.find(b.text) != std::string::npos;
      if (mode == RagMode::Rag) {
        require(has_a && has_b, where + ": chunk text missing");
        require(bundle.user_message.find(b.text) < bundle.user_message.rfind(command),
                where + ": context after the command");
      } else {
        require(bundle.context_block.empty() && !has_a && !has_b, where + ": chunk text leaked");
      }
      distinct.insert(build_chat_request(bundle, c));
    }
  require(distinct.size() == 4, "modes are not structurally distinct");
  return "4 bundles satisfy their invariants; tuned prompt is byte-identical to the profile text";
}

// --- 6 ------------------------------------------------------------------------

std::string end_to_end() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto& suite = shipped_suite();
  require(suite.cases.size() == 81, std::to_string(suite.cases.size()) + " suite cases");
  {
    StubSuiteRig rig(ground_truth_script(suite), 4);
    const auto report = run_suite(suite.cases, four_modes("ground-truth", 100000), rig.env());
    require(report.rows.size() == 12, std::to_string(report.rows.size()) + " rows");
    for (const auto& row : report.rows)
      require(std::abs(row.accuracy_percent - 100.0) < 1e-9,
              std::string(to_string(row.metric)) + " " + std::string(to_string(row.mode)) + "/" +
                  std::string(to_string(row.tuning)) + " = " + fmt(row.accuracy_percent));
  }
  std::size_t n = 0;
  {
    StubScript empty;
    empty.mode = StubScript::Mode::Empty;
    StubSuiteRig rig(empty, 4);
    std::vector<EvalCase> cases;
    for (const auto& c : ai_cases(suite))
      if (!c.ground_truth.empty()) cases.push_back(c);
    n = cases.size();
    require(n > 0, "no model-path cases with output");
    const auto report = run_suite(cases, four_modes("empty"), rig.env());
    for (const auto& row : report.rows)
      if (row.metric == Metric::Levenshtein)
        require(row.accuracy_percent == 0.0, "empty stub Levenshtein " + fmt(row.accuracy_percent));
  }
  const double secs = seconds_since(t0);
  require(secs < 60, "took " + fmt(secs) + " s");
  return "ground-truth stub scores 100.0 on all 12 cells; empty stub scores 0 Levenshtein on " +
         std::to_string(n) + " non-empty model-path references; " + fmt(secs) + " s";
}

// --- 7 ------------------------------------------------------------------------

std::string latency() {
  StubScript slow;
  slow.delay = std::chrono::milliseconds(50);
  StubSuiteRig rig(slow, 4);
  // Native commands answer without the model, so only model-path cases carry
  // the injected delay.
  const auto cases = ai_cases(shipped_suite());
  const auto report = run_suite(cases, four_modes("delay-50ms"), rig.env());
  require(report.latency_rows.size() == 4, std::to_string(report.latency_rows.size()) + " latency rows");
  double lowest_mean = 1e18, lowest_p95 = 1e18;
  for (const auto& r : report.latency_rows) {
    require(r.mean_ms >= 50 && r.p95_ms >= 50,
            std::string(to_string(r.mode)) + "/" + std::string(to_string(r.tuning)) + " mean " + fmt(r.mean_ms) +
                " p95 " + fmt(r.p95_ms));
    lowest_mean = std::min(lowest_mean, r.mean_ms);
    lowest_p95 = std::min(lowest_p95, r.p95_ms);
  }
  const auto md = render_report(report, ReportFormat::Markdown);
  require(md.find("| Model | Mode | Tuning | Mean (ms) | Median (ms) | P95 (ms) | N |") != std::string::npos,
          "latency table header missing");
  require(md.find("| delay-50ms | rag | tuned |") != std::string::npos &&
              md.find("| delay-50ms | nonrag | untuned |") != std::string::npos,
          "latency table rows missing");
  return std::to_string(cases.size()) + " model-path cases x 4 modes, lowest mean " + fmt(lowest_mean) +
         " ms, lowest p95 " + fmt(lowest_p95) + " ms; latency table rendered";
}

// --- 8 ------------------------------------------------------------------------

std::vector<std::string> cells(const std::string& line) {
  std::vector<std::string> out;
  std::istringstream in(line);
  std::string cell;
  std::getline(in, cell, '|');
  while (std::getline(in, cell, '|')) {
    const auto b = cell.find_first_not_of(' ');
    const auto e = cell.find_last_not_of(' ');
    out.push_back(b == std::string::npos ? "" : cell.substr(b, e - b + 1));
  }
  return out;
}

std::string report_shape() {
  const auto report = parse_csv(read_file(source_dir() / "tests/fixtures/accuracy_grid_gemma12b_levenshtein.csv"));
  const auto md = render_report(report, ReportFormat::Markdown);
  std::vector<std::string> header, row;
  std::istringstream in(md);
  std::string line;
  while (std::getline(in, line)) {
    if (line.starts_with("| Metric |")) header = cells(line);
    if (line.starts_with("| Levenshtein | Gemma 12B |")) row = cells(line);
  }
  require(header.size() == 6 && row.size() == 6, "grid not found in:\n" + md);
  const std::vector<std::pair<std::string, std::string>> want = {{"RAG Accuracy (%)", "20.7"},
                                                                 {"Non-RAG Accuracy (%)", "1.4"},
                                                                 {"RAG Tuned Accuracy (%)", "21.9"},
                                                                 {"Non-RAG Tuned Accuracy (%)", "24.6"}};
  for (const auto& [column, value] : want) {
    const auto at = std::find(header.begin(), header.end(), column);
    require(at != header.end(), "column '" + column + "' missing");
    const auto got = row[static_cast<std::size_t>(at - header.begin())];
    require(got == value, column + " shows " + got);
  }
  return "Gemma 12B Levenshtein row renders 20.7 / 1.4 / 21.9 / 24.6 under the four mode columns";
}

// --- 9 ------------------------------------------------------------------------

std::string concurrency() {
  const auto failure = run_concurrent_sessions(10);
  require(!failure, failure.value_or(""));
  return "10 sessions x 10 commands: 100 command records, gap-free seq, sessions isolated";
}

// --- 11 -----------------------------------------------------------------------

std::string differential() {
  const auto corpus = load_corpus(source_dir() / "tests/fixtures/native_captured.json");
  require(corpus.sequences.size() >= 50, std::to_string(corpus.sequences.size()) + " sequences");
  std::size_t steps = 0;
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const auto& s = corpus.sequences[i];
    std::vector<std::string> cmds;
    for (const auto& st : s.steps) cmds.push_back(st.command);
    const auto got = replay_sequence(shipped_profile(), shipped_state(), s.user, cmds, s.captured_at);
    for (std::size_t k = 0; k < cmds.size(); ++k, ++steps)
      require(got[k] == s.steps[k].output, "sequence " + std::to_string(i) + " step " + std::to_string(k) +
                                               " (" + cmds[k] + ") differs");
  }
  return std::to_string(corpus.sequences.size()) + " sequences (" + std::to_string(steps) +
         " commands) byte-identical to the captured reference";
}

}  // namespace

int main() {
  struct Criterion {
    int number;
    std::string name;
    std::function<std::string()> check;
  };
  std::map<int, bool> passed;
  // Absolute accuracies and latency means need the real 4B-12B models on a
  // GPU; what can be checked here is that the harness produces the same
  // table shape, which is what 6-8 exercise.
  const auto structural = [&]() -> std::string {
    require(passed[6] && passed[7] && passed[8], "one of criteria 6-8 failed");
    return "absolute accuracies and latency means are not reproduced without the real models; "
           "table shape verified by criteria 6-8";
  };
  const std::vector<Criterion> criteria = {
      {1, "metric oracle equivalence", metric_oracle},
      {2, "retrieval correctness", retrieval},
      {3, "state management", state_management},
      {4, "prompt-injection gate", injection_gate},
      {5, "four-mode prompt matrix", prompt_matrix},
      {6, "end-to-end with stub backends", end_to_end},
      {7, "latency accounting", latency},
      {8, "report shape", report_shape},
      {9, "concurrency and logging", concurrency},
      {10, "real-model values (structural only)", structural},
      {11, "differential realism", differential},
  };
  for (const auto& c : criteria) {
    std::string detail;
    bool ok = false;
    try {
      detail = c.check();
      ok = true;
    } catch (const Failed& f) {
      detail = f.why;
    } catch (const std::exception& e) {
      detail = std::string("exception: ") + e.what();
    }
    passed[c.number] = ok;
    std::cout << (ok ? "PASS" : "FAIL") << "  " << c.number << ". " << c.name << ": " << detail << std::endl;
  }

  int failures = 0;
  for (const auto& [n, ok] : passed) failures += !ok;
  std::cout << (failures == 0 ? "all 11 criteria passed" : std::to_string(failures) + " criteria failed") << std::endl;
  return failures == 0 ? 0 : 1;
}
