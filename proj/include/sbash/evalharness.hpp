#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/embedding.hpp"
#include "sbash/genclient.hpp"
#include "sbash/knowledge.hpp"
#include "sbash/profile.hpp"
#include "sbash/vfs.hpp"

namespace sbash {

enum class Category { Reconnaissance, PostExploitation, Exfiltration };

std::string_view to_string(Category category);
/// "reconnaissance", "post_exploitation" or "exfiltration"; throws ParseError.
Category parse_category(std::string_view text);

struct EvalCase {
  std::string command;
  std::string ground_truth;
  Category category = Category::Reconnaissance;
  bool timed_out = false;  // capture hit its timeout; ground_truth is empty

  bool operator==(const EvalCase&) const = default;
};

/// A command suite with the reference outputs it was captured against.
/// `captured_at` (epoch seconds) is replayed as the emulator's clock so
/// relative dates render the way they did on the reference.
struct EvalSuite {
  std::string reference;
  std::string user = "root";
  std::int64_t captured_at = 0;
  std::vector<EvalCase> cases;

  bool operator==(const EvalSuite&) const = default;
};

std::string serialize_suite(const EvalSuite& suite);
/// Throws ParseError or ValidationError.
EvalSuite parse_suite(std::string_view json_text);
EvalSuite load_suite(const std::filesystem::path& path);
void save_suite(const EvalSuite& suite, const std::filesystem::path& path);

/// JSON array of {"model", "mode", "tuning", "retrieval_k", "timeout_ms",
/// "max_output_tokens", "backend_url"}; only "model" is required.
std::vector<GenerationConfig> parse_configs(std::string_view json_text);
std::vector<GenerationConfig> load_configs(const std::filesystem::path& path);

enum class Metric { Levenshtein, SentenceCosine, TokenF1 };

inline constexpr Metric kAllMetrics[] = {Metric::Levenshtein, Metric::SentenceCosine,
                                         Metric::TokenF1};

std::string_view to_string(Metric metric);
Metric parse_metric(std::string_view text);

struct AccuracyRow {
  Metric metric = Metric::Levenshtein;
  std::string model;
  RagMode mode = RagMode::Rag;
  Tuning tuning = Tuning::Untuned;
  double accuracy_percent = 0;

  bool operator==(const AccuracyRow&) const = default;
};

struct LatencyRow {
  std::string model;
  RagMode mode = RagMode::Rag;
  Tuning tuning = Tuning::Untuned;
  double mean_ms = 0;
  double median_ms = 0;
  double p95_ms = 0;
  std::size_t n = 0;

  bool operator==(const LatencyRow&) const = default;
};

/// One scored (config, case) pair, kept for audit.
struct CaseRow {
  std::string model;
  RagMode mode = RagMode::Rag;
  Tuning tuning = Tuning::Untuned;
  std::size_t case_index = 0;
  std::string command;
  Category category = Category::Reconnaissance;
  std::string command_class;
  std::string output;
  double latency_ms = 0;
  double levenshtein = 0;
  double sentence_cosine = 0;
  double token_f1 = 0;
  std::optional<std::string> error;

  double score(Metric metric) const;
};

struct MetricReport {
  std::vector<AccuracyRow> rows;
  std::vector<LatencyRow> latency_rows;
  std::vector<CaseRow> cases;
};

/// Everything run_suite needs besides the cases and configs.
struct SuiteEnvironment {
  const SystemProfile& profile;
  const VfsState& base_state;
  /// Provider for the SentenceCosine and TokenF1 metrics.
  EmbeddingProvider& metric_provider;
  /// Backend for a config; called once per config, from worker threads.
  std::function<ChatBackend&(const GenerationConfig&)> backend_for;
  /// Needed only by RAG configs.
  const VectorStore* store = nullptr;
  EmbeddingProvider* retrieval_embedder = nullptr;
  std::string user = "root";
  std::int64_t clock_seconds = 0;
  std::size_t parallelism = 1;
};

/// Runs every case through a fresh session under every config and scores
/// the output against the ground truth. Backend failures score 0 and keep
/// the error text. Output order is (config, case) regardless of parallelism.
MetricReport run_suite(const std::vector<EvalCase>& cases,
                       const std::vector<GenerationConfig>& configs, const SuiteEnvironment& env);

/// Mean, median and nearest-rank p95 of `samples`.
LatencyRow summarize_latency(std::vector<double> samples);

enum class ReportFormat { Csv, Markdown };

/// Accuracy grid with the four mode/tuning columns, then the latency
/// table. Deterministic for equal reports.
std::string render_report(const MetricReport& report, ReportFormat format);

/// Reads the aggregate rows written by render_report(..., Csv). Case rows
/// are not part of that file. Throws ParseError.
MetricReport parse_csv(std::string_view text);

/// Per-case audit table.
std::string render_cases_csv(const MetricReport& report);

}  // namespace sbash
