#include "sbash/evalharness.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "sbash/dispatch.hpp"
#include "sbash/errors.hpp"
#include "sbash/metrics.hpp"

namespace sbash {

using nlohmann::json;

std::string_view to_string(Category category) {
  switch (category) {
    case Category::Reconnaissance: return "reconnaissance";
    case Category::PostExploitation: return "post_exploitation";
    case Category::Exfiltration: return "exfiltration";
  }
  return "reconnaissance";
}

Category parse_category(std::string_view text) {
  if (text == "reconnaissance") return Category::Reconnaissance;
  if (text == "post_exploitation") return Category::PostExploitation;
  if (text == "exfiltration") return Category::Exfiltration;
  throw ParseError("unknown category '" + std::string(text) + "'");
}

std::string_view to_string(Metric metric) {
  switch (metric) {
    case Metric::Levenshtein: return "Levenshtein";
    case Metric::SentenceCosine: return "SentenceCosine";
    case Metric::TokenF1: return "TokenF1";
  }
  return "Levenshtein";
}

Metric parse_metric(std::string_view text) {
  for (Metric m : kAllMetrics)
    if (to_string(m) == text) return m;
  throw ParseError("unknown metric '" + std::string(text) + "'");
}

double CaseRow::score(Metric metric) const {
  switch (metric) {
    case Metric::Levenshtein: return levenshtein;
    case Metric::SentenceCosine: return sentence_cosine;
    case Metric::TokenF1: return token_f1;
  }
  return 0;
}

// ---- suite and config files ----

namespace {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFile("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

json parse_json(std::string_view text, std::string_view what) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(std::string(what) + ": " + e.what());
  }
}

}  // namespace

std::string serialize_suite(const EvalSuite& suite) {
  json cases = json::array();
  for (const auto& c : suite.cases) {
    json j = {{"command", c.command},
              {"category", to_string(c.category)},
              {"ground_truth", c.ground_truth}};
    if (c.timed_out) j["timed_out"] = true;
    cases.push_back(std::move(j));
  }
  json doc = {{"format", "sbash-eval-suite"},
              {"version", 1},
              {"reference", suite.reference},
              {"user", suite.user},
              {"captured_at", suite.captured_at},
              {"cases", std::move(cases)}};
  return doc.dump(2, ' ', false, json::error_handler_t::replace) + "\n";
}

EvalSuite parse_suite(std::string_view json_text) {
  const json doc = parse_json(json_text, "suite");
  EvalSuite s;
  try {
    if (doc.at("format") != "sbash-eval-suite") throw ParseError("suite: wrong format tag");
    if (doc.at("version") != 1) throw ParseError("suite: unsupported version");
    s.reference = doc.value("reference", "");
    s.user = doc.value("user", "root");
    s.captured_at = doc.value("captured_at", std::int64_t{0});
    for (const auto& j : doc.at("cases")) {
      EvalCase c;
      c.command = j.at("command").get<std::string>();
      c.category = parse_category(j.at("category").get<std::string>());
      c.ground_truth = j.at("ground_truth").get<std::string>();
      c.timed_out = j.value("timed_out", false);
      if (c.command.empty()) throw ValidationError("command", "must be non-empty");
      s.cases.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("suite: ") + e.what());
  }
  if (s.cases.empty()) throw ValidationError("cases", "suite has no cases");
  return s;
}

EvalSuite load_suite(const std::filesystem::path& path) { return parse_suite(read_file(path)); }

void save_suite(const EvalSuite& suite, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << serialize_suite(suite);
  if (!out) throw Error("cannot write " + path.string());
}

std::vector<GenerationConfig> parse_configs(std::string_view json_text) {
  const json doc = parse_json(json_text, "configs");
  if (!doc.is_array() || doc.empty()) throw ParseError("configs: expected a non-empty array");
  std::vector<GenerationConfig> out;
  try {
    for (const auto& j : doc) {
      GenerationConfig c;
      c.model_name = j.at("model").get<std::string>();
      if (j.contains("mode")) c.mode = parse_rag_mode(j["mode"].get<std::string>());
      if (j.contains("tuning")) c.tuning = parse_tuning(j["tuning"].get<std::string>());
      c.retrieval_k = j.value("retrieval_k", c.retrieval_k);
      c.timeout = std::chrono::milliseconds(j.value("timeout_ms", c.timeout.count()));
      c.max_output_tokens = j.value("max_output_tokens", c.max_output_tokens);
      c.backend_url = j.value("backend_url", "");
      validate_config(c);
      out.push_back(std::move(c));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("configs: ") + e.what());
  }
  return out;
}

std::vector<GenerationConfig> load_configs(const std::filesystem::path& path) {
  return parse_configs(read_file(path));
}

// ---- running ----

LatencyRow summarize_latency(std::vector<double> samples) {
  LatencyRow r;
  r.n = samples.size();
  if (samples.empty()) return r;
  std::sort(samples.begin(), samples.end());
  double sum = 0;
  for (double s : samples) sum += s;
  r.mean_ms = sum / static_cast<double>(samples.size());
  const std::size_t mid = samples.size() / 2;
  r.median_ms = samples.size() % 2 ? samples[mid] : (samples[mid - 1] + samples[mid]) / 2;
  const auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(samples.size())));
  r.p95_ms = samples[std::max<std::size_t>(rank, 1) - 1];
  return r;
}

namespace {

VfsState session_state(const SuiteEnvironment& env) {
  VfsState state = env.base_state;
  const UserAccount* account = env.profile.find_user(env.user);
  if (account == nullptr) throw UnknownUser("suite user '" + env.user + "'");
  state.session_user = account->name;
  if (const VfsNode* home = find_node(state, account->home); home && home->is_dir())
    state.cwd = account->home;
  state.oldpwd.clear();
  return state;
}

std::vector<CaseRow> run_config(const std::vector<EvalCase>& cases, const GenerationConfig& config,
                                const SuiteEnvironment& env) {
  ChatBackend& backend = env.backend_for(config);
  const Pipeline pipeline(env.profile, config, backend, env.store, env.retrieval_embedder);
  const std::int64_t now = env.clock_seconds;
  std::vector<CaseRow> rows;
  rows.reserve(cases.size());
  for (std::size_t i = 0; i < cases.size(); ++i) {
    const EvalCase& c = cases[i];
    CaseRow row;
    row.model = config.model_name;
    row.mode = config.mode;
    row.tuning = config.tuning;
    row.case_index = i;
    row.command = c.command;
    row.category = c.category;

    Session session(env.profile, session_state(env), &pipeline, [now] { return now; });
    Response response = session.dispatch(c.command);
    row.command_class = std::string(to_string(response.command_class.variant));
    row.output = std::move(response.output);
    row.latency_ms = response.latency_ms;
    if (response.backend_error) {
      row.error = *response.backend_error;
    } else {
      try {
        row.levenshtein = levenshtein_similarity(row.output, c.ground_truth);
        row.sentence_cosine =
            sentence_cosine_similarity(row.output, c.ground_truth, env.metric_provider);
        row.token_f1 = token_f1(row.output, c.ground_truth, env.metric_provider).f1;
      } catch (const Error& e) {
        row.levenshtein = row.sentence_cosine = row.token_f1 = 0;
        row.error = std::string("metric: ") + e.what();
      }
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

MetricReport run_suite(const std::vector<EvalCase>& cases,
                       const std::vector<GenerationConfig>& configs, const SuiteEnvironment& env) {
  if (cases.empty()) throw ValidationError("cases", "suite has no cases");
  if (configs.empty()) throw ValidationError("configs", "no generation configs");

  std::vector<std::vector<CaseRow>> per_config(configs.size());
  std::vector<std::exception_ptr> failures(configs.size());
  const std::size_t workers = std::clamp<std::size_t>(env.parallelism, 1, configs.size());
  if (workers == 1) {
    for (std::size_t i = 0; i < configs.size(); ++i) per_config[i] = run_config(cases, configs[i], env);
  } else {
    std::mutex mu;
    std::size_t next = 0;
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        while (true) {
          std::size_t i;
          {
            std::lock_guard lock(mu);
            if (next == configs.size()) return;
            i = next++;
          }
          try {
            per_config[i] = run_config(cases, configs[i], env);
          } catch (...) {
            failures[i] = std::current_exception();
          }
        }
      });
    for (auto& t : pool) t.join();
    for (const auto& f : failures)
      if (f) std::rethrow_exception(f);
  }

  MetricReport report;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const auto& cfg = configs[i];
    const auto& rows = per_config[i];
    for (Metric m : kAllMetrics) {
      double sum = 0;
      for (const auto& r : rows) sum += r.score(m);
      report.rows.push_back(
          {m, cfg.model_name, cfg.mode, cfg.tuning, sum / static_cast<double>(rows.size())});
    }
    std::vector<double> latencies;
    for (const auto& r : rows) latencies.push_back(r.latency_ms);
    LatencyRow lat = summarize_latency(std::move(latencies));
    lat.model = cfg.model_name;
    lat.mode = cfg.mode;
    lat.tuning = cfg.tuning;
    report.latency_rows.push_back(std::move(lat));
    report.cases.insert(report.cases.end(), rows.begin(), rows.end());
  }
  return report;
}

// ---- rendering ----

namespace {

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

std::string fixed(double v, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

std::string csv_field(std::string_view v) {
  if (v.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(v);
  std::string out = "\"";
  for (char c : v) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

std::string md_cell(std::string_view v) {
  std::string out;
  for (char c : v) {
    if (c == '|') out += '\\';
    if (c == '\n') {
      out += ' ';
      continue;
    }
    out += c;
  }
  return out;
}

// Column order of the accuracy grid.
constexpr std::pair<RagMode, Tuning> kColumns[] = {{RagMode::Rag, Tuning::Untuned},
                                                   {RagMode::NonRag, Tuning::Untuned},
                                                   {RagMode::Rag, Tuning::Tuned},
                                                   {RagMode::NonRag, Tuning::Tuned}};

std::vector<std::string> models_in_order(const MetricReport& r) {
  std::vector<std::string> models;
  auto add = [&](const std::string& m) {
    if (std::find(models.begin(), models.end(), m) == models.end()) models.push_back(m);
  };
  for (const auto& row : r.rows) add(row.model);
  return models;
}

std::string render_markdown(const MetricReport& r) {
  std::ostringstream out;
  out << "## Accuracy\n\n"
      << "Each cell is the mean over all suite cases of the per-case similarity (%).\n\n"
      << "| Metric | Model | RAG Accuracy (%) | Non-RAG Accuracy (%) | RAG Tuned Accuracy (%) "
         "| Non-RAG Tuned Accuracy (%) |\n"
      << "|---|---|---:|---:|---:|---:|\n";
  const auto models = models_in_order(r);
  for (Metric m : kAllMetrics) {
    for (const auto& model : models) {
      std::string cells[4];
      bool any = false;
      for (std::size_t col = 0; col < 4; ++col) {
        cells[col] = "-";
        for (const auto& row : r.rows)
          if (row.metric == m && row.model == model && row.mode == kColumns[col].first &&
              row.tuning == kColumns[col].second) {
            cells[col] = fixed(row.accuracy_percent, 1);
            any = true;
          }
      }
      if (!any) continue;
      out << "| " << to_string(m) << " | " << md_cell(model);
      for (const auto& c : cells) out << " | " << c;
      out << " |\n";
    }
  }
  out << "\n## Latency\n\n";
  if (r.latency_rows.empty()) {
    out << "No latency measurements in this report.\n";
    return out.str();
  }
  out << "| Model | Mode | Tuning | Mean (ms) | Median (ms) | P95 (ms) | N |\n"
      << "|---|---|---|---:|---:|---:|---:|\n";
  for (const auto& l : r.latency_rows)
    out << "| " << md_cell(l.model) << " | " << to_string(l.mode) << " | " << to_string(l.tuning)
        << " | " << fixed(l.mean_ms, 1) << " | " << fixed(l.median_ms, 1) << " | "
        << fixed(l.p95_ms, 1) << " | " << l.n << " |\n";
  return out.str();
}

constexpr std::string_view kCsvHeader =
    "kind,metric,model,mode,tuning,accuracy_percent,mean_ms,median_ms,p95_ms,n";

std::string render_csv(const MetricReport& r) {
  std::string out(kCsvHeader);
  out += '\n';
  for (const auto& row : r.rows) {
    out += "accuracy,";
    out += to_string(row.metric);
    out += ',' + csv_field(row.model) + ',' + std::string(to_string(row.mode)) + ',' +
           std::string(to_string(row.tuning)) + ',' + format_number(row.accuracy_percent) +
           ",,,,\n";
  }
  for (const auto& l : r.latency_rows) {
    out += "latency,," + csv_field(l.model) + ',' + std::string(to_string(l.mode)) + ',' +
           std::string(to_string(l.tuning)) + ",," + format_number(l.mean_ms) + ',' +
           format_number(l.median_ms) + ',' + format_number(l.p95_ms) + ',' +
           std::to_string(l.n) + '\n';
  }
  return out;
}

std::vector<std::vector<std::string>> split_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool quoted = false, field_started = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"' && field.empty()) {
      quoted = field_started = true;
    } else if (c == ',') {
      row.push_back(std::move(field));
      field.clear();
      field_started = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < text.size() && text[i + 1] == '\n') ++i;
      if (field_started || !field.empty() || !row.empty()) {
        row.push_back(std::move(field));
        rows.push_back(std::move(row));
      }
      row.clear();
      field.clear();
      field_started = false;
    } else {
      field += c;
      field_started = true;
    }
  }
  if (quoted) throw ParseError("csv: unterminated quoted field");
  if (field_started || !row.empty()) {
    row.push_back(std::move(field));
    rows.push_back(std::move(row));
  }
  return rows;
}

double parse_double(const std::string& s, std::string_view field) {
  double v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size())
    throw ParseError("csv: bad number in " + std::string(field) + ": '" + s + "'");
  return v;
}

}  // namespace

std::string render_report(const MetricReport& report, ReportFormat format) {
  return format == ReportFormat::Csv ? render_csv(report) : render_markdown(report);
}

MetricReport parse_csv(std::string_view text) {
  const auto rows = split_csv(text);
  if (rows.empty()) throw ParseError("csv: empty document");
  std::string header;
  for (std::size_t i = 0; i < rows[0].size(); ++i) header += (i ? "," : "") + rows[0][i];
  if (header != kCsvHeader) throw ParseError("csv: unexpected header");
  MetricReport r;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto& f = rows[i];
    if (f.size() != 10) throw ParseError("csv: line " + std::to_string(i + 1) + ": need 10 fields");
    if (f[0] == "accuracy") {
      r.rows.push_back({parse_metric(f[1]), f[2], parse_rag_mode(f[3]), parse_tuning(f[4]),
                        parse_double(f[5], "accuracy_percent")});
    } else if (f[0] == "latency") {
      LatencyRow l{f[2], parse_rag_mode(f[3]), parse_tuning(f[4]), parse_double(f[6], "mean_ms"),
                   parse_double(f[7], "median_ms"), parse_double(f[8], "p95_ms"), 0};
      std::size_t n = 0;
      auto [ptr, ec] = std::from_chars(f[9].data(), f[9].data() + f[9].size(), n);
      if (ec != std::errc{} || ptr != f[9].data() + f[9].size())
        throw ParseError("csv: bad n '" + f[9] + "'");
      l.n = n;
      r.latency_rows.push_back(std::move(l));
    } else {
      throw ParseError("csv: unknown row kind '" + f[0] + "'");
    }
  }
  return r;
}

std::string render_cases_csv(const MetricReport& report) {
  std::string out =
      "model,mode,tuning,case,category,command,class,latency_ms,levenshtein,sentence_cosine,"
      "token_f1,error,output\n";
  for (const auto& c : report.cases) {
    out += csv_field(c.model) + ',' + std::string(to_string(c.mode)) + ',' +
           std::string(to_string(c.tuning)) + ',' + std::to_string(c.case_index) + ',' +
           std::string(to_string(c.category)) + ',' + csv_field(c.command) + ',' +
           c.command_class + ',' + format_number(c.latency_ms) + ',' +
           format_number(c.levenshtein) + ',' + format_number(c.sentence_cosine) + ',' +
           format_number(c.token_f1) + ',' + csv_field(c.error.value_or("")) + ',' +
           csv_field(c.output) + '\n';
  }
  return out;
}

}  // namespace sbash
