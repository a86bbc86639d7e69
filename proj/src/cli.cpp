#include "sbash/cli.hpp"

#include <signal.h>

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <memory>
#include <mutex>
#include <sstream>

#include <CLI11.hpp>

#include "sbash/capture.hpp"
#include "sbash/errors.hpp"
#include "sbash/evalharness.hpp"
#include "sbash/knowledge.hpp"
#include "sbash/listener.hpp"
#include "sbash/vfs.hpp"

namespace sbash {

std::string_view to_string(Subcommand s) {
  switch (s) {
    case Subcommand::Serve: return "serve";
    case Subcommand::Ingest: return "ingest";
    case Subcommand::Capture: return "capture";
    case Subcommand::Eval: return "eval";
    case Subcommand::Report: return "report";
  }
  return "serve";
}

std::string_view to_string(FlagSource s) {
  switch (s) {
    case FlagSource::Cli: return "command line";
    case FlagSource::Env: return "environment";
    case FlagSource::Profile: return "profile";
    case FlagSource::Default: return "default";
  }
  return "default";
}

const std::string& Invocation::get(std::string_view name) const {
  const auto it = flags.find(name);
  if (it == flags.end()) throw UsageError("no flag --" + std::string(name));
  return it->second.value;
}

bool Invocation::has(std::string_view name) const {
  const auto it = flags.find(name);
  return it != flags.end() && !it->second.value.empty();
}

std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v != nullptr && *v != '\0') return std::string(v);
  return std::nullopt;
}

namespace {

struct FlagSpec {
  FlagSpec(std::string name, std::string help, std::string fallback = "", std::string env = "",
           bool required = false, bool boolean = false)
      : name(std::move(name)),
        help(std::move(help)),
        fallback(std::move(fallback)),
        env(std::move(env)),
        required(required),
        boolean(boolean) {}

  std::string name;
  std::string help;
  std::string fallback;  // built-in default
  std::string env;       // environment variable, if any
  bool required;
  bool boolean;
};

struct SubcommandSpec {
  Subcommand id;
  std::string description;
  std::vector<FlagSpec> flags;
};

const FlagSpec kProfileFlag{"profile", "system profile file", "", "SBASH_PROFILE", true};
const FlagSpec kLlmFlag{"llm-url", "chat backend: http://host:port[/path], stub: or stub:<fixture.json>",
                        "stub:", "SBASH_LLM_URL"};
const FlagSpec kEmbedFlag{"embed-url", "embedding provider: mock, mock:<dim> or http://host:port[/path]",
                          "mock", "SBASH_EMBED_URL"};

const std::vector<SubcommandSpec>& specs() {
  static const std::vector<SubcommandSpec> kSpecs = {
      {Subcommand::Serve,
       "Run the honeypot line service",
       {kProfileFlag,
        {"bind", "listen address host:port (port 0 picks one)", "127.0.0.1:2222"},
        {"transport", "tcp or ssh", "tcp"},
        {"log", "JSON Lines threat-intelligence log", "sbash-sessions.jsonl"},
        kLlmFlag,
        kEmbedFlag,
        {"model", "model name sent to the backend", "llama3.1:8b"},
        {"mode", "rag or nonrag", "rag"},
        {"tuning", "tuned or untuned", "tuned"},
        {"retrieval-k", "chunks retrieved per command", "3"},
        {"timeout-ms", "generation timeout", "30000"},
        {"store", "vector store file; built from the knowledge base when missing", ""}}},
      {Subcommand::Ingest,
       "Chunk and embed the knowledge base into a vector store",
       {kProfileFlag,
        {"kb-dir", "directory of per-command documents", ""},
        {"out", "vector store file to write", ""},
        kEmbedFlag,
        {"chunk-size", "chunk size in estimated tokens", "512"},
        {"overlap", "overlap between chunks in estimated tokens", "64"}}},
      {Subcommand::Capture,
       "Record ground-truth outputs from a reference shell",
       {{"commands", "command list, one 'category<TAB>command' per line", "", "", true},
        {"ref", "reference: local, exec:<program> [args] or ssh://[user@]host[:port]", "", "", true},
        {"out", "suite file to write", "", "", true},
        {"user", "login user on the reference", "root"},
        {"timeout-ms", "per-command timeout", "10000"}}},
      {Subcommand::Eval,
       "Score generated output against a captured suite",
       {kProfileFlag,
        {"suite", "suite file from `capture`", "", "", true},
        {"configs", "JSON list of generation configs", "", "", true},
        {"out", "aggregate report CSV", "", "", true},
        {"markdown", "also print the markdown report to stdout", "false", "", false, true},
        {"cases", "per-case audit CSV", ""},
        kLlmFlag,
        kEmbedFlag,
        {"store", "vector store for rag configs; built from the knowledge base when missing", ""},
        {"parallel", "configs evaluated concurrently", "1"}}},
      {Subcommand::Report,
       "Render an aggregate report CSV",
       {{"in", "report CSV written by `eval`", "", "", true},
        {"format", "markdown or csv", "markdown"},
        {"out", "output file (stdout when empty)", ""}}},
  };
  return kSpecs;
}

struct Parser {
  CLI::App app{"SBASH: shell honeypot with retrieval-augmented generation", "sbash"};
  std::map<std::string, std::map<std::string, std::string>> raw;
  std::map<std::string, std::map<std::string, bool>> raw_bool;
  std::map<std::string, std::map<std::string, CLI::Option*>> options;
  std::map<std::string, CLI::App*> subs;
  int verbosity = 0;

  Parser() {
    app.require_subcommand(1);
    app.fallthrough();
    app.add_flag("-v,--verbose", verbosity, "log resolved configuration and progress (repeatable)");
    for (const auto& s : specs()) {
      const std::string name(to_string(s.id));
      auto* sub = app.add_subcommand(name, s.description);
      subs[name] = sub;
      for (const auto& f : s.flags) {
        std::string help = f.help;
        if (!f.env.empty()) help += " [env " + f.env + "]";
        CLI::Option* opt;
        if (f.boolean) {
          opt = sub->add_flag("--" + f.name, raw_bool[name][f.name], help);
        } else {
          opt = sub->add_option("--" + f.name, raw[name][f.name], help);
          if (!f.fallback.empty()) opt->default_str(f.fallback);
          if (f.required && f.env.empty()) opt->required();
        }
        options[name][f.name] = opt;
      }
    }
  }
};

}  // namespace

std::string usage_text() {
  Parser p;
  return p.app.help();
}

Invocation parse_args(const std::vector<std::string>& args, const EnvLookup& env) {
  Parser p;
  std::vector<std::string> reversed(args.rbegin(), args.rend());
  Invocation inv;
  try {
    p.app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    inv.help_text = p.app.help();
  } catch (const CLI::CallForAllHelp&) {
    inv.help_text = p.app.help("", CLI::AppFormatMode::All);
  } catch (const CLI::ParseError& e) {
    throw UsageError(e.what());
  }
  const auto chosen = p.app.get_subcommands();
  if (chosen.empty()) {
    if (inv.help_text) return inv;
    throw UsageError("a subcommand is required");
  }
  const std::string name = chosen.front()->get_name();
  const SubcommandSpec* spec = nullptr;
  for (const auto& s : specs())
    if (to_string(s.id) == name) spec = &s;
  inv.subcommand = spec->id;
  inv.verbosity = p.verbosity;
  if (inv.help_text) return inv;

  for (const auto& f : spec->flags) {
    ResolvedFlag r;
    CLI::Option* opt = p.options[name][f.name];
    if (opt->count() > 0) {
      r.value = f.boolean ? (p.raw_bool[name][f.name] ? "true" : "false") : p.raw[name][f.name];
      r.source = FlagSource::Cli;
    } else if (auto v = f.env.empty() ? std::nullopt : env(f.env)) {
      r.value = *v;
      r.source = FlagSource::Env;
    } else {
      r.value = f.fallback;
      r.source = FlagSource::Default;
      if (f.required)
        throw UsageError("--" + f.name + " is required" +
                         (f.env.empty() ? std::string() : " (or set " + f.env + ")"));
    }
    inv.flags.emplace(f.name, std::move(r));
  }
  return inv;
}

void apply_profile_defaults(Invocation& inv, const SystemProfile& profile) {
  auto fill = [&](const std::string& flag, const std::string& value) {
    const auto it = inv.flags.find(flag);
    if (it == inv.flags.end() || value.empty()) return;
    if (it->second.source == FlagSource::Default) it->second = {value, FlagSource::Profile};
  };
  fill("llm-url", profile.llm_url);
  fill("embed-url", profile.embed_url);
  fill("model", profile.model);
  fill("kb-dir", profile.kb_source_dir.string());
  fill(inv.subcommand == Subcommand::Ingest ? "out" : "store", profile.kb_store.string());
}

namespace {

class Logger {
 public:
  Logger(std::ostream& err, int verbosity) : err_(err), verbosity_(verbosity) {}
  void info(const std::string& msg) const {
    if (verbosity_ >= 1) err_ << "sbash: " << msg << '\n';
  }
  void debug(const std::string& msg) const {
    if (verbosity_ >= 2) err_ << "sbash: debug: " << msg << '\n';
  }
  void warn(const std::string& msg) const { err_ << "sbash: warning: " << msg << '\n'; }

 private:
  std::ostream& err_;
  int verbosity_;
};

std::size_t to_size(const Invocation& inv, std::string_view flag) {
  const std::string& v = inv.get(flag);
  std::size_t n = 0;
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), n);
  if (ec != std::errc{} || ptr != v.data() + v.size())
    throw UsageError("--" + std::string(flag) + " expects a non-negative integer, got '" + v + "'");
  return n;
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw Error("cannot write " + path.string());
}

/// Loads the store if the file exists, otherwise ingests the profile's
/// knowledge base in memory.
VectorStore open_store(const Invocation& inv, const SystemProfile& profile,
                       EmbeddingProvider& embedder, const Logger& log) {
  const std::string path = inv.get("store");
  if (!path.empty() && std::filesystem::exists(path)) {
    log.info("loading vector store " + path);
    auto store = load_store(path);
    if (store.provider != embedder.name())
      log.warn("store was built with provider '" + store.provider + "', querying with '" +
               embedder.name() + "'");
    return store;
  }
  if (profile.kb_source_dir.empty())
    throw Error("rag mode needs --store or a profile kb_source_dir");
  log.info("indexing knowledge base " + profile.kb_source_dir.string());
  return index_chunks(ingest(profile.kb_source_dir), embedder);
}

int run_serve(const Invocation& inv, const SystemProfile& profile, std::ostream& out,
              const Logger& log) {
  GenerationConfig config;
  config.model_name = inv.get("model");
  config.mode = parse_rag_mode(inv.get("mode"));
  config.tuning = parse_tuning(inv.get("tuning"));
  config.retrieval_k = to_size(inv, "retrieval-k");
  config.timeout = std::chrono::milliseconds(to_size(inv, "timeout-ms"));
  config.backend_url = inv.get("llm-url");
  validate_config(config);

  auto backend = make_chat_backend(config.backend_url);
  auto embedder = make_embedding_provider(inv.get("embed-url"));
  std::optional<VectorStore> store;
  if (config.mode == RagMode::Rag) store = open_store(inv, profile, *embedder, log);
  const Pipeline pipeline(profile, config, *backend, store ? &*store : nullptr, embedder.get());
  const VfsState base = build_from_template(profile.fs_template, profile);

  ServerOptions options;
  options.bind = inv.get("bind");
  options.transport = parse_transport(inv.get("transport"));
  JsonlSink sink(inv.get("log"));

  // Block the stop signals before any thread starts so only sigwait sees them.
  sigset_t stop_signals;
  sigemptyset(&stop_signals);
  sigaddset(&stop_signals, SIGINT);
  sigaddset(&stop_signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &stop_signals, nullptr);

  Server server(profile, base, &pipeline, sink, options);
  server.start();
  out << "listening on " << options.bind.substr(0, options.bind.rfind(':')) << ':'
      << server.port() << std::endl;
  int sig = 0;
  sigwait(&stop_signals, &sig);
  log.info("signal " + std::to_string(sig) + ", shutting down");
  server.stop();
  log.info(std::to_string(server.sessions_started()) + " sessions, " +
           std::to_string(sink.written()) + " log lines, " + std::to_string(sink.dropped()) +
           " dropped");
  return 0;
}

int run_ingest(const Invocation& inv, std::ostream& out) {
  if (!inv.has("kb-dir")) throw UsageError("--kb-dir is required (or set kb_source_dir in the profile)");
  if (!inv.has("out")) throw UsageError("--out is required (or set kb_store in the profile)");
  auto embedder = make_embedding_provider(inv.get("embed-url"));
  const auto chunks = ingest(inv.get("kb-dir"), to_size(inv, "chunk-size"), to_size(inv, "overlap"));
  const auto store = index_chunks(chunks, *embedder);
  save_store(store, inv.get("out"));
  out << "indexed " << store.entries.size() << " chunks (dim " << store.dim << ") into "
      << inv.get("out") << '\n';
  return 0;
}

int run_capture(const Invocation& inv, std::ostream& out, const Logger& log) {
  std::ifstream in(inv.get("commands"), std::ios::binary);
  if (!in) throw UnreadableFile("cannot read " + inv.get("commands"));
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto commands = parse_command_list(ss.str());
  CaptureOptions options;
  options.user = inv.get("user");
  options.timeout = std::chrono::milliseconds(to_size(inv, "timeout-ms"));
  log.info("capturing " + std::to_string(commands.size()) + " commands from " + inv.get("ref"));
  const auto suite = capture_ground_truth(commands, inv.get("ref"), options);
  save_suite(suite, inv.get("out"));
  std::size_t timeouts = 0;
  for (const auto& c : suite.cases) timeouts += c.timed_out;
  out << "captured " << suite.cases.size() << " cases into " << inv.get("out");
  if (timeouts) out << " (" << timeouts << " timed out)";
  out << '\n';
  return 0;
}

int run_eval(const Invocation& inv, const SystemProfile& profile, std::ostream& out,
             const Logger& log) {
  const auto suite = load_suite(inv.get("suite"));
  const auto configs = load_configs(inv.get("configs"));
  auto metric_provider = make_embedding_provider(inv.get("embed-url"));
  const VfsState base = build_from_template(profile.fs_template, profile);

  std::optional<VectorStore> store;
  for (const auto& c : configs)
    if (c.mode == RagMode::Rag && !store) store = open_store(inv, profile, *metric_provider, log);

  std::mutex mu;
  std::map<std::string, std::unique_ptr<ChatBackend>> backends;
  const std::string default_url = inv.get("llm-url");
  SuiteEnvironment env{profile, base, *metric_provider,
                       [&](const GenerationConfig& c) -> ChatBackend& {
                         const std::string url = c.backend_url.empty() ? default_url : c.backend_url;
                         std::lock_guard lock(mu);
                         auto& slot = backends[url];
                         if (!slot) slot = make_chat_backend(url);
                         return *slot;
                       }};
  env.store = store ? &*store : nullptr;
  env.retrieval_embedder = metric_provider.get();
  env.user = suite.user;
  env.clock_seconds = suite.captured_at != 0 ? suite.captured_at : system_clock_seconds();
  env.parallelism = std::max<std::size_t>(1, to_size(inv, "parallel"));

  log.info("evaluating " + std::to_string(suite.cases.size()) + " cases x " +
           std::to_string(configs.size()) + " configs");
  const auto report = run_suite(suite.cases, configs, env);
  write_file(inv.get("out"), render_report(report, ReportFormat::Csv));
  if (inv.has("cases")) write_file(inv.get("cases"), render_cases_csv(report));
  std::size_t errors = 0;
  for (const auto& c : report.cases) errors += c.error.has_value();
  if (errors) log.warn(std::to_string(errors) + " case runs failed; they score 0");
  if (inv.get("markdown") == "true") out << render_report(report, ReportFormat::Markdown);
  else out << "wrote " << inv.get("out") << '\n';
  return 0;
}

int run_report(const Invocation& inv, std::ostream& out) {
  std::ifstream in(inv.get("in"), std::ios::binary);
  if (!in) throw UnreadableFile("cannot read " + inv.get("in"));
  std::ostringstream ss;
  ss << in.rdbuf();
  const auto report = parse_csv(ss.str());
  const std::string& format = inv.get("format");
  if (format != "markdown" && format != "csv")
    throw UsageError("--format must be markdown or csv, got '" + format + "'");
  const auto text =
      render_report(report, format == "csv" ? ReportFormat::Csv : ReportFormat::Markdown);
  if (inv.has("out")) write_file(inv.get("out"), text);
  else out << text;
  return 0;
}

}  // namespace

int run(const Invocation& invocation, std::ostream& out, std::ostream& err) {
  Invocation inv = invocation;
  const Logger log(err, inv.verbosity);
  std::optional<SystemProfile> profile;
  if (inv.flags.contains("profile")) {
    profile = load_profile(inv.get("profile"));
    apply_profile_defaults(inv, *profile);
  }
  for (const auto& [name, flag] : inv.flags)
    log.debug("--" + name + " = '" + flag.value + "' (" + std::string(to_string(flag.source)) + ")");

  switch (inv.subcommand) {
    case Subcommand::Serve: return run_serve(inv, *profile, out, log);
    case Subcommand::Ingest: return run_ingest(inv, out);
    case Subcommand::Capture: return run_capture(inv, out, log);
    case Subcommand::Eval: return run_eval(inv, *profile, out, log);
    case Subcommand::Report: return run_report(inv, out);
  }
  return 2;
}

int cli_main(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
             const EnvLookup& env) {
  Invocation inv;
  try {
    inv = parse_args(args, env);
  } catch (const UsageError& e) {
    err << "sbash: " << e.what() << "\n\n" << usage_text();
    return 1;
  }
  if (inv.help_text) {
    out << *inv.help_text;
    return 0;
  }
  try {
    return run(inv, out, err);
  } catch (const UsageError& e) {
    err << "sbash: " << e.what() << '\n';
    return 1;
  } catch (const std::exception& e) {
    err << "sbash: " << e.what() << '\n';
    return 2;
  }
}

}  // namespace sbash
