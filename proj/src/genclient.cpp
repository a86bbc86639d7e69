#include "sbash/genclient.hpp"

#include <fstream>
#include <regex>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "http_post.hpp"
#include "sbash/errors.hpp"

namespace sbash {

using nlohmann::json;

std::string_view to_string(RagMode mode) { return mode == RagMode::Rag ? "rag" : "nonrag"; }
std::string_view to_string(Tuning tuning) {
  return tuning == Tuning::Tuned ? "tuned" : "untuned";
}

RagMode parse_rag_mode(std::string_view text) {
  if (text == "rag") return RagMode::Rag;
  if (text == "nonrag") return RagMode::NonRag;
  throw ParseError("mode must be rag or nonrag, got '" + std::string(text) + "'");
}

Tuning parse_tuning(std::string_view text) {
  if (text == "tuned") return Tuning::Tuned;
  if (text == "untuned") return Tuning::Untuned;
  throw ParseError("tuning must be tuned or untuned, got '" + std::string(text) + "'");
}

void validate_config(const GenerationConfig& config) {
  if (config.mode == RagMode::Rag && config.retrieval_k < 1)
    throw ValidationError("retrieval_k", "must be at least 1 in rag mode");
  if (config.timeout.count() <= 0) throw ValidationError("timeout", "must be positive");
  if (config.max_output_tokens == 0)
    throw ValidationError("max_output_tokens", "must be positive");
}

const std::string kOutputOnlyInstruction =
    "Reply with only the terminal output of the command below, no explanations.";

PromptBundle assemble_prompt(const GenerationConfig& config, const SystemProfile& profile,
                             std::string_view command, const std::vector<ScoredChunk>& chunks) {
  PromptBundle b;
  if (config.tuning == Tuning::Tuned) b.system_prompt = profile.system_prompt_tuned;
  if (config.mode == RagMode::Rag) {
    for (const auto& sc : chunks) {
      b.context_block += "--- " + sc.chunk.command + " (" + sc.chunk.chunk_id + ") ---\n";
      b.context_block += sc.chunk.text;
      if (!sc.chunk.text.ends_with('\n')) b.context_block += '\n';
    }
  }
  if (!b.context_block.empty()) {
    b.user_message = "Context information is below.\n---------------------\n" + b.context_block +
                     "---------------------\n";
  }
  b.user_message += kOutputOnlyInstruction + "\n" + std::string(command);

  if (!b.system_prompt.empty()) b.messages.push_back({"system", b.system_prompt});
  b.messages.push_back({"user", b.user_message});
  return b;
}

std::string build_chat_request(const PromptBundle& bundle, const GenerationConfig& config) {
  json messages = json::array();
  for (const auto& m : bundle.messages)
    messages.push_back({{"role", m.role}, {"content", m.content}});
  json req = {{"model", config.model_name},
              {"messages", std::move(messages)},
              {"max_tokens", config.max_output_tokens},
              {"stream", false}};
  return req.dump();
}

std::string command_from_request(std::string_view request_body) {
  const json req = json::parse(request_body, nullptr, false);
  if (!req.is_object() || !req.contains("messages") || !req["messages"].is_array()) return {};
  std::string content;
  for (const auto& m : req["messages"])
    if (m.value("role", "") == "user") content = m.value("content", "");
  const auto nl = content.rfind('\n');
  return nl == std::string::npos ? content : content.substr(nl + 1);
}

std::string ChatBackend::send(const std::string& request_body, std::chrono::milliseconds timeout) {
  ++calls_;
  return do_send(request_body, timeout);
}

std::string HttpChatBackend::do_send(const std::string& request_body,
                                     std::chrono::milliseconds timeout) {
  detail::HttpResponse res;
  try {
    res = detail::http_post_json(url_, request_body, timeout, "/v1/chat/completions");
  } catch (const detail::HttpFailure& e) {
    throw GenerationError(e.kind() == detail::HttpFailure::Kind::Timeout
                              ? GenerationError::Kind::Timeout
                              : GenerationError::Kind::BackendUnavailable,
                          e.what());
  }
  if (res.status != 200)
    throw GenerationError(GenerationError::Kind::BackendUnavailable,
                          url_ + ": HTTP " + std::to_string(res.status) + ": " +
                              res.body.substr(0, 200));
  return res.body;
}

StubScript parse_stub_script(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("stub fixture: ") + e.what());
  }
  static const std::map<std::string, StubScript::Mode, std::less<>> kModes = {
      {"echo", StubScript::Mode::Echo},     {"fixed", StubScript::Mode::Fixed},
      {"script", StubScript::Mode::Script}, {"empty", StubScript::Mode::Empty},
      {"malformed", StubScript::Mode::Malformed},
      {"unavailable", StubScript::Mode::Unavailable}};
  try {
    StubScript s;
    const auto mode = doc.value("mode", std::string("echo"));
    const auto it = kModes.find(mode);
    if (it == kModes.end()) throw ParseError("stub fixture: unknown mode '" + mode + "'");
    s.mode = it->second;
    s.text = doc.value("text", std::string());
    s.fallback = doc.value("fallback", std::string());
    s.delay = std::chrono::milliseconds(doc.value("delay_ms", 0));
    if (doc.contains("responses"))
      s.responses = doc["responses"].get<std::map<std::string, std::string>>();
    return s;
  } catch (const json::exception& e) {
    throw ParseError(std::string("stub fixture: ") + e.what());
  }
}

std::vector<std::string> StubChatBackend::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::string StubChatBackend::do_send(const std::string& request_body,
                                     std::chrono::milliseconds timeout) {
  {
    std::lock_guard lock(mu_);
    requests_.push_back(request_body);
  }
  if (script_.delay > timeout) {
    std::this_thread::sleep_for(timeout);
    throw GenerationError(GenerationError::Kind::Timeout,
                          "stub: reply delayed " + std::to_string(script_.delay.count()) +
                              " ms, timeout " + std::to_string(timeout.count()) + " ms");
  }
  if (script_.delay.count() > 0) std::this_thread::sleep_for(script_.delay);

  std::string reply;
  switch (script_.mode) {
    case StubScript::Mode::Echo: reply = command_from_request(request_body); break;
    case StubScript::Mode::Fixed: reply = script_.text; break;
    case StubScript::Mode::Script: {
      const auto it = script_.responses.find(command_from_request(request_body));
      reply = it == script_.responses.end() ? script_.fallback : it->second;
      break;
    }
    case StubScript::Mode::Empty: break;
    case StubScript::Mode::Malformed: return R"({"choices":[{"message":{"role":"assistant"}}]})";
    case StubScript::Mode::Unavailable:
      throw GenerationError(GenerationError::Kind::BackendUnavailable, "stub: backend down");
  }
  json res = {{"object", "chat.completion"},
              {"choices",
               {{{"index", 0},
                 {"message", {{"role", "assistant"}, {"content", reply}}},
                 {"finish_reason", "stop"}}}}};
  return res.dump();
}

std::unique_ptr<ChatBackend> make_chat_backend(std::string_view url) {
  if (url.starts_with("stub:")) {
    const auto fixture = url.substr(5);
    if (fixture.empty()) return std::make_unique<StubChatBackend>(StubScript{});
    std::ifstream in{std::string(fixture), std::ios::binary};
    if (!in) throw UnreadableFile("cannot read stub fixture " + std::string(fixture));
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::make_unique<StubChatBackend>(parse_stub_script(ss.str()));
  }
  if (url.starts_with("http://")) return std::make_unique<HttpChatBackend>(std::string(url));
  throw UsageError("unsupported LLM URL: " + std::string(url));
}

namespace {

std::string truncate_tokens(std::string text, std::size_t max_tokens) {
  const std::size_t limit = max_tokens * kBytesPerToken;
  if (text.size() <= limit) return text;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  text.resize(cut);
  return text;
}

}  // namespace

GenerationResult generate(const PromptBundle& bundle, const GenerationConfig& config,
                          ChatBackend& backend) {
  const std::string request = build_chat_request(bundle, config);
  const auto started = std::chrono::steady_clock::now();
  const std::string body = backend.send(request, config.timeout);
  const auto elapsed = std::chrono::steady_clock::now() - started;

  const json res = json::parse(body, nullptr, false);
  const json* content = nullptr;
  if (res.is_object()) {
    if (res.contains("choices") && res["choices"].is_array() && !res["choices"].empty()) {
      const auto& choice = res["choices"][0];
      if (choice.is_object() && choice.contains("message") && choice["message"].is_object() &&
          choice["message"].contains("content"))
        content = &choice["message"]["content"];
    } else if (res.contains("message") && res["message"].is_object() &&
               res["message"].contains("content")) {
      content = &res["message"]["content"];
    }
  }
  if (content == nullptr || !content->is_string())
    throw GenerationError(GenerationError::Kind::MalformedResponse,
                          "reply without message content: " + body.substr(0, 200));

  GenerationResult out;
  out.text = truncate_tokens(content->get<std::string>(), config.max_output_tokens);
  out.latency_ms = std::chrono::duration<double, std::milli>(elapsed).count();
  out.token_count = estimate_tokens(out.text);
  if (res.contains("usage") && res["usage"].is_object() &&
      res["usage"].contains("completion_tokens") && res["usage"]["completion_tokens"].is_number())
    out.token_count = res["usage"]["completion_tokens"].get<std::size_t>();
  out.model_name = config.model_name;
  out.mode = config.mode;
  out.tuning = config.tuning;
  return out;
}

namespace {

std::regex prompt_line_regex(const std::string& tmpl) {
  static const std::map<std::string, std::string, std::less<>> kPatterns = {
      {"user", "[A-Za-z0-9._-]+"},
      {"host", "[A-Za-z0-9._-]+"},
      {"cwd", "[^\\s]*"},
      {"sigil", "[#$]"}};
  std::string re = "^";
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    if (tmpl[i] == '{') {
      const auto close = tmpl.find('}', i);
      if (close != std::string::npos) {
        const auto it = kPatterns.find(std::string_view(tmpl).substr(i + 1, close - i - 1));
        if (it != kPatterns.end()) {
          re += it->second;
          i = close;
          continue;
        }
      }
    }
    if (std::string_view("\\^$.|?*+()[]{}").find(tmpl[i]) != std::string_view::npos) re += '\\';
    re += tmpl[i];
  }
  return std::regex(re);
}

bool blank(std::string_view line) {
  return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

std::string clean_once(std::string_view raw, const std::regex& prompt) {
  std::vector<std::string> lines;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    const auto nl = raw.find('\n', pos);
    if (nl == std::string_view::npos) {
      if (pos < raw.size()) lines.emplace_back(raw.substr(pos));
      break;
    }
    lines.emplace_back(raw.substr(pos, nl - pos));
    pos = nl + 1;
  }

  auto first = lines.begin();
  auto last = lines.end();
  while (first != last && blank(*first)) ++first;
  while (last != first && blank(*(last - 1))) --last;
  if (first != last && first->starts_with("```")) ++first;
  if (first != last && (last - 1)->find_first_not_of(" \t\r") != std::string::npos &&
      (last - 1)->substr((last - 1)->find_first_not_of(" \t\r")).starts_with("```") &&
      blank((last - 1)->substr((last - 1)->find_first_not_of(" \t\r") + 3)))
    --last;
  if (first != last && std::regex_search(*first, prompt)) ++first;
  while (first != last && blank(*first)) ++first;
  while (last != first && blank(*(last - 1))) --last;

  std::string out;
  for (auto it = first; it != last; ++it) {
    out += *it;
    out += '\n';
  }
  return out;
}

}  // namespace

std::string postprocess(std::string_view raw, const SystemProfile& profile) {
  const std::regex prompt = prompt_line_regex(profile.prompt_template);
  std::string current(raw);
  while (true) {
    std::string next = clean_once(current, prompt);
    if (next == current) return next;
    current = std::move(next);
  }
}

Pipeline::Pipeline(const SystemProfile& profile, GenerationConfig config, ChatBackend& backend,
                   const VectorStore* store, EmbeddingProvider* embedder)
    : profile_(profile),
      config_(std::move(config)),
      backend_(backend),
      store_(store),
      embedder_(embedder) {
  validate_config(config_);
  if (config_.mode == RagMode::Rag && (store_ == nullptr || embedder_ == nullptr))
    throw ValidationError("mode", "rag mode needs a vector store and an embedding provider");
}

GenerationResult Pipeline::run(std::string_view command) const {
  std::vector<ScoredChunk> chunks;
  if (config_.mode == RagMode::Rag) {
    try {
      chunks = retrieve(*store_, command, config_.retrieval_k, *embedder_);
    } catch (const Error& e) {
      throw GenerationError(GenerationError::Kind::BackendUnavailable,
                            std::string("retrieval failed: ") + e.what());
    }
  }
  const auto bundle = assemble_prompt(config_, profile_, command, chunks);
  auto result = generate(bundle, config_, backend_);
  result.text = postprocess(result.text, profile_);
  return result;
}

}  // namespace sbash
