#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/embedding.hpp"
#include "sbash/knowledge.hpp"
#include "sbash/profile.hpp"

namespace sbash {

enum class RagMode { Rag, NonRag };
enum class Tuning { Tuned, Untuned };

std::string_view to_string(RagMode mode);
std::string_view to_string(Tuning tuning);
/// Accepts "rag"/"nonrag" and "tuned"/"untuned"; throws ParseError.
RagMode parse_rag_mode(std::string_view text);
Tuning parse_tuning(std::string_view text);

struct GenerationConfig {
  std::string model_name;
  RagMode mode = RagMode::NonRag;
  Tuning tuning = Tuning::Tuned;
  std::size_t retrieval_k = 3;
  std::chrono::milliseconds timeout{30000};
  std::size_t max_output_tokens = 512;
  std::string backend_url;

  bool operator==(const GenerationConfig&) const = default;
};

/// Throws ValidationError naming the field.
void validate_config(const GenerationConfig& config);

struct ChatMessage {
  std::string role;
  std::string content;

  bool operator==(const ChatMessage&) const = default;
};

struct PromptBundle {
  std::string system_prompt;  // empty when untuned; no system message is sent then
  std::string context_block;  // empty in non-RAG mode
  std::string user_message;
  std::vector<ChatMessage> messages;
};

/// Instruction line that precedes the command in every user message.
extern const std::string kOutputOnlyInstruction;

PromptBundle assemble_prompt(const GenerationConfig& config, const SystemProfile& profile,
                             std::string_view command, const std::vector<ScoredChunk>& chunks);

/// Request body sent to the chat-completion endpoint.
std::string build_chat_request(const PromptBundle& bundle, const GenerationConfig& config);

/// Recovers the command from a request body: the last line of the last
/// user message. Used by the stub backend.
std::string command_from_request(std::string_view request_body);

/// A chat-completion transport. `send` takes the JSON request body and
/// returns the raw response body, throwing GenerationError.
class ChatBackend {
 public:
  virtual ~ChatBackend() = default;
  std::string send(const std::string& request_body, std::chrono::milliseconds timeout);
  std::size_t call_count() const { return calls_.load(); }

 protected:
  virtual std::string do_send(const std::string& request_body,
                              std::chrono::milliseconds timeout) = 0;

 private:
  std::atomic<std::size_t> calls_{0};
};

/// OpenAI-compatible endpoint; a URL without a path posts to
/// /v1/chat/completions.
class HttpChatBackend final : public ChatBackend {
 public:
  explicit HttpChatBackend(std::string url) : url_(std::move(url)) {}

 protected:
  std::string do_send(const std::string& request_body, std::chrono::milliseconds timeout) override;

 private:
  std::string url_;
};

struct StubScript {
  enum class Mode { Echo, Fixed, Script, Empty, Malformed, Unavailable };
  Mode mode = Mode::Echo;
  std::string text;                              // Fixed
  std::map<std::string, std::string> responses;  // Script: command -> reply
  std::string fallback;                          // Script: reply for unknown commands
  std::chrono::milliseconds delay{0};
};

/// Fixture format: {"mode": "echo|fixed|script|empty|malformed|unavailable",
/// "text": "...", "responses": {...}, "fallback": "...", "delay_ms": N}.
StubScript parse_stub_script(std::string_view json_text);

/// In-process backend answering from a script. A delay longer than the
/// call's timeout sleeps for the timeout and then reports Timeout.
class StubChatBackend final : public ChatBackend {
 public:
  explicit StubChatBackend(StubScript script) : script_(std::move(script)) {}

  std::vector<std::string> requests() const;

 protected:
  std::string do_send(const std::string& request_body, std::chrono::milliseconds timeout) override;

 private:
  StubScript script_;
  mutable std::mutex mu_;
  std::vector<std::string> requests_;
};

/// "stub:" (echo), "stub:<fixture.json>", or an http:// URL.
std::unique_ptr<ChatBackend> make_chat_backend(std::string_view url);

struct GenerationResult {
  std::string text;
  double latency_ms = 0;
  std::size_t token_count = 0;
  std::string model_name;
  RagMode mode = RagMode::NonRag;
  Tuning tuning = Tuning::Tuned;
};

/// One blocking round trip. Output longer than max_output_tokens estimated
/// tokens is cut there. Throws GenerationError.
GenerationResult generate(const PromptBundle& bundle, const GenerationConfig& config,
                          ChatBackend& backend);

/// Cleans model output: code fences, an echoed prompt line matching the
/// profile's prompt template, and leading/trailing blank lines are removed;
/// non-empty output ends with a newline. Idempotent.
std::string postprocess(std::string_view raw, const SystemProfile& profile);

/// Retrieval (RAG mode), prompt assembly, generation and post-processing
/// for one command.
class Pipeline {
 public:
  /// `store` and `embedder` are required in RAG mode.
  Pipeline(const SystemProfile& profile, GenerationConfig config, ChatBackend& backend,
           const VectorStore* store = nullptr, EmbeddingProvider* embedder = nullptr);

  GenerationResult run(std::string_view command) const;
  const GenerationConfig& config() const { return config_; }
  ChatBackend& backend() const { return backend_; }

 private:
  const SystemProfile& profile_;
  GenerationConfig config_;
  ChatBackend& backend_;
  const VectorStore* store_;
  EmbeddingProvider* embedder_;
};

}  // namespace sbash
