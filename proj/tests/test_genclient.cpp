#include <gtest/gtest.h>

#include <json.hpp>

#include "sbash/errors.hpp"
#include "sbash/genclient.hpp"
#include "support.hpp"

namespace sbash {
namespace {

using nlohmann::json;
using testing::Gen;
using testing::shipped_profile;

GenerationConfig config_for(RagMode mode, Tuning tuning) {
  GenerationConfig c;
  c.model_name = "stub-model";
  c.mode = mode;
  c.tuning = tuning;
  return c;
}

VectorStore small_store(EmbeddingProvider& m) {
  return index_chunks(chunk_document("uname", "uname.txt",
                                     "uname prints system information such as the kernel name\n",
                                     512, 64),
                      m);
}

TEST(Prompt, FourModeMatrix) {
  const auto& profile = shipped_profile();
  MockEmbedding m;
  const auto store = small_store(m);
  for (auto mode : {RagMode::Rag, RagMode::NonRag}) {
    for (auto tuning : {Tuning::Tuned, Tuning::Untuned}) {
      StubChatBackend backend(StubScript{});
      Pipeline p(profile, config_for(mode, tuning), backend, &store, &m);
      const auto r = p.run("uname -a");
      EXPECT_EQ(r.text, "uname -a\n");
      EXPECT_EQ(r.mode, mode);
      EXPECT_EQ(r.tuning, tuning);
      ASSERT_EQ(backend.requests().size(), 1u);
      const auto req = json::parse(backend.requests()[0]);
      const auto& msgs = req["messages"];
      EXPECT_EQ(req["model"], "stub-model");
      if (tuning == Tuning::Tuned) {
        ASSERT_EQ(msgs.size(), 2u);
        EXPECT_EQ(msgs[0]["role"], "system");
        EXPECT_EQ(msgs[0]["content"].get<std::string>(), profile.system_prompt_tuned);
      } else {
        ASSERT_EQ(msgs.size(), 1u);
      }
      const auto user = msgs.back()["content"].get<std::string>();
      EXPECT_TRUE(user.ends_with(kOutputOnlyInstruction + "\nuname -a"));
      const bool has_context = user.find("uname#0000") != std::string::npos;
      EXPECT_EQ(has_context, mode == RagMode::Rag) << to_string(mode) << "/" << to_string(tuning);
    }
  }
}

TEST(Prompt, TunedPromptIsTheProfileText) {
  const auto& profile = shipped_profile();
  EXPECT_TRUE(profile.system_prompt_tuned.starts_with("You are a realistic Linux server."));
  const auto b = assemble_prompt(config_for(RagMode::NonRag, Tuning::Tuned), profile, "id", {});
  EXPECT_EQ(b.system_prompt, profile.system_prompt_tuned);
  EXPECT_EQ(b.context_block, "");
  EXPECT_EQ(b.user_message, kOutputOnlyInstruction + "\nid");
  const auto u = assemble_prompt(config_for(RagMode::NonRag, Tuning::Untuned), profile, "id", {});
  EXPECT_EQ(u.system_prompt, "");
  EXPECT_EQ(u.messages.size(), 1u);
}

TEST(Prompt, CommandRecoveredFromRequest) {
  const auto b = assemble_prompt(config_for(RagMode::NonRag, Tuning::Tuned), shipped_profile(),
                                 "cat /etc/passwd | wc -l", {});
  EXPECT_EQ(command_from_request(build_chat_request(b, config_for(RagMode::NonRag, Tuning::Tuned))),
            "cat /etc/passwd | wc -l");
  EXPECT_EQ(command_from_request("not json"), "");
}

TEST(Config, Validation) {
  auto c = config_for(RagMode::Rag, Tuning::Tuned);
  c.retrieval_k = 0;
  EXPECT_THROW(validate_config(c), ValidationError);
  c = config_for(RagMode::NonRag, Tuning::Tuned);
  c.timeout = std::chrono::milliseconds(0);
  EXPECT_THROW(validate_config(c), ValidationError);
  c = config_for(RagMode::NonRag, Tuning::Tuned);
  c.max_output_tokens = 0;
  EXPECT_THROW(validate_config(c), ValidationError);
  StubChatBackend b(StubScript{});
  EXPECT_THROW(Pipeline(shipped_profile(), config_for(RagMode::Rag, Tuning::Tuned), b),
               ValidationError);
  EXPECT_EQ(parse_rag_mode("nonrag"), RagMode::NonRag);
  EXPECT_THROW(parse_rag_mode("non_rag"), ParseError);
  EXPECT_THROW(parse_tuning("Tuned"), ParseError);
}

TEST(Postprocess, Examples) {
  const auto& p = shipped_profile();
  EXPECT_EQ(postprocess("```bash\nroot\n```", p), "root\n");
  EXPECT_EQ(postprocess("\n\n  \nuid=0(root)\n\n", p), "uid=0(root)\n");
  EXPECT_EQ(postprocess("root@svr04:~# whoami\nroot", p), "root\n");
  EXPECT_EQ(postprocess("```\nroot@svr04:/tmp# id\nuid=0(root)\n```\n", p), "uid=0(root)\n");
  EXPECT_EQ(postprocess("", p), "");
  EXPECT_EQ(postprocess("\n\n", p), "");
  // Interior blank lines and indentation survive.
  EXPECT_EQ(postprocess("a\n\n  b", p), "a\n\n  b\n");
}

TEST(Postprocess, IdempotentOnRandomText) {
  const auto& p = shipped_profile();
  Gen g(8);
  for (int i = 0; i < 500; ++i) {
    std::string raw;
    const auto lines = g.below(8);
    for (std::size_t j = 0; j < lines; ++j) {
      switch (g.below(5)) {
        case 0: raw += "```"; break;
        case 1: raw += "root@svr04:~# ls"; break;
        case 2: raw += "  "; break;
        default: raw += g.string_from("ab `#$\t", 12);
      }
      if (j + 1 < lines || g.chance(0.5)) raw += "\n";
    }
    const auto once = postprocess(raw, p);
    ASSERT_EQ(postprocess(once, p), once) << raw;
    ASSERT_TRUE(once.empty() || once.ends_with('\n'));
  }
}

StubScript stub(StubScript::Mode mode, std::string text = {}) {
  StubScript s;
  s.mode = mode;
  s.text = std::move(text);
  return s;
}

Pipeline nonrag(ChatBackend& b, GenerationConfig c = config_for(RagMode::NonRag, Tuning::Tuned)) {
  return Pipeline(shipped_profile(), c, b);
}

GenerationError::Kind failure_kind(const Pipeline& p) {
  try {
    p.run("whoami");
  } catch (const GenerationError& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no GenerationError";
  return GenerationError::Kind::BackendUnavailable;
}

TEST(Generate, FailureKinds) {
  StubScript slow;
  slow.delay = std::chrono::milliseconds(400);
  StubChatBackend slow_b(slow);
  auto c = config_for(RagMode::NonRag, Tuning::Tuned);
  c.timeout = std::chrono::milliseconds(50);
  EXPECT_EQ(failure_kind(nonrag(slow_b, c)), GenerationError::Kind::Timeout);

  StubChatBackend bad(stub(StubScript::Mode::Malformed));
  EXPECT_EQ(failure_kind(nonrag(bad)), GenerationError::Kind::MalformedResponse);
  StubChatBackend down(stub(StubScript::Mode::Unavailable));
  EXPECT_EQ(failure_kind(nonrag(down)), GenerationError::Kind::BackendUnavailable);
  HttpChatBackend refused("http://127.0.0.1:1");
  EXPECT_EQ(failure_kind(nonrag(refused)), GenerationError::Kind::BackendUnavailable);
}

TEST(Generate, LatencyCoversTheDelay) {
  StubScript s;
  s.delay = std::chrono::milliseconds(30);
  StubChatBackend b(s);
  const auto r = nonrag(b).run("id");
  EXPECT_GE(r.latency_ms, 30.0);
  EXPECT_EQ(r.text, "id\n");
}

TEST(Generate, TruncatesAtTokenBudget) {
  auto s = stub(StubScript::Mode::Fixed, std::string(100, 'y'));
  StubChatBackend b(s);
  auto c = config_for(RagMode::NonRag, Tuning::Tuned);
  c.max_output_tokens = 5;
  const auto r = nonrag(b, c).run("yes");
  EXPECT_EQ(r.text, std::string(20, 'y') + "\n");
  EXPECT_EQ(r.token_count, 5u);
  // A cut never splits a UTF-8 sequence.
  StubChatBackend u(stub(StubScript::Mode::Fixed, "abc\xc3\xa9\xc3\xa9"));
  c.max_output_tokens = 1;
  EXPECT_EQ(nonrag(u, c).run("x").text, "abc\n");
}

TEST(Stub, ScriptFixtureParsing) {
  const auto s = parse_stub_script(
      R"j({"mode":"script","responses":{"id":"uid=0(root)"},"fallback":"?","delay_ms":5})j");
  EXPECT_EQ(s.mode, StubScript::Mode::Script);
  EXPECT_EQ(s.responses.at("id"), "uid=0(root)");
  EXPECT_EQ(s.delay.count(), 5);
  StubChatBackend b(s);
  EXPECT_EQ(nonrag(b).run("id").text, "uid=0(root)\n");
  EXPECT_EQ(nonrag(b).run("w").text, "?\n");
  EXPECT_EQ(b.call_count(), 2u);
  EXPECT_THROW(parse_stub_script(R"({"mode":"loud"})"), ParseError);
  EXPECT_THROW(make_chat_backend("ftp://x"), UsageError);
}

}  // namespace
}  // namespace sbash
