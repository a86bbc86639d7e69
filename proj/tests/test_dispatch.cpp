#include <gtest/gtest.h>

#include "sbash/dispatch.hpp"
#include "sbash/errors.hpp"
#include "sbash/shell_words.hpp"
#include "oracles.hpp"
#include "support.hpp"

namespace sbash {
namespace {

using testing::fixed_clock;
using testing::Gen;
using testing::shipped_profile;
using testing::shipped_state;

using Words = std::vector<std::string>;

// --- word splitting -----------------------------------------------------------

TEST(ShellWords, QuotingForms) {
  EXPECT_EQ(split_shell_words("echo 'a  b' \"c d\" e\\ f").words, (Words{"echo", "a  b", "c d", "e f"}));
  EXPECT_EQ(split_shell_words("  ls\t-la  ").words, (Words{"ls", "-la"}));
  EXPECT_EQ(split_shell_words("echo \"a\\\"b\\$\"").words, (Words{"echo", "a\"b$"}));
  EXPECT_EQ(split_shell_words("echo a'b'\"c\"").words, (Words{"echo", "abc"}));
  EXPECT_EQ(split_shell_words("echo ''").words, (Words{"echo", ""}));
}

TEST(ShellWords, FlagsForTheShellProper) {
  EXPECT_TRUE(split_shell_words("cat /etc/passwd | wc -l").compound);
  EXPECT_EQ(split_shell_words("a&&b").words, (Words{"a", "&&", "b"}));
  EXPECT_TRUE(split_shell_words("echo $HOME").needs_shell);
  EXPECT_FALSE(split_shell_words("echo '$HOME'").needs_shell);
  EXPECT_TRUE(split_shell_words("echo \"$HOME\"").needs_shell);
  EXPECT_TRUE(split_shell_words("ls *.txt").needs_shell);
  EXPECT_TRUE(split_shell_words("touch {a,b}").needs_shell);
  EXPECT_TRUE(split_shell_words("touch {1..3}").needs_shell);
  EXPECT_FALSE(split_shell_words("touch c{").needs_shell);
  EXPECT_FALSE(split_shell_words("touch {}").needs_shell);
  EXPECT_TRUE(split_shell_words("echo hi # comment").needs_shell);
  EXPECT_FALSE(split_shell_words("touch h#").needs_shell);
  EXPECT_TRUE(split_shell_words("cd '~'").needs_shell);
  EXPECT_TRUE(split_shell_words("echo 'open").unterminated);
  EXPECT_TRUE(split_shell_words("what is this?").bare_question);
  EXPECT_FALSE(split_shell_words("echo 'really?'").bare_question);
}

// Quote random words at random and check the splitter recovers them.
TEST(ShellWords, QuoteThenSplitRoundTrip) {
  Gen g(31337);
  const std::string alphabet = "abcxyz019-_./=,:@% ";
  for (int i = 0; i < 2000; ++i) {
    Words words;
    std::string line;
    const auto n = 1 + g.below(5);
    for (std::size_t k = 0; k < n; ++k) {
      auto w = g.string_from(alphabet, 8);
      if (k == 0 && (w.empty() || w.find(' ') != std::string::npos)) w = "cmd";
      words.push_back(w);
      std::string q;
      switch (g.below(3)) {
        case 0: q = "'" + w + "'"; break;
        case 1: q = "\"" + w + "\""; break;
        default:
          if (w.empty()) q = "''";
          for (char c : w) q += c == ' ' ? std::string("\\ ") : std::string(1, c);
      }
      line += (k ? std::string(1 + g.below(3), ' ') : "") + q;
    }
    const auto got = split_shell_words(line);
    ASSERT_EQ(got.words, words) << line;
    ASSERT_FALSE(got.compound) << line;
    ASSERT_FALSE(got.unterminated) << line;
  }
}

// --- sanitize and classify --------------------------------------------------------

CommandVariant variant_of(std::string_view line) {
  const auto s = sanitize(line, shipped_profile());
  if (std::holds_alternative<Rejected>(s)) return CommandVariant::Rejected;
  return classify(std::get<SanitizedInput>(s), shipped_profile()).variant;
}

TEST(Classify, RoutesByCommandAndFlags) {
  EXPECT_EQ(variant_of("ls -la /tmp"), CommandVariant::Native);
  EXPECT_EQ(variant_of("ls -lh"), CommandVariant::Ai);
  EXPECT_EQ(variant_of("ls | wc -l"), CommandVariant::Ai);
  EXPECT_EQ(variant_of("echo $PATH"), CommandVariant::Ai);
  EXPECT_EQ(variant_of("uname -a"), CommandVariant::Ai);
  EXPECT_EQ(variant_of("/usr/bin/id"), CommandVariant::Ai);
  EXPECT_EQ(variant_of("frobnicate --now"), CommandVariant::NonExisting);
  EXPECT_EQ(variant_of(""), CommandVariant::Rejected);
  EXPECT_EQ(variant_of("   "), CommandVariant::Rejected);
  EXPECT_EQ(variant_of("!!"), CommandVariant::Rejected);
  EXPECT_EQ(variant_of("ls?"), CommandVariant::Rejected);
}

Session session(const Pipeline* p) {
  return Session(shipped_profile(), shipped_state(), p, fixed_clock(1792140000));
}

TEST(Dispatch, NaturalLanguageNeverReachesTheModel) {
  const auto& probes = testing::injection_probes();
  ASSERT_GE(probes.size(), 20u);
  StubChatBackend backend(StubScript{});
  GenerationConfig config;
  config.model_name = "stub";
  Pipeline pipeline(shipped_profile(), config, backend);
  auto s = session(&pipeline);
  for (const auto& p : probes) {
    const auto r = s.dispatch(p);
    EXPECT_NE(r.command_class.variant, CommandVariant::Ai) << p;
    EXPECT_NE(r.command_class.variant, CommandVariant::Native) << p;
    EXPECT_TRUE(r.output.ends_with(": command not found\n")) << p << " -> " << r.output;
  }
  EXPECT_EQ(backend.call_count(), 0u);
}

TEST(Dispatch, AiPathAndBackendFailure) {
  StubChatBackend echo(StubScript{});
  GenerationConfig config;
  Pipeline pipeline(shipped_profile(), config, echo);
  auto s = session(&pipeline);
  const auto r = s.dispatch("uname -a");
  EXPECT_EQ(r.command_class.variant, CommandVariant::Ai);
  EXPECT_EQ(r.output, "uname -a\n");
  EXPECT_EQ(echo.call_count(), 1u);
  EXPECT_EQ(s.dispatch("pwd").output, "/root\n");
  EXPECT_EQ(echo.call_count(), 1u);

  StubScript down;
  down.mode = StubScript::Mode::Unavailable;
  StubChatBackend broken(down);
  Pipeline bad(shipped_profile(), config, broken);
  auto t = session(&bad);
  const auto f = t.dispatch("uname -a");
  EXPECT_EQ(f.output, "bash: uname: command not found\n");
  ASSERT_TRUE(f.backend_error.has_value());
  EXPECT_NE(f.backend_error->find("backend down"), std::string::npos);
  EXPECT_EQ(session(nullptr).dispatch("id").output, "bash: id: command not found\n");
}

TEST(Dispatch, PathHeads) {
  auto s = session(nullptr);
  EXPECT_EQ(s.dispatch("./bot.sh").output, "bash: ./bot.sh: No such file or directory\n");
  EXPECT_EQ(s.dispatch("/etc").output, "bash: /etc: Is a directory\n");
  EXPECT_EQ(s.dispatch("/etc/shadow").output, "bash: /etc/shadow: Permission denied\n");
  EXPECT_EQ(s.dispatch("").output, "");
}

TEST(Dispatch, PromptFollowsCwd) {
  auto s = session(nullptr);
  EXPECT_EQ(s.prompt(), "root@svr04:~# ");
  s.dispatch("cd /var/log");
  EXPECT_EQ(s.prompt(), "root@svr04:/var/log# ");
}

// Every line gets some classification and the state stays valid whatever
// arrives, including binary junk.
TEST(Dispatch, ArbitraryInputKeepsStateValid) {
  Gen g(2024);
  auto s = session(nullptr);
  const Words heads = {"ls", "cd", "cat", "rm", "mkdir", "touch", "mv", "cp", "echo", "x"};
  for (int i = 0; i < 1500; ++i) {
    std::string line = g.chance(0.3) ? g.bytes(30) : g.pick(heads) + " " + g.string_from("ab/.-~ '\"\\", 14);
    const auto r = s.dispatch(line);
    ASSERT_EQ(validate_state(s.state()), std::nullopt) << line;
    ASSERT_GE(r.latency_ms, 0.0);
  }
}

}  // namespace
}  // namespace sbash
