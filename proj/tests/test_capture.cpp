#include <gtest/gtest.h>

#include "sbash/capture.hpp"
#include "sbash/corpus.hpp"
#include "sbash/errors.hpp"
#include "support.hpp"

namespace sbash {
namespace {

using testing::shipped_profile;
using testing::shipped_state;

std::string marker(int status) { return "\036M" + std::to_string(status) + "\036"; }

TEST(Transcript, SplitsAtMarkers) {
  const std::string t = "echo noise\r\n" + marker(0) + "hi\r\n" + marker(0) + "ls: x\r\n" + marker(2);
  const auto steps = split_transcript(t, {"echo hi", "ls x"});
  ASSERT_EQ(steps.size(), 2u);
  EXPECT_EQ(steps[0].output, "hi\n");
  EXPECT_EQ(steps[0].exit_status, 0);
  EXPECT_TRUE(steps[0].completed);
  EXPECT_EQ(steps[1].output, "ls: x\n");
  EXPECT_EQ(steps[1].exit_status, 2);
}

TEST(Transcript, UnfinishedCommandIsNotCompleted) {
  const auto steps = split_transcript(marker(0) + "partial", {"sleep 99", "pwd"});
  EXPECT_EQ(steps[0].output, "partial");
  EXPECT_FALSE(steps[0].completed);
  EXPECT_FALSE(steps[1].completed);
  EXPECT_TRUE(split_transcript("no markers at all", {"pwd"})[0].output.empty());
}

TEST(Transcript, LoneCarriageReturnsSurvive) {
  const auto steps = split_transcript(marker(0) + "a\rb\r\n" + marker(1), {"x"});
  EXPECT_EQ(steps[0].output, "a\rb\n");
  EXPECT_EQ(steps[0].exit_status, 1);
}

TEST(CommandList, ParsesCategories) {
  const auto list = parse_command_list("# c\n\nreconnaissance\tuname -a\r\nexfiltration\tcat /etc/passwd\n");
  ASSERT_EQ(list.size(), 2u);
  EXPECT_EQ(list[0].command, "uname -a");
  EXPECT_EQ(list[1].category, Category::Exfiltration);
  EXPECT_THROW(parse_command_list("reconnaissance uname\n"), ParseError);
  EXPECT_THROW(parse_command_list("spying\tuname\n"), ParseError);
  EXPECT_THROW(parse_command_list("# nothing\n"), ParseError);
}

TEST(Reference, LocalBashRoundTrip) {
  CaptureOptions opts;
  opts.timeout = std::chrono::milliseconds(5000);
  const auto steps = run_reference_session("local", {"echo hi", "false", "printf 'a\\nb'"}, opts);
  ASSERT_EQ(steps.size(), 3u);
  EXPECT_EQ(steps[0].output, "hi\n");
  EXPECT_EQ(steps[0].exit_status, 0);
  EXPECT_EQ(steps[1].exit_status, 1);
  EXPECT_EQ(steps[2].output, "a\nb");
}

TEST(Reference, SlowCommandTimesOut) {
  CaptureOptions opts;
  opts.timeout = std::chrono::milliseconds(300);
  const auto steps = run_reference_session("local", {"echo a", "sleep 5", "echo never"}, opts);
  EXPECT_EQ(steps[0].output, "a\n");
  EXPECT_TRUE(steps[1].timed_out);
  EXPECT_TRUE(steps[2].timed_out);
}

TEST(Reference, UnreachableReferences) {
  CaptureOptions opts;
  opts.timeout = std::chrono::milliseconds(500);
  EXPECT_THROW(run_reference_session("exec:/nonexistent/shell", {"pwd"}, opts), ReferenceUnreachable);
  EXPECT_THROW(run_reference_session("exec:/bin/true", {"pwd"}, opts), ReferenceUnreachable);
  EXPECT_THROW(run_reference_session("telnet://x", {"pwd"}, opts), ReferenceUnreachable);
  EXPECT_THROW(run_reference_session("local", {"a\nb"}, opts), ValidationError);
}

TEST(Sequences, ParagraphsAndUsers) {
  const auto seqs = parse_sequences("# header\n\npwd\n\n@user ubuntu\ncd /tmp\n# note\npwd\n\n\n");
  ASSERT_EQ(seqs.size(), 2u);
  EXPECT_EQ(seqs[0].user, "root");
  EXPECT_EQ(seqs[0].commands, std::vector<std::string>{"pwd"});
  EXPECT_EQ(seqs[1].user, "ubuntu");
  EXPECT_EQ(seqs[1].commands, (std::vector<std::string>{"cd /tmp", "pwd"}));
}

TEST(Corpus, JsonRoundTrip) {
  CapturedCorpus c;
  c.reference = "exec:x";
  CapturedSequence s;
  s.user = "ubuntu";
  s.captured_at = 1792140000;
  CapturedStep st;
  st.command = "ls";
  st.output = "a\n\xff";
  st.exit_status = 0;
  st.completed = true;
  s.steps.push_back(st);
  c.sequences.push_back(s);
  const auto back = parse_corpus(serialize_corpus(c));
  ASSERT_EQ(back.sequences.size(), 1u);
  EXPECT_EQ(back.reference, "exec:x");
  EXPECT_EQ(back.sequences[0].user, "ubuntu");
  EXPECT_EQ(back.sequences[0].captured_at, 1792140000);
  // JSON carries text; stray bytes come back as U+FFFD.
  EXPECT_EQ(back.sequences[0].steps[0].output, "a\n\xEF\xBF\xBD");
  EXPECT_THROW(parse_corpus("{"), ParseError);
}

// The captured corpus holds real bash output for native command sequences
// run on a chroot of the profile's file system.
TEST(Corpus, EmulatorMatchesReferenceByteForByte) {
  const auto corpus = load_corpus(testing::source_dir() / "tests" / "fixtures" / "native_captured.json");
  ASSERT_GE(corpus.sequences.size(), 50u);
  for (std::size_t i = 0; i < corpus.sequences.size(); ++i) {
    const auto& s = corpus.sequences[i];
    std::vector<std::string> cmds;
    for (const auto& st : s.steps) cmds.push_back(st.command);
    const auto got = replay_sequence(shipped_profile(), shipped_state(), s.user, cmds, s.captured_at);
    for (std::size_t k = 0; k < cmds.size(); ++k)
      EXPECT_EQ(got[k], s.steps[k].output) << "sequence " << i << " step " << k << ": " << cmds[k];
  }
}

}  // namespace
}  // namespace sbash
