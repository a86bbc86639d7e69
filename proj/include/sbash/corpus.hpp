#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/capture.hpp"
#include "sbash/profile.hpp"
#include "sbash/vfs.hpp"

namespace sbash {

/// A short scripted session: commands typed one after another by `user`.
struct CommandSequence {
  std::string user = "root";
  std::vector<std::string> commands;
};

/// Paragraph-per-sequence text. '#' lines are comments; a first line of
/// "@user NAME" sets the login user. Throws ParseError.
std::vector<CommandSequence> parse_sequences(std::string_view text);

struct CapturedSequence {
  std::string user;
  std::int64_t captured_at = 0;
  std::vector<CapturedStep> steps;
};

struct CapturedCorpus {
  std::string reference;
  std::vector<CapturedSequence> sequences;
};

std::string serialize_corpus(const CapturedCorpus& corpus);
CapturedCorpus parse_corpus(std::string_view json_text);
CapturedCorpus load_corpus(const std::filesystem::path& path);

/// Runs every sequence on the reference. A sequence whose run straddles a
/// minute boundary is run again, so that times shown by `ls -l` for files
/// it creates are reproducible from `captured_at`.
CapturedCorpus capture_corpus(const std::vector<CommandSequence>& sequences,
                              std::string_view reference, const CaptureOptions& options);

/// Replays a sequence through a fresh native session on `base` with the
/// clock pinned to `now`; one output per command.
std::vector<std::string> replay_sequence(const SystemProfile& profile, const VfsState& base,
                                         const std::string& user,
                                         const std::vector<std::string>& commands,
                                         std::int64_t now);

}  // namespace sbash
