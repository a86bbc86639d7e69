#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace sbash {

/// Result of splitting one input line the way bash would before expansion.
/// Only quoting is interpreted; anything that would need the shell proper
/// (operators, expansions, globbing, comments, unterminated quotes) is
/// flagged instead.
struct ShellWords {
  std::vector<std::string> words;  // unquoted words; operators appear as their own words
  bool compound = false;           // contains | & ; < > ( )
  bool needs_shell = false;        // compound, or expansion/glob/comment syntax outside single quotes
  bool unterminated = false;       // a quote was left open
  bool bare_question = false;      // '?' outside any quotes
};

ShellWords split_shell_words(std::string_view line);

}  // namespace sbash
