#include "sbash/shell_words.hpp"

namespace sbash {

namespace {

bool is_blank(char c) { return c == ' ' || c == '\t'; }
bool is_operator(char c) {
  return c == '|' || c == '&' || c == ';' || c == '<' || c == '>' || c == '(' || c == ')';
}

/// Whether the '{' at `at` could start a brace expansion: a later '}' in
/// the same word with a ',' or ".." before it. Quotes make us give up and
/// assume it could.
bool brace_expansion_ahead(std::string_view line, std::size_t at) {
  bool separator = false;
  for (std::size_t j = at + 1; j < line.size(); ++j) {
    const char c = line[j];
    if (is_blank(c) || is_operator(c)) return false;
    if (c == '\'' || c == '"' || c == '\\') return true;
    if (c == ',' || (c == '.' && j + 1 < line.size() && line[j + 1] == '.')) separator = true;
    if (c == '}' && separator) return true;
  }
  return false;
}

}  // namespace

ShellWords split_shell_words(std::string_view line) {
  ShellWords out;
  std::string word;
  bool in_word = false;

  auto flush = [&] {
    if (in_word) out.words.push_back(word);
    word.clear();
    in_word = false;
  };

  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (is_blank(c)) {
      flush();
      continue;
    }
    if (is_operator(c)) {
      flush();
      std::string op(1, c);
      // Two-character forms such as && || >> are kept together.
      if (i + 1 < line.size() && is_operator(line[i + 1]) && line[i + 1] != '(' &&
          line[i + 1] != ')')
        op += line[++i];
      out.words.push_back(op);
      out.compound = out.needs_shell = true;
      continue;
    }
    if (c == '#' && !in_word) {
      out.needs_shell = true;  // comment
      break;
    }
    const bool word_start = !in_word;
    in_word = true;
    // The vfs layer expands a leading '~' itself; a quoted one must not be.
    if (word_start && (c == '\\' || c == '\'' || c == '"') && i + 1 < line.size() &&
        line[i + 1] == '~')
      out.needs_shell = true;
    switch (c) {
      case '\\':
        if (i + 1 < line.size()) word += line[++i];
        break;
      case '\'': {
        const auto close = line.find('\'', i + 1);
        if (close == std::string_view::npos) {
          out.unterminated = out.needs_shell = true;
          word += line.substr(i + 1);
          i = line.size();
        } else {
          word += line.substr(i + 1, close - i - 1);
          i = close;
        }
        break;
      }
      case '"': {
        std::size_t j = i + 1;
        for (; j < line.size() && line[j] != '"'; ++j) {
          const char d = line[j];
          if (d == '\\' && j + 1 < line.size() &&
              (line[j + 1] == '"' || line[j + 1] == '\\' || line[j + 1] == '$' ||
               line[j + 1] == '`')) {
            word += line[++j];
            continue;
          }
          if (d == '$' || d == '`') out.needs_shell = true;
          word += d;
        }
        if (j >= line.size()) out.unterminated = out.needs_shell = true;
        i = j;
        break;
      }
      case '?':
        out.bare_question = true;
        out.needs_shell = true;
        word += c;
        break;
      case '$':
      case '`':
      case '*':
      case '[':
        out.needs_shell = true;
        word += c;
        break;
      case '{':
        if (brace_expansion_ahead(line, i)) out.needs_shell = true;
        word += c;
        break;
      default:
        word += c;
    }
  }
  flush();
  return out;
}

}  // namespace sbash
