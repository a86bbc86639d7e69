#include "sbash/profile.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "sbash/errors.hpp"

namespace sbash {

const std::string kDefaultTunedSystemPrompt =
    "You are a realistic Linux server. Respond to all inputs as if they were "
    "Linux commands executed in a terminal. Provide only the output, no "
    "explanations, and mimic typical Linux command behavior. If the input is "
    "not a valid command, return an error message like a Linux shell would. "
    "Don't explain under any condition so you don't expose yourself to the "
    "user as AI.";

namespace {

const char* const kDefaultPrompt = "{user}@{host}:{cwd}{sigil} ";

const std::map<std::string, std::string, std::less<>>& default_error_templates() {
  static const std::map<std::string, std::string, std::less<>> kTemplates = {
      {"not_found", "bash: {cmd}: command not found"},
      {"no_such_file", "{cmd}: No such file or directory"},
      {"permission_denied", "{cmd}: Permission denied"},
      {"is_directory", "{cmd}: Is a directory"},
      {"not_directory", "{cmd}: Not a directory"},
      {"file_exists", "{cmd}: File exists"},
      {"busy", "{cmd}: Device or resource busy"},
      {"not_permitted", "{cmd}: Operation not permitted"},
  };
  return kTemplates;
}

const std::set<std::string_view> kPromptPlaceholders = {"user", "host", "cwd",
                                                         "sigil"};

std::string_view trim(std::string_view s) {
  const auto* ws = " \t\r";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_words(std::string_view s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ' && s[j] != '\t') ++j;
    if (j > i) out.emplace_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

std::string parse_value(std::string_view raw, std::size_t line_no) {
  if (!raw.empty() && raw.front() == '"') {
    try {
      auto j = nlohmann::json::parse(raw);
      if (!j.is_string()) throw ParseError("");
      return j.get<std::string>();
    } catch (const std::exception&) {
      throw ParseError("line " + std::to_string(line_no) +
                       ": malformed quoted value");
    }
  }
  return std::string(raw);
}

bool needs_quoting(std::string_view v) {
  if (v.empty()) return true;
  if (v.front() == ' ' || v.front() == '\t' || v.back() == ' ' ||
      v.back() == '\t' || v.front() == '"')
    return true;
  return std::any_of(v.begin(), v.end(), [](unsigned char c) {
    return c < 0x20 || c == 0x7f;
  });
}

std::string quote_value(std::string_view v) {
  if (!needs_quoting(v)) return std::string(v);
  return nlohmann::json(std::string(v)).dump();
}

std::size_t count_occurrences(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto pos = hay.find(needle); pos != std::string_view::npos;
       pos = hay.find(needle, pos + needle.size()))
    ++n;
  return n;
}

std::filesystem::path resolve_path(const std::string& value,
                                   const std::filesystem::path& base_dir) {
  if (value.empty()) return {};
  std::filesystem::path p(value);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal();
}

}  // namespace

const UserAccount* SystemProfile::find_user(std::string_view name) const {
  auto it = std::find_if(users.begin(), users.end(),
                         [&](const UserAccount& u) { return u.name == name; });
  return it == users.end() ? nullptr : &*it;
}

const UserAccount& SystemProfile::default_account() const {
  const auto* u = find_user(default_user);
  if (u == nullptr) throw UnknownUser("default user '" + default_user + "'");
  return *u;
}

SystemProfile parse_profile(std::string_view text,
                            const std::filesystem::path& base_dir) {
  SystemProfile p;
  std::set<std::string> seen;
  bool saw_prompt = false, saw_system_prompt = false;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    auto line = trim(text.substr(pos, nl - pos));
    pos = nl + 1;
    ++line_no;
    if (line.empty() || line.front() == '#') continue;

    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ParseError("line " + std::to_string(line_no) + ": expected key = value");
    const std::string key(trim(line.substr(0, eq)));
    const auto raw = trim(line.substr(eq + 1));
    if (key.empty())
      throw ParseError("line " + std::to_string(line_no) + ": empty key");

    const bool repeatable = key == "user" || key == "commands" || key == "native";
    if (!repeatable && !seen.insert(key).second)
      throw ParseError("line " + std::to_string(line_no) + ": duplicate key '" +
                       key + "'");

    if (key == "user") {
      auto words = split_words(raw);
      int uid = 0;
      if (words.size() != 3 ||
          std::from_chars(words[2].data(), words[2].data() + words[2].size(), uid)
                  .ec != std::errc{})
        throw ParseError("line " + std::to_string(line_no) +
                         ": user expects '<name> <home> <uid>'");
      p.users.push_back({words[0], words[1], uid});
    } else if (key == "commands") {
      for (auto& w : split_words(raw)) p.command_db.insert(std::move(w));
    } else if (key == "native") {
      for (auto& w : split_words(raw)) p.native_commands.insert(std::move(w));
    } else if (key.starts_with("error.")) {
      p.error_templates[key.substr(6)] = parse_value(raw, line_no);
    } else {
      auto value = parse_value(raw, line_no);
      if (key == "system_id") p.system_id = value;
      else if (key == "hostname") p.hostname = value;
      else if (key == "default_user") p.default_user = value;
      else if (key == "prompt_template") { p.prompt_template = value; saw_prompt = true; }
      else if (key == "fs_template") p.fs_template = resolve_path(value, base_dir);
      else if (key == "kb_source_dir") p.kb_source_dir = resolve_path(value, base_dir);
      else if (key == "kb_store") p.kb_store = resolve_path(value, base_dir);
      else if (key == "system_prompt_tuned") { p.system_prompt_tuned = value; saw_system_prompt = true; }
      else if (key == "banner") p.banner = value;
      else if (key == "llm_url") p.llm_url = value;
      else if (key == "embed_url") p.embed_url = value;
      else if (key == "model") p.model = value;
      else if (key == "mutation_seed") {
        std::uint64_t seed = 0;
        auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), seed);
        if (ec != std::errc{} || ptr != value.data() + value.size())
          throw ParseError("line " + std::to_string(line_no) +
                           ": mutation_seed must be an unsigned integer");
        p.mutation_seed = seed;
      } else {
        throw ParseError("line " + std::to_string(line_no) + ": unknown key '" +
                         key + "'");
      }
    }
  }

  if (!saw_prompt) p.prompt_template = kDefaultPrompt;
  if (!saw_system_prompt) p.system_prompt_tuned = kDefaultTunedSystemPrompt;
  for (const auto& [kind, tmpl] : default_error_templates())
    p.error_templates.try_emplace(kind, tmpl);
  if (p.default_user.empty() && !p.users.empty()) p.default_user = p.users.front().name;

  validate_profile(p);
  return p;
}

SystemProfile load_profile(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot read profile " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  auto base = std::filesystem::absolute(path).parent_path();
  return parse_profile(ss.str(), base);
}

void validate_profile(const SystemProfile& p) {
  if (p.system_id.empty()) throw ValidationError("system_id", "must be set");
  if (p.hostname.empty()) throw ValidationError("hostname", "must be set");
  if (p.users.empty()) throw ValidationError("users", "at least one user required");
  std::set<std::string_view> names;
  for (const auto& u : p.users) {
    if (!names.insert(u.name).second)
      throw ValidationError("users", "duplicate user '" + u.name + "'");
    if (u.home.empty() || u.home.front() != '/')
      throw ValidationError("users", "home of '" + u.name + "' must be absolute");
  }
  if (p.find_user(p.default_user) == nullptr)
    throw ValidationError("default_user",
                          "'" + p.default_user + "' is not a declared user");
  for (const auto& cmd : p.native_commands)
    if (!p.command_db.contains(cmd))
      throw ValidationError("native_commands",
                            "'" + cmd + "' is not in command_db");
  for (const auto& [kind, tmpl] : p.error_templates)
    if (count_occurrences(tmpl, "{cmd}") != 1)
      throw ValidationError("error_templates",
                            "'" + kind + "' must contain {cmd} exactly once");

  const auto& t = p.prompt_template;
  for (std::size_t i = t.find('{'); i != std::string::npos; i = t.find('{', i + 1)) {
    const auto close = t.find('}', i);
    if (close == std::string::npos)
      throw ValidationError("prompt_template", "unterminated placeholder");
    const auto name = std::string_view(t).substr(i + 1, close - i - 1);
    if (!kPromptPlaceholders.contains(name))
      throw ValidationError("prompt_template",
                            "undeclared placeholder {" + std::string(name) + "}");
  }
}

std::string serialize_profile(const SystemProfile& p) {
  std::ostringstream out;
  auto kv = [&](std::string_view key, std::string_view value) {
    out << key << " = " << quote_value(value) << '\n';
  };
  kv("system_id", p.system_id);
  kv("hostname", p.hostname);
  for (const auto& u : p.users)
    out << "user = " << u.name << ' ' << u.home << ' ' << u.uid << '\n';
  kv("default_user", p.default_user);
  kv("prompt_template", p.prompt_template);
  for (const auto& [kind, tmpl] : p.error_templates) kv("error." + kind, tmpl);
  auto word_list = [&](std::string_view key, const auto& words) {
    std::size_t n = 0;
    for (const auto& w : words) {
      if (n % 12 == 0) out << (n ? "\n" : "") << key << " =";
      out << ' ' << w;
      ++n;
    }
    if (n) out << '\n';
  };
  word_list("commands", p.command_db);
  word_list("native", p.native_commands);
  if (!p.fs_template.empty()) kv("fs_template", p.fs_template.string());
  if (!p.kb_source_dir.empty()) kv("kb_source_dir", p.kb_source_dir.string());
  if (!p.kb_store.empty()) kv("kb_store", p.kb_store.string());
  kv("system_prompt_tuned", p.system_prompt_tuned);
  out << "mutation_seed = " << p.mutation_seed << '\n';
  if (!p.banner.empty()) kv("banner", p.banner);
  if (!p.llm_url.empty()) kv("llm_url", p.llm_url);
  if (!p.embed_url.empty()) kv("embed_url", p.embed_url);
  if (!p.model.empty()) kv("model", p.model);
  return out.str();
}

std::string render_prompt_line(const SystemProfile& profile,
                               std::string_view user, std::string_view cwd) {
  const auto* account = profile.find_user(user);
  if (account == nullptr) throw UnknownUser(std::string(user));

  std::string shown(cwd);
  const std::string_view home = account->home;
  if (home != "/" && cwd.starts_with(home) &&
      (cwd.size() == home.size() || cwd[home.size()] == '/'))
    shown = "~" + std::string(cwd.substr(home.size()));

  // Single pass so substituted values are never re-expanded.
  const std::string& t = profile.prompt_template;
  std::string out;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const auto close = t[i] == '{' ? t.find('}', i) : std::string::npos;
    if (close == std::string::npos) {
      out += t[i];
      continue;
    }
    const auto name = std::string_view(t).substr(i + 1, close - i - 1);
    if (name == "user") out += account->name;
    else if (name == "host") out += profile.hostname;
    else if (name == "cwd") out += shown;
    else if (name == "sigil") out += account->uid == 0 ? "#" : "$";
    else out.append(t, i, close - i + 1);
    i = close;
  }
  return out;
}

std::string render_error(const SystemProfile& profile, std::string_view kind,
                         std::string_view cmd) {
  auto it = profile.error_templates.find(kind);
  if (it == profile.error_templates.end())
    throw UnknownErrorKind(std::string(kind));
  std::string out = it->second;
  const auto at = out.find("{cmd}");
  out.replace(at, 5, cmd);
  return out;
}

}  // namespace sbash
