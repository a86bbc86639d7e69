#include "sbash/corpus.hpp"

#include <ctime>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "sbash/dispatch.hpp"
#include "sbash/errors.hpp"

namespace sbash {

using nlohmann::json;

std::vector<CommandSequence> parse_sequences(std::string_view text) {
  std::vector<CommandSequence> out;
  CommandSequence current;
  bool open = false;
  auto close = [&] {
    if (open && !current.commands.empty()) out.push_back(std::move(current));
    current = {};
    open = false;
  };
  std::size_t pos = 0, line_no = 0;
  while (pos <= text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) {
      close();
      continue;
    }
    if (line.front() == '#') continue;
    if (line.starts_with("@user ")) {
      if (!current.commands.empty())
        throw ParseError("line " + std::to_string(line_no) + ": @user must start a sequence");
      current.user = std::string(line.substr(6));
      open = true;
      continue;
    }
    current.commands.emplace_back(line);
    open = true;
  }
  close();
  if (out.empty()) throw ParseError("no command sequences");
  return out;
}

std::string serialize_corpus(const CapturedCorpus& corpus) {
  json seqs = json::array();
  for (const auto& s : corpus.sequences) {
    json steps = json::array();
    for (const auto& st : s.steps)
      steps.push_back({{"command", st.command},
                       {"output", st.output},
                       {"exit_status", st.exit_status},
                       {"completed", st.completed},
                       {"timed_out", st.timed_out}});
    seqs.push_back({{"user", s.user}, {"captured_at", s.captured_at}, {"steps", std::move(steps)}});
  }
  json doc = {{"format", "sbash-native-corpus"},
              {"version", 1},
              {"reference", corpus.reference},
              {"sequences", std::move(seqs)}};
  return doc.dump(1, ' ', false, json::error_handler_t::replace) + "\n";
}

CapturedCorpus parse_corpus(std::string_view json_text) {
  CapturedCorpus c;
  try {
    const json doc = json::parse(json_text);
    if (doc.at("format") != "sbash-native-corpus" || doc.at("version") != 1)
      throw ParseError("not a version 1 native corpus");
    c.reference = doc.value("reference", "");
    for (const auto& js : doc.at("sequences")) {
      CapturedSequence s;
      s.user = js.at("user").get<std::string>();
      s.captured_at = js.at("captured_at").get<std::int64_t>();
      for (const auto& st : js.at("steps")) {
        CapturedStep step;
        step.command = st.at("command").get<std::string>();
        step.output = st.at("output").get<std::string>();
        step.exit_status = st.value("exit_status", -1);
        step.completed = st.value("completed", true);
        step.timed_out = st.value("timed_out", false);
        s.steps.push_back(std::move(step));
      }
      c.sequences.push_back(std::move(s));
    }
  } catch (const json::exception& e) {
    throw ParseError(std::string("native corpus: ") + e.what());
  }
  return c;
}

CapturedCorpus load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFile("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_corpus(ss.str());
}

CapturedCorpus capture_corpus(const std::vector<CommandSequence>& sequences,
                              std::string_view reference, const CaptureOptions& options) {
  CapturedCorpus corpus;
  corpus.reference = std::string(reference);
  for (const auto& seq : sequences) {
    CaptureOptions opts = options;
    opts.user = seq.user;
    for (int attempt = 0;; ++attempt) {
      const std::int64_t start = std::time(nullptr);
      auto steps = run_reference_session(reference, seq.commands, opts);
      const std::int64_t end = std::time(nullptr);
      if (start / 60 != end / 60 && attempt < 3) continue;
      corpus.sequences.push_back({seq.user, start, std::move(steps)});
      break;
    }
  }
  return corpus;
}

std::vector<std::string> replay_sequence(const SystemProfile& profile, const VfsState& base,
                                         const std::string& user,
                                         const std::vector<std::string>& commands,
                                         std::int64_t now) {
  VfsState state = base;
  const UserAccount* account = profile.find_user(user);
  if (account == nullptr) throw UnknownUser("'" + user + "'");
  state.session_user = account->name;
  if (const VfsNode* home = find_node(state, account->home); home && home->is_dir())
    state.cwd = account->home;
  Session session(profile, std::move(state), nullptr, [now] { return now; });
  std::vector<std::string> out;
  for (const auto& c : commands) out.push_back(session.dispatch(c).output);
  return out;
}

}  // namespace sbash
