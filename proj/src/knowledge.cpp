#include "sbash/knowledge.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "sbash/errors.hpp"

namespace fs = std::filesystem;

namespace sbash {

using nlohmann::json;

namespace {

bool is_continuation(unsigned char c) { return (c & 0xC0) == 0x80; }

/// Moves `pos` back to the start of the UTF-8 sequence it falls in.
std::size_t snap_back(std::string_view text, std::size_t pos) {
  while (pos > 0 && pos < text.size() && is_continuation(static_cast<unsigned char>(text[pos])))
    --pos;
  return pos;
}

std::string make_chunk_id(const std::string& command, std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "#%04zu", index);
  return command + buf;
}

void check_vector(const Vector& v, std::size_t dim, const std::string& id) {
  if (v.size() != dim)
    throw DimensionMismatch("chunk " + id + ": dimension " + std::to_string(v.size()) +
                            ", store has " + std::to_string(dim));
  for (double x : v)
    if (!std::isfinite(x)) throw ValidationError("entries", "chunk " + id + " has a non-finite value");
}

}  // namespace

std::size_t estimate_tokens(std::string_view text) {
  return (text.size() + kBytesPerToken - 1) / kBytesPerToken;
}

std::vector<KnowledgeChunk> chunk_document(const std::string& command, const std::string& source,
                                           std::string_view text, std::size_t chunk_size,
                                           std::size_t overlap) {
  if (chunk_size == 0) throw ValidationError("chunk_size", "must be positive");
  if (overlap >= chunk_size) throw ValidationError("overlap", "must be smaller than chunk_size");
  const std::size_t window = chunk_size * kBytesPerToken;
  const std::size_t step = (chunk_size - overlap) * kBytesPerToken;

  std::vector<KnowledgeChunk> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = std::min(start + window, text.size());
    if (end < text.size()) {
      const std::size_t snapped = snap_back(text, end);
      if (snapped > start) end = snapped;
    }
    KnowledgeChunk c;
    c.chunk_id = make_chunk_id(command, out.size());
    c.command = command;
    c.source = source;
    c.offset = start;
    c.text = std::string(text.substr(start, end - start));
    c.token_estimate = estimate_tokens(c.text);
    out.push_back(std::move(c));
    if (end == text.size()) break;
    std::size_t next = snap_back(text, start + step);
    if (next <= start) next = end;  // a step shorter than one character
    start = next;
  }
  return out;
}

std::vector<KnowledgeChunk> ingest(const fs::path& source_dir, std::size_t chunk_size,
                                   std::size_t overlap) {
  std::error_code ec;
  if (!fs::is_directory(source_dir, ec))
    throw UnreadableFile("knowledge directory " + source_dir.string() + " is not readable");
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(source_dir, ec))
    if (entry.is_regular_file()) files.push_back(entry.path());
  if (ec) throw UnreadableFile(source_dir.string() + ": " + ec.message());
  std::sort(files.begin(), files.end());

  std::vector<KnowledgeChunk> chunks;
  for (const auto& file : files) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw UnreadableFile(file.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw UnreadableFile(file.string());
    std::string command = file.filename().string();
    if (command.size() > 4 && command.ends_with(".txt")) command.resize(command.size() - 4);
    auto doc = chunk_document(command, file.string(), ss.str(), chunk_size, overlap);
    chunks.insert(chunks.end(), std::make_move_iterator(doc.begin()),
                  std::make_move_iterator(doc.end()));
  }
  if (chunks.empty()) throw EmptyCorpus("no documents with content in " + source_dir.string());
  return chunks;
}

VectorStore index_chunks(const std::vector<KnowledgeChunk>& chunks, EmbeddingProvider& provider) {
  if (chunks.empty()) throw ValidationError("chunks", "nothing to index");
  std::set<std::string_view> ids;
  std::vector<std::string> texts;
  for (const auto& c : chunks) {
    if (!ids.insert(c.chunk_id).second)
      throw ValidationError("chunk_id", "duplicate id " + c.chunk_id);
    if (c.text.empty()) throw ValidationError("text", "chunk " + c.chunk_id + " is empty");
    texts.push_back(c.text);
  }
  auto vectors = provider.embed_batch(texts);
  if (vectors.size() != chunks.size())
    throw ProviderUnavailable("provider returned " + std::to_string(vectors.size()) +
                              " vectors for " + std::to_string(chunks.size()) + " chunks");
  VectorStore store;
  store.provider = provider.name();
  store.dim = vectors.front().size();
  for (std::size_t i = 0; i < chunks.size(); ++i) {
    check_vector(vectors[i], store.dim, chunks[i].chunk_id);
    store.entries.push_back({chunks[i], std::move(vectors[i])});
  }
  return store;
}

std::vector<ScoredChunk> retrieve_vector(const VectorStore& store, const Vector& query,
                                         std::size_t k) {
  if (k == 0) throw ValidationError("k", "must be at least 1");
  if (store.entries.empty()) throw ValidationError("entries", "store is empty");
  if (query.size() != store.dim)
    throw DimensionMismatch("query dimension " + std::to_string(query.size()) + ", store has " +
                            std::to_string(store.dim));
  std::vector<std::pair<double, const StoreEntry*>> scored;
  scored.reserve(store.entries.size());
  for (const auto& e : store.entries) scored.emplace_back(cosine(query, e.vector), &e);
  auto better = [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second->chunk.chunk_id < b.second->chunk.chunk_id;
  };
  const std::size_t n = std::min(k, scored.size());
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(n), scored.end(),
                    better);
  std::vector<ScoredChunk> out;
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back({scored[i].second->chunk, scored[i].first});
  return out;
}

std::vector<ScoredChunk> retrieve(const VectorStore& store, std::string_view query, std::size_t k,
                                  EmbeddingProvider& provider) {
  return retrieve_vector(store, provider.embed(query), k);
}

std::string serialize_store(const VectorStore& store) {
  json entries = json::array();
  for (const auto& e : store.entries) {
    entries.push_back({{"chunk_id", e.chunk.chunk_id},
                       {"command", e.chunk.command},
                       {"source", e.chunk.source},
                       {"offset", e.chunk.offset},
                       {"token_estimate", e.chunk.token_estimate},
                       {"text", e.chunk.text},
                       {"vector", e.vector}});
  }
  json doc = {{"format", "sbash-vector-store"},
              {"version", 1},
              {"provider", store.provider},
              {"dim", store.dim},
              {"entries", std::move(entries)}};
  return doc.dump() + "\n";
}

VectorStore parse_store(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("vector store: ") + e.what());
  }
  try {
    if (doc.at("format") != "sbash-vector-store" || doc.at("version") != 1)
      throw ParseError("vector store: unsupported format or version");
    VectorStore store;
    store.provider = doc.at("provider").get<std::string>();
    store.dim = doc.at("dim").get<std::size_t>();
    std::set<std::string> ids;
    for (const auto& e : doc.at("entries")) {
      StoreEntry entry;
      entry.chunk.chunk_id = e.at("chunk_id").get<std::string>();
      entry.chunk.command = e.at("command").get<std::string>();
      entry.chunk.source = e.at("source").get<std::string>();
      entry.chunk.offset = e.at("offset").get<std::size_t>();
      entry.chunk.token_estimate = e.at("token_estimate").get<std::size_t>();
      entry.chunk.text = e.at("text").get<std::string>();
      entry.vector = e.at("vector").get<Vector>();
      if (!ids.insert(entry.chunk.chunk_id).second)
        throw ValidationError("chunk_id", "duplicate id " + entry.chunk.chunk_id);
      check_vector(entry.vector, store.dim, entry.chunk.chunk_id);
      store.entries.push_back(std::move(entry));
    }
    return store;
  } catch (const json::exception& e) {
    throw ParseError(std::string("vector store: ") + e.what());
  }
}

void save_store(const VectorStore& store, const fs::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << serialize_store(store);
  if (!out) throw Error("cannot write vector store " + path.string());
}

VectorStore load_store(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UnreadableFile("cannot read vector store " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_store(ss.str());
}

}  // namespace sbash
