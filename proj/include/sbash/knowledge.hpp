#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "sbash/embedding.hpp"

namespace sbash {

inline constexpr std::size_t kDefaultChunkTokens = 512;
inline constexpr std::size_t kDefaultOverlapTokens = 64;
inline constexpr std::size_t kBytesPerToken = 4;

struct KnowledgeChunk {
  std::string chunk_id;  // "<command>#<index>", index zero-padded to 4 digits
  std::string command;
  std::string text;
  std::string source;
  std::size_t offset = 0;  // byte offset of `text` within the source document
  std::size_t token_estimate = 0;

  bool operator==(const KnowledgeChunk&) const = default;
};

/// ceil(bytes / 4), the token estimate used throughout.
std::size_t estimate_tokens(std::string_view text);

/// Splits one document into windows of chunk_size*4 bytes that overlap by
/// overlap*4 bytes, with window edges moved back onto UTF-8 character
/// boundaries. Throws ValidationError unless 0 <= overlap < chunk_size.
std::vector<KnowledgeChunk> chunk_document(const std::string& command, const std::string& source,
                                           std::string_view text, std::size_t chunk_size,
                                           std::size_t overlap);

/// One document per regular file in `source_dir`; the command name is the
/// file name minus a trailing ".txt". Files are read in name order.
/// Throws EmptyCorpus or UnreadableFile.
std::vector<KnowledgeChunk> ingest(const std::filesystem::path& source_dir,
                                   std::size_t chunk_size = kDefaultChunkTokens,
                                   std::size_t overlap = kDefaultOverlapTokens);

struct StoreEntry {
  KnowledgeChunk chunk;
  Vector vector;

  bool operator==(const StoreEntry&) const = default;
};

struct VectorStore {
  std::vector<StoreEntry> entries;
  std::size_t dim = 0;
  std::string provider;

  bool operator==(const VectorStore&) const = default;
};

/// Embeds every chunk. Throws ValidationError on an empty input or
/// duplicate chunk ids, plus any provider error.
VectorStore index_chunks(const std::vector<KnowledgeChunk>& chunks, EmbeddingProvider& provider);

struct ScoredChunk {
  KnowledgeChunk chunk;
  double score = 0;
};

/// Exact top-k by cosine similarity, descending, ties by chunk_id.
std::vector<ScoredChunk> retrieve(const VectorStore& store, std::string_view query, std::size_t k,
                                  EmbeddingProvider& provider);
/// Same ranking for an already embedded query.
std::vector<ScoredChunk> retrieve_vector(const VectorStore& store, const Vector& query,
                                         std::size_t k);

std::string serialize_store(const VectorStore& store);
VectorStore parse_store(std::string_view text);
void save_store(const VectorStore& store, const std::filesystem::path& path);
VectorStore load_store(const std::filesystem::path& path);

}  // namespace sbash
