#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

namespace sbash {

using Vector = std::vector<double>;

/// Source of text embeddings, used both for retrieval and for the
/// similarity metrics. Sentence mode maps each text to one vector; token
/// mode maps a text to one vector per whitespace-separated token.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  virtual std::vector<Vector> embed_batch(const std::vector<std::string>& texts) = 0;
  virtual std::vector<Vector> embed_tokens(std::string_view text) = 0;
  /// Short identifier stored alongside vector stores ("mock", the URL, ...).
  virtual std::string name() const = 0;

  Vector embed(std::string_view text);
};

/// Deterministic offline provider: counts of hashed character trigrams
/// (FNV-1a into `dim` buckets), L2-normalized. Text shorter than three
/// bytes is padded with boundary markers; the empty text embeds to the zero
/// vector.
class MockEmbedding final : public EmbeddingProvider {
 public:
  static constexpr std::size_t kDefaultDim = 256;

  explicit MockEmbedding(std::size_t dim = kDefaultDim);

  std::vector<Vector> embed_batch(const std::vector<std::string>& texts) override;
  std::vector<Vector> embed_tokens(std::string_view text) override;
  std::string name() const override { return "mock"; }

  Vector embed_one(std::string_view text) const;
  std::size_t dim() const { return dim_; }

 private:
  std::size_t dim_;
};

/// Client for an external embedding service.
///   sentence: POST {"input": [texts]}                 -> {"embeddings": [[...], ...]}
///   token:    POST {"input": [text], "mode": "token"} -> {"embeddings": [[[...], ...]]}
/// `expected_dim` of 0 accepts whatever dimension the first reply carries
/// and then holds later replies to it.
class HttpEmbedding final : public EmbeddingProvider {
 public:
  HttpEmbedding(std::string url, std::size_t expected_dim = 0,
                std::chrono::milliseconds timeout = std::chrono::seconds(30));

  std::vector<Vector> embed_batch(const std::vector<std::string>& texts) override;
  std::vector<Vector> embed_tokens(std::string_view text) override;
  std::string name() const override { return url_; }

 private:
  void check_dim(const Vector& v);

  std::string url_;
  std::atomic<std::size_t> dim_;
  std::chrono::milliseconds timeout_;
};

/// "mock" or "mock:<dim>" selects MockEmbedding, http:// URLs HttpEmbedding.
/// Throws ProviderUnavailable for anything else.
std::unique_ptr<EmbeddingProvider> make_embedding_provider(std::string_view spec);

/// Whitespace tokenization shared by token-mode providers.
std::vector<std::string> whitespace_tokens(std::string_view text);

/// Cosine similarity; 0 when either vector is all zeros. Throws
/// DimensionMismatch on differing lengths.
double cosine(const Vector& a, const Vector& b);

}  // namespace sbash
