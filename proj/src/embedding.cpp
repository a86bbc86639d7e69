#include "sbash/embedding.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>

#include <json.hpp>

#include "http_post.hpp"
#include "sbash/errors.hpp"

namespace sbash {

using nlohmann::json;

Vector EmbeddingProvider::embed(std::string_view text) {
  auto out = embed_batch({std::string(text)});
  if (out.size() != 1) throw ProviderUnavailable("provider returned no vector");
  return std::move(out.front());
}

MockEmbedding::MockEmbedding(std::size_t dim) : dim_(dim) {
  if (dim == 0) throw DimensionMismatch("mock embedding dimension must be positive");
}

Vector MockEmbedding::embed_one(std::string_view text) const {
  Vector v(dim_, 0.0);
  if (text.empty()) return v;
  std::string padded;
  if (text.size() < 3) {
    padded = "\x02" + std::string(text) + "\x03";
    text = padded;
  }
  for (std::size_t i = 0; i + 3 <= text.size(); ++i) {
    std::uint32_t h = 2166136261u;
    for (std::size_t j = i; j < i + 3; ++j) {
      h ^= static_cast<unsigned char>(text[j]);
      h *= 16777619u;
    }
    v[h % dim_] += 1.0;
  }
  double norm = 0;
  for (double x : v) norm += x * x;
  norm = std::sqrt(norm);
  for (double& x : v) x /= norm;
  return v;
}

std::vector<Vector> MockEmbedding::embed_batch(const std::vector<std::string>& texts) {
  std::vector<Vector> out;
  out.reserve(texts.size());
  for (const auto& t : texts) out.push_back(embed_one(t));
  return out;
}

std::vector<Vector> MockEmbedding::embed_tokens(std::string_view text) {
  std::vector<Vector> out;
  for (const auto& tok : whitespace_tokens(text)) out.push_back(embed_one(tok));
  return out;
}

HttpEmbedding::HttpEmbedding(std::string url, std::size_t expected_dim,
                             std::chrono::milliseconds timeout)
    : url_(std::move(url)), dim_(expected_dim), timeout_(timeout) {}

namespace {

json post_embeddings(const std::string& url, const json& request,
                     std::chrono::milliseconds timeout) {
  detail::HttpResponse res;
  try {
    res = detail::http_post_json(url, request.dump(), timeout, "/embed");
  } catch (const detail::HttpFailure& e) {
    throw ProviderUnavailable(e.what());
  }
  if (res.status != 200)
    throw ProviderUnavailable(url + ": HTTP " + std::to_string(res.status));
  json body = json::parse(res.body, nullptr, /*allow_exceptions=*/false);
  if (!body.is_object() || !body.contains("embeddings") || !body["embeddings"].is_array())
    throw ProviderUnavailable(url + ": reply has no embeddings array");
  return body["embeddings"];
}

Vector to_vector(const json& j) {
  if (!j.is_array()) throw ProviderUnavailable("embedding is not an array");
  Vector v;
  v.reserve(j.size());
  for (const auto& x : j) {
    if (!x.is_number()) throw ProviderUnavailable("embedding holds a non-number");
    const double d = x.get<double>();
    if (!std::isfinite(d)) throw ProviderUnavailable("embedding holds a non-finite value");
    v.push_back(d);
  }
  return v;
}

}  // namespace

void HttpEmbedding::check_dim(const Vector& v) {
  std::size_t expected = 0;
  if (dim_.compare_exchange_strong(expected, v.size())) return;
  if (v.size() != expected)
    throw DimensionMismatch("expected dimension " + std::to_string(expected) + ", got " +
                            std::to_string(v.size()));
}

std::vector<Vector> HttpEmbedding::embed_batch(const std::vector<std::string>& texts) {
  const json reply = post_embeddings(url_, json{{"input", texts}}, timeout_);
  if (reply.size() != texts.size())
    throw ProviderUnavailable(url_ + ": expected " + std::to_string(texts.size()) +
                              " embeddings, got " + std::to_string(reply.size()));
  std::vector<Vector> out;
  for (const auto& item : reply) {
    out.push_back(to_vector(item));
    check_dim(out.back());
  }
  return out;
}

std::vector<Vector> HttpEmbedding::embed_tokens(std::string_view text) {
  const json reply =
      post_embeddings(url_, json{{"input", json::array({std::string(text)})}, {"mode", "token"}}, timeout_);
  if (reply.size() != 1 || !reply[0].is_array())
    throw ProviderUnavailable(url_ + ": malformed token embeddings");
  std::vector<Vector> out;
  for (const auto& item : reply[0]) {
    out.push_back(to_vector(item));
    check_dim(out.back());
  }
  return out;
}

std::unique_ptr<EmbeddingProvider> make_embedding_provider(std::string_view spec) {
  if (spec == "mock" || spec == "mock:") return std::make_unique<MockEmbedding>();
  if (spec.starts_with("mock:")) {
    std::size_t dim = 0;
    const auto digits = spec.substr(5);
    auto [ptr, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), dim);
    if (ec != std::errc{} || ptr != digits.data() + digits.size() || dim == 0)
      throw ProviderUnavailable("bad mock embedding spec: " + std::string(spec));
    return std::make_unique<MockEmbedding>(dim);
  }
  if (spec.starts_with("http://")) return std::make_unique<HttpEmbedding>(std::string(spec));
  throw ProviderUnavailable("unknown embedding provider: " + std::string(spec));
}

std::vector<std::string> whitespace_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    const std::size_t start = i;
    while (i < text.size() && !std::isspace(static_cast<unsigned char>(text[i]))) ++i;
    if (i > start) out.emplace_back(text.substr(start, i - start));
  }
  return out;
}

double cosine(const Vector& a, const Vector& b) {
  if (a.size() != b.size())
    throw DimensionMismatch("cosine of vectors with dimensions " + std::to_string(a.size()) +
                            " and " + std::to_string(b.size()));
  double dot = 0, na = 0, nb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0 || nb == 0) return 0.0;
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

}  // namespace sbash
