#include "sbash/metrics.hpp"

#include <algorithm>
#include <vector>

#include "sbash/errors.hpp"

namespace sbash {

std::size_t levenshtein_distance(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> prev(b.size() + 1), cur(b.size() + 1);
  for (std::size_t j = 0; j <= b.size(); ++j) prev[j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    cur[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      const std::size_t sub = prev[j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1);
      cur[j] = std::min({prev[j] + 1, cur[j - 1] + 1, sub});
    }
    std::swap(prev, cur);
  }
  return prev[b.size()];
}

double levenshtein_similarity(std::string_view candidate, std::string_view reference) {
  const std::size_t longest = std::max(candidate.size(), reference.size());
  if (longest == 0) return 100.0;
  const double d = static_cast<double>(levenshtein_distance(candidate, reference));
  return 100.0 * (1.0 - d / static_cast<double>(longest));
}

double sentence_cosine_similarity(std::string_view candidate, std::string_view reference,
                                  EmbeddingProvider& provider) {
  // Empty text embeds to the zero vector, so only identical empties agree.
  if (candidate.empty() || reference.empty()) return candidate == reference ? 100.0 : 0.0;
  const auto vs = provider.embed_batch({std::string(candidate), std::string(reference)});
  if (vs.size() != 2) throw ProviderUnavailable("provider returned wrong number of vectors");
  return 100.0 * std::clamp(cosine(vs[0], vs[1]), 0.0, 1.0);
}

namespace {

// Mean over `from` of the best clamped cosine against any vector in `to`.
double greedy_side(const std::vector<Vector>& from, const std::vector<Vector>& to) {
  double sum = 0;
  for (const auto& f : from) {
    double best = 0;
    for (const auto& t : to) best = std::max(best, cosine(f, t));
    sum += std::min(best, 1.0);
  }
  return 100.0 * sum / static_cast<double>(from.size());
}

}  // namespace

TokenScore token_f1(std::string_view candidate, std::string_view reference,
                    EmbeddingProvider& provider) {
  const auto c = provider.embed_tokens(candidate);
  const auto r = provider.embed_tokens(reference);
  if (c.empty() && r.empty()) return {100, 100, 100};
  if (c.empty() || r.empty()) return {0, 0, 0};
  TokenScore s;
  s.precision = greedy_side(c, r);
  s.recall = greedy_side(r, c);
  s.f1 = s.precision + s.recall > 0 ? 2 * s.precision * s.recall / (s.precision + s.recall) : 0;
  return s;
}

}  // namespace sbash
