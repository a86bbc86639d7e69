#pragma once

#include <cstddef>
#include <string_view>

#include "sbash/embedding.hpp"

namespace sbash {

/// Unit-cost edit distance over bytes, two-row dynamic programming.
std::size_t levenshtein_distance(std::string_view a, std::string_view b);

/// 100 * (1 - distance / max(len)). Both empty scores 100.
double levenshtein_similarity(std::string_view candidate, std::string_view reference);

/// 100 * max(0, cosine) of the two sentence embeddings.
double sentence_cosine_similarity(std::string_view candidate, std::string_view reference,
                                  EmbeddingProvider& provider);

struct TokenScore {
  double precision = 0;
  double recall = 0;
  double f1 = 0;
};

/// Greedy-max token matching over per-token embeddings, without idf
/// weighting or baseline rescaling. Token cosines are clamped at 0 so every
/// score stays a percentage.
TokenScore token_f1(std::string_view candidate, std::string_view reference,
                    EmbeddingProvider& provider);

}  // namespace sbash
