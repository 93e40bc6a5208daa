#pragma once

// Verification protocols over embedded responses.
//
// Binary: a trusted node regenerates the response; accept iff
// cosine(candidate, reference) >= t*.
//
// Ternary: three responses are scored pairwise by two verifiers. Tier 1
// requires both verifiers to produce the same above-threshold pattern;
// tier 2 maps that pattern to a verdict.

#include <algorithm>
#include <array>
#include <cstddef>
#include <future>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/calibration.hpp"  // ResponseRecord
#include "semverd/core.hpp"
#include "semverd/embedding.hpp"
#include "semverd/error.hpp"

namespace semverd {

inline void require_threshold(double t_star) {
  if (!(t_star >= 0.0 && t_star <= 1.0)) {
    throw Error(Errc::InvalidThreshold, "threshold must lie in [0, 1], got " + std::to_string(t_star));
  }
}

// ---------------------------------------------------------------------------
// Binary

struct BinaryVerdict {
  bool accepted = false;
  SimilarityScore similarity = 0.0;
  double threshold = 0.0;
};

inline BinaryVerdict binary_decide(SimilarityScore similarity, double t_star) {
  require_threshold(t_star);
  return {similarity >= t_star, similarity, t_star};
}

inline BinaryVerdict binary_verify(std::span<const double> candidate, std::span<const double> reference,
                                   double t_star) {
  require_threshold(t_star);
  return binary_decide(cosine_similarity(candidate, reference), t_star);
}

inline BinaryVerdict binary_verify(const ResponseRecord& candidate, const ResponseRecord& reference,
                                   const EmbeddingProvider& provider, double t_star) {
  require_threshold(t_star);
  const auto c = embed(provider, candidate.text);
  const auto r = embed(provider, reference.text);
  return binary_decide(cosine_similarity(c, r), t_star);
}

inline nlohmann::json to_json(const BinaryVerdict& v) {
  return {{"accepted", v.accepted}, {"similarity", v.similarity}, {"threshold", v.threshold}};
}

// ---------------------------------------------------------------------------
// Ternary

/// Pair order used everywhere: (1,2), (1,3), (2,3). Indices here are 0-based.
inline constexpr std::array<std::pair<std::size_t, std::size_t>, 3> kResponsePairs{{{0, 1}, {0, 2}, {1, 2}}};

inline constexpr std::size_t pair_slot(std::size_t i, std::size_t j) noexcept {
  if (i > j) std::swap(i, j);
  return i == 0 ? (j == 1 ? 0 : 1) : 2;
}

struct PairPattern {
  std::array<SimilarityScore, 3> sims{};
  std::array<bool, 3> above{};

  friend bool operator==(const PairPattern&, const PairPattern&) = default;
};

inline PairPattern make_pattern(const std::array<SimilarityScore, 3>& sims, double t_star) {
  require_threshold(t_star);
  PairPattern p{sims, {}};
  for (std::size_t k = 0; k < 3; ++k) p.above[k] = sims[k] >= t_star;
  return p;
}

inline PairPattern pairwise_pattern(std::span<const double> e1, std::span<const double> e2,
                                    std::span<const double> e3, double t_star) {
  const std::array<std::span<const double>, 3> e{e1, e2, e3};
  std::array<SimilarityScore, 3> sims{};
  for (std::size_t k = 0; k < 3; ++k) {
    sims[k] = cosine_similarity(e[kResponsePairs[k].first], e[kResponsePairs[k].second]);
  }
  return make_pattern(sims, t_star);
}

inline PairPattern pairwise_pattern(const ResponseRecord& r1, const ResponseRecord& r2,
                                    const ResponseRecord& r3, const EmbeddingProvider& provider,
                                    double t_star) {
  require_threshold(t_star);
  const std::array<const ResponseRecord*, 3> rs{&r1, &r2, &r3};
  std::array<EmbeddingVector, 3> e;
  for (std::size_t i = 0; i < 3; ++i) {
    try {
      e[i] = embed(provider, rs[i]->text);
    } catch (const Error& err) {
      throw err.at(i + 1);
    }
  }
  return pairwise_pattern(e[0], e[1], e[2], t_star);
}

enum class TernaryOutcome { ValidAll, ValidPair, RejectAll, AmbiguousPair, NoVerifierConsensus };

inline std::string_view outcome_name(TernaryOutcome o) noexcept {
  switch (o) {
    case TernaryOutcome::ValidAll: return "ValidAll";
    case TernaryOutcome::ValidPair: return "ValidPair";
    case TernaryOutcome::RejectAll: return "RejectAll";
    case TernaryOutcome::AmbiguousPair: return "AmbiguousPair";
    case TernaryOutcome::NoVerifierConsensus: return "NoVerifierConsensus";
  }
  return "Unknown";
}

/// Accepted and flagged positions are 1-based; `accepted` is ascending.
struct Classification {
  TernaryOutcome outcome = TernaryOutcome::RejectAll;
  std::vector<std::size_t> accepted;
  std::optional<std::size_t> flagged;

  friend bool operator==(const Classification&, const Classification&) = default;
};

/// Total map from the three pair booleans to a verdict.
///   all three pairs      -> ValidAll
///   exactly one pair     -> ValidPair, the excluded response is flagged
///   no pair              -> RejectAll
///   exactly two pairs    -> AmbiguousPair: the response shared by both
///                           pairs plus its more similar partner are
///                           accepted; on equal similarity the higher
///                           index is flagged
/// `sims` only matters for the two-pair case.
inline Classification classify_pattern(const std::array<bool, 3>& above,
                                       const std::array<SimilarityScore, 3>& sims = {}) {
  const int count = int{above[0]} + int{above[1]} + int{above[2]};
  switch (count) {
    case 3: return {TernaryOutcome::ValidAll, {1, 2, 3}, std::nullopt};
    case 0: return {TernaryOutcome::RejectAll, {}, std::nullopt};
    case 1: {
      std::size_t k = 0;
      while (!above[k]) ++k;
      const auto [i, j] = kResponsePairs[k];
      return {TernaryOutcome::ValidPair, {i + 1, j + 1}, 3 - i - j + 1};
    }
    default: {
      std::size_t miss = 0;
      while (above[miss]) ++miss;
      const auto [x, y] = kResponsePairs[miss];  // x < y
      const std::size_t common = 3 - x - y;
      const double sx = sims[pair_slot(common, x)];
      const double sy = sims[pair_slot(common, y)];
      const std::size_t keep = sy > sx ? y : x;  // tie keeps the lower index x
      const std::size_t drop = keep == x ? y : x;
      std::vector<std::size_t> accepted{common + 1, keep + 1};
      if (accepted[0] > accepted[1]) std::swap(accepted[0], accepted[1]);
      return {TernaryOutcome::AmbiguousPair, std::move(accepted), drop + 1};
    }
  }
}

struct TernaryVerdict {
  TernaryOutcome outcome = TernaryOutcome::RejectAll;
  std::vector<std::size_t> accepted;
  std::optional<std::size_t> flagged;
  PairPattern verifier_a;
  PairPattern verifier_b;
  double threshold = 0.0;

  [[nodiscard]] bool accepts(std::size_t position) const {
    return std::find(accepted.begin(), accepted.end(), position) != accepted.end();
  }
};

/// Two-tier decision from the verifiers' patterns. Consensus compares the
/// boolean patterns only; verifier A's similarities break ambiguous ties.
inline TernaryVerdict decide_ternary(const PairPattern& a, const PairPattern& b, double t_star) {
  require_threshold(t_star);
  TernaryVerdict v;
  v.verifier_a = a;
  v.verifier_b = b;
  v.threshold = t_star;
  if (a.above != b.above) {
    v.outcome = TernaryOutcome::NoVerifierConsensus;
    return v;
  }
  auto c = classify_pattern(a.above, a.sims);
  v.outcome = c.outcome;
  v.accepted = std::move(c.accepted);
  v.flagged = c.flagged;
  return v;
}

/// Each verifier embeds and scores the three responses with its own
/// provider; the two computations run concurrently. Embedding errors name
/// the verifier.
inline TernaryVerdict ternary_verify(const ResponseRecord& r1, const ResponseRecord& r2,
                                     const ResponseRecord& r3, const EmbeddingProvider& verifier_a,
                                     const EmbeddingProvider& verifier_b, double t_star) {
  require_threshold(t_star);
  auto run = [&](const EmbeddingProvider& provider, std::string_view name) {
    try {
      return pairwise_pattern(r1, r2, r3, provider, t_star);
    } catch (const Error& e) {
      throw Error(e.code(), "verifier " + std::string(name) + " (" + provider.spec().identity + "): " +
                                e.what(),
                  e.index());
    }
  };
  auto future_b = std::async(std::launch::async, run, std::cref(verifier_b), "B");
  const auto pattern_a = run(verifier_a, "A");
  const auto pattern_b = future_b.get();
  return decide_ternary(pattern_a, pattern_b, t_star);
}

inline nlohmann::json to_json(const TernaryVerdict& v) {
  return {{"outcome", outcome_name(v.outcome)},
          {"accepted", v.accepted},
          {"flagged", v.flagged ? nlohmann::json(*v.flagged) : nlohmann::json(nullptr)},
          {"sims_a", v.verifier_a.sims},
          {"sims_b", v.verifier_b.sims},
          {"threshold", v.threshold}};
}

}  // namespace semverd
