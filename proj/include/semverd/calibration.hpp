#pragma once

// Offline threshold calibration: build labeled response pairs, score them
// with an embedding provider, sweep a threshold grid and pick t*.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/core.hpp"
#include "semverd/embedding.hpp"
#include "semverd/error.hpp"
#include "semverd/rng.hpp"

namespace semverd {

struct ResponseRecord {
  std::string query;
  std::string text;
  std::string node_id;
  std::string model;

  friend bool operator==(const ResponseRecord&, const ResponseRecord&) = default;
};

enum class PairLabel { Valid, Invalid };
enum class PairingKind { SameModel, CrossModel, VsRandom };

inline std::string_view pairing_kind_name(PairingKind k) noexcept {
  switch (k) {
    case PairingKind::SameModel: return "same-model";
    case PairingKind::CrossModel: return "cross-model";
    case PairingKind::VsRandom: return "vs-random";
  }
  return "unknown";
}

/// Invariant: kind == VsRandom <=> label == Invalid. Use make_pair_of to
/// construct.
struct LabeledPair {
  ResponseRecord left;
  ResponseRecord right;
  PairLabel label = PairLabel::Valid;
  PairingKind kind = PairingKind::SameModel;
};

inline LabeledPair make_pair_of(ResponseRecord left, ResponseRecord right, PairingKind kind) {
  const auto label = kind == PairingKind::VsRandom ? PairLabel::Invalid : PairLabel::Valid;
  return {std::move(left), std::move(right), label, kind};
}

// ---------------------------------------------------------------------------
// Corpus

/// One line of a corpus file.
struct CorpusRecord {
  std::string question_id;
  std::string model;
  std::string response;
  bool random = false;  // "source": "random"
};

struct ModelResponses {
  std::string model;
  std::vector<std::string> responses;
};

struct QuestionResponses {
  std::string question_id;
  std::vector<ModelResponses> models;  // first-appearance order
  std::vector<std::string> random;
};

/// Groups records by question, preserving first-appearance order of
/// questions, models and responses.
inline std::vector<QuestionResponses> group_corpus(std::span<const CorpusRecord> records) {
  std::vector<QuestionResponses> out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& r : records) {
    auto [it, fresh] = index.try_emplace(r.question_id, out.size());
    if (fresh) out.push_back({r.question_id, {}, {}});
    auto& q = out[it->second];
    if (r.random) {
      q.random.push_back(r.response);
      continue;
    }
    auto m = std::find_if(q.models.begin(), q.models.end(),
                          [&](const ModelResponses& mr) { return mr.model == r.model; });
    if (m == q.models.end()) {
      q.models.push_back({r.model, {}});
      m = std::prev(q.models.end());
    }
    m->responses.push_back(r.response);
  }
  return out;
}

/// JSONL {"question_id", "model", "response", "source": "model"|"random"}.
inline std::vector<CorpusRecord> load_corpus(std::istream& in) {
  std::vector<CorpusRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, e.what(), line_no);
    }
    for (const char* key : {"question_id", "model", "response", "source"}) {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string()) {
        throw Error(Errc::ParseError, std::string("missing string field '") + key + "'", line_no);
      }
    }
    const auto source = rec["source"].get<std::string>();
    if (source != "model" && source != "random") {
      throw Error(Errc::ParseError, "source must be \"model\" or \"random\", got \"" + source + "\"",
                  line_no);
    }
    out.push_back({rec["question_id"].get<std::string>(), rec["model"].get<std::string>(),
                   rec["response"].get<std::string>(), source == "random"});
  }
  return out;
}

inline nlohmann::json to_json(const CorpusRecord& r) {
  return {{"question_id", r.question_id},
          {"model", r.model},
          {"response", r.response},
          {"source", r.random ? "random" : "model"}};
}

struct PairingOptions {
  /// Responses used per model per question; 0 means all of them. A model
  /// with fewer than max(2, per_model) responses is an error.
  std::size_t per_model = 0;
};

/// Same-model pairs (unordered combinations within each model), cross-model
/// pairs (every response of model i against every response of model j > i)
/// and vs-random pairs (every model response against every random response),
/// per question.
inline std::vector<LabeledPair> generate_labeled_pairs(std::span<const QuestionResponses> corpus,
                                                       const PairingOptions& opts = {}) {
  std::vector<LabeledPair> pairs;
  for (const auto& q : corpus) {
    if (q.models.empty()) {
      throw Error(Errc::InsufficientResponses, "question '" + q.question_id + "' has no model responses");
    }
    const std::size_t need = std::max<std::size_t>(2, opts.per_model);
    std::vector<std::vector<ResponseRecord>> used;
    for (const auto& m : q.models) {
      if (m.responses.size() < need) {
        throw Error(Errc::InsufficientResponses,
                    "question '" + q.question_id + "' model '" + m.model + "' has " +
                        std::to_string(m.responses.size()) + " responses, needs " +
                        std::to_string(need));
      }
      const std::size_t take = opts.per_model ? opts.per_model : m.responses.size();
      auto& records = used.emplace_back();
      for (std::size_t i = 0; i < take; ++i) {
        records.push_back({q.question_id, m.responses[i], m.model + "#" + std::to_string(i), m.model});
      }
    }
    std::vector<ResponseRecord> randoms;
    for (std::size_t i = 0; i < q.random.size(); ++i) {
      randoms.push_back({q.question_id, q.random[i], "random#" + std::to_string(i), "random"});
    }

    for (const auto& rs : used) {
      for (std::size_t i = 0; i < rs.size(); ++i) {
        for (std::size_t j = i + 1; j < rs.size(); ++j) {
          pairs.push_back(make_pair_of(rs[i], rs[j], PairingKind::SameModel));
        }
      }
    }
    for (std::size_t a = 0; a < used.size(); ++a) {
      for (std::size_t b = a + 1; b < used.size(); ++b) {
        for (const auto& x : used[a]) {
          for (const auto& y : used[b]) pairs.push_back(make_pair_of(x, y, PairingKind::CrossModel));
        }
      }
    }
    for (const auto& rs : used) {
      for (const auto& x : rs) {
        for (const auto& r : randoms) pairs.push_back(make_pair_of(x, r, PairingKind::VsRandom));
      }
    }
  }
  return pairs;
}

// ---------------------------------------------------------------------------
// Scoring

/// Minimal sweep input.
struct LabeledScore {
  double score = 0.0;
  PairLabel label = PairLabel::Valid;
};

struct ScoredPair {
  LabeledPair pair;
  SimilarityScore score = 0.0;

  [[nodiscard]] LabeledScore labeled() const { return {score, pair.label}; }
};

/// Embeds both sides of every pair and scores them by cosine similarity.
/// Each distinct text is embedded once. Errors carry the pair index.
inline std::vector<ScoredPair> score_pairs(std::span<const LabeledPair> pairs,
                                           const EmbeddingProvider& provider) {
  std::unordered_map<std::string, EmbeddingVector> seen;
  auto lookup = [&](const std::string& text) -> const EmbeddingVector& {
    auto it = seen.find(text);
    if (it == seen.end()) it = seen.emplace(text, embed(provider, text)).first;
    return it->second;
  };
  std::vector<ScoredPair> out;
  out.reserve(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    try {
      const auto& a = lookup(pairs[i].left.text);
      const auto& b = lookup(pairs[i].right.text);
      out.push_back({pairs[i], cosine_similarity(a, b)});
    } catch (const Error& e) {
      throw e.at(i);
    }
  }
  return out;
}

inline std::vector<LabeledScore> labeled_scores(std::span<const ScoredPair> scored) {
  std::vector<LabeledScore> out;
  out.reserve(scored.size());
  for (const auto& s : scored) out.push_back(s.labeled());
  return out;
}

// ---------------------------------------------------------------------------
// Threshold sweep

struct ThresholdGrid {
  double start = 0.0;
  double stop = 1.0;
  double step = 0.01;

  friend bool operator==(const ThresholdGrid&, const ThresholdGrid&) = default;
};

inline constexpr std::size_t kMaxGridPoints = 10'000'000;

/// start + i*step for i = 0.. while <= stop (with 1e-9 relative slack on the
/// count), each point rounded to 12 decimals so 0.29 is the double nearest
/// to 0.29 rather than 29 * 0.01.
inline std::vector<double> grid_points(const ThresholdGrid& grid) {
  if (!std::isfinite(grid.start) || !std::isfinite(grid.stop) || !std::isfinite(grid.step) ||
      !(grid.step > 0.0) || grid.start > grid.stop) {
    throw Error(Errc::BadGrid, "grid needs finite start <= stop and step > 0");
  }
  const double span = (grid.stop - grid.start) / grid.step;
  if (span + 1.0 > static_cast<double>(kMaxGridPoints)) {
    throw Error(Errc::BadGrid, "grid has too many points");
  }
  const auto count = static_cast<std::size_t>(std::floor(span + 1e-9)) + 1;
  std::vector<double> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const double t = grid.start + static_cast<double>(i) * grid.step;
    out.push_back(std::round(t * 1e12) / 1e12);
  }
  return out;
}

struct ConfusionMatrix {
  std::uint64_t tp = 0;
  std::uint64_t fp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fn = 0;

  [[nodiscard]] std::uint64_t total() const noexcept { return tp + fp + tn + fn; }
  [[nodiscard]] std::uint64_t correct() const noexcept { return tp + tn; }

  friend bool operator==(const ConfusionMatrix&, const ConfusionMatrix&) = default;
};

struct SweepPoint {
  double threshold = 0.0;
  ConfusionMatrix cm;
};

/// Tallies `score >= t` (predict valid) against the labels for one t.
inline ConfusionMatrix confusion_at(std::span<const LabeledScore> scores, double t) {
  ConfusionMatrix cm;
  for (const auto& s : scores) {
    const bool predicted_valid = s.score >= t;
    if (s.label == PairLabel::Valid) {
      ++(predicted_valid ? cm.tp : cm.fn);
    } else {
      ++(predicted_valid ? cm.fp : cm.tn);
    }
  }
  return cm;
}

/// Confusion matrix at every grid threshold. Positive class is "valid";
/// a score equal to the threshold counts as valid.
inline std::vector<SweepPoint> sweep_thresholds(std::span<const LabeledScore> scores,
                                                const ThresholdGrid& grid) {
  if (scores.empty()) throw Error(Errc::EmptyInput, "no scored pairs to sweep");
  const auto thresholds = grid_points(grid);

  std::vector<double> valid, invalid;
  for (const auto& s : scores) (s.label == PairLabel::Valid ? valid : invalid).push_back(s.score);
  std::sort(valid.begin(), valid.end());
  std::sort(invalid.begin(), invalid.end());
  auto at_or_above = [](const std::vector<double>& sorted, double t) {
    return static_cast<std::uint64_t>(sorted.end() - std::lower_bound(sorted.begin(), sorted.end(), t));
  };

  std::vector<SweepPoint> out;
  out.reserve(thresholds.size());
  for (double t : thresholds) {
    SweepPoint p{t, {}};
    p.cm.tp = at_or_above(valid, t);
    p.cm.fn = valid.size() - p.cm.tp;
    p.cm.fp = at_or_above(invalid, t);
    p.cm.tn = invalid.size() - p.cm.fp;
    out.push_back(p);
  }
  return out;
}

inline std::vector<SweepPoint> sweep_thresholds(std::span<const ScoredPair> scored,
                                                const ThresholdGrid& grid) {
  const auto scores = labeled_scores(scored);
  return sweep_thresholds(std::span<const LabeledScore>(scores), grid);
}

struct Metrics {
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Harmonic mean; 0 when p + r == 0.
inline double f1_score(double precision, double recall) {
  const double s = precision + recall;
  return s > 0.0 ? 2.0 * precision * recall / s : 0.0;
}

/// Precision, recall and F1 are defined as 0 when their denominator is 0.
inline Metrics confusion_metrics(const ConfusionMatrix& cm) {
  if (cm.total() == 0) throw Error(Errc::EmptyMatrix, "confusion matrix has no entries");
  auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  Metrics m;
  m.accuracy = static_cast<double>(cm.correct()) / static_cast<double>(cm.total());
  m.precision = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fp));
  m.recall = ratio(static_cast<double>(cm.tp), static_cast<double>(cm.tp + cm.fn));
  m.f1 = f1_score(m.precision, m.recall);
  return m;
}

struct CalibratedThreshold {
  double t_star = 0.0;
  double grid_step = 0.0;  // spacing of the swept grid, 0 for a single point
  ConfusionMatrix training_cm;
  Metrics training;
};

/// Highest-accuracy threshold. Ties resolve to the lower median of the
/// contiguous run of maximal-accuracy grid points that starts at the
/// smallest maximizer, which keeps t* away from the edge of either class.
inline CalibratedThreshold select_threshold(std::span<const SweepPoint> sweep) {
  if (sweep.empty()) throw Error(Errc::EmptySweep, "no sweep points");
  const auto total = sweep.front().cm.total();
  for (const auto& p : sweep) {
    if (p.cm.total() != total) throw Error(Errc::BadParams, "sweep points disagree on pair count");
  }
  std::size_t first = 0;
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    if (sweep[i].cm.correct() > sweep[first].cm.correct()) first = i;
  }
  std::size_t last = first;
  while (last + 1 < sweep.size() && sweep[last + 1].cm.correct() == sweep[first].cm.correct()) ++last;
  const auto& chosen = sweep[first + (last - first) / 2];
  const double step = sweep.size() > 1 ? sweep[1].threshold - sweep[0].threshold : 0.0;
  return {chosen.threshold, step, chosen.cm, confusion_metrics(chosen.cm)};
}

// ---------------------------------------------------------------------------
// Train/test split and the full pipeline

struct SplitOptions {
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
};

struct CorpusSplit {
  std::vector<QuestionResponses> train;
  std::vector<QuestionResponses> test;
};

/// Seeded shuffle of whole questions, so every pair of a question lands on
/// the same side. The train side gets round(fraction * n) questions, at
/// least one.
inline CorpusSplit split_corpus(std::vector<QuestionResponses> questions, const SplitOptions& opts) {
  if (!(opts.train_fraction > 0.0 && opts.train_fraction <= 1.0)) {
    throw Error(Errc::BadParams, "train fraction must be in (0, 1]");
  }
  Rng rng(opts.seed);
  rng.shuffle(questions);
  const auto n = questions.size();
  auto n_train = static_cast<std::size_t>(std::llround(opts.train_fraction * static_cast<double>(n)));
  n_train = std::clamp<std::size_t>(n_train, std::min<std::size_t>(n, 1), n);
  CorpusSplit split;
  split.train.assign(std::make_move_iterator(questions.begin()),
                     std::make_move_iterator(questions.begin() + static_cast<std::ptrdiff_t>(n_train)));
  split.test.assign(std::make_move_iterator(questions.begin() + static_cast<std::ptrdiff_t>(n_train)),
                    std::make_move_iterator(questions.end()));
  return split;
}

struct CalibrationOptions {
  ThresholdGrid grid;
  SplitOptions split;
  PairingOptions pairing;
};

struct CalibrationReport {
  CalibrationOptions options;
  std::size_t train_questions = 0;
  std::size_t test_questions = 0;
  std::size_t train_pairs = 0;
  std::size_t test_pairs = 0;
  std::vector<SweepPoint> sweep;
  CalibratedThreshold chosen;
  std::optional<ConfusionMatrix> test_cm;
  std::optional<Metrics> test;
};

inline CalibrationReport calibrate(std::span<const CorpusRecord> corpus,
                                   const EmbeddingProvider& provider,
                                   const CalibrationOptions& opts = {}) {
  grid_points(opts.grid);  // fail on a bad grid before any embedding work
  auto split = split_corpus(group_corpus(corpus), opts.split);
  const auto train_pairs = generate_labeled_pairs(split.train, opts.pairing);
  const auto test_pairs = generate_labeled_pairs(split.test, opts.pairing);

  CalibrationReport report;
  report.options = opts;
  report.train_questions = split.train.size();
  report.test_questions = split.test.size();
  report.train_pairs = train_pairs.size();
  report.test_pairs = test_pairs.size();

  const auto train_scored = score_pairs(train_pairs, provider);
  report.sweep = sweep_thresholds(std::span<const ScoredPair>(train_scored), opts.grid);
  report.chosen = select_threshold(report.sweep);

  if (!test_pairs.empty()) {
    const auto test_scores = labeled_scores(score_pairs(test_pairs, provider));
    report.test_cm = confusion_at(test_scores, report.chosen.t_star);
    report.test = confusion_metrics(*report.test_cm);
  }
  return report;
}

inline nlohmann::json to_json(const ConfusionMatrix& cm) {
  return {{"tp", cm.tp}, {"fp", cm.fp}, {"tn", cm.tn}, {"fn", cm.fn}};
}

inline nlohmann::json to_json(const Metrics& m) {
  return {{"accuracy", m.accuracy}, {"precision", m.precision}, {"recall", m.recall}, {"f1", m.f1}};
}

inline nlohmann::json to_json(const CalibrationReport& r) {
  nlohmann::json sweep = nlohmann::json::array();
  for (const auto& p : r.sweep) {
    auto row = to_json(p.cm);
    row["threshold"] = p.threshold;
    const auto m = confusion_metrics(p.cm);
    row["accuracy"] = m.accuracy;
    row["precision"] = m.precision;
    row["recall"] = m.recall;
    row["f1"] = m.f1;
    sweep.push_back(std::move(row));
  }
  nlohmann::json out{
      {"grid", {{"start", r.options.grid.start}, {"stop", r.options.grid.stop}, {"step", r.options.grid.step}}},
      {"split_seed", r.options.split.seed},
      {"train_fraction", r.options.split.train_fraction},
      {"train_questions", r.train_questions},
      {"test_questions", r.test_questions},
      {"train_pairs", r.train_pairs},
      {"test_pairs", r.test_pairs},
      {"t_star", r.chosen.t_star},
      {"train", {{"confusion", to_json(r.chosen.training_cm)}, {"metrics", to_json(r.chosen.training)}}},
      {"sweep", std::move(sweep)},
  };
  if (r.test) {
    out["test"] = {{"confusion", to_json(*r.test_cm)}, {"metrics", to_json(*r.test)}};
  } else {
    out["test"] = nullptr;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Synthetic corpus

/// Text corpus whose mock-embedding similarities are controlled: every model
/// response of a question contains the question's `core_tokens` shared words
/// plus u_i private words, so two responses score
///   C / sqrt((C + u_i)(C + u_j)) = sqrt(a_i a_j),   a_i = C / (C + u_i).
/// a_i is drawn from N(valid_mean, sqrt(2) * sigma), giving pair scores near
/// valid_mean with spread near sigma. Random responses use words no other
/// response contains, so they score near 0 up to hash-collision noise.
struct SyntheticCorpusParams {
  std::size_t questions = 200;
  std::vector<std::string> models{"model-a", "model-b"};
  std::size_t per_model = 3;
  std::size_t randoms = 3;
  double valid_mean = 0.7;
  double sigma = 0.05;
  std::size_t core_tokens = 60;
};

inline std::vector<CorpusRecord> synthesize_corpus(const SyntheticCorpusParams& p, std::uint64_t seed) {
  if (!(p.valid_mean > 0.0 && p.valid_mean <= 1.0) || !(p.sigma >= 0.0) || p.core_tokens == 0 ||
      p.models.empty()) {
    throw Error(Errc::BadParams, "synthetic corpus needs valid_mean in (0,1], sigma >= 0, tokens > 0");
  }
  Rng rng(seed);
  const auto core = static_cast<double>(p.core_tokens);
  auto words = [](const std::string& prefix, std::size_t count) {
    std::vector<std::string> w;
    for (std::size_t i = 0; i < count; ++i) w.push_back(prefix + "w" + std::to_string(i));
    return w;
  };
  auto join = [&rng](std::vector<std::string> tokens) {
    rng.shuffle(tokens);
    std::string text;
    for (const auto& t : tokens) {
      if (!text.empty()) text.push_back(' ');
      text += t;
    }
    return text;
  };
  const auto typical_len = static_cast<std::size_t>(std::llround(core / p.valid_mean));

  std::vector<CorpusRecord> out;
  for (std::size_t q = 0; q < p.questions; ++q) {
    const std::string qid = "q" + std::to_string(q);
    const auto shared = words(qid + "c", p.core_tokens);
    std::size_t serial = 0;
    for (const auto& model : p.models) {
      for (std::size_t r = 0; r < p.per_model; ++r, ++serial) {
        const double a = std::clamp(rng.normal(p.valid_mean, std::sqrt(2.0) * p.sigma), 0.05, 1.0);
        const auto extra = static_cast<std::size_t>(std::llround(core * (1.0 / a - 1.0)));
        auto tokens = shared;
        for (auto& w : words(qid + "r" + std::to_string(serial) + "u", extra)) tokens.push_back(std::move(w));
        out.push_back({qid, model, join(std::move(tokens)), false});
      }
    }
    for (std::size_t r = 0; r < p.randoms; ++r) {
      out.push_back({qid, "arena", join(words(qid + "x" + std::to_string(r) + "u", typical_len)), true});
    }
  }
  return out;
}

}  // namespace semverd
