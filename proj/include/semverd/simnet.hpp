#pragma once

// Deterministic simulated network for the verification protocols. Responses
// are synthesized directly as embeddings around a per-query anchor, so the
// similarity geometry is controlled exactly:
//
//   honest        unit vector at cosine ~ mu_h from the anchor
//   wrong-model   unit vector at cosine ~ mu_a from the anchor
//   random        independent random unit vector
//   echo-copycat  bitwise copy of an earlier responder's vector
//
// Everything derives from the scenario seed; a run is a pure function of
// its ScenarioConfig.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <ostream>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/core.hpp"
#include "semverd/embedding.hpp"
#include "semverd/error.hpp"
#include "semverd/protocol.hpp"
#include "semverd/rng.hpp"

namespace semverd {

enum class NodeRole { Prover, Validator, Verifier, TrustedReference };
enum class Behavior { Honest, WrongModel, RandomResponder, EchoCopycat };
enum class ProtocolKind { Binary, Ternary };

inline std::string_view role_name(NodeRole r) noexcept {
  switch (r) {
    case NodeRole::Prover: return "prover";
    case NodeRole::Validator: return "validator";
    case NodeRole::Verifier: return "verifier";
    case NodeRole::TrustedReference: return "trusted-reference";
  }
  return "unknown";
}

inline std::string_view behavior_name(Behavior b) noexcept {
  switch (b) {
    case Behavior::Honest: return "honest";
    case Behavior::WrongModel: return "wrong-model";
    case Behavior::RandomResponder: return "random-responder";
    case Behavior::EchoCopycat: return "echo-copycat";
  }
  return "unknown";
}

inline std::string_view protocol_name(ProtocolKind p) noexcept {
  return p == ProtocolKind::Binary ? "binary" : "ternary";
}

struct NodeSpec {
  std::string id;
  NodeRole role = NodeRole::Prover;
  Behavior behavior = Behavior::Honest;
  /// Verifiers: scale of the perturbation applied to their view of each
  /// response, modelling bitwise-different embeddings on other hardware.
  double noise = 0.0;
  /// Echo-copycat: id of the earlier responder whose vector is copied.
  std::string copy_of;
  /// Verifiers carry one; filled with the scenario's mock spec when absent.
  std::optional<EmbeddingProviderSpec> provider;
};

struct SynthesisParams {
  double mu_h = 0.7;
  double mu_a = 0.0;
  double sigma = 0.02;
};

struct ScenarioConfig {
  std::uint64_t seed = 0;
  ProtocolKind protocol = ProtocolKind::Ternary;
  double t_star = 0.5;
  std::size_t dimension = kDefaultMockDimension;
  std::size_t queries = 100;
  SynthesisParams synthesis;
  std::vector<NodeSpec> nodes;
};

inline bool is_responder(NodeRole r) noexcept {
  return r == NodeRole::Prover || r == NodeRole::Validator;
}

/// Throws ConfigInvalid listing every problem as "field: message".
inline void validate_config(const ScenarioConfig& cfg) {
  std::vector<std::string> problems;
  auto bad = [&](std::string field, std::string msg) { problems.push_back(field + ": " + msg); };

  if (!(cfg.t_star >= 0.0 && cfg.t_star <= 1.0)) bad("t_star", "must lie in [0, 1]");
  if (cfg.dimension < 2) bad("dimension", "must be >= 2");
  if (cfg.queries == 0) bad("queries", "must be >= 1");
  if (!(cfg.synthesis.mu_h >= -1.0 && cfg.synthesis.mu_h <= 1.0)) bad("synthesis.mu_h", "must lie in [-1, 1]");
  if (!(cfg.synthesis.mu_a >= -1.0 && cfg.synthesis.mu_a <= 1.0)) bad("synthesis.mu_a", "must lie in [-1, 1]");
  if (!(cfg.synthesis.sigma >= 0.0)) bad("synthesis.sigma", "must be >= 0");

  std::set<std::string> ids;
  std::set<std::string> earlier_responders;
  std::size_t responders = 0, verifiers = 0, references = 0;
  for (std::size_t i = 0; i < cfg.nodes.size(); ++i) {
    const auto& n = cfg.nodes[i];
    const std::string field = "nodes[" + std::to_string(i) + "]";
    if (n.id.empty()) bad(field + ".id", "must be non-empty");
    if (!ids.insert(n.id).second) bad(field + ".id", "duplicate id '" + n.id + "'");
    if (!(n.noise >= 0.0)) bad(field + ".noise", "must be >= 0");
    switch (n.role) {
      case NodeRole::Prover:
      case NodeRole::Validator: ++responders; break;
      case NodeRole::Verifier: ++verifiers; break;
      case NodeRole::TrustedReference:
        ++references;
        if (n.behavior != Behavior::Honest) bad(field + ".behavior", "a trusted reference must be honest");
        break;
    }
    if (n.behavior == Behavior::EchoCopycat) {
      if (!is_responder(n.role)) bad(field + ".behavior", "only provers/validators can copy");
      if (!earlier_responders.count(n.copy_of)) {
        bad(field + ".copy_of", "must name an earlier prover/validator, got '" + n.copy_of + "'");
      }
    }
    if (is_responder(n.role)) earlier_responders.insert(n.id);
  }
  if (cfg.protocol == ProtocolKind::Ternary) {
    if (responders != 3) bad("nodes", "ternary needs exactly 3 provers/validators, found " + std::to_string(responders));
    if (verifiers != 2) bad("nodes", "ternary needs exactly 2 verifiers, found " + std::to_string(verifiers));
  } else {
    if (responders < 1) bad("nodes", "binary needs at least 1 prover");
    if (references != 1) bad("nodes", "binary needs exactly 1 trusted-reference, found " + std::to_string(references));
  }
  if (!problems.empty()) {
    std::string msg;
    for (const auto& p : problems) msg += (msg.empty() ? "" : "; ") + p;
    throw Error(Errc::ConfigInvalid, msg);
  }
}

// ---------------------------------------------------------------------------
// Synthesis

inline EmbeddingVector random_unit_vector(std::size_t dimension, Rng& rng) {
  std::vector<double> v(dimension);
  for (;;) {
    for (double& x : v) x = rng.normal();
    if (l2_norm(v) > 1e-6) return l2_normalize(std::move(v));
  }
}

/// Unit vector orthogonal to the unit vector `anchor`.
inline EmbeddingVector random_orthogonal(const EmbeddingVector& anchor, Rng& rng) {
  std::vector<double> v(anchor.dimension());
  for (;;) {
    for (double& x : v) x = rng.normal();
    const double along = dot(v, anchor);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] -= along * anchor[i];
    if (l2_norm(v) > 1e-6) return l2_normalize(std::move(v));
  }
}

/// anchor*cos(theta) + o*sin(theta), cos(theta) = mu + sigma*z with z a
/// standard normal truncated to [-4, 4], then clamped to [-1, 1].
inline EmbeddingVector vector_at_cosine(const EmbeddingVector& anchor, double mu, double sigma, Rng& rng) {
  if (!(mu >= -1.0 && mu <= 1.0) || !(sigma >= 0.0)) {
    throw Error(Errc::BadParams, "target cosine must lie in [-1, 1] and jitter must be >= 0");
  }
  double c = mu;
  if (sigma > 0.0) c += sigma * std::clamp(rng.normal(), -4.0, 4.0);
  c = std::clamp(c, -1.0, 1.0);
  if (c == 1.0) return anchor;
  const auto o = random_orthogonal(anchor, rng);
  const double s = std::sqrt(std::max(0.0, 1.0 - c * c));
  std::vector<double> v(anchor.dimension());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = anchor[i] * c + o[i] * s;
  return l2_normalize(std::move(v));
}

/// One node's response embedding for a query anchor.
inline EmbeddingVector synth_response(Behavior behavior, const EmbeddingVector& anchor,
                                      const SynthesisParams& params, Rng& rng,
                                      const EmbeddingVector* copy_source = nullptr) {
  if (!(params.sigma >= 0.0)) throw Error(Errc::BadParams, "sigma must be >= 0");
  if (!(std::abs(l2_norm(anchor) - 1.0) <= 1e-9)) throw Error(Errc::BadParams, "anchor must be unit norm");
  switch (behavior) {
    case Behavior::Honest: return vector_at_cosine(anchor, params.mu_h, params.sigma, rng);
    case Behavior::WrongModel: return vector_at_cosine(anchor, params.mu_a, params.sigma, rng);
    case Behavior::RandomResponder: return random_unit_vector(anchor.dimension(), rng);
    case Behavior::EchoCopycat:
      if (copy_source == nullptr) throw Error(Errc::BadParams, "echo-copycat needs a source response");
      return *copy_source;
  }
  throw Error(Errc::BadParams, "unknown behavior");
}

/// A verifier's view of a response: the vector plus isotropic noise of
/// expected norm `noise`, renormalized.
inline EmbeddingVector perturb(const EmbeddingVector& v, double noise, Rng& rng) {
  if (noise == 0.0) return v;
  const double per_component = noise / std::sqrt(static_cast<double>(v.dimension()));
  std::vector<double> out(v.raw());
  for (double& x : out) x += per_component * rng.normal();
  return l2_normalize(std::move(out));
}

// ---------------------------------------------------------------------------
// Running a scenario

struct QueryVerdict {
  std::size_t query = 0;
  /// Responder ids; position i here is response i+1 in the verdict.
  std::vector<std::string> responders;
  std::optional<TernaryVerdict> ternary;
  std::vector<BinaryVerdict> binary;  // one per responder

  [[nodiscard]] bool accepted(std::size_t position) const {
    if (ternary) return ternary->accepts(position + 1);
    return binary.at(position).accepted;
  }
};

struct DetectionSummary {
  std::size_t queries = 0;
  std::size_t adversary_responses = 0;
  std::size_t flagged_adversary = 0;
  std::size_t honest_responses = 0;
  std::size_t flagged_honest = 0;
  std::size_t consensus_failures = 0;
  /// Unset when there were no adversarial (resp. honest) responses.
  std::optional<double> detection_rate;
  std::optional<double> false_flag_rate;
  double consensus_failure_rate = 0.0;

  friend bool operator==(const DetectionSummary&, const DetectionSummary&) = default;
};

struct ExperimentResult {
  ProtocolKind protocol = ProtocolKind::Ternary;
  std::vector<QueryVerdict> verdicts;
  std::vector<std::string> adversaries;
  DetectionSummary summary;
};

/// A response counts as flagged when the protocol did not accept it, which
/// covers an explicit flag, RejectAll and NoVerifierConsensus.
inline DetectionSummary measure_detection(std::span<const QueryVerdict> verdicts,
                                          const std::set<std::string>& adversary_ids) {
  if (verdicts.empty()) throw Error(Errc::EmptyResult, "no verdicts to measure");
  DetectionSummary s;
  s.queries = verdicts.size();
  for (const auto& v : verdicts) {
    if (v.ternary && v.ternary->outcome == TernaryOutcome::NoVerifierConsensus) ++s.consensus_failures;
    for (std::size_t i = 0; i < v.responders.size(); ++i) {
      const bool adversary = adversary_ids.count(v.responders[i]) > 0;
      const bool flagged = !v.accepted(i);
      if (adversary) {
        ++s.adversary_responses;
        if (flagged) ++s.flagged_adversary;
      } else {
        ++s.honest_responses;
        if (flagged) ++s.flagged_honest;
      }
    }
  }
  if (s.adversary_responses > 0) {
    s.detection_rate = static_cast<double>(s.flagged_adversary) / static_cast<double>(s.adversary_responses);
  }
  if (s.honest_responses > 0) {
    s.false_flag_rate = static_cast<double>(s.flagged_honest) / static_cast<double>(s.honest_responses);
  }
  s.consensus_failure_rate = static_cast<double>(s.consensus_failures) / static_cast<double>(s.queries);
  return s;
}

inline ExperimentResult run_scenario(const ScenarioConfig& cfg) {
  validate_config(cfg);

  std::vector<const NodeSpec*> responders, verifiers;
  const NodeSpec* reference = nullptr;
  for (const auto& n : cfg.nodes) {
    if (is_responder(n.role)) responders.push_back(&n);
    if (n.role == NodeRole::Verifier) verifiers.push_back(&n);
    if (n.role == NodeRole::TrustedReference) reference = &n;
  }

  ExperimentResult result;
  result.protocol = cfg.protocol;
  std::set<std::string> adversaries;
  for (const auto* n : responders) {
    if (n->behavior != Behavior::Honest) adversaries.insert(n->id);
  }
  result.adversaries.assign(adversaries.begin(), adversaries.end());

  std::vector<std::string> ids;
  for (const auto* n : responders) ids.push_back(n->id);

  for (std::size_t q = 0; q < cfg.queries; ++q) {
    Rng rng = Rng::derive(cfg.seed, q);
    const auto anchor = random_unit_vector(cfg.dimension, rng);

    std::vector<EmbeddingVector> responses;
    std::unordered_map<std::string, std::size_t> position;
    for (const auto* n : responders) {
      const EmbeddingVector* source = nullptr;
      if (n->behavior == Behavior::EchoCopycat) source = &responses[position.at(n->copy_of)];
      auto v = synth_response(n->behavior, anchor, cfg.synthesis, rng, source);
      position[n->id] = responses.size();
      responses.push_back(std::move(v));
    }

    QueryVerdict verdict{q, ids, std::nullopt, {}};
    if (cfg.protocol == ProtocolKind::Binary) {
      const auto ref = synth_response(reference->behavior, anchor, cfg.synthesis, rng);
      for (const auto& r : responses) verdict.binary.push_back(binary_verify(r, ref, cfg.t_star));
    } else {
      std::array<PairPattern, 2> patterns;
      for (std::size_t k = 0; k < 2; ++k) {
        // Per-verifier stream so a verifier's noise does not shift the other.
        Rng view_rng = Rng::derive(cfg.seed ^ mix64(q), k + 1);
        std::array<EmbeddingVector, 3> view;
        for (std::size_t i = 0; i < 3; ++i) view[i] = perturb(responses[i], verifiers[k]->noise, view_rng);
        patterns[k] = pairwise_pattern(view[0], view[1], view[2], cfg.t_star);
      }
      verdict.ternary = decide_ternary(patterns[0], patterns[1], cfg.t_star);
    }
    result.verdicts.push_back(std::move(verdict));
  }
  result.summary = measure_detection(result.verdicts, adversaries);
  return result;
}

// ---------------------------------------------------------------------------
// JSON

namespace detail {

template <typename Enum, std::size_t N, typename NameFn>
Enum parse_enum(const std::string& text, const std::array<Enum, N>& values, NameFn name,
                const std::string& field) {
  for (auto v : values) {
    if (name(v) == text) return v;
  }
  throw Error(Errc::ConfigInvalid, field + ": unknown value '" + text + "'");
}

inline std::optional<double> opt_number(const nlohmann::json& j, const char* key, const std::string& field) {
  if (!j.contains(key)) return std::nullopt;
  if (!j[key].is_number()) throw Error(Errc::ConfigInvalid, field + key + ": must be a number");
  return j[key].get<double>();
}

inline std::optional<std::string> opt_string(const nlohmann::json& j, const char* key, const std::string& field) {
  if (!j.contains(key)) return std::nullopt;
  if (!j[key].is_string()) throw Error(Errc::ConfigInvalid, field + key + ": must be a string");
  return j[key].get<std::string>();
}

inline nlohmann::json rate_json(const std::optional<double>& r) {
  return r ? nlohmann::json(*r) : nlohmann::json(nullptr);
}

}  // namespace detail

/// Parses a scenario config object. "seed", "protocol" and "nodes" are
/// required; everything else has a default.
inline ScenarioConfig parse_scenario(const nlohmann::json& j) {
  using detail::opt_number;
  using detail::opt_string;
  if (!j.is_object()) throw Error(Errc::ConfigInvalid, "config: must be a JSON object");
  ScenarioConfig cfg;

  if (!j.contains("seed")) throw Error(Errc::ConfigInvalid, "seed: required");
  if (!j["seed"].is_number_integer()) throw Error(Errc::ConfigInvalid, "seed: must be an integer");
  cfg.seed = j["seed"].is_number_unsigned() ? j["seed"].get<std::uint64_t>()
                                            : static_cast<std::uint64_t>(j["seed"].get<std::int64_t>());

  const auto protocol = opt_string(j, "protocol", "");
  if (!protocol) throw Error(Errc::ConfigInvalid, "protocol: required");
  cfg.protocol = detail::parse_enum(*protocol, std::array{ProtocolKind::Binary, ProtocolKind::Ternary},
                                    protocol_name, "protocol");

  if (auto t = opt_number(j, "t_star", "")) cfg.t_star = *t;
  if (j.contains("dimension")) {
    if (!j["dimension"].is_number_unsigned()) throw Error(Errc::ConfigInvalid, "dimension: must be a positive integer");
    cfg.dimension = j["dimension"].get<std::size_t>();
  }
  if (j.contains("queries")) {
    if (!j["queries"].is_number_unsigned()) throw Error(Errc::ConfigInvalid, "queries: must be a positive integer");
    cfg.queries = j["queries"].get<std::size_t>();
  }
  if (j.contains("synthesis")) {
    const auto& s = j["synthesis"];
    if (!s.is_object()) throw Error(Errc::ConfigInvalid, "synthesis: must be an object");
    if (auto v = opt_number(s, "mu_h", "synthesis.")) cfg.synthesis.mu_h = *v;
    if (auto v = opt_number(s, "mu_a", "synthesis.")) cfg.synthesis.mu_a = *v;
    if (auto v = opt_number(s, "sigma", "synthesis.")) cfg.synthesis.sigma = *v;
  }

  if (!j.contains("nodes") || !j["nodes"].is_array()) throw Error(Errc::ConfigInvalid, "nodes: required array");
  for (std::size_t i = 0; i < j["nodes"].size(); ++i) {
    const auto& n = j["nodes"][i];
    const std::string field = "nodes[" + std::to_string(i) + "].";
    if (!n.is_object()) throw Error(Errc::ConfigInvalid, field + ": must be an object");
    NodeSpec node;
    node.id = opt_string(n, "id", field).value_or("");
    const auto role = opt_string(n, "role", field);
    if (!role) throw Error(Errc::ConfigInvalid, field + "role: required");
    node.role = detail::parse_enum(
        *role, std::array{NodeRole::Prover, NodeRole::Validator, NodeRole::Verifier, NodeRole::TrustedReference},
        role_name, field + "role");
    if (auto b = opt_string(n, "behavior", field)) {
      node.behavior = detail::parse_enum(
          *b, std::array{Behavior::Honest, Behavior::WrongModel, Behavior::RandomResponder, Behavior::EchoCopycat},
          behavior_name, field + "behavior");
    }
    if (auto v = opt_number(n, "noise", field)) node.noise = *v;
    node.copy_of = opt_string(n, "copy_of", field).value_or("");
    if (node.role == NodeRole::Verifier) {
      EmbeddingProviderSpec spec = mock_spec(cfg.dimension);
      if (n.contains("provider")) {
        const auto& p = n["provider"];
        if (!p.is_object()) throw Error(Errc::ConfigInvalid, field + "provider: must be an object");
        if (auto id = opt_string(p, "identity", field + "provider.")) spec.identity = *id;
      }
      node.provider = spec;
    }
    cfg.nodes.push_back(std::move(node));
  }
  return cfg;
}

inline ScenarioConfig load_scenario(std::istream& in) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::ConfigInvalid, std::string("config: ") + e.what());
  }
  return parse_scenario(j);
}

inline nlohmann::json to_json(const QueryVerdict& v) {
  nlohmann::json out{{"query", v.query}, {"responders", v.responders}};
  if (v.ternary) {
    out["protocol"] = "ternary";
    out.update(to_json(*v.ternary));
  } else {
    out["protocol"] = "binary";
    nlohmann::json rows = nlohmann::json::array();
    for (std::size_t i = 0; i < v.binary.size(); ++i) {
      auto row = to_json(v.binary[i]);
      row["node"] = v.responders[i];
      rows.push_back(std::move(row));
    }
    out["verdicts"] = std::move(rows);
  }
  return out;
}

inline nlohmann::json to_json(const DetectionSummary& s) {
  return {{"queries", s.queries},
          {"adversary_responses", s.adversary_responses},
          {"flagged_adversary", s.flagged_adversary},
          {"honest_responses", s.honest_responses},
          {"flagged_honest", s.flagged_honest},
          {"consensus_failures", s.consensus_failures},
          {"detection_rate", detail::rate_json(s.detection_rate)},
          {"false_flag_rate", detail::rate_json(s.false_flag_rate)},
          {"consensus_failure_rate", s.consensus_failure_rate}};
}

/// Summary object for a run; echo-copycat nodes are reported as an
/// extension behavior.
inline nlohmann::json summary_json(const ExperimentResult& r, const ScenarioConfig& cfg) {
  auto out = to_json(r.summary);
  out["protocol"] = protocol_name(r.protocol);
  out["seed"] = cfg.seed;
  out["adversaries"] = r.adversaries;
  nlohmann::json extensions = nlohmann::json::array();
  for (const auto& n : cfg.nodes) {
    if (n.behavior == Behavior::EchoCopycat) extensions.push_back(n.id + ": echo-copycat (extension)");
  }
  out["extensions"] = std::move(extensions);
  return out;
}

/// One verdict record per line.
inline void write_verdicts_jsonl(std::ostream& out, const ExperimentResult& r) {
  for (const auto& v : r.verdicts) out << to_json(v).dump() << '\n';
}

}  // namespace semverd
