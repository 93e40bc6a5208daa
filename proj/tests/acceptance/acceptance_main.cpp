// Acceptance runner: one PASS/FAIL line per criterion, exit 1 if any fail.

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "../oracles.hpp"
#include "../test_util.hpp"
#include "semverd/calibration.hpp"
#include "semverd/commands.hpp"
#include "semverd/fingerprint.hpp"
#include "semverd/gpuprofile.hpp"
#include "semverd/protocol.hpp"
#include "semverd/simnet.hpp"

using namespace semverd;

namespace {

/// Collects failures for one criterion; `detail` ends up on the result line.
struct Check {
  std::vector<std::string> failures;
  std::string detail;

  void expect(bool ok, const std::string& what) {
    if (!ok && failures.size() < 5) failures.push_back(what);
    if (!ok) ++failed;
  }
  std::size_t failed = 0;
};

struct Criterion {
  int id;
  const char* name;
  double budget_s;  // 0 = no runtime bound
  std::function<void(Check&)> run;
};

std::string fmt(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.10g", x);
  return buf;
}

// ---------------------------------------------------------------------------

void ternary_table(Check& c) {
  const std::array<std::array<std::size_t, 3>, 6> perms{
      {{0, 1, 2}, {0, 2, 1}, {1, 0, 2}, {1, 2, 0}, {2, 0, 1}, {2, 1, 0}}};
  // Distinct sims plus an all-equal case so the tie rule is exercised.
  const std::array<std::array<double, 3>, 2> sim_sets{{{0.9, 0.7, 0.55}, {0.6, 0.6, 0.6}}};
  std::size_t cases = 0;
  for (int bits = 0; bits < 8; ++bits) {
    const std::array<bool, 3> above{(bits & 1) != 0, (bits & 2) != 0, (bits & 4) != 0};
    for (const auto& sims : sim_sets) {
      for (const auto& pi : perms) {
        std::array<bool, 3> pa{};
        std::array<double, 3> ps{};
        for (std::size_t k = 0; k < 3; ++k) {
          const auto [i, j] = kResponsePairs[k];
          pa[pair_slot(pi[i], pi[j])] = above[k];
          ps[pair_slot(pi[i], pi[j])] = sims[k];
        }
        const auto got = classify_pattern(pa, ps);
        const auto want = oracle::expected_ternary(pa, ps);
        const bool ok = outcome_name(got.outcome) == want.outcome && got.accepted == want.accepted &&
                        got.flagged == want.flagged;
        c.expect(ok, "pattern " + std::to_string(bits) + " permuted");
        // Both verifiers agreeing must yield the same verdict through tier 1.
        const auto v = decide_ternary({ps, pa}, {ps, pa}, 0.5);
        c.expect(v.outcome == got.outcome && v.accepted == got.accepted && v.flagged == got.flagged,
                 "decide_ternary disagrees with classify_pattern");
        ++cases;
      }
    }
  }
  c.detail = std::to_string(cases) + " pattern/permutation cases";
}

void sweep_oracle(Check& c) {
  Rng rng(2024);
  std::size_t mismatches = 0, pairs = 0;
  for (int corpus = 0; corpus < 100; ++corpus) {
    const std::size_t n = 200 + rng.below(300);
    const double valid_mean = 0.4 + 0.4 * rng.uniform();
    const double invalid_mean = 0.3 * rng.uniform();
    const double spread = 0.05 + 0.2 * rng.uniform();
    std::vector<oracle::Scored> data;
    std::vector<LabeledScore> scores;
    for (std::size_t i = 0; i < n; ++i) {
      const bool valid = rng.uniform() < 0.6;
      double s = std::clamp(rng.normal(valid ? valid_mean : invalid_mean, spread), -1.0, 1.0);
      if (rng.below(5) == 0) s = static_cast<double>(rng.below(101)) / 100.0;  // land on grid points
      data.push_back({s, valid});
      scores.push_back({s, valid ? PairLabel::Valid : PairLabel::Invalid});
    }
    pairs += n;
    const auto want = oracle::brute_force_threshold(data);
    const auto got = select_threshold(sweep_thresholds(scores, ThresholdGrid{0.0, 1.0, 0.01}));
    if (got.t_star != want.t_star || got.training_cm.correct() != want.correct) ++mismatches;
  }
  c.expect(mismatches == 0, std::to_string(mismatches) + " mismatching corpora");
  c.detail = "100 corpora, " + std::to_string(pairs) + " pairs, " + std::to_string(mismatches) + " mismatches";
}

void metric_identities(Check& c) {
  const double f1 = f1_score(0.669, 0.818);
  c.expect(std::abs(f1 - 0.736) <= 0.001, "f1 = " + fmt(f1));
  const auto hand = confusion_metrics({3, 1, 5, 1});
  c.expect(hand.accuracy == 0.8 && hand.precision == 0.75 && hand.recall == 0.75 && hand.f1 == 0.75,
           "hand-computed matrix");
  Rng rng(3);
  for (int i = 0; i < 1000; ++i) {
    ConfusionMatrix cm{rng.below(1000), rng.below(1000), rng.below(1000), rng.below(1000)};
    if (cm.total() == 0) cm.tn = 1;
    const auto m = confusion_metrics(cm);
    // accuracy is the correctly rounded quotient, so multiplying back by the
    // total recovers tp+tn as an integer (IEEE rounding rules out a bitwise
    // identity here: 1.0/49*49 != 1).
    const double back = m.accuracy * static_cast<double>(cm.total());
    c.expect(static_cast<std::uint64_t>(std::llround(back)) == cm.correct() &&
                 std::abs(back - static_cast<double>(cm.correct())) <= 1e-9 * static_cast<double>(cm.total()),
             "accuracy*total for matrix " + std::to_string(i));
    c.expect(m.accuracy == static_cast<double>(cm.correct()) / static_cast<double>(cm.total()),
             "accuracy quotient " + std::to_string(i));
  }
  c.detail = "f1(0.669, 0.818) = " + fmt(f1) + "; 1000 matrices";
}

void cosine_properties(Check& c) {
  Rng rng(4);
  double worst_sym = 0, worst_self = 0, worst_scale = 0, max_score = -2, min_score = 2;
  for (int i = 0; i < 10000; ++i) {
    const std::size_t d = 2 + rng.below(64);
    const double mag = std::pow(10.0, -3.0 + 6.0 * rng.uniform());
    const auto a = test::random_vector(rng, d, mag);
    const auto b = test::random_vector(rng, d, mag);
    const double ab = cosine_similarity(a, b);
    max_score = std::max(max_score, ab);
    min_score = std::min(min_score, ab);
    worst_sym = std::max(worst_sym, std::abs(ab - cosine_similarity(b, a)));
    worst_self = std::max(worst_self, std::abs(cosine_similarity(a, a) - 1.0));
    const double k = 0.01 + 100.0 * rng.uniform();
    std::vector<double> ka(a);
    for (double& x : ka) x *= k;
    worst_scale = std::max(worst_scale, std::abs(cosine_similarity(ka, b) - ab));
  }
  c.expect(min_score >= -1.0 && max_score <= 1.0 + 1e-9, "range");
  c.expect(worst_sym <= 1e-12, "symmetry " + fmt(worst_sym));
  c.expect(worst_self <= 1e-9, "self " + fmt(worst_self));
  c.expect(worst_scale <= 1e-9, "scale " + fmt(worst_scale));
  c.detail = "10000 pairs; max |asym| " + fmt(worst_sym) + ", max |self-1| " + fmt(worst_self) +
             ", max scale drift " + fmt(worst_scale);
}

void mock_embedder(Check& c) {
  std::ifstream in(test::data_path("mock_triples.jsonl"));
  std::string line;
  std::size_t triples = 0;
  double worst_margin = 2;
  const MockProvider p(1024, std::string(kDefaultHashSeed));
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = nlohmann::json::parse(line);
    const auto base = j["base"].get<std::string>();
    const auto shared = j["shared"].get<std::string>();
    const auto disjoint = j["disjoint"].get<std::string>();
    ++triples;

    const auto eb = embed(p, base);
    c.expect(eb == embed(p, base) && eb == mock_embed(base, 1024, kDefaultHashSeed), "determinism");
    for (const auto* t : {&base, &shared, &disjoint}) {
      c.expect(std::abs(l2_norm(embed(p, *t)) - 1.0) <= 1e-9, "unit norm");
    }
    auto words = tokenize(base);
    std::reverse(words.begin(), words.end());
    std::string reversed;
    for (const auto& w : words) reversed += w + "  ";
    c.expect(embed(p, reversed) == eb, "token order");

    const double s_shared = cosine_similarity(eb, embed(p, shared));
    const double s_disjoint = cosine_similarity(eb, embed(p, disjoint));
    worst_margin = std::min(worst_margin, s_shared - s_disjoint);
    c.expect(s_shared > s_disjoint, "ordering on '" + base + "'");
  }
  c.expect(triples == 50, "fixture has " + std::to_string(triples) + " triples");
  c.detail = std::to_string(triples) + " triples at d=1024, min shared-minus-disjoint " + fmt(worst_margin);
}

void fingerprint_fixture(Check& c) {
  std::ifstream in(test::data_path("fingerprint_suite.jsonl"));
  const auto cases = load_suite(in);
  const auto r = evaluate_suite(cases);
  c.expect(cases.size() == 60, "suite size");
  c.expect(r.exact_count == 9 && r.inside_count == 15, "counts");
  c.expect(r.exact_rate == 0.15 && r.inside_rate == 0.25, "rates");

  Rng rng(6);
  const std::string alphabet = "ab \t";
  auto draw = [&] {
    std::string s(rng.below(6), ' ');
    for (char& ch : s) ch = alphabet[rng.below(alphabet.size())];
    return s;
  };
  std::size_t exact = 0;
  for (int i = 0; i < 10000; ++i) {
    const auto resp = draw();
    const auto exp = rng.below(3) == 0 ? " " + resp + "\t" : draw();
    if (exact_match(resp, exp)) {
      ++exact;
      c.expect(inside_match(resp, exp), "exact without inside");
    }
  }
  c.detail = "rates " + fmt(r.exact_rate) + "/" + fmt(r.inside_rate) + "; " + std::to_string(exact) +
             " exact matches among 10000 random pairs";
}

void profile_distance(Check& c) {
  using test::constant_trace;
  Rng rng(7);
  const auto r5 = test::random_trace(rng, 5);
  c.expect(trace_distance(r5, r5) == 0.0, "identity");
  const double all = trace_distance(constant_trace(6, 0.0), constant_trace(6, 1.0));
  c.expect(std::abs(all - std::sqrt(8.0)) <= 1e-9, "zeros vs ones " + fmt(all));

  std::ifstream ref_in(test::data_path("trace_reference.jsonl"));
  std::ifstream off_in(test::data_path("trace_offset.jsonl"));
  const double off = trace_distance(load_trace(off_in).trace, load_trace(ref_in).trace);
  c.expect(std::abs(off - 0.5) <= 1e-9, "u4 offset " + fmt(off));

  for (std::size_t n = 2; n < 12; ++n) {
    // Same span, twice the samples.
    const double base = trace_distance(constant_trace(n, 0.2, 1.0), constant_trace(n, 0.6, 1.0));
    const double dup = trace_distance(constant_trace(n, 0.2, 1.0), constant_trace(2 * n - 1, 0.6, 0.5));
    c.expect(std::abs(base - dup) <= 1e-9, "duplication n=" + std::to_string(n));
  }

  double worst_sym = 0, worst_tri = -1;
  for (int i = 0; i < 1000; ++i) {
    const std::size_t n = 2 + rng.below(20);
    const auto a = test::random_trace(rng, n), b = test::random_trace(rng, n), d = test::random_trace(rng, n);
    const double ab = trace_distance(a, b), bd = trace_distance(b, d), ad = trace_distance(a, d);
    worst_sym = std::max(worst_sym, std::abs(ab - trace_distance(b, a)));
    worst_tri = std::max(worst_tri, ad - (ab + bd));
  }
  c.expect(worst_sym <= 1e-12, "symmetry " + fmt(worst_sym));
  c.expect(worst_tri <= 1e-12, "triangle " + fmt(worst_tri));
  c.detail = "sqrt8 case " + fmt(all) + ", offset " + fmt(off) + ", 1000 triples";
}

void simulation(Check& c) {
  auto load = [](const std::string& name) {
    std::ifstream in(test::data_path(name));
    return load_scenario(in);
  };
  const auto adv_cfg = load("scenario_one_adversary.json");
  c.expect(adv_cfg.queries == 500 && adv_cfg.dimension == 1024 && adv_cfg.t_star == 0.5 &&
               adv_cfg.synthesis.mu_h == 0.9 && adv_cfg.synthesis.sigma == 0.02 && adv_cfg.synthesis.mu_a == 0.0,
           "one-adversary scenario parameters");
  const auto adv = run_scenario(adv_cfg);
  c.expect(adv.summary.detection_rate == 1.0, "detection rate");
  c.expect(adv.summary.false_flag_rate == 0.0, "false-flag rate");

  const auto honest = run_scenario(load("scenario_all_honest.json"));
  std::size_t valid_all = 0;
  for (const auto& v : honest.verdicts) valid_all += v.ternary && v.ternary->outcome == TernaryOutcome::ValidAll;
  c.expect(valid_all == honest.verdicts.size(), "all-honest ValidAll");

  const auto dir = std::filesystem::temp_directory_path();
  const auto a = (dir / "semverd_accept_run_a.jsonl").string();
  const auto b = (dir / "semverd_accept_run_b.jsonl").string();
  std::ostringstream sink;
  for (const auto& path : {a, b}) {
    const auto rc = cli::cmd_simulate({test::data_path("scenario_one_adversary.json"), path}, sink, sink);
    c.expect(rc.exit_code == 0, "cmd_simulate exit");
  }
  const auto fa = test::slurp(a), fb = test::slurp(b);
  c.expect(!fa.empty() && fa == fb, "verdict files differ");
  c.expect(test::slurp(cli::summary_path_for(a)) == test::slurp(cli::summary_path_for(b)), "summary files differ");
  for (const auto& p : {a, b}) {
    std::filesystem::remove(p);
    std::filesystem::remove(cli::summary_path_for(p));
  }
  c.detail = "detection " + fmt(adv.summary.detection_rate.value_or(-1)) + ", false-flag " +
             fmt(adv.summary.false_flag_rate.value_or(-1)) + ", ValidAll " + std::to_string(valid_all) + "/" +
             std::to_string(honest.verdicts.size()) + ", result files identical";
}

void calibration_pipeline(Check& c) {
  cli::CalibrateOptions o;
  o.corpus_path = test::data_path("synthetic_corpus.jsonl");
  o.seed = 3;
  std::ostringstream out1, out2, err;
  const auto r1 = cli::cmd_calibrate(o, out1, err);
  const auto r2 = cli::cmd_calibrate(o, out2, err);
  c.expect(r1.exit_code == 0 && r2.exit_code == 0, "exit code; " + err.str());
  if (r1.exit_code != 0) return;
  const auto j = nlohmann::json::parse(out1.str());
  const double t = j["t_star"].get<double>();
  const double acc = j["test"]["metrics"]["accuracy"].get<double>();
  c.expect(t >= 0.2 && t <= 0.6, "t* = " + fmt(t));
  c.expect(acc >= 0.99, "test accuracy " + fmt(acc));
  c.expect(out1.str() == out2.str(), "reports differ between runs");
  c.detail = "t* = " + fmt(t) + ", test accuracy " + fmt(acc) + ", " + std::to_string(j["test_pairs"].get<int>()) +
             " test pairs, repeat run identical";
}

void binary_boundary(Check& c) {
  // Integer vectors with integer norms: cosine = dot / (|a| |b|) is a single
  // correctly rounded division, so it lands exactly on the double nearest t.
  struct Case {
    std::vector<double> a, b;
    double t;
  };
  const std::vector<Case> cases{
      {{1, 0, 0, 0}, {1, 1, 1, 1}, 0.5},  {{5, 0}, {3, 4}, 0.6},     {{5, 0}, {4, 3}, 0.8},
      {{3, 0, 0}, {1, 2, 2}, 1.0 / 3.0},  {{1, 0}, {0, 1}, 0.0},     {{1, 0}, {2, 0}, 1.0},
      {{0, 0, 3}, {2, 1, 2}, 2.0 / 3.0},
  };
  for (const auto& k : cases) {
    const auto v = binary_verify(k.a, k.b, k.t);
    c.expect(v.similarity == k.t, "constructed similarity " + fmt(v.similarity) + " != " + fmt(k.t));
    c.expect(v.accepted, "boundary rejected at t=" + fmt(k.t));
    if (k.t < 1.0) c.expect(!binary_verify(k.a, k.b, std::nextafter(k.t, 2.0)).accepted, "above t accepted");
  }
  const MockProvider p(1024, std::string(kDefaultHashSeed));
  const auto self = binary_verify(ResponseRecord{"q", "the cat sat", "", ""}, {"q", "the cat sat", "", ""}, p, 1.0);
  c.expect(self.accepted, "self-similarity at t*=1");
  c.detail = std::to_string(cases.size()) + " constructed pairs with similarity == t* accepted; t* one ulp higher rejected";
}

}  // namespace

int main() {
  const std::vector<Criterion> criteria{
      {1, "ternary verdict table", 1.0, ternary_table},
      {2, "threshold sweep oracle equivalence", 10.0, sweep_oracle},
      {3, "metric identities", 0, metric_identities},
      {4, "cosine properties", 0, cosine_properties},
      {5, "mock embedder", 0, mock_embedder},
      {6, "fingerprint fixture", 0, fingerprint_fixture},
      {7, "profile distance", 0, profile_distance},
      {8, "end-to-end simulation", 30.0, simulation},
      {9, "synthetic calibration pipeline", 0, calibration_pipeline},
      {10, "binary boundary", 0, binary_boundary},
  };
  int failed = 0;
  for (const auto& cr : criteria) {
    Check check;
    const auto start = std::chrono::steady_clock::now();
    try {
      cr.run(check);
    } catch (const std::exception& e) {
      check.expect(false, std::string("exception: ") + e.what());
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (cr.budget_s > 0) check.expect(secs < cr.budget_s, "runtime " + fmt(secs) + " s over budget");
    const bool ok = check.failed == 0;
    failed += !ok;
    std::printf("%s  %2d  %-36s %7.3f s  %s\n", ok ? "PASS" : "FAIL", cr.id, cr.name, secs, check.detail.c_str());
    for (const auto& f : check.failures) std::printf("          - %s\n", f.c_str());
  }
  std::printf("%d/%zu criteria passed\n", static_cast<int>(criteria.size()) - failed, criteria.size());
  return failed == 0 ? 0 : 1;
}
