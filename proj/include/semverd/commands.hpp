#pragma once

// Operator commands behind the `semverd` CLI. Each command writes a JSON
// report to `out`, diagnostics to `err`, and returns an exit code:
//   0 completed (and, for verify/profile, accepted)
//   1 completed with a rejecting or flagging verdict
//   2 usage, input or configuration error
//   3 runtime/provider failure

#include <cstdint>
#include <cstring>
#include <fstream>
#include <functional>
#include <iomanip>
#include <locale>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/calibration.hpp"
#include "semverd/digest.hpp"
#include "semverd/embedding.hpp"
#include "semverd/error.hpp"
#include "semverd/fingerprint.hpp"
#include "semverd/gpuprofile.hpp"
#include "semverd/protocol.hpp"
#include "semverd/providers.hpp"
#include "semverd/simnet.hpp"

namespace semverd::cli {

enum ExitCode : int { kOk = 0, kRejected = 1, kUsage = 2, kRuntime = 3 };

struct CommandOutcome {
  int exit_code = kOk;
  std::optional<std::string> report_path;
};

/// Thrown for usage errors that are not library errors (bad flag values,
/// missing files).
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline int exit_code_for(Errc code) noexcept {
  switch (code) {
    case Errc::ProviderUnavailable: return kRuntime;
    default: return kUsage;
  }
}

/// Runs `body`, translating exceptions into the exit-code contract.
inline CommandOutcome guarded(std::ostream& err, const std::function<CommandOutcome()>& body) {
  try {
    return body();
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return {kUsage, std::nullopt};
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return {exit_code_for(e.code()), std::nullopt};
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return {kRuntime, std::nullopt};
  }
}

inline std::ifstream open_input(const std::string& path, const std::string& what) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot open " + what + " '" + path + "'");
  return in;
}

inline std::string read_file(const std::string& path, const std::string& what) {
  auto in = open_input(path, what);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Literal text, or the contents of a file when written as @path.
inline std::string resolve_text_arg(const std::string& arg) {
  if (!arg.empty() && arg.front() == '@') return read_file(arg.substr(1), "response file");
  return arg;
}

/// Prints the report and, when requested, writes the same bytes to a file.
inline CommandOutcome emit(const nlohmann::json& report, std::ostream& out,
                           const std::optional<std::string>& out_path, int exit_code) {
  const auto text = report.dump(2) + "\n";
  out << text;
  if (out_path) {
    std::ofstream f(*out_path, std::ios::binary);
    if (!f) throw UsageError("cannot write report '" + *out_path + "'");
    f << text;
  }
  return {exit_code, out_path};
}

// ---------------------------------------------------------------------------
// Provider flags

struct ProviderOptions {
  std::string provider = "mock";  // mock | file | http
  std::size_t dim = kDefaultMockDimension;
  std::string hash_seed{kDefaultHashSeed};
  std::string embeddings;  // --embeddings PATH for the file provider
  std::string endpoint;    // --endpoint URL for the http provider
  int retries = 2;
};

inline EmbeddingProviderSpec to_spec(const ProviderOptions& o) {
  EmbeddingProviderSpec spec = mock_spec(o.dim, o.hash_seed);
  spec.retries = o.retries;
  if (o.provider == "mock") return spec;
  if (o.provider == "file") {
    if (o.embeddings.empty()) throw UsageError("--provider file needs --embeddings PATH");
    spec.kind = ProviderKind::ExternalFile;
    spec.identity = o.embeddings;
    spec.location = o.embeddings;
    return spec;
  }
  if (o.provider == "http") {
    if (o.endpoint.empty()) throw UsageError("--provider http needs --endpoint URL");
    spec.kind = ProviderKind::ExternalHttp;
    spec.identity = o.endpoint;
    spec.location = o.endpoint;
    return spec;
  }
  throw UsageError("unknown provider '" + o.provider + "' (expected mock, file or http)");
}

inline std::shared_ptr<const EmbeddingProvider> open_provider(const ProviderOptions& o) {
  const auto spec = to_spec(o);
  if (spec.kind == ProviderKind::ExternalFile) {
    // A missing embeddings file is a usage error, not a provider outage.
    open_input(spec.location, "embeddings file");
  }
  return make_cached_provider(spec);
}

/// "start:stop:step"
inline ThresholdGrid parse_grid(const std::string& text) {
  ThresholdGrid g;
  char c1 = 0, c2 = 0;
  std::istringstream ss(text);
  ss.imbue(std::locale::classic());
  if (!(ss >> g.start >> c1 >> g.stop >> c2 >> g.step) || c1 != ':' || c2 != ':' || !(ss >> std::ws).eof()) {
    throw Error(Errc::BadGrid, "grid must look like start:stop:step, got '" + text + "'");
  }
  grid_points(g);
  return g;
}

// ---------------------------------------------------------------------------
// calibrate

struct CalibrateOptions {
  std::string corpus_path;
  ProviderOptions provider;
  std::string grid = "0:1:0.01";
  std::uint64_t seed = 0;
  double train_fraction = 0.8;
  std::size_t per_model = 0;
  std::optional<std::string> out;
};

inline CommandOutcome cmd_calibrate(const CalibrateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    CalibrationOptions copts;
    copts.grid = parse_grid(o.grid);
    copts.split = {o.seed, o.train_fraction};
    copts.pairing.per_model = o.per_model;
    auto in = open_input(o.corpus_path, "corpus file");
    const auto corpus = load_corpus(in);
    const auto provider = open_provider(o.provider);
    auto report = to_json(calibrate(corpus, *provider, copts));
    report["corpus"] = o.corpus_path;
    report["provider"] = {{"kind", provider_kind_name(provider->spec().kind)},
                          {"dimension", provider->dimension()},
                          {"identity", provider->spec().identity}};
    return emit(report, out, o.out, kOk);
  });
}

// ---------------------------------------------------------------------------
// verify-binary / verify-ternary

struct VerifyOptions {
  std::vector<std::string> responses;  // literal text or @file
  double threshold = 0.5;
  ProviderOptions provider;
  /// Ternary only: hash seed for verifier B's mock provider; defaults to
  /// verifier A's.
  std::optional<std::string> hash_seed_b;
  std::optional<std::string> out;
};

inline CommandOutcome cmd_verify_binary(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.responses.size() != 2) {
      throw UsageError("verify-binary takes exactly 2 responses (candidate, reference), got " +
                       std::to_string(o.responses.size()));
    }
    require_threshold(o.threshold);
    const auto provider = open_provider(o.provider);
    const ResponseRecord candidate{"", resolve_text_arg(o.responses[0]), "candidate", ""};
    const ResponseRecord reference{"", resolve_text_arg(o.responses[1]), "reference", ""};
    const auto v = binary_verify(candidate, reference, *provider, o.threshold);
    return emit(to_json(v), out, o.out, v.accepted ? kOk : kRejected);
  });
}

inline CommandOutcome cmd_verify_ternary(const VerifyOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    if (o.responses.size() != 3) {
      throw UsageError("verify-ternary takes exactly 3 responses, got " + std::to_string(o.responses.size()));
    }
    require_threshold(o.threshold);
    auto opts_b = o.provider;
    if (o.hash_seed_b) opts_b.hash_seed = *o.hash_seed_b;
    const auto a = open_provider(o.provider);
    const auto b = open_provider(opts_b);
    std::vector<ResponseRecord> rs;
    for (std::size_t i = 0; i < 3; ++i) {
      rs.push_back({"", resolve_text_arg(o.responses[i]), "r" + std::to_string(i + 1), ""});
    }
    const auto v = ternary_verify(rs[0], rs[1], rs[2], *a, *b, o.threshold);
    return emit(to_json(v), out, o.out, v.outcome == TernaryOutcome::ValidAll ? kOk : kRejected);
  });
}

// ---------------------------------------------------------------------------
// simulate

struct SimulateOptions {
  std::string config_path;
  /// Verdict JSONL goes here, the summary to `<out>.summary.json`.
  std::optional<std::string> out;
};

inline std::string summary_path_for(const std::string& out_path) { return out_path + ".summary.json"; }

inline CommandOutcome cmd_simulate(const SimulateOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto in = open_input(o.config_path, "scenario config");
    const auto cfg = load_scenario(in);
    const auto result = run_scenario(cfg);
    const auto summary = summary_json(result, cfg);
    if (o.out) {
      std::ofstream f(*o.out, std::ios::binary);
      if (!f) throw UsageError("cannot write results '" + *o.out + "'");
      write_verdicts_jsonl(f, result);
      std::ofstream s(summary_path_for(*o.out), std::ios::binary);
      if (!s) throw UsageError("cannot write summary '" + summary_path_for(*o.out) + "'");
      s << summary.dump(2) << '\n';
    }
    out << summary.dump(2) << '\n';
    return CommandOutcome{kOk, o.out};
  });
}

// ---------------------------------------------------------------------------
// fingerprint

struct FingerprintOptions {
  std::string suite_path;
  bool fold_case = false;
  std::optional<std::string> out;
};

inline CommandOutcome cmd_fingerprint(const FingerprintOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto in = open_input(o.suite_path, "fingerprint suite");
    const auto cases = load_suite(in);
    const auto report = evaluate_suite(cases, MatchOptions{o.fold_case});
    return emit(to_json(report), out, o.out, kOk);
  });
}

// ---------------------------------------------------------------------------
// profile-distance

struct ProfileOptions {
  std::string observed_path;
  std::string reference_path;
  double tolerance = 0.0;
  std::optional<std::string> out;
};

inline CommandOutcome cmd_profile(const ProfileOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    auto observed_in = open_input(o.observed_path, "observed trace");
    auto reference_in = open_input(o.reference_path, "reference trace");
    const auto observed = load_trace(observed_in);
    const auto reference = load_trace(reference_in);
    const auto v = verify_profile(observed.trace, reference.trace, o.tolerance);
    const nlohmann::json report{{"distance", v.distance},
                                {"accepted", v.accepted},
                                {"tolerance", o.tolerance},
                                {"observed_samples", observed.trace.samples.size()},
                                {"reference_samples", reference.trace.samples.size()},
                                {"clamped_samples", observed.clamped_samples + reference.clamped_samples}};
    if (observed.clamped_samples + reference.clamped_samples > 0) {
      err << "warning: readings above capacity were clamped to 1.0\n";
    }
    return emit(report, out, o.out, v.accepted ? kOk : kRejected);
  });
}

// ---------------------------------------------------------------------------
// embed (debug helper)

struct EmbedOptions {
  std::string text;  // literal or @file
  ProviderOptions provider;
};

/// SHA-256 over the vector's IEEE-754 doubles in little-endian order.
inline std::string vector_digest(const EmbeddingVector& v) {
  std::vector<std::uint8_t> bytes;
  bytes.reserve(v.dimension() * 8);
  for (double x : v.values()) {
    std::uint64_t bits;
    std::memcpy(&bits, &x, sizeof bits);
    for (int i = 0; i < 8; ++i) bytes.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
  }
  return to_hex(sha256(bytes));
}

inline CommandOutcome cmd_embed(const EmbedOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto provider = open_provider(o.provider);
    const auto text = resolve_text_arg(o.text);
    const auto v = embed(*provider, text);
    std::vector<double> head(v.raw().begin(), v.raw().begin() + static_cast<std::ptrdiff_t>(std::min<std::size_t>(8, v.dimension())));
    const nlohmann::json report{{"dimension", v.dimension()},
                                {"text_digest", text_digest(text)},
                                {"vector_digest", vector_digest(v)},
                                {"head", head}};
    return emit(report, out, std::nullopt, kOk);
  });
}

// ---------------------------------------------------------------------------
// synth-corpus

struct SynthCorpusOptions {
  SyntheticCorpusParams params;
  std::uint64_t seed = 0;
  std::optional<std::string> out;
};

inline CommandOutcome cmd_synth_corpus(const SynthCorpusOptions& o, std::ostream& out, std::ostream& err) {
  return guarded(err, [&] {
    const auto records = synthesize_corpus(o.params, o.seed);
    std::ostringstream body;
    for (const auto& r : records) body << to_json(r).dump() << '\n';
    if (o.out) {
      std::ofstream f(*o.out, std::ios::binary);
      if (!f) throw UsageError("cannot write corpus '" + *o.out + "'");
      f << body.str();
    } else {
      out << body.str();
    }
    return CommandOutcome{kOk, o.out};
  });
}

}  // namespace semverd::cli
