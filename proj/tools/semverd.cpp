// semverd: calibrate thresholds, verify responses, run simulations, score
// fingerprint suites and compare GPU profile traces.

#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "semverd/commands.hpp"

namespace {

using namespace semverd::cli;

void add_provider_flags(CLI::App* cmd, ProviderOptions& p) {
  cmd->add_option("--provider", p.provider, "Embedding provider: mock, file or http")
      ->check(CLI::IsMember({"mock", "file", "http"}))
      ->capture_default_str();
  cmd->add_option("--dim", p.dim, "Embedding dimension")->capture_default_str();
  cmd->add_option("--hash-seed", p.hash_seed, "Mock embedder hash seed")->capture_default_str();
  cmd->add_option("--embeddings", p.embeddings, "Precomputed embeddings JSONL (file provider)");
  cmd->add_option("--endpoint", p.endpoint, "Embedding service URL (http provider)");
  cmd->add_option("--retries", p.retries, "Retries for the http provider")->capture_default_str();
}

template <typename T>
void add_out(CLI::App* cmd, std::optional<T>& out, const std::string& help = "Also write the report to PATH") {
  cmd->add_option_function<std::string>("--out", [&out](const std::string& path) { out = path; }, help);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Semantic verification toolkit for distributed inference results"};
  app.require_subcommand(1);

  CalibrateOptions calibrate;
  auto* c = app.add_subcommand("calibrate", "Select the similarity threshold t* from a labeled corpus");
  c->add_option("corpus", calibrate.corpus_path, "Corpus JSONL")->required();
  add_provider_flags(c, calibrate.provider);
  c->add_option("--grid", calibrate.grid, "Threshold grid start:stop:step")->capture_default_str();
  c->add_option("--seed", calibrate.seed, "Train/test split seed")->capture_default_str();
  c->add_option("--train-fraction", calibrate.train_fraction, "Share of questions used for training")
      ->capture_default_str();
  c->add_option("--per-model", calibrate.per_model, "Responses per model per question (0 = all)")
      ->capture_default_str();
  add_out(c, calibrate.out);

  VerifyOptions binary;
  auto* vb = app.add_subcommand("verify-binary", "Check a candidate against a trusted reference response");
  vb->add_option("responses", binary.responses, "CANDIDATE REFERENCE (text or @file)");
  vb->add_option("--threshold", binary.threshold, "Decision threshold t*")->capture_default_str();
  add_provider_flags(vb, binary.provider);
  add_out(vb, binary.out);

  VerifyOptions ternary;
  auto* vt = app.add_subcommand("verify-ternary", "Run two-verifier consensus over three responses");
  vt->add_option("responses", ternary.responses, "R1 R2 R3 (text or @file)");
  vt->add_option("--threshold", ternary.threshold, "Decision threshold t*")->capture_default_str();
  add_provider_flags(vt, ternary.provider);
  vt->add_option_function<std::string>(
      "--hash-seed-b", [&](const std::string& s) { ternary.hash_seed_b = s; },
      "Hash seed for verifier B's mock provider (default: same as A)");
  add_out(vt, ternary.out);

  SimulateOptions simulate;
  auto* s = app.add_subcommand("simulate", "Run a simulated-network scenario");
  s->add_option("config", simulate.config_path, "Scenario config JSON")->required();
  add_out(s, simulate.out, "Write verdict JSONL to PATH and the summary to PATH.summary.json");

  FingerprintOptions fingerprint;
  auto* f = app.add_subcommand("fingerprint", "Score a fingerprint suite by exact and inside match");
  f->add_option("suite", fingerprint.suite_path, "Suite JSONL")->required();
  f->add_flag("--fold-case", fingerprint.fold_case, "ASCII case-insensitive matching");
  add_out(f, fingerprint.out);

  ProfileOptions profile;
  auto* p = app.add_subcommand("profile-distance", "Compare an observed GPU trace with a reference");
  p->add_option("observed", profile.observed_path, "Observed trace JSONL")->required();
  p->add_option("reference", profile.reference_path, "Reference trace JSONL")->required();
  p->add_option("--tolerance", profile.tolerance, "Maximum accepted distance")->required();
  add_out(p, profile.out);

  EmbedOptions embed;
  auto* e = app.add_subcommand("embed", "Print the digest of a text's embedding");
  e->add_option("text", embed.text, "Text or @file")->required();
  add_provider_flags(e, embed.provider);

  SynthCorpusOptions synth;
  auto* g = app.add_subcommand("synth-corpus", "Generate a synthetic calibration corpus");
  g->add_option("--questions", synth.params.questions)->capture_default_str();
  g->add_option("--per-model", synth.params.per_model)->capture_default_str();
  g->add_option("--randoms", synth.params.randoms)->capture_default_str();
  g->add_option("--valid-mean", synth.params.valid_mean)->capture_default_str();
  g->add_option("--sigma", synth.params.sigma)->capture_default_str();
  g->add_option("--seed", synth.seed)->capture_default_str();
  add_out(g, synth.out, "Write the corpus to PATH instead of stdout");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& err) {
    const int code = app.exit(err);
    return code == 0 ? 0 : kUsage;
  }

  auto& out = std::cout;
  auto& err = std::cerr;
  CommandOutcome outcome;
  if (c->parsed()) outcome = cmd_calibrate(calibrate, out, err);
  else if (vb->parsed()) outcome = cmd_verify_binary(binary, out, err);
  else if (vt->parsed()) outcome = cmd_verify_ternary(ternary, out, err);
  else if (s->parsed()) outcome = cmd_simulate(simulate, out, err);
  else if (f->parsed()) outcome = cmd_fingerprint(fingerprint, out, err);
  else if (p->parsed()) outcome = cmd_profile(profile, out, err);
  else if (e->parsed()) outcome = cmd_embed(embed, out, err);
  else if (g->parsed()) outcome = cmd_synth_corpus(synth, out, err);
  return outcome.exit_code;
}
