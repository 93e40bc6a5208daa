#pragma once

// Fingerprint verification: a model that memorized (trigger, expected) must
// reproduce `expected` when queried with `trigger`.

#include <algorithm>
#include <cctype>
#include <cstddef>
#include <istream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/digest.hpp"
#include "semverd/embedding.hpp"  // trim
#include "semverd/error.hpp"

namespace semverd {

struct FingerprintPair {
  std::string trigger;
  std::string expected;
};

enum class MatchMode { Exact, Inside };

struct MatchOptions {
  /// ASCII case folding before comparison. Off by default: fingerprints are
  /// verbatim strings and folding widens what counts as a match.
  bool fold_case = false;
};

struct FingerprintVerdict {
  MatchMode mode;
  bool matched;
  std::string response_digest;
};

namespace detail {

inline std::string fold(std::string_view s, const MatchOptions& opts) {
  std::string out(s);
  if (opts.fold_case) {
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  }
  return out;
}

}  // namespace detail

// Both matchers compare against the trimmed expected string, and a blank
// expected string never matches. Together these keep exact => inside.

/// Trimmed response equals trimmed expected, byte for byte.
inline bool exact_match(std::string_view response, std::string_view expected,
                        const MatchOptions& opts = {}) {
  const auto y = trim(expected);
  if (y.empty()) return false;
  return detail::fold(trim(response), opts) == detail::fold(y, opts);
}

/// Expected occurs as a contiguous substring of the response.
inline bool inside_match(std::string_view response, std::string_view expected,
                         const MatchOptions& opts = {}) {
  const auto y = trim(expected);
  if (y.empty()) return false;
  return detail::fold(response, opts).find(detail::fold(y, opts)) != std::string::npos;
}

inline FingerprintVerdict check_fingerprint(std::string_view response, const FingerprintPair& pair,
                                            MatchMode mode, const MatchOptions& opts = {}) {
  const bool matched = mode == MatchMode::Exact ? exact_match(response, pair.expected, opts)
                                                : inside_match(response, pair.expected, opts);
  return {mode, matched, text_digest(response)};
}

struct SuiteCase {
  std::string response;
  FingerprintPair pair;
};

struct SuiteReport {
  std::size_t total = 0;
  std::size_t exact_count = 0;
  std::size_t inside_count = 0;
  double exact_rate = 0.0;
  double inside_rate = 0.0;

  friend bool operator==(const SuiteReport&, const SuiteReport&) = default;
};

inline SuiteReport evaluate_suite(std::span<const SuiteCase> cases, const MatchOptions& opts = {}) {
  if (cases.empty()) throw Error(Errc::EmptySuite, "fingerprint suite has no records");
  SuiteReport report;
  report.total = cases.size();
  for (const auto& c : cases) {
    if (exact_match(c.response, c.pair.expected, opts)) ++report.exact_count;
    if (inside_match(c.response, c.pair.expected, opts)) ++report.inside_count;
  }
  report.exact_rate = static_cast<double>(report.exact_count) / static_cast<double>(report.total);
  report.inside_rate = static_cast<double>(report.inside_count) / static_cast<double>(report.total);
  return report;
}

inline nlohmann::json to_json(const SuiteReport& r) {
  return {{"total", r.total},
          {"exact_count", r.exact_count},
          {"inside_count", r.inside_count},
          {"exact_rate", r.exact_rate},
          {"inside_rate", r.inside_rate}};
}

/// JSONL of {"trigger", "expected", "response"}; blank lines skipped.
/// Errors carry the 1-based line number as index.
inline std::vector<SuiteCase> load_suite(std::istream& in) {
  std::vector<SuiteCase> cases;
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
    for (const char* key : {"trigger", "expected", "response"}) {
      if (!rec.is_object() || !rec.contains(key) || !rec[key].is_string()) {
        throw Error(Errc::ParseError, std::string("missing string field '") + key + "'", line_no);
      }
    }
    SuiteCase c{rec["response"].get<std::string>(),
                {rec["trigger"].get<std::string>(), rec["expected"].get<std::string>()}};
    if (trim(c.pair.expected).empty()) {
      throw Error(Errc::ParseError, "'expected' must be non-empty", line_no);
    }
    cases.push_back(std::move(c));
  }
  return cases;
}

}  // namespace semverd
