#pragma once

// GPU resource-utilization signatures. A sample is an 8-vector of
// capacity-normalized readings:
//   m1..m4  GPU RAM of main process, descendants, combined, system-wide
//   u1..u4  GPU utilization of the same four scopes
// A trace is a time-ordered sequence of samples compared to a reference
// execution by root-mean Euclidean distance after linear resampling.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/core.hpp"
#include "semverd/embedding.hpp"  // trim
#include "semverd/error.hpp"

namespace semverd {

inline constexpr std::size_t kProfileChannels = 8;
inline constexpr double kMinSampleInterval = 0.1;

enum class Channel : std::size_t { M1, M2, M3, M4, U1, U2, U3, U4 };

struct ResourceSample {
  double t = 0.0;
  std::array<double, kProfileChannels> values{};

  [[nodiscard]] double& operator[](Channel c) { return values[static_cast<std::size_t>(c)]; }
  [[nodiscard]] double operator[](Channel c) const { return values[static_cast<std::size_t>(c)]; }

  friend bool operator==(const ResourceSample&, const ResourceSample&) = default;
};

/// One reading as produced by the tracker: memory in bytes, utilization in
/// percent.
struct RawSample {
  double t = 0.0;
  double ram_main = 0.0;
  double ram_desc = 0.0;
  double ram_comb = 0.0;
  double ram_sys = 0.0;
  double util_main = 0.0;
  double util_desc = 0.0;
  double util_comb = 0.0;
  double util_sys = 0.0;
};

struct Capacities {
  std::optional<double> ram_bytes;  // total GPU RAM
};

struct NormalizedSample {
  ResourceSample sample;
  /// Some reading exceeded capacity (or 100%) and was clamped to 1.
  bool clamped = false;
};

struct ResourceTrace {
  std::vector<ResourceSample> samples;
  double interval = kMinSampleInterval;
  Capacities capacities;
};

struct ProfileVerdict {
  bool accepted = false;
  double distance = 0.0;
};

inline NormalizedSample normalize_sample(const RawSample& raw, const Capacities& caps) {
  if (!caps.ram_bytes || !(*caps.ram_bytes > 0.0)) {
    throw Error(Errc::MissingCapacity, "total GPU RAM capacity must be positive");
  }
  const std::array<double, kProfileChannels> readings{raw.ram_main,  raw.ram_desc,  raw.ram_comb,
                                                      raw.ram_sys,   raw.util_main, raw.util_desc,
                                                      raw.util_comb, raw.util_sys};
  NormalizedSample out;
  out.sample.t = raw.t;
  for (std::size_t i = 0; i < kProfileChannels; ++i) {
    if (readings[i] < 0.0 || std::isnan(readings[i])) {
      throw Error(Errc::NegativeRawValue, "channel " + std::to_string(i) + " reading is negative");
    }
    const double scale = i < 4 ? *caps.ram_bytes : 100.0;
    const double v = readings[i] / scale;
    if (v > 1.0) out.clamped = true;
    out.sample.values[i] = std::min(v, 1.0);
  }
  return out;
}

/// Checks the trace invariants; throws InvalidTrace on the first violation.
inline void validate_trace(const ResourceTrace& trace) {
  if (!(trace.interval >= kMinSampleInterval)) {
    throw Error(Errc::InvalidTrace, "sampling interval must be >= 0.1 s");
  }
  constexpr double slack = 1e-9;
  for (std::size_t i = 0; i < trace.samples.size(); ++i) {
    const auto& s = trace.samples[i];
    if (i > 0 && !(s.t > trace.samples[i - 1].t)) {
      throw Error(Errc::InvalidTrace, "timestamps must be strictly increasing", i);
    }
    for (double v : s.values) {
      if (!(v >= 0.0 && v <= 1.0)) throw Error(Errc::InvalidTrace, "channel outside [0,1]", i);
    }
    if (s[Channel::M3] < std::max(s[Channel::M1], s[Channel::M2]) - slack ||
        s[Channel::U3] < std::max(s[Channel::U1], s[Channel::U2]) - slack) {
      throw Error(Errc::InvalidTrace, "combined reading below one of its parts", i);
    }
  }
}

/// Linear interpolation of every channel at n equally spaced times over
/// [first t, last t].
inline ResourceTrace resample_trace(const ResourceTrace& trace, std::size_t n) {
  const auto& in = trace.samples;
  if (in.size() < 2) throw Error(Errc::TraceTooShort, "resampling needs >= 2 samples");
  if (n < 2) throw Error(Errc::BadParams, "resample target must be >= 2 points");

  const double t0 = in.front().t;
  const double span = in.back().t - t0;
  ResourceTrace out;
  out.capacities = trace.capacities;
  out.interval = span / static_cast<double>(n - 1);
  out.samples.reserve(n);

  std::size_t seg = 0;
  for (std::size_t k = 0; k < n; ++k) {
    const double tk = k + 1 == n ? in.back().t
                                 : t0 + span * static_cast<double>(k) / static_cast<double>(n - 1);
    while (seg + 2 < in.size() && in[seg + 1].t <= tk) ++seg;
    const auto& lo = in[seg];
    const auto& hi = in[seg + 1];
    const double w = std::clamp((tk - lo.t) / (hi.t - lo.t), 0.0, 1.0);
    ResourceSample s;
    s.t = tk;
    for (std::size_t c = 0; c < kProfileChannels; ++c) {
      s.values[c] = (1.0 - w) * lo.values[c] + w * hi.values[c];
    }
    out.samples.push_back(s);
  }
  return out;
}

/// sqrt(mean over timesteps of squared 8-vector distance), both traces
/// resampled to the longer length.
inline double trace_distance(const ResourceTrace& a, const ResourceTrace& b) {
  if (a.samples.size() < 2 || b.samples.size() < 2) {
    throw Error(Errc::TraceTooShort, "trace distance needs >= 2 samples per trace");
  }
  const std::size_t n = std::max(a.samples.size(), b.samples.size());
  const auto ra = resample_trace(a, n);
  const auto rb = resample_trace(b, n);
  double sum = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double d = euclidean_distance(ra.samples[k].values, rb.samples[k].values);
    sum += d * d;
  }
  return std::sqrt(sum / static_cast<double>(n));
}

/// Accepts iff distance <= tolerance (inclusive).
inline ProfileVerdict verify_profile(const ResourceTrace& observed, const ResourceTrace& reference,
                                     double tolerance) {
  if (!(tolerance >= 0.0)) throw Error(Errc::InvalidTolerance, "tolerance must be >= 0");
  const double d = trace_distance(observed, reference);
  return {d <= tolerance, d};
}

// ---------------------------------------------------------------------------
// Trace files: a header line {"capacity_ram": bytes, "interval": seconds}
// followed by one JSON record per sample.

struct LoadedTrace {
  ResourceTrace trace;
  std::size_t clamped_samples = 0;
};

inline LoadedTrace load_trace(std::istream& in) {
  std::string line;
  std::size_t line_no = 0;
  bool have_header = false;
  Capacities caps;
  double interval = 0.0;
  LoadedTrace out;

  auto number = [&](const nlohmann::json& rec, const char* key) {
    if (!rec.contains(key) || !rec[key].is_number()) {
      throw Error(Errc::ParseError, std::string("missing numeric field '") + key + "'", line_no);
    }
    return rec[key].get<double>();
  };

  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw Error(Errc::ParseError, e.what(), line_no);
    }
    if (!rec.is_object()) throw Error(Errc::ParseError, "record is not an object", line_no);
    if (!have_header) {
      if (!rec.contains("capacity_ram")) {
        throw Error(Errc::MissingCapacity, "header lacks 'capacity_ram'", line_no);
      }
      caps.ram_bytes = number(rec, "capacity_ram");
      interval = number(rec, "interval");
      have_header = true;
      continue;
    }
    RawSample raw{number(rec, "t"),         number(rec, "ram_main"),  number(rec, "ram_desc"),
                  number(rec, "ram_comb"),  number(rec, "ram_sys"),   number(rec, "util_main"),
                  number(rec, "util_desc"), number(rec, "util_comb"), number(rec, "util_sys")};
    NormalizedSample ns;
    try {
      ns = normalize_sample(raw, caps);
    } catch (const Error& e) {
      throw e.at(line_no);
    }
    if (ns.clamped) ++out.clamped_samples;
    out.trace.samples.push_back(ns.sample);
  }
  if (!have_header) throw Error(Errc::ParseError, "trace file has no header line");
  out.trace.interval = interval;
  out.trace.capacities = caps;
  validate_trace(out.trace);
  return out;
}

}  // namespace semverd
