#pragma once

#include <sys/wait.h>

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "semverd/error.hpp"
#include "semverd/gpuprofile.hpp"
#include "semverd/rng.hpp"

namespace semverd::test {

inline std::string data_path(const std::string& name) { return std::string(SEMVERD_DATA_DIR) + "/" + name; }

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

/// Runs `fn` and returns the Errc it threw, or nullopt if it returned.
template <typename Fn>
std::optional<Errc> error_of(Fn&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  return std::nullopt;
}

inline std::vector<double> random_vector(Rng& rng, std::size_t dim, double scale = 1.0) {
  std::vector<double> v(dim);
  for (double& x : v) x = scale * rng.normal();
  return v;
}

inline ResourceTrace constant_trace(std::size_t n, double value, double interval = 0.5) {
  ResourceTrace t;
  t.interval = interval;
  for (std::size_t i = 0; i < n; ++i) {
    ResourceSample s;
    s.t = static_cast<double>(i) * interval;
    s.values.fill(value);
    t.samples.push_back(s);
  }
  return t;
}

/// Random trace on a fixed time grid; combined channels respect m3/u3 >= parts.
inline ResourceTrace random_trace(Rng& rng, std::size_t n, double interval = 0.5) {
  ResourceTrace t;
  t.interval = interval;
  for (std::size_t i = 0; i < n; ++i) {
    ResourceSample s;
    s.t = static_cast<double>(i) * interval;
    for (double& v : s.values) v = rng.uniform();
    s[Channel::M3] = std::max({s[Channel::M1], s[Channel::M2], s[Channel::M3]});
    s[Channel::U3] = std::max({s[Channel::U1], s[Channel::U2], s[Channel::U3]});
    t.samples.push_back(s);
  }
  return t;
}

struct RunResult {
  int exit_code = -1;
  std::string out;
};

/// Runs the CLI through the shell, capturing stdout. stderr is discarded.
inline RunResult run_cli(const std::string& args) {
  const std::string cmd = std::string("\"") + SEMVERD_CLI_PATH + "\" " + args + " 2>/dev/null";
  RunResult r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int status = pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

}  // namespace semverd::test
