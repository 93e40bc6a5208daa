#pragma once

// Embedding provider contract, the feature-hashing mock embedder, the
// precomputed-file provider and a digest-keyed cache.

#include <cctype>
#include <cstdint>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <shared_mutex>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "semverd/core.hpp"
#include "semverd/digest.hpp"
#include "semverd/error.hpp"

namespace semverd {

enum class ProviderKind { Mock, ExternalFile, ExternalHttp };

inline std::string_view provider_kind_name(ProviderKind kind) noexcept {
  switch (kind) {
    case ProviderKind::Mock: return "mock";
    case ProviderKind::ExternalFile: return "external-file";
    case ProviderKind::ExternalHttp: return "external-http";
  }
  return "unknown";
}

inline constexpr std::size_t kDefaultMockDimension = 1024;
inline constexpr std::size_t kMinMockDimension = 8;
inline constexpr std::string_view kDefaultHashSeed = "semverd";

struct EmbeddingProviderSpec {
  ProviderKind kind = ProviderKind::Mock;
  std::size_t dimension = kDefaultMockDimension;
  /// Model name, or the hash seed for the mock.
  std::string identity{kDefaultHashSeed};
  /// File path (external-file) or URL (external-http); unused by the mock.
  std::string location;
  /// external-http only. Unset timeout falls back to SEMVERD_HTTP_TIMEOUT_MS.
  std::optional<int> timeout_ms;
  int retries = 2;

  friend bool operator==(const EmbeddingProviderSpec&, const EmbeddingProviderSpec&) = default;
};

inline EmbeddingProviderSpec mock_spec(std::size_t dimension = kDefaultMockDimension,
                                       std::string seed = std::string(kDefaultHashSeed)) {
  return {ProviderKind::Mock, dimension, std::move(seed), {}, std::nullopt, 2};
}

/// Whitespace per isspace in the "C" locale.
inline std::string_view trim(std::string_view s) noexcept {
  auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
  while (!s.empty() && is_space(s.front())) s.remove_prefix(1);
  while (!s.empty() && is_space(s.back())) s.remove_suffix(1);
  return s;
}

class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;

  [[nodiscard]] virtual const EmbeddingProviderSpec& spec() const noexcept = 0;
  [[nodiscard]] std::size_t dimension() const noexcept { return spec().dimension; }

  /// Unit-norm vector for a non-empty text. Implementations must be
  /// deterministic and safe to call concurrently.
  [[nodiscard]] virtual EmbeddingVector embed_text(std::string_view text) const = 0;

  [[nodiscard]] virtual std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) const {
    std::vector<EmbeddingVector> out;
    out.reserve(texts.size());
    for (std::size_t i = 0; i < texts.size(); ++i) {
      try {
        out.push_back(embed_text(texts[i]));
      } catch (const Error& e) {
        throw e.at(i);
      }
    }
    return out;
  }
};

namespace detail {

inline void require_text(std::string_view text, std::optional<std::size_t> index = std::nullopt) {
  if (trim(text).empty()) throw Error(Errc::EmptyText, "text is empty after trimming", index);
}

inline void require_provider_shape(const EmbeddingProvider& provider, const EmbeddingVector& v) {
  if (v.dimension() != provider.dimension()) {
    throw Error(Errc::ProviderUnavailable,
                "provider returned dimension " + std::to_string(v.dimension()) + ", expected " +
                    std::to_string(provider.dimension()));
  }
}

}  // namespace detail

/// Embeds one text. Throws EmptyText for blank input and
/// ProviderUnavailable when the provider misbehaves.
inline EmbeddingVector embed(const EmbeddingProvider& provider, std::string_view text) {
  detail::require_text(text);
  auto v = provider.embed_text(text);
  detail::require_provider_shape(provider, v);
  return v;
}

/// Element i equals embed(provider, texts[i]). The first failing item is
/// reported with its index.
inline std::vector<EmbeddingVector> batch_embed(const EmbeddingProvider& provider,
                                                std::span<const std::string> texts) {
  for (std::size_t i = 0; i < texts.size(); ++i) detail::require_text(texts[i], i);
  if (texts.empty()) return {};
  auto out = provider.embed_texts(texts);
  if (out.size() != texts.size()) {
    throw Error(Errc::ProviderUnavailable, "provider returned " + std::to_string(out.size()) +
                                               " vectors for " + std::to_string(texts.size()) +
                                               " texts");
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    try {
      detail::require_provider_shape(provider, out[i]);
    } catch (const Error& e) {
      throw e.at(i);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Mock embedder

/// Lowercases ASCII and splits on every byte that is not an ASCII letter or
/// digit. Bytes >= 0x80 are kept inside tokens so non-ASCII words survive.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> tokens;
  std::string current;
  for (char ch : text) {
    const auto c = static_cast<unsigned char>(ch);
    if (c >= 0x80 || std::isalnum(c)) {
      current.push_back(static_cast<char>(c < 0x80 ? std::tolower(c) : c));
    } else if (!current.empty()) {
      tokens.push_back(std::move(current));
      current.clear();
    }
  }
  if (!current.empty()) tokens.push_back(std::move(current));
  return tokens;
}

namespace detail {

/// FNV-1a over seed, a 0xFF separator (never valid inside a token) and the
/// token, finished with splitmix64 so the low bits are well mixed.
inline std::uint64_t keyed_token_hash(std::string_view seed, std::string_view token) noexcept {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  auto feed = [&h](unsigned char c) {
    h ^= c;
    h *= 0x100000001B3ULL;
  };
  for (char c : seed) feed(static_cast<unsigned char>(c));
  feed(0xFF);
  for (char c : token) feed(static_cast<unsigned char>(c));
  h += 0x9E3779B97F4A7C15ULL;
  h = (h ^ (h >> 30)) * 0xBF58476D1CE4E5B9ULL;
  h = (h ^ (h >> 27)) * 0x94D049BB133111EBULL;
  return h ^ (h >> 31);
}

}  // namespace detail

/// Signed feature-hashed bag of tokens, L2-normalized.
inline EmbeddingVector mock_embed(std::string_view text, std::size_t dimension,
                                  std::string_view seed) {
  if (dimension < kMinMockDimension) {
    throw Error(Errc::BadParams, "mock dimension must be >= 8, got " + std::to_string(dimension));
  }
  const auto tokens = tokenize(text);
  if (tokens.empty()) throw Error(Errc::EmptyText, "no tokens in text");
  std::vector<double> acc(dimension, 0.0);
  for (const auto& token : tokens) {
    const std::uint64_t h = detail::keyed_token_hash(seed, token);
    const std::size_t bucket = static_cast<std::size_t>(h % dimension);
    acc[bucket] += (h >> 63) ? -1.0 : 1.0;
  }
  // Every token cancelling out (e.g. two tokens colliding with opposite signs)
  // leaves no direction to report.
  if (!(l2_norm(acc) > kZeroNormEpsilon)) {
    throw Error(Errc::ZeroVector, "token features cancel to a zero vector");
  }
  return l2_normalize(std::move(acc));
}

class MockProvider final : public EmbeddingProvider {
 public:
  explicit MockProvider(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {
    if (spec_.kind != ProviderKind::Mock) throw Error(Errc::BadParams, "spec is not a mock spec");
    if (spec_.dimension < kMinMockDimension) {
      throw Error(Errc::BadParams, "mock dimension must be >= 8");
    }
  }
  MockProvider(std::size_t dimension, std::string seed)
      : MockProvider(mock_spec(dimension, std::move(seed))) {}

  [[nodiscard]] const EmbeddingProviderSpec& spec() const noexcept override { return spec_; }

  [[nodiscard]] EmbeddingVector embed_text(std::string_view text) const override {
    return mock_embed(text, spec_.dimension, spec_.identity);
  }

 private:
  EmbeddingProviderSpec spec_;
};

// ---------------------------------------------------------------------------
// External-file provider: JSONL of {"digest": hex sha256, "vector": [...]}.

class FileProvider final : public EmbeddingProvider {
 public:
  explicit FileProvider(EmbeddingProviderSpec spec) : spec_(std::move(spec)) {
    std::ifstream in(spec_.location);
    if (!in) {
      throw Error(Errc::ProviderUnavailable, "cannot open embeddings file '" + spec_.location + "'");
    }
    load(in);
  }

  FileProvider(EmbeddingProviderSpec spec, std::istream& in) : spec_(std::move(spec)) { load(in); }

  [[nodiscard]] const EmbeddingProviderSpec& spec() const noexcept override { return spec_; }
  [[nodiscard]] std::size_t size() const noexcept { return table_.size(); }

  [[nodiscard]] EmbeddingVector embed_text(std::string_view text) const override {
    auto it = table_.find(text_digest(text));
    if (it == table_.end()) {
      throw Error(Errc::ProviderUnavailable, "no precomputed embedding for digest " +
                                                 text_digest(text));
    }
    return it->second;
  }

 private:
  void load(std::istream& in) {
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      nlohmann::json record;
      try {
        record = nlohmann::json::parse(line);
      } catch (const nlohmann::json::exception& e) {
        throw Error(Errc::InvalidEmbeddingFile, e.what(), line_no);
      }
      if (!record.is_object() || !record.contains("digest") || !record["digest"].is_string() ||
          !record.contains("vector") || !record["vector"].is_array()) {
        throw Error(Errc::InvalidEmbeddingFile, "record needs string 'digest' and array 'vector'",
                    line_no);
      }
      const auto& arr = record["vector"];
      if (arr.size() != spec_.dimension) {
        throw Error(Errc::InvalidEmbeddingFile,
                    "vector length " + std::to_string(arr.size()) + " != declared dimension " +
                        std::to_string(spec_.dimension),
                    line_no);
      }
      std::vector<double> values;
      values.reserve(arr.size());
      for (const auto& x : arr) {
        if (!x.is_number()) throw Error(Errc::InvalidEmbeddingFile, "non-numeric component", line_no);
        values.push_back(x.get<double>());
      }
      try {
        table_.insert_or_assign(record["digest"].get<std::string>(), l2_normalize(std::move(values)));
      } catch (const Error& e) {
        throw Error(Errc::InvalidEmbeddingFile, e.what(), line_no);
      }
    }
  }

  EmbeddingProviderSpec spec_;
  std::unordered_map<std::string, EmbeddingVector> table_;
};

// ---------------------------------------------------------------------------
// Cache

/// Digest-keyed vector store. Concurrent readers; inserts keep the first
/// value stored for a digest.
class EmbeddingCache {
 public:
  [[nodiscard]] std::optional<EmbeddingVector> find(const std::string& digest) const {
    std::shared_lock lock(mutex_);
    auto it = entries_.find(digest);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }

  /// Returns the stored vector, which is `v` unless another writer won.
  EmbeddingVector insert_if_absent(const std::string& digest, EmbeddingVector v) {
    std::unique_lock lock(mutex_);
    return entries_.try_emplace(digest, std::move(v)).first->second;
  }

  [[nodiscard]] std::size_t size() const {
    std::shared_lock lock(mutex_);
    return entries_.size();
  }

 private:
  mutable std::shared_mutex mutex_;
  std::unordered_map<std::string, EmbeddingVector> entries_;
};

class CachingProvider final : public EmbeddingProvider {
 public:
  explicit CachingProvider(std::shared_ptr<const EmbeddingProvider> inner)
      : inner_(std::move(inner)), cache_(std::make_shared<EmbeddingCache>()) {}

  [[nodiscard]] const EmbeddingProviderSpec& spec() const noexcept override { return inner_->spec(); }
  [[nodiscard]] const EmbeddingCache& cache() const noexcept { return *cache_; }

  [[nodiscard]] EmbeddingVector embed_text(std::string_view text) const override {
    const auto digest = text_digest(text);
    if (auto hit = cache_->find(digest)) return *hit;
    return cache_->insert_if_absent(digest, inner_->embed_text(text));
  }

  [[nodiscard]] std::vector<EmbeddingVector> embed_texts(
      std::span<const std::string> texts) const override {
    std::vector<std::optional<EmbeddingVector>> slots(texts.size());
    std::vector<std::string> missing;
    std::vector<std::size_t> missing_at;
    for (std::size_t i = 0; i < texts.size(); ++i) {
      slots[i] = cache_->find(text_digest(texts[i]));
      if (!slots[i]) {
        missing.push_back(texts[i]);
        missing_at.push_back(i);
      }
    }
    if (!missing.empty()) {
      std::vector<EmbeddingVector> fresh;
      try {
        fresh = inner_->embed_texts(missing);
      } catch (const Error& e) {
        throw e.index() ? e.at(missing_at[*e.index()]) : e;
      }
      for (std::size_t k = 0; k < fresh.size() && k < missing_at.size(); ++k) {
        slots[missing_at[k]] = cache_->insert_if_absent(text_digest(missing[k]), std::move(fresh[k]));
      }
    }
    std::vector<EmbeddingVector> out;
    out.reserve(slots.size());
    for (auto& s : slots) {
      if (!s) throw Error(Errc::ProviderUnavailable, "provider returned too few vectors");
      out.push_back(std::move(*s));
    }
    return out;
  }

 private:
  std::shared_ptr<const EmbeddingProvider> inner_;
  std::shared_ptr<EmbeddingCache> cache_;
};

}  // namespace semverd
