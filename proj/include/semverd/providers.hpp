#pragma once

#include <memory>

#include "semverd/embedding.hpp"
#include "semverd/http_provider.hpp"

namespace semverd {

inline std::shared_ptr<const EmbeddingProvider> make_provider(const EmbeddingProviderSpec& spec) {
  switch (spec.kind) {
    case ProviderKind::Mock: return std::make_shared<MockProvider>(spec);
    case ProviderKind::ExternalFile: return std::make_shared<FileProvider>(spec);
    case ProviderKind::ExternalHttp: return std::make_shared<HttpProvider>(spec);
  }
  throw Error(Errc::BadParams, "unknown provider kind");
}

/// make_provider wrapped in a digest-keyed cache.
inline std::shared_ptr<const EmbeddingProvider> make_cached_provider(
    const EmbeddingProviderSpec& spec) {
  return std::make_shared<CachingProvider>(make_provider(spec));
}

}  // namespace semverd
