#pragma once

#include <chrono>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tad/common.hpp"

namespace tad {

enum class ProviderKind { kHashFallback, kExternalService };

std::string_view ToString(ProviderKind kind);
ProviderKind ProviderKindFromString(std::string_view s);

struct EndpointConfig {
  std::string base_url;   // e.g. "http://127.0.0.1:8080"
  std::string path = "/embed";
  // Name of the environment variable holding a bearer token; empty for none.
  std::string auth_token_env;
  std::chrono::milliseconds timeout{5000};
};

struct EmbeddingProviderConfig {
  ProviderKind kind = ProviderKind::kHashFallback;
  int dimension = 384;
  std::uint64_t seed = 0;
  std::optional<EndpointConfig> endpoint;
};

Json ToJson(const EmbeddingProviderConfig& config);
EmbeddingProviderConfig EmbeddingProviderConfigFromJson(const Json& j);

/// Prompt encoder. Every returned vector has exactly dimension() entries.
class EmbeddingProvider {
 public:
  virtual ~EmbeddingProvider() = default;
  virtual ProviderKind kind() const = 0;
  virtual int dimension() const = 0;
  virtual std::vector<double> Embed(std::string_view text) const = 0;

  /// Embeds a batch; row i corresponds to texts[i].
  virtual Matrix EmbedBatch(const std::vector<std::string>& texts) const;
};

/// Deterministic feature-hashing encoder.
///
/// Tokens are maximal runs of ASCII letters/digits and non-ASCII bytes, with
/// ASCII letters lowercased. Each token t contributes sign(h) to slot
/// h mod dimension, where h = FNV-1a-64 over the seed (8 bytes, little endian)
/// followed by the token bytes, and sign(h) is -1 when bit 32 of h is set.
/// A text with no tokens is hashed whole as a single token. The result is
/// scaled to unit L2 norm; if the accumulated vector is exactly zero, the slot
/// of the whole-text hash is set to 1.
class HashEmbedder final : public EmbeddingProvider {
 public:
  explicit HashEmbedder(int dimension = 384, std::uint64_t seed = 0);

  ProviderKind kind() const override { return ProviderKind::kHashFallback; }
  int dimension() const override { return dimension_; }
  std::vector<double> Embed(std::string_view text) const override;
  Matrix EmbedBatch(const std::vector<std::string>& texts) const override;

 private:
  int dimension_;
  std::uint64_t seed_;
};

/// Remote encoder: POST {"text": ...} to base_url + path, expecting
/// {"embedding": [...]} back. The vector is returned verbatim after a length
/// check.
class ServiceEmbedder final : public EmbeddingProvider {
 public:
  ServiceEmbedder(int dimension, EndpointConfig endpoint);

  ProviderKind kind() const override { return ProviderKind::kExternalService; }
  int dimension() const override { return dimension_; }
  std::vector<double> Embed(std::string_view text) const override;

 private:
  int dimension_;
  EndpointConfig endpoint_;
};

std::unique_ptr<EmbeddingProvider> MakeEmbeddingProvider(const EmbeddingProviderConfig& config);

/// Splits text into the hash embedder's tokens.
std::vector<std::string> HashTokens(std::string_view text);

}  // namespace tad
