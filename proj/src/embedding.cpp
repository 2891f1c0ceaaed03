#include "tad/embedding.hpp"

#include <cmath>

#include "http_client.hpp"

namespace tad {

std::string_view ToString(ProviderKind kind) {
  return kind == ProviderKind::kHashFallback ? "HASH_FALLBACK" : "EXTERNAL_SERVICE";
}

ProviderKind ProviderKindFromString(std::string_view s) {
  if (s == "HASH_FALLBACK") return ProviderKind::kHashFallback;
  if (s == "EXTERNAL_SERVICE") return ProviderKind::kExternalService;
  throw Error(ErrorKind::kInvalidArgument, "unknown provider kind '" + std::string(s) + "'");
}

Json ToJson(const EmbeddingProviderConfig& c) {
  Json j = {{"kind", ToString(c.kind)}, {"dimension", c.dimension}, {"seed", c.seed}};
  if (c.endpoint) {
    j["endpoint"] = {{"base_url", c.endpoint->base_url},
                     {"path", c.endpoint->path},
                     {"auth_token_env", c.endpoint->auth_token_env},
                     {"timeout_ms", c.endpoint->timeout.count()}};
  }
  return j;
}

EmbeddingProviderConfig EmbeddingProviderConfigFromJson(const Json& j) {
  EmbeddingProviderConfig c;
  c.kind = ProviderKindFromString(j.at("kind").get<std::string>());
  c.dimension = j.at("dimension").get<int>();
  c.seed = j.value("seed", std::uint64_t{0});
  if (auto it = j.find("endpoint"); it != j.end() && !it->is_null()) {
    EndpointConfig e;
    e.base_url = it->at("base_url").get<std::string>();
    e.path = it->value("path", std::string("/embed"));
    e.auth_token_env = it->value("auth_token_env", std::string());
    e.timeout = std::chrono::milliseconds(it->value("timeout_ms", 5000));
    c.endpoint = e;
  }
  return c;
}

Matrix EmbeddingProvider::EmbedBatch(const std::vector<std::string>& texts) const {
  Matrix out(static_cast<Eigen::Index>(texts.size()), dimension());
  for (std::size_t i = 0; i < texts.size(); ++i) {
    const auto v = Embed(texts[i]);
    out.row(static_cast<Eigen::Index>(i)) =
        Eigen::Map<const Eigen::RowVectorXd>(v.data(), static_cast<Eigen::Index>(v.size()));
  }
  return out;
}

std::vector<std::string> HashTokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (unsigned char c : text) {
    const bool ascii_alnum = (c >= '0' && c <= '9') || (c >= 'a' && c <= 'z') ||
                             (c >= 'A' && c <= 'Z');
    if (ascii_alnum || c >= 0x80) {
      cur.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a')
                                         : static_cast<char>(c));
    } else if (!cur.empty()) {
      tokens.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

HashEmbedder::HashEmbedder(int dimension, std::uint64_t seed) : dimension_(dimension), seed_(seed) {
  if (dimension <= 0) throw Error(ErrorKind::kInvalidArgument, "embedding dimension must be positive");
}

namespace {

std::uint64_t SeededHash(std::uint64_t seed, std::string_view token) {
  char seed_bytes[8];
  for (int i = 0; i < 8; ++i) seed_bytes[i] = static_cast<char>((seed >> (8 * i)) & 0xFF);
  return Fnv1a(token, Fnv1a(std::string_view(seed_bytes, 8)));
}

}  // namespace

std::vector<double> HashEmbedder::Embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot embed empty text");
  std::vector<double> v(dimension_, 0.0);
  const auto dim = static_cast<std::uint64_t>(dimension_);
  auto add = [&](std::string_view token) {
    const std::uint64_t h = SeededHash(seed_, token);
    v[h % dim] += ((h >> 32) & 1) ? -1.0 : 1.0;
  };
  const auto tokens = HashTokens(text);
  if (tokens.empty()) {
    add(text);
  } else {
    for (const auto& t : tokens) add(t);
  }
  double norm2 = 0.0;
  for (double x : v) norm2 += x * x;
  if (norm2 == 0.0) {
    v[SeededHash(seed_, text) % dim] = 1.0;
    return v;
  }
  const double inv = 1.0 / std::sqrt(norm2);
  for (double& x : v) x *= inv;
  return v;
}

Matrix HashEmbedder::EmbedBatch(const std::vector<std::string>& texts) const {
  const auto n = static_cast<std::ptrdiff_t>(texts.size());
  for (const auto& t : texts) {
    if (t.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot embed empty text");
  }
  Matrix out(n, dimension_);
#pragma omp parallel for schedule(static)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto v = Embed(texts[i]);
    for (int j = 0; j < dimension_; ++j) out(i, j) = v[j];
  }
  return out;
}

ServiceEmbedder::ServiceEmbedder(int dimension, EndpointConfig endpoint)
    : dimension_(dimension), endpoint_(std::move(endpoint)) {
  if (dimension <= 0) throw Error(ErrorKind::kInvalidArgument, "embedding dimension must be positive");
  if (endpoint_.timeout.count() <= 0) {
    throw Error(ErrorKind::kInvalidArgument, "embedding service timeout must be positive");
  }
}

std::vector<double> ServiceEmbedder::Embed(std::string_view text) const {
  if (text.empty()) throw Error(ErrorKind::kInvalidArgument, "cannot embed empty text");
  const Json reply = detail::PostJson(endpoint_.base_url, endpoint_.path,
                                      {{"text", std::string(text)}}, endpoint_.auth_token_env,
                                      endpoint_.timeout);
  auto it = reply.find("embedding");
  if (it == reply.end() || !it->is_array()) {
    throw Error(ErrorKind::kCorrupted, "embedding service reply lacks an 'embedding' array");
  }
  if (it->size() != static_cast<std::size_t>(dimension_)) {
    throw Error(ErrorKind::kInvalidArgument,
                "embedding length mismatch: expected " + std::to_string(dimension_) + ", got " +
                    std::to_string(it->size()));
  }
  std::vector<double> v;
  v.reserve(it->size());
  for (const auto& x : *it) {
    if (!x.is_number()) throw Error(ErrorKind::kCorrupted, "non-numeric embedding value");
    v.push_back(x.get<double>());
  }
  return v;
}

std::unique_ptr<EmbeddingProvider> MakeEmbeddingProvider(const EmbeddingProviderConfig& c) {
  if (c.kind == ProviderKind::kHashFallback) {
    return std::make_unique<HashEmbedder>(c.dimension, c.seed);
  }
  if (!c.endpoint) {
    throw Error(ErrorKind::kInvalidArgument, "external embedding provider needs an endpoint");
  }
  return std::make_unique<ServiceEmbedder>(c.dimension, *c.endpoint);
}

}  // namespace tad
