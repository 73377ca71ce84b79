#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "specrag/docmodel.hpp"
#include "specrag/media.hpp"

namespace specrag {

// ---------------------------------------------------------------------------
// Requests and values

struct GenerationRequest {
    std::string prompt;
    double temperature = 0.7;
    int max_output_tokens = 2048;
    std::vector<MediaRecord> attachments;  // images only
};

struct EmbeddingVector {
    std::vector<float> values;

    std::size_t dim() const { return values.size(); }
    double norm() const;
    bool operator==(const EmbeddingVector&) const = default;
};

/// Dot product accumulated in double. Equals cosine for normalized vectors.
double dot(const EmbeddingVector& a, const EmbeddingVector& b);
double cosine(const EmbeddingVector& a, const EmbeddingVector& b);

// ---------------------------------------------------------------------------
// Contracts. Implementations must tolerate concurrent calls.

class GenerationProvider {
  public:
    virtual ~GenerationProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string complete(const GenerationRequest& request) const = 0;
};

class EmbeddingProvider {
  public:
    virtual ~EmbeddingProvider() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dim() const = 0;
    /// Identifies the vector space; indices record it so queries are never
    /// embedded into a different space than the chunks.
    virtual std::string fingerprint() const = 0;
    virtual EmbeddingVector encode(std::string_view text) const = 0;
};

class DescriptionProvider {
  public:
    virtual ~DescriptionProvider() = default;
    virtual std::string name() const = 0;
    virtual std::string describe_table(const Block& table) const = 0;
    virtual std::string describe_image(const Block& image) const = 0;
};

class ClaimProvider {
  public:
    virtual ~ClaimProvider() = default;
    virtual std::string name() const = 0;
    virtual std::vector<std::string> extract_claims(std::string_view text) const = 0;
    virtual bool entails(std::string_view claim, std::string_view against) const = 0;
};

struct ProviderSet {
    std::shared_ptr<const GenerationProvider> generation;
    std::shared_ptr<const EmbeddingProvider> embedding;
    std::shared_ptr<const DescriptionProvider> description;
    std::shared_ptr<const ClaimProvider> claims;
};

/// Checks preconditions (non-empty prompt, temperature in [0,2], positive
/// token limit, image-only attachments) and calls the provider.
std::string generate(const GenerationRequest& request, const GenerationProvider& provider);

/// Rejects blank text, checks the dimension and returns a unit-norm vector.
EmbeddingVector embed(std::string_view text, const EmbeddingProvider& provider);

// ---------------------------------------------------------------------------
// Deterministic offline stubs

/// Pure function of the prompt. Recognises the three shipped prompt shapes:
///  - query reformulation: one sub-query per question sentence, as JSON;
///  - metadata extraction: the rule-based extractor's result, as JSON;
///  - answer generation: context sentences sharing a content word with the
///    question inside <answer>, every context doc_name inside <docs>.
class StubGenerationProvider final : public GenerationProvider {
  public:
    std::string name() const override { return "stub"; }
    std::string complete(const GenerationRequest& request) const override;
};

/// Feature-hashing bag of words: each lowercased term goes to bucket
/// h1(term) mod dim with sign from h2(term), then L2 normalization.
class HashingEmbeddingProvider final : public EmbeddingProvider {
  public:
    static constexpr std::uint64_t kDefaultBucketSeed = 0x5eed0001ULL;
    static constexpr std::uint64_t kDefaultSignSeed = 0x5eed0002ULL;

    explicit HashingEmbeddingProvider(std::size_t dim = 1024,
                                      std::uint64_t bucket_seed = kDefaultBucketSeed,
                                      std::uint64_t sign_seed = kDefaultSignSeed);

    std::string name() const override { return "stub"; }
    std::size_t dim() const override { return dim_; }
    std::string fingerprint() const override;
    EmbeddingVector encode(std::string_view text) const override;

  private:
    std::size_t dim_;
    std::uint64_t bucket_seed_;
    std::uint64_t sign_seed_;
};

/// Tables: "table with R rows and C columns; headers: ...; first row: ...".
/// Images: "figure <media_id>: <caption>".
class StubDescriptionProvider final : public DescriptionProvider {
  public:
    std::string name() const override { return "stub"; }
    std::string describe_table(const Block& table) const override;
    std::string describe_image(const Block& image) const override;
};

// ---------------------------------------------------------------------------
// HTTP adapters (OpenAI-compatible JSON APIs over plain HTTP)

struct HttpEndpoint {
    std::string base_url;  // "http://host:port"
    std::string model;
    std::string api_key_env = "SPECRAG_API_KEY";
    int timeout_seconds = 60;

    bool operator==(const HttpEndpoint&) const = default;
};

/// POST {base_url}/v1/chat/completions
class HttpGenerationProvider final : public GenerationProvider {
  public:
    explicit HttpGenerationProvider(HttpEndpoint endpoint);
    std::string name() const override { return "http"; }
    std::string complete(const GenerationRequest& request) const override;

  private:
    HttpEndpoint endpoint_;
};

/// POST {base_url}/v1/embeddings
class HttpEmbeddingProvider final : public EmbeddingProvider {
  public:
    HttpEmbeddingProvider(HttpEndpoint endpoint, std::size_t dim);
    std::string name() const override { return "http"; }
    std::size_t dim() const override { return dim_; }
    std::string fingerprint() const override;
    EmbeddingVector encode(std::string_view text) const override;

  private:
    HttpEndpoint endpoint_;
    std::size_t dim_;
};

/// Describes media by prompting a generation provider.
class GenerationDescriptionProvider final : public DescriptionProvider {
  public:
    explicit GenerationDescriptionProvider(std::shared_ptr<const GenerationProvider> generator);
    std::string name() const override { return "generation"; }
    std::string describe_table(const Block& table) const override;
    std::string describe_image(const Block& image) const override;

  private:
    std::shared_ptr<const GenerationProvider> generator_;
};

}  // namespace specrag
