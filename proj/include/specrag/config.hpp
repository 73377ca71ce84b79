#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrag/pipeline.hpp"
#include "specrag/providers.hpp"

namespace specrag {

struct ProviderConfig {
    std::string generation = "stub";   // stub | http
    HttpEndpoint generation_endpoint;
    std::string embedding = "stub";    // stub | http
    HttpEndpoint embedding_endpoint;
    std::size_t embedding_dim = 1024;
    std::uint64_t bucket_seed = HashingEmbeddingProvider::kDefaultBucketSeed;
    std::uint64_t sign_seed = HashingEmbeddingProvider::kDefaultSignSeed;
    std::string description = "stub";  // stub | generation
    std::string claims = "lexical";    // lexical | generation
    double entailment_threshold = 0.8;

    bool operator==(const ProviderConfig&) const = default;
};

struct PipelineConfig {
    PipelineOptions pipeline;
    ProviderConfig providers;
    std::string glossary_path;  // empty: built-in glossary
    std::string index_path = "index";

    bool operator==(const PipelineConfig&) const = default;
};

/// Every problem in `j`, each prefixed with its JSON pointer. Missing keys
/// take defaults; unknown keys are errors.
std::vector<std::string> validate_config(const nlohmann::json& j);

/// Throws ConfigError listing every problem found.
PipelineConfig config_from_json(const nlohmann::json& j);
nlohmann::ordered_json config_to_json(const PipelineConfig& cfg);

/// Relative glossary and index paths are resolved against the file's directory.
PipelineConfig load_config(const std::filesystem::path& path);

ProviderSet make_providers(const ProviderConfig& cfg);
std::shared_ptr<const ClaimProvider> make_claim_provider(const ProviderConfig& cfg,
                                                         const ProviderSet& providers);
Glossary load_glossary(const PipelineConfig& cfg);

}  // namespace specrag
