#pragma once

#include <filesystem>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "specrag/answer.hpp"
#include "specrag/chunker.hpp"
#include "specrag/index.hpp"
#include "specrag/providers.hpp"
#include "specrag/querypipe.hpp"
#include "specrag/retriever.hpp"

namespace specrag {

struct GenerationConfig {
    double temperature = 0.7;
    std::size_t budget_tokens = kDefaultBudgetTokens;

    bool operator==(const GenerationConfig&) const = default;
};

/// Everything that changes pipeline behaviour. The stage switches line up
/// with the ablation ladder.
struct PipelineOptions {
    ChunkingConfig chunking;  // strategy Fixed = naive chunking
    RetrievalConfig retrieval;
    GenerationConfig generation;
    bool query_expansion = true;  // abbreviation expansion and reformulation
    bool multimodal = true;       // media descriptions at ingest, image attachments
    MetadataMode metadata_mode = MetadataMode::Rules;

    bool operator==(const PipelineOptions&) const = default;
};

struct DocumentIngest {
    std::string doc_name;
    std::size_t chunks = 0;
    std::size_t media = 0;
};

struct CorpusLoad {
    Corpus corpus;
    std::vector<std::string> errors;  // "path: message", one per rejected file
};

/// Loads every .md, .markdown and .json file under `dir` (recursively, in
/// path order). Files that fail to parse are reported, not thrown.
CorpusLoad load_corpus(const std::filesystem::path& dir);

/// Chunks, tags and embeds every document into a sealed index.
HybridIndex build_index(const Corpus& corpus, const ChunkingConfig& chunking, bool multimodal,
                        const ProviderSet& providers, std::vector<DocumentIngest>* summary = nullptr);

struct StageTimings {
    double pre_retrieval_ms = 0.0;
    double retrieval_ms = 0.0;
    double post_retrieval_ms = 0.0;
    double generation_ms = 0.0;
    double total_ms = 0.0;

    double stage_sum() const {
        return pre_retrieval_ms + retrieval_ms + post_retrieval_ms + generation_ms;
    }
};

struct QueryOptions {
    bool deep = false;       // also retrieve for planned follow-ups
    bool no_filter = false;  // skip the metadata filter for this query
};

struct Answer {
    std::string question;
    std::string text;
    std::vector<std::string> cited_docs;
    std::vector<MediaRecord> media;
    FusedContext provenance;
    std::vector<std::string> warnings;
    std::optional<std::string> error;

    // trace
    QueryPlan plan;
    std::vector<SubQueryResult> retrieval;
    std::size_t prompt_tokens = 0;
    StageTimings timings;
};

class Pipeline {
  public:
    Pipeline(std::shared_ptr<const HybridIndex> index, ProviderSet providers,
             PipelineOptions options, Glossary glossary);

    /// Never throws for provider trouble; those surface in Answer::error and
    /// Answer::warnings. Throws EmptyIndex.
    Answer answer(const std::string& question, const QueryOptions& query = {}) const;

    const HybridIndex& index() const { return *index_; }
    const PipelineOptions& options() const { return options_; }
    const ProviderSet& providers() const { return providers_; }

  private:
    QueryPlan plan(const std::string& question, Answer& out) const;

    std::shared_ptr<const HybridIndex> index_;
    ProviderSet providers_;
    PipelineOptions options_;
    Glossary glossary_;
};

}  // namespace specrag
