#pragma once

#include <optional>
#include <string>
#include <vector>

#include "specrag/index.hpp"
#include "specrag/querypipe.hpp"

namespace specrag {

enum class Origin { Leaf, ParentExpansion };

std::string_view to_string(Origin origin);

struct ScoredChunk {
    std::string chunk_id;
    double cos_score = 0.0;  // [-1, 1]
    double lex_raw = 0.0;    // BM25
    double lex_norm = 0.0;   // min-max over the candidate pool
    double fused = 0.0;      // [0, 1]
    Origin origin = Origin::Leaf;
    std::optional<std::string> via_child;  // set for parent expansions
    bool inherited = false;                // fused taken from via_child

    bool operator==(const ScoredChunk&) const = default;
};

/// How an expanded parent is scored.
enum class ParentScoring {
    Self,     // fused score of the parent's own text against the query
    Inherit,  // max of its own score and the child's score
};

struct StageToggles {
    bool hybrid = true;        // off: dense pool only, alpha = 1
    bool hierarchical = true;  // off: no parent expansion
    bool filter = true;        // metadata filter in post_process
    bool rerank = true;        // off: keep retrieval order

    bool operator==(const StageToggles&) const = default;
};

struct RetrievalConfig {
    double alpha = 0.5;
    std::size_t candidate_k = 40;
    std::size_t final_k = 5;
    bool expand_parents = true;
    ParentScoring parent_scoring = ParentScoring::Inherit;
    StageToggles stages;

    bool operator==(const RetrievalConfig&) const = default;

    /// 0 <= alpha <= 1, 0 < final_k <= candidate_k.
    void validate() const;
};

/// alpha * (cos + 1) / 2 + (1 - alpha) * lex_norm
double fused_score(double alpha, double cos_score, double lex_norm);

/// Total order used everywhere: fused descending, then cosine descending, then chunk_id ascending.
bool ranks_before(const ScoredChunk& a, const ScoredChunk& b);

/// True when every constrained dimension of `query` intersects the chunk's
/// metadata. An empty chunk field fails a constrained dimension.
bool metadata_matches(const SpecMetadata& chunk, const QueryMetadata& query);

std::vector<ScoredChunk> retrieve(const std::string& sub_query, const RetrievalConfig& cfg,
                                  const HybridIndex& idx, const EmbeddingProvider& embedder);

struct FilterDecision {
    std::string chunk_id;
    bool kept = true;
};

struct PostProcessed {
    std::vector<ScoredChunk> chunks;
    std::vector<FilterDecision> decisions;  // one per input candidate, empty when unfiltered
    bool degraded_filter = false;
};

PostProcessed post_process(const std::vector<ScoredChunk>& candidates, const QueryMetadata& qmeta,
                           const RetrievalConfig& cfg, const HybridIndex& idx);

struct SubQueryResult {
    std::string sub_query;
    bool follow_up = false;
    std::vector<ScoredChunk> candidates;  // before post-processing
    PostProcessed result;
    std::optional<std::string> error;
};

/// Candidate retrieval for every sub-query (and follow-up when `deep`), in
/// plan order. Per-query failures are recorded in `error`.
std::vector<SubQueryResult> retrieve_candidates(const QueryPlan& plan, const RetrievalConfig& cfg,
                                                const HybridIndex& idx,
                                                const EmbeddingProvider& embedder, bool deep);

/// Fills `result` of every successful entry.
void post_process_all(std::vector<SubQueryResult>& results, const QueryMetadata& qmeta,
                      const RetrievalConfig& cfg, const HybridIndex& idx);

/// Runs retrieve and post_process for each sub-query (and follow-up when
/// `deep`) in plan order. Throws the first error only if every query failed.
std::vector<SubQueryResult> retrieve_plan(const QueryPlan& plan, const RetrievalConfig& cfg,
                                          const HybridIndex& idx,
                                          const EmbeddingProvider& embedder, bool deep = false);

}  // namespace specrag
