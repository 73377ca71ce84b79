#pragma once

#include <string>
#include <vector>

#include "specrag/index.hpp"
#include "specrag/providers.hpp"
#include "specrag/retriever.hpp"

namespace specrag {

inline constexpr std::size_t kDefaultBudgetTokens = 8000;

struct ContextEntry {
    std::string chunk_id;
    std::string doc_name;
    std::vector<std::string> heading_path;
    std::string text;
    double score = 0.0;
    std::vector<std::string> sources;  // contributing sub-queries, first-seen order

    bool operator==(const ContextEntry&) const = default;
};

struct FusedContext {
    std::vector<ContextEntry> entries;
    std::vector<MediaRecord> attached_media;  // images and tables
    std::vector<std::string> unresolved_markers;
    std::size_t total_tokens = 0;
    bool truncated = false;  // the first entry alone exceeds the budget

    bool empty() const { return entries.empty(); }
    bool operator==(const FusedContext&) const = default;
};

/// Union of per-sub-query results, deduplicated by chunk id keeping the
/// highest fused score, ranked, and filled greedily up to `budget_tokens`.
/// Never empty when any result is non-empty.
FusedContext fuse(const std::vector<SubQueryResult>& results, std::size_t budget_tokens,
                  const HybridIndex& idx, bool resolve_media = true);

/// Serialized <context> body: one labeled block per entry.
std::string render_context(const FusedContext& ctx);

/// Fills the answer-generation template. Image records become attachments.
GenerationRequest build_prompt(const std::string& question, const FusedContext& ctx,
                               double temperature = 0.7);

struct ParsedResponse {
    std::string text;
    std::vector<std::string> cited_docs;
    std::vector<std::string> warnings;
};

/// Extracts <answer> and <docs>. Doc names outside `known_docs` are dropped.
ParsedResponse parse_response(const std::string& raw, const std::vector<std::string>& known_docs);

/// Doc names present in the context, in entry order.
std::vector<std::string> context_doc_names(const FusedContext& ctx);

}  // namespace specrag
