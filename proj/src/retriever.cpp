#include "specrag/retriever.hpp"

#include <algorithm>
#include <map>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

std::string_view to_string(Origin origin) {
    return origin == Origin::Leaf ? "leaf" : "parent_expansion";
}

void RetrievalConfig::validate() const {
    if (!(alpha >= 0.0 && alpha <= 1.0)) {
        throw Error(ErrorCode::ConfigError, "retrieval.alpha must be in [0, 1]");
    }
    if (final_k == 0) throw Error(ErrorCode::ConfigError, "retrieval.final_k must be positive");
    if (candidate_k < final_k) {
        throw Error(ErrorCode::ConfigError, "retrieval.final_k must not exceed candidate_k");
    }
}

double fused_score(double alpha, double cos_score, double lex_norm) {
    return alpha * ((cos_score + 1.0) / 2.0) + (1.0 - alpha) * lex_norm;
}

bool ranks_before(const ScoredChunk& a, const ScoredChunk& b) {
    if (a.fused != b.fused) return a.fused > b.fused;
    // (cos + 1) / 2 can round two distinct cosines together
    if (a.cos_score != b.cos_score) return a.cos_score > b.cos_score;
    return a.chunk_id < b.chunk_id;
}

bool metadata_matches(const SpecMetadata& chunk, const QueryMetadata& query) {
    if (!query.release.empty()) {
        bool hit = std::any_of(chunk.release.begin(), chunk.release.end(), [&](const auto& r) {
            return std::find(query.release.begin(), query.release.end(), r) != query.release.end();
        });
        if (!hit) return false;
    }
    if (!query.series.empty()) {
        if (chunk.series.empty() ||
            std::find(query.series.begin(), query.series.end(), chunk.series) == query.series.end()) {
            return false;
        }
    }
    if (!query.specification.empty()) {
        std::string key = specification_key(chunk.specification);
        if (key.empty()) return false;
        bool hit = std::any_of(query.specification.begin(), query.specification.end(),
                               [&](const auto& s) { return specification_key(s) == key; });
        if (!hit) return false;
    }
    return true;
}

std::vector<ScoredChunk> retrieve(const std::string& sub_query, const RetrievalConfig& cfg,
                                  const HybridIndex& idx, const EmbeddingProvider& embedder) {
    if (idx.empty()) throw Error(ErrorCode::EmptyIndex, "index has no chunks");
    cfg.validate();
    const bool hybrid = cfg.stages.hybrid;
    const double alpha = hybrid ? cfg.alpha : 1.0;

    EmbeddingVector vq = embed(sub_query, embedder);
    std::vector<std::string> terms = text::terms(sub_query);

    std::map<std::string, ScoredChunk> pool;
    auto score_into = [&](const std::string& id, Origin origin) -> ScoredChunk& {
        auto [it, fresh] = pool.try_emplace(id);
        if (fresh) {
            const auto& c = idx.at(id);
            it->second.chunk_id = id;
            it->second.cos_score = cosine(vq, c.vector);
            it->second.lex_raw = hybrid ? idx.bm25(terms, id) : 0.0;
            it->second.origin = origin;
        }
        return it->second;
    };

    for (const auto& s : idx.dense_topk(vq, cfg.candidate_k)) score_into(s.chunk_id, Origin::Leaf);
    if (hybrid) {
        for (const auto& s : idx.lexical_topk(terms, cfg.candidate_k)) {
            score_into(s.chunk_id, Origin::Leaf);
        }
    }

    // child id -> parent id for every leaf whose parent is a stored chunk
    std::vector<std::pair<std::string, std::string>> expansions;
    if (cfg.expand_parents && cfg.stages.hierarchical) {
        std::vector<std::string> leaves;
        for (const auto& [id, _] : pool) leaves.push_back(id);
        for (const auto& id : leaves) {
            const auto& parent = idx.at(id).chunk.parent_id;
            if (!parent || !idx.find(*parent)) continue;
            score_into(*parent, Origin::ParentExpansion);
            expansions.emplace_back(id, *parent);
        }
    }

    double lo = 0.0, hi = 0.0;
    bool first = true;
    for (const auto& [id, s] : pool) {
        if (first || s.lex_raw < lo) lo = s.lex_raw;
        if (first || s.lex_raw > hi) hi = s.lex_raw;
        first = false;
    }
    for (auto& [id, s] : pool) {
        s.lex_norm = hi > lo ? (s.lex_raw - lo) / (hi - lo) : 0.0;
        s.fused = fused_score(alpha, s.cos_score, s.lex_norm);
    }

    for (const auto& [child_id, parent_id] : expansions) {
        auto& p = pool.at(parent_id);
        const auto& child = pool.at(child_id);
        if (p.origin == Origin::ParentExpansion && !p.via_child) p.via_child = child_id;
        if (cfg.parent_scoring == ParentScoring::Inherit && child.fused > p.fused) {
            p.fused = child.fused;
            p.inherited = true;
            p.via_child = child_id;
        }
    }

    std::vector<ScoredChunk> out;
    out.reserve(pool.size());
    for (auto& [id, s] : pool) out.push_back(std::move(s));
    std::sort(out.begin(), out.end(), ranks_before);
    if (out.size() > cfg.candidate_k) out.resize(cfg.candidate_k);
    return out;
}

PostProcessed post_process(const std::vector<ScoredChunk>& candidates, const QueryMetadata& qmeta,
                           const RetrievalConfig& cfg, const HybridIndex& idx) {
    PostProcessed out;
    if (cfg.stages.filter && !qmeta.empty()) {
        for (const auto& c : candidates) {
            bool keep = metadata_matches(idx.at(c.chunk_id).chunk.metadata, qmeta);
            out.decisions.push_back({c.chunk_id, keep});
            if (keep) out.chunks.push_back(c);
        }
        if (out.chunks.empty() && !candidates.empty()) {
            out.chunks = candidates;
            out.degraded_filter = true;
        }
    } else {
        out.chunks = candidates;
    }
    if (cfg.stages.rerank) std::stable_sort(out.chunks.begin(), out.chunks.end(), ranks_before);
    if (out.chunks.size() > cfg.final_k) out.chunks.resize(cfg.final_k);
    return out;
}

std::vector<SubQueryResult> retrieve_candidates(const QueryPlan& plan, const RetrievalConfig& cfg,
                                                const HybridIndex& idx,
                                                const EmbeddingProvider& embedder, bool deep) {
    if (idx.empty()) throw Error(ErrorCode::EmptyIndex, "index has no chunks");
    require(!plan.sub_queries.empty(), "query plan has no sub-queries");
    std::vector<SubQueryResult> results;
    auto run = [&](const std::string& q, bool follow_up) {
        SubQueryResult r;
        r.sub_query = q;
        r.follow_up = follow_up;
        try {
            r.candidates = retrieve(q, cfg, idx, embedder);
        } catch (const Error& e) {
            r.error = e.what();
        }
        results.push_back(std::move(r));
    };
    for (const auto& q : plan.sub_queries) run(q, false);
    if (deep) {
        for (const auto& q : plan.follow_ups) run(q, true);
    }
    return results;
}

void post_process_all(std::vector<SubQueryResult>& results, const QueryMetadata& qmeta,
                      const RetrievalConfig& cfg, const HybridIndex& idx) {
    for (auto& r : results) {
        if (!r.error) r.result = post_process(r.candidates, qmeta, cfg, idx);
    }
}

std::vector<SubQueryResult> retrieve_plan(const QueryPlan& plan, const RetrievalConfig& cfg,
                                          const HybridIndex& idx,
                                          const EmbeddingProvider& embedder, bool deep) {
    auto results = retrieve_candidates(plan, cfg, idx, embedder, deep);
    bool any_ok = std::any_of(results.begin(), results.end(), [](const auto& r) { return !r.error; });
    if (!any_ok) {
        throw Error(ErrorCode::InvalidArgument, "every sub-query failed: " + *results[0].error);
    }
    post_process_all(results, plan.metadata, cfg, idx);
    return results;
}

}  // namespace specrag
