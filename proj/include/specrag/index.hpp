#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "specrag/chunker.hpp"
#include "specrag/media.hpp"
#include "specrag/providers.hpp"

namespace specrag {

inline constexpr std::uint32_t kIndexSchemaVersion = 1;

struct IndexedChunk {
    Chunk chunk;
    EmbeddingVector vector;
    std::map<std::string, std::uint32_t> term_freqs;
    std::size_t length = 0;  // lexical terms, equals the sum of term_freqs
};

struct LexicalStats {
    std::size_t doc_count = 0;
    double avg_len = 0.0;
    std::map<std::string, std::size_t> doc_freq;
    double k1 = 1.2;
    double b = 0.75;
};

struct ScoredId {
    std::string chunk_id;
    double score = 0.0;

    bool operator==(const ScoredId&) const = default;
};

struct DocumentEntry {
    std::string doc_name;
    SpecMetadata metadata;
    std::vector<std::string> chunk_ids;
};

using ChunkFilter = std::function<bool(const Chunk&)>;

/// Okapi BM25 contribution of a single term occurrence in the query.
double bm25_term(double tf, double df, double n_docs, double len, double avg_len, double k1,
                 double b);

/// Inverted lexical index plus exact dense store over chunks.
///
/// Writes go through add_chunks/add_media until seal(); afterwards the index
/// is read-only and safe to share between threads.
class HybridIndex {
  public:
    HybridIndex() = default;
    HybridIndex(double k1, double b);

    /// Embeds every chunk before touching any state, so a provider failure or
    /// a duplicate id leaves the index unchanged.
    void add_chunks(const std::vector<Chunk>& chunks, const EmbeddingProvider& embedder);
    void add_media(const MediaRecord& record);
    void seal() { sealed_ = true; }
    bool sealed() const { return sealed_; }

    double bm25(const std::vector<std::string>& query_terms, std::string_view chunk_id) const;

    /// Chunks with a positive BM25 score, best first, ties by ascending id.
    std::vector<ScoredId> lexical_topk(const std::vector<std::string>& query_terms, std::size_t k,
                                       const ChunkFilter& filter = {}) const;

    /// Exact cosine ranking, ties by ascending id. The filter runs before ranking.
    std::vector<ScoredId> dense_topk(const EmbeddingVector& query, std::size_t k,
                                     const ChunkFilter& filter = {}) const;

    const IndexedChunk* find(std::string_view chunk_id) const;
    /// Throws UnknownChunk.
    const IndexedChunk& at(std::string_view chunk_id) const;

    const std::vector<IndexedChunk>& chunks() const { return chunks_; }
    std::size_t size() const { return chunks_.size(); }
    bool empty() const { return chunks_.empty(); }
    std::size_t dim() const { return dim_; }
    const std::string& embedder_fingerprint() const { return fingerprint_; }
    const LexicalStats& stats() const { return stats_; }
    const MediaRegistry& media() const { return media_; }

    /// Documents in insertion order.
    std::vector<DocumentEntry> documents() const;
    std::vector<std::string> doc_names() const;

    /// Directory layout: manifest.txt plus chunks.bin, postings.bin,
    /// vectors.bin and media.bin.
    void save(const std::filesystem::path& dir) const;
    static HybridIndex load(const std::filesystem::path& dir);

    /// Key/value view of the manifest.
    std::map<std::string, std::string> manifest() const;

  private:
    void insert(IndexedChunk entry);
    void recompute_avg_len();

    std::vector<IndexedChunk> chunks_;
    std::map<std::string, std::size_t, std::less<>> by_id_;
    std::map<std::string, std::vector<std::pair<std::size_t, std::uint32_t>>> postings_;
    LexicalStats stats_;
    std::size_t total_len_ = 0;
    std::size_t dim_ = 0;
    std::string fingerprint_;
    MediaRegistry media_;
    bool sealed_ = false;
};

}  // namespace specrag
