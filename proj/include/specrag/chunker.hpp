#pragma once

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "specrag/docmodel.hpp"

namespace specrag {

enum class ChunkStrategy {
    Structural,  // section-aware recursive chunking
    Fixed,       // flat sliding windows over the document text (naive baseline)
};

struct ChunkingConfig {
    std::size_t s_max = 512;  // body tokens per chunk
    double overlap = 0.2;     // fraction of s_max shared by consecutive windows
    std::string token_counter = "whitespace";
    ChunkStrategy strategy = ChunkStrategy::Structural;

    /// s_max >= 32, 0 <= overlap < 0.5, known token counter.
    void validate() const;
    std::size_t overlap_tokens() const;
    std::size_t stride() const { return s_max - overlap_tokens(); }

    bool operator==(const ChunkingConfig&) const = default;
};

/// A media block that sits inside a chunk. `token_index` counts body tokens
/// that precede the block.
struct MediaSlot {
    std::string media_id;
    std::size_t token_index = 0;

    bool operator==(const MediaSlot&) const = default;
};

struct Chunk {
    std::string chunk_id;
    std::string doc_name;
    std::string text;
    std::vector<std::string> heading_path;
    int level = 0;
    std::optional<std::string> parent_id;
    int position = 0;
    SpecMetadata metadata;
    std::vector<std::string> media_markers;

    std::vector<MediaSlot> media_slots;
    std::size_t body_offset = 0;  // text before this offset is the heading-path context line
    int split_index = 0;          // window number when the source text was split
    int split_count = 1;

    bool operator==(const Chunk&) const = default;

    std::string_view body() const { return std::string_view(text).substr(body_offset); }
    bool is_split_segment() const { return split_count > 1; }
};

/// Id of the chunkless level-0 anchor that level-1 chunks point at.
std::string virtual_root_id(std::string_view doc_name);

/// Number of sliding windows needed to cover `tokens` body tokens.
std::size_t window_count(std::size_t tokens, const ChunkingConfig& cfg);

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg);

struct CoverageReport {
    std::size_t document_tokens = 0;
    std::map<std::string, std::size_t> missing;     // token -> deficit count
    std::map<std::string, std::size_t> duplicated;  // token -> surplus count

    bool complete() const { return missing.empty(); }
};

/// Compares the multiset of document paragraph tokens with the multiset of
/// chunk body tokens (context lines excluded).
CoverageReport chunk_coverage(const std::vector<Chunk>& chunks, const Document& doc);

}  // namespace specrag
