#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "specrag/chunker.hpp"
#include "specrag/docmodel.hpp"

namespace specrag {

class DescriptionProvider;

struct MediaRecord {
    std::string marker;  // "[IMG_001]" or "[TAB_001]"
    std::string media_id;
    std::string doc_name;
    std::string caption;
    std::string description;
    std::string content_ref;

    bool operator==(const MediaRecord&) const = default;

    bool is_image() const { return marker.rfind("[IMG_", 0) == 0; }
};

/// "[IMG_007]" style marker for the n-th (1-based) image or table of a document.
std::string make_marker(BlockKind kind, int ordinal);
bool is_marker(std::string_view token);

/// All markers in `text`, in order of appearance.
std::vector<std::string> scan_markers(std::string_view text);

/// Natural-language description of a table or image block.
std::string describe_media(const Block& block, const DescriptionProvider& describer);

/// One record per media block in document order, numbered per document and
/// per kind starting at 001.
std::vector<MediaRecord> build_media_records(const Document& doc,
                                             const DescriptionProvider& describer);

/// Inserts "<description> <marker>" at each media block's position in the
/// chunk text and lists the inserted markers in block order.
Chunk tag_chunk(const Chunk& chunk, const std::vector<MediaRecord>& media);

/// Marker -> record lookup, keyed by document. Built once during ingestion.
class MediaRegistry {
  public:
    void add(MediaRecord record);
    const MediaRecord* find(std::string_view doc_name, std::string_view marker) const;
    std::vector<MediaRecord> records() const;
    std::size_t size() const { return by_key_.size(); }

  private:
    std::map<std::pair<std::string, std::string>, MediaRecord> by_key_;
};

struct MarkerResolution {
    std::vector<MediaRecord> records;
    std::vector<std::string> unresolved;
};

MarkerResolution resolve_markers(const std::vector<std::string>& markers,
                                 const MediaRegistry& registry, std::string_view doc_name);

}  // namespace specrag
