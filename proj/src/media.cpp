#include "specrag/media.hpp"

#include <algorithm>
#include <cstdio>
#include <regex>

#include "specrag/error.hpp"
#include "specrag/providers.hpp"

namespace specrag {

std::string make_marker(BlockKind kind, int ordinal) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "[%s_%03d]", kind == BlockKind::Image ? "IMG" : "TAB", ordinal);
    return buf;
}

namespace {
const std::regex& marker_regex() {
    static const std::regex re(R"(\[(IMG|TAB)_\d{3}\])");
    return re;
}
}  // namespace

bool is_marker(std::string_view token) {
    return std::regex_match(token.begin(), token.end(), marker_regex());
}

std::vector<std::string> scan_markers(std::string_view text) {
    std::vector<std::string> out;
    for (std::cregex_iterator it(text.begin(), text.end(), marker_regex()), end; it != end; ++it) {
        out.push_back(it->str());
    }
    return out;
}

std::string describe_media(const Block& block, const DescriptionProvider& describer) {
    if (block.kind == BlockKind::Paragraph) {
        throw Error(ErrorCode::InvalidArgument, "describe_media called on a paragraph block");
    }
    const std::string id = block.media_id.value_or("?");
    try {
        std::string out = block.kind == BlockKind::Table ? describer.describe_table(block)
                                                         : describer.describe_image(block);
        if (out.empty()) {
            throw ProviderError(ProviderFailure::BadResponse, "empty description");
        }
        return out;
    } catch (const ProviderError& e) {
        throw ProviderError(e.kind(), "media " + id + ": " + e.what());
    }
}

namespace {

void collect_media(const Section& s, const Document& doc, const DescriptionProvider& describer,
                   int& images, int& tables, std::vector<MediaRecord>& out) {
    for (const auto& b : s.blocks) {
        if (b.kind == BlockKind::Paragraph) continue;
        MediaRecord r;
        r.marker = make_marker(b.kind, b.kind == BlockKind::Image ? ++images : ++tables);
        r.media_id = *b.media_id;
        r.doc_name = doc.doc_name;
        r.caption = b.caption;
        r.description = describe_media(b, describer);
        r.content_ref = b.content_ref.value_or("");
        out.push_back(std::move(r));
    }
    for (const auto& c : s.children) collect_media(c, doc, describer, images, tables, out);
}

// Offset just past the k-th whitespace token of `body` (0 for k == 0).
std::size_t offset_after_tokens(std::string_view body, std::size_t k) {
    std::size_t i = 0, seen = 0;
    auto space = [](char c) { return c == ' ' || c == '\n' || c == '\t' || c == '\r'; };
    while (seen < k && i < body.size()) {
        while (i < body.size() && space(body[i])) ++i;
        while (i < body.size() && !space(body[i])) ++i;
        ++seen;
    }
    return k == 0 ? 0 : i;
}

}  // namespace

std::vector<MediaRecord> build_media_records(const Document& doc,
                                             const DescriptionProvider& describer) {
    std::vector<MediaRecord> out;
    int images = 0, tables = 0;
    collect_media(doc.root, doc, describer, images, tables, out);
    return out;
}

Chunk tag_chunk(const Chunk& chunk, const std::vector<MediaRecord>& media) {
    if (!chunk.media_markers.empty() || !scan_markers(chunk.text).empty()) {
        throw Error(ErrorCode::AlreadyTagged, "chunk " + chunk.chunk_id + " already carries markers");
    }
    if (chunk.media_slots.empty()) return chunk;

    std::vector<MediaSlot> slots = chunk.media_slots;
    std::stable_sort(slots.begin(), slots.end(),
                     [](const auto& a, const auto& b) { return a.token_index < b.token_index; });

    Chunk out = chunk;
    const std::string_view body = chunk.body();
    std::string tagged(chunk.text.substr(0, chunk.body_offset));
    std::size_t copied = 0;
    for (std::size_t i = 0; i < slots.size();) {
        std::size_t pos = offset_after_tokens(body, slots[i].token_index);
        std::string insert;
        for (; i < slots.size() && offset_after_tokens(body, slots[i].token_index) == pos; ++i) {
            auto it = std::find_if(media.begin(), media.end(), [&](const MediaRecord& r) {
                return r.media_id == slots[i].media_id && r.doc_name == chunk.doc_name;
            });
            if (it == media.end()) {
                throw Error(ErrorCode::UnknownMedia, "no media record for '" + slots[i].media_id +
                                                         "' in chunk " + chunk.chunk_id);
            }
            if (!insert.empty()) insert += ' ';
            insert += it->description + " " + it->marker;
            out.media_markers.push_back(it->marker);
        }
        tagged.append(body.substr(copied, pos - copied));
        copied = pos;
        if (pos > 0) {
            tagged += ' ';
            tagged += insert;
        } else {
            tagged += insert;
            if (!body.empty()) tagged += ' ';
        }
    }
    tagged.append(body.substr(copied));
    out.text = std::move(tagged);
    return out;
}

void MediaRegistry::add(MediaRecord record) {
    auto key = std::make_pair(record.doc_name, record.marker);
    if (by_key_.count(key)) {
        throw Error(ErrorCode::InvalidArgument,
                    "marker " + record.marker + " already registered for " + record.doc_name);
    }
    by_key_.emplace(std::move(key), std::move(record));
}

const MediaRecord* MediaRegistry::find(std::string_view doc_name, std::string_view marker) const {
    auto it = by_key_.find(std::make_pair(std::string(doc_name), std::string(marker)));
    return it == by_key_.end() ? nullptr : &it->second;
}

std::vector<MediaRecord> MediaRegistry::records() const {
    std::vector<MediaRecord> out;
    out.reserve(by_key_.size());
    for (const auto& [key, r] : by_key_) out.push_back(r);
    return out;
}

MarkerResolution resolve_markers(const std::vector<std::string>& markers,
                                 const MediaRegistry& registry, std::string_view doc_name) {
    MarkerResolution res;
    for (const auto& m : markers) {
        if (const auto* r = registry.find(doc_name, m)) {
            res.records.push_back(*r);
        } else {
            res.unresolved.push_back(m);
        }
    }
    return res;
}

}  // namespace specrag
