#include "specrag/chunker.hpp"

#include <cmath>
#include <set>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

void ChunkingConfig::validate() const {
    if (s_max < 32) throw Error(ErrorCode::ConfigError, "chunking.s_max must be >= 32");
    if (!(overlap >= 0.0 && overlap < 0.5)) {
        throw Error(ErrorCode::ConfigError, "chunking.overlap must be in [0, 0.5)");
    }
    if (token_counter != "whitespace") {
        throw Error(ErrorCode::ConfigError, "unknown token counter '" + token_counter + "'");
    }
}

std::size_t ChunkingConfig::overlap_tokens() const {
    return static_cast<std::size_t>(std::floor(overlap * static_cast<double>(s_max)));
}

std::string virtual_root_id(std::string_view doc_name) {
    return std::string(doc_name) + "::";
}

std::size_t window_count(std::size_t tokens, const ChunkingConfig& cfg) {
    if (tokens <= cfg.s_max) return 1;
    std::size_t stride = cfg.stride();
    return (tokens - cfg.s_max + stride - 1) / stride + 1;
}

namespace {

struct Item {
    enum Kind { Paragraph, Heading, Media } kind;
    std::string text;  // paragraph or heading text; media id for Media
};

struct Body {
    std::vector<Item> items;

    std::size_t tokens() const {
        std::size_t n = 0;
        for (const auto& it : items) {
            if (it.kind != Item::Media) n += text::count_tokens(it.text);
        }
        return n;
    }
    bool has_content() const {
        for (const auto& it : items) {
            if (it.kind == Item::Media || text::count_tokens(it.text) > 0) return true;
        }
        return false;
    }
};

void append_blocks(const std::vector<Block>& blocks, Body& body) {
    for (const auto& b : blocks) {
        if (b.kind == BlockKind::Paragraph) {
            if (text::count_tokens(b.text) > 0) body.items.push_back({Item::Paragraph, b.text});
        } else {
            body.items.push_back({Item::Media, *b.media_id});
        }
    }
}

void append_subtree(const Section& s, Body& body) {
    for (const auto& c : s.children) {
        body.items.push_back({Item::Heading, c.heading});
        append_blocks(c.blocks, body);
        append_subtree(c, body);
    }
}

struct Piece {
    std::string text;  // body text, without context line
    std::vector<MediaSlot> slots;
};

// Whole body as one piece; paragraphs keep their original spelling.
Piece render_whole(const Body& body) {
    Piece p;
    std::size_t tokens = 0;
    for (const auto& it : body.items) {
        if (it.kind == Item::Media) {
            p.slots.push_back({it.text, tokens});
            continue;
        }
        if (!p.text.empty()) p.text += "\n\n";
        p.text += it.text;
        tokens += text::count_tokens(it.text);
    }
    return p;
}

// Sliding windows of s_max tokens advancing by stride.
std::vector<Piece> render_windows(const Body& body, const ChunkingConfig& cfg) {
    std::vector<std::string> tokens;
    std::vector<std::pair<std::string, std::size_t>> media;
    for (const auto& it : body.items) {
        if (it.kind == Item::Media) {
            media.emplace_back(it.text, tokens.size());
            continue;
        }
        for (auto& t : text::whitespace_tokens(it.text)) tokens.push_back(std::move(t));
    }
    const std::size_t n = tokens.size();
    const std::size_t count = window_count(n, cfg);
    std::vector<Piece> out(count);
    for (std::size_t w = 0; w < count; ++w) {
        std::size_t start = w * cfg.stride();
        std::size_t end = std::min(n, start + cfg.s_max);
        for (std::size_t t = start; t < end; ++t) {
            if (t > start) out[w].text += ' ';
            out[w].text += tokens[t];
        }
    }
    for (const auto& [id, pos] : media) {
        std::size_t target = count - 1;
        for (std::size_t w = 0; w < count; ++w) {
            std::size_t start = w * cfg.stride();
            if (pos >= start && pos < start + cfg.s_max && pos < n) {
                target = w;
                break;
            }
        }
        out[target].slots.push_back({id, pos - target * cfg.stride()});
    }
    return out;
}

class StructuralChunker {
  public:
    StructuralChunker(const Document& doc, const ChunkingConfig& cfg) : doc_(doc), cfg_(cfg) {}

    std::vector<Chunk> run() {
        const std::string root = virtual_root_id(doc_.doc_name);
        Body preamble;
        append_blocks(doc_.root.blocks, preamble);
        if (preamble.has_content()) {
            emit_body(preamble, {doc_.doc_name}, 1, root);
        }
        for (const auto& s : doc_.root.children) emit_section(s, {}, root);
        return std::move(out_);
    }

  private:
    void emit_section(const Section& s, std::vector<std::string> path,
                      const std::string& parent_id) {
        path.push_back(s.heading);
        Body full;
        append_blocks(s.blocks, full);
        std::size_t own_items = full.items.size();
        append_subtree(s, full);
        if (!full.has_content()) return;
        if (full.tokens() <= cfg_.s_max) {
            emit_body(full, path, s.level, parent_id);
            return;
        }
        Body own;
        own.items.assign(full.items.begin(), full.items.begin() + static_cast<long>(own_items));
        std::string anchor = parent_id;
        if (own.has_content()) anchor = emit_body(own, path, s.level, parent_id);
        for (const auto& c : s.children) emit_section(c, path, anchor);
    }

    // Returns the id of the first emitted chunk.
    std::string emit_body(const Body& body, const std::vector<std::string>& path, int level,
                          const std::string& parent_id) {
        std::vector<Piece> pieces;
        if (body.tokens() <= cfg_.s_max) {
            pieces.push_back(render_whole(body));
        } else {
            pieces = render_windows(body, cfg_);
        }
        std::string key = unique_path_key(path);
        std::string prefix = text::join(path, " > ") + "\n";
        std::string first_id;
        for (std::size_t i = 0; i < pieces.size(); ++i) {
            Chunk c;
            c.chunk_id = doc_.doc_name + "::" + key + "::" + std::to_string(i);
            c.doc_name = doc_.doc_name;
            c.text = prefix + pieces[i].text;
            c.body_offset = prefix.size();
            c.heading_path = path;
            c.level = level;
            c.parent_id = parent_id;
            c.position = positions_[parent_id]++;
            c.metadata = doc_.metadata;
            c.media_slots = std::move(pieces[i].slots);
            c.split_index = static_cast<int>(i);
            c.split_count = static_cast<int>(pieces.size());
            if (i == 0) first_id = c.chunk_id;
            out_.push_back(std::move(c));
        }
        return first_id;
    }

    std::string unique_path_key(const std::vector<std::string>& path) {
        std::string key = text::join(path, " > ");
        if (used_keys_.insert(key).second) return key;
        for (int n = 2;; ++n) {
            std::string candidate = key + " #" + std::to_string(n);
            if (used_keys_.insert(candidate).second) return candidate;
        }
    }

    const Document& doc_;
    const ChunkingConfig& cfg_;
    std::vector<Chunk> out_;
    std::map<std::string, int> positions_;
    std::set<std::string> used_keys_;
};

void flatten(const Section& s, Body& body, bool include_heading) {
    if (include_heading) body.items.push_back({Item::Heading, s.heading});
    append_blocks(s.blocks, body);
    for (const auto& c : s.children) flatten(c, body, true);
}

std::vector<Chunk> fixed_chunks(const Document& doc, const ChunkingConfig& cfg) {
    Body body;
    flatten(doc.root, body, false);
    if (!body.has_content()) return {};
    auto pieces = render_windows(body, cfg);
    const std::string root = virtual_root_id(doc.doc_name);
    std::vector<Chunk> out;
    for (std::size_t i = 0; i < pieces.size(); ++i) {
        Chunk c;
        c.chunk_id = doc.doc_name + "::fixed::" + std::to_string(i);
        c.doc_name = doc.doc_name;
        c.text = std::move(pieces[i].text);
        c.level = 1;
        c.parent_id = root;
        c.position = static_cast<int>(i);
        c.metadata = doc.metadata;
        c.media_slots = std::move(pieces[i].slots);
        c.split_index = static_cast<int>(i);
        c.split_count = static_cast<int>(pieces.size());
        out.push_back(std::move(c));
    }
    return out;
}

void count_paragraph_tokens(const Section& s, std::map<std::string, std::size_t>& counts,
                            std::size_t& total) {
    for (const auto& b : s.blocks) {
        if (b.kind != BlockKind::Paragraph) continue;
        for (auto& t : text::whitespace_tokens(b.text)) {
            ++counts[t];
            ++total;
        }
    }
    for (const auto& c : s.children) count_paragraph_tokens(c, counts, total);
}

}  // namespace

std::vector<Chunk> chunk_document(const Document& doc, const ChunkingConfig& cfg) {
    cfg.validate();
    if (cfg.strategy == ChunkStrategy::Fixed) return fixed_chunks(doc, cfg);
    return StructuralChunker(doc, cfg).run();
}

CoverageReport chunk_coverage(const std::vector<Chunk>& chunks, const Document& doc) {
    CoverageReport report;
    std::map<std::string, std::size_t> expected;
    count_paragraph_tokens(doc.root, expected, report.document_tokens);

    std::map<std::string, std::size_t> seen;
    for (const auto& c : chunks) {
        if (c.doc_name != doc.doc_name) {
            throw Error(ErrorCode::MismatchedDoc,
                        "chunk " + c.chunk_id + " belongs to '" + c.doc_name + "', not '" +
                            doc.doc_name + "'");
        }
        for (auto& t : text::whitespace_tokens(c.body())) ++seen[t];
    }
    for (const auto& [token, want] : expected) {
        auto it = seen.find(token);
        std::size_t have = it == seen.end() ? 0 : it->second;
        if (have < want) report.missing[token] = want - have;
    }
    for (const auto& [token, have] : seen) {
        auto it = expected.find(token);
        std::size_t want = it == expected.end() ? 0 : it->second;
        if (have > want) report.duplicated[token] = have - want;
    }
    return report;
}

}  // namespace specrag
