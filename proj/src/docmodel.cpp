#include "specrag/docmodel.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>

#include <json.hpp>

#include "specrag/error.hpp"

namespace specrag {

using ordered_json = nlohmann::ordered_json;

constexpr int kCanonicalSchemaVersion = 1;

std::string Version::to_string() const {
    return "V" + std::to_string(major) + "." + std::to_string(technical) + "." +
           std::to_string(editorial);
}

std::optional<Version> parse_version(std::string_view token) {
    static const std::regex re(R"(^[Vv]?(\d{1,3})\.(\d{1,3})\.(\d{1,3})$)");
    std::cmatch m;
    if (!std::regex_match(token.begin(), token.end(), m, re)) return std::nullopt;
    return Version{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3])};
}

std::optional<Version> decode_version_code(std::string_view code) {
    if (code.size() != 3) return std::nullopt;
    int parts[3];
    for (int i = 0; i < 3; ++i) {
        auto c = static_cast<unsigned char>(std::tolower(static_cast<unsigned char>(code[i])));
        if (std::isdigit(c)) {
            parts[i] = c - '0';
        } else if (c >= 'a' && c <= 'z') {
            parts[i] = 10 + (c - 'a');
        } else {
            return std::nullopt;
        }
    }
    return Version{parts[0], parts[1], parts[2]};
}

SpecMetadata parse_spec_identifier(std::string_view raw) {
    static const std::regex spec_re(
        R"((^|[^0-9A-Za-z.])((\d{2})(\.\d{3}|\d{2,})((?:[-.][A-Za-z0-9]+)*)))");
    static const std::regex version_re(R"((^|[^0-9A-Za-z])[Vv](\d{1,3}\.\d{1,3}\.\d{1,3})(?![0-9A-Za-z.]))");
    static const std::regex release_re(
        R"((^|[^0-9A-Za-z])(?:R|Rel|REL|rel|Release|release|RELEASE)[-. ]?(\d{1,2})(?![0-9A-Za-z.]))");

    SpecMetadata meta;
    std::string s(raw);
    std::smatch m;

    std::string version_free = s;
    if (std::regex_search(s, m, version_re)) {
        meta.version = parse_version(m[2].str());
        version_free.replace(static_cast<std::size_t>(m.position(2)), m.length(2),
                             std::string(static_cast<std::size_t>(m.length(2)), ' '));
    }
    if (std::regex_search(version_free, m, spec_re)) {
        meta.specification = m[2].str();
        meta.series = m[3].str();
    }
    std::set<std::string> releases;
    for (auto it = std::sregex_iterator(version_free.begin(), version_free.end(), release_re);
         it != std::sregex_iterator(); ++it) {
        releases.insert(std::to_string(std::stoi((*it)[2].str())));
    }
    meta.release.assign(releases.begin(), releases.end());
    std::sort(meta.release.begin(), meta.release.end(), [](const auto& a, const auto& b) {
        return std::stoi(a) < std::stoi(b);
    });

    if (meta.specification.empty() && !meta.version && meta.release.empty()) {
        throw Error(ErrorCode::MalformedIdentifier,
                    "no specification number, version or release in '" + s + "'");
    }
    return meta;
}

std::string specification_key(std::string_view specification) {
    static const std::regex re(R"((\d{2})\.?(\d{3,}))");
    std::cmatch m;
    if (!std::regex_search(specification.begin(), specification.end(), m, re)) return {};
    return m[1].str() + m[2].str();
}

std::string_view to_string(BlockKind kind) {
    switch (kind) {
        case BlockKind::Paragraph: return "paragraph";
        case BlockKind::Table: return "table";
        case BlockKind::Image: return "image";
    }
    return "paragraph";
}

Block Block::paragraph(std::string text) {
    Block b;
    b.kind = BlockKind::Paragraph;
    b.text = std::move(text);
    return b;
}

Block Block::table(std::string media_id, TableCells cells, std::string caption) {
    Block b;
    b.kind = BlockKind::Table;
    b.media_id = std::move(media_id);
    b.table_cells = std::move(cells);
    b.caption = std::move(caption);
    return b;
}

Block Block::image(std::string media_id, std::string caption, std::string content_ref) {
    Block b;
    b.kind = BlockKind::Image;
    b.media_id = std::move(media_id);
    b.caption = std::move(caption);
    if (!content_ref.empty()) b.content_ref = std::move(content_ref);
    return b;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

void validate_block(const Block& b, const std::string& where, std::set<std::string>& media_ids) {
    if (b.kind == BlockKind::Paragraph) {
        if (b.media_id) throw Error(ErrorCode::ParseError, where + ": paragraph with media_id");
        if (b.table_cells) throw Error(ErrorCode::ParseError, where + ": paragraph with table cells");
        return;
    }
    if (!b.media_id || b.media_id->empty()) {
        throw Error(ErrorCode::ParseError, where + ": media block without media_id");
    }
    if (!media_ids.insert(*b.media_id).second) {
        throw Error(ErrorCode::ParseError, where + ": duplicate media_id '" + *b.media_id + "'");
    }
    if (b.kind == BlockKind::Image && b.table_cells) {
        throw Error(ErrorCode::ParseError, where + ": image block with table cells");
    }
    if (b.table_cells && !b.table_cells->empty()) {
        auto width = b.table_cells->front().size();
        for (const auto& row : *b.table_cells) {
            if (row.size() != width) {
                throw Error(ErrorCode::ParseError,
                            where + ": table '" + *b.media_id + "' is not rectangular");
            }
        }
    }
}

void validate_section(const Section& s, int parent_level, const std::string& path,
                      std::set<std::string>& media_ids) {
    if (s.level <= parent_level) {
        throw Error(ErrorCode::ParseError, "section '" + path + "' has level " +
                                               std::to_string(s.level) +
                                               " not greater than its parent's " +
                                               std::to_string(parent_level));
    }
    if (s.heading.empty()) {
        throw Error(ErrorCode::ParseError, "empty heading under '" + path + "'");
    }
    for (const auto& b : s.blocks) validate_block(b, path, media_ids);
    for (const auto& c : s.children) validate_section(c, s.level, path + " > " + c.heading, media_ids);
}

}  // namespace

void validate(const Document& doc) {
    if (doc.doc_name.empty()) throw Error(ErrorCode::ParseError, "empty doc_name");
    if (doc.root.level != 0 || !doc.root.heading.empty()) {
        throw Error(ErrorCode::ParseError, "root section must be level 0 without heading");
    }
    std::set<std::string> media_ids;
    for (const auto& b : doc.root.blocks) validate_block(b, "<root>", media_ids);
    for (const auto& c : doc.root.children) validate_section(c, 0, c.heading, media_ids);
}

// ---------------------------------------------------------------------------
// Canonical format

namespace {

ordered_json block_to_json(const Block& b) {
    ordered_json j;
    j["kind"] = std::string(to_string(b.kind));
    if (b.kind == BlockKind::Paragraph) {
        j["text"] = b.text;
        return j;
    }
    j["media_id"] = *b.media_id;
    j["caption"] = b.caption;
    if (!b.text.empty()) j["text"] = b.text;
    if (b.table_cells) j["cells"] = *b.table_cells;
    if (b.content_ref) j["content_ref"] = *b.content_ref;
    return j;
}

ordered_json section_to_json(const Section& s) {
    ordered_json j;
    j["heading"] = s.heading;
    j["level"] = s.level;
    j["blocks"] = ordered_json::array();
    for (const auto& b : s.blocks) j["blocks"].push_back(block_to_json(b));
    j["children"] = ordered_json::array();
    for (const auto& c : s.children) j["children"].push_back(section_to_json(c));
    return j;
}

[[noreturn]] void schema_error(std::string_view source, const std::string& pointer,
                               const std::string& what) {
    throw Error(ErrorCode::ParseError,
                std::string(source) + ": at " + (pointer.empty() ? "/" : pointer) + ": " + what);
}

const ordered_json& member(const ordered_json& obj, const char* key, std::string_view source,
                           const std::string& pointer) {
    auto it = obj.find(key);
    if (it == obj.end()) schema_error(source, pointer, std::string("missing key '") + key + "'");
    return *it;
}

std::string get_string(const ordered_json& obj, const char* key, std::string_view source,
                       const std::string& pointer) {
    const auto& v = member(obj, key, source, pointer);
    if (!v.is_string()) schema_error(source, pointer + "/" + key, "expected string");
    return v.get<std::string>();
}

Block block_from_json(const ordered_json& j, std::string_view source, const std::string& pointer) {
    if (!j.is_object()) schema_error(source, pointer, "expected object");
    auto kind = get_string(j, "kind", source, pointer);
    Block b;
    if (kind == "paragraph") {
        b.kind = BlockKind::Paragraph;
        b.text = get_string(j, "text", source, pointer);
        return b;
    }
    if (kind == "table") {
        b.kind = BlockKind::Table;
    } else if (kind == "image") {
        b.kind = BlockKind::Image;
    } else {
        schema_error(source, pointer + "/kind", "unknown block kind '" + kind + "'");
    }
    b.media_id = get_string(j, "media_id", source, pointer);
    b.caption = get_string(j, "caption", source, pointer);
    if (j.contains("text")) b.text = get_string(j, "text", source, pointer);
    if (j.contains("cells")) {
        const auto& cells = j["cells"];
        if (!cells.is_array()) schema_error(source, pointer + "/cells", "expected array of rows");
        TableCells grid;
        for (std::size_t r = 0; r < cells.size(); ++r) {
            if (!cells[r].is_array()) {
                schema_error(source, pointer + "/cells/" + std::to_string(r), "expected array");
            }
            std::vector<std::string> row;
            for (const auto& cell : cells[r]) {
                if (!cell.is_string()) {
                    schema_error(source, pointer + "/cells/" + std::to_string(r), "expected strings");
                }
                row.push_back(cell.get<std::string>());
            }
            grid.push_back(std::move(row));
        }
        b.table_cells = std::move(grid);
    }
    if (j.contains("content_ref")) b.content_ref = get_string(j, "content_ref", source, pointer);
    return b;
}

std::vector<Block> blocks_from_json(const ordered_json& arr, std::string_view source,
                                    const std::string& pointer) {
    if (!arr.is_array()) schema_error(source, pointer, "expected array");
    std::vector<Block> out;
    for (std::size_t i = 0; i < arr.size(); ++i) {
        out.push_back(block_from_json(arr[i], source, pointer + "/" + std::to_string(i)));
    }
    return out;
}

Section section_from_json(const ordered_json& j, std::string_view source,
                          const std::string& pointer) {
    if (!j.is_object()) schema_error(source, pointer, "expected object");
    Section s;
    s.heading = get_string(j, "heading", source, pointer);
    const auto& level = member(j, "level", source, pointer);
    if (!level.is_number_integer()) schema_error(source, pointer + "/level", "expected integer");
    s.level = level.get<int>();
    s.blocks = blocks_from_json(member(j, "blocks", source, pointer), source, pointer + "/blocks");
    const auto& children = member(j, "children", source, pointer);
    if (!children.is_array()) schema_error(source, pointer + "/children", "expected array");
    for (std::size_t i = 0; i < children.size(); ++i) {
        s.children.push_back(
            section_from_json(children[i], source, pointer + "/children/" + std::to_string(i)));
    }
    return s;
}

}  // namespace

std::string to_canonical(const Document& doc) {
    validate(doc);
    ordered_json j;
    j["format"] = "specdoc";
    j["schema_version"] = kCanonicalSchemaVersion;
    j["doc_name"] = doc.doc_name;
    ordered_json meta;
    meta["release"] = doc.metadata.release;
    meta["series"] = doc.metadata.series;
    meta["specification"] = doc.metadata.specification;
    if (doc.metadata.version) {
        meta["version"] = doc.metadata.version->to_string();
    } else {
        meta["version"] = nullptr;
    }
    j["metadata"] = std::move(meta);
    j["blocks"] = ordered_json::array();
    for (const auto& b : doc.root.blocks) j["blocks"].push_back(block_to_json(b));
    j["sections"] = ordered_json::array();
    for (const auto& s : doc.root.children) j["sections"].push_back(section_to_json(s));
    return j.dump(2) + "\n";
}

Document parse_canonical(std::string_view content, std::string_view source) {
    ordered_json j;
    try {
        j = ordered_json::parse(content.begin(), content.end());
    } catch (const nlohmann::json::parse_error& e) {
        std::size_t line = 1, col = 1;
        for (std::size_t i = 0; i + 1 < e.byte && i < content.size(); ++i) {
            if (content[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        throw Error(ErrorCode::ParseError, std::string(source) + ":" + std::to_string(line) + ":" +
                                               std::to_string(col) + ": " + e.what());
    }
    if (!j.is_object()) schema_error(source, "", "expected object");
    if (get_string(j, "format", source, "") != "specdoc") {
        schema_error(source, "/format", "expected \"specdoc\"");
    }
    const auto& version = member(j, "schema_version", source, "");
    if (!version.is_number_integer() || version.get<int>() != kCanonicalSchemaVersion) {
        schema_error(source, "/schema_version",
                     "unsupported schema version (expected " +
                         std::to_string(kCanonicalSchemaVersion) + ")");
    }
    Document doc;
    doc.doc_name = get_string(j, "doc_name", source, "");
    const auto& meta = member(j, "metadata", source, "");
    if (!meta.is_object()) schema_error(source, "/metadata", "expected object");
    const auto& rel = member(meta, "release", source, "/metadata");
    if (!rel.is_array()) schema_error(source, "/metadata/release", "expected array");
    for (const auto& r : rel) {
        if (!r.is_string()) schema_error(source, "/metadata/release", "expected strings");
        doc.metadata.release.push_back(r.get<std::string>());
    }
    doc.metadata.series = get_string(meta, "series", source, "/metadata");
    doc.metadata.specification = get_string(meta, "specification", source, "/metadata");
    const auto& ver = member(meta, "version", source, "/metadata");
    if (!ver.is_null()) {
        if (!ver.is_string()) schema_error(source, "/metadata/version", "expected string or null");
        doc.metadata.version = parse_version(ver.get<std::string>());
        if (!doc.metadata.version) schema_error(source, "/metadata/version", "malformed version");
    }
    doc.root.blocks = blocks_from_json(member(j, "blocks", source, ""), source, "/blocks");
    const auto& sections = member(j, "sections", source, "");
    if (!sections.is_array()) schema_error(source, "/sections", "expected array");
    for (std::size_t i = 0; i < sections.size(); ++i) {
        doc.root.children.push_back(
            section_from_json(sections[i], source, "/sections/" + std::to_string(i)));
    }
    try {
        validate(doc);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, std::string(source) + ": " + e.what());
    }
    return doc;
}

// ---------------------------------------------------------------------------
// Files

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

DocFormat detect_format(const std::filesystem::path& path) {
    return path.extension() == ".json" ? DocFormat::Canonical : DocFormat::Markdown;
}

Document load_document(const std::filesystem::path& path, DocFormat format) {
    auto content = read_file(path);
    if (format == DocFormat::Canonical) return parse_canonical(content, path.string());
    auto stem = path.stem().string();
    return parse_markdown(content, stem, path.string());
}

Document load_document(const std::filesystem::path& path) {
    return load_document(path, detect_format(path));
}

void save_document(const Document& doc, const std::filesystem::path& path) {
    auto content = to_canonical(doc);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + path.string());
    out << content;
    if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

void Corpus::add(Document doc) {
    if (by_name_.count(doc.doc_name)) {
        throw Error(ErrorCode::DuplicateDocName, "document '" + doc.doc_name + "' already in corpus");
    }
    by_name_.emplace(doc.doc_name, docs_.size());
    docs_.push_back(std::move(doc));
}

const Document* Corpus::find(std::string_view doc_name) const {
    auto it = by_name_.find(doc_name);
    return it == by_name_.end() ? nullptr : &docs_[it->second];
}

}  // namespace specrag
