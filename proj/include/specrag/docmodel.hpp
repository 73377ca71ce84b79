#pragma once

#include <compare>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace specrag {

/// Three-part specification version (major, technical, editorial).
struct Version {
    int major = 0;
    int technical = 0;
    int editorial = 0;

    auto operator<=>(const Version&) const = default;

    /// "V18.3.0"
    std::string to_string() const;
};

/// Parses "V18.3.0" / "v18.3.0" / "18.3.0".
std::optional<Version> parse_version(std::string_view token);

/// Decodes the three-character version code of a 3GPP file name ("i30" ->
/// 18.3.0). Each character is a digit 0-9 or a letter a-z meaning 10-35.
std::optional<Version> decode_version_code(std::string_view code);

struct SpecMetadata {
    std::vector<std::string> release;  // "16", "17": never prefixed with "R"
    std::string series;                // "23"
    std::string specification;         // "23548-i30", "23.588.h00"
    std::optional<Version> version;

    bool operator==(const SpecMetadata&) const = default;
    bool empty() const {
        return release.empty() && series.empty() && specification.empty() && !version;
    }
};

/// Extracts release, series, specification and version tokens from a file
/// stem or document header line such as "23548-i30 V18.3.0 R18".
/// Throws MalformedIdentifier when the string determines none of them.
SpecMetadata parse_spec_identifier(std::string_view raw);

/// Bare specification number used for matching: "23.558" -> "23558",
/// "23548-i30" -> "23548". Empty when no number is present.
std::string specification_key(std::string_view specification);

enum class BlockKind { Paragraph, Table, Image };

std::string_view to_string(BlockKind kind);

using TableCells = std::vector<std::vector<std::string>>;

struct Block {
    BlockKind kind = BlockKind::Paragraph;
    std::string text;
    std::optional<std::string> media_id;
    std::string caption;
    std::optional<TableCells> table_cells;
    std::optional<std::string> content_ref;

    bool operator==(const Block&) const = default;

    static Block paragraph(std::string text);
    static Block table(std::string media_id, TableCells cells, std::string caption = {});
    static Block image(std::string media_id, std::string caption, std::string content_ref = {});
};

struct Section {
    std::string heading;
    int level = 0;
    std::vector<Block> blocks;
    std::vector<Section> children;

    bool operator==(const Section&) const = default;
};

struct Document {
    std::string doc_name;
    SpecMetadata metadata;
    Section root;  // virtual, level 0, no heading

    bool operator==(const Document&) const = default;
};

/// Throws ParseError describing the first structural violation: level
/// monotonicity, empty headings, media/paragraph field invariants, ragged
/// tables, duplicate media ids.
void validate(const Document& doc);

enum class DocFormat { Canonical, Markdown };

/// Canonical files end in ".json"; everything else is treated as Markdown.
DocFormat detect_format(const std::filesystem::path& path);

Document load_document(const std::filesystem::path& path, DocFormat format);
Document load_document(const std::filesystem::path& path);
void save_document(const Document& doc, const std::filesystem::path& path);

std::string to_canonical(const Document& doc);
Document parse_canonical(std::string_view content, std::string_view source = "<memory>");

/// `fallback_name` is used when the front matter has no doc_name.
Document parse_markdown(std::string_view content, std::string_view fallback_name,
                        std::string_view source = "<memory>");

/// A set of documents keyed by unique doc_name.
class Corpus {
  public:
    void add(Document doc);
    const std::vector<Document>& documents() const { return docs_; }
    const Document* find(std::string_view doc_name) const;
    std::size_t size() const { return docs_.size(); }
    bool empty() const { return docs_.empty(); }

  private:
    std::vector<Document> docs_;
    std::map<std::string, std::size_t, std::less<>> by_name_;
};

}  // namespace specrag
