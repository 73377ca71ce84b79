// Markdown subset reader: optional front matter, ATX headings, paragraphs and
// fenced media blocks whose info string starts with "media:table" or
// "media:image".

#include <set>
#include <sstream>
#include <vector>

#include "specrag/docmodel.hpp"
#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {
namespace {

struct Cursor {
    std::vector<std::string> lines;
    std::string_view source;

    [[noreturn]] void fail(std::size_t line_index, const std::string& what) const {
        throw Error(ErrorCode::ParseError,
                    std::string(source) + ":" + std::to_string(line_index + 1) + ": " + what);
    }
};

std::vector<std::string> split_lines(std::string_view content) {
    std::vector<std::string> lines;
    std::string current;
    for (char c : content) {
        if (c == '\n') {
            if (!current.empty() && current.back() == '\r') current.pop_back();
            lines.push_back(std::move(current));
            current.clear();
        } else {
            current.push_back(c);
        }
    }
    if (!current.empty()) lines.push_back(std::move(current));
    return lines;
}

// key=value and key="quoted value" pairs after the media kind.
std::map<std::string, std::string> parse_attributes(std::string_view s, const Cursor& cur,
                                                    std::size_t line) {
    std::map<std::string, std::string> attrs;
    std::size_t i = 0;
    while (i < s.size()) {
        while (i < s.size() && s[i] == ' ') ++i;
        if (i >= s.size()) break;
        auto eq = s.find('=', i);
        if (eq == std::string_view::npos) cur.fail(line, "malformed media attribute");
        std::string key = text::trim(s.substr(i, eq - i));
        i = eq + 1;
        std::string value;
        if (i < s.size() && s[i] == '"') {
            auto close = s.find('"', i + 1);
            if (close == std::string_view::npos) cur.fail(line, "unterminated quoted attribute");
            value = std::string(s.substr(i + 1, close - i - 1));
            i = close + 1;
        } else {
            auto end = s.find(' ', i);
            if (end == std::string_view::npos) end = s.size();
            value = std::string(s.substr(i, end - i));
            i = end;
        }
        attrs[key] = value;
    }
    return attrs;
}

std::vector<std::string> split_row(std::string_view line) {
    std::string s = text::trim(line);
    if (!s.empty() && s.front() == '|') s.erase(0, 1);
    if (!s.empty() && s.back() == '|') s.pop_back();
    std::vector<std::string> cells;
    std::size_t start = 0;
    while (true) {
        auto bar = s.find('|', start);
        cells.push_back(text::trim(std::string_view(s).substr(start, bar - start)));
        if (bar == std::string::npos) break;
        start = bar + 1;
    }
    return cells;
}

bool is_separator_row(const std::vector<std::string>& cells) {
    for (const auto& c : cells) {
        if (c.empty() || c.find_first_not_of("-: ") != std::string::npos) return false;
    }
    return !cells.empty();
}

void apply_front_matter(Document& doc, const std::map<std::string, std::string>& fm) {
    for (const auto& [key, value] : fm) {
        if (key == "doc_name") {
            doc.doc_name = value;
        } else if (key == "identifier") {
            doc.metadata = parse_spec_identifier(value);
        }
    }
    for (const auto& [key, value] : fm) {
        if (key == "specification") {
            doc.metadata.specification = value;
            if (value.size() >= 2) doc.metadata.series = value.substr(0, 2);
        } else if (key == "series") {
            doc.metadata.series = value;
        } else if (key == "version") {
            doc.metadata.version = parse_version(value);
        } else if (key == "release") {
            doc.metadata.release.clear();
            std::string item;
            std::istringstream in(value);
            while (std::getline(in, item, ',')) {
                item = text::trim(item);
                if (!item.empty() && (item[0] == 'R' || item[0] == 'r')) item.erase(0, 1);
                if (!item.empty()) doc.metadata.release.push_back(item);
            }
        }
    }
}

}  // namespace

Document parse_markdown(std::string_view content, std::string_view fallback_name,
                        std::string_view source) {
    Cursor cur{split_lines(content), source};
    Document doc;
    doc.doc_name = std::string(fallback_name);

    std::size_t i = 0;
    std::map<std::string, std::string> front_matter;
    if (!cur.lines.empty() && text::trim(cur.lines[0]) == "---") {
        std::size_t j = 1;
        for (; j < cur.lines.size() && text::trim(cur.lines[j]) != "---"; ++j) {
            auto colon = cur.lines[j].find(':');
            if (colon == std::string::npos) cur.fail(j, "front matter line without ':'");
            front_matter[text::trim(cur.lines[j].substr(0, colon))] =
                text::trim(cur.lines[j].substr(colon + 1));
        }
        if (j >= cur.lines.size()) cur.fail(0, "unterminated front matter");
        i = j + 1;
    }
    if (!front_matter.count("identifier") && !front_matter.count("specification")) {
        try {
            doc.metadata = parse_spec_identifier(fallback_name);
        } catch (const Error&) {
            // a file name without spec tokens leaves metadata empty
        }
    }
    apply_front_matter(doc, front_matter);

    std::vector<Section*> stack{&doc.root};
    std::vector<std::string> paragraph;
    auto flush_paragraph = [&] {
        if (paragraph.empty()) return;
        stack.back()->blocks.push_back(Block::paragraph(text::join(paragraph, " ")));
        paragraph.clear();
    };

    for (; i < cur.lines.size(); ++i) {
        const std::string& line = cur.lines[i];
        std::string trimmed = text::trim(line);
        if (trimmed.empty()) {
            flush_paragraph();
            continue;
        }
        if (trimmed.rfind("```", 0) == 0) {
            flush_paragraph();
            std::string info = text::trim(std::string_view(trimmed).substr(3));
            std::size_t open = i;
            std::vector<std::string> body;
            for (++i; i < cur.lines.size() && text::trim(cur.lines[i]) != "```"; ++i) {
                body.push_back(cur.lines[i]);
            }
            if (i >= cur.lines.size()) cur.fail(open, "unterminated fenced block");
            bool is_table = info.rfind("media:table", 0) == 0;
            bool is_image = info.rfind("media:image", 0) == 0;
            if (!is_table && !is_image) {
                // plain code fence: keep its content as a paragraph
                std::string joined = text::trim(text::join(body, "\n"));
                if (!joined.empty()) stack.back()->blocks.push_back(Block::paragraph(joined));
                continue;
            }
            auto attrs = parse_attributes(std::string_view(info).substr(11), cur, open);
            if (!attrs.count("id") || attrs["id"].empty()) cur.fail(open, "media block without id");
            if (is_table) {
                TableCells cells;
                for (std::size_t r = 0; r < body.size(); ++r) {
                    if (text::trim(body[r]).empty()) continue;
                    auto row = split_row(body[r]);
                    if (is_separator_row(row)) continue;
                    if (!cells.empty() && row.size() != cells.front().size()) {
                        cur.fail(open + 1 + r, "table row has " + std::to_string(row.size()) +
                                                   " cells, expected " +
                                                   std::to_string(cells.front().size()));
                    }
                    cells.push_back(std::move(row));
                }
                auto block = Block::table(attrs["id"], std::move(cells), attrs["caption"]);
                if (attrs.count("ref")) block.content_ref = attrs["ref"];
                stack.back()->blocks.push_back(std::move(block));
            } else {
                stack.back()->blocks.push_back(
                    Block::image(attrs["id"], attrs["caption"], attrs["ref"]));
            }
            continue;
        }
        if (trimmed[0] == '#') {
            std::size_t level = trimmed.find_first_not_of('#');
            if (level != std::string::npos && level <= 6 && trimmed[level] == ' ') {
                flush_paragraph();
                std::string heading = text::trim(std::string_view(trimmed).substr(level));
                if (heading.empty()) cur.fail(i, "empty heading");
                while (stack.back()->level >= static_cast<int>(level)) stack.pop_back();
                Section s;
                s.heading = heading;
                s.level = static_cast<int>(level);
                stack.back()->children.push_back(std::move(s));
                stack.push_back(&stack.back()->children.back());
                continue;
            }
        }
        paragraph.push_back(trimmed);
    }
    flush_paragraph();

    try {
        validate(doc);
    } catch (const Error& e) {
        throw Error(ErrorCode::ParseError, std::string(source) + ": " + e.what());
    }
    return doc;
}

}  // namespace specrag
