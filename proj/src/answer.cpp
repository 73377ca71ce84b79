#include "specrag/answer.hpp"

#include <algorithm>
#include <map>
#include <regex>

#include "specrag/error.hpp"
#include "specrag/resources.hpp"
#include "specrag/text.hpp"

namespace specrag {

FusedContext fuse(const std::vector<SubQueryResult>& results, std::size_t budget_tokens,
                  const HybridIndex& idx, bool resolve_media) {
    require(budget_tokens > 0, "context budget must be positive");
    std::map<std::string, ContextEntry> merged;
    for (const auto& r : results) {
        for (const auto& s : r.result.chunks) {
            auto [it, fresh] = merged.try_emplace(s.chunk_id);
            ContextEntry& e = it->second;
            if (fresh) {
                const Chunk& c = idx.at(s.chunk_id).chunk;
                e.chunk_id = c.chunk_id;
                e.doc_name = c.doc_name;
                e.heading_path = c.heading_path;
                e.text = c.text;
                e.score = s.fused;
            } else {
                e.score = std::max(e.score, s.fused);
            }
            if (std::find(e.sources.begin(), e.sources.end(), r.sub_query) == e.sources.end()) {
                e.sources.push_back(r.sub_query);
            }
        }
    }
    std::vector<ContextEntry> ranked;
    for (auto& [id, e] : merged) ranked.push_back(std::move(e));
    std::sort(ranked.begin(), ranked.end(), [](const ContextEntry& a, const ContextEntry& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.chunk_id < b.chunk_id;
    });

    FusedContext ctx;
    for (auto& e : ranked) {
        std::size_t n = text::count_tokens(e.text);
        if (ctx.total_tokens + n > budget_tokens) {
            if (ctx.entries.empty()) {
                ctx.total_tokens = n;
                ctx.truncated = true;
                ctx.entries.push_back(std::move(e));
            }
            break;
        }
        ctx.total_tokens += n;
        ctx.entries.push_back(std::move(e));
    }

    if (resolve_media) {
        for (const auto& e : ctx.entries) {
            auto res = resolve_markers(idx.at(e.chunk_id).chunk.media_markers, idx.media(),
                                       e.doc_name);
            for (auto& m : res.records) {
                if (std::find(ctx.attached_media.begin(), ctx.attached_media.end(), m) ==
                    ctx.attached_media.end()) {
                    ctx.attached_media.push_back(std::move(m));
                }
            }
            for (auto& u : res.unresolved) ctx.unresolved_markers.push_back(e.doc_name + ":" + u);
        }
    }
    return ctx;
}

namespace {

std::string attr(std::string_view v) {
    std::string out;
    for (char c : v) out += c == '"' ? '\'' : c;
    return out;
}

void replace_all(std::string& s, std::string_view from, const std::string& to) {
    for (auto pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
        s.replace(pos, from.size(), to);
    }
}

}  // namespace

std::string render_context(const FusedContext& ctx) {
    std::string out;
    for (std::size_t i = 0; i < ctx.entries.size(); ++i) {
        const auto& e = ctx.entries[i];
        if (i) out += '\n';
        out += "<chunk doc_name=\"" + attr(e.doc_name) + "\" section=\"" +
               attr(text::join(e.heading_path, " > ")) + "\" id=\"" + attr(e.chunk_id) + "\">\n";
        out += e.text;
        out += "\n</chunk>";
    }
    return out;
}

GenerationRequest build_prompt(const std::string& question, const FusedContext& ctx,
                               double temperature) {
    if (ctx.empty()) throw Error(ErrorCode::ContextEmpty, "no context to answer from");
    std::string prompt(resources::answer_generation_prompt());
    // Context first so that a literal "{context}" inside the question stays put.
    replace_all(prompt, "{context}", render_context(ctx));
    auto q = prompt.find("{question}");
    if (q != std::string::npos) prompt.replace(q, 10, question);
    GenerationRequest req;
    req.prompt = std::move(prompt);
    req.temperature = temperature;
    for (const auto& m : ctx.attached_media) {
        if (m.is_image()) req.attachments.push_back(m);
    }
    return req;
}

std::vector<std::string> context_doc_names(const FusedContext& ctx) {
    std::vector<std::string> out;
    for (const auto& e : ctx.entries) {
        if (std::find(out.begin(), out.end(), e.doc_name) == out.end()) out.push_back(e.doc_name);
    }
    return out;
}

ParsedResponse parse_response(const std::string& raw, const std::vector<std::string>& known_docs) {
    static const std::regex answer_re(R"(<answer>([\s\S]*?)</answer>)");
    static const std::regex docs_re(R"(<docs>([\s\S]*?)</docs>)");
    ParsedResponse out;
    std::smatch m;
    if (std::regex_search(raw, m, answer_re)) {
        out.text = text::trim(m[1].str());
    } else {
        out.text = text::trim(raw);
        out.warnings.push_back("parse-fallback");
    }
    if (std::regex_search(raw, m, docs_re)) {
        std::string list = m[1].str();
        for (char& c : list) {
            if (c == ',' || c == ';') c = ' ';
        }
        for (auto& name : text::whitespace_tokens(list)) {
            if (std::find(known_docs.begin(), known_docs.end(), name) == known_docs.end()) {
                out.warnings.push_back("unknown-doc:" + name);
                continue;
            }
            if (std::find(out.cited_docs.begin(), out.cited_docs.end(), name) ==
                out.cited_docs.end()) {
                out.cited_docs.push_back(name);
            }
        }
    }
    return out;
}

}  // namespace specrag
