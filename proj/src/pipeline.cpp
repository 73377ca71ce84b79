#include "specrag/pipeline.hpp"

#include <algorithm>
#include <chrono>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

CorpusLoad load_corpus(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) {
        throw Error(ErrorCode::IoError, dir.string() + " is not a directory");
    }
    std::vector<std::filesystem::path> files;
    for (const auto& e : std::filesystem::recursive_directory_iterator(dir)) {
        if (!e.is_regular_file()) continue;
        auto ext = text::to_lower(e.path().extension().string());
        if (ext == ".md" || ext == ".markdown" || ext == ".json") files.push_back(e.path());
    }
    std::sort(files.begin(), files.end());
    CorpusLoad out;
    for (const auto& f : files) {
        try {
            out.corpus.add(load_document(f));
        } catch (const Error& e) {
            out.errors.push_back(f.string() + ": " + e.what());
        }
    }
    return out;
}

HybridIndex build_index(const Corpus& corpus, const ChunkingConfig& chunking, bool multimodal,
                        const ProviderSet& providers, std::vector<DocumentIngest>* summary) {
    require(providers.embedding != nullptr, "an embedding provider is required");
    require(!multimodal || providers.description != nullptr,
            "multimodal ingestion needs a description provider");
    chunking.validate();
    HybridIndex idx;
    for (const auto& doc : corpus.documents()) {
        auto chunks = chunk_document(doc, chunking);
        std::size_t media_count = 0;
        if (multimodal) {
            auto media = build_media_records(doc, *providers.description);
            for (auto& c : chunks) c = tag_chunk(c, media);
            for (const auto& m : media) idx.add_media(m);
            media_count = media.size();
        }
        idx.add_chunks(chunks, *providers.embedding);
        if (summary) summary->push_back({doc.doc_name, chunks.size(), media_count});
    }
    idx.seal();
    return idx;
}

Pipeline::Pipeline(std::shared_ptr<const HybridIndex> index, ProviderSet providers,
                   PipelineOptions options, Glossary glossary)
    : index_(std::move(index)),
      providers_(std::move(providers)),
      options_(std::move(options)),
      glossary_(std::move(glossary)) {
    require(index_ != nullptr, "pipeline needs an index");
    require(providers_.generation && providers_.embedding,
            "pipeline needs generation and embedding providers");
    options_.retrieval.validate();
    require(options_.generation.budget_tokens > 0, "context budget must be positive");
}

QueryPlan Pipeline::plan(const std::string& question, Answer& out) const {
    QueryPlan p;
    if (options_.query_expansion) {
        std::map<std::string, std::string> applied;
        std::string expanded = expand_abbreviations(question, glossary_, &applied);
        p = reformulate(expanded, *providers_.generation, options_.generation.temperature);
        p.abbrev_expansions = std::move(applied);
        p.metadata = merge(p.metadata, extract_query_metadata(expanded, options_.metadata_mode,
                                                              providers_.generation.get()));
    } else {
        p.original = question;
        p.sub_queries = {question};
        p.metadata = extract_query_metadata(question, options_.metadata_mode,
                                            providers_.generation.get());
    }
    for (const auto& w : p.warnings) out.warnings.push_back(w);
    return p;
}

namespace {

using Clock = std::chrono::steady_clock;

double ms_between(Clock::time_point a, Clock::time_point b) {
    return std::chrono::duration<double, std::milli>(b - a).count();
}

void add_warning(std::vector<std::string>& w, const std::string& s) {
    if (std::find(w.begin(), w.end(), s) == w.end()) w.push_back(s);
}

}  // namespace

Answer Pipeline::answer(const std::string& question, const QueryOptions& query) const {
    if (index_->empty()) throw Error(ErrorCode::EmptyIndex, "index has no chunks");
    require(!text::trim(question).empty(), "question must not be empty");

    Answer out;
    out.question = question;
    RetrievalConfig rcfg = options_.retrieval;
    if (query.no_filter) rcfg.stages.filter = false;

    // Stage boundaries; a failing stage is charged up to the end of the call.
    std::vector<Clock::time_point> marks{Clock::now()};
    try {
        out.plan = plan(question, out);
        marks.push_back(Clock::now());

        out.retrieval = retrieve_candidates(out.plan, rcfg, *index_, *providers_.embedding,
                                            query.deep);
        marks.push_back(Clock::now());

        post_process_all(out.retrieval, out.plan.metadata, rcfg, *index_);
        for (const auto& r : out.retrieval) {
            if (r.error) add_warning(out.warnings, "sub-query-failed");
            if (r.result.degraded_filter) add_warning(out.warnings, "degraded-filter");
        }
        bool any_ok = std::any_of(out.retrieval.begin(), out.retrieval.end(),
                                  [](const auto& r) { return !r.error; });
        if (!any_ok) throw Error(ErrorCode::ProviderError, *out.retrieval.front().error);
        out.provenance = fuse(out.retrieval, options_.generation.budget_tokens, *index_,
                              options_.multimodal);
        if (out.provenance.truncated) add_warning(out.warnings, "context-truncated");
        marks.push_back(Clock::now());

        auto req = build_prompt(question, out.provenance, options_.generation.temperature);
        out.prompt_tokens = text::count_tokens(req.prompt);
        if (options_.multimodal) out.media = out.provenance.attached_media;
        std::string raw = generate(req, *providers_.generation);
        auto parsed = parse_response(raw, context_doc_names(out.provenance));
        out.text = std::move(parsed.text);
        out.cited_docs = std::move(parsed.cited_docs);
        for (auto& w : parsed.warnings) add_warning(out.warnings, w);
    } catch (const Error& e) {
        if (e.code() == ErrorCode::EmptyIndex) throw;
        out.error = e.what();
        add_warning(out.warnings, e.code() == ErrorCode::ProviderError ? "provider-failure"
                                                                       : "pipeline-error");
    }
    const auto end = Clock::now();
    while (marks.size() < 5) marks.push_back(end);
    out.timings.pre_retrieval_ms = ms_between(marks[0], marks[1]);
    out.timings.retrieval_ms = ms_between(marks[1], marks[2]);
    out.timings.post_retrieval_ms = ms_between(marks[2], marks[3]);
    out.timings.generation_ms = ms_between(marks[3], marks[4]);
    out.timings.total_ms = ms_between(marks[0], marks[4]);
    return out;
}

}  // namespace specrag
