#include "specrag/service.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "specrag/abletest.hpp"
#include "specrag/error.hpp"
#include "specrag/http_server.hpp"
#include "specrag/text.hpp"

namespace specrag {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

namespace {

ojson metadata_to_json(const SpecMetadata& m) {
    ojson j;
    j["release"] = m.release;
    j["series"] = m.series;
    j["specification"] = m.specification;
    j["version"] = m.version ? ojson(m.version->to_string()) : ojson(nullptr);
    return j;
}

ojson query_metadata_to_json(const QueryMetadata& m) {
    return ojson{{"release", m.release}, {"series", m.series}, {"specification", m.specification}};
}

ojson media_to_json(const MediaRecord& m) {
    return ojson{{"marker", m.marker},       {"media_id", m.media_id},
                 {"doc_name", m.doc_name},   {"caption", m.caption},
                 {"description", m.description}, {"content_ref", m.content_ref}};
}

std::string fixed(double v, int digits = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", digits, v);
    return buf;
}

}  // namespace

ojson answer_to_json(const Answer& a, bool trace) {
    ojson j;
    j["question"] = a.question;
    j["answer"] = a.text;
    j["cited_docs"] = a.cited_docs;
    j["media"] = ojson::array();
    for (const auto& m : a.media) j["media"].push_back(media_to_json(m));
    j["provenance"] = ojson::array();
    for (const auto& e : a.provenance.entries) j["provenance"].push_back(e.chunk_id);
    j["warnings"] = a.warnings;
    j["error"] = a.error ? ojson(*a.error) : ojson(nullptr);
    if (!trace) return j;

    ojson t;
    t["plan"] = {{"original", a.plan.original},
                 {"sub_queries", a.plan.sub_queries},
                 {"follow_ups", a.plan.follow_ups},
                 {"metadata", query_metadata_to_json(a.plan.metadata)},
                 {"abbrev_expansions", a.plan.abbrev_expansions},
                 {"warnings", a.plan.warnings},
                 {"repairs", a.plan.repairs}};
    t["retrieval"] = ojson::array();
    for (const auto& r : a.retrieval) {
        ojson x;
        x["sub_query"] = r.sub_query;
        x["follow_up"] = r.follow_up;
        x["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
        x["candidates"] = ojson::array();
        for (const auto& c : r.candidates) {
            x["candidates"].push_back({{"chunk_id", c.chunk_id},
                                       {"fused", c.fused},
                                       {"cos", c.cos_score},
                                       {"lex_raw", c.lex_raw},
                                       {"lex_norm", c.lex_norm},
                                       {"origin", to_string(c.origin)},
                                       {"via_child", c.via_child ? ojson(*c.via_child) : ojson(nullptr)}});
        }
        x["filter"] = ojson::array();
        for (const auto& d : r.result.decisions) {
            x["filter"].push_back({{"chunk_id", d.chunk_id}, {"kept", d.kept}});
        }
        x["degraded_filter"] = r.result.degraded_filter;
        x["selected"] = ojson::array();
        for (const auto& c : r.result.chunks) x["selected"].push_back(c.chunk_id);
        t["retrieval"].push_back(std::move(x));
    }
    ojson ctx;
    ctx["total_tokens"] = a.provenance.total_tokens;
    ctx["truncated"] = a.provenance.truncated;
    ctx["entries"] = ojson::array();
    for (const auto& e : a.provenance.entries) {
        ctx["entries"].push_back({{"chunk_id", e.chunk_id}, {"score", e.score}, {"sources", e.sources}});
    }
    ctx["unresolved_markers"] = a.provenance.unresolved_markers;
    t["context"] = std::move(ctx);
    t["prompt_tokens"] = a.prompt_tokens;
    j["trace"] = std::move(t);
    return j;
}

std::string render_answer(const Answer& a, bool trace) {
    std::string out;
    if (a.error) out += "error: " + *a.error + "\n";
    out += a.text + "\n";
    out += "\ndocs: " + text::join(a.cited_docs, ", ") + "\n";
    if (!a.media.empty()) {
        out += "media:\n";
        for (const auto& m : a.media) {
            out += "  " + m.doc_name + " " + m.marker + " " + m.media_id;
            if (!m.content_ref.empty()) out += " -> " + m.content_ref;
            out += "\n";
        }
    }
    if (!a.warnings.empty()) out += "warnings: " + text::join(a.warnings, ", ") + "\n";
    if (!trace) return out;

    out += "\n== plan\n";
    out += "original: " + a.plan.original + "\n";
    for (std::size_t i = 0; i < a.plan.sub_queries.size(); ++i) {
        out += "sub_query[" + std::to_string(i + 1) + "]: " + a.plan.sub_queries[i] + "\n";
    }
    for (std::size_t i = 0; i < a.plan.follow_ups.size(); ++i) {
        out += "follow_up[" + std::to_string(i + 1) + "]: " + a.plan.follow_ups[i] + "\n";
    }
    const auto& m = a.plan.metadata;
    out += "metadata: release=" + text::join(m.release, ",") + " series=" + text::join(m.series, ",") +
           " specification=" + text::join(m.specification, ",") + "\n";
    for (const auto& [abbr, exp] : a.plan.abbrev_expansions) {
        out += "expansion: " + abbr + " = " + exp + "\n";
    }
    for (const auto& r : a.plan.repairs) out += "repair: " + r + "\n";

    out += "\n== retrieval\n";
    for (std::size_t i = 0; i < a.retrieval.size(); ++i) {
        const auto& r = a.retrieval[i];
        out += "[" + std::to_string(i + 1) + "] " + (r.follow_up ? "(follow-up) " : "") + r.sub_query + "\n";
        if (r.error) out += "  error: " + *r.error + "\n";
        for (std::size_t k = 0; k < r.candidates.size() && k < 10; ++k) {
            const auto& c = r.candidates[k];
            out += "  " + std::to_string(k + 1) + ". " + c.chunk_id + " fused=" + fixed(c.fused) +
                   " cos=" + fixed(c.cos_score) + " lex=" + fixed(c.lex_raw) +
                   " lex_norm=" + fixed(c.lex_norm) + " origin=" + std::string(to_string(c.origin)) + "\n";
        }
        if (r.candidates.size() > 10) {
            out += "  ... " + std::to_string(r.candidates.size() - 10) + " more\n";
        }
    }

    out += "\n== filter\n";
    for (std::size_t i = 0; i < a.retrieval.size(); ++i) {
        const auto& r = a.retrieval[i].result;
        std::size_t kept = 0;
        for (const auto& d : r.decisions) kept += d.kept;
        out += "[" + std::to_string(i + 1) + "] " +
               (r.decisions.empty() ? std::string("not applied")
                                    : "kept=" + std::to_string(kept) + " dropped=" +
                                          std::to_string(r.decisions.size() - kept)) +
               (r.degraded_filter ? " degraded" : "") + "\n";
        for (const auto& c : r.chunks) out += "  selected " + c.chunk_id + "\n";
    }

    out += "\n== context\n";
    out += "entries=" + std::to_string(a.provenance.entries.size()) +
           " tokens=" + std::to_string(a.provenance.total_tokens) +
           (a.provenance.truncated ? " truncated" : "") + "\n";
    for (const auto& e : a.provenance.entries) {
        out += "  " + e.chunk_id + " score=" + fixed(e.score) + " sources=" +
               std::to_string(e.sources.size()) + "\n";
    }

    out += "\n== prompt\n";
    out += "prompt_tokens=" + std::to_string(a.prompt_tokens) + "\n";

    out += "\n== timings\n";
    out += "pre_retrieval_ms=" + fixed(a.timings.pre_retrieval_ms, 3) + "\n";
    out += "retrieval_ms=" + fixed(a.timings.retrieval_ms, 3) + "\n";
    out += "post_retrieval_ms=" + fixed(a.timings.post_retrieval_ms, 3) + "\n";
    out += "generation_ms=" + fixed(a.timings.generation_ms, 3) + "\n";
    out += "total_ms=" + fixed(a.timings.total_ms, 3) + "\n";
    return out;
}

std::shared_ptr<const HybridIndex> open_index(const PipelineConfig& cfg) {
    auto idx = std::make_shared<HybridIndex>(HybridIndex::load(cfg.index_path));
    auto providers = make_providers(cfg.providers);
    if (idx->embedder_fingerprint() != providers.embedding->fingerprint()) {
        throw Error(ErrorCode::ConfigError, "index was built with embedder '" +
                                                idx->embedder_fingerprint() +
                                                "' but the config selects '" +
                                                providers.embedding->fingerprint() + "'");
    }
    return idx;
}

QueryService::QueryService(PipelineConfig cfg, std::shared_ptr<const HybridIndex> index)
    : cfg_(std::move(cfg)),
      providers_(make_providers(cfg_.providers)),
      claims_(providers_.claims),
      pipeline_(std::move(index), providers_, cfg_.pipeline, load_glossary(cfg_)) {}

Answer QueryService::answer(const std::string& question, const QueryOptions& options) const {
    return pipeline_.answer(question, options);
}

ojson QueryService::query_document(const std::string& question, const QueryOptions& options,
                                   bool trace) const {
    Answer a = answer(question, options);
    return ojson{{"answer", answer_to_json(a, trace)}, {"timings", timings_to_json(a.timings)}};
}

ojson QueryService::docs_document() const {
    ojson docs = ojson::array();
    for (const auto& d : pipeline_.index().documents()) {
        docs.push_back({{"doc_name", d.doc_name},
                        {"metadata", metadata_to_json(d.metadata)},
                        {"chunk_count", d.chunk_ids.size()}});
    }
    return ojson{{"docs", docs}};
}

std::optional<ojson> QueryService::doc_document(const std::string& doc_name) const {
    for (const auto& d : pipeline_.index().documents()) {
        if (d.doc_name != doc_name) continue;
        ojson media = ojson::array();
        for (const auto& m : pipeline_.index().media().records()) {
            if (m.doc_name == doc_name) media.push_back(media_to_json(m));
        }
        return ojson{{"doc_name", d.doc_name},
                     {"metadata", metadata_to_json(d.metadata)},
                     {"chunk_ids", d.chunk_ids},
                     {"media", media}};
    }
    return std::nullopt;
}

ojson QueryService::health_document() const {
    const auto& idx = pipeline_.index();
    ojson j;
    j["status"] = "ok";
    j["doc_count"] = idx.documents().size();
    j["chunk_count"] = idx.size();
    j["dim"] = idx.dim();
    j["media_count"] = idx.media().size();
    j["embedder"] = idx.embedder_fingerprint();
    j["sealed"] = idx.sealed();
    return j;
}

SuiteReport QueryService::evaluate(const std::vector<SuiteCase>& cases,
                                   const QueryOptions& options) const {
    return run_suite(cases, pipeline_, claims_.get(), options);
}

// ---------------------------------------------------------------------------
// CLI

namespace {

struct Common {
    std::string config_path;
    std::string index_path;
};

PipelineConfig resolve_config(const Common& c) {
    PipelineConfig cfg = c.config_path.empty() ? PipelineConfig{} : load_config(c.config_path);
    if (!c.index_path.empty()) cfg.index_path = c.index_path;
    return cfg;
}

bool has_index(const PipelineConfig& cfg, std::ostream& err) {
    if (std::filesystem::exists(std::filesystem::path(cfg.index_path) / "manifest.txt")) return true;
    err << "error: no index at " << cfg.index_path << " (run ingest first)\n";
    return false;
}

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config_path, "Pipeline config file (JSON)");
    app->add_option("-i,--index", c.index_path, "Index directory (overrides the config)");
}

int cmd_ingest(const Common& common, const std::string& corpus_dir, bool force, bool lenient,
               std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    if (std::filesystem::exists(std::filesystem::path(cfg.index_path) / "manifest.txt") && !force) {
        err << "refusing to overwrite existing index at " << cfg.index_path << " (use --force)\n";
        return exit_code::failure;
    }
    auto loaded = load_corpus(corpus_dir);
    for (const auto& e : loaded.errors) err << (lenient ? "warning: " : "error: ") << e << "\n";
    if (!loaded.errors.empty() && !lenient) {
        err << loaded.errors.size() << " file(s) failed to load; nothing written\n";
        return exit_code::failure;
    }
    if (loaded.corpus.empty()) {
        err << "no documents found under " << corpus_dir << "\n";
        return exit_code::failure;
    }
    auto providers = make_providers(cfg.providers);
    std::vector<DocumentIngest> summary;
    HybridIndex idx = build_index(loaded.corpus, cfg.pipeline.chunking, cfg.pipeline.multimodal,
                                  providers, &summary);
    idx.save(cfg.index_path);
    for (const auto& s : summary) {
        out << s.doc_name << ": " << s.chunks << " chunks, " << s.media << " media\n";
    }
    out << "index: " << cfg.index_path << "\n";
    for (const auto& [k, v] : idx.manifest()) out << "  " << k << "=" << v << "\n";
    return exit_code::ok;
}

int cmd_query(const Common& common, const std::string& question, const QueryOptions& options,
              bool trace, bool as_json, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    if (!has_index(cfg, err)) return exit_code::missing_index;
    QueryService svc(cfg, open_index(cfg));
    if (as_json) {
        out << svc.query_document(question, options, trace).dump(2) << "\n";
    } else {
        out << render_answer(svc.answer(question, options), trace);
    }
    return exit_code::ok;
}

int cmd_eval(const Common& common, const std::string& suite_path, const std::string& report_path,
             const QueryOptions& options, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    if (!has_index(cfg, err)) return exit_code::missing_index;
    QueryService svc(cfg, open_index(cfg));
    auto report = svc.evaluate(load_suite(suite_path), options);
    if (!report_path.empty()) save_report(report, report_path);
    out << render_report_table(report);
    return exit_code::ok;
}

int cmd_inspect(const Common& common, bool chunks, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    if (!has_index(cfg, err)) return exit_code::missing_index;
    auto idx = HybridIndex::load(cfg.index_path);
    for (const auto& [k, v] : idx.manifest()) out << k << "=" << v << "\n";
    for (const auto& d : idx.documents()) {
        out << "doc " << d.doc_name << " chunks=" << d.chunk_ids.size()
            << " release=" << text::join(d.metadata.release, ",") << " series=" << d.metadata.series
            << " specification=" << d.metadata.specification << "\n";
        if (!chunks) continue;
        for (const auto& id : d.chunk_ids) {
            const auto& c = idx.at(id);
            out << "  " << id << " level=" << c.chunk.level << " tokens=" << text::count_tokens(c.chunk.body())
                << " parent=" << c.chunk.parent_id.value_or("-") << "\n";
        }
    }
    return exit_code::ok;
}

int cmd_ablate(const Common& common, const std::string& corpus_dir, const std::string& suite_path,
               const std::string& out_path, bool latency, std::ostream& out, std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    auto loaded = load_corpus(corpus_dir);
    for (const auto& e : loaded.errors) err << "error: " << e << "\n";
    if (!loaded.errors.empty()) return exit_code::failure;
    auto suite = load_suite(suite_path);
    auto providers = make_providers(cfg.providers);
    auto glossary = load_glossary(cfg);
    auto rows = run_ablation(suite, loaded.corpus, standard_ladder(cfg.pipeline), providers, glossary);
    out << render_ablation_table(rows);
    ojson doc{{"ablation", ablation_to_json(rows)}};
    if (latency) {
        auto idx = std::make_shared<HybridIndex>(
            build_index(loaded.corpus, cfg.pipeline.chunking, cfg.pipeline.multimodal, providers));
        Pipeline pipeline(idx, providers, cfg.pipeline, glossary);
        auto report = run_latency(suite, pipeline);
        out << "\n" << render_latency_table(report);
        doc["latency"] = latency_to_json(report);
    }
    if (!out_path.empty()) {
        std::ofstream f(out_path, std::ios::trunc);
        f << doc.dump(2) << "\n";
        if (!f) throw Error(ErrorCode::IoError, "cannot write " + out_path);
    }
    return exit_code::ok;
}

int cmd_serve(const Common& common, const std::string& host, int port, std::ostream& out,
              std::ostream& err) {
    PipelineConfig cfg = resolve_config(common);
    if (!has_index(cfg, err)) return exit_code::missing_index;
    HttpService http(cfg);
    std::thread loader([&] { http.load(); });
    out << "serving on http://" << host << ":" << port << "/v1\n" << std::flush;
    bool ok = http.listen(host, port);
    loader.join();
    return ok ? exit_code::ok : exit_code::failure;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Question answering over structured technical specifications", "specrag"};
    app.require_subcommand(1);

    Common common;
    std::string corpus_dir, question, suite_path, report_path, out_path, host = "127.0.0.1";
    bool force = false, lenient = false, trace = false, as_json = false, deep = false,
         no_filter = false, chunks = false, latency = false;
    int port = 8080;

    auto* ingest = app.add_subcommand("ingest", "Chunk, embed and index a corpus directory");
    add_common(ingest, common);
    ingest->add_option("corpus", corpus_dir, "Directory of .md/.json documents")->required();
    ingest->add_flag("--force", force, "Overwrite an existing index");
    ingest->add_flag("--lenient", lenient, "Skip files that fail to parse");

    auto* query = app.add_subcommand("query", "Answer a question");
    add_common(query, common);
    query->add_option("question", question, "Question text")->required();
    query->add_flag("--deep", deep, "Also retrieve for planned follow-up queries");
    query->add_flag("--trace", trace, "Print the stage breakdown");
    query->add_flag("--no-filter", no_filter, "Disable the metadata filter");
    query->add_flag("--json", as_json, "Print the answer as JSON");

    auto* eval = app.add_subcommand("eval", "Answer and score a JSONL suite");
    add_common(eval, common);
    eval->add_option("suite", suite_path, "Suite file (JSON Lines)")->required();
    eval->add_option("--report", report_path, "Write the JSON report here");
    eval->add_flag("--deep", deep, "Also retrieve for planned follow-up queries");
    eval->add_flag("--no-filter", no_filter, "Disable the metadata filter");

    auto* serve = app.add_subcommand("serve", "Serve the HTTP API");
    add_common(serve, common);
    serve->add_option("--host", host, "Bind address");
    serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));

    auto* inspect = app.add_subcommand("inspect-index", "Print the index manifest and documents");
    add_common(inspect, common);
    inspect->add_flag("--chunks", chunks, "List chunks per document");

    auto* config = app.add_subcommand("config", "Print the effective configuration");
    add_common(config, common);

    auto* ablate = app.add_subcommand("ablate", "Run the stage ablation ladder on a corpus");
    add_common(ablate, common);
    ablate->add_option("corpus", corpus_dir, "Directory of .md/.json documents")->required();
    ablate->add_option("suite", suite_path, "Suite file (JSON Lines)")->required();
    ablate->add_option("--out", out_path, "Write the JSON tables here");
    ablate->add_flag("--latency", latency, "Also measure per-stage latency on the full pipeline");

    try {
        std::vector<std::string> reversed(args.rbegin(), args.rend());
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return exit_code::ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return exit_code::usage;
    }

    QueryOptions options;
    options.deep = deep;
    options.no_filter = no_filter;
    try {
        if (*ingest) return cmd_ingest(common, corpus_dir, force, lenient, out, err);
        if (*query) return cmd_query(common, question, options, trace, as_json, out, err);
        if (*eval) return cmd_eval(common, suite_path, report_path, options, out, err);
        if (*serve) return cmd_serve(common, host, port, out, err);
        if (*inspect) return cmd_inspect(common, chunks, out, err);
        if (*config) {
            out << config_to_json(resolve_config(common)).dump(2) << "\n";
            return exit_code::ok;
        }
        if (*ablate) return cmd_ablate(common, corpus_dir, suite_path, out_path, latency, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        if (e.code() == ErrorCode::ConfigError) return exit_code::config;
        return exit_code::failure;
    }
    return exit_code::usage;
}

}  // namespace specrag
