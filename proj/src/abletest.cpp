#include "specrag/abletest.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "specrag/error.hpp"
#include "specrag/text.hpp"

namespace specrag {

using ojson = nlohmann::ordered_json;

std::vector<Rung> standard_ladder(const PipelineOptions& full) {
    PipelineOptions o = full;
    o.chunking.strategy = ChunkStrategy::Fixed;
    o.query_expansion = false;
    o.retrieval.stages.hierarchical = false;
    o.retrieval.stages.hybrid = false;
    o.retrieval.stages.filter = false;
    o.retrieval.stages.rerank = false;
    o.multimodal = false;

    std::vector<Rung> ladder;
    ladder.push_back({"baseline", o});
    o.chunking.strategy = ChunkStrategy::Structural;
    ladder.push_back({"+chunking", o});
    o.query_expansion = true;
    ladder.push_back({"+query expansion", o});
    o.retrieval.stages.hierarchical = true;
    ladder.push_back({"+hierarchical", o});
    o.retrieval.stages.hybrid = true;
    ladder.push_back({"+hybrid", o});
    o.retrieval.stages.filter = true;
    o.retrieval.stages.rerank = true;
    ladder.push_back({"+post-retrieval", o});
    o.multimodal = true;
    ladder.push_back({"+multimodal", o});
    return ladder;
}

std::vector<std::string> enabled_stages(const PipelineOptions& o) {
    std::vector<std::string> s;
    if (o.chunking.strategy == ChunkStrategy::Structural) s.push_back("chunking");
    if (o.query_expansion) s.push_back("query_expansion");
    if (o.retrieval.stages.hierarchical && o.retrieval.expand_parents) s.push_back("hierarchical");
    if (o.retrieval.stages.hybrid) s.push_back("hybrid");
    if (o.retrieval.stages.filter) s.push_back("filter");
    if (o.retrieval.stages.rerank) s.push_back("rerank");
    if (o.multimodal) s.push_back("multimodal");
    return s;
}

std::vector<AblationRow> run_ablation(const std::vector<SuiteCase>& suite, const Corpus& corpus,
                                      const std::vector<Rung>& ladder, const ProviderSet& providers,
                                      const Glossary& glossary) {
    if (suite.empty()) throw Error(ErrorCode::EmptySuite, "ablation suite has no records");
    std::vector<AblationRow> rows;
    std::shared_ptr<const HybridIndex> index;
    std::optional<std::pair<ChunkingConfig, bool>> built_for;
    for (const auto& rung : ladder) {
        AblationRow row;
        row.rung = rung.name;
        row.stages = enabled_stages(rung.options);
        row.cases = suite.size();
        try {
            auto key = std::make_pair(rung.options.chunking, rung.options.multimodal);
            bool same = built_for && built_for->first.s_max == key.first.s_max &&
                        built_for->first.overlap == key.first.overlap &&
                        built_for->first.strategy == key.first.strategy &&
                        built_for->second == key.second;
            if (!same) {
                index = std::make_shared<HybridIndex>(
                    build_index(corpus, rung.options.chunking, rung.options.multimodal, providers));
                built_for = key;
            }
            Pipeline pipeline(index, providers, rung.options, glossary);
            auto report = run_suite(suite, pipeline, providers.claims.get());
            row.mean_recall = report.mean.recall;
            row.mean_claim_recall = report.mean.claim_recall;
            row.mean_latency = report.mean_timings;
            for (const auto& r : report.records) {
                if (r.metrics.recall == 1.0) {
                    ++row.solved;
                    row.solved_ids.push_back(r.input.id);
                }
            }
        } catch (const Error& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

ojson ablation_to_json(const std::vector<AblationRow>& rows) {
    ojson out = ojson::array();
    for (const auto& r : rows) {
        ojson j;
        j["rung"] = r.rung;
        j["stages"] = r.stages;
        j["mean_recall"] = r.mean_recall;
        j["mean_claim_recall"] = r.mean_claim_recall;
        j["solved"] = r.solved;
        j["cases"] = r.cases;
        j["solved_ids"] = r.solved_ids;
        j["mean_latency"] = timings_to_json(r.mean_latency);
        j["error"] = r.error ? ojson(*r.error) : ojson(nullptr);
        out.push_back(std::move(j));
    }
    return out;
}

std::string render_ablation_table(const std::vector<AblationRow>& rows) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-18s %8s %8s %8s %10s\n", "rung", "R", "CR", "solved",
                  "total_ms");
    out += buf;
    for (const auto& r : rows) {
        std::string solved = std::to_string(r.solved) + "/" + std::to_string(r.cases);
        std::snprintf(buf, sizeof buf, "%-18s %8.3f %8.3f %8s %10.2f%s\n", r.rung.c_str(),
                      r.mean_recall, r.mean_claim_recall, solved.c_str(), r.mean_latency.total_ms,
                      r.error ? "  (error)" : "");
        out += buf;
    }
    return out;
}

double percentile(std::vector<double> values, double q) {
    require(!values.empty(), "percentile of an empty sample");
    require(q > 0.0 && q <= 1.0, "percentile rank must be in (0, 1]");
    std::sort(values.begin(), values.end());
    auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(values.size())));
    return values[std::max<std::size_t>(rank, 1) - 1];
}

LatencyStats summarize(const std::vector<double>& values) {
    LatencyStats s;
    if (values.empty()) return s;
    double sum = 0.0;
    for (double v : values) sum += v;
    s.mean = sum / static_cast<double>(values.size());
    s.p50 = percentile(values, 0.5);
    s.p95 = percentile(values, 0.95);
    return s;
}

LatencyReport run_latency(const std::vector<SuiteCase>& suite, const Pipeline& pipeline,
                          int repeats) {
    if (suite.empty()) throw Error(ErrorCode::EmptySuite, "latency suite has no records");
    require(repeats > 0, "repeats must be positive");
    std::vector<double> pre, ret, post, gen, total;
    LatencyReport report;
    for (int i = 0; i < repeats; ++i) {
        for (const auto& c : suite) {
            auto t = pipeline.answer(c.question).timings;
            pre.push_back(t.pre_retrieval_ms);
            ret.push_back(t.retrieval_ms);
            post.push_back(t.post_retrieval_ms);
            gen.push_back(t.generation_ms);
            total.push_back(t.total_ms);
            if (t.total_ms > 0.0) {
                report.max_sum_deviation = std::max(
                    report.max_sum_deviation, std::abs(t.stage_sum() - t.total_ms) / t.total_ms);
            }
        }
    }
    report.queries = total.size();
    report.pre_retrieval = summarize(pre);
    report.retrieval = summarize(ret);
    report.post_retrieval = summarize(post);
    report.generation = summarize(gen);
    report.total = summarize(total);
    return report;
}

ojson latency_to_json(const LatencyReport& r) {
    auto stats = [](const LatencyStats& s) {
        return ojson{{"mean_ms", s.mean}, {"p50_ms", s.p50}, {"p95_ms", s.p95}};
    };
    ojson j;
    j["queries"] = r.queries;
    j["stages"] = {{"pre_retrieval", stats(r.pre_retrieval)},
                   {"retrieval", stats(r.retrieval)},
                   {"post_retrieval", stats(r.post_retrieval)},
                   {"generation", stats(r.generation)}};
    j["total"] = stats(r.total);
    j["max_sum_deviation"] = r.max_sum_deviation;
    return j;
}

std::string render_latency_table(const LatencyReport& r) {
    std::string out;
    char buf[256];
    std::snprintf(buf, sizeof buf, "%-16s %10s %10s %10s\n", "stage", "mean_ms", "p50_ms", "p95_ms");
    out += buf;
    auto row = [&](const char* name, const LatencyStats& s) {
        std::snprintf(buf, sizeof buf, "%-16s %10.3f %10.3f %10.3f\n", name, s.mean, s.p50, s.p95);
        out += buf;
    };
    row("pre-retrieval", r.pre_retrieval);
    row("retrieval", r.retrieval);
    row("post-retrieval", r.post_retrieval);
    row("generation", r.generation);
    row("total", r.total);
    return out;
}

}  // namespace specrag
