#pragma once

#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrag/config.hpp"
#include "specrag/evalkit.hpp"
#include "specrag/pipeline.hpp"

namespace specrag {

struct Rung {
    std::string name;
    PipelineOptions options;
};

/// Cumulative ladder: baseline, +chunking, +query expansion, +hierarchical,
/// +hybrid, +post-retrieval, +multimodal. The last rung equals `full` with
/// every stage switched on.
std::vector<Rung> standard_ladder(const PipelineOptions& full = {});

/// Names of the stages switched on in `options`.
std::vector<std::string> enabled_stages(const PipelineOptions& options);

struct AblationRow {
    std::string rung;
    std::vector<std::string> stages;
    double mean_recall = 0.0;
    double mean_claim_recall = 0.0;
    std::size_t solved = 0;  // cases with recall 1
    std::size_t cases = 0;
    std::vector<std::string> solved_ids;
    StageTimings mean_latency;
    std::optional<std::string> error;
};

/// One row per rung. The index is rebuilt whenever chunking or media
/// handling differs from the previous build.
std::vector<AblationRow> run_ablation(const std::vector<SuiteCase>& suite, const Corpus& corpus,
                                      const std::vector<Rung>& ladder, const ProviderSet& providers,
                                      const Glossary& glossary);

nlohmann::ordered_json ablation_to_json(const std::vector<AblationRow>& rows);
std::string render_ablation_table(const std::vector<AblationRow>& rows);

struct LatencyStats {
    double mean = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
};

struct LatencyReport {
    std::size_t queries = 0;
    LatencyStats pre_retrieval;
    LatencyStats retrieval;
    LatencyStats post_retrieval;
    LatencyStats generation;
    LatencyStats total;
    /// Largest relative gap between the stage sum and the total of one query.
    double max_sum_deviation = 0.0;
};

/// Nearest-rank percentile of `values` (unsorted), q in (0, 1].
double percentile(std::vector<double> values, double q);
LatencyStats summarize(const std::vector<double>& values);

/// Wall-clock per stage over `repeats` passes of the suite.
LatencyReport run_latency(const std::vector<SuiteCase>& suite, const Pipeline& pipeline,
                          int repeats = 1);

nlohmann::ordered_json latency_to_json(const LatencyReport& report);
std::string render_latency_table(const LatencyReport& report);

}  // namespace specrag
