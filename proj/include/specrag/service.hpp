#pragma once

#include <iosfwd>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "specrag/config.hpp"
#include "specrag/evalkit.hpp"
#include "specrag/pipeline.hpp"

namespace specrag {

/// Exit codes of the command-line tool.
namespace exit_code {
inline constexpr int ok = 0;
inline constexpr int failure = 1;
inline constexpr int missing_index = 2;
inline constexpr int usage = 64;
inline constexpr int config = 78;
}  // namespace exit_code

/// Stable JSON form of an answer. Timings are reported separately because
/// they are the only non-deterministic part.
nlohmann::ordered_json answer_to_json(const Answer& answer, bool trace);

/// Human-readable answer; with `trace` the stage breakdown follows in the
/// order plan, retrieval, filter, context, prompt, timings.
std::string render_answer(const Answer& answer, bool trace);

/// Loads the index named by the config and checks it against the configured
/// embedder. Throws IoError when no index exists.
std::shared_ptr<const HybridIndex> open_index(const PipelineConfig& cfg);

/// The one query path shared by the CLI and the HTTP server.
class QueryService {
  public:
    QueryService(PipelineConfig cfg, std::shared_ptr<const HybridIndex> index);

    Answer answer(const std::string& question, const QueryOptions& options) const;

    /// {"answer": ..., "timings": ...}
    nlohmann::ordered_json query_document(const std::string& question, const QueryOptions& options,
                                          bool trace) const;
    nlohmann::ordered_json docs_document() const;
    /// Null when the document is unknown.
    std::optional<nlohmann::ordered_json> doc_document(const std::string& doc_name) const;
    nlohmann::ordered_json health_document() const;
    SuiteReport evaluate(const std::vector<SuiteCase>& cases, const QueryOptions& options) const;

    const Pipeline& pipeline() const { return pipeline_; }
    const PipelineConfig& config() const { return cfg_; }

  private:
    PipelineConfig cfg_;
    ProviderSet providers_;
    std::shared_ptr<const ClaimProvider> claims_;
    Pipeline pipeline_;
};

/// Entry point of the `specrag` tool. `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace specrag
