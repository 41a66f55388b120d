#pragma once

#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "arqa/pipeline.hpp"

namespace arqa {

struct MetricReport {
    std::optional<double> accuracy;  // present only for yes/no gold labels
    std::optional<double> bleu;      // present only with reference texts
    std::optional<double> rouge_l;
    double correct_fraction = 0.0;   // gold-key / label match over all traces
    double retrieval_rate = 0.0;
    double avg_retrieval_calls = 0.0;
    double avg_llm_calls = 0.0;
    int n = 0;
};

enum class AttributionLabel { correct, internal, external, undetermined };

const char* attribution_name(AttributionLabel label);

struct AttributionSummary {
    int correct = 0;
    int internal = 0;
    int external = 0;
    int undetermined = 0;
    std::vector<std::pair<std::string, AttributionLabel>> per_question;  // (id, label)

    int total() const { return correct + internal + external + undetermined; }
    double percent(int count) const;
};

// Whether the trace's final answer matches its gold: exact match of the
// extracted yes/no for labeled data, normalized containment of any gold
// reference for long-form data.  False when no gold or status=error.
bool trace_correct(const AnswerTrace& trace);

// correct / internal (wrong without retrieval) / external (wrong after
// retrieval) / undetermined (errored trace).
AttributionLabel attribute(const AnswerTrace& trace);

MetricReport compute_metrics(const std::vector<AnswerTrace>& traces);
AttributionSummary attribute_all(const std::vector<AnswerTrace>& traces);

// CSV with header "id,z_cl,z_cm,z_hybrid,correct"; absent scores emit
// empty fields.
std::string export_score_labels_csv(const std::vector<AnswerTrace>& traces);

enum class SweepAxis { threshold, k, alpha, language_pair, verifier };

const char* sweep_axis_name(SweepAxis axis);
SweepAxis parse_sweep_axis(const std::string& name);

// Returns base with one axis value applied: threshold/alpha parse as
// reals, k as an integer, language_pair as "src-tgt", verifier as the
// verifier model id.
PipelineConfig apply_axis_value(const PipelineConfig& base, SweepAxis axis,
                                const std::string& value);

struct SweepRow {
    std::string value;
    MetricReport report;
    std::string error;  // non-empty when this value failed

    bool ok() const { return error.empty(); }
};

using PipelineFactory = std::function<std::unique_ptr<Pipeline>(const PipelineConfig&)>;

// One run_dataset per value; failures are recorded and the sweep
// continues.  The default factory builds pipelines from config bindings;
// tests inject scripted ones.  When run_root is non-empty each value's
// traces land under run_root/<axis>-<value>/.
std::vector<SweepRow> sweep(const std::vector<DatasetRecord>& records,
                            const PipelineConfig& base,
                            SweepAxis axis,
                            const std::vector<std::string>& values,
                            const std::filesystem::path& run_root = {},
                            const PipelineFactory& factory = {});

std::string sweep_to_csv(SweepAxis axis, const std::vector<SweepRow>& rows);

}  // namespace arqa
