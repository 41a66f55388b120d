#include "arqa/eval.hpp"

#include <cctype>
#include <stdexcept>

#include "arqa/errors.hpp"
#include "arqa/metrics.hpp"
#include "text_util.hpp"

namespace arqa {

namespace {

std::string normalize_loose(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    for (char c : s) {
        if (std::isspace(static_cast<unsigned char>(c))) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out.push_back(' ');
            pending_space = false;
        }
        out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    }
    return out;
}

std::string csv_escape(const std::string& field) {
    bool needs_quotes = field.find_first_of(",\"\n\r") != std::string::npos;
    if (!needs_quotes) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out.push_back(c);
    }
    out += '"';
    return out;
}

std::string sanitize_dir_component(const std::string& s) {
    std::string out = s;
    for (char& c : out) {
        bool ok = std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_' || c == '.';
        if (!ok) c = '_';
    }
    return out.empty() ? "value" : out;
}

double parse_real(const std::string& value, const char* what) {
    try {
        std::size_t consumed = 0;
        double parsed = std::stod(value, &consumed);
        if (consumed != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(std::string("sweep: cannot parse ") + what + " value \"" + value + "\"");
    }
}

int parse_int(const std::string& value, const char* what) {
    try {
        std::size_t consumed = 0;
        int parsed = std::stoi(value, &consumed);
        if (consumed != value.size()) throw std::invalid_argument(value);
        return parsed;
    } catch (const std::exception&) {
        throw ConfigError(std::string("sweep: cannot parse ") + what + " value \"" + value + "\"");
    }
}

}  // namespace

const char* attribution_name(AttributionLabel label) {
    switch (label) {
        case AttributionLabel::correct: return "correct";
        case AttributionLabel::internal: return "internal";
        case AttributionLabel::external: return "external";
        case AttributionLabel::undetermined: return "undetermined";
    }
    return "undetermined";
}

double AttributionSummary::percent(int count) const {
    int n = total();
    return n == 0 ? 0.0 : 100.0 * static_cast<double>(count) / static_cast<double>(n);
}

bool trace_correct(const AnswerTrace& trace) {
    if (trace.status != TraceStatus::ok) return false;
    if (trace.gold_label) {
        YesNo extracted = extract_yesno(trace.final_answer);
        if (extracted == YesNo::unparsed) return false;  // unparsed counts as incorrect
        return (extracted == YesNo::yes) == (*trace.gold_label == "yes");
    }
    if (!trace.gold_answers.empty()) {
        std::string final_norm = normalize_loose(trace.final_answer);
        for (const std::string& gold : trace.gold_answers) {
            std::string gold_norm = normalize_loose(gold);
            if (!gold_norm.empty() && final_norm.find(gold_norm) != std::string::npos) {
                return true;
            }
        }
        return false;
    }
    return false;
}

AttributionLabel attribute(const AnswerTrace& trace) {
    if (trace.status != TraceStatus::ok) return AttributionLabel::undetermined;
    if (!trace.gold_label && trace.gold_answers.empty()) return AttributionLabel::undetermined;
    if (trace_correct(trace)) return AttributionLabel::correct;
    bool retrieved = trace.decision == Decision::retrieve;
    return retrieved ? AttributionLabel::external : AttributionLabel::internal;
}

MetricReport compute_metrics(const std::vector<AnswerTrace>& traces) {
    MetricReport report;
    report.n = static_cast<int>(traces.size());
    if (traces.empty()) return report;

    int labeled = 0;
    int label_correct = 0;
    int with_refs = 0;
    double bleu_sum = 0.0;
    double rouge_sum = 0.0;
    int correct = 0;
    int retrieved = 0;
    double retrieval_calls = 0.0;
    double llm_calls = 0.0;

    for (const AnswerTrace& trace : traces) {
        if (trace.gold_label) {
            ++labeled;
            if (trace_correct(trace)) ++label_correct;
        }
        if (!trace.gold_answers.empty()) {
            ++with_refs;
            bleu_sum += bleu(trace.final_answer, trace.gold_answers);
            rouge_sum += rouge_l(trace.final_answer, trace.gold_answers);
        }
        if (trace_correct(trace)) ++correct;
        if (trace.decision == Decision::retrieve) ++retrieved;
        retrieval_calls += static_cast<double>(trace.counters.retrieval_calls);
        llm_calls += static_cast<double>(trace.counters.llm_calls);
    }

    double n = static_cast<double>(traces.size());
    if (labeled == report.n) {
        report.accuracy = static_cast<double>(label_correct) / n;
    }
    if (with_refs > 0) {
        report.bleu = bleu_sum / static_cast<double>(with_refs);
        report.rouge_l = rouge_sum / static_cast<double>(with_refs);
    }
    report.correct_fraction = static_cast<double>(correct) / n;
    report.retrieval_rate = static_cast<double>(retrieved) / n;
    report.avg_retrieval_calls = retrieval_calls / n;
    report.avg_llm_calls = llm_calls / n;
    return report;
}

AttributionSummary attribute_all(const std::vector<AnswerTrace>& traces) {
    AttributionSummary summary;
    for (const AnswerTrace& trace : traces) {
        AttributionLabel label = attribute(trace);
        switch (label) {
            case AttributionLabel::correct: ++summary.correct; break;
            case AttributionLabel::internal: ++summary.internal; break;
            case AttributionLabel::external: ++summary.external; break;
            case AttributionLabel::undetermined: ++summary.undetermined; break;
        }
        summary.per_question.emplace_back(trace.id, label);
    }
    return summary;
}

std::string export_score_labels_csv(const std::vector<AnswerTrace>& traces) {
    std::string out = "id,z_cl,z_cm,z_hybrid,correct\n";
    for (const AnswerTrace& trace : traces) {
        out += csv_escape(trace.id);
        out += ',';
        if (trace.detection && trace.detection->report.z_cl) {
            out += text::format_double(*trace.detection->report.z_cl);
        }
        out += ',';
        if (trace.detection && trace.detection->report.z_cm) {
            out += text::format_double(*trace.detection->report.z_cm);
        }
        out += ',';
        if (trace.detection && trace.detection->report.z_hybrid) {
            out += text::format_double(*trace.detection->report.z_hybrid);
        }
        out += ',';
        out += trace_correct(trace) ? "true" : "false";
        out += '\n';
    }
    return out;
}

const char* sweep_axis_name(SweepAxis axis) {
    switch (axis) {
        case SweepAxis::threshold: return "threshold";
        case SweepAxis::k: return "k";
        case SweepAxis::alpha: return "alpha";
        case SweepAxis::language_pair: return "language_pair";
        case SweepAxis::verifier: return "verifier";
    }
    return "threshold";
}

SweepAxis parse_sweep_axis(const std::string& name) {
    if (name == "threshold") return SweepAxis::threshold;
    if (name == "k") return SweepAxis::k;
    if (name == "alpha") return SweepAxis::alpha;
    if (name == "language_pair") return SweepAxis::language_pair;
    if (name == "verifier") return SweepAxis::verifier;
    throw ConfigError("unknown sweep axis \"" + name +
                      "\" (expected threshold, k, alpha, language_pair, or verifier)");
}

PipelineConfig apply_axis_value(const PipelineConfig& base, SweepAxis axis,
                                const std::string& value) {
    PipelineConfig config = base;
    switch (axis) {
        case SweepAxis::threshold:
            config.set_threshold_for_mode(parse_real(value, "threshold"));
            break;
        case SweepAxis::k:
            config.k = parse_int(value, "k");
            break;
        case SweepAxis::alpha:
            config.alpha = parse_real(value, "alpha");
            break;
        case SweepAxis::language_pair: {
            std::size_t dash = value.find('-');
            if (dash == std::string::npos || dash == 0 || dash + 1 >= value.size()) {
                throw ConfigError("sweep: language_pair values look like \"en-zh\", got \"" +
                                  value + "\"");
            }
            config.source_language = value.substr(0, dash);
            config.target_language = value.substr(dash + 1);
            break;
        }
        case SweepAxis::verifier:
            config.verifier.model_id = value;
            break;
    }
    config.validate();
    return config;
}

std::vector<SweepRow> sweep(const std::vector<DatasetRecord>& records,
                            const PipelineConfig& base, SweepAxis axis,
                            const std::vector<std::string>& values,
                            const std::filesystem::path& run_root,
                            const PipelineFactory& factory) {
    std::vector<SweepRow> rows;
    rows.reserve(values.size());
    for (const std::string& value : values) {
        SweepRow row;
        row.value = value;
        try {
            PipelineConfig config = apply_axis_value(base, axis, value);
            std::unique_ptr<Pipeline> pipeline =
                factory ? factory(config) : std::make_unique<Pipeline>(config);
            std::filesystem::path dir;
            if (!run_root.empty()) {
                dir = run_root / (std::string(sweep_axis_name(axis)) + "-" +
                                  sanitize_dir_component(value));
            }
            std::vector<AnswerTrace> traces = pipeline->run_dataset(records, dir);
            row.report = compute_metrics(traces);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string sweep_to_csv(SweepAxis axis, const std::vector<SweepRow>& rows) {
    std::string out = std::string(sweep_axis_name(axis)) +
                      ",n,accuracy,bleu,rouge_l,correct_fraction,retrieval_rate,"
                      "avg_retrieval_calls,avg_llm_calls,error\n";
    for (const SweepRow& row : rows) {
        out += csv_escape(row.value);
        out += ',' + std::to_string(row.report.n);
        out += ',';
        if (row.report.accuracy) out += text::format_double(*row.report.accuracy);
        out += ',';
        if (row.report.bleu) out += text::format_double(*row.report.bleu);
        out += ',';
        if (row.report.rouge_l) out += text::format_double(*row.report.rouge_l);
        out += ',' + text::format_double(row.report.correct_fraction);
        out += ',' + text::format_double(row.report.retrieval_rate);
        out += ',' + text::format_double(row.report.avg_retrieval_calls);
        out += ',' + text::format_double(row.report.avg_llm_calls);
        out += ',' + csv_escape(row.error);
        out += '\n';
    }
    return out;
}

}  // namespace arqa
