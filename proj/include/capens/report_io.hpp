#pragma once

#include "capens/evaluation.hpp"

#include <nlohmann/json.hpp>

#include <string>
#include <vector>

namespace capens {

nlohmann::json report_to_json(const EvaluationReport& report);

/// Throws Error(SchemaViolation) on a document that is not a report.
EvaluationReport report_from_json(const nlohmann::json& j);

/// Stable text form of a report: 2-space indented JSON, trailing newline.
std::string dump_report(const EvaluationReport& report);

/// id,cn,category,s_pos,s_neg1,s_neg2,win
std::string instances_csv(const EvaluationReport& report);

/// category,count,errors,accuracy,mean_winning_similarity (plus a total row).
std::string categories_csv(const CategoryTable& table);

/// k,accuracy
std::string sweep_csv(const SweepReport& sweep);

nlohmann::json sweep_to_json(const SweepReport& sweep);

nlohmann::json classification_to_json(const ClassificationReport& report);

struct ComparisonRow {
    std::string strategy;
    std::string model;
    double accuracy = 0.0;
    std::optional<double> mean_winning_similarity;
};

/// One row per report, highest accuracy first. Throws Error(SchemaViolation)
/// when the reports come from different benchmark versions.
std::vector<ComparisonRow> compare_reports(const std::vector<EvaluationReport>& reports);

std::string comparison_csv(const std::vector<ComparisonRow>& rows);
std::string comparison_table(const std::vector<ComparisonRow>& rows);

/// Fixed two-decimal rendering used for accuracy lines.
std::string format_pct(double value);

}  // namespace capens
