#pragma once

#include <optional>
#include <string>
#include <vector>

namespace ctseg {

// One evaluated case: the nine metric values (percent for overlap/surface
// ratios, millimeters for distances) plus the configuration they were
// computed under, so aggregated tables are self-describing. Metrics whose
// denominator is empty stay unset and serialize as explicit markers rather
// than silently becoming 0.
struct CaseReport {
    std::string case_id;
    std::optional<double> wdsc;  // percent
    std::optional<double> dsc;   // percent
    std::optional<double> iou;   // percent
    std::optional<double> sen;   // percent
    std::optional<double> ppv;   // percent
    std::optional<double> hd;    // mm
    std::optional<double> assd;  // mm
    std::optional<double> so;    // percent
    std::optional<double> sd;    // percent
    double theta_mm = 1.0;
    double threshold = 0.5;
    double w1 = 0.1;
    double w2 = 0.9;
    std::string attention = "-";
};

enum class ReportFormat { Json, Csv };

ReportFormat report_format_from_string(const std::string& s);

// Deterministic serialization: stable field order, 2 decimals for
// percentages, 4 for millimeter and config values; undefined metrics are
// null in JSON and NA in CSV. CSV gets a final "mean" row averaging each
// numeric column over the cases where it is defined.
std::string format_report_json(const std::vector<CaseReport>& reports);
std::string format_report_csv(const std::vector<CaseReport>& reports);

void write_report(const std::vector<CaseReport>& reports, const std::string& path,
                  ReportFormat format);

// Parses a JSON report file (array of case objects) back into reports.
std::vector<CaseReport> read_report_json(const std::string& path);

}  // namespace ctseg
