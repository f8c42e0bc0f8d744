#include "ctseg/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace ctseg {
namespace {

std::string fixed(double v, int decimals) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", decimals, v);
    return buf;
}

std::string json_escape(const std::string& s) {
    return nlohmann::json(s).dump();
}

struct Column {
    const char* name;
    int decimals;  // -1 marks the string columns
};

// Field order is the serialization contract; keep it in sync with CaseReport.
constexpr Column kColumns[] = {
    {"case_id", -1}, {"wdsc", 2}, {"dsc", 2},      {"iou", 2},       {"sen", 2},
    {"ppv", 2},      {"hd", 4},   {"assd", 4},     {"so", 2},        {"sd", 2},
    {"theta_mm", 4}, {"threshold", 4}, {"w1", 4},  {"w2", 4},        {"attention", -1},
};

std::optional<double> numeric_field(const CaseReport& r, const std::string& name) {
    if (name == "wdsc") return r.wdsc;
    if (name == "dsc") return r.dsc;
    if (name == "iou") return r.iou;
    if (name == "sen") return r.sen;
    if (name == "ppv") return r.ppv;
    if (name == "hd") return r.hd;
    if (name == "assd") return r.assd;
    if (name == "so") return r.so;
    if (name == "sd") return r.sd;
    if (name == "theta_mm") return r.theta_mm;
    if (name == "threshold") return r.threshold;
    if (name == "w1") return r.w1;
    if (name == "w2") return r.w2;
    return std::nullopt;
}

}  // namespace

ReportFormat report_format_from_string(const std::string& s) {
    if (s == "json") return ReportFormat::Json;
    if (s == "csv") return ReportFormat::Csv;
    throw std::invalid_argument("unknown report format: " + s + " (expected json or csv)");
}

std::string format_report_json(const std::vector<CaseReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("report list is empty");
    std::ostringstream out;
    out << "[\n";
    for (std::size_t i = 0; i < reports.size(); ++i) {
        const CaseReport& r = reports[i];
        out << "  {";
        bool first = true;
        for (const Column& col : kColumns) {
            if (!first) out << ", ";
            first = false;
            out << "\"" << col.name << "\": ";
            std::string name = col.name;
            if (name == "case_id")
                out << json_escape(r.case_id);
            else if (name == "attention")
                out << json_escape(r.attention);
            else {
                std::optional<double> v = numeric_field(r, name);
                if (v)
                    out << fixed(*v, col.decimals);
                else
                    out << "null";
            }
        }
        out << "}" << (i + 1 < reports.size() ? "," : "") << "\n";
    }
    out << "]\n";
    return out.str();
}

std::string format_report_csv(const std::vector<CaseReport>& reports) {
    if (reports.empty()) throw std::invalid_argument("report list is empty");
    std::ostringstream out;
    bool first = true;
    for (const Column& col : kColumns) {
        if (!first) out << ",";
        first = false;
        out << col.name;
    }
    out << "\n";

    auto emit_row = [&](const CaseReport& r) {
        bool f = true;
        for (const Column& col : kColumns) {
            if (!f) out << ",";
            f = false;
            std::string name = col.name;
            if (name == "case_id")
                out << r.case_id;
            else if (name == "attention")
                out << r.attention;
            else {
                std::optional<double> v = numeric_field(r, name);
                out << (v ? fixed(*v, col.decimals) : std::string("NA"));
            }
        }
        out << "\n";
    };

    for (const CaseReport& r : reports) emit_row(r);

    // Mean row: average each numeric column over the cases where it is
    // defined; a column undefined everywhere stays NA.
    CaseReport mean;
    mean.case_id = "mean";
    mean.attention = "-";
    bool fcol = true;
    for (const Column& col : kColumns) {
        if (!fcol) out << ",";
        fcol = false;
        std::string name = col.name;
        if (name == "case_id") {
            out << "mean";
            continue;
        }
        if (name == "attention") {
            out << "-";
            continue;
        }
        double sum = 0.0;
        std::size_t n = 0;
        for (const CaseReport& r : reports) {
            std::optional<double> v = numeric_field(r, name);
            if (v) {
                sum += *v;
                ++n;
            }
        }
        out << (n > 0 ? fixed(sum / static_cast<double>(n), col.decimals) : std::string("NA"));
    }
    out << "\n";
    return out.str();
}

void write_report(const std::vector<CaseReport>& reports, const std::string& path,
                  ReportFormat format) {
    std::string text =
        format == ReportFormat::Json ? format_report_json(reports) : format_report_csv(reports);
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open report file for writing: " + path);
    f << text;
    if (!f) throw std::runtime_error("I/O failure writing report: " + path);
}

std::vector<CaseReport> read_report_json(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open report file: " + path);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        throw std::runtime_error("malformed report JSON in " + path + ": " + e.what());
    }
    if (!j.is_array()) throw std::runtime_error("report JSON must be an array: " + path);

    std::vector<CaseReport> out;
    for (const auto& item : j) {
        CaseReport r;
        r.case_id = item.at("case_id").get<std::string>();
        auto opt = [&](const char* key) -> std::optional<double> {
            if (!item.contains(key) || item.at(key).is_null()) return std::nullopt;
            return item.at(key).get<double>();
        };
        r.wdsc = opt("wdsc");
        r.dsc = opt("dsc");
        r.iou = opt("iou");
        r.sen = opt("sen");
        r.ppv = opt("ppv");
        r.hd = opt("hd");
        r.assd = opt("assd");
        r.so = opt("so");
        r.sd = opt("sd");
        if (auto v = opt("theta_mm")) r.theta_mm = *v;
        if (auto v = opt("threshold")) r.threshold = *v;
        if (auto v = opt("w1")) r.w1 = *v;
        if (auto v = opt("w2")) r.w2 = *v;
        if (item.contains("attention") && item.at("attention").is_string())
            r.attention = item.at("attention").get<std::string>();
        out.push_back(std::move(r));
    }
    if (out.empty()) throw std::runtime_error("report JSON contains no cases: " + path);
    return out;
}

}  // namespace ctseg
