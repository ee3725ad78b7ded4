#pragma once

// CSV emission (fixed columns, header row, %.9g floats) and the small CSV
// reader used by `metrics` / `diagnose`.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "hybridsim/cosim.hpp"

namespace hybridsim::io {

inline std::string fmt(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", x);
    return buf;
}

/// Row builder; cells are joined with commas.
class CsvWriter {
public:
    explicit CsvWriter(const std::vector<std::string>& header) {
        for (const auto& h : header) cell(h);
        end_row();
    }

    CsvWriter& cell(const std::string& s) {
        if (!first_) out_ << ',';
        out_ << s;
        first_ = false;
        return *this;
    }
    CsvWriter& cell(const char* s) { return cell(std::string(s)); }
    CsvWriter& cell(double x) { return cell(fmt(x)); }
    CsvWriter& cell(std::int64_t x) { return cell(std::to_string(x)); }
    CsvWriter& cell(int x) { return cell(std::to_string(x)); }
    CsvWriter& cell(std::size_t x) { return cell(std::to_string(x)); }

    void end_row() {
        out_ << '\n';
        first_ = true;
    }

    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
    bool first_ = true;
};

/// Quotes a free-text cell when it contains separators.
inline std::string quoted(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c == '\n' ? ' ' : c;
    }
    return out + "\"";
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write '" + path.string() + "'");
    f << content;
}

inline std::string batch_arrivals_csv(const std::vector<BatchJob>& jobs) {
    CsvWriter w({"timestamp_s", "group"});
    for (const auto& j : jobs) {
        w.cell(j.arrival).cell(j.group);
        w.end_row();
    }
    return w.str();
}

inline std::string job_list_csv(const std::vector<BatchJob>& jobs) {
    CsvWriter w({"job_id", "arrival_s", "gpu", "runtime_s", "time_limit_s", "group"});
    for (const auto& j : jobs) {
        w.cell(j.id).cell(j.arrival).cell(j.gpu).cell(j.runtime).cell(j.time_limit).cell(j.group);
        w.end_row();
    }
    return w.str();
}

inline std::string segment_trace_csv(const ScheduleTrace& trace) {
    CsvWriter w({"segment_id", "job_id", "start_s", "end_s", "gpu", "completed"});
    for (const auto& r : trace.runs) {
        w.cell(r.segment_id).cell(r.job_id).cell(r.start).cell(r.end).cell(r.gpu).cell(r.status == RunStatus::Completed ? 1 : 0);
        w.end_row();
    }
    return w.str();
}

inline std::string busy_gpus_csv(const std::vector<double>& busy, std::size_t first_minute = 0) {
    CsvWriter w({"minute", "busy_gpus"});
    for (std::size_t t = 0; t < busy.size(); ++t) {
        w.cell(first_minute + t).cell(busy[t]);
        w.end_row();
    }
    return w.str();
}

inline std::string serving_csv(const ServingResult& s, const std::vector<LLMTemplate>& templates, std::size_t first_minute) {
    CsvWriter w({"minute", "template", "conc", "conc_cap", "gpus", "power_kw", "unmet"});
    const std::size_t minutes = s.total_gpus.size();
    for (std::size_t t = first_minute; t < minutes; ++t) {
        for (std::size_t m = 0; m < templates.size(); ++m) {
            w.cell(t).cell(templates[m].id).cell(s.conc[m][t]).cell(s.conc_cap[m][t]).cell(s.gpus[m][t]).cell(s.power_kw[m][t]);
            w.cell(s.conc[m][t] - s.conc_cap[m][t]);
            w.end_row();
        }
    }
    return w.str();
}

inline std::string series_csv(const HybridResult& r) {
    CsvWriter w({"minute", "p_total_kw", "p_batch_kw", "p_inf_kw", "g_inf", "g_batch"});
    for (std::size_t t = 0; t < r.p_total_kw.size(); ++t) {
        w.cell(r.first_minute + t).cell(r.p_total_kw[t]).cell(r.p_batch_kw[t]).cell(r.p_inf_kw[t]).cell(r.g_inf[t]).cell(r.g_batch[t]);
        w.end_row();
    }
    return w.str();
}

inline std::string ramp_column(std::size_t h) { return "ramp" + std::to_string(h) + "_med"; }

/// One row per scenario in input order. The trailing `error` column is empty
/// for successful runs.
inline std::string sweep_results_csv(const std::vector<SweepRow>& rows, const MetricsOptions& opt) {
    std::vector<std::string> header{"scenario_id", "share_target", "share_realized", "utilization_target",
                                    "utilization_realized", "policy", "ckpt_s", "cov"};
    for (auto h : opt.ramp_horizons) header.push_back(ramp_column(h));
    header.push_back("unmet_frac");
    header.push_back("error");
    CsvWriter w(header);
    for (const auto& row : rows) {
        const auto& s = row.scenario;
        w.cell(s.id).cell(s.share).cell(row.share_realized).cell(s.utilization).cell(row.utilization_realized);
        w.cell(to_string(s.policy)).cell(s.ckpt_s == kNoCheckpoint ? std::string("inf") : std::to_string(s.ckpt_s));
        if (row.error.empty()) {
            w.cell(row.metrics.cov);
            for (double r : row.metrics.ramp_medians) w.cell(r);
            w.cell(row.metrics.unmet_frac).cell("");
        } else {
            w.cell("");
            for (std::size_t i = 0; i < opt.ramp_horizons.size(); ++i) w.cell("");
            w.cell("").cell(quoted(row.error));
        }
        w.end_row();
    }
    return w.str();
}

/// Component ramps at the longest configured horizon and the sub-additivity
/// check (system ramp <= batch ramp + inference ramp), reported per row.
inline std::string sweep_components_csv(const std::vector<SweepRow>& rows, const MetricsOptions& opt) {
    const auto h = opt.ramp_horizons.empty() ? std::size_t{0} : opt.ramp_horizons.back();
    CsvWriter w({"scenario_id", "horizon_min", "ramp_total_med", "ramp_batch_med", "ramp_inf_med", "subadditive"});
    for (const auto& row : rows) {
        if (!row.error.empty() || row.metrics.ramp_medians.empty()) continue;
        const double tot = row.metrics.ramp_medians.back();
        w.cell(row.scenario.id).cell(h).cell(tot).cell(row.metrics.batch_ramp_med).cell(row.metrics.inf_ramp_med);
        w.cell(tot <= row.metrics.batch_ramp_med + row.metrics.inf_ramp_med ? 1 : 0);
        w.end_row();
    }
    return w.str();
}

/// Column-oriented numeric CSV (header row required).
struct CsvTable {
    std::vector<std::string> header;
    std::map<std::string, std::vector<double>> columns;

    const std::vector<double>& column(const std::string& name) const {
        auto it = columns.find(name);
        if (it == columns.end()) throw ConfigError("CSV has no column '" + name + "'");
        return it->second;
    }
};

inline CsvTable read_numeric_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open '" + path + "'");
    CsvTable t;
    std::string line;
    if (!std::getline(in, line)) throw ConfigError("'" + path + "' is empty");
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    std::size_t row = 1;
    while (std::getline(in, line)) {
        ++row;
        if (line.empty()) continue;
        std::stringstream ls(line);
        std::size_t c = 0;
        for (std::string cell; std::getline(ls, cell, ','); ++c) {
            if (c >= t.header.size()) throw ConfigError("'" + path + "' row " + std::to_string(row) + " has too many cells");
            try {
                std::size_t used = 0;
                const double v = std::stod(cell, &used);
                if (used != cell.size()) throw std::invalid_argument(cell);
                t.columns[t.header[c]].push_back(v);
            } catch (const std::exception&) {
                throw ConfigError("'" + path + "' row " + std::to_string(row) + ": '" + cell + "' is not a number");
            }
        }
        if (c != t.header.size()) throw ConfigError("'" + path + "' row " + std::to_string(row) + " has too few cells");
    }
    return t;
}

}  // namespace hybridsim::io
