#include "rgmpc/csv_io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace rgmpc {

namespace {

const char* kCrlf = "\r\n";

std::string branch_name(GovernorBranch b) {
    switch (b) {
        case GovernorBranch::Advance: return "advance";
        case GovernorBranch::Replay: return "replay";
        case GovernorBranch::LqrFallback: return "lqr-fallback";
        case GovernorBranch::Direct: return "direct";
    }
    return "unknown";
}

std::ofstream open_or_throw(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) {
        throw std::runtime_error("cannot open '" + path + "' for writing");
    }
    return out;
}

}  // namespace

std::string format_double(double value) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", value);
    return buf;
}

void write_trajectory_csv(const SimulationRecord& rec, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "step,t";
    for (int i = 1; i <= rec.n; ++i) out << ",x" << i;
    for (int i = 1; i <= rec.m; ++i) out << ",u" << i;
    for (int i = 1; i <= rec.p; ++i) out << ",v" << i;
    out << ",kappa,s,branch,t_comp" << kCrlf;
    for (int k = 0; k < rec.steps(); ++k) {
        out << k << ',' << format_double(k * rec.Ts);
        for (int i = 0; i < rec.n; ++i) out << ',' << format_double(rec.x[k][i]);
        for (int i = 0; i < rec.m; ++i) out << ',' << format_double(rec.u[k][i]);
        for (int i = 0; i < rec.p; ++i) out << ',' << format_double(rec.v[k][i]);
        out << ',' << format_double(rec.kappa[k]) << ',' << format_double(rec.s[k])
            << ',' << branch_name(rec.branch[k]) << ','
            << format_double(rec.t_comp[k]) << kCrlf;
    }
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

void write_campaign_csv(const CampaignResult& result, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "ic_id,variant,success,t_conv,u_cost,t_comp_mean,t_comp_median,"
           "t_comp_max,violation_count,termination,steps"
        << kCrlf;
    for (const auto& row : result.rows) {
        const Metrics& m = row.metrics;
        out << row.ic_id << ',' << to_string(row.variant) << ','
            << (m.success ? 1 : 0) << ','
            << (m.t_conv.has_value() ? format_double(*m.t_conv) : std::string()) << ','
            << format_double(m.u_cost) << ',' << format_double(m.t_comp_mean) << ','
            << format_double(m.t_comp_median) << ',' << format_double(m.t_comp_max)
            << ',' << m.violation_count << ',' << to_string(m.termination) << ','
            << m.steps << kCrlf;
    }
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

void write_aggregate_csv(const CampaignResult& result, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "variant,runs,successes,ocp_infeasible,init_infeasible,total_violations,"
           "metric,mean,median,q1,q3,min,max,count"
        << kCrlf;
    auto emit = [&](const VariantAggregate& agg, const char* metric,
                    const StatSummary& s) {
        out << to_string(agg.variant) << ',' << agg.run_count << ','
            << agg.success_count << ',' << agg.ocp_infeasible_count << ','
            << agg.init_infeasible_count << ',' << agg.total_violations << ','
            << metric << ',' << format_double(s.mean) << ',' << format_double(s.median)
            << ',' << format_double(s.q1) << ',' << format_double(s.q3) << ','
            << format_double(s.min) << ',' << format_double(s.max) << ',' << s.count
            << kCrlf;
    };
    for (const auto& agg : result.aggregates) {
        emit(agg, "u_cost", agg.u_cost);
        emit(agg, "t_conv", agg.t_conv);
        emit(agg, "t_comp_mean", agg.t_comp_mean);
    }
    if (!out) {
        throw std::runtime_error("write failed for '" + path + "'");
    }
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw std::runtime_error("cannot open '" + path + "' for reading");
    }
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        std::vector<std::string> fields;
        std::stringstream ss(line);
        std::string field;
        while (std::getline(ss, field, ',')) fields.push_back(field);
        if (line.back() == ',') fields.push_back("");
        if (first) {
            table.header = std::move(fields);
            first = false;
        } else {
            table.rows.push_back(std::move(fields));
        }
    }
    return table;
}

int CsvTable::column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return static_cast<int>(i);
    }
    return -1;
}

namespace {

double field_double(const std::vector<std::string>& row, int col) {
    if (col < 0 || col >= static_cast<int>(row.size()) || row[col].empty()) {
        return std::nan("");
    }
    return std::stod(row[col]);
}

void write_time_histories(const CsvTable& t, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    std::vector<int> cols;
    std::vector<std::string> names;
    for (const auto& name : t.header) {
        if (name == "t" || name[0] == 'x' || name[0] == 'u' || name[0] == 'v') {
            cols.push_back(t.column(name));
            names.push_back(name);
        }
    }
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << (i ? "," : "") << names[i];
    }
    out << kCrlf;
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < cols.size(); ++i) {
            out << (i ? "," : "") << row[cols[i]];
        }
        out << kCrlf;
    }
}

void write_reference_changes(const CsvTable& t, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "step,t,changed" << kCrlf;
    const int tc = t.column("t");
    std::vector<int> vc;
    for (const auto& name : t.header) {
        if (name.size() >= 2 && name[0] == 'v' && std::isdigit(name[1])) {
            vc.push_back(t.column(name));
        }
    }
    for (std::size_t k = 0; k < t.rows.size(); ++k) {
        bool changed = false;
        if (k > 0) {
            for (int c : vc) {
                if (t.rows[k][c] != t.rows[k - 1][c]) changed = true;
            }
        } else {
            changed = true;
        }
        out << k << ',' << t.rows[k][tc] << ',' << (changed ? 1 : 0) << kCrlf;
    }
}

void write_projections(const CsvTable& t, const std::string& out_dir) {
    // Trajectory in the x1-x2 and x3-x2 planes plus the 15 degree cone
    // boundary sampled over the along-track range.
    std::ofstream traj = open_or_throw(out_dir + "/fig3_projections.csv");
    traj << "t,x1,x2,x3" << kCrlf;
    const int tc = t.column("t");
    const int c1 = t.column("x1"), c2 = t.column("x2"), c3 = t.column("x3");
    double x2_max = 1.0;
    for (const auto& row : t.rows) {
        traj << row[tc] << ',' << row[c1] << ',' << row[c2] << ',' << row[c3] << kCrlf;
        x2_max = std::max(x2_max, field_double(row, c2));
    }
    std::ofstream cone = open_or_throw(out_dir + "/fig3_cone_boundary.csv");
    cone << "x2,lateral_min,lateral_max" << kCrlf;
    const double slope = std::tan(15.0 * M_PI / 180.0);
    const int samples = 100;
    for (int i = 0; i <= samples; ++i) {
        const double x2 = x2_max * i / samples;
        const double lateral = slope * (x2 + 1.0);
        cone << format_double(x2) << ',' << format_double(-lateral) << ','
             << format_double(lateral) << kCrlf;
    }
}

void write_speed_norm(const CsvTable& t, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "t,speed_norm,bound" << kCrlf;
    const int tc = t.column("t");
    const int c2 = t.column("x2");
    const int c4 = t.column("x4"), c5 = t.column("x5"), c6 = t.column("x6");
    for (const auto& row : t.rows) {
        const double speed = std::sqrt(std::pow(field_double(row, c4), 2) +
                                       std::pow(field_double(row, c5), 2) +
                                       std::pow(field_double(row, c6), 2));
        const bool active = field_double(row, c2) <= 2.0;
        out << row[tc] << ',' << format_double(speed) << ','
            << (active ? format_double(0.1) : std::string()) << kCrlf;
    }
}

void write_campaign_stats(const CsvTable& t, const std::string& path) {
    std::ofstream out = open_or_throw(path);
    out << "variant,metric,median,q1,q3,min,max,mean,count" << kCrlf;
    const int vc = t.column("variant");
    std::vector<std::string> variants;
    for (const auto& row : t.rows) {
        if (std::find(variants.begin(), variants.end(), row[vc]) == variants.end()) {
            variants.push_back(row[vc]);
        }
    }
    for (const char* metric : {"u_cost", "t_comp_mean", "t_conv"}) {
        const int mc = t.column(metric);
        for (const auto& variant : variants) {
            std::vector<double> values;
            for (const auto& row : t.rows) {
                if (row[vc] != variant) continue;
                const double value = field_double(row, mc);
                if (!std::isnan(value)) values.push_back(value);
            }
            const StatSummary s = summarize(std::move(values));
            out << variant << ',' << metric << ',' << format_double(s.median) << ','
                << format_double(s.q1) << ',' << format_double(s.q3) << ','
                << format_double(s.min) << ',' << format_double(s.max) << ','
                << format_double(s.mean) << ',' << s.count << kCrlf;
        }
    }
}

}  // namespace

void write_plot_data(const CsvTable& table, const std::string& out_dir) {
    const bool is_campaign = table.column("variant") >= 0;
    if (is_campaign) {
        write_campaign_stats(table, out_dir + "/fig5_campaign_stats.csv");
        return;
    }
    write_time_histories(table, out_dir + "/fig1_time_histories.csv");
    write_reference_changes(table, out_dir + "/fig2_reference_changes.csv");
    if (table.column("x3") >= 0) {
        write_projections(table, out_dir);
    }
    if (table.column("x6") >= 0) {
        write_speed_norm(table, out_dir + "/fig4_speed_norm.csv");
    }
}

}  // namespace rgmpc
