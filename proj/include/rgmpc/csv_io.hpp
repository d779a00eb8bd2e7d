#pragma once

#include <string>
#include <vector>

#include "rgmpc/sim.hpp"

namespace rgmpc {

/// RFC 4180 output, floats printed with 12 significant digits.
void write_trajectory_csv(const SimulationRecord& rec, const std::string& path);
void write_campaign_csv(const CampaignResult& result, const std::string& path);
void write_aggregate_csv(const CampaignResult& result, const std::string& path);

/// Parsed CSV as header plus rows of string fields.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    int column(const std::string& name) const;  // -1 when absent
};
CsvTable read_csv(const std::string& path);

std::string format_double(double value);  // 12 significant digits

/// Per-figure data files derived from a trajectory or campaign CSV:
/// time histories, reference-change timeline, plane projections with the
/// cone boundary, speed norm against the conditional bound, and box-plot
/// statistics for campaigns.
void write_plot_data(const CsvTable& table, const std::string& out_dir);

}  // namespace rgmpc
