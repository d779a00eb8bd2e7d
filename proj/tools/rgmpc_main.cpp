#include <filesystem>
#include <iostream>

#include <CLI11.hpp>

#include "rgmpc/config.hpp"
#include "rgmpc/csv_io.hpp"

namespace fs = std::filesystem;
using namespace rgmpc;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitViolations = 3;

void ensure_dir(const std::string& dir) { fs::create_directories(dir); }

CampaignResult single_result(const ScenarioConfig& cfg, const SimulationRecord& rec) {
    CampaignResult result;
    CampaignRow row;
    row.ic_id = 0;
    row.variant = cfg.variant;
    row.metrics =
        compute_metrics(rec, cfg.convergence, cfg.scenario.plant, cfg.scenario.target);
    result.rows.push_back(row);
    return result;
}

int run_simulate(const std::string& config_path, const std::string& out_dir) {
    const ScenarioConfig cfg = load_scenario_config(config_path);
    const SimulationRecord rec = simulate(cfg);
    ensure_dir(out_dir);
    write_trajectory_csv(rec, out_dir + "/trajectory.csv");
    const CampaignResult result = single_result(cfg, rec);
    write_campaign_csv(result, out_dir + "/metrics.csv");

    const Metrics& m = result.rows.front().metrics;
    std::cout << "variant=" << to_string(cfg.variant) << " steps=" << m.steps
              << " termination=" << to_string(m.termination)
              << " violations=" << m.violation_count << " u_cost="
              << format_double(m.u_cost);
    if (m.t_conv) std::cout << " t_conv=" << format_double(*m.t_conv);
    std::cout << "\n";

    if (cfg.fail_on_violation && m.violation_count > 0) return kExitViolations;
    return kExitOk;
}

int run_campaign_cmd(const std::string& config_path, const std::string& out_dir,
                     int parallel) {
    const CampaignConfig cfg = load_campaign_config(config_path);
    const CampaignResult result = run_campaign(cfg, parallel);
    ensure_dir(out_dir);
    write_campaign_csv(result, out_dir + "/campaign.csv");
    write_aggregate_csv(result, out_dir + "/aggregate.csv");

    int total_violations = 0;
    for (const auto& agg : result.aggregates) {
        std::cout << to_string(agg.variant) << ": " << agg.success_count << "/"
                  << agg.run_count << " successful, mean u_cost "
                  << format_double(agg.u_cost.mean) << ", mean t_conv "
                  << format_double(agg.t_conv.mean) << ", mean t_comp "
                  << format_double(agg.t_comp_mean.mean) << "\n";
        total_violations += agg.total_violations;
    }
    if (cfg.base.fail_on_violation && total_violations > 0) return kExitViolations;
    return kExitOk;
}

int run_compare(const std::vector<std::string>& config_paths, const std::string& out_dir,
                int parallel) {
    ensure_dir(out_dir);
    std::ofstream out(out_dir + "/compare.csv", std::ios::binary);
    out << "config,variant,runs,successes,mean_u_cost,median_u_cost,mean_t_conv,"
           "mean_t_comp,ocp_infeasible,init_infeasible,total_violations\r\n";
    for (const auto& path : config_paths) {
        const CampaignConfig cfg = load_campaign_config(path);
        const CampaignResult result = run_campaign(cfg, parallel);
        const std::string label = fs::path(path).stem().string();
        write_campaign_csv(result, out_dir + "/" + label + "_campaign.csv");
        for (const auto& agg : result.aggregates) {
            out << label << ',' << to_string(agg.variant) << ',' << agg.run_count << ','
                << agg.success_count << ',' << format_double(agg.u_cost.mean) << ','
                << format_double(agg.u_cost.median) << ','
                << format_double(agg.t_conv.mean) << ','
                << format_double(agg.t_comp_mean.mean) << ','
                << agg.ocp_infeasible_count << ',' << agg.init_infeasible_count << ','
                << agg.total_violations << "\r\n";
            std::cout << label << "/" << to_string(agg.variant) << ": "
                      << agg.success_count << "/" << agg.run_count << " successful\n";
        }
    }
    return kExitOk;
}

int run_plot_data(const std::string& record_path, const std::string& out_dir) {
    const CsvTable table = read_csv(record_path);
    ensure_dir(out_dir);
    write_plot_data(table, out_dir);
    std::cout << "figure data written to " << out_dir << "\n";
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Constrained-control toolkit: reference-governed MPC, its baselines "
                 "and the rendezvous benchmark"};
    app.require_subcommand(1);

    std::string config_path, out_dir = ".", record_path;
    std::vector<std::string> config_paths;
    int parallel = 1;

    auto* sim = app.add_subcommand("simulate", "run one closed-loop simulation");
    sim->add_option("--config", config_path, "scenario JSON")->required();
    sim->add_option("--out", out_dir, "output directory")->required();

    auto* camp = app.add_subcommand("campaign", "run a grid of simulations");
    camp->add_option("--config", config_path, "campaign JSON")->required();
    camp->add_option("--out", out_dir, "output directory")->required();
    camp->add_option("--parallel", parallel, "worker threads");

    auto* cmp = app.add_subcommand("compare", "run several campaigns side by side");
    cmp->add_option("--configs", config_paths, "campaign JSON files")->required();
    cmp->add_option("--out", out_dir, "output directory")->required();
    cmp->add_option("--parallel", parallel, "worker threads");

    auto* plot = app.add_subcommand("plot-data", "emit per-figure CSV files");
    plot->add_option("--record", record_path, "trajectory or campaign CSV")->required();
    plot->add_option("--out", out_dir, "output directory")->required();

    CLI11_PARSE(app, argc, argv);

    try {
        if (sim->parsed()) return run_simulate(config_path, out_dir);
        if (camp->parsed()) return run_campaign_cmd(config_path, out_dir, parallel);
        if (cmp->parsed()) return run_compare(config_paths, out_dir, parallel);
        if (plot->parsed()) return run_plot_data(record_path, out_dir);
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return kExitOk;
}
