#pragma once

#include <optional>
#include <string>
#include <vector>

#include "rgmpc/cwh.hpp"

namespace rgmpc {

enum class ControllerVariant { Rgmpc, Umpc, SlqrRg, Cmpc };

std::string to_string(ControllerVariant v);
ControllerVariant variant_from_string(const std::string& s);

enum class Termination { Converged, HorizonCap, InitializationInfeasible, OcpInfeasible };
std::string to_string(Termination t);

/// Convergence ball around x_ss(r). For the six-state rendezvous layout the
/// position and velocity blocks are tested separately; other plants use the
/// position tolerance on the full state.
struct ConvergenceSpec {
    double position_tolerance = 0.1;
    double velocity_tolerance = 0.01;
    int dwell_steps = 20;  // consecutive in-ball steps before stopping early
};

struct ScenarioConfig {
    CwhScenario scenario;
    ControllerVariant variant = ControllerVariant::Rgmpc;
    Vector x0;
    int max_steps = 600;
    unsigned seed = 0;
    int cmpc_horizon = 60;
    ConvergenceSpec convergence;
    bool fail_on_violation = false;
};

struct ViolationEntry {
    int step = 0;
    std::string name;
    double value = 0.0;
};

struct SimulationRecord {
    std::vector<Vector> x;
    std::vector<Vector> u;
    std::vector<Vector> v;
    std::vector<double> kappa;
    std::vector<double> s;
    std::vector<GovernorBranch> branch;
    std::vector<int> solver_iterations;  // QP iterations per step
    std::vector<double> t_comp;  // controller wall time per step [s]
    Termination termination = Termination::HorizonCap;
    std::vector<ViolationEntry> violations;
    double Ts = 0.5;
    int n = 0, m = 0, p = 0;
    ControllerVariant variant = ControllerVariant::Rgmpc;

    int steps() const { return static_cast<int>(u.size()); }
};

/// Runs the chosen controller in closed loop. Initialization and OCP
/// infeasibility are captured in the record, not thrown.
SimulationRecord simulate(const ScenarioConfig& cfg);

struct Metrics {
    bool success = false;
    std::optional<double> t_conv;  // [s]
    double u_cost = 0.0;           // rectangle rule over applied inputs
    double t_comp_mean = 0.0;
    double t_comp_median = 0.0;
    double t_comp_max = 0.0;
    int violation_count = 0;
    Termination termination = Termination::HorizonCap;
    int steps = 0;
};

Metrics compute_metrics(const SimulationRecord& rec, const ConvergenceSpec& conv,
                        const LinearPlant& plant, const Vector& r);

struct CampaignRow {
    int ic_id = 0;
    ControllerVariant variant = ControllerVariant::Rgmpc;
    Metrics metrics;
};

struct StatSummary {
    double mean = 0.0, median = 0.0, q1 = 0.0, q3 = 0.0, min = 0.0, max = 0.0;
    int count = 0;
};
StatSummary summarize(std::vector<double> values);

struct VariantAggregate {
    ControllerVariant variant;
    int success_count = 0;
    int run_count = 0;
    StatSummary u_cost;
    StatSummary t_conv;       // over runs that converged
    StatSummary t_comp_mean;  // per-run mean compute times
    int total_violations = 0;
    int ocp_infeasible_count = 0;
    int init_infeasible_count = 0;
};

struct CampaignResult {
    std::vector<CampaignRow> rows;  // ordered by (ic_id, variant)
    std::vector<VariantAggregate> aggregates;
};

struct CampaignConfig {
    ScenarioConfig base;
    std::vector<Vector> initial_states;
    std::vector<ControllerVariant> variants;
};

/// Runs every (initial state, variant) pair; individual failures become rows,
/// never abort the campaign. Row content is independent of the worker count
/// (timing fields excepted).
CampaignResult run_campaign(const CampaignConfig& cfg, int parallel = 1);

}  // namespace rgmpc
