#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "rgmpc/config.hpp"
#include "rgmpc/csv_io.hpp"

namespace py = pybind11;
using namespace rgmpc;

namespace {

py::dict record_to_dict(const SimulationRecord& rec) {
    const int steps = rec.steps();
    Matrix x(steps, rec.n), u(steps, rec.m), v(steps, rec.p);
    Vector kappa(steps), s(steps), t_comp(steps);
    Eigen::VectorXi iterations(steps);
    std::vector<std::string> branch(steps);
    for (int k = 0; k < steps; ++k) {
        x.row(k) = rec.x[k].transpose();
        u.row(k) = rec.u[k].transpose();
        v.row(k) = rec.v[k].transpose();
        kappa[k] = rec.kappa[k];
        s[k] = rec.s[k];
        t_comp[k] = rec.t_comp[k];
        iterations[k] = rec.solver_iterations[k];
        switch (rec.branch[k]) {
            case GovernorBranch::Advance: branch[k] = "advance"; break;
            case GovernorBranch::Replay: branch[k] = "replay"; break;
            case GovernorBranch::LqrFallback: branch[k] = "lqr-fallback"; break;
            case GovernorBranch::Direct: branch[k] = "direct"; break;
        }
    }
    py::dict violations_list;
    py::list violations;
    for (const auto& viol : rec.violations) {
        py::dict entry;
        entry["step"] = viol.step;
        entry["name"] = viol.name;
        entry["value"] = viol.value;
        violations.append(entry);
    }
    py::dict out;
    out["x"] = x;
    out["u"] = u;
    out["v"] = v;
    out["kappa"] = kappa;
    out["s"] = s;
    out["t_comp"] = t_comp;
    out["solver_iterations"] = iterations;
    out["branch"] = branch;
    out["violations"] = violations;
    out["termination"] = to_string(rec.termination);
    out["Ts"] = rec.Ts;
    return out;
}

py::dict metrics_to_dict(const Metrics& m) {
    py::dict out;
    out["success"] = m.success;
    if (m.t_conv) {
        out["t_conv"] = *m.t_conv;
    } else {
        out["t_conv"] = py::none();
    }
    out["u_cost"] = m.u_cost;
    out["t_comp_mean"] = m.t_comp_mean;
    out["t_comp_median"] = m.t_comp_median;
    out["t_comp_max"] = m.t_comp_max;
    out["violation_count"] = m.violation_count;
    out["termination"] = to_string(m.termination);
    out["steps"] = m.steps;
    return out;
}

}  // namespace

PYBIND11_MODULE(_rgmpc, m) {
    m.doc() = "Reference-governed MPC toolkit bindings";

    py::register_exception<NoConvergenceError>(m, "NoConvergenceError");
    py::register_exception<InfeasibleReferenceError>(m, "InfeasibleReferenceError");
    py::register_exception<InfeasibleOcpError>(m, "InfeasibleOcpError");
    py::register_exception<InstabilityError>(m, "InstabilityError");
    py::register_exception<DegenerateSetError>(m, "DegenerateSetError");
    py::register_exception<InitializationError>(m, "InitializationError");
    py::register_exception<ConfigError>(m, "ConfigError");

    m.def(
        "discretize_zoh",
        [](const Matrix& Ac, const Matrix& Bc, double Ts) {
            const auto pair = discretize_zoh(Ac, Bc, Ts);
            return py::make_tuple(pair.A, pair.B);
        },
        py::arg("Ac"), py::arg("Bc"), py::arg("Ts"),
        "Exact zero-order-hold discretization; returns (A, B).");

    m.def(
        "solve_dare",
        [](const Matrix& A, const Matrix& B, const Matrix& Q, const Matrix& R) {
            const auto sol = solve_dare(A, B, Q, R);
            return py::make_tuple(sol.P, sol.K);
        },
        py::arg("A"), py::arg("B"), py::arg("Q"), py::arg("R"),
        "Discrete algebraic Riccati solution; returns (P, K).");

    m.def("solve_discrete_lyapunov", &solve_discrete_lyapunov, py::arg("Acl"),
          "Solves Acl' P Acl - P = -I for a Schur-stable Acl.");

    m.def("spectral_radius", &spectral_radius, py::arg("M"));

    m.def(
        "steady_state",
        [](const Matrix& A, const Matrix& B, const Matrix& C, const Vector& r) {
            const LinearPlant plant = LinearPlant::make(A, B, C);
            const auto ss = steady_state(plant, r);
            return py::make_tuple(ss.x_ss, ss.u_ss);
        },
        py::arg("A"), py::arg("B"), py::arg("C"), py::arg("r"),
        "Minimum-norm steady state (x_ss, u_ss) for the reference r.");

    m.def(
        "cwh_continuous",
        [](double mu, double r0, double Ts) {
            CwhParams params;
            params.mu = mu;
            params.r0 = r0;
            params.Ts = Ts;
            const auto sys = cwh_continuous(params);
            return py::make_tuple(sys.Ac, sys.Bc, sys.Cc);
        },
        py::arg("mu") = CwhParams{}.mu, py::arg("r0") = CwhParams{}.r0,
        py::arg("Ts") = CwhParams{}.Ts,
        "Continuous-time relative-motion matrices (Ac, Bc, Cc).");

    m.def(
        "solve_umpc",
        [](const std::string& scenario, const Vector& x, const Vector& v) {
            const CwhScenario sc = make_cwh_scenario(scenario);
            CondensedQp qp = condense(sc.plant, sc.mpc_cfg, x, v);
            const InputSequence seq =
                solve_umpc(qp, sc.constraints.input_set(), sc.mpc_cfg);
            Matrix out(seq.inputs.size(), sc.plant.m);
            for (std::size_t i = 0; i < seq.inputs.size(); ++i) {
                out.row(i) = seq.inputs[i].transpose();
            }
            return out;
        },
        py::arg("scenario"), py::arg("x"), py::arg("v"),
        "Input-constrained MPC solution for a named scenario, one row per step.");

    m.def(
        "ic_grid",
        [](double x2, int count, double max_half_angle_deg) {
            const auto points = ic_grid(x2, count, max_half_angle_deg);
            Matrix out(points.size(), 6);
            for (std::size_t i = 0; i < points.size(); ++i) {
                out.row(i) = points[i].transpose();
            }
            return out;
        },
        py::arg("x2"), py::arg("count"), py::arg("max_half_angle_deg") = 14.5);

    m.def(
        "simulate",
        [](const std::string& config_json) {
            const ScenarioConfig cfg = parse_scenario_config(config_json);
            const SimulationRecord rec = simulate(cfg);
            py::dict out = record_to_dict(rec);
            out["metrics"] = metrics_to_dict(compute_metrics(
                rec, cfg.convergence, cfg.scenario.plant, cfg.scenario.target));
            return out;
        },
        py::arg("config_json"),
        "Runs one closed-loop simulation from a scenario JSON string.");

    m.def(
        "run_campaign",
        [](const std::string& config_json, int parallel) {
            const CampaignConfig cfg = parse_campaign_config(config_json);
            const CampaignResult result = run_campaign(cfg, parallel);
            py::list rows;
            for (const auto& row : result.rows) {
                py::dict entry = metrics_to_dict(row.metrics);
                entry["ic_id"] = row.ic_id;
                entry["variant"] = to_string(row.variant);
                rows.append(entry);
            }
            py::list aggregates;
            for (const auto& agg : result.aggregates) {
                py::dict entry;
                entry["variant"] = to_string(agg.variant);
                entry["runs"] = agg.run_count;
                entry["successes"] = agg.success_count;
                entry["mean_u_cost"] = agg.u_cost.mean;
                entry["mean_t_conv"] = agg.t_conv.mean;
                entry["mean_t_comp"] = agg.t_comp_mean.mean;
                entry["total_violations"] = agg.total_violations;
                entry["ocp_infeasible"] = agg.ocp_infeasible_count;
                aggregates.append(entry);
            }
            py::dict out;
            out["rows"] = rows;
            out["aggregates"] = aggregates;
            return out;
        },
        py::arg("config_json"), py::arg("parallel") = 1,
        "Runs a campaign from a JSON string; returns per-run rows and aggregates.");
}
