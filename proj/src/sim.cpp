#include "rgmpc/sim.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <iostream>
#include <memory>
#include <numeric>
#include <thread>

namespace rgmpc {

std::string to_string(ControllerVariant v) {
    switch (v) {
        case ControllerVariant::Rgmpc: return "rgmpc";
        case ControllerVariant::Umpc: return "umpc";
        case ControllerVariant::SlqrRg: return "slqr-rg";
        case ControllerVariant::Cmpc: return "cmpc";
    }
    return "unknown";
}

ControllerVariant variant_from_string(const std::string& s) {
    if (s == "rgmpc") return ControllerVariant::Rgmpc;
    if (s == "umpc") return ControllerVariant::Umpc;
    if (s == "slqr-rg") return ControllerVariant::SlqrRg;
    if (s == "cmpc") return ControllerVariant::Cmpc;
    throw ConfigError("unknown controller variant '" + s + "'");
}

std::string to_string(Termination t) {
    switch (t) {
        case Termination::Converged: return "converged";
        case Termination::HorizonCap: return "horizon-cap";
        case Termination::InitializationInfeasible: return "initialization-infeasible";
        case Termination::OcpInfeasible: return "ocp-infeasible";
    }
    return "unknown";
}

namespace {

bool in_convergence_ball(const Vector& x, const SteadyStatePoint& ss,
                         const ConvergenceSpec& conv, int n, int p) {
    const Vector err = x - ss.x_ss;
    if (n == 6 && p == 3) {
        return err.head(3).norm() <= conv.position_tolerance &&
               err.tail(3).norm() <= conv.velocity_tolerance;
    }
    return err.norm() <= conv.position_tolerance;
}

std::vector<LinearForm> linear_forms_of(const ConstraintSet& cs) {
    std::vector<LinearForm> forms;
    for (const auto& c : cs.state_constraints()) {
        if (c.kind == ScalarConstraint::Kind::Linear && c.linear_form) {
            forms.push_back(*c.linear_form);
        } else {
            throw ConfigError("the constrained MPC needs polytopic constraints; '" +
                              c.name + "' is not linear");
        }
    }
    return forms;
}

}  // namespace

SimulationRecord simulate(const ScenarioConfig& cfg) {
    const CwhScenario& sc = cfg.scenario;
    const LinearPlant& plant = sc.plant;
    const ConstraintSet& cs = sc.constraints;

    SimulationRecord rec;
    rec.Ts = sc.params.Ts;
    rec.n = plant.n;
    rec.m = plant.m;
    rec.p = plant.p;
    rec.variant = cfg.variant;
    rec.termination = Termination::HorizonCap;

    if (cfg.x0.size() != plant.n) {
        throw ConfigError("simulate: x0 has wrong dimension");
    }
    const SteadyStatePoint target = steady_state(plant, cs, sc.target);

    const bool governed = cfg.variant == ControllerVariant::Rgmpc ||
                          cfg.variant == ControllerVariant::SlqrRg;

    std::unique_ptr<Governor> governor;
    std::unique_ptr<CondensedQp> direct_qp;
    std::unique_ptr<CmpcSolver> cmpc;
    std::vector<Vector> warm;
    MpcConfig cmpc_cfg;

    if (governed) {
        ReferenceStrategy strategy;
        if (sc.custom_reference) strategy = make_cwh_reference_strategy(sc.ref_params);
        try {
            governor = std::make_unique<Governor>(
                plant, cs, sc.mpc_cfg, sc.rg_cfg, cfg.x0, sc.target, std::nullopt,
                std::move(strategy), cfg.variant == ControllerVariant::Rgmpc,
                sc.feasibility_tol);
        } catch (const InitializationError&) {
            rec.termination = Termination::InitializationInfeasible;
            return rec;
        }
    } else if (cfg.variant == ControllerVariant::Umpc) {
        direct_qp = std::make_unique<CondensedQp>(plant, sc.mpc_cfg);
    } else {
        cmpc_cfg = sc.mpc_cfg;
        cmpc_cfg.horizon = cfg.cmpc_horizon;
        cmpc = std::make_unique<CmpcSolver>(plant, cmpc_cfg, linear_forms_of(cs),
                                            cs.input_set());
    }

    Vector x = cfg.x0;
    int dwell = 0;
    for (int k = 0; k < cfg.max_steps; ++k) {
        Vector u;
        Vector v = sc.target;
        double kappa = 0.0;
        double s = 1.0;
        int iterations = 0;
        GovernorBranch branch = GovernorBranch::Direct;

        const auto t0 = std::chrono::steady_clock::now();
        if (governed) {
            const GovernorStepResult res = governor->step(x, k);
            u = res.u;
            v = res.v;
            kappa = res.kappa;
            s = res.s;
            iterations = res.qp.iterations;
            branch = res.branch;
        } else if (cfg.variant == ControllerVariant::Umpc) {
            direct_qp->set_target(x, target);
            Vector warm_stacked;
            const Vector* warm_ptr = nullptr;
            if (!warm.empty()) {
                warm_stacked.resize(sc.mpc_cfg.horizon * plant.m);
                for (int i = 0; i < sc.mpc_cfg.horizon; ++i) {
                    const Vector& src = (i + 1 < static_cast<int>(warm.size()))
                                            ? warm[i + 1]
                                            : target.u_ss;
                    warm_stacked.segment(i * plant.m, plant.m) = src;
                }
                warm_ptr = &warm_stacked;
            }
            InputSequence seq = solve_umpc(*direct_qp, cs.input_set(), sc.mpc_cfg, warm_ptr);
            u = seq.inputs.front();
            iterations = seq.diagnostics.iterations;
            warm = std::move(seq.inputs);
        } else {
            try {
                InputSequence seq = cmpc->solve(x, target);
                u = seq.inputs.front();
                iterations = seq.diagnostics.iterations;
            } catch (const InfeasibleOcpError&) {
                rec.termination = Termination::OcpInfeasible;
                break;
            }
        }
        const auto t1 = std::chrono::steady_clock::now();
        const double elapsed =
            std::chrono::duration_cast<std::chrono::duration<double>>(t1 - t0).count();

        for (const auto& violation : cs.check(x, u, sc.feasibility_tol)) {
            rec.violations.push_back({k, violation.name, violation.value});
        }
        rec.x.push_back(x);
        rec.u.push_back(u);
        rec.v.push_back(v);
        rec.kappa.push_back(kappa);
        rec.s.push_back(s);
        rec.branch.push_back(branch);
        rec.solver_iterations.push_back(iterations);
        rec.t_comp.push_back(elapsed);

        x = plant.step(x, u);

        const bool reference_done = !governed || s >= 1.0;
        if (reference_done && in_convergence_ball(x, target, cfg.convergence, plant.n, plant.p)) {
            if (++dwell >= cfg.convergence.dwell_steps) {
                rec.termination = Termination::Converged;
                break;
            }
        } else {
            dwell = 0;
        }
    }
    return rec;
}

Metrics compute_metrics(const SimulationRecord& rec, const ConvergenceSpec& conv,
                        const LinearPlant& plant, const Vector& r) {
    Metrics m;
    m.termination = rec.termination;
    m.steps = rec.steps();
    m.violation_count = static_cast<int>(rec.violations.size());
    m.success = rec.violations.empty() &&
                rec.termination != Termination::InitializationInfeasible &&
                rec.termination != Termination::OcpInfeasible;

    double cost = 0.0;
    for (const auto& u : rec.u) cost += u.squaredNorm() * rec.Ts;
    m.u_cost = cost;

    if (!rec.t_comp.empty()) {
        std::vector<double> times = rec.t_comp;
        m.t_comp_mean = std::accumulate(times.begin(), times.end(), 0.0) / times.size();
        std::sort(times.begin(), times.end());
        const std::size_t mid = times.size() / 2;
        m.t_comp_median = times.size() % 2 == 1
                              ? times[mid]
                              : 0.5 * (times[mid - 1] + times[mid]);
        m.t_comp_max = times.back();
    }

    if (!rec.x.empty()) {
        const SteadyStatePoint ss = steady_state(plant, r);
        int first_inside = -1;
        for (int k = rec.steps() - 1; k >= 0; --k) {
            if (in_convergence_ball(rec.x[k], ss, conv, rec.n, rec.p)) {
                first_inside = k;
            } else {
                break;
            }
        }
        if (first_inside >= 0 && rec.termination == Termination::Converged) {
            m.t_conv = first_inside * rec.Ts;
        } else if (first_inside >= 0 && rec.termination == Termination::HorizonCap) {
            m.t_conv = first_inside * rec.Ts;  // entered and stayed until the cap
        }
    }
    return m;
}

StatSummary summarize(std::vector<double> values) {
    StatSummary out;
    out.count = static_cast<int>(values.size());
    if (values.empty()) return out;
    std::sort(values.begin(), values.end());
    out.min = values.front();
    out.max = values.back();
    out.mean = std::accumulate(values.begin(), values.end(), 0.0) / values.size();
    auto quantile = [&](double q) {
        const double pos = q * (values.size() - 1);
        const std::size_t lo = static_cast<std::size_t>(std::floor(pos));
        const std::size_t hi = std::min(lo + 1, values.size() - 1);
        const double frac = pos - lo;
        return values[lo] * (1.0 - frac) + values[hi] * frac;
    };
    out.median = quantile(0.5);
    out.q1 = quantile(0.25);
    out.q3 = quantile(0.75);
    return out;
}

CampaignResult run_campaign(const CampaignConfig& cfg, int parallel) {
    struct Job {
        int ic_id;
        int variant_index;
    };
    std::vector<Job> jobs;
    for (int i = 0; i < static_cast<int>(cfg.initial_states.size()); ++i) {
        for (int v = 0; v < static_cast<int>(cfg.variants.size()); ++v) {
            jobs.push_back({i, v});
        }
    }

    std::vector<CampaignRow> rows(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        while (true) {
            const std::size_t idx = next.fetch_add(1);
            if (idx >= jobs.size()) break;
            const Job& job = jobs[idx];
            ScenarioConfig run_cfg = cfg.base;
            run_cfg.x0 = cfg.initial_states[job.ic_id];
            run_cfg.variant = cfg.variants[job.variant_index];
            CampaignRow row;
            row.ic_id = job.ic_id;
            row.variant = run_cfg.variant;
            try {
                const SimulationRecord rec = simulate(run_cfg);
                row.metrics = compute_metrics(rec, run_cfg.convergence,
                                              run_cfg.scenario.plant, run_cfg.scenario.target);
            } catch (const std::exception& e) {
                std::cerr << "campaign run (ic " << job.ic_id << ", "
                          << to_string(run_cfg.variant) << ") failed: " << e.what()
                          << "\n";
                row.metrics = Metrics{};
                row.metrics.success = false;
            }
            rows[idx] = std::move(row);
        }
    };

    const int workers = std::max(1, parallel);
    if (workers == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(workers);
        for (int i = 0; i < workers; ++i) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }

    CampaignResult result;
    result.rows = std::move(rows);
    std::sort(result.rows.begin(), result.rows.end(),
              [](const CampaignRow& a, const CampaignRow& b) {
                  if (a.ic_id != b.ic_id) return a.ic_id < b.ic_id;
                  return static_cast<int>(a.variant) < static_cast<int>(b.variant);
              });

    for (const ControllerVariant variant : cfg.variants) {
        VariantAggregate agg;
        agg.variant = variant;
        std::vector<double> costs, convs, comps;
        for (const auto& row : result.rows) {
            if (row.variant != variant) continue;
            agg.run_count += 1;
            if (row.metrics.success) agg.success_count += 1;
            agg.total_violations += row.metrics.violation_count;
            if (row.metrics.termination == Termination::OcpInfeasible) {
                agg.ocp_infeasible_count += 1;
            }
            if (row.metrics.termination == Termination::InitializationInfeasible) {
                agg.init_infeasible_count += 1;
            }
            costs.push_back(row.metrics.u_cost);
            if (row.metrics.t_conv.has_value()) convs.push_back(*row.metrics.t_conv);
            if (row.metrics.steps > 0) comps.push_back(row.metrics.t_comp_mean);
        }
        agg.u_cost = summarize(std::move(costs));
        agg.t_conv = summarize(std::move(convs));
        agg.t_comp_mean = summarize(std::move(comps));
        result.aggregates.push_back(agg);
    }
    return result;
}

}  // namespace rgmpc
