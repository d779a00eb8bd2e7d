#include "rgmpc/config.hpp"

#include <cstdlib>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace rgmpc {

namespace {

using nlohmann::json;

Vector to_vector(const json& j) {
    if (!j.is_array()) throw ConfigError("expected an array of numbers");
    Vector v(j.size());
    for (std::size_t i = 0; i < j.size(); ++i) v[i] = j[i].get<double>();
    return v;
}

Matrix to_matrix(const json& j) {
    if (!j.is_array() || j.empty() || !j[0].is_array()) {
        throw ConfigError("expected a 2-d array");
    }
    const std::size_t rows = j.size();
    const std::size_t cols = j[0].size();
    Matrix m(rows, cols);
    for (std::size_t r = 0; r < rows; ++r) {
        if (j[r].size() != cols) throw ConfigError("ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = j[r][c].get<double>();
    }
    return m;
}

Matrix diag_from(const json& j) {
    const Vector d = to_vector(j);
    Matrix m = Matrix::Zero(d.size(), d.size());
    m.diagonal() = d;
    return m;
}

CwhScenario inline_scenario(const json& j) {
    CwhScenario sc;
    sc.name = j.value("name", "inline");
    sc.params = CwhParams{};
    sc.params.Ts = j.value("Ts", 1.0);
    sc.custom_reference = false;

    const json& plant = j.at("plant");
    sc.plant = LinearPlant::make(to_matrix(plant.at("A")), to_matrix(plant.at("B")),
                                 to_matrix(plant.at("C")));

    const json& box = j.at("input_box");
    InputSet input = InputSet::box(to_vector(box.at("lower")), to_vector(box.at("upper")));

    std::vector<ScalarConstraint> constraints;
    for (const json& c : j.value("state_constraints", json::array())) {
        ScalarConstraint sc_c;
        sc_c.name = c.value("name", "constraint-" + std::to_string(constraints.size()));
        sc_c.kind = ScalarConstraint::Kind::Linear;
        LinearForm form;
        form.ax = to_vector(c.at("ax"));
        if (c.contains("au")) form.au = to_vector(c.at("au"));
        form.b = c.at("b").get<double>();
        if (form.ax.size() != sc.plant.n) {
            throw ConfigError("state constraint dimension mismatch");
        }
        sc_c.linear_form = form;
        sc_c.value = [form](const Vector& x, const Vector& u) {
            double g = form.ax.dot(x) - form.b;
            if (form.au.size() == u.size() && form.au.size() > 0) g += form.au.dot(u);
            return g;
        };
        sc_c.strict_scale = std::max(1.0, std::abs(form.b));
        constraints.push_back(std::move(sc_c));
    }
    sc.constraints = ConstraintSet(std::move(input), std::move(constraints));

    const json& mpc = j.at("mpc");
    sc.mpc_cfg = make_mpc_config(sc.plant, diag_from(mpc.at("q_diag")),
                                 diag_from(mpc.at("r_diag")), mpc.value("horizon", 20),
                                 mpc.value("tolerance", 1e-8),
                                 mpc.value("max_iterations", 5000));
    const json rg = j.value("rg", json::object());
    sc.rg_cfg.horizon = rg.value("horizon", 120);
    sc.rg_cfg.kappa0 = rg.value("kappa0", 0.1);
    sc.rg_cfg.grace_steps = rg.value("grace_steps", 5);

    sc.target = j.contains("r") ? to_vector(j.at("r")) : Vector::Zero(sc.plant.p);
    sc.feasibility_tol = j.value("feasibility_tol", ConstraintSet::kFeasibilityTol);

    if (j.contains("reference_box")) {
        const json& rb = j.at("reference_box");
        sc.reference_box = make_reference_box(sc.plant, sc.constraints,
                                              to_vector(rb.at("lower")),
                                              to_vector(rb.at("upper")));
    } else {
        sc.reference_box = make_reference_box(sc.plant, sc.constraints, sc.target,
                                              sc.target);
    }
    return sc;
}

json parse_json(const std::string& text) {
    try {
        return json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("invalid JSON: ") + e.what());
    }
}

ScenarioConfig scenario_from_json(const json& j, bool require_x0) {
    if (!j.is_object()) throw ConfigError("config root must be an object");
    const int version = j.value("version", 1);
    if (version != 1) {
        throw ConfigError("unsupported config version " + std::to_string(version));
    }

    ScenarioConfig cfg;
    try {
        if (!j.contains("scenario")) throw ConfigError("missing 'scenario'");
        if (j.at("scenario").is_string()) {
            cfg.scenario = make_cwh_scenario(j.at("scenario").get<std::string>());
        } else {
            cfg.scenario = inline_scenario(j.at("scenario"));
        }

        if (j.contains("mpc")) {
            const json& mpc = j.at("mpc");
            Matrix Q = mpc.contains("q_diag") ? diag_from(mpc.at("q_diag"))
                                              : cfg.scenario.mpc_cfg.Q;
            Matrix R = mpc.contains("r_diag") ? diag_from(mpc.at("r_diag"))
                                              : cfg.scenario.mpc_cfg.R;
            cfg.scenario.mpc_cfg = make_mpc_config(
                cfg.scenario.plant, std::move(Q), std::move(R),
                mpc.value("horizon", cfg.scenario.mpc_cfg.horizon),
                mpc.value("tolerance", cfg.scenario.mpc_cfg.tolerance),
                mpc.value("max_iterations", cfg.scenario.mpc_cfg.max_iterations));
        }
        if (j.contains("rg")) {
            const json& rg = j.at("rg");
            cfg.scenario.rg_cfg.horizon = rg.value("horizon", cfg.scenario.rg_cfg.horizon);
            cfg.scenario.rg_cfg.kappa0 = rg.value("kappa0", cfg.scenario.rg_cfg.kappa0);
            cfg.scenario.rg_cfg.grace_steps =
                rg.value("grace_steps", cfg.scenario.rg_cfg.grace_steps);
            if (rg.contains("strategy")) {
                const std::string strategy = rg.at("strategy").get<std::string>();
                if (strategy == "custom") {
                    cfg.scenario.custom_reference = true;
                } else if (strategy == "incremental") {
                    cfg.scenario.custom_reference = false;
                } else {
                    throw ConfigError("unknown rg strategy '" + strategy + "'");
                }
            }
        }
        if (j.contains("r")) cfg.scenario.target = to_vector(j.at("r"));
        if (j.contains("feasibility_tol")) {
            cfg.scenario.feasibility_tol = j.at("feasibility_tol").get<double>();
        }

        cfg.variant = variant_from_string(j.value("variant", "rgmpc"));
        cfg.max_steps = j.value("max_steps", 600);
        cfg.seed = j.value("seed", 0u);
        cfg.cmpc_horizon = j.value("cmpc_horizon", 60);
        cfg.fail_on_violation = j.value("fail_on_violation", false);

        if (j.contains("convergence")) {
            const json& conv = j.at("convergence");
            cfg.convergence.position_tolerance =
                conv.value("position_tolerance", cfg.convergence.position_tolerance);
            cfg.convergence.velocity_tolerance =
                conv.value("velocity_tolerance", cfg.convergence.velocity_tolerance);
            cfg.convergence.dwell_steps =
                conv.value("dwell_steps", cfg.convergence.dwell_steps);
        }

        if (j.contains("x0")) {
            cfg.x0 = to_vector(j.at("x0"));
            if (cfg.x0.size() != cfg.scenario.plant.n) {
                throw ConfigError("x0 dimension mismatch");
            }
        } else if (require_x0) {
            throw ConfigError("missing 'x0'");
        }
        if (cfg.max_steps < 1) throw ConfigError("max_steps must be positive");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    return cfg;
}

}  // namespace

ScenarioConfig parse_scenario_config(const std::string& json_text) {
    ScenarioConfig cfg = scenario_from_json(parse_json(json_text), true);
    apply_seed_override(cfg);
    return cfg;
}

CampaignConfig parse_campaign_config(const std::string& json_text) {
    const json j = parse_json(json_text);
    CampaignConfig cfg;
    cfg.base = scenario_from_json(j, false);
    apply_seed_override(cfg.base);

    try {
        if (j.contains("grid")) {
            const json& grid = j.at("grid");
            cfg.initial_states = ic_grid(grid.at("x2").get<double>(),
                                         grid.at("count").get<int>(),
                                         grid.value("max_half_angle_deg", 14.5));
        } else if (j.contains("initial_states")) {
            for (const json& row : j.at("initial_states")) {
                Vector x0 = to_vector(row);
                if (x0.size() != cfg.base.scenario.plant.n) {
                    throw ConfigError("initial state dimension mismatch");
                }
                cfg.initial_states.push_back(std::move(x0));
            }
        } else if (cfg.base.x0.size() == cfg.base.scenario.plant.n) {
            cfg.initial_states.push_back(cfg.base.x0);
        } else {
            throw ConfigError("campaign needs 'grid', 'initial_states' or 'x0'");
        }

        if (j.contains("variants")) {
            for (const json& v : j.at("variants")) {
                cfg.variants.push_back(variant_from_string(v.get<std::string>()));
            }
        } else {
            cfg.variants.push_back(cfg.base.variant);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config error: ") + e.what());
    }
    return cfg;
}

namespace {
std::string slurp(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file '" + path + "'");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}
}  // namespace

ScenarioConfig load_scenario_config(const std::string& path) {
    return parse_scenario_config(slurp(path));
}

CampaignConfig load_campaign_config(const std::string& path) {
    return parse_campaign_config(slurp(path));
}

void apply_seed_override(ScenarioConfig& cfg) {
    if (const char* env = std::getenv("RGMPC_SEED")) {
        cfg.seed = static_cast<unsigned>(std::strtoul(env, nullptr, 10));
    }
}

}  // namespace rgmpc
