#include "rgmpc/cwh.hpp"

#include <cmath>
#include <numbers>

namespace rgmpc {

double CwhParams::mean_motion() const { return std::sqrt(mu / (r0 * r0 * r0)); }

CwhContinuous cwh_continuous(const CwhParams& params) {
    if (params.mu < 0.0 || !(params.r0 > 0.0) || !(params.Ts > 0.0)) {
        throw std::invalid_argument("cwh_continuous: invalid orbit parameters");
    }
    const double n = params.mean_motion();  // zero is allowed (free space)

    CwhContinuous sys;
    sys.Ac = Matrix::Zero(6, 6);
    sys.Ac.topRightCorner(3, 3) = Matrix::Identity(3, 3);
    sys.Ac(3, 0) = 3.0 * n * n;
    sys.Ac(3, 4) = 2.0 * n;
    sys.Ac(4, 3) = -2.0 * n;
    sys.Ac(5, 2) = -n * n;

    sys.Bc = Matrix::Zero(6, 3);
    sys.Bc.bottomRows(3) = Matrix::Identity(3, 3);

    sys.Cc = Matrix::Zero(3, 6);
    sys.Cc.leftCols(3) = Matrix::Identity(3, 3);
    return sys;
}

namespace {

ScalarConstraint speed_bound(int axis, double bound, const std::string& name) {
    ScalarConstraint c;
    c.name = name;
    c.kind = ScalarConstraint::Kind::Linear;
    LinearForm lf;
    lf.ax = Vector::Zero(6);
    lf.ax[axis] = 1.0;
    lf.b = bound;
    c.linear_form = lf;
    c.value = [axis, bound](const Vector& x, const Vector&) { return x[axis] - bound; };
    c.strict_scale = bound;
    return c;
}

ScalarConstraint linear_state_constraint(Vector ax, double b, const std::string& name,
                                         double strict_scale) {
    ScalarConstraint c;
    c.name = name;
    c.kind = ScalarConstraint::Kind::Linear;
    LinearForm lf;
    lf.ax = ax;
    lf.b = b;
    c.linear_form = lf;
    c.value = [ax = std::move(ax), b](const Vector& x, const Vector&) {
        return ax.dot(x) - b;
    };
    c.strict_scale = strict_scale;
    return c;
}

ScalarConstraint cone_constraint(double half_angle_deg) {
    const double t2 = std::pow(std::tan(half_angle_deg * std::numbers::pi / 180.0), 2);
    ScalarConstraint c;
    c.name = "los-cone";
    c.kind = ScalarConstraint::Kind::Nonlinear;
    c.value = [t2](const Vector& x, const Vector&) {
        const double axial = x[1] + 1.0;
        return x[0] * x[0] + x[2] * x[2] - t2 * axial * axial;
    };
    QuadraticStateForm q;
    q.Q2 = Matrix::Zero(6, 6);
    q.Q2(0, 0) = 1.0;
    q.Q2(2, 2) = 1.0;
    q.Q2(1, 1) = -t2;
    q.q1 = Vector::Zero(6);
    q.q1[1] = -2.0 * t2;
    q.q0 = -t2;
    c.state_quadratic = q;
    c.strict_scale = 1.0;
    return c;
}

ScalarConstraint final_speed_constraint(double gate, double speed_limit) {
    ScalarConstraint c;
    c.name = "final-speed";
    c.kind = ScalarConstraint::Kind::Conditional;
    const double limit2 = speed_limit * speed_limit;
    c.guard = [gate](const Vector& x, const Vector&) { return x[1] <= gate; };
    c.value = [limit2](const Vector& x, const Vector&) {
        return x.tail(3).squaredNorm() - limit2;
    };
    QuadraticStateForm q;
    q.Q2 = Matrix::Zero(6, 6);
    q.Q2(3, 3) = 1.0;
    q.Q2(4, 4) = 1.0;
    q.Q2(5, 5) = 1.0;
    q.q1 = Vector::Zero(6);
    q.q0 = -limit2;
    c.state_quadratic = q;
    LinearForm guard;
    guard.ax = Vector::Zero(6);
    guard.ax[1] = 1.0;
    guard.b = gate;
    c.guard_form = guard;
    c.strict_scale = limit2;
    return c;
}

}  // namespace

ConstraintSet spacecraft_constraints() {
    std::vector<ScalarConstraint> cons;
    for (int axis = 3; axis < 6; ++axis) {
        const std::string label = "max-speed-x" + std::to_string(axis + 1);
        cons.push_back(speed_bound(axis, 3.0, label + "-upper"));
        Vector ax = Vector::Zero(6);
        ax[axis] = -1.0;
        cons.push_back(linear_state_constraint(ax, 3.0, label + "-lower", 3.0));
    }
    Vector front = Vector::Zero(6);
    front[1] = -1.0;
    cons.push_back(linear_state_constraint(front, 0.0, "stay-in-front", 1.0));
    cons.push_back(cone_constraint(15.0));
    cons.push_back(final_speed_constraint(2.0, 0.1));
    return ConstraintSet(InputSet::infinity_norm_box(0.1, 3), std::move(cons));
}

ConstraintSet spacecraft_constraints_polytopic(int facet_count, double half_angle_deg) {
    std::vector<ScalarConstraint> cons;
    for (int axis = 3; axis < 6; ++axis) {
        const std::string label = "max-speed-x" + std::to_string(axis + 1);
        cons.push_back(speed_bound(axis, 3.0, label + "-upper"));
        Vector ax = Vector::Zero(6);
        ax[axis] = -1.0;
        cons.push_back(linear_state_constraint(ax, 3.0, label + "-lower", 3.0));
    }
    Vector front = Vector::Zero(6);
    front[1] = -1.0;
    cons.push_back(linear_state_constraint(front, 0.0, "stay-in-front", 1.0));
    Vector standoff = Vector::Zero(6);
    standoff[1] = -1.0;
    cons.push_back(linear_state_constraint(standoff, -3.0, "standoff", 1.0));
    const auto facets = cone_polytope(half_angle_deg, facet_count, 6);
    for (std::size_t j = 0; j < facets.size(); ++j) {
        ScalarConstraint c;
        c.name = "los-facet-" + std::to_string(j);
        c.kind = ScalarConstraint::Kind::Linear;
        c.linear_form = facets[j];
        const Vector ax = facets[j].ax;
        const double b = facets[j].b;
        c.value = [ax, b](const Vector& x, const Vector&) { return ax.dot(x) - b; };
        c.strict_scale = 1.0;
        cons.push_back(std::move(c));
    }
    return ConstraintSet(InputSet::infinity_norm_box(0.1, 3), std::move(cons));
}

Vector cwh_reference_strategy(const Vector& v_prev, const Vector& v0, const Vector& r,
                              const CwhReferenceParams& params) {
    if (v_prev.size() != 3 || v0.size() != 3 || r.size() != 3) {
        throw std::invalid_argument("cwh_reference_strategy: vectors must be 3-dimensional");
    }
    if ((v_prev - r).norm() <= params.landing_radius) {
        return r;  // exact landing
    }
    auto proportional = [&] { return Vector(r - v_prev); };
    Vector dv(3);
    if (v_prev[1] >= params.near_threshold) {
        // Fixed-size step toward the target along each axis.
        for (int i = 0; i < 3; ++i) {
            const double sgn = (r[i] > v0[i]) ? 1.0 : (r[i] < v0[i] ? -1.0 : 0.0);
            dv[i] = sgn * params.fixed_step[i];
        }
        // The fixed step erodes the line-of-sight margin faster sideways than
        // it descends; hand over to the straight line toward the target before
        // the stepped reference leaves the margin cone (that ray keeps the
        // margin growing, the cone apex being behind the target). The
        // along-track pace stays the far-branch pace.
        const Vector probe = v_prev + params.kappa * dv;
        const double reach =
            (1.0 - params.cone_margin) * params.cone_slope * (probe[1] + 1.0);
        if (std::hypot(probe[0], probe[2]) > reach) {
            dv = proportional();
            const double along_gap = std::abs(r[1] - v_prev[1]);
            if (along_gap > params.fixed_step[1]) {
                dv *= params.fixed_step[1] / along_gap;
            }
        }
    } else {
        dv = proportional();
    }
    Vector v_plus = v_prev + params.kappa * dv;
    // Never overstep the target componentwise; a component that has reached
    // the target stays there.
    for (int i = 0; i < 3; ++i) {
        if ((v_prev[i] - r[i]) * (v_plus[i] - r[i]) <= 0.0) {
            v_plus[i] = r[i];
        }
    }
    return v_plus;
}

ReferenceStrategy make_cwh_reference_strategy(const CwhReferenceParams& params) {
    return [params](const GovernorState& state, const RgConfig&, int) {
        ReferenceProposal prop;
        prop.v_plus = cwh_reference_strategy(state.v_prev, state.v0, state.r, params);
        prop.kappa = params.kappa;
        return prop;
    };
}

std::vector<Vector> ic_grid(double x2, int count, double max_half_angle_deg) {
    if (count < 1 || !(x2 > 0.0)) {
        throw std::invalid_argument("ic_grid: need count >= 1 and x2 > 0");
    }
    const double r_max = std::tan(max_half_angle_deg * std::numbers::pi / 180.0) *
                         std::sqrt(x2 * x2 + 1.0);
    std::vector<Vector> points;
    points.reserve(count);
    auto make_point = [&](double x1, double x3) {
        Vector x = Vector::Zero(6);
        x[0] = x1;
        x[1] = x2;
        x[2] = x3;
        return x;
    };
    if (count == 1) {
        points.push_back(make_point(0.0, 0.0));
        return points;
    }

    // Rings with radii linearly spaced out to r_max, one axis point at the
    // center, and ring populations proportional to circumference.
    const int rings = std::max(1, static_cast<int>(std::lround(std::sqrt(count))));
    const int remaining = count - 1;
    const double weight_sum = rings * (rings + 1) / 2.0;
    std::vector<int> per_ring(rings, 0);
    int assigned = 0;
    std::vector<std::pair<double, int>> remainders;
    for (int j = 1; j <= rings; ++j) {
        const double exact = remaining * j / weight_sum;
        per_ring[j - 1] = static_cast<int>(std::floor(exact));
        assigned += per_ring[j - 1];
        remainders.push_back({exact - std::floor(exact), j - 1});
    }
    std::sort(remainders.begin(), remainders.end(),
              [](const auto& a, const auto& b) { return a.first > b.first; });
    for (int extra = 0; extra < remaining - assigned; ++extra) {
        per_ring[remainders[extra % remainders.size()].second] += 1;
    }

    points.push_back(make_point(0.0, 0.0));
    for (int j = 1; j <= rings; ++j) {
        const double radius = r_max * j / rings;
        const int nj = per_ring[j - 1];
        for (int i = 0; i < nj; ++i) {
            const double phi = 2.0 * std::numbers::pi * i / nj;
            points.push_back(make_point(radius * std::cos(phi), radius * std::sin(phi)));
        }
    }
    return points;
}

CwhScenario make_cwh_scenario(const std::string& name) {
    CwhScenario scenario;
    scenario.name = name;
    scenario.params = CwhParams{};

    const CwhContinuous cont = cwh_continuous(scenario.params);
    const StateMatrixPair zoh =
        discretize_zoh(cont.Ac, cont.Bc, scenario.params.Ts);
    scenario.plant = LinearPlant::make(zoh.A, zoh.B, cont.Cc);

    Matrix Q = Vector::Zero(6).asDiagonal();
    Q.diagonal() << 100.0, 1.0, 100.0, 10.0, 1.0, 10.0;
    const Matrix R = Matrix::Identity(3, 3);
    // The benchmark runs the gradient solver at 1e-6; the 0.1 N/kg input
    // scale makes tighter fixed-point residuals pure solve time.
    scenario.mpc_cfg = make_mpc_config(scenario.plant, Q, R, 20, 1e-6);
    scenario.rg_cfg = RgConfig{120, 0.1, 5};
    scenario.custom_reference = true;
    scenario.feasibility_tol = 0.01;  // centimeter slack on meter-scale geometry

    if (name == "cwh-500km-default") {
        scenario.constraints = spacecraft_constraints();
        scenario.target = Vector::Zero(3);
        scenario.reference_box = make_reference_box(
            scenario.plant, scenario.constraints,
            (Vector(3) << -0.4, 2.0, -0.4).finished(),
            (Vector(3) << 0.4, 120.0, 0.4).finished());
    } else if (name == "cwh-cmpc-polytopic") {
        scenario.constraints = spacecraft_constraints_polytopic();
        // The stepped reference must stay inside the inscribed facet cone.
        scenario.ref_params.cone_slope =
            std::tan(15.0 * std::numbers::pi / 180.0) * std::cos(std::numbers::pi / 15.0);
        scenario.target = (Vector(3) << 0.0, 4.0, 0.0).finished();
        scenario.reference_box = make_reference_box(
            scenario.plant, scenario.constraints,
            (Vector(3) << -0.25, 4.0, -0.25).finished(),
            (Vector(3) << 0.25, 120.0, 0.25).finished());
    } else {
        throw std::invalid_argument("make_cwh_scenario: unknown preset '" + name + "'");
    }
    return scenario;
}

}  // namespace rgmpc
