#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rgmpc/cwh.hpp"
#include "rgmpc/governor.hpp"

using namespace rgmpc;

namespace {

struct ToyWorld {
    LinearPlant plant;
    ConstraintSet cs;
    MpcConfig mpc;
    RgConfig rg;
};

// Two-state stable plant with one box state constraint x1 <= 0.8.
ToyWorld toy_world() {
    Matrix A(2, 2), B(2, 1), C(1, 2);
    A << 0.9, 0.2, 0.0, 0.8;
    B << 0.1, 0.5;
    C << 1.0, 0.0;
    ToyWorld world{LinearPlant::make(A, B, C), ConstraintSet(), MpcConfig{}, RgConfig{}};

    ScalarConstraint cap;
    cap.name = "x1-cap";
    cap.kind = ScalarConstraint::Kind::Linear;
    LinearForm form;
    form.ax = (Vector(2) << 1.0, 0.0).finished();
    form.b = 0.8;
    cap.linear_form = form;
    cap.value = [](const Vector& x, const Vector&) { return x[0] - 0.8; };
    world.cs = ConstraintSet(InputSet::infinity_norm_box(1.0, 1), {cap});

    world.mpc = make_mpc_config(world.plant, Matrix::Identity(2, 2),
                                Matrix::Identity(1, 1), 4);
    world.rg = RgConfig{30, 0.1, 5};
    return world;
}

// Independent saturated-LQR rollout with explicit loops.
std::vector<Vector> oracle_rollout(const LinearPlant& plant,
                                   const std::vector<Vector>& tail, const Vector& x0,
                                   const SteadyStatePoint& ss, const Matrix& K,
                                   int horizon, const InputSet& input_set,
                                   std::vector<Vector>* inputs_out = nullptr) {
    std::vector<Vector> states;
    Vector x = x0;
    for (int j = 0; j < horizon; ++j) {
        states.push_back(x);
        Vector u;
        if (j < static_cast<int>(tail.size())) {
            u = tail[j];
        } else {
            u = input_set.project(-oracle::naive_multiply(K, x - ss.x_ss) + ss.u_ss);
        }
        if (inputs_out) inputs_out->push_back(u);
        x = oracle::naive_multiply(plant.A, x) + oracle::naive_multiply(plant.B, u);
    }
    return states;
}

}  // namespace

TEST_CASE("extend_sequence: steady state propagates as a fixed point") {
    const ToyWorld w = toy_world();
    Vector v(1);
    v << 0.5;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    std::vector<Vector> mpc_inputs(4, ss.u_ss);
    const ExtendedSequence ext = extend_sequence(w.plant, mpc_inputs, ss.x_ss, ss,
                                                 w.mpc.K, 20, w.cs.input_set());
    REQUIRE(ext.states.size() == 20);
    for (int j = 0; j < 20; ++j) {
        CHECK((ext.states[j] - ss.x_ss).cwiseAbs().maxCoeff() <= 1e-10);
        CHECK((ext.inputs[j] - ss.u_ss).cwiseAbs().maxCoeff() <= 1e-10);
    }
}

TEST_CASE("extend_sequence: the MPC prefix is copied verbatim") {
    const ToyWorld w = toy_world();
    Vector v(1), x(2);
    v << 0.3;
    x << -0.2, 0.4;
    std::vector<Vector> mpc_inputs;
    for (int i = 0; i < 4; ++i) {
        mpc_inputs.push_back((Vector(1) << 0.1 * i - 0.2).finished());
    }
    const SteadyStatePoint ss = steady_state(w.plant, v);
    const ExtendedSequence ext =
        extend_sequence(w.plant, mpc_inputs, x, ss, w.mpc.K, 12, w.cs.input_set());
    for (int i = 0; i < 4; ++i) {
        CHECK(ext.inputs[i][0] == mpc_inputs[i][0]);
    }
    CHECK(ext.mpc_segment == 4);
}

TEST_CASE("extend_sequence: agrees with the naive recursion oracle") {
    const ToyWorld w = toy_world();
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    Vector v(1);
    v << 0.2;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    for (int trial = 0; trial < 20; ++trial) {
        Vector x(2);
        x << dist(rng), dist(rng);
        std::vector<Vector> tail;
        for (int i = 0; i < 4; ++i) tail.push_back((Vector(1) << dist(rng)).finished());
        const ExtendedSequence ext =
            extend_sequence(w.plant, tail, x, ss, w.mpc.K, 15, w.cs.input_set());
        std::vector<Vector> oracle_inputs;
        const std::vector<Vector> states = oracle_rollout(
            w.plant, tail, x, ss, w.mpc.K, 15, w.cs.input_set(), &oracle_inputs);
        for (int j = 0; j < 15; ++j) {
            CHECK((ext.states[j] - states[j]).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK((ext.inputs[j] - oracle_inputs[j]).cwiseAbs().maxCoeff() <= 1e-12);
        }
    }
}

TEST_CASE("extend_sequence: horizon must exceed the MPC segment") {
    const ToyWorld w = toy_world();
    Vector v(1);
    v << 0.0;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    std::vector<Vector> tail(4, Vector::Zero(1));
    CHECK_THROWS_AS(
        extend_sequence(w.plant, tail, Vector::Zero(2), ss, w.mpc.K, 4, w.cs.input_set()),
        std::invalid_argument);
}

TEST_CASE("invariant set: halfspace level is the squared margin when P = I") {
    // Deadbeat plant: A = 0 makes the closed loop zero, so P_lyap = I.
    Matrix A = Matrix::Zero(2, 2);
    Matrix B = Matrix::Identity(2, 2);
    Matrix C(1, 2);
    C << 1.0, 0.0;
    const LinearPlant plant = LinearPlant::make(A, B, C);
    const MpcConfig cfg =
        make_mpc_config(plant, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 2);
    CHECK(cfg.K.cwiseAbs().maxCoeff() <= 1e-14);  // A = 0 needs no feedback

    ScalarConstraint cap;
    cap.name = "x1-cap";
    cap.kind = ScalarConstraint::Kind::Linear;
    LinearForm form;
    form.ax = (Vector(2) << 1.0, 0.0).finished();
    form.b = 0.7;
    cap.linear_form = form;
    cap.value = [](const Vector& x, const Vector&) { return x[0] - 0.7; };
    const ConstraintSet cs(InputSet::infinity_norm_box(1e9, 2), {cap});

    const SteadyStatePoint origin = steady_state(plant, Vector::Zero(1));
    const InvariantSet set = lyapunov_invariant_set(plant, cfg.K, cs, origin);
    CHECK((set.shape - Matrix::Identity(2, 2)).cwiseAbs().maxCoeff() <= 1e-12);
    CHECK(set.level == doctest::Approx(0.49).epsilon(1e-9));
}

TEST_CASE("invariant set: boundary center degenerates") {
    Matrix A = Matrix::Zero(2, 2);
    Matrix B = Matrix::Identity(2, 2);
    Matrix C(1, 2);
    C << 1.0, 0.0;
    const LinearPlant plant = LinearPlant::make(A, B, C);
    const MpcConfig cfg =
        make_mpc_config(plant, Matrix::Identity(2, 2), Matrix::Identity(2, 2), 2);

    ScalarConstraint cap;
    cap.name = "x1-cap";
    cap.kind = ScalarConstraint::Kind::Linear;
    LinearForm form;
    form.ax = (Vector(2) << 1.0, 0.0).finished();
    form.b = 0.7;
    cap.linear_form = form;
    cap.value = [](const Vector& x, const Vector&) { return x[0] - 0.7; };
    const ConstraintSet cs(InputSet::infinity_norm_box(1e9, 2), {cap});

    Vector r(1);
    r << 0.7;  // center exactly on the facet
    const SteadyStatePoint ss = steady_state(plant, r);
    CHECK_THROWS_AS(lyapunov_invariant_set(plant, cfg.K, cs, ss), DegenerateSetError);
}

TEST_CASE("invariant set: rendezvous set is invariant and admissible (sampled)") {
    const CwhScenario sc = make_cwh_scenario("cwh-500km-default");
    Vector r(3);
    r << 0.0, 5.0, 0.0;
    const SteadyStatePoint ss = steady_state(sc.plant, r);
    const InvariantSet set =
        lyapunov_invariant_set(sc.plant, sc.mpc_cfg.K, sc.constraints, ss);
    REQUIRE(set.level > 0.0);

    std::mt19937 rng(12);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(set.shape);
    const Matrix inv_sqrt = eig.eigenvectors() *
                            eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                            eig.eigenvectors().transpose();
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (int trial = 0; trial < 10000; ++trial) {
        Vector y(6);
        for (int i = 0; i < 6; ++i) y[i] = gauss(rng);
        y.normalize();
        const double radial = std::sqrt(set.level * unit(rng));
        const Vector x = ss.x_ss + radial * (inv_sqrt * y);
        const Vector u = sc.constraints.project_input(-sc.mpc_cfg.K * (x - ss.x_ss) +
                                                      ss.u_ss);
        CHECK(sc.constraints.admissible(x, u, 1e-7));
        const Vector successor = sc.plant.step(x, u);
        CHECK(set.contains(successor, 1e-9));
    }
}

TEST_CASE("check_admissible: stationary sequence passes") {
    const ToyWorld w = toy_world();
    Vector v(1);
    v << 0.5;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    std::vector<Vector> tail(4, ss.u_ss);
    const ExtendedSequence ext =
        extend_sequence(w.plant, tail, ss.x_ss, ss, w.mpc.K, 20, w.cs.input_set());
    const InvariantSet inv = lyapunov_invariant_set(w.plant, w.mpc.K, w.cs, ss);
    const AdmissibilityReport rep = check_admissible(ext, w.cs, inv);
    CHECK(rep.admissible);
    CHECK(rep.step == -1);
}

TEST_CASE("check_admissible: reports the earliest violating step and name") {
    const ToyWorld w = toy_world();
    Vector v(1);
    v << 0.5;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    std::vector<Vector> tail(4, ss.u_ss);
    ExtendedSequence ext =
        extend_sequence(w.plant, tail, ss.x_ss, ss, w.mpc.K, 20, w.cs.input_set());
    ext.states[3][0] = 0.95;  // poke step 3 over the x1 cap
    ext.states[7][0] = 1.50;  // later violation must not shadow the first
    const InvariantSet inv = lyapunov_invariant_set(w.plant, w.mpc.K, w.cs, ss);
    const AdmissibilityReport rep = check_admissible(ext, w.cs, inv);
    CHECK_FALSE(rep.admissible);
    CHECK(rep.step == 3);
    CHECK(rep.constraint == "x1-cap");
}

TEST_CASE("check_admissible: terminal-set violation is reported") {
    const ToyWorld w = toy_world();
    Vector v(1);
    v << 0.5;
    const SteadyStatePoint ss = steady_state(w.plant, v);
    Vector x(2);
    x << 0.2, -0.1;
    std::vector<Vector> tail(4, ss.u_ss);
    const ExtendedSequence ext =
        extend_sequence(w.plant, tail, x, ss, w.mpc.K, 20, w.cs.input_set());
    InvariantSet inv = lyapunov_invariant_set(w.plant, w.mpc.K, w.cs, ss);
    const double terminal = inv.weighted_distance2(ext.states.back());
    REQUIRE(terminal > 0.0);
    inv.level = terminal * 0.5;  // shrink below the achieved terminal distance
    const AdmissibilityReport rep = check_admissible(ext, w.cs, inv);
    CHECK_FALSE(rep.admissible);
    CHECK(rep.constraint == "terminal-set");
    CHECK(rep.step == 19);
}

TEST_CASE("kappa schedule: grace window, harmonic decay and the landing clamp") {
    RgConfig cfg{120, 0.1, 5};
    CHECK(select_kappa_algorithm2(cfg, 10, 5, 0.0) == doctest::Approx(0.1));   // k-k' = N_a
    CHECK(select_kappa_algorithm2(cfg, 12, 5, 0.0) == doctest::Approx(0.05));  // N_a + 2
    CHECK(select_kappa_algorithm2(cfg, 3, 0, 0.0) == doctest::Approx(0.1));
    // Proposed kappa0 = 0.1 against an accumulated 0.95 clamps to land exactly.
    CHECK(select_kappa_algorithm2(cfg, 3, 0, 0.95) == doctest::Approx(0.05));
    CHECK(select_kappa_algorithm2(cfg, 8, 0, 1.0) == doctest::Approx(0.0));
}

TEST_CASE("governor: trivial initialization holds the target forever") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 0.5;
    const SteadyStatePoint ss = steady_state(w.plant, r);
    Governor gov(w.plant, w.cs, w.mpc, w.rg, ss.x_ss, r, /*v0=*/r);
    CHECK(gov.state().v_dir.norm() == 0.0);
    Vector x = ss.x_ss;
    for (int k = 0; k < 14; ++k) {
        const GovernorStepResult res = gov.step(x, k);
        CHECK(res.branch == GovernorBranch::Advance);
        CHECK((res.v - r).norm() == 0.0);
        CHECK((res.u - ss.u_ss).cwiseAbs().maxCoeff() <= 1e-7);
        x = w.plant.step(x, res.u);
    }
    CHECK(gov.state().s == 1.0);  // kappa arithmetic reaches one without motion
}

TEST_CASE("governor: algorithm-2 run reaches s = 1 exactly and tracks the algebra") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 0.7;
    const Vector x0 = Vector::Zero(2);
    Governor gov(w.plant, w.cs, w.mpc, w.rg, x0, r);
    Vector x = x0;
    double prev_s = 0.0;
    bool reached = false;
    int reach_step = -1;
    for (int k = 0; k < 200; ++k) {
        const GovernorStepResult res = gov.step(x, k);
        CHECK(res.s >= prev_s);  // nondecreasing progress
        prev_s = res.s;
        // Reference algebra: v_k - v0 = s_k v_dir.
        const Vector lhs = res.v - gov.state().v0;
        const Vector rhs = res.s * gov.state().v_dir;
        CHECK((lhs - rhs).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(w.cs.check(x, res.u).empty());  // recursive feasibility
        x = w.plant.step(x, res.u);
        if (!reached && res.s == 1.0) {
            reached = true;
            reach_step = k;
        }
        if (reached) {
            CHECK((res.v - r).norm() == 0.0);
        }
    }
    CHECK(reached);
    CHECK(reach_step >= 9);  // ten increments of 0.1 minus the clamp step
}

TEST_CASE("governor: rejection branches replay the stored tail then fall back") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 2.0;  // steady state far beyond the x1 cap: proposals eventually reject
    Vector x0 = Vector::Zero(2);
    Governor gov(w.plant, w.cs, w.mpc, w.rg, x0, r);

    Vector x = x0;
    int first_reject = -1;
    int k_prime_at_reject = -1;
    std::vector<Vector> tail_at_reject;
    bool saw_fallback = false;
    for (int k = 0; k < 120; ++k) {
        const std::vector<Vector> tail_before = gov.state().stored_tail;
        const int k_prime_before = gov.state().k_prime;
        const GovernorStepResult res = gov.step(x, k);
        if (res.branch == GovernorBranch::Replay) {
            const int since = k - k_prime_before;
            CHECK(since < w.mpc.horizon);  // replay only within the stored tail
            CHECK((res.u - tail_before[since]).cwiseAbs().maxCoeff() == 0.0);
            if (first_reject < 0) {
                first_reject = k;
                k_prime_at_reject = k_prime_before;
                tail_at_reject = tail_before;
            }
        } else if (res.branch == GovernorBranch::LqrFallback) {
            saw_fallback = true;
            const SteadyStatePoint hold = steady_state(w.plant, res.v);
            const Vector expected = w.cs.input_set().project(
                -w.mpc.K * (x - hold.x_ss) + hold.u_ss);
            CHECK((res.u - expected).cwiseAbs().maxCoeff() <= 1e-12);
            CHECK(k - k_prime_before >= w.mpc.horizon);
        }
        CHECK(w.cs.check(x, res.u).empty());
        x = w.plant.step(x, res.u);
    }
    CHECK(first_reject >= 0);
    CHECK(saw_fallback);
    CHECK(gov.state().s < 1.0);  // the unreachable target is never fully granted
}

TEST_CASE("governor: accepted predictions replay admissibly (oracle recursion)") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 0.7;
    const Vector x0 = Vector::Zero(2);
    Governor gov(w.plant, w.cs, w.mpc, w.rg, x0, r);
    Vector x = x0;
    int advances = 0;
    for (int k = 0; k < 60; ++k) {
        const GovernorStepResult res = gov.step(x, k);
        if (res.branch == GovernorBranch::Advance && advances < 8) {
            ++advances;
            const SteadyStatePoint ss = steady_state(w.plant, res.v);
            std::vector<Vector> oracle_inputs;
            const std::vector<Vector> states =
                oracle_rollout(w.plant, gov.state().stored_tail, x, ss, w.mpc.K,
                               w.rg.horizon, w.cs.input_set(), &oracle_inputs);
            for (int j = 0; j < w.rg.horizon; ++j) {
                CHECK(w.cs.check(states[j], oracle_inputs[j]).empty());
            }
        }
        x = w.plant.step(x, res.u);
    }
    CHECK(advances > 0);
}

TEST_CASE("governor: configuration bounds are enforced") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 0.5;
    RgConfig bad_kappa = w.rg;
    bad_kappa.kappa0 = 0.0;
    CHECK_THROWS_AS(Governor(w.plant, w.cs, w.mpc, bad_kappa, Vector::Zero(2), r),
                    std::invalid_argument);
    RgConfig bad_horizon = w.rg;
    bad_horizon.horizon = w.mpc.horizon;  // must strictly exceed the MPC horizon
    CHECK_THROWS_AS(Governor(w.plant, w.cs, w.mpc, bad_horizon, Vector::Zero(2), r),
                    std::invalid_argument);
}

TEST_CASE("governor: initialization failures surface as errors") {
    const CwhScenario sc = make_cwh_scenario("cwh-500km-default");
    Vector x0(6);
    x0 << 30.0, 20.0, 0.0, 0.0, 0.0, 0.0;  // far outside the cone
    CHECK_THROWS_AS(Governor(sc.plant, sc.constraints, sc.mpc_cfg, sc.rg_cfg, x0,
                             sc.target, std::nullopt, make_cwh_reference_strategy(),
                             true, sc.feasibility_tol),
                    InitializationError);
}

TEST_CASE("governor: flagship initialization succeeds") {
    const CwhScenario sc = make_cwh_scenario("cwh-500km-default");
    Vector x0(6);
    x0 << 10.0, 100.0, 20.0, 0.0, 0.0, 0.0;
    Governor gov(sc.plant, sc.constraints, sc.mpc_cfg, sc.rg_cfg, x0, sc.target,
                 std::nullopt, make_cwh_reference_strategy(), true, sc.feasibility_tol);
    CHECK((gov.state().v0 - (Vector(3) << 10.0, 100.0, 20.0).finished()).norm() == 0.0);
    CHECK(gov.state().k_prime == 0);
    CHECK(static_cast<int>(gov.state().stored_tail.size()) == sc.mpc_cfg.horizon);
}

TEST_CASE("governor: slqr variant never replays and falls back on rejection") {
    const ToyWorld w = toy_world();
    Vector r(1);
    r << 2.0;
    const Vector x0 = Vector::Zero(2);
    Governor gov(w.plant, w.cs, w.mpc, w.rg, x0, r, std::nullopt, {},
                 /*use_mpc_segment=*/false);
    Vector x = x0;
    for (int k = 0; k < 60; ++k) {
        const GovernorStepResult res = gov.step(x, k);
        CHECK(res.branch != GovernorBranch::Replay);
        CHECK(w.cs.check(x, res.u).empty());
        x = w.plant.step(x, res.u);
    }
}
