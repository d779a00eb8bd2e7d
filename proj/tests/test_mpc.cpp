#include <doctest.h>

#include <random>

#include "oracles.hpp"
#include "rgmpc/cwh.hpp"
#include "rgmpc/mpc.hpp"
#include "rgmpc/qp.hpp"

using namespace rgmpc;

namespace {

LinearPlant toy_plant() {
    Matrix A(2, 2), B(2, 1), C(1, 2);
    A << 0.9, 0.2, 0.0, 0.8;
    B << 0.1, 0.5;
    C << 1.0, 0.0;
    return LinearPlant::make(A, B, C);
}

MpcConfig toy_config(const LinearPlant& plant, int horizon) {
    return make_mpc_config(plant, Matrix::Identity(plant.n, plant.n),
                           Matrix::Identity(plant.m, plant.m), horizon);
}

}  // namespace

TEST_CASE("condense: one-step scalar Hessian by hand") {
    Matrix A(1, 1), B(1, 1), C(1, 1);
    A << 0.5;
    B << 1.0;
    C << 1.0;
    const LinearPlant plant = LinearPlant::make(A, B, C);
    MpcConfig cfg = toy_config(plant, 1);
    Vector x(1), v(1);
    x << 2.0;
    v << 0.0;
    const CondensedQp qp = condense(plant, cfg, x, v);
    // N = 1: H = 2 (R + B'PB).
    const double expected = 2.0 * (cfg.R(0, 0) + cfg.P(0, 0));
    CHECK(qp.hessian()(0, 0) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("condense: gradient vanishes at the steady state") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 4);
    Vector v(1);
    v << 0.7;
    const SteadyStatePoint ss = steady_state(plant, v);
    const CondensedQp qp = condense(plant, cfg, ss.x_ss, v);
    Vector u_stack(4);
    for (int i = 0; i < 4; ++i) u_stack[i] = ss.u_ss[0];
    CHECK(qp.gradient(u_stack).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("condense: objective equals explicit rollout on random inputs") {
    std::mt19937 rng(11);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 3);
    Vector v(1);
    v << 0.3;
    const SteadyStatePoint ss = steady_state(plant, v);
    Vector x(2);
    x << dist(rng), dist(rng);
    const CondensedQp qp = condense(plant, cfg, x, v);

    for (int trial = 0; trial < 100; ++trial) {
        std::vector<Vector> inputs;
        Vector stacked(3);
        for (int i = 0; i < 3; ++i) {
            stacked[i] = dist(rng);
            inputs.push_back(stacked.segment(i, 1));
        }
        const double expected = oracle::rollout_cost(plant.A, plant.B, cfg.Q, cfg.R,
                                                     cfg.P, x, ss.x_ss, ss.u_ss, inputs);
        CHECK(qp.objective(stacked) ==
              doctest::Approx(expected).epsilon(1e-9).scale(1.0 + std::abs(expected)));
    }
}

TEST_CASE("umpc cost: zero at the steady state and matches the condensation") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 5);
    Vector v(1);
    v << 0.4;
    const SteadyStatePoint ss = steady_state(plant, v);
    std::vector<Vector> at_ss(5, ss.u_ss);
    CHECK(umpc_cost(plant, cfg, ss.x_ss, ss, at_ss) == doctest::Approx(0.0).epsilon(1e-12));

    std::mt19937 rng(5);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Vector x(2);
    x << dist(rng), dist(rng);
    CondensedQp qp = condense(plant, cfg, x, v);
    Vector stacked(5);
    std::vector<Vector> inputs;
    for (int i = 0; i < 5; ++i) {
        stacked[i] = dist(rng);
        inputs.push_back(stacked.segment(i, 1));
    }
    const double via_rollout = umpc_cost(plant, cfg, x, ss, inputs);
    CHECK(qp.objective(stacked) ==
          doctest::Approx(via_rollout).epsilon(1e-9).scale(1.0 + std::abs(via_rollout)));
}

TEST_CASE("umpc cost: A = 0 collapses to the stage-0 cost") {
    Matrix A = Matrix::Zero(2, 2);
    Matrix B(2, 1), C(1, 2);
    B << 1.0, 0.0;
    C << 1.0, 0.0;
    const LinearPlant plant = LinearPlant::make(A, B, C);
    MpcConfig cfg = toy_config(plant, 1);
    Vector x(2), v(1);
    x << 1.5, -0.5;
    v << 0.0;
    const SteadyStatePoint ss = steady_state(plant, v);
    std::vector<Vector> zero_input{Vector::Zero(1)};
    CHECK(umpc_cost(plant, cfg, x, ss, zero_input) ==
          doctest::Approx(x.squaredNorm()).epsilon(1e-12));
}

TEST_CASE("solve_umpc: steady state is an immediate fixed point") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 6);
    Vector v(1);
    v << 0.2;
    const SteadyStatePoint ss = steady_state(plant, v);
    const InputSet box = InputSet::infinity_norm_box(1.0, 1);
    REQUIRE(std::abs(ss.u_ss[0]) < 0.99);  // interior

    CondensedQp qp = condense(plant, cfg, ss.x_ss, v);
    const InputSequence seq = solve_umpc(qp, box, cfg);
    CHECK(seq.diagnostics.iterations == 0);
    CHECK(seq.diagnostics.residual <= cfg.tolerance);
    for (const auto& u : seq.inputs) {
        CHECK(u[0] == doctest::Approx(ss.u_ss[0]).epsilon(1e-9));
    }
}

TEST_CASE("solve_umpc: loose bounds reproduce the unconstrained solution") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 4);
    Vector v(1), x(2);
    v << 0.0;
    x << 1.0, -2.0;
    CondensedQp qp = condense(plant, cfg, x, v);
    const InputSet loose = InputSet::infinity_norm_box(1e6, 1);
    const InputSequence seq = solve_umpc(qp, loose, cfg);
    const Vector expected = -qp.hessian().ldlt().solve(qp.linear_term());
    CHECK((seq.stacked() - expected).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("solve_umpc: matches active-set enumeration on tiny boxes") {
    std::mt19937 rng(23);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 3);
    const InputSet box = InputSet::infinity_norm_box(1.0, 1);
    Vector v(1);
    v << 0.0;
    CondensedQp qp(plant, cfg);
    const Vector lower = Vector::Constant(3, -1.0);
    const Vector upper = Vector::Constant(3, 1.0);

    for (int trial = 0; trial < 120; ++trial) {
        Vector x(2);
        x << 4.0 * dist(rng), 4.0 * dist(rng);
        qp.set_target(x, steady_state(plant, v));
        const InputSequence seq = solve_umpc(qp, box, cfg);
        Vector expected;
        REQUIRE(oracle::enumerate_box_qp(qp.hessian(), qp.linear_term(), lower, upper,
                                         expected));
        CHECK((seq.stacked() - expected).cwiseAbs().maxCoeff() <= 1e-6);
        for (const auto& u : seq.inputs) {
            CHECK(box.contains(u, 1e-10));
        }
    }
}

TEST_CASE("solve_umpc: monotone best objective across restarts") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 8);
    Vector v(1), x(2);
    v << 0.0;
    x << 5.0, -4.0;
    CondensedQp qp = condense(plant, cfg, x, v);
    const InputSequence seq =
        solve_umpc(qp, InputSet::infinity_norm_box(0.4, 1), cfg);
    for (std::size_t i = 1; i < seq.diagnostics.restart_objectives.size(); ++i) {
        CHECK(seq.diagnostics.restart_objectives[i] <=
              seq.diagnostics.restart_objectives[i - 1] + 1e-12);
    }
    CHECK(seq.diagnostics.residual <= cfg.tolerance);
}

TEST_CASE("solve_umpc: iteration budget exhaustion carries the best iterate") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 8);
    cfg.max_iterations = 2;
    cfg.tolerance = 1e-14;
    Vector v(1), x(2);
    v << 0.0;
    x << 5.0, -4.0;
    CondensedQp qp = condense(plant, cfg, x, v);
    try {
        solve_umpc(qp, InputSet::infinity_norm_box(0.4, 1), cfg);
        FAIL("expected QpNoConvergenceError");
    } catch (const QpNoConvergenceError& e) {
        CHECK(e.best_iterate.size() == 8);
        CHECK(e.iterations == 2);
        CHECK(e.residual > 0.0);
    }
}

TEST_CASE("solve_cmpc: no state constraints reduces to solve_umpc") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 4);
    const InputSet box = InputSet::infinity_norm_box(0.5, 1);
    Vector v(1), x(2);
    v << 0.0;
    x << 3.0, -1.0;
    const InputSequence via_cmpc = solve_cmpc(plant, cfg, x, v, {}, box);
    CondensedQp qp = condense(plant, cfg, x, v);
    const InputSequence via_umpc = solve_umpc(qp, box, cfg);
    CHECK((via_cmpc.stacked() - via_umpc.stacked()).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("solve_cmpc: matches the enumeration oracle with a state constraint") {
    std::mt19937 rng(31);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 3);
    const InputSet box = InputSet::infinity_norm_box(1.0, 1);
    Vector v(1);
    v << 0.75;  // steady state near the bound so overshoots hit it

    LinearForm form;  // x1 <= bound at every step
    form.ax = (Vector(2) << 1.0, 0.0).finished();
    form.au = Vector();
    form.b = 0.8;

    CmpcSolver solver(plant, cfg, {form}, box);
    const CondensedQp& qp = solver.qp();
    const Vector lower = Vector::Constant(3, -1.0);
    const Vector upper = Vector::Constant(3, 1.0);

    int active_cases = 0;
    for (int trial = 0; trial < 60; ++trial) {
        Vector x(2);
        x << 0.3 + 0.3 * dist(rng), 1.5 * dist(rng);
        InputSequence seq;
        try {
            seq = solver.solve(x, steady_state(plant, v));
        } catch (const InfeasibleOcpError&) {
            continue;
        }
        // Rebuild the stacked inequalities independently for the oracle.
        Matrix G(3, 3);
        Vector h(3);
        Matrix Apow = plant.A;
        for (int i = 0; i < 3; ++i) {
            for (int j = 0; j < 3; ++j) {
                Vector block = Vector::Zero(2);
                if (j <= i) {
                    Matrix Aij = Matrix::Identity(2, 2);
                    for (int k = 0; k < i - j; ++k) Aij = plant.A * Aij;
                    block = Aij * plant.B.col(0);
                }
                G(i, j) = form.ax.dot(block);
            }
            h[i] = form.b - form.ax.dot(Apow * x);
            Apow = plant.A * Apow;
        }
        Vector expected;
        REQUIRE(oracle::enumerate_qp(qp.hessian(), qp.linear_term(), lower, upper, G, h,
                                     expected));
        CHECK((seq.stacked() - expected).cwiseAbs().maxCoeff() <= 1e-6);
        if ((G * expected - h).cwiseAbs().minCoeff() < 1e-5) ++active_cases;
        CHECK(seq.diagnostics.residual <= 1e-6);
    }
    CHECK(active_cases > 0);  // the constraint actually bites somewhere
}

TEST_CASE("solve_cmpc: contradictory constraints raise infeasible-ocp") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 1);
    const InputSet box = InputSet::infinity_norm_box(0.1, 1);
    Vector v(1), x(2);
    v << 0.0;
    x << 0.0, 0.0;
    LinearForm le;  // x1 <= -1
    le.ax = (Vector(2) << 1.0, 0.0).finished();
    le.b = -1.0;
    LinearForm ge;  // x1 >= 1
    ge.ax = (Vector(2) << -1.0, 0.0).finished();
    ge.b = -1.0;
    CHECK_THROWS_AS(solve_cmpc(plant, cfg, x, v, {le, ge}, box), InfeasibleOcpError);
}

TEST_CASE("dual active set: random box instances against the oracle") {
    std::mt19937 rng(77);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    for (int trial = 0; trial < 120; ++trial) {
        const int d = 2 + trial % 5;  // up to 6 variables
        Matrix M(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) M(i, j) = dist(rng);
        Matrix H = M * M.transpose() + 0.3 * Matrix::Identity(d, d);
        Vector f(d), lower(d), upper(d);
        for (int i = 0; i < d; ++i) {
            f[i] = 3.0 * dist(rng);
            lower[i] = -0.4 - 0.3 * std::abs(dist(rng));
            upper[i] = 0.4 + 0.3 * std::abs(dist(rng));
        }
        Matrix G(2 * d, d);
        Vector h(2 * d);
        G.setZero();
        for (int i = 0; i < d; ++i) {
            G(2 * i, i) = 1.0;
            h[2 * i] = upper[i];
            G(2 * i + 1, i) = -1.0;
            h[2 * i + 1] = -lower[i];
        }
        Eigen::LLT<Matrix> llt(H);
        const QpResult res = solve_qp_dual_active_set(llt, G, f, h);
        Vector expected;
        REQUIRE(oracle::enumerate_box_qp(H, f, lower, upper, expected));
        CHECK((res.x - expected).cwiseAbs().maxCoeff() <= 1e-6);
        CHECK(res.kkt_residual <= 1e-6);
    }
}

TEST_CASE("dual active set: warm cache is equivalent across calls") {
    const LinearPlant plant = toy_plant();
    MpcConfig cfg = toy_config(plant, 4);
    const InputSet box = InputSet::infinity_norm_box(0.3, 1);
    LinearForm form;
    form.ax = (Vector(2) << 0.0, 1.0).finished();
    form.b = 1.5;
    CmpcSolver solver(plant, cfg, {form}, box);
    Vector v(1);
    v << 0.0;
    const SteadyStatePoint ss = steady_state(plant, v);
    Vector x(2);
    x << 2.0, 1.0;
    const Vector first = solver.solve(x, ss).stacked();
    const Vector again = solver.solve(x, ss).stacked();
    CHECK((first - again).cwiseAbs().maxCoeff() == 0.0);
}
