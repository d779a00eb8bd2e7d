#pragma once

#include <vector>

#include "rgmpc/plant.hpp"

namespace rgmpc {

/// Weights and solver settings for the input-constrained MPC. P and K default
/// to the DARE solution for (A, B, Q, R).
struct MpcConfig {
    Matrix Q;
    Matrix R;
    Matrix P;  // terminal weight
    Matrix K;  // LQR gain associated with (Q, R)
    int horizon = 20;
    double tolerance = 1e-8;
    int max_iterations = 5000;
};

/// Builds an MpcConfig whose P and K come from the DARE for (A, B, Q, R).
MpcConfig make_mpc_config(const LinearPlant& plant, Matrix Q, Matrix R, int horizon,
                          double tolerance = 1e-8, int max_iterations = 5000);

struct SolverDiagnostics {
    int iterations = 0;
    double residual = 0.0;
    int restarts = 0;
    double objective = 0.0;
    /// Best objective seen at each restart event, for the monotonicity check.
    std::vector<double> restart_objectives;
};

/// Optimal input sequence over the MPC horizon.
struct InputSequence {
    std::vector<Vector> inputs;
    SolverDiagnostics diagnostics;

    Vector stacked() const;
    static InputSequence from_stacked(const Vector& stacked, int m);
};

/// Thrown when the projected-gradient solver exhausts its iteration budget;
/// carries the best iterate so the caller may accept it per policy.
class QpNoConvergenceError : public NoConvergenceError {
public:
    QpNoConvergenceError(const std::string& what, double residual, int iterations,
                         Vector best)
        : NoConvergenceError(what, residual, iterations), best_iterate(std::move(best)) {}
    Vector best_iterate;
};

/// Condensed form of the input-constrained OCP: after eliminating states via
/// the prediction equations, the cost is J(U) = 1/2 U'HU + f'U + c over the
/// stacked input vector U.
class CondensedQp {
public:
    CondensedQp(const LinearPlant& plant, const MpcConfig& cfg);

    /// Rebuilds the linear and constant terms for a new initial state and
    /// steady-state target. The Hessian and prediction matrices are reused.
    void set_target(const Vector& x, const SteadyStatePoint& ss);

    const Matrix& hessian() const { return H_; }
    const Vector& linear_term() const { return f_; }
    double constant_term() const { return c_; }

    /// Stacked states [xi_1; ...; xi_N] = free_response() * x + input_map() * U.
    const Matrix& input_map() const { return G_; }
    const Matrix& free_response() const { return Phi_; }

    double objective(const Vector& stacked_u) const;
    Vector gradient(const Vector& stacked_u) const;
    /// Lipschitz constant of the gradient (largest Hessian eigenvalue).
    double lipschitz() const { return lipschitz_; }

    int horizon() const { return horizon_; }
    int state_dim() const { return n_; }
    int input_dim() const { return m_; }
    const Vector& x0() const { return x_; }
    const SteadyStatePoint& target() const { return target_; }

private:
    int n_ = 0, m_ = 0, horizon_ = 0;
    Matrix H_;
    Vector f_;
    double c_ = 0.0;
    Matrix Phi_;
    Matrix G_;
    Matrix Qbar_G_;  // Qbar * G, reused when rebuilding f
    Matrix Q_, R_, P_;
    double lipschitz_ = 0.0;
    Vector x_;
    SteadyStatePoint target_;
};

/// Condenses the OCP at (x, v). Throws InfeasibleReferenceError when v admits
/// no steady state.
CondensedQp condense(const LinearPlant& plant, const MpcConfig& cfg, const Vector& x,
                     const Vector& v);

/// Accelerated projected gradient with function-value restart on the condensed
/// QP, each input constrained to the input set. Terminates when the projected
/// fixed-point residual drops below cfg.tolerance.
InputSequence solve_umpc(const CondensedQp& qp, const InputSet& input_set,
                         const MpcConfig& cfg, const Vector* warm_start = nullptr);

/// Exact rollout evaluation of the OCP cost for a given input sequence.
double umpc_cost(const LinearPlant& plant, const MpcConfig& cfg, const Vector& x,
                 const SteadyStatePoint& ss, const std::vector<Vector>& inputs);

/// State-and-input constrained MPC: the condensed QP augmented with stacked
/// linear state constraints, solved by a dual active-set method. Reusable
/// across solves with the same plant, weights and constraints; only the
/// initial state and target change per call.
class CmpcSolver {
public:
    CmpcSolver(const LinearPlant& plant, const MpcConfig& cfg,
               std::vector<LinearForm> state_constraints, const InputSet& input_set);

    /// Throws InfeasibleOcpError when the constraint polytope is empty.
    InputSequence solve(const Vector& x, const SteadyStatePoint& ss);

    const CondensedQp& qp() const { return qp_; }

private:
    LinearPlant plant_;
    MpcConfig cfg_;
    CondensedQp qp_;
    Matrix rows_;        // constraint rows over the stacked inputs
    Vector rhs_const_;   // constant part of the right-hand side
    Matrix rhs_state_;   // state-dependent part: rhs = rhs_const - rhs_state * x
    Eigen::LLT<Matrix> hessian_llt_;
    Matrix w_cache_;                 // H^-1 * rows' columns, filled lazily
    std::vector<char> w_ready_;
};

/// One-shot convenience wrapper around CmpcSolver.
InputSequence solve_cmpc(const LinearPlant& plant, const MpcConfig& cfg,
                         const Vector& x, const Vector& v,
                         const std::vector<LinearForm>& state_constraints,
                         const InputSet& input_set);

}  // namespace rgmpc
