#include "rgmpc/mpc.hpp"

#include <cmath>

#include "rgmpc/qp.hpp"

namespace rgmpc {

MpcConfig make_mpc_config(const LinearPlant& plant, Matrix Q, Matrix R, int horizon,
                          double tolerance, int max_iterations) {
    if (horizon < 1) {
        throw std::invalid_argument("make_mpc_config: horizon must be at least 1");
    }
    MpcConfig cfg;
    const RiccatiSolution ric = solve_dare(plant.A, plant.B, Q, R);
    cfg.Q = std::move(Q);
    cfg.R = std::move(R);
    cfg.P = ric.P;
    cfg.K = ric.K;
    cfg.horizon = horizon;
    cfg.tolerance = tolerance;
    cfg.max_iterations = max_iterations;
    return cfg;
}

Vector InputSequence::stacked() const {
    if (inputs.empty()) return Vector();
    const int m = static_cast<int>(inputs.front().size());
    Vector out(m * static_cast<int>(inputs.size()));
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        out.segment(static_cast<int>(i) * m, m) = inputs[i];
    }
    return out;
}

InputSequence InputSequence::from_stacked(const Vector& stacked, int m) {
    InputSequence seq;
    const int count = static_cast<int>(stacked.size()) / m;
    seq.inputs.reserve(count);
    for (int i = 0; i < count; ++i) {
        seq.inputs.push_back(stacked.segment(i * m, m));
    }
    return seq;
}

CondensedQp::CondensedQp(const LinearPlant& plant, const MpcConfig& cfg)
    : n_(plant.n), m_(plant.m), horizon_(cfg.horizon), Q_(cfg.Q), R_(cfg.R), P_(cfg.P) {
    const int N = horizon_;

    // Free response Phi (rows A^1 .. A^N) and input map G with blocks
    // G(i, j) = A^(i-j-1) B for j <= i, both over states xi_1 .. xi_N.
    Phi_ = Matrix::Zero(N * n_, n_);
    G_ = Matrix::Zero(N * n_, N * m_);
    Matrix Apow = Matrix::Identity(n_, n_);  // A^i entering block row i
    for (int i = 0; i < N; ++i) {
        if (i == 0) {
            G_.block(0, 0, n_, m_) = plant.B;
        } else {
            // block(i, j) = A^(i-j) B = block(i-1, j-1): shift the previous
            // block row right by one input block.
            G_.middleRows(i * n_, n_).leftCols((i + 1) * m_).rightCols(i * m_) =
                G_.middleRows((i - 1) * n_, n_).leftCols(i * m_);
            G_.block(i * n_, 0, n_, m_) = Apow * plant.B;
        }
        Apow = plant.A * Apow;
        Phi_.middleRows(i * n_, n_) = Apow;  // A^(i+1), the map to xi_{i+1}
    }

    // Qbar weights xi_1 .. xi_{N-1} with Q and xi_N with the terminal P.
    Matrix Qbar = Matrix::Zero(N * n_, N * n_);
    for (int i = 0; i < N - 1; ++i) {
        Qbar.block(i * n_, i * n_, n_, n_) = cfg.Q;
    }
    Qbar.block((N - 1) * n_, (N - 1) * n_, n_, n_) = cfg.P;

    Qbar_G_ = Qbar * G_;
    H_ = 2.0 * (G_.transpose() * Qbar_G_);
    for (int i = 0; i < N; ++i) {
        H_.block(i * m_, i * m_, m_, m_) += 2.0 * cfg.R;
    }
    H_ = 0.5 * (H_ + H_.transpose());
    lipschitz_ = spectral_radius(H_);

    f_ = Vector::Zero(N * m_);
    x_ = Vector::Zero(n_);
    target_.x_ss = Vector::Zero(n_);
    target_.u_ss = Vector::Zero(m_);
    target_.r = Vector();
}

void CondensedQp::set_target(const Vector& x, const SteadyStatePoint& ss) {
    const int N = horizon_;
    x_ = x;
    target_ = ss;

    // e = Phi x - [x_ss; ...; x_ss]
    Vector e = Phi_ * x;
    for (int i = 0; i < N; ++i) {
        e.segment(i * n_, n_) -= ss.x_ss;
    }
    f_ = 2.0 * (Qbar_G_.transpose() * e);
    const Vector Ru_ss = R_ * ss.u_ss;
    for (int i = 0; i < N; ++i) {
        f_.segment(i * m_, m_) -= 2.0 * Ru_ss;
    }

    // Constant term: weighted free response, the stage-0 state cost and the
    // steady-input offset.
    c_ = 0.0;
    for (int i = 0; i < N - 1; ++i) {
        c_ += e.segment(i * n_, n_).dot(Q_ * e.segment(i * n_, n_));
    }
    c_ += e.segment((N - 1) * n_, n_).dot(P_ * e.segment((N - 1) * n_, n_));
    const Vector x0err = x - ss.x_ss;
    c_ += x0err.dot(Q_ * x0err);
    c_ += static_cast<double>(N) * ss.u_ss.dot(R_ * ss.u_ss);
}

double CondensedQp::objective(const Vector& stacked_u) const {
    return 0.5 * stacked_u.dot(H_ * stacked_u) + f_.dot(stacked_u) + c_;
}

Vector CondensedQp::gradient(const Vector& stacked_u) const {
    return H_ * stacked_u + f_;
}

CondensedQp condense(const LinearPlant& plant, const MpcConfig& cfg, const Vector& x,
                     const Vector& v) {
    CondensedQp qp(plant, cfg);
    qp.set_target(x, steady_state(plant, v));
    return qp;
}

namespace {

Vector project_blocks(const InputSet& input_set, const Vector& stacked, int m) {
    Vector out(stacked.size());
    const int count = static_cast<int>(stacked.size()) / m;
    for (int i = 0; i < count; ++i) {
        out.segment(i * m, m) = input_set.project(stacked.segment(i * m, m));
    }
    return out;
}

// In-place per-step projection. Boxes clamp against prestacked bounds; balls
// rescale block by block.
class StackedProjector {
public:
    StackedProjector(const InputSet& input_set, int m, int N)
        : input_set_(&input_set), m_(m), count_(N) {
        if (input_set.is_box()) {
            lower_.resize(m * N);
            upper_.resize(m * N);
            for (int i = 0; i < N; ++i) {
                lower_.segment(i * m, m) = input_set.lower();
                upper_.segment(i * m, m) = input_set.upper();
            }
        }
    }

    void apply(Vector& stacked) const {
        if (input_set_->is_box()) {
            stacked = stacked.cwiseMax(lower_).cwiseMin(upper_);
            return;
        }
        for (int i = 0; i < count_; ++i) {
            const double norm = stacked.segment(i * m_, m_).norm();
            if (norm > input_set_->radius()) {
                stacked.segment(i * m_, m_) *= input_set_->radius() / norm;
            }
        }
    }

private:
    const InputSet* input_set_;
    int m_;
    int count_;
    Vector lower_;
    Vector upper_;
};

}  // namespace

InputSequence solve_umpc(const CondensedQp& qp, const InputSet& input_set,
                         const MpcConfig& cfg, const Vector* warm_start) {
    const int m = qp.input_dim();
    const int N = qp.horizon();
    const Matrix& H = qp.hessian();
    const Vector& f = qp.linear_term();
    const double step = 1.0 / qp.lipschitz();

    Vector seed(N * m);
    if (warm_start != nullptr && warm_start->size() == N * m) {
        seed = *warm_start;
    } else {
        for (int i = 0; i < N; ++i) seed.segment(i * m, m) = qp.target().u_ss;
    }

    // One Hessian product per iteration: H u is reused for the objective, the
    // fixed-point residual, and (through the momentum combination) the
    // gradient at the extrapolated point. All buffers live outside the loop.
    const StackedProjector projector(input_set, m, N);
    Vector u = seed;
    projector.apply(u);
    Vector Hu(N * m), u_prev(N * m), Hu_prev(N * m), next(N * m), Hnext(N * m),
        mapped(N * m);
    Hu.noalias() = H * u;

    auto objective_of = [&](const Vector& point, const Vector& Hpoint) {
        return 0.5 * point.dot(Hpoint) + f.dot(point) + qp.constant_term();
    };
    auto residual_of = [&](const Vector& point, const Vector& Hpoint) {
        mapped = point - step * (Hpoint + f);
        projector.apply(mapped);
        return (point - mapped).cwiseAbs().maxCoeff();
    };

    SolverDiagnostics diag;
    double residual = residual_of(u, Hu);
    double obj = objective_of(u, Hu);
    if (residual <= cfg.tolerance) {
        InputSequence seq = InputSequence::from_stacked(u, m);
        diag.iterations = 0;
        diag.residual = residual;
        diag.objective = obj;
        seq.diagnostics = std::move(diag);
        return seq;
    }

    u_prev = u;
    Hu_prev = Hu;
    double t = 1.0;
    double best_obj = obj;
    Vector best_u = u;
    double best_residual = residual;

    for (int iter = 1; iter <= cfg.max_iterations; ++iter) {
        const double t_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * t * t));
        const double beta = (t - 1.0) / t_next;

        // y = u + beta (u - u_prev); H y follows from the cached products.
        next = (1.0 + beta) * u - beta * u_prev -
               step * ((1.0 + beta) * Hu - beta * Hu_prev + f);
        projector.apply(next);
        Hnext.noalias() = H * next;
        double next_obj = objective_of(next, Hnext);
        bool restarted = false;
        if (next_obj > obj) {
            // Function-value restart: momentum off, plain projected step.
            diag.restarts += 1;
            diag.restart_objectives.push_back(best_obj);
            restarted = true;
            next = u - step * (Hu + f);
            projector.apply(next);
            Hnext.noalias() = H * next;
            next_obj = objective_of(next, Hnext);
        }
        u_prev.swap(u);
        Hu_prev.swap(Hu);
        u.swap(next);
        Hu.swap(Hnext);
        obj = next_obj;
        t = restarted ? 1.0 : t_next;

        residual = residual_of(u, Hu);
        if (next_obj < best_obj) {
            best_obj = next_obj;
            best_u = u;
            best_residual = residual;
        }
        if (residual <= cfg.tolerance) {
            InputSequence seq = InputSequence::from_stacked(u, m);
            diag.iterations = iter;
            diag.residual = residual;
            diag.objective = obj;
            seq.diagnostics = std::move(diag);
            return seq;
        }
    }
    throw QpNoConvergenceError("solve_umpc: no convergence within the iteration budget",
                               best_residual, cfg.max_iterations, best_u);
}

double umpc_cost(const LinearPlant& plant, const MpcConfig& cfg, const Vector& x,
                 const SteadyStatePoint& ss, const std::vector<Vector>& inputs) {
    if (static_cast<int>(inputs.size()) != cfg.horizon) {
        throw std::invalid_argument("umpc_cost: sequence length must equal the horizon");
    }
    double cost = 0.0;
    Vector xi = x;
    for (const Vector& u : inputs) {
        const Vector xerr = xi - ss.x_ss;
        const Vector uerr = u - ss.u_ss;
        cost += xerr.dot(cfg.Q * xerr) + uerr.dot(cfg.R * uerr);
        xi = plant.step(xi, u);
    }
    const Vector terr = xi - ss.x_ss;
    cost += terr.dot(cfg.P * terr);
    return cost;
}

CmpcSolver::CmpcSolver(const LinearPlant& plant, const MpcConfig& cfg,
                       std::vector<LinearForm> state_constraints,
                       const InputSet& input_set)
    : plant_(plant), cfg_(cfg), qp_(plant, cfg) {
    if (!input_set.is_box()) {
        throw std::invalid_argument("CmpcSolver: the input set must be a box");
    }
    const int n = plant.n;
    const int m = plant.m;
    const int N = cfg.horizon;
    const int n_vars = N * m;

    for (const auto& form : state_constraints) {
        if (form.ax.size() != n) {
            throw std::invalid_argument("CmpcSolver: constraint state part has wrong size");
        }
        if (form.au.size() != 0 && form.au.size() != m) {
            throw std::invalid_argument("CmpcSolver: constraint input part has wrong size");
        }
    }

    const int per_step = static_cast<int>(state_constraints.size());
    const int n_rows = N * per_step + 2 * n_vars;
    rows_ = Matrix::Zero(n_rows, n_vars);
    rhs_const_ = Vector::Zero(n_rows);
    rhs_state_ = Matrix::Zero(n_rows, n);

    // State constraints on xi_1 .. xi_N (and the paired input when given).
    int row = 0;
    for (int i = 0; i < N; ++i) {
        for (const auto& form : state_constraints) {
            rows_.row(row) = form.ax.transpose() * qp_.input_map().middleRows(i * n, n);
            if (form.au.size() == m) {
                rows_.row(row).segment(i * m, m) += form.au.transpose();
            }
            rhs_const_[row] = form.b;
            rhs_state_.row(row) = form.ax.transpose() * qp_.free_response().middleRows(i * n, n);
            ++row;
        }
    }
    // Input box bounds as rows so a single inequality list feeds the solver.
    for (int j = 0; j < n_vars; ++j) {
        rows_(row, j) = 1.0;
        rhs_const_[row] = input_set.upper()[j % m];
        ++row;
        rows_(row, j) = -1.0;
        rhs_const_[row] = -input_set.lower()[j % m];
        ++row;
    }

    hessian_llt_.compute(qp_.hessian());
    if (hessian_llt_.info() != Eigen::Success) {
        throw std::invalid_argument("CmpcSolver: condensed Hessian is not positive definite");
    }
    w_cache_ = Matrix::Zero(n_vars, n_rows);
    w_ready_.assign(n_rows, 0);
}

InputSequence CmpcSolver::solve(const Vector& x, const SteadyStatePoint& ss) {
    qp_.set_target(x, ss);
    const Vector h = rhs_const_ - rhs_state_ * x;

    QpOptions opts;
    const QpResult res = solve_qp_dual_active_set(hessian_llt_, rows_, qp_.linear_term(),
                                                  h, opts, &w_cache_, &w_ready_);

    InputSequence seq = InputSequence::from_stacked(res.x, plant_.m);
    seq.diagnostics.iterations = res.iterations;
    seq.diagnostics.residual = res.kkt_residual;
    seq.diagnostics.objective = qp_.objective(res.x);
    return seq;
}

InputSequence solve_cmpc(const LinearPlant& plant, const MpcConfig& cfg,
                         const Vector& x, const Vector& v,
                         const std::vector<LinearForm>& state_constraints,
                         const InputSet& input_set) {
    CmpcSolver solver(plant, cfg, state_constraints, input_set);
    return solver.solve(x, steady_state(plant, v));
}

}  // namespace rgmpc
