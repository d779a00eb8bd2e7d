#pragma once

#include <vector>

#include "rgmpc/linalg.hpp"

namespace rgmpc {

struct QpOptions {
    double feasibility_tol = 1e-9;
    int max_iterations = 0;  // 0 selects a budget from the problem size
};

struct QpResult {
    Vector x;
    Vector multipliers;       // one per constraint row, zero when inactive
    std::vector<int> active;  // indices of active rows at the solution
    int iterations = 0;
    double kkt_residual = 0.0;
};

/// Dual active-set method for min 1/2 x'Hx + f'x subject to G x <= h with H
/// symmetric positive definite. Starts from the unconstrained minimizer and
/// adds violated constraints one at a time, keeping the working set linearly
/// independent. Throws InfeasibleOcpError when the polytope is empty.
///
/// w_cache/w_ready optionally persist the H^-1 G' columns across calls that
/// share H and G (the rows never change in a condensed MPC, only f and h do).
QpResult solve_qp_dual_active_set(const Eigen::LLT<Matrix>& hessian_llt,
                                  const Matrix& G, const Vector& f, const Vector& h,
                                  const QpOptions& opts = {},
                                  Matrix* w_cache = nullptr,
                                  std::vector<char>* w_ready = nullptr);

}  // namespace rgmpc
