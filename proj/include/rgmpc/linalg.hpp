#pragma once

#include <Eigen/Dense>

#include "rgmpc/errors.hpp"

namespace rgmpc {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Discrete-time state transition pair: x_{k+1} = A x_k + B u_k.
struct StateMatrixPair {
    Matrix A;
    Matrix B;
};

/// Riccati solution: cost-to-go weight P and feedback gain K.
/// The feedback is applied as u = -K (x - x_ss) + u_ss, so the closed loop
/// is A - B K and K = (B'PB + R)^-1 B'PA.
struct RiccatiSolution {
    Matrix P;
    Matrix K;
};

struct DareOptions {
    int max_sweeps = 10000;
    double tolerance = 1e-12;  // relative fixed-point tolerance on ||P_{j+1} - P_j||_F
};

/// Dense matrix exponential by scaling-and-squaring with a Taylor expansion
/// of the scaled matrix.
Matrix matrix_exponential(const Matrix& M);

/// Exact zero-order-hold discretization of dx/dt = Ac x + Bc u at period Ts,
/// computed through the exponential of the augmented matrix [[Ac, Bc], [0, 0]] Ts.
StateMatrixPair discretize_zoh(const Matrix& Ac, const Matrix& Bc, double Ts);

/// Solves P = Q + A'PA - (A'PB)(R + B'PB)^-1 (B'PA) by fixed-point sweeps
/// seeded at P0 = Q, and returns P together with the gain K.
///
/// Q and R must be symmetric positive definite. Stabilizability of (A, B) is
/// verified a posteriori: the returned closed loop A - BK has spectral radius
/// strictly below one or an InstabilityError is thrown.
RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q,
                           const Matrix& R, const DareOptions& opts = {});

/// Solves Acl' P Acl - P = -I for a Schur-stable Acl. The result is symmetric
/// positive definite with P >= I (the defining series starts at I).
Matrix solve_discrete_lyapunov(const Matrix& Acl);

/// Largest eigenvalue modulus of a square matrix.
double spectral_radius(const Matrix& M);

}  // namespace rgmpc
