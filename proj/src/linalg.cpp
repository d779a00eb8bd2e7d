#include "rgmpc/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <string>

namespace rgmpc {

namespace {

void require_finite(const Matrix& M, const char* name) {
    if (!M.allFinite()) {
        throw std::invalid_argument(std::string(name) + " contains non-finite entries");
    }
}

// Positive definiteness via LDLT: all pivots strictly positive.
bool is_symmetric_positive_definite(const Matrix& M) {
    if (M.rows() != M.cols()) return false;
    if ((M - M.transpose()).cwiseAbs().maxCoeff() > 1e-10 * (1.0 + M.cwiseAbs().maxCoeff())) {
        return false;
    }
    Eigen::LDLT<Matrix> ldlt(M);
    if (ldlt.info() != Eigen::Success) return false;
    const Vector d = ldlt.vectorD();
    const double dmax = d.maxCoeff();
    return d.minCoeff() > 1e-13 * std::max(1.0, dmax);
}

}  // namespace

Matrix matrix_exponential(const Matrix& M) {
    require_finite(M, "matrix_exponential argument");
    if (M.rows() != M.cols()) {
        throw std::invalid_argument("matrix_exponential requires a square matrix");
    }
    const Eigen::Index n = M.rows();

    // Scale so the Taylor series of exp(M / 2^s) converges within a few terms.
    const double norm = M.cwiseAbs().rowwise().sum().maxCoeff();  // infinity norm
    int squarings = 0;
    if (norm > 0.5) {
        squarings = static_cast<int>(std::ceil(std::log2(norm / 0.5)));
    }
    const Matrix scaled = M / std::ldexp(1.0, squarings);

    Matrix result = Matrix::Identity(n, n);
    Matrix term = Matrix::Identity(n, n);
    for (int k = 1; k <= 40; ++k) {
        term = (term * scaled) / static_cast<double>(k);
        result += term;
        if (k >= 30 && term.cwiseAbs().maxCoeff() < 1e-300) break;
    }
    for (int i = 0; i < squarings; ++i) {
        result = result * result;
    }
    return result;
}

StateMatrixPair discretize_zoh(const Matrix& Ac, const Matrix& Bc, double Ts) {
    require_finite(Ac, "Ac");
    require_finite(Bc, "Bc");
    if (!(Ts > 0.0) || !std::isfinite(Ts)) {
        throw std::invalid_argument("sampling period must be positive and finite");
    }
    if (Ac.rows() != Ac.cols() || Ac.rows() != Bc.rows()) {
        throw std::invalid_argument("discretize_zoh: inconsistent matrix dimensions");
    }
    const Eigen::Index n = Ac.rows();
    const Eigen::Index m = Bc.cols();

    Matrix aug = Matrix::Zero(n + m, n + m);
    aug.topLeftCorner(n, n) = Ac;
    aug.topRightCorner(n, m) = Bc;
    const Matrix e = matrix_exponential(aug * Ts);

    StateMatrixPair out;
    out.A = e.topLeftCorner(n, n);
    out.B = e.topRightCorner(n, m);
    return out;
}

RiccatiSolution solve_dare(const Matrix& A, const Matrix& B, const Matrix& Q,
                           const Matrix& R, const DareOptions& opts) {
    require_finite(A, "A");
    require_finite(B, "B");
    require_finite(Q, "Q");
    require_finite(R, "R");
    const Eigen::Index n = A.rows();
    const Eigen::Index m = B.cols();
    if (A.cols() != n || B.rows() != n || Q.rows() != n || Q.cols() != n ||
        R.rows() != m || R.cols() != m) {
        throw std::invalid_argument("solve_dare: inconsistent matrix dimensions");
    }
    if (!is_symmetric_positive_definite(Q)) {
        throw std::invalid_argument("solve_dare: Q must be symmetric positive definite");
    }
    if (!is_symmetric_positive_definite(R)) {
        throw std::invalid_argument("solve_dare: R must be symmetric positive definite");
    }

    Matrix P = Q;
    double step = 0.0;
    bool converged = false;
    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const Matrix PA = P * A;
        const Matrix BtPA = B.transpose() * PA;
        const Matrix S = R + B.transpose() * P * B;
        const Matrix next =
            Q + A.transpose() * PA - BtPA.transpose() * S.ldlt().solve(BtPA);
        step = (next - P).norm();
        P = 0.5 * (next + next.transpose());
        if (!P.allFinite()) {
            throw InstabilityError(
                "solve_dare: iteration diverged; (A, B) is likely not stabilizable");
        }
        if (step <= opts.tolerance * (1.0 + P.norm())) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw NoConvergenceError("solve_dare: fixed-point sweeps did not converge",
                                 step, opts.max_sweeps);
    }

    RiccatiSolution sol;
    sol.P = P;
    const Matrix S = R + B.transpose() * P * B;
    sol.K = S.ldlt().solve(B.transpose() * P * A);

    const Matrix residual =
        Q + A.transpose() * P * A -
        (A.transpose() * P * B) * S.ldlt().solve(B.transpose() * P * A) - P;
    if (residual.norm() > 1e-8 * (1.0 + P.norm())) {
        throw NoConvergenceError("solve_dare: residual above tolerance after convergence",
                                 residual.norm(), opts.max_sweeps);
    }
    if (spectral_radius(A - B * sol.K) >= 1.0) {
        throw InstabilityError(
            "solve_dare: closed loop A - BK is not Schur stable; (A, B) is likely "
            "not stabilizable");
    }
    return sol;
}

Matrix solve_discrete_lyapunov(const Matrix& Acl) {
    require_finite(Acl, "Acl");
    if (Acl.rows() != Acl.cols()) {
        throw std::invalid_argument("solve_discrete_lyapunov requires a square matrix");
    }
    if (spectral_radius(Acl) >= 1.0) {
        throw InstabilityError("solve_discrete_lyapunov: spectral radius >= 1");
    }
    // Doubling on the series sum_k (Acl')^k Acl^k: after j rounds P holds the
    // first 2^j terms and M = Acl^(2^j), so the equation residual is M'M.
    const Eigen::Index n = Acl.rows();
    Matrix P = Matrix::Identity(n, n);
    Matrix M = Acl;
    for (int round = 0; round < 200; ++round) {
        const double mnorm2 = M.squaredNorm();
        if (mnorm2 <= 1e-12) {
            return 0.5 * (P + P.transpose());
        }
        P = P + M.transpose() * P * M;
        M = M * M;
    }
    throw NoConvergenceError("solve_discrete_lyapunov: series did not converge",
                             M.squaredNorm(), 200);
}

double spectral_radius(const Matrix& M) {
    require_finite(M, "spectral_radius argument");
    if (M.rows() != M.cols()) {
        throw std::invalid_argument("spectral_radius requires a square matrix");
    }
    if (M.rows() == 0) return 0.0;
    Eigen::EigenSolver<Matrix> eig(M, /*computeEigenvectors=*/false);
    return eig.eigenvalues().cwiseAbs().maxCoeff();
}

}  // namespace rgmpc
