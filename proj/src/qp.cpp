#include "rgmpc/qp.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "rgmpc/errors.hpp"

namespace rgmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();
}

QpResult solve_qp_dual_active_set(const Eigen::LLT<Matrix>& hessian_llt,
                                  const Matrix& G, const Vector& f, const Vector& h,
                                  const QpOptions& opts, Matrix* w_cache,
                                  std::vector<char>* w_ready) {
    const int d = static_cast<int>(G.cols());
    const int n_rows = static_cast<int>(G.rows());
    const double tol = opts.feasibility_tol;
    const int max_iter =
        opts.max_iterations > 0 ? opts.max_iterations : 100 + 5 * d + 2 * n_rows;

    Matrix local_cache;
    std::vector<char> local_ready;
    if (w_cache == nullptr || w_ready == nullptr) {
        local_cache = Matrix::Zero(d, n_rows);
        local_ready.assign(n_rows, 0);
        w_cache = &local_cache;
        w_ready = &local_ready;
    }
    auto w_col = [&](int i) -> Vector {  // H^-1 G_i'
        if (!(*w_ready)[i]) {
            w_cache->col(i) = hessian_llt.solve(G.row(i).transpose());
            (*w_ready)[i] = 1;
        }
        return w_cache->col(i);
    };

    const Vector x_unconstrained = -hessian_llt.solve(f);
    Vector x = x_unconstrained;

    QpResult result;
    result.multipliers = Vector::Zero(n_rows);
    if (n_rows == 0) {
        result.x = x;
        return result;
    }

    const int cap = std::min(d, n_rows) + 1;
    std::vector<int> active;
    std::vector<double> lambda;
    Matrix W_A(d, cap);      // H^-1 G_A' columns
    Matrix D(cap, cap);      // G_A H^-1 G_A'
    int iterations = 0;

    auto drop_active = [&](int k) {
        const int q = static_cast<int>(active.size());
        for (int j = k; j + 1 < q; ++j) {
            W_A.col(j) = W_A.col(j + 1);
        }
        // Shift the trailing rows/columns of the Gram matrix up and left.
        for (int i = k; i + 1 < q; ++i) {
            for (int j = 0; j < q; ++j) D(i, j) = D(i + 1, j);
        }
        for (int j = k; j + 1 < q; ++j) {
            for (int i = 0; i + 1 < q; ++i) D(i, j) = D(i, j + 1);
        }
        active.erase(active.begin() + k);
        lambda.erase(lambda.begin() + k);
    };

    while (true) {
        // Most violated row.
        const Vector s = G * x - h;
        int p = -1;
        double worst = tol;
        for (int i = 0; i < n_rows; ++i) {
            if (s[i] > worst) {
                worst = s[i];
                p = i;
            }
        }
        if (p < 0) break;  // primal feasible, hence optimal

        double viol = s[p];
        const Vector wp = w_col(p);
        double lambda_p = 0.0;

        while (true) {
            if (++iterations > max_iter) {
                throw NoConvergenceError("qp: active-set iteration budget exhausted",
                                         viol, iterations);
            }
            const int q = static_cast<int>(active.size());
            Vector r;
            Vector z = wp;
            if (q > 0) {
                Vector gw(q);
                for (int j = 0; j < q; ++j) gw[j] = G.row(active[j]).dot(wp);
                r = D.topLeftCorner(q, q).ldlt().solve(gw);
                z.noalias() -= W_A.leftCols(q) * r;
            }
            const double ztn = G.row(p).dot(z);  // equals z'Hz, nonnegative
            const double wp_norm = wp.cwiseAbs().maxCoeff();
            const bool z_zero =
                z.cwiseAbs().maxCoeff() <= 1e-11 * std::max(1.0, wp_norm) ||
                ztn <= 1e-15 * std::max(1.0, wp_norm * wp_norm);

            double t1 = kInf;
            int blocker = -1;
            for (int j = 0; j < q; ++j) {
                if (r[j] > 1e-12) {
                    const double cand = lambda[j] / r[j];
                    if (cand < t1) {
                        t1 = cand;
                        blocker = j;
                    }
                }
            }
            const double t2 = (!z_zero && ztn > 0.0) ? viol / ztn : kInf;
            const double t = std::min(t1, t2);
            if (t == kInf) {
                throw InfeasibleOcpError("qp: the constraint polytope is empty");
            }

            if (!z_zero) x.noalias() -= t * z;
            for (int j = 0; j < q; ++j) lambda[j] -= t * r[j];
            lambda_p += t;
            viol -= t * ztn;

            if (t2 <= t1) {
                // Row p reached its boundary; admit it to the working set.
                const int q_new = static_cast<int>(active.size());
                W_A.col(q_new) = wp;
                for (int j = 0; j < q_new; ++j) {
                    const double dij = G.row(active[j]).dot(wp);
                    D(q_new, j) = dij;
                    D(j, q_new) = dij;
                }
                D(q_new, q_new) = G.row(p).dot(wp);
                active.push_back(p);
                lambda.push_back(lambda_p);
                break;
            }
            drop_active(blocker);
        }
    }

    // Polish: recompute the multipliers and the point from the final working
    // set to remove drift accumulated over rank-one steps.
    const int q = static_cast<int>(active.size());
    if (q > 0) {
        Vector rhs(q);
        for (int j = 0; j < q; ++j) {
            rhs[j] = G.row(active[j]).dot(x_unconstrained) - h[active[j]];
        }
        Vector lam = D.topLeftCorner(q, q).ldlt().solve(rhs);
        for (int j = 0; j < q; ++j) lam[j] = std::max(0.0, lam[j]);
        x = x_unconstrained - W_A.leftCols(q) * lam;
        for (int j = 0; j < q; ++j) result.multipliers[active[j]] = lam[j];
    }

    result.x = x;
    result.active = active;
    result.iterations = iterations;

    Vector stationarity = hessian_llt.matrixL() * (hessian_llt.matrixL().transpose() * x);
    stationarity += f;
    for (int j = 0; j < q; ++j) {
        stationarity += result.multipliers[active[j]] * G.row(active[j]).transpose();
    }
    const double primal_excess =
        n_rows > 0 ? std::max(0.0, (G * x - h).maxCoeff()) : 0.0;
    result.kkt_residual =
        std::max(stationarity.cwiseAbs().maxCoeff(), primal_excess);
    return result;
}

}  // namespace rgmpc
