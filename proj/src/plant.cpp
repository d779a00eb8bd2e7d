#include "rgmpc/plant.hpp"

#include <cmath>
#include <numbers>

namespace rgmpc {

LinearPlant LinearPlant::make(Matrix A, Matrix B, Matrix C) {
    const Eigen::Index n = A.rows();
    if (A.cols() != n || B.rows() != n || C.cols() != n) {
        throw std::invalid_argument("LinearPlant: inconsistent matrix dimensions");
    }
    if (!A.allFinite() || !B.allFinite() || !C.allFinite()) {
        throw std::invalid_argument("LinearPlant: non-finite entries");
    }
    LinearPlant plant;
    plant.n = static_cast<int>(n);
    plant.m = static_cast<int>(B.cols());
    plant.p = static_cast<int>(C.rows());
    plant.A = std::move(A);
    plant.B = std::move(B);
    plant.C = std::move(C);
    // Stabilizability check: the identity-weight DARE must admit a stabilizing
    // solution.
    solve_dare(plant.A, plant.B, Matrix::Identity(n, n),
               Matrix::Identity(plant.m, plant.m));
    return plant;
}

Vector LinearPlant::step(const Vector& x, const Vector& u) const {
    if (x.size() != n || u.size() != m) {
        throw std::invalid_argument("LinearPlant::step: dimension mismatch");
    }
    return A * x + B * u;
}

InputSet InputSet::box(Vector lower, Vector upper) {
    if (lower.size() != upper.size() || lower.size() == 0) {
        throw std::invalid_argument("InputSet::box: inconsistent bound dimensions");
    }
    if ((lower.array() >= 0.0).any() || (upper.array() <= 0.0).any()) {
        throw std::invalid_argument("InputSet::box: bounds must strictly straddle 0");
    }
    InputSet set;
    set.is_box_ = true;
    set.dim_ = static_cast<int>(lower.size());
    set.lower_ = std::move(lower);
    set.upper_ = std::move(upper);
    return set;
}

InputSet InputSet::infinity_norm_box(double bound, int dim) {
    if (!(bound > 0.0)) {
        throw std::invalid_argument("InputSet: bound must be positive");
    }
    return box(Vector::Constant(dim, -bound), Vector::Constant(dim, bound));
}

InputSet InputSet::ball(double radius, int dim) {
    if (!(radius > 0.0) || dim <= 0) {
        throw std::invalid_argument("InputSet::ball: radius and dimension must be positive");
    }
    InputSet set;
    set.is_box_ = false;
    set.dim_ = dim;
    set.radius_ = radius;
    return set;
}

Vector InputSet::project(const Vector& u) const {
    if (u.size() != dim_) {
        throw std::invalid_argument("InputSet::project: dimension mismatch");
    }
    if (is_box_) {
        return u.cwiseMax(lower_).cwiseMin(upper_);
    }
    const double norm = u.norm();
    if (norm <= radius_) return u;
    return u * (radius_ / norm);
}

bool InputSet::contains(const Vector& u, double tol) const {
    if (u.size() != dim_) return false;
    if (is_box_) {
        return (u.array() >= lower_.array() - tol).all() &&
               (u.array() <= upper_.array() + tol).all();
    }
    return u.norm() <= radius_ + tol;
}

bool InputSet::strictly_contains(const Vector& u, double rel_margin) const {
    if (u.size() != dim_) return false;
    const double shrink = 1.0 - rel_margin;
    if (is_box_) {
        return (u.array() > lower_.array() * shrink).all() &&
               (u.array() < upper_.array() * shrink).all();
    }
    return u.norm() < radius_ * shrink;
}

ConstraintSet::ConstraintSet(InputSet input_set,
                             std::vector<ScalarConstraint> state_constraints)
    : input_set_(std::move(input_set)),
      state_constraints_(std::move(state_constraints)) {
    for (const auto& c : state_constraints_) {
        if (!c.value) {
            throw std::invalid_argument("ConstraintSet: constraint '" + c.name +
                                        "' has no value function");
        }
        if (c.kind == ScalarConstraint::Kind::Conditional && !c.guard) {
            throw std::invalid_argument("ConstraintSet: conditional constraint '" +
                                        c.name + "' has no guard");
        }
    }
}

std::vector<Violation> ConstraintSet::check(const Vector& x, const Vector& u,
                                            double tol) const {
    std::vector<Violation> out;
    if (!input_set_.contains(u, tol)) {
        const double excess =
            input_set_.is_box()
                ? std::max((input_set_.lower() - u).maxCoeff(),
                           (u - input_set_.upper()).maxCoeff())
                : u.norm() - input_set_.radius();
        out.push_back({"input-set", excess, -1});
    }
    for (std::size_t i = 0; i < state_constraints_.size(); ++i) {
        const double g = state_constraints_[i].evaluate(x, u);
        if (g > tol) {
            out.push_back({state_constraints_[i].name, g, static_cast<int>(i)});
        }
    }
    return out;
}

bool ConstraintSet::admissible(const Vector& x, const Vector& u, double tol) const {
    if (!input_set_.contains(u, tol)) return false;
    for (const auto& c : state_constraints_) {
        if (c.evaluate(x, u) > tol) return false;
    }
    return true;
}

bool ConstraintSet::strictly_admissible(const Vector& x, const Vector& u,
                                        double rel_margin) const {
    if (!input_set_.strictly_contains(u, rel_margin)) return false;
    for (const auto& c : state_constraints_) {
        if (!c.guard_active(x, u)) continue;  // inactive guard: satisfied strictly
        if (c.evaluate(x, u) > -rel_margin * c.strict_scale) return false;
    }
    return true;
}

ReferenceBox make_reference_box(const LinearPlant& plant, const ConstraintSet& cs,
                                Vector lower, Vector upper, double margin) {
    if (lower.size() != plant.p || upper.size() != plant.p) {
        throw std::invalid_argument("make_reference_box: bounds must live in output space");
    }
    if ((lower.array() > upper.array()).any()) {
        throw std::invalid_argument("make_reference_box: lower bound above upper bound");
    }
    const int p = plant.p;
    const long vertex_count = 1L << p;
    for (long mask = 0; mask < vertex_count; ++mask) {
        Vector r(p);
        for (int i = 0; i < p; ++i) {
            r[i] = (mask >> i) & 1 ? upper[i] : lower[i];
        }
        const SteadyStatePoint ss = steady_state(plant, cs, r, margin);
        if (!ss.strictly_admissible) {
            throw std::invalid_argument(
                "make_reference_box: vertex reference has no strictly admissible "
                "steady state");
        }
    }
    ReferenceBox box;
    box.lower = std::move(lower);
    box.upper = std::move(upper);
    box.margin = margin;
    return box;
}

SteadyStatePoint steady_state(const LinearPlant& plant, const Vector& r) {
    if (r.size() != plant.p || !r.allFinite()) {
        throw std::invalid_argument("steady_state: reference must be a finite p-vector");
    }
    const int n = plant.n;
    const int m = plant.m;
    const int p = plant.p;

    Matrix M(n + p, n + m);
    M.topLeftCorner(n, n) = plant.A - Matrix::Identity(n, n);
    M.topRightCorner(n, m) = plant.B;
    M.bottomLeftCorner(p, n) = plant.C;
    M.bottomRightCorner(p, m).setZero();

    Vector rhs = Vector::Zero(n + p);
    rhs.tail(p) = r;

    const Vector z = M.completeOrthogonalDecomposition().solve(rhs);
    SteadyStatePoint ss;
    ss.x_ss = z.head(n);
    ss.u_ss = z.tail(m);
    ss.r = r;

    const double scale = 1.0 + std::sqrt(ss.x_ss.squaredNorm() +
                                         ss.u_ss.squaredNorm() + r.squaredNorm());
    if ((M * z - rhs).norm() > 1e-9 * scale) {
        throw InfeasibleReferenceError("steady_state: no steady state for this reference");
    }
    return ss;
}

SteadyStatePoint steady_state(const LinearPlant& plant, const ConstraintSet& cs,
                              const Vector& r, double margin) {
    SteadyStatePoint ss = steady_state(plant, r);
    ss.strictly_admissible = cs.strictly_admissible(ss.x_ss, ss.u_ss, margin);
    return ss;
}

std::vector<LinearForm> cone_polytope(double half_angle_deg, int facet_count,
                                      int state_dim) {
    if (!(half_angle_deg > 0.0) || !(half_angle_deg < 90.0)) {
        throw std::invalid_argument("cone_polytope: half angle must be in (0, 90) degrees");
    }
    if (facet_count < 3) {
        throw std::invalid_argument("cone_polytope: need at least 3 facets");
    }
    if (state_dim < 3) {
        throw std::invalid_argument("cone_polytope: state must have at least 3 components");
    }
    const double theta = half_angle_deg * std::numbers::pi / 180.0;
    // Inscribed polygon: shrinking the radius by cos(pi/m) keeps every facet
    // inside the circular cross-section.
    const double scale = std::tan(theta) * std::cos(std::numbers::pi / facet_count);

    std::vector<LinearForm> facets;
    facets.reserve(facet_count);
    for (int j = 0; j < facet_count; ++j) {
        const double phi = 2.0 * std::numbers::pi * j / facet_count;
        LinearForm f;
        f.ax = Vector::Zero(state_dim);
        f.ax[0] = std::cos(phi);
        f.ax[2] = std::sin(phi);
        f.ax[1] = -scale;
        f.au = Vector();
        f.b = scale;
        facets.push_back(std::move(f));
    }
    return facets;
}

}  // namespace rgmpc
