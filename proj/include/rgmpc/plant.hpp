#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "rgmpc/linalg.hpp"

namespace rgmpc {

/// Discrete-time plant x_{k+1} = A x_k + B u_k, y_k = C x_k.
struct LinearPlant {
    Matrix A;
    Matrix B;
    Matrix C;
    int n = 0;
    int m = 0;
    int p = 0;

    /// Validates dimensions and stabilizability (a DARE solve with identity
    /// weights must succeed).
    static LinearPlant make(Matrix A, Matrix B, Matrix C);

    Vector step(const Vector& x, const Vector& u) const;
};

/// A set-point triple satisfying (A - I) x_ss + B u_ss = 0 and C x_ss = r.
struct SteadyStatePoint {
    Vector x_ss;
    Vector u_ss;
    Vector r;
    /// Whether (x_ss, u_ss) lies strictly inside the constraint set with the
    /// shrunk-set margin. Only meaningful when computed against a ConstraintSet.
    bool strictly_admissible = true;
};

/// Compact convex input set with an exact Euclidean projection.
class InputSet {
public:
    InputSet() = default;  // empty; replace via the factories before use
    static InputSet box(Vector lower, Vector upper);
    /// Box |u_i| <= bound for every component.
    static InputSet infinity_norm_box(double bound, int dim);
    static InputSet ball(double radius, int dim);

    Vector project(const Vector& u) const;
    bool contains(const Vector& u, double tol = 1e-10) const;
    /// Membership in the set shrunk toward the origin by a relative margin.
    bool strictly_contains(const Vector& u, double rel_margin) const;

    int dim() const { return dim_; }
    bool is_box() const { return is_box_; }
    const Vector& lower() const { return lower_; }
    const Vector& upper() const { return upper_; }
    double radius() const { return radius_; }

private:
    bool is_box_ = true;
    int dim_ = 0;
    Vector lower_;
    Vector upper_;
    double radius_ = 0.0;
};

/// Linear inequality ax'x + au'u <= b.
struct LinearForm {
    Vector ax;
    Vector au;
    double b = 0.0;
};

/// Quadratic state descriptor g(x) = x'Q2 x + q1'x + q0, an optional fast
/// evaluation route for level searches; the value function stays
/// authoritative.
struct QuadraticStateForm {
    Matrix Q2;
    Vector q1;
    double q0 = 0.0;
};

/// Scalar constraint g(x, u) <= 0 with a reporting name. Conditional
/// constraints evaluate their guard first; when the guard is inactive the
/// constraint is satisfied by definition.
struct ScalarConstraint {
    enum class Kind { Linear, Nonlinear, Conditional };

    std::string name;
    Kind kind = Kind::Nonlinear;
    std::function<double(const Vector& x, const Vector& u)> value;
    std::function<bool(const Vector& x, const Vector& u)> guard;  // Conditional only
    std::optional<LinearForm> linear_form;                        // Linear only
    std::optional<QuadraticStateForm> state_quadratic;            // nonlinear fast path
    std::optional<LinearForm> guard_form;  // guard active iff ax'x - b <= 0
    double strict_scale = 1.0;  // absolute slack per unit of relative margin

    bool guard_active(const Vector& x, const Vector& u) const {
        return kind != Kind::Conditional || !guard || guard(x, u);
    }

    double evaluate(const Vector& x, const Vector& u) const {
        if (!guard_active(x, u)) return 0.0;
        return value(x, u);
    }
};

struct Violation {
    std::string name;
    double value = 0.0;
    int constraint_index = -1;
};

/// Hard constraint set Z: an input set U plus a list of scalar state/input
/// constraints. Immutable after construction.
class ConstraintSet {
public:
    static constexpr double kFeasibilityTol = 1e-9;

    ConstraintSet() = default;
    ConstraintSet(InputSet input_set, std::vector<ScalarConstraint> state_constraints);

    const InputSet& input_set() const { return input_set_; }
    const std::vector<ScalarConstraint>& state_constraints() const {
        return state_constraints_;
    }

    Vector project_input(const Vector& u) const { return input_set_.project(u); }

    /// Every constraint with g(x, u) above the feasibility tolerance.
    /// Violations are data, not errors.
    std::vector<Violation> check(const Vector& x, const Vector& u,
                                 double tol = kFeasibilityTol) const;

    bool admissible(const Vector& x, const Vector& u,
                    double tol = kFeasibilityTol) const;

    /// Strict membership in the shrunk set Z-tilde.
    bool strictly_admissible(const Vector& x, const Vector& u,
                             double rel_margin) const;

private:
    InputSet input_set_;
    std::vector<ScalarConstraint> state_constraints_;
};

/// Box of reference commands whose steady states are strictly admissible.
struct ReferenceBox {
    Vector lower;
    Vector upper;
    double margin = 0.01;
};

/// Validates that every vertex of the box admits a strictly admissible steady
/// state before returning it.
ReferenceBox make_reference_box(const LinearPlant& plant, const ConstraintSet& cs,
                                Vector lower, Vector upper, double margin = 0.01);

/// Minimum-norm solution of the steady-state system for reference r.
/// Throws InfeasibleReferenceError when no steady state exists.
SteadyStatePoint steady_state(const LinearPlant& plant, const Vector& r);
SteadyStatePoint steady_state(const LinearPlant& plant, const ConstraintSet& cs,
                              const Vector& r, double margin = 0.01);

/// Inner polyhedral approximation of the cone x1^2 + x3^2 <= tan(theta)^2 (x2+1)^2
/// with facet_count facets; each form constrains the state only.
std::vector<LinearForm> cone_polytope(double half_angle_deg, int facet_count,
                                      int state_dim = 6);

}  // namespace rgmpc
