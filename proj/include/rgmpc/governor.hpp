#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "rgmpc/mpc.hpp"

namespace rgmpc {

/// The governed prediction: the MPC-optimal inputs followed by the saturated
/// LQR law, with the states rolled forward exactly.
struct ExtendedSequence {
    std::vector<Vector> inputs;  // u_0 .. u_{N_RG-1}
    std::vector<Vector> states;  // x_0 .. x_{N_RG-1}
    Vector v;                    // reference the sequence was built for
    int mpc_segment = 0;         // inputs below this index came from the MPC
};

/// Ellipsoidal terminal set { x : (x - center)' shape (x - center) <= level }.
struct InvariantSet {
    Vector center;
    Matrix shape;
    double level = 0.0;

    double weighted_distance2(const Vector& x) const {
        const Vector d = x - center;
        return d.dot(shape * d);
    }
    bool contains(const Vector& x, double tol = 1e-9) const {
        return weighted_distance2(x) <= level + tol * std::max(1.0, level);
    }
};

struct InvariantSetOptions {
    int boundary_samples = 2000;
    double bisection_tol = 1e-6;
    double feasibility_tol = 1e-9;
    unsigned sample_seed = 20200517u;
};

/// Lyapunov-sublevel terminal sets for the saturated-LQR closed loop. The
/// shape matrix solves Acl'P Acl - P = -I once; the level is recomputed per
/// center (cached on a 1e-9 reference grid): closed form over every linear
/// constraint and the input bounds pulled back through the feedback, then
/// boundary-sample bisection over the nonlinear constraints.
class InvariantSetFamily {
public:
    InvariantSetFamily(const LinearPlant& plant, const ConstraintSet& cs,
                       const Matrix& K, InvariantSetOptions opts = {});

    /// Throws DegenerateSetError when the center is not strictly inside Z.
    InvariantSet at(const SteadyStatePoint& ss) const;

    const Matrix& shape() const { return shape_; }

private:
    double compute_level(const SteadyStatePoint& ss) const;
    bool boundary_admissible(const SteadyStatePoint& ss, double level) const;

    const LinearPlant* plant_;
    const ConstraintSet* cs_;
    Matrix K_;
    Matrix shape_;            // P_lyap
    Matrix shape_inv_;
    Matrix directions_;       // n x S unit-level boundary directions
    Matrix feedback_dirs_;    // K * directions_
    // Hoisted per-sample coefficients for constraints carrying quadratic
    // descriptors: g(center + s d) = alpha s^2 + beta s + gamma.
    std::vector<Vector> quad_alpha_;   // aligned with state_constraints
    std::vector<Matrix> quad_dirs_;    // Q2 * directions, for the beta terms
    std::vector<Vector> guard_slope_;  // guard ax' d per sample
    bool all_fast_ = false;
    InvariantSetOptions opts_;
    mutable std::map<std::vector<long long>, double> level_cache_;
};

/// Builds the Lyapunov terminal set at a single reference.
InvariantSet lyapunov_invariant_set(const LinearPlant& plant, const Matrix& K,
                                    const ConstraintSet& cs, const SteadyStatePoint& ss,
                                    const InvariantSetOptions& opts = {});

/// Extends an MPC input sequence with the saturated LQR law out to rg_horizon
/// steps and rolls the states forward.
ExtendedSequence extend_sequence(const LinearPlant& plant,
                                 const std::vector<Vector>& mpc_inputs, const Vector& x,
                                 const SteadyStatePoint& ss, const Matrix& K,
                                 int rg_horizon, const InputSet& input_set);

struct AdmissibilityReport {
    bool admissible = true;
    int step = -1;             // earliest violating step, -1 when admissible
    std::string constraint;    // violated constraint name or "terminal-set"
    double value = 0.0;
};

/// Eq-style sufficient test: every pair along the horizon inside Z and the
/// final state inside the terminal set.
AdmissibilityReport check_admissible(const ExtendedSequence& ext, const ConstraintSet& cs,
                                     const InvariantSet& inv,
                                     double tol = ConstraintSet::kFeasibilityTol);

struct RgConfig {
    int horizon = 120;       // N_RG, must exceed the MPC horizon
    double kappa0 = 0.1;     // default increment, in (0, 1]
    int grace_steps = 5;     // N_a, steps before the increment starts decaying
};

/// Increment schedule: kappa0 within the grace window, harmonically decaying
/// afterwards, clamped so the accumulated sum lands exactly on 1.
double select_kappa_algorithm2(const RgConfig& cfg, int k, int k_prime,
                               double kappa_sum_prev);

/// Mutable per-run governor state.
struct GovernorState {
    Vector v_prev;                    // v_{k-1}
    int k_prime = 0;                  // last step with a reference change
    std::vector<Vector> stored_tail;  // MPC inputs computed at k_prime
    std::vector<double> kappa_history;
    double s = 0.0;                   // accumulated progress, in [0, 1]
    Vector v0;
    Vector v_dir;
    Vector r;
};

enum class GovernorBranch { Advance, Replay, LqrFallback, Direct };
// Direct marks steps of controllers that bypass the governor entirely.

/// Strategy hook producing the tested reference. The default (no strategy
/// set) is the harmonically decaying increment along v_dir.
struct ReferenceProposal {
    Vector v_plus;
    double kappa = 0.0;
};
using ReferenceStrategy =
    std::function<ReferenceProposal(const GovernorState&, const RgConfig&, int k)>;

struct GovernorStepResult {
    Vector u;
    GovernorBranch branch = GovernorBranch::Advance;
    double kappa = 0.0;
    double s = 0.0;
    Vector v;
    SolverDiagnostics qp;
    double invariant_level = 0.0;
    AdmissibilityReport admissibility;
};

/// Closed-loop reference governor around the input-constrained MPC. With
/// mpc_segment = 0 the prediction and fallback law degenerate to the pure
/// saturated LQR (the sLQR-RG baseline).
class Governor {
public:
    /// Initializes at x0 with v0 (default C x0), verifying (x0, v0) by one
    /// extend-and-check pass. Throws InitializationError when inadmissible.
    Governor(const LinearPlant& plant, const ConstraintSet& cs, const MpcConfig& mpc_cfg,
             const RgConfig& rg_cfg, const Vector& x0, const Vector& r,
             std::optional<Vector> v0 = std::nullopt, ReferenceStrategy strategy = {},
             bool use_mpc_segment = true,
             double feasibility_tol = ConstraintSet::kFeasibilityTol,
             InvariantSetOptions inv_opts = {});

    // The invariant-set family references members; pin the object in place.
    Governor(const Governor&) = delete;
    Governor& operator=(const Governor&) = delete;

    /// One pass of the input-generation algorithm at step k.
    GovernorStepResult step(const Vector& x, int k);

    const GovernorState& state() const { return state_; }
    const Matrix& gain() const { return mpc_cfg_.K; }
    const InvariantSetFamily& invariant_sets() const { return family_; }

private:
    ReferenceProposal propose(int k) const;
    double progress_after(const Vector& v) const;
    InvariantSet terminal_set(const SteadyStatePoint& ss) const;

    LinearPlant plant_;
    const ConstraintSet* cs_;
    MpcConfig mpc_cfg_;
    RgConfig rg_cfg_;
    ReferenceStrategy strategy_;
    bool use_mpc_segment_ = true;
    double feasibility_tol_ = ConstraintSet::kFeasibilityTol;
    InvariantSetFamily family_;
    CondensedQp qp_;
    GovernorState state_;
    std::vector<Vector> last_solution_;  // warm start for the next solve
};

}  // namespace rgmpc
