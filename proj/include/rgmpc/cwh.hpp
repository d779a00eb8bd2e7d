#pragma once

#include <string>
#include <vector>

#include "rgmpc/governor.hpp"

namespace rgmpc {

/// Orbit and sampling parameters for the relative-motion benchmark. Defaults
/// describe a 500 km circular orbit above a 6371 km Earth radius.
struct CwhParams {
    double mu = 3.986004418e14;  // gravitational parameter [m^3/s^2]
    double r0 = 6.871e6;         // orbital radius [m]
    double Ts = 0.5;             // sampling period [s]

    double mean_motion() const;  // n = sqrt(mu / r0^3) [rad/s]
};

struct CwhContinuous {
    Matrix Ac;
    Matrix Bc;
    Matrix Cc;
};

/// Continuous-time relative-motion triple in the rotating frame: positions
/// stacked over velocities, inputs are accelerations, outputs the positions.
CwhContinuous cwh_continuous(const CwhParams& params);

/// The five rendezvous constraints: input saturation, per-axis speed bounds,
/// stay-in-front, line-of-sight cone, and the conditional final-speed bound.
ConstraintSet spacecraft_constraints();

/// Polytopic variant used by the state-constrained MPC study: the cone becomes
/// facet_count linear inequalities, the conditional speed bound is dropped and
/// x2 >= 3 imposed instead (the target is shifted accordingly).
ConstraintSet spacecraft_constraints_polytopic(int facet_count = 15,
                                               double half_angle_deg = 15.0);

struct CwhReferenceParams {
    double kappa = 0.1;
    double near_threshold = 20.0;   // along-track distance switching branches [m]
    double landing_radius = 0.05;   // exact-landing clamp on ||v - r|| [m]
    /// Componentwise magnitudes of the far-branch increment.
    Vector fixed_step = (Vector(3) << 3.67, 20.0, 3.67).finished();
    /// Lateral-over-axial slope of the admissible reference cone; the far
    /// branch hands over to the proportional rule rather than step a
    /// reference outside it.
    double cone_slope = std::tan(15.0 * 3.14159265358979323846 / 180.0);
    double cone_margin = 0.01;
};

/// Rendezvous reference stepping: a fixed increment toward the target while
/// far in the along-track direction, a proportional contraction when near
/// (or whenever the fixed step would leave the margin cone), a componentwise
/// no-overshoot clamp, and exact landing inside the landing radius.
Vector cwh_reference_strategy(const Vector& v_prev, const Vector& v0, const Vector& r,
                              const CwhReferenceParams& params = {});

/// Zero-velocity initial conditions on concentric circles in the x1-x3 plane
/// at a fixed along-track distance, all strictly inside the cone.
std::vector<Vector> ic_grid(double x2, int count, double max_half_angle_deg);

/// A ready-to-simulate benchmark instance.
struct CwhScenario {
    std::string name;
    CwhParams params;
    LinearPlant plant;
    ConstraintSet constraints;
    ReferenceBox reference_box;
    MpcConfig mpc_cfg;
    RgConfig rg_cfg;
    Vector target;                 // r
    bool custom_reference = true;  // use the rendezvous strategy
    CwhReferenceParams ref_params;
    /// Shared admissibility tolerance for the governor checks and the
    /// violation log. The rendezvous presets use centimeter-scale slack on
    /// meter-scale geometry; docking onto the stay-in-front boundary
    /// undershoots by a few millimeters, which nanometer tolerances would
    /// flag on every run.
    double feasibility_tol = ConstraintSet::kFeasibilityTol;
};

/// Named presets: "cwh-500km-default" (nonlinear constraints, r = 0) and
/// "cwh-cmpc-polytopic" (linear constraints, shifted target).
CwhScenario make_cwh_scenario(const std::string& name);

/// The rendezvous ReferenceStrategy hook for the governor.
ReferenceStrategy make_cwh_reference_strategy(const CwhReferenceParams& params = {});

}  // namespace rgmpc
