#include "rgmpc/governor.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace rgmpc {

namespace {
constexpr double kInf = std::numeric_limits<double>::infinity();

std::vector<long long> quantize(const Vector& v) {
    std::vector<long long> key(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        key[i] = static_cast<long long>(std::llround(v[i] * 1e9));
    }
    return key;
}
}  // namespace

InvariantSetFamily::InvariantSetFamily(const LinearPlant& plant, const ConstraintSet& cs,
                                       const Matrix& K, InvariantSetOptions opts)
    : plant_(&plant), cs_(&cs), K_(K), opts_(opts) {
    const Matrix Acl = plant.A - plant.B * K;
    shape_ = solve_discrete_lyapunov(Acl);
    const int n = plant.n;
    shape_inv_ = shape_.ldlt().solve(Matrix::Identity(n, n));

    // Boundary directions d with ||d||_P = 1, so that center + sqrt(c) d lies
    // exactly on the level-c surface.
    Eigen::SelfAdjointEigenSolver<Matrix> eig(shape_);
    const Matrix inv_sqrt = eig.eigenvectors() *
                            eig.eigenvalues().cwiseInverse().cwiseSqrt().asDiagonal() *
                            eig.eigenvectors().transpose();
    std::mt19937 rng(opts_.sample_seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    directions_ = Matrix(n, opts_.boundary_samples);
    for (int j = 0; j < opts_.boundary_samples; ++j) {
        Vector y(n);
        do {
            for (int i = 0; i < n; ++i) y[i] = gauss(rng);
        } while (y.norm() < 1e-12);
        directions_.col(j) = inv_sqrt * (y / y.norm());
    }
    feedback_dirs_ = K_ * directions_;

    // Hoist the sample-direction algebra for quadratic constraints, so the
    // per-center bisection only touches scalars.
    const auto& constraints = cs.state_constraints();
    quad_alpha_.resize(constraints.size());
    quad_dirs_.resize(constraints.size());
    guard_slope_.resize(constraints.size());
    all_fast_ = cs.input_set().is_box();
    for (std::size_t i = 0; i < constraints.size(); ++i) {
        const auto& c = constraints[i];
        if (c.kind == ScalarConstraint::Kind::Linear && c.linear_form) continue;
        if (!c.state_quadratic ||
            (c.kind == ScalarConstraint::Kind::Conditional && !c.guard_form)) {
            all_fast_ = false;
            continue;
        }
        quad_dirs_[i] = c.state_quadratic->Q2 * directions_;
        quad_alpha_[i] =
            directions_.cwiseProduct(quad_dirs_[i]).colwise().sum().transpose();
        if (c.guard_form) {
            guard_slope_[i] = directions_.transpose() * c.guard_form->ax;
        }
    }
}

InvariantSet InvariantSetFamily::at(const SteadyStatePoint& ss) const {
    const auto key = quantize(ss.r);
    double level;
    const auto it = level_cache_.find(key);
    if (it != level_cache_.end()) {
        level = it->second;
    } else {
        level = compute_level(ss);
        level_cache_.emplace(key, level);
    }
    InvariantSet set;
    set.center = ss.x_ss;
    set.shape = shape_;
    set.level = level;
    return set;
}

bool InvariantSetFamily::boundary_admissible(const SteadyStatePoint& ss,
                                             double level) const {
    const double s = std::sqrt(level);
    const double tol = opts_.feasibility_tol;
    const InputSet& input = cs_->input_set();

    for (int j = 0; j < opts_.boundary_samples; ++j) {
        const Vector x = ss.x_ss + s * directions_.col(j);
        const Vector u = input.project(ss.u_ss - s * feedback_dirs_.col(j));
        for (const auto& c : cs_->state_constraints()) {
            if (c.evaluate(x, u) > tol) return false;
        }
        if (!input.is_box() && (ss.u_ss - s * feedback_dirs_.col(j)).norm() >
                                   input.radius() + tol) {
            return false;  // the unsaturated law must stay inside the ball
        }
    }
    return true;
}

double InvariantSetFamily::compute_level(const SteadyStatePoint& ss) const {
    const Vector& xc = ss.x_ss;
    const Vector& uc = ss.u_ss;
    const int n = plant_->n;
    const int m = plant_->m;
    const double tol = opts_.feasibility_tol;

    // Also covers the center admissibility precondition: every margin below
    // must be strictly positive. Margins at rounding scale count as boundary
    // contact.
    constexpr double kDegenerateTol = ConstraintSet::kFeasibilityTol;
    auto halfspace_level = [&](const Vector& dir, double margin) -> double {
        if (margin <= kDegenerateTol) {
            throw DegenerateSetError(
                "invariant set: center is not strictly inside the constraint set");
        }
        const double denom = dir.dot(shape_inv_ * dir);
        if (denom <= 1e-300) return kInf;  // constraint direction vanished
        return margin * margin / denom;
    };

    double level = kInf;

    // Input bounds pulled back through u = -K(x - xc) + uc. Keeping the level
    // below these guarantees the law is unsaturated inside the set, which is
    // what makes the Lyapunov decrease argument valid.
    if (cs_->input_set().is_box()) {
        for (int i = 0; i < m; ++i) {
            const Vector krow = K_.row(i).transpose();
            level = std::min(level,
                             halfspace_level(-krow, cs_->input_set().upper()[i] - uc[i]));
            level = std::min(level,
                             halfspace_level(krow, uc[i] - cs_->input_set().lower()[i]));
        }
    } else {
        if (uc.norm() >= cs_->input_set().radius()) {
            throw DegenerateSetError("invariant set: steady input on the ball boundary");
        }
    }

    bool needs_sampling = !cs_->input_set().is_box();
    for (const auto& c : cs_->state_constraints()) {
        if (c.guard_active(xc, uc) && c.evaluate(xc, uc) >= -kDegenerateTol) {
            throw DegenerateSetError("invariant set: center is not strictly inside '" +
                                     c.name + "'");
        }
        if (c.kind == ScalarConstraint::Kind::Linear && c.linear_form) {
            const LinearForm& lf = *c.linear_form;
            Vector dir = lf.ax;
            double offset = lf.ax.dot(xc);
            if (lf.au.size() == m) {
                dir -= K_.transpose() * lf.au;
                offset += lf.au.dot(uc);
            }
            level = std::min(level, halfspace_level(dir, lf.b - offset));
        } else {
            needs_sampling = true;
        }
    }
    if (!needs_sampling) {
        if (!(level > 0.0)) {
            throw DegenerateSetError("invariant set: level collapsed to zero");
        }
        return level;
    }

    // Nonlinear facets: shrink by bisection until the boundary sample set is
    // admissible. With quadratic descriptors the sample tests reduce to
    // alpha c + beta sqrt(c) + gamma <= tol per direction.
    std::function<bool(double)> admissible;
    struct FastRow {
        const Vector* alpha;
        Vector beta;
        double gamma;
        bool conditional;
        const Vector* guard_slope;
        double guard_offset;
    };
    std::vector<FastRow> fast_rows;
    if (all_fast_) {
        const auto& constraints = cs_->state_constraints();
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            const auto& c = constraints[i];
            if (c.kind == ScalarConstraint::Kind::Linear && c.linear_form) continue;
            FastRow row;
            row.alpha = &quad_alpha_[i];
            const Vector w = 2.0 * (c.state_quadratic->Q2 * xc) + c.state_quadratic->q1;
            row.beta = directions_.transpose() * w;
            row.gamma = xc.dot(c.state_quadratic->Q2 * xc) +
                        c.state_quadratic->q1.dot(xc) + c.state_quadratic->q0;
            row.conditional = c.kind == ScalarConstraint::Kind::Conditional;
            row.guard_slope = row.conditional ? &guard_slope_[i] : nullptr;
            row.guard_offset =
                row.conditional ? c.guard_form->ax.dot(xc) - c.guard_form->b : 0.0;
            fast_rows.push_back(std::move(row));
        }
        admissible = [&](double c) {
            const double s = std::sqrt(c);
            for (const auto& row : fast_rows) {
                for (int j = 0; j < opts_.boundary_samples; ++j) {
                    if (row.conditional &&
                        row.guard_offset + s * (*row.guard_slope)[j] > 0.0) {
                        continue;  // guard inactive at this sample
                    }
                    if ((*row.alpha)[j] * c + row.beta[j] * s + row.gamma > tol) {
                        return false;
                    }
                }
            }
            return true;
        };
    } else {
        admissible = [&](double c) { return boundary_admissible(ss, c); };
    }

    double hi = level;
    if (!std::isfinite(hi)) {
        hi = 1.0;
        while (admissible(hi) && hi < 1e12) hi *= 2.0;
    }
    if (admissible(hi)) {
        return hi;
    }
    double lo = 0.0;
    while (hi - lo > opts_.bisection_tol * std::max(1.0, lo)) {
        const double mid = 0.5 * (lo + hi);
        if (admissible(mid)) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if (!(lo > 0.0)) {
        // The center is strictly admissible (checked above), so a vanishing
        // level can only mean the margin is below the sampling resolution.
        throw DegenerateSetError("invariant set: level collapsed to zero");
    }
    return lo;
}

InvariantSet lyapunov_invariant_set(const LinearPlant& plant, const Matrix& K,
                                    const ConstraintSet& cs, const SteadyStatePoint& ss,
                                    const InvariantSetOptions& opts) {
    const InvariantSetFamily family(plant, cs, K, opts);
    return family.at(ss);
}

ExtendedSequence extend_sequence(const LinearPlant& plant,
                                 const std::vector<Vector>& mpc_inputs, const Vector& x,
                                 const SteadyStatePoint& ss, const Matrix& K,
                                 int rg_horizon, const InputSet& input_set) {
    if (rg_horizon <= static_cast<int>(mpc_inputs.size())) {
        throw std::invalid_argument(
            "extend_sequence: the admissibility horizon must exceed the MPC segment");
    }
    ExtendedSequence ext;
    ext.v = ss.r;
    ext.mpc_segment = static_cast<int>(mpc_inputs.size());
    ext.inputs.reserve(rg_horizon);
    ext.states.reserve(rg_horizon);

    Vector xi = x;
    for (int j = 0; j < rg_horizon; ++j) {
        ext.states.push_back(xi);
        Vector u;
        if (j < ext.mpc_segment) {
            u = mpc_inputs[j];
        } else {
            u = input_set.project(-K * (xi - ss.x_ss) + ss.u_ss);
        }
        ext.inputs.push_back(u);
        if (j + 1 < rg_horizon) {
            xi = plant.step(xi, u);
        }
    }
    return ext;
}

AdmissibilityReport check_admissible(const ExtendedSequence& ext, const ConstraintSet& cs,
                                     const InvariantSet& inv, double tol) {
    AdmissibilityReport report;
    const int horizon = static_cast<int>(ext.states.size());
    for (int j = 0; j + 1 < horizon; ++j) {
        if (!cs.input_set().contains(ext.inputs[j], tol)) {
            report.admissible = false;
            report.step = j;
            report.constraint = "input-set";
            report.value = 0.0;
            return report;
        }
        for (const auto& c : cs.state_constraints()) {
            const double g = c.evaluate(ext.states[j], ext.inputs[j]);
            if (g > tol) {
                report.admissible = false;
                report.step = j;
                report.constraint = c.name;
                report.value = g;
                return report;
            }
        }
    }
    const double wd2 = inv.weighted_distance2(ext.states.back());
    if (wd2 > inv.level + tol * std::max(1.0, inv.level)) {
        report.admissible = false;
        report.step = horizon - 1;
        report.constraint = "terminal-set";
        report.value = wd2 - inv.level;
        return report;
    }
    return report;
}

double select_kappa_algorithm2(const RgConfig& cfg, int k, int k_prime,
                               double kappa_sum_prev) {
    double kappa = (k - k_prime <= cfg.grace_steps)
                       ? cfg.kappa0
                       : cfg.kappa0 / static_cast<double>(k - k_prime - cfg.grace_steps);
    if (kappa_sum_prev + kappa > 1.0) {
        kappa = 1.0 - kappa_sum_prev;
    }
    return std::max(0.0, kappa);
}

Governor::Governor(const LinearPlant& plant, const ConstraintSet& cs,
                   const MpcConfig& mpc_cfg, const RgConfig& rg_cfg, const Vector& x0,
                   const Vector& r, std::optional<Vector> v0, ReferenceStrategy strategy,
                   bool use_mpc_segment, double feasibility_tol,
                   InvariantSetOptions inv_opts)
    : plant_(plant),
      cs_(&cs),
      mpc_cfg_(mpc_cfg),
      rg_cfg_(rg_cfg),
      strategy_(std::move(strategy)),
      use_mpc_segment_(use_mpc_segment),
      feasibility_tol_(feasibility_tol),
      family_(plant_, cs, mpc_cfg_.K,
              [&inv_opts, feasibility_tol] {
                  InvariantSetOptions opts = inv_opts;
                  opts.feasibility_tol = feasibility_tol;
                  return opts;
              }()),
      qp_(plant_, mpc_cfg_) {
    if (!(rg_cfg_.kappa0 > 0.0) || rg_cfg_.kappa0 > 1.0) {
        throw std::invalid_argument("Governor: kappa0 must lie in (0, 1]");
    }
    const int segment = use_mpc_segment_ ? mpc_cfg_.horizon : 0;
    if (rg_cfg_.horizon <= segment) {
        throw std::invalid_argument("Governor: N_RG must exceed the MPC horizon");
    }
    if (x0.size() != plant_.n || r.size() != plant_.p) {
        throw std::invalid_argument("Governor: dimension mismatch in x0 or r");
    }

    state_.r = r;
    state_.v0 = v0.has_value() ? *v0 : Vector(plant_.C * x0);
    state_.v_prev = state_.v0;
    state_.v_dir = r - state_.v0;
    state_.k_prime = 0;
    state_.s = 0.0;

    SteadyStatePoint ss0;
    try {
        ss0 = steady_state(plant_, *cs_, state_.v0);
    } catch (const InfeasibleReferenceError& e) {
        throw InitializationError(std::string("governor initialization: ") + e.what());
    }

    std::vector<Vector> mpc_inputs;
    if (use_mpc_segment_) {
        qp_.set_target(x0, ss0);
        mpc_inputs = solve_umpc(qp_, cs_->input_set(), mpc_cfg_).inputs;
    }
    const ExtendedSequence ext = extend_sequence(
        plant_, mpc_inputs, x0, ss0, mpc_cfg_.K, rg_cfg_.horizon, cs_->input_set());
    const InvariantSet inv = terminal_set(ss0);
    const AdmissibilityReport rep = check_admissible(ext, *cs_, inv, feasibility_tol_);
    if (!rep.admissible) {
        throw InitializationError("governor initialization: (x0, v0) inadmissible at step " +
                                  std::to_string(rep.step) + " (" + rep.constraint + ")");
    }

    state_.stored_tail = mpc_inputs;
    last_solution_ = mpc_inputs;
    if (state_.v_dir.norm() == 0.0 && strategy_) {
        state_.s = 1.0;
    }
}

InvariantSet Governor::terminal_set(const SteadyStatePoint& ss) const {
    try {
        return family_.at(ss);
    } catch (const DegenerateSetError&) {
        // Boundary-touching centers get a level-zero set; the membership test
        // still carries the feasibility slack.
        InvariantSet set;
        set.center = ss.x_ss;
        set.shape = family_.shape();
        set.level = 0.0;
        return set;
    }
}

ReferenceProposal Governor::propose(int k) const {
    if (strategy_) {
        return strategy_(state_, rg_cfg_, k);
    }
    ReferenceProposal prop;
    prop.kappa = select_kappa_algorithm2(rg_cfg_, k, state_.k_prime, state_.s);
    if (state_.s + prop.kappa >= 1.0) {
        prop.v_plus = state_.r;  // the clamped increment lands exactly on r
    } else {
        prop.v_plus = state_.v_prev + prop.kappa * state_.v_dir;
    }
    return prop;
}

double Governor::progress_after(const Vector& v) const {
    if (!strategy_) return state_.s;  // maintained as the kappa sum
    const double total = (state_.r - state_.v0).norm();
    if (total == 0.0 || (v.array() == state_.r.array()).all()) return 1.0;
    return 1.0 - (state_.r - v).norm() / total;
}

GovernorStepResult Governor::step(const Vector& x, int k) {
    GovernorStepResult out;
    const ReferenceProposal prop = propose(k);
    bool clamped = false;
    if (!strategy_) {
        const int since = k - state_.k_prime;
        const double raw = (since <= rg_cfg_.grace_steps)
                               ? rg_cfg_.kappa0
                               : rg_cfg_.kappa0 / static_cast<double>(since - rg_cfg_.grace_steps);
        clamped = state_.s + raw > 1.0;
    }

    bool admissible = false;
    SteadyStatePoint ss_plus;
    ExtendedSequence ext;
    InvariantSet inv;
    try {
        ss_plus = steady_state(plant_, *cs_, prop.v_plus);
        std::vector<Vector> mpc_inputs;
        if (use_mpc_segment_) {
            Vector warm(mpc_cfg_.horizon * plant_.m);
            for (int i = 0; i < mpc_cfg_.horizon; ++i) {
                const Vector& src = (i + 1 < static_cast<int>(last_solution_.size()))
                                        ? last_solution_[i + 1]
                                        : ss_plus.u_ss;
                warm.segment(i * plant_.m, plant_.m) = src;
            }
            qp_.set_target(x, ss_plus);
            InputSequence seq = solve_umpc(qp_, cs_->input_set(), mpc_cfg_, &warm);
            out.qp = seq.diagnostics;
            mpc_inputs = std::move(seq.inputs);
        }
        ext = extend_sequence(plant_, mpc_inputs, x, ss_plus, mpc_cfg_.K,
                              rg_cfg_.horizon, cs_->input_set());
        inv = terminal_set(ss_plus);
        out.invariant_level = inv.level;
        out.admissibility = check_admissible(ext, *cs_, inv, feasibility_tol_);
        admissible = out.admissibility.admissible;
        if (use_mpc_segment_) {
            last_solution_.assign(ext.inputs.begin(),
                                  ext.inputs.begin() + mpc_cfg_.horizon);
        }
    } catch (const InfeasibleReferenceError&) {
        admissible = false;
        out.admissibility.admissible = false;
        out.admissibility.constraint = "infeasible-reference";
    }

    if (admissible) {
        out.branch = GovernorBranch::Advance;
        out.kappa = prop.kappa;
        state_.v_prev = prop.v_plus;
        state_.k_prime = k;
        if (use_mpc_segment_) {
            state_.stored_tail.assign(ext.inputs.begin(),
                                      ext.inputs.begin() + mpc_cfg_.horizon);
        }
        state_.kappa_history.push_back(prop.kappa);
        if (!strategy_) {
            state_.s = clamped ? 1.0 : state_.s + prop.kappa;
        } else {
            state_.s = progress_after(state_.v_prev);
        }
        out.u = ext.inputs.front();
    } else {
        out.kappa = 0.0;
        state_.kappa_history.push_back(0.0);
        const int since = k - state_.k_prime;
        if (use_mpc_segment_ && since < static_cast<int>(state_.stored_tail.size())) {
            out.branch = GovernorBranch::Replay;
            out.u = state_.stored_tail[since];
        } else {
            out.branch = GovernorBranch::LqrFallback;
            const SteadyStatePoint ss_hold = steady_state(plant_, *cs_, state_.v_prev);
            out.u = cs_->input_set().project(
                -mpc_cfg_.K * (x - ss_hold.x_ss) + ss_hold.u_ss);
        }
    }
    out.s = state_.s;
    out.v = state_.v_prev;
    return out;
}

}  // namespace rgmpc
