#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "tdks/energy.hpp"
#include "tdks/galerkin.hpp"
#include "tdks/potentials.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

// ---------------------------------------------------------------------------
// certified constants of the fixed-point argument
// ---------------------------------------------------------------------------

// Structural constants of the nonlinearity entering the invariance and
// contraction formulas; measured (lipschitz_probe) or declared, with the
// provenance recorded in every report.
struct NonlinearityConstants {
    double C_b = 0.0;      // || f(P) ||_{H2} <= C_b |P|_{H1}^2 |P|_{H2}
    double C_c = 0.0;      // H2 Lipschitz factor of the Hartree term
    double K_tilde = 0.0;  // H2 Lipschitz constant of the xc term
    std::string provenance = "unset";
};

struct BallSpec {
    double B0 = 1.0;
    double T_ref = 0.0;
    double C_ring = 0.0;
    double T_hat = 0.0;
};

// Formula layer over abstract constants; the struct overloads below wire in
// the Theorem-3.1 values.

// C_ring(T, B0) = exp(C_1d T) [ B0 + ||Delta Psi0||^2 + T C_2d ||grad Psi0||^2 ]
inline double ball_radius_raw(double B0, double T_ref, double C_1d, double C_2d, double dpsi0_sq,
                              double gpsi0_sq) {
    return std::exp(C_1d * T_ref) * (B0 + dpsi0_sq + T_ref * C_2d * gpsi0_sq);
}

// T* = min(T, B0 / (C_3d [C_b C_Z^3 C_ring^3 + K~ C_Z C_ring]^2))
inline double invariance_bound_raw(double B0, double T, double C_3d, double C_b, double C_Z,
                                   double K_tilde, double C_ring) {
    const double d = C_b * C_Z * C_Z * C_Z * C_ring * C_ring * C_ring + K_tilde * C_Z * C_ring;
    if (d == 0.0) return T;
    return std::min(T, B0 / (C_3d * d * d));
}

// g(T^) = C_Z (K~ + 2 C_c C_ring) sqrt(exp(C_1d T^) T^ C_3d)
inline double contraction_factor_raw(double T_hat, double C_Z, double K_tilde, double C_c,
                                     double C_ring, double C_1d, double C_3d) {
    if (T_hat == 0.0) return 0.0;
    return C_Z * (K_tilde + 2.0 * C_c * C_ring) *
           std::sqrt(std::exp(C_1d * T_hat) * T_hat * C_3d);
}

inline double ball_radius(double B0, double T_ref, double dpsi0_sq, double gpsi0_sq,
                          const EstimateConstants& c) {
    return ball_radius_raw(B0, T_ref, c.c_1d(), c.c_2d(T_ref), dpsi0_sq, gpsi0_sq);
}

inline double invariance_bound(double B0, double T, const EstimateConstants& c,
                               const NonlinearityConstants& nl, double C_ring) {
    return invariance_bound_raw(B0, T, c.c_3d(T), nl.C_b, c.C_Z, nl.K_tilde, C_ring);
}

inline double contraction_factor(double T_hat, const EstimateConstants& c,
                                 const NonlinearityConstants& nl, double C_ring) {
    return contraction_factor_raw(T_hat, c.C_Z, nl.K_tilde, nl.C_c, C_ring, c.c_1d(),
                                  c.c_3d(T_hat));
}

// ---------------------------------------------------------------------------
// problem context
// ---------------------------------------------------------------------------

struct ProblemSpec {
    std::shared_ptr<const Basis> basis;
    PotentialSpec potentials;
    XcModel xc = XcModel::none();        // smooth-path model (A5 contract)
    XcModel rough_xc = XcModel::none();  // rough-path model (A5b contract)
    bool hartree_on = true;
};

// Assembled, immutable context for the auxiliary solves.
struct TdksProblem {
    ProblemSpec spec;
    OdeSystem sys;
    std::shared_ptr<const HartreeOperator> hartree;  // null when hartree off
    std::shared_ptr<const Mollifier> mollifier;      // set on the regularized path
    std::optional<double> eps;

    const BoxDomain& domain() const { return spec.basis->domain(); }
    int order() const { return spec.basis->order(); }
    bool nonlinear() const {
        return (spec.hartree_on && hartree) || spec.xc.enabled() ||
               (eps && spec.rough_xc.enabled());
    }

    // frozen nonlinearity: F(c) = P[(V_H + V_xc)(c) c] + P[phi_eps * (W_xc(c) c)]
    Eigen::VectorXcd frozen_rhs(const Eigen::VectorXcd& coeffs) const {
        const auto& basis = *spec.basis;
        Eigen::VectorXcd out = Eigen::VectorXcd::Zero(coeffs.size());
        if (!nonlinear()) return out;
        const Eigen::ArrayXcd psi = basis.synthesize(coeffs);
        const Eigen::ArrayXd rho = psi.abs2();
        Eigen::ArrayXd v = Eigen::ArrayXd::Zero(rho.size());
        bool have_v = false;
        if (spec.hartree_on && hartree) {
            v += hartree->apply_density(rho).values;
            have_v = true;
        }
        if (spec.xc.enabled()) {
            v += spec.xc.evaluate(rho);
            have_v = true;
        }
        if (have_v) out += basis.project(v * psi);
        if (eps && spec.rough_xc.enabled()) {
            const Eigen::ArrayXcd wxc = spec.rough_xc.evaluate(rho) * psi;
            out += basis.project(mollifier->apply(wxc));
        }
        return out;
    }

    // || V_eps(Psi(t), t) || on the grid, for the EN_5_eps exact check
    double v_eps_norm(double t, const Eigen::VectorXcd& coeffs) const {
        const auto& basis = *spec.basis;
        const auto& dom = domain();
        const Eigen::ArrayXcd psi = basis.synthesize(coeffs);
        Eigen::ArrayXcd acc = spec.potentials.eval_V(t) * psi;
        if (eps) {
            if (spec.potentials.has_rough)
                acc += mollifier->apply(Eigen::ArrayXcd(spec.potentials.eval_W(t) * psi));
            if (spec.rough_xc.enabled())
                acc += mollifier->apply(Eigen::ArrayXcd(spec.rough_xc.evaluate(psi.abs2()) * psi));
        }
        return grid_norm(dom, acc);
    }
};

inline TdksProblem make_problem(const ProblemSpec& spec, std::optional<double> eps = std::nullopt) {
    TdksProblem p;
    p.spec = spec;
    AssembleOptions opts;
    if (eps) {
        if (!spec.potentials.has_rough && !spec.rough_xc.enabled())
            throw std::invalid_argument("make_problem: eps set but no rough terms configured");
        if (spec.potentials.has_rough) opts.mollify_rough = eps;
        p.mollifier = std::make_shared<Mollifier>(spec.basis->domain(), *eps);
        p.eps = eps;
    }
    p.sys = assemble(spec.basis, spec.potentials, opts);
    if (spec.hartree_on)
        p.hartree = std::make_shared<HartreeOperator>(spec.basis->domain(),
                                                      spec.potentials.softening);
    return p;
}

// ---------------------------------------------------------------------------
// the contraction map A
// ---------------------------------------------------------------------------

// A(Lambda): solve the auxiliary problem with the nonlinearity frozen at
// Lambda. The source is evaluated at the Crank-Nicolson midpoint state
// (average of adjacent Lambda samples), which keeps the discrete
// imaginary-part identity exact at the fixed point.
inline Trajectory apply_A(const TdksProblem& p, const Trajectory& lam,
                          const Eigen::VectorXcd& psi0, double t0, double t1, double dt,
                          const IntegrateOptions& iopts = {}) {
    dt = std::min(dt, t1 - t0);  // remainder subintervals can undercut dt
    MidpointSource src;
    if (p.nonlinear())
        src = [&p, &lam](double lo, double hi) {
            return p.frozen_rhs(lam.sample(0.5 * (lo + hi)));
        };
    return integrate_linear(p.sys, psi0, t0, t1, dt, src, iopts);
}

inline Trajectory constant_trajectory(const TdksProblem& p, const Eigen::VectorXcd& psi0,
                                      double t0, double t1, double dt) {
    dt = std::min(dt, t1 - t0);
    Trajectory traj;
    traj.basis = p.spec.basis;
    traj.times = build_time_grid(t0, t1, dt, p.spec.potentials.breakpoints_within(t0, t1));
    traj.states.assign(traj.times.size(), psi0);
    traj.meta = {"constant", dt, p.order(), 0};
    return traj;
}

// ---------------------------------------------------------------------------
// Picard iteration
// ---------------------------------------------------------------------------

struct PicardLog {
    std::vector<double> diffs;   // sup_t H2 distance between successive iterates
    std::vector<double> ratios;  // diffs[i] / diffs[i-1]
    int iterations = 0;
    bool converged = false;
    bool certified = true;  // g(T_hat) < 1 was established by the caller
};

class PicardNonConvergence : public std::runtime_error {
public:
    PicardNonConvergence(std::string msg, PicardLog lg)
        : std::runtime_error(std::move(msg)), log(std::move(lg)) {}
    PicardLog log;
};

struct PicardOptions {
    double tol = 1e-10;
    int max_iter = 40;
    bool certified = true;  // flag recorded in the log; callers may override
    std::uint64_t config_hash = 0;
};

// Iterates Lambda_{n+1} = A(Lambda_n) from the constant-in-time initial state
// until sup_t || Lambda_{n+1} - Lambda_n ||_{H2} < tol.
inline std::pair<Trajectory, PicardLog> picard_solve(const TdksProblem& p,
                                                     const Eigen::VectorXcd& psi0, double t0,
                                                     double t1, double dt,
                                                     const PicardOptions& opts = {}) {
    IntegrateOptions iopts;
    iopts.config_hash = opts.config_hash;
    PicardLog log;
    log.certified = opts.certified;
    Trajectory lam = constant_trajectory(p, psi0, t0, t1, dt);
    Trajectory cur = apply_A(p, lam, psi0, t0, t1, dt, iopts);
    if (!p.nonlinear()) {  // A is constant in Lambda: one solve is the fixed point
        log.iterations = 1;
        log.converged = true;
        log.diffs.push_back(0.0);
        return {std::move(cur), std::move(log)};
    }
    for (int it = 1; it <= opts.max_iter; ++it) {
        Trajectory next = apply_A(p, cur, psi0, t0, t1, dt, iopts);
        const double diff = sup_h2_distance(next, cur);
        log.diffs.push_back(diff);
        if (log.diffs.size() >= 2 && log.diffs[log.diffs.size() - 2] > 0.0)
            log.ratios.push_back(diff / log.diffs[log.diffs.size() - 2]);
        log.iterations = it;
        cur = std::move(next);
        if (diff < opts.tol) {
            log.converged = true;
            return {std::move(cur), std::move(log)};
        }
    }
    std::string msg = "picard_solve: no convergence in " + std::to_string(opts.max_iter) +
                      " iterations on [" + std::to_string(t0) + ", " + std::to_string(t1) +
                      "]; ratios:";
    for (double r : log.ratios) msg += " " + std::to_string(r);
    throw PicardNonConvergence(msg, log);
}

// ---------------------------------------------------------------------------
// covering schedule (Theorem 4.1, Step 3)
// ---------------------------------------------------------------------------

struct SchedulePolicy {
    double B = 1.0;  // global bound on B0_k
    double c = 1.0;  // B0_k = min(B, c T^d_k)
    int max_halvings = 60;
};

struct ScheduleState {
    int k = 0;
    double a_prev = 1.0;        // floored a_{k-1} feeding the b_k rule
    double b_k = 0.0;           // 1 / (k a_{k-1}^3)
    double Td_raw = 0.0;        // b_k / C_1d, before halving
    int halvings = 0;
    double Td = 0.0;            // emitted length (halved, snapped, clipped)
    bool snapped = false;
    bool clipped = false;
    bool floored = false;       // raised to one grid step
    double B0k = 0.0;
    double C_ring_k = 0.0;      // C_ring(Td, B0k) with a_prev as the data norm
    double g_k = 0.0;           // contraction factor at Td
    double invariance_T_star = 0.0;  // cond_T-style horizon, reported not enforced
    double a_observed = 0.0;    // ||Psi(end)||_Z^2 measured after the solve
    double t_start = 0.0;
    long steps = 0;
};

namespace detail {

inline double schedule_c_ring(double Td, double B0k, double a_prev,
                              const EstimateConstants& c) {
    return std::exp(c.c_1d() * Td) * (B0k + a_prev * (1.0 + Td * c.c_2d(Td)));
}

}  // namespace detail

// Incremental schedule generation over a fixed global time grid. The caller
// solves each proposed subinterval and commits the observed Z^2 norm.
class ScheduleBuilder {
public:
    ScheduleBuilder(std::vector<double> grid, double a0, const EstimateConstants& c,
                    const NonlinearityConstants& nl, SchedulePolicy pol = {})
        : grid_(std::move(grid)), consts_(c), nl_(nl), pol_(pol) {
        if (grid_.size() < 2) throw std::invalid_argument("ScheduleBuilder: empty grid");
        a_ = std::max(1.0, a0);
    }

    bool done() const { return cursor_ + 1 >= grid_.size(); }

    ScheduleState propose() {
        if (done()) throw std::logic_error("ScheduleBuilder: schedule already covers T");
        ScheduleState st;
        st.k = k_;
        st.a_prev = a_;
        st.b_k = 1.0 / (double(k_) * a_ * a_ * a_);
        st.Td_raw = st.b_k / consts_.c_1d();
        st.t_start = grid_[cursor_];

        double td = st.Td_raw;
        auto g_of = [&](double T) {
            const double b0 = std::min(pol_.B, pol_.c * T);
            return contraction_factor(T, consts_, nl_,
                                      detail::schedule_c_ring(T, b0, a_, consts_));
        };
        int halvings = 0;
        while (g_of(td) >= 1.0) {
            td *= 0.5;
            if (++halvings > pol_.max_halvings)
                throw std::runtime_error(
                    "covering_schedule: halving did not reach g < 1 "
                    "(constants too pessimistic for this problem)");
        }
        st.halvings = halvings;

        // snap down to whole grid steps (at least one)
        long steps = 0;
        while (cursor_ + std::size_t(steps) + 1 < grid_.size() &&
               grid_[cursor_ + std::size_t(steps) + 1] - grid_[cursor_] <= td * (1.0 + 1e-12))
            ++steps;
        if (steps == 0) {
            steps = 1;
            st.floored = true;
        }
        const double td_snapped = grid_[cursor_ + std::size_t(steps)] - grid_[cursor_];
        st.snapped = td_snapped != td;
        st.clipped = cursor_ + std::size_t(steps) + 1 > grid_.size() - 1 &&
                     td > grid_.back() - grid_[cursor_];
        td = td_snapped;
        if (td < 1e-12)
            throw std::runtime_error("covering_schedule: subinterval length underflow");
        if (st.floored && g_of(td) >= 1.0)
            throw std::runtime_error(
                "covering_schedule: certified length below one grid step "
                "(constants too pessimistic for this grid)");
        st.Td = td;
        st.steps = steps;
        st.B0k = std::min(pol_.B, pol_.c * td);
        st.C_ring_k = detail::schedule_c_ring(td, st.B0k, a_, consts_);
        st.g_k = g_of(td);
        st.invariance_T_star = invariance_bound(st.B0k, td, consts_, nl_, st.C_ring_k);
        return st;
    }

    void commit(ScheduleState st, double a_observed) {
        st.a_observed = a_observed;
        rows_.push_back(st);
        cursor_ += std::size_t(st.steps);
        a_ = std::max(1.0, a_observed);
        ++k_;
    }

    const std::vector<double>& grid() const { return grid_; }
    std::size_t cursor() const { return cursor_; }
    const std::vector<ScheduleState>& rows() const { return rows_; }

private:
    std::vector<double> grid_;
    EstimateConstants consts_;
    NonlinearityConstants nl_;
    SchedulePolicy pol_;
    double a_ = 1.0;
    int k_ = 1;
    std::size_t cursor_ = 0;
    std::vector<ScheduleState> rows_;
};

// Standalone schedule: the a_k update is supplied by the caller (a solver, a
// trajectory replay, or a constant for studies).
inline std::vector<ScheduleState> covering_schedule(
    double T, double dt, const std::vector<double>& breakpoints, double a0,
    const EstimateConstants& c, const NonlinearityConstants& nl, SchedulePolicy pol,
    const std::function<double(const ScheduleState&)>& a_supplier) {
    ScheduleBuilder b(build_time_grid(0.0, T, dt, breakpoints), a0, c, nl, pol);
    while (!b.done()) {
        ScheduleState st = b.propose();
        b.commit(st, a_supplier(st));
    }
    return b.rows();
}

// ---------------------------------------------------------------------------
// the full solve
// ---------------------------------------------------------------------------

struct SolveOptions {
    double t0 = 0.0;
    double T = 1.0;   // horizon length; the solve covers [t0, t0 + T]
    double dt = 1e-3;
    double tol = 1e-10;
    int max_iter = 40;
    enum class Mode { certified, practical } mode = Mode::certified;
    double practical_target = 0.5;  // largest dyadic step with measured ratio below this
    SchedulePolicy policy;
    std::uint64_t config_hash = 0;
    bool run_estimates = true;
};

struct SubintervalRecord {
    ScheduleState schedule;
    PicardLog picard;
    EstimateReport estimates;
};

struct NoEpsTriple {
    double sup_l2 = 0.0;       // max_t ||Psi(t)||
    double sup_grad = 0.0;     // max_t ||grad Psi(t)||
    double sup_dt_hm1 = 0.0;   // max_t ||dPsi/dt||_{H^-1}
};

struct SolveReport {
    Trajectory trajectory;
    std::vector<SubintervalRecord> subintervals;
    std::vector<ScheduleState> certified_schedule;  // practical mode: replayed plan
    EstimateConstants consts;
    NonlinearityConstants nl;
    bool certified = false;
    bool estimates_pass = true;
    double norm_drift = 0.0;
    NoEpsTriple observed;           // eps runs: the eq:no_eps_bounds triple
    RoughInitialNorms rough_initial;  // eps runs
    bool regularized = false;
    double eps = 0.0;
};

namespace detail {

// F(Psi) sampled on the subinterval grid of a solved trajectory, as the G
// datum of the estimate checks
inline Trajectory frozen_source_along(const TdksProblem& p, const Trajectory& traj) {
    Trajectory g;
    g.basis = traj.basis;
    g.times = traj.times;
    g.states.reserve(traj.states.size());
    for (const auto& s : traj.states) g.states.push_back(p.frozen_rhs(s));
    g.meta = traj.meta;
    g.meta.integrator = "frozen-source";
    return g;
}

inline void append_subtrajectory(Trajectory& whole, const Trajectory& piece) {
    if (whole.times.empty()) {
        whole = piece;
        return;
    }
    for (std::size_t i = 1; i < piece.times.size(); ++i) {
        whole.times.push_back(piece.times[i]);
        whole.states.push_back(piece.states[i]);
    }
}

inline double observed_triple_update(SolveReport& rep, const Trajectory& traj) {
    const auto deriv = detail::time_derivatives(traj);
    double drift = 0.0;
    const double n0 = rep.trajectory.states.front().norm();
    for (std::size_t i = 0; i < traj.states.size(); ++i) {
        const NormReport n = norms(SpectralField(traj.basis, traj.states[i]));
        rep.observed.sup_l2 = std::max(rep.observed.sup_l2, n.l2);
        rep.observed.sup_grad = std::max(rep.observed.sup_grad, n.grad);
        const NormReport nd = norms(SpectralField(traj.basis, deriv[i]));
        rep.observed.sup_dt_hm1 = std::max(rep.observed.sup_dt_hm1, nd.h_minus1);
        drift = std::max(drift, std::abs(n.l2 - n0));
    }
    return drift;
}

}  // namespace detail

// Theorem-4.1 pipeline: covering schedule, Picard on each subinterval with the
// previous endpoint as initial state, concatenation, estimate checks. The
// rough norms are supplied by the regularized pipeline for the eps-labelled
// checks.
inline SolveReport solve_tdks(const TdksProblem& p, const SpectralField& psi0,
                              const SolveOptions& opts,
                              const EstimateConstants& consts_in,
                              const NonlinearityConstants& nl,
                              std::optional<RoughInitialNorms> rough = std::nullopt) {
    if (psi0.basis->order() != p.order())
        throw std::invalid_argument("solve_tdks: initial state order mismatch");
    if (p.eps && !rough)
        throw std::invalid_argument("solve_tdks: regularized problem needs rough initial norms");
    SolveReport rep;
    rep.consts = consts_in;
    rep.nl = nl;
    rep.certified = opts.mode == SolveOptions::Mode::certified;
    if (rough) rep.rough_initial = *rough;
    rep.regularized = p.eps.has_value();
    if (p.eps) rep.eps = *p.eps;

    const std::vector<double> grid = build_time_grid(
        opts.t0, opts.t0 + opts.T, opts.dt,
        p.spec.potentials.breakpoints_within(opts.t0, opts.t0 + opts.T));
    const NormReport n0 = norms(psi0);
    ScheduleBuilder builder(grid, n0.lap * n0.lap, rep.consts, nl, opts.policy);

    PicardOptions popts;
    popts.tol = opts.tol;
    popts.max_iter = opts.max_iter;
    popts.config_hash = opts.config_hash;

    Eigen::VectorXcd state = psi0.coeffs;
    rep.trajectory.basis = p.spec.basis;
    rep.trajectory.meta = {"picard-crank-nicolson", opts.dt, p.order(), opts.config_hash};
    rep.trajectory.times.push_back(opts.t0);
    rep.trajectory.states.push_back(state);

    if (opts.mode == SolveOptions::Mode::certified) {
        while (!builder.done()) {
            ScheduleState st = builder.propose();
            const double t0 = grid[builder.cursor()];
            const double t1 = grid[builder.cursor() + std::size_t(st.steps)];
            popts.certified = st.g_k < 1.0;
            auto [traj, log] = picard_solve(p, state, t0, t1, opts.dt, popts);
            SubintervalRecord rec;
            rec.picard = log;
            if (opts.run_estimates) {
                const Trajectory g = detail::frozen_source_along(p, traj);
                CheckOptions copts;
                EstimateVariant variant = EstimateVariant::plain;
                if (p.eps) {
                    variant = EstimateVariant::epsilon;
                    copts.rough_initial = rep.rough_initial;
                    copts.v_eps_norm = [&p](double t, const Eigen::VectorXcd& s) {
                        return p.v_eps_norm(t, s);
                    };
                }
                rec.estimates = check_estimates(traj, &g, SpectralField(p.spec.basis, state),
                                                rep.consts, variant, copts);
                rep.estimates_pass = rep.estimates_pass && rec.estimates.all_pass;
            }
            state = traj.endpoint();
            const NormReport ne = norms(SpectralField(p.spec.basis, state));
            builder.commit(st, ne.lap * ne.lap);
            rec.schedule = builder.rows().back();
            detail::append_subtrajectory(rep.trajectory, traj);
            rep.subintervals.push_back(std::move(rec));
        }
        rep.certified_schedule = builder.rows();
    } else {
        // practical mode: largest dyadic chunk whose measured contraction
        // ratio stays below the target
        std::size_t cursor = 0;
        while (cursor + 1 < grid.size()) {
            long steps = long(grid.size() - 1 - cursor);
            for (;;) {
                const double t0 = grid[cursor];
                const double t1 = grid[cursor + std::size_t(steps)];
                popts.certified = false;
                bool ok = true;
                std::pair<Trajectory, PicardLog> result;
                try {
                    result = picard_solve(p, state, t0, t1, opts.dt, popts);
                    for (double r : result.second.ratios)
                        ok = ok && r < opts.practical_target;
                } catch (const PicardNonConvergence&) {
                    ok = false;
                }
                if (ok) {
                    SubintervalRecord rec;
                    rec.picard = result.second;
                    rec.schedule.k = int(rep.subintervals.size()) + 1;
                    rec.schedule.t_start = t0;
                    rec.schedule.Td = t1 - t0;
                    rec.schedule.steps = steps;
                    if (opts.run_estimates) {
                        const Trajectory g = detail::frozen_source_along(p, result.first);
                        CheckOptions copts;
                        EstimateVariant variant = EstimateVariant::plain;
                        if (p.eps) {
                            variant = EstimateVariant::epsilon;
                            copts.rough_initial = rep.rough_initial;
                            copts.v_eps_norm = [&p](double t, const Eigen::VectorXcd& s) {
                                return p.v_eps_norm(t, s);
                            };
                        }
                        rec.estimates =
                            check_estimates(result.first, &g, SpectralField(p.spec.basis, state),
                                            rep.consts, variant, copts);
                        rep.estimates_pass = rep.estimates_pass && rec.estimates.all_pass;
                    }
                    state = result.first.endpoint();
                    detail::append_subtrajectory(rep.trajectory, result.first);
                    rep.subintervals.push_back(std::move(rec));
                    cursor += std::size_t(steps);
                    break;
                }
                if (steps == 1)
                    throw std::runtime_error(
                        "solve_tdks: practical mode cannot certify even one step");
                steps = (steps + 1) / 2;
            }
        }
        // record the certified plan alongside, replayed against the solution
        ScheduleBuilder replay(grid, n0.lap * n0.lap, rep.consts, nl, opts.policy);
        while (!replay.done()) {
            ScheduleState st = replay.propose();
            const double t_end = replay.grid()[replay.cursor() + std::size_t(st.steps)];
            const NormReport ne =
                norms(SpectralField(p.spec.basis, rep.trajectory.sample(t_end)));
            replay.commit(st, ne.lap * ne.lap);
        }
        rep.certified_schedule = replay.rows();
    }

    rep.norm_drift = detail::observed_triple_update(rep, rep.trajectory);
    return rep;
}

// Rough-data pipeline (Theorems 5.2-5.3): mollify the initial datum, assemble
// the mollified rough operators, then run the fixed-point solve with the
// epsilon-labelled estimate checks.
inline SolveReport solve_regularized(const ProblemSpec& spec,
                                     const Eigen::ArrayXcd& rough_psi0_grid, double eps,
                                     const SolveOptions& opts,
                                     const NonlinearityConstants& nl) {
    TdksProblem p = make_problem(spec, eps);

    // rough-data norms (grid L2, spectral gradient of the projection),
    // entering the eps-labelled bounds
    SpectralField rough_proj = project(rough_psi0_grid, spec.basis);
    const NormReport nr = norms(rough_proj);
    RoughInitialNorms rough{nr.l2, nr.grad, nr.h1};

    const Eigen::ArrayXcd smooth0 = p.mollifier->apply(rough_psi0_grid);
    SpectralField psi0 = project(smooth0, spec.basis);

    EstimateConstants consts = constants(spec.potentials, opts.T, spec.basis->domain(),
                                         MollifierSpec{eps}, spec.rough_xc);
    return solve_tdks(p, psi0, opts, consts, nl, rough);
}

}  // namespace tdks
