#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdks/galerkin.hpp"
#include "tdks/potentials.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

inline double poincare_constant(const BoxDomain& dom) {
    return 1.0 / std::sqrt(mode_eigenvalue(dom, ModeIndex{{1, 1, 1}}));
}

// Continuity constants of the mollification estimates. Zero-extension is an
// isometry on H^1_0, so the defaults are analytic; config may override and
// the epsilon study reports observed quotients for re-fitting.
struct MollificationConstants {
    double C0 = 1.0;
    double C1 = 1.0;
    double C2 = 1.0;  // set to sqrt(dim) by constants()
    double C3 = 1.0;
    double C4 = std::sqrt(2.0);
    double C5 = 3.0;
};

// Every explicit constant of the energy estimates, plus the ingredients
// needed to re-evaluate the horizon-dependent ones at any sub-horizon.
struct EstimateConstants {
    // ingredients
    double T = 0.0;
    double C_PF = 0.0;
    double C_Z = 0.0;
    double v_sup = 0.0, v_grad_sup = 0.0, v_lap_sup = 0.0, v_w1 = 0.0, v_w2 = 0.0;
    double w_sup = 0.0, w_w1 = 0.0;
    double K1 = 0.0, K2 = 0.0;  // rough xc contract constants
    MollificationConstants moll;
    double phi1_l1 = 0.0;          // mollifier mass (zero when no mollifier)
    double grad_phi_eps_l1 = 0.0;  // eps-dependent
    double epsilon = 0.0;
    bool has_mollifier = false;

    // cached values at the configured horizon T
    double C_grad = 0.0;     // C_nabla
    double C_1d = 0.0;       // C_{1,Delta}
    double C_2d = 0.0;       // C_{2,Delta}(T)
    double C_3d = 0.0;       // C_{3,Delta}(T)
    double C_hat = 0.0;      // eps-independent L2 growth rate
    double C_hat_grad = 0.0; // eps-independent H1 growth rate
    double C_eps = 0.0;      // eps-dependent Delta growth rate

    // surrogates filled by check_estimates (NaN until a check runs)
    double k_minus_1 = std::numeric_limits<double>::quiet_NaN();
    double k_minus_2 = std::numeric_limits<double>::quiet_NaN();

    double c_grad() const {
        return 2.0 * (1.0 + v_sup * v_sup + C_PF * C_PF * v_grad_sup * v_grad_sup);
    }
    double c_1d() const { return 2.0 + 2.0 * v_sup; }
    double grad_lap_term() const {
        return 8.0 * v_grad_sup * v_grad_sup + 2.0 * C_PF * C_PF * v_lap_sup * v_lap_sup;
    }
    double c_2d(double horizon) const { return grad_lap_term() * std::exp(c_grad() * horizon); }
    double c_3d(double horizon) const { return 1.0 + horizon * c_2d(horizon); }

    double c_hat() const {
        const double a = moll.C3 * (v_sup + phi1_l1 * (w_sup + K1));
        return a * a + 2.0;
    }
    double c_hat_grad() const {
        const double a = moll.C4 * (v_w1 + phi1_l1 * (w_w1 + K2));
        return 2.0 + a * a * (1.0 + C_PF * C_PF);
    }
    double c_eps() const {
        const double a = moll.C5 * (v_w2 + grad_phi_eps_l1 * (w_w1 + K2));
        return 2.0 + a * a * C_Z * C_Z;
    }
};

// Deterministic evaluation of every constant formula from the cached
// potential sup-norms. The rough xc model supplies K1/K2 when present.
inline EstimateConstants constants(const PotentialSpec& pot, double T, const BoxDomain& dom,
                                   std::optional<MollifierSpec> mollifier = std::nullopt,
                                   const XcModel& rough_xc = XcModel::none(),
                                   std::optional<MollificationConstants> moll_override =
                                       std::nullopt) {
    if (!(T > 0.0)) throw std::invalid_argument("constants: horizon T must be positive");
    if (!std::isfinite(pot.V_w2) || !std::isfinite(pot.W_w1))
        throw std::invalid_argument("constants: potential norm cache missing");
    EstimateConstants c;
    c.T = T;
    c.C_PF = poincare_constant(dom);
    c.C_Z = z_equivalence_constant(dom);
    c.v_sup = pot.V_sup;
    c.v_grad_sup = pot.V_grad_sup;
    c.v_lap_sup = pot.V_lap_sup;
    c.v_w1 = pot.V_w1;
    c.v_w2 = pot.V_w2;
    c.w_sup = pot.W_sup;
    c.w_w1 = pot.W_w1;
    c.K1 = rough_xc.K1;
    c.K2 = rough_xc.K2;
    c.moll = moll_override.value_or(MollificationConstants{});
    if (!moll_override) c.moll.C2 = std::sqrt(double(dom.dim));
    if (mollifier) {
        const MollifierNorms mn = mollifier_norms(dom.dim, *mollifier);
        c.phi1_l1 = mn.phi1_l1;
        c.grad_phi_eps_l1 = mn.grad_phi_eps_l1;
        c.epsilon = mollifier->epsilon;
        c.has_mollifier = true;
        c.C_hat = c.c_hat();
        c.C_hat_grad = c.c_hat_grad();
        c.C_eps = c.c_eps();
    }
    c.C_grad = c.c_grad();
    c.C_1d = c.c_1d();
    c.C_2d = c.c_2d(T);
    c.C_3d = c.c_3d(T);
    return c;
}

// ---------------------------------------------------------------------------
// estimate verification along trajectories
// ---------------------------------------------------------------------------

enum class EstimateVariant { plain, epsilon };

struct EstimateRow {
    std::string id;
    double observed = 0.0;   // worst left side over sampled times
    double bound = 0.0;      // right side at the worst sample
    double margin = 0.0;     // bound - observed
    double slack = 0.0;      // added finite-difference tolerance
    double worst_time = 0.0;
    bool pass = false;
    bool fallback_bound = false;  // EN_5_eps without the exact V_eps evaluator
};

struct EstimateReport {
    std::vector<EstimateRow> rows;
    bool all_pass = true;
    double k_minus_1 = 0.0;
    double k_minus_2 = 0.0;

    const EstimateRow& row(const std::string& id) const {
        for (const auto& r : rows)
            if (r.id == id) return r;
        throw std::out_of_range("EstimateReport: no row " + id);
    }
};

struct RoughInitialNorms {
    double l2 = 0.0;
    double grad = 0.0;
    double h1 = 0.0;
};

struct CheckOptions {
    std::optional<RoughInitialNorms> rough_initial;  // required for the epsilon variant
    // exact || V_eps(Psi(t)) || when the pipeline machinery is available
    std::function<double(double, const Eigen::VectorXcd&)> v_eps_norm;
    double rel_tol = 1e-9;
};

namespace detail {

struct SourceNorms {
    double y_inf_0 = 0.0;  // sup_t L2
    double y_inf_1 = 0.0;  // sup_t H1
    double y_hat = 0.0;    // sup_t H2
};

inline SourceNorms source_norms(const Trajectory* G, const std::shared_ptr<const Basis>& basis) {
    SourceNorms s;
    if (!G) return s;
    for (const auto& c : G->states) {
        const NormReport n = norms(SpectralField(basis, c));
        s.y_inf_0 = std::max(s.y_inf_0, n.l2);
        s.y_inf_1 = std::max(s.y_inf_1, n.h1);
        s.y_hat = std::max(s.y_hat, n.h2);
    }
    return s;
}

// difference quotients at stored samples, central inside, one-sided at ends
inline std::vector<Eigen::VectorXcd> time_derivatives(const Trajectory& t) {
    const std::size_t n = t.times.size();
    std::vector<Eigen::VectorXcd> d(n);
    if (n == 1) {
        d[0] = Eigen::VectorXcd::Zero(t.states[0].size());
        return d;
    }
    d[0] = (t.states[1] - t.states[0]) / (t.times[1] - t.times[0]);
    d[n - 1] = (t.states[n - 1] - t.states[n - 2]) / (t.times[n - 1] - t.times[n - 2]);
    for (std::size_t i = 1; i + 1 < n; ++i)
        d[i] = (t.states[i + 1] - t.states[i - 1]) / (t.times[i + 1] - t.times[i - 1]);
    return d;
}

}  // namespace detail

// Evaluates every applicable inequality at each stored sample. G must share
// the trajectory's time grid (pass nullptr for a zero datum).
inline EstimateReport check_estimates(const Trajectory& traj, const Trajectory* G,
                                      const SpectralField& psi0, const EstimateConstants& c,
                                      EstimateVariant variant, const CheckOptions& opts = {}) {
    traj.validate();
    if (G) {
        if (G->times.size() != traj.times.size())
            throw std::invalid_argument("check_estimates: G time grid mismatch");
        for (std::size_t i = 0; i < traj.times.size(); ++i)
            if (std::abs(G->times[i] - traj.times[i]) > 1e-12)
                throw std::invalid_argument("check_estimates: G time grid mismatch");
    }
    if (variant == EstimateVariant::epsilon && !opts.rough_initial)
        throw std::invalid_argument("check_estimates: epsilon variant needs rough initial norms");

    const double T = traj.t_end() - traj.t_begin();
    const auto src = detail::source_norms(G, traj.basis);
    const NormReport n0 = norms(psi0);

    EstimateReport rep;
    double max_l2 = 0.0, max_grad = 0.0, max_lap = 0.0;
    double t_l2 = traj.t_begin(), t_grad = t_l2, t_lap = t_l2;
    for (std::size_t i = 0; i < traj.times.size(); ++i) {
        const NormReport n = norms(traj.field_at(i));
        if (n.l2 > max_l2) { max_l2 = n.l2; t_l2 = traj.times[i]; }
        if (n.grad > max_grad) { max_grad = n.grad; t_grad = traj.times[i]; }
        if (n.lap > max_lap) { max_lap = n.lap; t_lap = traj.times[i]; }
    }

    const auto deriv = detail::time_derivatives(traj);
    double max_dt_l2 = 0.0, max_dt_hm1 = 0.0;
    double t_dt_l2 = traj.t_begin(), t_dt_hm1 = t_dt_l2;
    for (std::size_t i = 0; i < deriv.size(); ++i) {
        const NormReport n = norms(SpectralField(traj.basis, deriv[i]));
        if (n.l2 > max_dt_l2) { max_dt_l2 = n.l2; t_dt_l2 = traj.times[i]; }
        if (n.h_minus1 > max_dt_hm1) { max_dt_hm1 = n.h_minus1; t_dt_hm1 = traj.times[i]; }
    }
    double dt_max = 0.0;
    for (std::size_t i = 1; i < traj.times.size(); ++i)
        dt_max = std::max(dt_max, traj.times[i] - traj.times[i - 1]);
    const double fd_slack = dt_max * max_dt_l2;

    auto push = [&](const std::string& id, double observed, double bound, double t,
                    double slack = 0.0, bool fallback = false) {
        EstimateRow r;
        r.id = id;
        r.observed = observed;
        r.bound = bound;
        r.margin = bound - observed;
        r.slack = slack;
        r.worst_time = t;
        r.fallback_bound = fallback;
        r.pass = observed <= bound * (1.0 + opts.rel_tol) + slack;
        rep.all_pass = rep.all_pass && r.pass;
        rep.rows.push_back(std::move(r));
    };

    if (variant == EstimateVariant::plain) {
        const double b1 = std::exp(T) * (n0.l2 * n0.l2 + T * src.y_inf_0 * src.y_inf_0);
        push("EN_1", max_l2 * max_l2, b1, t_l2);

        const double b2 = std::exp(c.c_grad() * T) *
                          (n0.grad * n0.grad + T * src.y_inf_1 * src.y_inf_1);
        push("EN_2", max_grad * max_grad, b2, t_grad);

        const double b3 =
            std::exp(c.c_1d() * T) *
            (n0.lap * n0.lap +
             T * (c.c_2d(T) * n0.grad * n0.grad + c.c_3d(T) * src.y_hat * src.y_hat));
        push("EN_3", max_lap * max_lap, b3, t_lap);

        const double k1 = std::sqrt(b2) + c.v_sup * std::sqrt(b1) + src.y_inf_0;
        push("EN_4_pre", max_dt_hm1, k1, t_dt_hm1, dt_max * max_dt_hm1);
        const double k2 = std::sqrt(b3) + c.v_sup * std::sqrt(b1) + src.y_hat;
        push("EN_4", max_dt_l2, k2, t_dt_l2, fd_slack);
        rep.k_minus_1 = k1;
        rep.k_minus_2 = k2;
    } else {
        const RoughInitialNorms r0 = *opts.rough_initial;
        const double m2 = c.phi1_l1 * c.phi1_l1;
        const double b1 = std::exp(c.c_hat() * T) *
                          (c.moll.C0 * c.moll.C0 * m2 * r0.l2 * r0.l2 +
                           T * src.y_inf_0 * src.y_inf_0);
        push("EN_1_eps", max_l2 * max_l2, b1, t_l2);

        const double b2 = std::exp(c.c_hat_grad() * T) *
                          (c.moll.C1 * c.moll.C1 * m2 * r0.grad * r0.grad +
                           T * src.y_inf_1 * src.y_inf_1);
        push("EN_2_eps", max_grad * max_grad, b2, t_grad);

        const double g2 = c.grad_phi_eps_l1 * c.grad_phi_eps_l1;
        const double b3 = std::exp(c.c_eps() * T) *
                          (c.moll.C2 * c.moll.C2 * g2 * r0.h1 * r0.h1 +
                           T * src.y_hat * src.y_hat);
        push("EN_3_eps", max_lap * max_lap, b3, t_lap);

        const double veps_rate = c.moll.C3 * (c.v_sup + c.phi1_l1 * (c.w_sup + c.K1));
        const double k1 = std::sqrt(b2) + veps_rate * std::sqrt(b1) + src.y_inf_0;
        push("EN_4_eps", max_dt_hm1, k1, t_dt_hm1, dt_max * max_dt_hm1);
        rep.k_minus_1 = k1;

        // EN_5_eps is pointwise in t
        double worst_obs = 0.0, worst_bound = 0.0, worst_t = traj.t_begin();
        double worst_margin = std::numeric_limits<double>::infinity();
        bool fallback = !opts.v_eps_norm;
        for (std::size_t i = 0; i < deriv.size(); ++i) {
            const NormReport nd = norms(SpectralField(traj.basis, deriv[i]));
            const NormReport ns = norms(traj.field_at(i));
            const double veps = opts.v_eps_norm
                                    ? opts.v_eps_norm(traj.times[i], traj.states[i])
                                    : veps_rate * ns.l2;
            const double rhs = ns.lap + veps + src.y_hat;
            if (rhs - nd.l2 < worst_margin) {
                worst_margin = rhs - nd.l2;
                worst_obs = nd.l2;
                worst_bound = rhs;
                worst_t = traj.times[i];
            }
        }
        push("EN_5_eps", worst_obs, worst_bound, worst_t, fd_slack, fallback);
        rep.k_minus_2 = worst_bound;
    }
    return rep;
}

// Stepwise Groenwall consistency (proof of EN_1): the difference quotient of
// ||Psi||^2 must satisfy d/dt ||Psi||^2 <= ||G||^2 + ||Psi||^2 up to O(dt).
inline double gronwall_en1_violation(const Trajectory& traj, const Trajectory* G) {
    double worst = 0.0;
    double dt_max = 0.0;
    for (std::size_t i = 1; i < traj.times.size(); ++i)
        dt_max = std::max(dt_max, traj.times[i] - traj.times[i - 1]);
    for (std::size_t i = 0; i + 1 < traj.times.size(); ++i) {
        const double h = traj.times[i + 1] - traj.times[i];
        const double a = traj.states[i].squaredNorm();
        const double b = traj.states[i + 1].squaredNorm();
        const double quot = (b - a) / h;
        const double gm = G ? 0.5 * (G->states[i].norm() + G->states[i + 1].norm()) : 0.0;
        const double rhs = gm * gm + 0.5 * (a + b);
        const double scale = std::max(1.0, std::max(std::abs(quot), rhs));
        worst = std::max(worst, (quot - rhs) / scale);
    }
    return std::max(0.0, worst - 10.0 * dt_max);
}

}  // namespace tdks
