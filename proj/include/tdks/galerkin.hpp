#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdks/potentials.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

// ---------------------------------------------------------------------------
// assembled Galerkin system  i gamma' = A(t) gamma + g(t)
// ---------------------------------------------------------------------------

struct AssembleOptions {
    bool include_rough_direct = false;      // W as plain multiplication (W^{1,inf} path)
    std::optional<double> mollify_rough;    // epsilon: W enters as phi_eps * E(W Psi)
};

// A(t) = diag(lambda) + M_V0 + u(t) M_Vu [+ rough terms]. The four projection
// matrices of multiplication operators are real symmetric; the mollified
// product operators L_W0e, L_Wue are real but not symmetric.
struct OdeSystem {
    std::shared_ptr<const Basis> basis;
    Eigen::VectorXd lap_diag;
    Eigen::MatrixXd M_V0, M_Vu;
    Eigen::MatrixXd M_W0, M_Wu;      // direct rough multiplication (optional)
    Eigen::MatrixXd L_W0e, L_Wue;    // mollified rough products (optional)
    ControlSignal u = ControlSignal::constant(0.0);
    ControlSignal w = ControlSignal::constant(0.0);
    bool has_direct_rough = false;
    bool has_mollified_rough = false;

    int order() const { return basis->order(); }

    Eigen::MatrixXd A(double t) const {
        Eigen::MatrixXd a = M_V0 + u.value(t) * M_Vu;
        a.diagonal() += lap_diag;
        if (has_direct_rough) a += M_W0 + w.value(t) * M_Wu;
        if (has_mollified_rough) a += L_W0e + w.value(t) * L_Wue;
        return a;
    }
};

namespace detail {

inline Eigen::MatrixXd multiplication_matrix(const Basis& basis, const Eigen::ArrayXd& pot) {
    const int m = basis.order();
    Eigen::MatrixXd M(m, m);
    std::vector<Eigen::ArrayXcd> columns(static_cast<std::size_t>(m));
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(m);
        e[k] = 1.0;
        columns[std::size_t(k)] = basis.synthesize(e);
    }
    for (int k = 0; k < m; ++k) {
        const Eigen::ArrayXcd vpsi = pot * columns[std::size_t(k)];
        const Eigen::VectorXcd col = basis.project(vpsi);
        M.col(k) = col.real();
    }
    return M;
}

inline Eigen::MatrixXd mollified_product_matrix(const Basis& basis, const Eigen::ArrayXd& pot,
                                                const Mollifier& mol) {
    const int m = basis.order();
    Eigen::MatrixXd M(m, m);
    for (int k = 0; k < m; ++k) {
        Eigen::VectorXcd e = Eigen::VectorXcd::Zero(m);
        e[k] = 1.0;
        const Eigen::ArrayXcd psi = basis.synthesize(e);
        const Eigen::ArrayXcd sm = mol.apply(Eigen::ArrayXcd(pot * psi));
        M.col(k) = basis.project(sm).real();
    }
    return M;
}

}  // namespace detail

inline OdeSystem assemble(std::shared_ptr<const Basis> basis, const PotentialSpec& pot,
                          const AssembleOptions& opts = {}) {
    OdeSystem sys;
    sys.basis = basis;
    sys.lap_diag = basis->eigenvalues();
    sys.M_V0 = detail::multiplication_matrix(*basis, pot.V0.values);
    sys.M_Vu = detail::multiplication_matrix(*basis, pot.Vu.values);
    sys.u = pot.u;
    sys.w = pot.w;
    const int m = basis->order();
    sys.M_W0 = Eigen::MatrixXd::Zero(m, m);
    sys.M_Wu = Eigen::MatrixXd::Zero(m, m);
    sys.L_W0e = Eigen::MatrixXd::Zero(m, m);
    sys.L_Wue = Eigen::MatrixXd::Zero(m, m);
    if (opts.include_rough_direct && opts.mollify_rough)
        throw std::invalid_argument("assemble: choose direct or mollified rough terms, not both");
    if (opts.include_rough_direct) {
        if (!pot.has_rough) throw std::invalid_argument("assemble: no rough potentials configured");
        sys.M_W0 = detail::multiplication_matrix(*basis, pot.W0.values);
        sys.M_Wu = detail::multiplication_matrix(*basis, pot.Wu.values);
        sys.has_direct_rough = true;
    }
    if (opts.mollify_rough) {
        if (!pot.has_rough) throw std::invalid_argument("assemble: no rough potentials configured");
        Mollifier mol(basis->domain(), *opts.mollify_rough);
        sys.L_W0e = detail::mollified_product_matrix(*basis, pot.W0.values, mol);
        sys.L_Wue = detail::mollified_product_matrix(*basis, pot.Wu.values, mol);
        sys.has_mollified_rough = true;
    }
    return sys;
}

// ---------------------------------------------------------------------------
// trajectories
// ---------------------------------------------------------------------------

struct TrajectoryMetadata {
    std::string integrator;
    double dt = 0.0;
    int m = 0;
    std::uint64_t config_hash = 0;
};

struct Trajectory {
    std::shared_ptr<const Basis> basis;
    std::vector<double> times;
    std::vector<Eigen::VectorXcd> states;
    TrajectoryMetadata meta;

    void validate() const {
        if (times.size() != states.size() || times.empty())
            throw std::invalid_argument("Trajectory: times/states mismatch");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("Trajectory: times must strictly increase");
    }

    double t_begin() const { return times.front(); }
    double t_end() const { return times.back(); }
    const Eigen::VectorXcd& endpoint() const { return states.back(); }

    // linear interpolation in coefficient space
    Eigen::VectorXcd sample(double t) const {
        if (t <= times.front()) return states.front();
        if (t >= times.back()) return states.back();
        const auto it = std::upper_bound(times.begin(), times.end(), t);
        const std::size_t hi = std::size_t(it - times.begin());
        const std::size_t lo = hi - 1;
        const double s = (t - times[lo]) / (times[hi] - times[lo]);
        return (1.0 - s) * states[lo] + s * states[hi];
    }

    SpectralField field_at(std::size_t i) const { return SpectralField(basis, states[i]); }

    // ess sup over stored samples of the spatial H^2 norm (the Y-hat norm)
    double sup_h2() const {
        double s = 0.0;
        for (const auto& c : states) s = std::max(s, norms(SpectralField(basis, c)).h2);
        return s;
    }

    double sup_z() const {
        double s = 0.0;
        for (const auto& c : states) s = std::max(s, norms(SpectralField(basis, c)).lap);
        return s;
    }

    // L^2(0,T; L^2) norm by the trapezoidal rule over stored samples
    double y_norm() const {
        double acc = 0.0;
        for (std::size_t i = 1; i < times.size(); ++i) {
            const double a = states[i - 1].squaredNorm();
            const double b = states[i].squaredNorm();
            acc += 0.5 * (a + b) * (times[i] - times[i - 1]);
        }
        return std::sqrt(acc);
    }
};

// sup-in-time H^2 distance between two trajectories on the same time grid
inline double sup_h2_distance(const Trajectory& a, const Trajectory& b) {
    if (a.times.size() != b.times.size())
        throw std::invalid_argument("sup_h2_distance: time grids differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.times.size(); ++i)
        s = std::max(s, norms(SpectralField(a.basis, a.states[i] - b.states[i])).h2);
    return s;
}

// ---------------------------------------------------------------------------
// time grid: uniform steps split exactly at control breakpoints
// ---------------------------------------------------------------------------

inline std::vector<double> build_time_grid(double t0, double t1, double dt,
                                           const std::vector<double>& breakpoints) {
    if (!(t1 > t0)) throw std::invalid_argument("build_time_grid: empty interval");
    if (!(dt > 0.0) || dt > (t1 - t0) * (1.0 + 1e-12))
        throw std::invalid_argument("build_time_grid: dt must lie in (0, interval]");
    std::vector<double> seg{t0};
    for (double b : breakpoints)
        if (b > t0 + 1e-14 && b < t1 - 1e-14) seg.push_back(b);
    seg.push_back(t1);
    std::sort(seg.begin(), seg.end());
    std::vector<double> grid{t0};
    for (std::size_t s = 0; s + 1 < seg.size(); ++s) {
        const double a = seg[s], b = seg[s + 1];
        const long steps = std::max(1L, long(std::ceil((b - a) / dt - 1e-9)));
        for (long k = 1; k <= steps; ++k) grid.push_back(std::min(b, a + double(k) * dt));
        grid.back() = b;
    }
    return grid;
}

// ---------------------------------------------------------------------------
// Crank-Nicolson propagation of the linear inhomogeneous system
// ---------------------------------------------------------------------------

// Source term evaluated at a step midpoint. Receives (t_lo, t_hi); returns the
// projected G at t_mid = (t_lo + t_hi)/2.
using MidpointSource = std::function<Eigen::VectorXcd(double, double)>;

inline MidpointSource zero_source() { return nullptr; }

inline MidpointSource source_from_trajectory(const Trajectory& g) {
    return [gt = g](double lo, double hi) { return gt.sample(0.5 * (lo + hi)); };
}

struct IntegrateOptions {
    std::uint64_t config_hash = 0;
    std::string integrator_id = "crank-nicolson";
};

// One Cayley step per grid interval with A frozen at the step midpoint:
//   (I + i dt/2 A) y_{n+1} = (I - i dt/2 A) y_n - i dt g(t_mid).
// Unitary for Hermitian A and g = 0; global order 2 on smooth subintervals.
inline Trajectory integrate_linear(const OdeSystem& sys, const Eigen::VectorXcd& gamma0,
                                   double t0, double t1, double dt,
                                   const MidpointSource& source = nullptr,
                                   const IntegrateOptions& opts = {}) {
    if (gamma0.size() != sys.order())
        throw std::invalid_argument("integrate_linear: initial state order mismatch");
    std::vector<double> bp = sys.u.breakpoints_within(t0, t1);
    {
        auto bw = sys.w.breakpoints_within(t0, t1);
        bp.insert(bp.end(), bw.begin(), bw.end());
        std::sort(bp.begin(), bp.end());
        bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
    }
    const std::vector<double> grid = build_time_grid(t0, t1, dt, bp);

    Trajectory traj;
    traj.basis = sys.basis;
    traj.times = grid;
    traj.states.reserve(grid.size());
    traj.states.push_back(gamma0);
    traj.meta = {opts.integrator_id, dt, sys.order(), opts.config_hash};

    const std::complex<double> im(0.0, 1.0);
    const int m = sys.order();
    Eigen::PartialPivLU<Eigen::MatrixXcd> lu;
    Eigen::MatrixXcd Q(m, m);
    double cached_h = -1.0, cached_u = 0.0, cached_w = 0.0;
    bool cached = false;

    Eigen::VectorXcd y = gamma0;
    for (std::size_t n = 0; n + 1 < grid.size(); ++n) {
        const double lo = grid[n], hi = grid[n + 1];
        const double h = hi - lo;
        const double tm = 0.5 * (lo + hi);
        const double uv = sys.u.value(tm), wv = sys.w.value(tm);
        if (!cached || h != cached_h || uv != cached_u || wv != cached_w) {
            const Eigen::MatrixXd a = sys.A(tm);
            Eigen::MatrixXcd P = (0.5 * h) * im * a;
            Q = -P;
            P.diagonal().array() += 1.0;
            Q.diagonal().array() += 1.0;
            lu.compute(P);
            // Cayley matrices are well-conditioned for Hermitian A; surface
            // breakdowns (non-normal mollified terms, absurd dt) explicitly
            const Eigen::VectorXcd probe = Eigen::VectorXcd::Ones(m);
            const Eigen::VectorXcd resid = P * lu.solve(probe) - probe;
            if (!resid.allFinite() || resid.norm() > 1e-8 * std::sqrt(double(m)))
                throw std::runtime_error(
                    "integrate_linear: ill-conditioned step matrix at t = " + std::to_string(tm) +
                    ", dt = " + std::to_string(h));
            cached = true;
            cached_h = h;
            cached_u = uv;
            cached_w = wv;
        }
        Eigen::VectorXcd rhs = Q * y;
        if (source) rhs -= im * h * source(lo, hi);
        y = lu.solve(rhs);
        traj.states.push_back(y);
    }
    return traj;
}

// Auxiliary problem (Theorem-3.2 shape): assemble plus Crank-Nicolson with a
// supplied time-indexed datum G.
inline Trajectory solve_auxiliary(const OdeSystem& sys, const Trajectory& G,
                                  const Eigen::VectorXcd& psi0, double t0, double t1, double dt,
                                  const IntegrateOptions& opts = {}) {
    return integrate_linear(sys, psi0, t0, t1, dt, source_from_trajectory(G), opts);
}

// Midpoint residual of the weak form, max over retained test modes and steps:
//   | i (y_{n+1}-y_n)/h - A(t_mid) y_mid - g(t_mid) |_j
// Machine-zero for the Crank-Nicolson iterates by construction; used as a
// structural verification of stored trajectories.
inline double weak_form_residual(const OdeSystem& sys, const Trajectory& traj,
                                 const MidpointSource& source = nullptr) {
    const std::complex<double> im(0.0, 1.0);
    double worst = 0.0;
    for (std::size_t n = 0; n + 1 < traj.times.size(); ++n) {
        const double lo = traj.times[n], hi = traj.times[n + 1];
        const double h = hi - lo;
        const Eigen::VectorXcd dydt = (traj.states[n + 1] - traj.states[n]) / h;
        const Eigen::VectorXcd ymid = 0.5 * (traj.states[n + 1] + traj.states[n]);
        Eigen::VectorXcd r = im * dydt - sys.A(0.5 * (lo + hi)) * ymid;
        if (source) r -= source(lo, hi);
        worst = std::max(worst, r.cwiseAbs().maxCoeff());
    }
    return worst;
}

// ---------------------------------------------------------------------------
// nonlinear reference integrator (oracle): Strang splitting
// ---------------------------------------------------------------------------

struct ReferenceOptions {
    bool enable_hartree = true;
    XcModel xc = XcModel::none();
    int max_inner = 50;
    double inner_tol = 1e-14;
    std::uint64_t config_hash = 0;
};

// Strang splitting between the exact diagonal Laplacian phase and an implicit
// midpoint treatment of V + F. The midpoint substep is solved by an inner
// fixed point; it conserves the norm exactly for real potentials.
inline Trajectory integrate_reference(std::shared_ptr<const Basis> basis,
                                      const PotentialSpec& pot, const HartreeOperator& hop,
                                      const Eigen::VectorXcd& psi0, double t0, double t1,
                                      double dt_ref, const ReferenceOptions& opts = {}) {
    if (basis->order() > 64)
        throw std::invalid_argument("integrate_reference: oracle restricted to m <= 64");
    const OdeSystem sys = assemble(basis, pot);
    std::vector<double> bp = pot.breakpoints_within(t0, t1);
    const std::vector<double> grid = build_time_grid(t0, t1, dt_ref, bp);

    Trajectory traj;
    traj.basis = basis;
    traj.times = grid;
    traj.states.reserve(grid.size());
    traj.states.push_back(psi0);
    traj.meta = {"strang-reference", dt_ref, basis->order(), opts.config_hash};

    const std::complex<double> im(0.0, 1.0);
    const Eigen::ArrayXd lam = sys.lap_diag.array();

    auto nonlinear_rhs = [&](double t, const Eigen::VectorXcd& y) -> Eigen::VectorXcd {
        Eigen::VectorXcd out = (sys.M_V0 + sys.u.value(t) * sys.M_Vu) * y;
        if (opts.enable_hartree || opts.xc.enabled()) {
            const Eigen::ArrayXcd psi = basis->synthesize(y);
            const Eigen::ArrayXd rho = psi.abs2();
            Eigen::ArrayXd v = Eigen::ArrayXd::Zero(rho.size());
            if (opts.enable_hartree) v += hop.apply_density(rho).values;
            if (opts.xc.enabled()) v += opts.xc.evaluate(rho);
            out += basis->project(v * psi);
        }
        return out;
    };

    Eigen::VectorXcd y = psi0;
    for (std::size_t n = 0; n + 1 < grid.size(); ++n) {
        const double h = grid[n + 1] - grid[n];
        const double tm = 0.5 * (grid[n] + grid[n + 1]);
        // half phase
        Eigen::VectorXcd z = (Eigen::exp(-im * (0.5 * h) * lam.cast<std::complex<double>>()) *
                              y.array())
                                 .matrix();
        // implicit midpoint for i y' = N(t, y)
        Eigen::VectorXcd w = z;
        bool converged = false;
        for (int it = 0; it < opts.max_inner; ++it) {
            const Eigen::VectorXcd mid = 0.5 * (z + w);
            Eigen::VectorXcd w_next = z - im * h * nonlinear_rhs(tm, mid);
            const double delta = (w_next - w).norm();
            w.swap(w_next);
            if (delta <= opts.inner_tol * std::max(1.0, w.norm())) {
                converged = true;
                break;
            }
        }
        if (!converged)
            throw std::runtime_error(
                "integrate_reference: inner fixed point failed to converge at t = " +
                std::to_string(tm));
        y = (Eigen::exp(-im * (0.5 * h) * lam.cast<std::complex<double>>()) * w.array()).matrix();
        traj.states.push_back(y);
    }
    return traj;
}

}  // namespace tdks
