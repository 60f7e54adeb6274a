#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "tdks/fft.hpp"
#include "tdks/grid.hpp"
#include "tdks/spectral.hpp"

namespace tdks {

// ---------------------------------------------------------------------------
// control signals
// ---------------------------------------------------------------------------

// Piecewise-constant control: values[i] applies on [times[i], times[i+1]).
// Deliberately below C^1 regularity; only boundedness is assumed.
struct ControlSignal {
    std::vector<double> times;
    std::vector<double> values;

    static ControlSignal constant(double v) { return {{0.0}, {v}}; }

    void validate() const {
        if (times.empty() || times.size() != values.size())
            throw std::invalid_argument("ControlSignal: times/values size mismatch");
        if (times.front() != 0.0)
            throw std::invalid_argument("ControlSignal: first breakpoint must be t = 0");
        for (std::size_t i = 1; i < times.size(); ++i)
            if (!(times[i] > times[i - 1]))
                throw std::invalid_argument("ControlSignal: breakpoints must increase");
    }

    double value(double t) const {
        std::size_t i = times.size();
        while (i > 0 && times[i - 1] > t) --i;
        if (i == 0) return values.front();
        return values[i - 1];
    }

    double sup_abs() const {
        double s = 0.0;
        for (double v : values) s = std::max(s, std::abs(v));
        return s;
    }

    // interior breakpoints within (t0, t1), used to split integrator steps
    std::vector<double> breakpoints_within(double t0, double t1) const {
        std::vector<double> out;
        for (double t : times)
            if (t > t0 && t < t1) out.push_back(t);
        return out;
    }
};

// ---------------------------------------------------------------------------
// scalar potential fields
// ---------------------------------------------------------------------------

// Real potential on the grid with sup-norm estimates. The estimates are grid
// maxima with one refinement level when an analytic evaluator is known, and
// finite-difference surrogates for tabulated data; they are reported as
// estimates, not certified bounds.
struct ScalarField {
    Eigen::ArrayXd values;
    double sup_abs = 0.0;
    double sup_grad = 0.0;
    double sup_lap = 0.0;

    double w1_norm() const { return std::max(sup_abs, sup_grad); }
    double w2_norm() const { return std::max({sup_abs, sup_grad, sup_lap}); }
};

namespace detail {

template <typename V, typename G, typename L>
ScalarField field_from_analytic(const BoxDomain& dom, V&& value, G&& grad_abs, L&& lap) {
    ScalarField f;
    f.values = sample_real(dom, value);
    auto scan = [&](const BoxDomain& d) {
        for (std::size_t i = 0; i < d.total_nodes(); ++i) {
            const auto x = d.node_coords(i);
            f.sup_abs = std::max(f.sup_abs, std::abs(value(x)));
            f.sup_grad = std::max(f.sup_grad, std::abs(grad_abs(x)));
            f.sup_lap = std::max(f.sup_lap, std::abs(lap(x)));
        }
    };
    scan(dom);
    BoxDomain refined = dom;
    for (int a = 0; a < dom.dim; ++a) refined.grid_points[a] = 2 * dom.grid_points[a] + 1;
    scan(refined);
    return f;
}

}  // namespace detail

inline ScalarField make_zero_potential(const BoxDomain& dom) {
    ScalarField f;
    f.values = Eigen::ArrayXd::Zero(long(dom.total_nodes()));
    return f;
}

inline ScalarField make_constant_potential(const BoxDomain& dom, double c) {
    ScalarField f;
    f.values = Eigen::ArrayXd::Constant(long(dom.total_nodes()), c);
    f.sup_abs = std::abs(c);
    return f;
}

// amp * sum_i (x_i - L_i/2)^2
inline ScalarField make_harmonic_potential(const BoxDomain& dom, double amp) {
    auto value = [&dom, amp](const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int a = 0; a < dom.dim; ++a) {
            const double d = x[a] - 0.5 * dom.lengths[a];
            r2 += d * d;
        }
        return amp * r2;
    };
    auto grad = [&dom, amp](const std::array<double, 3>& x) {
        double g2 = 0.0;
        for (int a = 0; a < dom.dim; ++a) {
            const double d = x[a] - 0.5 * dom.lengths[a];
            g2 += 4.0 * amp * amp * d * d;
        }
        return std::sqrt(g2);
    };
    auto lap = [&dom, amp](const std::array<double, 3>&) { return 2.0 * amp * dom.dim; };
    return detail::field_from_analytic(dom, value, grad, lap);
}

// -amp * exp(-|x - c|^2 / (2 sigma^2)), centered in the box
inline ScalarField make_gaussian_well_potential(const BoxDomain& dom, double amp, double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("gaussian-well: sigma must be positive");
    auto r2of = [&dom](const std::array<double, 3>& x) {
        double r2 = 0.0;
        for (int a = 0; a < dom.dim; ++a) {
            const double d = x[a] - 0.5 * dom.lengths[a];
            r2 += d * d;
        }
        return r2;
    };
    const double s2 = sigma * sigma;
    auto value = [=](const std::array<double, 3>& x) { return -amp * std::exp(-r2of(x) / (2 * s2)); };
    auto grad = [=](const std::array<double, 3>& x) {
        const double r2 = r2of(x);
        return amp * std::exp(-r2 / (2 * s2)) * std::sqrt(r2) / s2;
    };
    auto lap = [=, dim = dom.dim](const std::array<double, 3>& x) {
        const double r2 = r2of(x);
        return amp * std::exp(-r2 / (2 * s2)) * (double(dim) / s2 - r2 / (s2 * s2));
    };
    return detail::field_from_analytic(dom, value, grad, lap);
}

template <typename V, typename G, typename L>
ScalarField make_potential_from_function(const BoxDomain& dom, V&& v, G&& g, L&& l) {
    return detail::field_from_analytic(dom, std::forward<V>(v), std::forward<G>(g),
                                       std::forward<L>(l));
}

// Tabulated potential; derivative sup-norms from central differences.
inline ScalarField make_potential_from_grid(const BoxDomain& dom, Eigen::ArrayXd values) {
    if (std::size_t(values.size()) != dom.total_nodes())
        throw std::invalid_argument("make_potential_from_grid: size mismatch");
    ScalarField f;
    f.values = std::move(values);
    f.sup_abs = f.values.abs().maxCoeff();
    std::array<int, 3> k;
    for (std::size_t i = 0; i < dom.total_nodes(); ++i) {
        dom.unflatten(i, k);
        double g2 = 0.0, lap = 0.0;
        for (int a = 0; a < dom.dim; ++a) {
            const double h = dom.spacing(a);
            const int n = dom.nodes(a);
            auto at = [&](int kk) {
                auto kc = k;
                kc[a] = std::clamp(kk, 0, n - 1);
                return f.values[long(dom.flatten(kc))];
            };
            const double fp = at(k[a] + 1), fm = at(k[a] - 1), f0 = at(k[a]);
            const double d1 = (k[a] == 0)           ? (fp - f0) / h
                              : (k[a] == n - 1)     ? (f0 - fm) / h
                                                    : (fp - fm) / (2.0 * h);
            g2 += d1 * d1;
            if (k[a] > 0 && k[a] < n - 1) lap += (fp - 2.0 * f0 + fm) / (h * h);
        }
        f.sup_grad = std::max(f.sup_grad, std::sqrt(g2));
        f.sup_lap = std::max(f.sup_lap, std::abs(lap));
    }
    return f;
}

// ---------------------------------------------------------------------------
// exchange-correlation models
// ---------------------------------------------------------------------------

// Real density-dependent model with declared Lipschitz constants. The smooth
// contract (A5-style: K, K_tilde) and the rough contract (A5b-style: K1, K2)
// are empirically probed, never claimed analytically.
struct XcModel {
    enum class Kind { none, saturating_density, table };

    Kind kind = Kind::none;
    double coefficient = 0.0;  // saturating-density strength c
    std::vector<double> table_rho, table_value;
    double K = 0.0, K_tilde = 0.0;  // declared for the smooth contract
    double K1 = 0.0, K2 = 0.0;      // declared for the rough contract

    static XcModel none() { return {}; }

    // V_xc(rho) = c * rho / (1 + rho): real, bounded, smooth in rho
    static XcModel saturating(double c) {
        XcModel m;
        m.kind = Kind::saturating_density;
        m.coefficient = c;
        // calibrated by the lipschitz_probe suite on the standard sampler
        m.K = 1.4 * std::abs(c);
        m.K_tilde = 6.0 * std::abs(c);
        m.K1 = 1.4 * std::abs(c);
        m.K2 = 4.0 * std::abs(c);
        return m;
    }

    bool enabled() const { return kind != Kind::none; }

    Eigen::ArrayXd evaluate(const Eigen::ArrayXd& rho) const {
        switch (kind) {
            case Kind::none:
                return Eigen::ArrayXd::Zero(rho.size());
            case Kind::saturating_density:
                return coefficient * rho / (1.0 + rho);
            case Kind::table: {
                Eigen::ArrayXd out(rho.size());
                for (long i = 0; i < rho.size(); ++i) out[i] = table_lookup(rho[i]);
                return out;
            }
        }
        throw std::logic_error("XcModel: unknown kind");
    }

private:
    double table_lookup(double r) const {
        if (table_rho.size() < 2 || table_rho.size() != table_value.size())
            throw std::runtime_error("XcModel: malformed table");
        if (r < table_rho.front() || r > table_rho.back())
            throw std::runtime_error("XcModel: density " + std::to_string(r) +
                                     " outside table range [" + std::to_string(table_rho.front()) +
                                     ", " + std::to_string(table_rho.back()) + "]");
        auto it = std::upper_bound(table_rho.begin(), table_rho.end(), r);
        std::size_t hi = std::min(std::size_t(it - table_rho.begin()), table_rho.size() - 1);
        if (hi == 0) hi = 1;
        const std::size_t lo = hi - 1;
        const double s = (r - table_rho[lo]) / (table_rho[hi] - table_rho[lo]);
        return (1.0 - s) * table_value[lo] + s * table_value[hi];
    }
};

// ---------------------------------------------------------------------------
// potential specification V = V0 + Vu u(t), W = W0 + Wu w(t)
// ---------------------------------------------------------------------------

struct PotentialSpec {
    ScalarField V0, Vu;
    ControlSignal u = ControlSignal::constant(0.0);
    bool has_rough = false;
    ScalarField W0, Wu;
    ControlSignal w = ControlSignal::constant(0.0);
    double horizon = std::numeric_limits<double>::infinity();
    double softening = 0.25;  // Hartree kernel softening for dim < 3

    // cached sup-norm estimates (sup over t via sup|u|, sup|w|)
    double V_sup = 0.0, V_grad_sup = 0.0, V_lap_sup = 0.0, V_w1 = 0.0, V_w2 = 0.0;
    double W_sup = 0.0, W_w1 = 0.0;

    static PotentialSpec zero(const BoxDomain& dom) {
        PotentialSpec p;
        p.V0 = make_zero_potential(dom);
        p.Vu = make_zero_potential(dom);
        p.W0 = make_zero_potential(dom);
        p.Wu = make_zero_potential(dom);
        p.finalize();
        return p;
    }

    void finalize() {
        u.validate();
        w.validate();
        const double su = u.sup_abs(), sw = w.sup_abs();
        V_sup = V0.sup_abs + su * Vu.sup_abs;
        V_grad_sup = V0.sup_grad + su * Vu.sup_grad;
        V_lap_sup = V0.sup_lap + su * Vu.sup_lap;
        V_w1 = std::max(V_sup, V_grad_sup);
        V_w2 = std::max(V_w1, V_lap_sup);
        W_sup = W0.sup_abs + sw * Wu.sup_abs;
        W_w1 = std::max(W_sup, W0.sup_grad + sw * Wu.sup_grad);
        if (!std::isfinite(V_w2) || !std::isfinite(W_w1))
            throw std::invalid_argument("PotentialSpec: cached norms must be finite");
    }

    void check_time(double t) const {
        if (t < -1e-12 || t > horizon * (1.0 + 1e-12) + 1e-12)
            throw std::invalid_argument("PotentialSpec: time outside [0, T]");
    }

    Eigen::ArrayXd eval_V(double t) const {
        check_time(t);
        return V0.values + u.value(t) * Vu.values;
    }

    Eigen::ArrayXd eval_W(double t) const {
        check_time(t);
        if (!has_rough) return Eigen::ArrayXd::Zero(V0.values.size());
        return W0.values + w.value(t) * Wu.values;
    }

    // union of control breakpoints inside (t0, t1)
    std::vector<double> breakpoints_within(double t0, double t1) const {
        std::vector<double> out = u.breakpoints_within(t0, t1);
        if (has_rough) {
            auto bw = w.breakpoints_within(t0, t1);
            out.insert(out.end(), bw.begin(), bw.end());
        }
        std::sort(out.begin(), out.end());
        out.erase(std::unique(out.begin(), out.end()), out.end());
        return out;
    }
};

// ---------------------------------------------------------------------------
// Hartree potential
// ---------------------------------------------------------------------------

struct HartreeField {
    Eigen::ArrayXd values;
    bool softened = false;
    double softening = 0.0;
};

// Newtonian convolution of the density with 1/|x-y| (3D) or the softened
// kernel 1/sqrt(|x-y|^2 + a^2) (1D/2D desk modes). Zero-extension outside the
// box; zero-padded fast-transform convolution with the quadrature weight
// folded into the tabulated kernel. The singular node carries the cell
// average of 1/|x| over one grid cell.
class HartreeOperator {
public:
    HartreeOperator(const BoxDomain& dom, double softening)
        : dom_(dom), softened_(dom.dim < 3), softening_(softening) {
        if (softened_ && !(softening > 0.0))
            throw std::invalid_argument("HartreeOperator: dim < 3 requires softening > 0");
        std::array<double, 3> h{1.0, 1.0, 1.0};
        for (int a = 0; a < dom.dim; ++a) h[a] = dom.spacing(a);
        const double weight = dom.cell_volume();
        const double singular = softened_ ? 1.0 / softening : singular_cell_average(h, dom.dim);
        std::array<std::size_t, 3> n{1, 1, 1};
        for (int a = 0; a < dom.dim; ++a) n[a] = std::size_t(dom.nodes(a));
        auto kernel = [&](const std::array<long, 3>& d) {
            double r2 = 0.0;
            for (int a = 0; a < dom_.dim; ++a) r2 += double(d[a]) * h[a] * double(d[a]) * h[a];
            if (softened_) return weight / std::sqrt(r2 + softening_ * softening_);
            if (r2 == 0.0) return weight * singular;
            return weight / std::sqrt(r2);
        };
        conv_ = std::make_unique<tdks::detail::PaddedConvolution>(n, dom.dim, kernel);
    }

    HartreeField apply_density(const Eigen::ArrayXd& rho) const {
        return {conv_->apply(rho), softened_, softened_ ? softening_ : 0.0};
    }

    const BoxDomain& domain() const { return dom_; }

private:
    static double singular_cell_average(const std::array<double, 3>& h, int dim) {
        // midpoint subsampling of 1/|x| over the cell centered at the origin
        const int s = 32;
        double acc = 0.0;
        for (int i = 0; i < s; ++i)
            for (int j = 0; j < (dim > 1 ? s : 1); ++j)
                for (int k = 0; k < (dim > 2 ? s : 1); ++k) {
                    const double x = (i + 0.5) / s - 0.5;
                    const double y = dim > 1 ? (j + 0.5) / s - 0.5 : 0.0;
                    const double z = dim > 2 ? (k + 0.5) / s - 0.5 : 0.0;
                    const double r = std::sqrt(x * h[0] * x * h[0] + y * h[1] * y * h[1] +
                                               z * h[2] * z * h[2]);
                    acc += 1.0 / r;
                }
        const int cells = s * (dim > 1 ? s : 1) * (dim > 2 ? s : 1);
        return acc / double(cells);
    }

    BoxDomain dom_;
    bool softened_;
    double softening_;
    std::unique_ptr<tdks::detail::PaddedConvolution> conv_;
};

inline HartreeField hartree(const SpectralField& phi, const HartreeOperator& op) {
    if (phi.basis->domain() != op.domain())
        throw std::invalid_argument("hartree: field/operator domain mismatch");
    const Eigen::ArrayXcd psi = synthesize(phi);
    return op.apply_density(psi.abs2());
}

// F(Phi) = (V_H(Phi) + V_xc(Phi)) Phi projected onto the retained basis.
inline SpectralField nonlinear_F(const SpectralField& phi, const XcModel& xc,
                                 const HartreeOperator& op) {
    const Eigen::ArrayXcd psi = synthesize(phi);
    const Eigen::ArrayXd rho = psi.abs2();
    Eigen::ArrayXd pot = op.apply_density(rho).values;
    if (xc.enabled()) pot += xc.evaluate(rho);
    return SpectralField(phi.basis, phi.basis->project(pot * psi));
}

// ---------------------------------------------------------------------------
// mollifier
// ---------------------------------------------------------------------------

// Standard bump exp(-1/(1-|x|^2)) on |x| < 1, normalized to unit mass in the
// ambient dimension; phi_eps(x) = eps^-d phi(x/eps).
struct MollifierSpec {
    double epsilon = 0.1;
};

namespace detail {

inline double bump_raw(double r) {
    if (r >= 1.0) return 0.0;
    const double d = 1.0 - r * r;
    return std::exp(-1.0 / d);
}

inline double bump_raw_deriv(double r) {
    if (r >= 1.0) return 0.0;
    const double d = 1.0 - r * r;
    return bump_raw(r) * (-2.0 * r / (d * d));
}

inline double sphere_surface(int dim) {
    switch (dim) {
        case 1: return 2.0;
        case 2: return 2.0 * M_PI;
        case 3: return 4.0 * M_PI;
    }
    throw std::invalid_argument("sphere_surface: dim must be 1..3");
}

// composite 24-point Gauss rule over [a, b] (smooth compactly supported
// integrands; accuracy well below 1e-12)
template <typename Fn>
double radial_integral(Fn&& f, double a, double b, int panels = 64) {
    static const std::array<double, 12> xs = {
        0.0640568928626056, 0.1911188674736163, 0.3150426796961634, 0.4337935076260451,
        0.5454214713888396, 0.6480936519369755, 0.7401241915785544, 0.8200019859739029,
        0.8864155270044011, 0.9382745520027328, 0.9747285559713095, 0.9951872199970213};
    static const std::array<double, 12> ws = {
        0.1279381953467522, 0.1258374563468283, 0.1216704729278034, 0.1155056680537256,
        0.1074442701159656, 0.0976186521041139, 0.0861901615319533, 0.0733464814110803,
        0.0592985849154368, 0.0442774388174198, 0.0285313886289337, 0.0123412297999872};
    double total = 0.0;
    const double hp = (b - a) / double(panels);
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * hp, half = 0.5 * hp;
        for (int i = 0; i < 12; ++i) {
            total += half * ws[size_t(i)] * f(mid + half * xs[size_t(i)]);
            total += half * ws[size_t(i)] * f(mid - half * xs[size_t(i)]);
        }
    }
    return total;
}

inline double bump_normalization(int dim) {
    static std::array<double, 4> cache{0, 0, 0, 0};
    if (cache[size_t(dim)] == 0.0)
        cache[size_t(dim)] = sphere_surface(dim) * radial_integral(
                                                       [dim](double r) {
                                                           return bump_raw(r) *
                                                                  std::pow(r, dim - 1);
                                                       },
                                                       0.0, 1.0);
    return cache[size_t(dim)];
}

}  // namespace detail

// unnormalized profile value phi(x) for |x| = r (dimension-aware normalization)
inline double mollifier_profile(int dim, double r) {
    return detail::bump_raw(r) / detail::bump_normalization(dim);
}

struct MollifierNorms {
    double phi1_l1 = 0.0;       // ||phi_1||_{L^1}, equals 1 up to quadrature
    double grad_phi_eps_l1 = 0.0;  // ||grad phi_eps||_{L^1} = eps^-1 ||grad phi_1||_{L^1}
};

inline MollifierNorms mollifier_norms(int dim, const MollifierSpec& spec) {
    if (!(spec.epsilon > 0.0)) throw std::invalid_argument("mollifier_norms: epsilon must be > 0");
    MollifierNorms n;
    const double c = detail::bump_normalization(dim);
    n.phi1_l1 = detail::sphere_surface(dim) *
                detail::radial_integral(
                    [&](double r) { return detail::bump_raw(r) / c * std::pow(r, dim - 1); }, 0.0,
                    1.0);
    const double eps = spec.epsilon;
    // |grad phi_eps|(x) = eps^{-d-1} |phi'(|x|/eps)|; integrate over |x| < eps
    n.grad_phi_eps_l1 =
        detail::sphere_surface(dim) *
        detail::radial_integral(
            [&](double r) {
                return std::pow(eps, -dim - 1) * std::abs(detail::bump_raw_deriv(r / eps)) / c *
                       std::pow(r, dim - 1);
            },
            0.0, eps);
    return n;
}

// Grid mollification: zero-extension beyond the box, convolution against the
// discretely unit-mass kernel, restriction to the box.
class Mollifier {
public:
    Mollifier(const BoxDomain& dom, double eps) : dom_(dom), eps_(eps) {
        if (!(eps > 0.0)) throw std::invalid_argument("Mollifier: epsilon must be > 0");
        double lmin = dom.lengths[0];
        for (int a = 1; a < dom.dim; ++a) lmin = std::min(lmin, dom.lengths[a]);
        if (eps > lmin)
            throw std::invalid_argument(
                "Mollifier: epsilon exceeds the box (support leaves the resolvable region)");
        std::array<double, 3> h{1.0, 1.0, 1.0};
        for (int a = 0; a < dom.dim; ++a) h[a] = dom.spacing(a);
        const double w = dom.cell_volume();
        const double c = detail::bump_normalization(dom.dim);
        std::array<std::size_t, 3> n{1, 1, 1};
        for (int a = 0; a < dom.dim; ++a) n[a] = std::size_t(dom.nodes(a));
        // discrete mass, then normalize the tabulated kernel to unit mass
        double mass = 0.0;
        std::array<long, 3> lim{0, 0, 0};
        for (int a = 0; a < dom.dim; ++a) lim[a] = long(n[a]) - 1;
        auto raw = [&](const std::array<long, 3>& d) {
            double r2 = 0.0;
            for (int a = 0; a < dom_.dim; ++a) {
                const double x = double(d[a]) * h[a];
                r2 += x * x;
            }
            const double r = std::sqrt(r2) / eps_;
            return w * std::pow(eps_, -dom_.dim) * detail::bump_raw(r) / c;
        };
        std::array<long, 3> d{0, 0, 0};
        for (d[0] = -lim[0]; d[0] <= lim[0]; ++d[0])
            for (d[1] = -lim[1]; d[1] <= lim[1]; ++d[1])
                for (d[2] = -lim[2]; d[2] <= lim[2]; ++d[2]) mass += raw(d);
        if (!(mass > 0.0))
            throw std::invalid_argument("Mollifier: epsilon unresolvable on this grid");
        mass_ = mass;
        auto kernel = [&, mass](const std::array<long, 3>& dd) { return raw(dd) / mass; };
        conv_ = std::make_unique<tdks::detail::PaddedConvolution>(n, dom.dim, kernel);
    }

    Eigen::ArrayXd apply(const Eigen::ArrayXd& f) const { return conv_->apply(f); }

    Eigen::ArrayXcd apply(const Eigen::ArrayXcd& f) const {
        Eigen::ArrayXd re = conv_->apply(f.real());
        Eigen::ArrayXd im = conv_->apply(f.imag());
        return re.cast<std::complex<double>>() +
               std::complex<double>(0.0, 1.0) * im.cast<std::complex<double>>();
    }

    double epsilon() const { return eps_; }
    double discrete_mass() const { return mass_; }  // pre-normalization quadrature mass

private:
    BoxDomain dom_;
    double eps_;
    double mass_ = 1.0;
    std::unique_ptr<tdks::detail::PaddedConvolution> conv_;
};

inline Eigen::ArrayXd mollify(const Eigen::ArrayXd& target, const BoxDomain& dom,
                              const MollifierSpec& spec) {
    return Mollifier(dom, spec.epsilon).apply(target);
}

inline Eigen::ArrayXcd mollify(const Eigen::ArrayXcd& target, const BoxDomain& dom,
                               const MollifierSpec& spec) {
    return Mollifier(dom, spec.epsilon).apply(target);
}

// ---------------------------------------------------------------------------
// empirical Lipschitz probes
// ---------------------------------------------------------------------------

enum class LipschitzId {
    hartree_l2,       // || f(P) - f(L) ||      <= C_a (|P|_{H1}^2 + |L|_{H1}^2) |P - L|
    hartree_h2,       // || f(P) - f(L) ||_{H2} <= C_c (|P|_{H2}^2 + |L|_{H2}^2) |P - L|_{H2}
    hartree_h2_bound, // || f(P) ||_{H2}        <= C_b |P|_{H1}^2 |P|_{H2}
    hartree_grad,     // || grad(f(P) - f(L)) || <= C_H (|P|_{H1}^2 + |L|_{H1}^2) |P - L|_{H1}
    xc_l2,            // || xc(P)P - xc(L)L ||      <= K  |P - L|
    xc_h2,            // || xc(P)P - xc(L)L ||_{H2} <= K~ |P - L|_{H2}
    xc_rough_l2,      // || xc(P)P - xc(L)L ||      <= K1 |P - L|        (A5b form)
    xc_rough_h1       // || xc(P)P - xc(L)L ||_{H1} <= K2 |P - L|_{H1}   (A5b form)
};

inline const char* lipschitz_id_name(LipschitzId id) {
    switch (id) {
        case LipschitzId::hartree_l2: return "hartree_l2";
        case LipschitzId::hartree_h2: return "hartree_h2";
        case LipschitzId::hartree_h2_bound: return "hartree_h2_bound";
        case LipschitzId::hartree_grad: return "hartree_grad";
        case LipschitzId::xc_l2: return "xc_l2";
        case LipschitzId::xc_h2: return "xc_h2";
        case LipschitzId::xc_rough_l2: return "xc_rough_l2";
        case LipschitzId::xc_rough_h1: return "xc_rough_h1";
    }
    return "unknown";
}

struct LipschitzReport {
    LipschitzId id;
    int trials = 0;
    int skipped = 0;
    double max_quotient = 0.0;
    double mean_quotient = 0.0;
    double declared = std::numeric_limits<double>::quiet_NaN();
    bool has_declared = false;
    bool pass = true;       // max <= declared * (1 + tolerance) when declared
    bool stabilized = true; // no quotient beyond 3x the running max after 50 samples
    std::vector<double> quotients;
};

namespace detail {

struct ProbeNorms {
    double l2, h1, h2, grad;
};

inline ProbeNorms probe_norms(const SpectralField& f) {
    NormReport n = norms(f);
    return {n.l2, n.h1, n.h2, n.grad};
}

}  // namespace detail

// Samples quotient = (left side) / (structural right-side factor) over random
// field pairs and reports the empirical constant. Degenerate pairs (P = L)
// are skipped and counted.
template <typename PairSampler>
LipschitzReport lipschitz_probe(LipschitzId id, PairSampler&& sampler, int trials,
                                const XcModel& xc, const HartreeOperator& hartree_op,
                                std::optional<double> declared = std::nullopt,
                                double tolerance = 1e-6) {
    if (trials < 1) throw std::invalid_argument("lipschitz_probe: trials must be >= 1");
    LipschitzReport rep;
    rep.id = id;
    rep.trials = trials;
    if (declared) {
        rep.declared = *declared;
        rep.has_declared = true;
    }

    auto fP = [&](const SpectralField& p) -> SpectralField {
        const Eigen::ArrayXcd psi = synthesize(p);
        return SpectralField(p.basis, p.basis->project(hartree_op.apply_density(psi.abs2()).values * psi));
    };
    auto xcP = [&](const SpectralField& p) -> SpectralField {
        const Eigen::ArrayXcd psi = synthesize(p);
        return SpectralField(p.basis, p.basis->project(xc.evaluate(psi.abs2()) * psi));
    };

    double sum = 0.0;
    double running_max = 0.0;
    for (int t = 0; t < trials; ++t) {
        auto [P, L] = sampler();
        const SpectralField diff(P.basis, P.coeffs - L.coeffs);
        const auto nP = detail::probe_norms(P);
        const auto nL = detail::probe_norms(L);
        const auto nD = detail::probe_norms(diff);

        double lhs = 0.0, rhs = 0.0;
        switch (id) {
            case LipschitzId::hartree_l2: {
                const SpectralField d(P.basis, fP(P).coeffs - fP(L).coeffs);
                lhs = norms(d).l2;
                rhs = (nP.h1 * nP.h1 + nL.h1 * nL.h1) * nD.l2;
                break;
            }
            case LipschitzId::hartree_h2: {
                const SpectralField d(P.basis, fP(P).coeffs - fP(L).coeffs);
                lhs = norms(d).h2;
                rhs = (nP.h2 * nP.h2 + nL.h2 * nL.h2) * nD.h2;
                break;
            }
            case LipschitzId::hartree_h2_bound: {
                lhs = norms(fP(P)).h2;
                rhs = nP.h1 * nP.h1 * nP.h2;
                break;
            }
            case LipschitzId::hartree_grad: {
                const SpectralField d(P.basis, fP(P).coeffs - fP(L).coeffs);
                lhs = norms(d).grad;
                rhs = (nP.h1 * nP.h1 + nL.h1 * nL.h1) * nD.h1;
                break;
            }
            case LipschitzId::xc_l2:
            case LipschitzId::xc_rough_l2: {
                const SpectralField d(P.basis, xcP(P).coeffs - xcP(L).coeffs);
                lhs = norms(d).l2;
                rhs = nD.l2;
                break;
            }
            case LipschitzId::xc_h2: {
                const SpectralField d(P.basis, xcP(P).coeffs - xcP(L).coeffs);
                lhs = norms(d).h2;
                rhs = nD.h2;
                break;
            }
            case LipschitzId::xc_rough_h1: {
                const SpectralField d(P.basis, xcP(P).coeffs - xcP(L).coeffs);
                lhs = norms(d).h1;
                rhs = nD.h1;
                break;
            }
        }
        if (rhs == 0.0) {
            ++rep.skipped;
            continue;
        }
        const double q = lhs / rhs;
        if (rep.quotients.size() >= 50 && running_max > 0.0 && q > 3.0 * running_max)
            rep.stabilized = false;
        running_max = std::max(running_max, q);
        rep.quotients.push_back(q);
        sum += q;
    }
    rep.max_quotient = running_max;
    rep.mean_quotient = rep.quotients.empty() ? 0.0 : sum / double(rep.quotients.size());
    if (rep.has_declared) rep.pass = rep.max_quotient <= rep.declared * (1.0 + tolerance);
    return rep;
}

}  // namespace tdks
