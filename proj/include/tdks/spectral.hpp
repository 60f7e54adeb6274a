#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

#include "tdks/grid.hpp"

namespace tdks {

// Multi-index of a Dirichlet-Laplacian eigenfunction, every component >= 1.
struct ModeIndex {
    std::array<int, 3> j{1, 1, 1};

    void validate(int dim) const {
        for (int a = 0; a < dim; ++a)
            if (j[a] < 1) throw std::invalid_argument("ModeIndex: components must be >= 1");
    }
};

inline double mode_eigenvalue(const BoxDomain& dom, const ModeIndex& idx) {
    idx.validate(dom.dim);
    double lam = 0.0;
    for (int a = 0; a < dom.dim; ++a) {
        const double w = double(idx.j[a]) * M_PI / dom.lengths[a];
        lam += w * w;
    }
    return lam;
}

// Eigenfunction evaluator: product of L^2-normalized sines.
struct EigenFunction {
    BoxDomain domain;
    ModeIndex index;

    double operator()(const std::array<double, 3>& x) const {
        double v = 1.0;
        for (int a = 0; a < domain.dim; ++a)
            v *= std::sqrt(2.0 / domain.lengths[a]) *
                 std::sin(double(index.j[a]) * M_PI * x[a] / domain.lengths[a]);
        return v;
    }
};

struct Eigenpair {
    double eigenvalue;
    EigenFunction eigenfunction;
};

inline Eigenpair eigenpair(const BoxDomain& dom, const ModeIndex& idx) {
    return {mode_eigenvalue(dom, idx), EigenFunction{dom, idx}};
}

// The first m modes under the fixed enumeration: eigenvalue ascending,
// lexicographic (j_1,j_2,j_3) tie-break. Holds the per-axis sine matrices
// used by project/synthesize; immutable after construction.
class Basis {
public:
    static std::shared_ptr<const Basis> create(const BoxDomain& dom, int m) {
        return std::shared_ptr<const Basis>(new Basis(dom, m));
    }

    const BoxDomain& domain() const { return domain_; }
    int order() const { return m_; }
    const std::vector<ModeIndex>& modes() const { return modes_; }
    const Eigen::VectorXd& eigenvalues() const { return lambda_; }
    double lambda_min() const { return lambda_[0]; }
    int axis_max_index(int axis) const { return jmax_[axis]; }

    // c_j = h^d * sum_x f(x) Psi_j(x): exact for fields band-limited to the
    // grid's resolvable sine range.
    Eigen::VectorXcd project(const Eigen::ArrayXcd& grid_values) const {
        if (std::size_t(grid_values.size()) != domain_.total_nodes())
            throw std::invalid_argument("Basis::project: grid size mismatch");
        const double w = domain_.cell_volume();
        Eigen::VectorXcd hull;
        if (domain_.dim == 1) {
            Eigen::Map<const Eigen::VectorXcd> f(grid_values.data(), grid_values.size());
            hull = w * (sine_[0].transpose() * f);
        } else if (domain_.dim == 2) {
            const int n0 = domain_.nodes(0), n1 = domain_.nodes(1);
            Eigen::Map<const Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic,
                                           Eigen::RowMajor>>
                F(grid_values.data(), n0, n1);
            Eigen::MatrixXcd H = w * (sine_[0].transpose() * F * sine_[1]);
            hull = Eigen::Map<Eigen::VectorXcd>(H.data(), H.size());
        } else {
            hull = project_3d(grid_values) * w;
        }
        Eigen::VectorXcd out(m_);
        for (int q = 0; q < m_; ++q) out[q] = hull[hull_pos_[q]];
        return out;
    }

    Eigen::ArrayXcd synthesize(const Eigen::VectorXcd& coeffs) const {
        if (coeffs.size() != m_) throw std::invalid_argument("Basis::synthesize: order mismatch");
        Eigen::VectorXcd hull = Eigen::VectorXcd::Zero(hull_size_);
        for (int q = 0; q < m_; ++q) hull[hull_pos_[q]] = coeffs[q];
        if (domain_.dim == 1) {
            Eigen::VectorXcd g = sine_[0] * hull;
            return Eigen::Map<Eigen::ArrayXcd>(g.data(), g.size());
        }
        if (domain_.dim == 2) {
            Eigen::Map<const Eigen::MatrixXcd> H(hull.data(), jmax_[0], jmax_[1]);
            Eigen::Matrix<std::complex<double>, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>
                G = sine_[0] * H * sine_[1].transpose();
            return Eigen::Map<Eigen::ArrayXcd>(G.data(), G.size());
        }
        return synthesize_3d(hull);
    }

private:
    Basis(const BoxDomain& dom, int m) : domain_(dom), m_(m) {
        dom.validate();
        if (m < 1) throw std::invalid_argument("Basis: order m must be >= 1");
        enumerate_modes();
        // anti-aliasing guard: grid must oversample the largest retained index
        for (int a = 0; a < domain_.dim; ++a) {
            if (domain_.grid_points[a] < 2 * jmax_[a] + 2)
                throw std::invalid_argument(
                    "Basis: grid too coarse for requested modes (aliasing guard), axis " +
                    std::to_string(a) + " needs grid_points >= " +
                    std::to_string(2 * jmax_[a] + 2));
        }
        build_sine_matrices();
        build_hull_map();
    }

    void enumerate_modes() {
        int box = 2;
        while (true) {
            std::vector<std::pair<double, std::array<int, 3>>> cand;
            std::array<int, 3> lim{1, 1, 1};
            for (int a = 0; a < domain_.dim; ++a) lim[a] = box;
            std::array<int, 3> j{1, 1, 1};
            for (j[0] = 1; j[0] <= lim[0]; ++j[0])
                for (j[1] = 1; j[1] <= lim[1]; ++j[1])
                    for (j[2] = 1; j[2] <= lim[2]; ++j[2])
                        cand.push_back({mode_eigenvalue(domain_, ModeIndex{j}), j});
            std::sort(cand.begin(), cand.end(), [](const auto& a, const auto& b) {
                if (a.first != b.first) return a.first < b.first;
                return a.second < b.second;
            });
            if (int(cand.size()) >= m_) {
                // the enumeration is complete if every index outside the box
                // has a larger eigenvalue than the m-th candidate
                double min_outside = std::numeric_limits<double>::infinity();
                for (int a = 0; a < domain_.dim; ++a) {
                    double lam = 0.0;
                    for (int b = 0; b < domain_.dim; ++b) {
                        const int jj = (b == a) ? box + 1 : 1;
                        const double w = double(jj) * M_PI / domain_.lengths[b];
                        lam += w * w;
                    }
                    min_outside = std::min(min_outside, lam);
                }
                if (cand[std::size_t(m_ - 1)].first < min_outside) {
                    modes_.resize(std::size_t(m_));
                    lambda_.resize(m_);
                    jmax_ = {1, 1, 1};
                    for (int q = 0; q < m_; ++q) {
                        modes_[std::size_t(q)] = ModeIndex{cand[std::size_t(q)].second};
                        lambda_[q] = cand[std::size_t(q)].first;
                        for (int a = 0; a < domain_.dim; ++a)
                            jmax_[a] = std::max(jmax_[a], cand[std::size_t(q)].second[a]);
                    }
                    return;
                }
            }
            box *= 2;
            if (box > 1 << 20) throw std::runtime_error("Basis: mode enumeration overflow");
        }
    }

    void build_sine_matrices() {
        for (int a = 0; a < domain_.dim; ++a) {
            const int n = domain_.nodes(a);
            const double L = domain_.lengths[a];
            const double norm = std::sqrt(2.0 / L);
            sine_[a].resize(n, jmax_[a]);
            for (int k = 0; k < n; ++k)
                for (int j = 1; j <= jmax_[a]; ++j)
                    sine_[a](k, j - 1) = norm * std::sin(double(j) * M_PI * domain_.coord(a, k) / L);
        }
    }

    void build_hull_map() {
        hull_size_ = 1;
        for (int a = 0; a < domain_.dim; ++a) hull_size_ *= jmax_[a];
        hull_pos_.resize(std::size_t(m_));
        for (int q = 0; q < m_; ++q) {
            const auto& j = modes_[std::size_t(q)].j;
            long pos;
            if (domain_.dim == 1) {
                pos = j[0] - 1;
            } else if (domain_.dim == 2) {
                // column-major (j0, j1) to match the Eigen matrix maps above
                pos = (j[0] - 1) + long(jmax_[0]) * (j[1] - 1);
            } else {
                pos = (j[0] - 1) + long(jmax_[0]) * ((j[1] - 1) + long(jmax_[1]) * (j[2] - 1));
            }
            hull_pos_[std::size_t(q)] = pos;
        }
    }

    // 3D contractions, hull stored column-major over (j0, j1, j2).
    Eigen::ArrayXcd synthesize_3d(const Eigen::VectorXcd& hull) const {
        const int n0 = domain_.nodes(0), n1 = domain_.nodes(1), n2 = domain_.nodes(2);
        const int J0 = jmax_[0], J1 = jmax_[1], J2 = jmax_[2];
        // contract axis 0: A(x0; j1, j2) = sum_j0 S0(x0, j0) H(j0; j1, j2)
        Eigen::Map<const Eigen::MatrixXcd> H(hull.data(), J0, long(J1) * J2);
        Eigen::MatrixXcd A = sine_[0] * H;  // n0 x (J1*J2)
        // contract axis 1 slice-wise over j2
        Eigen::MatrixXcd B(long(n0) * n1, J2);
        for (int c = 0; c < J2; ++c) {
            Eigen::Map<const Eigen::MatrixXcd> Ac(A.data() + long(c) * n0 * J1, n0, J1);
            Eigen::MatrixXcd Bc = Ac * sine_[1].transpose();  // n0 x n1
            Eigen::Map<Eigen::MatrixXcd>(B.data() + long(c) * n0 * n1, n0, n1) = Bc;
        }
        // contract axis 2: G(x0, x1; x2) = sum_j2 B(x0, x1; j2) S2(x2, j2)
        Eigen::MatrixXcd G = B * sine_[2].transpose();  // (n0*n1) x n2
        // write out row-major over (x0, x1, x2)
        Eigen::ArrayXcd out(long(n0) * n1 * n2);
        for (int x0 = 0; x0 < n0; ++x0)
            for (int x1 = 0; x1 < n1; ++x1)
                for (int x2 = 0; x2 < n2; ++x2)
                    out[(long(x0) * n1 + x1) * n2 + x2] = G(long(x1) * n0 + x0, x2);
        return out;
    }

    Eigen::VectorXcd project_3d(const Eigen::ArrayXcd& grid_values) const {
        const int n0 = domain_.nodes(0), n1 = domain_.nodes(1), n2 = domain_.nodes(2);
        const int J0 = jmax_[0], J1 = jmax_[1], J2 = jmax_[2];
        Eigen::MatrixXcd G(long(n1) * n0, n2);
        for (int x0 = 0; x0 < n0; ++x0)
            for (int x1 = 0; x1 < n1; ++x1)
                for (int x2 = 0; x2 < n2; ++x2)
                    G(long(x1) * n0 + x0, x2) = grid_values[(long(x0) * n1 + x1) * n2 + x2];
        Eigen::MatrixXcd B = G * sine_[2];  // (n0*n1) x J2
        Eigen::MatrixXcd A(long(n0), long(J1) * J2);
        for (int c = 0; c < J2; ++c) {
            Eigen::Map<const Eigen::MatrixXcd> Bc(B.data() + long(c) * n0 * n1, n0, n1);
            Eigen::MatrixXcd Ac = Bc * sine_[1];  // n0 x J1
            Eigen::Map<Eigen::MatrixXcd>(A.data() + long(c) * n0 * J1, n0, J1) = Ac;
        }
        Eigen::MatrixXcd H = sine_[0].transpose() * A;  // J0 x (J1*J2)
        return Eigen::Map<Eigen::VectorXcd>(H.data(), H.size());
    }

    BoxDomain domain_;
    int m_;
    std::vector<ModeIndex> modes_;
    Eigen::VectorXd lambda_;
    std::array<int, 3> jmax_{1, 1, 1};
    std::array<Eigen::MatrixXd, 3> sine_;
    std::vector<long> hull_pos_;
    long hull_size_ = 0;
};

// Complex coefficient vector over the retained eigenbasis; the discrete
// stand-in for every field-valued symbol of the model.
struct SpectralField {
    std::shared_ptr<const Basis> basis;
    Eigen::VectorXcd coeffs;

    SpectralField() = default;
    SpectralField(std::shared_ptr<const Basis> b, Eigen::VectorXcd c)
        : basis(std::move(b)), coeffs(std::move(c)) {
        if (!basis) throw std::invalid_argument("SpectralField: null basis");
        if (coeffs.size() != basis->order())
            throw std::invalid_argument("SpectralField: coefficient count must equal m");
        if (!coeffs.allFinite())
            throw std::invalid_argument("SpectralField: amplitudes must be finite");
    }

    static SpectralField zero(std::shared_ptr<const Basis> b) {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(b->order());
        return SpectralField(std::move(b), std::move(c));
    }

    static SpectralField unit_mode(std::shared_ptr<const Basis> b, int mode,
                                   std::complex<double> amp = 1.0) {
        Eigen::VectorXcd c = Eigen::VectorXcd::Zero(b->order());
        c[mode] = amp;
        return SpectralField(std::move(b), std::move(c));
    }

    int order() const { return basis->order(); }
    double l2() const { return coeffs.norm(); }
};

struct NormReport {
    double l2 = 0.0;
    double grad = 0.0;
    double lap = 0.0;
    double h1 = 0.0;
    double h2 = 0.0;
    double h_minus1 = 0.0;
};

// Spectral norms. H^2 counts derivatives with multinomial multiplicity, so the
// per-mode weight is exactly 1 + lambda + lambda^2 and || . ||_{H^2} dominates
// both the H^1 and the Delta norm mode-wise.
inline NormReport norms(const SpectralField& f) {
    const auto& lam = f.basis->eigenvalues();
    NormReport r;
    double l2s = 0.0, gs = 0.0, ls = 0.0, hm = 0.0;
    for (int q = 0; q < f.order(); ++q) {
        const double a2 = std::norm(f.coeffs[q]);
        l2s += a2;
        gs += lam[q] * a2;
        ls += lam[q] * lam[q] * a2;
        hm += a2 / (1.0 + lam[q]);
    }
    r.l2 = std::sqrt(l2s);
    r.grad = std::sqrt(gs);
    r.lap = std::sqrt(ls);
    r.h1 = std::sqrt(l2s + gs);
    r.h2 = std::sqrt(l2s + gs + ls);
    r.h_minus1 = std::sqrt(hm);
    return r;
}

// B6 equivalence constant ||.||_{H^2} <= C_Z ||Delta .||, sharp at lambda_min.
inline double z_equivalence_constant(const BoxDomain& dom) {
    const double lmin = mode_eigenvalue(dom, ModeIndex{{1, 1, 1}});
    return std::sqrt(1.0 / (lmin * lmin) + 1.0 / lmin + 1.0);
}

inline SpectralField truncate(const SpectralField& f, int m) {
    if (m < 1 || m > f.order()) throw std::invalid_argument("truncate: bad target order");
    auto b = Basis::create(f.basis->domain(), m);
    return SpectralField(b, f.coeffs.head(m));
}

struct TruncationReport {
    double margin_l2 = 0.0;    // ||full||^2 - ||truncated||^2
    double margin_grad = 0.0;
    double margin_lap = 0.0;
    bool pass = false;
};

// B3: truncation never increases the L^2, gradient or Laplacian norm.
inline TruncationReport truncation_check(const SpectralField& full,
                                         const SpectralField& truncated) {
    if (full.basis->domain() != truncated.basis->domain())
        throw std::invalid_argument("truncation_check: fields on mismatched domains");
    if (truncated.order() > full.order())
        throw std::invalid_argument("truncation_check: truncated order exceeds full order");
    const NormReport nf = norms(full);
    const NormReport nt = norms(truncated);
    TruncationReport r;
    r.margin_l2 = nf.l2 * nf.l2 - nt.l2 * nt.l2;
    r.margin_grad = nf.grad * nf.grad - nt.grad * nt.grad;
    r.margin_lap = nf.lap * nf.lap - nt.lap * nt.lap;
    const double tol = 1e-12 * std::max(1.0, nf.lap * nf.lap);
    r.pass = r.margin_l2 >= -tol && r.margin_grad >= -tol && r.margin_lap >= -tol;
    return r;
}

// project() taking raw grid samples or any evaluable field
inline SpectralField project(const Eigen::ArrayXcd& grid_values,
                             std::shared_ptr<const Basis> basis) {
    return SpectralField(basis, basis->project(grid_values));
}

template <typename Fn>
SpectralField project_function(Fn&& f, std::shared_ptr<const Basis> basis) {
    return project(sample_complex(basis->domain(), std::forward<Fn>(f)), basis);
}

inline Eigen::ArrayXcd synthesize(const SpectralField& f) { return f.basis->synthesize(f.coeffs); }

}  // namespace tdks
