#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tdks {

// Rectangular box (0,L_1)x...x(0,L_dim) with homogeneous Dirichlet boundary.
// Real-space sampling lives on the uniform interior lattice
//   x_k = (k+1) * L/(N+1),  k = 0..N-1  (per axis, N = grid_points),
// which is exactly the lattice on which the sine basis is discretely
// orthonormal under the trapezoidal weight h = L/(N+1).
struct BoxDomain {
    int dim = 1;
    std::array<double, 3> lengths{0.0, 0.0, 0.0};
    std::array<int, 3> grid_points{0, 0, 0};

    BoxDomain() = default;
    BoxDomain(int d, std::array<double, 3> len, std::array<int, 3> gp)
        : dim(d), lengths(len), grid_points(gp) {
        validate();
    }

    void validate() const {
        if (dim < 1 || dim > 3) throw std::invalid_argument("BoxDomain: dim must be 1, 2 or 3");
        for (int a = 0; a < dim; ++a) {
            if (!(lengths[a] > 0.0))
                throw std::invalid_argument("BoxDomain: lengths must be positive");
            if (grid_points[a] < 4)
                throw std::invalid_argument("BoxDomain: grid_points must be >= 4");
        }
    }

    double spacing(int axis) const { return lengths[axis] / double(grid_points[axis] + 1); }
    double coord(int axis, int k) const { return double(k + 1) * spacing(axis); }
    int nodes(int axis) const { return grid_points[axis]; }

    std::size_t total_nodes() const {
        std::size_t t = 1;
        for (int a = 0; a < dim; ++a) t *= std::size_t(grid_points[a]);
        return t;
    }

    // quadrature weight of one node (all nodes share it)
    double cell_volume() const {
        double v = 1.0;
        for (int a = 0; a < dim; ++a) v *= spacing(a);
        return v;
    }

    std::size_t flatten(const std::array<int, 3>& k) const {
        std::size_t f = 0;
        for (int a = 0; a < dim; ++a) f = f * std::size_t(grid_points[a]) + std::size_t(k[a]);
        return f;
    }

    void unflatten(std::size_t f, std::array<int, 3>& k) const {
        for (int a = dim - 1; a >= 0; --a) {
            k[a] = int(f % std::size_t(grid_points[a]));
            f /= std::size_t(grid_points[a]);
        }
        for (int a = dim; a < 3; ++a) k[a] = 0;
    }

    std::array<double, 3> node_coords(std::size_t f) const {
        std::array<int, 3> k;
        unflatten(f, k);
        std::array<double, 3> x{0.0, 0.0, 0.0};
        for (int a = 0; a < dim; ++a) x[a] = coord(a, k[a]);
        return x;
    }

    bool operator==(const BoxDomain& o) const {
        if (dim != o.dim) return false;
        for (int a = 0; a < dim; ++a)
            if (lengths[a] != o.lengths[a] || grid_points[a] != o.grid_points[a]) return false;
        return true;
    }
    bool operator!=(const BoxDomain& o) const { return !(*this == o); }
};

// Quadrature inner product (f, g) = h^d * sum conj(f) g over interior nodes.
inline std::complex<double> grid_inner(const BoxDomain& dom, const Eigen::ArrayXcd& f,
                                       const Eigen::ArrayXcd& g) {
    if (f.size() != g.size() || std::size_t(f.size()) != dom.total_nodes())
        throw std::invalid_argument("grid_inner: size mismatch");
    return dom.cell_volume() * (f.conjugate() * g).sum();
}

inline double grid_norm(const BoxDomain& dom, const Eigen::ArrayXcd& f) {
    return std::sqrt(dom.cell_volume() * f.abs2().sum());
}

inline double grid_norm(const BoxDomain& dom, const Eigen::ArrayXd& f) {
    return std::sqrt(dom.cell_volume() * f.square().sum());
}

// Evaluate a callable f(x[3]) on every interior node.
template <typename Fn>
Eigen::ArrayXd sample_real(const BoxDomain& dom, Fn&& f) {
    Eigen::ArrayXd out(long(dom.total_nodes()));
    for (std::size_t i = 0; i < dom.total_nodes(); ++i) out[long(i)] = f(dom.node_coords(i));
    return out;
}

template <typename Fn>
Eigen::ArrayXcd sample_complex(const BoxDomain& dom, Fn&& f) {
    Eigen::ArrayXcd out(long(dom.total_nodes()));
    for (std::size_t i = 0; i < dom.total_nodes(); ++i) out[long(i)] = f(dom.node_coords(i));
    return out;
}

}  // namespace tdks
