#pragma once

#include <array>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

#include <Eigen/Dense>

namespace tdks::detail {

inline std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 FFT. Sizes are forced to powers of two by the
// padding scheme below, so no general-length machinery is needed.
inline void fft_radix2(std::complex<double>* a, std::size_t n, bool inverse) {
    if (n == 0 || (n & (n - 1)) != 0)
        throw std::invalid_argument("fft: length must be a power of two");
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j |= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    const double sign = inverse ? 1.0 : -1.0;
    std::vector<std::complex<double>> tw;
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const std::size_t half = len / 2;
        tw.resize(half);
        for (std::size_t k = 0; k < half; ++k) {
            const double ang = sign * 2.0 * M_PI * double(k) / double(len);
            tw[k] = {std::cos(ang), std::sin(ang)};
        }
        for (std::size_t i = 0; i < n; i += len) {
            for (std::size_t k = 0; k < half; ++k) {
                const auto u = a[i + k];
                const auto v = a[i + k + half] * tw[k];
                a[i + k] = u + v;
                a[i + k + half] = u - v;
            }
        }
    }
    if (inverse) {
        const double inv = 1.0 / double(n);
        for (std::size_t i = 0; i < n; ++i) a[i] *= inv;
    }
}

// Multi-dimensional FFT over a row-major flattened array.
inline void fft_nd(std::vector<std::complex<double>>& data,
                   const std::array<std::size_t, 3>& dims, int ndim, bool inverse) {
    std::size_t total = 1;
    for (int d = 0; d < ndim; ++d) total *= dims[d];
    if (data.size() != total) throw std::invalid_argument("fft_nd: size mismatch");

    std::vector<std::complex<double>> line;
    for (int axis = 0; axis < ndim; ++axis) {
        const std::size_t n = dims[axis];
        std::size_t stride = 1;
        for (int d = axis + 1; d < ndim; ++d) stride *= dims[d];
        const std::size_t nlines = total / n;
        line.resize(n);
        for (std::size_t l = 0; l < nlines; ++l) {
            // base index of line l along `axis`
            const std::size_t block = l / stride;
            const std::size_t offset = l % stride;
            const std::size_t base = block * stride * n + offset;
            for (std::size_t k = 0; k < n; ++k) line[k] = data[base + k * stride];
            fft_radix2(line.data(), n, inverse);
            for (std::size_t k = 0; k < n; ++k) data[base + k * stride] = line[k];
        }
    }
}

// Linear convolution of a real field with a fixed translation-invariant
// kernel, out(x) = sum_y field(y) * kernel(x - y), via zero-padded FFT.
// The kernel is supplied on the displacement lattice d_i in (-(n_i-1), n_i-1).
// The kernel transform is cached, so repeated applications are cheap.
class PaddedConvolution {
public:
    template <typename KernelFn>
    PaddedConvolution(const std::array<std::size_t, 3>& n, int ndim, KernelFn kernel)
        : ndim_(ndim), n_(n) {
        total_pad_ = 1;
        for (int d = 0; d < ndim_; ++d) {
            pad_[d] = next_pow2(2 * n_[d] - 1);
            total_pad_ *= pad_[d];
        }
        kernel_hat_.assign(total_pad_, {0.0, 0.0});
        std::array<long, 3> disp{0, 0, 0};
        fill_kernel(kernel, 0, disp);
        fft_nd(kernel_hat_, pad_, ndim_, false);
    }

    Eigen::ArrayXd apply(const Eigen::ArrayXd& field) const {
        std::size_t total = 1;
        for (int d = 0; d < ndim_; ++d) total *= n_[d];
        if (std::size_t(field.size()) != total)
            throw std::invalid_argument("PaddedConvolution: field size mismatch");
        std::vector<std::complex<double>> buf(total_pad_, {0.0, 0.0});
        std::array<std::size_t, 3> idx{0, 0, 0};
        for (std::size_t f = 0; f < total; ++f) {
            unflatten(f, n_, idx);
            buf[flatten(idx, pad_)] = field[long(f)];
        }
        fft_nd(buf, pad_, ndim_, false);
        for (std::size_t i = 0; i < total_pad_; ++i) buf[i] *= kernel_hat_[i];
        fft_nd(buf, pad_, ndim_, true);
        Eigen::ArrayXd out(static_cast<long>(total));
        for (std::size_t f = 0; f < total; ++f) {
            unflatten(f, n_, idx);
            out[long(f)] = buf[flatten(idx, pad_)].real();
        }
        return out;
    }

private:
    template <typename KernelFn>
    void fill_kernel(KernelFn& kernel, int axis, std::array<long, 3>& disp) {
        if (axis == ndim_) {
            std::array<std::size_t, 3> idx{0, 0, 0};
            for (int d = 0; d < ndim_; ++d) {
                const long p = disp[d] >= 0 ? disp[d] : disp[d] + long(pad_[d]);
                idx[d] = std::size_t(p);
            }
            kernel_hat_[flatten(idx, pad_)] = kernel(disp);
            return;
        }
        const long lim = long(n_[axis]) - 1;
        for (long d = -lim; d <= lim; ++d) {
            disp[axis] = d;
            fill_kernel(kernel, axis + 1, disp);
        }
    }

    std::size_t flatten(const std::array<std::size_t, 3>& idx,
                        const std::array<std::size_t, 3>& dims) const {
        std::size_t f = 0;
        for (int d = 0; d < ndim_; ++d) f = f * dims[d] + idx[d];
        return f;
    }

    void unflatten(std::size_t f, const std::array<std::size_t, 3>& dims,
                   std::array<std::size_t, 3>& idx) const {
        for (int d = ndim_ - 1; d >= 0; --d) {
            idx[d] = f % dims[d];
            f /= dims[d];
        }
    }

    int ndim_;
    std::array<std::size_t, 3> n_;
    std::array<std::size_t, 3> pad_{1, 1, 1};
    std::size_t total_pad_ = 1;
    std::vector<std::complex<double>> kernel_hat_;
};

}  // namespace tdks::detail
