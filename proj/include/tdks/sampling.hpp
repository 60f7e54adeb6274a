#pragma once

#include <cmath>
#include <complex>
#include <random>
#include <utility>
#include <vector>

#include "tdks/spectral.hpp"

namespace tdks {

// Deterministic field sampler: complex Gaussian amplitudes with algebraic
// eigenvalue decay, optionally rescaled to a target norm.
struct FieldSampler {
    std::shared_ptr<const Basis> basis;
    double decay = 1.0;
    double scale = 1.0;

    SpectralField operator()(std::mt19937_64& rng) const {
        std::normal_distribution<double> g(0.0, 1.0);
        Eigen::VectorXcd c(basis->order());
        for (int q = 0; q < basis->order(); ++q) {
            const double s = scale / std::pow(1.0 + basis->eigenvalues()[q], decay);
            c[q] = std::complex<double>(g(rng), g(rng)) * s;
        }
        return SpectralField(basis, c);
    }

    // rescaled so that the squared Z-norm equals z2 exactly
    SpectralField sample_with_z2(std::mt19937_64& rng, double z2) const {
        SpectralField f = (*this)(rng);
        const double lap = norms(f).lap;
        if (lap == 0.0) return f;
        f.coeffs *= std::sqrt(z2) / lap;
        return SpectralField(f.basis, f.coeffs);
    }
};

// Independent pair generator for the Lipschitz probes.
struct PairSampler {
    FieldSampler fields;
    std::mt19937_64* rng;

    std::pair<SpectralField, SpectralField> operator()() const {
        SpectralField a = fields(*rng);
        SpectralField b = fields(*rng);
        return {std::move(a), std::move(b)};
    }
};

// Trajectory-shaped sampler: smooth random time modulation of a random field
// pair, kept inside the Z^2 <= z2_cap ball at every sample time.
struct InBallTrajectorySampler {
    std::shared_ptr<const Basis> basis;
    double z2_cap = 1.0;
    double decay = 1.5;

    std::vector<Eigen::VectorXcd> operator()(const std::vector<double>& times,
                                             std::mt19937_64& rng) const {
        FieldSampler fs{basis, decay, 1.0};
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        SpectralField base = fs.sample_with_z2(rng, z2_cap);
        SpectralField wobble = fs.sample_with_z2(rng, z2_cap);
        const double omega = 1.0 + 4.0 * uni(rng);
        const double mix = 0.25 * uni(rng);
        const double amp = 0.2 + 0.75 * uni(rng);
        std::vector<Eigen::VectorXcd> states;
        states.reserve(times.size());
        const double t0 = times.front();
        for (double t : times) {
            Eigen::VectorXcd c =
                amp * (base.coeffs + mix * std::sin(omega * (t - t0)) * wobble.coeffs);
            states.push_back(std::move(c));
        }
        // enforce the cap exactly (amp and mix keep it below already)
        double worst = 0.0;
        for (const auto& c : states) worst = std::max(worst, norms(SpectralField(basis, c)).lap);
        if (worst * worst > z2_cap) {
            const double s = std::sqrt(z2_cap) / worst;
            for (auto& c : states) c *= s;
        }
        return states;
    }
};

}  // namespace tdks
