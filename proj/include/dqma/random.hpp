#pragma once

// Seed-deterministic randomness. The sampling executor uses counter-based
// streams keyed by (seed, shot) so shot batches can run on any number of
// threads with bit-identical aggregate counts.

#include "dqma/qcore.hpp"

#include <cmath>
#include <cstdint>

namespace dqma {

inline std::uint64_t splitmix64_next(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {
        // burn-in decorrelates near-identical seeds
        splitmix64_next(state_);
        splitmix64_next(state_);
    }
    // Independent stream for a keyed substream (e.g. one shot of a run).
    static Rng keyed(std::uint64_t seed, std::uint64_t key) {
        std::uint64_t s = seed;
        std::uint64_t mixed = splitmix64_next(s) ^ (key * 0xff51afd7ed558ccdULL + 0x2545f4914f6cdd1dULL);
        return Rng(mixed);
    }

    std::uint64_t next_u64() { return splitmix64_next(state_); }

    double uniform() {  // [0, 1)
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double gaussian() {
        if (have_spare_) {
            have_spare_ = false;
            return spare_;
        }
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        double u2 = uniform();
        double mag = std::sqrt(-2.0 * std::log(u1));
        spare_ = mag * std::sin(2.0 * M_PI * u2);
        have_spare_ = true;
        return mag * std::cos(2.0 * M_PI * u2);
    }

    std::int64_t below(std::int64_t n) {
        return static_cast<std::int64_t>(next_u64() % static_cast<std::uint64_t>(n));
    }

  private:
    std::uint64_t state_;
    bool have_spare_ = false;
    double spare_ = 0.0;
};

inline Vec haar_vector(std::int64_t dim, Rng& rng) {
    Vec v(dim);
    for (std::int64_t i = 0; i < dim; ++i) v(i) = cplx(rng.gaussian(), rng.gaussian());
    v.normalize();
    return v;
}

inline StateVector haar_state(const RegisterLayout& layout, Rng& rng) {
    return StateVector(layout, haar_vector(layout.total_dimension(), rng));
}

// Mixture of up to max_terms Haar-random pure states.
inline DensityOperator random_density(const RegisterLayout& layout, Rng& rng,
                                      int max_terms = 4) {
    int terms = 1 + static_cast<int>(rng.below(max_terms));
    std::vector<double> w(terms);
    double total = 0.0;
    for (auto& x : w) {
        x = rng.uniform() + 1e-6;
        total += x;
    }
    Mat m = Mat::Zero(layout.total_dimension(), layout.total_dimension());
    for (int t = 0; t < terms; ++t) {
        Vec v = haar_vector(layout.total_dimension(), rng);
        m += (w[t] / total) * (v * v.adjoint());
    }
    return DensityOperator(layout, std::move(m));
}

inline Mat random_hermitian(std::int64_t dim, Rng& rng) {
    Mat g(dim, dim);
    for (std::int64_t i = 0; i < dim; ++i)
        for (std::int64_t j = 0; j < dim; ++j) g(i, j) = cplx(rng.gaussian(), rng.gaussian());
    return 0.5 * (g + g.adjoint());
}

// Random operator with spectrum inside [0, 1].
inline Mat random_povm_element(std::int64_t dim, Rng& rng) {
    Mat h = random_hermitian(dim, rng);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    double lo = es.eigenvalues().minCoeff();
    double hi = es.eigenvalues().maxCoeff();
    double span = std::max(hi - lo, 1e-12);
    return (h - lo * Mat::Identity(dim, dim)) / span;
}

inline Mat random_unitary(std::int64_t dim, Rng& rng) {
    Mat g(dim, dim);
    for (std::int64_t i = 0; i < dim; ++i)
        for (std::int64_t j = 0; j < dim; ++j) g(i, j) = cplx(rng.gaussian(), rng.gaussian());
    Eigen::HouseholderQR<Mat> qr(g);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (std::int64_t i = 0; i < dim; ++i) {
        cplx d = r(i, i);
        q.col(i) *= (std::abs(d) > 1e-14) ? d / std::abs(d) : cplx(1.0, 0.0);
    }
    return q;
}

}  // namespace dqma
