#include "dqma/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

namespace dqma {

std::vector<Permutation> enumerate_permutations(int k) {
    if (k < 1 || k > kMaxPermutationArity)
        throw layout_error("permutation arity out of range: " + std::to_string(k));
    Permutation p(k);
    std::iota(p.begin(), p.end(), 0);
    std::vector<Permutation> out;
    do {
        out.push_back(p);
    } while (std::next_permutation(p.begin(), p.end()));
    return out;
}

Permutation compose_permutations(const Permutation& pi, const Permutation& sigma) {
    // (pi . sigma)(i) = pi(sigma(i))
    Permutation out(pi.size());
    for (size_t i = 0; i < pi.size(); ++i) out[i] = pi[sigma[i]];
    return out;
}

Mat permutation_unitary(const Permutation& perm, std::int64_t d, std::int64_t dim_cap) {
    const int k = static_cast<int>(perm.size());
    if (k < 1 || d < 1) throw layout_error("permutation_unitary: k and d must be >= 1");
    std::int64_t dim = 1;
    for (int i = 0; i < k; ++i) {
        if (dim > dim_cap / d)
            throw dim_cap_error("permutation_unitary: d^k exceeds dim_cap");
        dim *= d;
    }

    Permutation inv(k);
    for (int i = 0; i < k; ++i) inv[perm[i]] = i;

    Mat u = Mat::Zero(dim, dim);
    std::vector<std::int64_t> digits(k), moved(k);
    for (std::int64_t src = 0; src < dim; ++src) {
        std::int64_t rem = src;
        for (int i = k - 1; i >= 0; --i) {
            digits[i] = rem % d;
            rem /= d;
        }
        // slot t of the output holds the content of input slot inv[t]
        for (int t = 0; t < k; ++t) moved[t] = digits[inv[t]];
        std::int64_t dst = 0;
        for (int t = 0; t < k; ++t) dst = dst * d + moved[t];
        u(dst, src) = 1.0;
    }
    return u;
}

std::int64_t binomial(std::int64_t n, std::int64_t k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    std::int64_t out = 1;
    for (std::int64_t i = 1; i <= k; ++i) out = out * (n - k + i) / i;
    return out;
}

SymmetricProjector symmetric_projector(int k, std::int64_t d, std::int64_t dim_cap) {
    auto perms = enumerate_permutations(k);
    std::int64_t dim = 1;
    for (int i = 0; i < k; ++i) {
        if (dim > dim_cap / d) throw dim_cap_error("symmetric_projector: d^k exceeds dim_cap");
        dim *= d;
    }
    Mat p = Mat::Zero(dim, dim);
    for (const auto& pi : perms) p += permutation_unitary(pi, d, dim_cap);
    p /= static_cast<double>(perms.size());

    SymmetricProjector out;
    out.k = k;
    out.d = d;
    out.matrix = std::move(p);
    out.rank = std::llround(out.matrix.trace().real());
    return out;
}

namespace {

// Common register dimension of a layout expected to be a homogeneous k-fold
// product; throws on mismatch.
std::int64_t homogeneous_dim(const RegisterLayout& layout, int min_regs) {
    if (layout.size() < min_regs)
        throw layout_error("test requires at least " + std::to_string(min_regs) + " registers");
    std::int64_t d = layout.dim(0);
    for (int i = 1; i < layout.size(); ++i)
        if (layout.dim(i) != d) throw layout_error("test registers must have equal dimension");
    return d;
}

}  // namespace

double swap_test_accept(const DensityOperator& rho) {
    if (rho.layout.size() != 2) throw layout_error("swap test requires exactly two registers");
    std::int64_t d = homogeneous_dim(rho.layout, 2);
    auto proj = symmetric_projector(2, d, rho.layout.total_dimension());
    return std::clamp((proj.matrix * rho.matrix).trace().real(), 0.0, 1.0);
}

double swap_test_accept(const StateVector& psi) {
    return swap_test_accept(DensityOperator::from_state(psi));
}

double permutation_test_accept(const DensityOperator& rho) {
    const int k = rho.layout.size();
    if (k < 2) throw layout_error("permutation test requires k >= 2 registers");
    std::int64_t d = homogeneous_dim(rho.layout, 2);
    auto proj = symmetric_projector(k, d, rho.layout.total_dimension());
    return std::clamp((proj.matrix * rho.matrix).trace().real(), 0.0, 1.0);
}

double permutation_test_accept(const StateVector& psi) {
    return permutation_test_accept(DensityOperator::from_state(psi));
}

MixingChannel symmetrize_channel(const std::vector<std::string>& registers,
                                 std::int64_t d) {
    const int k = static_cast<int>(registers.size());
    if (k < 2) throw layout_error("symmetrize_channel needs at least two registers");
    auto perms = enumerate_permutations(k);
    std::vector<MixingChannel::Branch> branches;
    branches.reserve(perms.size());
    const double p = 1.0 / static_cast<double>(perms.size());
    for (const auto& pi : perms)
        branches.push_back({p, permutation_unitary(pi, d, kStateDimCap)});
    return MixingChannel(registers, std::move(branches));
}

}  // namespace dqma
