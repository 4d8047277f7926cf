#pragma once

// SWAP test, permutation test, symmetric-subspace projectors and
// symmetrization channels, exposed as exact acceptance operators.

#include "dqma/qcore.hpp"

namespace dqma {

// Permutations are images: perm[i] = pi(i), 0-based.
using Permutation = std::vector<int>;

// Maximum k for which k! permutation sets are enumerated.
inline constexpr int kMaxPermutationArity = 6;

std::vector<Permutation> enumerate_permutations(int k);
Permutation compose_permutations(const Permutation& pi, const Permutation& sigma);

// U_pi |i_1 ... i_k> = |i_{pi^{-1}(1)} ... i_{pi^{-1}(k)}> on k registers of
// dimension d each.
Mat permutation_unitary(const Permutation& perm, std::int64_t d,
                        std::int64_t dim_cap = kDefaultDimCap);

struct SymmetricProjector {
    int k = 0;
    std::int64_t d = 0;
    Mat matrix;            // (1/k!) sum_pi U_pi on dimension d^k
    std::int64_t rank = 0; // binomial(d+k-1, k), recovered from the trace
};

SymmetricProjector symmetric_projector(int k, std::int64_t d,
                                       std::int64_t dim_cap = kDefaultDimCap);

std::int64_t binomial(std::int64_t n, std::int64_t k);

// Acceptance probability of the SWAP test on a two-register state.
double swap_test_accept(const DensityOperator& rho);
double swap_test_accept(const StateVector& psi);

// Acceptance probability tr(Pi_sym rho) of the permutation test on k >= 2
// equal-dimension registers.
double permutation_test_accept(const DensityOperator& rho);
double permutation_test_accept(const StateVector& psi);

// Pair: {(1/2, I), (1/2, SWAP)}. k-set: uniform mixture of all k!
// permutation unitaries. All named registers must share dimension d.
MixingChannel symmetrize_channel(const std::vector<std::string>& registers,
                                 std::int64_t d);

}  // namespace dqma
