#pragma once

// Quantum fingerprint states with bounded pairwise overlap, the one-way EQ
// protocol they induce, and the pluggable one-way / one-way-QMA protocol
// interfaces consumed by the network conversions.

#include "dqma/qcore.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <optional>

namespace dqma {

struct FingerprintScheme {
    enum class Kind { hadamard, code_based };

    Kind kind = Kind::hadamard;
    int n = 0;                        // input bit-length
    std::int64_t state_dimension = 1;
    double overlap_bound = 0.0;       // delta

    // code_based only: binary linear code with generator rows over GF(2);
    // E(x)_i = <generator[i], x> mod 2, i in [0, code_length).
    int code_length = 0;
    int alphabet = 2;
    std::vector<std::vector<int>> generator;

    static FingerprintScheme hadamard(int n);
    // Seeded random binary linear code of length m. Distances are verified
    // by enumeration (requires n <= 6); throws numeric_error if the relative
    // distance falls below 1/3.
    static FingerprintScheme random_linear_code(int n, int m, std::uint64_t seed);

    std::vector<int> encode(const std::string& x) const;  // code_based only

    nlohmann::json to_json() const;
    static FingerprintScheme from_json(const nlohmann::json& j);
};

// Raw amplitudes of |h_x>; length scheme.state_dimension.
Vec fingerprint_amplitudes(const FingerprintScheme& scheme, const std::string& x);
// Same, wrapped as a single-register state.
StateVector fingerprint_state(const FingerprintScheme& scheme, const std::string& x,
                              const std::string& register_id = "fp");

// One-way communication protocol: Alice sends message(x), Bob measures the
// POVM {M_{y,1}, I - M_{y,1}}.
struct OneWayProtocol {
    std::string name;
    int n = 0;
    std::int64_t message_dim = 1;
    std::function<Vec(const std::string& x)> message;
    std::function<Mat(const std::string& y)> accept_povm;
    double completeness = 1.0;
    double soundness = 0.0;
};

// One-sided-error EQ from fingerprints: message |h_x>, M_{y,1} = |h_y><h_y|.
// Requires delta^2 <= 1/3.
OneWayProtocol eq_one_way(const FingerprintScheme& scheme);

// Trivial cost-n protocol for an arbitrary predicate: message |x>,
// M_{y,1} = sum over accepted x of |x><x|.
OneWayProtocol exact_send_protocol(std::function<bool(const std::string&, const std::string&)> f,
                                   int n, std::string name = "exact_send",
                                   std::int64_t dim_cap = kDefaultDimCap);

// Majority vote over `times` independent copies.
OneWayProtocol majority_repeat(const OneWayProtocol& p, int times,
                               std::int64_t dim_cap = kDefaultDimCap);

// One-way QMA protocol: Merlin sends a proof rho to Alice, who applies U_x
// on proof (x) ancilla and forwards everything; Bob measures M'_{y,1}.
struct OneWayQmaProtocol {
    std::string name;
    int n = 0;
    std::int64_t proof_dim = 1;
    std::int64_t ancilla_dim = 1;
    std::function<Mat(const std::string& x)> alice_unitary;  // on proof (x) ancilla
    std::function<Mat(const std::string& y)> accept_povm;    // on proof (x) ancilla
    std::function<Vec(const std::string& x, const std::string& y)> honest_proof;
    double completeness = 1.0;
    double soundness = 0.0;

    std::int64_t message_dim() const { return proof_dim * ancilla_dim; }
};

// A one-way protocol is a one-way QMA protocol with a size-1 proof whose
// Alice unitary prepares the message on the ancilla.
OneWayQmaProtocol wrap_oneway_as_qma(const OneWayProtocol& p);

// One-way QMA protocol for EQ with a nontrivial proof: Merlin supplies the
// fingerprint, Alice swap-tests it against |h_x> inside her unitary, Bob
// checks the recorded outcome and swap-tests the forwarded fingerprint
// against |h_y>. Declared soundness is the exact worst case over all pairs,
// computed by eigen-solving every no-instance (requires n <= 4).
OneWayQmaProtocol proof_assisted_eq_qma(const FingerprintScheme& scheme);

// Compressed two-party acceptance operator on the proof space:
// (I (x) <0|) U_x^dag M'_{y,1} U_x (I (x) |0>).
Mat one_way_qma_accept_operator(const OneWayQmaProtocol& q, const std::string& x,
                                const std::string& y);
// Its largest eigenvalue: the optimal two-party acceptance probability.
double one_way_qma_value(const OneWayQmaProtocol& q, const std::string& x,
                         const std::string& y);

// Unitary whose first column is `target` (Householder completion).
Mat unitary_preparing(const Vec& target);

// Bit-string helpers (MSB first: x = x_0 x_1 ... x_{n-1}).
std::string to_bits(std::uint64_t value, int n);
std::uint64_t from_bits(const std::string& bits);
int hamming_distance(const std::string& a, const std::string& b);

}  // namespace dqma
