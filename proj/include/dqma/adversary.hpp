#pragma once

// Prover strategies: honest proofs, exact optimal entangled proofs,
// see-saw separable optimization, and the constructive lower-bound attacks.

#include "dqma/fingerprint.hpp"
#include "dqma/network.hpp"

#include <nlohmann/json_fwd.hpp>

#include <functional>
#include <optional>

namespace dqma {

// Product proof attached by the builder for the instance's completeness
// argument; throws when the protocol defines none for these inputs.
StateVector honest_proof(const ProtocolPipeline& pipeline,
                         std::int64_t dim_cap = kDefaultDimCap);

struct EntangledOptimum {
    double value = 0.0;
    StateVector state;
};
// Exact supremum of acceptance over all proofs: the top eigenpair of the
// acceptance operator.
EntangledOptimum optimal_entangled_value(const AcceptanceModel& model);

struct SeeSawOptions {
    int restarts = 16;
    int max_iters = 200;
    double tol = 1e-9;
    std::uint64_t seed = 1;
};

struct SeparableOptimum {
    double value = 0.0;
    std::vector<StateVector> parts;  // one per group
    bool converged = true;
    int iterations = 0;
};

// See-saw over the grouping (a partition of the proof registers, usually by
// node): fixes all groups but one, eigen-solves the effective operator,
// cycles to convergence, and keeps the best of `restarts` seeded starts.
// The result is a certified lower bound on the separable optimum.
SeparableOptimum optimal_separable_value(const AcceptanceModel& model,
                                         const std::vector<std::vector<std::string>>& grouping,
                                         const SeeSawOptions& opts = {});

// Default grouping of a pipeline's proof registers by owner node.
std::vector<std::vector<std::string>> group_by_node(const ProtocolPipeline& pipeline);

// ---- classical dMA protocols and the fooling-set attack ----

// One-round dMA protocol on a path: node j decides from its terminal input
// (ends only) and the proofs of nodes j-1, j, j+1, with independent local
// randomness. accept_prob must respect that locality.
struct ClassicalDmaProtocol {
    int r = 4;
    int n = 3;
    std::vector<int> proof_bits;  // c(v_0) .. c(v_r)
    std::function<double(int node, const std::string& x, const std::string& y,
                         const std::vector<std::string>& proofs)>
        accept_prob;
    std::function<std::vector<std::string>(const std::string& x, const std::string& y)>
        honest_assignment;  // accepting proofs for yes-instances
    double completeness = 1.0;

    double run(const std::string& x, const std::string& y,
               const std::vector<std::string>& proofs) const;  // Pr[all accept]
};

// EQ protocol whose per-node proofs are the input truncated to keep_bits,
// deliberately too small; the fooling attack target.
ClassicalDmaProtocol make_truncated_eq_dma(int n, int r, int keep_bits);

struct FoolingAttackResult {
    std::string status;  // "success", "no-collision", "not-applicable"
    bool counting_guarantee = false;
    bool pair_found = false;
    int cut_index = -1;
    double accept_prob = 0.0;
    double reference_line = 0.0;  // 1 - 2p
    std::string witness;          // JSON text
};

// Searches fooling pairs whose accepting proof assignments collide on two
// adjacent nodes, stitches the halves, and runs the no-instance. The
// counting precondition floor(log2(k-1)/2) only decides whether a collision
// is guaranteed; the search always runs.
FoolingAttackResult classical_fooling_attack(
    const ClassicalDmaProtocol& protocol,
    const std::function<bool(const std::string&, const std::string&)>& f,
    const std::vector<std::pair<std::string, std::string>>& fooling_set);

// ---- quantum attacks ----

// Family of yes-instances with separable accepting proofs, indexed by the
// fooling set; build(x, y) must return a pipeline whose honest_product is
// set for yes-instances.
struct SeparableProofFamily {
    std::vector<std::pair<std::string, std::string>> fooling_inputs;
    std::function<ProtocolPipeline(const std::string& x, const std::string& y)> build;
    std::function<bool(const std::string&, const std::string&)> f;
    double completeness = 1.0;
};

struct CutPasteAttackResult {
    std::string status;  // "success", "no-pair"
    bool pair_found = false;
    int cut_index = -1;
    double overlap = 0.0;
    double accept_prob = 0.0;
    double reference_line = 0.0;  // 1 - 2p - delta
    std::string witness;
};

// Finds fooling pairs whose proof parts at nodes v_i, v_{i+1} overlap above
// 1 - delta^2/8 and evaluates the stitched separable proof on the crossed
// no-instance.
CutPasteAttackResult separable_cut_paste_attack(const SeparableProofFamily& family,
                                                int cut_index, double delta,
                                                std::int64_t dim_cap = kDefaultDimCap);

struct NoProofAttackResult {
    std::string status;  // "success", "not-applicable"
    int cut_index = -1;
    double accept_prob = 0.0;
    double reference_line = 0.0;  // 1 - 2p
    std::string witness;
};

// For a pipeline family with two consecutive proofless nodes v_i, v_{i+1}:
// splits two accepting proofs at the gap via their Schmidt marginals and
// runs rho (x) sigma' on the crossed instance.
NoProofAttackResult entangled_no_proof_attack(
    const SeparableProofFamily& family, int cut_index,
    const std::pair<std::string, std::string>& instance_a,
    const std::pair<std::string, std::string>& instance_b,
    std::int64_t dim_cap = kDefaultDimCap);

// EQ-path variant with the tests of two adjacent intermediate nodes removed
// (their proof registers do not exist); soundness collapses to 1 - 2p.
ProtocolPipeline build_gapped_eq_path(int r, const FingerprintScheme& scheme,
                                      const std::string& x, const std::string& y,
                                      int gap_at, std::int64_t dim_cap = kDefaultDimCap);

nlohmann::json attack_report(const FoolingAttackResult& r);
nlohmann::json attack_report(const CutPasteAttackResult& r);
nlohmann::json attack_report(const NoProofAttackResult& r);

}  // namespace dqma
