#pragma once

// Network topologies and the compilation of protocol pipelines into exact
// acceptance operators over the proof space, plus a shot-based sampling
// executor for cross-validation.

#include "dqma/qcore.hpp"

#include <nlohmann/json_fwd.hpp>

#include <map>
#include <memory>
#include <optional>

namespace dqma {

struct Topology {
    enum class Kind { path, tree };

    Kind kind = Kind::path;
    int radius = 0;  // path length, or max root-to-leaf distance for trees
    std::vector<std::string> nodes;
    std::vector<std::pair<std::string, std::string>> edges;
    std::map<std::string, std::string> terminal_inputs;  // node -> input
    std::map<std::string, std::string> parent;           // trees: child -> parent
    std::string root;

    static Topology path(int r);
    static Topology tree(std::vector<std::pair<std::string, std::string>> edges,
                         std::string root,
                         std::map<std::string, std::string> terminal_inputs);

    std::vector<std::string> children_of(const std::string& node) const;
    std::vector<std::string> path_from_root(const std::string& leaf) const;
    int depth() const;
    bool is_terminal(const std::string& node) const;
};

// Rooted-tree construction from a general graph: breadth-first search from
// the given root terminal, truncation below terminal-free subtrees, and
// pendant re-attachment of internal terminals.
Topology build_rooted_tree(const std::vector<std::string>& nodes,
                           const std::vector<std::pair<std::string, std::string>>& edges,
                           const std::map<std::string, std::string>& terminal_inputs,
                           const std::string& root_terminal);

struct LocalTest {
    std::string node;
    std::vector<std::string> registers;  // order matches the POVM factors
    Mat povm;                            // element M with 0 <= M <= I
    std::string label;
};

struct ClassicalGuard {
    std::string node;
    std::string description;
    bool passed = true;
};

struct Transfer {
    std::string register_id;
    std::string from;
    std::string to;
};

struct PreparedState {
    std::string register_id;
    Vec amplitudes;
    std::string spec;  // human-readable description for serialization
};

// A one-round protocol compiled to data: fixed prepared states, mixing
// channels on proof registers, disjoint local tests, and deterministic
// classical guards resolved at build time.
struct ProtocolPipeline {
    RegisterLayout layout;  // proof + prepared registers
    std::vector<PreparedState> prepared;
    std::vector<MixingChannel> channels;
    std::vector<LocalTest> tests;
    std::vector<ClassicalGuard> guards;
    std::vector<Transfer> transfers;
    std::string name;
    std::string params_json;  // metadata echo, already serialized

    // Honest proof as a product over proof registers, when the protocol
    // defines one for the given inputs.
    std::vector<std::pair<std::string, Vec>> honest_product;

    std::vector<std::string> proof_register_ids() const;
    std::vector<std::string> prepared_register_ids() const;
    RegisterLayout proof_layout(std::int64_t dim_cap = kDefaultDimCap) const;
    std::int64_t proof_dimension() const;
    std::vector<std::string> node_ids() const;  // nodes appearing in tests/guards/registers
    bool any_guard_failed() const;
};

struct AcceptanceModel {
    std::shared_ptr<const ProtocolPipeline> pipeline;
    HermitianOperator accept_operator;                    // on the proof layout
    std::map<std::string, HermitianOperator> per_node;    // marginal per-node accept operators
    std::int64_t proof_dimension = 1;
};

// Exact compilation: tensor the disjoint local tests (each contracted
// against the prepared states it touches), pull the product back through
// the mixing channels, and return the operator on the proof registers.
AcceptanceModel compile(const ProtocolPipeline& pipeline,
                        std::int64_t dim_cap = kDefaultDimCap);

// Independent evaluation route: enumerates every combination of channel
// branches and pushes the joint pure state through each, without building
// the acceptance operator. Used as the step-by-step oracle for compile.
double exact_accept_probability(const ProtocolPipeline& pipeline, const StateVector& proof);
double exact_accept_probability(const ProtocolPipeline& pipeline, const DensityOperator& proof);

// Assemble the pipeline's honest product proof on the proof layout.
StateVector assemble_product_proof(const ProtocolPipeline& pipeline,
                                   const std::vector<std::pair<std::string, Vec>>& parts,
                                   std::int64_t dim_cap = kDefaultDimCap);

struct SampleStats {
    std::int64_t shots = 0;
    std::uint64_t seed = 0;
    std::int64_t all_accept = 0;
    std::int64_t any_reject = 0;
    std::map<std::string, std::int64_t> node_rejects;

    double all_accept_frequency() const;
    double all_accept_stderr() const;
    double node_reject_frequency(const std::string& node) const;
};

// Shot-by-shot executor: draws one unitary per channel, then measures each
// local POVM in order with state collapse. Deterministic given the seed and
// independent of the thread count.
SampleStats simulate_sampled(const ProtocolPipeline& pipeline, const StateVector& proof,
                             std::int64_t shots, std::uint64_t seed, int threads = 1);
SampleStats simulate_sampled(const ProtocolPipeline& pipeline, const DensityOperator& proof,
                             std::int64_t shots, std::uint64_t seed, int threads = 1);

// Marginal rejection probability of each node's local tests.
std::map<std::string, double> per_node_rejection(const AcceptanceModel& model,
                                                 const DensityOperator& proof);
std::map<std::string, double> per_node_rejection(const AcceptanceModel& model,
                                                 const StateVector& proof);

// JSON serialization with bit-exact round-trip.
nlohmann::json pipeline_to_json(const ProtocolPipeline& pipeline);
ProtocolPipeline pipeline_from_json(const nlohmann::json& j);

}  // namespace dqma
