#pragma once

// Pipeline builders for the protocol catalog: EQ on paths and trees,
// parallel repetition, relay-point EQ, greater-than and its variants,
// ranking verification, and the generic conversions of one-way and
// one-way-QMA protocols onto networks.

#include "dqma/fingerprint.hpp"
#include "dqma/network.hpp"

#include <optional>

namespace dqma {

// Soundness reference line 1 - 4/(81 r^2), raised to the repetition count.
double eq_path_bound(int r, int repetitions = 1);

// Final check performed by the right end of a hop chain: either the one-way
// protocol's POVM on the arriving register, or a SWAP test against a state
// the right end prepares itself (the form used by GT and the relay
// protocol).
enum class ChainFinal { accept_povm, swap_with_prepared };

struct EqPathParams {
    int r = 2;
    FingerprintScheme scheme;
    std::string x, y;
    int repetitions = 1;
    ChainFinal final_test = ChainFinal::accept_povm;
    std::int64_t dim_cap = kDefaultDimCap;
};

ProtocolPipeline build_eq_path(const EqPathParams& params);

// EQ chain over an arbitrary fingerprint map; attack studies use this to
// run the protocol on deliberately degenerate state families.
ProtocolPipeline build_eq_path_with_map(
    int r, std::int64_t dim, const std::function<Vec(const std::string&)>& fingerprint,
    const std::string& x, const std::string& y, int repetitions = 1,
    ChainFinal final_test = ChainFinal::accept_povm,
    std::int64_t dim_cap = kDefaultDimCap);

struct TreeProtocolParams {
    Topology topology;  // tree; root and leaves are the terminals
    FingerprintScheme scheme;
    int repetitions = 1;
    std::int64_t dim_cap = kDefaultDimCap;
};

// Leaves-to-root EQ on a tree (permutation tests at internal nodes).
ProtocolPipeline build_eq_tree(const TreeProtocolParams& params);

// ---- relay-point EQ ----

struct RelayEqParams {
    int r = 4;
    int n = 2;
    FingerprintScheme segment_scheme;
    std::string x, y;
    int segment_length = 0;    // 0: default ceil(n^(1/3))
    int reps_per_segment = 0;  // 0: default 42 * segment_length^2
    std::int64_t dim_cap = kDefaultDimCap;
};

// The relay protocol splits the path at relay points whose proofs are
// measured in the computational basis; each inter-relay stretch is an
// independent EQ chain between the measured strings, so the protocol is a
// list of segment pipelines indexed by the relay assignment.
class RelayEqProtocol {
  public:
    explicit RelayEqProtocol(RelayEqParams params);

    const RelayEqParams& params() const { return params_; }
    const std::vector<int>& relay_positions() const { return relay_positions_; }
    int segment_count() const { return static_cast<int>(relay_positions_.size()) + 1; }

    // Segment pipelines for a fixed assignment of relay strings.
    std::vector<ProtocolPipeline> segments_for(const std::vector<std::string>& relay_values) const;
    std::vector<std::string> honest_relay_values() const;  // all x

    struct Adversary {
        double value = 0.0;
        std::vector<std::string> relay_values;
        std::vector<double> segment_values;
    };
    // Exact optimum over relay strings and entangled segment proofs.
    Adversary adversary() const;
    double honest_value() const;
    std::vector<int> segment_lengths() const;
    // Reference line for segment i.
    double segment_bound(int segment_index) const;

  private:
    RelayEqParams params_;
    std::vector<int> relay_positions_;
};

RelayEqProtocol build_eq_relay(const RelayEqParams& params);

// ---- greater-than and variants ----

enum class GtVariant { greater, less, greater_equal, less_equal };

std::string to_string(GtVariant v);
bool gt_truth(GtVariant v, std::uint64_t x, std::uint64_t y);

// Fingerprint scheme family indexed by input length, for the per-prefix
// fingerprints of the GT protocol.
struct SchemeFamily {
    FingerprintScheme::Kind kind = FingerprintScheme::Kind::hadamard;
    std::uint64_t seed = 1;
    FingerprintScheme make(int length) const;
};

struct GtParams {
    int r = 2;
    int n = 2;
    std::uint64_t x = 0, y = 0;  // n-bit integers, MSB first
    SchemeFamily scheme;
    int repetitions = 1;
    GtVariant variant = GtVariant::greater;
    // Index claimed by the prover; 0..n-1 select a bit position, n selects
    // the equality branch (greater_equal / less_equal only). Unset means
    // the honest index.
    std::optional<int> index;
    std::int64_t dim_cap = kDefaultDimCap;
};

// Honest index for a yes-instance; nullopt when f(x, y) = 0.
std::optional<int> gt_honest_index(GtVariant v, std::uint64_t x, std::uint64_t y, int n);
// Pipeline at a fixed index (bit guards resolved to classical guards).
ProtocolPipeline build_gt(const GtParams& params);

struct GtAdversary {
    double value = 0.0;
    int best_index = -1;
    std::vector<std::pair<int, double>> per_index;
};
// Optimal entangled acceptance over all index choices.
GtAdversary gt_adversary_value(const GtParams& params);

// ---- ranking verification ----

struct RvParams {
    Topology topology;  // tree rooted at the subject terminal
    std::map<std::string, std::uint64_t> inputs;
    int n = 2;          // bit width
    int rank_j = 1;     // claim: subject input is the j-th largest
    SchemeFamily scheme;
    int repetitions = 1;
    std::int64_t dim_cap = kDefaultDimCap;
};

bool rv_truth(const RvParams& params);

struct RvEvaluation {
    bool truth = false;
    double honest_value = 0.0;     // acceptance of the honest prover
    double adversary_value = 0.0;  // max over direction assignments and proofs
    std::vector<std::string> best_directions;  // per leaf, "ge" or "lt"
    std::vector<std::pair<std::string, double>> per_leaf_values;  // for best_directions
};

RvEvaluation rv_evaluate(const RvParams& params);

// Per-leaf GT pipelines for a fixed direction assignment (directions keyed
// by leaf terminal). Indices are the honest ones unless given.
std::vector<ProtocolPipeline> rv_pipelines(const RvParams& params,
                                           const std::map<std::string, GtVariant>& directions,
                                           const std::map<std::string, int>& indices = {});

// ---- one-way protocol conversions ----

struct ForallParams {
    std::vector<Topology> trees;  // one spanning tree rooted at each terminal
    std::map<std::string, std::string> inputs;
    OneWayProtocol protocol;
    int repetitions = 1;
    std::int64_t dim_cap = kDefaultDimCap;
};

// Root-to-leaves conversion of a one-way protocol, one pipeline per
// spanning tree; all trees must accept.
std::vector<ProtocolPipeline> build_forall_f(const ForallParams& params);

// Product of the per-tree optimal entangled values.
double forall_adversary_value(const std::vector<ProtocolPipeline>& pipelines,
                              std::int64_t dim_cap = kDefaultDimCap);

struct OneWayQmaConversionParams {
    OneWayQmaProtocol protocol;
    int r = 2;
    std::string x, y;
    int repetitions = 1;
    std::int64_t dim_cap = kDefaultDimCap;
};

// Path conversion of a one-way QMA protocol: the left end applies U_x to
// the proof and forwards, intermediate nodes symmetrize doubled registers,
// the right end measures M'_{y,1}.
ProtocolPipeline build_from_oneway_qma(const OneWayQmaConversionParams& params);

}  // namespace dqma
