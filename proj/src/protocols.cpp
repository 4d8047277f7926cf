#include "dqma/protocols.hpp"

#include "dqma/symmetry.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace dqma {

double eq_path_bound(int r, int repetitions) {
    return std::pow(1.0 - 4.0 / (81.0 * r * r), repetitions);
}

namespace {

// Mutable accumulator finalized into a ProtocolPipeline once all registers
// are known.
struct PipelineDraft {
    std::vector<RegisterSpec> regs;
    std::vector<PreparedState> prepared;
    std::vector<MixingChannel> channels;
    std::vector<LocalTest> tests;
    std::vector<ClassicalGuard> guards;
    std::vector<Transfer> transfers;
    std::vector<std::pair<std::string, Vec>> honest;
    bool honest_defined = true;

    void add_proof(const std::string& id, std::int64_t dim, const std::string& owner) {
        regs.push_back({id, dim, owner, RegisterRole::proof});
    }
    void add_prepared(const std::string& id, std::int64_t dim, const std::string& owner,
                      Vec state, std::string spec) {
        regs.push_back({id, dim, owner, RegisterRole::prepared});
        prepared.push_back({id, std::move(state), std::move(spec)});
    }
    void set_honest(const std::string& id, const Vec& state) {
        honest.emplace_back(id, state);
    }

    ProtocolPipeline finalize(std::string name, std::string params_json,
                              std::int64_t proof_dim_cap) {
        ProtocolPipeline p;
        p.layout = RegisterLayout(regs, kStateDimCap);
        std::int64_t proof_dim = 1;
        for (const auto& r : regs)
            if (r.role == RegisterRole::proof) {
                if (proof_dim > proof_dim_cap / r.dim)
                    throw dim_cap_error("proof dimension exceeds cap " +
                                        std::to_string(proof_dim_cap));
                proof_dim *= r.dim;
            }
        p.prepared = std::move(prepared);
        p.channels = std::move(channels);
        p.tests = std::move(tests);
        p.guards = std::move(guards);
        p.transfers = std::move(transfers);
        p.name = std::move(name);
        p.params_json = std::move(params_json);
        if (honest_defined) p.honest_product = std::move(honest);
        return p;
    }
};

struct ChainFinalSpec {
    ChainFinal kind = ChainFinal::accept_povm;
    Mat povm;          // accept_povm kind
    Vec right_state;   // swap_with_prepared kind
    std::string right_spec;
};

// Shared hop-chain: the left end prepares a state and forwards it, each
// intermediate node holds a symmetrized register pair and swap-tests the
// arriving register against the kept half, the right end applies the final
// check. One instance per repetition.
void append_hop_chain(PipelineDraft& d, const std::vector<std::string>& nodes,
                      const std::string& prefix, std::int64_t dim, const Vec& left_state,
                      const std::string& left_spec, const ChainFinalSpec& final_spec,
                      int repetitions, const std::optional<Vec>& honest_state) {
    const int r = static_cast<int>(nodes.size()) - 1;
    if (r < 1) throw layout_error("hop chain needs at least two nodes");
    if (repetitions < 1) throw layout_error("repetitions must be >= 1");
    Mat swap_povm = symmetric_projector(2, dim, dim * dim).matrix;

    for (int i = 1; i <= repetitions; ++i) {
        const std::string tag = "_" + std::to_string(i);
        const std::string left_id = prefix + "L" + tag;
        d.add_prepared(left_id, dim, nodes[0], left_state, left_spec);
        d.transfers.push_back({left_id, nodes[0], nodes[1]});

        auto reg_a = [&](int j) { return prefix + "n" + std::to_string(j) + "a" + tag; };
        auto reg_b = [&](int j) { return prefix + "n" + std::to_string(j) + "b" + tag; };
        for (int j = 1; j <= r - 1; ++j) {
            d.add_proof(reg_a(j), dim, nodes[j]);
            d.add_proof(reg_b(j), dim, nodes[j]);
            d.channels.push_back(symmetrize_channel({reg_a(j), reg_b(j)}, dim));
            d.transfers.push_back({reg_b(j), nodes[j], nodes[j + 1]});
            if (honest_state) {
                d.set_honest(reg_a(j), *honest_state);
                d.set_honest(reg_b(j), *honest_state);
            }
            const std::string arriving = (j == 1) ? left_id : reg_b(j - 1);
            d.tests.push_back({nodes[j], {arriving, reg_a(j)}, swap_povm,
                               "swap@" + nodes[j] + tag});
        }

        const std::string arriving = (r == 1) ? left_id : reg_b(r - 1);
        if (final_spec.kind == ChainFinal::accept_povm) {
            d.tests.push_back({nodes[r], {arriving}, final_spec.povm,
                               "povm@" + nodes[r] + tag});
        } else {
            const std::string right_id = prefix + "R" + tag;
            d.add_prepared(right_id, dim, nodes[r], final_spec.right_state,
                           final_spec.right_spec);
            d.tests.push_back({nodes[r], {arriving, right_id}, swap_povm,
                               "swap@" + nodes[r] + tag});
        }
    }
}

std::vector<std::string> path_nodes(int r) {
    std::vector<std::string> nodes;
    for (int i = 0; i <= r; ++i) nodes.push_back("v" + std::to_string(i));
    return nodes;
}

}  // namespace

// ---- EQ on a path ----

ProtocolPipeline build_eq_path(const EqPathParams& params) {
    if (params.r < 1) throw layout_error("eq_path: r must be >= 1");
    if (static_cast<int>(params.x.size()) != params.scheme.n ||
        static_cast<int>(params.y.size()) != params.scheme.n)
        throw layout_error("eq_path: input length does not match scheme");

    Vec hx = fingerprint_amplitudes(params.scheme, params.x);
    Vec hy = fingerprint_amplitudes(params.scheme, params.y);

    PipelineDraft d;
    ChainFinalSpec fin;
    fin.kind = params.final_test;
    if (fin.kind == ChainFinal::accept_povm)
        fin.povm = hy * hy.adjoint();
    else {
        fin.right_state = hy;
        fin.right_spec = "fingerprint(" + params.y + ")";
    }
    d.honest_defined = (params.x == params.y);
    std::optional<Vec> honest = d.honest_defined ? std::optional<Vec>(hx) : std::nullopt;
    append_hop_chain(d, path_nodes(params.r), "e", params.scheme.state_dimension, hx,
                     "fingerprint(" + params.x + ")", fin, params.repetitions, honest);

    std::string meta = "{\"r\":" + std::to_string(params.r) + ",\"n\":" +
                       std::to_string(params.scheme.n) + ",\"x\":\"" + params.x +
                       "\",\"y\":\"" + params.y + "\",\"k\":" +
                       std::to_string(params.repetitions) + "}";
    return d.finalize("eq_path", meta, params.dim_cap);
}

ProtocolPipeline build_eq_path_with_map(
    int r, std::int64_t dim, const std::function<Vec(const std::string&)>& fingerprint,
    const std::string& x, const std::string& y, int repetitions, ChainFinal final_test,
    std::int64_t dim_cap) {
    Vec hx = fingerprint(x);
    Vec hy = fingerprint(y);
    if (hx.size() != dim || hy.size() != dim)
        throw layout_error("eq_path_with_map: fingerprint dimension mismatch");

    PipelineDraft d;
    ChainFinalSpec fin;
    fin.kind = final_test;
    if (final_test == ChainFinal::accept_povm)
        fin.povm = hy * hy.adjoint();
    else {
        fin.right_state = hy;
        fin.right_spec = "state(" + y + ")";
    }
    d.honest_defined = (x == y);
    std::optional<Vec> honest = d.honest_defined ? std::optional<Vec>(hx) : std::nullopt;
    append_hop_chain(d, path_nodes(r), "e", dim, hx, "state(" + x + ")", fin, repetitions,
                     honest);
    std::string meta = "{\"r\":" + std::to_string(r) + ",\"x\":\"" + x + "\",\"y\":\"" + y +
                       "\",\"k\":" + std::to_string(repetitions) + "}";
    return d.finalize("eq_path_custom_map", meta, dim_cap);
}

// ---- EQ on a tree ----

ProtocolPipeline build_eq_tree(const TreeProtocolParams& params) {
    const Topology& t = params.topology;
    if (t.kind != Topology::Kind::tree) throw layout_error("eq_tree: topology must be a tree");
    for (const auto& [node, input] : t.terminal_inputs)
        if (static_cast<int>(input.size()) != params.scheme.n)
            throw layout_error("eq_tree: input length mismatch at " + node);

    const std::int64_t dim = params.scheme.state_dimension;
    std::vector<std::string> internal;
    for (const auto& node : t.nodes)
        if (!t.is_terminal(node)) internal.push_back(node);
    std::sort(internal.begin(), internal.end(), [&](const auto& a, const auto& b) {
        int da = static_cast<int>(t.path_from_root(a).size());
        int db = static_cast<int>(t.path_from_root(b).size());
        return da != db ? da > db : a < b;
    });

    bool all_equal = true;
    const std::string& ref = t.terminal_inputs.at(t.root);
    for (const auto& [node, input] : t.terminal_inputs) {
        (void)node;
        if (input != ref) all_equal = false;
    }

    PipelineDraft d;
    d.honest_defined = all_equal;
    Vec honest_state = fingerprint_amplitudes(params.scheme, ref);

    for (int i = 1; i <= params.repetitions; ++i) {
        const std::string tag = "_" + std::to_string(i);
        auto reg_a = [&](const std::string& v) { return "a_" + v + tag; };
        auto reg_b = [&](const std::string& v) { return "b_" + v + tag; };
        auto reg_p = [&](const std::string& u) { return "p_" + u + tag; };

        for (const auto& v : internal) {
            d.add_proof(reg_a(v), dim, v);
            d.add_proof(reg_b(v), dim, v);
            d.channels.push_back(symmetrize_channel({reg_a(v), reg_b(v)}, dim));
            if (all_equal) {
                d.set_honest(reg_a(v), honest_state);
                d.set_honest(reg_b(v), honest_state);
            }
        }
        for (const auto& [u, input] : t.terminal_inputs)
            d.add_prepared(reg_p(u), dim, u, fingerprint_amplitudes(params.scheme, input),
                           "fingerprint(" + input + ")");

        auto incoming = [&](const std::string& child) {
            return t.is_terminal(child) ? reg_p(child) : reg_b(child);
        };
        auto add_perm_test = [&](const std::string& node, const std::string& own_reg) {
            auto children = t.children_of(node);
            if (children.empty()) return;  // leaf terminals only send
            if (static_cast<int>(children.size()) + 1 > kMaxPermutationArity)
                throw layout_error("eq_tree: node degree exceeds permutation cap at " + node);
            std::vector<std::string> regs{own_reg};
            for (const auto& c : children) regs.push_back(incoming(c));
            Mat povm = symmetric_projector(static_cast<int>(regs.size()), dim,
                                           kDefaultDimCap)
                           .matrix;
            d.tests.push_back({node, regs, povm, "perm@" + node + tag});
        };

        for (const auto& v : internal) {
            add_perm_test(v, reg_a(v));
            d.transfers.push_back({reg_b(v), v, t.parent.at(v)});
        }
        add_perm_test(t.root, reg_p(t.root));
        for (const auto& [u, input] : t.terminal_inputs) {
            (void)input;
            if (u != t.root) d.transfers.push_back({reg_p(u), u, t.parent.at(u)});
        }
    }

    std::string meta = "{\"n\":" + std::to_string(params.scheme.n) + ",\"k\":" +
                       std::to_string(params.repetitions) + ",\"terminals\":" +
                       std::to_string(t.terminal_inputs.size()) + "}";
    return d.finalize("eq_tree", meta, params.dim_cap);
}

// ---- relay-point EQ ----

RelayEqProtocol::RelayEqProtocol(RelayEqParams params) : params_(std::move(params)) {
    if (params_.r < 1) throw layout_error("eq_relay: r must be >= 1");
    if (static_cast<int>(params_.x.size()) != params_.n ||
        static_cast<int>(params_.y.size()) != params_.n)
        throw layout_error("eq_relay: input length mismatch");
    if (params_.segment_length == 0)
        params_.segment_length =
            static_cast<int>(std::ceil(std::cbrt(static_cast<double>(params_.n))));
    if (params_.segment_length < 2) throw layout_error("eq_relay: segment_length must be >= 2");
    if (params_.reps_per_segment == 0)
        params_.reps_per_segment = 42 * params_.segment_length * params_.segment_length;
    for (int pos = params_.segment_length; pos < params_.r; pos += params_.segment_length)
        relay_positions_.push_back(pos);
}

RelayEqProtocol build_eq_relay(const RelayEqParams& params) { return RelayEqProtocol(params); }

std::vector<int> RelayEqProtocol::segment_lengths() const {
    std::vector<int> lengths;
    int prev = 0;
    for (int pos : relay_positions_) {
        lengths.push_back(pos - prev);
        prev = pos;
    }
    lengths.push_back(params_.r - prev);
    return lengths;
}

double RelayEqProtocol::segment_bound(int segment_index) const {
    return eq_path_bound(segment_lengths().at(segment_index), params_.reps_per_segment);
}

std::vector<ProtocolPipeline> RelayEqProtocol::segments_for(
    const std::vector<std::string>& relay_values) const {
    if (relay_values.size() != relay_positions_.size())
        throw layout_error("eq_relay: relay value count mismatch");
    for (const auto& v : relay_values)
        if (static_cast<int>(v.size()) != params_.n)
            throw layout_error("eq_relay: relay value length mismatch");

    std::vector<std::string> bounds_left{params_.x};
    for (const auto& v : relay_values) bounds_left.push_back(v);
    std::vector<std::string> bounds_right(relay_values.begin(), relay_values.end());
    bounds_right.push_back(params_.y);

    std::vector<int> cuts{0};
    for (int pos : relay_positions_) cuts.push_back(pos);
    cuts.push_back(params_.r);

    std::vector<ProtocolPipeline> segments;
    for (size_t s = 0; s + 1 < cuts.size(); ++s) {
        const std::string& ls = bounds_left[s];
        const std::string& rs = bounds_right[s];
        std::vector<std::string> nodes;
        for (int i = cuts[s]; i <= cuts[s + 1]; ++i) nodes.push_back("v" + std::to_string(i));

        Vec lfp = fingerprint_amplitudes(params_.segment_scheme, ls);
        Vec rfp = fingerprint_amplitudes(params_.segment_scheme, rs);
        PipelineDraft d;
        ChainFinalSpec fin;
        fin.kind = ChainFinal::swap_with_prepared;
        fin.right_state = rfp;
        fin.right_spec = "fingerprint(" + rs + ")";
        d.honest_defined = (ls == rs);
        std::optional<Vec> honest = d.honest_defined ? std::optional<Vec>(lfp) : std::nullopt;
        append_hop_chain(d, nodes, "c" + std::to_string(s), params_.segment_scheme.state_dimension,
                         lfp, "fingerprint(" + ls + ")", fin, params_.reps_per_segment, honest);
        std::string meta = "{\"segment\":" + std::to_string(s) + ",\"left\":\"" + ls +
                           "\",\"right\":\"" + rs + "\"}";
        segments.push_back(d.finalize("eq_relay_segment", meta, params_.dim_cap));
    }
    return segments;
}

std::vector<std::string> RelayEqProtocol::honest_relay_values() const {
    return std::vector<std::string>(relay_positions_.size(), params_.x);
}

double RelayEqProtocol::honest_value() const {
    auto segments = segments_for(honest_relay_values());
    double value = 1.0;
    for (const auto& seg : segments) {
        if (seg.honest_product.empty()) return 0.0;
        StateVector proof = assemble_product_proof(seg, seg.honest_product, params_.dim_cap);
        value *= exact_accept_probability(seg, proof);
    }
    return value;
}

RelayEqProtocol::Adversary RelayEqProtocol::adversary() const {
    const int relays = static_cast<int>(relay_positions_.size());
    const std::int64_t choices = std::int64_t(1) << params_.n;
    double combos = std::pow(static_cast<double>(choices), relays);
    if (combos > 4096.0)
        throw dim_cap_error("eq_relay: relay assignment enumeration too large");

    std::map<std::pair<std::string, std::string>, double> cache;
    auto segment_value = [&](const ProtocolPipeline& seg, const std::string& ls,
                             const std::string& rs) {
        auto key = std::make_pair(ls, rs);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        double v = top_eigenpair(compile(seg, params_.dim_cap).accept_operator).value;
        cache[key] = v;
        return v;
    };

    Adversary best;
    std::vector<std::string> values(relays);
    std::int64_t total = 1;
    for (int i = 0; i < relays; ++i) total *= choices;
    for (std::int64_t a = 0; a < std::max<std::int64_t>(total, 1); ++a) {
        std::int64_t rem = a;
        for (int i = 0; i < relays; ++i) {
            values[i] = to_bits(static_cast<std::uint64_t>(rem % choices), params_.n);
            rem /= choices;
        }
        auto segments = segments_for(values);
        std::vector<std::string> lefts{params_.x};
        for (const auto& v : values) lefts.push_back(v);
        std::vector<std::string> rights(values.begin(), values.end());
        rights.push_back(params_.y);

        double value = 1.0;
        std::vector<double> seg_values;
        for (size_t s = 0; s < segments.size(); ++s) {
            double v = segment_value(segments[s], lefts[s], rights[s]);
            seg_values.push_back(v);
            value *= v;
        }
        if (value > best.value) {
            best.value = value;
            best.relay_values = values;
            best.segment_values = seg_values;
        }
    }
    return best;
}

// ---- greater-than ----

std::string to_string(GtVariant v) {
    switch (v) {
        case GtVariant::greater: return "gt";
        case GtVariant::less: return "gt_lt";
        case GtVariant::greater_equal: return "gt_ge";
        case GtVariant::less_equal: return "gt_le";
    }
    return "gt";
}

bool gt_truth(GtVariant v, std::uint64_t x, std::uint64_t y) {
    switch (v) {
        case GtVariant::greater: return x > y;
        case GtVariant::less: return x < y;
        case GtVariant::greater_equal: return x >= y;
        case GtVariant::less_equal: return x <= y;
    }
    return false;
}

FingerprintScheme SchemeFamily::make(int length) const {
    if (length == 0) return FingerprintScheme::hadamard(0);
    if (kind == FingerprintScheme::Kind::hadamard) return FingerprintScheme::hadamard(length);
    return FingerprintScheme::random_linear_code(length, std::max(3 * length, 4),
                                                 seed + static_cast<std::uint64_t>(length));
}

namespace {

int bit_of(std::uint64_t v, int pos, int n) {
    // MSB-first: bit 0 is the 2^(n-1) digit
    return static_cast<int>((v >> (n - 1 - pos)) & 1ULL);
}

bool variant_has_eq_branch(GtVariant v) {
    return v == GtVariant::greater_equal || v == GtVariant::less_equal;
}

// Bit-guard polarity at the two ends for a strict comparison claim.
void guard_bits(GtVariant v, int& want_x, int& want_y) {
    if (v == GtVariant::greater || v == GtVariant::greater_equal) {
        want_x = 1;
        want_y = 0;
    } else {
        want_x = 0;
        want_y = 1;
    }
}

Vec embed_with_bottom(const Vec& fp) {
    Vec out = Vec::Zero(fp.size() + 1);
    out.head(fp.size()) = fp;
    return out;
}

Vec bottom_state(std::int64_t dim) {
    Vec out = Vec::Zero(dim);
    out(dim - 1) = 1.0;
    return out;
}

struct GtChainSpec {
    std::int64_t dim = 2;
    Vec left, right;
    std::string left_desc, right_desc;
    bool guard_v0 = true, guard_vr = true;
    std::string guard_v0_desc, guard_vr_desc;
    bool honest = false;  // guards pass and prefixes agree
};

GtChainSpec gt_chain_spec(const GtParams& params, int index) {
    const int n = params.n;
    GtChainSpec spec;
    bool eq_branch = (index == n);
    if (index < 0 || index > n || (eq_branch && !variant_has_eq_branch(params.variant)))
        throw layout_error("gt: index out of range for variant");

    std::string xs = to_bits(params.x, n), ys = to_bits(params.y, n);
    int prefix_len = eq_branch ? n : index;
    FingerprintScheme scheme = params.scheme.make(prefix_len);

    if (!eq_branch) {
        int want_x = 0, want_y = 0;
        guard_bits(params.variant, want_x, want_y);
        spec.guard_v0 = bit_of(params.x, index, n) == want_x;
        spec.guard_vr = bit_of(params.y, index, n) == want_y;
        spec.guard_v0_desc = "x[" + std::to_string(index) + "]==" + std::to_string(want_x);
        spec.guard_vr_desc = "y[" + std::to_string(index) + "]==" + std::to_string(want_y);
    } else {
        spec.guard_v0 = spec.guard_vr = true;
        spec.guard_v0_desc = spec.guard_vr_desc = "equality branch";
    }

    std::string xp = xs.substr(0, prefix_len), yp = ys.substr(0, prefix_len);
    if (prefix_len == 0) {
        spec.dim = 2;
        spec.left = bottom_state(2);
        spec.right = bottom_state(2);
        spec.left_desc = spec.right_desc = "bottom";
        spec.honest = spec.guard_v0 && spec.guard_vr;
    } else {
        spec.dim = scheme.state_dimension + 1;
        spec.left = embed_with_bottom(fingerprint_amplitudes(scheme, xp));
        spec.right = embed_with_bottom(fingerprint_amplitudes(scheme, yp));
        spec.left_desc = "fingerprint(" + xp + ")";
        spec.right_desc = "fingerprint(" + yp + ")";
        spec.honest = spec.guard_v0 && spec.guard_vr && (xp == yp);
    }
    return spec;
}

}  // namespace

std::optional<int> gt_honest_index(GtVariant v, std::uint64_t x, std::uint64_t y, int n) {
    if (!gt_truth(v, x, y)) return std::nullopt;
    if (x == y) return n;  // reachable only for the _equal variants
    int want_x = 0, want_y = 0;
    guard_bits(v, want_x, want_y);
    for (int i = 0; i < n; ++i) {
        if (bit_of(x, i, n) != bit_of(y, i, n)) {
            // first differing bit; the guards hold here exactly when the
            // claimed comparison is true
            if (bit_of(x, i, n) == want_x && bit_of(y, i, n) == want_y) return i;
            return std::nullopt;
        }
    }
    return std::nullopt;
}

ProtocolPipeline build_gt(const GtParams& params) {
    if (params.n < 1 || params.n > 16) throw layout_error("gt: n out of range");
    if (params.x >> params.n || params.y >> params.n)
        throw layout_error("gt: inputs exceed n bits");
    int index;
    if (params.index) {
        index = *params.index;
    } else {
        auto honest = gt_honest_index(params.variant, params.x, params.y, params.n);
        if (!honest) throw layout_error("gt: no honest index for a no-instance");
        index = *honest;
    }
    GtChainSpec spec = gt_chain_spec(params, index);

    PipelineDraft d;
    d.guards.push_back({"v0", spec.guard_v0_desc, spec.guard_v0});
    d.guards.push_back({"v" + std::to_string(params.r), spec.guard_vr_desc, spec.guard_vr});
    d.honest_defined = spec.honest;
    ChainFinalSpec fin;
    fin.kind = ChainFinal::swap_with_prepared;
    fin.right_state = spec.right;
    fin.right_spec = spec.right_desc;
    std::optional<Vec> honest =
        spec.honest ? std::optional<Vec>(spec.left) : std::nullopt;
    append_hop_chain(d, path_nodes(params.r), "g", spec.dim, spec.left, spec.left_desc, fin,
                     params.repetitions, honest);

    std::string meta = "{\"variant\":\"" + to_string(params.variant) + "\",\"r\":" +
                       std::to_string(params.r) + ",\"n\":" + std::to_string(params.n) +
                       ",\"x\":" + std::to_string(params.x) + ",\"y\":" +
                       std::to_string(params.y) + ",\"index\":" + std::to_string(index) +
                       ",\"k\":" + std::to_string(params.repetitions) + "}";
    return d.finalize(to_string(params.variant), meta, params.dim_cap);
}

GtAdversary gt_adversary_value(const GtParams& params) {
    GtAdversary out;
    int max_index = variant_has_eq_branch(params.variant) ? params.n : params.n - 1;
    for (int i = 0; i <= max_index; ++i) {
        GtParams p = params;
        p.index = i;
        ProtocolPipeline pipe = build_gt(p);
        double value = 0.0;
        if (!pipe.any_guard_failed())
            value = top_eigenpair(compile(pipe, params.dim_cap).accept_operator).value;
        out.per_index.emplace_back(i, value);
        if (value > out.value) {
            out.value = value;
            out.best_index = i;
        }
    }
    return out;
}

// ---- ranking verification ----

bool rv_truth(const RvParams& params) {
    const auto& t = params.topology;
    std::uint64_t subject = params.inputs.at(t.root);
    int count = 0, total = 0;
    for (const auto& [node, value] : params.inputs) {
        if (node == t.root) continue;
        ++total;
        if (subject >= value) ++count;
    }
    // the subject is the j-th largest when exactly t - j of the other
    // inputs are <= it
    return count == total + 1 - params.rank_j;
}

namespace {

std::vector<std::string> rv_leaves(const RvParams& params) {
    std::vector<std::string> leaves;
    for (const auto& [node, value] : params.inputs) {
        (void)value;
        if (node != params.topology.root) leaves.push_back(node);
    }
    std::sort(leaves.begin(), leaves.end());
    return leaves;
}

ProtocolPipeline build_rv_leaf_chain(const RvParams& params, const std::string& leaf,
                                     GtVariant variant, std::optional<int> index) {
    auto nodes = params.topology.path_from_root(leaf);
    GtParams g;
    g.r = static_cast<int>(nodes.size()) - 1;
    g.n = params.n;
    g.x = params.inputs.at(params.topology.root);
    g.y = params.inputs.at(leaf);
    g.scheme = params.scheme;
    g.repetitions = params.repetitions;
    g.variant = variant;
    g.index = index;
    g.dim_cap = params.dim_cap;

    int idx;
    if (index) {
        idx = *index;
    } else {
        auto honest = gt_honest_index(variant, g.x, g.y, g.n);
        if (!honest) throw layout_error("rv: no honest index on path to " + leaf);
        idx = *honest;
    }
    GtChainSpec spec = gt_chain_spec(g, idx);
    PipelineDraft d;
    d.guards.push_back({nodes.front(), spec.guard_v0_desc, spec.guard_v0});
    d.guards.push_back({nodes.back(), spec.guard_vr_desc, spec.guard_vr});
    d.honest_defined = spec.honest;
    ChainFinalSpec fin;
    fin.kind = ChainFinal::swap_with_prepared;
    fin.right_state = spec.right;
    fin.right_spec = spec.right_desc;
    std::optional<Vec> honest = spec.honest ? std::optional<Vec>(spec.left) : std::nullopt;
    append_hop_chain(d, nodes, "r_" + leaf, spec.dim, spec.left, spec.left_desc, fin,
                     params.repetitions, honest);
    std::string meta = "{\"leaf\":\"" + leaf + "\",\"variant\":\"" + to_string(variant) +
                       "\",\"index\":" + std::to_string(idx) + "}";
    return d.finalize("rv_path_" + to_string(variant), meta, params.dim_cap);
}

}  // namespace

std::vector<ProtocolPipeline> rv_pipelines(const RvParams& params,
                                           const std::map<std::string, GtVariant>& directions,
                                           const std::map<std::string, int>& indices) {
    std::vector<ProtocolPipeline> out;
    for (const auto& leaf : rv_leaves(params)) {
        std::optional<int> index;
        auto it = indices.find(leaf);
        if (it != indices.end()) index = it->second;
        out.push_back(build_rv_leaf_chain(params, leaf, directions.at(leaf), index));
    }
    return out;
}

RvEvaluation rv_evaluate(const RvParams& params) {
    RvEvaluation ev;
    ev.truth = rv_truth(params);
    auto leaves = rv_leaves(params);
    const int t = static_cast<int>(leaves.size()) + 1;
    const int required_ge = t - params.rank_j;
    if (required_ge < 0 || required_ge > static_cast<int>(leaves.size())) {
        // no direction assignment can pass the root count
        ev.honest_value = 0.0;
        ev.adversary_value = 0.0;
        return ev;
    }

    std::uint64_t subject = params.inputs.at(params.topology.root);

    // Cache per (leaf, variant): optimal value over proofs and indices.
    std::map<std::pair<std::string, GtVariant>, double> cache;
    auto leaf_value = [&](const std::string& leaf, GtVariant v) {
        auto key = std::make_pair(leaf, v);
        auto it = cache.find(key);
        if (it != cache.end()) return it->second;
        GtParams g;
        g.r = static_cast<int>(params.topology.path_from_root(leaf).size()) - 1;
        g.n = params.n;
        g.x = subject;
        g.y = params.inputs.at(leaf);
        g.scheme = params.scheme;
        g.repetitions = params.repetitions;
        g.variant = v;
        g.dim_cap = params.dim_cap;
        double value = gt_adversary_value(g).value;
        cache[key] = value;
        return value;
    };

    const int nl = static_cast<int>(leaves.size());
    for (std::uint64_t mask = 0; mask < (1ULL << nl); ++mask) {
        if (__builtin_popcountll(mask) != required_ge) continue;
        double value = 1.0;
        std::vector<std::string> dirs;
        std::vector<std::pair<std::string, double>> per_leaf;
        for (int i = 0; i < nl; ++i) {
            GtVariant v = (mask & (1ULL << i)) ? GtVariant::greater_equal : GtVariant::less;
            dirs.push_back((mask & (1ULL << i)) ? "ge" : "lt");
            double lv = leaf_value(leaves[i], v);
            per_leaf.emplace_back(leaves[i], lv);
            value *= lv;
        }
        if (value > ev.adversary_value) {
            ev.adversary_value = value;
            ev.best_directions = dirs;
            ev.per_leaf_values = per_leaf;
        }
    }

    // Honest run: true directions; passes the root count exactly when the
    // ranking claim is true, and then every per-path GT claim is honest.
    int true_ge = 0;
    for (const auto& leaf : leaves)
        if (subject >= params.inputs.at(leaf)) ++true_ge;
    if (true_ge != required_ge) {
        ev.honest_value = 0.0;
        return ev;
    }
    double honest = 1.0;
    for (const auto& leaf : leaves) {
        GtVariant v = (subject >= params.inputs.at(leaf)) ? GtVariant::greater_equal
                                                          : GtVariant::less;
        ProtocolPipeline pipe = build_rv_leaf_chain(params, leaf, v, std::nullopt);
        StateVector proof = assemble_product_proof(pipe, pipe.honest_product, params.dim_cap);
        honest *= exact_accept_probability(pipe, proof);
    }
    ev.honest_value = honest;
    return ev;
}

// ---- one-way conversions ----

std::vector<ProtocolPipeline> build_forall_f(const ForallParams& params) {
    if (params.trees.empty()) throw layout_error("forall_f: no spanning trees supplied");
    const std::int64_t dim = params.protocol.message_dim;

    std::vector<ProtocolPipeline> out;
    for (size_t ti = 0; ti < params.trees.size(); ++ti) {
        const Topology& t = params.trees[ti];
        if (!params.inputs.count(t.root))
            throw layout_error("forall_f: tree root has no input");
        const std::string& root_input = params.inputs.at(t.root);
        Vec msg = params.protocol.message(root_input);
        const std::string tree_tag = "t" + std::to_string(ti);

        // internal = non-root nodes with children; every childless node
        // must be a terminal (it runs the POVM)
        std::vector<std::string> internal;
        for (const auto& node : t.nodes) {
            if (node == t.root) continue;
            if (t.children_of(node).empty()) {
                if (!params.inputs.count(node))
                    throw layout_error("forall_f: leaf without input: " + node);
            } else {
                internal.push_back(node);
            }
        }
        std::sort(internal.begin(), internal.end(), [&](const auto& a, const auto& b) {
            int da = static_cast<int>(t.path_from_root(a).size());
            int db = static_cast<int>(t.path_from_root(b).size());
            return da != db ? da < db : a < b;
        });

        PipelineDraft d;
        for (int i = 1; i <= params.repetitions; ++i) {
            const std::string tag = "_" + std::to_string(i);
            auto kept_reg = [&](const std::string& v) { return tree_tag + "k_" + v + tag; };
            auto sent_reg = [&](const std::string& v, int mu) {
                return tree_tag + "s_" + v + "_" + std::to_string(mu) + tag;
            };
            auto root_copy = [&](const std::string& c) { return tree_tag + "m_" + c + tag; };

            for (const auto& v : internal) {
                auto children = t.children_of(v);
                const int delta = static_cast<int>(children.size());
                if (delta + 1 > kMaxPermutationArity)
                    throw layout_error("forall_f: node degree exceeds permutation cap at " + v);
                std::vector<std::string> regs{kept_reg(v)};
                d.add_proof(kept_reg(v), dim, v);
                d.set_honest(kept_reg(v), msg);
                for (int mu = 0; mu < delta; ++mu) {
                    d.add_proof(sent_reg(v, mu), dim, v);
                    d.set_honest(sent_reg(v, mu), msg);
                    regs.push_back(sent_reg(v, mu));
                    d.transfers.push_back({sent_reg(v, mu), v, children[mu]});
                }
                d.channels.push_back(symmetrize_channel(regs, dim));
            }
            for (const auto& c : t.children_of(t.root)) {
                d.add_prepared(root_copy(c), dim, t.root, msg,
                               "message(" + root_input + ")");
                d.transfers.push_back({root_copy(c), t.root, c});
            }

            auto incoming = [&](const std::string& v) -> std::string {
                const std::string& p = t.parent.at(v);
                if (p == t.root) return root_copy(v);
                auto siblings = t.children_of(p);
                int mu = static_cast<int>(
                    std::find(siblings.begin(), siblings.end(), v) - siblings.begin());
                return sent_reg(p, mu);
            };

            Mat swap_povm = symmetric_projector(2, dim, dim * dim).matrix;
            for (const auto& v : internal)
                d.tests.push_back({v, {kept_reg(v), incoming(v)}, swap_povm,
                                   "swap@" + v + tag});
            for (const auto& node : t.nodes) {
                if (node == t.root || !t.children_of(node).empty()) continue;
                Mat povm = params.protocol.accept_povm(params.inputs.at(node));
                d.tests.push_back({node, {incoming(node)}, povm, "povm@" + node + tag});
            }
        }
        std::string meta = "{\"tree\":" + std::to_string(ti) + ",\"root\":\"" + t.root +
                           "\",\"protocol\":\"" + params.protocol.name + "\",\"k\":" +
                           std::to_string(params.repetitions) + "}";
        out.push_back(d.finalize("forall_f", meta, params.dim_cap));
    }
    return out;
}

double forall_adversary_value(const std::vector<ProtocolPipeline>& pipelines,
                              std::int64_t dim_cap) {
    double value = 1.0;
    for (const auto& p : pipelines)
        value *= top_eigenpair(compile(p, dim_cap).accept_operator).value;
    return value;
}

ProtocolPipeline build_from_oneway_qma(const OneWayQmaConversionParams& params) {
    const OneWayQmaProtocol& q = params.protocol;
    if (params.r < 1) throw layout_error("from_oneway_qma: r must be >= 1");
    const std::int64_t d_msg = q.message_dim();
    Mat ux = q.alice_unitary(params.x);
    if (ux.rows() != d_msg) throw layout_error("from_oneway_qma: U_x dimension mismatch");
    Mat my = q.accept_povm(params.y);
    if (my.rows() != d_msg) throw layout_error("from_oneway_qma: POVM dimension mismatch");

    Vec anc0 = Vec::Zero(q.ancilla_dim);
    anc0(0) = 1.0;
    Vec honest_proof = q.honest_proof ? q.honest_proof(params.x, params.y) : Vec();
    Vec honest_msg;
    if (honest_proof.size())
        honest_msg = ux * kron_vec(honest_proof, anc0);

    PipelineDraft d;
    d.honest_defined = honest_proof.size() > 0;
    auto nodes = path_nodes(params.r);
    Mat swap_povm = symmetric_projector(2, d_msg, d_msg * d_msg).matrix;

    for (int i = 1; i <= params.repetitions; ++i) {
        const std::string tag = "_" + std::to_string(i);
        const std::string qp = "qp" + tag;
        const std::string anc = "anc" + tag;
        d.add_proof(qp, q.proof_dim, "v0");
        d.add_prepared(anc, q.ancilla_dim, "v0", anc0, "zeros");
        if (d.honest_defined) d.set_honest(qp, honest_proof);

        auto reg_a = [&](int j) { return "n" + std::to_string(j) + "a" + tag; };
        auto reg_b = [&](int j) { return "n" + std::to_string(j) + "b" + tag; };
        for (int j = 1; j <= params.r - 1; ++j) {
            d.add_proof(reg_a(j), d_msg, nodes[j]);
            d.add_proof(reg_b(j), d_msg, nodes[j]);
            d.channels.push_back(symmetrize_channel({reg_a(j), reg_b(j)}, d_msg));
            d.transfers.push_back({reg_b(j), nodes[j], nodes[j + 1]});
            if (d.honest_defined) {
                d.set_honest(reg_a(j), honest_msg);
                d.set_honest(reg_b(j), honest_msg);
            }
        }
        d.transfers.push_back({qp, "v0", "v1"});
        d.transfers.push_back({anc, "v0", "v1"});

        if (params.r == 1) {
            // the final POVM applies directly to Alice's output
            Mat compressed = ux.adjoint() * my * ux;
            d.tests.push_back({nodes[1], {qp, anc}, compressed, "povm@v1" + tag});
        } else {
            // the SWAP test at v1 sees U_x applied to (proof, ancilla)
            Mat id_msg = Mat::Identity(d_msg, d_msg);
            Mat lifted = kron(ux, id_msg);
            Mat test1 = lifted.adjoint() * swap_povm * lifted;
            d.tests.push_back({nodes[1], {qp, anc, reg_a(1)}, test1, "swap@v1" + tag});
            for (int j = 2; j <= params.r - 1; ++j)
                d.tests.push_back({nodes[j], {reg_b(j - 1), reg_a(j)}, swap_povm,
                                   "swap@" + nodes[j] + tag});
            d.tests.push_back({nodes[params.r], {reg_b(params.r - 1)}, my,
                               "povm@" + nodes[params.r] + tag});
        }
    }

    std::string meta = "{\"protocol\":\"" + q.name + "\",\"r\":" + std::to_string(params.r) +
                       ",\"x\":\"" + params.x + "\",\"y\":\"" + params.y + "\",\"k\":" +
                       std::to_string(params.repetitions) + "}";
    return d.finalize("from_oneway_qma", meta, params.dim_cap);
}

}  // namespace dqma
