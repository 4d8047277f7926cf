#include "dqma/network.hpp"

#include "dqma/random.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <functional>
#include <set>
#include <thread>

namespace dqma {

// ---- topology ----

Topology Topology::path(int r) {
    if (r < 1) throw layout_error("path radius must be >= 1");
    Topology t;
    t.kind = Kind::path;
    t.radius = r;
    for (int i = 0; i <= r; ++i) t.nodes.push_back("v" + std::to_string(i));
    for (int i = 0; i < r; ++i) t.edges.emplace_back(t.nodes[i], t.nodes[i + 1]);
    return t;
}

Topology Topology::tree(std::vector<std::pair<std::string, std::string>> edges,
                        std::string root,
                        std::map<std::string, std::string> terminal_inputs) {
    Topology t;
    t.kind = Kind::tree;
    t.root = root;
    t.edges = std::move(edges);
    t.terminal_inputs = std::move(terminal_inputs);

    std::map<std::string, std::vector<std::string>> adj;
    std::set<std::string> seen;
    for (const auto& [a, b] : t.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
        seen.insert(a);
        seen.insert(b);
    }
    seen.insert(t.root);
    if (!adj.count(t.root) && seen.size() > 1)
        throw layout_error("tree root is not part of the edge set");

    // BFS from the root establishes parents and checks connectivity.
    std::deque<std::string> queue{t.root};
    std::set<std::string> visited{t.root};
    t.nodes.push_back(t.root);
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        for (const auto& next : adj[cur]) {
            if (visited.count(next)) continue;
            visited.insert(next);
            t.parent[next] = cur;
            t.nodes.push_back(next);
            queue.push_back(next);
        }
    }
    if (visited.size() != seen.size()) throw layout_error("tree is not connected");
    if (static_cast<int>(t.edges.size()) != static_cast<int>(t.nodes.size()) - 1)
        throw layout_error("edge set contains a cycle");

    if (!t.terminal_inputs.count(t.root))
        throw layout_error("tree root must be a terminal");
    for (const auto& [node, input] : t.terminal_inputs) {
        (void)input;
        if (!visited.count(node)) throw layout_error("terminal not in tree: " + node);
        if (node != t.root && !t.children_of(node).empty())
            throw layout_error("non-root terminal must be a leaf: " + node);
    }
    t.radius = t.depth();
    return t;
}

std::vector<std::string> Topology::children_of(const std::string& node) const {
    std::vector<std::string> out;
    for (const auto& [child, par] : parent)
        if (par == node) out.push_back(child);
    std::sort(out.begin(), out.end());
    return out;
}

std::vector<std::string> Topology::path_from_root(const std::string& leaf) const {
    std::vector<std::string> rev{leaf};
    std::string cur = leaf;
    while (cur != root) {
        auto it = parent.find(cur);
        if (it == parent.end()) throw layout_error("node not in tree: " + leaf);
        cur = it->second;
        rev.push_back(cur);
    }
    std::reverse(rev.begin(), rev.end());
    return rev;
}

int Topology::depth() const {
    int best = 0;
    for (const auto& node : nodes)
        best = std::max(best, static_cast<int>(path_from_root(node).size()) - 1);
    return best;
}

bool Topology::is_terminal(const std::string& node) const {
    return terminal_inputs.count(node) > 0;
}

Topology build_rooted_tree(const std::vector<std::string>& nodes,
                           const std::vector<std::pair<std::string, std::string>>& edges,
                           const std::map<std::string, std::string>& terminal_inputs,
                           const std::string& root_terminal) {
    if (!terminal_inputs.count(root_terminal))
        throw layout_error("root must be a terminal");
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [a, b] : edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    for (auto& [k, v] : adj) {
        (void)k;
        std::sort(v.begin(), v.end());
    }

    // BFS tree from the root.
    std::map<std::string, std::string> parent;
    std::deque<std::string> queue{root_terminal};
    std::set<std::string> visited{root_terminal};
    while (!queue.empty()) {
        auto cur = queue.front();
        queue.pop_front();
        for (const auto& next : adj[cur]) {
            if (visited.count(next)) continue;
            visited.insert(next);
            parent[next] = cur;
            queue.push_back(next);
        }
    }
    for (const auto& n : nodes)
        if (!visited.count(n)) throw layout_error("graph is not connected at: " + n);

    // Keep only nodes with a terminal in their subtree.
    std::map<std::string, bool> keeps;
    std::function<bool(const std::string&)> mark = [&](const std::string& v) -> bool {
        bool keep = terminal_inputs.count(v) > 0;
        for (const auto& [c, p] : parent)
            if (p == v) keep = mark(c) || keep;
        keeps[v] = keep;
        return keep;
    };
    mark(root_terminal);

    std::vector<std::pair<std::string, std::string>> tree_edges;
    for (const auto& [c, p] : parent)
        if (keeps[c]) tree_edges.emplace_back(p, c);

    // Pendant re-attachment: an internal terminal u becomes an ordinary
    // relay node u' with u re-attached below it as a leaf.
    std::map<std::string, std::string> inputs = terminal_inputs;
    std::set<std::string> internal;
    for (const auto& [c, p] : parent) {
        (void)c;
        if (keeps.count(p) && keeps[p] && inputs.count(p) && p != root_terminal)
            internal.insert(p);
    }
    // only terminals that actually have kept children are internal
    std::set<std::string> with_children;
    for (const auto& [p, c] : tree_edges) {
        (void)c;
        with_children.insert(p);
    }
    for (const auto& term : internal) {
        if (!with_children.count(term)) continue;
        std::string relay = term + "'";
        for (auto& [p, c] : tree_edges) {
            if (p == term) p = relay;
            if (c == term) c = relay;
        }
        tree_edges.emplace_back(relay, term);
    }
    return Topology::tree(std::move(tree_edges), root_terminal, std::move(inputs));
}

// ---- pipeline helpers ----

std::vector<std::string> ProtocolPipeline::proof_register_ids() const {
    std::vector<std::string> out;
    for (const auto& r : layout.registers())
        if (r.role == RegisterRole::proof) out.push_back(r.id);
    return out;
}

std::vector<std::string> ProtocolPipeline::prepared_register_ids() const {
    std::vector<std::string> out;
    for (const auto& r : layout.registers())
        if (r.role != RegisterRole::proof) out.push_back(r.id);
    return out;
}

RegisterLayout ProtocolPipeline::proof_layout(std::int64_t dim_cap) const {
    return layout.subset(proof_register_ids(), dim_cap);
}

std::int64_t ProtocolPipeline::proof_dimension() const {
    std::int64_t d = 1;
    for (const auto& r : layout.registers())
        if (r.role == RegisterRole::proof) d *= r.dim;
    return d;
}

std::vector<std::string> ProtocolPipeline::node_ids() const {
    std::set<std::string> out;
    for (const auto& t : tests) out.insert(t.node);
    for (const auto& g : guards) out.insert(g.node);
    for (const auto& r : layout.registers())
        if (r.owner != "prover") out.insert(r.owner);
    return {out.begin(), out.end()};
}

bool ProtocolPipeline::any_guard_failed() const {
    for (const auto& g : guards)
        if (!g.passed) return true;
    return false;
}

// ---- compile ----

namespace {

struct PreparedLookup {
    std::map<std::string, const PreparedState*> by_id;
    explicit PreparedLookup(const ProtocolPipeline& p) {
        for (const auto& ps : p.prepared) by_id[ps.register_id] = &ps;
    }
};

void validate_pipeline(const ProtocolPipeline& p) {
    PreparedLookup prep(p);
    for (const auto& r : p.layout.registers()) {
        bool has_state = prep.by_id.count(r.id) > 0;
        if (r.role == RegisterRole::proof && has_state)
            throw layout_error("proof register has a prepared state: " + r.id);
        if (r.role != RegisterRole::proof && !has_state)
            throw layout_error("prepared register lacks a state: " + r.id);
    }
    // Tests must be pairwise register-disjoint.
    std::set<std::string> used;
    for (const auto& t : p.tests) {
        std::int64_t dim = 1;
        for (const auto& id : t.registers) {
            if (used.count(id))
                throw layout_error("overlapping test registers at: " + id);
            used.insert(id);
            dim *= p.layout.dim(p.layout.position(id));
        }
        if (t.povm.rows() != dim || t.povm.cols() != dim)
            throw layout_error("test POVM dimension mismatch: " + t.label);
        if (!is_hermitian(t.povm))
            throw numeric_error("test POVM is not Hermitian: " + t.label);
    }
    // Channels may only touch proof registers.
    for (const auto& ch : p.channels)
        for (const auto& id : ch.registers) {
            int pos = p.layout.position(id);
            if (p.layout.spec(pos).role != RegisterRole::proof)
                throw layout_error("channel acts on a non-proof register: " + id);
        }
}

// Test contracted against the prepared states it touches: returns the
// operator on the test's proof registers (in their test order) or, when the
// test touches no proof register, a scalar acceptance weight.
struct ContractedTest {
    std::vector<std::string> proof_regs;
    Mat matrix;   // empty if scalar
    double scalar = 1.0;
    bool is_scalar = false;
};

ContractedTest contract_test(const ProtocolPipeline& p, const LocalTest& t,
                             const PreparedLookup& prep) {
    RegisterLayout test_layout = p.layout.subset(t.registers, kStateDimCap);
    std::vector<std::pair<int, Vec>> fixed;
    ContractedTest out;
    for (int i = 0; i < test_layout.size(); ++i) {
        const auto& id = test_layout.spec(i).id;
        auto it = prep.by_id.find(id);
        if (it != prep.by_id.end())
            fixed.emplace_back(i, it->second->amplitudes);
        else
            out.proof_regs.push_back(id);
    }
    if (fixed.empty()) {
        out.matrix = t.povm;
        return out;
    }
    Mat m = contract_pure(t.povm, test_layout, fixed);
    if (out.proof_regs.empty()) {
        out.is_scalar = true;
        out.scalar = std::clamp(m(0, 0).real(), 0.0, 1.0);
        return out;
    }
    out.matrix = std::move(m);
    return out;
}

// Heisenberg pullback; channels whose registers lie outside the operator's
// support act as identity on it and are skipped.
HermitianOperator pull_back_through_channels(const ProtocolPipeline& p,
                                             const RegisterLayout& proof_layout, Mat t,
                                             std::set<std::string> support) {
    HermitianOperator op(proof_layout, std::move(t));
    for (auto it = p.channels.rbegin(); it != p.channels.rend(); ++it) {
        bool touches = false;
        for (const auto& id : it->registers)
            if (support.count(id)) touches = true;
        if (!touches) continue;
        op = apply_channel_adjoint(*it, op);
        for (const auto& id : it->registers) support.insert(id);
    }
    return op;
}

HermitianOperator build_test_product(const ProtocolPipeline& p,
                                     const RegisterLayout& proof_layout,
                                     const std::vector<const LocalTest*>& tests,
                                     const PreparedLookup& prep) {
    const std::int64_t dp = proof_layout.total_dimension();
    double scalar = 1.0;

    struct Factor {
        std::vector<int> positions;
        Mat matrix;
    };
    std::vector<Factor> factors;
    std::set<std::string> support;
    for (const auto* test : tests) {
        auto ct = contract_test(p, *test, prep);
        if (ct.is_scalar) {
            scalar *= ct.scalar;
            continue;
        }
        for (const auto& id : ct.proof_regs) support.insert(id);
        factors.push_back({proof_layout.positions(ct.proof_regs), std::move(ct.matrix)});
    }

    // Fast path: every factor covers consecutive ascending positions, so
    // the product is a single Kronecker chain with identity gaps.
    bool contiguous = true;
    for (const auto& f : factors)
        for (size_t k = 0; k + 1 < f.positions.size(); ++k)
            if (f.positions[k + 1] != f.positions[k] + 1) contiguous = false;

    Mat t;
    if (contiguous) {
        std::sort(factors.begin(), factors.end(),
                  [](const Factor& a, const Factor& b) {
                      return a.positions.front() < b.positions.front();
                  });
        t = Mat::Identity(1, 1);
        int pos = 0;
        auto pad_identity = [&](int upto) {
            std::int64_t gap = 1;
            while (pos < upto) gap *= proof_layout.dim(pos++);
            if (gap > 1) t = kron(t, Mat::Identity(gap, gap));
        };
        for (const auto& f : factors) {
            pad_identity(f.positions.front());
            t = kron(t, f.matrix);
            pos = f.positions.back() + 1;
        }
        pad_identity(proof_layout.size());
    } else {
        t = Mat::Identity(dp, dp);
        for (const auto& f : factors) {
            SubsetIndexer ix(proof_layout, f.positions);
            left_apply_subset(t, f.matrix, ix);
        }
        // the product of disjoint POVM elements is Hermitian; symmetrize
        // away the accumulation rounding
        t = 0.5 * (t + Mat(t.adjoint()));
    }
    t *= scalar;
    return pull_back_through_channels(p, proof_layout, std::move(t), std::move(support));
}

}  // namespace

AcceptanceModel compile(const ProtocolPipeline& pipeline, std::int64_t dim_cap) {
    validate_pipeline(pipeline);
    RegisterLayout proof_layout = pipeline.proof_layout(dim_cap);
    PreparedLookup prep(pipeline);
    const std::int64_t dp = proof_layout.total_dimension();

    AcceptanceModel model;
    model.pipeline = std::make_shared<ProtocolPipeline>(pipeline);
    model.proof_dimension = dp;

    std::set<std::string> failed_nodes;
    for (const auto& g : pipeline.guards)
        if (!g.passed) failed_nodes.insert(g.node);

    // Full acceptance operator.
    if (!failed_nodes.empty()) {
        model.accept_operator = HermitianOperator(proof_layout, Mat::Zero(dp, dp));
    } else {
        std::vector<const LocalTest*> all;
        for (const auto& t : pipeline.tests) all.push_back(&t);
        model.accept_operator = build_test_product(pipeline, proof_layout, all, prep);
    }

    // Per-node marginal operators.
    for (const auto& node : pipeline.node_ids()) {
        if (failed_nodes.count(node)) {
            model.per_node.emplace(node, HermitianOperator(proof_layout, Mat::Zero(dp, dp)));
            continue;
        }
        std::vector<const LocalTest*> own;
        for (const auto& t : pipeline.tests)
            if (t.node == node) own.push_back(&t);
        if (own.empty()) {
            model.per_node.emplace(node,
                                   HermitianOperator(proof_layout, Mat::Identity(dp, dp)));
            continue;
        }
        model.per_node.emplace(node, build_test_product(pipeline, proof_layout, own, prep));
    }
    return model;
}

// ---- exact branch-enumeration route ----

namespace {

Vec interleave_full_state(const ProtocolPipeline& p, const Vec& proof_amps) {
    const auto& layout = p.layout;
    PreparedLookup prep(p);
    auto proof_ids = p.proof_register_ids();
    RegisterLayout proof_layout = layout.subset(proof_ids, kStateDimCap);
    if (proof_amps.size() != proof_layout.total_dimension())
        throw layout_error("proof state does not match pipeline proof space");

    std::vector<int> proof_pos;
    std::vector<std::pair<int, const Vec*>> prepared_pos;
    for (int i = 0; i < layout.size(); ++i) {
        const auto& r = layout.spec(i);
        if (r.role == RegisterRole::proof)
            proof_pos.push_back(i);
        else
            prepared_pos.emplace_back(i, &prep.by_id.at(r.id)->amplitudes);
    }

    Vec full = Vec::Zero(layout.total_dimension());
    std::vector<std::int64_t> digits;
    for (std::int64_t idx = 0; idx < layout.total_dimension(); ++idx) {
        layout.decompose(idx, digits);
        std::int64_t pidx = 0;
        for (int pos : proof_pos) pidx = pidx * layout.dim(pos) + digits[pos];
        cplx amp = proof_amps(pidx);
        if (amp == cplx(0.0, 0.0)) continue;
        for (const auto& [pos, vec] : prepared_pos) {
            amp *= (*vec)(digits[pos]);
            if (amp == cplx(0.0, 0.0)) break;
        }
        full(idx) = amp;
    }
    return full;
}

double branch_enumerated_accept(const ProtocolPipeline& p, const Vec& proof_amps) {
    if (p.any_guard_failed()) return 0.0;
    Vec base = interleave_full_state(p, proof_amps);

    std::vector<SubsetIndexer> channel_ix;
    channel_ix.reserve(p.channels.size());
    for (const auto& ch : p.channels)
        channel_ix.emplace_back(p.layout, p.layout.positions(ch.registers));

    std::vector<SubsetIndexer> test_ix;
    test_ix.reserve(p.tests.size());
    for (const auto& t : p.tests)
        test_ix.emplace_back(p.layout, p.layout.positions(t.registers));

    double total = 0.0;
    std::function<void(size_t, Vec, double)> recurse = [&](size_t c, Vec psi, double weight) {
        if (c == p.channels.size()) {
            // All tests act on disjoint registers, so the all-accept
            // probability is the expectation of the tensor of elements;
            // evaluate it by applying sqrt factors would be overkill here,
            // expectation of the product of commuting PSD elements suffices.
            Vec cur = psi;
            for (size_t t = 0; t < p.tests.size(); ++t)
                apply_subset_operator(cur, p.tests[t].povm, test_ix[t]);
            total += weight * psi.dot(cur).real();
            return;
        }
        for (size_t b = 0; b < p.channels[c].branches.size(); ++b) {
            Vec next = psi;
            apply_subset_unitary(next, p.channels[c].branches[b].unitary, channel_ix[c]);
            recurse(c + 1, std::move(next), weight * p.channels[c].branches[b].probability);
        }
    };
    recurse(0, base, 1.0);
    return std::clamp(total, 0.0, 1.0);
}

}  // namespace

double exact_accept_probability(const ProtocolPipeline& pipeline, const StateVector& proof) {
    validate_pipeline(pipeline);
    return branch_enumerated_accept(pipeline, proof.amplitudes);
}

double exact_accept_probability(const ProtocolPipeline& pipeline, const DensityOperator& proof) {
    validate_pipeline(pipeline);
    Eigen::SelfAdjointEigenSolver<Mat> es(proof.matrix);
    double total = 0.0;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double w = es.eigenvalues()(i);
        if (w < 1e-14) continue;
        total += w * branch_enumerated_accept(pipeline, es.eigenvectors().col(i));
    }
    return std::clamp(total, 0.0, 1.0);
}

StateVector assemble_product_proof(const ProtocolPipeline& pipeline,
                                   const std::vector<std::pair<std::string, Vec>>& parts,
                                   std::int64_t dim_cap) {
    RegisterLayout proof_layout = pipeline.proof_layout(dim_cap);
    std::map<std::string, const Vec*> by_id;
    for (const auto& [id, v] : parts) by_id[id] = &v;
    Vec acc = Vec::Ones(1);
    for (const auto& r : proof_layout.registers()) {
        auto it = by_id.find(r.id);
        if (it == by_id.end())
            throw layout_error("product proof missing register: " + r.id);
        if (it->second->size() != r.dim)
            throw layout_error("product proof dimension mismatch at: " + r.id);
        acc = kron_vec(acc, *it->second);
    }
    return StateVector(std::move(proof_layout), std::move(acc));
}

// ---- sampling executor ----

double SampleStats::all_accept_frequency() const {
    return shots ? static_cast<double>(all_accept) / static_cast<double>(shots) : 0.0;
}

double SampleStats::all_accept_stderr() const {
    if (!shots) return 0.0;
    double p = all_accept_frequency();
    return std::sqrt(std::max(p * (1.0 - p), 1.0 / static_cast<double>(shots)) /
                     static_cast<double>(shots));
}

double SampleStats::node_reject_frequency(const std::string& node) const {
    auto it = node_rejects.find(node);
    if (it == node_rejects.end()) return 0.0;
    return shots ? static_cast<double>(it->second) / static_cast<double>(shots) : 0.0;
}

namespace {

struct SamplerPlan {
    const ProtocolPipeline* pipeline;
    std::vector<Vec> proof_vectors;       // eigenvectors of the proof
    std::vector<double> proof_weights;    // cumulative
    std::vector<Vec> base_states;         // interleaved full states per proof vector
    std::vector<SubsetIndexer> channel_ix;
    std::vector<std::vector<double>> channel_cdf;
    std::vector<SubsetIndexer> test_ix;
    std::vector<Mat> sqrt_accept, sqrt_reject;
    std::vector<std::string> nodes;               // node order for counting
    std::map<std::string, int> node_index;
    std::vector<int> test_node;                   // test -> node index
    std::vector<int> guard_failed_nodes;          // node indices rejected by guards
};

SamplerPlan make_plan(const ProtocolPipeline& p, const std::vector<Vec>& proof_vecs,
                      const std::vector<double>& weights) {
    validate_pipeline(p);
    SamplerPlan plan;
    plan.pipeline = &p;
    plan.proof_vectors = proof_vecs;
    double acc = 0.0;
    for (double w : weights) {
        acc += w;
        plan.proof_weights.push_back(acc);
    }
    for (const auto& v : proof_vecs) plan.base_states.push_back(interleave_full_state(p, v));

    for (const auto& ch : p.channels) {
        plan.channel_ix.emplace_back(p.layout, p.layout.positions(ch.registers));
        std::vector<double> cdf;
        double c = 0.0;
        for (const auto& b : ch.branches) {
            c += b.probability;
            cdf.push_back(c);
        }
        plan.channel_cdf.push_back(std::move(cdf));
    }

    plan.nodes = p.node_ids();
    for (size_t i = 0; i < plan.nodes.size(); ++i)
        plan.node_index[plan.nodes[i]] = static_cast<int>(i);

    for (const auto& t : p.tests) {
        plan.test_ix.emplace_back(p.layout, p.layout.positions(t.registers));
        plan.sqrt_accept.push_back(sqrt_psd(t.povm));
        Mat reject = Mat::Identity(t.povm.rows(), t.povm.cols()) - t.povm;
        plan.sqrt_reject.push_back(sqrt_psd(reject));
        plan.test_node.push_back(plan.node_index.at(t.node));
    }
    for (const auto& g : p.guards)
        if (!g.passed) plan.guard_failed_nodes.push_back(plan.node_index.at(g.node));
    return plan;
}

struct ShotCounts {
    std::int64_t all_accept = 0;
    std::int64_t any_reject = 0;
    std::vector<std::int64_t> node_rejects;
};

void run_shot_range(const SamplerPlan& plan, std::uint64_t seed, std::int64_t begin,
                    std::int64_t end, ShotCounts& counts) {
    const auto& p = *plan.pipeline;
    counts.node_rejects.assign(plan.nodes.size(), 0);
    std::vector<char> node_reject(plan.nodes.size());
    for (std::int64_t shot = begin; shot < end; ++shot) {
        Rng rng = Rng::keyed(seed, static_cast<std::uint64_t>(shot));
        std::fill(node_reject.begin(), node_reject.end(), 0);
        for (int idx : plan.guard_failed_nodes) node_reject[idx] = 1;

        size_t which = 0;
        if (plan.proof_vectors.size() > 1) {
            double u = rng.uniform();
            while (which + 1 < plan.proof_vectors.size() && u > plan.proof_weights[which])
                ++which;
        }
        Vec psi = plan.base_states[which];

        for (size_t c = 0; c < p.channels.size(); ++c) {
            double u = rng.uniform();
            size_t b = 0;
            while (b + 1 < plan.channel_cdf[c].size() && u > plan.channel_cdf[c][b]) ++b;
            apply_subset_unitary(psi, p.channels[c].branches[b].unitary, plan.channel_ix[c]);
        }

        for (size_t t = 0; t < p.tests.size(); ++t) {
            double prob = std::clamp(
                subset_expectation(psi, p.tests[t].povm, plan.test_ix[t]), 0.0, 1.0);
            bool accept = rng.uniform() < prob;
            const Mat& k = accept ? plan.sqrt_accept[t] : plan.sqrt_reject[t];
            apply_subset_operator(psi, k, plan.test_ix[t]);
            double norm = psi.norm();
            if (norm > 1e-300) psi /= norm;
            if (!accept) node_reject[plan.test_node[t]] = 1;
        }

        bool any = false;
        for (size_t i = 0; i < node_reject.size(); ++i) {
            if (node_reject[i]) {
                ++counts.node_rejects[i];
                any = true;
            }
        }
        if (any)
            ++counts.any_reject;
        else
            ++counts.all_accept;
    }
}

SampleStats run_sampler(const SamplerPlan& plan, std::int64_t shots, std::uint64_t seed,
                        int threads) {
    if (shots < 1) throw layout_error("simulate_sampled: shots must be >= 1");
    threads = std::max(1, threads);
    std::vector<ShotCounts> partial(threads);
    if (threads == 1) {
        run_shot_range(plan, seed, 0, shots, partial[0]);
    } else {
        std::vector<std::thread> pool;
        std::int64_t chunk = (shots + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            std::int64_t begin = t * chunk;
            std::int64_t end = std::min(shots, begin + chunk);
            if (begin >= end) {
                partial[t].node_rejects.assign(plan.nodes.size(), 0);
                continue;
            }
            pool.emplace_back([&plan, seed, begin, end, &partial, t] {
                run_shot_range(plan, seed, begin, end, partial[t]);
            });
        }
        for (auto& th : pool) th.join();
    }

    SampleStats stats;
    stats.shots = shots;
    stats.seed = seed;
    for (const auto& node : plan.nodes) stats.node_rejects[node] = 0;
    for (const auto& c : partial) {
        stats.all_accept += c.all_accept;
        stats.any_reject += c.any_reject;
        for (size_t i = 0; i < plan.nodes.size(); ++i)
            stats.node_rejects[plan.nodes[i]] += c.node_rejects.empty() ? 0 : c.node_rejects[i];
    }
    return stats;
}

}  // namespace

SampleStats simulate_sampled(const ProtocolPipeline& pipeline, const StateVector& proof,
                             std::int64_t shots, std::uint64_t seed, int threads) {
    auto plan = make_plan(pipeline, {proof.amplitudes}, {1.0});
    return run_sampler(plan, shots, seed, threads);
}

SampleStats simulate_sampled(const ProtocolPipeline& pipeline, const DensityOperator& proof,
                             std::int64_t shots, std::uint64_t seed, int threads) {
    Eigen::SelfAdjointEigenSolver<Mat> es(proof.matrix);
    std::vector<Vec> vecs;
    std::vector<double> weights;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        double w = es.eigenvalues()(i);
        if (w < 1e-14) continue;
        vecs.push_back(es.eigenvectors().col(i));
        weights.push_back(w);
    }
    auto plan = make_plan(pipeline, vecs, weights);
    return run_sampler(plan, shots, seed, threads);
}

// ---- per-node rejection ----

std::map<std::string, double> per_node_rejection(const AcceptanceModel& model,
                                                 const DensityOperator& proof) {
    std::map<std::string, double> out;
    for (const auto& [node, op] : model.per_node)
        out[node] = std::clamp(1.0 - expectation(op, proof), 0.0, 1.0);
    return out;
}

std::map<std::string, double> per_node_rejection(const AcceptanceModel& model,
                                                 const StateVector& proof) {
    std::map<std::string, double> out;
    for (const auto& [node, op] : model.per_node)
        out[node] = std::clamp(1.0 - expectation(op, proof), 0.0, 1.0);
    return out;
}

}  // namespace dqma
