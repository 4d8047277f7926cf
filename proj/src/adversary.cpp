#include "dqma/adversary.hpp"

#include "dqma/fingerprint.hpp"
#include "dqma/random.hpp"
#include "dqma/symmetry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <map>
#include <set>

namespace dqma {

StateVector honest_proof(const ProtocolPipeline& pipeline, std::int64_t dim_cap) {
    if (pipeline.honest_product.empty() && !pipeline.proof_register_ids().empty())
        throw layout_error("honest_proof: protocol defines no honest proof for these inputs");
    return assemble_product_proof(pipeline, pipeline.honest_product, dim_cap);
}

EntangledOptimum optimal_entangled_value(const AcceptanceModel& model) {
    auto [value, state] = top_eigenpair(model.accept_operator);
    return {std::clamp(value, 0.0, 1.0 + kStructuralTol), std::move(state)};
}

std::vector<std::vector<std::string>> group_by_node(const ProtocolPipeline& pipeline) {
    std::map<std::string, std::vector<std::string>> by_owner;
    for (const auto& r : pipeline.layout.registers())
        if (r.role == RegisterRole::proof) by_owner[r.owner].push_back(r.id);
    std::vector<std::vector<std::string>> out;
    for (auto& [owner, regs] : by_owner) {
        (void)owner;
        out.push_back(std::move(regs));
    }
    return out;
}

namespace {

struct GroupedSpace {
    RegisterLayout proof_layout;
    std::vector<std::vector<int>> group_positions;  // positions in proof_layout
    std::vector<std::int64_t> group_dims;

    GroupedSpace(const AcceptanceModel& model,
                 const std::vector<std::vector<std::string>>& grouping)
        : proof_layout(model.accept_operator.layout) {
        std::set<std::string> covered;
        for (const auto& group : grouping) {
            std::vector<int> pos;
            std::int64_t dim = 1;
            for (const auto& id : group) {
                pos.push_back(proof_layout.position(id));
                dim *= proof_layout.dim(pos.back());
                if (!covered.insert(id).second)
                    throw layout_error("grouping repeats register: " + id);
            }
            group_positions.push_back(std::move(pos));
            group_dims.push_back(dim);
        }
        if (static_cast<int>(covered.size()) != proof_layout.size())
            throw layout_error("grouping does not cover the proof layout");
    }

    // Product state of all groups, interleaved into layout order.
    Vec product_state(const std::vector<Vec>& states) const {
        const std::int64_t dim = proof_layout.total_dimension();
        Vec out(dim);
        std::vector<std::vector<std::int64_t>> strides(group_positions.size());
        for (size_t g = 0; g < group_positions.size(); ++g) {
            strides[g].assign(group_positions[g].size(), 1);
            for (int k = static_cast<int>(group_positions[g].size()) - 2; k >= 0; --k)
                strides[g][k] =
                    strides[g][k + 1] * proof_layout.dim(group_positions[g][k + 1]);
        }
        std::vector<std::int64_t> digits;
        for (std::int64_t idx = 0; idx < dim; ++idx) {
            proof_layout.decompose(idx, digits);
            cplx amp = 1.0;
            for (size_t g = 0; g < group_positions.size(); ++g) {
                std::int64_t sub = 0;
                for (size_t k = 0; k < group_positions[g].size(); ++k)
                    sub += digits[group_positions[g][k]] * strides[g][k];
                amp *= states[g](sub);
                if (amp == cplx(0.0, 0.0)) break;
            }
            out(idx) = amp;
        }
        return out;
    }

    // Effective operator on group g with the other groups fixed.
    Mat effective_operator(const Mat& a, const std::vector<Vec>& states, size_t g) const {
        const std::int64_t dg = group_dims[g];
        const std::int64_t dim = proof_layout.total_dimension();
        Mat basis_vectors(dim, dg);
        std::vector<Vec> probe = states;
        for (std::int64_t b = 0; b < dg; ++b) {
            probe[g] = Vec::Zero(dg);
            probe[g](b) = 1.0;
            basis_vectors.col(b) = product_state(probe);
        }
        Mat eff = basis_vectors.adjoint() * (a * basis_vectors);
        return 0.5 * (eff + Mat(eff.adjoint()));
    }
};

}  // namespace

SeparableOptimum optimal_separable_value(const AcceptanceModel& model,
                                         const std::vector<std::vector<std::string>>& grouping,
                                         const SeeSawOptions& opts) {
    GroupedSpace space(model, grouping);
    const Mat& a = model.accept_operator.matrix;
    const size_t groups = grouping.size();

    // Honest product start when the pipeline carries one.
    std::optional<std::vector<Vec>> honest_start;
    if (model.pipeline && !model.pipeline->honest_product.empty()) {
        std::map<std::string, const Vec*> by_id;
        for (const auto& [id, v] : model.pipeline->honest_product) by_id[id] = &v;
        std::vector<Vec> start;
        bool complete = true;
        for (size_t g = 0; g < groups && complete; ++g) {
            Vec acc = Vec::Ones(1);
            for (const auto& id : grouping[g]) {
                auto it = by_id.find(id);
                if (it == by_id.end()) {
                    complete = false;
                    break;
                }
                acc = kron_vec(acc, *it->second);
            }
            if (complete) start.push_back(std::move(acc));
        }
        if (complete) honest_start = std::move(start);
    }

    SeparableOptimum best;
    best.value = -1.0;
    for (int restart = 0; restart < std::max(1, opts.restarts); ++restart) {
        std::vector<Vec> states;
        if (restart == 0 && honest_start) {
            states = *honest_start;
        } else {
            Rng rng = Rng::keyed(opts.seed, static_cast<std::uint64_t>(restart));
            for (size_t g = 0; g < groups; ++g)
                states.push_back(haar_vector(space.group_dims[g], rng));
        }

        Vec psi = space.product_state(states);
        double value = psi.dot(a * psi).real();
        int iters = 0;
        bool converged = false;
        while (iters < opts.max_iters) {
            ++iters;
            for (size_t g = 0; g < groups; ++g) {
                Mat eff = space.effective_operator(a, states, g);
                Eigen::SelfAdjointEigenSolver<Mat> es(eff);
                states[g] = es.eigenvectors().col(eff.rows() - 1);
            }
            psi = space.product_state(states);
            double next = psi.dot(a * psi).real();
            if (next - value < opts.tol) {
                value = std::max(value, next);
                converged = true;
                break;
            }
            value = next;
        }
        if (value > best.value) {
            best.value = value;
            best.converged = converged;
            best.iterations = iters;
            best.parts.clear();
            for (size_t g = 0; g < groups; ++g) {
                RegisterLayout lay = space.proof_layout.subset(grouping[g], kStateDimCap);
                best.parts.emplace_back(std::move(lay), states[g]);
            }
        }
    }
    best.value = std::clamp(best.value, 0.0, 1.0 + kStructuralTol);
    return best;
}

// ---- classical dMA ----

double ClassicalDmaProtocol::run(const std::string& x, const std::string& y,
                                 const std::vector<std::string>& proofs) const {
    if (static_cast<int>(proofs.size()) != r + 1)
        throw layout_error("dMA run: proof assignment size mismatch");
    double p = 1.0;
    for (int j = 0; j <= r; ++j) {
        double a = accept_prob(j, x, y, proofs);
        if (a < 0.0 || a > 1.0)
            throw numeric_error("dMA node decision is not a probability");
        p *= a;
    }
    return p;
}

ClassicalDmaProtocol make_truncated_eq_dma(int n, int r, int keep_bits) {
    if (keep_bits > n) throw layout_error("truncated dMA: keep_bits > n");
    ClassicalDmaProtocol p;
    p.r = r;
    p.n = n;
    p.proof_bits.assign(r + 1, keep_bits);
    p.completeness = 1.0;
    auto trunc = [keep_bits](const std::string& s) { return s.substr(0, keep_bits); };
    p.accept_prob = [r, trunc](int node, const std::string& x, const std::string& y,
                               const std::vector<std::string>& w) -> double {
        if (node == 0) return (w[0] == trunc(x) && w[0] == w[1]) ? 1.0 : 0.0;
        if (node == r) return (w[r] == trunc(y) && w[r - 1] == w[r]) ? 1.0 : 0.0;
        bool ok = (w[node - 1] == w[node]) && (w[node] == w[node + 1]);
        return ok ? 1.0 : 0.0;
    };
    p.honest_assignment = [r, trunc](const std::string& x, const std::string&) {
        return std::vector<std::string>(r + 1, trunc(x));
    };
    return p;
}

FoolingAttackResult classical_fooling_attack(
    const ClassicalDmaProtocol& protocol,
    const std::function<bool(const std::string&, const std::string&)>& f,
    const std::vector<std::pair<std::string, std::string>>& fooling_set) {
    FoolingAttackResult result;
    result.reference_line = 1.0 - 2.0 * (1.0 - protocol.completeness);

    const int r = protocol.r;
    const std::int64_t k = static_cast<std::int64_t>(fooling_set.size());
    const int threshold =
        k >= 2 ? static_cast<int>(std::floor(0.5 * std::log2(static_cast<double>(k - 1))))
               : 0;
    for (int i = 1; i + 1 <= r - 1; ++i)
        if (protocol.proof_bits[i] + protocol.proof_bits[i + 1] <= threshold)
            result.counting_guarantee = true;

    std::vector<std::vector<std::string>> assignments;
    for (const auto& [x, y] : fooling_set) assignments.push_back(protocol.honest_assignment(x, y));

    for (int i = 1; i + 1 <= r - 1 && !result.pair_found; ++i) {
        for (size_t s = 0; s < fooling_set.size() && !result.pair_found; ++s) {
            for (size_t t = 0; t < fooling_set.size() && !result.pair_found; ++t) {
                if (s == t) continue;
                const auto& ws = assignments[s];
                const auto& wt = assignments[t];
                if (ws[i] != wt[i] || ws[i + 1] != wt[i + 1]) continue;
                const std::string& xs = fooling_set[s].first;
                const std::string& yt = fooling_set[t].second;
                if (f(xs, yt)) continue;  // the other crossing is covered at (t, s)

                std::vector<std::string> stitched(r + 1);
                for (int j = 0; j <= r; ++j) stitched[j] = (j <= i) ? ws[j] : wt[j];
                double accept = protocol.run(xs, yt, stitched);

                result.pair_found = true;
                result.cut_index = i;
                result.accept_prob = accept;
                nlohmann::json w;
                w["pair_a"] = {fooling_set[s].first, fooling_set[s].second};
                w["pair_b"] = {fooling_set[t].first, fooling_set[t].second};
                w["no_instance"] = {xs, yt};
                w["stitched_assignment"] = stitched;
                result.witness = w.dump();
            }
        }
    }
    if (result.pair_found)
        result.status = "success";
    else
        result.status = result.counting_guarantee ? "no-collision" : "not-applicable";
    return result;
}

// ---- quantum attacks ----

namespace {

int node_index_of(const std::string& owner) {
    if (owner.size() < 2 || owner[0] != 'v')
        throw layout_error("attack requires path node ids of the form v<j>: " + owner);
    return std::stoi(owner.substr(1));
}

// Per-register honest proof parts grouped by owner node index.
std::map<std::string, Vec> honest_parts(const ProtocolPipeline& p) {
    std::map<std::string, Vec> out;
    for (const auto& [id, v] : p.honest_product) out[id] = v;
    return out;
}

}  // namespace

CutPasteAttackResult separable_cut_paste_attack(const SeparableProofFamily& family,
                                                int cut_index, double delta,
                                                std::int64_t dim_cap) {
    CutPasteAttackResult result;
    result.cut_index = cut_index;
    const double p = 1.0 - family.completeness;
    result.reference_line = 1.0 - 2.0 * p - delta;
    const double overlap_threshold = 1.0 - delta * delta / 8.0;

    std::vector<ProtocolPipeline> pipelines;
    for (const auto& [x, y] : family.fooling_inputs) pipelines.push_back(family.build(x, y));

    for (size_t s = 0; s < pipelines.size() && !result.pair_found; ++s) {
        for (size_t t = 0; t < pipelines.size() && !result.pair_found; ++t) {
            if (s == t) continue;
            const std::string& xs = family.fooling_inputs[s].first;
            const std::string& yt = family.fooling_inputs[t].second;
            if (family.f(xs, yt)) continue;

            auto parts_s = honest_parts(pipelines[s]);
            auto parts_t = honest_parts(pipelines[t]);
            if (parts_s.empty() || parts_t.empty()) continue;

            double overlap = 1.0;
            bool has_cut_register = false;
            for (const auto& r : pipelines[s].layout.registers()) {
                if (r.role != RegisterRole::proof) continue;
                int node = node_index_of(r.owner);
                if (node != cut_index && node != cut_index + 1) continue;
                has_cut_register = true;
                overlap *= std::abs(parts_s.at(r.id).dot(parts_t.at(r.id)));
            }
            if (!has_cut_register) overlap = 1.0;  // empty cut: trivially identical
            if (overlap <= overlap_threshold) continue;

            ProtocolPipeline crossed = family.build(xs, yt);
            std::vector<std::pair<std::string, Vec>> stitched;
            for (const auto& r : crossed.layout.registers()) {
                if (r.role != RegisterRole::proof) continue;
                int node = node_index_of(r.owner);
                stitched.emplace_back(r.id,
                                      node <= cut_index ? parts_s.at(r.id) : parts_t.at(r.id));
            }
            StateVector proof = assemble_product_proof(crossed, stitched, dim_cap);
            result.pair_found = true;
            result.overlap = overlap;
            result.accept_prob = exact_accept_probability(crossed, proof);
            nlohmann::json w;
            w["pair_a"] = {family.fooling_inputs[s].first, family.fooling_inputs[s].second};
            w["pair_b"] = {family.fooling_inputs[t].first, family.fooling_inputs[t].second};
            w["no_instance"] = {xs, yt};
            w["overlap"] = overlap;
            result.witness = w.dump();
        }
    }
    result.status = result.pair_found ? "success" : "no-pair";
    return result;
}

ProtocolPipeline build_gapped_eq_path(int r, const FingerprintScheme& scheme,
                                      const std::string& x, const std::string& y, int gap_at,
                                      std::int64_t dim_cap) {
    if (gap_at < 1 || gap_at + 1 > r - 1)
        throw layout_error("gapped eq_path: gap nodes must be intermediate");
    Vec hx = fingerprint_amplitudes(scheme, x);
    Vec hy = fingerprint_amplitudes(scheme, y);
    const std::int64_t dim = scheme.state_dimension;
    Mat swap_povm = symmetric_projector(2, dim, dim * dim).matrix;

    auto node = [](int j) { return "v" + std::to_string(j); };
    auto is_gap = [gap_at](int j) { return j == gap_at || j == gap_at + 1; };

    std::vector<RegisterSpec> regs;
    std::vector<PreparedState> prepared;
    ProtocolPipeline p;
    regs.push_back({"eL", dim, node(0), RegisterRole::prepared});
    prepared.push_back({"eL", hx, "fingerprint(" + x + ")"});
    p.transfers.push_back({"eL", node(0), node(1)});
    auto reg_a = [](int j) { return "n" + std::to_string(j) + "a"; };
    auto reg_b = [](int j) { return "n" + std::to_string(j) + "b"; };
    for (int j = 1; j <= r - 1; ++j) {
        if (is_gap(j)) continue;
        regs.push_back({reg_a(j), dim, node(j), RegisterRole::proof});
        regs.push_back({reg_b(j), dim, node(j), RegisterRole::proof});
        p.channels.push_back(symmetrize_channel({reg_a(j), reg_b(j)}, dim));
        p.transfers.push_back({reg_b(j), node(j), node(j + 1)});
        if (x == y) {
            p.honest_product.emplace_back(reg_a(j), hx);
            p.honest_product.emplace_back(reg_b(j), hx);
        }
        // arriving register: the left end's state for j=1, else the left
        // neighbor's forwarded half when that neighbor exists
        if (j == 1)
            p.tests.push_back({node(j), {"eL", reg_a(j)}, swap_povm, "swap@v1"});
        else if (!is_gap(j - 1))
            p.tests.push_back(
                {node(j), {reg_b(j - 1), reg_a(j)}, swap_povm, "swap@" + node(j)});
    }
    if (!is_gap(r - 1)) {
        Mat povm = hy * hy.adjoint();
        p.tests.push_back({node(r), {reg_b(r - 1)}, povm, "povm@" + node(r)});
    }
    p.layout = RegisterLayout(regs, kStateDimCap);
    p.prepared = std::move(prepared);
    p.name = "eq_path_gapped";
    p.params_json = "{\"r\":" + std::to_string(r) + ",\"gap_at\":" + std::to_string(gap_at) +
                    ",\"x\":\"" + x + "\",\"y\":\"" + y + "\"}";
    std::int64_t proof_dim = p.proof_dimension();
    if (proof_dim > dim_cap) throw dim_cap_error("gapped eq_path: proof dimension exceeds cap");
    return p;
}

NoProofAttackResult entangled_no_proof_attack(
    const SeparableProofFamily& family, int cut_index,
    const std::pair<std::string, std::string>& instance_a,
    const std::pair<std::string, std::string>& instance_b, std::int64_t dim_cap) {
    NoProofAttackResult result;
    result.cut_index = cut_index;
    const double p = 1.0 - family.completeness;
    result.reference_line = 1.0 - 2.0 * p;

    ProtocolPipeline pa = family.build(instance_a.first, instance_a.second);
    ProtocolPipeline pb = family.build(instance_b.first, instance_b.second);

    for (const auto& r : pa.layout.registers()) {
        if (r.role != RegisterRole::proof) continue;
        int node = node_index_of(r.owner);
        if (node == cut_index || node == cut_index + 1) {
            result.status = "not-applicable";
            return result;
        }
    }

    std::vector<std::string> left_ids, right_ids;
    for (const auto& id : pa.proof_register_ids()) {
        int node = node_index_of(pa.layout.spec(pa.layout.position(id)).owner);
        (node <= cut_index ? left_ids : right_ids).push_back(id);
    }
    if (left_ids.empty() || right_ids.empty()) {
        result.status = "not-applicable";
        return result;
    }

    DensityOperator full_a = DensityOperator::from_state(honest_proof(pa, dim_cap));
    DensityOperator full_b = DensityOperator::from_state(honest_proof(pb, dim_cap));
    DensityOperator rho = partial_trace(full_a, left_ids);
    DensityOperator sigma = partial_trace(full_b, right_ids);
    DensityOperator stitched = tensor(rho, sigma);

    ProtocolPipeline crossed = family.build(instance_a.first, instance_b.second);
    AcceptanceModel model = compile(crossed, dim_cap);
    // register order of the stitched proof matches the crossed pipeline's
    // proof layout: left registers precede right registers on a path
    DensityOperator proof(model.accept_operator.layout, stitched.matrix);
    result.accept_prob = expectation(model.accept_operator, proof);
    result.status = "success";
    nlohmann::json w;
    w["instance_a"] = {instance_a.first, instance_a.second};
    w["instance_b"] = {instance_b.first, instance_b.second};
    w["no_instance"] = {instance_a.first, instance_b.second};
    result.witness = w.dump();
    return result;
}

nlohmann::json attack_report(const FoolingAttackResult& r) {
    nlohmann::json j;
    j["attack"] = "classical_fooling";
    j["status"] = r.status;
    j["counting_guarantee"] = r.counting_guarantee;
    j["cut_index"] = r.cut_index;
    j["pair_found"] = r.pair_found;
    j["accept_prob"] = r.accept_prob;
    j["reference_line"] = r.reference_line;
    j["witness"] = r.witness.empty() ? nlohmann::json() : nlohmann::json::parse(r.witness);
    return j;
}

nlohmann::json attack_report(const CutPasteAttackResult& r) {
    nlohmann::json j;
    j["attack"] = "separable_cut_paste";
    j["status"] = r.status;
    j["cut_index"] = r.cut_index;
    j["pair_found"] = r.pair_found;
    j["overlap"] = r.overlap;
    j["accept_prob"] = r.accept_prob;
    j["reference_line"] = r.reference_line;
    j["witness"] = r.witness.empty() ? nlohmann::json() : nlohmann::json::parse(r.witness);
    return j;
}

nlohmann::json attack_report(const NoProofAttackResult& r) {
    nlohmann::json j;
    j["attack"] = "entangled_no_proof";
    j["status"] = r.status;
    j["cut_index"] = r.cut_index;
    j["pair_found"] = (r.status == "success");
    j["accept_prob"] = r.accept_prob;
    j["reference_line"] = r.reference_line;
    j["witness"] = r.witness.empty() ? nlohmann::json() : nlohmann::json::parse(r.witness);
    return j;
}

}  // namespace dqma
