// Acceptance suite: end-to-end checks of the protocol guarantees at desk
// scale, one pass/fail line per criterion. Exits nonzero on any failure.

#include "dqma/adversary.hpp"
#include "dqma/protocols.hpp"
#include "dqma/random.hpp"
#include "dqma/reductions.hpp"
#include "dqma/symmetry.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <vector>

using namespace dqma;

namespace {

struct failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw failure(what);
}

RegisterLayout plain_layout(const std::vector<std::int64_t>& dims) {
    std::vector<RegisterSpec> regs;
    for (size_t i = 0; i < dims.size(); ++i)
        regs.push_back({"q" + std::to_string(i), dims[i], "prover", RegisterRole::proof});
    return RegisterLayout(regs, kStateDimCap);
}

ProtocolPipeline eq_path_instance(int r, int n, const std::string& x, const std::string& y,
                                  int reps = 1) {
    EqPathParams params;
    params.r = r;
    params.scheme = FingerprintScheme::hadamard(n);
    params.x = x;
    params.y = y;
    params.repetitions = reps;
    return build_eq_path(params);
}

HermitianOperator relabeled(const HermitianOperator& op, const std::string& suffix) {
    std::vector<RegisterSpec> regs;
    for (const auto& r : op.layout.registers())
        regs.push_back({r.id + suffix, r.dim, r.owner, r.role});
    return HermitianOperator(RegisterLayout(regs, kStateDimCap), op.matrix);
}

// 1. SWAP and permutation test exactness against independent oracles.
void criterion_swap_perm_exactness() {
    Rng rng(101);
    for (int t = 0; t < 100; ++t) {
        std::int64_t d = 2 + rng.below(3);  // d <= 4
        Vec a = haar_vector(d, rng), b = haar_vector(d, rng);
        StateVector psi(plain_layout({d, d}), kron_vec(a, b));
        double expected = 0.5 * (1.0 + std::norm(a.dot(b)));
        require(std::abs(swap_test_accept(psi) - expected) <= 1e-10,
                "swap product formula beyond 1e-10");
    }
    for (int k = 2; k <= 4; ++k) {
        for (std::int64_t d : {2, 3}) {
            std::vector<std::int64_t> dims(k, d);
            auto layout = plain_layout(dims);
            for (int t = 0; t < 25; ++t) {
                auto rho = random_density(layout, rng);
                double via = permutation_test_accept(rho);
                double oracle = 0.0;
                auto perms = enumerate_permutations(k);
                for (const auto& pi : perms)
                    oracle += (permutation_unitary(pi, d) * rho.matrix).trace().real();
                oracle /= static_cast<double>(perms.size());
                require(std::abs(via - oracle) <= 1e-10,
                        "group-average oracle beyond 1e-10");
            }
        }
    }
}

// 2. Closeness of marginals forced by near-perfect acceptance.
void criterion_closeness_bounds() {
    Rng rng(202);
    for (int k : {2, 3, 4}) {
        for (std::int64_t d : {2, 3}) {
            std::vector<std::int64_t> dims(k, d);
            auto layout = plain_layout(dims);
            for (int t = 0; t < 200; ++t) {
                auto rho = random_density(layout, rng);
                double eps = 1.0 - permutation_test_accept(rho);
                double bound = 2.0 * std::sqrt(std::max(eps, 0.0)) + eps + 1e-9;
                for (int i = 0; i < k; ++i)
                    for (int j = i + 1; j < k; ++j) {
                        auto mi = partial_trace(rho, {"q" + std::to_string(i)});
                        auto mj = partial_trace(rho, {"q" + std::to_string(j)});
                        require(trace_distance(mi, mj) <= bound,
                                "closeness bound violated");
                    }
            }
        }
    }
}

// 3. EQ path: perfect completeness and the soundness line.
void criterion_eq_path() {
    for (int n : {1, 2, 3}) {
        for (int r : {2, 3}) {
            for (std::uint64_t v = 0; v < (1ULL << n); ++v) {
                auto p = eq_path_instance(r, n, to_bits(v, n), to_bits(v, n));
                double accept = exact_accept_probability(p, honest_proof(p));
                require(std::abs(accept - 1.0) <= 1e-9, "completeness below 1");
            }
        }
    }
    for (int r : {2, 3}) {
        for (std::uint64_t a = 0; a < 4; ++a) {
            for (std::uint64_t b = 0; b < 4; ++b) {
                if (a == b) continue;
                auto p = eq_path_instance(r, 2, to_bits(a, 2), to_bits(b, 2));
                double value = top_eigenpair(compile(p).accept_operator).value;
                require(value <= eq_path_bound(r) + 1e-9, "soundness bound violated");
            }
        }
    }
}

// 4. Parallel repetition multiplies the optimal value.
void criterion_parallel_repetition() {
    auto a1 = compile(eq_path_instance(2, 2, "00", "01")).accept_operator;
    double v1 = top_eigenpair(a1).value;
    auto a2 = tensor(a1, relabeled(a1, "'"));
    auto a3 = tensor(a2, relabeled(a1, "''"));
    require(std::abs(top_eigenpair(a2).value - v1 * v1) <= 1e-8,
            "k=2 multiplicativity beyond 1e-8");
    require(std::abs(top_eigenpair(a3).value - v1 * v1 * v1) <= 1e-8,
            "k=3 multiplicativity beyond 1e-8");
}

// 5. Tree EQ on a star: completeness and deviant-path margin.
void criterion_eq_tree() {
    auto star = [](const std::string& x1, const std::string& x2, const std::string& x3) {
        return Topology::tree({{"u1", "w2"}, {"w2", "u2"}, {"u1", "w3"}, {"w3", "u3"}},
                              "u1", {{"u1", x1}, {"u2", x2}, {"u3", x3}});
    };
    TreeProtocolParams params;
    params.scheme = FingerprintScheme::hadamard(2);
    params.topology = star("10", "10", "10");
    auto good = build_eq_tree(params);
    require(std::abs(exact_accept_probability(good, honest_proof(good)) - 1.0) <= 1e-9,
            "tree completeness below 1");

    params.topology = star("10", "10", "01");
    auto bad = build_eq_tree(params);
    double value = top_eigenpair(compile(bad).accept_operator).value;
    const int deviant_r = 2;
    require(1.0 - value >= 4.0 / (81.0 * deviant_r * deviant_r) - 1e-9,
            "deviant-path margin too small");
}

// 6. GT and variants exhaustively at n=3, r=2, plus ranking verification.
void criterion_gt_and_rv() {
    SchemeFamily family;
    for (auto variant : {GtVariant::greater, GtVariant::less, GtVariant::greater_equal,
                         GtVariant::less_equal}) {
        for (std::uint64_t x = 0; x < 8; ++x) {
            for (std::uint64_t y = 0; y < 8; ++y) {
                GtParams p;
                p.r = 2;
                p.n = 3;
                p.x = x;
                p.y = y;
                p.scheme = family;
                p.variant = variant;
                if (gt_truth(variant, x, y)) {
                    auto pipe = build_gt(p);
                    double accept = exact_accept_probability(pipe, honest_proof(pipe));
                    require(std::abs(accept - 1.0) <= 1e-9, "gt completeness below 1");
                } else {
                    require(gt_adversary_value(p).value <= eq_path_bound(2) + 1e-9,
                            "gt per-index bound violated");
                }
            }
        }
    }

    RvParams rv;
    rv.topology = Topology::tree({{"u1", "w2"}, {"w2", "u2"}, {"u1", "w3"}, {"w3", "u3"}},
                                 "u1", {{"u1", ""}, {"u2", ""}, {"u3", ""}});
    rv.n = 3;
    for (auto inputs : std::vector<std::map<std::string, std::uint64_t>>{
             {{"u1", 5}, {"u2", 2}, {"u3", 7}},
             {{"u1", 7}, {"u2", 2}, {"u3", 5}},
             {{"u1", 2}, {"u2", 5}, {"u3", 7}}}) {
        rv.inputs = inputs;
        for (int j = 1; j <= 3; ++j) {
            rv.rank_j = j;
            auto ev = rv_evaluate(rv);
            if (ev.truth) {
                require(std::abs(ev.honest_value - 1.0) <= 1e-9, "rv completeness below 1");
            } else {
                require(ev.adversary_value < 1.0 - 1e-9, "rv no-instance reached 1");
                require(ev.adversary_value <= eq_path_bound(2) + 1e-9,
                        "rv violating-path bound violated");
            }
        }
    }
}

// 7. Relay-point EQ at r=4 with two-hop segments.
void criterion_eq_relay() {
    RelayEqParams params;
    params.r = 4;
    params.n = 2;
    params.segment_scheme = FingerprintScheme::hadamard(2);
    params.segment_length = 2;
    params.reps_per_segment = 2;
    params.x = params.y = "10";
    require(std::abs(build_eq_relay(params).honest_value() - 1.0) <= 1e-9,
            "relay completeness below 1");

    for (std::uint64_t a = 0; a < 4; ++a) {
        for (std::uint64_t b = 0; b < 4; ++b) {
            if (a == b) continue;
            params.x = to_bits(a, 2);
            params.y = to_bits(b, 2);
            auto relay = build_eq_relay(params);
            auto adv = relay.adversary();
            bool some_violating = false;
            for (size_t s = 0; s < adv.segment_values.size(); ++s) {
                if (adv.segment_values[s] < 1.0 - 1e-9) {
                    some_violating = true;
                    require(adv.segment_values[s] <=
                                relay.segment_bound(static_cast<int>(s)) + 1e-9,
                            "violating segment above its bound");
                }
            }
            require(some_violating, "no violating segment on a no-instance");
        }
    }
}

// 8. One-way conversions: forall_f truth table and the r=1 degenerate case.
void criterion_conversions() {
    auto ham1 = [](const std::string& a, const std::string& b) {
        return hamming_distance(a, b) <= 1;
    };
    auto protocol = exact_send_protocol(ham1, 2, "ham_le_1");
    std::vector<std::string> nodes{"u1", "u2", "u3", "c"};
    std::vector<std::pair<std::string, std::string>> edges{
        {"c", "u1"}, {"c", "u2"}, {"c", "u3"}};

    for (std::uint64_t a = 0; a < 4; ++a)
        for (std::uint64_t b = 0; b < 4; ++b)
            for (std::uint64_t c = 0; c < 4; ++c) {
                std::map<std::string, std::string> inputs{{"u1", to_bits(a, 2)},
                                                          {"u2", to_bits(b, 2)},
                                                          {"u3", to_bits(c, 2)}};
                bool truth = ham1(inputs["u1"], inputs["u2"]) &&
                             ham1(inputs["u1"], inputs["u3"]) &&
                             ham1(inputs["u2"], inputs["u3"]);
                ForallParams params;
                params.protocol = protocol;
                params.inputs = inputs;
                for (const auto& [term, input] : inputs) {
                    (void)input;
                    params.trees.push_back(build_rooted_tree(nodes, edges, inputs, term));
                }
                auto pipelines = build_forall_f(params);
                if (truth) {
                    double honest = 1.0;
                    for (const auto& p : pipelines)
                        honest *= exact_accept_probability(p, honest_proof(p));
                    require(honest >= protocol.completeness - 1e-9,
                            "forall_f honest below completeness");
                } else {
                    require(forall_adversary_value(pipelines) < 1.0 - 1e-9,
                            "forall_f no-instance reached 1");
                }
            }

    auto toy = proof_assisted_eq_qma(FingerprintScheme::hadamard(1));
    for (const char* x : {"0", "1"})
        for (const char* y : {"0", "1"}) {
            OneWayQmaConversionParams d;
            d.protocol = toy;
            d.r = 1;
            d.x = x;
            d.y = y;
            double via_pipeline =
                top_eigenpair(compile(build_from_oneway_qma(d)).accept_operator).value;
            require(std::abs(via_pipeline - one_way_qma_value(toy, x, y)) <= 1e-10,
                    "r=1 conversion deviates from the two-party value");
        }
}

// 9. The three lower-bound attacks.
void criterion_attacks() {
    auto protocol = make_truncated_eq_dma(3, 4, 2);
    std::vector<std::pair<std::string, std::string>> fooling;
    for (std::uint64_t s = 0; s < 8; ++s) fooling.emplace_back(to_bits(s, 3), to_bits(s, 3));
    auto eq = [](const std::string& a, const std::string& b) { return a == b; };
    auto fooling_result = classical_fooling_attack(protocol, eq, fooling);
    require(fooling_result.pair_found, "fooling collision not found");
    require(fooling_result.accept_prob >= fooling_result.reference_line - 1e-12,
            "fooling attack below 1 - 2p");
    require(std::abs(fooling_result.accept_prob - 1.0) <= 1e-12,
            "fooling attack below 1 at p = 0");

    auto scheme = FingerprintScheme::hadamard(2);
    SeparableProofFamily gapped;
    for (std::uint64_t s = 0; s < 4; ++s)
        gapped.fooling_inputs.emplace_back(to_bits(s, 2), to_bits(s, 2));
    gapped.build = [scheme](const std::string& x, const std::string& y) {
        return build_gapped_eq_path(5, scheme, x, y, 2);
    };
    gapped.f = eq;
    gapped.completeness = 1.0;
    auto no_proof = entangled_no_proof_attack(gapped, 2, {"00", "00"}, {"11", "11"});
    require(no_proof.status == "success", "no-proof attack not applicable");
    require(no_proof.accept_prob >= no_proof.reference_line - 1e-9,
            "no-proof attack below 1 - 2p");

    SeparableProofFamily tiny;
    for (std::uint64_t s = 0; s < 8; ++s)
        tiny.fooling_inputs.emplace_back(to_bits(s, 3), to_bits(s, 3));
    auto state = [](const std::string& b) {
        double theta = static_cast<double>(from_bits(b)) * M_PI / 64.0;
        Vec v(2);
        v << std::cos(theta), std::sin(theta);
        return v;
    };
    tiny.build = [&state](const std::string& x, const std::string& y) {
        return build_eq_path_with_map(4, 2, state, x, y);
    };
    tiny.f = eq;
    tiny.completeness = 1.0;
    const double delta = 0.5;
    auto cut_paste = separable_cut_paste_attack(tiny, 2, delta);
    require(cut_paste.pair_found, "cut-and-paste pair not found");
    require(cut_paste.overlap > 1.0 - delta * delta / 8.0, "overlap below threshold");
    require(cut_paste.accept_prob >= cut_paste.reference_line - 1e-9,
            "cut-and-paste below 1 - 2p - delta");
}

// 10. Two-party extraction: acceptance invariance and cost accounting.
void criterion_cut_reduction() {
    auto pipeline = eq_path_instance(3, 2, "01", "11");
    auto model = compile(pipeline);
    double src = top_eigenpair(model.accept_operator).value;
    for (int i = 0; i <= 2; ++i) {
        auto two = cut_to_two_party(model, pipeline, i);
        require(std::abs(top_eigenpair(two.accept_operator).value - src) <= 1e-10,
                "cut changed the acceptance value");
        require(two.gamma1_qubits + two.gamma2_qubits == 8, "proof qubit accounting wrong");
        require(two.mu_qubits == 2, "message qubit accounting wrong");
        require(two.total_cost == 10, "total cost accounting wrong");
    }
}

// 11. Exact model versus the sampling executor on a 20-entry catalog.
void criterion_exact_vs_sampled() {
    Rng rng(1111);
    struct Entry {
        ProtocolPipeline pipeline;
        StateVector proof;
    };
    std::vector<Entry> catalog;

    auto add = [&](ProtocolPipeline p, const char* proof_kind) {
        auto model = compile(p);
        StateVector proof = std::string(proof_kind) == "honest"
                                ? honest_proof(p)
                                : (std::string(proof_kind) == "optimal"
                                       ? optimal_entangled_value(model).state
                                       : haar_state(model.accept_operator.layout, rng));
        catalog.push_back({std::move(p), std::move(proof)});
    };

    for (int r : {2, 3}) {
        add(eq_path_instance(r, 1, "0", "0"), "honest");
        add(eq_path_instance(r, 1, "0", "1"), "optimal");
        add(eq_path_instance(r, 1, "1", "0"), "random");
    }
    add(eq_path_instance(2, 2, "01", "01"), "honest");
    add(eq_path_instance(2, 2, "01", "10"), "optimal");
    add(eq_path_instance(2, 2, "00", "11"), "random");
    add(eq_path_instance(3, 2, "10", "01"), "optimal");
    add(eq_path_instance(2, 1, "0", "0", 2), "honest");
    add(eq_path_instance(2, 1, "0", "1", 2), "random");

    GtParams gt;
    gt.r = 2;
    gt.n = 2;
    gt.x = 2;
    gt.y = 1;
    gt.index = 0;
    add(build_gt(gt), "honest");
    gt.x = 1;
    gt.y = 2;
    gt.index = 1;
    add(build_gt(gt), "optimal");

    TreeProtocolParams tree;
    tree.scheme = FingerprintScheme::hadamard(1);
    tree.topology = Topology::tree({{"u1", "w"}, {"w", "u2"}}, "u1",
                                   {{"u1", "0"}, {"u2", "0"}});
    add(build_eq_tree(tree), "honest");
    tree.topology = Topology::tree({{"u1", "w"}, {"w", "u2"}}, "u1",
                                   {{"u1", "0"}, {"u2", "1"}});
    add(build_eq_tree(tree), "optimal");

    OneWayQmaConversionParams conv;
    conv.protocol = wrap_oneway_as_qma(eq_one_way(FingerprintScheme::hadamard(1)));
    conv.r = 2;
    conv.x = "0";
    conv.y = "0";
    add(build_from_oneway_qma(conv), "honest");
    conv.y = "1";
    add(build_from_oneway_qma(conv), "optimal");

    ForallParams forall;
    forall.protocol = eq_one_way(FingerprintScheme::hadamard(1));
    forall.inputs = {{"u1", "0"}, {"u2", "0"}};
    forall.trees.push_back(Topology::tree({{"u1", "w"}, {"w", "u2"}}, "u1", forall.inputs));
    add(build_forall_f(forall)[0], "honest");
    forall.inputs = {{"u1", "0"}, {"u2", "1"}};
    forall.trees.clear();
    forall.trees.push_back(Topology::tree({{"u1", "w"}, {"w", "u2"}}, "u1", forall.inputs));
    add(build_forall_f(forall)[0], "random");

    require(catalog.size() == 20, "catalog must have 20 entries");
    const std::int64_t shots = 100000;
    for (size_t i = 0; i < catalog.size(); ++i) {
        auto model = compile(catalog[i].pipeline);
        double exact = expectation(model.accept_operator, catalog[i].proof);
        auto stats = simulate_sampled(catalog[i].pipeline, catalog[i].proof, shots,
                                      9000 + i, 2);
        double sigma = std::max(stats.all_accept_stderr(), 1.0 / std::sqrt(shots));
        require(std::abs(stats.all_accept_frequency() - exact) <= 3.0 * sigma,
                "catalog entry " + std::to_string(i) + " outside 3 sigma");
    }
}

}  // namespace

int main() {
    struct Criterion {
        int id;
        const char* title;
        std::function<void()> run;
    };
    std::vector<Criterion> criteria = {
        {1, "SWAP/permutation test exactness", criterion_swap_perm_exactness},
        {2, "acceptance-closeness bounds (k,d up to 4,3)", criterion_closeness_bounds},
        {3, "EQ path completeness and soundness", criterion_eq_path},
        {4, "parallel repetition multiplicativity", criterion_parallel_repetition},
        {5, "tree EQ completeness and deviant margin", criterion_eq_tree},
        {6, "GT variants and ranking verification", criterion_gt_and_rv},
        {7, "relay-point EQ segments", criterion_eq_relay},
        {8, "one-way conversions", criterion_conversions},
        {9, "lower-bound attacks", criterion_attacks},
        {10, "two-party cut reduction", criterion_cut_reduction},
        {11, "exact vs sampled cross-validation", criterion_exact_vs_sampled},
    };

    int failures = 0;
    for (const auto& c : criteria) {
        auto start = std::chrono::steady_clock::now();
        std::string verdict = "PASS", detail;
        try {
            c.run();
        } catch (const std::exception& e) {
            verdict = "FAIL";
            detail = e.what();
            ++failures;
        }
        double secs =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        std::printf("[%s] criterion %2d: %s (%.1f s)%s%s\n", verdict.c_str(), c.id, c.title,
                    secs, detail.empty() ? "" : " - ", detail.c_str());
        std::fflush(stdout);
    }
    if (failures) {
        std::printf("%d criterion(s) failed\n", failures);
        return 1;
    }
    std::printf("all %zu criteria passed\n", criteria.size());
    return 0;
}
