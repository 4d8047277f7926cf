#include "dqma/selftest.hpp"

#include "dqma/adversary.hpp"
#include "dqma/protocols.hpp"
#include "dqma/random.hpp"
#include "dqma/reductions.hpp"
#include "dqma/symmetry.hpp"

#include <chrono>
#include <cmath>
#include <ostream>
#include <sstream>

namespace dqma {

namespace {

struct check_failure : std::runtime_error {
    using std::runtime_error::runtime_error;
};

void require(bool cond, const std::string& what) {
    if (!cond) throw check_failure(what);
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

// ---- qcore checks ----

void check_tensor_partial_trace(std::uint64_t seed) {
    Rng rng(seed);
    for (int t = 0; t < 100; ++t) {
        auto rho = random_density(plain_layout({3}), rng);
        auto sigma = random_density(plain_layout({2}), rng);
        std::vector<RegisterSpec> second{{"p0", 2, "prover", RegisterRole::proof}};
        auto joint = tensor(rho, DensityOperator(RegisterLayout(second), sigma.matrix));
        auto back = partial_trace(joint, {"q0"});
        require((back.matrix - rho.matrix).cwiseAbs().maxCoeff() < 1e-9,
                "partial_trace(tensor) mismatch");
    }
}

void check_contractivity(std::uint64_t seed) {
    Rng rng(seed + 1);
    auto layout = plain_layout({2, 3});
    for (int t = 0; t < 100; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        double full = trace_distance(a, b);
        double reduced =
            trace_distance(partial_trace(a, {"q1"}), partial_trace(b, {"q1"}));
        require(reduced <= full + 1e-9, "trace distance grew under partial trace");
    }
}

void check_fuchs_van_de_graaf(std::uint64_t seed) {
    Rng rng(seed + 2);
    auto layout = plain_layout({3});
    for (int t = 0; t < 100; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        double f = fidelity(a, b);
        double d = trace_distance(a, b);
        require(1.0 - f <= d + 1e-9, "lower Fuchs-van de Graaf violated");
        require(d <= std::sqrt(std::max(0.0, 1.0 - f * f)) + 1e-9,
                "upper Fuchs-van de Graaf violated");
    }
}

void check_povm_distinguishability(std::uint64_t seed) {
    Rng rng(seed + 3);
    auto layout = plain_layout({4});
    for (int t = 0; t < 100; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        Mat m = random_povm_element(4, rng);
        double gap = std::abs((m * (a.matrix - b.matrix)).trace().real());
        require(gap <= trace_distance(a, b) + 1e-9, "POVM distinguishes beyond D");
    }
}

void check_channel_preservation(std::uint64_t seed) {
    Rng rng(seed + 4);
    auto layout = plain_layout({2, 2});
    auto channel = symmetrize_channel({"q0", "q1"}, 2);
    for (int t = 0; t < 50; ++t) {
        auto rho = random_density(layout, rng);
        auto out = apply_channel(channel, rho);
        require(std::abs(out.matrix.trace().real() - 1.0) < 1e-9, "trace not preserved");
        Eigen::SelfAdjointEigenSolver<Mat> es(out.matrix, Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > -1e-9, "positivity not preserved");
    }
}

void check_top_eigen_probes(std::uint64_t seed) {
    Rng rng(seed + 5);
    auto layout = plain_layout({4, 4});
    HermitianOperator op(layout, random_hermitian(16, rng));
    auto top = top_eigenpair(op);
    for (int t = 0; t < 10000; ++t) {
        Vec v = haar_vector(16, rng);
        require(v.dot(op.matrix * v).real() <= top.value + 1e-6,
                "random probe beat the eigensolver");
    }
}

// ---- symmetry checks ----

void check_swap_product_formula(std::uint64_t seed) {
    Rng rng(seed + 6);
    for (int t = 0; t < 100; ++t) {
        std::int64_t d = 2 + rng.below(3);
        Vec a = haar_vector(d, rng), b = haar_vector(d, rng);
        StateVector psi(plain_layout({d, d}), kron_vec(a, b));
        double expected = 0.5 * (1.0 + std::norm(a.dot(b)));
        require(std::abs(swap_test_accept(psi) - expected) < 1e-10,
                "swap product formula violated");
    }
}

void check_perm_group_average(std::uint64_t seed) {
    Rng rng(seed + 7);
    for (int k : {2, 3, 4}) {
        for (std::int64_t d : {2, 3}) {
            std::vector<std::int64_t> dims(k, d);
            auto layout = plain_layout(dims);
            for (int t = 0; t < 10; ++t) {
                auto rho = random_density(layout, rng);
                double via = permutation_test_accept(rho);
                double oracle = 0.0;
                auto perms = enumerate_permutations(k);
                for (const auto& pi : perms)
                    oracle += (permutation_unitary(pi, d) * rho.matrix).trace().real();
                oracle /= static_cast<double>(perms.size());
                require(std::abs(via - oracle) < 1e-10, "group-average oracle mismatch");
            }
        }
    }
}

void check_closeness_bounds(std::uint64_t seed) {
    Rng rng(seed + 8);
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

void check_projector_eigenspace(std::uint64_t) {
    for (int k : {2, 3}) {
        const std::int64_t d = 2;
        std::int64_t dim = 1;
        for (int i = 0; i < k; ++i) dim *= d;
        Mat basis = Mat::Identity(dim, dim);
        for (const auto& pi : enumerate_permutations(k)) {
            Mat u = permutation_unitary(pi, d);
            Mat constrained = (u - Mat::Identity(dim, dim)) * basis;
            Eigen::JacobiSVD<Mat> svd(constrained, Eigen::ComputeFullV);
            Eigen::Index rank = 0;
            for (Eigen::Index i = 0; i < svd.singularValues().size(); ++i)
                if (svd.singularValues()(i) > 1e-10) ++rank;
            basis = basis * svd.matrixV().rightCols(basis.cols() - rank);
        }
        Mat oracle = basis * basis.adjoint();
        require((oracle - symmetric_projector(k, d).matrix).cwiseAbs().maxCoeff() < 1e-9,
                "projector disagrees with the joint +1 eigenspace");
    }
}

// ---- fingerprint checks ----

void check_overlap_bound(std::uint64_t) {
    for (int n : {2, 4, 6}) {
        auto scheme = FingerprintScheme::hadamard(n);
        for (std::uint64_t a = 0; a < (1ULL << n); ++a)
            for (std::uint64_t b = a + 1; b < (1ULL << n); ++b) {
                double overlap =
                    std::abs(fingerprint_amplitudes(scheme, to_bits(a, n))
                                 .dot(fingerprint_amplitudes(scheme, to_bits(b, n))));
                require(overlap <= scheme.overlap_bound + 1e-9, "overlap bound violated");
            }
    }
    auto code = FingerprintScheme::random_linear_code(4, 12, 3);
    for (std::uint64_t a = 0; a < 16; ++a)
        for (std::uint64_t b = a + 1; b < 16; ++b) {
            double overlap =
                std::abs(fingerprint_amplitudes(code, to_bits(a, 4))
                             .dot(fingerprint_amplitudes(code, to_bits(b, 4))));
            require(overlap <= code.overlap_bound + 1e-9, "code overlap bound violated");
        }
}

void check_eq_one_way(std::uint64_t) {
    for (int n : {1, 2, 3, 4}) {
        auto p = eq_one_way(FingerprintScheme::hadamard(n));
        for (std::uint64_t a = 0; a < (1ULL << n); ++a)
            for (std::uint64_t b = 0; b < (1ULL << n); ++b) {
                Vec msg = p.message(to_bits(a, n));
                double accept = msg.dot(p.accept_povm(to_bits(b, n)) * msg).real();
                if (a == b)
                    require(std::abs(accept - 1.0) < 1e-12, "completeness not exact");
                else
                    require(accept <= p.soundness + 1e-9, "soundness exceeded");
            }
    }
}

// ---- network checks ----

void check_compile_vs_sampled(std::uint64_t seed, int threads) {
    Rng rng(seed + 9);
    int pair = 0;
    for (int r : {2, 3}) {
        for (const char* y : {"0", "1"}) {
            auto p = eq_path_instance(r, 1, "0", y);
            auto model = compile(p);
            auto proof = haar_state(model.accept_operator.layout, rng);
            double exact = expectation(model.accept_operator, proof);
            auto stats = simulate_sampled(p, proof, 20000, seed * 31 + pair, threads);
            double sigma = std::max(stats.all_accept_stderr(), 1e-3);
            require(std::abs(stats.all_accept_frequency() - exact) < 3.0 * sigma,
                    "sampled run outside 3 sigma");
            ++pair;
        }
    }
}

void check_spectrum_bounds(std::uint64_t) {
    for (const char* y : {"01", "11"}) {
        auto p = eq_path_instance(2, 2, "01", y);
        auto model = compile(p);
        Eigen::SelfAdjointEigenSolver<Mat> es(model.accept_operator.matrix,
                                              Eigen::EigenvaluesOnly);
        require(es.eigenvalues().minCoeff() > -1e-9, "acceptance operator below 0");
        require(es.eigenvalues().maxCoeff() < 1.0 + 1e-9, "acceptance operator above 1");
    }
}

void check_channel_self_adjoint(std::uint64_t seed) {
    Rng rng(seed + 11);
    auto layout = plain_layout({2, 2, 2});
    auto channel = symmetrize_channel({"q0", "q1", "q2"}, 2);
    for (int t = 0; t < 25; ++t) {
        auto rho = random_density(layout, rng);
        HermitianOperator m(layout, random_hermitian(8, rng));
        double forward = (m.matrix * apply_channel(channel, rho).matrix).trace().real();
        double backward =
            (apply_channel_adjoint(channel, m).matrix * rho.matrix).trace().real();
        require(std::abs(forward - backward) < 1e-9, "channel self-adjointness violated");
    }
}

void check_tensor_disjoint_lambda(std::uint64_t) {
    auto a = compile(eq_path_instance(2, 1, "0", "1")).accept_operator;
    std::vector<RegisterSpec> regs;
    for (const auto& r : a.layout.registers())
        regs.push_back({r.id + "'", r.dim, r.owner, r.role});
    auto joint = tensor(a, HermitianOperator(RegisterLayout(regs), a.matrix));
    double lhs = top_eigenpair(joint).value;
    double rhs = top_eigenpair(a).value;
    require(std::abs(lhs - rhs * rhs) < 1e-8, "tensor lambda not multiplicative");
}

// ---- protocol checks ----

void check_completeness_catalog(std::uint64_t) {
    for (int n : {1, 2, 3})
        for (int r : {2, 3}) {
            auto p = eq_path_instance(r, n, to_bits(1, n), to_bits(1, n));
            require(std::abs(exact_accept_probability(p, honest_proof(p)) - 1.0) < 1e-9,
                    "eq_path completeness");
        }
    TreeProtocolParams tp;
    tp.scheme = FingerprintScheme::hadamard(2);
    tp.topology = Topology::tree({{"u1", "w2"}, {"w2", "u2"}, {"u1", "w3"}, {"w3", "u3"}},
                                 "u1", {{"u1", "10"}, {"u2", "10"}, {"u3", "10"}});
    auto tree = build_eq_tree(tp);
    require(std::abs(exact_accept_probability(tree, honest_proof(tree)) - 1.0) < 1e-9,
            "eq_tree completeness");
    RelayEqParams rp;
    rp.r = 4;
    rp.n = 2;
    rp.segment_scheme = FingerprintScheme::hadamard(2);
    rp.x = rp.y = "10";
    rp.segment_length = 2;
    rp.reps_per_segment = 2;
    require(std::abs(build_eq_relay(rp).honest_value() - 1.0) < 1e-9,
            "eq_relay completeness");
    for (auto variant : {GtVariant::greater, GtVariant::less, GtVariant::greater_equal,
                         GtVariant::less_equal}) {
        for (std::uint64_t x = 0; x < 4; ++x)
            for (std::uint64_t y = 0; y < 4; ++y) {
                if (!gt_truth(variant, x, y)) continue;
                GtParams g;
                g.r = 2;
                g.n = 2;
                g.x = x;
                g.y = y;
                g.variant = variant;
                auto p = build_gt(g);
                require(std::abs(exact_accept_probability(p, honest_proof(p)) - 1.0) < 1e-9,
                        "gt completeness");
            }
    }
    RvParams rv;
    rv.topology = Topology::tree({{"u1", "w2"}, {"w2", "u2"}, {"u1", "w3"}, {"w3", "u3"}},
                                 "u1", {{"u1", ""}, {"u2", ""}, {"u3", ""}});
    rv.inputs = {{"u1", 5}, {"u2", 2}, {"u3", 7}};
    rv.n = 3;
    rv.rank_j = 2;
    require(std::abs(rv_evaluate(rv).honest_value - 1.0) < 1e-9, "rv completeness");
}

void check_soundness_inequalities(std::uint64_t) {
    // EQ path, exhaustive over pairs at n <= 2; a representative pair at
    // n = 3 (hadamard no-instances are related by basis relabeling)
    for (int r : {2, 3}) {
        for (int n : {1, 2}) {
            for (std::uint64_t a = 0; a < (1ULL << n); ++a)
                for (std::uint64_t b = 0; b < (1ULL << n); ++b) {
                    if (a == b) continue;
                    auto p = eq_path_instance(r, n, to_bits(a, n), to_bits(b, n));
                    double value = top_eigenpair(compile(p).accept_operator).value;
                    require(value <= eq_path_bound(r) + 1e-9, "eq_path soundness");
                }
        }
        auto p3 = eq_path_instance(r, 3, "010", "011");
        require(top_eigenpair(compile(p3).accept_operator).value <= eq_path_bound(r) + 1e-9,
                "eq_path soundness at n=3");
    }
    for (std::uint64_t x = 0; x < 8; ++x)
        for (std::uint64_t y = x; y < 8; ++y) {
            GtParams g;
            g.r = 2;
            g.n = 3;
            g.x = x;
            g.y = y;
            g.variant = GtVariant::greater;
            require(gt_adversary_value(g).value <= eq_path_bound(2) + 1e-9,
                    "gt per-index soundness");
        }
}

void check_repetition_multiplicativity(std::uint64_t) {
    auto a1 = compile(eq_path_instance(2, 2, "00", "01")).accept_operator;
    double v1 = top_eigenpair(a1).value;
    auto relabel = [](const HermitianOperator& op, const std::string& suffix) {
        std::vector<RegisterSpec> regs;
        for (const auto& r : op.layout.registers())
            regs.push_back({r.id + suffix, r.dim, r.owner, r.role});
        return HermitianOperator(RegisterLayout(regs, kStateDimCap), op.matrix);
    };
    auto a2 = tensor(a1, relabel(a1, "'"));
    auto a3 = tensor(a2, relabel(a1, "''"));
    double v2 = top_eigenpair(a2).value;
    double v3 = top_eigenpair(a3).value;
    require(std::abs(v2 - v1 * v1) < 1e-8, "k=2 repetition not multiplicative");
    require(std::abs(v3 - v1 * v1 * v1) < 1e-8, "k=3 repetition not multiplicative");
    require(v2 <= v1 + 1e-9 && v3 <= v2 + 1e-9, "repetition not monotone");
}

// ---- adversary checks ----

void check_strategy_ordering(std::uint64_t seed) {
    SeeSawOptions opts;
    opts.restarts = 6;
    opts.seed = seed;
    for (const char* y : {"01", "11"}) {
        auto p = eq_path_instance(2, 2, "01", y);
        auto model = compile(p);
        double ent = optimal_entangled_value(model).value;
        double sep = optimal_separable_value(model, group_by_node(p), opts).value;
        require(sep <= ent + 1e-9, "separable exceeded entangled");
        if (std::string(y) == "01") {
            double honest = expectation(model.accept_operator, honest_proof(p));
            require(honest <= sep + 1e-9, "honest exceeded separable");
        }
    }
}

void check_seesaw_determinism(std::uint64_t seed) {
    auto p = eq_path_instance(2, 2, "00", "10");
    auto model = compile(p);
    SeeSawOptions opts;
    opts.restarts = 4;
    opts.seed = seed;
    auto a = optimal_separable_value(model, group_by_node(p), opts);
    auto b = optimal_separable_value(model, group_by_node(p), opts);
    require(a.value == b.value, "see-saw not deterministic");
}

void check_attacks_sampled(std::uint64_t seed) {
    auto scheme = FingerprintScheme::hadamard(2);
    SeparableProofFamily family;
    for (std::uint64_t s = 0; s < 4; ++s)
        family.fooling_inputs.emplace_back(to_bits(s, 2), to_bits(s, 2));
    family.build = [scheme](const std::string& x, const std::string& y) {
        return build_gapped_eq_path(5, scheme, x, y, 2);
    };
    family.f = [](const std::string& a, const std::string& b) { return a == b; };
    family.completeness = 1.0;
    auto result = entangled_no_proof_attack(family, 2, {"00", "00"}, {"11", "11"});
    require(result.status == "success", "no-proof attack did not apply");
    require(result.accept_prob >= result.reference_line - 1e-9,
            "no-proof attack below the reference line");

    auto crossed = family.build("00", "11");
    auto rho =
        partial_trace(DensityOperator::from_state(honest_proof(family.build("00", "00"))),
                      {"n1a", "n1b"});
    auto sigma =
        partial_trace(DensityOperator::from_state(honest_proof(family.build("11", "11"))),
                      {"n4a", "n4b"});
    DensityOperator proof(crossed.proof_layout(), tensor(rho, sigma).matrix);
    auto stats = simulate_sampled(crossed, proof, 20000, seed + 17);
    double sigma_hat = std::max(stats.all_accept_stderr(), 1e-3);
    require(std::abs(stats.all_accept_frequency() - result.accept_prob) < 3.0 * sigma_hat,
            "attack probability not reproduced by sampling");
}

// ---- reduction checks ----

void check_cut_reduction(std::uint64_t) {
    auto pipeline = eq_path_instance(3, 2, "01", "11");
    auto model = compile(pipeline);
    double src = top_eigenpair(model.accept_operator).value;
    for (int i = 0; i <= 2; ++i) {
        auto two = cut_to_two_party(model, pipeline, i);
        require(std::abs(top_eigenpair(two.accept_operator).value - src) <= 1e-10,
                "cut changed the acceptance value");
        require(two.total_cost == two.gamma1_qubits + two.gamma2_qubits + two.mu_qubits,
                "cost accounting inconsistent");
    }
}

}  // namespace

std::vector<SelfTestCheck> selftest_checks(std::uint64_t seed, std::int64_t dim_cap) {
    std::vector<SelfTestCheck> checks;
    auto add = [&](std::string name, std::int64_t required, std::function<void()> fn) {
        checks.push_back({std::move(name), required, std::move(fn)});
    };
    add("qcore.partial_trace_of_tensor", 6, [=] { check_tensor_partial_trace(seed); });
    add("qcore.trace_distance_contractive", 6, [=] { check_contractivity(seed); });
    add("qcore.fuchs_van_de_graaf", 3, [=] { check_fuchs_van_de_graaf(seed); });
    add("qcore.povm_distinguishability", 4, [=] { check_povm_distinguishability(seed); });
    add("qcore.channel_preservation", 4, [=] { check_channel_preservation(seed); });
    add("qcore.top_eigen_probes", 16, [=] { check_top_eigen_probes(seed); });
    add("tests.swap_product_formula", 16, [=] { check_swap_product_formula(seed); });
    add("tests.perm_group_average", 81, [=] { check_perm_group_average(seed); });
    add("tests.closeness_bounds", 81, [=] { check_closeness_bounds(seed); });
    add("tests.projector_eigenspace", 8, [=] { check_projector_eigenspace(seed); });
    add("fingerprint.overlap_bound", 64, [=] { check_overlap_bound(seed); });
    add("fingerprint.eq_one_way", 16, [=] { check_eq_one_way(seed); });
    add("network.compile_vs_sampled", 32, [=] { check_compile_vs_sampled(seed, 1); });
    add("network.spectrum_bounds", 16, [=] { check_spectrum_bounds(seed); });
    add("network.channel_self_adjoint", 8, [=] { check_channel_self_adjoint(seed); });
    add("network.tensor_disjoint_lambda", 16, [=] { check_tensor_disjoint_lambda(seed); });
    add("protocols.completeness_catalog", 4096, [=] { check_completeness_catalog(seed); });
    add("protocols.soundness_inequalities", 4096, [=] { check_soundness_inequalities(seed); });
    add("protocols.repetition_multiplicativity", 4096,
        [=] { check_repetition_multiplicativity(seed); });
    add("adversary.strategy_ordering", 256, [=] { check_strategy_ordering(seed); });
    add("adversary.seesaw_determinism", 256, [=] { check_seesaw_determinism(seed); });
    add("adversary.attacks_sampled", 256, [=] { check_attacks_sampled(seed); });
    add("reductions.cut_accounting", 256, [=] { check_cut_reduction(seed); });
    (void)dim_cap;
    return checks;
}

SelfTestReport run_selftest(std::uint64_t seed, std::int64_t dim_cap, std::ostream& out,
                            int threads) {
    (void)threads;
    SelfTestReport report;
    for (auto& check : selftest_checks(seed, dim_cap)) {
        SelfTestResult result;
        result.name = check.name;
        auto start = std::chrono::steady_clock::now();
        if (check.required_dim_cap > dim_cap) {
            result.status = "skip";
            result.detail = "needs dim_cap >= " + std::to_string(check.required_dim_cap);
            ++report.skipped;
        } else {
            try {
                check.run();
                result.status = "pass";
                ++report.passed;
            } catch (const std::exception& e) {
                result.status = "fail";
                result.detail = e.what();
                ++report.failed;
            }
        }
        result.seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out << "[" << result.status << "] " << result.name;
        if (!result.detail.empty()) out << " (" << result.detail << ")";
        out << "\n";
        report.results.push_back(std::move(result));
    }
    out << report.passed << " passed, " << report.failed << " failed, " << report.skipped
        << " skipped\n";
    return report;
}

}  // namespace dqma
