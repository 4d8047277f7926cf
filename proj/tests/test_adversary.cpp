#include "dqma/adversary.hpp"

#include "dqma/protocols.hpp"
#include "dqma/random.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace dqma;

namespace {

ProtocolPipeline eq_path_instance(int r, const std::string& x, const std::string& y,
                                  int reps = 1) {
    EqPathParams params;
    params.r = r;
    params.scheme = FingerprintScheme::hadamard(static_cast<int>(x.size()));
    params.x = x;
    params.y = y;
    params.repetitions = reps;
    return build_eq_path(params);
}

// dimension-2 fingerprints at angles s * pi / 16: a deliberately cramped
// family where distinct inputs overlap heavily
Vec tiny_state(const std::string& bits) {
    double theta = static_cast<double>(from_bits(bits)) * M_PI / 64.0;
    Vec v(2);
    v << std::cos(theta), std::sin(theta);
    return v;
}

SeparableProofFamily tiny_eq_family(int r) {
    SeparableProofFamily family;
    for (std::uint64_t s = 0; s < 8; ++s)
        family.fooling_inputs.emplace_back(to_bits(s, 3), to_bits(s, 3));
    family.build = [r](const std::string& x, const std::string& y) {
        return build_eq_path_with_map(r, 2, tiny_state, x, y);
    };
    family.f = [](const std::string& a, const std::string& b) { return a == b; };
    family.completeness = 1.0;
    return family;
}

SeparableProofFamily gapped_family(int r, int gap_at) {
    SeparableProofFamily family;
    auto scheme = FingerprintScheme::hadamard(2);
    for (std::uint64_t s = 0; s < 4; ++s)
        family.fooling_inputs.emplace_back(to_bits(s, 2), to_bits(s, 2));
    family.build = [r, gap_at, scheme](const std::string& x, const std::string& y) {
        return build_gapped_eq_path(r, scheme, x, y, gap_at);
    };
    family.f = [](const std::string& a, const std::string& b) { return a == b; };
    family.completeness = 1.0;
    return family;
}

}  // namespace

TEST_SUITE_BEGIN("adversary");

TEST_CASE("honest proof reproduces completeness; absent proofs throw") {
    auto yes = eq_path_instance(2, "01", "01");
    auto model = compile(yes);
    auto proof = honest_proof(yes);
    CHECK(expectation(model.accept_operator, proof) == doctest::Approx(1.0).epsilon(1e-9));

    auto no = eq_path_instance(2, "01", "10");
    CHECK_THROWS_AS(honest_proof(no), layout_error);
}

TEST_CASE("entangled optimum: yes-instances saturate, honest lies in the top space") {
    auto yes = eq_path_instance(2, "11", "11");
    auto model = compile(yes);
    auto opt = optimal_entangled_value(model);
    CHECK(opt.value == doctest::Approx(1.0).epsilon(1e-9));
    auto proof = honest_proof(yes);
    Vec image = model.accept_operator.matrix * proof.amplitudes;
    CHECK((image - proof.amplitudes).norm() < 1e-8);
}

TEST_CASE("entangled optimum on a no-instance meets the soundness line") {
    auto no = eq_path_instance(2, "01", "10");
    auto model = compile(no);
    auto opt = optimal_entangled_value(model);
    CHECK(opt.value <= 1.0 - 1.0 / 81.0 + 1e-9);
    CHECK(opt.value == doctest::Approx(0.5).epsilon(1e-10));
    CHECK(expectation(model.accept_operator, opt.state) ==
          doctest::Approx(opt.value).epsilon(1e-9));
}

TEST_CASE("entangled optimum dominates random product and entangled probes") {
    auto no = eq_path_instance(2, "00", "11");
    auto model = compile(no);
    double value = optimal_entangled_value(model).value;
    Rng rng(4097);
    const auto& layout = model.accept_operator.layout;
    double best = 0.0;
    for (int t = 0; t < 50000; ++t) {
        Vec v = haar_vector(layout.total_dimension(), rng);
        best = std::max(best, v.dot(model.accept_operator.matrix * v).real());
    }
    for (int t = 0; t < 50000; ++t) {
        Vec v = kron_vec(haar_vector(4, rng), haar_vector(4, rng));
        best = std::max(best, v.dot(model.accept_operator.matrix * v).real());
    }
    CHECK(best <= value + 1e-6);
}

TEST_CASE("entangled optimum is multiplicative over tensor models") {
    auto no = eq_path_instance(2, "0", "1");
    auto single = compile(no).accept_operator;
    double v1 = top_eigenpair(single).value;
    std::vector<RegisterSpec> regs;
    for (const auto& r : single.layout.registers())
        regs.push_back({r.id + "'", r.dim, r.owner, r.role});
    auto squared = tensor(single, HermitianOperator(RegisterLayout(regs), single.matrix));
    CHECK(top_eigenpair(squared).value == doctest::Approx(v1 * v1).epsilon(1e-8));
}

TEST_CASE("see-saw reaches the separable optimum on friendly instances") {
    // yes-instance: the honest product proof is separable and optimal
    auto yes = eq_path_instance(2, "10", "10");
    auto model = compile(yes);
    SeeSawOptions opts;
    opts.restarts = 4;
    auto sep = optimal_separable_value(model, group_by_node(*model.pipeline), opts);
    CHECK(sep.value == doctest::Approx(1.0).epsilon(1e-9));

    // product operators factor exactly
    auto no = eq_path_instance(2, "01", "10");
    auto nm = compile(no);
    auto ent = optimal_entangled_value(nm).value;
    auto nsep = optimal_separable_value(nm, group_by_node(*nm.pipeline), opts);
    CHECK(nsep.value <= ent + 1e-9);
    CHECK(nsep.value > 0.0);
}

TEST_CASE("see-saw on a product operator recovers the factor optimum") {
    Rng rng(777);
    RegisterLayout layout({{"a", 3, "v1", RegisterRole::proof},
                           {"b", 4, "v2", RegisterRole::proof}});
    Mat ba = random_povm_element(3, rng);
    Mat bb = random_povm_element(4, rng);
    HermitianOperator op(layout, kron(ba, bb));
    AcceptanceModel model;
    model.accept_operator = op;
    model.proof_dimension = 12;
    SeeSawOptions opts;
    opts.restarts = 3;
    auto sep = optimal_separable_value(model, {{"a"}, {"b"}}, opts);
    Eigen::SelfAdjointEigenSolver<Mat> ea(ba, Eigen::EigenvaluesOnly);
    Eigen::SelfAdjointEigenSolver<Mat> eb(bb, Eigen::EigenvaluesOnly);
    double expected = ea.eigenvalues().maxCoeff() * eb.eigenvalues().maxCoeff();
    CHECK(sep.value == doctest::Approx(expected).epsilon(1e-8));
    CHECK(sep.parts.size() == 2);
}

TEST_CASE("see-saw is deterministic for a fixed seed") {
    auto no = eq_path_instance(2, "00", "01");
    auto model = compile(no);
    SeeSawOptions opts;
    opts.restarts = 5;
    opts.seed = 31337;
    auto a = optimal_separable_value(model, group_by_node(*model.pipeline), opts);
    auto b = optimal_separable_value(model, group_by_node(*model.pipeline), opts);
    CHECK(a.value == b.value);
    CHECK(a.iterations == b.iterations);
    for (size_t g = 0; g < a.parts.size(); ++g)
        CHECK((a.parts[g].amplitudes - b.parts[g].amplitudes).norm() == 0.0);
}

TEST_CASE("classical fooling attack breaks the truncated EQ protocol") {
    auto protocol = make_truncated_eq_dma(3, 4, 2);
    std::vector<std::pair<std::string, std::string>> fooling;
    for (std::uint64_t s = 0; s < 8; ++s) fooling.emplace_back(to_bits(s, 3), to_bits(s, 3));
    auto eq = [](const std::string& a, const std::string& b) { return a == b; };

    // honest completeness first
    auto honest = protocol.honest_assignment("101", "101");
    CHECK(protocol.run("101", "101", honest) == doctest::Approx(1.0));

    auto result = classical_fooling_attack(protocol, eq, fooling);
    CHECK(result.status == "success");
    CHECK(result.pair_found);
    CHECK(result.accept_prob == doctest::Approx(1.0));           // p = 0
    CHECK(result.accept_prob >= result.reference_line - 1e-12);  // 1 - 2p
    auto witness = nlohmann::json::parse(result.witness);
    CHECK(!eq(witness["no_instance"][0].get<std::string>(),
              witness["no_instance"][1].get<std::string>()));
}

TEST_CASE("classical fooling attack reports full-proof protocols as not applicable") {
    auto protocol = make_truncated_eq_dma(3, 4, 3);  // full n-bit proofs
    std::vector<std::pair<std::string, std::string>> fooling;
    for (std::uint64_t s = 0; s < 8; ++s) fooling.emplace_back(to_bits(s, 3), to_bits(s, 3));
    auto eq = [](const std::string& a, const std::string& b) { return a == b; };
    auto result = classical_fooling_attack(protocol, eq, fooling);
    CHECK(result.status == "not-applicable");
    CHECK(!result.pair_found);
    CHECK(!result.counting_guarantee);
}

TEST_CASE("separable cut-and-paste attack on the cramped fingerprint family") {
    auto family = tiny_eq_family(4);
    const double delta = 0.5;
    auto result = separable_cut_paste_attack(family, 2, delta);
    CHECK(result.status == "success");
    CHECK(result.pair_found);
    CHECK(result.overlap > 1.0 - delta * delta / 8.0);
    CHECK(result.accept_prob >= result.reference_line - 1e-9);  // 1 - 2p - delta

    // the stitched run is reproduced by sampling
    auto witness = nlohmann::json::parse(result.witness);
    std::string xs = witness["no_instance"][0].get<std::string>();
    std::string yt = witness["no_instance"][1].get<std::string>();
    CHECK(xs != yt);
    auto crossed = family.build(xs, yt);
    auto parts_s = family.build(xs, xs).honest_product;
    auto parts_t = family.build(yt, yt).honest_product;
    std::map<std::string, Vec> left(parts_s.begin(), parts_s.end());
    std::map<std::string, Vec> right(parts_t.begin(), parts_t.end());
    std::vector<std::pair<std::string, Vec>> stitched;
    for (const auto& reg : crossed.layout.registers()) {
        if (reg.role != RegisterRole::proof) continue;
        int node = std::stoi(reg.owner.substr(1));
        stitched.emplace_back(reg.id, node <= result.cut_index ? left.at(reg.id)
                                                               : right.at(reg.id));
    }
    auto proof = assemble_product_proof(crossed, stitched);
    auto stats = simulate_sampled(crossed, proof, 20000, 7331);
    CHECK(std::abs(stats.all_accept_frequency() - result.accept_prob) <
          3.0 * std::max(stats.all_accept_stderr(), 1e-3));
}

TEST_CASE("cut-and-paste attack finds nothing for orthogonal fingerprints") {
    SeparableProofFamily family;
    for (std::uint64_t s = 0; s < 4; ++s)
        family.fooling_inputs.emplace_back(to_bits(s, 2), to_bits(s, 2));
    family.build = [](const std::string& x, const std::string& y) {
        return eq_path_instance(4, x, y);
    };
    family.f = [](const std::string& a, const std::string& b) { return a == b; };
    family.completeness = 1.0;
    auto result = separable_cut_paste_attack(family, 2, 0.5);
    CHECK(result.status == "no-pair");

    // a vacuous threshold admits every pair
    auto vacuous = separable_cut_paste_attack(family, 2, 3.0);  // threshold 1 - 9/8 < 0
    CHECK(vacuous.status == "success");
    CHECK(vacuous.reference_line < 0.0);
    CHECK(vacuous.accept_prob >= vacuous.reference_line);
}

TEST_CASE("entangled no-proof attack accepts through the gap with certainty") {
    auto family = gapped_family(5, 2);
    auto result = entangled_no_proof_attack(family, 2, {"00", "00"}, {"11", "11"});
    CHECK(result.status == "success");
    CHECK(result.accept_prob >= result.reference_line - 1e-9);
    CHECK(result.accept_prob == doctest::Approx(1.0).epsilon(1e-9));  // p = 0

    // the stitched proof is reproduced by the sampling executor
    auto crossed = family.build("00", "11");
    auto pa = family.build("00", "00");
    auto pb = family.build("11", "11");
    auto rho = partial_trace(DensityOperator::from_state(honest_proof(pa)),
                             {"n1a", "n1b"});
    auto sigma = partial_trace(DensityOperator::from_state(honest_proof(pb)),
                               {"n4a", "n4b"});
    auto stitched = tensor(rho, sigma);
    DensityOperator proof(crossed.proof_layout(), stitched.matrix);
    auto stats = simulate_sampled(crossed, proof, 4000, 2025);
    CHECK(stats.all_accept_frequency() >
          result.accept_prob - 3.0 * std::max(stats.all_accept_stderr(), 1e-3));
}

TEST_CASE("no-proof attack refuses pipelines without a gap") {
    SeparableProofFamily family;
    family.fooling_inputs = {{"00", "00"}, {"11", "11"}};
    family.build = [](const std::string& x, const std::string& y) {
        return eq_path_instance(4, x, y);
    };
    family.f = [](const std::string& a, const std::string& b) { return a == b; };
    auto result = entangled_no_proof_attack(family, 2, {"00", "00"}, {"11", "11"});
    CHECK(result.status == "not-applicable");
}

TEST_CASE("attack reports serialize with the expected fields") {
    auto family = gapped_family(5, 2);
    auto result = entangled_no_proof_attack(family, 2, {"00", "00"}, {"01", "01"});
    auto j = attack_report(result);
    for (const char* key : {"attack", "cut_index", "pair_found", "accept_prob",
                            "reference_line", "witness"})
        CHECK(j.contains(key));
    CHECK(j["attack"] == "entangled_no_proof");
}

TEST_SUITE_END();
