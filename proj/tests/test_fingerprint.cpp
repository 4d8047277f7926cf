#include "dqma/fingerprint.hpp"

#include "dqma/random.hpp"
#include "test_support.hpp"

#include <doctest.h>
#include <nlohmann/json.hpp>

using namespace dqma;
using dqma::testing::max_abs_diff;

TEST_SUITE_BEGIN("fingerprint");

TEST_CASE("bit string helpers") {
    CHECK(to_bits(5, 3) == "101");
    CHECK(from_bits("101") == 5);
    CHECK(hamming_distance("101", "011") == 2);
}

TEST_CASE("hadamard fingerprints: uniform for zero, orthogonal otherwise") {
    auto scheme = FingerprintScheme::hadamard(3);
    Vec h0 = fingerprint_amplitudes(scheme, "000");
    for (Eigen::Index i = 0; i < h0.size(); ++i)
        CHECK(h0(i).real() == doctest::Approx(1.0 / std::sqrt(8.0)));

    for (std::uint64_t a = 0; a < 8; ++a)
        for (std::uint64_t b = 0; b < 8; ++b) {
            double overlap = std::abs(fingerprint_amplitudes(scheme, to_bits(a, 3))
                                          .dot(fingerprint_amplitudes(scheme, to_bits(b, 3))));
            if (a == b)
                CHECK(overlap == doctest::Approx(1.0).epsilon(1e-12));
            else
                CHECK(overlap < 1e-12);
        }
}

TEST_CASE("pairwise overlap bound holds exhaustively up to n = 6") {
    for (int n : {2, 4, 6}) {
        auto scheme = FingerprintScheme::hadamard(n);
        const std::uint64_t total = 1ULL << n;
        for (std::uint64_t a = 0; a < total; ++a)
            for (std::uint64_t b = a + 1; b < total; ++b) {
                double overlap =
                    std::abs(fingerprint_amplitudes(scheme, to_bits(a, n))
                                 .dot(fingerprint_amplitudes(scheme, to_bits(b, n))));
                CHECK(overlap <= scheme.overlap_bound + 1e-9);
            }
    }
}

TEST_CASE("code fingerprints match the Hamming-distance overlap formula") {
    auto scheme = FingerprintScheme::random_linear_code(4, 12, 3);
    CHECK(scheme.overlap_bound * scheme.overlap_bound <= 1.0 / 3.0 + 1e-12);
    const int m = scheme.code_length;
    for (std::uint64_t a = 0; a < 16; ++a) {
        for (std::uint64_t b = 0; b < 16; ++b) {
            auto xa = to_bits(a, 4), xb = to_bits(b, 4);
            Vec ha = fingerprint_amplitudes(scheme, xa);
            Vec hb = fingerprint_amplitudes(scheme, xb);
            auto ea = scheme.encode(xa);
            auto eb = scheme.encode(xb);
            int ham = 0;
            for (int i = 0; i < m; ++i) ham += (ea[i] != eb[i]);
            double expected = 1.0 - 2.0 * static_cast<double>(ham) / m;
            CHECK(ha.dot(hb).real() == doctest::Approx(expected).epsilon(1e-10));
            if (a != b) CHECK(std::abs(expected) <= scheme.overlap_bound + 1e-12);
        }
    }
}

TEST_CASE("code distance below one third is rejected") {
    // seeds are scanned until one yields a bad code; the constructor must
    // throw for it (m tiny makes bad codes common)
    bool saw_rejection = false;
    for (std::uint64_t seed = 0; seed < 200 && !saw_rejection; ++seed) {
        try {
            FingerprintScheme::random_linear_code(4, 5, seed);
        } catch (const numeric_error&) {
            saw_rejection = true;
        }
    }
    CHECK(saw_rejection);
}

TEST_CASE("encoder table JSON round trip") {
    auto scheme = FingerprintScheme::random_linear_code(3, 9, 17);
    auto j = scheme.to_json();
    auto back = FingerprintScheme::from_json(j);
    CHECK(back.to_json() == j);
    for (std::uint64_t a = 0; a < 8; ++a) {
        auto bits = to_bits(a, 3);
        CHECK(max_abs_diff(fingerprint_amplitudes(scheme, bits),
                           fingerprint_amplitudes(back, bits)) == 0.0);
    }
}

TEST_CASE("eq_one_way: one-sided error") {
    for (int n : {1, 2, 3, 4}) {
        auto p = eq_one_way(FingerprintScheme::hadamard(n));
        CHECK(p.completeness == 1.0);
        for (std::uint64_t a = 0; a < (1ULL << n); ++a)
            for (std::uint64_t b = 0; b < (1ULL << n); ++b) {
                Vec msg = p.message(to_bits(a, n));
                Mat povm = p.accept_povm(to_bits(b, n));
                double accept = msg.dot(povm * msg).real();
                if (a == b)
                    CHECK(accept == doctest::Approx(1.0).epsilon(1e-12));
                else
                    CHECK(accept <= p.soundness + 1e-9);
            }
    }

    auto code = FingerprintScheme::random_linear_code(3, 9, 17);
    auto p = eq_one_way(code);
    for (std::uint64_t a = 0; a < 8; ++a)
        for (std::uint64_t b = 0; b < 8; ++b) {
            if (a == b) continue;
            Vec msg = p.message(to_bits(a, 3));
            Mat povm = p.accept_povm(to_bits(b, 3));
            double accept = msg.dot(povm * msg).real();
            double overlap = std::abs(fingerprint_amplitudes(code, to_bits(a, 3))
                                          .dot(fingerprint_amplitudes(code, to_bits(b, 3))));
            CHECK(accept == doctest::Approx(overlap * overlap).epsilon(1e-10));
            CHECK(accept <= p.soundness + 1e-9);
        }
}

TEST_CASE("eq_one_way rejects schemes with overlap above the soundness budget") {
    FingerprintScheme bad = FingerprintScheme::hadamard(2);
    bad.overlap_bound = 0.9;
    CHECK_THROWS_AS(eq_one_way(bad), numeric_error);
}

TEST_CASE("exact send protocol evaluates the predicate") {
    auto ham1 = [](const std::string& x, const std::string& y) {
        return hamming_distance(x, y) <= 1;
    };
    auto p = exact_send_protocol(ham1, 2, "ham_le_1");
    auto run = [&](const std::string& x, const std::string& y) {
        Vec msg = p.message(x);
        return msg.dot(p.accept_povm(y) * msg).real();
    };
    CHECK(run("00", "01") == doctest::Approx(1.0));
    CHECK(run("00", "11") == doctest::Approx(0.0));

    // with f = EQ this coincides with the fingerprint protocol at delta = 0
    auto eq = [](const std::string& x, const std::string& y) { return x == y; };
    auto pe = exact_send_protocol(eq, 4, "eq_exact");
    auto pf = eq_one_way(FingerprintScheme::hadamard(4));
    for (std::uint64_t a = 0; a < 16; ++a)
        for (std::uint64_t b = 0; b < 16; ++b) {
            Vec ma = pe.message(to_bits(a, 4));
            Vec fa = pf.message(to_bits(a, 4));
            double ve = ma.dot(pe.accept_povm(to_bits(b, 4)) * ma).real();
            double vf = fa.dot(pf.accept_povm(to_bits(b, 4)) * fa).real();
            CHECK(ve == doctest::Approx(vf).epsilon(1e-10));
        }
}

TEST_CASE("majority repetition amplifies one-sided error") {
    auto base = eq_one_way(FingerprintScheme::random_linear_code(3, 9, 17));
    auto rep = majority_repeat(base, 3);
    CHECK(rep.message_dim == base.message_dim * base.message_dim * base.message_dim);
    CHECK(rep.completeness == doctest::Approx(1.0));
    CHECK(rep.soundness < base.soundness);

    // the POVM evaluates the majority of three independent outcomes
    for (std::uint64_t a = 0; a < 8; ++a)
        for (std::uint64_t b = 0; b < 8; ++b) {
            Vec msg = rep.message(to_bits(a, 3));
            double accept = msg.dot(rep.accept_povm(to_bits(b, 3)) * msg).real();
            Vec single = base.message(to_bits(a, 3));
            double q = single.dot(base.accept_povm(to_bits(b, 3)) * single).real();
            double expected = q * q * q + 3.0 * q * q * (1.0 - q);
            CHECK(accept == doctest::Approx(expected).epsilon(1e-9));
        }
}

TEST_CASE("unitary_preparing maps e0 to the target") {
    Rng rng(3);
    for (int t = 0; t < 25; ++t) {
        Vec target = haar_vector(6, rng);
        Mat u = unitary_preparing(target);
        CHECK(is_unitary(u, 1e-10));
        CHECK((u.col(0) - target).norm() < 1e-10);
    }
}

TEST_CASE("wrapping a one-way protocol as QMA ignores the proof") {
    auto p = eq_one_way(FingerprintScheme::hadamard(2));
    auto q = wrap_oneway_as_qma(p);
    CHECK(q.proof_dim == 1);
    CHECK(q.ancilla_dim == p.message_dim);
    CHECK(one_way_qma_value(q, "01", "01") == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(one_way_qma_value(q, "01", "10") == doctest::Approx(0.0).epsilon(1e-10));
}

TEST_CASE("proof-assisted EQ is a sound one-way QMA protocol") {
    auto q = proof_assisted_eq_qma(FingerprintScheme::hadamard(2));
    CHECK(q.proof_dim == 4);

    for (std::uint64_t a = 0; a < 4; ++a) {
        // honest proof on a yes-instance accepts with certainty
        auto x = to_bits(a, 2);
        Mat op = one_way_qma_accept_operator(q, x, x);
        Vec proof = q.honest_proof(x, x);
        CHECK(proof.dot(op * proof).real() == doctest::Approx(1.0).epsilon(1e-9));
    }
    // the declared soundness is the exact worst case and is strictly
    // below the completeness
    CHECK(q.soundness < 1.0 - 1e-3);
    for (std::uint64_t a = 0; a < 4; ++a)
        for (std::uint64_t b = 0; b < 4; ++b) {
            if (a == b) continue;
            CHECK(one_way_qma_value(q, to_bits(a, 2), to_bits(b, 2)) <= q.soundness + 1e-12);
        }

    // Alice's operation is unitary and Dave's check is a valid element
    Mat u = q.alice_unitary("10");
    CHECK(is_unitary(u, 1e-9));
    Mat m = q.accept_povm("10");
    Eigen::SelfAdjointEigenSolver<Mat> es(m, Eigen::EigenvaluesOnly);
    CHECK(es.eigenvalues().minCoeff() > -1e-9);
    CHECK(es.eigenvalues().maxCoeff() < 1.0 + 1e-9);
}

TEST_SUITE_END();
