#include "dqma/qcore.hpp"

#include "dqma/random.hpp"
#include "test_support.hpp"

#include <doctest.h>

#include <Eigen/SVD>

#include <algorithm>

using namespace dqma;
using dqma::testing::basis_state;
using dqma::testing::make_layout;
using dqma::testing::max_abs_diff;

TEST_SUITE_BEGIN("qcore");

TEST_CASE("layout strides and composition") {
    auto layout = make_layout({2, 3, 4});
    CHECK(layout.total_dimension() == 24);
    CHECK(layout.stride(0) == 12);
    CHECK(layout.stride(1) == 4);
    CHECK(layout.stride(2) == 1);
    std::vector<std::int64_t> digits;
    layout.decompose(23, digits);
    CHECK(digits == std::vector<std::int64_t>{1, 2, 3});
    CHECK(layout.compose(digits) == 23);
}

TEST_CASE("layout rejects duplicates and cap violations") {
    CHECK_THROWS_AS(RegisterLayout({{"a", 2, "prover", RegisterRole::proof},
                                    {"a", 2, "prover", RegisterRole::proof}}),
                    layout_error);
    CHECK_THROWS_AS(RegisterLayout({{"a", 5000, "prover", RegisterRole::proof}}, 4096),
                    dim_cap_error);
}

TEST_CASE("tensor of basis projectors") {
    auto l1 = make_layout({2}, "a");
    auto l2 = make_layout({2}, "b");
    auto zero = DensityOperator::from_state(basis_state(l1, 0));
    auto one = DensityOperator::from_state(basis_state(l2, 1));
    auto prod = tensor(zero, one);
    Mat expected = Mat::Zero(4, 4);
    expected(1, 1) = 1.0;  // |01>
    CHECK(max_abs_diff(prod.matrix, expected) < 1e-12);
}

TEST_CASE("tensor of maximally mixed states") {
    auto l1 = make_layout({2}, "a");
    auto l2 = make_layout({2}, "b");
    DensityOperator half(l1, 0.5 * Mat::Identity(2, 2));
    auto prod = tensor(half, DensityOperator(l2, 0.5 * Mat::Identity(2, 2)));
    CHECK(max_abs_diff(prod.matrix, 0.25 * Mat::Identity(4, 4)) < 1e-12);
}

TEST_CASE("tensor trace multiplies") {
    Rng rng(41);
    for (int t = 0; t < 20; ++t) {
        auto a = random_density(make_layout({3}, "a"), rng);
        auto b = random_density(make_layout({2}, "b"), rng);
        auto prod = tensor(a, b);
        double lhs = prod.matrix.trace().real();
        double direct = a.matrix.trace().real() * b.matrix.trace().real();
        CHECK(std::abs(lhs - direct) < 1e-10);
    }
}

TEST_CASE("partial trace of a Bell pair is maximally mixed") {
    auto layout = make_layout({2, 2});
    Vec bell = Vec::Zero(4);
    bell(0) = bell(3) = 1.0 / std::sqrt(2.0);
    auto rho = DensityOperator::from_state(StateVector(layout, bell));
    auto reduced = partial_trace(rho, {"q0"});
    CHECK(max_abs_diff(reduced.matrix, 0.5 * Mat::Identity(2, 2)) < 1e-12);
}

TEST_CASE("partial trace of a product recovers the factor") {
    Rng rng(42);
    for (int t = 0; t < 100; ++t) {
        auto rho = random_density(make_layout({3}, "a"), rng);
        auto sigma = random_density(make_layout({2}, "b"), rng);
        auto joint = tensor(rho, sigma);
        auto back = partial_trace(joint, {"a0"});
        CHECK(max_abs_diff(back.matrix, rho.matrix) < 1e-9);
    }
}

TEST_CASE("Schmidt marginals share their spectrum") {
    // oracle: singular values of the reshaped amplitude matrix
    Rng rng(7);
    for (int t = 0; t < 25; ++t) {
        auto layout = make_layout({3, 4});
        auto psi = haar_state(layout, rng);
        Mat reshaped(3, 4);
        for (int i = 0; i < 3; ++i)
            for (int j = 0; j < 4; ++j) reshaped(i, j) = psi.amplitudes(i * 4 + j);
        Eigen::JacobiSVD<Mat> svd(reshaped);
        std::vector<double> schmidt_sq;
        for (Eigen::Index k = 0; k < svd.singularValues().size(); ++k)
            schmidt_sq.push_back(svd.singularValues()(k) * svd.singularValues()(k));
        std::sort(schmidt_sq.begin(), schmidt_sq.end(), std::greater<>());

        auto rho = DensityOperator::from_state(psi);
        for (const char* keep : {"q0", "q1"}) {
            auto marginal = partial_trace(rho, {keep});
            Eigen::SelfAdjointEigenSolver<Mat> es(marginal.matrix, Eigen::EigenvaluesOnly);
            std::vector<double> eigs;
            for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k)
                eigs.push_back(es.eigenvalues()(k));
            std::sort(eigs.begin(), eigs.end(), std::greater<>());
            for (size_t k = 0; k < schmidt_sq.size(); ++k)
                CHECK(std::abs(eigs[k] - schmidt_sq[k]) < 1e-9);
        }
    }
}

TEST_CASE("trace distance on pure states") {
    auto layout = make_layout({2});
    auto zero = DensityOperator::from_state(basis_state(layout, 0));
    auto one = DensityOperator::from_state(basis_state(layout, 1));
    CHECK(trace_distance(zero, one) == doctest::Approx(1.0).epsilon(1e-10));
    CHECK(trace_distance(zero, zero) == doctest::Approx(0.0).epsilon(1e-10));

    Vec plus(2);
    plus << 1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0);
    auto plus_rho = DensityOperator::from_state(StateVector(layout, plus));
    CHECK(trace_distance(zero, plus_rho) ==
          doctest::Approx(std::sqrt(0.5)).epsilon(1e-10));
}

TEST_CASE("fidelity basics and Fuchs-van de Graaf") {
    auto layout = make_layout({3});
    Rng rng(11);
    auto rho = random_density(layout, rng);
    CHECK(fidelity(rho, rho) == doctest::Approx(1.0).epsilon(1e-8));

    // pure states: fidelity is the overlap magnitude
    for (int t = 0; t < 20; ++t) {
        Vec a = haar_vector(3, rng), b = haar_vector(3, rng);
        auto pa = DensityOperator::from_state(StateVector(layout, a));
        auto pb = DensityOperator::from_state(StateVector(layout, b));
        CHECK(fidelity(pa, pb) == doctest::Approx(std::abs(a.dot(b))).epsilon(1e-9));
    }

    auto l2 = make_layout({2});
    auto zero = DensityOperator::from_state(basis_state(l2, 0));
    auto one = DensityOperator::from_state(basis_state(l2, 1));
    CHECK(fidelity(zero, one) == doctest::Approx(0.0).epsilon(1e-8));

    for (int t = 0; t < 100; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        double f = fidelity(a, b);
        double d = trace_distance(a, b);
        CHECK(1.0 - f <= d + 1e-9);
        CHECK(d <= std::sqrt(std::max(0.0, 1.0 - f * f)) + 1e-9);
    }
}

TEST_CASE("trace distance is contractive under partial trace") {
    Rng rng(13);
    auto layout = make_layout({2, 3});
    for (int t = 0; t < 50; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        double full = trace_distance(a, b);
        double reduced = trace_distance(partial_trace(a, {"q0"}), partial_trace(b, {"q0"}));
        CHECK(reduced <= full + 1e-9);
    }
}

TEST_CASE("POVM elements cannot distinguish beyond the trace distance") {
    Rng rng(17);
    auto layout = make_layout({4});
    for (int t = 0; t < 50; ++t) {
        auto a = random_density(layout, rng);
        auto b = random_density(layout, rng);
        Mat m = random_povm_element(4, rng);
        double gap = std::abs((m * (a.matrix - b.matrix)).trace().real());
        CHECK(gap <= trace_distance(a, b) + 1e-9);
    }
}

TEST_CASE("mixing channels: identity and half swap") {
    auto layout = make_layout({2, 2});
    MixingChannel identity({"q0", "q1"}, {{1.0, Mat::Identity(4, 4)}});
    Rng rng(19);
    auto rho = random_density(layout, rng);
    CHECK(max_abs_diff(apply_channel(identity, rho).matrix, rho.matrix) < 1e-12);

    Mat swap = Mat::Zero(4, 4);
    swap(0, 0) = swap(3, 3) = 1.0;
    swap(1, 2) = swap(2, 1) = 1.0;
    MixingChannel half({"q0", "q1"}, {{0.5, Mat::Identity(4, 4)}, {0.5, swap}});
    auto basis01 = DensityOperator::from_state(basis_state(layout, 1));
    auto mixed = apply_channel(half, basis01);
    Mat expected = Mat::Zero(4, 4);
    expected(1, 1) = expected(2, 2) = 0.5;
    CHECK(max_abs_diff(mixed.matrix, expected) < 1e-12);
}

TEST_CASE("channel preserves trace and positivity; adjoint duality") {
    Rng rng(23);
    auto layout = make_layout({2, 2});
    Mat swap = Mat::Zero(4, 4);
    swap(0, 0) = swap(3, 3) = 1.0;
    swap(1, 2) = swap(2, 1) = 1.0;
    MixingChannel half({"q0", "q1"}, {{0.5, Mat::Identity(4, 4)}, {0.5, swap}});

    for (int t = 0; t < 30; ++t) {
        auto rho = random_density(layout, rng);
        auto out = apply_channel(half, rho);
        CHECK(std::abs(out.matrix.trace().real() - 1.0) < 1e-9);
        Eigen::SelfAdjointEigenSolver<Mat> es(out.matrix, Eigen::EigenvaluesOnly);
        CHECK(es.eigenvalues().minCoeff() > -1e-9);

        HermitianOperator m(layout, random_hermitian(4, rng));
        double forward = (m.matrix * out.matrix).trace().real();
        double backward = (apply_channel_adjoint(half, m).matrix * rho.matrix).trace().real();
        CHECK(std::abs(forward - backward) < 1e-9);
    }
}

TEST_CASE("top eigenpair on small operators") {
    auto layout = make_layout({2});
    Mat diag = Mat::Zero(2, 2);
    diag(0, 0) = 0.2;
    diag(1, 1) = 0.9;
    auto [value, vec] = top_eigenpair(HermitianOperator(layout, diag));
    CHECK(value == doctest::Approx(0.9).epsilon(1e-12));
    CHECK(std::abs(vec.amplitudes(1)) == doctest::Approx(1.0).epsilon(1e-9));

    auto l3 = make_layout({3});
    auto [one, anyvec] = top_eigenpair(HermitianOperator(l3, Mat::Identity(3, 3)));
    CHECK(one == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(anyvec.amplitudes.norm() == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("top eigenpair dominates random probes") {
    Rng rng(29);
    auto layout = make_layout({4, 4});
    HermitianOperator op(layout, random_hermitian(16, rng));
    auto [value, vec] = top_eigenpair(op);
    CHECK((op.matrix * vec.amplitudes - value * vec.amplitudes).norm() <= 1e-8);
    double best = -1e9;
    for (int t = 0; t < 10000; ++t) {
        Vec v = haar_vector(16, rng);
        best = std::max(best, v.dot(op.matrix * v).real());
    }
    CHECK(best <= value + 1e-6);
}

TEST_CASE("Lanczos path agrees with the dense solver") {
    Rng rng(31);
    const std::int64_t dim = 1400;  // above the dense threshold
    Mat h = random_hermitian(dim, rng);
    RegisterLayout layout({{"big", dim, "prover", RegisterRole::proof}}, kStateDimCap);
    HermitianOperator op(layout, h);
    auto [value, vec] = top_eigenpair(op);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    CHECK(std::abs(value - es.eigenvalues().maxCoeff()) < 1e-7);
    CHECK((h * vec.amplitudes - value * vec.amplitudes).norm() <= 1e-8);
}

TEST_CASE("state and operator validation") {
    auto layout = make_layout({2});
    Vec bad(2);
    bad << 1.0, 1.0;
    CHECK_THROWS_AS(StateVector(layout, bad), numeric_error);
    Mat nonherm(2, 2);
    nonherm << 1.0, cplx(0, 1), cplx(0, 1), 0.0;
    CHECK_THROWS_AS(HermitianOperator(layout, nonherm), numeric_error);
    Mat negative = Mat::Identity(2, 2);
    negative(0, 0) = -0.5;
    negative(1, 1) = 1.5;
    CHECK_THROWS_AS(DensityOperator(layout, negative), numeric_error);
}

TEST_SUITE_END();
