#include "dqma/fingerprint.hpp"

#include "dqma/random.hpp"
#include "dqma/symmetry.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>

namespace dqma {

std::string to_bits(std::uint64_t value, int n) {
    std::string out(n, '0');
    for (int i = 0; i < n; ++i)
        if (value & (1ULL << (n - 1 - i))) out[i] = '1';
    return out;
}

std::uint64_t from_bits(const std::string& bits) {
    std::uint64_t v = 0;
    for (char c : bits) {
        if (c != '0' && c != '1') throw layout_error("invalid bitstring: " + bits);
        v = (v << 1) | static_cast<std::uint64_t>(c == '1');
    }
    return v;
}

int hamming_distance(const std::string& a, const std::string& b) {
    if (a.size() != b.size()) throw layout_error("hamming_distance: length mismatch");
    int d = 0;
    for (size_t i = 0; i < a.size(); ++i) d += (a[i] != b[i]);
    return d;
}

FingerprintScheme FingerprintScheme::hadamard(int n) {
    if (n < 0 || n > 20) throw layout_error("hadamard scheme: n out of range");
    FingerprintScheme s;
    s.kind = Kind::hadamard;
    s.n = n;
    s.state_dimension = std::int64_t(1) << n;
    s.overlap_bound = 0.0;
    return s;
}

FingerprintScheme FingerprintScheme::random_linear_code(int n, int m, std::uint64_t seed) {
    if (n < 1 || n > 6) throw layout_error("random_linear_code: distance check needs n <= 6");
    if (m < 1) throw layout_error("random_linear_code: m must be >= 1");
    Rng rng(seed ^ 0xc0defeedULL);
    FingerprintScheme s;
    s.kind = Kind::code_based;
    s.n = n;
    s.code_length = m;
    s.alphabet = 2;
    s.state_dimension = m;
    s.generator.assign(m, std::vector<int>(n, 0));
    for (auto& row : s.generator)
        for (auto& bit : row) bit = static_cast<int>(rng.next_u64() & 1);

    // Exact weight enumeration over the 2^n - 1 nonzero messages.
    int min_w = m, max_w = 0;
    for (std::uint64_t z = 1; z < (1ULL << n); ++z) {
        auto bits = to_bits(z, n);
        int w = 0;
        for (const auto& row : s.generator) {
            int acc = 0;
            for (int i = 0; i < n; ++i) acc ^= (row[i] & (bits[i] - '0'));
            w += acc;
        }
        min_w = std::min(min_w, w);
        max_w = std::max(max_w, w);
    }
    if (3 * min_w < m)
        throw numeric_error("random_linear_code: relative distance below 1/3 for this seed");
    double lo = std::abs(1.0 - 2.0 * static_cast<double>(min_w) / m);
    double hi = std::abs(1.0 - 2.0 * static_cast<double>(max_w) / m);
    s.overlap_bound = std::max(lo, hi);
    return s;
}

std::vector<int> FingerprintScheme::encode(const std::string& x) const {
    if (kind != Kind::code_based) throw layout_error("encode: scheme is not code based");
    if (static_cast<int>(x.size()) != n) throw layout_error("encode: input length mismatch");
    std::vector<int> out(code_length, 0);
    for (int i = 0; i < code_length; ++i) {
        int acc = 0;
        for (int j = 0; j < n; ++j) acc ^= (generator[i][j] & (x[j] - '0'));
        out[i] = acc;
    }
    return out;
}

nlohmann::json FingerprintScheme::to_json() const {
    nlohmann::json j;
    j["kind"] = (kind == Kind::hadamard) ? "hadamard" : "code_based";
    j["n"] = n;
    j["state_dimension"] = state_dimension;
    j["overlap_bound"] = overlap_bound;
    if (kind == Kind::code_based) {
        j["code_length"] = code_length;
        j["alphabet"] = alphabet;
        std::vector<std::string> rows;
        for (const auto& row : generator) {
            std::string r;
            for (int b : row) r.push_back(b ? '1' : '0');
            rows.push_back(r);
        }
        j["generator_rows"] = rows;
    }
    return j;
}

FingerprintScheme FingerprintScheme::from_json(const nlohmann::json& j) {
    FingerprintScheme s;
    std::string kind = j.at("kind").get<std::string>();
    s.kind = (kind == "hadamard") ? Kind::hadamard : Kind::code_based;
    s.n = j.at("n").get<int>();
    s.state_dimension = j.at("state_dimension").get<std::int64_t>();
    s.overlap_bound = j.at("overlap_bound").get<double>();
    if (s.kind == Kind::code_based) {
        s.code_length = j.at("code_length").get<int>();
        s.alphabet = j.at("alphabet").get<int>();
        for (const auto& row : j.at("generator_rows")) {
            std::vector<int> r;
            for (char c : row.get<std::string>()) r.push_back(c - '0');
            s.generator.push_back(std::move(r));
        }
    }
    return s;
}

Vec fingerprint_amplitudes(const FingerprintScheme& scheme, const std::string& x) {
    if (static_cast<int>(x.size()) != scheme.n)
        throw layout_error("fingerprint: input length mismatch");
    if (scheme.kind == FingerprintScheme::Kind::hadamard) {
        const std::int64_t dim = scheme.state_dimension;
        Vec v(dim);
        const double amp = 1.0 / std::sqrt(static_cast<double>(dim));
        const std::uint64_t xv = from_bits(x);
        for (std::int64_t a = 0; a < dim; ++a) {
            int parity = __builtin_popcountll(xv & static_cast<std::uint64_t>(a)) & 1;
            v(a) = parity ? -amp : amp;
        }
        return v;
    }
    // phase encoding over the code positions: overlaps are 1 - 2 ham/m, so
    // a code with weights inside [m/3, 2m/3] gives delta <= 1/3
    auto code = scheme.encode(x);
    const int m = scheme.code_length;
    Vec v(scheme.state_dimension);
    const double amp = 1.0 / std::sqrt(static_cast<double>(m));
    for (int i = 0; i < m; ++i) v(i) = code[i] ? -amp : amp;
    return v;
}

StateVector fingerprint_state(const FingerprintScheme& scheme, const std::string& x,
                              const std::string& register_id) {
    RegisterLayout layout({{register_id, scheme.state_dimension, "prover", RegisterRole::prepared}},
                          kStateDimCap);
    return StateVector(std::move(layout), fingerprint_amplitudes(scheme, x));
}

OneWayProtocol eq_one_way(const FingerprintScheme& scheme) {
    const double delta = scheme.overlap_bound;
    if (delta * delta > 1.0 / 3.0 + kStructuralTol)
        throw numeric_error("eq_one_way: overlap bound too large for soundness 1/3");
    OneWayProtocol p;
    p.name = "eq_fingerprint";
    p.n = scheme.n;
    p.message_dim = scheme.state_dimension;
    p.message = [scheme](const std::string& x) { return fingerprint_amplitudes(scheme, x); };
    p.accept_povm = [scheme](const std::string& y) {
        Vec h = fingerprint_amplitudes(scheme, y);
        return Mat(h * h.adjoint());
    };
    p.completeness = 1.0;
    p.soundness = delta * delta;
    return p;
}

OneWayProtocol exact_send_protocol(std::function<bool(const std::string&, const std::string&)> f,
                                   int n, std::string name, std::int64_t dim_cap) {
    const std::int64_t dim = std::int64_t(1) << n;
    if (dim > dim_cap) throw dim_cap_error("exact_send_protocol: 2^n exceeds dim_cap");
    OneWayProtocol p;
    p.name = std::move(name);
    p.n = n;
    p.message_dim = dim;
    p.message = [n, dim](const std::string& x) {
        Vec v = Vec::Zero(dim);
        if (static_cast<int>(x.size()) != n) throw layout_error("exact_send: input length mismatch");
        v(static_cast<std::int64_t>(from_bits(x))) = 1.0;
        return v;
    };
    p.accept_povm = [f, n, dim](const std::string& y) {
        Mat m = Mat::Zero(dim, dim);
        for (std::int64_t xv = 0; xv < dim; ++xv)
            if (f(to_bits(xv, n), y)) m(xv, xv) = 1.0;
        return m;
    };
    p.completeness = 1.0;
    p.soundness = 0.0;
    return p;
}

OneWayProtocol majority_repeat(const OneWayProtocol& p, int times, std::int64_t dim_cap) {
    if (times < 1) throw layout_error("majority_repeat: times must be >= 1");
    std::int64_t dim = 1;
    for (int t = 0; t < times; ++t) {
        if (dim > dim_cap / p.message_dim)
            throw dim_cap_error("majority_repeat: message dimension exceeds dim_cap");
        dim *= p.message_dim;
    }
    OneWayProtocol out;
    out.name = p.name + "_maj" + std::to_string(times);
    out.n = p.n;
    out.message_dim = dim;
    out.message = [p, times](const std::string& x) {
        Vec m = p.message(x);
        Vec acc = m;
        for (int t = 1; t < times; ++t) acc = kron_vec(acc, m);
        return acc;
    };
    out.accept_povm = [p, times, dim](const std::string& y) {
        Mat m1 = p.accept_povm(y);
        Mat m0 = Mat::Identity(m1.rows(), m1.cols()) - m1;
        Mat acc = Mat::Zero(dim, dim);
        for (std::uint64_t mask = 0; mask < (1ULL << times); ++mask) {
            if (2 * __builtin_popcountll(mask) <= times) continue;  // strict majority of 1s
            Mat term = Mat::Ones(1, 1);
            for (int t = 0; t < times; ++t)
                term = kron(term, (mask & (1ULL << t)) ? m1 : m0);
            acc += term;
        }
        return acc;
    };
    auto majority_prob = [times](double q) {
        // P[Binomial(times, q) > times/2]
        double total = 0.0;
        for (int successes = times / 2 + 1; successes <= times; ++successes) {
            double term = static_cast<double>(binomial(times, successes));
            term *= std::pow(q, successes) * std::pow(1.0 - q, times - successes);
            total += term;
        }
        return total;
    };
    out.completeness = majority_prob(p.completeness);
    out.soundness = majority_prob(p.soundness);
    return out;
}

Mat unitary_preparing(const Vec& target) {
    const std::int64_t dim = target.size();
    Mat u = Mat::Identity(dim, dim);
    Vec v = target.normalized();
    // Householder-like completion: reflect e0 onto v.
    Vec e0 = Vec::Zero(dim);
    e0(0) = 1.0;
    cplx overlap = v.dot(e0);
    cplx phase = (std::abs(overlap) > 1e-14) ? overlap / std::abs(overlap) : cplx(1.0, 0.0);
    Vec w = v - phase * e0;
    double wn = w.norm();
    if (wn < 1e-14) {
        u = phase * Mat::Identity(dim, dim);
        return u;
    }
    w /= wn;
    Mat h = Mat::Identity(dim, dim) - 2.0 * (w * w.adjoint());
    // h maps phase*e0 to v; fold the phase into the first column.
    Mat out = h;
    out.col(0) *= phase;
    // ensure exact first column
    out.col(0) = v;
    // re-orthonormalize to wash out rounding
    Eigen::HouseholderQR<Mat> qr(out);
    Mat q = qr.householderQ();
    Mat r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (std::int64_t i = 0; i < dim; ++i) {
        cplx d = r(i, i);
        q.col(i) *= (std::abs(d) > 1e-14) ? d / std::abs(d) : cplx(1.0, 0.0);
    }
    return q;
}

OneWayQmaProtocol wrap_oneway_as_qma(const OneWayProtocol& p) {
    OneWayQmaProtocol q;
    q.name = p.name + "_as_qma";
    q.n = p.n;
    q.proof_dim = 1;
    q.ancilla_dim = p.message_dim;
    q.alice_unitary = [p](const std::string& x) { return unitary_preparing(p.message(x)); };
    q.accept_povm = [p](const std::string& y) { return p.accept_povm(y); };
    q.honest_proof = [](const std::string&, const std::string&) {
        return Vec::Ones(1);
    };
    q.completeness = p.completeness;
    q.soundness = p.soundness;
    return q;
}

Mat one_way_qma_accept_operator(const OneWayQmaProtocol& q, const std::string& x,
                                const std::string& y) {
    Mat u = q.alice_unitary(x);
    Mat m = q.accept_povm(y);
    const std::int64_t dim = q.message_dim();
    if (u.rows() != dim || m.rows() != dim)
        throw layout_error("one_way_qma: operator dimensions mismatch");
    Mat compressed = u.adjoint() * m * u;
    // contract the ancilla |0> on the second factor
    Mat out = Mat::Zero(q.proof_dim, q.proof_dim);
    const std::int64_t a = q.ancilla_dim;
    for (std::int64_t r = 0; r < q.proof_dim; ++r)
        for (std::int64_t c = 0; c < q.proof_dim; ++c) out(r, c) = compressed(r * a, c * a);
    return out;
}

double one_way_qma_value(const OneWayQmaProtocol& q, const std::string& x,
                         const std::string& y) {
    Mat op = one_way_qma_accept_operator(q, x, y);
    Eigen::SelfAdjointEigenSolver<Mat> es(op, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

OneWayQmaProtocol proof_assisted_eq_qma(const FingerprintScheme& scheme) {
    if (scheme.n > 4)
        throw layout_error("proof_assisted_eq_qma: exhaustive soundness needs n <= 4");
    const std::int64_t d = scheme.state_dimension;

    // Ancilla = (result qubit, reference register); full space in the order
    // proof (x) result (x) reference.
    const std::int64_t full = d * 2 * d;

    auto swap_test_circuit = [d, full]() {
        // H on result, controlled SWAP(reference, proof), H on result.
        Mat had = Mat::Zero(2, 2);
        had << 1, 1, 1, -1;
        had /= std::sqrt(2.0);
        // index = (p * 2 + r) * d + a  with p proof, r result, a reference
        Mat h_emb = Mat::Zero(full, full);
        for (std::int64_t p = 0; p < d; ++p)
            for (std::int64_t a = 0; a < d; ++a)
                for (int r1 = 0; r1 < 2; ++r1)
                    for (int r2 = 0; r2 < 2; ++r2)
                        h_emb((p * 2 + r1) * d + a, (p * 2 + r2) * d + a) = had(r1, r2);
        Mat cswap = Mat::Zero(full, full);
        for (std::int64_t p = 0; p < d; ++p)
            for (std::int64_t a = 0; a < d; ++a) {
                cswap((p * 2 + 0) * d + a, (p * 2 + 0) * d + a) = 1.0;
                cswap((a * 2 + 1) * d + p, (p * 2 + 1) * d + a) = 1.0;
            }
        return Mat(h_emb * cswap * h_emb);
    };

    OneWayQmaProtocol q;
    q.name = "eq_proof_assisted";
    q.n = scheme.n;
    q.proof_dim = d;
    q.ancilla_dim = 2 * d;
    Mat circuit = swap_test_circuit();
    q.alice_unitary = [scheme, d, circuit](const std::string& x) {
        // load |h_x> into the reference register (from |0>), then run the
        // swap-test circuit against the proof
        Mat w = unitary_preparing(fingerprint_amplitudes(scheme, x));
        const std::int64_t full = d * 2 * d;
        Mat load = Mat::Zero(full, full);
        for (std::int64_t p = 0; p < d; ++p)
            for (int r = 0; r < 2; ++r)
                for (std::int64_t a1 = 0; a1 < d; ++a1)
                    for (std::int64_t a2 = 0; a2 < d; ++a2)
                        load((p * 2 + r) * d + a1, (p * 2 + r) * d + a2) = w(a1, a2);
        return Mat(circuit * load);
    };
    q.accept_povm = [scheme, d](const std::string& y) {
        // result qubit must read 0, and the forwarded proof register must
        // pass a SWAP test against |h_y>: operator (1/2)(I + |h_y><h_y|).
        Vec h = fingerprint_amplitudes(scheme, y);
        Mat check = 0.5 * (Mat::Identity(d, d) + Mat(h * h.adjoint()));
        const std::int64_t full = d * 2 * d;
        Mat m = Mat::Zero(full, full);
        for (std::int64_t p1 = 0; p1 < d; ++p1)
            for (std::int64_t p2 = 0; p2 < d; ++p2)
                for (std::int64_t a = 0; a < d; ++a)
                    m((p1 * 2 + 0) * d + a, (p2 * 2 + 0) * d + a) = check(p1, p2);
        return m;
    };
    q.honest_proof = [scheme](const std::string& x, const std::string&) {
        return fingerprint_amplitudes(scheme, x);
    };
    q.completeness = 1.0;

    double worst = 0.0;
    for (std::uint64_t xv = 0; xv < (1ULL << scheme.n); ++xv)
        for (std::uint64_t yv = 0; yv < (1ULL << scheme.n); ++yv) {
            if (xv == yv) continue;
            worst = std::max(worst,
                             one_way_qma_value(q, to_bits(xv, scheme.n), to_bits(yv, scheme.n)));
        }
    q.soundness = worst;
    return q;
}

}  // namespace dqma
