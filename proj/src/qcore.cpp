#include "dqma/qcore.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <set>

namespace dqma {

std::string to_string(RegisterRole role) {
    switch (role) {
        case RegisterRole::proof: return "proof";
        case RegisterRole::prepared: return "prepared";
        case RegisterRole::ancilla: return "ancilla";
    }
    return "proof";
}

RegisterRole register_role_from_string(const std::string& s) {
    if (s == "proof") return RegisterRole::proof;
    if (s == "prepared") return RegisterRole::prepared;
    if (s == "ancilla") return RegisterRole::ancilla;
    throw layout_error("unknown register role: " + s);
}

RegisterLayout::RegisterLayout() = default;

RegisterLayout::RegisterLayout(std::vector<RegisterSpec> regs, std::int64_t dim_cap)
    : regs_(std::move(regs)) {
    total_dim_ = 1;
    for (int i = 0; i < size(); ++i) {
        const auto& r = regs_[i];
        if (r.dim < 1) throw layout_error("register dimension must be >= 1: " + r.id);
        if (index_.count(r.id)) throw layout_error("duplicate register id: " + r.id);
        index_[r.id] = i;
        if (total_dim_ > dim_cap / r.dim)
            throw dim_cap_error("layout dimension exceeds cap " + std::to_string(dim_cap));
        total_dim_ *= r.dim;
    }
    strides_.assign(regs_.size(), 1);
    for (int i = size() - 2; i >= 0; --i) strides_[i] = strides_[i + 1] * regs_[i + 1].dim;
}

bool RegisterLayout::contains(const std::string& id) const { return index_.count(id) > 0; }

int RegisterLayout::position(const std::string& id) const {
    auto it = index_.find(id);
    if (it == index_.end()) throw layout_error("unknown register id: " + id);
    return it->second;
}

std::vector<int> RegisterLayout::positions(const std::vector<std::string>& ids) const {
    std::vector<int> out;
    out.reserve(ids.size());
    for (const auto& id : ids) out.push_back(position(id));
    return out;
}

RegisterLayout RegisterLayout::subset(const std::vector<std::string>& ids,
                                      std::int64_t dim_cap) const {
    std::vector<RegisterSpec> regs;
    regs.reserve(ids.size());
    for (const auto& id : ids) regs.push_back(regs_[position(id)]);
    return RegisterLayout(std::move(regs), dim_cap);
}

RegisterLayout RegisterLayout::without(const std::vector<std::string>& ids,
                                       std::int64_t dim_cap) const {
    std::set<int> drop;
    for (const auto& id : ids) drop.insert(position(id));
    std::vector<RegisterSpec> regs;
    for (int i = 0; i < size(); ++i)
        if (!drop.count(i)) regs.push_back(regs_[i]);
    return RegisterLayout(std::move(regs), dim_cap);
}

RegisterLayout RegisterLayout::concat(const RegisterLayout& a, const RegisterLayout& b,
                                      std::int64_t dim_cap) {
    std::vector<RegisterSpec> regs = a.regs_;
    regs.insert(regs.end(), b.regs_.begin(), b.regs_.end());
    return RegisterLayout(std::move(regs), dim_cap);
}

bool RegisterLayout::same_shape(const RegisterLayout& other) const {
    if (size() != other.size()) return false;
    for (int i = 0; i < size(); ++i)
        if (regs_[i].dim != other.regs_[i].dim) return false;
    return true;
}

void RegisterLayout::decompose(std::int64_t index, std::vector<std::int64_t>& digits) const {
    digits.resize(regs_.size());
    for (int i = 0; i < size(); ++i) {
        digits[i] = index / strides_[i];
        index %= strides_[i];
    }
}

std::int64_t RegisterLayout::compose(const std::vector<std::int64_t>& digits) const {
    std::int64_t idx = 0;
    for (int i = 0; i < size(); ++i) idx += digits[i] * strides_[i];
    return idx;
}

StateVector::StateVector(RegisterLayout lay, Vec amps)
    : layout(std::move(lay)), amplitudes(std::move(amps)) {
    if (amplitudes.size() != layout.total_dimension())
        throw layout_error("state vector length does not match layout dimension");
    if (std::abs(amplitudes.norm() - 1.0) > kStructuralTol)
        throw numeric_error("state vector is not normalized");
}

DensityOperator::DensityOperator(RegisterLayout lay, Mat m)
    : layout(std::move(lay)), matrix(std::move(m)) {
    const auto d = layout.total_dimension();
    if (matrix.rows() != d || matrix.cols() != d)
        throw layout_error("density matrix shape does not match layout");
    if (!is_hermitian(matrix)) throw numeric_error("density matrix is not Hermitian");
    if (std::abs(matrix.trace().real() - 1.0) > kStructuralTol ||
        std::abs(matrix.trace().imag()) > kStructuralTol)
        throw numeric_error("density matrix trace is not 1");
    // Full positivity check is an eigensolve; keep it for modest dimensions
    // and rely on the cheap diagonal necessary condition above that.
    if (d <= 512) {
        Eigen::SelfAdjointEigenSolver<Mat> es(matrix, Eigen::EigenvaluesOnly);
        if (es.eigenvalues().minCoeff() < -kStructuralTol)
            throw numeric_error("density matrix has a negative eigenvalue");
    } else {
        for (std::int64_t i = 0; i < d; ++i)
            if (matrix(i, i).real() < -kStructuralTol)
                throw numeric_error("density matrix has a negative diagonal entry");
    }
}

DensityOperator DensityOperator::from_state(const StateVector& psi) {
    return DensityOperator(psi.layout, psi.amplitudes * psi.amplitudes.adjoint());
}

HermitianOperator::HermitianOperator(RegisterLayout lay, Mat m)
    : layout(std::move(lay)), matrix(std::move(m)) {
    const auto d = layout.total_dimension();
    if (matrix.rows() != d || matrix.cols() != d)
        throw layout_error("operator shape does not match layout");
    if (!is_hermitian(matrix)) throw numeric_error("operator is not Hermitian");
}

bool HermitianOperator::is_povm_element(double tol) const {
    Eigen::SelfAdjointEigenSolver<Mat> es(matrix, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff() >= -tol && es.eigenvalues().maxCoeff() <= 1.0 + tol;
}

MixingChannel::MixingChannel(std::vector<std::string> regs, std::vector<Branch> br)
    : registers(std::move(regs)), branches(std::move(br)) {
    double total = 0.0;
    for (const auto& b : branches) {
        if (b.probability < 0.0 || b.probability > 1.0)
            throw numeric_error("channel branch probability out of range");
        if (!is_unitary(b.unitary)) throw numeric_error("channel branch matrix is not unitary");
        total += b.probability;
    }
    if (std::abs(total - 1.0) > kProbabilitySumTol)
        throw numeric_error("channel branch probabilities do not sum to 1");
}

// ---- tensor / partial trace ----

namespace {

RegisterLayout merged_layout(const RegisterLayout& a, const RegisterLayout& b) {
    return RegisterLayout::concat(a, b, kStateDimCap);
}

}  // namespace

StateVector tensor(const StateVector& a, const StateVector& b) {
    return StateVector(merged_layout(a.layout, b.layout),
                       kron_vec(a.amplitudes, b.amplitudes));
}

DensityOperator tensor(const DensityOperator& a, const DensityOperator& b) {
    return DensityOperator(merged_layout(a.layout, b.layout), kron(a.matrix, b.matrix));
}

HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b) {
    return HermitianOperator(merged_layout(a.layout, b.layout), kron(a.matrix, b.matrix));
}

namespace {

// Shared partial-trace kernel; keeps the named registers in layout order.
Mat partial_trace_kernel(const Mat& m, const RegisterLayout& layout,
                         const std::vector<std::string>& keep, RegisterLayout& out_layout) {
    std::set<int> keep_pos;
    for (const auto& id : keep) keep_pos.insert(layout.position(id));

    std::vector<std::string> kept_ids, traced_ids;
    for (int i = 0; i < layout.size(); ++i) {
        if (keep_pos.count(i))
            kept_ids.push_back(layout.spec(i).id);
        else
            traced_ids.push_back(layout.spec(i).id);
    }
    out_layout = layout.subset(kept_ids, kStateDimCap);

    std::vector<int> kept(keep_pos.begin(), keep_pos.end());
    std::vector<int> traced;
    for (int i = 0; i < layout.size(); ++i)
        if (!keep_pos.count(i)) traced.push_back(i);

    SubsetIndexer keep_ix(layout, kept);
    std::int64_t keep_dim = keep_ix.sub_dim;
    std::int64_t trace_dim = layout.total_dimension() / keep_dim;

    // Offsets of the traced registers' joint indices.
    SubsetIndexer trace_ix(layout, traced);

    Mat out = Mat::Zero(keep_dim, keep_dim);
    for (std::int64_t t = 0; t < trace_dim; ++t) {
        std::int64_t base = trace_ix.sub_offsets[t];
        for (std::int64_t r = 0; r < keep_dim; ++r) {
            std::int64_t row = base + keep_ix.sub_offsets[r];
            for (std::int64_t c = 0; c < keep_dim; ++c)
                out(r, c) += m(row, base + keep_ix.sub_offsets[c]);
        }
    }
    return out;
}

}  // namespace

DensityOperator partial_trace(const DensityOperator& op,
                              const std::vector<std::string>& keep) {
    RegisterLayout out_layout;
    Mat m = partial_trace_kernel(op.matrix, op.layout, keep, out_layout);
    return DensityOperator(std::move(out_layout), std::move(m));
}

HermitianOperator partial_trace(const HermitianOperator& op,
                                const std::vector<std::string>& keep) {
    RegisterLayout out_layout;
    Mat m = partial_trace_kernel(op.matrix, op.layout, keep, out_layout);
    return HermitianOperator(std::move(out_layout), std::move(m));
}

// ---- distances ----

double trace_distance(const DensityOperator& rho, const DensityOperator& sigma) {
    if (!rho.layout.same_shape(sigma.layout))
        throw layout_error("trace_distance: layout mismatch");
    Eigen::SelfAdjointEigenSolver<Mat> es(rho.matrix - sigma.matrix, Eigen::EigenvaluesOnly);
    return 0.5 * es.eigenvalues().cwiseAbs().sum();
}

double fidelity(const DensityOperator& rho, const DensityOperator& sigma) {
    if (!rho.layout.same_shape(sigma.layout))
        throw layout_error("fidelity: layout mismatch");
    // tr sqrt(sqrt(rho) sigma sqrt(rho)) equals the nuclear norm of
    // sqrt(rho) sqrt(sigma); the latter avoids squaring rounding errors on
    // rank-deficient inputs.
    Mat product = sqrt_psd(rho.matrix) * sqrt_psd(sigma.matrix);
    Eigen::JacobiSVD<Mat> svd(product);
    double f = svd.singularValues().sum();
    return std::min(f, 1.0 + kStructuralTol);
}

// ---- channels ----

DensityOperator apply_channel(const MixingChannel& ch, const DensityOperator& rho) {
    SubsetIndexer ix(rho.layout, rho.layout.positions(ch.registers));
    Mat out = Mat::Zero(rho.matrix.rows(), rho.matrix.cols());
    for (const auto& b : ch.branches) {
        if (b.unitary.rows() != ix.sub_dim)
            throw layout_error("channel unitary dimension mismatch");
        Mat term = rho.matrix;
        conjugate_subset(term, b.unitary, ix);
        out += b.probability * term;
    }
    return DensityOperator(rho.layout, std::move(out));
}

HermitianOperator apply_channel_adjoint(const MixingChannel& ch,
                                        const HermitianOperator& op) {
    SubsetIndexer ix(op.layout, op.layout.positions(ch.registers));
    Mat out = Mat::Zero(op.matrix.rows(), op.matrix.cols());
    for (const auto& b : ch.branches) {
        if (b.unitary.rows() != ix.sub_dim)
            throw layout_error("channel unitary dimension mismatch");
        Mat term = op.matrix;
        conjugate_subset(term, b.unitary.adjoint(), ix);
        out += b.probability * term;
    }
    return HermitianOperator(op.layout, std::move(out));
}

StateVector apply_unitary_branch(const MixingChannel& ch, int branch,
                                 const StateVector& psi) {
    SubsetIndexer ix(psi.layout, psi.layout.positions(ch.registers));
    Vec amps = psi.amplitudes;
    apply_subset_unitary(amps, ch.branches.at(branch).unitary, ix);
    return StateVector(psi.layout, std::move(amps));
}

// ---- eigenpair ----

namespace {

constexpr std::int64_t kDenseEigenThreshold = 1200;

std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

Vec deterministic_start_vector(std::int64_t dim) {
    std::uint64_t s = 0x5eed0f01ULL ^ static_cast<std::uint64_t>(dim);
    Vec v(dim);
    for (std::int64_t i = 0; i < dim; ++i) {
        double re = static_cast<double>(splitmix64(s) >> 11) / 9007199254740992.0 - 0.5;
        double im = static_cast<double>(splitmix64(s) >> 11) / 9007199254740992.0 - 0.5;
        v(i) = cplx(re, im);
    }
    v.normalize();
    return v;
}

EigenPair lanczos_top(const HermitianOperator& op) {
    const Mat& a = op.matrix;
    const std::int64_t dim = a.rows();
    const int max_iter = 400;

    std::vector<Vec> basis;
    std::vector<double> alpha, beta;
    Vec v = deterministic_start_vector(dim);
    basis.push_back(v);

    auto ritz_pair = [&](int m) -> std::pair<double, Eigen::VectorXd> {
        Eigen::MatrixXd t = Eigen::MatrixXd::Zero(m, m);
        for (int i = 0; i < m; ++i) {
            t(i, i) = alpha[i];
            if (i + 1 < m) {
                t(i, i + 1) = beta[i];
                t(i + 1, i) = beta[i];
            }
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(t);
        int last = m - 1;
        return {es.eigenvalues()(last), es.eigenvectors().col(last)};
    };

    for (int j = 0; j < max_iter; ++j) {
        Vec w = a * basis[j];
        if (j > 0) w -= beta[j - 1] * basis[j - 1];
        alpha.push_back(basis[j].dot(w).real());
        w -= alpha[j] * basis[j];
        // full reorthogonalization keeps the basis numerically orthonormal
        for (const auto& u : basis) w -= u.dot(w) * u;
        double b = w.norm();

        const int m = j + 1;
        bool invariant = b < 1e-13;
        if (invariant || m >= 8 || m == max_iter) {
            auto [theta, y] = ritz_pair(m);
            double residual_est = invariant ? 0.0 : b * std::abs(y(m - 1));
            if (invariant || residual_est < 1e-11 || m == max_iter) {
                Vec x = Vec::Zero(dim);
                for (int i = 0; i < m; ++i) x += y(i) * basis[i];
                x.normalize();
                double lam = (x.dot(a * x)).real();
                if ((a * x - lam * x).norm() <= kEigenResidualTol)
                    return {lam, StateVector(op.layout, x)};
                if (m == max_iter)
                    throw numeric_error("top_eigenpair: Lanczos failed to converge");
            }
        }
        if (invariant) {
            // invariant subspace hit before convergence: restart deflated
            Vec r = deterministic_start_vector(dim);
            for (const auto& u : basis) r -= u.dot(r) * u;
            if (r.norm() < 1e-12) break;
            w = r;
            b = w.norm();
        }
        beta.push_back(b);
        basis.push_back(w / b);
    }
    throw numeric_error("top_eigenpair: Lanczos failed to converge");
}

}  // namespace

EigenPair top_eigenpair(const HermitianOperator& op) {
    const std::int64_t dim = op.matrix.rows();
    if (dim <= kDenseEigenThreshold) {
        Eigen::SelfAdjointEigenSolver<Mat> es(op.matrix);
        if (es.info() != Eigen::Success)
            throw numeric_error("top_eigenpair: dense eigensolver failed");
        const auto last = dim - 1;
        double lam = es.eigenvalues()(last);
        Vec v = es.eigenvectors().col(last);
        if ((op.matrix * v - lam * v).norm() > kEigenResidualTol)
            throw numeric_error("top_eigenpair: residual above tolerance");
        return {lam, StateVector(op.layout, std::move(v))};
    }
    return lanczos_top(op);
}

double expectation(const HermitianOperator& op, const DensityOperator& rho) {
    if (!op.layout.same_shape(rho.layout))
        throw layout_error("expectation: layout mismatch");
    return (op.matrix * rho.matrix).trace().real();
}

double expectation(const HermitianOperator& op, const StateVector& psi) {
    if (!op.layout.same_shape(psi.layout))
        throw layout_error("expectation: layout mismatch");
    return psi.amplitudes.dot(op.matrix * psi.amplitudes).real();
}

// ---- raw helpers ----

Mat kron(const Mat& a, const Mat& b) {
    Mat out(a.rows() * b.rows(), a.cols() * b.cols());
    for (Eigen::Index i = 0; i < a.rows(); ++i)
        for (Eigen::Index j = 0; j < a.cols(); ++j)
            out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    return out;
}

Vec kron_vec(const Vec& a, const Vec& b) {
    Vec out(a.size() * b.size());
    for (Eigen::Index i = 0; i < a.size(); ++i)
        out.segment(i * b.size(), b.size()) = a(i) * b;
    return out;
}

Mat sqrt_psd(const Mat& m) {
    Eigen::SelfAdjointEigenSolver<Mat> es(m);
    if (es.info() != Eigen::Success) throw numeric_error("sqrt_psd: eigensolver failed");
    Vec d(es.eigenvalues().size());
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        double ev = es.eigenvalues()(i);
        if (ev < -kStructuralTol) throw numeric_error("sqrt_psd: matrix not PSD");
        d(i) = std::sqrt(std::max(0.0, ev));
    }
    return es.eigenvectors() * d.asDiagonal() * es.eigenvectors().adjoint();
}

bool is_unitary(const Mat& u, double tol) {
    if (u.rows() != u.cols()) return false;
    return (u.adjoint() * u - Mat::Identity(u.rows(), u.cols())).cwiseAbs().maxCoeff() <= tol;
}

bool is_hermitian(const Mat& m, double tol) {
    if (m.rows() != m.cols()) return false;
    return (m - m.adjoint()).cwiseAbs().maxCoeff() <= tol;
}

SubsetIndexer::SubsetIndexer(const RegisterLayout& layout,
                             const std::vector<int>& positions) {
    sub_dim = 1;
    for (int p : positions) sub_dim *= layout.dim(p);

    sub_offsets.resize(sub_dim);
    for (std::int64_t s = 0; s < sub_dim; ++s) {
        std::int64_t rem = s, off = 0;
        for (int k = static_cast<int>(positions.size()) - 1; k >= 0; --k) {
            std::int64_t d = layout.dim(positions[k]);
            off += (rem % d) * layout.stride(positions[k]);
            rem /= d;
        }
        sub_offsets[s] = off;
    }

    std::set<int> in_subset(positions.begin(), positions.end());
    std::int64_t rest_dim = layout.total_dimension() / sub_dim;
    base_offsets.resize(rest_dim);
    std::int64_t r = 0;
    std::vector<std::int64_t> digits;
    for (std::int64_t full = 0; full < layout.total_dimension(); ++full) {
        layout.decompose(full, digits);
        bool zeroed = true;
        for (int p : in_subset)
            if (digits[p] != 0) { zeroed = false; break; }
        if (zeroed) base_offsets[r++] = full;
    }
}

namespace {

// Permutation-matrix detection: u e_s = e_perm[s]; permutation unitaries
// dominate the protocol channels and admit index-remap fast paths.
bool as_permutation(const Mat& u, std::vector<std::int64_t>& perm) {
    const std::int64_t n = u.rows();
    perm.assign(n, -1);
    for (std::int64_t c = 0; c < n; ++c) {
        std::int64_t hit = -1;
        for (std::int64_t r = 0; r < n; ++r) {
            cplx v = u(r, c);
            if (std::abs(v) < 1e-14) continue;
            if (hit >= 0 || std::abs(v - cplx(1.0, 0.0)) > 1e-14) return false;
            hit = r;
        }
        if (hit < 0) return false;
        perm[c] = hit;
    }
    return true;
}

// Dense full-space destination map of a subset permutation.
std::vector<std::int64_t> full_index_map(const SubsetIndexer& ix,
                                         const std::vector<std::int64_t>& perm,
                                         std::int64_t dim) {
    std::vector<std::int64_t> map(dim);
    for (std::int64_t base : ix.base_offsets)
        for (std::int64_t s = 0; s < ix.sub_dim; ++s)
            map[base + ix.sub_offsets[s]] = base + ix.sub_offsets[perm[s]];
    return map;
}

}  // namespace

void apply_subset_unitary(Vec& psi, const Mat& u, const SubsetIndexer& ix) {
    const std::int64_t ds = ix.sub_dim;
    std::vector<std::int64_t> perm;
    if (as_permutation(u, perm)) {
        if (std::is_sorted(perm.begin(), perm.end())) return;  // identity
        Vec out(psi.size());
        for (std::int64_t base : ix.base_offsets)
            for (std::int64_t s = 0; s < ds; ++s)
                out(base + ix.sub_offsets[perm[s]]) = psi(base + ix.sub_offsets[s]);
        psi.swap(out);
        return;
    }
    Vec scratch(ds);
    for (std::int64_t base : ix.base_offsets) {
        for (std::int64_t s = 0; s < ds; ++s) scratch(s) = psi(base + ix.sub_offsets[s]);
        Vec res = u * scratch;
        for (std::int64_t s = 0; s < ds; ++s) psi(base + ix.sub_offsets[s]) = res(s);
    }
}

void apply_subset_operator(Vec& psi, const Mat& op, const SubsetIndexer& ix) {
    apply_subset_unitary(psi, op, ix);  // same gather/scatter, op need not be unitary
}

void left_apply_subset(Mat& m, const Mat& op, const SubsetIndexer& ix) {
    const std::int64_t ds = ix.sub_dim;
    const Eigen::Index cols = m.cols();
    Mat scratch(ds, cols), res(ds, cols);
    for (std::int64_t base : ix.base_offsets) {
        // gather column-wise: column storage keeps the strided row reads
        // within one cached column at a time
        for (Eigen::Index c = 0; c < cols; ++c)
            for (std::int64_t s = 0; s < ds; ++s)
                scratch(s, c) = m(base + ix.sub_offsets[s], c);
        res.noalias() = op * scratch;
        for (Eigen::Index c = 0; c < cols; ++c)
            for (std::int64_t s = 0; s < ds; ++s)
                m(base + ix.sub_offsets[s], c) = res(s, c);
    }
}

void conjugate_subset(Mat& m, const Mat& u, const SubsetIndexer& ix) {
    std::vector<std::int64_t> perm;
    if (as_permutation(u, perm)) {
        if (std::is_sorted(perm.begin(), perm.end())) return;  // identity
        auto map = full_index_map(ix, perm, m.rows());
        Mat out(m.rows(), m.cols());
        for (Eigen::Index c = 0; c < m.cols(); ++c) {
            const Eigen::Index mc = map[c];
            for (Eigen::Index r = 0; r < m.rows(); ++r) out(map[r], mc) = m(r, c);
        }
        m.swap(out);
        return;
    }
    left_apply_subset(m, u, ix);
    // columns: m <- m * u^dag
    const std::int64_t ds = ix.sub_dim;
    const Eigen::Index rows = m.rows();
    Mat scratch(rows, ds), res(rows, ds);
    Mat udag = u.adjoint();
    for (std::int64_t base : ix.base_offsets) {
        for (std::int64_t s = 0; s < ds; ++s) scratch.col(s) = m.col(base + ix.sub_offsets[s]);
        res.noalias() = scratch * udag;
        for (std::int64_t s = 0; s < ds; ++s) m.col(base + ix.sub_offsets[s]) = res.col(s);
    }
}

double subset_expectation(const Vec& psi, const Mat& op, const SubsetIndexer& ix) {
    const std::int64_t ds = ix.sub_dim;
    Vec scratch(ds);
    double acc = 0.0;
    for (std::int64_t base : ix.base_offsets) {
        for (std::int64_t s = 0; s < ds; ++s) scratch(s) = psi(base + ix.sub_offsets[s]);
        acc += scratch.dot(op * scratch).real();
    }
    return acc;
}

Mat contract_pure(const Mat& m, const RegisterLayout& layout,
                  const std::vector<std::pair<int, Vec>>& fixed) {
    std::vector<int> fixed_pos, free_pos;
    for (const auto& [p, v] : fixed) {
        if (layout.dim(p) != v.size())
            throw layout_error("contract_pure: state dimension mismatch");
        fixed_pos.push_back(p);
    }
    std::set<int> fset(fixed_pos.begin(), fixed_pos.end());
    if (fset.size() != fixed_pos.size())
        throw layout_error("contract_pure: repeated register position");
    for (int i = 0; i < layout.size(); ++i)
        if (!fset.count(i)) free_pos.push_back(i);

    SubsetIndexer fix_ix(layout, fixed_pos);
    SubsetIndexer free_ix(layout, free_pos);

    // Joint amplitude of each fixed-subset basis index.
    Vec w = Vec::Ones(1);
    for (const auto& [p, v] : fixed) {
        (void)p;
        w = kron_vec(w, v);
    }

    const std::int64_t df = free_ix.sub_dim;
    const std::int64_t dx = fix_ix.sub_dim;
    Mat out = Mat::Zero(df, df);
    for (std::int64_t a = 0; a < dx; ++a) {
        if (std::abs(w(a)) < 1e-300) continue;
        for (std::int64_t b = 0; b < dx; ++b) {
            if (std::abs(w(b)) < 1e-300) continue;
            cplx coeff = std::conj(w(a)) * w(b);
            for (std::int64_t r = 0; r < df; ++r) {
                std::int64_t row = fix_ix.sub_offsets[a] + free_ix.sub_offsets[r];
                for (std::int64_t c = 0; c < df; ++c)
                    out(r, c) += coeff * m(row, fix_ix.sub_offsets[b] + free_ix.sub_offsets[c]);
            }
        }
    }
    return out;
}

std::string format_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*g", kReportDigits, v);
    return buf;
}

}  // namespace dqma
