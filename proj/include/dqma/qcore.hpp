#pragma once

// Complex linear algebra over multi-register Hilbert spaces: register
// layouts, states, operators, mixing channels, tensor composition,
// partial trace and distance measures.

#include <Eigen/Dense>

#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

namespace dqma {

using cplx = std::complex<double>;
using Mat = Eigen::MatrixXcd;
using Vec = Eigen::VectorXcd;

// Centralized tolerances. Structural checks (Hermiticity, norms, traces)
// use kStructuralTol; the eigen-solver residual gate is kEigenResidualTol;
// reported numerics carry kReportDigits significant digits.
inline constexpr double kStructuralTol = 1e-9;
inline constexpr double kEigenResidualTol = 1e-8;
inline constexpr double kProbabilitySumTol = 1e-12;
inline constexpr int kReportDigits = 12;

// Operator-bearing layouts are capped at kDefaultDimCap (configurable per
// call site). Joint pipeline layouts that only ever back state vectors are
// capped at kStateDimCap.
inline constexpr std::int64_t kDefaultDimCap = 4096;
inline constexpr std::int64_t kStateDimCap = std::int64_t(1) << 20;

struct dim_cap_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct layout_error : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};
struct numeric_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

enum class RegisterRole { proof, prepared, ancilla };

std::string to_string(RegisterRole role);
RegisterRole register_role_from_string(const std::string& s);

struct RegisterSpec {
    std::string id;
    std::int64_t dim = 1;
    std::string owner;  // node id or "prover"
    RegisterRole role = RegisterRole::proof;
};

// An ordered list of registers fixing the factorization of a joint Hilbert
// space. The order is canonical: basis index = sum_i digit_i * stride_i with
// the first register most significant. Tensor products never reorder.
class RegisterLayout {
  public:
    RegisterLayout();  // zero registers, total dimension 1
    explicit RegisterLayout(std::vector<RegisterSpec> regs,
                            std::int64_t dim_cap = kDefaultDimCap);

    int size() const { return static_cast<int>(regs_.size()); }
    std::int64_t total_dimension() const { return total_dim_; }
    const RegisterSpec& spec(int i) const { return regs_.at(i); }
    const std::vector<RegisterSpec>& registers() const { return regs_; }
    std::int64_t dim(int i) const { return regs_.at(i).dim; }
    std::int64_t stride(int i) const { return strides_.at(i); }

    bool contains(const std::string& id) const;
    int position(const std::string& id) const;  // throws layout_error if absent
    std::vector<int> positions(const std::vector<std::string>& ids) const;

    // Sub-layout of the named registers, in the order given.
    RegisterLayout subset(const std::vector<std::string>& ids,
                          std::int64_t dim_cap = kDefaultDimCap) const;
    // Sub-layout of every register except the named ones, in layout order.
    RegisterLayout without(const std::vector<std::string>& ids,
                           std::int64_t dim_cap = kDefaultDimCap) const;
    static RegisterLayout concat(const RegisterLayout& a, const RegisterLayout& b,
                                 std::int64_t dim_cap = kDefaultDimCap);

    bool same_shape(const RegisterLayout& other) const;

    void decompose(std::int64_t index, std::vector<std::int64_t>& digits) const;
    std::int64_t compose(const std::vector<std::int64_t>& digits) const;

  private:
    std::vector<RegisterSpec> regs_;
    std::vector<std::int64_t> strides_;
    std::int64_t total_dim_ = 1;
    std::unordered_map<std::string, int> index_;
};

// Pure state on a layout; Euclidean norm 1 within kStructuralTol.
struct StateVector {
    RegisterLayout layout;
    Vec amplitudes;

    StateVector() = default;
    StateVector(RegisterLayout lay, Vec amps);
};

// Trace-one positive semidefinite operator on a layout.
struct DensityOperator {
    RegisterLayout layout;
    Mat matrix;

    DensityOperator() = default;
    DensityOperator(RegisterLayout lay, Mat m);
    static DensityOperator from_state(const StateVector& psi);
};

// Hermitian (not necessarily positive) operator on a layout.
struct HermitianOperator {
    RegisterLayout layout;
    Mat matrix;

    HermitianOperator() = default;
    HermitianOperator(RegisterLayout lay, Mat m);

    // POVM element check: spectrum within [-tol, 1 + tol].
    bool is_povm_element(double tol = kStructuralTol) const;
};

// Random-unitary channel rho -> sum_i p_i U_i rho U_i^dag acting on the
// named registers of whatever layout it is applied to. The registers listed
// must have equal total dimension to each branch unitary.
struct MixingChannel {
    struct Branch {
        double probability;
        Mat unitary;
    };
    std::vector<std::string> registers;
    std::vector<Branch> branches;

    MixingChannel() = default;
    MixingChannel(std::vector<std::string> regs, std::vector<Branch> br);
};

// ---- composition and contraction ----

StateVector tensor(const StateVector& a, const StateVector& b);
DensityOperator tensor(const DensityOperator& a, const DensityOperator& b);
HermitianOperator tensor(const HermitianOperator& a, const HermitianOperator& b);

DensityOperator partial_trace(const DensityOperator& op,
                              const std::vector<std::string>& keep);
HermitianOperator partial_trace(const HermitianOperator& op,
                                const std::vector<std::string>& keep);

double trace_distance(const DensityOperator& rho, const DensityOperator& sigma);
double fidelity(const DensityOperator& rho, const DensityOperator& sigma);

DensityOperator apply_channel(const MixingChannel& ch, const DensityOperator& rho);
// Heisenberg picture: M -> sum_i p_i U_i^dag M U_i.
HermitianOperator apply_channel_adjoint(const MixingChannel& ch,
                                        const HermitianOperator& op);
StateVector apply_unitary_branch(const MixingChannel& ch, int branch,
                                 const StateVector& psi);

struct EigenPair {
    double value;
    StateVector vector;
};
// Largest eigenvalue and a unit eigenvector, residual <= kEigenResidualTol.
// Dense solve below an internal threshold, Lanczos above it.
EigenPair top_eigenpair(const HermitianOperator& op);

double expectation(const HermitianOperator& op, const DensityOperator& rho);
double expectation(const HermitianOperator& op, const StateVector& psi);

// ---- raw-matrix helpers shared by the protocol machinery ----

Mat kron(const Mat& a, const Mat& b);
Vec kron_vec(const Vec& a, const Vec& b);

// Hermitian square root with eigenvalue clamping: eigenvalues in
// [-kStructuralTol, 0) clamp to 0, below that is a numeric_error.
Mat sqrt_psd(const Mat& m);

bool is_unitary(const Mat& u, double tol = kStructuralTol);
bool is_hermitian(const Mat& m, double tol = kStructuralTol);

// Action of an operator given on a register subset, without materializing
// the embedded full-space matrix. `positions` lists the register positions
// (in the order matching the small operator's factors) inside `layout`.
struct SubsetIndexer {
    std::vector<std::int64_t> sub_offsets;   // offset of each subset basis index
    std::vector<std::int64_t> base_offsets;  // offsets with subset digits zeroed
    std::int64_t sub_dim = 1;

    SubsetIndexer(const RegisterLayout& layout, const std::vector<int>& positions);
};

void apply_subset_unitary(Vec& psi, const Mat& u, const SubsetIndexer& ix);
// m <- Op_emb * m (rows mixed within subset groups).
void left_apply_subset(Mat& m, const Mat& op, const SubsetIndexer& ix);
// m <- U_emb * m * U_emb^dag.
void conjugate_subset(Mat& m, const Mat& u, const SubsetIndexer& ix);
// <psi| Op_emb |psi> for Hermitian Op on the subset.
double subset_expectation(const Vec& psi, const Mat& op, const SubsetIndexer& ix);
// psi <- K_emb psi (no normalization).
void apply_subset_operator(Vec& psi, const Mat& op, const SubsetIndexer& ix);

// Contraction of an operator on `layout` against fixed pure states on some
// of its registers: (I (x) <phi|) M (I (x) |phi>), returning the operator on
// the remaining registers in layout order.
Mat contract_pure(const Mat& m, const RegisterLayout& layout,
                  const std::vector<std::pair<int, Vec>>& fixed);

std::string format_double(double v);  // kReportDigits significant digits

}  // namespace dqma
