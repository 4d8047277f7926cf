#pragma once

#include "dqma/qcore.hpp"
#include "dqma/random.hpp"

#include <string>
#include <vector>

namespace dqma::testing {

inline RegisterLayout make_layout(const std::vector<std::int64_t>& dims,
                                  const std::string& prefix = "q") {
    std::vector<RegisterSpec> regs;
    for (size_t i = 0; i < dims.size(); ++i)
        regs.push_back({prefix + std::to_string(i), dims[i], "prover", RegisterRole::proof});
    return RegisterLayout(regs, kStateDimCap);
}

inline StateVector basis_state(const RegisterLayout& layout, std::int64_t index) {
    Vec v = Vec::Zero(layout.total_dimension());
    v(index) = 1.0;
    return StateVector(layout, std::move(v));
}

inline double max_abs_diff(const Mat& a, const Mat& b) {
    return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace dqma::testing
