#pragma once

// Built-in verification suite: every module's invariants re-checked at
// fixed seeds, reported one line per check. Checks whose spaces exceed the
// configured dim_cap are skipped, not failed.

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace dqma {

struct SelfTestCheck {
    std::string name;
    std::int64_t required_dim_cap = 0;
    std::function<void()> run;  // throws on failure with a reason
};

struct SelfTestResult {
    std::string name;
    std::string status;  // "pass", "fail", "skip"
    std::string detail;
    double seconds = 0.0;
};

struct SelfTestReport {
    std::vector<SelfTestResult> results;
    int passed = 0, failed = 0, skipped = 0;
    bool ok() const { return failed == 0; }
};

std::vector<SelfTestCheck> selftest_checks(std::uint64_t seed, std::int64_t dim_cap);
SelfTestReport run_selftest(std::uint64_t seed, std::int64_t dim_cap, std::ostream& out,
                            int threads = 1);

}  // namespace dqma
