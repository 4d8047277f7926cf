#pragma once

// Extraction of a two-party QMA* communication protocol from a compiled
// path pipeline by cutting at an edge: Alice simulates v_0..v_i, Bob the
// rest, and the crossing message is costed in qubits.

#include "dqma/network.hpp"

#include <nlohmann/json_fwd.hpp>

namespace dqma {

struct TwoPartyQmaModel {
    int cut_index = 0;
    std::vector<std::string> alice_registers;  // proof registers of v_0..v_i
    std::vector<std::string> bob_registers;
    std::vector<std::string> crossing_registers;  // message over the cut edge
    std::int64_t gamma1_qubits = 0;  // Alice proof
    std::int64_t gamma2_qubits = 0;  // Bob proof
    std::int64_t mu_qubits = 0;      // communication
    std::int64_t total_cost = 0;     // sum c(v_j) + m(v_i, v_{i+1})
    std::vector<std::string> padding_log;  // registers padded to a power of two
    HermitianOperator accept_operator;     // unchanged from the source model
};

// Cut the path between v_i and v_{i+1}; 0 <= i <= r-1.
TwoPartyQmaModel cut_to_two_party(const AcceptanceModel& model,
                                  const ProtocolPipeline& pipeline, int cut_index);

// Per-cut report entries {i, gamma1, gamma2, mu, total_cost, accept_value}.
nlohmann::json cut_report(const AcceptanceModel& model, const ProtocolPipeline& pipeline);

}  // namespace dqma
