#include "dqma/reductions.hpp"

#include <nlohmann/json.hpp>

#include <cmath>

namespace dqma {

namespace {

int path_node_index(const std::string& id) {
    if (id.size() < 2 || id[0] != 'v')
        throw layout_error("cut_to_two_party requires a path pipeline (nodes v0..vr): " + id);
    return std::stoi(id.substr(1));
}

std::int64_t qubits_padded(std::int64_t dim, const std::string& id,
                           std::vector<std::string>& padding_log) {
    std::int64_t q = 0, d = 1;
    while (d < dim) {
        d <<= 1;
        ++q;
    }
    if (d != dim)
        padding_log.push_back(id + ": dim " + std::to_string(dim) + " padded to " +
                              std::to_string(d));
    return q;
}

}  // namespace

TwoPartyQmaModel cut_to_two_party(const AcceptanceModel& model,
                                  const ProtocolPipeline& pipeline, int cut_index) {
    int max_node = 0;
    for (const auto& node : pipeline.node_ids())
        max_node = std::max(max_node, path_node_index(node));
    if (cut_index < 0 || cut_index > max_node - 1)
        throw layout_error("cut index out of range");

    TwoPartyQmaModel out;
    out.cut_index = cut_index;
    out.accept_operator = model.accept_operator;

    std::int64_t total_proof_qubits = 0;
    for (const auto& r : pipeline.layout.registers()) {
        if (r.role != RegisterRole::proof) continue;
        int node = path_node_index(r.owner);
        std::int64_t q = qubits_padded(r.dim, r.id, out.padding_log);
        total_proof_qubits += q;
        if (node <= cut_index) {
            out.alice_registers.push_back(r.id);
            out.gamma1_qubits += q;
        } else {
            out.bob_registers.push_back(r.id);
            out.gamma2_qubits += q;
        }
    }

    for (const auto& t : pipeline.transfers) {
        int from = path_node_index(t.from);
        int to = path_node_index(t.to);
        if (from <= cut_index && to > cut_index) {
            out.crossing_registers.push_back(t.register_id);
            std::int64_t dim = pipeline.layout.dim(pipeline.layout.position(t.register_id));
            out.mu_qubits += qubits_padded(dim, t.register_id, out.padding_log);
        }
    }
    out.total_cost = total_proof_qubits + out.mu_qubits;
    return out;
}

nlohmann::json cut_report(const AcceptanceModel& model, const ProtocolPipeline& pipeline) {
    int max_node = 0;
    for (const auto& node : pipeline.node_ids())
        max_node = std::max(max_node, path_node_index(node));

    nlohmann::json cuts = nlohmann::json::array();
    double top = top_eigenpair(model.accept_operator).value;
    for (int i = 0; i <= max_node - 1; ++i) {
        TwoPartyQmaModel two = cut_to_two_party(model, pipeline, i);
        double value = top_eigenpair(two.accept_operator).value;
        cuts.push_back({{"i", i},
                        {"gamma1", two.gamma1_qubits},
                        {"gamma2", two.gamma2_qubits},
                        {"mu", two.mu_qubits},
                        {"total_cost", two.total_cost},
                        {"accept_value", value},
                        {"source_value", top}});
    }
    nlohmann::json j;
    j["protocol"] = pipeline.name;
    j["cuts"] = std::move(cuts);
    return j;
}

}  // namespace dqma
