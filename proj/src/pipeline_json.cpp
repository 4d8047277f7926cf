#include "dqma/network.hpp"

#include <nlohmann/json.hpp>

namespace dqma {

namespace {

nlohmann::json complex_to_json(const cplx& z) {
    return nlohmann::json::array({z.real(), z.imag()});
}

cplx complex_from_json(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>()};
}

nlohmann::json matrix_to_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        nlohmann::json row = nlohmann::json::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(complex_to_json(m(r, c)));
        rows.push_back(std::move(row));
    }
    return rows;
}

Mat matrix_from_json(const nlohmann::json& j) {
    const Eigen::Index rows = static_cast<Eigen::Index>(j.size());
    const Eigen::Index cols = rows ? static_cast<Eigen::Index>(j.at(0).size()) : 0;
    Mat m(rows, cols);
    for (Eigen::Index r = 0; r < rows; ++r)
        for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = complex_from_json(j.at(r).at(c));
    return m;
}

nlohmann::json vector_to_json(const Vec& v) {
    nlohmann::json out = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(complex_to_json(v(i)));
    return out;
}

Vec vector_from_json(const nlohmann::json& j) {
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (Eigen::Index i = 0; i < v.size(); ++i) v(i) = complex_from_json(j.at(i));
    return v;
}

}  // namespace

nlohmann::json pipeline_to_json(const ProtocolPipeline& pipeline) {
    nlohmann::json j;
    j["name"] = pipeline.name;
    j["params"] = pipeline.params_json;

    nlohmann::json regs = nlohmann::json::array();
    for (const auto& r : pipeline.layout.registers()) {
        regs.push_back({{"id", r.id},
                        {"dim", r.dim},
                        {"owner", r.owner},
                        {"role", to_string(r.role)}});
    }
    j["registers"] = std::move(regs);

    nlohmann::json prepared = nlohmann::json::array();
    for (const auto& p : pipeline.prepared) {
        prepared.push_back({{"register", p.register_id},
                            {"spec", p.spec},
                            {"amplitudes", vector_to_json(p.amplitudes)}});
    }
    j["prepared_states"] = std::move(prepared);

    nlohmann::json channels = nlohmann::json::array();
    for (const auto& ch : pipeline.channels) {
        nlohmann::json branches = nlohmann::json::array();
        for (const auto& b : ch.branches)
            branches.push_back({{"probability", b.probability},
                                {"unitary", matrix_to_json(b.unitary)}});
        channels.push_back({{"registers", ch.registers}, {"branches", std::move(branches)}});
    }
    j["channels"] = std::move(channels);

    nlohmann::json tests = nlohmann::json::array();
    for (const auto& t : pipeline.tests) {
        tests.push_back({{"node", t.node},
                         {"registers", t.registers},
                         {"label", t.label},
                         {"povm", matrix_to_json(t.povm)}});
    }
    j["tests"] = std::move(tests);

    nlohmann::json guards = nlohmann::json::array();
    for (const auto& g : pipeline.guards)
        guards.push_back({{"node", g.node}, {"description", g.description}, {"passed", g.passed}});
    j["guards"] = std::move(guards);

    nlohmann::json transfers = nlohmann::json::array();
    for (const auto& t : pipeline.transfers)
        transfers.push_back({{"register", t.register_id}, {"from", t.from}, {"to", t.to}});
    j["transfers"] = std::move(transfers);

    nlohmann::json honest = nlohmann::json::array();
    for (const auto& [id, v] : pipeline.honest_product)
        honest.push_back({{"register", id}, {"amplitudes", vector_to_json(v)}});
    j["honest_product"] = std::move(honest);
    return j;
}

ProtocolPipeline pipeline_from_json(const nlohmann::json& j) {
    ProtocolPipeline p;
    p.name = j.at("name").get<std::string>();
    p.params_json = j.at("params").get<std::string>();

    std::vector<RegisterSpec> regs;
    for (const auto& r : j.at("registers")) {
        regs.push_back({r.at("id").get<std::string>(), r.at("dim").get<std::int64_t>(),
                        r.at("owner").get<std::string>(),
                        register_role_from_string(r.at("role").get<std::string>())});
    }
    p.layout = RegisterLayout(std::move(regs), kStateDimCap);

    for (const auto& ps : j.at("prepared_states")) {
        p.prepared.push_back({ps.at("register").get<std::string>(),
                              vector_from_json(ps.at("amplitudes")),
                              ps.at("spec").get<std::string>()});
    }
    for (const auto& ch : j.at("channels")) {
        std::vector<MixingChannel::Branch> branches;
        for (const auto& b : ch.at("branches"))
            branches.push_back({b.at("probability").get<double>(),
                                matrix_from_json(b.at("unitary"))});
        p.channels.emplace_back(ch.at("registers").get<std::vector<std::string>>(),
                                std::move(branches));
    }
    for (const auto& t : j.at("tests")) {
        p.tests.push_back({t.at("node").get<std::string>(),
                           t.at("registers").get<std::vector<std::string>>(),
                           matrix_from_json(t.at("povm")), t.at("label").get<std::string>()});
    }
    for (const auto& g : j.at("guards")) {
        p.guards.push_back({g.at("node").get<std::string>(),
                            g.at("description").get<std::string>(),
                            g.at("passed").get<bool>()});
    }
    for (const auto& t : j.at("transfers")) {
        p.transfers.push_back({t.at("register").get<std::string>(),
                               t.at("from").get<std::string>(), t.at("to").get<std::string>()});
    }
    for (const auto& h : j.at("honest_product"))
        p.honest_product.emplace_back(h.at("register").get<std::string>(),
                                      vector_from_json(h.at("amplitudes")));
    return p;
}

}  // namespace dqma
