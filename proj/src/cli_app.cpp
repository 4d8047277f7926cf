#include "dqma/cli_app.hpp"

#include "dqma/adversary.hpp"
#include "dqma/protocols.hpp"
#include "dqma/reductions.hpp"
#include "dqma/selftest.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

namespace dqma::cli {

namespace {

using nlohmann::json;

void expect_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw schema_error(where + ": expected an object");
}

// Strict field validation: unknown fields are config errors.
void check_fields(const json& j, const std::vector<std::string>& required,
                  const std::vector<std::string>& optional, const std::string& where) {
    expect_object(j, where);
    for (const auto& f : required)
        if (!j.contains(f)) throw schema_error(where + ": missing field '" + f + "'");
    for (const auto& [key, value] : j.items()) {
        (void)value;
        if (std::find(required.begin(), required.end(), key) == required.end() &&
            std::find(optional.begin(), optional.end(), key) == optional.end())
            throw schema_error(where + ": unknown field '" + key + "'");
    }
}

int get_int(const json& j, const std::string& field, const std::string& where) {
    if (!j.at(field).is_number_integer())
        throw schema_error(where + ": field '" + field + "' must be an integer");
    return j.at(field).get<int>();
}

int get_int_or(const json& j, const std::string& field, int fallback) {
    return j.contains(field) ? j.at(field).get<int>() : fallback;
}

std::string bits_field(const json& j, const std::string& field, int n,
                       const std::string& where) {
    const auto& v = j.at(field);
    std::string bits;
    if (v.is_string())
        bits = v.get<std::string>();
    else if (v.is_number_unsigned() || v.is_number_integer())
        bits = to_bits(v.get<std::uint64_t>(), n);
    else
        throw schema_error(where + ": field '" + field + "' must be a bitstring or integer");
    if (static_cast<int>(bits.size()) != n)
        throw schema_error(where + ": field '" + field + "' must have " + std::to_string(n) +
                           " bits");
    for (char c : bits)
        if (c != '0' && c != '1')
            throw schema_error(where + ": field '" + field + "' must be binary");
    return bits;
}

FingerprintScheme scheme_from_json(const json& params, int n) {
    if (!params.contains("scheme")) return FingerprintScheme::hadamard(n);
    const auto& s = params.at("scheme");
    check_fields(s, {"kind"}, {"m", "seed"}, "scheme");
    std::string kind = s.at("kind").get<std::string>();
    if (kind == "hadamard") return FingerprintScheme::hadamard(n);
    if (kind == "code") {
        int m = get_int_or(s, "m", std::max(3 * n, 4));
        std::uint64_t seed = s.contains("seed") ? s.at("seed").get<std::uint64_t>() : 3;
        return FingerprintScheme::random_linear_code(n, m, seed);
    }
    throw schema_error("scheme: unknown kind '" + kind + "'");
}

SchemeFamily scheme_family_from_json(const json& params) {
    SchemeFamily family;
    if (!params.contains("scheme")) return family;
    const auto& s = params.at("scheme");
    check_fields(s, {"kind"}, {"m", "seed"}, "scheme");
    std::string kind = s.at("kind").get<std::string>();
    if (kind == "code") family.kind = FingerprintScheme::Kind::code_based;
    if (s.contains("seed")) family.seed = s.at("seed").get<std::uint64_t>();
    return family;
}

Topology tree_from_json(const json& params, bool inputs_are_ints, int n,
                        const std::string& where) {
    std::vector<std::pair<std::string, std::string>> edges;
    for (const auto& e : params.at("edges")) {
        if (!e.is_array() || e.size() != 2)
            throw schema_error(where + ": each edge must be a pair");
        edges.emplace_back(e.at(0).get<std::string>(), e.at(1).get<std::string>());
    }
    std::map<std::string, std::string> inputs;
    for (const auto& [node, value] : params.at("inputs").items()) {
        if (inputs_are_ints)
            inputs[node] = to_bits(value.get<std::uint64_t>(), n);
        else
            inputs[node] = value.get<std::string>();
    }
    return Topology::tree(std::move(edges), params.at("root").get<std::string>(),
                          std::move(inputs));
}

// Everything the evaluator needs about one configured experiment.
struct Experiment {
    std::string protocol;
    std::vector<ProtocolPipeline> pipelines;  // all components must accept
    bool is_yes = false;
    int r = 0, n = 0, k = 1;
    std::string instance;
    json bound;  // null or {formula, value}
    // overrides for protocols whose optimum is not one eigen-solve
    std::function<double()> adversary_override;
    std::function<double()> honest_override;
};

json bound_entry(const std::string& formula, double value) {
    return json{{"formula", formula}, {"value", value}};
}

json eq_bound(int r, int k) {
    std::string formula = "(1 - 4/(81*r^2))^k with r=" + std::to_string(r) +
                          ", k=" + std::to_string(k);
    return bound_entry(formula, eq_path_bound(r, k));
}

Experiment build_experiment(const std::string& protocol, const json& params,
                            const Options& opts) {
    Experiment e;
    e.protocol = protocol;

    if (protocol == "eq_path") {
        check_fields(params, {"r", "n", "x", "y"}, {"k", "scheme", "final_test"}, "eq_path");
        EqPathParams p;
        p.r = get_int(params, "r", "eq_path");
        int n = get_int(params, "n", "eq_path");
        p.scheme = scheme_from_json(params, n);
        p.x = bits_field(params, "x", n, "eq_path");
        p.y = bits_field(params, "y", n, "eq_path");
        p.repetitions = get_int_or(params, "k", 1);
        if (params.contains("final_test") &&
            params.at("final_test").get<std::string>() == "swap")
            p.final_test = ChainFinal::swap_with_prepared;
        p.dim_cap = opts.dim_cap;
        e.pipelines.push_back(build_eq_path(p));
        e.is_yes = (p.x == p.y);
        e.r = p.r;
        e.n = n;
        e.k = p.repetitions;
        e.instance = "x=" + p.x + ";y=" + p.y;
        if (!e.is_yes) e.bound = eq_bound(p.r, p.repetitions);
        return e;
    }

    if (protocol == "eq_tree") {
        check_fields(params, {"edges", "root", "inputs", "n"}, {"k", "scheme"}, "eq_tree");
        TreeProtocolParams p;
        int n = get_int(params, "n", "eq_tree");
        p.scheme = scheme_from_json(params, n);
        p.topology = tree_from_json(params, false, n, "eq_tree");
        p.repetitions = get_int_or(params, "k", 1);
        p.dim_cap = opts.dim_cap;
        e.pipelines.push_back(build_eq_tree(p));
        e.is_yes = true;
        std::string desc;
        const std::string& ref = p.topology.terminal_inputs.begin()->second;
        for (const auto& [node, input] : p.topology.terminal_inputs) {
            if (input != ref) e.is_yes = false;
            desc += node + "=" + input + ";";
        }
        e.r = p.topology.depth();
        e.n = n;
        e.k = p.repetitions;
        e.instance = desc;
        if (!e.is_yes) e.bound = eq_bound(e.r, p.repetitions);
        return e;
    }

    if (protocol == "eq_relay") {
        check_fields(params, {"r", "n", "x", "y"},
                     {"segment_length", "reps_per_segment", "scheme"}, "eq_relay");
        RelayEqParams p;
        p.r = get_int(params, "r", "eq_relay");
        p.n = get_int(params, "n", "eq_relay");
        p.segment_scheme = scheme_from_json(params, p.n);
        p.x = bits_field(params, "x", p.n, "eq_relay");
        p.y = bits_field(params, "y", p.n, "eq_relay");
        p.segment_length = get_int_or(params, "segment_length", 0);
        p.reps_per_segment = get_int_or(params, "reps_per_segment", 0);
        p.dim_cap = opts.dim_cap;
        auto relay = std::make_shared<RelayEqProtocol>(build_eq_relay(p));
        e.is_yes = (p.x == p.y);
        e.r = p.r;
        e.n = p.n;
        e.k = relay->params().reps_per_segment;
        e.instance = "x=" + p.x + ";y=" + p.y;
        e.pipelines = relay->segments_for(relay->honest_relay_values());
        e.honest_override = [relay] { return relay->honest_value(); };
        e.adversary_override = [relay] { return relay->adversary().value; };
        if (!e.is_yes)
            e.bound = bound_entry("violating segment: (1 - 4/(81*seg^2))^reps",
                                  relay->segment_bound(0));
        return e;
    }

    if (protocol == "gt" || protocol == "gt_lt" || protocol == "gt_ge" ||
        protocol == "gt_le") {
        check_fields(params, {"r", "n", "x", "y"}, {"k", "index", "scheme"}, protocol);
        GtParams p;
        p.r = get_int(params, "r", protocol);
        p.n = get_int(params, "n", protocol);
        p.x = params.at("x").get<std::uint64_t>();
        p.y = params.at("y").get<std::uint64_t>();
        p.scheme = scheme_family_from_json(params);
        p.repetitions = get_int_or(params, "k", 1);
        p.variant = protocol == "gt"      ? GtVariant::greater
                    : protocol == "gt_lt" ? GtVariant::less
                    : protocol == "gt_ge" ? GtVariant::greater_equal
                                          : GtVariant::less_equal;
        p.dim_cap = opts.dim_cap;
        e.is_yes = gt_truth(p.variant, p.x, p.y);
        e.r = p.r;
        e.n = p.n;
        e.k = p.repetitions;
        e.instance = "x=" + std::to_string(p.x) + ";y=" + std::to_string(p.y);

        bool fixed_index = params.contains("index") && params.at("index").is_number();
        if (fixed_index) {
            p.index = params.at("index").get<int>();
            e.pipelines.push_back(build_gt(p));
        } else if (e.is_yes) {
            e.pipelines.push_back(build_gt(p));  // honest index
        } else {
            // adversarial index enumeration; keep the best index's pipeline
            auto adv = gt_adversary_value(p);
            GtParams best = p;
            best.index = std::max(adv.best_index, 0);
            e.pipelines.push_back(build_gt(best));
            e.adversary_override = [p] { return gt_adversary_value(p).value; };
        }
        if (!e.is_yes) e.bound = eq_bound(p.r, p.repetitions);
        return e;
    }

    if (protocol == "rv") {
        check_fields(params, {"edges", "root", "inputs", "n", "j"}, {"k", "scheme"}, "rv");
        RvParams p;
        p.n = get_int(params, "n", "rv");
        p.topology = tree_from_json(params, true, p.n, "rv");
        for (const auto& [node, value] : params.at("inputs").items())
            p.inputs[node] = value.get<std::uint64_t>();
        p.rank_j = get_int(params, "j", "rv");
        p.scheme = scheme_family_from_json(params);
        p.repetitions = get_int_or(params, "k", 1);
        p.dim_cap = opts.dim_cap;
        auto shared = std::make_shared<RvParams>(p);
        e.is_yes = rv_truth(p);
        e.r = p.topology.depth();
        e.n = p.n;
        e.k = p.repetitions;
        e.instance = "j=" + std::to_string(p.rank_j);
        if (e.is_yes) {
            std::map<std::string, GtVariant> directions;
            std::uint64_t subject = p.inputs.at(p.topology.root);
            for (const auto& [node, value] : p.inputs)
                if (node != p.topology.root)
                    directions[node] = subject >= value ? GtVariant::greater_equal
                                                        : GtVariant::less;
            e.pipelines = rv_pipelines(p, directions);
        }
        e.honest_override = [shared] { return rv_evaluate(*shared).honest_value; };
        e.adversary_override = [shared] { return rv_evaluate(*shared).adversary_value; };
        if (!e.is_yes) e.bound = eq_bound(e.r, p.repetitions);
        return e;
    }

    if (protocol == "forall_f") {
        check_fields(params, {"nodes", "edges", "inputs", "n", "f"}, {"k"}, "forall_f");
        int n = get_int(params, "n", "forall_f");
        const auto& fspec = params.at("f");
        check_fields(fspec, {"kind"}, {"d"}, "forall_f.f");
        std::string fkind = fspec.at("kind").get<std::string>();
        std::function<bool(const std::string&, const std::string&)> oracle;
        OneWayProtocol protocol_impl;
        if (fkind == "eq_fingerprint") {
            oracle = [](const std::string& a, const std::string& b) { return a == b; };
            protocol_impl = eq_one_way(FingerprintScheme::hadamard(n));
        } else if (fkind == "eq_exact") {
            oracle = [](const std::string& a, const std::string& b) { return a == b; };
            protocol_impl = exact_send_protocol(oracle, n, "eq_exact", opts.dim_cap);
        } else if (fkind == "ham_le") {
            int d = get_int(fspec, "d", "forall_f.f");
            oracle = [d](const std::string& a, const std::string& b) {
                return hamming_distance(a, b) <= d;
            };
            protocol_impl = exact_send_protocol(oracle, n, "ham_le", opts.dim_cap);
        } else {
            throw schema_error("forall_f.f: unknown kind '" + fkind + "'");
        }

        std::vector<std::string> nodes;
        for (const auto& v : params.at("nodes")) nodes.push_back(v.get<std::string>());
        std::vector<std::pair<std::string, std::string>> edges;
        for (const auto& edge : params.at("edges"))
            edges.emplace_back(edge.at(0).get<std::string>(), edge.at(1).get<std::string>());
        std::map<std::string, std::string> inputs;
        for (const auto& [node, value] : params.at("inputs").items())
            inputs[node] = value.get<std::string>();

        ForallParams p;
        p.protocol = protocol_impl;
        p.inputs = inputs;
        p.repetitions = get_int_or(params, "k", 1);
        p.dim_cap = opts.dim_cap;
        for (const auto& [term, input] : inputs) {
            (void)input;
            p.trees.push_back(build_rooted_tree(nodes, edges, inputs, term));
        }
        e.pipelines = build_forall_f(p);
        e.is_yes = true;
        int depth = 0;
        for (const auto& t : p.trees) depth = std::max(depth, t.depth());
        for (auto it = inputs.begin(); it != inputs.end(); ++it)
            for (auto jt = std::next(it); jt != inputs.end(); ++jt)
                if (!oracle(it->second, jt->second)) e.is_yes = false;
        e.r = depth;
        e.n = n;
        e.k = p.repetitions;
        for (const auto& [node, input] : inputs) e.instance += node + "=" + input + ";";
        if (!e.is_yes) e.bound = eq_bound(depth, p.repetitions);
        return e;
    }

    if (protocol == "from_oneway_qma") {
        check_fields(params, {"r", "n", "x", "y", "inner"}, {"k"}, "from_oneway_qma");
        OneWayQmaConversionParams p;
        p.r = get_int(params, "r", "from_oneway_qma");
        int n = get_int(params, "n", "from_oneway_qma");
        p.x = bits_field(params, "x", n, "from_oneway_qma");
        p.y = bits_field(params, "y", n, "from_oneway_qma");
        p.repetitions = get_int_or(params, "k", 1);
        p.dim_cap = opts.dim_cap;
        std::string inner = params.at("inner").get<std::string>();
        if (inner == "eq_fingerprint")
            p.protocol = wrap_oneway_as_qma(eq_one_way(FingerprintScheme::hadamard(n)));
        else if (inner == "proof_assisted_eq")
            p.protocol = proof_assisted_eq_qma(FingerprintScheme::hadamard(n));
        else
            throw schema_error("from_oneway_qma: unknown inner protocol '" + inner + "'");
        e.pipelines.push_back(build_from_oneway_qma(p));
        e.is_yes = (p.x == p.y);
        e.r = p.r;
        e.n = n;
        e.k = p.repetitions;
        e.instance = "x=" + p.x + ";y=" + p.y;
        if (!e.is_yes) e.bound = eq_bound(p.r, p.repetitions);
        return e;
    }

    throw schema_error("unknown protocol '" + protocol + "'");
}

}  // namespace

std::string csv_header() {
    return "protocol,r,n,k,instance,prover,accept_prob,lambda_max,bound,satisfied,"
           "proof_dim,seed,wall_time_ms";
}

std::string result_to_csv_line(const json& r) {
    auto num = [](const json& v) {
        return v.is_null() ? std::string() : format_double(v.get<double>());
    };
    std::ostringstream out;
    out << r.at("protocol").get<std::string>() << "," << r.at("r").get<int>() << ","
        << r.at("n").get<int>() << "," << r.at("k").get<int>() << ",\""
        << r.at("instance").get<std::string>() << "\","
        << r.at("prover").get<std::string>() << "," << num(r.at("accept_prob")) << ","
        << num(r.at("lambda_max")) << ","
        << (r.at("paper_bound").is_null() ? std::string()
                                          : num(r.at("paper_bound").at("value")))
        << ","
        << (r.at("paper_bound").is_null() || !r.at("paper_bound").contains("satisfied")
                ? std::string()
                : (r.at("paper_bound").at("satisfied").get<bool>() ? "true" : "false"))
        << "," << r.at("proof_dimension").get<std::int64_t>() << ","
        << r.at("seed").get<std::uint64_t>() << "," << r.at("wall_time_ms").get<double>();
    return out.str();
}

json run_command(const json& config, const Options& outer_opts) {
    check_fields(config, {"protocol", "params", "prover"}, {"mode", "dim_cap", "format"},
                 "config");
    Options opts = outer_opts;
    if (config.contains("dim_cap")) opts.dim_cap = config.at("dim_cap").get<std::int64_t>();
    if (config.contains("format")) opts.format = config.at("format").get<std::string>();
    const auto& prover = config.at("prover");
    check_fields(prover, {"kind"}, {"restarts", "max_iters", "tol", "amplitudes"}, "prover");
    std::string prover_kind = prover.at("kind").get<std::string>();

    json mode = config.contains("mode") ? config.at("mode") : json{{"kind", "exact"}};
    check_fields(mode, {"kind"}, {"shots", "seed"}, "mode");
    std::string mode_kind = mode.at("kind").get<std::string>();
    if (mode_kind != "exact" && mode_kind != "sample")
        throw schema_error("mode: kind must be 'exact' or 'sample'");
    std::int64_t shots =
        mode.contains("shots") ? mode.at("shots").get<std::int64_t>() : 100000;
    std::uint64_t sample_seed =
        mode.contains("seed") ? mode.at("seed").get<std::uint64_t>() : opts.seed;

    auto start = std::chrono::steady_clock::now();
    Experiment e =
        build_experiment(config.at("protocol").get<std::string>(), config.at("params"), opts);

    std::int64_t proof_dim = 1;
    for (const auto& p : e.pipelines) proof_dim *= p.proof_dimension();

    double accept = 0.0;
    json lambda = nullptr;
    std::map<std::string, double> node_reject;

    auto merge_node_rejects = [&](const std::map<std::string, double>& part, size_t idx,
                                  size_t total) {
        for (const auto& [node, v] : part) {
            std::string key = total > 1 ? std::to_string(idx) + "/" + node : node;
            node_reject[key] = v;
        }
    };

    auto sample_pipelines = [&](const std::function<StateVector(size_t)>& proof_for) {
        double product = 1.0;
        for (size_t i = 0; i < e.pipelines.size(); ++i) {
            auto stats = simulate_sampled(e.pipelines[i], proof_for(i), shots,
                                          sample_seed + i, opts.threads);
            product *= stats.all_accept_frequency();
            std::map<std::string, double> freqs;
            for (const auto& [node, count] : stats.node_rejects)
                freqs[node] = static_cast<double>(count) / static_cast<double>(shots);
            merge_node_rejects(freqs, i, e.pipelines.size());
        }
        return product;
    };

    if (prover_kind == "honest") {
        if (!e.is_yes && e.pipelines.empty() && !e.honest_override)
            throw schema_error("prover: honest proof undefined for a no-instance");
        if (mode_kind == "sample") {
            accept = sample_pipelines(
                [&](size_t i) { return honest_proof(e.pipelines[i], opts.dim_cap); });
        } else if (e.honest_override) {
            accept = e.honest_override();
        } else {
            accept = 1.0;
            for (size_t i = 0; i < e.pipelines.size(); ++i) {
                auto model = compile(e.pipelines[i], opts.dim_cap);
                auto proof = honest_proof(e.pipelines[i], opts.dim_cap);
                accept *= expectation(model.accept_operator, proof);
                merge_node_rejects(per_node_rejection(model, proof), i, e.pipelines.size());
            }
        }
    } else if (prover_kind == "entangled_opt") {
        if (e.adversary_override) {
            accept = e.adversary_override();
            lambda = accept;
        } else {
            accept = 1.0;
            for (size_t i = 0; i < e.pipelines.size(); ++i) {
                auto model = compile(e.pipelines[i], opts.dim_cap);
                auto opt = optimal_entangled_value(model);
                accept *= opt.value;
                merge_node_rejects(per_node_rejection(model, opt.state), i,
                                   e.pipelines.size());
            }
            lambda = accept;
            if (mode_kind == "sample")
                accept = sample_pipelines([&](size_t i) {
                    return optimal_entangled_value(compile(e.pipelines[i], opts.dim_cap))
                        .state;
                });
        }
    } else if (prover_kind == "separable_opt") {
        SeeSawOptions sopts;
        sopts.restarts = get_int_or(prover, "restarts", 16);
        sopts.max_iters = get_int_or(prover, "max_iters", 200);
        if (prover.contains("tol")) sopts.tol = prover.at("tol").get<double>();
        sopts.seed = opts.seed;
        accept = 1.0;
        for (const auto& p : e.pipelines) {
            auto model = compile(p, opts.dim_cap);
            accept *= optimal_separable_value(model, group_by_node(p), sopts).value;
        }
    } else if (prover_kind == "explicit") {
        if (e.pipelines.size() != 1)
            throw schema_error("prover: explicit proofs need a single-pipeline protocol");
        if (!prover.contains("amplitudes"))
            throw schema_error("prover: explicit proofs require 'amplitudes'");
        Vec amps(prover.at("amplitudes").size());
        for (Eigen::Index i = 0; i < amps.size(); ++i) {
            const auto& entry = prover.at("amplitudes").at(i);
            amps(i) = cplx(entry.at(0).get<double>(), entry.at(1).get<double>());
        }
        auto model = compile(e.pipelines[0], opts.dim_cap);
        if (amps.size() != model.accept_operator.layout.total_dimension())
            throw schema_error("prover: amplitudes do not match the proof dimension");
        StateVector proof(model.accept_operator.layout, amps.normalized());
        if (mode_kind == "sample")
            accept = sample_pipelines([&](size_t) { return proof; });
        else
            accept = expectation(model.accept_operator, proof);
        merge_node_rejects(per_node_rejection(model, proof), 0, 1);
    } else {
        throw schema_error("prover: unknown kind '" + prover_kind + "'");
    }

    double wall_ms = opts.timings
                         ? std::chrono::duration<double, std::milli>(
                               std::chrono::steady_clock::now() - start)
                               .count()
                         : 0.0;

    json result;
    result["config"] = config;
    result["protocol"] = e.protocol;
    result["r"] = e.r;
    result["n"] = e.n;
    result["k"] = e.k;
    result["instance"] = e.instance;
    result["prover"] = prover_kind;
    result["accept_prob"] = accept;
    result["lambda_max"] = lambda;
    json rejects = json::object();
    for (const auto& [node, v] : node_reject) rejects[node] = v;
    result["per_node_reject"] = rejects;
    if (e.bound.is_null()) {
        result["paper_bound"] = nullptr;
    } else {
        json b = e.bound;
        if (prover_kind == "entangled_opt" && !e.is_yes)
            b["satisfied"] = accept <= b.at("value").get<double>() + 1e-9;
        result["paper_bound"] = b;
    }
    result["proof_dimension"] = proof_dim;
    result["seed"] = opts.seed;
    result["wall_time_ms"] = wall_ms;
    return result;
}

std::string sweep_command(const json& config, const Options& opts) {
    check_fields(config, {"base", "axes"}, {}, "sweep");
    const json& base = config.at("base");
    expect_object(config.at("axes"), "axes");

    std::vector<std::string> axis_names;
    std::vector<std::vector<json>> axis_values;
    for (const auto& [name, values] : config.at("axes").items()) {
        if (!values.is_array() || values.empty())
            throw schema_error("axes: '" + name + "' must be a non-empty array");
        axis_names.push_back(name);
        axis_values.push_back(std::vector<json>(values.begin(), values.end()));
    }

    std::int64_t cells = 1;
    for (const auto& v : axis_values) cells *= static_cast<std::int64_t>(v.size());

    std::vector<json> cell_configs;
    for (std::int64_t c = 0; c < cells; ++c) {
        json cell = base;
        std::int64_t rem = c;
        for (size_t a = 0; a < axis_names.size(); ++a) {
            const auto& values = axis_values[a];
            cell["params"][axis_names[a]] = values[rem % values.size()];
            rem /= static_cast<std::int64_t>(values.size());
        }
        cell_configs.push_back(std::move(cell));
    }

    std::vector<json> results(cell_configs.size());
    auto work = [&](size_t begin, size_t end) {
        for (size_t i = begin; i < end; ++i) {
            try {
                results[i] = run_command(cell_configs[i], opts);
            } catch (const dim_cap_error& err) {
                results[i] = json{{"config", cell_configs[i]},
                                  {"status", "skipped"},
                                  {"reason", err.what()}};
            }
        }
    };
    int threads = std::max(1, opts.threads);
    if (threads == 1 || cell_configs.size() < 2) {
        work(0, cell_configs.size());
    } else {
        std::vector<std::thread> pool;
        size_t chunk = (cell_configs.size() + threads - 1) / threads;
        for (int t = 0; t < threads; ++t) {
            size_t begin = t * chunk;
            size_t end = std::min(cell_configs.size(), begin + chunk);
            if (begin < end) pool.emplace_back(work, begin, end);
        }
        for (auto& th : pool) th.join();
    }

    std::ostringstream out;
    if (opts.format == "csv") {
        out << csv_header() << "\n";
        for (const auto& r : results) {
            if (r.contains("status"))
                out << "# skipped: " << r.at("reason").get<std::string>() << "\n";
            else
                out << result_to_csv_line(r) << "\n";
        }
    } else {
        for (const auto& r : results) out << r.dump() << "\n";
    }
    return out.str();
}

json attack_command(const json& config, const Options& opts) {
    check_fields(config, {"attack", "params"}, {}, "attack");
    std::string kind = config.at("attack").get<std::string>();
    const json& params = config.at("params");

    if (kind == "classical_fooling") {
        check_fields(params, {"n", "r", "keep_bits"}, {}, "classical_fooling");
        int n = get_int(params, "n", "classical_fooling");
        int r = get_int(params, "r", "classical_fooling");
        int keep = get_int(params, "keep_bits", "classical_fooling");
        auto protocol = make_truncated_eq_dma(n, r, keep);
        std::vector<std::pair<std::string, std::string>> fooling;
        for (std::uint64_t s = 0; s < (1ULL << n); ++s)
            fooling.emplace_back(to_bits(s, n), to_bits(s, n));
        auto eq = [](const std::string& a, const std::string& b) { return a == b; };
        return attack_report(classical_fooling_attack(protocol, eq, fooling));
    }

    if (kind == "separable_cut_paste") {
        check_fields(params, {"r", "cut", "delta"}, {"family_bits", "angle_denominator"},
                     "separable_cut_paste");
        int r = get_int(params, "r", "separable_cut_paste");
        int cut = get_int(params, "cut", "separable_cut_paste");
        double delta = params.at("delta").get<double>();
        int bits = get_int_or(params, "family_bits", 3);
        int denom = get_int_or(params, "angle_denominator", 64);
        std::int64_t cap = opts.dim_cap;
        SeparableProofFamily family;
        for (std::uint64_t s = 0; s < (1ULL << bits); ++s)
            family.fooling_inputs.emplace_back(to_bits(s, bits), to_bits(s, bits));
        auto state = [denom](const std::string& b) {
            double theta = static_cast<double>(from_bits(b)) * M_PI / denom;
            Vec v(2);
            v << std::cos(theta), std::sin(theta);
            return v;
        };
        family.build = [r, state, cap](const std::string& x, const std::string& y) {
            return build_eq_path_with_map(r, 2, state, x, y, 1, ChainFinal::accept_povm, cap);
        };
        family.f = [](const std::string& a, const std::string& b) { return a == b; };
        family.completeness = 1.0;
        return attack_report(separable_cut_paste_attack(family, cut, delta, cap));
    }

    if (kind == "entangled_no_proof") {
        check_fields(params, {"r", "n", "gap_at", "instance_a", "instance_b"}, {"cut"},
                     "entangled_no_proof");
        int r = get_int(params, "r", "entangled_no_proof");
        int n = get_int(params, "n", "entangled_no_proof");
        int gap = get_int(params, "gap_at", "entangled_no_proof");
        int cut = get_int_or(params, "cut", gap);
        std::int64_t cap = opts.dim_cap;
        auto scheme = FingerprintScheme::hadamard(n);
        SeparableProofFamily family;
        for (std::uint64_t s = 0; s < (1ULL << n); ++s)
            family.fooling_inputs.emplace_back(to_bits(s, n), to_bits(s, n));
        family.build = [r, gap, scheme, cap](const std::string& x, const std::string& y) {
            return build_gapped_eq_path(r, scheme, x, y, gap, cap);
        };
        family.f = [](const std::string& a, const std::string& b) { return a == b; };
        family.completeness = 1.0;
        auto pick = [](const json& pair) {
            return std::make_pair(pair.at(0).get<std::string>(),
                                  pair.at(1).get<std::string>());
        };
        return attack_report(entangled_no_proof_attack(family, cut,
                                                       pick(params.at("instance_a")),
                                                       pick(params.at("instance_b")), cap));
    }

    throw schema_error("unknown attack '" + kind + "'");
}

namespace {

json load_config(const std::string& path) {
    try {
        if (path == "-") return json::parse(std::cin);
        std::ifstream in(path);
        if (!in) throw schema_error("cannot open config file: " + path);
        return json::parse(in);
    } catch (const json::parse_error& e) {
        throw schema_error(std::string("config is not valid JSON: ") + e.what());
    }
}

void write_output(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        if (!text.empty() && text.back() != '\n') std::cout << "\n";
        return;
    }
    std::ofstream out(out_path);
    out << text;
    if (!text.empty() && text.back() != '\n') out << "\n";
}

}  // namespace

}  // namespace dqma::cli

#include <CLI11.hpp>

namespace dqma::cli {

int dispatch(int argc, char** argv) {
    CLI::App app{"Simulator and analysis tool for distributed quantum Merlin-Arthur protocols"};
    app.require_subcommand(1);

    Options opts;
    std::string config_path, out_path;

    auto add_common = [&](CLI::App* cmd, bool with_config) {
        if (with_config)
            cmd->add_option("--config", config_path,
                            "JSON config file path, or '-' for stdin")
                ->required();
        cmd->add_option("--out", out_path, "write the result to this file instead of stdout");
        cmd->add_option("--format", opts.format, "output format: json or csv")
            ->check(CLI::IsMember({"json", "csv"}));
        cmd->add_option("--seed", opts.seed, "base random seed (default 1)");
        cmd->add_option("--threads", opts.threads, "worker threads for sweeps and sampling")
            ->check(CLI::PositiveNumber);
        cmd->add_option("--dim-cap", opts.dim_cap,
                        "largest admissible operator dimension (default 4096)")
            ->check(CLI::PositiveNumber);
        cmd->add_flag("--timings", opts.timings,
                      "emit real wall times (breaks byte-identical reruns)");
    };

    auto* run = app.add_subcommand("run", "run one experiment from a JSON config");
    add_common(run, true);
    auto* sweep = app.add_subcommand("sweep", "run a cartesian sweep over config axes");
    add_common(sweep, true);
    auto* attack = app.add_subcommand("attack", "run a lower-bound attack construction");
    add_common(attack, true);
    auto* selftest = app.add_subcommand("selftest", "run the built-in verification suite");
    add_common(selftest, false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (run->parsed()) {
            json result = run_command(load_config(config_path), opts);
            if (opts.format == "csv")
                write_output(csv_header() + "\n" + result_to_csv_line(result), out_path);
            else
                write_output(result.dump(2), out_path);
            return 0;
        }
        if (sweep->parsed()) {
            write_output(sweep_command(load_config(config_path), opts), out_path);
            return 0;
        }
        if (attack->parsed()) {
            write_output(attack_command(load_config(config_path), opts).dump(2), out_path);
            return 0;
        }
        if (selftest->parsed()) {
            std::ostringstream report_out;
            auto report = run_selftest(opts.seed, opts.dim_cap, report_out, opts.threads);
            write_output(report_out.str(), out_path);
            return report.ok() ? 0 : 1;
        }
    } catch (const schema_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const dim_cap_error& e) {
        std::cerr << "dimension cap exceeded: " << e.what() << "\n";
        return 3;
    } catch (const layout_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const numeric_error& e) {
        std::cerr << "numerical failure: " << e.what() << "\n";
        return 4;
    } catch (const nlohmann::json::exception& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}

}  // namespace dqma::cli
