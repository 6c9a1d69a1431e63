#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinflow/brownian.hpp"
#include "kinflow/exponents.hpp"
#include "kinflow/fields.hpp"
#include "kinflow/io.hpp"
#include "kinflow/kernel.hpp"
#include "kinflow/noise.hpp"
#include "kinflow/solver.hpp"

namespace kinflow {

/// Raised on any configuration problem; the CLI maps it to exit code 2.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Resolved experiment configuration. The JSON layout is documented in
/// docs/config.schema.json; unknown keys anywhere are rejected.
struct ExperimentConfig {
    std::string scenario;
    std::uint64_t seed = 0;
    std::string output_dir = "out";
    std::size_t dimension = 2;
    Domain domain;
    std::optional<NoiseModel> noise;
    std::optional<TurningKernel> kernel;
    NormSpec norm;
    SolverConfig solver;
    struct EnsembleSpec {
        std::size_t samples = 1;
        std::size_t modes = 1;
        std::size_t steps = 100;
        double t0 = 0.0;
        double t1 = 1.0;
    } ensemble;
    nlohmann::json params;  // scenario-specific knobs (validated per scenario)
    std::string canonical_json;  // resolved config, hashed into artifacts

    std::uint64_t config_hash() const { return fnv1a(canonical_json); }

    BrownianEnsemble make_ensemble() const {
        return BrownianEnsemble::generate(seed, TimeGrid(ensemble.t0, ensemble.t1, ensemble.steps),
                                          ensemble.modes, ensemble.samples);
    }
};

namespace detail {

inline void reject_unknown_keys(const nlohmann::json& obj, const std::set<std::string>& allowed,
                                const std::string& where) {
    if (!obj.is_object()) throw ConfigError("config: " + where + " must be an object");
    for (const auto& [key, value] : obj.items())
        if (!allowed.count(key))
            throw ConfigError("config: unknown key '" + key + "' in " + where);
}

inline double json_exponent(const nlohmann::json& v, const std::string& where) {
    if (v.is_string()) {
        if (v.get<std::string>() == "inf") return kInf;
        throw ConfigError("config: " + where + " must be a number or \"inf\"");
    }
    if (!v.is_number()) throw ConfigError("config: " + where + " must be a number or \"inf\"");
    return v.get<double>();
}

inline Mat json_matrix(const nlohmann::json& v, std::size_t d, const std::string& where) {
    if (!v.is_array() || v.size() != d * d)
        throw ConfigError("config: " + where + " must be a row-major array of length d*d");
    Mat m(d, d);
    for (std::size_t i = 0; i < d * d; ++i) m.data()[i] = v[i].get<double>();
    return m;
}

inline DVec json_vector(const nlohmann::json& v, std::size_t d, const std::string& where) {
    if (!v.is_array() || v.size() != d)
        throw ConfigError("config: " + where + " must be an array of length d");
    DVec out(d);
    for (std::size_t i = 0; i < d; ++i) out[i] = v[i].get<double>();
    return out;
}

inline NoiseModel parse_noise(const nlohmann::json& j, std::size_t d) {
    reject_unknown_keys(j, {"kind", "constants", "matrices", "jordan"}, "noise");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") return NoiseModel::zero(d);
    if (kind == "additive") {
        std::vector<DVec> cs;
        for (const auto& c : j.at("constants")) cs.push_back(json_vector(c, d, "noise.constants"));
        return NoiseModel::additive(d, std::move(cs));
    }
    if (kind == "affine-linear") {
        std::vector<Mat> mats;
        for (const auto& m : j.at("matrices")) mats.push_back(json_matrix(m, d, "noise.matrices"));
        std::vector<DVec> cs;
        if (j.contains("constants"))
            for (const auto& c : j.at("constants"))
                cs.push_back(json_vector(c, d, "noise.constants"));
        else
            cs.assign(mats.size(), DVec(d, 0.0));
        std::optional<JordanForm> jordan;
        if (j.contains("jordan")) {
            const auto& jj = j.at("jordan");
            reject_unknown_keys(jj, {"similarity", "eigenvalues", "sizes"}, "noise.jordan");
            JordanForm jf;
            jf.similarity = json_matrix(jj.at("similarity"), d, "noise.jordan.similarity");
            for (const auto& e : jj.at("eigenvalues")) jf.eigenvalues.push_back(e.get<double>());
            for (const auto& s : jj.at("sizes")) jf.sizes.push_back(s.get<std::size_t>());
            jordan = std::move(jf);
        }
        return NoiseModel::affine_linear(d, std::move(mats), std::move(cs), std::move(jordan));
    }
    throw ConfigError("config: noise.kind must be zero | additive | affine-linear");
}

inline TurningKernel parse_kernel(const nlohmann::json& j) {
    reject_unknown_keys(
        j, {"kind", "rate_coefficient", "h_profile", "delta_width", "support_radius", "kappa"},
        "kernel");
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "zero") return TurningKernel::zero();
    if (kind == "bounded-test")
        return TurningKernel::bounded_test(j.at("kappa").get<double>(),
                                           j.at("support_radius").get<double>());
    if (kind == "angle") {
        AngleKernelParams p;
        const double c = j.at("rate_coefficient").get<double>();
        p.lambda = [c](double s) { return c * s; };
        const std::string hprof = j.value("h_profile", std::string("uniform"));
        if (hprof == "uniform")
            p.h_profile = [](double) { return 1.0; };
        else if (hprof == "cosine")
            p.h_profile = [](double theta) { return 1.0 + 0.5 * std::cos(theta); };
        else
            throw ConfigError("config: kernel.h_profile must be uniform | cosine");
        p.delta_width = j.at("delta_width").get<double>();
        p.support_radius = j.at("support_radius").get<double>();
        if (!validate_rate_bound(p.lambda, std::abs(c) + 1e-9))
            throw ConfigError("config: kernel rate map violates the linear bound");
        return TurningKernel::angle(std::move(p));
    }
    throw ConfigError("config: kernel.kind must be zero | angle | bounded-test");
}

}  // namespace detail

inline const std::set<std::string>& known_scenarios() {
    static const std::set<std::string> names{
        "free-transport-decay", "nilpotent-certificate",   "diagonal-certificate",
        "jordan-certificate",   "rotation-counterexample", "strichartz-homogeneous",
        "chemotaxis-small-data", "admissibility-sweep",    "hoelder-regularity"};
    return names;
}

inline ExperimentConfig parse_config(const nlohmann::json& j) {
    detail::reject_unknown_keys(j,
                                {"scenario", "seed", "output_dir", "dimension", "domain", "noise",
                                 "kernel", "norm", "solver", "ensemble", "params"},
                                "top level");
    ExperimentConfig cfg;
    if (!j.contains("scenario")) throw ConfigError("config: missing 'scenario'");
    cfg.scenario = j.at("scenario").get<std::string>();
    if (!known_scenarios().count(cfg.scenario)) {
        std::string msg = "config: unknown scenario '" + cfg.scenario + "'; known:";
        for (const auto& s : known_scenarios()) msg += " " + s;
        throw ConfigError(msg);
    }
    cfg.seed = j.value("seed", std::uint64_t{0});
    cfg.output_dir = j.value("output_dir", std::string("out"));
    cfg.dimension = j.value("dimension", std::size_t{2});
    if (cfg.dimension < 1 || cfg.dimension > 3)
        throw ConfigError("config: dimension must be 1, 2 or 3");

    if (j.contains("domain")) {
        const auto& dj = j.at("domain");
        detail::reject_unknown_keys(dj, {"box_length", "nx", "v_max", "nv", "v_support_radius"},
                                    "domain");
        cfg.domain.dim = cfg.dimension;
        cfg.domain.box_length = dj.value("box_length", 1.0);
        cfg.domain.nx = dj.value("nx", std::size_t{16});
        cfg.domain.v_max = dj.value("v_max", 1.0);
        cfg.domain.nv = dj.value("nv", std::size_t{16});
        cfg.domain.v_support_radius = dj.value("v_support_radius", cfg.domain.v_max);
        try {
            cfg.domain.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    } else {
        cfg.domain.dim = cfg.dimension;
    }

    if (j.contains("noise")) cfg.noise = detail::parse_noise(j.at("noise"), cfg.dimension);
    if (j.contains("kernel")) cfg.kernel = detail::parse_kernel(j.at("kernel"));

    if (j.contains("norm")) {
        const auto& nj = j.at("norm");
        detail::reject_unknown_keys(nj, {"q", "r", "p", "a"}, "norm");
        cfg.norm.q = detail::json_exponent(nj.at("q"), "norm.q");
        cfg.norm.r = detail::json_exponent(nj.at("r"), "norm.r");
        cfg.norm.p = detail::json_exponent(nj.at("p"), "norm.p");
        cfg.norm.a = detail::json_exponent(nj.at("a"), "norm.a");
        cfg.solver.norm_spec = cfg.norm;
        cfg.solver.a_exponent = cfg.norm.a;
    }

    if (j.contains("solver")) {
        const auto& sj = j.at("solver");
        detail::reject_unknown_keys(sj,
                                    {"horizon", "macro_dt", "picard_tol", "max_picard_iters",
                                     "flow_step", "transport_mode", "interpolation", "a_exponent",
                                     "mass_warn_tol", "sample"},
                                    "solver");
        cfg.solver.horizon = sj.value("horizon", 0.5);
        cfg.solver.macro_dt = sj.value("macro_dt", 0.05);
        cfg.solver.picard_tol = sj.value("picard_tol", 1e-8);
        cfg.solver.max_picard_iters = sj.value("max_picard_iters", 10);
        cfg.solver.flow_step = sj.value("flow_step", 0.01);
        cfg.solver.a_exponent = sj.value("a_exponent", cfg.solver.a_exponent);
        cfg.solver.mass_warn_tol = sj.value("mass_warn_tol", 1e-3);
        cfg.solver.sample = sj.value("sample", std::size_t{0});
        const std::string mode = sj.value("transport_mode", std::string("semi-lagrangian"));
        if (mode == "semi-lagrangian")
            cfg.solver.transport_mode = TransportMode::semi_lagrangian;
        else if (mode == "spectral")
            cfg.solver.transport_mode = TransportMode::spectral;
        else
            throw ConfigError("config: solver.transport_mode must be semi-lagrangian | spectral");
        const std::string interp = sj.value("interpolation", std::string("linear"));
        if (interp == "linear")
            cfg.solver.interpolation = InterpOrder::linear;
        else if (interp == "cubic")
            cfg.solver.interpolation = InterpOrder::cubic;
        else
            throw ConfigError("config: solver.interpolation must be linear | cubic");
        try {
            cfg.solver.validate();
        } catch (const std::invalid_argument& e) {
            throw ConfigError(std::string("config: ") + e.what());
        }
    }

    if (j.contains("ensemble")) {
        const auto& ej = j.at("ensemble");
        detail::reject_unknown_keys(ej, {"samples", "modes", "steps", "t0", "t1"}, "ensemble");
        cfg.ensemble.samples = ej.value("samples", std::size_t{1});
        cfg.ensemble.modes = ej.value("modes", std::size_t{1});
        cfg.ensemble.steps = ej.value("steps", std::size_t{100});
        cfg.ensemble.t0 = ej.value("t0", 0.0);
        cfg.ensemble.t1 = ej.value("t1", 1.0);
        if (cfg.ensemble.steps == 0) throw ConfigError("config: ensemble.steps must be >= 1");
        if (!(cfg.ensemble.t0 < cfg.ensemble.t1))
            throw ConfigError("config: ensemble horizon empty (t0 >= t1)");
    }

    cfg.params = j.value("params", nlohmann::json::object());
    cfg.canonical_json = j.dump();
    return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("config: cannot open " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(std::string("config: JSON parse error: ") + e.what());
    }
    return parse_config(j);
}

}  // namespace kinflow
