#pragma once

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <string>
#include <vector>

#include "kinflow/analysis.hpp"
#include "kinflow/config.hpp"
#include "kinflow/io.hpp"

namespace kinflow {

inline constexpr const char* kVersion = "0.1.0";

namespace detail {

inline void write_summary(const std::filesystem::path& outdir, const ExperimentConfig& cfg,
                          const nlohmann::json& parameters, const nlohmann::json& metrics) {
    nlohmann::json summary;
    summary["experiment"] = cfg.scenario;
    summary["parameters"] = parameters;
    summary["metrics"] = metrics;
    summary["seed"] = cfg.seed;
    summary["config_hash"] = cfg.config_hash();
    summary["version"] = kVersion;
    std::ofstream out(outdir / "summary.json", std::ios::binary);
    if (!out) throw std::runtime_error("cannot write summary.json");
    out << summary.dump(2) << "\n";
}

inline void check_params(const nlohmann::json& params, const std::set<std::string>& allowed,
                         const std::string& scenario) {
    reject_unknown_keys(params, allowed, "params (" + scenario + ")");
}

/// Narrow x-Gaussian times the v-box indicator; the standard dispersion
/// probe (its transported mixed norm carries the clean t^{-d} rate while no
/// backtracked point wraps around the torus).
inline PhaseField decay_packet(const Domain& dom, double sigma_x) {
    const double cx = dom.box_length / 2.0;
    return PhaseField::from_function(dom, [=, &dom](const double* x, const double*) {
        double rx = 0.0;
        for (std::size_t i = 0; i < dom.dim; ++i) rx += (x[i] - cx) * (x[i] - cx);
        return std::exp(-0.5 * rx / (sigma_x * sigma_x));
    });
}

inline PhaseField gaussian_bump(const Domain& dom, double amplitude, double x_width,
                                double v_width) {
    const double cx = dom.box_length / 2.0;
    return PhaseField::from_function(dom, [=, &dom](const double* x, const double* v) {
        double r2 = 0.0;
        for (std::size_t i = 0; i < dom.dim; ++i) {
            r2 += (x[i] - cx) * (x[i] - cx) / (x_width * x_width);
            r2 += v[i] * v[i] / (v_width * v_width);
        }
        return amplitude * std::exp(-0.5 * r2);
    });
}

inline DVec default_lags(const ExperimentConfig& cfg, std::size_t count, double lo, double hi) {
    const double dt = (cfg.ensemble.t1 - cfg.ensemble.t0) / static_cast<double>(cfg.ensemble.steps);
    DVec lags;
    for (std::size_t i = 0; i < count; ++i) {
        const double raw =
            lo * std::pow(hi / lo, static_cast<double>(i) / static_cast<double>(count - 1));
        lags.push_back(std::round(raw / dt) * dt);
    }
    return lags;
}

inline DVec lags_from_params(const ExperimentConfig& cfg, std::size_t count, double lo,
                             double hi) {
    if (cfg.params.contains("lags")) {
        DVec lags;
        for (const auto& l : cfg.params.at("lags")) lags.push_back(l.get<double>());
        return lags;
    }
    return default_lags(cfg, count, lo, hi);
}

inline void require_horizon(const ExperimentConfig& cfg, double needed) {
    if (cfg.ensemble.t0 + needed > cfg.ensemble.t1 + 1e-12)
        throw ConfigError("config: ensemble horizon too short for the scenario (needs " +
                          std::to_string(needed) + ")");
}

inline void run_certificate_scenario(const ExperimentConfig& cfg,
                                     const std::filesystem::path& outdir,
                                     const NoiseModel& model) {
    check_params(cfg.params, {"lags", "floor", "probes"}, cfg.scenario);
    const double floor = cfg.params.value("floor", 0.5);
    const DVec lags = lags_from_params(cfg, 5, 0.2, cfg.ensemble.t1 - cfg.ensemble.t0);
    for (double l : lags) require_horizon(cfg, l);
    const auto ens = cfg.make_ensemble();
    const std::size_t nprobes = cfg.params.value("probes", std::size_t{1});
    std::vector<DVec> probes;
    for (std::size_t p = 0; p < nprobes; ++p) {
        DVec pt(2 * cfg.dimension, 0.0);
        for (std::size_t i = 0; i < cfg.dimension; ++i)
            pt[cfg.dimension + i] =
                (2.0 * rng::uniform(rng::mix64(cfg.seed + 31 * p + i)) - 1.0) *
                cfg.domain.v_support_radius;
        probes.push_back(std::move(pt));
    }
    const auto cert = dispersion_certificate(model, ens, probes, lags, floor);
    write_certificate_csv(cert, (outdir / "certificate.csv").string());
    nlohmann::json metrics;
    metrics["C"] = cert.C;
    metrics["tau"] = cert.tau;
    metrics["deterministic_regime"] = cert.deterministic_regime;
    metrics["floor"] = floor;
    write_summary(outdir, cfg, cfg.params, metrics);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scenario implementations
// ---------------------------------------------------------------------------

inline void scenario_free_transport_decay(const ExperimentConfig& cfg,
                                          const std::filesystem::path& outdir) {
    detail::check_params(cfg.params, {"lags", "sigma_x", "samples", "p", "q"}, cfg.scenario);
    const double sigma_x = cfg.params.value("sigma_x", 0.04 * cfg.domain.box_length / 4.5);
    const double p = cfg.params.contains("p")
                         ? detail::json_exponent(cfg.params.at("p"), "params.p")
                         : kInf;
    const double q = cfg.params.contains("q")
                         ? detail::json_exponent(cfg.params.at("q"), "params.q")
                         : 1.0;
    const DVec lags = detail::lags_from_params(cfg, 6, 0.1, 2.0);
    for (double l : lags) detail::require_horizon(cfg, l);
    const auto ens = cfg.make_ensemble();
    const NoiseModel model = cfg.noise ? *cfg.noise : NoiseModel::zero(cfg.dimension);
    const PhaseField f0 = detail::decay_packet(cfg.domain, sigma_x);
    const std::size_t samples = cfg.params.value("samples", std::size_t{1});

    const auto rep = decay_experiment(f0, model, ens, lags, p, q, samples);
    const auto iso = decay_experiment(f0, model, ens, lags, 2.0, 2.0, samples);
    double iso_dev = 0.0;
    for (double r : iso.ratios) iso_dev = std::max(iso_dev, std::abs(r - 1.0));

    CsvWriter csv((outdir / "decay.csv").string(), {"lag", "ratio"});
    for (std::size_t i = 0; i < lags.size(); ++i) csv.row({lags[i], rep.ratios[i]});
    nlohmann::json metrics;
    metrics["fitted_slope"] = rep.fitted_slope;
    metrics["theoretical_slope"] = rep.theoretical_slope;
    metrics["fit_residual"] = rep.fit_residual;
    metrics["isometry_max_dev"] = iso_dev;
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

inline void scenario_nilpotent_certificate(const ExperimentConfig& cfg,
                                           const std::filesystem::path& outdir) {
    const NoiseModel model =
        cfg.noise ? *cfg.noise
                  : NoiseModel::affine_linear(2, {Mat(2, 2, {0, 1, 0, 0})}, {DVec{0, 0}});
    detail::run_certificate_scenario(cfg, outdir, model);
}

inline void scenario_diagonal_certificate(const ExperimentConfig& cfg,
                                          const std::filesystem::path& outdir) {
    const NoiseModel model =
        cfg.noise ? *cfg.noise
                  : NoiseModel::affine_linear(2, {Mat(2, 2, {1, 0, 0, -1})}, {DVec{0, 0}});
    detail::run_certificate_scenario(cfg, outdir, model);
}

inline void scenario_jordan_certificate(const ExperimentConfig& cfg,
                                        const std::filesystem::path& outdir) {
    NoiseModel model = [&] {
        if (cfg.noise) return *cfg.noise;
        JordanForm jf;
        jf.similarity = Mat(2, 2, {1, 1, 0, 1});
        jf.eigenvalues = {0.5, -0.5};
        jf.sizes = {1, 1};
        const Mat B(2, 2, {0.5, 0, 0, -0.5});
        const Mat sigma2 = jf.similarity * B * inverse(jf.similarity);
        return NoiseModel::affine_linear(2, {sigma2}, {DVec{0, 0}}, jf);
    }();
    detail::run_certificate_scenario(cfg, outdir, model);
}

inline void scenario_rotation_counterexample(const ExperimentConfig& cfg,
                                             const std::filesystem::path& outdir) {
    detail::check_params(cfg.params, {"t", "paths", "dt"}, cfg.scenario);
    const double t = cfg.params.value("t", 2.0);
    const std::size_t paths = cfg.params.value("paths", std::size_t{20000});
    const double dt = cfg.params.value("dt", 1e-3);
    const auto res = counterexample_expectation(t, paths, dt, cfg.seed);
    CsvWriter csv((outdir / "counterexample.csv").string(),
                  {"t", "mc_mean", "std_err", "exact"});
    csv.row({t, res.mc_mean, res.std_err, res.exact});
    nlohmann::json metrics;
    metrics["mc_mean"] = res.mc_mean;
    metrics["std_err"] = res.std_err;
    metrics["exact"] = res.exact;
    metrics["abs_error"] = std::abs(res.mc_mean - res.exact);
    metrics["within_three_sigma"] = std::abs(res.mc_mean - res.exact) <= 3.0 * res.std_err;
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

inline void scenario_strichartz_homogeneous(const ExperimentConfig& cfg,
                                            const std::filesystem::path& outdir) {
    detail::check_params(cfg.params,
                         {"family", "horizons", "time_samples", "v_width", "x_modes"},
                         cfg.scenario);
    const std::size_t family_size = cfg.params.value("family", std::size_t{8});
    const std::size_t time_samples = cfg.params.value("time_samples", std::size_t{9});
    const double v_width = cfg.params.value("v_width", 0.5);
    DVec horizons;
    if (cfg.params.contains("horizons"))
        for (const auto& h : cfg.params.at("horizons")) horizons.push_back(h.get<double>());
    else
        horizons = {0.5, 1.0, 2.0};
    for (double h : horizons) detail::require_horizon(cfg, h);

    const auto ens = cfg.make_ensemble();
    const NoiseModel model = cfg.noise ? *cfg.noise : NoiseModel::zero(cfg.dimension);
    const NormSpec spec = cfg.norm;

    // Band-limited family: one low mode in x with a hashed direction and
    // phase, compactly supported smooth profile in v.
    const std::size_t d = cfg.dimension;
    std::vector<PhaseField> family;
    for (std::size_t m = 0; m < family_size; ++m) {
        double kvec[3], phase;
        for (std::size_t i = 0; i < d; ++i)
            kvec[i] = 1.0 + static_cast<double>(rng::mix64(cfg.seed + 17 * m + i) % 3);
        phase = 6.283185307179586 * rng::uniform(rng::mix64(cfg.seed + 97 * m));
        const double L = cfg.domain.box_length;
        family.push_back(PhaseField::from_function(
            cfg.domain, [=](const double* x, const double* v) {
                double dot = 0.0, rv = 0.0;
                for (std::size_t i = 0; i < d; ++i) {
                    dot += kvec[i] * x[i];
                    rv += v[i] * v[i];
                }
                return (1.0 + 0.5 * std::cos(6.283185307179586 * dot / L + phase)) *
                       std::exp(-0.5 * rv / (v_width * v_width));
            }));
    }

    // tau from a dispersion certificate of the same model over the horizon.
    const DVec cert_lags = detail::default_lags(cfg, 4, horizons.front(), horizons.back());
    const std::vector<DVec> probes{DVec(2 * d, 0.0)};
    const auto cert = dispersion_certificate(model, ens, probes, cert_lags, 0.5);

    CsvWriter csv((outdir / "strichartz.csv").string(), {"horizon", "c_hat"});
    DVec c_hats;
    for (double h : horizons) {
        const auto rep = strichartz_experiment(family, model, ens, spec, h, time_samples);
        c_hats.push_back(rep.c_hat);
        csv.row({h, rep.c_hat});
    }
    // Scale invariance of the ratio under doubling the family.
    std::vector<PhaseField> doubled = family;
    for (auto& f : doubled)
        for (double& v : f.raw()) v *= 2.0;
    const auto rep2 =
        strichartz_experiment(doubled, model, ens, spec, horizons.back(), time_samples);
    const double scale_dev = std::abs(rep2.c_hat - c_hats.back()) /
                             std::max(c_hats.back(), 1e-300);

    const auto window_count = [&](double h) {
        return cert.tau > 0.0 ? std::ceil(h / cert.tau - 1e-12) : 1.0;
    };
    const double growth = (c_hats.back() / c_hats.front()) /
                          (window_count(horizons.back()) / window_count(horizons.front()));
    nlohmann::json metrics;
    metrics["c_hat"] = c_hats.back();
    metrics["c_hats"] = c_hats;
    metrics["scale_invariance_dev"] = scale_dev;
    metrics["tau"] = cert.tau;
    metrics["growth_vs_window_count"] = growth;
    metrics["growth_within_factor_2"] = growth <= 2.0;
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

inline void scenario_chemotaxis_small_data(const ExperimentConfig& cfg,
                                           const std::filesystem::path& outdir) {
    detail::check_params(cfg.params, {"amplitude", "x_width", "v_width", "write_snapshot"},
                         cfg.scenario);
    detail::require_horizon(cfg, cfg.solver.horizon);
    const double amplitude = cfg.params.value("amplitude", 0.15);
    const double x_width = cfg.params.value("x_width", cfg.domain.box_length / 6.0);
    const double v_width = cfg.params.value("v_width", cfg.domain.v_support_radius / 2.5);
    const auto ens = cfg.make_ensemble();
    const NoiseModel model =
        cfg.noise ? *cfg.noise : NoiseModel::additive(cfg.dimension, {DVec(cfg.dimension, 0.05)});
    const TurningKernel K = cfg.kernel ? *cfg.kernel : [&] {
        AngleKernelParams p;
        p.lambda = [](double s) { return 0.5 * s; };
        p.h_profile = [](double) { return 1.0; };
        p.delta_width = 0.3 * cfg.domain.v_support_radius;
        p.support_radius = cfg.domain.v_support_radius;
        return TurningKernel::angle(std::move(p));
    }();

    const PhaseField f0 = detail::gaussian_bump(cfg.domain, amplitude, x_width, v_width);
    const Trajectory traj = solve(f0, K, model, ens, cfg.solver);

    CsvWriter csv((outdir / "diagnostics.csv").string(),
                  {"t", "mass", "min_f", "mixed_norm", "picard_iters", "contraction_ratio"});
    for (const auto& dg : traj.diagnostics)
        csv.row({dg.t, dg.mass, dg.min_f, dg.mixed_norm,
                 static_cast<double>(dg.picard_iters), dg.contraction_ratio});
    if (cfg.params.value("write_snapshot", true))
        write_phase_field(traj.snapshots.back(), (outdir / "snapshot_final.kfpf").string());

    const double mass0 = traj.diagnostics.front().mass;
    double drift = 0.0, min_f = 0.0;
    int max_iters = 0;
    for (const auto& dg : traj.diagnostics) {
        drift = std::max(drift, std::abs(dg.mass - mass0) / std::max(mass0, 1e-300));
        min_f = std::min(min_f, dg.min_f);
        max_iters = std::max(max_iters, dg.picard_iters);
    }
    nlohmann::json metrics;
    metrics["status"] = traj.status;
    metrics["mass_drift_rel"] = drift;
    metrics["min_f"] = min_f;
    metrics["max_picard_iters"] = max_iters;
    metrics["local_in_time"] = traj.local_in_time;
    metrics["end_time"] = traj.end_time;
    metrics["mass_warning"] = traj.mass_warning;
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

inline void scenario_admissibility_sweep(const ExperimentConfig& cfg,
                                         const std::filesystem::path& outdir) {
    detail::check_params(cfg.params, {"tuples_per_d", "grid"}, cfg.scenario);
    const std::size_t tuples = cfg.params.value("tuples_per_d", std::size_t{1000});
    const int grid = cfg.params.value("grid", 20);

    CsvWriter csv((outdir / "sweep.csv").string(),
                  {"d", "q", "r", "p", "a", "admissible", "from_parameter_map"});
    std::size_t random_admissible = 0, map_pass = 0, map_total = 0;
    for (std::size_t d : {1u, 2u, 3u}) {
        for (std::size_t i = 0; i < tuples; ++i) {
            NormSpec s;
            const auto u = [&](std::uint64_t tag) {
                return rng::uniform(rng::mix64(cfg.seed + 1000003 * d + 31 * i + tag));
            };
            s.q = 1.0 + 3.0 * u(0);
            s.r = 1.0 + 3.0 * u(1);
            s.p = 1.0 + 7.0 * u(2);
            s.a = 1.0 + 3.0 * u(3);
            const bool ok = check_admissible(s, d).admissible;
            random_admissible += ok ? 1 : 0;
            csv.row({static_cast<double>(d), s.q, s.r, s.p, s.a, ok ? 1.0 : 0.0, 0.0});
        }
        if (d >= 2) {
            const double dd = static_cast<double>(d);
            const double rhi = (dd + 3.0) / 2.0;
            const double alo = std::max(dd / 2.0, dd / (dd - 1.0));
            for (int i = 1; i <= grid; ++i) {
                const double r = 2.0 + (rhi - 2.0) * i / grid;
                for (int j = 0; j <= grid; ++j) {
                    if (alo > r) continue;
                    const double a = alo + (r - alo) * j / grid;
                    const NormSpec s = scaling_tuple(a, r, d);
                    const bool ok = check_admissible(s, d).admissible;
                    ++map_total;
                    map_pass += ok ? 1 : 0;
                    csv.row({static_cast<double>(d), s.q, s.r, s.p, s.a, ok ? 1.0 : 0.0, 1.0});
                }
            }
        }
    }
    nlohmann::json metrics;
    metrics["random_tuples_per_d"] = tuples;
    metrics["random_admissible"] = random_admissible;
    metrics["parameter_map_total"] = map_total;
    metrics["parameter_map_admissible"] = map_pass;
    metrics["parameter_map_all_pass"] = map_pass == map_total;
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

inline void scenario_hoelder_regularity(const ExperimentConfig& cfg,
                                        const std::filesystem::path& outdir) {
    detail::check_params(cfg.params, {"lambda_margin", "amplitude", "refine"}, cfg.scenario);
    detail::require_horizon(cfg, cfg.solver.horizon);
    const double margin = cfg.params.value("lambda_margin", 1.0);
    const double amplitude = cfg.params.value("amplitude", 0.15);
    const auto ens = cfg.make_ensemble();
    const NoiseModel model =
        cfg.noise ? *cfg.noise : NoiseModel::additive(cfg.dimension, {DVec(cfg.dimension, 0.1)});
    const TurningKernel K = cfg.kernel ? *cfg.kernel : TurningKernel::zero();
    const PhaseField f0 = detail::gaussian_bump(cfg.domain, amplitude,
                                                cfg.domain.box_length / 6.0,
                                                cfg.domain.v_support_radius / 2.5);
    const double r = cfg.norm.r;
    const double lambda = 4.0 * r / (r - 2.0) + margin;
    const double kappa = (lambda * (0.5 - 1.0 / r) - 1.0) / lambda;

    const auto observable_series = [&](const BrownianEnsemble& ens_use, double macro_dt,
                                       double flow_step) {
        SolverConfig sc = cfg.solver;
        sc.macro_dt = macro_dt;
        sc.flow_step = flow_step;
        const Trajectory traj = solve(f0, K, model, ens_use, sc);
        std::vector<std::pair<double, double>> series;
        const Domain& dom = cfg.domain;
        for (std::size_t i = 0; i < traj.times.size(); ++i) {
            double val = 0.0;
            for (std::size_t xi = 0; xi < dom.x_count(); ++xi) {
                double x[3];
                dom.x_point(xi, x);
                const double wphi = std::cos(6.283185307179586 * x[0] / dom.box_length);
                for (std::size_t vi = 0; vi < dom.v_count(); ++vi) {
                    double v[3];
                    dom.v_point(vi, v);
                    double rv = 0.0;
                    for (std::size_t k = 0; k < dom.dim; ++k) rv += v[k] * v[k];
                    val += traj.snapshots[i].value(xi, vi) * wphi * std::exp(-rv);
                }
            }
            series.emplace_back(traj.times[i],
                                val * std::pow(dom.hx() * dom.hv(),
                                               static_cast<double>(dom.dim)));
        }
        return series;
    };

    const auto series = observable_series(ens, cfg.solver.macro_dt, cfg.solver.flow_step);
    const double sn = hoelder_seminorm(series, kappa, lambda);
    double sn_fine = sn;
    if (cfg.params.value("refine", true)) {
        // Halve the window and flow step together; the bridge-refined
        // ensemble keeps the same path realization at shared nodes.
        const auto fine = observable_series(ens.refine(2), cfg.solver.macro_dt / 2.0,
                                            cfg.solver.flow_step / 2.0);
        sn_fine = hoelder_seminorm(fine, kappa, lambda);
    }

    CsvWriter csv((outdir / "hoelder.csv").string(), {"t", "observable"});
    for (const auto& [t, v] : series) csv.row({t, v});
    nlohmann::json metrics;
    metrics["seminorm"] = sn;
    metrics["seminorm_refined"] = sn_fine;
    metrics["kappa"] = kappa;
    metrics["lambda"] = lambda;
    metrics["rel_dev"] = std::abs(sn_fine - sn) / std::max(std::abs(sn), 1e-300);
    detail::write_summary(outdir, cfg, cfg.params, metrics);
}

// ---------------------------------------------------------------------------
// Registry and runner
// ---------------------------------------------------------------------------

struct ScenarioEntry {
    std::string name;
    std::string description;
    std::function<void(const ExperimentConfig&, const std::filesystem::path&)> run;
};

inline const std::vector<ScenarioEntry>& scenario_registry() {
    static const std::vector<ScenarioEntry> registry{
        {"admissibility-sweep",
         "evaluate the admissibility predicate on random tuples and the scaling parameter map",
         scenario_admissibility_sweep},
        {"chemotaxis-small-data",
         "full stochastic chemotaxis solve with mass/positivity/contraction diagnostics",
         scenario_chemotaxis_small_data},
        {"diagonal-certificate",
         "dispersion certificate for trace-free diagonal affine noise",
         scenario_diagonal_certificate},
        {"free-transport-decay",
         "dispersive decay slope and isometry check for the zero-noise flow",
         scenario_free_transport_decay},
        {"hoelder-regularity",
         "Hoelder-in-time seminorm of a solver observable with refinement check",
         scenario_hoelder_regularity},
        {"jordan-certificate",
         "dispersion certificate for a Jordan-similar affine matrix",
         scenario_jordan_certificate},
        {"nilpotent-certificate",
         "dispersion certificate for the nilpotent shear catalog",
         scenario_nilpotent_certificate},
        {"rotation-counterexample",
         "Monte Carlo of the rotation example against its closed-form expectation",
         scenario_rotation_counterexample},
        {"strichartz-homogeneous",
         "empirical homogeneous Strichartz constants across horizons",
         scenario_strichartz_homogeneous},
    };
    return registry;
}

inline std::string list_scenarios() {
    std::string out;
    for (const auto& e : scenario_registry()) out += e.name + "  -  " + e.description + "\n";
    return out;
}

/// Runs the configured scenario, writing artifacts into
/// output_dir (created if needed). Throws ConfigError for validation
/// problems and std::runtime_error for numerical aborts.
inline void run_scenario(const ExperimentConfig& cfg) {
    const std::filesystem::path outdir = cfg.output_dir;
    std::filesystem::create_directories(outdir);
    for (const auto& e : scenario_registry())
        if (e.name == cfg.scenario) {
            e.run(cfg, outdir);
            return;
        }
    throw ConfigError("unknown scenario: " + cfg.scenario);
}

}  // namespace kinflow
