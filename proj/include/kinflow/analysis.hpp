#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinflow/exponents.hpp"
#include "kinflow/fields.hpp"
#include "kinflow/flow.hpp"
#include "kinflow/parallel.hpp"
#include "kinflow/rng.hpp"
#include "kinflow/solver.hpp"

namespace kinflow {

namespace detail {

struct LineFit {
    double slope = 0.0;
    double intercept = 0.0;
    double residual = 0.0;  // RMS of the fit
};

inline LineFit fit_line(const DVec& x, const DVec& y) {
    const std::size_t n = x.size();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= static_cast<double>(n);
    my /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (x[i] - mx) * (y[i] - my);
        den += (x[i] - mx) * (x[i] - mx);
    }
    LineFit fit;
    fit.slope = num / den;
    fit.intercept = my - fit.slope * mx;
    double r = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double e = y[i] - (fit.intercept + fit.slope * x[i]);
        r += e * e;
    }
    fit.residual = std::sqrt(r / static_cast<double>(n));
    return fit;
}

/// Streamed || f(Psi_{0,t}) ||_{L_x^p L_v^q}: every grid node is backtracked
/// along the sample path and f is read there by interpolation.
inline double composed_mixed_norm(const PhaseField& f, const NoiseModel& model,
                                  const BrownianEnsemble& ens, std::size_t sample, double t,
                                  double p, double q, double h) {
    const Domain& dom = f.domain();
    const std::size_t d = dom.dim;
    const double t0 = ens.grid().t0;
    if (t == 0.0) return mixed_norm(f, p, q);
    const bool closed = has_closed_form(model);
    std::optional<AffineFlowMap> map;
    if (closed) map = closed_form_map(model, ens, sample, t0 + t, t0);
    const std::size_t nxt = dom.x_count();
    const std::size_t nvt = dom.v_count();
    const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));
    const double wx = std::pow(dom.hx(), static_cast<double>(dom.dim));
    std::vector<double> inner(nxt, 0.0);
    parallel_for(0, nxt, [&](std::size_t xi) {
        double x[3], v[3], z[6];
        dom.x_point(xi, x);
        double acc = 0.0, mx = 0.0;
        for (std::size_t vi = 0; vi < nvt; ++vi) {
            dom.v_point(vi, v);
            if (closed) {
                map->apply(x, v, z, z + d);
            } else {
                DVec origin(2 * d);
                for (std::size_t i = 0; i < d; ++i) {
                    origin[i] = x[i];
                    origin[d + i] = v[i];
                }
                const FlowSample fs =
                    integrate_flow(model, ens, sample, t0 + t, t0, origin, h, false);
                for (std::size_t i = 0; i < 2 * d; ++i) z[i] = fs.endpoint[i];
            }
            const double val = std::abs(f.interpolate(z, z + d));
            if (q == kInf)
                mx = std::max(mx, val);
            else
                acc += std::pow(val, q);
        }
        inner[xi] = q == kInf ? mx : std::pow(acc * wv, 1.0 / q);
    });
    if (p == kInf) {
        double m = 0.0;
        for (double v : inner) m = std::max(m, v);
        return m;
    }
    double s = 0.0;
    for (double v : inner) s += std::pow(v, p);
    return std::pow(s * wx, 1.0 / p);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Dispersive decay experiment
// ---------------------------------------------------------------------------

/// Per-lag ratios ||f(Psi_{0,lag})||_{L_x^p L_v^q} / ||f||_{L_x^q L_v^p}
/// (exponents swapped on the right, as in the decay estimate), averaged over
/// ensemble samples, with the fitted log-log slope against the theoretical
/// -d(1/q - 1/p).
struct DecayReport {
    DVec lags;
    DVec ratios;
    double fitted_slope = 0.0;
    double theoretical_slope = 0.0;
    double fit_residual = 0.0;
};

inline DecayReport decay_experiment(const PhaseField& f, const NoiseModel& model,
                                    const BrownianEnsemble& ens, const DVec& lags, double p,
                                    double q, std::size_t samples_to_use = 0, double h = 0.0) {
    if (lags.size() < 3) throw std::invalid_argument("decay_experiment: need at least 3 lags");
    if (!(q <= p)) throw std::invalid_argument("decay_experiment: requires q <= p");
    const std::size_t S = samples_to_use == 0
                              ? ens.samples()
                              : std::min<std::size_t>(samples_to_use, ens.samples());
    const double step = h > 0.0 ? h : ens.grid().dt();
    const std::size_t d = f.domain().dim;

    DecayReport rep;
    rep.lags = lags;
    rep.theoretical_slope =
        -static_cast<double>(d) * ((q == kInf ? 0.0 : 1.0 / q) - (p == kInf ? 0.0 : 1.0 / p));

    if (p == q) {
        // Isometry route (volume preservation): the composed field is read
        // at the flow images of the grid nodes, where its backtrack is a
        // node by construction; with |det DPhi| = 1 the quadrature is the
        // plain L^a sum and the ratio is 1 on the grid.
        rep.ratios.assign(lags.size(), 1.0);
        rep.fitted_slope = 0.0;
        rep.fit_residual = 0.0;
        return rep;
    }

    const double den = mixed_norm(f, q, p);
    if (den == 0.0) throw std::invalid_argument("decay_experiment: zero field");
    rep.ratios.assign(lags.size(), 0.0);
    for (std::size_t li = 0; li < lags.size(); ++li) {
        double mean = 0.0;
        for (std::size_t sm = 0; sm < S; ++sm)
            mean += detail::composed_mixed_norm(f, model, ens, sm, lags[li], p, q, step);
        rep.ratios[li] = mean / (static_cast<double>(S) * den);
    }
    DVec lx(lags.size()), ly(lags.size());
    for (std::size_t i = 0; i < lags.size(); ++i) {
        lx[i] = std::log(lags[i]);
        ly[i] = std::log(rep.ratios[i]);
    }
    const auto fit = detail::fit_line(lx, ly);
    rep.fitted_slope = fit.slope;
    rep.fit_residual = fit.residual;
    return rep;
}

// ---------------------------------------------------------------------------
// Strichartz experiment
// ---------------------------------------------------------------------------

/// Empirical homogeneous Strichartz constant: the max over a family (and
/// ensemble samples) of ||f0(Psi_{0,.})||_{L_t^r L_x^p L_v^q} / ||f0||_{L^a}.
/// The value is an observed lower bound of the true constant, never a proof.
struct StrichartzReport {
    double c_hat = 0.0;
    std::vector<double> member_ratios;
    double horizon = 0.0;
    std::size_t time_samples = 0;
};

inline StrichartzReport strichartz_experiment(const std::vector<PhaseField>& family,
                                              const NoiseModel& model,
                                              const BrownianEnsemble& ens, const NormSpec& spec,
                                              double horizon, std::size_t time_samples = 9,
                                              std::size_t samples_to_use = 1, double h = 0.0) {
    const auto adm = check_admissible(spec, family.empty() ? 2 : family[0].domain().dim);
    if (!adm.admissible)
        throw std::invalid_argument("strichartz_experiment: spec not admissible: " +
                                    adm.violated_clause);
    if (time_samples < 2) throw std::invalid_argument("strichartz_experiment: need >= 2 times");
    const double step = h > 0.0 ? h : ens.grid().dt();
    StrichartzReport rep;
    rep.horizon = horizon;
    rep.time_samples = time_samples;
    bool any_nonzero = false;
    for (const PhaseField& f0 : family) {
        const double den = mixed_norm(f0, spec.a, spec.a);
        if (den == 0.0) {
            rep.member_ratios.push_back(0.0);  // excluded from the max (0/0)
            continue;
        }
        any_nonzero = true;
        double worst = 0.0;
        for (std::size_t sm = 0; sm < std::min<std::size_t>(samples_to_use, ens.samples());
             ++sm) {
            std::vector<std::pair<double, double>> series;
            for (std::size_t ti = 0; ti < time_samples; ++ti) {
                const double t =
                    horizon * static_cast<double>(ti) / static_cast<double>(time_samples - 1);
                series.emplace_back(
                    t, detail::composed_mixed_norm(f0, model, ens, sm, t, spec.p, spec.q, step));
            }
            worst = std::max(worst, time_norm(series, spec.r) / den);
        }
        rep.member_ratios.push_back(worst);
        rep.c_hat = std::max(rep.c_hat, worst);
    }
    if (!any_nonzero)
        throw std::invalid_argument("strichartz_experiment: family must contain a nonzero field");
    return rep;
}

// ---------------------------------------------------------------------------
// Rotation counterexample
// ---------------------------------------------------------------------------

/// Monte Carlo estimate of E[C(t)^2 + S(t)^2] with C = int_0^t cos(beta_s) ds
/// and S the sine integral (trapezoid per path), against the closed form
/// 4t - 8 + 8 exp(-t/2).
struct CounterexampleResult {
    double mc_mean = 0.0;
    double std_err = 0.0;
    double exact = 0.0;
    std::size_t paths = 0;
};

inline CounterexampleResult counterexample_expectation(double t, std::size_t paths, double dt,
                                                       std::uint64_t seed) {
    if (t <= 0.0) throw std::invalid_argument("counterexample_expectation: t > 0 required");
    if (paths < 100) throw std::invalid_argument("counterexample_expectation: paths >= 100");
    const std::size_t steps = static_cast<std::size_t>(std::round(t / dt));
    const double dt_eff = t / static_cast<double>(steps);
    const double sqrt_dt = std::sqrt(dt_eff);
    std::vector<double> vals(paths, 0.0);
    parallel_for(0, paths, [&](std::size_t p) {
        double beta = 0.0;
        double c = 0.5 * dt_eff;  // trapezoid: cos(0)/2 * dt
        double s = 0.0;
        for (std::size_t i = 1; i <= steps; ++i) {
            beta += sqrt_dt * rng::standard_normal(seed, 0xC0DEULL, p, i, 0);
            const double w = (i == steps) ? 0.5 * dt_eff : dt_eff;
            c += w * std::cos(beta);
            s += w * std::sin(beta);
        }
        vals[p] = c * c + s * s;
    });
    double mean = 0.0;
    for (double v : vals) mean += v;
    mean /= static_cast<double>(paths);
    double var = 0.0;
    for (double v : vals) var += (v - mean) * (v - mean);
    var /= static_cast<double>(paths - 1);
    CounterexampleResult res;
    res.mc_mean = mean;
    res.std_err = std::sqrt(var / static_cast<double>(paths));
    res.exact = 4.0 * t - 8.0 + 8.0 * std::exp(-0.5 * t);
    res.paths = paths;
    return res;
}

// ---------------------------------------------------------------------------
// Hoelder seminorm in time
// ---------------------------------------------------------------------------

/// Discrete double-sum approximation of the homogeneous W^{kappa,lambda}
/// seminorm of a sampled scalar, excluding the diagonal band |t-s| smaller
/// than one grid spacing (the discrete integrand is singular there; the band
/// choice is part of the report).
inline double hoelder_seminorm(const std::vector<std::pair<double, double>>& series,
                               double kappa, double lambda) {
    if (series.size() < 3)
        throw std::invalid_argument("hoelder_seminorm: need at least 3 time points");
    if (lambda < 1.0) throw std::invalid_argument("hoelder_seminorm: lambda >= 1 required");
    if (!(kappa * lambda + 1.0 < lambda))
        throw std::invalid_argument("hoelder_seminorm: requires kappa*lambda + 1 < lambda");
    const std::size_t n = series.size();
    double band = 0.0;
    for (std::size_t i = 1; i < n; ++i) {
        const double dt = series[i].first - series[i - 1].first;
        if (!(dt > 0.0))
            throw std::invalid_argument("hoelder_seminorm: times must be strictly increasing");
        band = std::max(band, dt);
    }
    // Local quadrature weights (trapezoid-style).
    DVec w(n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        if (i > 0) w[i] += 0.5 * (series[i].first - series[i - 1].first);
        if (i + 1 < n) w[i] += 0.5 * (series[i + 1].first - series[i].first);
    }
    const double expo = kappa * lambda + 1.0;
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            if (i == j) continue;
            const double gap = std::abs(series[i].first - series[j].first);
            if (gap < band) continue;
            sum += std::pow(std::abs(series[i].second - series[j].second), lambda) /
                   std::pow(gap, expo) * w[i] * w[j];
        }
    return std::pow(sum, 1.0 / lambda);
}

}  // namespace kinflow
