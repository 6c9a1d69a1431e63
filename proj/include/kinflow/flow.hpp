#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kinflow/brownian.hpp"
#include "kinflow/io.hpp"
#include "kinflow/linalg.hpp"
#include "kinflow/noise.hpp"
#include "kinflow/parallel.hpp"

namespace kinflow {

/// One realization of the stochastic flow Phi_{s,t}(x,v) on a fixed driving
/// path: endpoint, full 2d x 2d Jacobian, and its determinant. At t == s the
/// endpoint equals the origin and the Jacobian is the identity.
struct FlowSample {
    double s = 0.0;
    double t = 0.0;
    DVec origin;    // (x, v), size 2d
    DVec endpoint;  // (X_t, V_t), size 2d
    Mat jacobian;   // D Phi_{s,t}, 2d x 2d
    double det_jacobian = 1.0;
    std::size_t sample = 0;
    bool has_jacobian = false;
};

struct VolumeReport {
    bool pass = false;
    double deviation = 0.0;  // |det DPhi - 1|
};

inline VolumeReport volume_check(const FlowSample& fs, double tol) {
    VolumeReport rep;
    rep.deviation = std::abs(fs.det_jacobian - 1.0);
    rep.pass = rep.deviation <= tol;
    return rep;
}

namespace detail {

/// Validates that [min(s,t), max(s,t)] lies on the Brownian grid and that h
/// steps land on grid nodes; returns (node index of s, signed node stride).
struct StepPlan {
    std::size_t start_node = 0;
    std::ptrdiff_t stride = 0;  // signed nodes per integrator step
    std::size_t nsteps = 0;
    double dt = 0.0;  // signed step
};

inline StepPlan plan_steps(const TimeGrid& grid, double s, double t, double h) {
    if (h <= 0.0) throw std::invalid_argument("integrate_flow: h must be positive");
    const std::size_t is = grid.index_of(s);
    const std::size_t it = grid.index_of(t);
    const double per = h / grid.dt();
    const double rounded = std::round(per);
    if (rounded < 0.5 || std::abs(per - rounded) > 1e-9 * std::max(1.0, per))
        throw std::invalid_argument("integrate_flow: h does not align with the Brownian grid");
    const auto nodes_per_step = static_cast<std::size_t>(rounded);
    const std::size_t span = it >= is ? it - is : is - it;
    if (span % nodes_per_step != 0)
        throw std::invalid_argument("integrate_flow: [s,t] is not a whole number of steps");
    StepPlan p;
    p.start_node = is;
    p.nsteps = span / nodes_per_step;
    p.stride = it >= is ? static_cast<std::ptrdiff_t>(nodes_per_step)
                        : -static_cast<std::ptrdiff_t>(nodes_per_step);
    p.dt = grid.dt() * static_cast<double>(p.stride);
    return p;
}

}  // namespace detail

/// Integrates the characteristic SDE dX = V dt, dV = sum_k sigma^k(X,V) o dbeta^k
/// with the Stratonovich Heun predictor-corrector, reading increments from the
/// shared ensemble. For t < s the same path is traversed backwards, which
/// realizes the inverse flow Psi_{s,t} = Phi_{t,s}. The Jacobian is advanced
/// by the variational equation with the same increments.
inline FlowSample integrate_flow(const NoiseModel& model, const BrownianEnsemble& ens,
                                 std::size_t sample, double s, double t, const DVec& origin,
                                 double h, bool with_jacobian = true) {
    const std::size_t d = model.dim();
    if (origin.size() != 2 * d) throw std::invalid_argument("integrate_flow: origin size != 2d");
    if (sample >= ens.samples()) throw std::out_of_range("integrate_flow: sample out of range");
    const auto plan = detail::plan_steps(ens.grid(), s, t, h);

    FlowSample fs;
    fs.s = s;
    fs.t = t;
    fs.origin = origin;
    fs.sample = sample;
    fs.endpoint = origin;
    fs.has_jacobian = with_jacobian;

    const std::size_t K = model.modes();
    DVec x(origin.begin(), origin.begin() + d);
    DVec v(origin.begin() + d, origin.end());
    DVec db(K), sig(d), diff0(d, 0.0), diff1(d, 0.0);
    DVec xp(d), vp(d);

    Mat J, Jp;
    std::vector<Mat> dx0(K), dv0(K), dx1(K), dv1(K);
    if (with_jacobian) J = Mat::identity(2 * d);

    std::size_t node = plan.start_node;
    for (std::size_t step = 0; step < plan.nsteps; ++step) {
        const std::size_t next = static_cast<std::size_t>(
            static_cast<std::ptrdiff_t>(node) + plan.stride);
        for (std::size_t k = 0; k < K; ++k) db[k] = ens.increment(sample, k, node, next);

        // Diffusion increment sum_k sigma^k dbeta^k at the current state.
        std::fill(diff0.begin(), diff0.end(), 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            const DVec sk = model.eval_sigma(k, x, v);
            for (std::size_t i = 0; i < d; ++i) diff0[i] += sk[i] * db[k];
            if (with_jacobian) {
                dx0[k] = model.jacobian_x(k, x, v);
                dv0[k] = model.jacobian_v(k, x, v);
            }
        }
        // Predictor.
        for (std::size_t i = 0; i < d; ++i) {
            xp[i] = x[i] + plan.dt * v[i];
            vp[i] = v[i] + diff0[i];
        }
        std::fill(diff1.begin(), diff1.end(), 0.0);
        for (std::size_t k = 0; k < K; ++k) {
            const DVec sk = model.eval_sigma(k, xp, vp);
            for (std::size_t i = 0; i < d; ++i) diff1[i] += sk[i] * db[k];
            if (with_jacobian) {
                dx1[k] = model.jacobian_x(k, xp, vp);
                dv1[k] = model.jacobian_v(k, xp, vp);
            }
        }

        if (with_jacobian) {
            // Variational increments: top rows couple to the bottom block of
            // J via the free-streaming drift, bottom rows via D sigma.
            const auto bottom_rows = [&](const std::vector<Mat>& dxs, const std::vector<Mat>& dvs,
                                         const Mat& Jm) {
                Mat g(d, 2 * d);
                for (std::size_t k = 0; k < K; ++k)
                    for (std::size_t i = 0; i < d; ++i)
                        for (std::size_t j = 0; j < 2 * d; ++j) {
                            double acc = 0.0;
                            for (std::size_t m = 0; m < d; ++m)
                                acc += dxs[k](i, m) * Jm(m, j) + dvs[k](i, m) * Jm(d + m, j);
                            g(i, j) += acc * db[k];
                        }
                return g;
            };
            const Mat g0 = bottom_rows(dx0, dv0, J);
            Jp = J;
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < 2 * d; ++j) {
                    Jp(i, j) += plan.dt * J(d + i, j);
                    Jp(d + i, j) += g0(i, j);
                }
            const Mat g1 = bottom_rows(dx1, dv1, Jp);
            for (std::size_t i = 0; i < d; ++i)
                for (std::size_t j = 0; j < 2 * d; ++j) {
                    J(i, j) += 0.5 * plan.dt * (J(d + i, j) + Jp(d + i, j));
                    J(d + i, j) += 0.5 * (g0(i, j) + g1(i, j));
                }
        }
        // Corrector for the state.
        for (std::size_t i = 0; i < d; ++i) {
            const double xnew = x[i] + 0.5 * plan.dt * (v[i] + vp[i]);
            const double vnew = v[i] + 0.5 * (diff0[i] + diff1[i]);
            x[i] = xnew;
            v[i] = vnew;
        }
        node = next;
    }

    for (std::size_t i = 0; i < d; ++i) {
        fs.endpoint[i] = x[i];
        fs.endpoint[d + i] = v[i];
    }
    if (with_jacobian) {
        fs.jacobian = J;
        fs.det_jacobian = det(J);
    } else {
        fs.jacobian = Mat();
        fs.det_jacobian = 1.0;
    }
    return fs;
}

// ---------------------------------------------------------------------------
// Closed-form flows for the affine-linear catalog (sigma^k(v) = S2^k v + c^k).
// ---------------------------------------------------------------------------

namespace detail {

inline bool is_zero_matrix(const Mat& m, double tol = 0.0) {
    return m.max_abs() <= tol;
}

inline bool is_diagonal(const Mat& m) {
    for (std::size_t i = 0; i < m.rows(); ++i)
        for (std::size_t j = 0; j < m.cols(); ++j)
            if (i != j && m(i, j) != 0.0) return false;
    return true;
}

inline bool is_nilpotent(const Mat& m) {
    Mat p = m;
    for (std::size_t n = 1; n < m.rows(); ++n) p = p * m;
    const double scale = std::pow(std::max(m.max_abs(), 1.0), static_cast<double>(m.rows()));
    return p.max_abs() <= 1e-12 * scale;
}

enum class AffineCase { none, all_zero, diagonal, nilpotent, jordan };

inline AffineCase classify_affine(const NoiseModel& model) {
    if (model.kind() == NoiseKind::zero) return AffineCase::all_zero;
    if (model.kind() == NoiseKind::additive) return AffineCase::all_zero;
    if (model.kind() != NoiseKind::affine_linear) return AffineCase::none;
    bool all_zero = true, all_diag = true;
    for (const Mat& m : model.sigma2()) {
        if (!is_zero_matrix(m)) all_zero = false;
        if (!is_diagonal(m)) all_diag = false;
    }
    if (all_zero) return AffineCase::all_zero;
    if (all_diag) return AffineCase::diagonal;
    if (model.modes() == 1 && model.jordan()) return AffineCase::jordan;
    if (model.modes() == 1 && is_nilpotent(model.sigma2()[0])) return AffineCase::nilpotent;
    return AffineCase::none;
}

/// exp of a single Jordan block: e^{b J} = e^{b lambda} * U with
/// U_ij = b^{j-i} / (j-i)!  (factorial weights; block sizes <= 2 coincide
/// with the weightless unipotent factor).
inline void jordan_block_exp(double b, double lambda, std::size_t size, Mat& out,
                             std::size_t offset) {
    const double e = std::exp(b * lambda);
    for (std::size_t i = 0; i < size; ++i) {
        double w = e;  // b^0 / 0!
        for (std::size_t j = i; j < size; ++j) {
            out(offset + i, offset + j) = w;
            w *= b / static_cast<double>(j - i + 1);
        }
    }
}

}  // namespace detail

inline bool has_closed_form(const NoiseModel& model) {
    return detail::classify_affine(model) != detail::AffineCase::none;
}

/// The closed-form flow of an affine-linear catalog model, reduced to an
/// affine map on phase space for one (sample, s, t):
///   X_t = x + position_block * v + x_shift
///   V_t = velocity_block * v + v_shift
///   D Phi = [[I, position_block], [0, velocity_block]].
/// position_block = int_s^t exp(sum_k (beta^k_u - beta^k_s) S2^k) du via
/// composite Simpson on the Brownian grid; det of the full Jacobian is
/// exp(sum_k (beta^k_t - beta^k_s) tr S2^k), analytically.
struct AffineFlowMap {
    double s = 0.0, t = 0.0;
    std::size_t dim = 0;
    std::size_t sample = 0;
    Mat position_block;   // D_v Phi^(1)
    Mat velocity_block;   // D_v Phi^(2) = E(t)
    DVec x_shift, v_shift;
    double det_full = 1.0;

    void apply(const double* x, const double* v, double* x_out, double* v_out) const {
        for (std::size_t i = 0; i < dim; ++i) {
            double xs = x[i] + x_shift[i];
            double vs = v_shift[i];
            for (std::size_t j = 0; j < dim; ++j) {
                xs += position_block(i, j) * v[j];
                vs += velocity_block(i, j) * v[j];
            }
            x_out[i] = xs;
            v_out[i] = vs;
        }
    }

    double det_velocity_dispersion() const { return det(position_block); }
};

inline AffineFlowMap closed_form_map(const NoiseModel& model, const BrownianEnsemble& ens,
                                     std::size_t sample, double s, double t) {
    using detail::AffineCase;
    const AffineCase kase = detail::classify_affine(model);
    if (kase == AffineCase::none)
        throw std::invalid_argument("closed_form_map: matrix outside the supported catalog");
    if (sample >= ens.samples()) throw std::out_of_range("closed_form_map: sample out of range");
    const std::size_t d = model.dim();
    const std::size_t K = model.modes();
    const TimeGrid& grid = ens.grid();
    const std::size_t is = grid.index_of(s);
    const std::size_t it = grid.index_of(t);
    const bool forward = it >= is;
    const std::size_t lo = forward ? is : it;
    const std::size_t hi = forward ? it : is;
    const std::size_t n = hi - lo;  // grid intervals spanned

    // E(u) at every node of [lo, hi], anchored at s.
    std::vector<Mat> E(n + 1);
    const bool need_inverse = [&] {
        if (model.kind() == NoiseKind::affine_linear)
            for (const auto& c : model.constants())
                if (norm_inf(c) != 0.0) return true;
        return model.kind() == NoiseKind::additive;
    }();
    std::vector<Mat> Einv(need_inverse ? n + 1 : 0);

    std::vector<Mat> sigma_pows;  // nilpotent case: S2^0 .. S2^{d-1}
    Mat Sinv;
    if (kase == AffineCase::nilpotent) {
        sigma_pows.resize(d);
        sigma_pows[0] = Mat::identity(d);
        for (std::size_t p = 1; p < d; ++p) sigma_pows[p] = sigma_pows[p - 1] * model.sigma2()[0];
    } else if (kase == AffineCase::jordan) {
        Sinv = inverse(model.jordan()->similarity);
    }

    for (std::size_t idx = 0; idx <= n; ++idx) {
        const std::size_t node = lo + idx;
        switch (kase) {
            case AffineCase::all_zero:
                E[idx] = Mat::identity(d);
                if (need_inverse) Einv[idx] = Mat::identity(d);
                break;
            case AffineCase::diagonal: {
                E[idx] = Mat(d, d);
                if (need_inverse) Einv[idx] = Mat(d, d);
                for (std::size_t i = 0; i < d; ++i) {
                    double expo = 0.0;
                    for (std::size_t k = 0; k < K; ++k)
                        expo += model.sigma2()[k](i, i) * ens.increment(sample, k, is, node);
                    E[idx](i, i) = std::exp(expo);
                    if (need_inverse) Einv[idx](i, i) = std::exp(-expo);
                }
                break;
            }
            case AffineCase::nilpotent: {
                const double b = ens.increment(sample, 0, is, node);
                Mat m(d, d);
                double w = 1.0;
                for (std::size_t p = 0; p < d; ++p) {
                    m += sigma_pows[p] * w;
                    w *= b / static_cast<double>(p + 1);
                }
                E[idx] = m;
                if (need_inverse) {
                    Mat mi(d, d);
                    double wi = 1.0;
                    for (std::size_t p = 0; p < d; ++p) {
                        mi += sigma_pows[p] * wi;
                        wi *= -b / static_cast<double>(p + 1);
                    }
                    Einv[idx] = mi;
                }
                break;
            }
            case AffineCase::jordan: {
                const double b = ens.increment(sample, 0, is, node);
                const auto& jf = *model.jordan();
                Mat blk(d, d);
                std::size_t off = 0;
                for (std::size_t bi = 0; bi < jf.sizes.size(); ++bi) {
                    detail::jordan_block_exp(b, jf.eigenvalues[bi], jf.sizes[bi], blk, off);
                    off += jf.sizes[bi];
                }
                E[idx] = jf.similarity * blk * Sinv;
                if (need_inverse) {
                    Mat blki(d, d);
                    off = 0;
                    for (std::size_t bi = 0; bi < jf.sizes.size(); ++bi) {
                        detail::jordan_block_exp(-b, jf.eigenvalues[bi], jf.sizes[bi], blki, off);
                        off += jf.sizes[bi];
                    }
                    Einv[idx] = jf.similarity * blki * Sinv;
                }
                break;
            }
            case AffineCase::none:
                break;
        }
    }

    // Composite Simpson with positive weights; odd interval counts get a
    // trapezoid tail. Orientation sign restores int_s^t when t < s.
    DVec w(n + 1, 0.0);
    if (n >= 1) {
        const double hdt = grid.dt();
        std::size_t j = 0;
        while (j + 2 <= n) {
            w[j] += hdt / 3.0;
            w[j + 1] += 4.0 * hdt / 3.0;
            w[j + 2] += hdt / 3.0;
            j += 2;
        }
        if (j < n) {  // one interval left
            w[n - 1] += hdt / 2.0;
            w[n] += hdt / 2.0;
        }
    }
    const double orient = forward ? 1.0 : -1.0;

    AffineFlowMap map;
    map.s = s;
    map.t = t;
    map.dim = d;
    map.sample = sample;
    map.position_block = Mat(d, d);
    for (std::size_t idx = 0; idx <= n; ++idx) map.position_block += E[idx] * (orient * w[idx]);
    map.velocity_block = E[forward ? n : 0];
    map.x_shift = DVec(d, 0.0);
    map.v_shift = DVec(d, 0.0);

    if (need_inverse) {
        // Stratonovich integral I(u) = int_s^u E^{-1}(r) c^k o dbeta^k_r by
        // midpoint sums, then V_inh(u) = E(u) I(u), X_inh = int_s^t V_inh du.
        std::vector<DVec> I(n + 1, DVec(d, 0.0));
        const std::size_t anchor = forward ? 0 : n;  // index of s in [lo..hi]
        const auto accumulate = [&](std::size_t from, std::size_t to) {
            // from/to adjacent node indices; increment anchored at lower node.
            DVec dc(d, 0.0);
            for (std::size_t k = 0; k < K; ++k) {
                const double dbk =
                    ens.increment(sample, k, lo + from, lo + to);
                const DVec& ck = model.constants()[k];
                DVec a = Einv[from].apply(ck);
                DVec b = Einv[to].apply(ck);
                for (std::size_t i = 0; i < d; ++i) dc[i] += 0.5 * (a[i] + b[i]) * dbk;
            }
            return dc;
        };
        for (std::size_t idx = anchor; idx < n; ++idx) {
            const DVec dc = accumulate(idx, idx + 1);
            for (std::size_t i = 0; i < d; ++i) I[idx + 1][i] = I[idx][i] + dc[i];
        }
        for (std::size_t idx = anchor; idx > 0; --idx) {
            const DVec dc = accumulate(idx - 1, idx);
            for (std::size_t i = 0; i < d; ++i) I[idx - 1][i] = I[idx][i] - dc[i];
        }
        const std::size_t end_idx = forward ? n : 0;
        map.v_shift = E[end_idx].apply(I[end_idx]);
        for (std::size_t idx = 0; idx <= n; ++idx) {
            const DVec vin = E[idx].apply(I[idx]);
            for (std::size_t i = 0; i < d; ++i) map.x_shift[i] += orient * w[idx] * vin[i];
        }
    }

    // det D Phi = det E(t) = exp(sum_k dbeta^k(t) tr S2^k); exactly 1 for
    // trace-free catalogs.
    double trace_exponent = 0.0;
    if (model.kind() == NoiseKind::affine_linear)
        for (std::size_t k = 0; k < K; ++k)
            trace_exponent += model.sigma2()[k].trace() * ens.increment(sample, k, is, it);
    map.det_full = std::exp(trace_exponent);
    return map;
}

inline FlowSample closed_form_flow(const NoiseModel& model, const BrownianEnsemble& ens,
                                   std::size_t sample, double s, double t, const DVec& origin) {
    const std::size_t d = model.dim();
    if (origin.size() != 2 * d) throw std::invalid_argument("closed_form_flow: origin size != 2d");
    const AffineFlowMap map = closed_form_map(model, ens, sample, s, t);
    FlowSample fs;
    fs.s = s;
    fs.t = t;
    fs.origin = origin;
    fs.sample = sample;
    fs.endpoint.resize(2 * d);
    map.apply(origin.data(), origin.data() + d, fs.endpoint.data(), fs.endpoint.data() + d);
    fs.jacobian = Mat(2 * d, 2 * d);
    for (std::size_t i = 0; i < d; ++i) {
        fs.jacobian(i, i) = 1.0;
        for (std::size_t j = 0; j < d; ++j) {
            fs.jacobian(i, d + j) = map.position_block(i, j);
            fs.jacobian(d + i, d + j) = map.velocity_block(i, j);
        }
    }
    fs.det_jacobian = map.det_full;
    fs.has_jacobian = true;
    return fs;
}

// ---------------------------------------------------------------------------
// Dispersion certificate
// ---------------------------------------------------------------------------

/// Empirical verification of |det D_v Phi_{0,lag}^(1)| >= C lag^d: per-lag
/// minima of the ratio over probes and samples, the fitted constant C, and
/// the largest prefix lag tau where the ratio stays above `floor`. The
/// regime flag records whether tau varied across samples (stopping-time
/// regime) or not (deterministic regime).
struct DispersionCertificate {
    DVec lags;
    DVec min_ratio;
    DVec mean_ratio;
    double C = 0.0;
    double tau = 0.0;
    bool deterministic_regime = true;
    DVec sample_taus;
    std::size_t samples = 0;
    std::size_t probes = 0;
    double floor = 0.5;
};

inline DispersionCertificate dispersion_certificate(const NoiseModel& model,
                                                    const BrownianEnsemble& ens,
                                                    const std::vector<DVec>& probes,
                                                    const DVec& lags, double floor,
                                                    double h = 0.0) {
    if (probes.empty()) throw std::invalid_argument("dispersion_certificate: empty probe set");
    for (double lag : lags)
        if (lag <= 0.0) throw std::invalid_argument("dispersion_certificate: lags must be positive");
    const std::size_t d = model.dim();
    const std::size_t S = ens.samples();
    const bool closed = has_closed_form(model);
    const double step = h > 0.0 ? h : ens.grid().dt();
    const double t0 = ens.grid().t0;

    DispersionCertificate cert;
    cert.lags = lags;
    cert.min_ratio.assign(lags.size(), 0.0);
    cert.mean_ratio.assign(lags.size(), 0.0);
    cert.samples = S;
    cert.probes = probes.size();
    cert.floor = floor;

    // ratio[lag][sample] = min over probes; mean accumulated separately.
    std::vector<DVec> per_sample_min(lags.size(), DVec(S, 0.0));
    std::vector<DVec> per_sample_mean(lags.size(), DVec(S, 0.0));
    parallel_for(0, S, [&](std::size_t sm) {
        for (std::size_t li = 0; li < lags.size(); ++li) {
            const double lag = lags[li];
            const double denom = std::pow(lag, static_cast<double>(d));
            double mn = std::numeric_limits<double>::infinity();
            double mean = 0.0;
            if (closed) {
                const AffineFlowMap map = closed_form_map(model, ens, sm, t0, t0 + lag);
                const double r = std::abs(map.det_velocity_dispersion()) / denom;
                mn = r;
                mean = r;
            } else {
                for (const DVec& pr : probes) {
                    const FlowSample fs =
                        integrate_flow(model, ens, sm, t0, t0 + lag, pr, step, true);
                    Mat B(d, d);
                    for (std::size_t i = 0; i < d; ++i)
                        for (std::size_t j = 0; j < d; ++j) B(i, j) = fs.jacobian(i, d + j);
                    const double r = std::abs(det(B)) / denom;
                    mn = std::min(mn, r);
                    mean += r;
                }
                mean /= static_cast<double>(probes.size());
            }
            per_sample_min[li][sm] = mn;
            per_sample_mean[li][sm] = mean;
        }
    });

    for (std::size_t li = 0; li < lags.size(); ++li) {
        double mn = std::numeric_limits<double>::infinity();
        double mean = 0.0;
        for (std::size_t sm = 0; sm < S; ++sm) {
            mn = std::min(mn, per_sample_min[li][sm]);
            mean += per_sample_mean[li][sm];
        }
        cert.min_ratio[li] = mn;
        cert.mean_ratio[li] = mean / static_cast<double>(S);
    }

    cert.sample_taus.assign(S, 0.0);
    for (std::size_t sm = 0; sm < S; ++sm) {
        double tau = 0.0;
        for (std::size_t li = 0; li < lags.size(); ++li) {
            if (per_sample_min[li][sm] >= floor)
                tau = lags[li];
            else
                break;
        }
        cert.sample_taus[sm] = tau;
    }
    cert.deterministic_regime = true;
    for (std::size_t sm = 1; sm < S; ++sm)
        if (cert.sample_taus[sm] != cert.sample_taus[0]) {
            cert.deterministic_regime = false;
            break;
        }

    double c = std::numeric_limits<double>::infinity();
    double tau = 0.0;
    for (std::size_t li = 0; li < lags.size(); ++li) {
        if (cert.min_ratio[li] < floor) break;
        c = std::min(c, cert.min_ratio[li]);
        tau = lags[li];
    }
    cert.C = std::isfinite(c) ? c : 0.0;
    cert.tau = tau;
    return cert;
}

/// Certificate export: columns lag, min_ratio, mean_ratio, samples, probes.
inline void write_certificate_csv(const DispersionCertificate& cert, const std::string& path) {
    CsvWriter csv(path, {"lag", "min_ratio", "mean_ratio", "samples", "probes"});
    for (std::size_t i = 0; i < cert.lags.size(); ++i)
        csv.row({cert.lags[i], cert.min_ratio[i], cert.mean_ratio[i],
                 static_cast<double>(cert.samples), static_cast<double>(cert.probes)});
}

// ---------------------------------------------------------------------------
// Jacobian remainder
// ---------------------------------------------------------------------------

/// Remainders extracted from the integrated Jacobian by the normalizations
/// D_v Phi^(1) = (t-s)(I + position_remainder) and
/// D_v Phi^(2) = I + velocity_remainder. `norm` is the max-entry norm of
/// the velocity remainder, the quantity whose lag scaling is fitted against
/// the Hoelder exponent.
struct JacobianRemainder {
    Mat position_remainder;
    Mat velocity_remainder;
    double norm = 0.0;
};

inline JacobianRemainder jacobian_remainder(const NoiseModel& model, const BrownianEnsemble& ens,
                                            std::size_t sample, double s, double t,
                                            const DVec& origin, double h) {
    if (std::abs(t - s) < 4.0 * h)
        throw std::invalid_argument("jacobian_remainder: |t-s| below 4h is ill-conditioned");
    const std::size_t d = model.dim();
    const FlowSample fs = has_closed_form(model)
                              ? closed_form_flow(model, ens, sample, s, t, origin)
                              : integrate_flow(model, ens, sample, s, t, origin, h, true);
    JacobianRemainder rem;
    rem.position_remainder = Mat(d, d);
    rem.velocity_remainder = Mat(d, d);
    for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            rem.position_remainder(i, j) =
                fs.jacobian(i, d + j) / (t - s) - (i == j ? 1.0 : 0.0);
            rem.velocity_remainder(i, j) = fs.jacobian(d + i, d + j) - (i == j ? 1.0 : 0.0);
        }
    rem.norm = rem.velocity_remainder.max_abs();
    return rem;
}

}  // namespace kinflow
