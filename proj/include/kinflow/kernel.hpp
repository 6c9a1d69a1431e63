#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kinflow/fields.hpp"
#include "kinflow/io.hpp"
#include "kinflow/parallel.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

enum class KernelKind { zero, angle, bounded_test, custom };

/// Angle-kernel parameters: K_eps(S)(x,v,v') =
/// lambda(S(x)) * h(theta(v,v')) * delta_eps(|v| - |v'|), supported in VxV.
/// lambda must satisfy |lambda(s)| <= c|s| for the kernel bound to hold
/// (validate_rate_bound checks this on samples).
struct AngleKernelParams {
    std::function<double(double)> lambda;
    std::function<double(double)> h_profile;  // bounded on [0, pi]
    double delta_width = 0.25;                // eps > 0
    double support_radius = 1.0;              // V = ball of this radius
};

/// Turning kernel catalog. Values are nonnegative for nonnegative S; the
/// kernel acts pointwise in (t,x) through the value of S at x.
class TurningKernel {
  public:
    using CustomEval = std::function<double(double s_value, const double* v, const double* vp,
                                            std::size_t dim)>;

    static TurningKernel zero() {
        TurningKernel k;
        k.kind_ = KernelKind::zero;
        return k;
    }

    static TurningKernel angle(AngleKernelParams params) {
        if (!params.lambda || !params.h_profile)
            throw std::invalid_argument("angle kernel: lambda and h required");
        if (params.delta_width <= 0.0)
            throw std::invalid_argument("angle kernel: delta width must be positive");
        TurningKernel k;
        k.kind_ = KernelKind::angle;
        k.angle_ = std::move(params);
        k.support_radius_ = k.angle_.support_radius;
        return k;
    }

    /// Constant kappa on VxV, independent of S (violates the S-proportional
    /// bound by construction; used to exercise the bound check).
    static TurningKernel bounded_test(double kappa, double support_radius) {
        TurningKernel k;
        k.kind_ = KernelKind::bounded_test;
        k.kappa_ = kappa;
        k.support_radius_ = support_radius;
        return k;
    }

    static TurningKernel custom(CustomEval eval, double support_radius, bool s_proportional) {
        if (!eval) throw std::invalid_argument("custom kernel: evaluator required");
        TurningKernel k;
        k.kind_ = KernelKind::custom;
        k.custom_ = std::move(eval);
        k.support_radius_ = support_radius;
        k.separable_ = s_proportional;
        return k;
    }

    KernelKind kind() const { return kind_; }
    double support_radius() const { return support_radius_; }

    /// True when K(S)(x,v,v') = lambda(S(x)) * kappa(v,v'); enables the
    /// precomputed velocity table in collision assembly.
    bool separable() const {
        switch (kind_) {
            case KernelKind::zero:
            case KernelKind::angle:
            case KernelKind::bounded_test:
                return true;
            case KernelKind::custom:
                return separable_;
        }
        return false;
    }

    /// The x-dependent rate factor of a separable kernel.
    double rate(double s_value) const {
        switch (kind_) {
            case KernelKind::zero:
                return 0.0;
            case KernelKind::angle:
                return angle_.lambda(s_value);
            case KernelKind::bounded_test:
                return 1.0;
            case KernelKind::custom:
                return 1.0;  // absorbed into the evaluator
        }
        return 0.0;
    }

    /// The velocity factor kappa(v,v') of a separable kernel.
    double velocity_factor(const double* v, const double* vp, std::size_t dim) const {
        switch (kind_) {
            case KernelKind::zero:
                return 0.0;
            case KernelKind::angle: {
                if (sqnorm(v, dim) > support_radius_ * support_radius_ ||
                    sqnorm(vp, dim) > support_radius_ * support_radius_)
                    return 0.0;
                return angle_.h_profile(turning_angle(v, vp, dim)) *
                       nascent_delta(std::sqrt(sqnorm(v, dim)) - std::sqrt(sqnorm(vp, dim)),
                                     angle_.delta_width);
            }
            case KernelKind::bounded_test:
                if (sqnorm(v, dim) > support_radius_ * support_radius_ ||
                    sqnorm(vp, dim) > support_radius_ * support_radius_)
                    return 0.0;
                return kappa_;
            case KernelKind::custom:
                return custom_(1.0, v, vp, dim);
        }
        return 0.0;
    }

    /// Full evaluation K(S)(v,v') given the S value at (t,x).
    double eval(double s_value, const double* v, const double* vp, std::size_t dim) const {
        if (kind_ == KernelKind::custom && !separable_)
            return custom_(s_value, v, vp, dim);
        return rate(s_value) * velocity_factor(v, vp, dim);
    }

    /// theta(v,v') = arccos(v.v'/(|v||v'|)), defined as pi/2 at a zero
    /// vector (the arccos formula is undefined there; pi/2 is the symmetric
    /// bounded choice).
    static double turning_angle(const double* v, const double* vp, std::size_t dim) {
        const double nv = std::sqrt(sqnorm(v, dim));
        const double nvp = std::sqrt(sqnorm(vp, dim));
        if (nv == 0.0 || nvp == 0.0) return 1.5707963267948966;
        double c = 0.0;
        for (std::size_t i = 0; i < dim; ++i) c += v[i] * vp[i];
        c /= nv * nvp;
        c = std::max(-1.0, std::min(1.0, c));
        return std::acos(c);
    }

    /// Triangular bump of half-width eps with unit integral.
    static double nascent_delta(double u, double eps) {
        const double a = std::abs(u);
        if (a >= eps) return 0.0;
        return (1.0 - a / eps) / eps;
    }

  private:
    TurningKernel() = default;

    static double sqnorm(const double* v, std::size_t dim) {
        double s = 0.0;
        for (std::size_t i = 0; i < dim; ++i) s += v[i] * v[i];
        return s;
    }

    KernelKind kind_ = KernelKind::zero;
    AngleKernelParams angle_;
    double kappa_ = 0.0;
    double support_radius_ = 0.0;
    CustomEval custom_;
    bool separable_ = false;
};

/// Validates |lambda(s)| <= c|s| on sampled values in [0, s_max].
inline bool validate_rate_bound(const std::function<double(double)>& lambda, double c,
                                double s_max = 10.0, std::size_t samples = 100) {
    for (std::size_t i = 0; i <= samples; ++i) {
        const double s = s_max * static_cast<double>(i) / static_cast<double>(samples);
        if (std::abs(lambda(s)) > c * std::abs(s) + 1e-12) return false;
    }
    return true;
}

/// Spec'd evaluation entry point: S is located at x by interpolation.
inline double eval_kernel(const TurningKernel& K, const ChemField& S, double /*t*/,
                          const double* x, const double* v, const double* vp) {
    return K.eval(S.interpolate(x), v, vp, S.dom.dim);
}

// ---------------------------------------------------------------------------
// Collision assembly
// ---------------------------------------------------------------------------

/// Sparse kappa(v,v') on the velocity grid of `dom` plus the column sums
/// w(v) = sum_{v'} kappa(v',v) dv that drive the loss rate. Valid for
/// separable kernels; reusable across times and Picard iterations.
struct VelocityTable {
    std::vector<std::size_t> row_offsets;  // v_count()+1
    std::vector<std::size_t> cols;
    std::vector<double> vals;
    std::vector<double> loss_weight;  // per v node, includes the dv factor
    double dv_weight = 0.0;
};

inline VelocityTable build_velocity_table(const TurningKernel& K, const Domain& dom) {
    if (!K.separable())
        throw std::invalid_argument("build_velocity_table: kernel is not separable");
    const std::size_t nvt = dom.v_count();
    const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));
    VelocityTable tab;
    tab.dv_weight = wv;
    tab.row_offsets.assign(nvt + 1, 0);
    tab.loss_weight.assign(nvt, 0.0);

    std::vector<std::vector<std::pair<std::size_t, double>>> rows(nvt);
    parallel_for(0, nvt, [&](std::size_t vi) {
        double v[3], vp[3];
        dom.v_point(vi, v);
        auto& row = rows[vi];
        for (std::size_t vj = 0; vj < nvt; ++vj) {
            dom.v_point(vj, vp);
            const double k = K.velocity_factor(v, vp, dom.dim);
            if (k != 0.0) row.emplace_back(vj, k);
        }
    });
    for (std::size_t vi = 0; vi < nvt; ++vi) {
        tab.row_offsets[vi + 1] = tab.row_offsets[vi] + rows[vi].size();
        for (const auto& [vj, k] : rows[vi]) {
            tab.cols.push_back(vj);
            tab.vals.push_back(k);
            tab.loss_weight[vj] += k * wv;  // column sums: kappa(v_i, v_j) into w(v_j)
        }
    }
    return tab;
}

/// Gain and loss assembled with shared quadrature weights so that the
/// discrete exchange identity integral(gain - loss) = 0 holds to rounding.
struct CollisionTerm {
    PhaseField gain;
    PhaseField loss;
    bool nonneg_warning = false;
};

inline CollisionTerm collision(const TurningKernel& K, const ChemField& S, const PhaseField& f,
                               const VelocityTable* table = nullptr) {
    const Domain& dom = f.domain();
    if (S.dom.dim != dom.dim || S.dom.nx != dom.nx)
        throw std::invalid_argument("collision: f and S domains do not match");
    CollisionTerm term{PhaseField(dom, f.time()), PhaseField(dom, f.time()), false};
    for (double v : f.raw())
        if (v < 0.0) {
            term.nonneg_warning = true;
            break;
        }
    const std::size_t nxt = dom.x_count();
    const std::size_t nvt = dom.v_count();
    const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));

    VelocityTable local;
    if (K.separable() && table == nullptr) {
        local = build_velocity_table(K, dom);
        table = &local;
    }

    if (K.separable()) {
        parallel_for(0, nxt, [&](std::size_t xi) {
            double x[3];
            dom.x_point(xi, x);
            const double lam = K.rate(S.interpolate(x));
            for (std::size_t vi = 0; vi < nvt; ++vi) {
                double acc = 0.0;
                for (std::size_t e = table->row_offsets[vi]; e < table->row_offsets[vi + 1]; ++e)
                    acc += table->vals[e] * f.value(xi, table->cols[e]);
                term.gain.value(xi, vi) = lam * acc * wv;
                term.loss.value(xi, vi) = lam * table->loss_weight[vi] * f.value(xi, vi);
            }
        });
    } else {
        parallel_for(0, nxt, [&](std::size_t xi) {
            double x[3], v[3], vp[3];
            dom.x_point(xi, x);
            const double sval = S.interpolate(x);
            for (std::size_t vi = 0; vi < nvt; ++vi) {
                dom.v_point(vi, v);
                double g = 0.0, l = 0.0;
                for (std::size_t vj = 0; vj < nvt; ++vj) {
                    dom.v_point(vj, vp);
                    g += K.eval(sval, v, vp, dom.dim) * f.value(xi, vj);
                    l += K.eval(sval, vp, v, dom.dim);
                }
                term.gain.value(xi, vi) = g * wv;
                term.loss.value(xi, vi) = l * wv * f.value(xi, vi);
            }
        });
    }
    return term;
}

/// integral of (gain - loss) over phase space, relative to the gain mass.
inline double exchange_defect(const CollisionTerm& term) {
    const double g = total_mass(term.gain);
    const double l = total_mass(term.loss);
    const double scale = std::max({std::abs(g), std::abs(l), 1e-300});
    return (g - l) / scale;
}

// ---------------------------------------------------------------------------
// Kernel bound check (Assumption-style estimate)
// ---------------------------------------------------------------------------

struct BoundSample {
    double lhs = 0.0;
    double rhs = 0.0;
    double ratio = 0.0;
};

struct BoundReport {
    std::vector<BoundSample> samples;
    double c_hat = 0.0;
    bool violation = false;  // rhs == 0 with lhs > 0
};

namespace detail {

inline double lp_norm_x(const std::vector<double>& a, double p, const Domain& dom) {
    const double wx = std::pow(dom.hx(), static_cast<double>(dom.dim));
    if (p == kInf) {
        double m = 0.0;
        for (double v : a) m = std::max(m, std::abs(v));
        return m;
    }
    double s = 0.0;
    for (double v : a) s += std::pow(std::abs(v), p);
    return std::pow(s * wx, 1.0 / p);
}

}  // namespace detail

/// Max over S samples of ||K(S)||_{L_x^{p1} L_v^{p2} L_{v'}^{p3}} /
/// (||S||_{p1} + ||grad S||_{p1}); a finite c_hat certifies the kernel bound
/// empirically on the sample family.
inline BoundReport check_kernel_bound(const TurningKernel& K,
                                      const std::vector<ChemField>& s_samples, double p1,
                                      double p2, double p3) {
    if (s_samples.empty()) throw std::invalid_argument("check_kernel_bound: no samples");
    if (p1 < std::max(p2, p3))
        throw std::invalid_argument("check_kernel_bound: requires p1 >= max(p2, p3)");
    BoundReport rep;
    for (const ChemField& S : s_samples) {
        const Domain& dom = S.dom;
        const std::size_t nxt = dom.x_count();
        const std::size_t nvt = dom.v_count();
        const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));
        std::vector<double> per_x(nxt, 0.0);
        parallel_for(0, nxt, [&](std::size_t xi) {
            double x[3], v[3], vp[3];
            dom.x_point(xi, x);
            const double sval = S.interpolate(x);
            double outer = 0.0;  // L_v^{p2} accumulation
            double outer_max = 0.0;
            for (std::size_t vi = 0; vi < nvt; ++vi) {
                dom.v_point(vi, v);
                double inner = 0.0, inner_max = 0.0;
                for (std::size_t vj = 0; vj < nvt; ++vj) {
                    dom.v_point(vj, vp);
                    const double k = std::abs(K.eval(sval, v, vp, dom.dim));
                    if (p3 == kInf)
                        inner_max = std::max(inner_max, k);
                    else
                        inner += std::pow(k, p3);
                }
                const double lvp = p3 == kInf ? inner_max : std::pow(inner * wv, 1.0 / p3);
                if (p2 == kInf)
                    outer_max = std::max(outer_max, lvp);
                else
                    outer += std::pow(lvp, p2);
            }
            per_x[xi] = p2 == kInf ? outer_max : std::pow(outer * wv, 1.0 / p2);
        });
        BoundSample bs;
        bs.lhs = detail::lp_norm_x(per_x, p1, dom);
        bs.rhs = detail::lp_norm_x(S.values, p1, dom);
        for (std::size_t axis = 0; axis < dom.dim; ++axis)
            bs.rhs += detail::lp_norm_x(S.gradient[axis], p1, dom);
        if (bs.rhs == 0.0) {
            bs.ratio = bs.lhs > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
            if (bs.lhs > 0.0) rep.violation = true;
        } else {
            bs.ratio = bs.lhs / bs.rhs;
        }
        rep.samples.push_back(bs);
        if (std::isfinite(bs.ratio)) rep.c_hat = std::max(rep.c_hat, bs.ratio);
    }
    return rep;
}

/// Bound report as CSV: sample index, LHS, RHS, ratio.
inline void write_bound_report_csv(const BoundReport& rep, const std::string& path) {
    CsvWriter csv(path, {"sample", "lhs", "rhs", "ratio"});
    for (std::size_t i = 0; i < rep.samples.size(); ++i)
        csv.row({static_cast<double>(i), rep.samples[i].lhs, rep.samples[i].rhs,
                 rep.samples[i].ratio});
}

// ---------------------------------------------------------------------------
// Regularization pipeline K -> K^n
// ---------------------------------------------------------------------------

/// Clamp-and-clip stage: values into [0, n], support into the radius-n ball
/// in each velocity argument. Monotone increasing in n for K >= 0.
inline TurningKernel truncate_kernel(const TurningKernel& K, int n) {
    if (n < 1) throw std::invalid_argument("truncate_kernel: n >= 1 required");
    auto base = std::make_shared<TurningKernel>(K);
    const double cap = static_cast<double>(n);
    const double rad2 = cap * cap;
    auto eval = [base, cap, rad2](double sval, const double* v, const double* vp,
                                  std::size_t dim) {
        double n2v = 0.0, n2vp = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            n2v += v[i] * v[i];
            n2vp += vp[i] * vp[i];
        }
        if (n2v > rad2 || n2vp > rad2) return 0.0;
        const double raw = base->eval(sval, v, vp, dim);
        return std::max(0.0, std::min(cap, raw));
    };
    return TurningKernel::custom(eval, std::min(K.support_radius(), cap), false);
}

namespace detail {

/// Normalized weights of the d-dimensional mollifier eta on a stencil
/// lattice inside the ball of radius `width`.
struct MollifierStencil {
    std::vector<std::vector<double>> offsets;  // each size dim
    std::vector<double> weights;               // sums to 1
};

inline MollifierStencil build_stencil(std::size_t dim, double width, int half) {
    MollifierStencil st;
    const int n_axis = 2 * half + 1;
    std::size_t count = 1;
    for (std::size_t i = 0; i < dim; ++i) count *= static_cast<std::size_t>(n_axis);
    double total = 0.0;
    for (std::size_t c = 0; c < count; ++c) {
        std::vector<double> o(dim);
        std::size_t rem = c;
        double r2 = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const int j = static_cast<int>(rem % n_axis) - half;
            rem /= static_cast<std::size_t>(n_axis);
            o[i] = width * static_cast<double>(j) / static_cast<double>(half + 1);
            r2 += (o[i] / width) * (o[i] / width);
        }
        if (r2 >= 1.0) continue;
        const double w = std::exp(-1.0 / (1.0 - r2));
        st.offsets.push_back(std::move(o));
        st.weights.push_back(w);
        total += w;
    }
    for (double& w : st.weights) w /= total;
    return st;
}

}  // namespace detail

/// Full regularization K^n: clamp to [0,n], clip support to the radius-n
/// ball, then mollify in (v,v') with the compactly supported bump of width
/// 1/n (discrete convolution with normalized weights). Evaluation stays
/// nonnegative; K^n -> K pointwise as n grows for continuous bounded K.
inline TurningKernel regularize(const TurningKernel& K, int n, int stencil_half = 2) {
    TurningKernel truncated = truncate_kernel(K, n);
    auto base = std::make_shared<TurningKernel>(std::move(truncated));
    const double width = 1.0 / static_cast<double>(n);
    auto stencils = std::make_shared<std::vector<detail::MollifierStencil>>();
    for (std::size_t dim = 1; dim <= 3; ++dim)
        stencils->push_back(detail::build_stencil(dim, width, stencil_half));
    auto eval = [base, stencils](double sval, const double* v, const double* vp,
                                 std::size_t dim) {
        const auto& st = (*stencils)[dim - 1];
        double acc = 0.0;
        double vv[3], vvp[3];
        for (std::size_t i = 0; i < st.offsets.size(); ++i) {
            for (std::size_t a = 0; a < dim; ++a) vv[a] = v[a] - st.offsets[i][a];
            for (std::size_t j = 0; j < st.offsets.size(); ++j) {
                for (std::size_t a = 0; a < dim; ++a) vvp[a] = vp[a] - st.offsets[j][a];
                acc += st.weights[i] * st.weights[j] * base->eval(sval, vv, vvp, dim);
            }
        }
        return acc;
    };
    return TurningKernel::custom(eval, K.support_radius() + width, false);
}

}  // namespace kinflow
