#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "kinflow/linalg.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

enum class NoiseKind { zero, additive, affine_linear, custom };

/// Which dispersion assumption the model claims eligibility for: the
/// bounded-smooth route (local in time, stopping-time tau) or the
/// affine-linear catalog route (global in time, deterministic tau).
enum class DispersionRoute { none, local_via_bounds, global_via_catalog };

/// Jordan form data for the affine-linear catalog: sigma2 = S * B * S^{-1}
/// with B block diagonal, block i of size `sizes[i]` and real eigenvalue
/// `eigenvalues[i]` on the diagonal, ones on the superdiagonal.
struct JordanForm {
    Mat similarity;  // S
    std::vector<double> eigenvalues;
    std::vector<std::size_t> sizes;
};

/// User-supplied field for the Custom kind. `eval` is required; the
/// Jacobian callbacks are needed for the Ito correction and for Jacobian
/// propagation in the flow integrator.
struct CustomNoise {
    std::size_t dim = 0;
    std::size_t modes = 0;
    std::function<DVec(std::size_t k, const DVec& x, const DVec& v)> eval;
    std::function<Mat(std::size_t k, const DVec& x, const DVec& v)> jacobian_x;
    std::function<Mat(std::size_t k, const DVec& x, const DVec& v)> jacobian_v;
};

struct DivergenceReport {
    bool pass = false;
    double max_abs_divergence = 0.0;  // trace for catalog kinds
    std::size_t worst_mode = 0;
    double probe_radius = 0.0;
    std::size_t probes = 0;
};

/// Sampled sup-norm surrogate; `value` is +inf when growth across the two
/// nested probe boxes flags an unbounded field.
struct SupNormEstimate {
    double value = 0.0;
    double probe_radius = 0.0;
    bool growth_detected = false;
};

enum class BoundNorm { euclidean, max };

/// The divergence-free fields sigma^k driving the velocity noise, with the
/// analytic catalog (zero / additive / affine-linear) and a user hook.
/// Immutable; all evaluators are pure.
class NoiseModel {
  public:
    static NoiseModel zero(std::size_t dim) {
        NoiseModel m;
        m.kind_ = NoiseKind::zero;
        m.dim_ = dim;
        m.modes_ = 1;
        m.route_ = DispersionRoute::global_via_catalog;
        return m;
    }

    static NoiseModel additive(std::size_t dim, std::vector<DVec> constants) {
        if (constants.empty()) throw std::invalid_argument("additive: needs >= 1 mode");
        for (const auto& c : constants)
            if (c.size() != dim) throw std::invalid_argument("additive: constant has wrong dim");
        NoiseModel m;
        m.kind_ = NoiseKind::additive;
        m.dim_ = dim;
        m.modes_ = constants.size();
        m.c_ = std::move(constants);
        m.route_ = DispersionRoute::global_via_catalog;
        return m;
    }

    /// sigma^k(x,v) = Sigma2^(k) v + c^(k). Trace-freeness is *not* enforced
    /// here (the divergence check must be able to report violations); run
    /// check_divergence_free before trusting the model.
    static NoiseModel affine_linear(std::size_t dim, std::vector<Mat> sigma2,
                                    std::vector<DVec> constants,
                                    std::optional<JordanForm> jordan = std::nullopt) {
        if (sigma2.empty()) throw std::invalid_argument("affine_linear: needs >= 1 mode");
        if (constants.size() != sigma2.size())
            throw std::invalid_argument("affine_linear: constants/matrices count mismatch");
        for (const auto& s : sigma2)
            if (s.rows() != dim || s.cols() != dim)
                throw std::invalid_argument("affine_linear: matrix has wrong shape");
        for (const auto& c : constants)
            if (c.size() != dim) throw std::invalid_argument("affine_linear: constant wrong dim");
        if (jordan && sigma2.size() != 1)
            throw std::invalid_argument("affine_linear: Jordan form catalog requires K=1");
        NoiseModel m;
        m.kind_ = NoiseKind::affine_linear;
        m.dim_ = dim;
        m.modes_ = sigma2.size();
        m.sigma2_ = std::move(sigma2);
        m.c_ = std::move(constants);
        m.jordan_ = std::move(jordan);
        m.route_ = DispersionRoute::global_via_catalog;
        return m;
    }

    static NoiseModel custom(CustomNoise field) {
        if (!field.eval) throw std::invalid_argument("custom: eval callback required");
        if (field.dim == 0 || field.modes == 0)
            throw std::invalid_argument("custom: dim and modes must be positive");
        NoiseModel m;
        m.kind_ = NoiseKind::custom;
        m.dim_ = field.dim;
        m.modes_ = field.modes;
        m.custom_ = std::move(field);
        m.route_ = DispersionRoute::local_via_bounds;
        return m;
    }

    NoiseKind kind() const { return kind_; }
    std::size_t dim() const { return dim_; }
    std::size_t modes() const { return modes_; }
    DispersionRoute dispersion_route() const { return route_; }
    const std::vector<Mat>& sigma2() const { return sigma2_; }
    const std::vector<DVec>& constants() const { return c_; }
    const std::optional<JordanForm>& jordan() const { return jordan_; }
    bool has_derivatives() const {
        return kind_ != NoiseKind::custom || (custom_.jacobian_x && custom_.jacobian_v);
    }

    /// sigma^k(x,v).
    DVec eval_sigma(std::size_t k, const DVec& x, const DVec& v) const {
        check_mode(k);
        switch (kind_) {
            case NoiseKind::zero:
                return DVec(dim_, 0.0);
            case NoiseKind::additive:
                return c_[k];
            case NoiseKind::affine_linear: {
                DVec out = sigma2_[k].apply(v);
                for (std::size_t i = 0; i < dim_; ++i) out[i] += c_[k][i];
                return out;
            }
            case NoiseKind::custom:
                return custom_.eval(k, x, v);
        }
        return DVec(dim_, 0.0);
    }

    /// d sigma^k / dx.
    Mat jacobian_x(std::size_t k, const DVec& x, const DVec& v) const {
        check_mode(k);
        switch (kind_) {
            case NoiseKind::zero:
            case NoiseKind::additive:
            case NoiseKind::affine_linear:
                return Mat(dim_, dim_);
            case NoiseKind::custom:
                if (!custom_.jacobian_x)
                    throw std::runtime_error("custom noise lacks jacobian_x evaluator");
                return custom_.jacobian_x(k, x, v);
        }
        return Mat(dim_, dim_);
    }

    /// d sigma^k / dv.
    Mat jacobian_v(std::size_t k, const DVec& x, const DVec& v) const {
        check_mode(k);
        switch (kind_) {
            case NoiseKind::zero:
            case NoiseKind::additive:
                return Mat(dim_, dim_);
            case NoiseKind::affine_linear:
                return sigma2_[k];
            case NoiseKind::custom:
                if (!custom_.jacobian_v)
                    throw std::runtime_error("custom noise lacks jacobian_v evaluator");
                return custom_.jacobian_v(k, x, v);
        }
        return Mat(dim_, dim_);
    }

    /// Stratonovich-to-Ito drift b(x,v) = 1/2 sum_k (D_v sigma^k) sigma^k.
    /// Identically zero for the zero and additive kinds.
    DVec ito_correction(const DVec& x, const DVec& v) const {
        DVec b(dim_, 0.0);
        if (kind_ == NoiseKind::zero || kind_ == NoiseKind::additive) return b;
        for (std::size_t k = 0; k < modes_; ++k) {
            const DVec s = eval_sigma(k, x, v);
            const Mat dv = jacobian_v(k, x, v);
            for (std::size_t i = 0; i < dim_; ++i) {
                double acc = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) acc += dv(i, j) * s[j];
                b[i] += 0.5 * acc;
            }
        }
        return b;
    }

    bool ito_correction_vanishes() const {
        return kind_ == NoiseKind::zero || kind_ == NoiseKind::additive;
    }

    /// Divergence-freeness check div_v sigma^k = 0. Catalog kinds report the exact
    /// trace; Custom is probed by central differences at hashed quasi-random
    /// points inside the box of radius `probe_radius`.
    DivergenceReport check_divergence_free(double tol, std::size_t probes,
                                           double probe_radius = 2.0) const {
        if (probes < 1) throw std::invalid_argument("check_divergence_free: probes >= 1");
        DivergenceReport rep;
        rep.probe_radius = probe_radius;
        rep.probes = probes;
        if (kind_ == NoiseKind::zero || kind_ == NoiseKind::additive) {
            rep.pass = true;
            return rep;
        }
        if (kind_ == NoiseKind::affine_linear) {
            for (std::size_t k = 0; k < modes_; ++k) {
                const double tr = std::abs(sigma2_[k].trace());
                if (tr > rep.max_abs_divergence) {
                    rep.max_abs_divergence = tr;
                    rep.worst_mode = k;
                }
            }
            rep.pass = rep.max_abs_divergence <= tol;
            return rep;
        }
        const double h = 1e-5 * std::max(1.0, probe_radius);
        for (std::size_t p = 0; p < probes; ++p) {
            DVec x = probe_point(p, 0, probe_radius);
            DVec v = probe_point(p, 1, probe_radius);
            for (std::size_t k = 0; k < modes_; ++k) {
                double div = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) {
                    DVec vp = v, vm = v;
                    vp[j] += h;
                    vm[j] -= h;
                    div += (custom_.eval(k, x, vp)[j] - custom_.eval(k, x, vm)[j]) / (2.0 * h);
                }
                if (std::abs(div) > rep.max_abs_divergence) {
                    rep.max_abs_divergence = std::abs(div);
                    rep.worst_mode = k;
                }
            }
        }
        rep.pass = rep.max_abs_divergence <= tol;
        return rep;
    }

    /// Sampled surrogate for sum_k sum_{|alpha| <= order} ||D^alpha sigma^k||_inf,
    /// the eligibility quantity of the local dispersion route. Probes two
    /// nested boxes and flags linear growth as an unbounded field.
    SupNormEstimate derivative_bounds(int order, std::size_t probes,
                                      double probe_radius = 2.0,
                                      BoundNorm norm = BoundNorm::euclidean) const {
        if (order < 0 || order > 3)
            throw std::invalid_argument("derivative_bounds: order must be in 0..3");
        SupNormEstimate est;
        est.probe_radius = probe_radius;
        const double inner = sampled_sup(order, probes, probe_radius, norm);
        const double outer = sampled_sup(order, probes, 2.0 * probe_radius, norm);
        est.value = std::max(inner, outer);
        if (outer > 1.5 * inner && outer > 1e-12) {
            est.growth_detected = true;
            est.value = std::numeric_limits<double>::infinity();
        }
        return est;
    }

  private:
    NoiseModel() = default;

    void check_mode(std::size_t k) const {
        if (k >= modes_) throw std::out_of_range("NoiseModel: mode index out of range");
    }

    /// Hashed low-discrepancy-ish probe points in [-radius, radius]^d.
    DVec probe_point(std::size_t p, std::uint64_t tag, double radius) const {
        DVec pt(dim_);
        for (std::size_t i = 0; i < dim_; ++i) {
            const std::uint64_t bits =
                rng::mix64(rng::combine(rng::combine(0x50524f4245ULL, tag), p * 131 + i));
            pt[i] = (2.0 * rng::uniform(bits) - 1.0) * radius;
        }
        return pt;
    }

    double sampled_sup(int order, std::size_t probes, double radius, BoundNorm norm) const {
        double total = 0.0;
        for (std::size_t k = 0; k < modes_; ++k) {
            for (int ord = 0; ord <= order; ++ord) {
                double sup = 0.0;
                for (std::size_t p = 0; p < probes; ++p) {
                    const DVec x = probe_point(p, 10 + ord, radius);
                    const DVec v = probe_point(p, 20 + ord, radius);
                    sup = std::max(sup, derivative_magnitude(k, ord, x, v, norm));
                }
                total += sup;
            }
        }
        return total;
    }

    /// Max over multi-indices |alpha| = ord of a norm of D^alpha sigma^k,
    /// via nested central differences on eval (analytic for catalog kinds).
    double derivative_magnitude(std::size_t k, int ord, const DVec& x, const DVec& v,
                                BoundNorm norm) const {
        const auto vec_norm = [norm](const DVec& a) {
            return norm == BoundNorm::euclidean ? norm2(a) : norm_inf(a);
        };
        if (ord == 0) return vec_norm(eval_sigma(k, x, v));
        switch (kind_) {
            case NoiseKind::zero:
            case NoiseKind::additive:
                return 0.0;
            case NoiseKind::affine_linear: {
                if (ord >= 2) return 0.0;
                double m = 0.0;
                for (std::size_t j = 0; j < dim_; ++j) {
                    DVec col(dim_);
                    for (std::size_t i = 0; i < dim_; ++i) col[i] = sigma2_[k](i, j);
                    m = std::max(m, vec_norm(col));
                }
                return m;
            }
            case NoiseKind::custom:
                break;
        }
        // Nested central differences in all 2d directions, max over the
        // explored multi-indices.
        const double h = 1e-3;
        std::function<DVec(int, const DVec&, const DVec&)> worst_deriv =
            [&](int remaining, const DVec& xx, const DVec& vv) -> DVec {
            if (remaining == 0) return custom_.eval(k, xx, vv);
            DVec best(dim_, 0.0);
            double best_norm = -1.0;
            for (std::size_t j = 0; j < 2 * dim_; ++j) {
                DVec xp = xx, xm = xx, vp = vv, vm = vv;
                if (j < dim_) {
                    xp[j] += h;
                    xm[j] -= h;
                } else {
                    vp[j - dim_] += h;
                    vm[j - dim_] -= h;
                }
                const DVec fp = worst_deriv(remaining - 1, xp, vp);
                const DVec fm = worst_deriv(remaining - 1, xm, vm);
                DVec diff(dim_);
                for (std::size_t i = 0; i < dim_; ++i) diff[i] = (fp[i] - fm[i]) / (2.0 * h);
                const double n = vec_norm(diff);
                if (n > best_norm) {
                    best_norm = n;
                    best = diff;
                }
            }
            return best;
        };
        return vec_norm(worst_deriv(ord, x, v));
    }

    NoiseKind kind_ = NoiseKind::zero;
    std::size_t dim_ = 0;
    std::size_t modes_ = 0;
    std::vector<Mat> sigma2_;
    std::vector<DVec> c_;
    std::optional<JordanForm> jordan_;
    CustomNoise custom_;
    DispersionRoute route_ = DispersionRoute::none;
};

}  // namespace kinflow
