#pragma once

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstddef>
#include <functional>
#include <limits>
#include <mutex>
#include <stdexcept>
#include <utility>
#include <vector>

#include "kinflow/linalg.hpp"
#include "kinflow/parallel.hpp"

namespace kinflow {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Phase-space grid: periodic spatial torus [0,L)^d with nx nodes per axis
/// (x_i = i*hx) times the compact velocity box [-v_max, v_max]^d with nv
/// midpoint nodes per axis (v_j = -v_max + (j+1/2)*hv). The velocity support
/// V of kernels and initial data is the ball of radius v_support_radius.
struct Domain {
    std::size_t dim = 2;
    double box_length = 1.0;
    std::size_t nx = 4;
    double v_max = 1.0;
    std::size_t nv = 4;
    double v_support_radius = 1.0;

    void validate() const {
        if (dim < 1 || dim > 3) throw std::invalid_argument("Domain: dim must be 1..3");
        if (box_length <= 0.0) throw std::invalid_argument("Domain: box_length must be positive");
        if (v_max <= 0.0) throw std::invalid_argument("Domain: v_max must be positive");
        if (nx < 4 || nv < 4) throw std::invalid_argument("Domain: nx, nv >= 4 required");
        if (v_support_radius > v_max + 1e-12)
            throw std::invalid_argument("Domain: V support radius exceeds v_max");
    }

    double hx() const { return box_length / static_cast<double>(nx); }
    double hv() const { return 2.0 * v_max / static_cast<double>(nv); }

    std::size_t x_count() const { return ipow(nx, dim); }
    std::size_t v_count() const { return ipow(nv, dim); }

    double x_coord(std::size_t axis_index) const { return hx() * static_cast<double>(axis_index); }
    double v_coord(std::size_t axis_index) const {
        return -v_max + hv() * (static_cast<double>(axis_index) + 0.5);
    }

    void x_unflatten(std::size_t flat, std::size_t* idx) const { unflatten(flat, nx, idx); }
    void v_unflatten(std::size_t flat, std::size_t* idx) const { unflatten(flat, nv, idx); }

    void x_point(std::size_t flat, double* out) const {
        std::size_t idx[3];
        unflatten(flat, nx, idx);
        for (std::size_t i = 0; i < dim; ++i) out[i] = x_coord(idx[i]);
    }
    void v_point(std::size_t flat, double* out) const {
        std::size_t idx[3];
        unflatten(flat, nv, idx);
        for (std::size_t i = 0; i < dim; ++i) out[i] = v_coord(idx[i]);
    }

    static std::size_t ipow(std::size_t b, std::size_t e) {
        std::size_t r = 1;
        for (std::size_t i = 0; i < e; ++i) r *= b;
        return r;
    }

  private:
    void unflatten(std::size_t flat, std::size_t n, std::size_t* idx) const {
        for (std::size_t i = dim; i-- > 0;) {
            idx[i] = flat % n;
            flat /= n;
        }
    }
};

/// Gridded distribution f(x,v). Storage is x-major: value(xi, vi) with flat
/// x index xi and flat v index vi.
class PhaseField {
  public:
    PhaseField() = default;
    explicit PhaseField(const Domain& dom, double time = 0.0)
        : dom_(dom), time_(time), vals_(dom.x_count() * dom.v_count(), 0.0) {
        dom.validate();
    }

    static PhaseField from_function(
        const Domain& dom, const std::function<double(const double*, const double*)>& f,
        double time = 0.0) {
        PhaseField out(dom, time);
        const std::size_t nvt = dom.v_count();
        parallel_for(0, dom.x_count(), [&](std::size_t xi) {
            double x[3], v[3];
            dom.x_point(xi, x);
            for (std::size_t vi = 0; vi < nvt; ++vi) {
                dom.v_point(vi, v);
                out.vals_[xi * nvt + vi] = f(x, v);
            }
        });
        return out;
    }

    const Domain& domain() const { return dom_; }
    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    double& value(std::size_t xi, std::size_t vi) { return vals_[xi * dom_.v_count() + vi]; }
    double value(std::size_t xi, std::size_t vi) const { return vals_[xi * dom_.v_count() + vi]; }
    std::vector<double>& raw() { return vals_; }
    const std::vector<double>& raw() const { return vals_; }

    /// Multilinear interpolation: periodic in x, zero beyond the v-box.
    /// Nonnegative data yields nonnegative values.
    double interpolate(const double* x, const double* v) const {
        const std::size_t d = dom_.dim;
        const double hx = dom_.hx(), hv = dom_.hv();
        // Per-axis lower index and weight.
        std::size_t xlo[3];
        double xw[3];
        for (std::size_t i = 0; i < d; ++i) {
            double pos = x[i] / hx;
            double fl = std::floor(pos);
            double w = pos - fl;
            long cell = static_cast<long>(fl) % static_cast<long>(dom_.nx);
            if (cell < 0) cell += static_cast<long>(dom_.nx);
            xlo[i] = static_cast<std::size_t>(cell);
            xw[i] = w;
        }
        long vlo[3];
        double vw[3];
        for (std::size_t i = 0; i < d; ++i) {
            const double pos = (v[i] + dom_.v_max) / hv - 0.5;  // node j at (j+1/2)hv
            const double fl = std::floor(pos);
            vlo[i] = static_cast<long>(fl);
            vw[i] = pos - fl;
        }
        const std::size_t nvt = dom_.v_count();
        double acc = 0.0;
        const std::size_t corners = std::size_t{1} << (2 * d);
        for (std::size_t c = 0; c < corners; ++c) {
            double w = 1.0;
            std::size_t xi = 0, vi = 0;
            bool outside = false;
            for (std::size_t i = 0; i < d; ++i) {
                const bool up = (c >> i) & 1;
                w *= up ? xw[i] : 1.0 - xw[i];
                std::size_t xidx = xlo[i] + (up ? 1 : 0);
                if (xidx == dom_.nx) xidx = 0;  // periodic wrap
                xi = xi * dom_.nx + xidx;
            }
            for (std::size_t i = 0; i < d; ++i) {
                const bool up = (c >> (d + i)) & 1;
                w *= up ? vw[i] : 1.0 - vw[i];
                const long vidx = vlo[i] + (up ? 1 : 0);
                if (vidx < 0 || vidx >= static_cast<long>(dom_.nv)) {
                    outside = true;  // zero extension
                    break;
                }
                vi = vi * dom_.nv + static_cast<std::size_t>(vidx);
            }
            if (outside || w == 0.0) continue;
            acc += w * vals_[xi * nvt + vi];
        }
        return acc;
    }

    double min_value() const {
        double m = std::numeric_limits<double>::infinity();
        for (double v : vals_) m = std::min(m, v);
        return m;
    }

  private:
    Domain dom_;
    double time_ = 0.0;
    std::vector<double> vals_;
};

/// Chemoattractant field S on the x-grid with its spectral gradient.
struct ChemField {
    Domain dom;  // only the x part is used
    double time = 0.0;
    std::vector<double> values;               // x_count()
    std::vector<std::vector<double>> gradient;  // [axis][x_count()]

    double interpolate(const double* x) const { return interp_scalar(values, x); }
    double interpolate_gradient(std::size_t axis, const double* x) const {
        return interp_scalar(gradient[axis], x);
    }

  private:
    double interp_scalar(const std::vector<double>& a, const double* x) const {
        const std::size_t d = dom.dim;
        const double hx = dom.hx();
        std::size_t lo[3];
        double w[3];
        for (std::size_t i = 0; i < d; ++i) {
            const double pos = x[i] / hx;
            const double fl = std::floor(pos);
            long cell = static_cast<long>(fl) % static_cast<long>(dom.nx);
            if (cell < 0) cell += static_cast<long>(dom.nx);
            lo[i] = static_cast<std::size_t>(cell);
            w[i] = pos - fl;
        }
        double acc = 0.0;
        const std::size_t corners = std::size_t{1} << d;
        for (std::size_t c = 0; c < corners; ++c) {
            double ww = 1.0;
            std::size_t xi = 0;
            for (std::size_t i = 0; i < d; ++i) {
                const bool up = (c >> i) & 1;
                ww *= up ? w[i] : 1.0 - w[i];
                std::size_t idx = lo[i] + (up ? 1 : 0);
                if (idx == dom.nx) idx = 0;
                xi = xi * dom.nx + idx;
            }
            acc += ww * a[xi];
        }
        return acc;
    }
};

// ---------------------------------------------------------------------------
// Norms and quadrature
// ---------------------------------------------------------------------------

/// Mixed norm ||f||_{L_x^p L_v^q} by midpoint quadrature; infinite exponents
/// are grid maxima.
inline double mixed_norm(const PhaseField& f, double p, double q) {
    if (p < 1.0 || q < 1.0) throw std::invalid_argument("mixed_norm: exponents must be >= 1");
    const Domain& dom = f.domain();
    const std::size_t nxt = dom.x_count();
    const std::size_t nvt = dom.v_count();
    const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));
    const double wx = std::pow(dom.hx(), static_cast<double>(dom.dim));
    std::vector<double> inner(nxt, 0.0);
    parallel_for(0, nxt, [&](std::size_t xi) {
        if (q == kInf) {
            double m = 0.0;
            for (std::size_t vi = 0; vi < nvt; ++vi) m = std::max(m, std::abs(f.value(xi, vi)));
            inner[xi] = m;
        } else {
            double s = 0.0;
            for (std::size_t vi = 0; vi < nvt; ++vi) s += std::pow(std::abs(f.value(xi, vi)), q);
            inner[xi] = std::pow(s * wv, 1.0 / q);
        }
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

/// L^r norm in time of a sampled scalar (composite trapezoid); r = inf is
/// the max. Requires strictly increasing times, and at least two points for
/// finite r.
inline double time_norm(const std::vector<std::pair<double, double>>& series, double r) {
    if (r < 1.0) throw std::invalid_argument("time_norm: r must be >= 1");
    for (std::size_t i = 1; i < series.size(); ++i)
        if (!(series[i].first > series[i - 1].first))
            throw std::invalid_argument("time_norm: times must be strictly increasing");
    if (r == kInf) {
        double m = 0.0;
        for (const auto& [t, v] : series) m = std::max(m, std::abs(v));
        return m;
    }
    if (series.size() < 2)
        throw std::invalid_argument("time_norm: need at least 2 time points for finite r");
    double s = 0.0;
    for (std::size_t i = 1; i < series.size(); ++i) {
        const double dt = series[i].first - series[i - 1].first;
        s += 0.5 * dt *
             (std::pow(std::abs(series[i - 1].second), r) +
              std::pow(std::abs(series[i].second), r));
    }
    return std::pow(s, 1.0 / r);
}

/// rho(x) = int f dv by midpoint quadrature.
inline std::vector<double> density(const PhaseField& f) {
    const Domain& dom = f.domain();
    const std::size_t nxt = dom.x_count();
    const std::size_t nvt = dom.v_count();
    const double wv = std::pow(dom.hv(), static_cast<double>(dom.dim));
    std::vector<double> rho(nxt, 0.0);
    parallel_for(0, nxt, [&](std::size_t xi) {
        double s = 0.0;
        for (std::size_t vi = 0; vi < nvt; ++vi) s += f.value(xi, vi);
        rho[xi] = s * wv;
    });
    return rho;
}

inline double total_mass(const PhaseField& f) {
    const auto rho = density(f);
    const double wx = std::pow(f.domain().hx(), static_cast<double>(f.domain().dim));
    double m = 0.0;
    for (double v : rho) m += v;
    return m * wx;
}

// ---------------------------------------------------------------------------
// Spectral Bessel-potential solve of (1 - Laplace) S = rho on the torus
// ---------------------------------------------------------------------------

namespace detail {

inline std::mutex& fftw_mutex() {
    static std::mutex m;
    return m;
}

/// In-place d-dimensional complex DFT (FFTW); sign is FFTW_FORWARD or
/// FFTW_BACKWARD. Plans are created under a lock (FFTW planning is not
/// thread-safe); execution is.
inline void dft(std::vector<std::complex<double>>& data, const Domain& dom, int sign) {
    int n[3];
    for (std::size_t i = 0; i < dom.dim; ++i) n[i] = static_cast<int>(dom.nx);
    fftw_plan plan;
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        plan = fftw_plan_dft(static_cast<int>(dom.dim), n,
                             reinterpret_cast<fftw_complex*>(data.data()),
                             reinterpret_cast<fftw_complex*>(data.data()), sign, FFTW_ESTIMATE);
    }
    fftw_execute(plan);
    {
        std::lock_guard<std::mutex> lock(fftw_mutex());
        fftw_destroy_plan(plan);
    }
}

inline double frequency(std::size_t j, std::size_t n, double box_length) {
    const long k = j <= n / 2 ? static_cast<long>(j) : static_cast<long>(j) - static_cast<long>(n);
    return 2.0 * 3.141592653589793238462643383279502884 * static_cast<double>(k) / box_length;
}

}  // namespace detail

/// Solves S - Laplace(S) = rho spectrally: S_hat = rho_hat / (1 + |xi|^2),
/// gradient by spectral differentiation. Equivalent to convolution with the
/// periodic Bessel kernel.
inline ChemField bessel_solve(const Domain& dom, const std::vector<double>& rho,
                              double time = 0.0) {
    dom.validate();
    const std::size_t nxt = dom.x_count();
    if (rho.size() != nxt) throw std::invalid_argument("bessel_solve: rho has wrong size");
    const std::size_t d = dom.dim;

    std::vector<std::complex<double>> work(nxt);
    for (std::size_t i = 0; i < nxt; ++i) work[i] = rho[i];
    detail::dft(work, dom, FFTW_FORWARD);

    // Per-axis frequencies.
    std::vector<double> xi(dom.nx);
    std::vector<std::complex<double>> shat(nxt);
    for (std::size_t j = 0; j < dom.nx; ++j) xi[j] = detail::frequency(j, dom.nx, dom.box_length);

    ChemField out;
    out.dom = dom;
    out.time = time;
    out.values.assign(nxt, 0.0);
    out.gradient.assign(d, std::vector<double>(nxt, 0.0));

    const double scale = 1.0 / static_cast<double>(nxt);
    for (std::size_t flat = 0; flat < nxt; ++flat) {
        std::size_t idx[3];
        std::size_t rem = flat;
        for (std::size_t i = d; i-- > 0;) {
            idx[i] = rem % dom.nx;
            rem /= dom.nx;
        }
        double norm2 = 0.0;
        for (std::size_t i = 0; i < d; ++i) norm2 += xi[idx[i]] * xi[idx[i]];
        shat[flat] = work[flat] / (1.0 + norm2);
    }

    std::vector<std::complex<double>> tmp = shat;
    detail::dft(tmp, dom, FFTW_BACKWARD);
    for (std::size_t i = 0; i < nxt; ++i) out.values[i] = tmp[i].real() * scale;

    for (std::size_t axis = 0; axis < d; ++axis) {
        tmp = shat;
        for (std::size_t flat = 0; flat < nxt; ++flat) {
            std::size_t idx[3];
            std::size_t rem = flat;
            for (std::size_t i = d; i-- > 0;) {
                idx[i] = rem % dom.nx;
                rem /= dom.nx;
            }
            tmp[flat] *= std::complex<double>(0.0, xi[idx[axis]]);
        }
        detail::dft(tmp, dom, FFTW_BACKWARD);
        for (std::size_t i = 0; i < nxt; ++i) out.gradient[axis][i] = tmp[i].real() * scale;
    }
    return out;
}

/// Spectral Laplacian, used by the residual invariant test.
inline std::vector<double> spectral_laplacian(const Domain& dom, const std::vector<double>& s) {
    const std::size_t nxt = dom.x_count();
    std::vector<std::complex<double>> work(nxt);
    for (std::size_t i = 0; i < nxt; ++i) work[i] = s[i];
    detail::dft(work, dom, FFTW_FORWARD);
    std::vector<double> xi(dom.nx);
    for (std::size_t j = 0; j < dom.nx; ++j) xi[j] = detail::frequency(j, dom.nx, dom.box_length);
    for (std::size_t flat = 0; flat < nxt; ++flat) {
        std::size_t idx[3];
        std::size_t rem = flat;
        for (std::size_t i = dom.dim; i-- > 0;) {
            idx[i] = rem % dom.nx;
            rem /= dom.nx;
        }
        double n2 = 0.0;
        for (std::size_t i = 0; i < dom.dim; ++i) n2 += xi[idx[i]] * xi[idx[i]];
        work[flat] *= -n2;
    }
    detail::dft(work, dom, FFTW_BACKWARD);
    std::vector<double> out(nxt);
    const double scale = 1.0 / static_cast<double>(nxt);
    for (std::size_t i = 0; i < nxt; ++i) out[i] = work[i].real() * scale;
    return out;
}

}  // namespace kinflow
