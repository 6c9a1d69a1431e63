#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinflow/parallel.hpp"
#include "kinflow/rng.hpp"

namespace kinflow {

/// Uniform time grid [t0, t1] with `steps` intervals; node k sits at
/// t0 + k*(t1-t0)/steps.
struct TimeGrid {
    double t0 = 0.0;
    double t1 = 1.0;
    std::size_t steps = 1;

    TimeGrid() = default;
    TimeGrid(double t0_, double t1_, std::size_t steps_) : t0(t0_), t1(t1_), steps(steps_) {
        validate();
    }

    void validate() const {
        if (!(t0 < t1)) throw std::invalid_argument("TimeGrid: requires t0 < t1");
        if (steps < 1) throw std::invalid_argument("TimeGrid: requires steps >= 1");
    }

    double dt() const { return (t1 - t0) / static_cast<double>(steps); }
    double node(std::size_t k) const {
        return t0 + (t1 - t0) * (static_cast<double>(k) / static_cast<double>(steps));
    }

    /// Grid index of time t, or throws if t is not a node (tolerance is a
    /// fraction of dt, so misaligned integrator steps are caught loudly
    /// instead of silently interpolating the noise).
    std::size_t index_of(double t, double rel_tol = 1e-9) const {
        const double pos = (t - t0) / dt();
        const double rounded = std::round(pos);
        if (std::abs(pos - rounded) > rel_tol * std::max(1.0, std::abs(pos)) + 1e-12)
            throw std::invalid_argument("TimeGrid: time is not aligned with the grid");
        if (rounded < -0.5 || rounded > static_cast<double>(steps) + 0.5)
            throw std::invalid_argument("TimeGrid: time outside the grid");
        return static_cast<std::size_t>(rounded);
    }
};

namespace detail {
inline constexpr std::uint64_t kIncrementTag = 0x494e4352ULL;  // "INCR"
inline constexpr std::uint64_t kBridgeTag = 0x42524447ULL;     // "BRDG"
}  // namespace detail

/// Seeded ensemble of independent one-dimensional Brownian paths on a shared
/// time grid. Paths start at 0, increments over a grid interval are
/// N(0, dt), and every increment is a pure function of
/// (seed, sample, mode, node), so regeneration and parallel generation are
/// bit-exact. Immutable after construction.
class BrownianEnsemble {
  public:
    static BrownianEnsemble generate(std::uint64_t seed, const TimeGrid& grid,
                                     std::size_t modes, std::size_t samples) {
        grid.validate();
        if (modes < 1) throw std::invalid_argument("BrownianEnsemble: modes >= 1 required");
        if (samples < 1) throw std::invalid_argument("BrownianEnsemble: samples >= 1 required");
        BrownianEnsemble ens;
        ens.grid_ = grid;
        ens.modes_ = modes;
        ens.samples_ = samples;
        ens.seed_ = seed;
        ens.level_ = 0;
        ens.values_.resize(samples * modes * (grid.steps + 1));
        const double sqrt_dt = std::sqrt(grid.dt());
        parallel_for(0, samples * modes, [&](std::size_t sm) {
            const std::size_t s = sm / modes;
            const std::size_t k = sm % modes;
            double* path = ens.path_ptr(s, k);
            path[0] = 0.0;
            double acc = 0.0;
            for (std::size_t i = 0; i < grid.steps; ++i) {
                acc += sqrt_dt * rng::standard_normal(seed, detail::kIncrementTag, s, k, i);
                path[i + 1] = acc;
            }
        });
        return ens;
    }

    /// Refines the grid by `factor` with Brownian-bridge fill-in: original
    /// nodes keep their exact values. factor is decomposed as 2^m * r so that
    /// dyadic refinement towers are nested (refine(2) twice == refine(4)).
    BrownianEnsemble refine(std::size_t factor) const {
        if (factor < 2) throw std::invalid_argument("refine: factor >= 2 required");
        BrownianEnsemble out = *this;
        std::size_t f = factor;
        while (f % 2 == 0) {
            out = out.refine_pass(2);
            f /= 2;
        }
        if (f > 1) out = out.refine_pass(f);
        return out;
    }

    const TimeGrid& grid() const { return grid_; }
    std::size_t modes() const { return modes_; }
    std::size_t samples() const { return samples_; }
    std::uint64_t seed() const { return seed_; }
    std::size_t refinement_level() const { return level_; }

    /// Path value at node index.
    double value(std::size_t sample, std::size_t mode, std::size_t node) const {
        return values_[(sample * modes_ + mode) * (grid_.steps + 1) + node];
    }

    /// beta(node_b) - beta(node_a).
    double increment(std::size_t sample, std::size_t mode, std::size_t node_a,
                     std::size_t node_b) const {
        return value(sample, mode, node_b) - value(sample, mode, node_a);
    }

    const double* path(std::size_t sample, std::size_t mode) const {
        return values_.data() + (sample * modes_ + mode) * (grid_.steps + 1);
    }

    bool operator==(const BrownianEnsemble& o) const {
        return grid_.t0 == o.grid_.t0 && grid_.t1 == o.grid_.t1 && grid_.steps == o.grid_.steps &&
               modes_ == o.modes_ && samples_ == o.samples_ && seed_ == o.seed_ &&
               values_ == o.values_;
    }

    /// Binary dump: magic "KFBM", version u32, seed u64, modes u32,
    /// samples u32, steps u32, t0 f64, t1 f64, then row-major f64 values
    /// ordered (sample, mode, node). The refinement level is not part of the
    /// format; a reloaded ensemble starts a fresh refinement tower.
    void write_binary(const std::string& filename) const {
        std::ofstream f(filename, std::ios::binary);
        if (!f) throw std::runtime_error("BrownianEnsemble: cannot open " + filename);
        f.write("KFBM", 4);
        write_pod(f, std::uint32_t{1});
        write_pod(f, seed_);
        write_pod(f, static_cast<std::uint32_t>(modes_));
        write_pod(f, static_cast<std::uint32_t>(samples_));
        write_pod(f, static_cast<std::uint32_t>(grid_.steps));
        write_pod(f, grid_.t0);
        write_pod(f, grid_.t1);
        f.write(reinterpret_cast<const char*>(values_.data()),
                static_cast<std::streamsize>(values_.size() * sizeof(double)));
        if (!f) throw std::runtime_error("BrownianEnsemble: write failed");
    }

    static BrownianEnsemble read_binary(const std::string& filename) {
        std::ifstream f(filename, std::ios::binary);
        if (!f) throw std::runtime_error("BrownianEnsemble: cannot open " + filename);
        char magic[4];
        f.read(magic, 4);
        if (!f || std::memcmp(magic, "KFBM", 4) != 0)
            throw std::runtime_error("BrownianEnsemble: bad magic");
        const auto version = read_pod<std::uint32_t>(f);
        if (version != 1) throw std::runtime_error("BrownianEnsemble: unsupported version");
        BrownianEnsemble ens;
        ens.seed_ = read_pod<std::uint64_t>(f);
        ens.modes_ = read_pod<std::uint32_t>(f);
        ens.samples_ = read_pod<std::uint32_t>(f);
        const auto steps = read_pod<std::uint32_t>(f);
        ens.grid_.t0 = read_pod<double>(f);
        ens.grid_.t1 = read_pod<double>(f);
        ens.grid_.steps = steps;
        ens.grid_.validate();
        ens.level_ = 0;
        ens.values_.resize(ens.samples_ * ens.modes_ * (steps + 1));
        f.read(reinterpret_cast<char*>(ens.values_.data()),
               static_cast<std::streamsize>(ens.values_.size() * sizeof(double)));
        if (!f) throw std::runtime_error("BrownianEnsemble: truncated file");
        return ens;
    }

  private:
    BrownianEnsemble() = default;

    double* path_ptr(std::size_t sample, std::size_t mode) {
        return values_.data() + (sample * modes_ + mode) * (grid_.steps + 1);
    }

    /// One bridge pass: each coarse interval gets (r-1) interior nodes,
    /// sampled left to right conditional on the partially filled path. Keyed
    /// on (seed, level, sample, mode, fine interval index).
    BrownianEnsemble refine_pass(std::size_t r) const {
        BrownianEnsemble out;
        out.grid_ = TimeGrid(grid_.t0, grid_.t1, grid_.steps * r);
        out.modes_ = modes_;
        out.samples_ = samples_;
        out.seed_ = seed_;
        out.level_ = level_ + 1;
        out.values_.resize(samples_ * modes_ * (out.grid_.steps + 1));
        const double dt_fine = out.grid_.dt();
        const std::uint64_t level_key = static_cast<std::uint64_t>(out.level_);
        parallel_for(0, samples_ * modes_, [&](std::size_t sm) {
            const std::size_t s = sm / modes_;
            const std::size_t k = sm % modes_;
            const double* coarse = path(s, k);
            double* fine = out.path_ptr(s, k);
            for (std::size_t i = 0; i < grid_.steps; ++i) {
                fine[i * r] = coarse[i];
                const double right = coarse[i + 1];
                double prev = coarse[i];
                for (std::size_t j = 1; j < r; ++j) {
                    // Bridge from (t_prev, prev) to the interval end: with g
                    // fine intervals to go, mean = prev + gap/g, var = dt*(g-1)/g.
                    const double g = static_cast<double>(r - j + 1);
                    const double mean = prev + (right - prev) / g;
                    const double var = dt_fine * (g - 1.0) / g;
                    const double xi = rng::standard_normal(
                        rng::Key(seed_).with(detail::kBridgeTag).with(level_key).with(s).with(k).with(
                            i * r + j));
                    prev = mean + std::sqrt(var) * xi;
                    fine[i * r + j] = prev;
                }
            }
            fine[out.grid_.steps] = coarse[grid_.steps];
        });
        return out;
    }

    template <typename T>
    static void write_pod(std::ofstream& f, T v) {
        f.write(reinterpret_cast<const char*>(&v), sizeof(T));
    }
    template <typename T>
    static T read_pod(std::ifstream& f) {
        T v;
        f.read(reinterpret_cast<char*>(&v), sizeof(T));
        return v;
    }

    TimeGrid grid_;
    std::size_t modes_ = 0;
    std::size_t samples_ = 0;
    std::uint64_t seed_ = 0;
    std::size_t level_ = 0;
    std::vector<double> values_;
};

}  // namespace kinflow
