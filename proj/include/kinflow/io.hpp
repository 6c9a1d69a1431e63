#pragma once

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "kinflow/fields.hpp"

namespace kinflow {

/// CSV writer with a fixed number format so that identical runs produce
/// byte-identical artifacts.
class CsvWriter {
  public:
    CsvWriter(const std::string& path, const std::vector<std::string>& columns) {
        file_ = std::fopen(path.c_str(), "wb");
        if (!file_) throw std::runtime_error("CsvWriter: cannot open " + path);
        for (std::size_t i = 0; i < columns.size(); ++i)
            std::fprintf(file_, "%s%s", columns[i].c_str(),
                         i + 1 < columns.size() ? "," : "\n");
    }
    CsvWriter(const CsvWriter&) = delete;
    CsvWriter& operator=(const CsvWriter&) = delete;
    ~CsvWriter() {
        if (file_) std::fclose(file_);
    }

    void row(const std::vector<double>& values) {
        for (std::size_t i = 0; i < values.size(); ++i)
            std::fprintf(file_, "%.17g%s", values[i], i + 1 < values.size() ? "," : "\n");
    }

  private:
    std::FILE* file_ = nullptr;
};

/// Phase-field snapshot format: magic "KFPF", version u32, dim u32, nx u32,
/// nv u32, box_length f64, v_max f64, v_support_radius f64, time f64,
/// then row-major f64 values (x-major, v within).
inline void write_phase_field(const PhaseField& f, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("write_phase_field: cannot open " + path);
    const Domain& dom = f.domain();
    out.write("KFPF", 4);
    const auto put_u32 = [&](std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    const auto put_f64 = [&](double v) {
        out.write(reinterpret_cast<const char*>(&v), sizeof(v));
    };
    put_u32(1);
    put_u32(static_cast<std::uint32_t>(dom.dim));
    put_u32(static_cast<std::uint32_t>(dom.nx));
    put_u32(static_cast<std::uint32_t>(dom.nv));
    put_f64(dom.box_length);
    put_f64(dom.v_max);
    put_f64(dom.v_support_radius);
    put_f64(f.time());
    out.write(reinterpret_cast<const char*>(f.raw().data()),
              static_cast<std::streamsize>(f.raw().size() * sizeof(double)));
    if (!out) throw std::runtime_error("write_phase_field: write failed");
}

inline PhaseField read_phase_field(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("read_phase_field: cannot open " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "KFPF", 4) != 0)
        throw std::runtime_error("read_phase_field: bad magic");
    const auto get_u32 = [&] {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    const auto get_f64 = [&] {
        double v;
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        return v;
    };
    const auto version = get_u32();
    if (version != 1) throw std::runtime_error("read_phase_field: unsupported version");
    Domain dom;
    dom.dim = get_u32();
    dom.nx = get_u32();
    dom.nv = get_u32();
    dom.box_length = get_f64();
    dom.v_max = get_f64();
    dom.v_support_radius = get_f64();
    const double time = get_f64();
    dom.validate();
    PhaseField f(dom, time);
    in.read(reinterpret_cast<char*>(f.raw().data()),
            static_cast<std::streamsize>(f.raw().size() * sizeof(double)));
    if (!in) throw std::runtime_error("read_phase_field: truncated file");
    return f;
}

/// FNV-1a of a string; used to stamp the resolved config into artifacts.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// CSV slice of a snapshot at one velocity node: (x..., v..., value) rows.
inline void write_field_slice_csv(const PhaseField& f, const std::string& path,
                                  std::size_t v_index) {
    const Domain& dom = f.domain();
    if (v_index >= dom.v_count())
        throw std::invalid_argument("write_field_slice_csv: v_index out of range");
    std::vector<std::string> cols;
    for (std::size_t i = 0; i < dom.dim; ++i) cols.push_back("x" + std::to_string(i));
    for (std::size_t i = 0; i < dom.dim; ++i) cols.push_back("v" + std::to_string(i));
    cols.push_back("value");
    CsvWriter csv(path, cols);
    double x[3], v[3];
    dom.v_point(v_index, v);
    for (std::size_t xi = 0; xi < dom.x_count(); ++xi) {
        dom.x_point(xi, x);
        std::vector<double> row;
        for (std::size_t i = 0; i < dom.dim; ++i) row.push_back(x[i]);
        for (std::size_t i = 0; i < dom.dim; ++i) row.push_back(v[i]);
        row.push_back(f.value(xi, v_index));
        csv.row(row);
    }
}

}  // namespace kinflow
