#pragma once

#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <stdexcept>
#include <vector>

namespace kinflow {

using DVec = std::vector<double>;

/// Dense row-major matrix, sized for phase-space Jacobians (2d x 2d with
/// d <= 3) and noise catalog matrices. Not a general linear algebra type.
class Mat {
  public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), a_(rows * cols, 0.0) {}
    Mat(std::size_t rows, std::size_t cols, std::initializer_list<double> entries)
        : rows_(rows), cols_(cols), a_(entries) {
        if (a_.size() != rows * cols) throw std::invalid_argument("Mat: entry count mismatch");
    }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }

    double& operator()(std::size_t i, std::size_t j) { return a_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a_[i * cols_ + j]; }

    double* data() { return a_.data(); }
    const double* data() const { return a_.data(); }

    Mat& operator+=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] += o.a_[i];
        return *this;
    }
    Mat& operator-=(const Mat& o) {
        for (std::size_t i = 0; i < a_.size(); ++i) a_[i] -= o.a_[i];
        return *this;
    }
    Mat& operator*=(double s) {
        for (double& v : a_) v *= s;
        return *this;
    }

    friend Mat operator+(Mat a, const Mat& b) { return a += b; }
    friend Mat operator-(Mat a, const Mat& b) { return a -= b; }
    friend Mat operator*(Mat a, double s) { return a *= s; }
    friend Mat operator*(double s, Mat a) { return a *= s; }

    friend Mat operator*(const Mat& a, const Mat& b) {
        if (a.cols_ != b.rows_) throw std::invalid_argument("Mat: shape mismatch in product");
        Mat c(a.rows_, b.cols_);
        for (std::size_t i = 0; i < a.rows_; ++i)
            for (std::size_t k = 0; k < a.cols_; ++k) {
                const double aik = a(i, k);
                if (aik == 0.0) continue;
                for (std::size_t j = 0; j < b.cols_; ++j) c(i, j) += aik * b(k, j);
            }
        return c;
    }

    DVec apply(const DVec& x) const {
        if (x.size() != cols_) throw std::invalid_argument("Mat: vector size mismatch");
        DVec y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            double s = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) s += (*this)(i, j) * x[j];
            y[i] = s;
        }
        return y;
    }

    double trace() const {
        double t = 0.0;
        for (std::size_t i = 0; i < rows_ && i < cols_; ++i) t += (*this)(i, i);
        return t;
    }

    double max_abs() const {
        double m = 0.0;
        for (double v : a_) m = std::max(m, std::abs(v));
        return m;
    }

  private:
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> a_;
};

/// Determinant by LU with partial pivoting. Exact up to rounding; for the
/// closed-form flow catalog the analytic determinant is used instead.
inline double det(Mat m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("det: matrix not square");
    const std::size_t n = m.rows();
    double d = 1.0;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
        if (m(piv, col) == 0.0) return 0.0;
        if (piv != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(m(piv, j), m(col, j));
            d = -d;
        }
        d *= m(col, col);
        for (std::size_t r = col + 1; r < n; ++r) {
            const double f = m(r, col) / m(col, col);
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) m(r, j) -= f * m(col, j);
        }
    }
    return d;
}

/// Gauss-Jordan inverse for the small catalog matrices.
inline Mat inverse(Mat m) {
    if (m.rows() != m.cols()) throw std::invalid_argument("inverse: matrix not square");
    const std::size_t n = m.rows();
    Mat inv = Mat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(m(r, col)) > std::abs(m(piv, col))) piv = r;
        if (m(piv, col) == 0.0) throw std::runtime_error("inverse: singular matrix");
        if (piv != col)
            for (std::size_t j = 0; j < n; ++j) {
                std::swap(m(piv, j), m(col, j));
                std::swap(inv(piv, j), inv(col, j));
            }
        const double p = m(col, col);
        for (std::size_t j = 0; j < n; ++j) {
            m(col, j) /= p;
            inv(col, j) /= p;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = m(r, col);
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) {
                m(r, j) -= f * m(col, j);
                inv(r, j) -= f * inv(col, j);
            }
        }
    }
    return inv;
}

inline double dot(const DVec& a, const DVec& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

inline double norm2(const DVec& a) { return std::sqrt(dot(a, a)); }

inline double norm_inf(const DVec& a) {
    double m = 0.0;
    for (double v : a) m = std::max(m, std::abs(v));
    return m;
}

}  // namespace kinflow
