#include "deepdeff/numerics.hpp"

#include "deepdeff/error.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

namespace deepdeff {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols)
{
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    values_.assign(rows * cols, fill);
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
    : rows_(rows), cols_(cols), values_(std::move(values))
{
    if (rows == 0 || cols == 0) {
        throw ShapeError("matrix dimensions must be positive, got " + std::to_string(rows) + "x" +
                         std::to_string(cols));
    }
    if (values_.size() != rows * cols) {
        throw ShapeError("matrix " + shape_string() + " given " + std::to_string(values_.size()) +
                         " values");
    }
}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows)
{
    const std::size_t n_rows = rows.size();
    const std::size_t n_cols = n_rows ? rows.begin()->size() : 0;
    std::vector<double> values;
    values.reserve(n_rows * n_cols);
    for (const auto& r : rows) {
        if (r.size() != n_cols) {
            throw ShapeError("ragged initializer for matrix");
        }
        values.insert(values.end(), r.begin(), r.end());
    }
    return Matrix(n_rows, n_cols, std::move(values));
}

Matrix Matrix::identity(std::size_t n)
{
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        m(i, i) = 1.0;
    }
    return m;
}

void Matrix::fill(double value) noexcept
{
    for (auto& v : values_) {
        v = value;
    }
}

std::string Matrix::shape_string() const
{
    return "(" + std::to_string(rows_) + "x" + std::to_string(cols_) + ")";
}

void require_same_shape(const Matrix& a, const Matrix& b, const char* what)
{
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_string() + " vs " +
                         b.shape_string());
    }
}

namespace {

void check_product_shapes(const Matrix& a, const Matrix& b)
{
    if (a.cols() != b.rows()) {
        throw ShapeError("matmul: cannot multiply " + a.shape_string() + " by " + b.shape_string());
    }
}

// c.row(i) = a.row(i) . b, accumulated k-major so every element sees the
// same summation order in the serial and parallel paths.
inline void product_row(const Matrix& a, const Matrix& b, Matrix& c, std::size_t i)
{
    auto out = c.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
        const double aik = a(i, k);
        const auto brow = b.row(k);
        for (std::size_t j = 0; j < b.cols(); ++j) {
            out[j] += aik * brow[j];
        }
    }
}

constexpr std::size_t kParallelFlopThreshold = 1u << 16;

} // namespace

Matrix matmul(const Matrix& a, const Matrix& b)
{
    check_product_shapes(a, b);
    Matrix c(a.rows(), b.cols());
    const auto n = static_cast<long long>(a.rows());
    const bool parallel = a.rows() * a.cols() * b.cols() >= kParallelFlopThreshold;
#pragma omp parallel for schedule(static) if (parallel)
    for (long long i = 0; i < n; ++i) {
        product_row(a, b, c, static_cast<std::size_t>(i));
    }
    return c;
}

Matrix matmul_reference(const Matrix& a, const Matrix& b)
{
    check_product_shapes(a, b);
    Matrix c(a.rows(), b.cols());
    for (std::size_t i = 0; i < a.rows(); ++i) {
        product_row(a, b, c, i);
    }
    return c;
}

void add_vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out)
{
    if (x.size() != w.rows() || out.size() != w.cols()) {
        throw ShapeError("vector-matrix product: vector of " + std::to_string(x.size()) + " times " +
                         w.shape_string() + " into " + std::to_string(out.size()));
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) {
            continue;
        }
        const auto wrow = w.row(k);
        for (std::size_t j = 0; j < out.size(); ++j) {
            out[j] += xk * wrow[j];
        }
    }
}

void add_mat_vec(const Matrix& w, std::span<const double> dy, std::span<double> out)
{
    if (dy.size() != w.cols() || out.size() != w.rows()) {
        throw ShapeError("matrix-vector product: " + w.shape_string() + " times vector of " +
                         std::to_string(dy.size()) + " into " + std::to_string(out.size()));
    }
    for (std::size_t k = 0; k < out.size(); ++k) {
        const auto wrow = w.row(k);
        double acc = 0.0;
        for (std::size_t j = 0; j < dy.size(); ++j) {
            acc += wrow[j] * dy[j];
        }
        out[k] += acc;
    }
}

void add_outer(std::span<const double> x, std::span<const double> dy, Matrix& grad)
{
    if (x.size() != grad.rows() || dy.size() != grad.cols()) {
        throw ShapeError("outer product: " + std::to_string(x.size()) + "x" +
                         std::to_string(dy.size()) + " into " + grad.shape_string());
    }
    for (std::size_t k = 0; k < x.size(); ++k) {
        const double xk = x[k];
        if (xk == 0.0) {
            continue;
        }
        auto grow = grad.row(k);
        for (std::size_t j = 0; j < dy.size(); ++j) {
            grow[j] += xk * dy[j];
        }
    }
}

void add_in_place(Matrix& a, const Matrix& b)
{
    require_same_shape(a, b, "add");
    auto av = a.values();
    const auto bv = b.values();
    for (std::size_t i = 0; i < av.size(); ++i) {
        av[i] += bv[i];
    }
}

std::uint64_t mix64(std::uint64_t x) noexcept
{
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

Rng::Rng(std::uint64_t seed)
{
    std::uint64_t x = seed;
    for (auto& s : s_) {
        s = mix64(x);
        x += 0x9e3779b97f4a7c15ULL;
    }
}

namespace {
constexpr std::uint64_t rotl(std::uint64_t x, int k) noexcept
{
    return (x << k) | (x >> (64 - k));
}
} // namespace

std::uint64_t Rng::next() noexcept
{
    const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const std::uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
}

double Rng::uniform() noexcept
{
    return static_cast<double>(next() >> 11) * 0x1.0p-53;
}

std::uint64_t Rng::below(std::uint64_t n) noexcept
{
    // Rejection sampling removes modulo bias.
    const std::uint64_t limit = max() - max() % n;
    std::uint64_t x = next();
    while (x >= limit) {
        x = next();
    }
    return x % n;
}

double Rng::normal() noexcept
{
    double u1 = uniform();
    while (u1 <= 0.0) {
        u1 = uniform();
    }
    const double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng)
{
    Matrix m(rows, cols);
    const double limit = std::sqrt(6.0 / static_cast<double>(rows + cols));
    for (auto& v : m.values()) {
        v = rng.uniform(-limit, limit);
    }
    return m;
}

AdamState::AdamState(std::size_t rows, std::size_t cols, double learning_rate)
    : m(rows, cols), v(rows, cols), lr(learning_rate)
{
}

void adam_step(Matrix& param, const Matrix& grad, AdamState& state)
{
    require_same_shape(param, grad, "adam_step gradient");
    require_same_shape(param, state.m, "adam_step first moment");
    require_same_shape(param, state.v, "adam_step second moment");

    state.t += 1;
    const double t = static_cast<double>(state.t);
    const double correction1 = 1.0 - std::pow(state.beta1, t);
    const double correction2 = 1.0 - std::pow(state.beta2, t);

    auto p = param.values();
    const auto g = grad.values();
    auto m = state.m.values();
    auto v = state.v.values();
    for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        const double m_hat = m[i] / correction1;
        const double v_hat = v[i] / correction2;
        p[i] -= state.lr * m_hat / (std::sqrt(v_hat) + state.eps);
    }
}

} // namespace deepdeff
