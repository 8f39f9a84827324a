#pragma once

#include <cstddef>
#include <cstdint>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace deepdeff {

/// Dense row-major matrix of doubles. Vectors are 1 x n matrices or plain
/// std::vector<double>, whichever reads better at the call site.
class Matrix {
public:
    Matrix() = default;
    Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
    Matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
    static Matrix identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    std::size_t size() const noexcept { return values_.size(); }
    bool empty() const noexcept { return values_.empty(); }

    double& operator()(std::size_t r, std::size_t c) noexcept { return values_[r * cols_ + c]; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return values_[r * cols_ + c]; }

    std::span<double> values() noexcept { return values_; }
    std::span<const double> values() const noexcept { return values_; }

    std::span<double> row(std::size_t r) noexcept { return {values_.data() + r * cols_, cols_}; }
    std::span<const double> row(std::size_t r) const noexcept
    {
        return {values_.data() + r * cols_, cols_};
    }

    void fill(double value) noexcept;
    bool same_shape(const Matrix& other) const noexcept
    {
        return rows_ == other.rows_ && cols_ == other.cols_;
    }
    std::string shape_string() const;

    friend bool operator==(const Matrix&, const Matrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

/// Throws ShapeError naming both shapes unless a and b agree.
void require_same_shape(const Matrix& a, const Matrix& b, const char* what);

/// Matrix product. Rows of the result are computed in parallel when the
/// product is large enough to amortize a parallel region.
Matrix matmul(const Matrix& a, const Matrix& b);

/// Serial triple loop with the same accumulation order as matmul.
Matrix matmul_reference(const Matrix& a, const Matrix& b);

// Row-vector kernels used by the recurrent cells.

/// out += x . w, where x has w.rows() entries and out has w.cols().
void add_vec_mat(std::span<const double> x, const Matrix& w, std::span<double> out);

/// out += w . dy, where dy has w.cols() entries and out has w.rows().
void add_mat_vec(const Matrix& w, std::span<const double> dy, std::span<double> out);

/// grad += x^T dy.
void add_outer(std::span<const double> x, std::span<const double> dy, Matrix& grad);

/// Adds b into a element-wise. Shapes must agree.
void add_in_place(Matrix& a, const Matrix& b);

/// xoshiro256** seeded through splitmix64. The generator is fully specified
/// here so draws are identical on every platform and standard library,
/// unlike std::mt19937 paired with std::uniform_real_distribution.
class Rng {
public:
    using result_type = std::uint64_t;

    explicit Rng(std::uint64_t seed);

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept { return ~result_type{0}; }

    result_type operator()() noexcept { return next(); }
    std::uint64_t next() noexcept;

    /// Uniform in [0, 1) with 53 random bits.
    double uniform() noexcept;
    double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
    /// Uniform integer in [0, n). n must be positive.
    std::uint64_t below(std::uint64_t n) noexcept;
    /// Standard normal draw (Box-Muller, one value per call).
    double normal() noexcept;

    /// In-place Fisher-Yates shuffle using below().
    template <typename T>
    void shuffle(std::vector<T>& items) noexcept
    {
        for (std::size_t i = items.size(); i > 1; --i) {
            const auto j = static_cast<std::size_t>(below(i));
            std::swap(items[i - 1], items[j]);
        }
    }

private:
    std::uint64_t s_[4];
};

/// splitmix64 finalizer; also used to derive decorrelated child seeds.
std::uint64_t mix64(std::uint64_t x) noexcept;

/// Entries uniform in [-L, L] with L = sqrt(6 / (rows + cols)).
Matrix glorot_uniform(std::size_t rows, std::size_t cols, Rng& rng);

struct AdamState {
    Matrix m;
    Matrix v;
    std::uint64_t t = 0;
    double lr = 0.01;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    AdamState() = default;
    AdamState(std::size_t rows, std::size_t cols, double learning_rate = 0.01);
    explicit AdamState(const Matrix& like, double learning_rate = 0.01)
        : AdamState(like.rows(), like.cols(), learning_rate)
    {
    }
};

/// One bias-corrected Adam update of param in place.
void adam_step(Matrix& param, const Matrix& grad, AdamState& state);

} // namespace deepdeff
