#pragma once

#include "deepdeff/cells.hpp"
#include "deepdeff/data.hpp"
#include "deepdeff/numerics.hpp"

#include <atomic>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <string>
#include <unistd.h>

namespace testing {

using namespace deepdeff;

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag)
    {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                ("deepdeff_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() { std::filesystem::remove_all(path_); }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline void write_text(const std::filesystem::path& path, const std::string& text)
{
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = -1.0,
                            double hi = 1.0)
{
    Matrix m(rows, cols);
    for (auto& v : m.values()) {
        v = rng.uniform(lo, hi);
    }
    return m;
}

inline CellParams random_cell(CellKind kind, std::size_t f, std::size_t H, Rng& rng,
                              double scale = 0.5)
{
    auto p = CellParams::zeros(kind, f, H);
    for (auto* group : {&p.input_weights, &p.hidden_weights, &p.bias}) {
        for (auto& m : *group) {
            for (auto& v : m.values()) {
                v = rng.uniform(-scale, scale);
            }
        }
    }
    return p;
}

/// |a - b| / max(floor, |a| + |b|). The floor keeps finite-difference
/// rounding noise on near-zero gradients from reading as a mismatch.
inline double relative_error(double a, double b, double floor = 1e-8)
{
    return std::abs(a - b) / std::max(floor, std::abs(a) + std::abs(b));
}

/// Series on a 30-minute grid with loads from a callable of the index.
template <typename F>
TimeSeries make_series(std::size_t n, F&& load_at, int interval_minutes = 30,
                       Timestamp start = 1356998400 /* 2013-01-01 */)
{
    TimeSeries s;
    s.interval_minutes = interval_minutes;
    s.records.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        s.records[i].timestamp = start + static_cast<Timestamp>(i) * s.interval_seconds();
        s.records[i].load = load_at(i);
    }
    return annotate_calendar(s);
}

} // namespace testing
