#pragma once

// Independent reference computations used by the tests.

#include "comve/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace oracle {

inline std::vector<double> naive_matmul(const std::vector<double>& a, const std::vector<double>& b, std::size_t n,
                                        std::size_t k, std::size_t m) {
    std::vector<double> out(n * m, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < m; ++j)
            for (std::size_t p = 0; p < k; ++p) out[i * m + j] += a[i * k + p] * b[p * m + j];
    return out;
}

// Central differences of a scalar function with respect to every entry of t.
inline std::vector<double> numeric_grad(const std::function<double()>& f, comve::Tensor t, double h) {
    auto values = t.mutable_data();
    std::vector<double> out(values.size());
    for (std::size_t k = 0; k < values.size(); ++k) {
        const double saved = values[k];
        values[k] = saved + h;
        const double plus = f();
        values[k] = saved - h;
        const double minus = f();
        values[k] = saved;
        out[k] = (plus - minus) / (2.0 * h);
    }
    return out;
}

inline double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

inline double rel_error(const std::vector<double>& analytic, const std::vector<double>& numeric, double floor) {
    std::vector<double> diff(analytic.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
    return norm(diff) / std::max({norm(analytic), norm(numeric), floor});
}

// ||a - n|| <= rel * max(||a||, ||n||) + abs. The absolute slack only matters
// for gradients that are exactly zero (e.g. attention key biases).
inline bool grad_close(const std::vector<double>& analytic, const std::vector<double>& numeric, double rel,
                       double abs) {
    std::vector<double> diff(analytic.size());
    for (std::size_t i = 0; i < diff.size(); ++i) diff[i] = analytic[i] - numeric[i];
    return norm(diff) <= rel * std::max(norm(analytic), norm(numeric)) + abs;
}

inline std::vector<double> grad_of(const comve::Tensor& t) {
    if (!t.has_grad()) return std::vector<double>(t.numel(), 0.0);
    return {t.grad().begin(), t.grad().end()};
}

inline comve::Tensor random_tensor(comve::Shape shape, std::mt19937_64& rng, double stddev = 1.0) {
    std::normal_distribution<double> normal(0.0, stddev);
    std::vector<double> v(comve::shape_numel(shape));
    for (auto& x : v) x = normal(rng);
    return comve::Tensor(std::move(shape), std::move(v), true);
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("comve_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

} // namespace oracle
