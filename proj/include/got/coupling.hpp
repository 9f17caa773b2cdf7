#pragma once

#include <cstddef>
#include <limits>
#include <vector>

namespace got {

// Dense row-major cost table; +inf marks forbidden pairs.
class CostMatrix {
public:
    CostMatrix() = default;
    CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), values_(rows * cols, fill) {}
    CostMatrix(std::size_t rows, std::size_t cols, std::vector<double> values);

    std::size_t rows() const { return rows_; }
    std::size_t cols() const { return cols_; }
    double operator()(std::size_t i, std::size_t j) const { return values_[i * cols_ + j]; }
    double& operator()(std::size_t i, std::size_t j) { return values_[i * cols_ + j]; }
    const std::vector<double>& values() const { return values_; }
    double max_finite() const;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> values_;
};

struct PlanEntry {
    std::size_t source = 0;
    std::size_t target = 0;
    double mass = 0.0;
};

struct Coupling {
    std::vector<PlanEntry> entries;
    double value = 0.0;
};

inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

}  // namespace got
