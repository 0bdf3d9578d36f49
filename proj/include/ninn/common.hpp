#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace ninn {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using RowVector = Eigen::RowVectorXd;

/// Raised when a forward pass, integrator step or optimizer iterate leaves
/// the finite range.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, int layer = -1, int component = -1)
        : std::runtime_error(what), layer_(layer), component_(component) {}

    [[nodiscard]] int layer() const noexcept { return layer_; }
    [[nodiscard]] int component() const noexcept { return component_; }

private:
    int layer_;
    int component_;
};

/// Raised on mismatched dimensions between data, models and configs.
class DimensionError : public std::invalid_argument {
public:
    using std::invalid_argument::invalid_argument;
};

[[nodiscard]] inline bool all_finite(const Vector& v) { return v.allFinite(); }

/// Selects entries of `u` at `indices`.
[[nodiscard]] Vector gather(const Vector& u, const std::vector<int>& indices);

}  // namespace ninn
