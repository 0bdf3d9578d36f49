#pragma once

#include "ninn/common.hpp"
#include "ninn/dynamics/ode.hpp"
#include "ninn/nn/resnet.hpp"

#include <cstdint>
#include <random>
#include <string>
#include <vector>

namespace ninn::assimilation {

/// Interpolant I_M as a projection onto a set of observed state components.
class ObservationOperator {
public:
    ObservationOperator() = default;
    /// Indices are sorted and de-duplicated; each must lie in [0, state_dim).
    ObservationOperator(std::vector<int> observed, int state_dim);

    [[nodiscard]] static ObservationOperator all(int state_dim);
    [[nodiscard]] static ObservationOperator none(int state_dim) { return ObservationOperator({}, state_dim); }
    /// Every `stride`-th component starting at `offset`.
    [[nodiscard]] static ObservationOperator every(int stride, int state_dim, int offset = 0);

    [[nodiscard]] const std::vector<int>& observed() const { return observed_; }
    [[nodiscard]] int state_dim() const { return state_dim_; }
    [[nodiscard]] std::size_t count() const { return observed_.size(); }
    [[nodiscard]] bool is_observed(int component) const;

    /// Observed values I_M x, length count().
    [[nodiscard]] Vector restrict(const Vector& x) const;
    /// Keeps observed components of x and zeroes the rest (same length as x).
    [[nodiscard]] Vector project(const Vector& x) const;
    /// Lifts observed values into state space with zeros elsewhere.
    [[nodiscard]] Vector embed(const Vector& values) const;
    /// Copy of w with the observed components overwritten by `values`.
    [[nodiscard]] Vector insert(const Vector& w, const Vector& values) const;

    /// Compact label, e.g. "x_1" or "x_1+x_3" (1-based), "all", "none".
    [[nodiscard]] std::string label() const;

private:
    std::vector<int> observed_;
    int state_dim_ = 0;
};

/// Masking map on the ResNet state space of a system: the concatenation of
/// one hidden layer's vectors across all nets. Entries belonging to nets whose
/// output component is unobserved are zeroed.
class StateSpaceMask {
public:
    StateSpaceMask(const nn::ResNetSystem& system, const ObservationOperator& op);

    [[nodiscard]] Eigen::Index size() const { return static_cast<Eigen::Index>(keep_.size()); }
    [[nodiscard]] Vector apply(const Vector& x) const;
    /// Concatenates one hidden vector per net into the ResNet state space.
    [[nodiscard]] static Vector concatenate(const std::vector<Vector>& per_net);

private:
    std::vector<bool> keep_;
};

struct ObservationEntry {
    double time = 0.0;
    Vector values;  // restricted to the observed components
};

struct ObservationStream {
    double delta_t_obs = 0.1;
    std::vector<ObservationEntry> entries;

    void validate() const;
};

/// Observations of a truth trajectory; optional additive Gaussian noise.
[[nodiscard]] ObservationStream make_stream(const dynamics::Trajectory& truth, const ObservationOperator& op,
                                            double noise_std = 0.0, std::uint64_t noise_seed = 0);

/// mu_eff(i) = mu * exp(-i * lambda_decay) at substep i of a window.
struct NudgeSchedule {
    double mu = 1.0;
    double lambda_decay = 0.0;
    int substeps = 10;

    void validate() const;
    [[nodiscard]] double effective_mu(int substep) const;
    [[nodiscard]] std::vector<double> decay_schedule() const;
};

}  // namespace ninn::assimilation
