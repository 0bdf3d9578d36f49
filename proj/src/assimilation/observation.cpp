#include "ninn/assimilation/observation.hpp"

#include <algorithm>
#include <cmath>

namespace ninn::assimilation {

ObservationOperator::ObservationOperator(std::vector<int> observed, int state_dim)
    : observed_(std::move(observed)), state_dim_(state_dim) {
    if (state_dim < 1) throw std::invalid_argument("ObservationOperator: state_dim must be positive");
    std::sort(observed_.begin(), observed_.end());
    observed_.erase(std::unique(observed_.begin(), observed_.end()), observed_.end());
    for (int idx : observed_)
        if (idx < 0 || idx >= state_dim) throw DimensionError("observed component out of range");
}

ObservationOperator ObservationOperator::all(int state_dim) {
    std::vector<int> idx(static_cast<std::size_t>(state_dim));
    for (int i = 0; i < state_dim; ++i) idx[static_cast<std::size_t>(i)] = i;
    return {idx, state_dim};
}

ObservationOperator ObservationOperator::every(int stride, int state_dim, int offset) {
    if (stride < 1) throw std::invalid_argument("ObservationOperator::every: stride must be >= 1");
    std::vector<int> idx;
    for (int i = offset; i < state_dim; i += stride) idx.push_back(i);
    return {idx, state_dim};
}

bool ObservationOperator::is_observed(int component) const {
    return std::binary_search(observed_.begin(), observed_.end(), component);
}

Vector ObservationOperator::restrict(const Vector& x) const {
    if (x.size() != state_dim_) throw DimensionError("restrict: state has wrong dimension");
    return gather(x, observed_);
}

Vector ObservationOperator::project(const Vector& x) const {
    if (x.size() != state_dim_) throw DimensionError("project: state has wrong dimension");
    Vector out = Vector::Zero(state_dim_);
    for (int idx : observed_) out[idx] = x[idx];
    return out;
}

Vector ObservationOperator::embed(const Vector& values) const {
    return insert(Vector::Zero(state_dim_), values);
}

Vector ObservationOperator::insert(const Vector& w, const Vector& values) const {
    if (w.size() != state_dim_) throw DimensionError("insert: state has wrong dimension");
    if (values.size() != static_cast<Eigen::Index>(observed_.size()))
        throw DimensionError("insert: observation vector does not match observed set");
    Vector out = w;
    for (std::size_t k = 0; k < observed_.size(); ++k) out[observed_[k]] = values[static_cast<Eigen::Index>(k)];
    return out;
}

std::string ObservationOperator::label() const {
    if (observed_.empty()) return "none";
    if (static_cast<int>(observed_.size()) == state_dim_ && state_dim_ > 1) return "all";
    std::string out;
    for (int idx : observed_) out += (out.empty() ? "x_" : "+x_") + std::to_string(idx + 1);
    return out;
}

StateSpaceMask::StateSpaceMask(const nn::ResNetSystem& system, const ObservationOperator& op) {
    if (op.state_dim() != system.state_dim) throw DimensionError("StateSpaceMask: operator and system differ");
    for (int i = 0; i < system.state_dim; ++i) {
        const bool observed = op.is_observed(i);
        keep_.insert(keep_.end(), static_cast<std::size_t>(system.nets[static_cast<std::size_t>(i)].width()), observed);
    }
}

Vector StateSpaceMask::apply(const Vector& x) const {
    if (x.size() != size()) throw DimensionError("StateSpaceMask::apply: vector has wrong dimension");
    Vector out = x;
    for (Eigen::Index k = 0; k < x.size(); ++k)
        if (!keep_[static_cast<std::size_t>(k)]) out[k] = 0.0;
    return out;
}

Vector StateSpaceMask::concatenate(const std::vector<Vector>& per_net) {
    Eigen::Index total = 0;
    for (const auto& v : per_net) total += v.size();
    Vector out(total);
    Eigen::Index at = 0;
    for (const auto& v : per_net) {
        out.segment(at, v.size()) = v;
        at += v.size();
    }
    return out;
}

void ObservationStream::validate() const {
    if (!(delta_t_obs > 0.0)) throw std::invalid_argument("observation spacing must be positive");
    for (std::size_t k = 1; k < entries.size(); ++k) {
        const double gap = entries[k].time - entries[k - 1].time;
        if (std::abs(gap - delta_t_obs) > 1e-9 * std::max(1.0, std::abs(entries[k].time)))
            throw std::invalid_argument("observation times are not uniformly spaced by delta_t_obs");
        if (entries[k].values.size() != entries.front().values.size())
            throw DimensionError("observation entries differ in length");
    }
}

ObservationStream make_stream(const dynamics::Trajectory& truth, const ObservationOperator& op, double noise_std,
                              std::uint64_t noise_seed) {
    if (truth.size() < 1) throw std::invalid_argument("make_stream: empty truth trajectory");
    ObservationStream stream;
    stream.delta_t_obs = truth.size() > 1 ? truth.times[1] - truth.times[0] : 0.1;
    std::mt19937_64 rng(noise_seed);
    std::normal_distribution<double> noise(0.0, noise_std > 0.0 ? noise_std : 1.0);
    for (std::size_t k = 0; k < truth.size(); ++k) {
        Vector values = op.restrict(truth.states[k]);
        if (noise_std > 0.0)
            for (Eigen::Index j = 0; j < values.size(); ++j) values[j] += noise(rng);
        stream.entries.push_back({truth.times[k], std::move(values)});
    }
    stream.validate();
    return stream;
}

void NudgeSchedule::validate() const {
    if (!(mu >= 0.0) || !std::isfinite(mu)) throw std::invalid_argument("mu must be finite and >= 0");
    if (!(lambda_decay >= 0.0)) throw std::invalid_argument("lambda_decay must be >= 0");
    if (substeps < 1) throw std::invalid_argument("substeps must be >= 1");
}

double NudgeSchedule::effective_mu(int substep) const {
    return mu * std::exp(-static_cast<double>(substep) * lambda_decay);
}

std::vector<double> NudgeSchedule::decay_schedule() const {
    std::vector<double> out;
    for (int i = 0; i < substeps; ++i) out.push_back(effective_mu(i));
    return out;
}

}  // namespace ninn::assimilation
