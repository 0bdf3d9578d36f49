#pragma once

#include "ninn/common.hpp"

#include <vector>

namespace ninn::eval {

/// Checkpoint states of one run, index k = observation number.
using RunCheckpoints = std::vector<Vector>;

/// Spatio-temporal RMSE over checkpoints k0..K (inclusive) and all runs:
///
///   sqrt( 1/((K-k0) N) * sum_{k=k0}^{K} sum_n |x_alg(n,k) - x_ref(n,k)|_2^2 )
///
/// The normalizer is (K - k0) while the sum has K - k0 + 1 terms, on purpose.
/// Returns +inf if any compared state is non-finite. Throws DimensionError on shape mismatch.
[[nodiscard]] double rmse(const std::vector<RunCheckpoints>& alg, const std::vector<RunCheckpoints>& ref, int k0,
                          int K);

}  // namespace ninn::eval
