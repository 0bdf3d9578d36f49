#include "ninn/eval/rmse.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace ninn::eval {

double rmse(const std::vector<RunCheckpoints>& alg, const std::vector<RunCheckpoints>& ref, int k0, int K) {
    if (alg.size() != ref.size() || alg.empty()) throw DimensionError("rmse: run counts differ or are zero");
    if (k0 < 0 || K <= k0) throw std::invalid_argument("rmse: need K > k0 >= 0");
    double sum = 0.0;
    bool finite = true;
    for (std::size_t n = 0; n < alg.size(); ++n) {
        if (alg[n].size() <= static_cast<std::size_t>(K) || ref[n].size() <= static_cast<std::size_t>(K))
            throw DimensionError("rmse: run " + std::to_string(n) + " has fewer than K+1 checkpoints");
        for (int k = k0; k <= K; ++k) {
            const auto& a = alg[n][static_cast<std::size_t>(k)];
            const auto& r = ref[n][static_cast<std::size_t>(k)];
            if (a.size() != r.size()) throw DimensionError("rmse: state dimensions differ");
            if (!a.allFinite() || !r.allFinite()) finite = false;
            else sum += (a - r).squaredNorm();
        }
    }
    if (!finite) return std::numeric_limits<double>::infinity();
    const double value = std::sqrt(sum / (static_cast<double>(K - k0) * static_cast<double>(alg.size())));
    return std::isfinite(value) ? value : std::numeric_limits<double>::infinity();
}

}  // namespace ninn::eval
