#pragma once

#include "ninn/common.hpp"

#include <filesystem>
#include <vector>

namespace ninn::training {

/// One-step input/target pairs (u, S(u)) separated by `dt_step` time units.
struct Dataset {
    std::vector<double> times;  // time of each input along its source trajectory
    std::vector<Vector> inputs;
    std::vector<Vector> targets;
    double dt_step = 1e-2;

    [[nodiscard]] std::size_t size() const { return inputs.size(); }
    [[nodiscard]] int state_dim() const { return inputs.empty() ? 0 : static_cast<int>(inputs.front().size()); }
    void validate() const;
};

/// CSV with header `t,u_1..u_d,s_1..s_d`; the first line is a
/// `# dt_step=<value>` comment. Values are written with 17 significant digits
/// so they round-trip exactly.
void write_dataset_csv(const std::filesystem::path& path, const Dataset& data);
[[nodiscard]] Dataset read_dataset_csv(const std::filesystem::path& path);

}  // namespace ninn::training
