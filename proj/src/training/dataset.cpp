#include "ninn/training/dataset.hpp"

#include "ninn/csv.hpp"

namespace ninn::training {

void Dataset::validate() const {
    if (inputs.size() != targets.size() || times.size() != inputs.size())
        throw DimensionError("dataset inputs, targets and times differ in length");
    if (!(dt_step > 0.0)) throw std::invalid_argument("dataset dt_step must be positive");
    const auto d = state_dim();
    for (std::size_t i = 0; i < inputs.size(); ++i) {
        if (inputs[i].size() != d || targets[i].size() != d)
            throw DimensionError("dataset sample " + std::to_string(i) + " has inconsistent dimension");
        if (!inputs[i].allFinite() || !targets[i].allFinite())
            throw std::invalid_argument("dataset sample " + std::to_string(i) + " is not finite");
    }
}

void write_dataset_csv(const std::filesystem::path& path, const Dataset& data) {
    data.validate();
    const int d = data.state_dim();
    csv::Table table;
    table.comments.push_back("dt_step=" + csv::format_double(data.dt_step));
    table.header.push_back("t");
    for (int k = 1; k <= d; ++k) table.header.push_back("u_" + std::to_string(k));
    for (int k = 1; k <= d; ++k) table.header.push_back("s_" + std::to_string(k));
    table.rows.reserve(data.size());
    for (std::size_t i = 0; i < data.size(); ++i) {
        std::vector<std::string> row{csv::format_double(data.times[i])};
        for (int k = 0; k < d; ++k) row.push_back(csv::format_double(data.inputs[i][k]));
        for (int k = 0; k < d; ++k) row.push_back(csv::format_double(data.targets[i][k]));
        table.rows.push_back(std::move(row));
    }
    csv::write(path, table);
}

Dataset read_dataset_csv(const std::filesystem::path& path) {
    const auto table = csv::read(path);
    if (table.header.size() < 3 || table.header.size() % 2 == 0 || table.header.front() != "t")
        throw DimensionError(path.string() + ": expected header t,u_1..u_d,s_1..s_d");
    const auto d = static_cast<Eigen::Index>((table.header.size() - 1) / 2);
    Dataset data;
    for (const auto& c : table.comments)
        if (c.rfind("dt_step=", 0) == 0) data.dt_step = csv::parse_double(c.substr(8));
    for (const auto& row : table.rows) {
        data.times.push_back(csv::parse_double(row[0]));
        Vector u(d), s(d);
        for (Eigen::Index k = 0; k < d; ++k) {
            u[k] = csv::parse_double(row[static_cast<std::size_t>(1 + k)]);
            s[k] = csv::parse_double(row[static_cast<std::size_t>(1 + d + k)]);
        }
        data.inputs.push_back(std::move(u));
        data.targets.push_back(std::move(s));
    }
    data.validate();
    return data;
}

}  // namespace ninn::training
