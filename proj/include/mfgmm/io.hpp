#pragma once

#include "mfgmm/types.hpp"

#include <json.hpp>

#include <string>

// File formats. Labels are 1-based on disk, sigma_k = null means a flat
// precision prior, matrices are arrays of rows.
namespace mfgmm::io {

using json = nlohmann::ordered_json;

[[nodiscard]] json matrix_json(const MatrixXd &m);
[[nodiscard]] json vector_json(const VectorXd &v);
[[nodiscard]] MatrixXd matrix_from_json(const json &j, const std::string &field);
[[nodiscard]] VectorXd vector_from_json(const json &j, const std::string &field);

[[nodiscard]] json to_json(const ModelPoint &xi);
[[nodiscard]] ModelPoint point_from_json(const json &j);

[[nodiscard]] json to_json(const TrueMixture &tm);
[[nodiscard]] TrueMixture truth_from_json(const json &j);

[[nodiscard]] json to_json(const PriorConfig &pr);
[[nodiscard]] PriorConfig priors_from_json(const json &j, int K);

[[nodiscard]] json read_json(const std::string &path);
void write_json(const std::string &path, const json &j);

/// Header `n,x1,...,xP`, n 1-based, values in %.17g.
void write_dataset_csv(const std::string &path, const Dataset &ds);
/// Throws ConfigError naming the file and the 1-based line on malformed rows.
[[nodiscard]] Dataset read_dataset_csv(const std::string &path);

/// Required field lookup with a field-level error message.
[[nodiscard]] const json &field(const json &j, const std::string &name,
                                const std::string &where);

} // namespace mfgmm::io
