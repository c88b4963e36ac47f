#pragma once

#include "ren/types.hpp"

#include <json.hpp>

#include <string>

namespace ren {

inline constexpr int kFormatVersion = 1;

nlohmann::json matrix_to_json(const Matrix& a);
// Expects a row-major nested array of exactly rows x cols.
Matrix matrix_from_json(const nlohmann::json& j, Eigen::Index rows, Eigen::Index cols,
                        const std::string& what);
nlohmann::json vector_to_json(const Vector& v);
Vector vector_from_json(const nlohmann::json& j, Eigen::Index size, const std::string& what);

nlohmann::json iqc_to_json(const IqcSpec& iqc);
IqcSpec iqc_from_json(const nlohmann::json& j, int p, int m);

nlohmann::json params_to_json(const DirectParams& theta);
DirectParams params_from_json(const nlohmann::json& j);

nlohmann::json model_to_json(const ExplicitModel& m);
// Throws IoError on any malformed or inconsistent field.
ExplicitModel model_from_json(const nlohmann::json& j);

void save_model(const std::string& path, const ExplicitModel& m);
ExplicitModel load_model(const std::string& path);

nlohmann::json read_json_file(const std::string& path);
void write_json_file(const std::string& path, const nlohmann::json& j);

}  // namespace ren
