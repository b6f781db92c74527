#pragma once

// JSON conversions shared by the file formats and the HTTP service.

#include "facedose/axes.hpp"
#include "facedose/cohort.hpp"
#include "facedose/error.hpp"
#include "facedose/gbm.hpp"
#include "facedose/geometry.hpp"
#include "facedose/muscle_map.hpp"

#include <json.hpp>

#include <string>
#include <string_view>

namespace facedose::io {

using json = nlohmann::json;

/// Parses text; syntax errors become Error(code) located at the byte offset.
json parse(std::string_view text, Errc code = Errc::format_error);

/// Throws Error(code) unless j["schema"] == expected.
void require_schema(const json& j, std::string_view expected, Errc code = Errc::format_error);

/// Field access with typed failures. `path` is the JSON path of `j`.
const json& at(const json& j, const char* key, const std::string& path, Errc code = Errc::format_error);
double number(const json& j, const std::string& path, Errc code = Errc::format_error);
std::int64_t integer(const json& j, const std::string& path, Errc code = Errc::format_error);
std::uint64_t unsigned_integer(const json& j, const std::string& path, Errc code = Errc::format_error);
std::string string(const json& j, const std::string& path, Errc code = Errc::format_error);
const json& array(const json& j, const std::string& path, Errc code = Errc::format_error,
                  std::ptrdiff_t expected_size = -1);

json to_json(const LandmarkSet& l);
LandmarkSet landmarks_from(const json& j, const std::string& path, Errc code = Errc::format_error);

json to_json(const LatentCode& w);
LatentCode latent_from(const json& j, const std::string& path, Errc code = Errc::format_error);

json to_json(const DoseVector& u);
DoseVector dose_from(const json& j, const std::string& path, Errc code = Errc::format_error);

json to_json(const AlphaVector& a);
AlphaVector alpha_from(const json& j, const std::string& path, Errc code = Errc::format_error);

/// Object keyed by metric_key.
json to_json(const MetricVector& m);
MetricVector metrics_from(const json& j, const std::string& path, Errc code = Errc::format_error);

json to_json(const AxisBasis& b);
AxisBasis basis_from(const json& j, const std::string& path, Errc code = Errc::format_error);

json to_json(const PatientRecord& r);
/// Failures are reported as Error(ingest_error).
PatientRecord record_from(const json& j);

json to_json(const GbmModel& m);
GbmModel gbm_from(const json& j, const std::string& path);

json to_json(const Eigen::MatrixXd& m);
Eigen::MatrixXd matrix_from(const json& j, const std::string& path, Errc code = Errc::format_error);

} // namespace facedose::io
