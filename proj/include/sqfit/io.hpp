#pragma once

#include "sqfit/geometry.hpp"

#include "json.hpp"

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

namespace sqfit {

/// Auto picks the format from the file extension (.xyz/.txt, .ply, .csv).
/// PlyAscii is only meaningful for writing; reading detects the encoding.
enum class CloudFormat { Auto, Xyz, Ply, PlyAscii, Csv };

std::optional<CloudFormat> parse_cloud_format(std::string_view name);

struct LoadReport {
    std::size_t accepted = 0;
    /// Rows with a NaN or infinite coordinate.
    std::size_t rejected_non_finite = 0;
    /// Rows that did not parse as three numbers.
    std::size_t rejected_malformed = 0;
};

struct LoadedCloud {
    std::vector<Vec3> points;
    LoadReport report;
};

/// Throws Errc::FileNotFound, Errc::MalformedHeader,
/// Errc::UnsupportedPlyEncoding or Errc::EmptyCloud (no finite point).
LoadedCloud read_cloud(const std::filesystem::path& path, CloudFormat format = CloudFormat::Auto);

/// XYZ and CSV use shortest round-trip decimals; PLY is binary little-endian
/// doubles. Throws Errc::IoError.
void write_cloud(const std::filesystem::path& path, std::span<const Vec3> points,
                 CloudFormat format = CloudFormat::Auto);

/// {"eps":[e1,e2],"size":[ax,ay,az],"euler":[a,b,c],"translation":[tx,ty,tz],
///  "deformation":{"type":"none"} | {"type":"taper","kx":..,"ky":..}
///                | {"type":"bend","kappa":..,"alpha":..}}
nlohmann::json model_to_json(const SuperquadricModel& model);

/// Throws Errc::SchemaViolation naming the offending field path.
SuperquadricModel model_from_json(const nlohmann::json& j);

SuperquadricModel read_model(const std::filesystem::path& path);
void write_model(const std::filesystem::path& path, const SuperquadricModel& model);

/// Reads a JSON document; Errc::FileNotFound or Errc::SchemaViolation.
nlohmann::json read_json(const std::filesystem::path& path);
/// Writes with two-space indentation and a trailing newline.
void write_json(const std::filesystem::path& path, const nlohmann::json& j);

}  // namespace sqfit
