#pragma once

#include "vprism/core.hpp"
#include "vprism/inference.hpp"
#include "vprism/model.hpp"

#include "json.hpp"

#include <iosfwd>
#include <string>

namespace vprism {

constexpr int kModelFormatVersion = 1;

/// Shortest decimal text that parses back to exactly the same double.
std::string format_double(double v);

/// 64-bit FNV-1a, rendered as 16 hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// Text cloud format:
///   vprism-cloud 1
///   camera <ox> <oy> <oz>
///   classes <c>
///   <x> <y> <z> <label>     (one line per point)
void write_cloud(std::ostream& os, const SegmentedCloud& cloud);
std::string cloud_to_string(const SegmentedCloud& cloud);
/// Throws InputError naming the offending line.
SegmentedCloud read_cloud(std::istream& is);
SegmentedCloud read_cloud_file(const std::string& path);
void write_cloud_file(const std::string& path, const SegmentedCloud& cloud);

/// Digest of the canonical text form of a cloud.
std::string cloud_digest(const SegmentedCloud& cloud);

nlohmann::json hyperparams_to_json(const Hyperparams& params);
/// Missing keys keep their defaults; unknown keys are rejected.
Hyperparams hyperparams_from_json(const nlohmann::json& j);

/// Model JSON. Covariances are written as flat row-major arrays (or a
/// "diagonal" layout holding the marginal variances).
void write_model(std::ostream& os, const PosteriorModel& model);
std::string model_to_string(const PosteriorModel& model);
/// Rejects files whose format_version differs from kModelFormatVersion.
PosteriorModel read_model(std::istream& is);
PosteriorModel read_model_file(const std::string& path);
void write_model_file(const std::string& path, const PosteriorModel& model);

/// Digest of the serialized model.
std::string model_digest(const PosteriorModel& model);

/// Binary PGM (P5), 16-bit big-endian samples scaled linearly from
/// [slice.min, slice.max] to [0, 65535]. A constant field maps to 0.
void write_pgm(std::ostream& os, const EntropySlice& slice);
void write_pgm_file(const std::string& path, const EntropySlice& slice);
nlohmann::json slice_sidecar(const EntropySlice& slice);

struct PgmImage {
  std::size_t width = 0, height = 0;
  unsigned max_value = 0;
  std::vector<std::uint16_t> pixels;
};
PgmImage read_pgm(std::istream& is);

nlohmann::json vec_to_json(const Point3& p);
Point3 vec_from_json(const nlohmann::json& j, const std::string& what);

}  // namespace vprism
