#include "vprism/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace vprism {

using nlohmann::json;

std::string format_double(double v) {
  if (!std::isfinite(v)) throw NumericalError("cannot serialize a non-finite value");
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : bytes) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  for (int i = 15; i >= 0; --i) {
    buf[i] = "0123456789abcdef"[h & 0xf];
    h >>= 4;
  }
  return std::string(buf, 16);
}

json vec_to_json(const Point3& p) { return json::array({p.x(), p.y(), p.z()}); }

Point3 vec_from_json(const json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw InputError(what + " must be a 3-element array");
  Point3 p;
  for (int i = 0; i < 3; ++i) {
    if (!j[i].is_number()) throw InputError(what + " must be numeric");
    p[i] = j[i].get<double>();
  }
  return p;
}

// ---- clouds

void write_cloud(std::ostream& os, const SegmentedCloud& cloud) {
  const Point3& o = cloud.camera_origin();
  os << "vprism-cloud 1\n";
  os << "camera " << format_double(o.x()) << ' ' << format_double(o.y()) << ' ' << format_double(o.z()) << '\n';
  os << "classes " << cloud.num_classes() << '\n';
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const Point3& p = cloud.points()[i];
    os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << ' '
       << cloud.labels()[i] << '\n';
  }
}

std::string cloud_to_string(const SegmentedCloud& cloud) {
  std::ostringstream os;
  write_cloud(os, cloud);
  return os.str();
}

namespace {

std::vector<std::string_view> split_ws(std::string_view s) {
  std::vector<std::string_view> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && (s[i] == ' ' || s[i] == '\t' || s[i] == '\r')) ++i;
    const std::size_t start = i;
    while (i < s.size() && s[i] != ' ' && s[i] != '\t' && s[i] != '\r') ++i;
    if (i > start) out.push_back(s.substr(start, i - start));
  }
  return out;
}

[[noreturn]] void line_error(std::size_t line, const std::string& msg) {
  throw InputError("line " + std::to_string(line) + ": " + msg);
}

double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size() || !std::isfinite(v)) {
    line_error(line, "invalid number '" + std::string(tok) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view tok, std::size_t line) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size()) {
    line_error(line, "invalid non-negative integer '" + std::string(tok) + "'");
  }
  return v;
}

}  // namespace

SegmentedCloud read_cloud(std::istream& is) {
  std::string text;
  std::size_t line_no = 0;
  auto next = [&]() -> bool {
    if (!std::getline(is, text)) return false;
    ++line_no;
    return true;
  };
  if (!next() || split_ws(text) != std::vector<std::string_view>{"vprism-cloud", "1"}) {
    line_error(line_no ? line_no : 1, "expected header 'vprism-cloud 1'");
  }
  if (!next()) line_error(line_no + 1, "missing camera line");
  auto cam = split_ws(text);
  if (cam.size() != 4 || cam[0] != "camera") line_error(line_no, "expected 'camera <ox> <oy> <oz>'");
  const Point3 origin(parse_double(cam[1], line_no), parse_double(cam[2], line_no), parse_double(cam[3], line_no));
  if (!next()) line_error(line_no + 1, "missing classes line");
  auto cls = split_ws(text);
  if (cls.size() != 2 || cls[0] != "classes") line_error(line_no, "expected 'classes <c>'");
  const std::uint64_t c = parse_uint(cls[1], line_no);
  if (c < 1) line_error(line_no, "class count must be at least 1");

  std::vector<Point3> pts;
  std::vector<ClassIndex> labels;
  while (next()) {
    auto tok = split_ws(text);
    if (tok.empty()) continue;
    if (tok.size() != 4) line_error(line_no, "expected 'x y z label', got " + std::to_string(tok.size()) + " fields");
    pts.emplace_back(parse_double(tok[0], line_no), parse_double(tok[1], line_no), parse_double(tok[2], line_no));
    const std::uint64_t label = parse_uint(tok[3], line_no);
    if (label >= c) line_error(line_no, "label " + std::to_string(label) + " is not below the class count");
    labels.push_back(static_cast<ClassIndex>(label));
  }
  if (pts.empty()) throw InputError("cloud file contains no points");
  return SegmentedCloud(std::move(pts), std::move(labels), origin, c);
}

SegmentedCloud read_cloud_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open cloud file " + path);
  try {
    return read_cloud(in);
  } catch (const InputError& e) {
    throw InputError(path + ": " + e.what());
  }
}

void write_cloud_file(const std::string& path, const SegmentedCloud& cloud) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write " + path);
  write_cloud(out, cloud);
}

std::string cloud_digest(const SegmentedCloud& cloud) { return fnv1a_hex(cloud_to_string(cloud)); }

// ---- hyperparameters

json hyperparams_to_json(const Hyperparams& p) {
  json j = {{"kernel_gamma", p.kernel_gamma},
            {"hinge_grid_spacing", p.hinge_grid_spacing},
            {"surface_hinges_per_object", p.surface_hinges_per_object},
            {"em_iterations", p.em_iterations},
            {"prior_mean_scale", p.prior_mean_scale},
            {"prior_variance", p.prior_variance},
            {"covariance_mode", to_string(p.covariance_mode)},
            {"kernel_cutoff", p.kernel_cutoff},
            {"max_hinges", p.max_hinges},
            {"sampling", to_string(p.sampling)},
            {"r_obj", p.r_obj},
            {"subsample_res_surface", p.subsample_res_surface},
            {"subsample_res_empty", p.subsample_res_empty},
            {"ray_strata", p.ray_strata},
            {"fixed_step", p.fixed_step},
            {"under_table_samples_per_object", p.under_table_samples_per_object},
            {"ransac_iterations", p.ransac_iterations},
            {"ransac_inlier_threshold", p.ransac_inlier_threshold},
            {"level_set_tau", p.level_set_tau},
            {"rng_seed", p.rng_seed}};
  j["hinge_bounds"] = p.hinge_bounds
                          ? json{{"lo", vec_to_json(p.hinge_bounds->lo)}, {"hi", vec_to_json(p.hinge_bounds->hi)}}
                          : json(nullptr);
  return j;
}

Hyperparams hyperparams_from_json(const json& j) {
  if (!j.is_object()) throw InputError("hyperparams must be a JSON object");
  Hyperparams p;
  for (const auto& [key, v] : j.items()) {
    auto num = [&]() {
      if (!v.is_number()) throw InputError("hyperparameter '" + key + "' must be a number");
      return v.get<double>();
    };
    auto count = [&]() -> std::size_t {
      if (!v.is_number_unsigned()) throw InputError("hyperparameter '" + key + "' must be a non-negative integer");
      return v.get<std::size_t>();
    };
    auto str = [&]() {
      if (!v.is_string()) throw InputError("hyperparameter '" + key + "' must be a string");
      return v.get<std::string>();
    };
    if (key == "kernel_gamma") p.kernel_gamma = num();
    else if (key == "hinge_grid_spacing") p.hinge_grid_spacing = num();
    else if (key == "surface_hinges_per_object") p.surface_hinges_per_object = count();
    else if (key == "em_iterations") p.em_iterations = count();
    else if (key == "prior_mean_scale") p.prior_mean_scale = num();
    else if (key == "prior_variance") p.prior_variance = num();
    else if (key == "covariance_mode") p.covariance_mode = covariance_mode_from_string(str());
    else if (key == "kernel_cutoff") p.kernel_cutoff = num();
    else if (key == "max_hinges") p.max_hinges = count();
    else if (key == "sampling") p.sampling = sampling_mode_from_string(str());
    else if (key == "r_obj") p.r_obj = num();
    else if (key == "subsample_res_surface") p.subsample_res_surface = num();
    else if (key == "subsample_res_empty") p.subsample_res_empty = num();
    else if (key == "ray_strata") p.ray_strata = count();
    else if (key == "fixed_step") p.fixed_step = num();
    else if (key == "under_table_samples_per_object") p.under_table_samples_per_object = count();
    else if (key == "ransac_iterations") p.ransac_iterations = count();
    else if (key == "ransac_inlier_threshold") p.ransac_inlier_threshold = num();
    else if (key == "level_set_tau") p.level_set_tau = num();
    else if (key == "rng_seed") p.rng_seed = count();
    else if (key == "hinge_bounds") {
      if (v.is_null()) {
        p.hinge_bounds.reset();
      } else {
        if (!v.is_object() || !v.contains("lo") || !v.contains("hi")) {
          throw InputError("hinge_bounds must be null or {lo, hi}");
        }
        p.hinge_bounds = Aabb{vec_from_json(v["lo"], "hinge_bounds.lo"), vec_from_json(v["hi"], "hinge_bounds.hi")};
      }
    } else {
      throw InputError("unknown hyperparameter '" + key + "'");
    }
  }
  p.validate();
  return p;
}

// ---- models

namespace {

void write_array(std::ostream& os, const double* data, std::size_t n) {
  os << '[';
  for (std::size_t i = 0; i < n; ++i) {
    if (i) os << ',';
    os << format_double(data[i]);
  }
  os << ']';
}

// SAX handler that builds a DOM for everything except "covariance" arrays,
// which go straight into flat vectors. The DOM holds {"$captured": index}
// in their place.
class ModelSax {
 public:
  explicit ModelSax(json& root) : dom_(root) {}

  std::vector<std::vector<double>> captured;

  bool null() { return value(), dom_.null(); }
  bool boolean(bool v) { return value(), dom_.boolean(v); }
  bool number_integer(json::number_integer_t v) {
    if (capturing_) return captured.back().push_back(static_cast<double>(v)), true;
    return value(), dom_.number_integer(v);
  }
  bool number_unsigned(json::number_unsigned_t v) {
    if (capturing_) return captured.back().push_back(static_cast<double>(v)), true;
    return value(), dom_.number_unsigned(v);
  }
  bool number_float(json::number_float_t v, const json::string_t& s) {
    if (capturing_) return captured.back().push_back(v), true;
    return value(), dom_.number_float(v, s);
  }
  bool string(json::string_t& v) { return value(), dom_.string(v); }
  bool binary(json::binary_t& v) { return value(), dom_.binary(v); }
  bool start_object(std::size_t n) { return value(), dom_.start_object(n); }
  bool key(json::string_t& k) {
    pending_ = k == "covariance";
    return dom_.key(k);
  }
  bool end_object() { return dom_.end_object(); }
  bool start_array(std::size_t n) {
    if (capturing_) throw InputError("covariance arrays must be flat");
    if (pending_) {
      pending_ = false;
      capturing_ = true;
      captured.emplace_back();
      return true;
    }
    return dom_.start_array(n);
  }
  bool end_array() {
    if (capturing_) {
      capturing_ = false;
      json::string_t k = "$captured";
      return dom_.start_object(1) && dom_.key(k) && dom_.number_unsigned(captured.size() - 1) && dom_.end_object();
    }
    return dom_.end_array();
  }
  template <class Exception>
  bool parse_error(std::size_t pos, const std::string& token, const Exception&) {
    throw InputError("malformed model JSON near byte " + std::to_string(pos) + " ('" + token + "')");
  }

 private:
  void value() {
    if (capturing_) throw InputError("covariance arrays must contain numbers only");
    pending_ = false;
  }

  nlohmann::detail::json_sax_dom_parser<json> dom_;
  bool pending_ = false;
  bool capturing_ = false;
};

const json& field(const json& j, const char* key) {
  if (!j.is_object() || !j.contains(key)) throw InputError(std::string("model file lacks '") + key + "'");
  return j.at(key);
}

std::vector<double> number_array(const json& j, const std::string& what) {
  if (!j.is_array()) throw InputError(what + " must be an array");
  std::vector<double> out;
  out.reserve(j.size());
  for (const auto& v : j) {
    if (!v.is_number()) throw InputError(what + " must contain numbers only");
    out.push_back(v.get<double>());
  }
  return out;
}

}  // namespace

void write_model(std::ostream& os, const PosteriorModel& model) {
  const auto& post = model.posterior;
  const std::size_t d = post.dim();
  if (model.hinges.dim() != d) throw InputError("model hinge count does not match the posterior dimension");

  json head;
  head["format"] = "vprism-model";
  head["format_version"] = kModelFormatVersion;
  head["hyperparams"] = hyperparams_to_json(model.params);
  head["kernel"] = {{"type", "gaussian"}, {"gamma", model.hinges.kernel_gamma}};
  json flat = json::array();
  for (const auto& h : model.hinges.hinges) {
    if (!h.allFinite()) throw NumericalError("non-finite hinge point");
    flat.push_back(h.x());
    flat.push_back(h.y());
    flat.push_back(h.z());
  }
  head["hinges"] = std::move(flat);
  head["grid_hinge_count"] = model.hinges.grid_count;
  head["num_classes"] = post.num_classes();
  head["dim"] = d;
  head["covariance_layout"] = post.mode == CovarianceMode::kFull ? "full" : "diagonal";
  head["plane"] = {{"normal", vec_to_json(model.plane.normal)}, {"offset", model.plane.offset}};
  json bounds = json::array();
  for (const auto& b : model.object_bounds) bounds.push_back({{"lo", vec_to_json(b.lo)}, {"hi", vec_to_json(b.hi)}});
  head["object_bounds"] = std::move(bounds);
  head["provenance"] = {{"seed", model.params.rng_seed}, {"input_digest", model.input_digest}};

  std::string text = head.dump();
  text.pop_back();  // reopen the object to append the bulk arrays
  os << text << ",\"classes\":[";
  std::vector<double> row_major;
  for (std::size_t k = 0; k < post.num_classes(); ++k) {
    if (k) os << ',';
    os << "{\"log_det_covariance\":" << format_double(post.log_det_covariance[k]) << ",\"mean\":";
    const Eigen::VectorXd mean = post.means.row(static_cast<Eigen::Index>(k)).transpose();
    write_array(os, mean.data(), d);
    os << ",\"covariance\":";
    const Eigen::MatrixXd& cov = post.covariances[k];
    if (post.mode == CovarianceMode::kFull) {
      // Column-major storage of a symmetric matrix; transpose for row-major order.
      const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> rm = cov;
      write_array(os, rm.data(), d * d);
    } else {
      write_array(os, cov.data(), d);
    }
    os << '}';
  }
  os << "]}\n";
}

std::string model_to_string(const PosteriorModel& model) {
  std::ostringstream os;
  write_model(os, model);
  return os.str();
}

PosteriorModel read_model(std::istream& is) {
  json root;
  ModelSax sax(root);
  json::sax_parse(is, &sax);

  if (field(root, "format") != "vprism-model") throw InputError("not a vprism model file");
  const json& ver = field(root, "format_version");
  if (!ver.is_number_integer() || ver.get<int>() != kModelFormatVersion) {
    throw InputError("unsupported model format_version " + ver.dump() + " (expected " +
                     std::to_string(kModelFormatVersion) + ")");
  }
  PosteriorModel m;
  m.params = hyperparams_from_json(field(root, "hyperparams"));
  const json& kernel = field(root, "kernel");
  if (field(kernel, "type") != "gaussian") throw InputError("unsupported kernel type");
  m.hinges.kernel_gamma = field(kernel, "gamma").get<double>();
  const std::vector<double> flat = number_array(field(root, "hinges"), "hinges");
  if (flat.size() % 3 != 0) throw InputError("hinge array length must be a multiple of 3");
  for (std::size_t i = 0; i < flat.size(); i += 3) m.hinges.hinges.emplace_back(flat[i], flat[i + 1], flat[i + 2]);
  m.hinges.grid_count = field(root, "grid_hinge_count").get<std::size_t>();

  const auto c = field(root, "num_classes").get<std::size_t>();
  const auto d = field(root, "dim").get<std::size_t>();
  if (c < 2) throw InputError("model must have at least two classes");
  if (d != m.hinges.dim()) throw InputError("model dim does not match the hinge count");
  const std::string layout = field(root, "covariance_layout").get<std::string>();
  if (layout != "full" && layout != "diagonal") throw InputError("unknown covariance layout '" + layout + "'");
  m.posterior.mode = layout == "full" ? CovarianceMode::kFull : CovarianceMode::kDiagonal;

  const json& plane = field(root, "plane");
  m.plane.normal = vec_from_json(field(plane, "normal"), "plane.normal");
  m.plane.offset = field(plane, "offset").get<double>();
  for (const auto& b : field(root, "object_bounds")) {
    m.object_bounds.push_back({vec_from_json(field(b, "lo"), "bounds.lo"), vec_from_json(field(b, "hi"), "bounds.hi")});
  }
  const json& prov = field(root, "provenance");
  m.input_digest = field(prov, "input_digest").get<std::string>();

  const json& classes = field(root, "classes");
  if (!classes.is_array() || classes.size() != c) throw InputError("model must list one entry per class");
  const auto dd = static_cast<Eigen::Index>(d);
  m.posterior.means.resize(static_cast<Eigen::Index>(c), dd);
  for (std::size_t k = 0; k < c; ++k) {
    const json& entry = classes[k];
    const std::vector<double> mean = number_array(field(entry, "mean"), "mean");
    if (mean.size() != d) throw InputError("class " + std::to_string(k) + " mean has the wrong length");
    m.posterior.means.row(static_cast<Eigen::Index>(k)) = Eigen::Map<const Eigen::RowVectorXd>(mean.data(), dd);
    m.posterior.log_det_covariance.push_back(field(entry, "log_det_covariance").get<double>());
    const json& ref = field(entry, "covariance");
    if (!ref.is_object() || !ref.contains("$captured")) throw InputError("covariance must be a numeric array");
    const std::vector<double>& cov = sax.captured.at(ref["$captured"].get<std::size_t>());
    if (m.posterior.mode == CovarianceMode::kFull) {
      if (cov.size() != d * d) throw InputError("class " + std::to_string(k) + " covariance has the wrong size");
      m.posterior.covariances.emplace_back(
          Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(cov.data(), dd, dd));
    } else {
      if (cov.size() != d) throw InputError("class " + std::to_string(k) + " variances have the wrong length");
      m.posterior.covariances.emplace_back(Eigen::Map<const Eigen::VectorXd>(cov.data(), dd));
    }
  }
  m.prior = GaussianPrior::isotropic(d, m.params.prior_mean_scale, m.params.prior_variance);
  return m;
}

PosteriorModel read_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file " + path);
  return read_model(in);
}

void write_model_file(const std::string& path, const PosteriorModel& model) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_model(out, model);
}

std::string model_digest(const PosteriorModel& model) { return fnv1a_hex(model_to_string(model)); }

// ---- entropy slices

void write_pgm(std::ostream& os, const EntropySlice& slice) {
  const std::size_t n = slice.spec.resolution;
  os << "P5\n" << n << ' ' << n << "\n65535\n";
  const double range = slice.max - slice.min;
  for (double v : slice.values) {
    const double scaled = range > 0.0 ? (v - slice.min) / range * 65535.0 : 0.0;
    const auto s = static_cast<std::uint16_t>(std::lround(std::clamp(scaled, 0.0, 65535.0)));
    const char bytes[2] = {static_cast<char>(s >> 8), static_cast<char>(s & 0xff)};
    os.write(bytes, 2);
  }
}

void write_pgm_file(const std::string& path, const EntropySlice& slice) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  write_pgm(out, slice);
}

json slice_sidecar(const EntropySlice& slice) {
  return {{"min", slice.min},
          {"max", slice.max},
          {"resolution", slice.spec.resolution},
          {"units", "nats"},
          {"scaling", "linear: min -> 0, max -> 65535"},
          {"frame",
           {{"origin", vec_to_json(slice.spec.origin)},
            {"axis_u", vec_to_json(slice.spec.axis_u.normalized())},
            {"axis_v", vec_to_json(slice.spec.axis_v.normalized())},
            {"extent", slice.spec.extent},
            {"layout", "row-major; columns along axis_u, rows along axis_v; origin is the slice center"}}}};
}

PgmImage read_pgm(std::istream& is) {
  std::string magic;
  PgmImage img;
  is >> magic >> img.width >> img.height >> img.max_value;
  if (!is || magic != "P5") throw InputError("not a binary PGM");
  is.get();
  const std::size_t bytes = img.max_value > 255 ? 2 : 1;
  img.pixels.resize(img.width * img.height);
  for (auto& px : img.pixels) {
    unsigned char b[2] = {0, 0};
    is.read(reinterpret_cast<char*>(b), static_cast<std::streamsize>(bytes));
    if (!is) throw InputError("truncated PGM data");
    px = bytes == 2 ? static_cast<std::uint16_t>((b[0] << 8) | b[1]) : b[0];
  }
  return img;
}

}  // namespace vprism
