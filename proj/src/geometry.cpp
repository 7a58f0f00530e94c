#include "risloc/geometry.hpp"

#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "risloc/errors.hpp"

namespace risloc {

using nlohmann::json;

bool Region::contains(const Eigen::Vector3d& p, double tol) const {
  for (int i = 0; i < 3; ++i) {
    if (p[i] < center[i] - half_extent[i] - tol) return false;
    if (p[i] > center[i] + half_extent[i] + tol) return false;
  }
  return true;
}

Eigen::Vector3d Region::clamp(const Eigen::Vector3d& p) const {
  return p.cwiseMax(lo()).cwiseMin(hi());
}

void Scene::validate() const {
  if ((ue_region.half_extent.array() < 0.0).any())
    throw ConfigError("scene: ue_region half extents must be >= 0");
  if (ris_rows <= 0 || ris_cols <= 0)
    throw ConfigError("scene: ris_rows and ris_cols must be positive");
  if (rician_factor < 0.0)
    throw ConfigError("scene: rician_factor must be >= 0");
  if (!(noise_power > 0.0))
    throw ConfigError("scene: noise_power must be > 0");
}

namespace {

Eigen::Vector3d vec3_from_json(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("scene: missing key '") + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3)
    throw ConfigError(std::string("scene: '") + key +
                      "' must be a 3-element array");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}

PathlossModel pathloss_from_json(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("scene: missing key '") + key + "'");
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 2)
    throw ConfigError(std::string("scene: '") + key + "' must be an [a, b] pair");
  return {a[0].get<double>(), a[1].get<double>()};
}

template <typename T>
T scalar_from_json(const json& j, const char* key) {
  if (!j.contains(key))
    throw ConfigError(std::string("scene: missing key '") + key + "'");
  return j.at(key).get<T>();
}

}  // namespace

std::string Scene::to_json() const {
  json j;
  j["bs_position"] = {bs_position[0], bs_position[1], bs_position[2]};
  j["ris_position"] = {ris_position[0], ris_position[1], ris_position[2]};
  j["ue_region_center"] = {ue_region.center[0], ue_region.center[1],
                           ue_region.center[2]};
  j["ue_region_half_extent"] = {ue_region.half_extent[0],
                                ue_region.half_extent[1],
                                ue_region.half_extent[2]};
  j["ris_rows"] = ris_rows;
  j["ris_cols"] = ris_cols;
  j["spacing_factor"] = spacing_factor;
  j["rician_factor"] = rician_factor;
  j["pathloss_direct"] = {pathloss_direct.a, pathloss_direct.b};
  j["pathloss_reflected"] = {pathloss_reflected.a, pathloss_reflected.b};
  j["noise_power"] = noise_power;
  return j.dump(2);
}

Scene Scene::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("scene: invalid JSON: ") + e.what());
  }
  Scene s;
  s.bs_position = vec3_from_json(j, "bs_position");
  s.ris_position = vec3_from_json(j, "ris_position");
  s.ue_region.center = vec3_from_json(j, "ue_region_center");
  s.ue_region.half_extent = vec3_from_json(j, "ue_region_half_extent");
  s.ris_rows = scalar_from_json<int>(j, "ris_rows");
  s.ris_cols = scalar_from_json<int>(j, "ris_cols");
  s.spacing_factor = scalar_from_json<double>(j, "spacing_factor");
  s.rician_factor = scalar_from_json<double>(j, "rician_factor");
  s.pathloss_direct = pathloss_from_json(j, "pathloss_direct");
  s.pathloss_reflected = pathloss_from_json(j, "pathloss_reflected");
  s.noise_power = scalar_from_json<double>(j, "noise_power");
  s.validate();
  return s;
}

Scene Scene::from_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("scene: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

void Scene::save_json_file(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw ConfigError("scene: cannot write '" + path + "'");
  out << to_json() << "\n";
}

std::string Scene::fingerprint() const {
  // FNV-1a over the canonical serialization.
  const std::string text = to_json();
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ull;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

AnglePair angles_from_positions(const Eigen::Vector3d& source,
                                const Eigen::Vector3d& ris_position) {
  const Eigen::Vector3d diff = source - ris_position;
  const double d = diff.norm();
  if (d <= 0.0)
    throw DegenerateGeometryError("source coincides with the RIS");
  return {diff[1] / d, diff[2] / d};
}

Eigen::VectorXcd steering_vector(const AnglePair& angles, const Scene& scene) {
  const int n = scene.num_elements();
  const int cols = scene.ris_cols;
  Eigen::VectorXcd a(n);
  for (int i = 0; i < n; ++i) {
    const double v1 = static_cast<double>(i % cols);
    const double v2 = static_cast<double>(i / cols);
    const double phase = scene.spacing_factor *
                         (v1 * angles.sin_az_cos_el + v2 * angles.sin_el);
    a[i] = std::polar(1.0, phase);
  }
  return a;
}

double pathloss_amplitude(double distance, const PathlossModel& model) {
  if (!(distance > 0.0))
    throw DegenerateGeometryError("pathloss: distance must be > 0");
  const double loss_db = model.a + model.b * std::log10(distance);
  return std::pow(10.0, -loss_db / 20.0);
}

double snr_to_power(double snr_db) { return std::pow(10.0, snr_db / 10.0); }

}  // namespace risloc
