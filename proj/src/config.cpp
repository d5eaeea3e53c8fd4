#include "haptigrasp/config.hpp"

#include <fstream>
#include <iterator>

#include <json.hpp>

#include "haptigrasp/digest.hpp"
#include "haptigrasp/error.hpp"

namespace hg {

using nlohmann::json;

namespace {

// Each block lists its fields once; the same visitor drives both
// serialization and strict parsing.
template <typename F>
void fields(PathConfig& c, F&& f) {
  f("catalog", c.catalog);
  f("dataset", c.dataset);
  f("models", c.models);
  f("reports", c.reports);
}

template <typename F>
void fields(CatalogConfig& c, F&& f) {
  f("n_train", c.n_train);
  f("n_test", c.n_test);
}

template <typename F>
void fields(Interval& c, F&& f) {
  f("min", c.min);
  f("max", c.max);
}

template <typename F>
void fields(Workspace& c, F&& f) {
  f("x_extent", c.x_extent);
  f("y_extent", c.y_extent);
  f("grasp_plane_z", c.grasp_plane_z);
}

template <typename F>
void fields(SimParams& c, F&& f) {
  f("aperture", c.aperture);
  f("diameter_factor", c.diameter_factor);
  f("f_max", c.f_max);
  f("center_tol", c.center_tol);
  f("instability_base", c.instability_base);
  f("displacement_cap", c.displacement_cap);
  f("rotation_cap", c.rotation_cap);
  f("z_clearance", c.z_clearance);
  f("z_top_margin", c.z_top_margin);
  f("placement_margin", c.placement_margin);
  f("finger_spread", c.finger_spread);
}

template <typename F>
void fields(HapticParams& c, F&& f) {
  f("rate_hz", c.rate_hz);
  f("duration_min_s", c.duration_min_s);
  f("duration_max_s", c.duration_max_s);
  f("noise_sigma", c.noise_sigma);
  f("stall_min_s", c.stall_min_s);
  f("stall_max_s", c.stall_max_s);
  f("finger_speed", c.finger_speed);
  f("peak_force", c.peak_force);
  f("stiffness_ref", c.stiffness_ref);
  f("ramp_tau_s", c.ramp_tau_s);
  f("level_jitter", c.level_jitter);
  f("push_force", c.push_force);
  f("axial_gain", c.axial_gain);
  f("lateral_gain", c.lateral_gain);
  f("offset_ref", c.offset_ref);
  f("vertical_gain", c.vertical_gain);
  f("shear_gain", c.shear_gain);
  f("slip_floor", c.slip_floor);
  f("slip_recovery", c.slip_recovery);
  f("slip_drop_s", c.slip_drop_s);
  f("slip_recover_s", c.slip_recover_s);
  f("failure_sag", c.failure_sag);
  f("transient_min_s", c.transient_min_s);
  f("transient_max_s", c.transient_max_s);
}

template <typename F>
void fields(LocalizeParams& c, F&& f) {
  f("motion_sigma", c.motion.sigma);
  f("vicinity_radius", c.measurement.vicinity_radius);
  f("w_occupied", c.measurement.w_occupied);
  f("w_free", c.measurement.w_free);
  f("contact_offset", c.measurement.contact_offset);
  f("n_particles", c.n_particles);
  f("n_scans", c.n_scans);
  f("scan_spacing", c.scan_spacing);
  f("push_probability", c.push_probability);
  f("push_cap", c.push_cap);
}

template <typename F>
void fields(EncoderConfig& c, F&& f) {
  f("latent_dim", c.latent_dim);
  f("lstm_hidden", c.lstm_hidden);
  f("window_s", c.window_s);
  f("training_rate_hz", c.training_rate_hz);
  f("window_after_close_s", c.window_after_close_s);
  f("learning_rate", c.learning_rate);
  f("epochs", c.epochs);
  f("batch_size", c.batch_size);
  f("validation_fraction", c.validation_fraction);
  f("clip_norm", c.clip_norm);
  f("min_episodes", c.min_episodes);
  f("max_episodes", c.max_episodes);
}

template <typename F>
void fields(ClassifierConfig& c, F&& f) {
  f("hidden", c.hidden);
  f("learning_rate", c.learning_rate);
  f("epochs", c.epochs);
  f("batch_size", c.batch_size);
  f("l2", c.l2);
}

template <typename F>
void fields(PolicyConfig& c, F&& f) {
  f("hidden", c.hidden);
  f("learning_rate", c.learning_rate);
  f("epochs", c.epochs);
  f("batch_size", c.batch_size);
}

template <typename F>
void fields(ActionBins& c, F&& f) {
  f("lo", c.lo);
  f("hi", c.hi);
}

template <typename F>
void fields(GwosConfig& c, F&& f) {
  f("p_threshold", c.p_threshold);
  f("t_max", c.t_max);
  f("sigma_loc", c.init.sigma_loc);
  f("sigma_theta", c.init.sigma_theta);
  f("z_band", c.init.z_band);
}

template <typename F>
void fields(CollectionCounts& c, F&& f) {
  f("set1_objects", c.set1_objects);
  f("set1_grasps_min", c.set1_grasps_min);
  f("set1_grasps_max", c.set1_grasps_max);
  f("set1_regrasps_min", c.set1_regrasps_min);
  f("set1_regrasps_max", c.set1_regrasps_max);
  f("set2_objects", c.set2_objects);
  f("set2_grasps_min", c.set2_grasps_min);
  f("set2_grasps_max", c.set2_grasps_max);
  f("set2_regrasps_min", c.set2_regrasps_min);
  f("set2_regrasps_max", c.set2_regrasps_max);
  f("test_grasps_per_object", c.test_grasps_per_object);
  f("test_regrasps", c.test_regrasps);
}

template <typename F>
void fields(EvaluationConfig& c, F&& f) {
  f("orientations", c.orientations);
  f("repeats", c.repeats);
  f("max_objects", c.max_objects);
  f("material_train_fraction", c.material_train_fraction);
}

template <typename F>
void fields(RunConfig& c, F&& f) {
  f("seed", c.seed);
  f("paths", c.paths);
  f("catalog", c.catalog);
  f("workspace", c.workspace);
  f("sim", c.sim);
  f("haptics", c.haptics);
  f("localize", c.localize);
  f("encoder", c.encoder);
  f("stability", c.stability);
  f("material", c.material);
  f("policy", c.policy);
  f("bins", c.bins);
  f("gwos", c.gwos);
  f("collection", c.collection);
  f("evaluation", c.evaluation);
}

template <typename T>
concept Block = requires(T& t) { fields(t, [](const char*, auto&) {}); };

template <typename T>
json write(T& v) {
  if constexpr (Block<T>) {
    json j = json::object();
    fields(v, [&](const char* k, auto& x) { j[k] = write(x); });
    return j;
  } else {
    return json(v);
  }
}

template <typename T>
void read(const json& j, T& v, const std::string& path) {
  if constexpr (Block<T>) {
    if (!j.is_object()) throw ValidationError("config: '" + path + "' must be an object");
    std::size_t known = 0;
    fields(v, [&](const char* k, auto& x) {
      const auto it = j.find(k);
      if (it == j.end()) return;
      ++known;
      read(*it, x, path.empty() ? k : path + "." + k);
    });
    if (known != j.size())
      for (const auto& [k, _] : j.items()) {
        bool found = false;
        fields(v, [&](const char* name, auto&) { found = found || k == name; });
        if (!found) throw ValidationError("config: unknown key '" + (path.empty() ? k : path + "." + k) + "'");
      }
  } else {
    const json def = json(v);
    const bool ok = (def.is_number() && j.is_number()) || def.type() == j.type();
    if (!ok) throw ValidationError("config: '" + path + "' expects " + std::string(def.type_name()));
    if (def.is_number_integer() && !j.is_number_integer())
      throw ValidationError("config: '" + path + "' expects an integer");
    if constexpr (std::is_unsigned_v<T>)
      if (j.is_number_integer() && j.get<long long>() < 0 && !j.is_number_unsigned())
        throw ValidationError("config: '" + path + "' must be non-negative");
    try {
      v = j.get<T>();
    } catch (const json::exception& e) {
      throw ValidationError("config: '" + path + "': " + e.what());
    }
  }
}

}  // namespace

void RunConfig::validate() const {
  workspace.validate();
  if (catalog.n_train < 0 || catalog.n_test < 0) throw ValidationError("config: catalog sizes must be non-negative");
  if (!(haptics.rate_hz > 0.0)) throw ValidationError("config: haptics.rate_hz must be positive");
  if (!(haptics.duration_max_s >= haptics.duration_min_s) || !(haptics.duration_min_s > 0.0))
    throw ValidationError("config: haptics durations must satisfy 0 < min <= max");
  localize.measurement.validate();
  if (localize.n_particles < 1 || localize.n_scans < 0)
    throw ValidationError("config: localize.n_particles >= 1 and n_scans >= 0 required");
  encoder.validate();
  stability.validate();
  material.validate();
  policy.validate();
  bins.validate();
  gwos.validate();
  collection.validate();
  if (evaluation.orientations < 1 || evaluation.repeats < 1 || evaluation.max_objects < -1)
    throw ValidationError("config: evaluation counts out of range");
  if (!(evaluation.material_train_fraction > 0.0 && evaluation.material_train_fraction < 1.0))
    throw ValidationError("config: evaluation.material_train_fraction must lie in (0, 1)");
}

CollectionParams RunConfig::collection_params() const {
  return {collection, gwos.init, bins, context(), workspace};
}

GraspingProtocol RunConfig::grasping_protocol() const {
  GraspingProtocol p;
  p.orientations = evaluation.orientations;
  p.repeats = evaluation.repeats;
  p.max_objects = evaluation.max_objects;
  p.seed = derive_seed(seed, 0xE7A1);
  p.gwos = gwos;
  p.gwos.localize = localize;
  return p;
}

PerceptionProtocol RunConfig::perception_protocol() const {
  return {evaluation.material_train_fraction, material, derive_seed(seed, 0x9E2C)};
}

std::string config_to_json(const RunConfig& config) {
  RunConfig c = config;
  return write(c).dump(2);
}

RunConfig config_from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ValidationError(std::string("config: malformed JSON: ") + e.what());
  }
  RunConfig c;
  read(j, c, "");
  c.validate();
  return c;
}

RunConfig load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path);
  return config_from_json({std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()});
}

RunConfig apply_overrides(const RunConfig& config, const std::vector<std::string>& overrides) {
  RunConfig c = config;
  json doc = write(c);
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) throw ValidationError("override '" + o + "' is not key=value");
    const std::string key = o.substr(0, eq);
    const std::string raw = o.substr(eq + 1);
    json value;
    try {
      value = json::parse(raw);
    } catch (const json::exception&) {
      value = raw;
    }
    json* node = &doc;
    std::size_t start = 0;
    while (true) {
      const auto dot = key.find('.', start);
      const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
      if (!node->is_object() || !node->contains(part)) throw ValidationError("config: unknown key '" + key + "'");
      node = &(*node)[part];
      if (dot == std::string::npos) break;
      start = dot + 1;
    }
    *node = value;
  }
  RunConfig out;
  read(doc, out, "");
  out.validate();
  return out;
}

std::string config_digest(const RunConfig& config) {
  RunConfig c = config;
  json j = write(c);
  j.erase("paths");
  return digest_hex(j.dump());
}

}  // namespace hg
