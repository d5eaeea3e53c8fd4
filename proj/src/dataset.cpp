#include "haptigrasp/dataset.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <map>
#include <set>
#include <sstream>

#include <json.hpp>

#include "haptigrasp/digest.hpp"
#include "haptigrasp/error.hpp"

namespace hg {

using nlohmann::json;

namespace {

constexpr char kSidecarMagic[4] = {'H', 'G', 'H', '1'};
constexpr std::uint64_t kCountStream = 0;
constexpr std::uint64_t kChainStreamBase = 1000;

void check_range(int lo, int hi, int floor, const char* what) {
  if (lo < floor || hi < lo) throw ValidationError(std::string("collection counts: bad range for ") + what);
}

std::string record_id(int set, long long index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "s%d-%06lld", set, index);
  return buf;
}

json pose_json(const GraspPose& g) {
  return {{"x", g.x}, {"y", g.y}, {"z", g.z}, {"theta", g.theta}, {"mode", to_string(g.mode)}};
}

GraspPose pose_from(const json& j) {
  return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("z").get<double>(), j.at("theta").get<double>(),
          mode_from_string(j.at("mode").get<std::string>())};
}

json pose2_json(const Pose2& p) { return {{"x", p.x}, {"y", p.y}, {"theta", p.theta}}; }
Pose2 pose2_from(const json& j) { return {j.at("x").get<double>(), j.at("y").get<double>(), j.at("theta").get<double>()}; }

json outcome_json(const GraspOutcome& o) {
  return {{"success", o.success},
          {"enclosure_dof", o.enclosure_dof},
          {"displacement", {o.object_displacement.dx, o.object_displacement.dy, o.object_displacement.dtheta}},
          {"slip", o.slip_occurred}};
}

GraspOutcome outcome_from(const json& j) {
  GraspOutcome o;
  o.success = j.at("success").get<bool>();
  o.enclosure_dof = j.at("enclosure_dof").get<double>();
  const auto& d = j.at("displacement");
  o.object_displacement = {d.at(0).get<double>(), d.at(1).get<double>(), d.at(2).get<double>()};
  o.slip_occurred = j.at("slip").get<bool>();
  return o;
}

template <typename T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

void put_string(std::string& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out += s;
}

class Reader {
 public:
  Reader(const std::string& bytes, std::size_t end, std::size_t pos) : bytes_(bytes), end_(end), pos_(pos) {}
  template <typename T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }
  std::string get_string() {
    const auto n = get<std::uint64_t>();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void get_raw(void* dst, std::size_t n) {
    need(n);
    std::memcpy(dst, bytes_.data() + pos_, n);
    pos_ += n;
  }
  bool done() const { return pos_ == end_; }

 private:
  void need(std::uint64_t n) const {
    if (n > end_ - pos_) throw CorruptionError("haptics sidecar truncated");
  }
  const std::string& bytes_;
  std::size_t end_;
  std::size_t pos_;
};

void write_atomic(const std::string& path, const std::string& bytes) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write " + path);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("short write to " + path);
  }
  std::filesystem::rename(tmp, path);
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string haptic_id(const EpisodeRecord& r, std::size_t g) { return r.episode_id + "/" + std::to_string(g); }

}  // namespace

void CollectionCounts::validate() const {
  if (set1_objects < -1) throw ValidationError("collection counts: set1_objects must be -1 or non-negative");
  check_range(set1_grasps_min, set1_grasps_max, 0, "set1 grasps");
  check_range(set1_regrasps_min, set1_regrasps_max, 0, "set1 re-grasps");
  if (set2_objects < 0) throw ValidationError("collection counts: set2_objects must be non-negative");
  check_range(set2_grasps_min, set2_grasps_max, 0, "set2 grasps");
  check_range(set2_regrasps_min, set2_regrasps_max, 0, "set2 re-grasps");
  if (test_grasps_per_object < 0 || test_regrasps < 0) throw ValidationError("collection counts: negative test counts");
}

CollectionTally CollectionPlan::tally() const {
  CollectionTally t;
  std::set<std::string> objects;
  for (const auto& e : entries) {
    objects.insert(e.object_id);
    t.records += e.initial_grasps;
    t.initial_grasps += e.initial_grasps;
    for (int r : e.regrasps) {
      t.regrasp_interactions += r;
      t.executed_grasps += 1 + r;
    }
  }
  t.objects = static_cast<int>(objects.size());
  return t;
}

CollectionTally CollectionPlan::tally(Split split, const Catalog& catalog) const {
  CollectionPlan sub;
  for (const auto& e : entries)
    if (catalog.find(e.object_id).split == split) sub.entries.push_back(e);
  return sub.tally();
}

CollectionPlan plan_collection(const Catalog& catalog, const CollectionCounts& counts, std::uint64_t seed) {
  counts.validate();
  Rng rng(derive_seed(seed, kCountStream));
  std::vector<CatalogEntry> train = catalog.split(Split::train);
  CollectionPlan plan;
  const auto add = [&](int set, const std::string& id, int gmin, int gmax, int rmin, int rmax) {
    CollectionPlanEntry e;
    e.set = set;
    e.object_id = id;
    e.initial_grasps = uniform_int(rng, gmin, gmax);
    for (int i = 0; i < e.initial_grasps; ++i) e.regrasps.push_back(uniform_int(rng, rmin, rmax));
    plan.entries.push_back(std::move(e));
  };

  const int n1 = counts.set1_objects < 0 ? static_cast<int>(train.size()) : counts.set1_objects;
  if (n1 > static_cast<int>(train.size())) throw ValidationError("collection counts: set1_objects exceeds train objects");
  for (int i = 0; i < n1; ++i)
    add(1, train[i].id, counts.set1_grasps_min, counts.set1_grasps_max, counts.set1_regrasps_min,
        counts.set1_regrasps_max);

  if (counts.set2_objects > 0) {
    // One object per material first, in material order, then the rest.
    std::vector<CatalogEntry> pool = train;
    std::shuffle(pool.begin(), pool.end(), rng);
    std::vector<std::string> chosen;
    for (Material m : kAllMaterials) {
      const auto it = std::find_if(pool.begin(), pool.end(), [&](const auto& e) { return e.material == m; });
      if (it == pool.end())
        throw ValidationError("catalog has no train object of material '" + std::string(to_string(m)) + "'");
      chosen.push_back(it->id);
    }
    for (const auto& e : pool)
      if (std::find(chosen.begin(), chosen.end(), e.id) == chosen.end()) chosen.push_back(e.id);
    if (counts.set2_objects > static_cast<int>(chosen.size()))
      throw ValidationError("collection counts: set2_objects exceeds train objects");
    for (int i = 0; i < counts.set2_objects; ++i)
      add(2, chosen[i], counts.set2_grasps_min, counts.set2_grasps_max, counts.set2_regrasps_min,
          counts.set2_regrasps_max);
  }

  if (counts.test_grasps_per_object > 0)
    for (const auto& e : catalog.split(Split::test))
      add(3, e.id, counts.test_grasps_per_object, counts.test_grasps_per_object, counts.test_regrasps,
          counts.test_regrasps);
  return plan;
}

double expected_executed_grasps(const CollectionCounts& c, int train_objects) {
  const double n1 = c.set1_objects < 0 ? train_objects : c.set1_objects;
  const double g1 = 0.5 * (c.set1_grasps_min + c.set1_grasps_max);
  const double r1 = 0.5 * (c.set1_regrasps_min + c.set1_regrasps_max);
  const double g2 = 0.5 * (c.set2_grasps_min + c.set2_grasps_max);
  const double r2 = 0.5 * (c.set2_regrasps_min + c.set2_regrasps_max);
  return n1 * g1 * (1.0 + r1) + c.set2_objects * g2 * (1.0 + r2);
}

double expected_regrasp_interactions(const CollectionCounts& c, int train_objects) {
  const double n1 = c.set1_objects < 0 ? train_objects : c.set1_objects;
  return n1 * 0.5 * (c.set1_grasps_min + c.set1_grasps_max) * 0.5 * (c.set1_regrasps_min + c.set1_regrasps_max) +
         c.set2_objects * 0.5 * (c.set2_grasps_min + c.set2_grasps_max) * 0.5 *
             (c.set2_regrasps_min + c.set2_regrasps_max);
}

std::vector<int> EpisodeRecord::labels() const {
  std::vector<int> out;
  for (const auto& g : grasps) out.push_back(g.outcome.success ? 1 : 0);
  return out;
}

CollectionTally Dataset::tally() const {
  CollectionTally t;
  std::set<std::string> objects;
  for (const auto& r : records) {
    objects.insert(r.object_id);
    ++t.records;
    ++t.initial_grasps;
    t.executed_grasps += static_cast<long long>(r.grasps.size());
    t.regrasp_interactions += static_cast<long long>(r.grasps.size()) - 1;
  }
  t.objects = static_cast<int>(objects.size());
  return t;
}

Dataset collect_dataset(const Catalog& catalog, const CollectionParams& p, std::uint64_t seed) {
  p.init.validate();
  p.bins.validate();
  const CollectionPlan plan = plan_collection(catalog, p.counts, seed);
  Dataset ds;
  long long chain = 0;
  std::map<int, long long> per_set;
  for (const auto& entry : plan.entries) {
    const CatalogEntry& obj = catalog.find(entry.object_id);
    for (int i = 0; i < entry.initial_grasps; ++i, ++chain) {
      Rng rng(derive_seed(seed, kChainStreamBase + static_cast<std::uint64_t>(chain)));
      Scene scene = create_scene(rng(), obj, p.workspace, p.ctx.sim);
      EpisodeRecord rec;
      rec.episode_id = record_id(entry.set, per_set[entry.set]++);
      rec.split = obj.split;
      rec.set = entry.set;
      rec.object_id = obj.id;
      rec.material = obj.material;
      GraspPose g = initial_grasp(InitializerKind::noisy_oracle, scene, scene.object.centroid(), p.init, rng);
      double clock = 0.0;
      const int n_regrasps = entry.regrasps[i];
      for (int k = 0; k <= n_regrasps; ++k) {
        GraspRecord gr;
        gr.pose = g;
        gr.object_pose = scene.object.pose;
        gr.t_start_s = clock;
        gr.outcome = execute_grasp(scene.workspace, scene.object, g, p.ctx.sim, rng);
        gr.haptics = generate_episode(scene.object, g, gr.outcome, scene.workspace, p.ctx.sim, p.ctx.haptics, rng);
        clock += gr.haptics.duration_s;
        scene.object = displace_object(scene.workspace, scene.object, gr.outcome.object_displacement);
        if (k < n_regrasps) {
          gr.delta_after = p.bins.sample_uniform(rng);
          g = apply_regrasp(g, *gr.delta_after, scene.workspace);
        }
        rec.grasps.push_back(std::move(gr));
      }
      ds.records.push_back(std::move(rec));
    }
  }
  verify_disjoint(ds, catalog);
  return ds;
}

void verify_disjoint(const Dataset& ds, const Catalog& catalog) {
  std::map<std::string, Split> seen;
  for (const auto& r : ds.records) {
    const CatalogEntry& e = catalog.find(r.object_id);
    if (e.split != r.split)
      throw ValidationError("record " + r.episode_id + " is tagged " + std::string(to_string(r.split)) +
                            " but object '" + r.object_id + "' is " + std::string(to_string(e.split)));
    const auto [it, inserted] = seen.emplace(r.object_id, r.split);
    if (!inserted && it->second != r.split)
      throw ValidationError("object '" + r.object_id + "' appears in both train and test records");
  }
}

void write_dataset(const DatasetFiles& files, const Dataset& ds, const std::string& provenance_json) {
  std::string side(kSidecarMagic, 4);
  put<std::uint32_t>(side, kDatasetFormatVersion);
  put_string(side, provenance_json);
  std::uint64_t n_haptics = 0;
  for (const auto& r : ds.records) n_haptics += r.grasps.size();
  put<std::uint64_t>(side, n_haptics);

  std::ostringstream log;
  log << json{{"format_version", kDatasetFormatVersion},
              {"kind", "header"},
              {"records", ds.records.size()},
              {"haptic_episodes", n_haptics},
              {"provenance", json::parse(provenance_json)}}
             .dump()
      << "\n";
  std::uint64_t index = 0;
  for (const auto& r : ds.records) {
    json grasps = json::array();
    for (std::size_t g = 0; g < r.grasps.size(); ++g) {
      const GraspRecord& gr = r.grasps[g];
      const HapticEpisode& h = gr.haptics;
      put_string(side, haptic_id(r, g));
      put<double>(side, h.rate_hz);
      put<double>(side, h.duration_s);
      put<std::int32_t>(side, static_cast<std::int32_t>(h.mode));
      put<std::int32_t>(side, h.close_event_index);
      put<std::int64_t>(side, h.length());
      // Frames are generated in single precision, so float storage is exact.
      for (int t = 0; t < h.length(); ++t)
        for (int c = 0; c < kForceChannels; ++c) put<float>(side, static_cast<float>(h.frames(t, c)));
      side.append(reinterpret_cast<const char*>(h.f_trace.data()), sizeof(double) * h.f_trace.size());

      json jg{{"pose", pose_json(gr.pose)},
              {"outcome", outcome_json(gr.outcome)},
              {"object_pose", pose2_json(gr.object_pose)},
              {"t_start_s", gr.t_start_s},
              {"haptics", {{"index", index++}, {"id", haptic_id(r, g)}, {"frames", h.length()}}}};
      jg["delta_after"] = gr.delta_after ? json{gr.delta_after->dx, gr.delta_after->dy, gr.delta_after->dz,
                                                gr.delta_after->dtheta}
                                         : json(nullptr);
      grasps.push_back(std::move(jg));
    }
    log << json{{"format_version", kDatasetFormatVersion},
                {"episode_id", r.episode_id},
                {"split", to_string(r.split)},
                {"set", r.set},
                {"object_id", r.object_id},
                {"material", to_string(r.material)},
                {"labels", r.labels()},
                {"localization", nullptr},
                {"grasps", std::move(grasps)}}
               .dump()
        << "\n";
  }
  Digest d;
  d.update(side);
  put<std::uint64_t>(side, d.value());
  write_atomic(files.haptics_path, side);
  write_atomic(files.records_path, log.str());
}

LoadedDataset read_dataset(const DatasetFiles& files) {
  const std::string side = slurp(files.haptics_path);
  if (side.size() < 8 || std::memcmp(side.data(), kSidecarMagic, 4) != 0)
    throw CorruptionError("not a haptics sidecar: " + files.haptics_path);
  std::uint32_t version;
  std::memcpy(&version, side.data() + 4, sizeof version);
  if (version != kDatasetFormatVersion)
    throw VersionError("haptics sidecar version " + std::to_string(version));
  if (side.size() < 16) throw CorruptionError("haptics sidecar truncated");
  const std::size_t body = side.size() - sizeof(std::uint64_t);
  std::uint64_t stored;
  std::memcpy(&stored, side.data() + body, sizeof stored);
  Digest d;
  d.update(side.data(), body);
  if (d.value() != stored) throw CorruptionError("haptics sidecar checksum mismatch");

  Reader rd(side, body, 8);
  LoadedDataset out;
  const std::string side_prov = rd.get_string();
  const auto n_haptics = rd.get<std::uint64_t>();
  std::vector<std::pair<std::string, HapticEpisode>> haptics;
  haptics.reserve(n_haptics);
  for (std::uint64_t k = 0; k < n_haptics; ++k) {
    std::string id = rd.get_string();
    HapticEpisode h;
    h.rate_hz = rd.get<double>();
    h.duration_s = rd.get<double>();
    const auto mode = rd.get<std::int32_t>();
    if (mode < 0 || mode >= kNumModes) throw CorruptionError("bad gripper mode in sidecar");
    h.mode = static_cast<GripperMode>(mode);
    h.close_event_index = rd.get<std::int32_t>();
    const auto n = rd.get<std::int64_t>();
    if (n < 0) throw CorruptionError("negative frame count in sidecar");
    std::vector<float> buf(static_cast<std::size_t>(n) * kForceChannels);
    rd.get_raw(buf.data(), sizeof(float) * buf.size());
    h.frames.resize(n, kForceChannels);
    for (std::int64_t t = 0; t < n; ++t)
      for (int c = 0; c < kForceChannels; ++c) h.frames(t, c) = buf[t * kForceChannels + c];
    h.f_trace.resize(n);
    rd.get_raw(h.f_trace.data(), sizeof(double) * n);
    haptics.emplace_back(std::move(id), std::move(h));
  }
  if (!rd.done()) throw CorruptionError("trailing bytes in haptics sidecar");

  std::istringstream log(slurp(files.records_path));
  std::string line;
  if (!std::getline(log, line)) throw CorruptionError("empty record log");
  try {
    const json header = json::parse(line);
    if (header.at("format_version").get<int>() != kDatasetFormatVersion)
      throw VersionError("record log version " + header.at("format_version").dump());
    out.provenance_json = header.at("provenance").dump();
    if (out.provenance_json != json::parse(side_prov).dump())
      throw ProvenanceError("record log and haptics sidecar come from different runs");
    while (std::getline(log, line)) {
      if (line.empty()) continue;
      const json j = json::parse(line);
      if (j.at("format_version").get<int>() != kDatasetFormatVersion) throw VersionError("record version mismatch");
      EpisodeRecord r;
      r.episode_id = j.at("episode_id").get<std::string>();
      r.split = split_from_string(j.at("split").get<std::string>());
      r.set = j.at("set").get<int>();
      r.object_id = j.at("object_id").get<std::string>();
      r.material = material_from_string(j.at("material").get<std::string>());
      for (const auto& jg : j.at("grasps")) {
        GraspRecord g;
        g.pose = pose_from(jg.at("pose"));
        g.outcome = outcome_from(jg.at("outcome"));
        g.object_pose = pose2_from(jg.at("object_pose"));
        g.t_start_s = jg.at("t_start_s").get<double>();
        const auto& jd = jg.at("delta_after");
        if (!jd.is_null())
          g.delta_after = RegraspDelta{jd.at(0).get<double>(), jd.at(1).get<double>(), jd.at(2).get<double>(),
                                       jd.at(3).get<double>()};
        const auto idx = jg.at("haptics").at("index").get<std::uint64_t>();
        if (idx >= haptics.size() || haptics[idx].first != jg.at("haptics").at("id").get<std::string>())
          throw CorruptionError("record " + r.episode_id + " references a missing haptic episode");
        g.haptics = haptics[idx].second;
        r.grasps.push_back(std::move(g));
      }
      if (r.labels() != j.at("labels").get<std::vector<int>>())
        throw ValidationError("record " + r.episode_id + " labels disagree with outcomes");
      out.dataset.records.push_back(std::move(r));
    }
    if (header.at("records").get<std::size_t>() != out.dataset.records.size())
      throw CorruptionError("record log truncated");
  } catch (const json::exception& e) {
    throw CorruptionError(std::string("malformed record log: ") + e.what());
  }
  return out;
}

std::vector<GraspRef> all_grasps(const Dataset& ds, std::optional<Split> split) {
  std::vector<GraspRef> out;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    if (split && ds.records[r].split != *split) continue;
    for (std::size_t g = 0; g < ds.records[r].grasps.size(); ++g)
      out.push_back({static_cast<int>(r), static_cast<int>(g)});
  }
  return out;
}

std::vector<GraspRef> regrasp_pairs(const Dataset& ds, std::optional<Split> split) {
  std::vector<GraspRef> out;
  for (std::size_t r = 0; r < ds.records.size(); ++r) {
    if (split && ds.records[r].split != *split) continue;
    for (std::size_t g = 0; g + 1 < ds.records[r].grasps.size(); ++g)
      out.push_back({static_cast<int>(r), static_cast<int>(g)});
  }
  return out;
}

const GraspRecord& at(const Dataset& ds, const GraspRef& ref) { return ds.records.at(ref.record).grasps.at(ref.grasp); }

}  // namespace hg
