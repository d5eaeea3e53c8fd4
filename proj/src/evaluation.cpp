#include "haptigrasp/evaluation.hpp"

#include <array>
#include <cmath>

#include "haptigrasp/error.hpp"

namespace hg {

void GraspingProtocol::validate() const {
  if (orientations < 1 || repeats < 1) throw ValidationError("grasping protocol needs orientations and repeats >= 1");
  if (max_objects < -1) throw ValidationError("max_objects must be -1 or non-negative");
  gwos.validate();
}

const ArmResult& GraspingTable::arm(const std::string& name) const {
  for (const auto& a : arms)
    if (a.name == name) return a;
  throw ArgumentError("no arm named '" + name + "'");
}

std::vector<Arm> regrasping_arms(int t_max) {
  return {{"oracle+none", InitializerKind::oracle, RegraspMode::none, 1, true},
          {"oracle+random1", InitializerKind::oracle, RegraspMode::random, 2, true},
          {"oracle+random", InitializerKind::oracle, RegraspMode::random, t_max, true},
          {"oracle+learned", InitializerKind::oracle, RegraspMode::learned, t_max, true}};
}

std::vector<Arm> gwos_arms(int t_max) {
  return {{"touch+none", InitializerKind::touch, RegraspMode::none, 1, true},
          {"touch+learned", InitializerKind::touch, RegraspMode::learned, t_max, true},
          {"noisy_oracle+none", InitializerKind::noisy_oracle, RegraspMode::none, 1, true},
          {"noisy_oracle+learned", InitializerKind::noisy_oracle, RegraspMode::learned, t_max, true},
          {"empty:touch+none", InitializerKind::touch, RegraspMode::none, 1, false},
          {"empty:touch+learned", InitializerKind::touch, RegraspMode::learned, t_max, false}};
}

GraspingTable evaluate_arms(const std::vector<CatalogEntry>& objects, const Models& models, const std::vector<Arm>& arms,
                            const GraspingProtocol& protocol, const SimContext& ctx, const Workspace& workspace) {
  protocol.validate();
  for (const auto& o : objects)
    if (o.split != Split::test)
      throw ValidationError("evaluation object '" + o.id + "' belongs to the train split");
  const int n_objects = protocol.max_objects < 0 ? static_cast<int>(objects.size())
                                                 : std::min<int>(protocol.max_objects, objects.size());
  GraspingTable table;
  for (const auto& arm : arms) {
    ArmResult r;
    r.name = arm.name;
    GwosConfig cfg = protocol.gwos;
    cfg.initializer = arm.initializer;
    cfg.regrasp = arm.regrasp;
    cfg.t_max = arm.t_max;
    std::uint64_t trial = 0;
    for (int o = 0; o < n_objects; ++o) {
      for (int k = 0; k < protocol.orientations; ++k) {
        for (int rep = 0; rep < protocol.repeats; ++rep, ++trial) {
          const std::uint64_t seed = derive_seed(protocol.seed, trial);
          Scene scene = create_scene(derive_seed(seed, 0), objects[o], workspace, ctx.sim);
          scene.object.pose.theta = wrap_angle(2.0 * kPi * k / protocol.orientations);
          const GwosResult g = run_gwos(scene, models, cfg, ctx, seed, arm.object_present);
          r.outcomes.push_back(g.success ? 1 : 0);
          r.successes += g.success ? 1 : 0;
          r.grasps += static_cast<long long>(g.trace.size());
          ++r.trials;
        }
      }
    }
    table.arms.push_back(std::move(r));
  }
  return table;
}

double oracle_initializer_success(const CatalogEntry& object, const Workspace& workspace, const SimParams& sim,
                                  const InitializerParams& init, int theta_steps) {
  init.validate();
  if (theta_steps < 1) throw ArgumentError("theta_steps must be positive");
  const Scene scene = create_scene(0, object, workspace, sim);
  const ObjectInstance& obj = scene.object;
  constexpr int kZSteps = 200;
  double total = 0.0;
  for (int m = 0; m < kNumModes; ++m) {
    for (int i = 0; i < theta_steps; ++i) {
      for (int j = 0; j < kZSteps; ++j) {
        GraspPose g;
        g.x = obj.pose.x;
        g.y = obj.pose.y;
        g.theta = -kPi + 2.0 * kPi * (i + 0.5) / theta_steps;
        g.z = init.z_band.min + init.z_band.width() * (j + 0.5) / kZSteps;
        g.mode = static_cast<GripperMode>(m);
        const GraspGeometry geo = grasp_geometry(obj, clamp_grasp(g, workspace), workspace, sim);
        const bool ok = geo.enclosed && geo.center_distance <= sim.center_tol &&
                        std::abs(geo.axis_error) <= geo.axis_tolerance && geo.z_rel >= sim.z_clearance &&
                        geo.z_rel <= obj.height - sim.z_top_margin;
        if (ok) total += 1.0 - obj.material.slip_proneness * instability_factor(sim, geo.center_distance);
      }
    }
  }
  return total / (static_cast<double>(kNumModes) * theta_steps * kZSteps);
}

std::string_view to_string(FeatureKind k) { return k == FeatureKind::autoencoder ? "autoencoder" : "handcrafted"; }

const PerceptionCell& PerceptionTable::cell(const std::string& task, FeatureKind f, ClassifierKind c) const {
  for (const auto& x : cells)
    if (x.task == task && x.features == f && x.classifier == c) return x;
  throw ArgumentError("no perception cell for task '" + task + "'");
}

Eigen::MatrixXd grasp_features(const Dataset& ds, const std::vector<GraspRef>& refs, FeatureKind kind,
                               const Autoencoder& ae, double f_max) {
  if (kind == FeatureKind::handcrafted) {
    Eigen::MatrixXd out(kHandcraftedDim, refs.size());
    for (std::size_t i = 0; i < refs.size(); ++i) out.col(i) = handcrafted_features(at(ds, refs[i]).haptics);
    return out;
  }
  std::vector<InputSequence> raw;
  raw.reserve(refs.size());
  for (const auto& r : refs) raw.push_back(raw_input(at(ds, r).haptics, ae.config, f_max));
  return encode_batch(ae, raw);
}

PerceptionTable evaluate_perception(const Dataset& ds, const Autoencoder& ae, const PerceptionProtocol& protocol,
                                    double f_max) {
  std::vector<GraspRef> material_refs;
  std::vector<int> material_labels;
  std::array<int, kNumMaterials> index{};
  index.fill(-1);
  for (const auto& ref : all_grasps(ds, Split::train))
    if (at(ds, ref).outcome.enclosure_dof < f_max) {
      material_refs.push_back(ref);
      index[static_cast<int>(ds.records[ref.record].material)] = 0;
    }
  std::vector<std::string> material_names;
  for (int m = 0; m < kNumMaterials; ++m)
    if (index[m] == 0) {
      index[m] = static_cast<int>(material_names.size());
      material_names.emplace_back(to_string(kAllMaterials[m]));
    }
  if (material_names.size() < 2) throw ValidationError("material evaluation needs at least two materials");
  for (const auto& ref : material_refs)
    material_labels.push_back(index[static_cast<int>(ds.records[ref.record].material)]);
  const std::vector<GraspRef> stab_train = all_grasps(ds, Split::train);
  const std::vector<GraspRef> stab_test = all_grasps(ds, Split::test);
  if (stab_test.empty()) throw ValidationError("stability evaluation needs test-split records");
  const auto labels_of = [&](const std::vector<GraspRef>& refs) {
    std::vector<int> y;
    for (const auto& r : refs) y.push_back(at(ds, r).outcome.success ? 1 : 0);
    return y;
  };
  const std::vector<int> ytr = labels_of(stab_train);
  const std::vector<int> yte = labels_of(stab_test);

  PerceptionTable table;
  std::uint64_t stream = 0;
  for (FeatureKind f : {FeatureKind::autoencoder, FeatureKind::handcrafted}) {
    const Eigen::MatrixXd xm = grasp_features(ds, material_refs, f, ae, f_max);
    const Eigen::MatrixXd xtr = grasp_features(ds, stab_train, f, ae, f_max);
    const Eigen::MatrixXd xte = grasp_features(ds, stab_test, f, ae, f_max);
    for (ClassifierKind c : {ClassifierKind::deep, ClassifierKind::linear_hinge}) {
      Rng rng(derive_seed(protocol.seed, stream++));
      PerceptionCell m{"material", f, c, material_names, {}, 0.0};
      m.metrics = train_material(xm, material_labels, static_cast<int>(material_names.size()), c, protocol.classifier,
                                 rng, protocol.material_train_fraction)
                      .metrics;
      m.score = m.metrics.average_class_accuracy;
      table.cells.push_back(std::move(m));

      Rng srng(derive_seed(protocol.seed, stream++));
      const Classifier clf = train_classifier(xtr, ytr, 2, c, protocol.classifier, srng);
      PerceptionCell s{"stability", f, c, {"failure", "success"}, classification_metrics(yte, clf.predict(xte), 2),
                       0.0};
      s.score = s.metrics.accuracy;
      table.cells.push_back(std::move(s));
    }
  }
  return table;
}

}  // namespace hg
