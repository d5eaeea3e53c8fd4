#include "haptigrasp/pipeline.hpp"

#include <cmath>

#include "haptigrasp/error.hpp"

namespace hg {

std::string_view to_string(InitializerKind k) {
  switch (k) {
    case InitializerKind::touch: return "touch";
    case InitializerKind::oracle: return "oracle";
    case InitializerKind::noisy_oracle: return "noisy_oracle";
    case InitializerKind::perfect: return "perfect";
  }
  return "?";
}

InitializerKind initializer_from_string(std::string_view s) {
  for (auto k : {InitializerKind::touch, InitializerKind::oracle, InitializerKind::noisy_oracle, InitializerKind::perfect})
    if (s == to_string(k)) return k;
  throw ValidationError("unknown initializer '" + std::string(s) + "'");
}

std::string_view to_string(RegraspMode m) {
  switch (m) {
    case RegraspMode::learned: return "learned";
    case RegraspMode::random: return "random";
    case RegraspMode::none: return "none";
  }
  return "?";
}

void InitializerParams::validate() const {
  if (sigma_loc < 0.0 || sigma_theta < 0.0) throw ValidationError("initializer noise must be non-negative");
  if (!(z_band.max >= z_band.min)) throw ValidationError("initializer z_band must have max >= min");
}

void GwosConfig::validate() const {
  if (t_max < 1) throw ValidationError("t_max must be at least 1");
  if (!(p_threshold >= 0.0 && p_threshold < 1.0)) throw ValidationError("p_threshold must lie in [0, 1)");
  init.validate();
  localize.measurement.validate();
}

GraspPose initial_grasp(InitializerKind kind, const Scene& scene, const Vec2& location, const InitializerParams& p,
                        Rng& rng) {
  const ObjectInstance& o = scene.object;
  const double nx = gaussian(rng, 0.0, p.sigma_loc);
  const double ny = gaussian(rng, 0.0, p.sigma_loc);
  const double theta_uniform = uniform(rng, -kPi, kPi);
  const double theta_noise = gaussian(rng, 0.0, p.sigma_theta);
  const int axis_pick = uniform_int(rng, 0, std::max<int>(0, static_cast<int>(o.graspable_axes.size()) - 1));
  const double z = uniform(rng, p.z_band.min, p.z_band.max);
  const auto mode = static_cast<GripperMode>(uniform_int(rng, 0, kNumModes - 1));
  const double axis = o.graspable_axes.empty() ? 0.0 : o.pose.theta + o.graspable_axes[axis_pick].angle;

  GraspPose g;
  g.z = z;
  g.mode = mode;
  switch (kind) {
    case InitializerKind::touch:
      g.x = location.x();
      g.y = location.y();
      g.theta = theta_uniform;
      break;
    case InitializerKind::oracle:
      g.x = o.pose.x;
      g.y = o.pose.y;
      g.theta = theta_uniform;
      break;
    case InitializerKind::noisy_oracle:
      g.x = o.pose.x + nx;
      g.y = o.pose.y + ny;
      g.theta = axis + theta_noise;
      break;
    case InitializerKind::perfect:
      g.x = o.pose.x;
      g.y = o.pose.y;
      g.theta = axis;
      g.z = 0.5 * o.height;
      g.mode = GripperMode::normal;
      break;
  }
  return clamp_grasp(g, scene.workspace);
}

GraspPose apply_regrasp(const GraspPose& grasp, const RegraspDelta& d, const Workspace& workspace) {
  GraspPose g = grasp;
  const double c = std::cos(grasp.theta), s = std::sin(grasp.theta);
  g.x += c * d.dx - s * d.dy;
  g.y += s * d.dx + c * d.dy;
  g.z += d.dz;
  g.theta += d.dtheta;
  return clamp_grasp(g, workspace);
}

HapticEpisode sense_grasp(const Scene& scene, const GraspPose& grasp, const GraspOutcome& outcome,
                          const SimContext& ctx, Rng& rng, bool object_present) {
  if (object_present) return generate_episode(scene.object, grasp, outcome, scene.workspace, ctx.sim, ctx.haptics, rng);
  const double duration = uniform(rng, ctx.haptics.duration_min_s, ctx.haptics.duration_max_s);
  HapticEpisode ep = noise_floor(ctx.haptics.rate_hz, duration, ctx.haptics, ctx.sim, rng);
  ep.mode = grasp.mode;
  return ep;
}

namespace {

enum Stream : std::uint64_t { kLocalize = 1, kInit = 2, kExecute = 3, kRandomRegrasp = 4 };

double stability_of(const Models& m, const Eigen::VectorXd& latent) { return m.stability.probability(latent)(0); }

}  // namespace

GwosResult run_gwos(const Scene& scene, const Models& models, const GwosConfig& config, const SimContext& ctx,
                    std::uint64_t seed, bool object_present) {
  config.validate();
  Rng loc_rng(derive_seed(seed, kLocalize));
  Rng init_rng(derive_seed(seed, kInit));
  Rng exec_rng(derive_seed(seed, kExecute));
  Rng random_rng(derive_seed(seed, kRandomRegrasp));

  GwosResult r;
  r.final_scene = scene;
  if (config.initializer == InitializerKind::touch) {
    const ScanPlan plan = ScanPlan::raster(scene.workspace, config.localize.n_scans, config.localize.scan_spacing);
    const LocalizationResult loc = localize(scene, plan, config.localize, loc_rng, object_present);
    r.location_estimate = loc.estimate;
    r.final_scene = loc.final_scene;
  } else {
    r.location_estimate = r.final_scene.object.centroid();
  }
  GraspPose g = initial_grasp(config.initializer, r.final_scene, r.location_estimate, config.init, init_rng);
  for (int t = 0; t < config.t_max; ++t) {
    GwosStep step;
    step.pose = g;
    step.object_pose = r.final_scene.object.pose;
    step.outcome = object_present ? execute_grasp(r.final_scene.workspace, r.final_scene.object, g, ctx.sim, exec_rng)
                                  : empty_grasp_outcome(ctx.sim);
    step.haptics = sense_grasp(r.final_scene, g, step.outcome, ctx, exec_rng, object_present);
    if (object_present)
      r.final_scene.object = displace_object(r.final_scene.workspace, r.final_scene.object, step.outcome.object_displacement);
    r.success = step.outcome.success;
    step.latent = encode(models.autoencoder, step.haptics, models.autoencoder.config, ctx.sim.f_max);
    step.p_stable = stability_of(models, step.latent);
    step.stopped = step.p_stable > config.p_threshold;
    const bool last = t + 1 == config.t_max || config.regrasp == RegraspMode::none;
    if (!step.stopped && !last) {
      step.delta = config.regrasp == RegraspMode::learned
                       ? select_regrasp(models.policy, step.latent)
                       : models.policy.bins.decode(
                             {uniform_int(random_rng, 0, kBinsPerDim - 1), uniform_int(random_rng, 0, kBinsPerDim - 1),
                              uniform_int(random_rng, 0, kBinsPerDim - 1), uniform_int(random_rng, 0, kBinsPerDim - 1)});
      g = apply_regrasp(g, *step.delta, r.final_scene.workspace);
    }
    const bool stop = step.stopped || last;
    r.trace.push_back(std::move(step));
    if (stop) break;
  }
  return r;
}

bool replay_matches(const GwosResult& result, const Models& models, const GwosConfig& config, const SimContext& ctx) {
  for (std::size_t t = 0; t < result.trace.size(); ++t) {
    const GwosStep& s = result.trace[t];
    const Eigen::VectorXd latent = encode(models.autoencoder, s.haptics, models.autoencoder.config, ctx.sim.f_max);
    if (latent.size() != s.latent.size() || latent != s.latent) return false;
    const double p = stability_of(models, latent);
    if (p != s.p_stable || (p > config.p_threshold) != s.stopped) return false;
    if (config.regrasp == RegraspMode::learned && s.delta && !(select_regrasp(models.policy, latent) == *s.delta))
      return false;
    if (t + 1 < result.trace.size()) {
      if (!s.delta) return false;
      const GraspPose next = apply_regrasp(s.pose, *s.delta, result.final_scene.workspace);
      const GraspPose& rec = result.trace[t + 1].pose;
      if (next.x != rec.x || next.y != rec.y || next.z != rec.z || next.theta != rec.theta) return false;
    }
  }
  return true;
}

}  // namespace hg
