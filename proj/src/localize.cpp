#include "haptigrasp/localize.hpp"

#include <algorithm>
#include <cmath>

#include "haptigrasp/error.hpp"
#include "json.hpp"

namespace hg {

void MeasurementModelParams::validate() const {
  if (!(w_occupied > 1.0 && 1.0 > w_free && w_free > 0.0))
    throw ValidationError("measurement model requires w_occupied > 1 > w_free > 0");
  if (!(vicinity_radius > 0.0)) throw ValidationError("vicinity_radius must be positive");
  if (!(contact_offset >= 0.0 && contact_offset <= vicinity_radius))
    throw ValidationError("contact_offset must lie in [0, vicinity_radius]");
}

ScanPlan ScanPlan::raster(const Workspace& ws, int n_scans, double spacing) {
  if (n_scans < 0) throw ArgumentError("n_scans must be non-negative");
  ScanPlan plan;
  const double cy = ws.y_extent.mid();
  for (int i = 0; i < n_scans; ++i) {
    const double y = std::clamp(cy + (i - 0.5 * (n_scans - 1)) * spacing, ws.y_extent.min, ws.y_extent.max);
    LineScanCommand c;
    if (i % 2 == 0) {
      c.start = {ws.x_extent.min, y};
      c.direction = Vec2::UnitX();
    } else {
      c.start = {ws.x_extent.max, y};
      c.direction = -Vec2::UnitX();
    }
    c.max_len = ws.x_extent.width();
    plan.scans.push_back(c);
  }
  return plan;
}

void ScanPlan::validate(const Workspace& ws) const {
  for (const auto& s : scans) {
    if (!ws.contains(s.start)) throw ValidationError("scan starts outside the workspace");
    if (!(s.direction.norm() > 0.0)) throw ValidationError("scan direction has zero length");
  }
}

ParticleSet init_uniform(const Workspace& ws, int n, Rng& rng) {
  if (n < 1) throw ArgumentError("n_particles must be at least 1");
  ParticleSet s;
  s.particles.resize(2, n);
  for (int i = 0; i < n; ++i) {
    s.particles(0, i) = uniform(rng, ws.x_extent.min, ws.x_extent.max);
    s.particles(1, i) = uniform(rng, ws.y_extent.min, ws.y_extent.max);
  }
  s.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  return s;
}

ParticleSet predict(const ParticleSet& set, const MotionModelParams& params, const Workspace& ws, Rng& rng) {
  if (params.sigma < 0.0) throw ArgumentError("motion sigma must be non-negative");
  ParticleSet out = set;
  if (params.sigma == 0.0) return out;
  for (int i = 0; i < out.size(); ++i) {
    const double x = out.particles(0, i) + gaussian(rng, 0.0, params.sigma);
    const double y = out.particles(1, i) + gaussian(rng, 0.0, params.sigma);
    out.particles.col(i) = ws.clamp({x, y});
  }
  return out;
}

UpdateResult update(const ParticleSet& set, const ContactResult& scan, const MeasurementModelParams& params) {
  UpdateResult r{set, false};
  const double radius = params.vicinity_radius;
  Vec2 occupied_center = Vec2::Zero();
  if (scan.contact) {
    const Vec2 along = scan.swept_segment.b - scan.swept_segment.a;
    occupied_center = *scan.contact_point;
    if (along.norm() > 0.0) occupied_center += params.contact_offset * along.normalized();
  }
  for (int i = 0; i < set.size(); ++i) {
    const Vec2 p = set.particles.col(i);
    if (scan.contact && (p - occupied_center).norm() <= radius) {
      r.set.weights[i] *= params.w_occupied;
    } else if (distance_to_segment(p, scan.swept_segment) <= radius) {
      r.set.weights[i] *= params.w_free;
    }
  }
  const double total = r.set.weights.sum();
  if (!(total > 0.0) || !std::isfinite(total) || total < 1e-300) {
    r.set.weights.setConstant(1.0 / set.size());
    r.recovered = true;
  } else {
    r.set.weights /= total;
  }
  return r;
}

ParticleSet resample_with_offset(const ParticleSet& set, double offset) {
  const int n = set.size();
  ParticleSet out;
  out.particles.resize(2, n);
  out.weights = Eigen::VectorXd::Constant(n, 1.0 / n);
  const double total = set.weights.sum();
  // Target i is (offset + i) / n. Forming that quotient rounds an offset
  // just below 1 onto a stratum edge, so compare offset against
  // n * cumulative - i instead, and never step past the last particle that
  // carries weight.
  int last = n - 1;
  while (last > 0 && set.weights[last] <= 0.0) --last;
  double cumulative = set.weights[0] / total;
  int j = 0;
  for (int i = 0; i < n; ++i) {
    while (offset >= n * cumulative - i && j < last) {
      ++j;
      cumulative += set.weights[j] / total;
    }
    out.particles.col(i) = set.particles.col(j);
  }
  return out;
}

ParticleSet resample(const ParticleSet& set, Rng& rng) {
  return resample_with_offset(set, uniform(rng, 0.0, 1.0));
}

Vec2 estimate(const ParticleSet& set) {
  if (set.size() == 0) throw StateError("estimate of an empty particle set");
  return set.particles * set.weights / set.weights.sum();
}

LocalizationResult localize(const Scene& scene, const ScanPlan& plan, const LocalizeParams& params, Rng& rng,
                            bool object_present) {
  plan.validate(scene.workspace);
  params.measurement.validate();
  LocalizationResult result;
  result.final_scene = scene;
  const Workspace& ws = scene.workspace;
  ParticleSet set = init_uniform(ws, params.n_particles, rng);
  for (const LineScanCommand& cmd : plan.scans) {
    LocalizationStep step;
    set = predict(set, params.motion, ws, rng);
    step.scan = object_present ? line_scan(ws, result.final_scene.object, cmd.start, cmd.direction, cmd.max_len)
                               : line_scan_empty(ws, cmd.start, cmd.direction, cmd.max_len);
    UpdateResult upd = update(set, step.scan, params.measurement);
    step.recovered = upd.recovered;
    set = resample(upd.set, rng);
    const double push_draw = uniform(rng, 0.0, 1.0);
    const double push_mag = uniform(rng, 0.0, params.push_cap);
    if (step.scan.contact && push_draw < params.push_probability) {
      const Vec2 d = cmd.direction.normalized() * push_mag;
      result.final_scene.object = displace_object(ws, result.final_scene.object, {d.x(), d.y(), 0.0});
      step.object_pushed = true;
    }
    step.particles = set;
    result.trace.push_back(std::move(step));
  }
  result.estimate = estimate(set);
  return result;
}

std::string trace_to_jsonl(const LocalizationResult& result, int max_particles) {
  const auto point = [](const Vec2& p) { return nlohmann::json::array({p.x(), p.y()}); };
  std::string out;
  for (std::size_t i = 0; i < result.trace.size(); ++i) {
    const LocalizationStep& step = result.trace[i];
    nlohmann::json j;
    j["scan"] = i;
    j["start"] = point(step.scan.swept_segment.a);
    j["end"] = point(step.scan.swept_segment.b);
    j["contact"] = step.scan.contact;
    j["contact_point"] = step.scan.contact ? point(*step.scan.contact_point) : nlohmann::json(nullptr);
    j["recovered"] = step.recovered;
    j["object_pushed"] = step.object_pushed;
    j["estimate"] = point(estimate(step.particles));
    const int n = max_particles < 0 ? step.particles.size() : std::min(max_particles, step.particles.size());
    j["n_particles"] = step.particles.size();
    nlohmann::json ps = nlohmann::json::array();
    for (int k = 0; k < n; ++k) ps.push_back(point(step.particles.particles.col(k)));
    j["particles"] = std::move(ps);
    out += j.dump() + "\n";
  }
  return out;
}

}  // namespace hg
