#include "haptigrasp/haptics.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "haptigrasp/error.hpp"

namespace hg {

namespace {

struct FingerForces {
  Eigen::VectorXd normal;
  Eigen::VectorXd shear;
  Eigen::VectorXd vertical;
};

void add_noise_and_magnitude(HapticEpisode& ep, const std::array<FingerForces, kFingers>& forces, double sigma,
                             Rng& rng) {
  const int n = ep.length();
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < kFingers; ++k) {
      const auto f = static_cast<Finger>(k);
      // Sensor output is single precision.
      const double fx = static_cast<float>(forces[k].normal[t] + gaussian(rng, 0.0, sigma));
      const double fy = static_cast<float>(forces[k].shear[t] + gaussian(rng, 0.0, sigma));
      const double fz = static_cast<float>(forces[k].vertical[t] + gaussian(rng, 0.0, sigma));
      ep.frames(t, channel_index(f, ForceChannel::fx)) = fx;
      ep.frames(t, channel_index(f, ForceChannel::fy)) = fy;
      ep.frames(t, channel_index(f, ForceChannel::fz)) = fz;
      ep.frames(t, channel_index(f, ForceChannel::magnitude)) =
          static_cast<float>(std::sqrt(fx * fx + fy * fy + fz * fz));
    }
  }
}

std::array<FingerForces, kFingers> zero_forces(int n) {
  std::array<FingerForces, kFingers> out;
  for (auto& f : out) {
    f.normal = Eigen::VectorXd::Zero(n);
    f.shear = Eigen::VectorXd::Zero(n);
    f.vertical = Eigen::VectorXd::Zero(n);
  }
  return out;
}

// Multiplier on the plateau after a slip at `onset`.
double slip_profile(double t, double onset, const HapticParams& p) {
  if (t < onset) return 1.0;
  const double t1 = onset + p.slip_drop_s;
  if (t < t1) return 1.0 + (p.slip_floor - 1.0) * (t - onset) / p.slip_drop_s;
  const double t2 = t1 + p.slip_recover_s;
  if (t < t2) return p.slip_floor + (p.slip_recovery - p.slip_floor) * (t - t1) / p.slip_recover_s;
  return p.slip_recovery;
}

double sag_profile(double t, double onset, const HapticParams& p) {
  if (t < onset) return 1.0;
  return p.failure_sag + (1.0 - p.failure_sag) * std::exp(-(t - onset) / 0.05);
}

}  // namespace

HapticEpisode generate_episode(const ObjectInstance& object, const GraspPose& grasp, const GraspOutcome& outcome,
                               const Workspace& workspace, const SimParams& sim, const HapticParams& p, Rng& rng) {
  const GraspGeometry geo = grasp_geometry(object, grasp, workspace, sim);
  const bool outcome_enclosed = outcome.enclosure_dof < sim.f_max;
  if (geo.enclosed != outcome_enclosed)
    throw ConsistencyError(geo.enclosed ? "contact forces expected but outcome enclosure_dof is f_max"
                                        : "no enclosure possible but outcome enclosure_dof is below f_max");
  if ((outcome.success || outcome.slip_occurred) && !geo.enclosed)
    throw ConsistencyError("success or slip reported for a grasp that did not enclose the object");

  HapticEpisode ep;
  ep.rate_hz = p.rate_hz;
  ep.mode = grasp.mode;
  ep.duration_s = uniform(rng, p.duration_min_s, p.duration_max_s);
  const int n = static_cast<int>(std::lround(ep.duration_s * p.rate_hz));
  const double stall = uniform(rng, p.stall_min_s, std::min(p.stall_max_s, ep.duration_s - 0.55));
  const double jitter = gaussian(rng, 0.0, p.level_jitter);
  const double onset = stall + uniform(rng, p.transient_min_s, p.transient_max_s);
  ep.close_event_index = std::clamp(static_cast<int>(std::lround(stall * p.rate_hz)), 0, n - 1);
  ep.frames.resize(n, kForceChannels);
  ep.f_trace.resize(n);

  const double half = 0.5 * sim.aperture;
  const double travel_to_stall = geo.enclosed ? geo.enclosure_travel : half;
  const double t_start = stall - travel_to_stall / p.finger_speed;
  const double f_stall = std::min(travel_to_stall / half * sim.f_max, outcome.enclosure_dof);
  const double f_final = outcome.enclosure_dof;

  const MaterialClass& mat = object.material;
  const double tau = p.ramp_tau_s * std::sqrt(p.stiffness_ref / mat.stiffness);
  auto forces = zero_forces(n);

  for (int t = 0; t < n; ++t) {
    const double time = t / p.rate_hz;
    if (time < stall) {
      ep.f_trace[t] = std::min(f_stall, std::clamp((time - t_start) * p.finger_speed / half, 0.0, 1.0) * sim.f_max);
    } else if (geo.enclosed) {
      const double r = std::min(1.0, (time - stall) / (3.0 * tau));
      ep.f_trace[t] = f_stall + (f_final - f_stall) * r;
    } else {
      ep.f_trace[t] = sim.f_max;
    }
  }
  ep.f_trace = ep.f_trace.cwiseMin(sim.f_max).cwiseMax(0.0);
  // Enforce monotonicity exactly against rounding in the piecewise formula.
  for (int t = 1; t < n; ++t) ep.f_trace[t] = std::max(ep.f_trace[t], ep.f_trace[t - 1]);

  const std::array<double, kFingers> shear_sign{-1.0, 1.0, -1.0};
  if (geo.enclosed) {
    const double level =
        std::max(0.2, p.peak_force * mat.stiffness / (mat.stiffness + p.stiffness_ref) * (1.0 + jitter));
    const double au = geo.axial_offset / p.offset_ref;
    const double av = geo.lateral_offset / p.offset_ref;
    std::array<double, kFingers> weight{1.0 - p.axial_gain * au + p.lateral_gain * av, 1.0 + p.axial_gain * au,
                                        1.0 - p.axial_gain * au - p.lateral_gain * av};
    for (int k = 0; k < kFingers; ++k) weight[k] = geo.fingers[k].hits ? std::clamp(weight[k], 0.1, 2.0) : 0.0;

    const double mid_contact = t_start + geo.fingers[1].gap / p.finger_speed;
    double side_gap = half;
    for (int k : {0, 2})
      if (geo.fingers[k].hits) side_gap = std::min(side_gap, geo.fingers[k].gap);
    const double side_contact = t_start + side_gap / p.finger_speed;
    const bool middle_first = mid_contact <= side_contact;
    const double first_contact = std::min(mid_contact, side_contact);

    const bool geometric_failure = !outcome.success && !outcome.slip_occurred;
    const double e = geo.axis_error;
    const double zeta = geo.table_collision ? -1.5
                                            : std::clamp((geo.z_rel - 0.5 * object.height) / (0.5 * object.height),
                                                         -1.0, 1.0);
    for (int t = 0; t < n; ++t) {
      const double time = t / p.rate_hz;
      double mod = 1.0;
      if (outcome.slip_occurred) mod = slip_profile(time, onset, p);
      else if (geometric_failure) mod = sag_profile(time, onset, p);
      for (int k = 0; k < kFingers; ++k) {
        if (weight[k] == 0.0) continue;
        double normal = 0.0;
        if (time >= stall) normal = level * weight[k] * (1.0 - std::exp(-(time - stall) / tau)) * mod;
        const bool pushing = (k == 1) == middle_first;
        if (pushing && time >= first_contact && time < stall + 0.1)
          normal += p.push_force * (1.0 + mat.friction) * (1.0 - std::exp(-(time - first_contact) / 0.03)) *
                    std::max(0.0, 1.0 - (time - stall) / 0.1);
        forces[k].normal[t] = normal * std::cos(e);
        forces[k].shear[t] = normal * (shear_sign[k] * std::sin(e) + p.shear_gain * mat.friction);
        forces[k].vertical[t] = normal * p.vertical_gain * zeta;
      }
    }
  } else if (geo.touched) {
    // Pushed but not enclosed: a short bump on each touching finger.
    for (int k = 0; k < kFingers; ++k) {
      if (!geo.fingers[k].hits) continue;
      const double contact = t_start + geo.fingers[k].gap / p.finger_speed;
      for (int t = 0; t < n; ++t) {
        const double time = t / p.rate_hz;
        if (time < contact) continue;
        const double rise = 1.0 - std::exp(-(time - contact) / 0.03);
        const double decay = time < stall ? 1.0 : std::exp(-(time - stall) / 0.05);
        const double normal = p.push_force * (1.0 + mat.friction) * rise * decay;
        forces[k].normal[t] = normal;
        forces[k].shear[t] = normal * p.shear_gain * mat.friction;
      }
    }
  }
  add_noise_and_magnitude(ep, forces, p.noise_sigma, rng);
  return ep;
}

HapticEpisode noise_floor(double rate_hz, double duration_s, const HapticParams& params, const SimParams& sim,
                          Rng& rng) {
  if (!(rate_hz > 0.0)) throw ArgumentError("rate_hz must be positive");
  HapticEpisode ep;
  ep.rate_hz = rate_hz;
  ep.duration_s = duration_s;
  const int n = std::max(1, static_cast<int>(std::lround(duration_s * rate_hz)));
  ep.frames.resize(n, kForceChannels);
  ep.f_trace = Eigen::VectorXd::Constant(n, sim.f_max);
  ep.close_event_index = std::clamp(static_cast<int>(std::lround(0.7 * n)), 0, n - 1);
  add_noise_and_magnitude(ep, zero_forces(n), params.noise_sigma, rng);
  return ep;
}

std::optional<std::string> check_invariants(const HapticEpisode& ep, double sigma) {
  const int n = ep.length();
  if (n == 0) return "empty episode";
  if (ep.f_trace.size() != n) return "f_trace length differs from frame count";
  if (std::lround(ep.duration_s * ep.rate_hz) != n) return "frame count differs from round(duration * rate)";
  if (ep.close_event_index < 0 || ep.close_event_index >= n) return "close_event_index out of range";
  for (int t = 0; t < n; ++t) {
    for (int k = 0; k < kFingers; ++k) {
      const auto f = static_cast<Finger>(k);
      const double mag = ep.frames(t, channel_index(f, ForceChannel::magnitude));
      const double fx = ep.frames(t, channel_index(f, ForceChannel::fx));
      const double fy = ep.frames(t, channel_index(f, ForceChannel::fy));
      const double fz = ep.frames(t, channel_index(f, ForceChannel::fz));
      if (!(mag >= 0.0)) return "negative force magnitude";
      if (std::abs(mag - std::sqrt(fx * fx + fy * fy + fz * fz)) > 3.0 * sigma)
        return "force magnitude inconsistent with components";
    }
    if (t > 0 && ep.f_trace[t] < ep.f_trace[t - 1]) return "f_trace decreases";
  }
  return std::nullopt;
}

Eigen::Vector3d mean_plateau_force(const HapticEpisode& ep) {
  Eigen::Vector3d m = Eigen::Vector3d::Zero();
  const int from = ep.close_event_index;
  const int count = ep.length() - from;
  for (int k = 0; k < kFingers; ++k)
    m[k] = ep.frames.col(channel_index(static_cast<Finger>(k), ForceChannel::magnitude)).tail(count).mean();
  return m;
}

}  // namespace hg
