#pragma once

#include <functional>
#include <random>
#include <vector>

#include "etac/observables.hpp"

namespace etac {

inline constexpr double kGravity = 9.81;  // m/s^2

/// Ground-truth simulation state for the vertical landing problem.
/// h is the height above the (possibly moving) landing surface; the
/// relative vertical rate is v = x * h by definition of optic flow.
struct PlantState {
  double h = 5.0;   // relative height above platform, m
  double x = 0.0;   // true optic flow, 1/s
  double t = 0.0;   // time, s
  bool touched_down = false;

  double v() const { return x * h; }
};

/// Vertically oscillating platform: height offset plus the average of a
/// set of sinusoids. Acceleration is the exact second time derivative.
struct PlatformMotion {
  struct Component {
    double amplitude = 0.5;  // m
    double omega = 0.5;      // rad/s
    double theta = 0.0;      // rad
  };

  std::vector<Component> components;
  double offset = 0.0;  // m

  double height(double t) const;
  double accel(double t) const;

  /// Static surface at the given height.
  static PlatformMotion still(double offset = 0.0);

  /// n sinusoids with fixed amplitude, omega ~ U[omega_min, omega_max],
  /// theta ~ U[0, 2pi). The combined excursion is the average of the
  /// components, so it stays within +-amplitude of the offset.
  static PlatformMotion random(int n, double amplitude, double omega_min,
                               double omega_max, double offset,
                               std::mt19937_64& rng);
};

/// In-ground-effect thrust amplification, Cheeseman-Bennett form:
/// zeta(h) = 1 / (1 - (R/(4h))^2), clamped to zeta_cap near the surface.
struct GroundEffectModel {
  bool enabled = false;
  double rotor_radius = 0.15;  // m
  // capped within the measured quadrotor thrust-ratio range; higher caps
  // make descent through the last centimeters impossible at sub-gravity
  // input authority
  double zeta_cap = 1.35;

  double factor(double h) const;
};

/// Input as a function of (t, x, h); step() wraps a constant (ZOH) input.
using InputLaw = std::function<double(double t, double x, double h)>;

/// One RK4 step of the coupled optic-flow/height dynamics
///   x' = -x^2 + zeta(h) u / h + (zeta(h) - 1) g / h - a_p(t) / h
///   h' = x h
/// The state freezes (touched_down) once h reaches touchdown_height.
PlantState step(const PlantState& state, double u, const PlatformMotion& motion,
                const GroundEffectModel& ge, double dt,
                double touchdown_height = 0.05);

/// Same dynamics with the input re-evaluated at every RK4 stage.
PlantState step_with_law(const PlantState& state, const InputLaw& law,
                         const PlatformMotion& motion,
                         const GroundEffectModel& ge, double dt,
                         double touchdown_height = 0.05);

/// Measured optic flow under additive Gaussian noise scaled so that the
/// instantaneous signal-to-noise ratio is snr_db.
double measure_optic_flow(const PlantState& state, double snr_db,
                          std::mt19937_64& rng);

}  // namespace etac
