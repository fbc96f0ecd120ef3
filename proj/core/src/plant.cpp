#include "etac/plant.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace etac {

double PlatformMotion::height(double t) const {
  if (components.empty()) return offset;
  double s = 0.0;
  for (const auto& c : components) s += c.amplitude * std::sin(c.omega * t + c.theta);
  return offset + s / static_cast<double>(components.size());
}

double PlatformMotion::accel(double t) const {
  if (components.empty()) return 0.0;
  double s = 0.0;
  for (const auto& c : components)
    s += c.amplitude * c.omega * c.omega * std::sin(c.omega * t + c.theta);
  return -s / static_cast<double>(components.size());
}

PlatformMotion PlatformMotion::still(double offset) {
  PlatformMotion m;
  m.offset = offset;
  return m;
}

PlatformMotion PlatformMotion::random(int n, double amplitude, double omega_min,
                                      double omega_max, double offset,
                                      std::mt19937_64& rng) {
  if (n < 1) throw std::invalid_argument("platform needs >= 1 component");
  std::uniform_real_distribution<double> omega(omega_min, omega_max);
  std::uniform_real_distribution<double> theta(0.0, 2.0 * std::numbers::pi);
  PlatformMotion m;
  m.offset = offset;
  m.components.resize(n);
  for (auto& c : m.components) {
    c.amplitude = amplitude;
    c.omega = omega(rng);
    c.theta = theta(rng);
  }
  return m;
}

double GroundEffectModel::factor(double h) const {
  if (h <= 0.0) throw std::domain_error("ground effect factor requires h > 0");
  if (!enabled) return 1.0;
  const double ratio = rotor_radius / (4.0 * h);
  if (ratio >= 1.0) return zeta_cap;
  return std::min(zeta_cap, 1.0 / (1.0 - ratio * ratio));
}

namespace {

struct Derivative {
  double dx;
  double dh;
};

Derivative flow_rate(double t, double x, double h, double u,
                     const PlatformMotion& motion, const GroundEffectModel& ge) {
  const double zeta = ge.factor(h);
  const double dx = -x * x + zeta * u / h + (zeta - 1.0) * kGravity / h -
                    motion.accel(t) / h;
  return {dx, x * h};
}

}  // namespace

PlantState step_with_law(const PlantState& state, const InputLaw& law,
                         const PlatformMotion& motion,
                         const GroundEffectModel& ge, double dt,
                         double touchdown_height) {
  if (state.touched_down) return state;
  if (state.h <= 0.0) throw std::domain_error("plant step requires h > 0");
  if (dt <= 0.0) throw std::invalid_argument("plant step requires dt > 0");

  auto touchdown = [&](double t_end) {
    PlantState s = state;
    s.h = touchdown_height;
    s.t = t_end;
    s.touched_down = true;
    return s;
  };

  const double t0 = state.t;
  const double x0 = state.x;
  const double h0 = state.h;

  // RK4 stages; a mid-step height collapse is treated as touchdown.
  const double h_floor = 1e-9;
  auto eval = [&](double t, double x, double h) {
    return flow_rate(t, x, h, law(t, x, h), motion, ge);
  };

  const Derivative k1 = eval(t0, x0, h0);
  double h2 = h0 + 0.5 * dt * k1.dh;
  if (h2 <= h_floor) return touchdown(t0 + dt);
  const Derivative k2 = eval(t0 + 0.5 * dt, x0 + 0.5 * dt * k1.dx, h2);
  double h3 = h0 + 0.5 * dt * k2.dh;
  if (h3 <= h_floor) return touchdown(t0 + dt);
  const Derivative k3 = eval(t0 + 0.5 * dt, x0 + 0.5 * dt * k2.dx, h3);
  double h4 = h0 + dt * k3.dh;
  if (h4 <= h_floor) return touchdown(t0 + dt);
  const Derivative k4 = eval(t0 + dt, x0 + dt * k3.dx, h4);

  PlantState next = state;
  next.x = x0 + dt / 6.0 * (k1.dx + 2.0 * k2.dx + 2.0 * k3.dx + k4.dx);
  next.h = h0 + dt / 6.0 * (k1.dh + 2.0 * k2.dh + 2.0 * k3.dh + k4.dh);
  next.t = t0 + dt;
  if (next.h <= touchdown_height) {
    next.h = touchdown_height;
    next.touched_down = true;
  }
  return next;
}

PlantState step(const PlantState& state, double u, const PlatformMotion& motion,
                const GroundEffectModel& ge, double dt, double touchdown_height) {
  return step_with_law(
      state, [u](double, double, double) { return u; }, motion, ge, dt,
      touchdown_height);
}

double measure_optic_flow(const PlantState& state, double snr_db,
                          std::mt19937_64& rng) {
  if (snr_db <= 0.0) throw std::invalid_argument("snr_db must be > 0");
  const double sigma = std::abs(state.x) * std::pow(10.0, -snr_db / 20.0);
  std::normal_distribution<double> noise(0.0, 1.0);
  return state.x + sigma * noise(rng);
}

}  // namespace etac
