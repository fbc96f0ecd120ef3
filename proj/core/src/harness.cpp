#include "etac/harness.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "etac/adaptation.hpp"

namespace etac {

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::Etac: return "etac";
    case Mode::Ttac: return "ttac";
    case Mode::Etc: return "etc";
  }
  return "etac";
}

Mode mode_from_string(const std::string& name) {
  if (name == "etac") return Mode::Etac;
  if (name == "ttac") return Mode::Ttac;
  if (name == "etc") return Mode::Etc;
  throw std::invalid_argument("unknown mode: " + name +
                              " (expected etac, ttac or etc)");
}

TriggerParams RunConfig::trigger_params(int q) const {
  TriggerParams p;
  p.sigma = trigger_sigma;
  p.beta = trigger_beta;
  p.gamma = trigger_gamma;
  p.alpha = trigger_alpha;
  p.Q = trigger_q_weight * Mat::Identity(q, q);
  p.b = mpc.horizon;
  return p;
}

TrainingPlantConfig RunConfig::training_plant() const {
  TrainingPlantConfig t;
  t.dt = plant.dt;
  t.touchdown_height = plant.touchdown_height;
  t.h_min = train.h_min;
  t.h_max = train.h_max;
  t.v_min = train.v_min;
  t.v_max = train.v_max;
  t.u_min = mpc.u_min;
  t.u_max = mpc.u_max;
  t.x_min = mpc.x_min;
  t.x_max = mpc.x_max;
  return t;
}

void RunConfig::validate() const {
  if (degree < 1) throw std::invalid_argument("config: degree must be >= 1");
  if (plant.dt <= 0.0) throw std::invalid_argument("config: dt must be > 0");
  if (h0 <= plant.touchdown_height)
    throw std::invalid_argument("config: h0 must exceed the touchdown height");
  if (max_time <= 0.0) throw std::invalid_argument("config: max_time must be > 0");
  if (plant.noise && plant.snr_db <= 0.0)
    throw std::invalid_argument("config: snr_db must be > 0");
  if (plant.platform && plant.platform_components < 1)
    throw std::invalid_argument("config: platform needs >= 1 component");
  if (adaptation.window < 1)
    throw std::invalid_argument("config: adaptation window must be >= 1");
  if (!(adaptation.forgetting > 0.0 && adaptation.forgetting <= 1.0))
    throw std::invalid_argument("config: forgetting must be in (0, 1]");
  MpcConfig m = mpc;
  m.x_ref = x_ref;
  m.validate();
  trigger_params(degree).validate();
  if (train.n_traj < 1 || train.traj_len < 2)
    throw std::invalid_argument("config: train needs n_traj >= 1, traj_len >= 2");
}

KoopmanModel train_model(const RunConfig& config) {
  config.validate();
  const ObservableDictionary dict{config.degree};
  const TrajectoryDataset data = generate_training_data(
      config.training_plant(), config.train.n_traj, config.train.traj_len,
      config.seed);
  return fit_edmd(data, dict, config.train.ridge);
}

namespace {

constexpr std::uint64_t kPlatformSalt = 0x706c6174;  // "plat"
constexpr std::uint64_t kNoiseSalt = 0x6e6f6973;     // "nois"

// The adapted parameters are assumed bounded; a raw least-squares update
// cannot honor that when the window is weakly excited (regressor
// directions with near-zero singular values pick up huge hallucinated
// corrections, and those random-walk the model step after step). The
// closed loop therefore computes its updates with weak regressor
// directions truncated, and rejects any update that would still
// destabilize the model: the local linearization of the flow dynamics has
// spectral radius 1 + O(dt), and ||B_hat|| stays below
// dt * zeta_cap / touchdown_height.
constexpr double kMaxSpectralRadius = 1.1;
constexpr double kMaxAdaptedB = 2.0;
constexpr double kRobustSvdCutoff = 1e-2;

double spectral_radius(const Mat& M) {
  return Eigen::EigenSolver<Mat>(M, false).eigenvalues().cwiseAbs().maxCoeff();
}

bool update_keeps_model_bounded(const KoopmanModel& model,
                                const ModelUpdate& upd) {
  const Mat a_next = model.A_hat + upd.dA;
  const Mat b_next = model.B_hat + upd.dB;
  if (!a_next.allFinite() || !b_next.allFinite()) return false;
  return spectral_radius(a_next) <= kMaxSpectralRadius &&
         b_next.jacobiSvd().singularValues()(0) <= kMaxAdaptedB;
}

}  // namespace

RunResult run_closed_loop(const RunConfig& config, const KoopmanModel& nominal) {
  config.validate();
  nominal.validate();
  const ObservableDictionary dict{config.degree};
  if (nominal.q() != dict.lifted_dim())
    throw std::invalid_argument("model dimension does not match the dictionary");

  KoopmanModel model = nominal;
  MpcConfig mpc_cfg = config.mpc;
  mpc_cfg.x_ref = config.x_ref;
  const TriggerParams params = config.trigger_params(model.q());
  const int b = mpc_cfg.horizon;
  const int m = model.m();

  PlatformMotion motion = PlatformMotion::still(0.0);
  if (config.plant.platform) {
    std::seed_seq seq{config.seed, kPlatformSalt};
    std::mt19937_64 rng(seq);
    motion = PlatformMotion::random(
        config.plant.platform_components, config.plant.platform_amplitude,
        config.plant.platform_omega_min, config.plant.platform_omega_max,
        config.plant.platform_offset, rng);
  }
  GroundEffectModel ge;
  ge.enabled = config.plant.ground_effect;
  ge.rotor_radius = config.plant.ge_rotor_radius;
  ge.zeta_cap = config.plant.ge_zeta_cap;

  std::seed_seq noise_seq{config.seed, kNoiseSalt};
  std::mt19937_64 noise_rng(noise_seq);

  PlantState state;
  state.h = config.h0;
  state.x = config.v0 / config.h0;
  state.t = 0.0;

  const Vec z_ref = dict.lift(config.x_ref);
  MpcController controller(mpc_cfg);
  AdaptationWindow window(config.adaptation.window, config.adaptation.forgetting);

  RunResult result;
  result.dt = config.plant.dt;
  result.x_ref = config.x_ref;
  result.trajectory.reserve(
      static_cast<std::size_t>(config.max_time / config.plant.dt) + 1);

  Vec u_star;       // stored input sequence U*(.|k_ev)
  int i = 0;        // consecutive steps served from the stored sequence
  Vec z_obs_prev;
  Vec u_prev = Vec::Zero(m);
  double e_prev = 0.0;

  using clock = std::chrono::steady_clock;

  for (int k = 0; state.t < config.max_time - 1e-12 && !state.touched_down; ++k) {
    const double x_true = state.x;
    const double x_meas =
        config.plant.noise ? measure_optic_flow(state, config.plant.snr_db, noise_rng)
                           : x_true;

    const auto tic = clock::now();
    const Vec z_obs = dict.lift(x_meas);

    // One-step prediction anchored at the previous measurement.
    Vec z_hat;
    double x_pred;
    if (k == 0) {
      z_hat = z_obs;
      x_pred = x_meas;
    } else {
      z_hat = model.A_hat * z_obs_prev + model.B_hat * u_prev;
      x_pred = z_hat(0);
    }
    const double e_k = x_meas - x_pred;
    const double v_a = e_k * e_k;

    bool adapt_event = false;
    if (config.mode != Mode::Etc && k >= 1) {
      // The window always holds the latest measurements; the trigger only
      // decides when the update is computed and applied.
      window.push(z_obs_prev, u_prev, z_obs - z_hat);
      const bool fire = config.mode == Mode::Ttac ||
                        adaptation_trigger(e_k, e_prev, params);
      if (fire) {
        if (window.size() == window.capacity()) {
          try {
            const ModelUpdate upd =
                compute_update_windowed(window, kRobustSvdCutoff);
            if (update_keeps_model_bounded(model, upd))
              apply_update(model, upd);
          } catch (const std::exception& ex) {
            throw std::runtime_error("run aborted at step " + std::to_string(k) +
                                     ": " + ex.what());
          }
        }
        adapt_event = true;
      }
    }

    const Vec e_tilde = z_hat - z_ref;
    const int i_candidate = i + 1;
    const bool have_sequence = u_star.size() > 0;
    double epsilon = 0.0;
    if (have_sequence) {
      const int idx = std::min(i_candidate, b - 1);
      epsilon = control_epsilon(model, e_tilde, u_star.segment(idx * m, m),
                                z_ref, params);
    }

    const bool control_event =
        config.mode == Mode::Ttac || !have_sequence ||
        control_trigger(epsilon, i_candidate, params);

    double u_k;
    if (control_event) {
      std::optional<WarmStart> warm;
      if (have_sequence)
        warm = warm_start_shift(controller.last_solution(), m,
                                std::min(i_candidate, b));
      try {
        u_star = controller.solve(model, z_obs, warm);
      } catch (const std::exception& ex) {
        throw std::runtime_error("run aborted at step " + std::to_string(k) +
                                 ": " + ex.what());
      }
      i = 0;
      u_k = u_star(0);
    } else {
      i = i_candidate;
      u_k = u_star(std::min(i, b - 1) * m);
    }
    result.total_compute_time_s +=
        std::chrono::duration<double>(clock::now() - tic).count();

    const double h_platform = motion.height(state.t);
    result.trajectory.push_back({state.t, state.h, state.h + h_platform,
                                 h_platform, state.v(), x_true, x_meas, x_pred,
                                 u_k, v_a, epsilon, adapt_event, control_event});
    result.events.records.push_back(
        {k, v_a, adapt_event, epsilon, control_event, i});

    state = step(state, u_k, motion, ge, config.plant.dt,
                 config.plant.touchdown_height);

    z_obs_prev = z_obs;
    u_prev = Vec::Constant(m, u_k);
    e_prev = e_k;
  }

  result.final_state = state;
  result.touched_down = state.touched_down;
  result.final_model = model;
  return result;
}

Metrics compute_metrics(const RunResult& result, double window_s) {
  if (result.trajectory.empty())
    throw std::invalid_argument("compute_metrics: empty run");

  Metrics m;
  m.iterations = static_cast<int>(result.trajectory.size());
  m.avg_compute_time_s = result.total_compute_time_s / m.iterations;
  m.terminal_time = result.final_state.t;
  m.terminal_altitude = result.final_state.h;
  m.terminal_velocity = result.final_state.v();

  double window_start = result.final_state.t - window_s;
  if (window_start < result.trajectory.front().t) {
    window_start = result.trajectory.front().t;
    m.rmse_window_truncated = true;
  }
  double sq_sum = 0.0;
  int n_window = 0;
  for (const auto& row : result.trajectory) {
    m.control_effort += std::abs(row.u) * result.dt;
    if (row.adapt_event) ++m.adaptation_events;
    if (row.control_event) ++m.control_events;
    if (row.t >= window_start) {
      const double err = row.x_true - result.x_ref;
      sq_sum += err * err;
      ++n_window;
    }
  }
  m.rmse_last4s = n_window > 0 ? std::sqrt(sq_sum / n_window) : 0.0;
  m.events_avoided =
      2 * m.iterations - (m.adaptation_events + m.control_events);
  return m;
}

void write_trajectory_csv(std::ostream& out, const RunResult& result) {
  out << "t,h_rel,h_abs,h_platform,v,x_true,x_meas,x_pred,u,V_a,epsilon,"
         "adapt_event,control_event\n";
  char line[512];
  for (const auto& r : result.trajectory) {
    std::snprintf(line, sizeof(line),
                  "%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%d,%d\n",
                  r.t, r.h_rel, r.h_abs, r.h_platform, r.v, r.x_true, r.x_meas,
                  r.x_pred, r.u, r.V_a, r.epsilon, r.adapt_event ? 1 : 0,
                  r.control_event ? 1 : 0);
    out << line;
  }
}

void write_trajectory_csv(const std::string& path, const RunResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write trajectory: " + path);
  write_trajectory_csv(out, result);
}

void write_metrics_json(const std::string& path, const Metrics& metrics) {
  nlohmann::json j;
  j["iterations"] = metrics.iterations;
  j["avg_compute_time_s"] = metrics.avg_compute_time_s;
  j["control_effort"] = metrics.control_effort;
  j["rmse_last4s"] = metrics.rmse_last4s;
  j["terminal_time"] = metrics.terminal_time;
  j["terminal_altitude"] = metrics.terminal_altitude;
  j["terminal_velocity"] = metrics.terminal_velocity;
  j["adaptation_events"] = metrics.adaptation_events;
  j["control_events"] = metrics.control_events;
  j["events_avoided"] = metrics.events_avoided;
  j["rmse_window_truncated"] = metrics.rmse_window_truncated;
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write metrics: " + path);
  out << j.dump(2) << "\n";
}

}  // namespace etac
