#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "etac/edmd.hpp"
#include "etac/mpc.hpp"
#include "etac/plant.hpp"
#include "etac/triggers.hpp"

namespace etac {

/// ETAC  — both triggers gate adaptation and control.
/// TTAC  — adapts and re-solves the MPC at every step.
/// ETC   — control trigger only, the model is never adapted.
enum class Mode { Etac, Ttac, Etc };

std::string to_string(Mode mode);
Mode mode_from_string(const std::string& name);

struct AdaptationConfig {
  int window = 10;
  double forgetting = 0.95;
};

struct PlantConfig {
  double dt = 0.01;
  double touchdown_height = 0.05;
  bool ground_effect = false;
  double ge_rotor_radius = 0.15;
  double ge_zeta_cap = 1.35;
  bool platform = false;
  int platform_components = 10;
  double platform_amplitude = 0.5;
  double platform_offset = 0.5;
  double platform_omega_min = 0.1;
  double platform_omega_max = 1.0;
  bool noise = false;
  double snr_db = 35.0;
};

struct TrainSection {
  int n_traj = 100;
  int traj_len = 150;
  double ridge = 1e-8;
  double h_min = 1.0;
  double h_max = 10.0;
  double v_min = -2.0;
  double v_max = 2.0;
};

/// Full experiment description; defaults reproduce the headline landing
/// scenario once mode/seed are chosen.
struct RunConfig {
  Mode mode = Mode::Etac;
  std::uint64_t seed = 0;
  double h0 = 5.0;
  double v0 = 1.0;
  double x_ref = -0.3;
  double max_time = 40.0;
  int degree = 2;                      // lifting dictionary degree
  std::string model_source = "train";  // "train" or a model JSON path

  double trigger_sigma = 5e-8;
  double trigger_beta = 0.09;
  double trigger_gamma = 1e-4;
  double trigger_alpha = 0.09;
  double trigger_q_weight = 100.0;  // Q = q_weight * I

  MpcConfig mpc;
  AdaptationConfig adaptation;
  PlantConfig plant;
  TrainSection train;

  TriggerParams trigger_params(int q) const;
  TrainingPlantConfig training_plant() const;
  void validate() const;
};

struct TrajectoryRow {
  double t = 0.0;
  double h_rel = 0.0;
  double h_abs = 0.0;
  double h_platform = 0.0;
  double v = 0.0;
  double x_true = 0.0;
  double x_meas = 0.0;
  double x_pred = 0.0;
  double u = 0.0;
  double V_a = 0.0;
  double epsilon = 0.0;
  bool adapt_event = false;
  bool control_event = false;
};

struct Metrics {
  int iterations = 0;
  double avg_compute_time_s = 0.0;
  double control_effort = 0.0;
  double rmse_last4s = 0.0;
  double terminal_time = 0.0;
  double terminal_altitude = 0.0;
  double terminal_velocity = 0.0;
  int adaptation_events = 0;
  int control_events = 0;
  int events_avoided = 0;  // vs. a 2-events-per-iteration baseline
  bool rmse_window_truncated = false;
};

struct RunResult {
  std::vector<TrajectoryRow> trajectory;
  EventLog events;
  PlantState final_state;
  bool touched_down = false;
  double total_compute_time_s = 0.0;
  double dt = 0.01;
  double x_ref = -0.3;
  KoopmanModel final_model;
};

/// Runs the closed loop of measurement, prediction, triggered adaptation,
/// triggered MPC and plant stepping until touchdown or max_time.
/// Deterministic for a fixed config and seed.
RunResult run_closed_loop(const RunConfig& config, const KoopmanModel& model);

Metrics compute_metrics(const RunResult& result, double window_s = 4.0);

/// Trains the nominal model per the config's train section (used when
/// model_source == "train").
KoopmanModel train_model(const RunConfig& config);

void write_trajectory_csv(std::ostream& out, const RunResult& result);
void write_trajectory_csv(const std::string& path, const RunResult& result);
void write_metrics_json(const std::string& path, const Metrics& metrics);

}  // namespace etac
