#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "etac/model.hpp"
#include "etac/plant.hpp"

namespace etac {

/// Thrown when the regressor matrix is rank deficient and no ridge
/// regularization was requested.
struct SingularityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One-step transitions (x_j, u_j, x_{j+1}) collected from simulation.
struct TrajectoryDataset {
  struct Snapshot {
    int traj_id = 0;
    int step = 0;
    double x = 0.0;
    double u = 0.0;
    double x_next = 0.0;
  };

  std::vector<Snapshot> snapshots;
  int n_traj = 0;
  int traj_len = 0;
  int truncated_trajectories = 0;  // touchdown restarts during generation

  bool empty() const { return snapshots.empty(); }
  std::size_t size() const { return snapshots.size(); }

  void to_csv(const std::string& path) const;
  static TrajectoryDataset from_csv(const std::string& path);
};

struct TrainingPlantConfig {
  double dt = 0.01;
  double touchdown_height = 0.05;
  double h_min = 1.0;
  double h_max = 10.0;
  double v_min = -2.0;
  double v_max = 2.0;
  double u_min = -3.0;
  double u_max = 3.0;
  // training envelope for the optic flow; matches the controller's output
  // box, which is also the domain of the lifted-state bound z_max
  double x_min = -2.0;
  double x_max = 0.5;
};

/// Simulates the nominal plant (no ground effect, static platform, no
/// measurement noise) under uniform random excitation. Each trajectory
/// draws its own RNG stream from the seed, so generation is reproducible
/// and parallelizable. A trajectory that reaches touchdown is cut there
/// and restarted from fresh initial conditions until it has produced its
/// traj_len - 1 transitions; restarts are counted in the metadata, so the
/// snapshot count is always n_traj * (traj_len - 1).
TrajectoryDataset generate_training_data(const TrainingPlantConfig& cfg,
                                         int n_traj, int traj_len,
                                         std::uint64_t rng_seed);

/// Least-squares Koopman fit on already-lifted snapshot matrices:
/// minimize sum_j ||zn_j - A z_j - B u_j||^2 + ridge ||[A B]||_F^2.
/// Z is q x N, U is m x N, Zn is q x N. Solved via SVD pseudo-inverse of
/// the (augmented) regressor with relative cutoff 1e-10.
std::pair<Mat, Mat> fit_edmd_lifted(const Mat& Z, const Mat& U, const Mat& Zn,
                                    double ridge);

/// Lifts a scalar dataset through the dictionary and fits the nominal
/// model. The returned model has A_hat = A, B_hat = B and C = [I 0].
KoopmanModel fit_edmd(const TrajectoryDataset& dataset,
                      const ObservableDictionary& dict, double ridge = 1e-8);

}  // namespace etac
