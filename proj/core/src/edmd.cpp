#include "etac/edmd.hpp"

#include <Eigen/SVD>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace etac {

void TrajectoryDataset::to_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write dataset: " + path);
  out << "traj_id,step,x,u,x_next\n";
  char line[160];
  for (const auto& s : snapshots) {
    std::snprintf(line, sizeof(line), "%d,%d,%.17g,%.17g,%.17g\n", s.traj_id,
                  s.step, s.x, s.u, s.x_next);
    out << line;
  }
}

TrajectoryDataset TrajectoryDataset::from_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open dataset: " + path);
  std::string line;
  if (!std::getline(in, line) || line.rfind("traj_id,step,x,u,x_next", 0) != 0)
    throw std::runtime_error("dataset csv: bad header in " + path);
  TrajectoryDataset ds;
  int max_traj = -1;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    Snapshot s;
    std::istringstream ss(line);
    char comma;
    if (!(ss >> s.traj_id >> comma >> s.step >> comma >> s.x >> comma >> s.u >>
          comma >> s.x_next))
      throw std::runtime_error("dataset csv: bad row: " + line);
    max_traj = std::max(max_traj, s.traj_id);
    ds.snapshots.push_back(s);
  }
  ds.n_traj = max_traj + 1;
  return ds;
}

TrajectoryDataset generate_training_data(const TrainingPlantConfig& cfg,
                                         int n_traj, int traj_len,
                                         std::uint64_t rng_seed) {
  if (n_traj < 1 || traj_len < 2)
    throw std::invalid_argument("need n_traj >= 1 and traj_len >= 2");
  if (cfg.h_min <= cfg.touchdown_height)
    throw std::invalid_argument(
        "degenerate plant config: h_min at or below the touchdown height");

  TrajectoryDataset ds;
  ds.n_traj = n_traj;
  ds.traj_len = traj_len;
  ds.snapshots.reserve(static_cast<std::size_t>(n_traj) * (traj_len - 1));

  const PlatformMotion still = PlatformMotion::still();
  const GroundEffectModel no_ge{};

  for (int traj = 0; traj < n_traj; ++traj) {
    std::seed_seq seq{rng_seed, static_cast<std::uint64_t>(traj)};
    std::mt19937_64 rng(seq);
    std::uniform_real_distribution<double> h0(cfg.h_min, cfg.h_max);
    std::uniform_real_distribution<double> v0(cfg.v_min, cfg.v_max);
    std::uniform_real_distribution<double> input(cfg.u_min, cfg.u_max);

    // The dictionary models the flow only inside the operating envelope
    // |x| <= L1; excursions beyond it (runaway dives ahead of touchdown)
    // would dominate the x^2 moments and wreck the fit.
    const double flow_limit = std::max(std::abs(cfg.x_min), std::abs(cfg.x_max));

    auto draw_state = [&] {
      for (int attempt = 0; attempt < 100; ++attempt) {
        PlantState s;
        s.h = h0(rng);
        s.x = v0(rng) / s.h;
        if (std::abs(s.x) <= flow_limit) return s;
      }
      throw std::invalid_argument(
          "degenerate plant config: initial conditions lie outside the "
          "flow envelope");
    };

    // A trajectory that reaches touchdown or leaves the envelope restarts
    // from fresh initial conditions until its transition quota is met;
    // restarts are counted in the dataset metadata. The transition
    // spanning a restart is never recorded.
    PlantState state = draw_state();
    int collected = 0;
    int restarts_left = 100;
    while (collected + 1 < traj_len) {
      const double u = input(rng);
      const PlantState next =
          step(state, u, still, no_ge, cfg.dt, cfg.touchdown_height);
      if (next.touched_down || std::abs(next.x) > flow_limit) {
        if (--restarts_left < 0)
          throw std::invalid_argument(
              "degenerate plant config: trajectories keep leaving the "
              "training envelope");
        ++ds.truncated_trajectories;
        state = draw_state();
        continue;
      }
      ds.snapshots.push_back({traj, collected, state.x, u, next.x});
      state = next;
      ++collected;
    }
  }
  return ds;
}

std::pair<Mat, Mat> fit_edmd_lifted(const Mat& Z, const Mat& U, const Mat& Zn,
                                    double ridge) {
  if (Z.cols() == 0) throw std::invalid_argument("fit_edmd: empty dataset");
  if (U.cols() != Z.cols() || Zn.cols() != Z.cols() || Zn.rows() != Z.rows())
    throw std::invalid_argument("fit_edmd: snapshot matrix dims mismatch");
  if (ridge < 0.0) throw std::invalid_argument("fit_edmd: ridge must be >= 0");

  const int q = static_cast<int>(Z.rows());
  const int m = static_cast<int>(U.rows());
  const int p = q + m;
  const Eigen::Index n_cols = Z.cols();
  if (n_cols < p)
    throw std::invalid_argument("fit_edmd: need at least q+m snapshots");

  // Ridge enters as extra columns [S, sqrt(ridge) I] so one SVD path
  // covers both the regularized and the plain least-squares problem.
  const Eigen::Index total = n_cols + (ridge > 0.0 ? p : 0);
  Mat S(p, total);
  S.topLeftCorner(q, n_cols) = Z;
  S.bottomLeftCorner(m, n_cols) = U;
  Mat target(q, total);
  target.leftCols(n_cols) = Zn;
  if (ridge > 0.0) {
    S.rightCols(p) = std::sqrt(ridge) * Mat::Identity(p, p);
    target.rightCols(p).setZero();
  }
  if (!S.allFinite() || !target.allFinite())
    throw std::invalid_argument("fit_edmd: non-finite snapshot data");

  Eigen::JacobiSVD<Mat> svd(S, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const double cutoff = 1e-10 * svd.singularValues()(0);
  if (ridge == 0.0 && svd.singularValues().minCoeff() <= cutoff)
    throw SingularityError(
        "fit_edmd: rank-deficient regressors; rerun with ridge > 0");

  Vec inv_sv = svd.singularValues();
  for (Eigen::Index i = 0; i < inv_sv.size(); ++i)
    inv_sv(i) = inv_sv(i) > cutoff ? 1.0 / inv_sv(i) : 0.0;
  // G = target * pinv(S), pinv(S) = V diag(1/s) U^T
  Mat G = ((target * svd.matrixV()) * inv_sv.asDiagonal()) *
          svd.matrixU().transpose();

  return {G.leftCols(q), G.rightCols(m)};
}

KoopmanModel fit_edmd(const TrajectoryDataset& dataset,
                      const ObservableDictionary& dict, double ridge) {
  if (dataset.empty()) throw std::invalid_argument("fit_edmd: empty dataset");
  const int q = dict.lifted_dim();
  const Eigen::Index n_cols = static_cast<Eigen::Index>(dataset.size());

  Mat Z(q, n_cols), Zn(q, n_cols), U(1, n_cols);
  for (Eigen::Index j = 0; j < n_cols; ++j) {
    const auto& s = dataset.snapshots[static_cast<std::size_t>(j)];
    Z.col(j) = dict.lift(s.x);
    Zn.col(j) = dict.lift(s.x_next);
    U(0, j) = s.u;
  }
  auto [A, B] = fit_edmd_lifted(Z, U, Zn, ridge);
  return KoopmanModel::from_nominal(A, B, 1);
}

}  // namespace etac
