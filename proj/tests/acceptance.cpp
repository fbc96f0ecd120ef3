// Acceptance suite: every criterion prints one [PASS]/[FAIL] line and the
// binary exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <random>
#include <string>
#include <vector>

#include "etac/adaptation.hpp"
#include "etac/harness.hpp"
#include "test_util.hpp"

using namespace etac;

namespace {

int g_failures = 0;

void report(int id, const std::string& name, bool pass, const std::string& detail) {
  std::printf("[%s] criterion %2d: %s (%s)\n", pass ? "PASS" : "FAIL", id,
              name.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
      .count();
}

RunConfig headline_config(Mode mode) {
  RunConfig cfg;
  cfg.mode = mode;
  cfg.seed = 1;
  cfg.h0 = 5.0;
  cfg.v0 = 1.0;
  cfg.x_ref = -0.3;
  cfg.max_time = 40.0;
  cfg.plant.ground_effect = true;
  cfg.plant.platform = true;
  cfg.plant.noise = true;
  cfg.plant.snr_db = 35.0;
  return cfg;
}

RunConfig nominal_config() {
  RunConfig cfg = headline_config(Mode::Etac);
  cfg.plant.ground_effect = false;
  cfg.plant.platform = false;
  cfg.plant.noise = false;
  return cfg;
}

// ---- criterion 1: EDMD exactness on a known lifted-linear system ----
void criterion_edmd() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(2024);
  Mat A0 = test::random_mat(2, 2, rng, 0.3) + 0.6 * Mat::Identity(2, 2);
  const Mat B0 = test::random_mat(2, 1, rng, 0.5);
  const int N = 600;
  Mat Z(2, N), Zn(2, N), U(1, N);
  for (int j = 0; j < N; ++j) {
    Z.col(j) = test::random_vec(2, rng);
    U.col(j) = test::random_vec(1, rng);
    Zn.col(j) = A0 * Z.col(j) + B0 * U.col(j);
  }
  const auto [A, B] = fit_edmd_lifted(Z, U, Zn, 0.0);
  const double err_a = (A - A0).norm();
  const double err_b = (B - B0).norm();
  const double elapsed = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "|A-A0|_F 1e%+.0f, |B-B0|_F 1e%+.0f, %.3f s",
                std::log10(std::max(err_a, 1e-30)),
                std::log10(std::max(err_b, 1e-30)), elapsed);
  report(1, "EDMD recovers a lifted-linear system within 1e-8",
         err_a <= 1e-8 && err_b <= 1e-8 && elapsed < 1.0, detail);
}

// ---- criterion 2: QP solver vs the active-set enumeration oracle ----
void criterion_qp() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(7);
  double worst_primal = 0.0, worst_kkt = 0.0;
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 1 + static_cast<int>(rng() % 6);
    const int mc = 1 + static_cast<int>(rng() % 6);
    const QpProblem p = test::random_box_qp(n, mc, rng);
    const auto oracle = test::active_set_oracle(p);
    if (!oracle) { ok = false; break; }
    const QpSolution s = solve_qp(p);
    if (s.status != QpStatus::solved) { ok = false; break; }
    worst_primal =
        std::max(worst_primal, (s.x - *oracle).cwiseAbs().maxCoeff());
    const Vec kkt = p.H * s.x + p.g + p.A.transpose() * s.y;
    worst_kkt = std::max(worst_kkt, kkt.cwiseAbs().maxCoeff());
  }
  const double elapsed = seconds_since(t0);
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "100 QPs, worst primal gap %.2e, worst KKT %.2e, %.2f s",
                worst_primal, worst_kkt, elapsed);
  report(2, "ADMM matches the brute-force active-set oracle",
         ok && worst_primal <= 1e-5 && worst_kkt <= 1e-4 && elapsed < 5.0,
         detail);
}

// ---- criterion 3: plant fidelity vs the closed-form Riccati solution ----
void criterion_plant() {
  const PlatformMotion still = PlatformMotion::still();
  const GroundEffectModel no_ge{};
  const double x0 = 0.5;
  PlantState s;
  s.h = 1000.0;
  s.x = x0;
  double max_err = 0.0;
  for (int k = 0; k < 1000; ++k) {
    s = step(s, 0.0, still, no_ge, 0.01);
    max_err = std::max(max_err, std::abs(s.x - x0 / (1.0 + x0 * s.t)));
  }
  char detail[96];
  std::snprintf(detail, sizeof(detail), "max |x - exact| = %.2e over 10 s",
                max_err);
  report(3, "free flow matches x0/(1+x0 t) within 1e-6", max_err <= 1e-6,
         detail);
}

// ---- criterion 4: Lemma 1 and the windowed least-squares property ----
void criterion_lemma1() {
  std::mt19937_64 rng(99);
  double worst_single = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    const Vec z = test::random_vec(2, rng);
    const Vec u = test::random_vec(1, rng);
    const Vec dz = test::random_vec(2, rng);
    const ModelUpdate upd = compute_update_single(z, u, dz);
    worst_single =
        std::max(worst_single, (dz - upd.dA * z - upd.dB * u).norm());
  }

  double worst_window = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const int w_len = 4 + static_cast<int>(rng() % 6);
    AdaptationWindow w(w_len, 0.95);
    Mat S(3, w_len), dZ(2, w_len);
    for (int j = 0; j < w_len; ++j) {
      const Vec z = test::random_vec(2, rng);
      const Vec u = test::random_vec(1, rng);
      const Vec dz = test::random_vec(2, rng);
      w.push(z, u, dz);
      S.col(j).head(2) = z;
      S.col(j).tail(1) = u;
      dZ.col(j) = std::pow(0.95, w_len - 1 - j) * dz;
    }
    const Mat oracle = dZ * S.transpose() * (S * S.transpose()).inverse();
    const ModelUpdate upd = compute_update_windowed(w);
    Mat got(2, 3);
    got << upd.dA, upd.dB;
    worst_window = std::max(worst_window, (got - oracle).cwiseAbs().maxCoeff());
  }
  char detail[128];
  std::snprintf(detail, sizeof(detail),
                "worst single residual %.2e, worst oracle gap %.2e",
                worst_single, worst_window);
  report(4, "single-step updates cancel the residual; windowed matches LS",
         worst_single <= 1e-12 && worst_window <= 1e-9, detail);
}

// ---- criterion 5: trigger soundness on a logged ETAC run ----
bool trigger_soundness(const RunResult& r, const TriggerParams& params,
                       std::string& detail) {
  const auto& recs = r.events.records;
  int control_viol = 0, adapt_viol = 0, decay_viol = 0;

  // anchor for the geometric decay bound: last adaptation event (or start)
  std::size_t anchor = 0;
  for (std::size_t k = 1; k < recs.size(); ++k) {
    if (!recs[k].control_triggered && recs[k].steps_since_control <= params.b &&
        recs[k].epsilon > params.gamma)
      ++control_viol;

    if (recs[k].adaptation_triggered) {
      anchor = k;
      continue;
    }
    const double v_k = recs[k].V_a;
    const double v_prev = recs[k - 1].V_a;
    if ((v_k - v_prev) + params.beta * v_prev > params.sigma) ++adapt_viol;

    const double decay = std::pow(1.0 - params.beta,
                                  static_cast<double>(k - anchor));
    const double bound = decay * recs[anchor].V_a +
                         (params.sigma / params.beta) * (1.0 - decay);
    if (v_k > bound + 1e-12) ++decay_viol;
  }
  char buf[160];
  std::snprintf(buf, sizeof(buf),
                "%zu steps, violations: control %d, adaptation %d, decay %d",
                recs.size(), control_viol, adapt_viol, decay_viol);
  detail = buf;
  return control_viol == 0 && adapt_viol == 0 && decay_viol == 0;
}

int total_events(const Metrics& m) {
  return m.adaptation_events + m.control_events;
}

bool soft_landing(const Metrics& m) {
  return m.terminal_altitude == 0.05 && std::abs(m.terminal_velocity) <= 0.05;
}

}  // namespace

int main() {
  std::printf("acceptance: training the nominal Koopman model (100 x 150)\n");
  const RunConfig base = headline_config(Mode::Etac);
  const KoopmanModel model = train_model(base);

  criterion_edmd();
  criterion_qp();
  criterion_plant();
  criterion_lemma1();

  // headline ETAC run, reused by criteria 5, 6, 7, 8
  const auto t_run = std::chrono::steady_clock::now();
  const RunResult etac = run_closed_loop(base, model);
  const double etac_elapsed = seconds_since(t_run);
  const Metrics m_etac = compute_metrics(etac);

  {
    std::string detail;
    const bool head_ok = trigger_soundness(etac, base.trigger_params(2), detail);
    const RunResult nominal = run_closed_loop(nominal_config(), model);
    std::string detail2;
    const bool nom_ok =
        trigger_soundness(nominal, nominal_config().trigger_params(2), detail2);
    report(5, "non-triggered steps satisfy both inequalities + decay bound",
           head_ok && nom_ok, detail);
  }

  {
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "rmse %.4f, |v_T| %.4f m/s, h_T %.3f m, T %.2f s, %.2f s wall",
                  m_etac.rmse_last4s, std::abs(m_etac.terminal_velocity),
                  m_etac.terminal_altitude, m_etac.terminal_time, etac_elapsed);
    const bool ok = etac.touched_down && m_etac.rmse_last4s <= 0.03 &&
                    std::abs(m_etac.terminal_velocity) <= 0.05 &&
                    m_etac.terminal_altitude == 0.05 &&
                    m_etac.terminal_time >= 12.0 && m_etac.terminal_time <= 25.0 &&
                    etac_elapsed < 10.0;
    report(6, "ETAC soft landing with noise, ground effect and platform", ok,
           detail);
  }

  const RunResult ttac = run_closed_loop(headline_config(Mode::Ttac), model);
  const Metrics m_ttac = compute_metrics(ttac);
  {
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "events %d vs %d (ratio %.3f), rmse %.4f vs %.4f",
                  total_events(m_etac), total_events(m_ttac),
                  static_cast<double>(total_events(m_etac)) /
                      std::max(1, total_events(m_ttac)),
                  m_etac.rmse_last4s, m_ttac.rmse_last4s);
    const bool ok =
        total_events(m_etac) <= 0.8 * total_events(m_ttac) &&
        m_etac.rmse_last4s <= 2.0 * m_ttac.rmse_last4s;
    report(7, "ETAC saves >= 20% of events at <= 2x the TTAC rmse", ok, detail);
  }

  const RunResult etc_run = run_closed_loop(headline_config(Mode::Etc), model);
  const Metrics m_etc = compute_metrics(etc_run);
  {
    char detail[200];
    std::snprintf(detail, sizeof(detail),
                  "etc rmse %.4f (%.1fx etac), touched_down %d, |v_T| %.4f",
                  m_etc.rmse_last4s, m_etc.rmse_last4s / m_etac.rmse_last4s,
                  etc_run.touched_down ? 1 : 0,
                  std::abs(m_etc.terminal_velocity));
    const bool ok = m_etc.rmse_last4s >= 3.0 * m_etac.rmse_last4s ||
                    !soft_landing(m_etc);
    report(8, "removing adaptation degrades the landing", ok, detail);
  }

  {
    bool all_ok = true;
    char detail[240];
    std::string parts;
    for (double h0 : {5.0, 8.0}) {
      for (double v0 : {1.0, 0.0, -1.0}) {
        RunConfig cfg = headline_config(Mode::Etac);
        cfg.h0 = h0;
        cfg.v0 = v0;
        const RunResult r = run_closed_loop(cfg, model);
        const Metrics m = compute_metrics(r);
        const bool ok = r.touched_down && m.rmse_last4s <= 0.03 &&
                        std::abs(m.terminal_velocity) <= 0.05 &&
                        m.terminal_altitude == 0.05;
        all_ok = all_ok && ok;
        char part[48];
        std::snprintf(part, sizeof(part), "%s(%g,%g)", ok ? "" : "!", h0, v0);
        parts += part;
        parts += " ";
      }
    }
    std::snprintf(detail, sizeof(detail), "landed: %s", parts.c_str());
    report(9, "all six initial conditions land softly under ETAC", all_ok,
           detail);
  }

  {
    const RunConfig cfg = nominal_config();
    const RunResult r = run_closed_loop(cfg, model);
    const double bound =
        2.0 * std::sqrt(cfg.trigger_sigma / cfg.trigger_beta);
    double worst = 0.0;
    const double settle = r.final_state.t * 0.5;
    for (std::size_t k = 0; k < r.trajectory.size(); ++k) {
      const auto& row = r.trajectory[k];
      if (row.t < settle) continue;
      worst = std::max(worst, std::abs(row.x_meas - row.x_pred));
    }
    char detail[160];
    std::snprintf(detail, sizeof(detail),
                  "steady-state |e| max %.3e vs bound %.3e", worst, bound);
    report(10, "nominal prediction error settles under 2 sqrt(sigma/beta)",
           worst <= bound, detail);
  }

  if (g_failures == 0)
    std::printf("acceptance: all criteria passed\n");
  else
    std::printf("acceptance: %d criterion(s) FAILED\n", g_failures);
  return g_failures == 0 ? 0 : 1;
}
