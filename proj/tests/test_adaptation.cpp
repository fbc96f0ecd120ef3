#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "etac/adaptation.hpp"
#include "test_util.hpp"

using namespace etac;

namespace {

KoopmanModel identity_model() {
  return KoopmanModel::from_nominal(Mat::Identity(2, 2), Mat::Zero(2, 1));
}

double window_residual(const AdaptationWindow& w, const Mat& dA, const Mat& dB) {
  // Frobenius residual of the weighted objective ||DZ - [dA dB] S||_F.
  double sq = 0.0;
  const int n = w.size();
  for (int j = 0; j < n; ++j) {
    const auto& e = w.entry(j);
    const double weight = std::pow(w.forgetting(), n - 1 - j);
    const Vec r = weight * e.dz - (dA * e.z_prev + dB * e.u_prev);
    sq += r.squaredNorm();
  }
  return sq;
}

}  // namespace

TEST_CASE("prediction error uses the current adapted estimate") {
  KoopmanModel model = identity_model();
  Vec z_prev(2);
  z_prev << 1.0, 1.0;
  const Vec u = Vec::Constant(1, 5.0);
  Vec z_obs(2);
  z_obs << 1.2, 1.4;

  const Vec dz = prediction_error(model, z_prev, u, z_obs);
  CHECK(dz(0) == doctest::Approx(0.2).epsilon(1e-14));
  CHECK(dz(1) == doctest::Approx(0.4).epsilon(1e-14));

  SUBCASE("exact model gives zero error") {
    const Vec exact = model.A_hat * z_prev + model.B_hat * u;
    CHECK(prediction_error(model, z_prev, u, exact).norm() == 0.0);
  }

  SUBCASE("error is measured against A_hat, not the nominal A") {
    model.A_hat = 2.0 * Mat::Identity(2, 2);
    const Vec dz2 = prediction_error(model, z_prev, u, z_obs);
    CHECK(dz2(0) == doctest::Approx(1.2 - 2.0).epsilon(1e-14));
  }

  SUBCASE("dimension mismatch") {
    CHECK_THROWS_AS(prediction_error(model, Vec::Zero(3), u, z_obs),
                    std::invalid_argument);
  }
}

TEST_CASE("pseudo inverse") {
  SUBCASE("identity") {
    CHECK((pseudo_inverse(Mat::Identity(3, 3)) - Mat::Identity(3, 3)).norm() <=
          1e-14);
  }

  SUBCASE("column vector") {
    const Mat v = Mat::Constant(3, 1, 1.0);
    const Mat pinv = pseudo_inverse(v);
    REQUIRE(pinv.rows() == 1);
    REQUIRE(pinv.cols() == 3);
    for (int i = 0; i < 3; ++i)
      CHECK(pinv(0, i) == doctest::Approx(1.0 / 3.0).epsilon(1e-14));
  }

  SUBCASE("zero matrix maps to zero") {
    CHECK(pseudo_inverse(Mat::Zero(4, 2)).norm() == 0.0);
  }

  SUBCASE("Penrose identities on random matrices up to 8x8") {
    std::mt19937_64 rng(21);
    for (int trial = 0; trial < 200; ++trial) {
      const int r = 1 + static_cast<int>(rng() % 8);
      const int c = 1 + static_cast<int>(rng() % 8);
      const Mat M = test::random_mat(r, c, rng);
      const Mat P = pseudo_inverse(M);
      CHECK((M * P * M - M).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK((P * M * P - P).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(((M * P).transpose() - M * P).cwiseAbs().maxCoeff() <= 1e-10);
      CHECK(((P * M).transpose() - P * M).cwiseAbs().maxCoeff() <= 1e-10);
    }
  }
}

TEST_CASE("single-step update") {
  SUBCASE("zero error gives a zero update") {
    Vec z(2);
    z << 1.0, 2.0;
    const ModelUpdate u = compute_update_single(z, Vec::Constant(1, 0.5), Vec::Zero(2));
    CHECK(u.dA.norm() == 0.0);
    CHECK(u.dB.norm() == 0.0);
  }

  SUBCASE("worked rank-one example") {
    Vec z(2);
    z << 1.0, 1.0;
    const Vec u_in = Vec::Constant(1, 1.0);
    Vec dz(2);
    dz << 0.3, 0.3;
    const ModelUpdate upd = compute_update_single(z, u_in, dz);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j)
        CHECK(upd.dA(i, j) == doctest::Approx(0.1).epsilon(1e-14));
      CHECK(upd.dB(i, 0) == doctest::Approx(0.1).epsilon(1e-14));
    }
    CHECK((upd.dA * z + upd.dB * u_in - dz).norm() <= 1e-14);
  }

  SUBCASE("zero regressor yields a zero update") {
    const ModelUpdate u =
        compute_update_single(Vec::Zero(2), Vec::Zero(1), Vec::Constant(2, 1.0));
    CHECK(u.dA.norm() == 0.0);
    CHECK(u.dB.norm() == 0.0);
  }

  SUBCASE("residual is exactly cancelled for any nonzero regressor") {
    std::mt19937_64 rng(33);
    for (int trial = 0; trial < 1000; ++trial) {
      const Vec z = test::random_vec(2, rng);
      const Vec u_in = test::random_vec(1, rng);
      const Vec dz = test::random_vec(2, rng);
      if (z.norm() + u_in.norm() == 0.0) continue;
      const ModelUpdate upd = compute_update_single(z, u_in, dz);
      CHECK((dz - upd.dA * z - upd.dB * u_in).norm() <= 1e-12);
    }
  }
}

TEST_CASE("windowed update") {
  SUBCASE("a single-entry window reduces to the single-step update") {
    AdaptationWindow w(5, 0.37);
    std::mt19937_64 rng(2);
    const Vec z = test::random_vec(2, rng);
    const Vec u_in = test::random_vec(1, rng);
    const Vec dz = test::random_vec(2, rng);
    w.push(z, u_in, dz);
    const ModelUpdate a = compute_update_windowed(w);
    const ModelUpdate b = compute_update_single(z, u_in, dz);
    CHECK((a.dA - b.dA).norm() <= 1e-12);
    CHECK((a.dB - b.dB).norm() <= 1e-12);
  }

  SUBCASE("all-zero errors give a zero update") {
    AdaptationWindow w(4, 0.9);
    std::mt19937_64 rng(3);
    for (int j = 0; j < 4; ++j)
      w.push(test::random_vec(2, rng), test::random_vec(1, rng), Vec::Zero(2));
    const ModelUpdate u = compute_update_windowed(w);
    CHECK(u.dA.norm() <= 1e-14);
    CHECK(u.dB.norm() <= 1e-14);
  }

  SUBCASE("matches the dense normal-equations oracle on full-rank windows") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 100; ++trial) {
      const int w_len = 4 + static_cast<int>(rng() % 5);  // > q + m rows
      AdaptationWindow w(w_len, 0.95);
      Mat S(3, w_len);
      Mat dZ(2, w_len);
      for (int j = 0; j < w_len; ++j) {
        const Vec z = test::random_vec(2, rng);
        const Vec u_in = test::random_vec(1, rng);
        const Vec dz = test::random_vec(2, rng);
        w.push(z, u_in, dz);
        S.col(j).head(2) = z;
        S.col(j).tail(1) = u_in;
        dZ.col(j) = std::pow(0.95, w_len - 1 - j) * dz;
      }
      const Mat X = dZ * S.transpose() * (S * S.transpose()).inverse();
      const ModelUpdate upd = compute_update_windowed(w);
      Mat got(2, 3);
      got << upd.dA, upd.dB;
      CHECK((got - X).cwiseAbs().maxCoeff() <= 1e-9);
    }
  }

  SUBCASE("beats random candidates of the same scale") {
    std::mt19937_64 rng(9);
    AdaptationWindow w(3, 0.9);
    for (int j = 0; j < 3; ++j)
      w.push(test::random_vec(2, rng), test::random_vec(1, rng),
             test::random_vec(2, rng));
    const ModelUpdate upd = compute_update_windowed(w);
    const double r_star = window_residual(w, upd.dA, upd.dB);
    const double scale = std::max(1.0, std::sqrt(upd.dA.squaredNorm() +
                                                 upd.dB.squaredNorm()));
    for (int trial = 0; trial < 1000; ++trial) {
      const Mat cA = test::random_mat(2, 2, rng, scale);
      const Mat cB = test::random_mat(2, 1, rng, scale);
      CHECK(r_star <= window_residual(w, cA, cB) + 1e-12);
    }
  }

  SUBCASE("finite-difference stationarity at the returned update") {
    std::mt19937_64 rng(10);
    AdaptationWindow w(6, 0.9);
    for (int j = 0; j < 6; ++j)
      w.push(test::random_vec(2, rng), test::random_vec(1, rng),
             test::random_vec(2, rng));
    const ModelUpdate upd = compute_update_windowed(w);

    const double h = 1e-6;
    // central finite-difference gradient norm of the windowed objective
    // at a given point, over all 2x2 + 2x1 entries
    auto fd_grad_norm = [&](const ModelUpdate& at) {
      double sq = 0.0;
      ModelUpdate p = at;
      auto probe = [&](double& slot) {
        const double keep = slot;
        slot = keep + h;
        const double fp = window_residual(w, p.dA, p.dB);
        slot = keep - h;
        const double fm = window_residual(w, p.dA, p.dB);
        slot = keep;
        const double g = (fp - fm) / (2.0 * h);
        sq += g * g;
      };
      for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) probe(p.dA(i, j));
      for (int i = 0; i < 2; ++i) probe(p.dB(i, 0));
      return std::sqrt(sq);
    };

    const double grad_at_solution = fd_grad_norm(upd);
    const double grad_at_zero =
        fd_grad_norm({Mat::Zero(2, 2), Mat::Zero(2, 1)});
    CHECK(grad_at_solution <= 1e-6 * (1.0 + grad_at_zero));
  }

  SUBCASE("ring buffer keeps the latest w entries") {
    AdaptationWindow w(2, 1.0);
    for (int j = 0; j < 5; ++j)
      w.push(Vec::Constant(2, j), Vec::Constant(1, j), Vec::Constant(2, j));
    CHECK(w.size() == 2);
    CHECK(w.entry(0).z_prev(0) == 3.0);
    CHECK(w.entry(1).z_prev(0) == 4.0);
  }

  SUBCASE("empty window rejected") {
    AdaptationWindow w(3, 0.5);
    CHECK_THROWS_AS(compute_update_windowed(w), std::invalid_argument);
  }
}

TEST_CASE("apply_update") {
  SUBCASE("zero update leaves the model unchanged") {
    KoopmanModel model = identity_model();
    const Mat a_before = model.A_hat;
    apply_update(model, {Mat::Zero(2, 2), Mat::Zero(2, 1)});
    apply_update(model, {Mat::Zero(2, 2), Mat::Zero(2, 1)});
    CHECK(model.A_hat == a_before);
    CHECK(model.A_hat == model.A);
  }

  SUBCASE("a single-step update zeroes the residual it was computed from") {
    std::mt19937_64 rng(14);
    KoopmanModel model = identity_model();
    model.A_hat = test::random_mat(2, 2, rng, 0.3);
    model.B_hat = test::random_mat(2, 1, rng, 0.3);
    const Vec z_prev = test::random_vec(2, rng);
    const Vec u_prev = test::random_vec(1, rng);
    const Vec z_obs = test::random_vec(2, rng);

    const Vec dz = prediction_error(model, z_prev, u_prev, z_obs);
    apply_update(model, compute_update_single(z_prev, u_prev, dz));
    CHECK(prediction_error(model, z_prev, u_prev, z_obs).norm() <= 1e-12);
  }

  SUBCASE("nominal matrices are never touched") {
    KoopmanModel model = identity_model();
    const Mat a = model.A, b = model.B;
    apply_update(model, {Mat::Constant(2, 2, 0.5), Mat::Constant(2, 1, -0.25)});
    CHECK(model.A == a);
    CHECK(model.B == b);
    CHECK(model.A_hat(0, 0) == 1.5);
  }

  SUBCASE("non-finite results are rejected and the model kept intact") {
    KoopmanModel model = identity_model();
    const Mat before = model.A_hat;
    ModelUpdate bad{Mat::Constant(2, 2, std::numeric_limits<double>::infinity()),
                    Mat::Zero(2, 1)};
    CHECK_THROWS_AS(apply_update(model, bad), std::runtime_error);
    CHECK(model.A_hat == before);
    CHECK(model.version == 0);
  }
}
