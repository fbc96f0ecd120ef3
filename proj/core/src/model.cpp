#include "etac/model.hpp"

#include <fstream>
#include <stdexcept>

#include <json.hpp>

namespace etac {

KoopmanModel KoopmanModel::from_nominal(const Mat& A, const Mat& B, int n) {
  if (A.rows() != A.cols()) throw std::invalid_argument("A must be square");
  if (B.rows() != A.rows()) throw std::invalid_argument("A/B row mismatch");
  const int q = static_cast<int>(A.rows());
  if (n < 1 || n > q) throw std::invalid_argument("invalid output dimension");
  KoopmanModel model;
  model.A = A;
  model.B = B;
  model.C = Mat::Zero(n, q);
  model.C.leftCols(n) = Mat::Identity(n, n);
  model.A_hat = A;
  model.B_hat = B;
  model.validate();
  return model;
}

void KoopmanModel::validate() const {
  const int qd = q();
  if (A.rows() != qd || A.cols() != qd) throw std::invalid_argument("bad A dims");
  if (B.rows() != qd) throw std::invalid_argument("bad B dims");
  if (C.cols() != qd) throw std::invalid_argument("bad C dims");
  if (A_hat.rows() != qd || A_hat.cols() != qd || B_hat.rows() != qd ||
      B_hat.cols() != B.cols())
    throw std::invalid_argument("adapted estimate dims mismatch");
  Mat expected = Mat::Zero(C.rows(), qd);
  expected.leftCols(C.rows()) = Mat::Identity(C.rows(), C.rows());
  if ((C - expected).cwiseAbs().maxCoeff() != 0.0)
    throw std::invalid_argument("C must be [I 0]");
  if (!A.allFinite() || !B.allFinite() || !A_hat.allFinite() || !B_hat.allFinite())
    throw std::invalid_argument("model contains non-finite entries");
}

namespace {

nlohmann::json matrix_to_json(const Mat& M) {
  nlohmann::json out = nlohmann::json::array();
  for (Eigen::Index r = 0; r < M.rows(); ++r)
    for (Eigen::Index c = 0; c < M.cols(); ++c) out.push_back(M(r, c));
  return out;
}

Mat matrix_from_json(const nlohmann::json& arr, int rows, int cols,
                     const char* name) {
  if (static_cast<int>(arr.size()) != rows * cols)
    throw std::runtime_error(std::string("model json: bad size for ") + name);
  Mat M(rows, cols);
  int idx = 0;
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = arr.at(idx++).get<double>();
  return M;
}

}  // namespace

void save_model(const KoopmanModel& model, const std::string& path) {
  model.validate();
  nlohmann::json j;
  j["q"] = model.q();
  j["m"] = model.m();
  j["A"] = matrix_to_json(model.A);
  j["B"] = matrix_to_json(model.B);
  j["C"] = matrix_to_json(model.C);
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write model file: " + path);
  out << j.dump(2) << "\n";
}

KoopmanModel load_model(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open model file: " + path);
  nlohmann::json j;
  in >> j;
  const int q = j.at("q").get<int>();
  const int m = j.at("m").get<int>();
  if (q < 1 || m < 1) throw std::runtime_error("model json: bad dims");
  Mat A = matrix_from_json(j.at("A"), q, q, "A");
  Mat B = matrix_from_json(j.at("B"), q, m, "B");
  const int n = static_cast<int>(j.at("C").size()) / q;
  KoopmanModel model = KoopmanModel::from_nominal(A, B, n);
  Mat C = matrix_from_json(j.at("C"), n, q, "C");
  if ((C - model.C).cwiseAbs().maxCoeff() != 0.0)
    throw std::runtime_error("model json: C is not [I 0]");
  return model;
}

}  // namespace etac
