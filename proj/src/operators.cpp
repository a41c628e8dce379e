#include "smpc/operators.hpp"

#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

#include <Eigen/SparseCholesky>
#include <unsupported/Eigen/SparseExtra>

namespace smpc {

namespace {

void require(bool cond, const std::string& what) {
  if (!cond) throw std::runtime_error("SwitchedOperatorSet: " + what);
}

bool is_spd(const SpMat& S, double sym_tol = 1e-10) {
  SpMat D = S - SpMat(S.transpose());
  double scale = S.coeffs().size() ? S.coeffs().cwiseAbs().maxCoeff() : 0.0;
  if (D.coeffs().size() && D.coeffs().cwiseAbs().maxCoeff() > sym_tol * std::max(1.0, scale))
    return false;
  Eigen::SimplicialLLT<SpMat> llt(S);
  return llt.info() == Eigen::Success;
}

} // namespace

void SwitchedOperatorSet::validate(unsigned seed) const {
  require(num_modes >= 1, "need at least one mode");
  require(static_cast<int>(M.size()) == num_modes, "mass count != L");
  require(static_cast<int>(A.size()) == num_modes, "stiffness count != L");
  require(static_cast<int>(B.size()) == num_modes, "input count != L");
  require(static_cast<int>(C.size()) == num_modes, "output count != L");
  for (int i = 0; i < num_modes; ++i) {
    require(M[i].rows() == dim && M[i].cols() == dim, "mass dimension mismatch");
    require(A[i].rows() == dim && A[i].cols() == dim, "stiffness dimension mismatch");
    require(B[i].rows() == dim && B[i].cols() == num_inputs, "input map dimension mismatch");
    require(C[i].rows() == num_outputs && C[i].cols() == dim, "output map dimension mismatch");
    require(is_spd(M[i]), "mass matrix of mode " + std::to_string(i + 1) + " is not SPD");
  }
  require(v_inner.rows() == dim && v_inner.cols() == dim, "v_inner dimension mismatch");
  require(is_spd(v_inner), "v_inner is not SPD");

  // Coercivity of A_i w.r.t. v_inner, probed on seeded random vectors.
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  for (int i = 0; i < num_modes; ++i) {
    for (int trial = 0; trial < 32; ++trial) {
      Vec v(dim);
      for (int k = 0; k < dim; ++k) v[k] = gauss(rng);
      const double quad = v.dot(A[i] * v); // = v^T sym(A_i) v
      const double ref = v.dot(v_inner * v);
      require(quad > -1e-12 * ref,
              "stiffness of mode " + std::to_string(i + 1) + " fails coercivity probe");
    }
  }

  if (!transitions.empty()) {
    require(static_cast<int>(transitions.size()) == num_modes * num_modes,
            "transition table must have L*L entries");
    for (int i = 0; i < num_modes; ++i) {
      SpMat I(dim, dim);
      I.setIdentity();
      SpMat D = transitions[static_cast<std::size_t>(i * num_modes + i)] - I;
      double err = D.coeffs().size() ? D.coeffs().cwiseAbs().maxCoeff() : 0.0;
      require(err <= 1e-12, "diagonal transition K_{i,i} is not the identity");
    }
  }
}

namespace {

std::string mode_file(const std::string& dir, const char* stem, int mode) {
  return dir + "/" + stem + "_" + std::to_string(mode) + ".mtx";
}

} // namespace

void save_operator_set(const SwitchedOperatorSet& ops, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  for (int i = 1; i <= ops.num_modes; ++i) {
    Eigen::saveMarket(ops.mass(i), mode_file(dir, "M", i));
    Eigen::saveMarket(ops.stiffness(i), mode_file(dir, "A", i));
    Eigen::saveMarket(ops.input(i), mode_file(dir, "B", i));
    SpMat Cs = ops.output(i).sparseView(1.0, 0.0); // keep all stored values
    Cs.conservativeResize(ops.num_outputs, ops.dim);
    Eigen::saveMarket(Cs, mode_file(dir, "C", i));
  }
  Eigen::saveMarket(ops.v_inner, dir + "/v_inner.mtx");
  if (!ops.transitions.empty())
    for (int i = 0; i < ops.num_modes; ++i)
      for (int j = 0; j < ops.num_modes; ++j)
        Eigen::saveMarket(ops.transitions[static_cast<std::size_t>(i * ops.num_modes + j)],
                          dir + "/K_" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + ".mtx");

  std::ofstream meta(dir + "/metadata.txt");
  if (!meta) throw std::runtime_error("save_operator_set: cannot write metadata in " + dir);
  meta << "num_modes " << ops.num_modes << "\n"
       << "dim " << ops.dim << "\n"
       << "num_inputs " << ops.num_inputs << "\n"
       << "num_outputs " << ops.num_outputs << "\n"
       << "identity_transitions " << (ops.identity_transitions() ? 1 : 0) << "\n";
}

SwitchedOperatorSet load_operator_set(const std::string& dir) {
  std::ifstream meta(dir + "/metadata.txt");
  if (!meta) throw std::runtime_error("load_operator_set: missing metadata in " + dir);
  SwitchedOperatorSet ops;
  int identity_flag = 1;
  std::string key;
  while (meta >> key) {
    if (key == "num_modes") meta >> ops.num_modes;
    else if (key == "dim") meta >> ops.dim;
    else if (key == "num_inputs") meta >> ops.num_inputs;
    else if (key == "num_outputs") meta >> ops.num_outputs;
    else if (key == "identity_transitions") meta >> identity_flag;
    else { std::string skip; std::getline(meta, skip); }
  }
  if (ops.num_modes < 1 || ops.dim < 1)
    throw std::runtime_error("load_operator_set: corrupt metadata in " + dir);

  ops.M.resize(static_cast<std::size_t>(ops.num_modes));
  ops.A.resize(static_cast<std::size_t>(ops.num_modes));
  ops.B.resize(static_cast<std::size_t>(ops.num_modes));
  ops.C.resize(static_cast<std::size_t>(ops.num_modes));
  for (int i = 0; i < ops.num_modes; ++i) {
    if (!Eigen::loadMarket(ops.M[i], mode_file(dir, "M", i + 1)) ||
        !Eigen::loadMarket(ops.A[i], mode_file(dir, "A", i + 1)) ||
        !Eigen::loadMarket(ops.B[i], mode_file(dir, "B", i + 1)))
      throw std::runtime_error("load_operator_set: missing operator file for mode " + std::to_string(i + 1));
    SpMat Cs;
    if (!Eigen::loadMarket(Cs, mode_file(dir, "C", i + 1)))
      throw std::runtime_error("load_operator_set: missing output map for mode " + std::to_string(i + 1));
    ops.C[i] = Mat(Cs);
  }
  if (!Eigen::loadMarket(ops.v_inner, dir + "/v_inner.mtx"))
    throw std::runtime_error("load_operator_set: missing v_inner");
  if (!identity_flag) {
    ops.transitions.resize(static_cast<std::size_t>(ops.num_modes * ops.num_modes));
    for (int i = 0; i < ops.num_modes; ++i)
      for (int j = 0; j < ops.num_modes; ++j)
        if (!Eigen::loadMarket(ops.transitions[static_cast<std::size_t>(i * ops.num_modes + j)],
                               dir + "/K_" + std::to_string(i + 1) + "_" + std::to_string(j + 1) + ".mtx"))
          throw std::runtime_error("load_operator_set: missing transition matrix");
  }
  return ops;
}

} // namespace smpc
