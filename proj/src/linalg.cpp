#include "ren/linalg.hpp"

#include "ren/errors.hpp"

#include <cmath>

namespace ren {

double min_eigenvalue(const Matrix& a) {
  if (a.size() == 0) return std::numeric_limits<double>::infinity();
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrize(a), Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

bool is_positive_definite(const Matrix& a, double shift) {
  if (a.size() == 0) return true;
  Matrix s = symmetrize(a);
  s.diagonal().array() -= shift;
  Eigen::LLT<Matrix> llt(s);
  return llt.info() == Eigen::Success;
}

double spectral_radius(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(a, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

double spectral_norm(const Matrix& a) {
  if (a.size() == 0) return 0.0;
  Eigen::JacobiSVD<Matrix> svd(a);
  return svd.singularValues()(0);
}

Matrix cholesky_lower(const Matrix& a, const std::string& what) {
  Eigen::LLT<Matrix> llt(symmetrize(a));
  if (llt.info() != Eigen::Success) {
    throw NumericalError(what + ": matrix is not positive definite");
  }
  return llt.matrixL();
}

Matrix solve_checked(const Matrix& a, const Matrix& b, const std::string& what,
                     double rcond_min) {
  if (a.rows() == 0) return Matrix(0, b.cols());
  Eigen::PartialPivLU<Matrix> lu(a);
  const double rcond = lu.rcond();
  if (!(rcond > rcond_min)) {
    throw NumericalError(what + ": ill-conditioned (rcond=" + std::to_string(rcond) + ")");
  }
  return lu.solve(b);
}

bool all_finite(const Matrix& a) { return a.allFinite(); }

Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                std::mt19937_64& rng) {
  std::normal_distribution<double> nd(0.0, 1.0);
  Matrix m(rows, cols);
  // Column-major fill keeps draws reproducible independent of Eigen internals.
  for (Eigen::Index j = 0; j < cols; ++j)
    for (Eigen::Index i = 0; i < rows; ++i) m(i, j) = stddev * nd(rng);
  return m;
}

}  // namespace ren
