#pragma once

#include <Eigen/Dense>

#include <random>
#include <string>

namespace ren {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrize(const Matrix& a) { return 0.5 * (a + a.transpose()); }

// Smallest eigenvalue of the symmetric part of `a`.
double min_eigenvalue(const Matrix& a);

// True when sym(a) - shift*I admits a Cholesky factorization.
bool is_positive_definite(const Matrix& a, double shift = 0.0);

double spectral_radius(const Matrix& a);
double spectral_norm(const Matrix& a);

// Lower-triangular L with L*L^T = sym(a); throws NumericalError if `what`
// is not positive definite.
Matrix cholesky_lower(const Matrix& a, const std::string& what);

// Solves a*x = b with partial pivoting; throws NumericalError when the
// reciprocal condition estimate falls below `rcond_min`.
Matrix solve_checked(const Matrix& a, const Matrix& b, const std::string& what,
                     double rcond_min = 1e-14);

bool all_finite(const Matrix& a);

// Dense Gaussian draw with the given standard deviation.
Matrix gaussian(Eigen::Index rows, Eigen::Index cols, double stddev,
                std::mt19937_64& rng);

}  // namespace ren
