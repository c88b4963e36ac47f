#pragma once

#include "ren/iqc.hpp"
#include "ren/types.hpp"

namespace ren {

// W = 2 Lambda - Lambda D11 - D11^T Lambda.
Matrix wellposedness_matrix(const Matrix& D11, const Vector& lambda);

// [[alpha P, -C1^T L], [-L C1, W]] - [A^T; B1^T] P [A, B1].
Matrix contraction_lmi_matrix(const ExplicitModel& m, const Matrix& P, const Vector& lambda,
                              double alpha = 1.0);

// Explicit incremental-IQC block matrix over (x, w, u).
Matrix iqc_lmi_matrix(const ExplicitModel& m, const IqcSpec& iqc, const Matrix& P,
                      const Vector& lambda);

// R + S D22 + D22^T S^T + D22^T Q D22.
Matrix feedthrough_matrix(const Matrix& D22, const IqcSpec& iqc);

}  // namespace ren
