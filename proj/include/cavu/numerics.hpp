#pragma once

#include <vector>

namespace cavu {

// Eigendecomposition of a dense symmetric matrix by cyclic Jacobi rotations.
// Sized for the tiny matrices used here (belief-space Hessians, quadrature
// rules); deterministic and accurate to near machine precision.
// `a` is n*n row-major and is consumed. Eigenvalues come out ascending;
// `eigenvectors` holds the matching eigenvectors as columns (n*n row-major).
void jacobi_eigensym(std::vector<double> a, int n,
                     std::vector<double>& eigenvalues,
                     std::vector<double>& eigenvectors);

// Largest eigenvalue only, same method.
double jacobi_max_eigenvalue(std::vector<double> a, int n);

}  // namespace cavu
