#pragma once

#include <Eigen/Core>

namespace kfe {

/// Eigen-decomposition of a symmetric 3x3 matrix.
/// Eigenvalues are ordered descending; vectors[i] (column i) pairs with values[i].
struct SymEigen3 {
  Eigen::Vector3d values;   // values[0] >= values[1] >= values[2]
  Eigen::Matrix3d vectors;  // orthonormal columns
};

/// Closed-form symmetric 3x3 eigensolver (trigonometric Cardano for the
/// characteristic roots, cross-product eigenvectors) with a Householder
/// tridiagonalization + implicit-shift QL fallback when the analytic vectors
/// lose orthogonality near repeated eigenvalues.
/// Throws std::invalid_argument if the input is asymmetric beyond tolerance.
SymEigen3 eigen3(const Eigen::Matrix3d& m);

/// Eigenvalues only (descending), same analytic path.
Eigen::Vector3d eigenvalues3(const Eigen::Matrix3d& m);

inline double lambda_min(const Eigen::Matrix3d& m) { return eigenvalues3(m)[2]; }
inline double lambda_max(const Eigen::Matrix3d& m) { return eigenvalues3(m)[0]; }

}  // namespace kfe
