#pragma once

#include <Eigen/Dense>
#include <complex>

// Spin-1/2 operator algebra on the 8-dimensional register
//   probe(2) (x) defect-electron(2) (x) defect-nucleus(2).
// All Hamiltonians are in MHz; propagation is U = exp(-i 2*pi H t), t in us.

namespace spinid {

using Mat2 = Eigen::Matrix2cd;
using Mat4 = Eigen::Matrix4cd;
using Mat8 = Eigen::Matrix<std::complex<double>, 8, 8>;
using MatX = Eigen::MatrixXcd;

namespace ops {

/// Pauli/2 operators on a single spin-1/2.
Mat2 sx();
Mat2 sy();
Mat2 sz();
Mat2 id2();

MatX kron(const MatX& a, const MatX& b);

// Register operators (8x8): probe electron, defect electron, defect nucleus.
Mat8 probe(const Mat2& op);
Mat8 electron(const Mat2& op);
Mat8 nucleus(const Mat2& op);

/// Two-spin operators on the defect subspace (4x4), electron (x) nucleus.
Mat4 pair_op(const Mat2& e_op, const Mat2& n_op);

/// Lift a 4x4 defect-subspace operator to the full register.
Mat8 lift_defect(const Mat4& op);

/// Bell transform U_b = exp(-i (pi/2) 2 Sy Ix) on the defect subspace.
Mat4 bell_transform();

} // namespace ops

/// exp(-i 2*pi H t) for Hermitian H via eigendecomposition (exact for
/// piecewise-constant blocks). Throws on non-Hermitian input or solver failure.
MatX expm_hermitian_propagator(const MatX& h, double t_us, double herm_tol = 1e-9);

/// || H - H^dagger ||_max
double hermiticity_defect(const MatX& h);

} // namespace spinid
