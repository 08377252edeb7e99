#include "spinid/operators.hpp"

#include <unsupported/Eigen/KroneckerProduct>

#include "spinid/errors.hpp"
#include "spinid/units.hpp"

namespace spinid {

namespace ops {

using std::complex;

Mat2 sx() {
    Mat2 m;
    m << 0.0, 0.5, 0.5, 0.0;
    return m;
}

Mat2 sy() {
    Mat2 m;
    m << 0.0, complex<double>(0, -0.5), complex<double>(0, 0.5), 0.0;
    return m;
}

Mat2 sz() {
    Mat2 m;
    m << 0.5, 0.0, 0.0, -0.5;
    return m;
}

Mat2 id2() { return Mat2::Identity(); }

MatX kron(const MatX& a, const MatX& b) {
    return Eigen::kroneckerProduct(a, b).eval();
}

Mat8 probe(const Mat2& op) {
    return kron(op, kron(id2(), id2()));
}

Mat8 electron(const Mat2& op) {
    return kron(id2(), kron(op, id2()));
}

Mat8 nucleus(const Mat2& op) {
    return kron(id2(), kron(id2(), op));
}

Mat4 pair_op(const Mat2& e_op, const Mat2& n_op) {
    return kron(e_op, n_op);
}

Mat8 lift_defect(const Mat4& op) {
    return kron(id2(), op);
}

Mat4 bell_transform() {
    // Generator 2 Sy Ix; rotation angle pi/2.
    const Mat4 g = 2.0 * pair_op(sy(), sx());
    Eigen::SelfAdjointEigenSolver<Mat4> es(g);
    Mat4 phases = Mat4::Zero();
    for (int i = 0; i < 4; ++i) {
        phases(i, i) = std::exp(complex<double>(0, -0.5 * kPi * es.eigenvalues()(i)));
    }
    return es.eigenvectors() * phases * es.eigenvectors().adjoint();
}

} // namespace ops

double hermiticity_defect(const MatX& h) {
    return (h - h.adjoint()).cwiseAbs().maxCoeff();
}

MatX expm_hermitian_propagator(const MatX& h, double t_us, double herm_tol) {
    if (h.rows() != h.cols()) {
        throw ValidationError("propagator: Hamiltonian must be square");
    }
    if (hermiticity_defect(h) > herm_tol * std::max(1.0, h.cwiseAbs().maxCoeff())) {
        throw ValidationError("propagator: Hamiltonian is not Hermitian");
    }
    Eigen::SelfAdjointEigenSolver<MatX> es(h);
    if (es.info() != Eigen::Success) {
        throw ConvergenceError("propagator: eigendecomposition failed", 0.0);
    }
    const auto& v = es.eigenvectors();
    Eigen::VectorXcd phases(h.rows());
    for (Eigen::Index i = 0; i < h.rows(); ++i) {
        phases(i) = std::exp(std::complex<double>(0, -2.0 * kPi * es.eigenvalues()(i) * t_us));
    }
    return v * phases.asDiagonal() * v.adjoint();
}

} // namespace spinid
