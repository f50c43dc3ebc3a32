#include "nefep/crossentropy.hpp"

#include <Eigen/Eigenvalues>

namespace nefep {

void CESystem::validate(double tol_scale) const {
    if (A.rows() != A.cols() || A.rows() != R.size())
        throw ConfigError("CESystem: shape mismatch");
    const double scale = A.norm();
    if ((A - A.transpose()).norm() > 1e-12 * std::max(1.0, scale))
        throw NumericsError("CESystem: A is not symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(A);
    if (es.eigenvalues().minCoeff() < -tol_scale * std::max(1.0, scale))
        throw NumericsError("CESystem: A has a significantly negative eigenvalue");
}

namespace detail {

CESystem finalize_ce(const Mat& A_acc, const Vec& R_acc, std::size_t n, int k) {
    if (n < static_cast<std::size_t>(k))
        throw NumericsError("assemble_system: fewer samples (" + std::to_string(n) +
                            ") than ansatz functions (" + std::to_string(k) +
                            "); system is ill-posed");
    CESystem sys;
    const double inv_n = 1.0 / static_cast<double>(n);
    sys.A = 0.5 * (A_acc + A_acc.transpose()) * inv_n;  // enforce symmetry
    sys.R = R_acc * inv_n;
    sys.n_samples = n;
    Eigen::SelfAdjointEigenSolver<Mat> es(sys.A);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    sys.condition_estimate =
        lmin > 0.0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    return sys;
}

}  // namespace detail

SolveResult solve_system(const CESystem& sys, double ridge) {
    const int k = static_cast<int>(sys.R.size());
    if (k < 1) throw ConfigError("solve_system: empty system");
    if (ridge < 0.0) ridge = 1e-8 * sys.A.trace() / static_cast<double>(k);

    Mat M = sys.A + ridge * Mat::Identity(k, k);
    Eigen::SelfAdjointEigenSolver<Mat> es(M);
    const double lmin = es.eigenvalues().minCoeff();
    const double lmax = es.eigenvalues().maxCoeff();
    if (!(lmin > 0.0) || lmax / lmin > 1e14)
        throw NumericsError("solve_system: system numerically singular even with ridge " +
                            std::to_string(ridge));
    SolveResult out;
    out.omega = M.ldlt().solve(sys.R);
    out.ridge = ridge;
    out.condition = lmax / lmin;
    return out;
}

}  // namespace nefep
