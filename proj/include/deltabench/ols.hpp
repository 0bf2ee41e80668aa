#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <string>
#include <vector>

#include "error.hpp"

namespace deltabench {

struct FitResult {
    std::vector<std::string> names;
    std::vector<double> coefficients;
    std::vector<double> standard_errors;
    double residual_sse = 0.0;
    long n_samples = 0;
    int iterations = 0;  ///< nonlinear fits only
};

/// Least squares without implicit intercept via column-pivoting QR.
/// Standard errors from sigma^2 (X'X)^-1 with sigma^2 = SSE / (n - p).
inline FitResult ols(const Eigen::MatrixXd& X, const Eigen::VectorXd& y, const std::vector<std::string>& names,
                     const std::string& what = "regression") {
    const auto n = X.rows();
    const auto p = X.cols();
    if (static_cast<std::size_t>(p) != names.size()) throw FitError(what + ": column/name count mismatch");
    if (p == 0) throw FitError(what + ": no regressors");
    if (n < 2 * p)
        throw FitError(what + ": " + std::to_string(n) + " samples for " + std::to_string(p) +
                       " coefficients (need at least 2 per coefficient)");
    if (!X.allFinite() || !y.allFinite()) throw FitError(what + ": non-finite values in the design");

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(X);
    qr.setThreshold(1e-10);
    if (qr.rank() < p) {
        std::string cols;
        const auto& perm = qr.colsPermutation().indices();
        for (Eigen::Index k = qr.rank(); k < p; ++k) {
            if (!cols.empty()) cols += ", ";
            cols += names[static_cast<std::size_t>(perm[k])];
        }
        throw FitError(what + ": rank-deficient design, collinear column(s): " + cols);
    }
    const Eigen::VectorXd beta = qr.solve(y);
    const Eigen::VectorXd resid = y - X * beta;

    // (X'X)^-1 = P R^-1 R^-T P'
    const Eigen::MatrixXd R = qr.matrixR().topLeftCorner(p, p).template triangularView<Eigen::Upper>();
    const Eigen::MatrixXd Rinv =
        R.template triangularView<Eigen::Upper>().solve(Eigen::MatrixXd::Identity(p, p));
    const Eigen::MatrixXd cov_perm = Rinv * Rinv.transpose();
    const Eigen::MatrixXd cov = qr.colsPermutation() * cov_perm * qr.colsPermutation().transpose();

    FitResult out;
    out.names = names;
    out.residual_sse = resid.squaredNorm();
    out.n_samples = static_cast<long>(n);
    const double sigma2 = n > p ? out.residual_sse / static_cast<double>(n - p) : 0.0;
    for (Eigen::Index j = 0; j < p; ++j) {
        out.coefficients.push_back(beta[j]);
        out.standard_errors.push_back(std::sqrt(std::max(sigma2 * cov(j, j), 0.0)));
    }
    return out;
}

} // namespace deltabench
