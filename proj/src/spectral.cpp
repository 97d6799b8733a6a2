#include <cmath>
#include <limits>

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "gridsense/spectral.hpp"

namespace gridsense {

SpectralReport eigen_decompose(const Mat& A, SpectralReport::Source source) {
    const int d = static_cast<int>(A.rows());
    if (A.cols() != d)
        throw Error(Error::Kind::Config, "matrix must be square");
    if (!A.allFinite())
        throw Error(Error::Kind::Config, "matrix has non-finite entries");

    Eigen::EigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success)
        throw Error(Error::Kind::Numerical,
                    "eigenvalue iteration did not converge");

    SpectralReport rep;
    rep.source = source;
    rep.right = es.eigenvectors();
    CVec lam = es.eigenvalues();
    rep.eigenvalues.assign(lam.data(), lam.data() + d);

    double an = std::max(1.0, A.norm());
    for (int i = 0; i < d; ++i) {
        double resid = (A * rep.right.col(i) - lam(i) * rep.right.col(i)).norm();
        if (resid > 1e-8 * an)
            throw Error(Error::Kind::Numerical,
                        "eigenpair residual " + std::to_string(resid) +
                            " exceeds tolerance");
    }

    // Left eigenvectors from the inverse of the right basis: biorthogonality
    // w_i^T v_j = delta_ij holds by construction, which keeps participation
    // factors basis-consistent.
    CMat Vinv = rep.right.partialPivLu().solve(CMat::Identity(d, d));
    rep.left = Vinv.transpose();

    Eigen::JacobiSVD<CMat> svd(rep.right);
    double smin = svd.singularValues()(d - 1);
    double smax = svd.singularValues()(0);
    rep.degenerate = smin <= 0 || smax / smin > 1e12;
    return rep;
}

Rightmost rightmost_eigenvalue(const SpectralReport& rep) {
    if (rep.eigenvalues.empty())
        throw Error(Error::Kind::Config, "empty spectral report");
    int best = 0;
    for (int i = 1; i < static_cast<int>(rep.eigenvalues.size()); ++i) {
        const auto& a = rep.eigenvalues[i];
        const auto& b = rep.eigenvalues[best];
        if (a.real() > b.real() ||
            (a.real() == b.real() && std::abs(a.imag()) < std::abs(b.imag())))
            best = i;
    }
    Rightmost r;
    r.lambda = rep.eigenvalues[best];
    r.index = best;
    r.v = rep.right.col(best);
    r.w = rep.left.col(best);
    std::complex<double> p = (r.w.transpose() * r.v)(0);
    if (std::abs(p) > 0) r.w /= p;
    return r;
}

Mat participation_factors(const SpectralReport& rep) {
    const int d = static_cast<int>(rep.eigenvalues.size());
    Mat p(d, d);
    for (int i = 0; i < d; ++i) {
        // |w_i| |v_i| blowing up means the mode sits in a near-defective
        // cluster; factors for it are meaningless and withheld.
        double blow = rep.left.col(i).norm() * rep.right.col(i).norm();
        if (!std::isfinite(blow) || blow > 1e10) {
            p.col(i).setConstant(std::numeric_limits<double>::quiet_NaN());
            continue;
        }
        for (int k = 0; k < d; ++k)
            p(k, i) = std::abs(rep.left(k, i) * rep.right(k, i));
        double mx = p.col(i).maxCoeff();
        if (mx > 0) p.col(i) /= mx;
    }
    return p;
}

double spectrum_hausdorff(const std::vector<std::complex<double>>& a,
                          const std::vector<std::complex<double>>& b) {
    if (a.empty() || b.empty())
        throw Error(Error::Kind::Config, "empty spectrum");
    auto directed = [](const std::vector<std::complex<double>>& x,
                       const std::vector<std::complex<double>>& y) {
        double worst = 0;
        for (const auto& xi : x) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& yj : y) best = std::min(best, std::abs(xi - yj));
            worst = std::max(worst, best);
        }
        return worst;
    };
    return std::max(directed(a, b), directed(b, a));
}

} // namespace gridsense
