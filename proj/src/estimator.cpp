#include <cmath>

#include <Eigen/Eigenvalues>

#include "gridsense/estimator.hpp"

namespace gridsense {

Mat invert_spd(const Mat& Q, double* cond_out) {
    Eigen::SelfAdjointEigenSolver<Mat> es(Q);
    if (es.info() != Eigen::Success)
        throw Error(Error::Kind::Numerical, "symmetric eigendecomposition failed");
    const Vec& lam = es.eigenvalues();
    double lmax = lam.maxCoeff();
    if (lmax <= 0)
        throw Error(Error::Kind::IllConditioned, "matrix is not positive definite");
    double lmin = lam.minCoeff();
    double cond = lmin > 0 ? lmax / lmin : std::numeric_limits<double>::infinity();
    if (cond_out) *cond_out = cond;
    // No silent pseudo-inversion: below-floor modes make the window unusable.
    if (lmin < 1e-12 * lmax || cond > 1e10)
        throw Error(Error::Kind::IllConditioned,
                    "covariance condition " + std::to_string(cond) +
                        " exceeds 1e10; use a longer window");
    return es.eigenvectors() * lam.cwiseInverse().asDiagonal() *
           es.eigenvectors().transpose();
}

CovariancePair sample_covariance(const AmbientSeries& s, double t_start,
                                 double t_end) {
    if (s.samples() < 2)
        throw Error(Error::Kind::SampleSize, "series has fewer than 2 samples");
    if (t_start < s.t0 - 1e-9 || t_end > s.t_end() + 1e-9 || t_end <= t_start)
        throw Error(Error::Kind::Config, "window outside series");
    long r0 = std::lround((t_start - s.t0) * s.sample_rate);
    long r1 = std::lround((t_end - s.t0) * s.sample_rate);
    r0 = std::max(0l, r0);
    r1 = std::min(static_cast<long>(s.samples()) - 1, r1);
    const long N = r1 - r0 + 1;
    if (N < 2)
        throw Error(Error::Kind::SampleSize,
                    "window holds fewer than 2 samples");

    // Coi series carry the dependent machine's reconstructed column; the
    // covariance is over the independent machines only (the dependent column
    // is a linear combination and would make Qdd singular).
    std::vector<int> cols;
    if (s.frame.tag == Frame::Tag::Coi) {
        for (int c = 0; c < s.channels(); ++c)
            if (s.labels[c] - 1 != s.frame.dep) cols.push_back(c);
    } else {
        for (int c = 0; c < s.channels(); ++c) cols.push_back(c);
    }
    const int m = static_cast<int>(cols.size());

    Mat X(N, m), W(N, m);
    for (int a = 0; a < m; ++a) {
        X.col(a) = s.delta.col(cols[a]).segment(r0, N);
        W.col(a) = s.omega.col(cols[a]).segment(r0, N);
    }
    Eigen::RowVectorXd xm = X.colwise().mean();
    Eigen::RowVectorXd wm = W.colwise().mean();
    X.rowwise() -= xm;
    W.rowwise() -= wm;

    CovariancePair cov;
    cov.Qdd = X.transpose() * X / double(N - 1);
    cov.Qww = W.transpose() * W / double(N - 1);
    cov.Qdw = X.transpose() * W / double(N - 1);
    cov.Qdd = ((cov.Qdd + cov.Qdd.transpose()) / 2).eval();
    cov.Qww = ((cov.Qww + cov.Qww.transpose()) / 2).eval();
    cov.t_start = s.t0 + r0 / s.sample_rate;
    cov.t_end = s.t0 + r1 / s.sample_rate;
    cov.N = static_cast<int>(N);
    cov.frame = s.frame;

    // Linear-trend screen: peak excursion of the fitted line vs the std of
    // what remains once the line is removed. A stationary window has a
    // near-zero fitted slope; a drifting one dwarfs its own residual.
    Vec tc(N);
    for (long r = 0; r < N; ++r) tc(r) = (r - (N - 1) / 2.0) / s.sample_rate;
    double stt = tc.squaredNorm();
    double span = (cov.t_end - cov.t_start) / 2;
    for (int a = 0; a < m && !cov.trend_flag; ++a) {
        for (const Mat* Z : {&X, &W}) {
            double slope = tc.dot(Z->col(a)) / stt;
            double res2 = (Z->col(a) - slope * tc).squaredNorm();
            double sd_res = std::sqrt(res2 / double(N - 1));
            if (std::abs(slope) * span > 3 * sd_res) {
                cov.trend_flag = true;
                break;
            }
        }
    }
    return cov;
}

CovariancePair compensate_measurement_noise(const CovariancePair& cov,
                                            double var_delta, double var_omega) {
    if (var_delta < 0 || var_omega < 0)
        throw Error(Error::Kind::Config, "noise variance must be >= 0");
    CovariancePair out = cov;
    out.Qdd.diagonal().array() -= var_delta;
    out.Qww.diagonal().array() -= var_omega;
    if (out.Qdd.diagonal().minCoeff() <= 0 || out.Qww.diagonal().minCoeff() <= 0)
        throw Error(Error::Kind::DegenerateCovariance,
                    "noise compensation removed all signal variance");
    return out;
}

JacobianEstimate estimate_jacobian(const CovariancePair& cov, const Vec& M,
                                   Method method, const Vec* D) {
    const int m = static_cast<int>(cov.Qdd.rows());
    if (M.size() != m)
        throw Error(Error::Kind::Config, "M length must match covariance size");
    JacobianEstimate est;
    est.method = method;
    est.frame = cov.frame;
    est.t_start = cov.t_start;
    est.t_end = cov.t_end;
    est.N = cov.N;
    Mat Qi = invert_spd(cov.Qdd, &est.cond_Qdd);
    est.J = M.asDiagonal() * (cov.Qww * Qi).eval();
    if (method == Method::FullAppendix) {
        if (!D)
            throw Error(Error::Kind::Config,
                        "FullAppendix Jacobian estimate requires damping");
        if (D->size() != m)
            throw Error(Error::Kind::Config, "D length must match covariance size");
        est.J += D->asDiagonal() * (cov.Qdw * Qi).eval();
    }
    return est;
}

DampingEstimate estimate_damping(const CovariancePair& cov, const Vec& M,
                                 const Vec& E, const Vec& G_diag,
                                 const Vec& sigma, Method method) {
    const int m = static_cast<int>(cov.Qww.rows());
    if (M.size() != m || E.size() != m || G_diag.size() != m || sigma.size() != m)
        throw Error(Error::Kind::Config,
                    "parameter vectors must match covariance size");
    DampingEstimate out;
    out.method = method;
    out.D = Vec(m);
    if (method == Method::Simplified) {
        for (int k = 0; k < m; ++k) {
            double den = cov.Qww(k, k);
            if (den <= 0)
                throw Error(Error::Kind::DegenerateCovariance,
                            "nonpositive speed variance at machine " +
                                std::to_string(k + 1));
            double num = G_diag(k) * G_diag(k) * std::pow(E(k), 4) *
                         sigma(k) * sigma(k) / M(k);
            out.D(k) = 0.5 * num / den;
        }
    } else {
        Mat Qi = invert_spd(cov.Qdd, nullptr);
        Mat R = cov.Qdw * Qi * cov.Qww - cov.Qww * Qi * cov.Qdw;
        Mat Chat = cov.Qww + cov.Qdw * Qi * cov.Qdw;
        for (int k = 0; k < m; ++k) {
            double den = Chat(k, k);
            if (den <= 0)
                throw Error(Error::Kind::DegenerateCovariance,
                            "nonpositive augmented speed variance at machine " +
                                std::to_string(k + 1));
            double num = G_diag(k) * G_diag(k) * std::pow(E(k), 4) *
                             sigma(k) * sigma(k) / M(k) +
                         M(k) * R(k, k);
            out.D(k) = 0.5 * num / den;
        }
    }
    out.has_negative = (out.D.array() < 0).any();
    return out;
}

StateMatrix assemble_estimated_state_matrix(const JacobianEstimate& est,
                                            const Vec& M, const Vec& D) {
    const int m = static_cast<int>(est.J.rows());
    if (M.size() != m || D.size() != m)
        throw Error(Error::Kind::Config, "M/D length must match the estimate");
    Mat A = Mat::Zero(2 * m, 2 * m);
    A.topRightCorner(m, m).setIdentity();
    A.bottomLeftCorner(m, m) = (-M.cwiseInverse()).asDiagonal() * est.J;
    A.bottomRightCorner(m, m) =
        (-(D.array() / M.array())).matrix().asDiagonal();
    return {A, est.frame};
}

JacobianEstimate estimate_submatrix(const AmbientSeries& s,
                                    const std::vector<int>& observed,
                                    const Vec& M_sub, Method method,
                                    const Vec* D_sub, double t_start,
                                    double t_end) {
    if (observed.size() < 2)
        throw Error(Error::Kind::Config, "need at least 2 observed channels");
    for (int c : observed)
        if (c < 0 || c >= s.channels())
            throw Error(Error::Kind::Config, "observed channel out of range");
    if (t_end < 0) t_end = s.t_end();
    CovariancePair cov = sample_covariance(s, t_start, t_end);

    // Map series columns to covariance positions (Coi drops the dependent).
    std::vector<int> pos(s.channels(), -1);
    {
        int a = 0;
        for (int c = 0; c < s.channels(); ++c) {
            if (s.frame.tag == Frame::Tag::Coi && s.labels[c] - 1 == s.frame.dep)
                continue;
            pos[c] = a++;
        }
    }
    const int q = static_cast<int>(observed.size());
    std::vector<int> sel(q);
    for (int i = 0; i < q; ++i) {
        if (pos[observed[i]] < 0)
            throw Error(Error::Kind::Config,
                        "observed channel is the dependent machine");
        sel[i] = pos[observed[i]];
    }

    CovariancePair sub;
    sub.Qdd = Mat(q, q);
    sub.Qww = Mat(q, q);
    sub.Qdw = Mat(q, q);
    for (int i = 0; i < q; ++i)
        for (int j = 0; j < q; ++j) {
            sub.Qdd(i, j) = cov.Qdd(sel[i], sel[j]);
            sub.Qww(i, j) = cov.Qww(sel[i], sel[j]);
            sub.Qdw(i, j) = cov.Qdw(sel[i], sel[j]);
        }
    sub.t_start = cov.t_start;
    sub.t_end = cov.t_end;
    sub.N = cov.N;
    sub.frame = cov.frame;
    sub.trend_flag = cov.trend_flag;
    return estimate_jacobian(sub, M_sub, method, D_sub);
}

} // namespace gridsense
