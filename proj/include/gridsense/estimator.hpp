#pragma once
#include <vector>

#include "gridsense/simulator.hpp"

namespace gridsense {

struct CovariancePair {
    Mat Qdd, Qww; // m x m, symmetric PSD
    Mat Qdw;      // m x m, E[(d - mean)(w - mean)^T]
    double t_start = 0, t_end = 0;
    int N = 0;
    Frame frame;
    bool trend_flag = false; // some channel's linear trend exceeded 3x its std
                             // over the window (stationarity suspect)
};

enum class Method { Simplified, FullAppendix };

struct JacobianEstimate {
    Mat J;
    Method method = Method::Simplified;
    Frame frame;
    double cond_Qdd = 0;
    double t_start = 0, t_end = 0;
    int N = 0;
};

struct DampingEstimate {
    Vec D;
    Method method = Method::Simplified;
    bool has_negative = false; // diagnostic of model mismatch, never clipped
};

// Unbiased (N-1) sample covariances over [t_start, t_end], means removed.
CovariancePair sample_covariance(const AmbientSeries& s, double t_start,
                                 double t_end);

// Subtracts known measurement-noise variance from the Qdd/Qww diagonals.
// Additive independent noise inflates exactly those entries, so estimation
// from noisy channels without this correction is biased.
CovariancePair compensate_measurement_noise(const CovariancePair& cov,
                                            double var_delta, double var_omega);

// Inverted Lyapunov relation. Simplified: J = M Qww Qdd^-1.
// FullAppendix adds the cross-covariance term D Qdw Qdd^-1 and requires D.
// M (and D) are given per independent machine, matching the covariance size.
JacobianEstimate estimate_jacobian(const CovariancePair& cov, const Vec& M,
                                   Method method, const Vec* D = nullptr);

// Per-machine damping from the speed variance balance. Requires network
// knowledge (E, reduced G diagonal, load-variation sigma) unlike the
// Jacobian path. The FullAppendix variant corrects with the cross terms
// R = Qdw Qdd^-1 Qww - Qww Qdd^-1 Qdw and the augmented speed covariance.
DampingEstimate estimate_damping(const CovariancePair& cov, const Vec& M,
                                 const Vec& E, const Vec& G_diag,
                                 const Vec& sigma, Method method);

StateMatrix assemble_estimated_state_matrix(const JacobianEstimate& est,
                                            const Vec& M, const Vec& D);

// Covariances restricted to the observed channels (0-based columns of s),
// then the same inversion. The result approximates the corresponding block
// of the full-network estimate; the gap is an empirical property, not an
// identity. t_end < 0 means the end of the series.
JacobianEstimate estimate_submatrix(const AmbientSeries& s,
                                    const std::vector<int>& observed,
                                    const Vec& M_sub, Method method,
                                    const Vec* D_sub = nullptr,
                                    double t_start = 0, double t_end = -1);

// Symmetric-eigendecomposition inverse used by the estimators: relative
// eigenvalue floor 1e-12, condition cap 1e10 (throws IllConditioned).
Mat invert_spd(const Mat& Q, double* cond_out = nullptr);

} // namespace gridsense
