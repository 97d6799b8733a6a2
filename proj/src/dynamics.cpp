#include <Eigen/Eigenvalues>

#include "gridsense/dynamics.hpp"

namespace gridsense {

MachineModel build_model(const NetworkCase& c) {
    MachineModel mm;
    mm.red = reduce_case(c);
    const int n = mm.red.n;
    mm.M = Vec(n);
    mm.D = Vec(n);
    mm.Pm = Vec(n);
    for (int g = 0; g < n; ++g) {
        mm.M(g) = c.generators[g].M;
        mm.D(g) = c.generators[g].D;
        mm.Pm(g) = c.generators[g].Pm;
    }
    mm.validate();
    return mm;
}

void MachineModel::validate() const {
    const int nn = red.n;
    if (red.Y.rows() != nn || red.Y.cols() != nn || red.E.size() != nn ||
        M.size() != nn || D.size() != nn || Pm.size() != nn)
        throw Error(Error::Kind::Config, "machine model dimensions disagree");
    for (int i = 0; i < nn; ++i) {
        if (M(i) <= 0) throw Error(Error::Kind::Config, "inertia must be > 0");
        if (D(i) < 0) throw Error(Error::Kind::Config, "damping must be >= 0");
    }
}

Frame Frame::coi(const Vec& M, int dep) {
    Frame f;
    f.tag = Tag::Coi;
    f.MT = M.sum();
    if (dep < 0) {
        M.maxCoeff(&dep); // largest inertia: best-conditioned elimination
    }
    f.dep = dep;
    return f;
}

Frame Frame::machine_ref(int k) {
    Frame f;
    f.tag = Tag::MachineRef;
    f.ref = k;
    return f;
}

int Frame::m(int n) const { return tag == Tag::Plain ? n : n - 1; }

std::vector<int> Frame::independent(int n) const {
    check(n);
    std::vector<int> idx;
    int skip = tag == Tag::Coi ? dep : (tag == Tag::MachineRef ? ref : -1);
    for (int i = 0; i < n; ++i)
        if (i != skip) idx.push_back(i);
    return idx;
}

void Frame::check(int n) const {
    if (tag == Tag::Coi && (dep < 0 || dep >= n))
        throw Error(Error::Kind::Config, "Coi dependent index out of range");
    if (tag == Tag::MachineRef && (ref < 0 || ref >= n))
        throw Error(Error::Kind::Config, "MachineRef index out of range");
}

Vec electrical_power(const MachineModel& mm, const Vec& delta) {
    const int n = mm.n();
    if (delta.size() != n)
        throw Error(Error::Kind::Config, "angle vector size mismatch");
    Vec pe = Vec::Zero(n);
    for (int i = 0; i < n; ++i) {
        double acc = 0;
        for (int j = 0; j < n; ++j) {
            double dd = delta(i) - delta(j);
            acc += mm.red.E(i) * mm.red.E(j) *
                   (mm.red.Y(i, j).real() * std::cos(dd) +
                    mm.red.Y(i, j).imag() * std::sin(dd));
        }
        pe(i) = acc;
    }
    return pe;
}

std::pair<Vec, Vec> coi_transform(const Vec& delta, const Vec& omega, const Vec& M) {
    double mt = M.sum();
    double d0 = M.dot(delta) / mt;
    double w0 = M.dot(omega) / mt;
    return {delta.array() - d0, omega.array() - w0};
}

std::pair<Vec, Vec> inverse_coi(const Vec& d_tilde, const Vec& w_tilde,
                                double delta0, double omega0) {
    return {d_tilde.array() + delta0, w_tilde.array() + omega0};
}

namespace {

// dPe_i/dd_j in the plain frame; rows sum to zero exactly because the
// diagonal is defined as minus the off-diagonal sum.
Mat plain_jacobian(const MachineModel& mm, const Vec& delta) {
    const int n = mm.n();
    Mat J = Mat::Zero(n, n);
    for (int i = 0; i < n; ++i) {
        double diag = 0;
        for (int j = 0; j < n; ++j) {
            if (j == i) continue;
            double dd = delta(i) - delta(j);
            double v = mm.red.E(i) * mm.red.E(j) *
                       (mm.red.Y(i, j).real() * std::sin(dd) -
                        mm.red.Y(i, j).imag() * std::cos(dd));
            J(i, j) = v;
            diag -= v;
        }
        J(i, i) = diag;
    }
    return J;
}

} // namespace

Mat jacobian_analytic(const MachineModel& mm, const Vec& delta, const Frame& f) {
    const int n = mm.n();
    f.check(n);
    Mat Jp = plain_jacobian(mm, delta);
    switch (f.tag) {
    case Frame::Tag::Plain:
        return Jp;
    case Frame::Tag::Coi: {
        // Total derivative of the reduced rhs: the forwarded-P_coi term and
        // the chain rule through the eliminated dependent angle.
        double MT = mm.M.sum();
        Mat W = Jp;
        Vec colsum = Jp.colwise().sum();
        for (int i = 0; i < n; ++i)
            W.row(i) -= (mm.M(i) / MT) * colsum.transpose();
        auto idx = f.independent(n);
        const int m = static_cast<int>(idx.size());
        Mat K(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                K(a, b) = W(idx[a], idx[b]) -
                          (mm.M(idx[b]) / mm.M(f.dep)) * W(idx[a], f.dep);
        return K;
    }
    case Frame::Tag::MachineRef: {
        auto idx = f.independent(n);
        const int m = static_cast<int>(idx.size());
        Mat K(m, m);
        for (int a = 0; a < m; ++a)
            for (int b = 0; b < m; ++b)
                K(a, b) = Jp(idx[a], idx[b]) -
                          (mm.M(idx[a]) / mm.M(f.ref)) * Jp(f.ref, idx[b]);
        return K;
    }
    }
    throw Error(Error::Kind::Config, "unreachable frame tag");
}

namespace {

Vec coi_residual(const MachineModel& mm, const Vec& dt_full,
                 const std::vector<int>& idx, double MT) {
    Vec pe = electrical_power(mm, dt_full);
    double pcoi = (mm.Pm - pe).sum();
    Vec r(idx.size());
    for (size_t a = 0; a < idx.size(); ++a) {
        int i = idx[a];
        r(a) = mm.Pm(i) - pe(i) - (mm.M(i) / MT) * pcoi;
    }
    return r;
}

Vec reconstruct_dep(const Vec& x_ind, const std::vector<int>& idx,
                    const Vec& M, int dep, int n) {
    Vec full(n);
    double acc = 0;
    for (size_t a = 0; a < idx.size(); ++a) {
        full(idx[a]) = x_ind(a);
        acc += M(idx[a]) * x_ind(a);
    }
    full(dep) = -acc / M(dep);
    return full;
}

} // namespace

Equilibrium solve_equilibrium(const MachineModel& mm, const Frame& f,
                              const Vec& delta_init) {
    mm.validate();
    const int n = mm.n();
    f.check(n);
    if (delta_init.size() != n)
        throw Error(Error::Kind::Config, "delta_init size mismatch");
    const int max_iter = 50;

    if (f.tag == Frame::Tag::Coi) {
        auto idx = f.independent(n);
        double MT = mm.M.sum();
        // normalize the start point into the constrained subspace
        Vec dt0 = coi_transform(delta_init, Vec::Zero(n), mm.M).first;
        Vec x(idx.size());
        for (size_t a = 0; a < idx.size(); ++a) x(a) = dt0(idx[a]);

        Vec full = reconstruct_dep(x, idx, mm.M, f.dep, n);
        Vec r = coi_residual(mm, full, idx, MT);
        double rn = r.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < max_iter; ++it) {
            if (rn < 1e-9)
                return {full, 0.0, it, rn};
            Mat K = jacobian_analytic(mm, full, f);
            Vec step = K.partialPivLu().solve(r);
            double scale = 1.0;
            for (int h = 0; h < 40; ++h) {
                Vec xn = x + scale * step;
                Vec fn = reconstruct_dep(xn, idx, mm.M, f.dep, n);
                Vec rnew = coi_residual(mm, fn, idx, MT);
                double rnn = rnew.lpNorm<Eigen::Infinity>();
                if (rnn < rn || scale < 1e-6) {
                    x = xn; full = fn; r = rnew; rn = rnn;
                    break;
                }
                scale /= 2;
            }
        }
        throw Error(Error::Kind::Convergence,
                    "COI equilibrium did not converge; residual " + std::to_string(rn));
    }

    if (f.tag == Frame::Tag::MachineRef) {
        auto idx = f.independent(n);
        const int m = static_cast<int>(idx.size());
        Vec full = delta_init;
        auto residual = [&](const Vec& d) {
            Vec pe = electrical_power(mm, d);
            Vec r(m);
            for (int a = 0; a < m; ++a) {
                int i = idx[a];
                r(a) = (mm.Pm(i) - pe(i)) -
                       (mm.M(i) / mm.M(f.ref)) * (mm.Pm(f.ref) - pe(f.ref));
            }
            return r;
        };
        Vec r = residual(full);
        double rn = r.lpNorm<Eigen::Infinity>();
        for (int it = 0; it < max_iter; ++it) {
            if (rn < 1e-9) return {full, 0.0, it, rn};
            Mat K = jacobian_analytic(mm, full, f);
            Vec step = K.partialPivLu().solve(r);
            double scale = 1.0;
            for (int h = 0; h < 40; ++h) {
                Vec fn = full;
                for (int a = 0; a < m; ++a) fn(idx[a]) += scale * step(a);
                Vec rnew = residual(fn);
                double rnn = rnew.lpNorm<Eigen::Infinity>();
                if (rnn < rn || scale < 1e-6) {
                    full = fn; r = rnew; rn = rnn;
                    break;
                }
                scale /= 2;
            }
        }
        throw Error(Error::Kind::Convergence,
                    "machine-ref equilibrium did not converge; residual " +
                        std::to_string(rn));
    }

    // Plain frame: one machine's angle is the gauge; a uniform speed offset
    // absorbs any power imbalance through the damping (with total damping
    // zero the gauge machine's equation is the balance instead).
    int gauge;
    mm.M.maxCoeff(&gauge);
    bool with_wss = mm.D.sum() > 0;
    std::vector<int> free;
    for (int i = 0; i < n; ++i)
        if (i != gauge) free.push_back(i);
    const int m = static_cast<int>(free.size());
    const int nu = with_wss ? m + 1 : m;

    Vec full = delta_init;
    double wss = 0;
    auto residual = [&](const Vec& d, double w) {
        Vec pe = electrical_power(mm, d);
        Vec r(nu);
        if (with_wss) {
            for (int i = 0; i < n; ++i) r(i) = mm.Pm(i) - pe(i) - mm.D(i) * w;
        } else {
            for (int a = 0; a < m; ++a) r(a) = mm.Pm(free[a]) - pe(free[a]);
        }
        return r;
    };
    Vec r = residual(full, wss);
    double rn = r.lpNorm<Eigen::Infinity>();
    for (int it = 0; it < max_iter; ++it) {
        if (rn < 1e-9) return {full, wss, it, rn};
        Mat Jp = plain_jacobian(mm, full);
        Mat Jac(nu, nu);
        if (with_wss) {
            for (int i = 0; i < n; ++i) {
                for (int b = 0; b < m; ++b) Jac(i, b) = -Jp(i, free[b]);
                Jac(i, m) = -mm.D(i);
            }
        } else {
            for (int a = 0; a < m; ++a)
                for (int b = 0; b < m; ++b) Jac(a, b) = -Jp(free[a], free[b]);
        }
        Vec step = Jac.partialPivLu().solve(-r);
        double scale = 1.0;
        for (int h = 0; h < 40; ++h) {
            Vec fn = full;
            for (int b = 0; b < m; ++b) fn(free[b]) += scale * step(b);
            double wn = with_wss ? wss + scale * step(m) : 0.0;
            Vec rnew = residual(fn, wn);
            double rnn = rnew.lpNorm<Eigen::Infinity>();
            if (rnn < rn || scale < 1e-6) {
                full = fn; wss = wn; r = rnew; rn = rnn;
                break;
            }
            scale /= 2;
        }
    }
    throw Error(Error::Kind::Convergence,
                "plain equilibrium did not converge; residual " + std::to_string(rn));
}

StateMatrix assemble_state_matrix(const Mat& J, const Vec& M, const Vec& D,
                                  const Frame& f) {
    const int n = static_cast<int>(M.size());
    auto idx = f.independent(n);
    const int m = static_cast<int>(idx.size());
    if (J.rows() != m || J.cols() != m)
        throw Error(Error::Kind::Config, "Jacobian size does not match frame");
    Mat A = Mat::Zero(2 * m, 2 * m);
    A.topRightCorner(m, m).setIdentity();
    for (int a = 0; a < m; ++a) {
        A.row(m + a).head(m) = -J.row(a) / M(idx[a]);
        A(m + a, m + a) = -D(idx[a]) / M(idx[a]);
    }
    return {A, f};
}

NoiseInput assemble_noise_matrix(const MachineModel& mm, const Frame& f,
                                 const Vec& sigma) {
    const int n = mm.n();
    f.check(n);
    if (sigma.size() != n)
        throw Error(Error::Kind::Config, "sigma size mismatch");
    for (int i = 0; i < n; ++i)
        if (sigma(i) < 0) throw Error(Error::Kind::Config, "sigma must be >= 0");

    Vec w(n); // per-machine noise weight E^2 G_ii sigma
    for (int i = 0; i < n; ++i)
        w(i) = mm.red.E(i) * mm.red.E(i) * mm.red.Y(i, i).real() * sigma(i);

    auto idx = f.independent(n);
    const int m = static_cast<int>(idx.size());
    Mat B = Mat::Zero(2 * m, n);
    switch (f.tag) {
    case Frame::Tag::Plain:
        for (int i = 0; i < n; ++i) B(m + i, i) = -w(i) / mm.M(i);
        break;
    case Frame::Tag::Coi: {
        double MT = mm.M.sum();
        for (int a = 0; a < m; ++a) {
            int i = idx[a];
            for (int k = 0; k < n; ++k) B(m + a, k) = w(k) / MT;
            B(m + a, i) -= w(i) / mm.M(i);
        }
        break;
    }
    case Frame::Tag::MachineRef:
        for (int a = 0; a < m; ++a) {
            int i = idx[a];
            B(m + a, i) = -w(i) / mm.M(i);
            B(m + a, f.ref) = w(f.ref) / mm.M(f.ref);
        }
        break;
    }
    return {B, sigma};
}

Mat solve_lyapunov(const Mat& A, const Mat& B) {
    const int d = static_cast<int>(A.rows());
    if (A.cols() != d || B.rows() != d)
        throw Error(Error::Kind::Config, "Lyapunov dimension mismatch");

    Eigen::EigenSolver<Mat> es(A);
    if (es.info() != Eigen::Success)
        throw Error(Error::Kind::Numerical, "eigen decomposition failed");
    double max_re = es.eigenvalues().real().maxCoeff();
    if (max_re >= 0)
        throw Error(Error::Kind::NotHurwitz,
                    "state matrix is not Hurwitz (max Re = " +
                        std::to_string(max_re) + ")");

    Mat BBt = B * B.transpose();
    // vec(AC + CA^T) = (I (x) A + A (x) I) vec(C)
    Mat K = Mat::Zero(d * d, d * d);
    for (int i = 0; i < d; ++i)
        K.block(i * d, i * d, d, d) = A; // I (x) A
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            K.block(i * d, j * d, d, d).diagonal().array() += A(i, j); // A (x) I
    Eigen::Map<const Vec> rhs(BBt.data(), d * d);
    Vec cv = K.partialPivLu().solve(-rhs);
    Mat C = Eigen::Map<Mat>(cv.data(), d, d);
    C = ((C + C.transpose()) / 2).eval();

    double scale = BBt.norm();
    double resid = (A * C + C * A.transpose() + BBt).norm();
    if (scale > 0 && resid > 1e-10 * scale)
        throw Error(Error::Kind::Numerical,
                    "Lyapunov residual too large: " + std::to_string(resid / scale));
    Eigen::SelfAdjointEigenSolver<Mat> sa(C);
    if (sa.eigenvalues().minCoeff() < -1e-10)
        throw Error(Error::Kind::Numerical, "Lyapunov solution is not PSD");
    return C;
}

} // namespace gridsense
