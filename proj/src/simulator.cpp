#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "gridsense/rng.hpp"
#include "gridsense/simulator.hpp"

namespace gridsense {

int AmbientSeries::row_at(double t) const {
    long r = std::lround((t - t0) * sample_rate);
    r = std::max(0l, std::min(static_cast<long>(samples()) - 1, r));
    return static_cast<int>(r);
}

void ScenarioSchedule::validate() const {
    if (duration <= 0) throw Error(Error::Kind::Config, "duration must be > 0");
    if (dt_integration <= 0)
        throw Error(Error::Kind::Config, "dt_integration must be > 0");
    if (output_rate <= 0)
        throw Error(Error::Kind::Config, "output_rate must be > 0");
    if (dt_integration > 1.0 / output_rate + 1e-12)
        throw Error(Error::Kind::Config,
                    "dt_integration exceeds the output sample interval");
    double k = 1.0 / (dt_integration * output_rate);
    if (std::abs(k - std::round(k)) > 1e-6)
        throw Error(Error::Kind::Rate,
                    "output_rate must divide the integration rate");
    for (int i = 0; i < sigma_load.size(); ++i)
        if (sigma_load(i) < 0)
            throw Error(Error::Kind::Config, "sigma_load must be >= 0");
    for (const auto& [t, pairs] : contingencies) {
        if (t < 0 || t >= duration)
            throw Error(Error::Kind::Config,
                        "contingency time outside [0, duration)");
        if (pairs.empty())
            throw Error(Error::Kind::Config, "contingency lists no branches");
    }
    if (meas_noise_delta < 0 || meas_noise_omega < 0)
        throw Error(Error::Kind::Config, "measurement noise std must be >= 0");
}

namespace {

std::string trip_label(const std::vector<std::pair<int, int>>& pairs) {
    std::string s = "trip ";
    for (size_t i = 0; i < pairs.size(); ++i) {
        if (i) s += ';';
        s += std::to_string(pairs[i].first) + "-" + std::to_string(pairs[i].second);
    }
    return s;
}

void check_hurwitz(const MachineModel& mm, const Vec& d_eq, double t_seg) {
    // Common-mode-free stability check; the plain-frame A always carries a
    // zero eigenvalue from rotational symmetry, so the test lives in Coi.
    Frame fc = Frame::coi(mm.M);
    Mat K = jacobian_analytic(mm, d_eq, fc);
    StateMatrix A = assemble_state_matrix(K, mm.M, mm.D, fc);
    Eigen::EigenSolver<Mat> es(A.A, false);
    if (es.info() != Eigen::Success)
        throw Error(Error::Kind::Numerical, "segment eigenvalue check failed");
    double mr = es.eigenvalues().real().maxCoeff();
    if (mr >= 0)
        throw Error(Error::Kind::NotHurwitz,
                    "operating segment starting at t=" + std::to_string(t_seg) +
                        "s is not small-signal stable (max Re = " +
                        std::to_string(mr) + ")");
}

struct Segment {
    MachineModel mm;
    Vec d_eq;      // frame-normalized equilibrium angles (full n)
    double w_ss;   // plain frame only
    Mat P, Q;      // E_i E_j G_ij, E_i E_j B_ij
    Mat Blow;      // m x n lower noise block
    long step0;
    double t0;
};

Segment make_segment(const NetworkCase& c, const Frame& f, const Vec& sigma,
                     const Vec& d_init, long step0, double t_seg) {
    Segment sg;
    sg.mm = build_model(c);
    const int n = sg.mm.n();
    Equilibrium eq = solve_equilibrium(sg.mm, f, d_init);
    sg.d_eq = eq.delta;
    sg.w_ss = eq.omega_ss;
    check_hurwitz(sg.mm, sg.d_eq, t_seg);
    sg.P = Mat(n, n);
    sg.Q = Mat(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double ee = sg.mm.red.E(i) * sg.mm.red.E(j);
            sg.P(i, j) = ee * sg.mm.red.Y(i, j).real();
            sg.Q(i, j) = ee * sg.mm.red.Y(i, j).imag();
        }
    NoiseInput ni = assemble_noise_matrix(sg.mm, f, sigma);
    const int m = f.m(n);
    sg.Blow = ni.B.bottomRows(m);
    sg.step0 = step0;
    sg.t0 = t_seg;
    return sg;
}

} // namespace

AmbientSeries simulate_ambient(const NetworkCase& c, const Frame& f,
                               const ScenarioSchedule& sched) {
    c.validate();
    sched.validate();
    const int n = static_cast<int>(c.generators.size());
    if (sched.sigma_load.size() != n)
        throw Error(Error::Kind::Config,
                    "sigma_load length must match the machine count");
    f.check(n);

    if (f.tag == Frame::Tag::MachineRef) {
        ScenarioSchedule inner = sched;
        inner.meas_noise_delta = 0;
        inner.meas_noise_omega = 0;
        AmbientSeries s = to_machine_ref(
            simulate_ambient(c, Frame::plain(), inner), f.ref);
        if (sched.meas_noise_delta > 0 || sched.meas_noise_omega > 0)
            s = add_measurement_noise(s, sched.meas_noise_delta,
                                      sched.meas_noise_omega, sched.seed);
        return s;
    }
    const bool coi = f.tag == Frame::Tag::Coi;

    const double dt = sched.dt_integration;
    const long k = std::lround(1.0 / (dt * sched.output_rate));
    const long S = std::lround(sched.duration / dt);
    const long T = S / k + 1;

    // contingency schedule on the integration grid
    auto cont = sched.contingencies;
    std::sort(cont.begin(), cont.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });

    AmbientSeries out;
    out.sample_rate = sched.output_rate;
    out.t0 = 0;
    out.frame = f;
    out.delta = Mat(T, n);
    out.omega = Mat(T, n);
    out.labels.resize(n);
    for (int i = 0; i < n; ++i) out.labels[i] = i + 1;
    out.events.emplace_back(0.0, "warmup");

    NetworkCase cur = c;
    Vec d_guess = initial_rotor_angles(c);
    Segment sg = make_segment(cur, f, sched.sigma_load, d_guess, 0, 0.0);

    // Pre-fault emfs are kept through contingencies: freeze them as overrides
    // before the first perturbation.
    Vec E0 = sg.mm.red.E;

    auto idx = f.independent(n);
    const int m = static_cast<int>(idx.size());
    const double sqdt = std::sqrt(dt);

    std::vector<NormalStream> streams;
    streams.reserve(n);
    for (int i = 0; i < n; ++i) streams.emplace_back(sched.seed, i);

    // state (full n even in Coi, dependent entry maintained by constraint)
    Vec d = sg.d_eq;
    Vec w = coi ? Vec(Vec::Zero(n)) : Vec(Vec::Constant(n, sg.w_ss));

    Vec sn(n), cn(n), pe(n), acc(m), xi(n), noise(m);
    size_t next_cont = 0;

    auto guard = [&](long step) {
        Vec dev = d - sg.d_eq;
        if (!dev.allFinite() || !w.allFinite())
            throw Error(Error::Kind::Instability,
                        "state diverged in segment starting at t=" +
                            std::to_string(sg.t0) + "s");
        if (!coi) dev.array() -= sg.mm.M.dot(dev) / sg.mm.M.sum();
        if (dev.lpNorm<Eigen::Infinity>() > M_PI)
            throw Error(Error::Kind::Instability,
                        "angle excursion exceeded pi at t=" +
                            std::to_string(step * dt) +
                            "s (segment starting at t=" +
                            std::to_string(sg.t0) + "s)");
    };

    for (long step = 0; step <= S; ++step) {
        if (step % k == 0) {
            long row = step / k;
            out.delta.row(row) = d.transpose();
            out.omega.row(row) = w.transpose();
            guard(step);
        }
        if (step == S) break;

        if (next_cont < cont.size() &&
            step == std::lround(cont[next_cont].first / dt)) {
            double tc = step * dt;
            cur = perturb_topology(cur, cont[next_cont].second);
            for (int g = 0; g < n; ++g) cur.generators[g].E = E0(g);
            sg = make_segment(cur, f, sched.sigma_load, d, step, tc);
            out.events.emplace_back(tc, trip_label(cont[next_cont].second));
            out.events.emplace_back(tc, "warmup");
            ++next_cont;
        }

        sn = d.array().sin();
        cn = d.array().cos();
        // Pe_i = c_i (P c - Q s)_i + s_i (P s + Q c)_i  via angle addition
        pe.noalias() = sg.P * cn;
        pe.noalias() -= sg.Q * sn;
        pe.array() *= cn.array();
        {
            Vec tmp = sg.P * sn + sg.Q * cn;
            pe.array() += sn.array() * tmp.array();
        }

        if (coi) {
            double pcoi = (sg.mm.Pm - pe).sum();
            for (int a = 0; a < m; ++a) {
                int i = idx[a];
                acc(a) = (sg.mm.Pm(i) - pe(i) - (sg.mm.M(i) / f.MT) * pcoi -
                          sg.mm.D(i) * w(i)) /
                         sg.mm.M(i);
            }
        } else {
            for (int i = 0; i < n; ++i)
                acc(i) = (sg.mm.Pm(i) - pe(i) - sg.mm.D(i) * w(i)) / sg.mm.M(i);
        }

        for (int i = 0; i < n; ++i) xi(i) = streams[i].next();
        noise.noalias() = sg.Blow * xi;

        // Euler-Maruyama, old-value updates
        for (int a = 0; a < m; ++a) {
            int i = idx[a];
            d(i) += w(i) * dt;
            w(i) += acc(a) * dt + noise(a) * sqdt;
        }
        if (coi) {
            double sd = 0, sw = 0;
            for (int a = 0; a < m; ++a) {
                sd += sg.mm.M(idx[a]) * d(idx[a]);
                sw += sg.mm.M(idx[a]) * w(idx[a]);
            }
            d(f.dep) = -sd / sg.mm.M(f.dep);
            w(f.dep) = -sw / sg.mm.M(f.dep);
        }
    }

    if (sched.meas_noise_delta > 0 || sched.meas_noise_omega > 0)
        out = add_measurement_noise(out, sched.meas_noise_delta,
                                    sched.meas_noise_omega, sched.seed);
    return out;
}

AmbientSeries add_measurement_noise(const AmbientSeries& s, double std_delta,
                                    double std_omega, std::uint64_t seed) {
    if (std_delta < 0 || std_omega < 0)
        throw Error(Error::Kind::Config, "noise std must be >= 0");
    AmbientSeries out = s;
    const int T = s.samples(), C = s.channels();
    // streams 1000+c for angles, 2000+c for speeds, disjoint from the
    // per-machine load streams used during integration
    if (std_delta > 0)
        for (int c = 0; c < C; ++c) {
            NormalStream g(seed, 1000 + c);
            for (int r = 0; r < T; ++r) out.delta(r, c) += std_delta * g.next();
        }
    if (std_omega > 0)
        for (int c = 0; c < C; ++c) {
            NormalStream g(seed, 2000 + c);
            for (int r = 0; r < T; ++r) out.omega(r, c) += std_omega * g.next();
        }
    return out;
}

AmbientSeries downsample(const AmbientSeries& s, double rate) {
    if (rate <= 0) throw Error(Error::Kind::Rate, "rate must be > 0");
    double kf = s.sample_rate / rate;
    long k = std::lround(kf);
    if (k < 1 || std::abs(kf - k) > 1e-9)
        throw Error(Error::Kind::Rate,
                    "rate must divide the source rate (" +
                        std::to_string(s.sample_rate) + " Hz)");
    AmbientSeries out = s;
    out.sample_rate = rate;
    const long T = (s.samples() - 1) / k + 1;
    out.delta = Mat(T, s.channels());
    out.omega = Mat(T, s.channels());
    for (long r = 0; r < T; ++r) {
        out.delta.row(r) = s.delta.row(r * k);
        out.omega.row(r) = s.omega.row(r * k);
    }
    return out;
}

AmbientSeries to_machine_ref(const AmbientSeries& s, int ref) {
    if (ref < 0 || ref >= s.channels())
        throw Error(Error::Kind::Config, "reference column out of range");
    if (s.frame.tag == Frame::Tag::MachineRef)
        throw Error(Error::Kind::Config,
                    "series is already machine-referenced");
    AmbientSeries out;
    out.sample_rate = s.sample_rate;
    out.t0 = s.t0;
    out.frame = Frame::machine_ref(s.labels[ref] - 1);
    out.events = s.events;
    const int C = s.channels();
    out.delta = Mat(s.samples(), C - 1);
    out.omega = Mat(s.samples(), C - 1);
    int a = 0;
    for (int c = 0; c < C; ++c) {
        if (c == ref) continue;
        out.delta.col(a) = s.delta.col(c) - s.delta.col(ref);
        out.omega.col(a) = s.omega.col(c) - s.omega.col(ref);
        out.labels.push_back(s.labels[c]);
        ++a;
    }
    return out;
}

} // namespace gridsense
