#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "gridsense/detector.hpp"

namespace gridsense {

double frobenius_distance(const Mat& X, const Mat& Y) {
    if (X.rows() != Y.rows() || X.cols() != Y.cols())
        throw Error(Error::Kind::Config, "matrix shapes differ");
    double ny = Y.norm();
    if (ny == 0)
        throw Error(Error::Kind::Config, "reference matrix has zero norm");
    return (X - Y).norm() / ny;
}

namespace {

// A window is unusable while a point event sits strictly inside it or a
// warm-up span (50 s after the event) overlaps its interior.
bool straddles_event(const AmbientSeries& s, double w_start, double w_end) {
    constexpr double kWarmup = 50.0;
    for (const auto& [t, what] : s.events) {
        if (what == "warmup") {
            if (w_start < t + kWarmup && w_end > t) return true;
        } else if (w_start < t && t < w_end) {
            return true;
        }
    }
    return false;
}

const Vec* damping_or_null(Method method, const Vec& D) {
    if (method != Method::FullAppendix) return nullptr;
    if (D.size() == 0)
        throw Error(Error::Kind::Config,
                    "FullAppendix scanning requires a damping vector");
    return &D;
}

} // namespace

DetectionReport moving_window_scan(const AmbientSeries& s, const Mat& J_model,
                                   const Vec& M_ind, const ScanConfig& cfg) {
    if (cfg.window_s <= 0 || cfg.stride_s <= 0)
        throw Error(Error::Kind::Config, "window and stride must be > 0");
    const Vec* D = damping_or_null(cfg.method, cfg.D_ind);

    DetectionReport rep;
    Mat J_last;
    bool have_last = false;

    for (double te = s.t0 + cfg.window_s; te <= s.t_end() + 1e-9;
         te += cfg.stride_s) {
        double tb = te - cfg.window_s;
        ScanPoint p{te, std::numeric_limits<double>::quiet_NaN(), false};
        if (cfg.use_events && straddles_event(s, tb, te)) {
            rep.distance_series.push_back(p);
            continue;
        }
        try {
            CovariancePair cov = sample_covariance(s, tb, te);
            JacobianEstimate est = estimate_jacobian(cov, M_ind, cfg.method, D);
            p.distance = frobenius_distance(est.J, J_model);
            p.valid = true;
            J_last = est.J;
            have_last = true;
        } catch (const Error&) {
            // failed window: recorded as invalid, scan continues
        }
        rep.distance_series.push_back(p);
    }

    // invalid spans (event straddling / failed estimates), merged
    double span_b = 0;
    bool in_span = false;
    for (const auto& p : rep.distance_series) {
        if (!p.valid && !in_span) {
            span_b = p.t;
            in_span = true;
        } else if (p.valid && in_span) {
            rep.invalid_band.emplace_back(span_b, p.t);
            in_span = false;
        }
    }
    if (in_span && !rep.distance_series.empty())
        rep.invalid_band.emplace_back(span_b, rep.distance_series.back().t);

    if (cfg.threshold_override > 0) {
        rep.threshold = cfg.threshold_override;
    } else {
        std::vector<double> cal;
        for (const auto& p : rep.distance_series)
            if (p.valid && p.t <= s.t0 + cfg.calibration_s)
                cal.push_back(p.distance);
        if (cal.empty()) {
            rep.threshold = cfg.threshold_floor;
        } else {
            std::nth_element(cal.begin(), cal.begin() + cal.size() / 2, cal.end());
            double med = cal[cal.size() / 2];
            rep.threshold = std::max(cfg.threshold_floor, 3 * med);
        }
    }

    // alarm at the start of each above-threshold run after calibration;
    // "sustained" once a run has persisted one full window length
    double run_start = 0;
    bool in_run = false, sustained = false;
    for (const auto& p : rep.distance_series) {
        bool hot = p.valid && p.t > s.t0 + cfg.calibration_s &&
                   p.distance > rep.threshold;
        if (hot && !in_run) {
            rep.alarms.emplace_back(p.t, "distance");
            run_start = p.t;
            in_run = true;
            sustained = false;
        } else if (!hot && p.valid) {
            in_run = false;
        }
        if (in_run && !sustained && p.t - run_start >= cfg.window_s) {
            rep.alarms.emplace_back(p.t, "sustained");
            sustained = true;
        }
    }

    if (have_last) {
        std::vector<int> lab;
        for (int c = 0; c < s.channels(); ++c)
            if (!(s.frame.tag == Frame::Tag::Coi &&
                  s.labels[c] - 1 == s.frame.dep))
                lab.push_back(s.labels[c]);
        Localization loc = localize(J_model, J_last, 4, &lab);
        rep.localization_surface = loc.surface;
        rep.ranked_machines = loc.ranked;
    }
    return rep;
}

Localization localize(const Mat& J_model, const Mat& J_est, int top_q,
                      const std::vector<int>* labels) {
    if (J_model.rows() != J_est.rows() || J_model.cols() != J_est.cols())
        throw Error(Error::Kind::Config, "matrix shapes differ");
    const int m = static_cast<int>(J_model.rows());
    Localization loc;
    loc.surface = (J_model - J_est).cwiseAbs();

    std::vector<std::tuple<double, int, int>> entries;
    for (int i = 0; i < m; ++i)
        for (int j = 0; j < m; ++j)
            if (loc.surface(i, j) > 0)
                entries.emplace_back(loc.surface(i, j), i, j);
    std::sort(entries.begin(), entries.end(),
              [](const auto& a, const auto& b) {
                  return std::get<0>(a) > std::get<0>(b);
              });
    if (static_cast<int>(entries.size()) > top_q) entries.resize(top_q);

    auto label_of = [&](int i) { return labels ? (*labels)[i] : i + 1; };
    // label -> (hits, summed touched magnitude). Hit count alone saturates on
    // small surfaces (every machine touches every top entry), so ties break
    // on how much residual mass sits on a machine's rows and columns.
    std::map<int, std::pair<int, double>> score;
    for (const auto& [v, i, j] : entries) {
        auto bump = [&](int lb) {
            auto& sc = score[lb];
            sc.first += 1;
            sc.second += v;
        };
        // a diagonal entry implicates its machine as both row and column
        bump(label_of(i));
        bump(label_of(j));
    }
    std::vector<int> order;
    for (const auto& [lb, sc] : score) order.push_back(lb);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        const auto& sa = score[a];
        const auto& sb = score[b];
        if (sa.first != sb.first) return sa.first > sb.first;
        if (sa.second != sb.second) return sa.second > sb.second;
        return a < b;
    });
    loc.ranked = order;
    return loc;
}

DiscrepancyKind classify_discrepancy(const AmbientSeries& s,
                                     double pre_start, double pre_end,
                                     double post_start, double post_end,
                                     const ClassifyConfig& cfg) {
    const Vec* D = damping_or_null(cfg.method, cfg.D_ind);

    auto window_rows = [&](double a, double b) {
        long r0 = s.row_at(a), r1 = s.row_at(b);
        if (r1 - r0 + 1 < 2)
            throw Error(Error::Kind::SampleSize, "classification window too short");
        return std::pair<long, long>(r0, r1);
    };
    auto [p0, p1] = window_rows(pre_start, pre_end);
    auto [q0, q1] = window_rows(post_start, post_end);

    bool mean_shift = false;
    for (const Mat* Z : {&s.delta, &s.omega}) {
        for (int c = 0; c < s.channels() && !mean_shift; ++c) {
            auto pre = Z->col(c).segment(p0, p1 - p0 + 1);
            auto post = Z->col(c).segment(q0, q1 - q0 + 1);
            double mp = pre.mean();
            double sd = std::sqrt((pre.array() - mp).square().sum() /
                                  double(pre.size() - 1));
            if (sd <= 0) sd = std::numeric_limits<double>::min();
            if (std::abs(post.mean() - mp) > cfg.mean_shift_sigmas * sd)
                mean_shift = true;
        }
        if (mean_shift) break;
    }

    bool distance_alarm = false;
    try {
        CovariancePair cpre = sample_covariance(s, pre_start, pre_end);
        CovariancePair cpost = sample_covariance(s, post_start, post_end);
        JacobianEstimate jpre = estimate_jacobian(cpre, cfg.M_ind, cfg.method, D);
        JacobianEstimate jpost = estimate_jacobian(cpost, cfg.M_ind, cfg.method, D);
        distance_alarm =
            frobenius_distance(jpost.J, jpre.J) > cfg.distance_threshold;
    } catch (const Error&) {
        // estimation failed in a window; fall back to the mean comparison
    }

    // A topology change moves the equilibrium too, so the Jacobian verdict
    // dominates; a mean shift alone is an operating-point change.
    if (distance_alarm) return DiscrepancyKind::TopologyChange;
    if (mean_shift) return DiscrepancyKind::OperatingPointChange;
    return DiscrepancyKind::NoChange;
}

} // namespace gridsense
