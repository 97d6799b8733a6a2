#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "gridsense/detector.hpp"
#include "gridsense/estimator.hpp"
#include "gridsense/simulator.hpp"
#include "testutil.hpp"

using namespace gridsense;

namespace {

const double K_TRUE[2][2] = {{8.0671068365393701, 1.2378756269498397},
                             {2.8143542481628847, 5.0844368030900977}};
// |stale - true| surface after tripping line 5-7, and its peak
const double SURF57[2][2] = {{1.4707, 0.3230}, {1.1718, 0.2365}};

Mat k_true9() {
    Mat K(2, 2);
    K << K_TRUE[0][0], K_TRUE[0][1], K_TRUE[1][0], K_TRUE[1][1];
    return K;
}

// true and stale frame Jacobians at the post-trip operating point
struct TripPair {
    Mat K_true, K_stale;
};

TripPair nine_bus_trip(const std::vector<std::pair<int, int>>& trips) {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M, 2);
    Equilibrium eq0 = solve_equilibrium(mm, f, initial_rotor_angles(c));
    NetworkCase cp = perturb_topology(c, trips);
    for (int g = 0; g < 3; ++g) cp.generators[g].E = mm.red.E(g);
    MachineModel mp = build_model(cp);
    Equilibrium eq1 = solve_equilibrium(mp, f, eq0.delta);
    return {jacobian_analytic(mp, eq1.delta, f),
            jacobian_analytic(mm, eq1.delta, f)};
}

} // namespace

TEST_CASE("frobenius distance: identity, published anchors, scaling") {
    Mat X(2, 2), Y(2, 2);
    X << 7.960, 1.180, 3.047, 5.280;
    Y << 8.053, 1.240, 2.802, 5.085;
    CHECK(frobenius_distance(Y, Y) == 0.0);
    CHECK(frobenius_distance(X, Y) ==
          doctest::Approx(0.033195224353554938).epsilon(1e-12));
    CHECK(std::abs(frobenius_distance(X, Y) - 0.0332) < 5e-5);

    Mat Xs(2, 2), Ys(2, 2);
    Xs << 7.338, 1.447, 2.831, 4.527; // stale post-fault model
    Ys << 5.870, 1.770, 4.001, 4.291; // true post-fault matrix
    CHECK(frobenius_distance(Xs, Ys) ==
          doctest::Approx(0.2261824717055797).epsilon(1e-12));
    CHECK(std::abs(frobenius_distance(Xs, Ys) - 0.2262) < 5e-5);

    CHECK(frobenius_distance(-2.5 * X, -2.5 * Y) ==
          doctest::Approx(frobenius_distance(X, Y)).epsilon(1e-14));

    CHECK_THROWS_AS(frobenius_distance(X, Mat::Zero(2, 2)), const Error&);
    CHECK_THROWS_AS(frobenius_distance(X, Mat::Identity(3, 3)), const Error&);
}

TEST_CASE("scan: quiet series never alarms") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M, 2);
    Vec Mi = mm.M.head(2);
    Mat K = k_true9();
    ScanConfig cfg;

    for (std::uint64_t seed : {501, 502, 504}) {
        auto sched = tu::make_schedule(700, 1e-3, 10, 0.01, 3, seed);
        AmbientSeries s = simulate_ambient(c, f, sched);
        DetectionReport rep = moving_window_scan(s, K, Mi, cfg);
        CHECK(rep.alarms.empty());
        CHECK(rep.threshold >= cfg.threshold_floor);
        int valid = 0;
        for (const auto& p : rep.distance_series)
            if (p.valid) {
                CHECK(p.distance >= 0);
                ++valid;
            }
        CHECK(valid > 350);
        CHECK(rep.invalid_band.empty());
    }
}

TEST_CASE("scan: a mid-run trip alarms and stays alarmed") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M, 2);
    Vec Mi = mm.M.head(2);
    Mat K = k_true9();
    auto sched =
        tu::make_schedule(1100, 1e-3, 10, 0.01, 3, 91, {{500.0, {{5, 7}}}});
    AmbientSeries s = simulate_ambient(c, f, sched);

    ScanConfig cfg; // unknown events: every window participates
    DetectionReport rep = moving_window_scan(s, K, Mi, cfg);
    REQUIRE(!rep.alarms.empty());
    CHECK(rep.alarms.front().second == "distance");
    CHECK(rep.alarms.front().first > 500.0);
    CHECK(rep.alarms.front().first <= 800.0);
    bool sustained = false;
    for (const auto& [t, kind] : rep.alarms) sustained |= kind == "sustained";
    CHECK(sustained);
    // late windows (fully clear of the event) sit far above threshold
    for (const auto& p : rep.distance_series)
        if (p.valid && p.t >= 850) CHECK(p.distance > rep.threshold);
    // the surviving estimate localizes toward machine 1 (line 5-7 feeds it)
    REQUIRE(!rep.ranked_machines.empty());
    CHECK(rep.ranked_machines.front() == 1);

    ScanConfig known = cfg;
    known.use_events = true; // event-straddling windows quarantined
    DetectionReport rep2 = moving_window_scan(s, K, Mi, known);
    // the startup warm-up invalidates the very first window; the trip at
    // 500 s must blank everything until the window fully clears it
    bool covered = false;
    for (const auto& [b, e] : rep2.invalid_band)
        covered |= b <= 501.0 && e >= 799.0;
    CHECK(covered);
    REQUIRE(!rep2.alarms.empty());
    CHECK(rep2.alarms.front().first >= 800.0); // first clean window
}

TEST_CASE("scan: series shorter than the window yields an empty report") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    auto sched = tu::make_schedule(100, 1e-3, 10, 0.01, 3, 19);
    AmbientSeries s = simulate_ambient(c, Frame::coi(mm.M, 2), sched);
    DetectionReport rep =
        moving_window_scan(s, k_true9(), mm.M.head(2), ScanConfig{});
    CHECK(rep.distance_series.empty());
    CHECK(rep.alarms.empty());

    ScanConfig bad;
    bad.window_s = -1;
    CHECK_THROWS_AS(moving_window_scan(s, k_true9(), mm.M.head(2), bad),
                    const Error&);
}

TEST_CASE("localize: trivial cases") {
    Mat J = Mat::Identity(3, 3) * 2.0;
    Localization same = localize(J, J);
    CHECK(same.surface.norm() == 0.0);
    CHECK(same.ranked.empty());

    Mat Jp = J;
    Jp(0, 2) += 1.0;
    Localization one = localize(J, Jp);
    int r, cidx;
    one.surface.maxCoeff(&r, &cidx);
    CHECK(r == 0);
    CHECK(cidx == 2);
    REQUIRE(one.ranked.size() == 2);
    CHECK(one.ranked[0] == 1); // equal hits, equal peak: label order
    CHECK(one.ranked[1] == 3);

    std::vector<int> lab = {4, 7, 9};
    Localization named = localize(J, Jp, 4, &lab);
    CHECK(named.ranked[0] == 4);
    CHECK(named.ranked[1] == 9);

    CHECK_THROWS_AS(localize(J, Mat::Identity(2, 2)), const Error&);
}

TEST_CASE("localize: 9-bus line 5-7 surface pins machine 1") {
    TripPair tp = nine_bus_trip({{5, 7}});
    Localization loc = localize(tp.K_stale, tp.K_true);
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j)
            CHECK(loc.surface(i, j) == doctest::Approx(SURF57[i][j]).epsilon(5e-4));
    int r, c;
    loc.surface.maxCoeff(&r, &c);
    CHECK(r == 0);
    CHECK(c == 0);
    CHECK(loc.ranked.front() == 1);
}

TEST_CASE("localize: every 9-bus load-line trip implicates a neighbor") {
    struct Case {
        std::pair<int, int> line;
        std::vector<int> plausible; // machines electrically adjacent
    };
    // machine 3 is the eliminated machine in this frame, so lines touching
    // its corner may implicate either adjacent represented machine
    const std::vector<Case> cases = {
        {{4, 5}, {1}},    {{4, 6}, {1}}, {{5, 7}, {1, 2}},
        {{6, 9}, {1, 3}}, {{7, 8}, {2}}, {{8, 9}, {2, 3}},
    };
    for (const auto& cs : cases) {
        TripPair tp = nine_bus_trip({cs.line});
        Localization loc = localize(tp.K_stale, tp.K_true);
        REQUIRE(!loc.ranked.empty());
        bool ok = false;
        for (int m : cs.plausible) ok |= loc.ranked.front() == m;
        CHECK_MESSAGE(ok, "line ", cs.line.first, "-", cs.line.second,
                      " implicated machine ", loc.ranked.front());
    }
}

TEST_CASE("localize: 39-bus double trip points at machines 1 and 8") {
    NetworkCase c = tu::load("ieee39.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M);
    Equilibrium eq0 = solve_equilibrium(mm, f, initial_rotor_angles(c));
    NetworkCase cp = perturb_topology(c, {{1, 2}, {2, 25}});
    for (int g = 0; g < 10; ++g) cp.generators[g].E = mm.red.E(g);
    MachineModel mp = build_model(cp);
    Equilibrium eq1 = solve_equilibrium(mp, f, eq0.delta);
    Mat Kt = jacobian_analytic(mp, eq1.delta, f);
    Mat Ks = jacobian_analytic(mm, eq1.delta, f);

    Localization loc = localize(Ks, Kt);
    REQUIRE(loc.ranked.size() >= 2);
    CHECK(loc.ranked[0] == 1);
    CHECK(loc.ranked[1] == 8);

    // frozen largest residual entries (1-based machine pairs)
    CHECK(loc.surface(0, 0) == doctest::Approx(3.8827).epsilon(5e-4));
    CHECK(loc.surface(7, 7) == doctest::Approx(2.3512).epsilon(5e-4));
    CHECK(loc.surface(7, 0) == doctest::Approx(1.909).epsilon(5e-4));
    CHECK(loc.surface(0, 7) == doctest::Approx(1.7135).epsilon(5e-4));
    // next entries involve machine 9's row/column
    CHECK(loc.surface(7, 8) == doctest::Approx(1.377).epsilon(5e-4));
    CHECK(loc.surface(8, 7) == doctest::Approx(1.2156).epsilon(5e-4));
}

TEST_CASE("classify: no change on a stationary run") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    auto sched = tu::make_schedule(900, 1e-3, 10, 0.01, 3, 61);
    AmbientSeries s = simulate_ambient(c, Frame::coi(mm.M, 2), sched);
    ClassifyConfig cfg;
    cfg.M_ind = mm.M.head(2);
    CHECK(classify_discrepancy(s, 50, 450, 450, 900, cfg) ==
          DiscrepancyKind::NoChange);
    CHECK(classify_discrepancy(s, 50, 450, 50, 450, cfg) ==
          DiscrepancyKind::NoChange);
    CHECK_THROWS_AS(classify_discrepancy(s, 50, 50.01, 450, 900, cfg),
                    const Error&);
}

TEST_CASE("classify: line trip reads as a topology change") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    auto sched =
        tu::make_schedule(1100, 1e-3, 10, 0.01, 3, 62, {{500.0, {{5, 7}}}});
    AmbientSeries s = simulate_ambient(c, Frame::coi(mm.M, 2), sched);
    ClassifyConfig cfg;
    cfg.M_ind = mm.M.head(2);
    CHECK(classify_discrepancy(s, 50, 450, 800, 1100, cfg) ==
          DiscrepancyKind::TopologyChange);
}

TEST_CASE("classify: pure mean shift reads as an operating-point change") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    auto sched = tu::make_schedule(900, 1e-3, 10, 0.01, 3, 63);
    AmbientSeries s = simulate_ambient(c, Frame::coi(mm.M, 2), sched);
    // re-dispatch look-alike: offset every channel between the two windows
    int shift_row = s.row_at(455);
    for (int col = 0; col < s.channels(); ++col)
        s.delta.col(col).tail(s.samples() - shift_row).array() +=
            0.05 * (col % 2 ? 1 : -1);
    ClassifyConfig cfg;
    cfg.M_ind = mm.M.head(2);
    CHECK(classify_discrepancy(s, 50, 450, 460, 900, cfg) ==
          DiscrepancyKind::OperatingPointChange);
}
