#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>

#include "gridsense/estimator.hpp"
#include "gridsense/simulator.hpp"
#include "gridsense/spectral.hpp"
#include "testutil.hpp"

using namespace gridsense;

namespace {

// Block-diagonal builder: each block is either a 1x1 real eigenvalue or a
// 2x2 rotation [[a,-w],[w,a]] contributing a +- jw. Keeps tied real parts
// bit-exact, which the tie-break tests rely on.
Mat blocks(const std::vector<std::pair<double, double>>& modes) {
    int n = 0;
    for (auto& m : modes) n += m.second == 0.0 ? 1 : 2;
    Mat A = Mat::Zero(n, n);
    int at = 0;
    for (auto& [a, w] : modes) {
        if (w == 0.0) {
            A(at, at) = a;
            at += 1;
        } else {
            A(at, at) = a;
            A(at, at + 1) = -w;
            A(at + 1, at) = w;
            A(at + 1, at + 1) = a;
            at += 2;
        }
    }
    return A;
}

Mat nine_bus_A(Mat* K_out = nullptr) {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M, 2);
    Equilibrium eq = solve_equilibrium(mm, f, initial_rotor_angles(c));
    Mat K = jacobian_analytic(mm, eq.delta, f);
    if (K_out) *K_out = K;
    return assemble_state_matrix(K, mm.M, mm.D, f).A;
}

} // namespace

TEST_CASE("decomposition recovers diagonal and rotation spectra") {
    Mat d = Mat::Zero(2, 2);
    d(0, 0) = -1;
    d(1, 1) = -2;
    SpectralReport rd = eigen_decompose(d);
    REQUIRE(rd.eigenvalues.size() == 2);
    CHECK(rd.eigenvalues[0] == Cplx(-1, 0));
    CHECK(rd.eigenvalues[1] == Cplx(-2, 0));
    CHECK(rd.source == SpectralReport::Source::ModelBased);
    CHECK(!rd.degenerate);

    Mat r = Mat::Zero(2, 2);
    r(0, 1) = 1;
    r(1, 0) = -1;
    SpectralReport rr = eigen_decompose(r, SpectralReport::Source::Estimated);
    CHECK(rr.source == SpectralReport::Source::Estimated);
    // +-j as a conjugate pair
    double im0 = rr.eigenvalues[0].imag(), im1 = rr.eigenvalues[1].imag();
    CHECK(std::abs(rr.eigenvalues[0].real()) < 1e-14);
    CHECK(std::abs(rr.eigenvalues[1].real()) < 1e-14);
    CHECK(std::abs(im0) == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(im0 == doctest::Approx(-im1).epsilon(1e-14));
}

TEST_CASE("eigenvector residuals and biorthogonality") {
    tu::RandomSystem s = tu::random_stable_system(4, 31);
    SpectralReport rep = eigen_decompose(s.A);
    const int n = static_cast<int>(rep.eigenvalues.size());
    REQUIRE(n == 8);
    CMat Ac = s.A.cast<Cplx>();
    for (int i = 0; i < n; ++i) {
        double res =
            (Ac * rep.right.col(i) - rep.eigenvalues[i] * rep.right.col(i))
                .norm();
        CHECK(res < 1e-8 * std::max(1.0, s.A.norm()));
    }
    // left vectors come from the inverse of the right basis, so w_i^T v_j is
    // the identity, not merely approximately so
    CMat W = rep.left.transpose() * rep.right;
    CHECK((W - CMat::Identity(n, n)).norm() < 1e-10);

    // conjugate closure: every non-real eigenvalue has its conjugate present
    for (int i = 0; i < n; ++i) {
        if (std::abs(rep.eigenvalues[i].imag()) < 1e-12) continue;
        bool found = false;
        for (int j = 0; j < n; ++j)
            if (std::abs(rep.eigenvalues[j] - std::conj(rep.eigenvalues[i])) <
                1e-10)
                found = true;
        CHECK(found);
    }
}

TEST_CASE("decomposition input validation") {
    CHECK_THROWS_AS(eigen_decompose(Mat::Zero(2, 3)), const Error&);
    Mat bad = Mat::Zero(2, 2);
    bad(0, 1) = std::numeric_limits<double>::quiet_NaN();
    try {
        eigen_decompose(bad);
        FAIL("expected throw");
    } catch (const Error& e) {
        CHECK(e.kind == Error::Kind::Config);
    }
    bad(0, 1) = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(eigen_decompose(bad), const Error&);
}

TEST_CASE("trace identity on the 9-bus model") {
    Mat A = nine_bus_A();
    SpectralReport rep = eigen_decompose(A);
    Cplx sum = 0;
    for (auto l : rep.eigenvalues) sum += l;
    // trace of the state matrix is -(D1/M1 + D2/M2) for the two independent
    // machines; both ratios are 1 in this case
    CHECK(sum.real() == doctest::Approx(-2.0).epsilon(1e-9));
    CHECK(std::abs(sum.imag()) < 1e-9);
    CHECK(sum.real() == doctest::Approx(A.trace()).epsilon(1e-12));
}

TEST_CASE("rightmost selection and tie-breaking") {
    // real part dominates: {-1, -0.1 +- 2j} -> -0.1 + 2j
    SpectralReport a = eigen_decompose(blocks({{-1, 0}, {-0.1, 2}}));
    Rightmost ra = rightmost_eigenvalue(a);
    CHECK(ra.lambda.real() == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(ra.lambda.imag() == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(a.eigenvalues[ra.index] == ra.lambda);

    // equal real parts: the aperiodic (smaller |imag|) candidate wins
    SpectralReport b = eigen_decompose(blocks({{-0.1, 2}, {-0.1, 0}}));
    Rightmost rb = rightmost_eigenvalue(b);
    CHECK(rb.lambda.real() == doctest::Approx(-0.1).epsilon(1e-14));
    CHECK(std::abs(rb.lambda.imag()) < 1e-14);

    // two oscillatory candidates: lower frequency wins
    SpectralReport c = eigen_decompose(blocks({{-0.1, 2}, {-0.1, 1}}));
    Rightmost rc = rightmost_eigenvalue(c);
    CHECK(std::abs(rc.lambda.imag()) == doctest::Approx(1.0).epsilon(1e-12));

    // returned pair is normalized and consistent
    CMat Ac = blocks({{-1, 0}, {-0.1, 2}}).cast<Cplx>();
    CHECK(std::abs((ra.w.transpose() * ra.v)(0) - Cplx(1, 0)) < 1e-12);
    CHECK((Ac * ra.v - ra.lambda * ra.v).norm() < 1e-10);

    SpectralReport empty;
    CHECK_THROWS_AS(rightmost_eigenvalue(empty), const Error&);
}

TEST_CASE("rightmost eigenvalue of the 39-bus model, intact and stressed") {
    NetworkCase c = tu::load("ieee39.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M);
    Equilibrium eq0 = solve_equilibrium(mm, f, initial_rotor_angles(c));
    Mat K0 = jacobian_analytic(mm, eq0.delta, f);
    Mat A0 = assemble_state_matrix(K0, mm.M, mm.D, f).A;
    Rightmost r0 = rightmost_eigenvalue(eigen_decompose(A0));
    CHECK(r0.lambda.real() ==
          doctest::Approx(-0.24361180350529898).epsilon(1e-7));

    // double line loss pushing the system toward its stability margin: the
    // critical eigenvalue moves right and becomes aperiodic (real)
    NetworkCase cp = perturb_topology(c, {{2, 25}, {1, 39}});
    for (int g = 0; g < 10; ++g) cp.generators[g].E = mm.red.E(g);
    MachineModel mp = build_model(cp);
    Equilibrium eqp = solve_equilibrium(mp, f, eq0.delta);
    Mat Kp = jacobian_analytic(mp, eqp.delta, f);
    Mat Ap = assemble_state_matrix(Kp, mm.M, mm.D, f).A;
    Rightmost rp = rightmost_eigenvalue(eigen_decompose(Ap));
    CHECK(rp.lambda.real() ==
          doctest::Approx(-0.092759100557101584).epsilon(1e-7));
    CHECK(std::abs(rp.lambda.imag()) < 1e-9);
    CHECK(rp.lambda.real() > r0.lambda.real());

    // identical input gives bit-identical rightmost output
    Rightmost again = rightmost_eigenvalue(eigen_decompose(Ap));
    CHECK(again.lambda == rp.lambda);
    CHECK(again.index == rp.index);
}

TEST_CASE("participation factors: diagonal pattern and normalization") {
    Mat d = Mat::Zero(3, 3);
    d(0, 0) = -1;
    d(1, 1) = -2;
    d(2, 2) = -3;
    Mat P = participation_factors(eigen_decompose(d));
    CHECK((P - Mat::Identity(3, 3)).norm() < 1e-12);

    tu::RandomSystem s = tu::random_stable_system(3, 77);
    Mat Ps = participation_factors(eigen_decompose(s.A));
    for (int i = 0; i < Ps.cols(); ++i) {
        CHECK(Ps.col(i).maxCoeff() == doctest::Approx(1.0).epsilon(1e-12));
        CHECK(Ps.col(i).minCoeff() >= 0.0);
    }
}

TEST_CASE("defective matrix: degeneracy flagged, factors withheld") {
    Mat j = Mat::Zero(2, 2);
    j(0, 1) = 1; // Jordan block, eigenvalue 0 twice, rank-one eigenspace
    SpectralReport rep = eigen_decompose(j);
    CHECK(rep.degenerate);
    Mat P = participation_factors(rep);
    CHECK(std::isnan(P(0, 0)));
    CHECK(std::isnan(P(1, 1)));

    CHECK(!eigen_decompose(blocks({{-1, 0}, {-2, 3}})).degenerate);
}

TEST_CASE("spectrum comparison metric") {
    std::vector<Cplx> a = {{-1, 2}, {-1, -2}, {-3, 0}};
    CHECK(spectrum_hausdorff(a, a) == 0.0);

    CHECK(spectrum_hausdorff({{0, 0}}, {{1, 0}}) == doctest::Approx(1.0));
    // directed distances differ; the metric takes the worse one
    CHECK(spectrum_hausdorff({{0, 0}, {3, 0}}, {{1, 0}}) ==
          doctest::Approx(2.0));
    CHECK(spectrum_hausdorff({{1, 0}}, {{0, 0}, {3, 0}}) ==
          doctest::Approx(2.0));
    CHECK(spectrum_hausdorff({{0, 1}, {0, -1}}, {{0, 1}}) ==
          doctest::Approx(2.0));

    CHECK_THROWS_AS(spectrum_hausdorff({}, a), const Error&);
    CHECK_THROWS_AS(spectrum_hausdorff(a, {}), const Error&);
}

TEST_CASE("estimated spectra track the model across seeds") {
    NetworkCase c = tu::load("wscc9.case");
    MachineModel mm = build_model(c);
    Frame f = Frame::coi(mm.M, 2);
    Vec Mi = mm.M.head(2), Di = mm.D.head(2);
    Mat A_model = nine_bus_A();
    SpectralReport rep_m = eigen_decompose(A_model);
    Mat P_m = participation_factors(rep_m);

    const int seeds = 10;
    std::vector<double> haus(seeds), right_re(seeds);
    std::vector<int> machine_flips(seeds, 0);
    tu::parallel_for(seeds, [&](int i) {
        auto sched = tu::make_schedule(500, 1e-3, 10, 0.01, 3, 4200 + i);
        AmbientSeries s = simulate_ambient(c, f, sched);
        CovariancePair cov = sample_covariance(s, 50, 500);
        JacobianEstimate jf =
            estimate_jacobian(cov, Mi, Method::FullAppendix, &Di);
        Mat Ae = assemble_estimated_state_matrix(jf, Mi, Di).A;
        SpectralReport rep_e =
            eigen_decompose(Ae, SpectralReport::Source::Estimated);
        haus[i] = spectrum_hausdorff(rep_e.eigenvalues, rep_m.eigenvalues);
        right_re[i] = rightmost_eigenvalue(rep_e).lambda.real();

        // machine-level argmax must agree per oscillatory mode; the state-level
        // argmax is not informative here because the angle and speed of one
        // machine carry equal weight in a swing mode
        Mat P_e = participation_factors(rep_e);
        const int m = 2;
        for (size_t ie = 0; ie < rep_e.eigenvalues.size(); ++ie) {
            if (rep_e.eigenvalues[ie].imag() <= 1e-9) continue;
            size_t best = 0;
            double bd = std::numeric_limits<double>::max();
            for (size_t im = 0; im < rep_m.eigenvalues.size(); ++im) {
                double dd = std::abs(rep_e.eigenvalues[ie] -
                                     rep_m.eigenvalues[im]);
                if (dd < bd) bd = dd, best = im;
            }
            int am_e = 0, am_m = 0;
            P_e.col(static_cast<int>(ie)).maxCoeff(&am_e);
            P_m.col(static_cast<int>(best)).maxCoeff(&am_m);
            if (am_e % m != am_m % m) ++machine_flips[i];
        }
    });
    for (int i = 0; i < seeds; ++i) {
        CHECK(haus[i] < 0.15);
        CHECK(right_re[i] < 0.0); // stability verdict preserved
        CHECK(machine_flips[i] == 0);
    }
}
