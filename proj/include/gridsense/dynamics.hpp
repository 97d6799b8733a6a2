#pragma once
#include <utility>
#include <vector>

#include "gridsense/netmodel.hpp"

namespace gridsense {

struct MachineModel {
    ReducedNetwork red;
    Vec M, D, Pm;
    int n() const { return red.n; }
    void validate() const; // M > 0, D >= 0, matching dimensions
};

// Reduce the case and collect the per-machine parameters.
MachineModel build_model(const NetworkCase& c);

// Coordinate frame for angles/speeds. Coi removes the inertia-weighted
// common mode and eliminates one dependent machine through the constraint
// sum(M_i d_i) = 0; MachineRef measures angles against one machine.
struct Frame {
    enum class Tag { Plain, Coi, MachineRef };
    Tag tag = Tag::Plain;
    int dep = -1;   // Coi: eliminated machine (index into the machine list)
    int ref = -1;   // MachineRef: reference machine
    double MT = 0;  // Coi: total inertia

    static Frame plain() { return {}; }
    // Dependent machine defaults to the largest inertia (best conditioning
    // of the elimination weights M_i / M_dep).
    static Frame coi(const Vec& M, int dep = -1);
    static Frame machine_ref(int k);

    int m(int n) const; // independent machine count
    std::vector<int> independent(int n) const; // machine indices kept as states
    void check(int n) const;
};

struct StateMatrix {
    Mat A; // [[0, I], [-M^-1 J, -M^-1 D]]
    Frame frame;
};

struct NoiseInput {
    Mat B;     // (2m) x n; top half zero
    Vec sigma; // per-machine load-variation std
};

// P_e,i = sum_j E_i E_j (G_ij cos(d_i - d_j) + B_ij sin(d_i - d_j))
Vec electrical_power(const MachineModel& mm, const Vec& delta);

// Inertia-weighted common-mode removal; returns (d_tilde, w_tilde) with
// sum(M d_tilde) = sum(M w_tilde) = 0.
std::pair<Vec, Vec> coi_transform(const Vec& delta, const Vec& omega, const Vec& M);
// Reattach a common mode: delta_i = d_tilde_i + delta0, omega likewise.
std::pair<Vec, Vec> inverse_coi(const Vec& d_tilde, const Vec& w_tilde,
                                double delta0, double omega0);

// Derivative of the frame's reduced nonlinear right-hand side with respect
// to its independent angles, scaled so that the acceleration block of the
// state matrix is -M^-1 J. `delta` is a full n-vector of angles (any common
// shift is immaterial).
Mat jacobian_analytic(const MachineModel& mm, const Vec& delta, const Frame& f);

struct Equilibrium {
    Vec delta;        // full n-vector in frame-normalized coordinates
    double omega_ss = 0; // Plain frame: uniform steady-state speed offset
    int iterations = 0;
    double residual = 0;
};

// Damped Newton on the frame's power-balance residual; throws Convergence
// after 50 iterations.
Equilibrium solve_equilibrium(const MachineModel& mm, const Frame& f,
                              const Vec& delta_init);

StateMatrix assemble_state_matrix(const Mat& J, const Vec& M, const Vec& D,
                                  const Frame& f);

// Additive noise mapping per frame. Plain: diagonal -M^-1 E^2 G sigma.
// Coi rows pick up the forwarded common-mode term (1/MT) E_k^2 G_kk s_k.
// MachineRef rows subtract the reference machine's own noise column.
NoiseInput assemble_noise_matrix(const MachineModel& mm, const Frame& f,
                                 const Vec& sigma);

// Stationary covariance of dx = A x dt + B dW: solves A C + C A^T = -B B^T
// by Kronecker vectorization. Requires Hurwitz A; result symmetrized and
// validated (residual < 1e-10 ||BB^T||_F, PSD).
Mat solve_lyapunov(const Mat& A, const Mat& B);

} // namespace gridsense
