#pragma once
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "gridsense/error.hpp"

namespace gridsense {

using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;
using CMat = Eigen::MatrixXcd;
using CVec = Eigen::VectorXcd;
using Cplx = std::complex<double>;

struct Bus {
    int id;
    double vm; // solved voltage magnitude, p.u.
    double va; // solved angle, rad
};

struct Branch {
    int from, to;
    double r, x; // series impedance, p.u.
    double b;    // total line charging, p.u.
    bool in_service = true;
};

struct Generator {
    int bus;
    double xdp; // transient reactance, p.u.
    double M;   // inertia, s^2 * p.u.
    double D;   // damping, p.u.
    double Pm;  // mechanical power, p.u.
    std::optional<double> E; // emf magnitude override; computed from the
                             // operating point when absent
};

struct Load {
    int bus;
    double p, q; // p.u.
};

struct NetworkCase {
    std::string name;
    double mva_base = 100.0;
    std::vector<Bus> buses;
    std::vector<Branch> branches;
    std::vector<Generator> generators;
    std::vector<Load> loads;

    int bus_index(int id) const; // position in `buses`, throws NotFound
    CVec bus_voltages() const;   // complex phasors in file order
    void validate() const;       // structural invariants; throws Config
};

// Reduced admittance among generator internal nodes plus their emfs.
struct ReducedNetwork {
    int n = 0;
    CMat Y; // n x n, complex symmetric; entries G_ij + j B_ij
    Vec E;  // emf magnitudes
};

// Nodal admittance over the case's buses: series branches and line charging
// only (loads and generators enter via embed_loads_and_generators).
CMat build_ybus(const NetworkCase& c);

// Adds constant-impedance load shunts at the solved voltages and one
// internal node per generator behind x'd. Internal nodes are appended
// after the buses, in generator order.
CMat embed_loads_and_generators(const CMat& ybus, const NetworkCase& c);

// Gaussian elimination of all nodes not listed in `retained`;
// Y_red = Y_rr - Y_re Y_ee^-1 Y_er. Rejects non-symmetric input.
CMat kron_reduce(const CMat& yfull, const std::vector<int>& retained);

// E and rotor angle behind the transient reactance: E e^{j d0} = V + j x'd (S/V)^*
std::pair<double, double> compute_internal_emf(Cplx v_terminal, Cplx s_injection,
                                               double xdp);

// Complex power injected at each generator bus, recovered from the solved
// voltages: S_i = V_i (Ybus V)_i^* + S_load_i.
CVec generator_injections(const NetworkCase& c);

// Copy of the case with the listed branches (matched by endpoint bus pair,
// either orientation, first in-service match) taken out of service.
NetworkCase perturb_topology(const NetworkCase& c,
                             const std::vector<std::pair<int, int>>& trips);

// Full chain: ybus -> shunt/generator embedding -> Kron reduction to the
// generator internal nodes, with emfs computed from the operating point
// unless overridden in the case.
ReducedNetwork reduce_case(const NetworkCase& c);

// Rotor angles behind x'd at the solved operating point, in generator order.
Vec initial_rotor_angles(const NetworkCase& c);

} // namespace gridsense
