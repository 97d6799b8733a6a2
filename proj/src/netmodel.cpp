#include <algorithm>
#include <unordered_map>

#include "gridsense/netmodel.hpp"

namespace gridsense {

int NetworkCase::bus_index(int id) const {
    for (size_t i = 0; i < buses.size(); ++i)
        if (buses[i].id == id) return static_cast<int>(i);
    throw Error(Error::Kind::NotFound, "unknown bus id " + std::to_string(id));
}

CVec NetworkCase::bus_voltages() const {
    CVec v(buses.size());
    for (size_t i = 0; i < buses.size(); ++i)
        v(i) = std::polar(buses[i].vm, buses[i].va);
    return v;
}

void NetworkCase::validate() const {
    for (const auto& b : buses)
        if (b.vm <= 0)
            throw Error(Error::Kind::Config,
                        "bus " + std::to_string(b.id) + ": voltage magnitude must be > 0");
    for (const auto& br : branches) {
        bus_index(br.from);
        bus_index(br.to);
    }
    for (const auto& g : generators) {
        bus_index(g.bus);
        if (g.M <= 0)
            throw Error(Error::Kind::Config,
                        "generator at bus " + std::to_string(g.bus) + ": M must be > 0");
        if (g.xdp <= 0)
            throw Error(Error::Kind::Config,
                        "generator at bus " + std::to_string(g.bus) + ": x'd must be > 0");
    }
    for (const auto& l : loads) bus_index(l.bus);
}

CMat build_ybus(const NetworkCase& c) {
    const int nb = static_cast<int>(c.buses.size());
    CMat Y = CMat::Zero(nb, nb);
    for (const auto& br : c.branches) {
        if (!br.in_service) continue;
        if (br.r == 0.0 && br.x == 0.0)
            throw Error(Error::Kind::DegenerateBranch,
                        "branch " + std::to_string(br.from) + "-" +
                            std::to_string(br.to) + " has r = x = 0");
        int i = c.bus_index(br.from), j = c.bus_index(br.to);
        Cplx y = 1.0 / Cplx(br.r, br.x);
        Cplx half_b(0.0, br.b / 2.0);
        Y(i, i) += y + half_b;
        Y(j, j) += y + half_b;
        Y(i, j) -= y;
        Y(j, i) -= y;
    }
    return Y;
}

CMat embed_loads_and_generators(const CMat& ybus, const NetworkCase& c) {
    const int nb = static_cast<int>(c.buses.size());
    const int ng = static_cast<int>(c.generators.size());
    if (ybus.rows() != nb || ybus.cols() != nb)
        throw Error(Error::Kind::Config, "ybus dimension does not match case");

    CMat Y = CMat::Zero(nb + ng, nb + ng);
    Y.topLeftCorner(nb, nb) = ybus;

    for (const auto& l : c.loads) {
        int i = c.bus_index(l.bus);
        double vm = c.buses[i].vm;
        if (vm == 0.0)
            throw Error(Error::Kind::SingularLoad,
                        "load at bus " + std::to_string(l.bus) + " with |V| = 0");
        // constant-impedance conversion at the solved voltage
        Y(i, i) += Cplx(l.p, -l.q) / (vm * vm);
    }
    for (int g = 0; g < ng; ++g) {
        int i = c.bus_index(c.generators[g].bus);
        int k = nb + g;
        Cplx y = 1.0 / Cplx(0.0, c.generators[g].xdp);
        Y(i, i) += y;
        Y(k, k) += y;
        Y(i, k) -= y;
        Y(k, i) -= y;
    }
    return Y;
}

CMat kron_reduce(const CMat& yfull, const std::vector<int>& retained) {
    const int n = static_cast<int>(yfull.rows());
    if ((yfull - yfull.transpose()).cwiseAbs().maxCoeff() > 1e-9)
        throw Error(Error::Kind::Config,
                    "kron_reduce requires a (complex) symmetric admittance matrix");

    std::vector<bool> keep(n, false);
    for (int idx : retained) {
        if (idx < 0 || idx >= n)
            throw Error(Error::Kind::NotFound,
                        "retained index " + std::to_string(idx) + " out of range");
        keep[idx] = true;
    }
    std::vector<int> elim;
    for (int i = 0; i < n; ++i)
        if (!keep[i]) elim.push_back(i);
    if (elim.empty()) return yfull;

    const int nr = static_cast<int>(retained.size());
    const int ne = static_cast<int>(elim.size());
    CMat Yrr(nr, nr), Yre(nr, ne), Yer(ne, nr), Yee(ne, ne);
    for (int a = 0; a < nr; ++a) {
        for (int b = 0; b < nr; ++b) Yrr(a, b) = yfull(retained[a], retained[b]);
        for (int b = 0; b < ne; ++b) Yre(a, b) = yfull(retained[a], elim[b]);
    }
    for (int a = 0; a < ne; ++a) {
        for (int b = 0; b < nr; ++b) Yer(a, b) = yfull(elim[a], retained[b]);
        for (int b = 0; b < ne; ++b) Yee(a, b) = yfull(elim[a], elim[b]);
    }

    Eigen::PartialPivLU<CMat> lu(Yee);
    // cheap condition estimate: diag magnitude spread of U
    double umax = 0, umin = 1e300;
    for (int i = 0; i < ne; ++i) {
        double u = std::abs(lu.matrixLU()(i, i));
        umax = std::max(umax, u);
        umin = std::min(umin, u);
    }
    if (umin == 0 || umax / umin > 1e12)
        throw Error(Error::Kind::ReductionSingular,
                    "eliminated block is singular or near-singular (cond est " +
                        std::to_string(umin == 0 ? 1e300 : umax / umin) + ")");
    return Yrr - Yre * lu.solve(Yer);
}

std::pair<double, double> compute_internal_emf(Cplx v, Cplx s, double xdp) {
    if (std::abs(v) == 0.0)
        throw Error(Error::Kind::SingularLoad, "terminal voltage is zero");
    Cplx e = v + Cplx(0.0, xdp) * std::conj(s / v);
    return {std::abs(e), std::arg(e)};
}

CVec generator_injections(const NetworkCase& c) {
    CMat Y = build_ybus(c);
    CVec v = c.bus_voltages();
    CVec inj = v.array() * (Y * v).conjugate().array();
    CVec out(c.generators.size());
    for (size_t g = 0; g < c.generators.size(); ++g) {
        int i = c.bus_index(c.generators[g].bus);
        Cplx s = inj(i);
        for (const auto& l : c.loads)
            if (l.bus == c.generators[g].bus) s += Cplx(l.p, l.q);
        out(g) = s;
    }
    return out;
}

NetworkCase perturb_topology(const NetworkCase& c,
                             const std::vector<std::pair<int, int>>& trips) {
    NetworkCase out = c;
    for (auto [f, t] : trips) {
        bool found = false;
        for (auto& br : out.branches) {
            bool match = (br.from == f && br.to == t) || (br.from == t && br.to == f);
            if (match && br.in_service) {
                br.in_service = false;
                found = true;
                break;
            }
        }
        if (!found)
            throw Error(Error::Kind::NotFound,
                        "no in-service branch " + std::to_string(f) + "-" +
                            std::to_string(t));
    }
    return out;
}

ReducedNetwork reduce_case(const NetworkCase& c) {
    c.validate();
    const int nb = static_cast<int>(c.buses.size());
    const int ng = static_cast<int>(c.generators.size());
    if (ng == 0) throw Error(Error::Kind::Config, "case has no generators");

    CMat yfull = embed_loads_and_generators(build_ybus(c), c);
    std::vector<int> internal(ng);
    for (int g = 0; g < ng; ++g) internal[g] = nb + g;

    ReducedNetwork red;
    red.n = ng;
    red.Y = kron_reduce(yfull, internal);
    red.E = Vec(ng);
    CVec inj = generator_injections(c);
    for (int g = 0; g < ng; ++g) {
        const auto& gen = c.generators[g];
        if (gen.E) {
            red.E(g) = *gen.E;
        } else {
            Cplx v = std::polar(c.buses[c.bus_index(gen.bus)].vm,
                                c.buses[c.bus_index(gen.bus)].va);
            red.E(g) = compute_internal_emf(v, inj(g), gen.xdp).first;
        }
    }
    return red;
}

Vec initial_rotor_angles(const NetworkCase& c) {
    const int ng = static_cast<int>(c.generators.size());
    CVec inj = generator_injections(c);
    Vec d0(ng);
    for (int g = 0; g < ng; ++g) {
        const auto& gen = c.generators[g];
        const auto& b = c.buses[c.bus_index(gen.bus)];
        d0(g) = compute_internal_emf(std::polar(b.vm, b.va), inj(g), gen.xdp).second;
    }
    return d0;
}

} // namespace gridsense
