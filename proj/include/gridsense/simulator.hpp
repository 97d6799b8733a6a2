#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "gridsense/dynamics.hpp"

namespace gridsense {

struct AmbientSeries {
    double sample_rate = 0; // Hz
    double t0 = 0;
    Frame frame;
    Mat delta; // T x m, rad
    Mat omega; // T x m, rad/s
    std::vector<int> labels; // 1-based machine ids per column
    std::vector<std::pair<double, std::string>> events;

    int samples() const { return static_cast<int>(delta.rows()); }
    int channels() const { return static_cast<int>(delta.cols()); }
    double t_end() const { return t0 + (samples() - 1) / sample_rate; }
    double time_at(int row) const { return t0 + row / sample_rate; }
    int row_at(double t) const; // nearest sample index, clamped
};

struct ScenarioSchedule {
    double duration = 0;        // s
    double dt_integration = 0;  // s
    Vec sigma_load;             // per-machine std
    // (time, branch endpoint pairs) applied cumulatively
    std::vector<std::pair<double, std::vector<std::pair<int, int>>>> contingencies;
    double meas_noise_delta = 0; // rad, applied post-hoc when nonzero
    double meas_noise_omega = 0; // rad/s
    double output_rate = 0;      // Hz
    std::uint64_t seed = 0;

    void validate() const;
};

// Euler-Maruyama integration of the nonlinear frame dynamics starting at the
// pre-fault equilibrium. Wiener increments come from one counter-based
// stream per machine, so runs are bit-reproducible for a given seed. At each
// contingency the reduced network is rebuilt from the perturbed case (emfs
// kept at their pre-fault values) and integration continues from the current
// state. In the Coi frame the dependent machine is reconstructed from the
// constraint every step rather than integrated. The MachineRef frame is
// produced by integrating the plain dynamics and re-referencing the output.
AmbientSeries simulate_ambient(const NetworkCase& c, const Frame& f,
                               const ScenarioSchedule& sched);

AmbientSeries add_measurement_noise(const AmbientSeries& s, double std_delta,
                                    double std_omega, std::uint64_t seed);

// Keep every k-th sample, k = source_rate / rate (must divide evenly).
AmbientSeries downsample(const AmbientSeries& s, double rate);

// Re-reference angles/speeds against machine `ref` (0-based column):
// d_i - d_ref for i != ref. Valid for Plain and Coi input (the common mode
// cancels identically).
AmbientSeries to_machine_ref(const AmbientSeries& s, int ref);

} // namespace gridsense
