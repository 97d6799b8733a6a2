#pragma once
#include <string>
#include <tuple>
#include <vector>

#include "gridsense/estimator.hpp"

namespace gridsense {

// ||X - Y||_F / ||Y||_F
double frobenius_distance(const Mat& X, const Mat& Y);

struct ScanPoint {
    double t;        // window end
    double distance; // NaN when the window's estimate failed
    bool valid;      // false during warm-up, failed estimates, event straddle
};

struct DetectionReport {
    std::vector<ScanPoint> distance_series;
    double threshold = 0;
    std::vector<std::pair<double, std::string>> alarms;
    std::vector<std::pair<double, double>> invalid_band; // event-straddling spans
    Mat localization_surface;
    std::vector<int> ranked_machines; // 1-based labels
};

struct ScanConfig {
    double window_s = 300;
    double stride_s = 1;
    double calibration_s = 400; // threshold = max(floor, 3 * median over this span)
    double threshold_floor = 0.08;
    double threshold_override = 0; // > 0 skips calibration
    Method method = Method::Simplified;
    Vec D_ind;               // per-machine damping, required for FullAppendix
    bool use_events = false; // true: windows straddling known events are
                             // excluded from alarm logic instead of alarmed
};

// Trailing-window Jacobian estimates compared against a fixed model-based
// matrix. Estimation failures inside a window are recorded, not fatal.
// An alarm entry "sustained" is added once the distance has stayed above
// threshold for at least one full window length.
DetectionReport moving_window_scan(const AmbientSeries& s, const Mat& J_model,
                                   const Vec& M_ind, const ScanConfig& cfg);

struct Localization {
    Mat surface; // |J_model - J_est| entrywise
    std::vector<int> ranked; // 1-based machine labels by top-q involvement
};

// Machines ranked by how often they index the q largest surface entries,
// ties broken by the summed magnitude of the entries they touch.
Localization localize(const Mat& J_model, const Mat& J_est, int top_q = 4,
                      const std::vector<int>* labels = nullptr);

enum class DiscrepancyKind { TopologyChange, OperatingPointChange, NoChange };

struct ClassifyConfig {
    Vec M_ind;
    Method method = Method::Simplified;
    Vec D_ind; // required for FullAppendix
    double distance_threshold = 0.15; // between the two windows' estimates
    double mean_shift_sigmas = 5;     // vs pre-window channel std
};

// Compares per-channel means and windowed Jacobian estimates across two
// windows. A Jacobian-distance alarm dominates (a topology change also moves
// the means); a mean shift alone indicates an operating-point change.
DiscrepancyKind classify_discrepancy(const AmbientSeries& s,
                                     double pre_start, double pre_end,
                                     double post_start, double post_end,
                                     const ClassifyConfig& cfg);

} // namespace gridsense
