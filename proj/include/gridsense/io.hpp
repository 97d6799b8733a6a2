#pragma once
#include <string>

#include <json.hpp>

#include "gridsense/estimator.hpp"

namespace gridsense {

// ---- case files -----------------------------------------------------------
// Sectioned text format: `name`, `base`, then `buses` / `branches` /
// `generators` / `loads` blocks of whitespace-separated numbers, `#` comments,
// closed by `end`. Angles in radians, powers in per-unit on `base` MVA.
NetworkCase load_case(const std::string& path);
void save_case(const NetworkCase& c, const std::string& path);

// ---- time-series CSV ------------------------------------------------------
// Header `t,delta_1..delta_m,omega_1..omega_m`, one row per sample, 15
// significant digits. A leading metadata comment carries rate/t0/frame so a
// written series parses back to an equal value. Events go to a sidecar
// `<stem>.events.csv` with rows `t,description`.
void save_series(const AmbientSeries& s, const std::string& path);
AmbientSeries load_series(const std::string& path);

// ---- structured reports ---------------------------------------------------
nlohmann::json mat_json(const Mat& m);
nlohmann::json cov_json(const CovariancePair& cov);
nlohmann::json frame_json(const Frame& f);
std::string frame_tag(const Frame& f); // "plain" | "coi:K" | "ref:K"

// FNV-1a over the canonical config text; stable across platforms so reports
// are reproducible byte-for-byte.
std::uint64_t config_hash(const std::string& canonical);

void write_json(const nlohmann::json& doc, const std::string& path);

} // namespace gridsense
