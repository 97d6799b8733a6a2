#include <fstream>

#include "gridsense/io.hpp"

namespace gridsense {

nlohmann::json mat_json(const Mat& m) {
    nlohmann::json rows = nlohmann::json::array();
    for (int i = 0; i < m.rows(); ++i) {
        nlohmann::json row = nlohmann::json::array();
        for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
        rows.push_back(std::move(row));
    }
    return {{"rows", m.rows()}, {"cols", m.cols()}, {"data", std::move(rows)}};
}

std::string frame_tag(const Frame& f) {
    switch (f.tag) {
    case Frame::Tag::Plain: return "plain";
    case Frame::Tag::Coi: return "coi:" + std::to_string(f.dep + 1);
    case Frame::Tag::MachineRef: return "ref:" + std::to_string(f.ref + 1);
    }
    return "plain";
}

nlohmann::json frame_json(const Frame& f) {
    nlohmann::json j{{"tag", frame_tag(f)}};
    if (f.tag == Frame::Tag::Coi) {
        j["dependent_machine"] = f.dep + 1;
        j["total_inertia"] = f.MT;
    } else if (f.tag == Frame::Tag::MachineRef) {
        j["reference_machine"] = f.ref + 1;
    }
    return j;
}

nlohmann::json cov_json(const CovariancePair& cov) {
    return {{"frame", frame_json(cov.frame)},
            {"t_start", cov.t_start},
            {"t_end", cov.t_end},
            {"samples", cov.N},
            {"trend_flag", cov.trend_flag},
            {"Qdd", mat_json(cov.Qdd)},
            {"Qww", mat_json(cov.Qww)},
            {"Qdw", mat_json(cov.Qdw)}};
}

std::uint64_t config_hash(const std::string& canonical) {
    std::uint64_t h = 14695981039346656037ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void write_json(const nlohmann::json& doc, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error(Error::Kind::Config, "cannot write " + path);
    f << doc.dump(2) << "\n";
    if (!f) throw Error(Error::Kind::Config, "write failed: " + path);
}

} // namespace gridsense
