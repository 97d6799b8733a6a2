#include <charconv>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "gridsense/io.hpp"

namespace gridsense {

namespace {

// shortest exact decimal representation; parses back to the same double
std::string fmt(double v) {
    char buf[32];
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::filesystem::path events_path(const std::string& path) {
    std::filesystem::path p(path);
    return p.parent_path() / (p.stem().string() + ".events.csv");
}

double parse_num(const std::string& tok, const std::string& what) {
    char* end = nullptr;
    double v = std::strtod(tok.c_str(), &end);
    if (end == tok.c_str() || *end != '\0')
        throw Error(Error::Kind::Config, "bad number in " + what + ": " + tok);
    return v;
}

} // namespace

void save_series(const AmbientSeries& s, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw Error(Error::Kind::Config, "cannot write " + path);
    f << "# gridsense-series v1\n";
    f << "# rate=" << fmt(s.sample_rate) << " t0=" << fmt(s.t0)
      << " frame=" << frame_tag(s.frame);
    if (s.frame.tag == Frame::Tag::Coi) f << " mt=" << fmt(s.frame.MT);
    f << " labels=";
    for (size_t i = 0; i < s.labels.size(); ++i)
        f << (i ? "," : "") << s.labels[i];
    f << "\n";
    f << "t";
    for (int lb : s.labels) f << ",delta_" << lb;
    for (int lb : s.labels) f << ",omega_" << lb;
    f << "\n";

    std::string line;
    for (int r = 0; r < s.samples(); ++r) {
        line.clear();
        line += fmt(s.t0 + r / s.sample_rate);
        for (int c = 0; c < s.channels(); ++c) {
            line += ',';
            line += fmt(s.delta(r, c));
        }
        for (int c = 0; c < s.channels(); ++c) {
            line += ',';
            line += fmt(s.omega(r, c));
        }
        line += '\n';
        f << line;
    }
    if (!f) throw Error(Error::Kind::Config, "write failed: " + path);

    auto ep = events_path(path);
    if (!s.events.empty()) {
        std::ofstream ef(ep);
        if (!ef) throw Error(Error::Kind::Config, "cannot write " + ep.string());
        ef << "t,description\n";
        for (const auto& [t, what] : s.events) ef << fmt(t) << "," << what << "\n";
    } else {
        std::error_code ec;
        std::filesystem::remove(ep, ec); // stale sidecar would lie
    }
}

AmbientSeries load_series(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw Error(Error::Kind::NotFound, "cannot open " + path);

    AmbientSeries s;
    std::string line;
    int lineno = 0;
    bool have_meta = false;
    std::string mt_tok;

    // metadata comments
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        if (line[0] != '#') break;
        std::istringstream iss(line.substr(1));
        std::string tok;
        while (iss >> tok) {
            auto eq = tok.find('=');
            if (eq == std::string::npos) continue;
            std::string key = tok.substr(0, eq), val = tok.substr(eq + 1);
            if (key == "rate") s.sample_rate = parse_num(val, "rate");
            else if (key == "t0") s.t0 = parse_num(val, "t0");
            else if (key == "mt") mt_tok = val;
            else if (key == "frame") {
                if (val == "plain") s.frame = Frame::plain();
                else if (val.rfind("coi:", 0) == 0) {
                    s.frame.tag = Frame::Tag::Coi;
                    s.frame.dep = std::stoi(val.substr(4)) - 1;
                } else if (val.rfind("ref:", 0) == 0) {
                    s.frame = Frame::machine_ref(std::stoi(val.substr(4)) - 1);
                } else
                    throw Error(Error::Kind::Config, "unknown frame " + val);
                have_meta = true;
            } else if (key == "labels") {
                std::istringstream ls(val);
                std::string item;
                while (std::getline(ls, item, ','))
                    s.labels.push_back(std::stoi(item));
            }
        }
    }
    if (!have_meta || s.sample_rate <= 0 || s.labels.empty())
        throw Error(Error::Kind::Config,
                    path + ": missing series metadata header");
    if (!mt_tok.empty()) s.frame.MT = parse_num(mt_tok, "mt");

    // `line` now holds the column header; data rows follow
    const int C = static_cast<int>(s.labels.size());
    std::vector<std::vector<double>> rows;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::vector<double> vals;
        vals.reserve(2 * C + 1);
        size_t pos = 0;
        while (pos <= line.size()) {
            size_t c = line.find(',', pos);
            if (c == std::string::npos) c = line.size();
            vals.push_back(parse_num(line.substr(pos, c - pos),
                                     path + ":" + std::to_string(lineno)));
            pos = c + 1;
        }
        if (static_cast<int>(vals.size()) != 2 * C + 1)
            throw Error(Error::Kind::Config,
                        path + ":" + std::to_string(lineno) +
                            ": expected " + std::to_string(2 * C + 1) +
                            " columns");
        rows.push_back(std::move(vals));
    }
    if (rows.empty())
        throw Error(Error::Kind::Config, path + ": no samples");

    const int T = static_cast<int>(rows.size());
    s.delta = Mat(T, C);
    s.omega = Mat(T, C);
    for (int r = 0; r < T; ++r) {
        for (int c = 0; c < C; ++c) {
            s.delta(r, c) = rows[r][1 + c];
            s.omega(r, c) = rows[r][1 + C + c];
        }
    }

    auto ep = events_path(path);
    std::ifstream ef(ep);
    if (ef) {
        std::string el;
        std::getline(ef, el); // header
        while (std::getline(ef, el)) {
            if (el.empty()) continue;
            auto c = el.find(',');
            if (c == std::string::npos)
                throw Error(Error::Kind::Config,
                            ep.string() + ": malformed event row");
            s.events.emplace_back(parse_num(el.substr(0, c), "event time"),
                                  el.substr(c + 1));
        }
    }
    return s;
}

} // namespace gridsense
