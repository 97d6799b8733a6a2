#include <fstream>
#include <sstream>

#include "gridsense/io.hpp"

namespace gridsense {

namespace {

std::string strip_comment(const std::string& line) {
    auto pos = line.find('#');
    return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
    return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

[[noreturn]] void bad_line(const std::string& path, int lineno, const std::string& what) {
    throw Error(Error::Kind::Config,
                path + ":" + std::to_string(lineno) + ": " + what);
}

} // namespace

NetworkCase load_case(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error(Error::Kind::Config, "cannot open case file: " + path);

    NetworkCase c;
    std::string line, section;
    int lineno = 0;
    bool ended = false;
    while (std::getline(in, line)) {
        ++lineno;
        std::string body = strip_comment(line);
        if (blank(body)) continue;
        std::istringstream ls(body);
        std::string first;
        ls >> first;
        if (first == "name") { ls >> c.name; continue; }
        if (first == "base") {
            if (!(ls >> c.mva_base)) bad_line(path, lineno, "bad base value");
            continue;
        }
        if (first == "buses" || first == "branches" || first == "generators" ||
            first == "loads") { section = first; continue; }
        if (first == "end") { ended = true; break; }

        // data row: first token is already consumed, re-parse the full body
        std::istringstream row(body);
        if (section == "buses") {
            Bus b{};
            if (!(row >> b.id >> b.vm >> b.va)) bad_line(path, lineno, "bad bus row");
            c.buses.push_back(b);
        } else if (section == "branches") {
            Branch br{};
            int status = 1;
            if (!(row >> br.from >> br.to >> br.r >> br.x >> br.b))
                bad_line(path, lineno, "bad branch row");
            if (row >> status) br.in_service = status != 0;
            c.branches.push_back(br);
        } else if (section == "generators") {
            Generator g{};
            if (!(row >> g.bus >> g.xdp >> g.M >> g.D >> g.Pm))
                bad_line(path, lineno, "bad generator row");
            double e;
            if (row >> e) g.E = e;
            c.generators.push_back(g);
        } else if (section == "loads") {
            Load l{};
            if (!(row >> l.bus >> l.p >> l.q)) bad_line(path, lineno, "bad load row");
            c.loads.push_back(l);
        } else {
            bad_line(path, lineno, "data outside any section: '" + first + "'");
        }
    }
    if (!ended) throw Error(Error::Kind::Config, path + ": missing 'end' marker");
    c.validate();
    return c;
}

void save_case(const NetworkCase& c, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw Error(Error::Kind::Config, "cannot write case file: " + path);
    out.precision(14);
    out << "name " << c.name << "\nbase " << c.mva_base << "\n\nbuses\n";
    for (const auto& b : c.buses) out << b.id << " " << b.vm << " " << b.va << "\n";
    out << "\nbranches\n";
    for (const auto& br : c.branches)
        out << br.from << " " << br.to << " " << br.r << " " << br.x << " "
            << br.b << " " << (br.in_service ? 1 : 0) << "\n";
    out << "\ngenerators\n";
    for (const auto& g : c.generators) {
        out << g.bus << " " << g.xdp << " " << g.M << " " << g.D << " " << g.Pm;
        if (g.E) out << " " << *g.E;
        out << "\n";
    }
    out << "\nloads\n";
    for (const auto& l : c.loads) out << l.bus << " " << l.p << " " << l.q << "\n";
    out << "\nend\n";
}

} // namespace gridsense
