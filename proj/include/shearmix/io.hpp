#ifndef SHEARMIX_IO_HPP
#define SHEARMIX_IO_HPP

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "shearmix/flow.hpp"

namespace shearmix {

namespace detail {

/// Shortest decimal that round-trips a double (17 significant digits).
inline std::string fmt_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

} // namespace detail

/// CSV with a JSON header comment line, columns (j, y_j, u_m(y_j)).
/// The node values are exact multiples of p^{-m}; 17-digit output plus
/// integer re-scaling on import makes the round-trip bit-exact.
inline void export_flow_csv(const PiecewiseLinearFlow& flow, std::ostream& os) {
    nlohmann::json hdr = {
        {"p", flow.params().p},
        {"q", flow.params().q},
        {"m", flow.level()},
        {"alpha", flow.params().alpha},
        {"ell_m", flow.cell()},
        {"s_m", flow.slope_magnitude()},
    };
    os << "# " << hdr.dump() << "\n";
    os << "j,y,u\n";
    for (std::int64_t j = 0; j < flow.size(); ++j)
        os << j << ',' << detail::fmt_double(flow.node_y(j)) << ','
           << detail::fmt_double(flow.node_value(j)) << "\n";
}

inline void export_flow_csv(const PiecewiseLinearFlow& flow, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("export_flow_csv: cannot open " + path);
    export_flow_csv(flow, os);
}

inline PiecewiseLinearFlow import_flow_csv(std::istream& is) {
    std::string line;
    if (!std::getline(is, line) || line.rfind("# ", 0) != 0)
        throw std::runtime_error("import_flow_csv: missing JSON header line");
    nlohmann::json hdr = nlohmann::json::parse(line.substr(2));
    FlowParams fp(hdr.at("p").get<int>(), hdr.at("q").get<int>());
    int m = hdr.at("m").get<int>();
    if (!std::getline(is, line) || line != "j,y,u")
        throw std::runtime_error("import_flow_csv: missing column header");

    double scale = fp.pow_p(m);
    std::int64_t n = fp.grid_size(m);
    std::vector<std::int32_t> scaled(static_cast<std::size_t>(n));
    std::int64_t rows = 0;
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::istringstream ls(line);
        std::string jf, yf, uf;
        if (!std::getline(ls, jf, ',') || !std::getline(ls, yf, ',') || !std::getline(ls, uf))
            throw std::runtime_error("import_flow_csv: malformed row: " + line);
        std::int64_t j = std::stoll(jf);
        if (j < 0 || j >= n) throw std::runtime_error("import_flow_csv: index out of range");
        double u = std::stod(uf);
        double s = u * scale;
        std::int64_t si = std::llround(s);
        if (std::abs(s - double(si)) > 1e-6)
            throw std::runtime_error("import_flow_csv: value not a multiple of p^-m: " + uf);
        scaled[std::size_t(j)] = std::int32_t(si);
        ++rows;
    }
    if (rows != n)
        throw std::runtime_error("import_flow_csv: expected " + std::to_string(n) + " rows, got " +
                                 std::to_string(rows));
    return PiecewiseLinearFlow(fp, m, std::move(scaled));
}

inline PiecewiseLinearFlow import_flow_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("import_flow_csv: cannot open " + path);
    return import_flow_csv(is);
}

} // namespace shearmix

#endif
