#include "rissec/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include "rissec/common.hpp"

namespace rissec {

double distance(const Position3D& a, const Position3D& b) {
    return std::hypot(a.x - b.x, a.y - b.y, a.z - b.z);
}

double arrival_departure_angle(const Position3D& node, const Position3D& ris) {
    const double d = distance(node, ris);
    if (d == 0.0) throw std::invalid_argument("arrival_departure_angle: node coincides with RIS");
    return std::asin(std::clamp((node.x - ris.x) / d, -1.0, 1.0));
}

std::vector<Position3D> ris_grid_points(double width, double length, int sections, double height) {
    const int side = static_cast<int>(std::lround(std::sqrt(sections)));
    if (sections < 1 || side * side != sections)
        throw std::invalid_argument("ris_grid_points: section count must be a perfect square");
    const double cell_w = width / side;
    const double cell_l = length / side;
    std::vector<Position3D> grid;
    grid.reserve(sections);
    for (int b = 0; b < side; ++b)
        for (int a = 0; a < side; ++a)
            grid.push_back({cell_w * (a + 0.5), cell_l * (b + 0.5), height});
    return grid;
}

Topology generate_topology(const SimulationConfig& cfg, std::uint64_t seed) {
    const auto& net = cfg.network;
    if (net.pair_radius <= 0) throw std::invalid_argument("generate_topology: pair_radius must be > 0");
    if (net.area_width <= 0 || net.area_length <= 0)
        throw std::invalid_argument("generate_topology: area sides must be > 0");
    if (net.cellular_users < 1 || net.d2d_pairs < 1 || net.eavesdroppers < 1)
        throw std::invalid_argument("generate_topology: node counts must be >= 1");

    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ux(0.0, net.area_width);
    std::uniform_real_distribution<double> uy(0.0, net.area_length);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto place = [&](double h) { return Position3D{ux(rng), uy(rng), h}; };

    Topology topo;
    topo.bs = place(net.height_bs);
    for (int k = 0; k < net.cellular_users; ++k) topo.cus.push_back(place(net.height_user));
    for (int i = 0; i < net.d2d_pairs; ++i) {
        const Position3D tx = place(net.height_user);
        Position3D rx;
        do {
            // sqrt of a uniform gives a uniform density over the disk
            const double r = net.pair_radius * std::sqrt(unit(rng));
            const double phi = 2.0 * kPi * unit(rng);
            rx = {tx.x + r * std::cos(phi), tx.y + r * std::sin(phi), net.height_user};
        } while (rx.x < 0.0 || rx.x > net.area_width || rx.y < 0.0 || rx.y > net.area_length);
        topo.d2d_tx.push_back(tx);
        topo.d2d_rx.push_back(rx);
    }
    for (int e = 0; e < net.eavesdroppers; ++e) topo.eves.push_back(place(net.height_eve));
    topo.ris_grid = ris_grid_points(net.area_width, net.area_length, cfg.ris.grid_sections, net.height_ris);
    return topo;
}

void write_topology(std::ostream& out, const Topology& topo) {
    out << "# role id x y z\n";
    auto rec = [&](const char* role, std::size_t id, const Position3D& p) {
        fmt::print(out, "{} {} {} {} {}\n", role, id, p.x, p.y, p.z);
    };
    rec("bs", 0, topo.bs);
    for (std::size_t i = 0; i < topo.cus.size(); ++i) rec("cu", i, topo.cus[i]);
    for (std::size_t i = 0; i < topo.d2d_tx.size(); ++i) rec("d2d_tx", i, topo.d2d_tx[i]);
    for (std::size_t i = 0; i < topo.d2d_rx.size(); ++i) rec("d2d_rx", i, topo.d2d_rx[i]);
    for (std::size_t i = 0; i < topo.eves.size(); ++i) rec("eve", i, topo.eves[i]);
    for (std::size_t i = 0; i < topo.ris_grid.size(); ++i) rec("ris_grid", i, topo.ris_grid[i]);
}

Topology read_topology(std::istream& in) {
    Topology topo;
    bool have_bs = false;
    std::string line;
    int line_no = 0;
    auto put = [&](std::vector<Position3D>& v, std::size_t id, const Position3D& p) {
        if (id != v.size())
            throw std::runtime_error(fmt::format("topology line {}: ids must be consecutive from 0", line_no));
        v.push_back(p);
    };
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line[0] == '#') continue;
        std::istringstream rec(line);
        std::string role;
        std::size_t id = 0;
        Position3D p;
        if (!(rec >> role >> id >> p.x >> p.y >> p.z))
            throw std::runtime_error(fmt::format("topology line {}: malformed record", line_no));
        if (role == "bs") {
            topo.bs = p;
            have_bs = true;
        } else if (role == "cu") put(topo.cus, id, p);
        else if (role == "d2d_tx") put(topo.d2d_tx, id, p);
        else if (role == "d2d_rx") put(topo.d2d_rx, id, p);
        else if (role == "eve") put(topo.eves, id, p);
        else if (role == "ris_grid") put(topo.ris_grid, id, p);
        else throw std::runtime_error(fmt::format("topology line {}: unknown role '{}'", line_no, role));
    }
    if (!have_bs || topo.cus.empty() || topo.d2d_tx.empty() || topo.eves.empty() ||
        topo.ris_grid.empty() || topo.d2d_tx.size() != topo.d2d_rx.size())
        throw std::runtime_error("topology file is incomplete");
    return topo;
}

void save_topology(const std::filesystem::path& path, const Topology& topo) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    write_topology(out, topo);
}

Topology load_topology(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw PrerequisiteError(fmt::format("cannot read topology '{}'", path.string()));
    return read_topology(in);
}

}  // namespace rissec
