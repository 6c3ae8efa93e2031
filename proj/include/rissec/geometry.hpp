#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <vector>

#include "rissec/config.hpp"

namespace rissec {

struct Position3D {
    double x = 0.0;
    double y = 0.0;
    double z = 0.0;  // antenna height

    friend bool operator==(const Position3D&, const Position3D&) = default;
};

struct Topology {
    Position3D bs;
    std::vector<Position3D> cus;
    std::vector<Position3D> d2d_tx;
    std::vector<Position3D> d2d_rx;
    std::vector<Position3D> eves;
    std::vector<Position3D> ris_grid;

    int num_cus() const { return static_cast<int>(cus.size()); }
    int num_pairs() const { return static_cast<int>(d2d_tx.size()); }
    int num_eves() const { return static_cast<int>(eves.size()); }
    int num_grid_points() const { return static_cast<int>(ris_grid.size()); }

    friend bool operator==(const Topology&, const Topology&) = default;
};

double distance(const Position3D& a, const Position3D& b);

/// Angle of `node` seen from an RIS whose linear array lies along +x:
/// asin of the direction cosine onto the array axis, so broadside is 0 and
/// endfire is +-pi/2. Throws std::invalid_argument for coincident points.
double arrival_departure_angle(const Position3D& node, const Position3D& ris);

/// Centers of the `sections` equal square cells of a width x length area, at
/// the given height, enumerated row-major (x fastest).
std::vector<Position3D> ris_grid_points(double width, double length, int sections, double height);

/// Uniform placement of all nodes inside the area; each D2D receiver is drawn
/// uniformly from the disk of radius pair_radius around its transmitter
/// (redrawn until it falls inside the area). Pure function of (cfg, seed).
Topology generate_topology(const SimulationConfig& cfg, std::uint64_t seed);

// Text format, one record per line: "<role> <id> <x> <y> <z>" with roles
// bs, cu, d2d_tx, d2d_rx, eve, ris_grid; '#' starts a comment line.
void write_topology(std::ostream& out, const Topology& topo);
Topology read_topology(std::istream& in);
void save_topology(const std::filesystem::path& path, const Topology& topo);
Topology load_topology(const std::filesystem::path& path);

}  // namespace rissec
