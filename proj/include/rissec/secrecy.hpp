#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "rissec/channel.hpp"
#include "rissec/config.hpp"

namespace rissec {

/// RB-reuse indicators rho[k][i] (row-major K x M) and transmit powers.
/// A pair with an all-zero column is idle and contributes nothing.
struct AllocationState {
    int cus = 0;
    int pairs = 0;
    std::vector<std::uint8_t> rho;
    std::vector<double> d2d_power_dbm;
    double cu_power_dbm = 23.0;

    static AllocationState idle(int cus, int pairs, double cu_power_dbm);

    int reuse(int k, int i) const { return rho[static_cast<std::size_t>(k) * pairs + i]; }
    void set_reuse(int k, int i, bool on) { rho[static_cast<std::size_t>(k) * pairs + i] = on ? 1 : 0; }
    /// First RB the pair uses, if any.
    std::optional<int> assigned_rb(int i) const;

    double cu_power_w() const;
    double d2d_power_w(int i) const;

    friend bool operator==(const AllocationState&, const AllocationState&) = default;
};

// Instantaneous SINRs of one fading draw, linear scale, powers in watts.
double sinr_bs(const ChannelRealization& ch, const AllocationState& alloc, int k, double noise_w);
double sinr_d2d(const ChannelRealization& ch, const AllocationState& alloc, int i, double noise_w);
double sinr_eve_cu(const ChannelRealization& ch, const AllocationState& alloc, int k, int e, double noise_w);
double sinr_eve_d2d(const ChannelRealization& ch, const AllocationState& alloc, int i, int e, double noise_w);

/// log2(1 + sinr); throws std::invalid_argument on negative input.
double rate(double sinr);

struct SecrecyTarget {
    enum class Kind { cu, d2d } kind;
    int index;
};

/// Monte-Carlo ergodic secrecy capacity in bit/s: mean over draws of
/// bandwidth * [R - max_e R_e]^+ (the clamp applies per draw).
double secrecy_capacity(const ChannelEnsemble& draws, const AllocationState& alloc, SecrecyTarget target,
                        double bandwidth_hz, double noise_w);

/// sum_k (SC_k + sum_i rho[k][i] SC_i).
double sum_secrecy_capacity(const std::vector<double>& sc_cu, const std::vector<double>& sc_d2d,
                            const AllocationState& alloc);

struct ConstraintFlags {
    bool c1 = true;  // D2D power within limit
    bool c2 = true;  // D2D SINR floor for assigned pairs
    bool c3 = true;  // CU SINR floor at the BS
    bool c4 = true;  // binary reuse indicators
    bool c5 = true;  // at most one RB per pair
    bool c6 = true;  // phase levels valid
    bool c7 = true;  // RIS location on the grid

    bool all() const { return c1 && c2 && c3 && c4 && c5 && c6 && c7; }
    bool allocation_ok() const { return c1 && c2 && c3 && c4 && c5; }
    bool ris_ok() const { return c1 && c2 && c3 && c6 && c7; }
};

struct SecrecyReport {
    std::vector<double> sc_cu;      // bit/s
    std::vector<double> sc_d2d;     // bit/s, 0 for idle pairs
    double ssc = 0.0;               // bit/s
    std::vector<double> sinr_bs;    // draw mean, linear
    std::vector<double> sinr_d2d;   // draw mean, linear, 0 for idle pairs
    std::vector<double> sinr_bs_min;   // worst draw
    std::vector<double> sinr_d2d_min;  // worst draw
    ConstraintFlags flags;
};

/// Every per-user quantity over all draws; the draws are evaluated in
/// parallel and reduced in draw order. `flags` is left default.
SecrecyReport evaluate_secrecy(const ChannelEnsemble& draws, const AllocationState& alloc,
                               const SimulationConfig& cfg);
SecrecyReport evaluate_secrecy_serial(const ChannelEnsemble& draws, const AllocationState& alloc,
                                      const SimulationConfig& cfg);

ConstraintFlags check_constraints(const AllocationState& alloc, const RisConfiguration& ris,
                                  const SecrecyReport& report, const SimulationConfig& cfg, int grid_points);

/// evaluate_secrecy followed by check_constraints.
SecrecyReport evaluate(const ChannelEnsemble& draws, const AllocationState& alloc, const RisConfiguration& ris,
                       const SimulationConfig& cfg, int grid_points);

// One CSV row per evaluation:
// ssc,constraints_ok,c1..c7,sc_cu_<k>...,sc_d2d_<i>...,sinr_bs_<k>...,sinr_d2d_<i>...
std::string secrecy_csv_header(int cus, int pairs);
std::string secrecy_csv_row(const SecrecyReport& report);

}  // namespace rissec
