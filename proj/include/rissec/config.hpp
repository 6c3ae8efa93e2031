#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rissec {

enum class ReflectionMask { all, d2d_only, none };

struct NetworkParams {
    int cellular_users = 4;   // K
    int d2d_pairs = 4;        // M
    int eavesdroppers = 2;    // E
    double area_width = 100.0;
    double area_length = 100.0;
    double pair_radius = 20.0;
    double height_user = 1.5;
    double height_bs = 25.0;
    double height_ris = 10.0;
    double height_eve = 1.5;
};

struct RisParams {
    int elements = 8;         // N
    int grid_sections = 16;   // x, must be a perfect square
    int phase_bits = 2;       // b
    double amplitude = 1.0;   // alpha
    double element_spacing = 0.5;  // in wavelengths
    ReflectionMask reflection = ReflectionMask::all;

    int phase_levels() const { return 1 << phase_bits; }
};

struct PathLossModel {
    double ref_gain_db = -30.0;
    double ref_gain_ris_db = -30.0;
    double exponent_direct = 3.5;
    double exponent_ris = 2.2;
};

struct RadioParams {
    double carrier_hz = 2e9;
    double bandwidth_hz = 1e6;
    double cu_power_dbm = 23.0;
    double d2d_power_min_dbm = 0.0;
    double d2d_power_max_dbm = 24.0;
    int power_levels = 8;     // L_p
    double noise_dbm = -114.0;
    PathLossModel path_loss;

    double wavelength(int subchannel) const;
};

struct SecrecyParams {
    int fading_draws = 100;   // F
    double sinr_min_d2d_db = 0.0;
    double sinr_min_cu_db = 0.0;
    bool per_draw_constraints = false;
};

struct TrainConfig {
    double discount = 0.9;
    double learning_rate = 1e-3;
    double rmsprop_decay = 0.9;
    double rmsprop_epsilon = 1e-8;
    int batch_size = 32;
    int buffer_capacity = 10000;
    double epsilon_start = 1.0;
    double epsilon_min = 0.05;
    double epsilon_decay = 0.995;  // multiplicative, per epoch
    int target_sync = 200;         // learner updates between hard copies
    double reward_scale = 1e-6;    // xi
    double grad_clip = 0.0;        // 0 disables
    int epochs = 1000;
    int steps_per_epoch = 100;
    std::vector<int> hidden_layers{500, 250, 120};
    bool refresh_fading = true;

    double epsilon_at(int epoch) const;
};

struct SeedParams {
    std::uint64_t topology = 1;
    std::uint64_t fading = 2;
    std::uint64_t init = 3;
    std::uint64_t exploration = 4;
};

struct SimulationConfig {
    NetworkParams network;
    RisParams ris;
    RadioParams radio;
    SecrecyParams secrecy;
    TrainConfig train;
    SeedParams seeds;
    std::uint64_t max_candidates = 10'000'000;

    /// Throws ConfigError naming the offending key and its bound.
    void validate() const;

    /// Overrides every seed stream with values derived from one master seed.
    void apply_master_seed(std::uint64_t seed);
};

/// Parses INI-style text ("[section]" headers, "key = value" lines, ';'
/// comments). Missing keys keep their defaults; unknown keys are rejected.
SimulationConfig parse_config(const std::string& text);
SimulationConfig load_config(const std::filesystem::path& path);

/// Canonical text of every effective setting; parse_config(dump) round-trips.
std::string dump_config(const SimulationConfig& cfg);

/// FNV-1a 64 of dump_config, rendered as 16 hex digits.
std::string config_hash(const SimulationConfig& cfg);

}  // namespace rissec
