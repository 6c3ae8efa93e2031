#pragma once

#include <complex>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "rissec/config.hpp"
#include "rissec/geometry.hpp"

namespace rissec {

using cd = std::complex<double>;

/// RIS state: grid location, per-element discrete phase level and the common
/// amplitude. Element n applies amplitude * exp(j * 2*pi * level_n / 2^bits).
struct RisConfiguration {
    int location_index = 0;
    std::vector<int> phase_levels;
    double amplitude = 1.0;
    int bits = 2;

    int n_elements() const { return static_cast<int>(phase_levels.size()); }
    int levels() const { return 1 << bits; }
    double phase(int n) const;

    bool phases_valid() const;                      // C6
    bool location_valid(int grid_points) const;     // C7

    static RisConfiguration zeros(const RisParams& p);
    static RisConfiguration random(const RisParams& p, int grid_points, std::mt19937_64& rng);

    friend bool operator==(const RisConfiguration&, const RisConfiguration&) = default;
};

enum class Segment { direct, ris };

/// sqrt(G0 * d^-exponent) with the (G0, exponent) pair of the segment.
double path_loss_amplitude(double d, const PathLossModel& model, Segment segment);

/// SplitMix64 as a UniformRandomBitGenerator; cheap to seed, so one stream
/// per (link, draw) is affordable.
class SplitMix64 {
public:
    using result_type = std::uint64_t;
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}
    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return ~result_type{0}; }
    result_type operator()();

private:
    std::uint64_t state_;
};

/// One CN(0, 1) sample: independent N(0, 1/2) real and imaginary parts.
template <class Rng>
cd draw_fading(Rng& rng) {
    std::normal_distribution<double> n(0.0, 0.7071067811865476);
    const double re = n(rng);
    const double im = n(rng);
    return {re, im};
}

/// ULA steering vector, element n = exp(-j 2 pi spacing n sin(angle)).
std::vector<cd> array_response(int n_elements, double angle, double spacing_over_lambda);

/// The per-element terms conj(a_dep[n]) * a_arr[n] of the reflected path;
/// reflection_channel multiplies them by the element coefficients.
std::vector<cd> reflection_products(const Position3D& tx, const Position3D& rx, const Position3D& ris,
                                    int n_elements, double spacing_over_lambda);

/// Cascaded tx -> RIS -> rx coefficient on subchannel k (deterministic LoS).
cd reflection_channel(const Position3D& tx, const Position3D& rx, const RisConfiguration& ris,
                      const Topology& topo, const SimulationConfig& cfg, int k);

/// Reflection term (when `reflect`) plus direct path loss times `fading`.
cd composite_channel(const Position3D& tx, const Position3D& rx, const RisConfiguration& ris,
                     const Topology& topo, const SimulationConfig& cfg, int k, cd fading, bool reflect);

/// Phase levels maximizing |sum_n exp(j theta_n) p_n| over all 2^bits-level
/// configurations. Exact: every optimum is the per-element rounding of
/// (offset - arg p_n) for some common offset, and the distinct roundings
/// are enumerated between the N breakpoints of one quantization step.
std::vector<int> coherent_phase_levels(std::span<const cd> products, int bits);

enum class LinkClass { cu_bs, d2d_bs, d2d, cu_d2d, d2d_d2d, cu_eve, d2d_eve };

/// Flat index map over every link gain required by the SINR expressions.
/// Links exist only on the subchannel of the CU that owns them: the CU k
/// links and every D2D link are stored per RB k.
class LinkLayout {
public:
    LinkLayout() = default;
    LinkLayout(int cus, int pairs, int eves);

    int cus() const { return K_; }
    int pairs() const { return M_; }
    int eves() const { return E_; }
    std::size_t size() const { return total_; }

    std::size_t cu_bs(int k) const { return k; }
    std::size_t d2d_bs(int k, int i) const { return off_d2d_bs_ + k * M_ + i; }
    std::size_t d2d(int k, int i) const { return off_d2d_ + k * M_ + i; }
    std::size_t cu_d2d(int k, int i) const { return off_cu_d2d_ + k * M_ + i; }
    /// Transmitter l interfering at receiver i (l != i).
    std::size_t d2d_d2d(int k, int l, int i) const {
        return off_d2d_d2d_ + (static_cast<std::size_t>(k) * M_ + l) * (M_ - 1) + (i < l ? i : i - 1);
    }
    std::size_t cu_eve(int k, int e) const { return off_cu_eve_ + k * E_ + e; }
    std::size_t d2d_eve(int k, int i, int e) const { return off_d2d_eve_ + (k * M_ + i) * E_ + e; }

    std::size_t count(LinkClass c) const;

    friend bool operator==(const LinkLayout&, const LinkLayout&) = default;

private:
    int K_ = 0, M_ = 0, E_ = 0;
    std::size_t off_d2d_bs_ = 0, off_d2d_ = 0, off_cu_d2d_ = 0, off_d2d_d2d_ = 0, off_cu_eve_ = 0,
                off_d2d_eve_ = 0, total_ = 0;
};

struct LinkEndpoints {
    Position3D tx;
    Position3D rx;
    LinkClass kind;
    int subchannel;

    /// Hash of the endpoints and subchannel. Fading is keyed by the physical
    /// link (common random numbers), so relabeling nodes permutes fading
    /// together with the nodes.
    std::uint64_t key() const;
};

/// Endpoints of every link, in LinkLayout order.
std::vector<LinkEndpoints> enumerate_links(const Topology& topo);

bool reflection_enabled(ReflectionMask mask, LinkClass kind);

/// Complex gains of every link under one fading draw.
struct ChannelRealization {
    LinkLayout layout;
    std::vector<cd> gains;
    std::vector<double> wavelength;  // per subchannel
    std::uint64_t fading_draw_id = 0;

    cd h_cu_bs(int k) const { return gains[layout.cu_bs(k)]; }
    cd h_d2d_bs(int k, int i) const { return gains[layout.d2d_bs(k, i)]; }
    cd h_d2d(int k, int i) const { return gains[layout.d2d(k, i)]; }
    cd h_cu_d2d(int k, int i) const { return gains[layout.cu_d2d(k, i)]; }
    cd h_d2d_d2d(int k, int l, int i) const { return gains[layout.d2d_d2d(k, l, i)]; }
    cd h_cu_eve(int k, int e) const { return gains[layout.cu_eve(k, e)]; }
    cd h_d2d_eve(int k, int i, int e) const { return gains[layout.d2d_eve(k, i, e)]; }
};

/// Fading coefficient of every link; link j uses its own stream seeded by
/// mix_seed(seed, link_keys[j]).
std::vector<cd> draw_fading_samples(std::span<const std::uint64_t> link_keys, std::uint64_t seed);

/// Per-link deterministic parts (RIS reflection and direct amplitude) for a
/// fixed topology and RIS configuration; fading is applied on top.
struct LargeScale {
    LinkLayout layout;
    std::vector<std::uint64_t> link_keys;
    std::vector<cd> reflection;
    std::vector<double> direct_amplitude;
    std::vector<double> wavelength;
};

LargeScale compute_large_scale(const Topology& topo, const RisConfiguration& ris, const SimulationConfig& cfg);

ChannelRealization compose(const LargeScale& ls, std::span<const cd> fading, std::uint64_t draw_id);

ChannelRealization realize_channels(const Topology& topo, const RisConfiguration& ris,
                                    const SimulationConfig& cfg, std::uint64_t fading_seed);

/// F fading draws. Draw f uses the sub-seed mix_seed(seed, f), so a set is
/// identical however the draws are scheduled.
struct FadingSet {
    std::uint64_t seed = 0;
    std::vector<std::vector<cd>> draws;
};

FadingSet draw_fading_set(std::span<const std::uint64_t> link_keys, int draws, std::uint64_t seed);
FadingSet draw_fading_set_serial(std::span<const std::uint64_t> link_keys, int draws, std::uint64_t seed);

using ChannelEnsemble = std::vector<ChannelRealization>;

ChannelEnsemble compose_ensemble(const LargeScale& ls, const FadingSet& fading);
ChannelEnsemble compose_ensemble_serial(const LargeScale& ls, const FadingSet& fading);

/// compute_large_scale + draw_fading_set + compose_ensemble.
ChannelEnsemble realize_ensemble(const Topology& topo, const RisConfiguration& ris,
                                 const SimulationConfig& cfg, std::uint64_t fading_seed);

}  // namespace rissec
