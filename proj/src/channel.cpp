#include "rissec/channel.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "rissec/common.hpp"

namespace rissec {

double RisConfiguration::phase(int n) const {
    return 2.0 * kPi * phase_levels.at(n) / levels();
}

bool RisConfiguration::phases_valid() const {
    return std::all_of(phase_levels.begin(), phase_levels.end(),
                       [&](int q) { return q >= 0 && q < levels(); });
}

bool RisConfiguration::location_valid(int grid_points) const {
    return location_index >= 0 && location_index < grid_points;
}

RisConfiguration RisConfiguration::zeros(const RisParams& p) {
    return RisConfiguration{0, std::vector<int>(p.elements, 0), p.amplitude, p.phase_bits};
}

RisConfiguration RisConfiguration::random(const RisParams& p, int grid_points, std::mt19937_64& rng) {
    RisConfiguration r = zeros(p);
    r.location_index = std::uniform_int_distribution<int>(0, grid_points - 1)(rng);
    std::uniform_int_distribution<int> level(0, p.phase_levels() - 1);
    for (int& q : r.phase_levels) q = level(rng);
    return r;
}

double path_loss_amplitude(double d, const PathLossModel& model, Segment segment) {
    if (!(d > 0.0)) throw std::invalid_argument("path_loss_amplitude: distance must be > 0");
    const bool direct = segment == Segment::direct;
    const double g0 = db_to_linear(direct ? model.ref_gain_db : model.ref_gain_ris_db);
    const double exponent = direct ? model.exponent_direct : model.exponent_ris;
    return std::sqrt(g0 * std::pow(d, -exponent));
}

SplitMix64::result_type SplitMix64::operator()() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

std::vector<cd> array_response(int n_elements, double angle, double spacing_over_lambda) {
    std::vector<cd> a(n_elements);
    const double step = -2.0 * kPi * spacing_over_lambda * std::sin(angle);
    for (int n = 0; n < n_elements; ++n) a[n] = std::polar(1.0, step * n);
    return a;
}

std::vector<cd> reflection_products(const Position3D& tx, const Position3D& rx, const Position3D& ris,
                                    int n_elements, double spacing_over_lambda) {
    const auto arrival = array_response(n_elements, arrival_departure_angle(tx, ris), spacing_over_lambda);
    const auto departure = array_response(n_elements, arrival_departure_angle(rx, ris), spacing_over_lambda);
    std::vector<cd> p(n_elements);
    for (int n = 0; n < n_elements; ++n) p[n] = std::conj(departure[n]) * arrival[n];
    return p;
}

namespace {

cd reflection_at(const Position3D& tx, const Position3D& rx, const Position3D& ris_pos,
                 const RisConfiguration& ris, const SimulationConfig& cfg, double wavelength) {
    if (ris.amplitude == 0.0) return {0.0, 0.0};
    const double d_tx = distance(tx, ris_pos);
    const double d_rx = distance(rx, ris_pos);
    const auto& pl = cfg.radio.path_loss;
    const double gain = path_loss_amplitude(d_tx, pl, Segment::ris) * path_loss_amplitude(d_rx, pl, Segment::ris);
    const cd propagation = std::polar(1.0, -2.0 * kPi * (d_tx + d_rx) / wavelength);
    const auto products = reflection_products(tx, rx, ris_pos, ris.n_elements(), cfg.ris.element_spacing);
    cd sum{0.0, 0.0};
    for (int n = 0; n < ris.n_elements(); ++n) sum += std::polar(ris.amplitude, ris.phase(n)) * products[n];
    return gain * propagation * sum;
}

}  // namespace

cd reflection_channel(const Position3D& tx, const Position3D& rx, const RisConfiguration& ris,
                      const Topology& topo, const SimulationConfig& cfg, int k) {
    if (!ris.location_valid(topo.num_grid_points()))
        throw std::invalid_argument("reflection_channel: RIS location index out of range");
    return reflection_at(tx, rx, topo.ris_grid[ris.location_index], ris, cfg, cfg.radio.wavelength(k));
}

cd composite_channel(const Position3D& tx, const Position3D& rx, const RisConfiguration& ris,
                     const Topology& topo, const SimulationConfig& cfg, int k, cd fading, bool reflect) {
    const cd direct = path_loss_amplitude(distance(tx, rx), cfg.radio.path_loss, Segment::direct) * fading;
    return reflect ? reflection_channel(tx, rx, ris, topo, cfg, k) + direct : direct;
}

std::vector<int> coherent_phase_levels(std::span<const cd> products, int bits) {
    const int levels = 1 << bits;
    const double step = 2.0 * kPi / levels;
    const std::size_t n = products.size();
    std::vector<double> target(n);
    for (std::size_t i = 0; i < n; ++i) target[i] = -std::arg(products[i]);

    auto quantize = [&](double offset) {
        std::vector<int> q(n);
        for (std::size_t i = 0; i < n; ++i) {
            const long r = std::lround((target[i] + offset) / step);
            q[i] = static_cast<int>(((r % levels) + levels) % levels);
        }
        return q;
    };
    auto magnitude = [&](const std::vector<int>& q) {
        cd s{0.0, 0.0};
        for (std::size_t i = 0; i < n; ++i) s += std::polar(1.0, step * q[i]) * products[i];
        return std::abs(s);
    };

    // Offsets in [0, step) at which element i's rounding flips.
    std::vector<double> breaks(n);
    for (std::size_t i = 0; i < n; ++i) {
        double frac = std::fmod(0.5 - target[i] / step, 1.0);
        if (frac < 0) frac += 1.0;
        breaks[i] = frac * step;
    }
    std::sort(breaks.begin(), breaks.end());

    std::vector<int> best = quantize(0.0);
    double best_mag = magnitude(best);
    for (std::size_t i = 0; i < n; ++i) {
        const double hi = (i + 1 < n) ? breaks[i + 1] : breaks[0] + step;
        const auto q = quantize(0.5 * (breaks[i] + hi));
        const double m = magnitude(q);
        if (m > best_mag) {
            best_mag = m;
            best = q;
        }
    }
    return best;
}

LinkLayout::LinkLayout(int cus, int pairs, int eves) : K_(cus), M_(pairs), E_(eves) {
    const std::size_t K = cus, M = pairs, E = eves;
    off_d2d_bs_ = K;
    off_d2d_ = off_d2d_bs_ + K * M;
    off_cu_d2d_ = off_d2d_ + K * M;
    off_d2d_d2d_ = off_cu_d2d_ + K * M;
    off_cu_eve_ = off_d2d_d2d_ + K * M * (M - 1);
    off_d2d_eve_ = off_cu_eve_ + K * E;
    total_ = off_d2d_eve_ + K * M * E;
}

std::size_t LinkLayout::count(LinkClass c) const {
    switch (c) {
        case LinkClass::cu_bs: return off_d2d_bs_;
        case LinkClass::d2d_bs: return off_d2d_ - off_d2d_bs_;
        case LinkClass::d2d: return off_cu_d2d_ - off_d2d_;
        case LinkClass::cu_d2d: return off_d2d_d2d_ - off_cu_d2d_;
        case LinkClass::d2d_d2d: return off_cu_eve_ - off_d2d_d2d_;
        case LinkClass::cu_eve: return off_d2d_eve_ - off_cu_eve_;
        case LinkClass::d2d_eve: return total_ - off_d2d_eve_;
    }
    return 0;
}

std::vector<LinkEndpoints> enumerate_links(const Topology& topo) {
    const int K = topo.num_cus(), M = topo.num_pairs(), E = topo.num_eves();
    const LinkLayout layout(K, M, E);
    std::vector<LinkEndpoints> links(layout.size());
    for (int k = 0; k < K; ++k) {
        links[layout.cu_bs(k)] = {topo.cus[k], topo.bs, LinkClass::cu_bs, k};
        for (int i = 0; i < M; ++i) {
            links[layout.d2d_bs(k, i)] = {topo.d2d_tx[i], topo.bs, LinkClass::d2d_bs, k};
            links[layout.d2d(k, i)] = {topo.d2d_tx[i], topo.d2d_rx[i], LinkClass::d2d, k};
            links[layout.cu_d2d(k, i)] = {topo.cus[k], topo.d2d_rx[i], LinkClass::cu_d2d, k};
            for (int l = 0; l < M; ++l)
                if (l != i) links[layout.d2d_d2d(k, l, i)] = {topo.d2d_tx[l], topo.d2d_rx[i], LinkClass::d2d_d2d, k};
            for (int e = 0; e < E; ++e)
                links[layout.d2d_eve(k, i, e)] = {topo.d2d_tx[i], topo.eves[e], LinkClass::d2d_eve, k};
        }
        for (int e = 0; e < E; ++e) links[layout.cu_eve(k, e)] = {topo.cus[k], topo.eves[e], LinkClass::cu_eve, k};
    }
    return links;
}

bool reflection_enabled(ReflectionMask mask, LinkClass kind) {
    switch (mask) {
        case ReflectionMask::all: return true;
        case ReflectionMask::d2d_only: return kind == LinkClass::d2d;
        case ReflectionMask::none: return false;
    }
    return true;
}

std::uint64_t LinkEndpoints::key() const {
    std::uint64_t h = mix_seed(static_cast<std::uint64_t>(subchannel), 0x5eed);
    for (double v : {tx.x, tx.y, tx.z, rx.x, rx.y, rx.z}) h = mix_seed(h, std::bit_cast<std::uint64_t>(v));
    return h;
}

namespace {
// below this many link samples a thread team costs more than it saves
constexpr std::size_t kParallelWork = 8192;
}  // namespace

std::vector<cd> draw_fading_samples(std::span<const std::uint64_t> link_keys, std::uint64_t seed) {
    std::vector<cd> f(link_keys.size());
    for (std::size_t j = 0; j < f.size(); ++j) {
        SplitMix64 rng(mix_seed(seed, link_keys[j]));
        f[j] = draw_fading(rng);
    }
    return f;
}

LargeScale compute_large_scale(const Topology& topo, const RisConfiguration& ris, const SimulationConfig& cfg) {
    if (!ris.location_valid(topo.num_grid_points()))
        throw std::invalid_argument("compute_large_scale: RIS location index out of range");
    LargeScale ls;
    ls.layout = LinkLayout(topo.num_cus(), topo.num_pairs(), topo.num_eves());
    for (int k = 0; k < topo.num_cus(); ++k) ls.wavelength.push_back(cfg.radio.wavelength(k));
    const auto links = enumerate_links(topo);
    for (const auto& link : links) ls.link_keys.push_back(link.key());
    ls.reflection.resize(links.size());
    ls.direct_amplitude.resize(links.size());
    const Position3D& ris_pos = topo.ris_grid[ris.location_index];
    for (std::size_t j = 0; j < links.size(); ++j) {
        const auto& link = links[j];
        ls.direct_amplitude[j] = path_loss_amplitude(distance(link.tx, link.rx), cfg.radio.path_loss, Segment::direct);
        ls.reflection[j] = reflection_enabled(cfg.ris.reflection, link.kind)
                               ? reflection_at(link.tx, link.rx, ris_pos, ris, cfg, ls.wavelength[link.subchannel])
                               : cd{0.0, 0.0};
    }
    return ls;
}

ChannelRealization compose(const LargeScale& ls, std::span<const cd> fading, std::uint64_t draw_id) {
    if (fading.size() != ls.layout.size()) throw std::invalid_argument("compose: fading size mismatch");
    ChannelRealization r;
    r.layout = ls.layout;
    r.wavelength = ls.wavelength;
    r.fading_draw_id = draw_id;
    r.gains.resize(fading.size());
    for (std::size_t j = 0; j < fading.size(); ++j) r.gains[j] = ls.reflection[j] + ls.direct_amplitude[j] * fading[j];
    return r;
}

ChannelRealization realize_channels(const Topology& topo, const RisConfiguration& ris,
                                    const SimulationConfig& cfg, std::uint64_t fading_seed) {
    const LargeScale ls = compute_large_scale(topo, ris, cfg);
    return compose(ls, draw_fading_samples(ls.link_keys, fading_seed), fading_seed);
}

FadingSet draw_fading_set_serial(std::span<const std::uint64_t> link_keys, int draws, std::uint64_t seed) {
    FadingSet set{seed, std::vector<std::vector<cd>>(draws)};
    for (int f = 0; f < draws; ++f) set.draws[f] = draw_fading_samples(link_keys, mix_seed(seed, f));
    return set;
}

FadingSet draw_fading_set(std::span<const std::uint64_t> link_keys, int draws, std::uint64_t seed) {
    FadingSet set{seed, std::vector<std::vector<cd>>(draws)};
    const bool big = link_keys.size() * static_cast<std::size_t>(std::max(draws, 0)) > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (int f = 0; f < draws; ++f) set.draws[f] = draw_fading_samples(link_keys, mix_seed(seed, f));
    return set;
}

ChannelEnsemble compose_ensemble_serial(const LargeScale& ls, const FadingSet& fading) {
    ChannelEnsemble out(fading.draws.size());
    for (std::size_t f = 0; f < out.size(); ++f) out[f] = compose(ls, fading.draws[f], f);
    return out;
}

ChannelEnsemble compose_ensemble(const LargeScale& ls, const FadingSet& fading) {
    const int n = static_cast<int>(fading.draws.size());
    ChannelEnsemble out(n);
    const bool big = ls.layout.size() * static_cast<std::size_t>(n) > kParallelWork;
#pragma omp parallel for schedule(static) if (big)
    for (int f = 0; f < n; ++f) out[f] = compose(ls, fading.draws[f], f);
    return out;
}

ChannelEnsemble realize_ensemble(const Topology& topo, const RisConfiguration& ris,
                                 const SimulationConfig& cfg, std::uint64_t fading_seed) {
    const LargeScale ls = compute_large_scale(topo, ris, cfg);
    return compose_ensemble(ls, draw_fading_set(ls.link_keys, cfg.secrecy.fading_draws, fading_seed));
}

}  // namespace rissec
