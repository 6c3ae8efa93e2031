#include "rissec/secrecy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

AllocationState AllocationState::idle(int cus, int pairs, double cu_power_dbm) {
    AllocationState a;
    a.cus = cus;
    a.pairs = pairs;
    a.rho.assign(static_cast<std::size_t>(cus) * pairs, 0);
    a.d2d_power_dbm.assign(pairs, 0.0);
    a.cu_power_dbm = cu_power_dbm;
    return a;
}

std::optional<int> AllocationState::assigned_rb(int i) const {
    for (int k = 0; k < cus; ++k)
        if (reuse(k, i)) return k;
    return std::nullopt;
}

double AllocationState::cu_power_w() const { return dbm_to_watts(cu_power_dbm); }
double AllocationState::d2d_power_w(int i) const { return dbm_to_watts(d2d_power_dbm[i]); }

double sinr_bs(const ChannelRealization& ch, const AllocationState& alloc, int k, double noise_w) {
    double interference = 0.0;
    for (int i = 0; i < alloc.pairs; ++i)
        if (alloc.reuse(k, i)) interference += alloc.d2d_power_w(i) * std::norm(ch.h_d2d_bs(k, i));
    return alloc.cu_power_w() * std::norm(ch.h_cu_bs(k)) / (interference + noise_w);
}

double sinr_d2d(const ChannelRealization& ch, const AllocationState& alloc, int i, double noise_w) {
    const auto rb = alloc.assigned_rb(i);
    if (!rb) return 0.0;
    const int k = *rb;
    double interference = alloc.reuse(k, i) * alloc.cu_power_w() * std::norm(ch.h_cu_d2d(k, i));
    for (int l = 0; l < alloc.pairs; ++l)
        if (l != i && alloc.reuse(k, l)) interference += alloc.d2d_power_w(l) * std::norm(ch.h_d2d_d2d(k, l, i));
    return alloc.d2d_power_w(i) * std::norm(ch.h_d2d(k, i)) / (interference + noise_w);
}

double sinr_eve_cu(const ChannelRealization& ch, const AllocationState& alloc, int k, int e, double noise_w) {
    double interference = 0.0;
    for (int i = 0; i < alloc.pairs; ++i)
        if (alloc.reuse(k, i)) interference += alloc.d2d_power_w(i) * std::norm(ch.h_d2d_eve(k, i, e));
    return alloc.cu_power_w() * std::norm(ch.h_cu_eve(k, e)) / (interference + noise_w);
}

double sinr_eve_d2d(const ChannelRealization& ch, const AllocationState& alloc, int i, int e, double noise_w) {
    const auto rb = alloc.assigned_rb(i);
    if (!rb) return 0.0;
    const int k = *rb;
    double interference = alloc.cu_power_w() * std::norm(ch.h_cu_eve(k, e));
    for (int l = 0; l < alloc.pairs; ++l)
        if (l != i && alloc.reuse(k, l)) interference += alloc.d2d_power_w(l) * std::norm(ch.h_d2d_eve(k, l, e));
    return alloc.d2d_power_w(i) * std::norm(ch.h_d2d_eve(k, i, e)) / (interference + noise_w);
}

double rate(double sinr) {
    if (sinr < 0.0 || std::isnan(sinr)) throw std::invalid_argument("rate: SINR must be >= 0");
    return std::log2(1.0 + sinr);
}

namespace {

// Secrecy rate of one draw, before the bandwidth factor.
double draw_secrecy_cu(const ChannelRealization& ch, const AllocationState& alloc, int k, double noise_w) {
    double eve_best = 0.0;
    for (int e = 0; e < ch.layout.eves(); ++e) eve_best = std::max(eve_best, rate(sinr_eve_cu(ch, alloc, k, e, noise_w)));
    return std::max(0.0, rate(sinr_bs(ch, alloc, k, noise_w)) - eve_best);
}

double draw_secrecy_d2d(const ChannelRealization& ch, const AllocationState& alloc, int i, double noise_w) {
    if (!alloc.assigned_rb(i)) return 0.0;
    double eve_best = 0.0;
    for (int e = 0; e < ch.layout.eves(); ++e) eve_best = std::max(eve_best, rate(sinr_eve_d2d(ch, alloc, i, e, noise_w)));
    return std::max(0.0, rate(sinr_d2d(ch, alloc, i, noise_w)) - eve_best);
}

// Per-draw values laid out as [cu secrecy K | d2d secrecy M | sinr_bs K | sinr_d2d M].
void fill_draw(const ChannelRealization& ch, const AllocationState& alloc, double noise_w, double* out) {
    const int K = alloc.cus, M = alloc.pairs;
    for (int k = 0; k < K; ++k) {
        out[k] = draw_secrecy_cu(ch, alloc, k, noise_w);
        out[K + M + k] = sinr_bs(ch, alloc, k, noise_w);
    }
    for (int i = 0; i < M; ++i) {
        out[K + i] = draw_secrecy_d2d(ch, alloc, i, noise_w);
        out[2 * K + M + i] = sinr_d2d(ch, alloc, i, noise_w);
    }
}

SecrecyReport reduce(const std::vector<double>& per_draw, int draws, const AllocationState& alloc,
                     double bandwidth) {
    const int K = alloc.cus, M = alloc.pairs, width = 2 * (K + M);
    SecrecyReport r;
    r.sc_cu.assign(K, 0.0);
    r.sc_d2d.assign(M, 0.0);
    r.sinr_bs.assign(K, 0.0);
    r.sinr_d2d.assign(M, 0.0);
    r.sinr_bs_min.assign(K, std::numeric_limits<double>::infinity());
    r.sinr_d2d_min.assign(M, std::numeric_limits<double>::infinity());
    for (int f = 0; f < draws; ++f) {
        const double* row = per_draw.data() + static_cast<std::size_t>(f) * width;
        for (int k = 0; k < K; ++k) {
            r.sc_cu[k] += bandwidth * row[k];
            r.sinr_bs[k] += row[K + M + k];
            r.sinr_bs_min[k] = std::min(r.sinr_bs_min[k], row[K + M + k]);
        }
        for (int i = 0; i < M; ++i) {
            r.sc_d2d[i] += bandwidth * row[K + i];
            r.sinr_d2d[i] += row[2 * K + M + i];
            r.sinr_d2d_min[i] = std::min(r.sinr_d2d_min[i], row[2 * K + M + i]);
        }
    }
    for (auto* v : {&r.sc_cu, &r.sc_d2d, &r.sinr_bs, &r.sinr_d2d})
        for (double& x : *v) x /= draws;
    r.ssc = sum_secrecy_capacity(r.sc_cu, r.sc_d2d, alloc);
    return r;
}

void check_shapes(const ChannelEnsemble& draws, const AllocationState& alloc) {
    if (draws.empty()) throw std::invalid_argument("secrecy evaluation needs at least one fading draw");
    if (draws.front().layout.cus() != alloc.cus || draws.front().layout.pairs() != alloc.pairs)
        throw std::invalid_argument("allocation shape does not match channel realization");
}

}  // namespace

double secrecy_capacity(const ChannelEnsemble& draws, const AllocationState& alloc, SecrecyTarget target,
                        double bandwidth_hz, double noise_w) {
    check_shapes(draws, alloc);
    double sum = 0.0;
    for (const auto& ch : draws)
        sum += bandwidth_hz * (target.kind == SecrecyTarget::Kind::cu ? draw_secrecy_cu(ch, alloc, target.index, noise_w)
                                                                      : draw_secrecy_d2d(ch, alloc, target.index, noise_w));
    return sum / static_cast<double>(draws.size());
}

double sum_secrecy_capacity(const std::vector<double>& sc_cu, const std::vector<double>& sc_d2d,
                            const AllocationState& alloc) {
    double total = 0.0;
    for (int k = 0; k < alloc.cus; ++k) {
        double term = sc_cu[k];
        for (int i = 0; i < alloc.pairs; ++i) term += alloc.reuse(k, i) * sc_d2d[i];
        total += term;
    }
    return total;
}

SecrecyReport evaluate_secrecy_serial(const ChannelEnsemble& draws, const AllocationState& alloc,
                                      const SimulationConfig& cfg) {
    check_shapes(draws, alloc);
    const int n = static_cast<int>(draws.size());
    const int width = 2 * (alloc.cus + alloc.pairs);
    const double noise_w = dbm_to_watts(cfg.radio.noise_dbm);
    std::vector<double> per_draw(static_cast<std::size_t>(n) * width);
    for (int f = 0; f < n; ++f) fill_draw(draws[f], alloc, noise_w, per_draw.data() + static_cast<std::size_t>(f) * width);
    return reduce(per_draw, n, alloc, cfg.radio.bandwidth_hz);
}

SecrecyReport evaluate_secrecy(const ChannelEnsemble& draws, const AllocationState& alloc,
                               const SimulationConfig& cfg) {
    check_shapes(draws, alloc);
    const int n = static_cast<int>(draws.size());
    const int width = 2 * (alloc.cus + alloc.pairs);
    const double noise_w = dbm_to_watts(cfg.radio.noise_dbm);
    std::vector<double> per_draw(static_cast<std::size_t>(n) * width);
    const std::size_t work = static_cast<std::size_t>(n) * draws.front().layout.size();
#pragma omp parallel for schedule(static) if (work > 20000)
    for (int f = 0; f < n; ++f) fill_draw(draws[f], alloc, noise_w, per_draw.data() + static_cast<std::size_t>(f) * width);
    return reduce(per_draw, n, alloc, cfg.radio.bandwidth_hz);
}

ConstraintFlags check_constraints(const AllocationState& alloc, const RisConfiguration& ris,
                                  const SecrecyReport& report, const SimulationConfig& cfg, int grid_points) {
    ConstraintFlags f;
    for (int i = 0; i < alloc.pairs; ++i)
        if (alloc.d2d_power_dbm[i] > cfg.radio.d2d_power_max_dbm) f.c1 = false;

    const bool per_draw = cfg.secrecy.per_draw_constraints;
    const double floor_d2d = db_to_linear(cfg.secrecy.sinr_min_d2d_db);
    const double floor_cu = db_to_linear(cfg.secrecy.sinr_min_cu_db);
    for (int i = 0; i < alloc.pairs; ++i) {
        if (!alloc.assigned_rb(i)) continue;
        const double s = per_draw ? report.sinr_d2d_min[i] : report.sinr_d2d[i];
        if (s < floor_d2d) f.c2 = false;
    }
    for (int k = 0; k < alloc.cus; ++k) {
        const double s = per_draw ? report.sinr_bs_min[k] : report.sinr_bs[k];
        if (s < floor_cu) f.c3 = false;
    }

    for (auto v : alloc.rho)
        if (v > 1) f.c4 = false;
    for (int i = 0; i < alloc.pairs; ++i) {
        int used = 0;
        for (int k = 0; k < alloc.cus; ++k) used += alloc.reuse(k, i) != 0;
        if (used > 1) f.c5 = false;
    }

    f.c6 = ris.phases_valid() && ris.n_elements() == cfg.ris.elements;
    f.c7 = ris.location_valid(grid_points);
    return f;
}

SecrecyReport evaluate(const ChannelEnsemble& draws, const AllocationState& alloc, const RisConfiguration& ris,
                       const SimulationConfig& cfg, int grid_points) {
    SecrecyReport r = evaluate_secrecy(draws, alloc, cfg);
    r.flags = check_constraints(alloc, ris, r, cfg, grid_points);
    return r;
}

std::string secrecy_csv_header(int cus, int pairs) {
    std::string h = "ssc,constraints_ok,c1,c2,c3,c4,c5,c6,c7";
    for (int k = 0; k < cus; ++k) h += fmt::format(",sc_cu_{}", k);
    for (int i = 0; i < pairs; ++i) h += fmt::format(",sc_d2d_{}", i);
    for (int k = 0; k < cus; ++k) h += fmt::format(",sinr_bs_{}", k);
    for (int i = 0; i < pairs; ++i) h += fmt::format(",sinr_d2d_{}", i);
    return h;
}

std::string secrecy_csv_row(const SecrecyReport& r) {
    const auto& f = r.flags;
    std::string row = fmt::format("{},{:d},{:d},{:d},{:d},{:d},{:d},{:d},{:d}", r.ssc, f.all(), f.c1, f.c2, f.c3,
                                  f.c4, f.c5, f.c6, f.c7);
    for (const auto* v : {&r.sc_cu, &r.sc_d2d, &r.sinr_bs, &r.sinr_d2d})
        for (double x : *v) row += fmt::format(",{}", x);
    return row;
}

}  // namespace rissec
