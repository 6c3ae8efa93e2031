#include "rissec/baselines.hpp"

#include <limits>
#include <ostream>
#include <stdexcept>
#include <vector>

#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

int random_policy(int action_space_size, std::mt19937_64& rng) {
    if (action_space_size < 1) throw std::invalid_argument("random_policy: empty action space");
    return std::uniform_int_distribution<int>(0, action_space_size - 1)(rng);
}

SearchSpace parse_search_space(const std::string& name) {
    if (name == "alloc") return SearchSpace::alloc;
    if (name == "ris") return SearchSpace::ris;
    if (name == "joint") return SearchSpace::joint;
    throw ConfigError(fmt::format("unknown search mode '{}', expected alloc|ris|joint", name));
}

std::string to_string(SearchSpace s) {
    switch (s) {
        case SearchSpace::alloc: return "alloc";
        case SearchSpace::ris: return "ris";
        case SearchSpace::joint: return "joint";
    }
    return "?";
}

namespace {

constexpr std::uint64_t kSaturated = std::numeric_limits<std::uint64_t>::max();

std::uint64_t mul_sat(std::uint64_t a, std::uint64_t b) {
    if (a != 0 && b > kSaturated / a) return kSaturated;
    return a * b;
}

std::uint64_t pow_sat(std::uint64_t base, int exp) {
    std::uint64_t r = 1;
    for (int i = 0; i < exp; ++i) r = mul_sat(r, base);
    return r;
}

std::uint64_t alloc_space(const SimulationConfig& cfg) {
    const auto per_pair = static_cast<std::uint64_t>(cfg.network.cellular_users) * cfg.radio.power_levels + 1;
    return pow_sat(per_pair, cfg.network.d2d_pairs);
}

std::uint64_t ris_space(const SimulationConfig& cfg) {
    return mul_sat(static_cast<std::uint64_t>(cfg.ris.grid_sections),
                   pow_sat(static_cast<std::uint64_t>(cfg.ris.phase_levels()), cfg.ris.elements));
}

void decode_alloc(const SimulationConfig& cfg, std::uint64_t index, AllocationState& alloc) {
    const D2DActionCodec codec(cfg.network.cellular_users, cfg.radio.power_levels);
    const int M = cfg.network.d2d_pairs;
    std::vector<D2DAction> actions(M);
    for (int i = M - 1; i >= 0; --i) {
        actions[i] = codec.decode(static_cast<int>(index % codec.size()));
        index /= codec.size();
    }
    alloc = assemble_allocation(actions, cfg.network.cellular_users, cfg.radio);
}

void decode_ris(const SimulationConfig& cfg, std::uint64_t index, RisConfiguration& ris) {
    ris = RisConfiguration::zeros(cfg.ris);
    const auto levels = static_cast<std::uint64_t>(cfg.ris.phase_levels());
    for (int n = cfg.ris.elements - 1; n >= 0; --n) {
        ris.phase_levels[n] = static_cast<int>(index % levels);
        index /= levels;
    }
    ris.location_index = static_cast<int>(index);
}

// Splits a candidate index into its RIS part (which fixes the channels) and
// the allocation part.
struct Split {
    std::uint64_t ris;
    std::uint64_t alloc;
};

Split split(const SimulationConfig& cfg, SearchSpace space, std::uint64_t index) {
    switch (space) {
        case SearchSpace::alloc: return {0, index};
        case SearchSpace::ris: return {index, 0};
        case SearchSpace::joint: {
            const auto na = alloc_space(cfg);
            return {index / na, index % na};
        }
    }
    return {0, 0};
}

bool feasible(const ConstraintFlags& f, SearchSpace space) {
    switch (space) {
        case SearchSpace::alloc: return f.allocation_ok();
        case SearchSpace::ris: return f.ris_ok();
        case SearchSpace::joint: return f.all();
    }
    return false;
}

struct Scorer {
    const Topology& topo;
    const SimulationConfig& cfg;
    const SearchOptions& opt;
    FadingSet fading;

    Scorer(const Topology& t, const SimulationConfig& c, const SearchOptions& o) : topo(t), cfg(c), opt(o) {
        std::vector<std::uint64_t> keys;
        for (const auto& link : enumerate_links(topo)) keys.push_back(link.key());
        fading = draw_fading_set_serial(keys, cfg.secrecy.fading_draws, opt.fading_seed);
    }

    // Candidate evaluation with a per-caller channel cache keyed by the RIS part.
    struct Cache {
        std::uint64_t ris_index = kSaturated;
        RisConfiguration ris;
        ChannelEnsemble channels;
    };

    std::pair<double, bool> score(std::uint64_t index, Cache& cache) const {
        const Split s = split(cfg, opt.space, index);
        if (cache.ris_index != s.ris) {
            if (opt.space == SearchSpace::alloc)
                cache.ris = opt.fixed_ris;
            else
                decode_ris(cfg, s.ris, cache.ris);
            cache.channels = compose_ensemble_serial(compute_large_scale(topo, cache.ris, cfg), fading);
            cache.ris_index = s.ris;
        }
        AllocationState alloc;
        if (opt.space == SearchSpace::ris)
            alloc = opt.fixed_alloc;
        else
            decode_alloc(cfg, s.alloc, alloc);
        const auto report = evaluate_secrecy_serial(cache.channels, alloc, cfg);
        const auto flags = check_constraints(alloc, cache.ris, report, cfg, cfg.ris.grid_sections);
        const bool ok = feasible(flags, opt.space);
        return {ok ? report.ssc : 0.0, ok};
    }
};

void check_options(const SimulationConfig& cfg, const SearchOptions& opt, std::uint64_t n) {
    if (n > cfg.max_candidates)
        throw ConfigError(fmt::format("search space of {} candidates exceeds oracle.max_candidates = {}",
                                      n == kSaturated ? std::string(">= 2^64") : fmt::format("{}", n),
                                      cfg.max_candidates));
    if (opt.space == SearchSpace::alloc && opt.fixed_ris.n_elements() != cfg.ris.elements)
        throw ConfigError("alloc search needs a fixed RIS configuration with ris.elements entries");
    if (opt.space == SearchSpace::ris &&
        (opt.fixed_alloc.cus != cfg.network.cellular_users || opt.fixed_alloc.pairs != cfg.network.d2d_pairs))
        throw ConfigError("ris search needs a fixed allocation matching the network size");
}

SearchResult finish(const SimulationConfig& cfg, const SearchOptions& opt, std::uint64_t n, std::uint64_t best,
                    double best_score, std::uint64_t feasible_count) {
    SearchResult r;
    r.index = best;
    r.candidates = n;
    r.feasible = feasible_count;
    r.ssc = best_score;
    decode_candidate(cfg, opt, best, r.alloc, r.ris);
    return r;
}

void dump_rows(std::ostream& out, const std::vector<double>& scores, const std::vector<std::uint8_t>& ok) {
    out << "candidate,ssc,feasible\n";
    for (std::size_t c = 0; c < scores.size(); ++c) out << fmt::format("{},{},{:d}\n", c, scores[c], ok[c] != 0);
}

}  // namespace

std::uint64_t search_space_size(const SimulationConfig& cfg, SearchSpace space) {
    switch (space) {
        case SearchSpace::alloc: return alloc_space(cfg);
        case SearchSpace::ris: return ris_space(cfg);
        case SearchSpace::joint: return mul_sat(alloc_space(cfg), ris_space(cfg));
    }
    return 0;
}

void decode_candidate(const SimulationConfig& cfg, const SearchOptions& opt, std::uint64_t index,
                      AllocationState& alloc, RisConfiguration& ris) {
    const Split s = split(cfg, opt.space, index);
    if (opt.space == SearchSpace::alloc)
        ris = opt.fixed_ris;
    else
        decode_ris(cfg, s.ris, ris);
    if (opt.space == SearchSpace::ris)
        alloc = opt.fixed_alloc;
    else
        decode_alloc(cfg, s.alloc, alloc);
}

SearchResult exhaustive_search_serial(const Topology& topo, const SimulationConfig& cfg, const SearchOptions& opt) {
    const auto n = search_space_size(cfg, opt.space);
    check_options(cfg, opt, n);
    const Scorer scorer(topo, cfg, opt);
    Scorer::Cache cache;
    std::vector<double> scores;
    std::vector<std::uint8_t> ok;
    if (opt.dump) {
        scores.resize(n);
        ok.resize(n);
    }
    std::uint64_t best = 0, feasible_count = 0;
    double best_score = -1.0;
    for (std::uint64_t c = 0; c < n; ++c) {
        const auto [s, f] = scorer.score(c, cache);
        feasible_count += f;
        if (s > best_score) {
            best_score = s;
            best = c;
        }
        if (opt.dump) {
            scores[c] = s;
            ok[c] = f;
        }
    }
    if (opt.dump) dump_rows(*opt.dump, scores, ok);
    return finish(cfg, opt, n, best, best_score, feasible_count);
}

SearchResult exhaustive_search(const Topology& topo, const SimulationConfig& cfg, const SearchOptions& opt) {
    const auto n = search_space_size(cfg, opt.space);
    check_options(cfg, opt, n);
    const Scorer scorer(topo, cfg, opt);
    std::vector<double> scores;
    std::vector<std::uint8_t> ok;
    if (opt.dump) {
        scores.resize(n);
        ok.resize(n);
    }
    std::uint64_t best = 0, feasible_count = 0;
    double best_score = -1.0;
    const auto count = static_cast<std::int64_t>(n);

#pragma omp parallel
    {
        Scorer::Cache cache;
        std::uint64_t local_best = 0, local_feasible = 0;
        double local_score = -1.0;
#pragma omp for schedule(static) nowait
        for (std::int64_t i = 0; i < count; ++i) {
            const auto c = static_cast<std::uint64_t>(i);
            const auto [s, f] = scorer.score(c, cache);
            local_feasible += f;
            if (s > local_score) {
                local_score = s;
                local_best = c;
            }
            if (opt.dump) {
                scores[c] = s;
                ok[c] = f;
            }
        }
#pragma omp critical(rissec_exhaustive_reduce)
        {
            feasible_count += local_feasible;
            if (local_score > best_score || (local_score == best_score && local_best < best)) {
                best_score = local_score;
                best = local_best;
            }
        }
    }
    if (opt.dump) dump_rows(*opt.dump, scores, ok);
    return finish(cfg, opt, n, best, best_score, feasible_count);
}

}  // namespace rissec
