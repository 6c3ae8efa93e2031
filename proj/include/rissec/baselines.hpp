#pragma once

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>

#include "rissec/agents.hpp"

namespace rissec {

/// Uniform index in [0, size).
int random_policy(int action_space_size, std::mt19937_64& rng);

enum class SearchSpace { alloc, ris, joint };

SearchSpace parse_search_space(const std::string& name);
std::string to_string(SearchSpace s);

struct SearchOptions {
    SearchSpace space = SearchSpace::alloc;
    std::uint64_t fading_seed = 0;
    RisConfiguration fixed_ris;    // alloc mode
    AllocationState fixed_alloc;   // ris mode
    std::ostream* dump = nullptr;  // candidate,ssc,feasible rows in index order
};

struct SearchResult {
    std::uint64_t index = 0;       // winning candidate
    std::uint64_t candidates = 0;
    std::uint64_t feasible = 0;
    double ssc = 0.0;              // score of the winner (0 when nothing is feasible)
    AllocationState alloc;
    RisConfiguration ris;
};

/// Number of candidates in the space: (K L_p + 1)^M, x (2^b)^N or their product.
/// Saturates at UINT64_MAX.
std::uint64_t search_space_size(const SimulationConfig& cfg, SearchSpace space);

/// Candidate index -> configuration, mixed radix with the most significant
/// digit first: joint = ris * |alloc| + alloc; an allocation lists pair 0
/// first (D2D action codes), a RIS configuration lists the location first
/// and then the element levels.
void decode_candidate(const SimulationConfig& cfg, const SearchOptions& opt, std::uint64_t index,
                      AllocationState& alloc, RisConfiguration& ris);

/// Brute force over every candidate with a fixed fading draw set. Infeasible
/// candidates score 0; ties go to the lowest index. Throws ConfigError when
/// the space exceeds cfg.max_candidates.
SearchResult exhaustive_search(const Topology& topo, const SimulationConfig& cfg, const SearchOptions& opt);
SearchResult exhaustive_search_serial(const Topology& topo, const SimulationConfig& cfg, const SearchOptions& opt);

/// The DQN baseline: the same loops with the max-over-target Bellman target.
inline D2DTrainResult train_d2d_dqn(const Topology& topo, const SimulationConfig& cfg) {
    return train_d2d(topo, cfg, TargetKind::dqn);
}
inline RisTrainResult train_ris_dqn(const Topology& topo, AllocationPolicy& allocation, const SimulationConfig& cfg) {
    return train_ris(topo, allocation, cfg, TargetKind::dqn);
}

}  // namespace rissec
