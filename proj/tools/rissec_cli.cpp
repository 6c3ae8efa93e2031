// rissec: command-line front end for the RIS-assisted D2D secrecy simulator.
//
//   rissec gen-topology | train-alloc | train-ris | evaluate | oracle | baseline | report
//
// Every subcommand works inside <out-dir>/run-<config hash>-s<seed>/ and marks
// completion with <name>.done; a completed step is not redone without --force.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <fmt/ranges.h>

#include "rissec/baselines.hpp"
#include "rissec/common.hpp"
#include "rissec/report.hpp"

namespace fs = std::filesystem;
using namespace rissec;

namespace {

class RunExistsError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum ExitCode { kOk = 0, kOther = 1, kConfig = 2, kPrerequisite = 3, kNumeric = 4, kRunExists = 5 };

constexpr std::uint64_t kEvalSeedTag = 0x4556414c;  // "EVAL"

struct CommonOptions {
    std::string config;
    std::uint64_t seed = 0;
    std::string out_dir = "runs";
    bool force = false;
};

struct Run {
    SimulationConfig cfg;
    fs::path dir;
    bool force = false;

    fs::path file(const std::string& name) const { return dir / name; }
};

void add_common(CLI::App* sub, CommonOptions& o) {
    sub->add_option("--config", o.config, "INI configuration file (defaults when omitted)")->check(CLI::ExistingFile);
    sub->add_option("--seed", o.seed, "master seed overriding [seeds]; 0 keeps the file's seeds");
    sub->add_option("--out-dir", o.out_dir, "parent directory of run directories");
    sub->add_flag("--force", o.force, "redo a step that already completed");
}

// Loads the configuration, resolves the run directory and echoes the
// effective configuration into it.
Run open_run(const CommonOptions& o) {
    Run run;
    run.cfg = o.config.empty() ? SimulationConfig{} : load_config(o.config);
    const std::string hash = config_hash(run.cfg);
    if (o.seed != 0) run.cfg.apply_master_seed(o.seed);
    run.cfg.validate();
    run.force = o.force;
    run.dir = fs::path(o.out_dir) / fmt::format("run-{}-s{}", hash, o.seed);
    fs::create_directories(run.dir);
    std::ofstream(run.file("config.ini")) << dump_config(run.cfg);
    return run;
}

void begin_step(const Run& run, const std::string& step) {
    if (fs::exists(run.file(step + ".done")) && !run.force)
        throw RunExistsError(fmt::format("'{}' already completed in {}; pass --force to redo it", step,
                                         run.dir.string()));
    fs::remove(run.file(step + ".done"));
}

void finish_step(const Run& run, const std::string& step) { std::ofstream(run.file(step + ".done")) << step << "\n"; }

std::ofstream open_output(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error(fmt::format("cannot write '{}'", path.string()));
    return out;
}

Topology topology_for(const Run& run) {
    const auto path = run.file("topology.txt");
    if (fs::exists(path)) {
        auto topo = load_topology(path);
        if (topo.num_cus() != run.cfg.network.cellular_users || topo.num_pairs() != run.cfg.network.d2d_pairs ||
            topo.num_eves() != run.cfg.network.eavesdroppers)
            throw PrerequisiteError(fmt::format("{} does not match the configured network size", path.string()));
        return topo;
    }
    auto topo = generate_topology(run.cfg, run.cfg.seeds.topology);
    save_topology(path, topo);
    return topo;
}

std::string alloc_checkpoint(const std::string& prefix, int i) { return fmt::format("{}alloc_agent_{}.ckpt", prefix, i); }

std::optional<std::vector<QNetwork>> load_alloc_nets(const Run& run, const std::string& prefix) {
    std::vector<QNetwork> nets;
    for (int i = 0; i < run.cfg.network.d2d_pairs; ++i) {
        const auto path = run.file(alloc_checkpoint(prefix, i));
        if (!fs::exists(path)) return std::nullopt;
        nets.push_back(load_checkpoint(path).net);
    }
    return nets;
}

std::vector<QNetwork> require_alloc_nets(const Run& run) {
    auto nets = load_alloc_nets(run, "");
    if (!nets)
        throw PrerequisiteError(fmt::format("no allocation checkpoints in {}; run train-alloc first",
                                            run.dir.string()));
    return *nets;
}

void save_alloc(const Run& run, const D2DTrainResult& res, const std::string& prefix) {
    {
        auto out = open_output(run.file(prefix + "alloc_metrics.csv"));
        write_metrics_csv(out, res.log);
    }
    for (std::size_t i = 0; i < res.agents.size(); ++i)
        save_checkpoint(run.file(alloc_checkpoint(prefix, static_cast<int>(i))), res.agents[i].network(),
                        &res.agents[i].optimizer());
}

void save_ris(const Run& run, const RisTrainResult& res, const std::string& prefix) {
    {
        auto out = open_output(run.file(prefix + "ris_metrics.csv"));
        write_metrics_csv(out, res.log);
    }
    auto out = open_output(run.file(prefix + "ris_locations.csv"));
    out << "location,visits,mean_reward\n";
    for (const auto& l : res.locations) out << fmt::format("{},{},{}\n", l.location, l.visits, l.mean_reward);
    save_checkpoint(run.file(prefix + "ris_agent.ckpt"), res.agent.network(), &res.agent.optimizer());
}

void summarize_log(const std::string& what, const std::vector<StepRecord>& log) {
    if (log.empty()) return;
    const int last = log.back().epoch;
    double reward = 0.0;
    int n = 0;
    for (const auto& r : log)
        if (r.epoch == last) reward += r.reward, ++n;
    fmt::print(stderr, "{}: {} rows, final-epoch mean reward {:.4g}\n", what, log.size(), reward / n);
}

// ---------------------------------------------------------------- steps

void cmd_gen_topology(const CommonOptions& o) {
    const auto run = open_run(o);
    begin_step(run, "gen-topology");
    const auto topo = generate_topology(run.cfg, run.cfg.seeds.topology);
    save_topology(run.file("topology.txt"), topo);
    auto out = open_output(run.file("topology.csv"));
    out << "role,id,x,y,z\n";
    auto rows = [&out](const char* role, const std::vector<Position3D>& ps) {
        for (std::size_t i = 0; i < ps.size(); ++i)
            out << fmt::format("{},{},{},{},{}\n", role, i, ps[i].x, ps[i].y, ps[i].z);
    };
    rows("bs", {topo.bs});
    rows("cu", topo.cus);
    rows("d2d_tx", topo.d2d_tx);
    rows("d2d_rx", topo.d2d_rx);
    rows("eve", topo.eves);
    rows("ris_grid", topo.ris_grid);
    finish_step(run, "gen-topology");
    fmt::print("{}\n", run.dir.string());
}

void cmd_train_alloc(const CommonOptions& o) {
    const auto run = open_run(o);
    begin_step(run, "train-alloc");
    const auto res = train_d2d(topology_for(run), run.cfg, TargetKind::ddqn);
    save_alloc(run, res, "");
    summarize_log("train-alloc", res.log);
    finish_step(run, "train-alloc");
    fmt::print("{}\n", run.dir.string());
}

std::unique_ptr<AllocationPolicy> allocation_policy(const Run& run, const std::string& fixed) {
    if (fixed == "idle")
        return std::make_unique<FixedAllocationPolicy>(
            AllocationState::idle(run.cfg.network.cellular_users, run.cfg.network.d2d_pairs, run.cfg.radio.cu_power_dbm));
    if (!fixed.empty()) throw ConfigError(fmt::format("--fixed-alloc expects 'idle', got '{}'", fixed));
    auto nets = load_alloc_nets(run, "");
    if (!nets)
        throw PrerequisiteError(fmt::format(
            "train-ris needs the allocation checkpoints from train-alloc in {} (or --fixed-alloc idle)",
            run.dir.string()));
    return std::make_unique<GreedyD2DPolicy>(std::move(*nets), run.cfg);
}

void cmd_train_ris(const CommonOptions& o, const std::string& fixed) {
    const auto run = open_run(o);
    begin_step(run, "train-ris");
    auto policy = allocation_policy(run, fixed);
    const auto res = train_ris(topology_for(run), *policy, run.cfg, TargetKind::ddqn);
    save_ris(run, res, "");
    summarize_log("train-ris", res.log);
    finish_step(run, "train-ris");
    fmt::print("{}\n", run.dir.string());
}

void write_eval_rows(std::ostream& out, const std::string& policy, const EvalResult& r) {
    for (const auto& e : r.episodes)
        out << fmt::format("{},{},{},{},{},{}\n", policy, e.episode, e.ssc, e.reward, e.constraint_rate,
                           e.ris.location_index);
    fmt::print(stderr, "{:<12} mean SSC {:.4g} bit/s  reward {:.4g}  constraints met {:.0f}%\n", policy, r.mean_ssc,
               r.mean_reward, 100 * r.constraint_rate);
}

constexpr const char* kEvalHeader = "policy,episode,ssc,reward,constraint_rate,ris_location\n";

EvalOptions eval_options(const Run& run, int episodes) {
    EvalOptions opt;
    opt.episodes = episodes;
    opt.seed = mix_seed(run.cfg.seeds.fading, kEvalSeedTag);
    opt.refresh_fading = true;
    return opt;
}

void cmd_evaluate(const CommonOptions& o, int episodes) {
    const auto run = open_run(o);
    begin_step(run, "evaluate");
    const auto topo = topology_for(run);
    const auto opt = eval_options(run, episodes);
    auto nets = require_alloc_nets(run);

    auto out = open_output(run.file("evaluate.csv"));
    out << kEvalHeader;
    {
        GreedyD2DPolicy greedy(nets, run.cfg);
        write_eval_rows(out, "alloc-ddqn", evaluate_allocation(greedy, topo, run.cfg, opt));
    }
    if (auto dqn = load_alloc_nets(run, "dqn_")) {
        GreedyD2DPolicy greedy(std::move(*dqn), run.cfg);
        write_eval_rows(out, "alloc-dqn", evaluate_allocation(greedy, topo, run.cfg, opt));
    }
    {
        RandomAllocationPolicy random(run.cfg, mix_seed(opt.seed, 1));
        write_eval_rows(out, "alloc-random", evaluate_allocation(random, topo, run.cfg, opt));
    }
    for (const auto& [label, file] : {std::pair{"ris-ddqn", "ris_agent.ckpt"}, std::pair{"ris-dqn", "dqn_ris_agent.ckpt"}}) {
        if (!fs::exists(run.file(file))) continue;
        const auto net = load_checkpoint(run.file(file)).net;
        GreedyD2DPolicy greedy(nets, run.cfg);
        write_eval_rows(out, label, evaluate_ris(&net, greedy, topo, run.cfg, opt));
    }
    {
        GreedyD2DPolicy greedy(nets, run.cfg);
        write_eval_rows(out, "ris-random", evaluate_ris(nullptr, greedy, topo, run.cfg, opt));
    }
    finish_step(run, "evaluate");
    fmt::print("{}\n", run.dir.string());
}

std::string join_levels(const std::vector<int>& v) { return fmt::format("{}", fmt::join(v, "-")); }

void cmd_oracle(const CommonOptions& o, const std::string& mode_name, bool dump, int location) {
    const auto mode = parse_search_space(mode_name);
    const auto run = open_run(o);
    const std::string step = "oracle-" + mode_name;
    begin_step(run, step);
    const auto topo = topology_for(run);

    SearchOptions opt;
    opt.space = mode;
    opt.fading_seed = run.cfg.seeds.fading;
    opt.fixed_ris = RisConfiguration::zeros(run.cfg.ris);
    if (location < 0 || location >= run.cfg.ris.grid_sections)
        throw ConfigError(fmt::format("--ris-location must be in [0, {})", run.cfg.ris.grid_sections));
    opt.fixed_ris.location_index = location;
    opt.fixed_alloc = AllocationState::idle(run.cfg.network.cellular_users, run.cfg.network.d2d_pairs,
                                            run.cfg.radio.cu_power_dbm);
    if (mode == SearchSpace::ris) {
        if (auto nets = load_alloc_nets(run, "")) {
            // the trained policy's first decision on the fixed-RIS channels
            GreedyD2DPolicy greedy(std::move(*nets), run.cfg);
            opt.fixed_alloc = greedy.decide(realize_ensemble(topo, opt.fixed_ris, run.cfg, opt.fading_seed));
        }
    }
    std::optional<std::ofstream> dump_out;
    if (dump) {
        dump_out = open_output(run.file(fmt::format("oracle_{}_candidates.csv", mode_name)));
        opt.dump = &*dump_out;
    }
    const auto res = exhaustive_search(topo, run.cfg, opt);
    auto out = open_output(run.file(fmt::format("oracle_{}.csv", mode_name)));
    out << "mode,fading_seed,candidates,feasible,index,ssc,ris_location,phase_levels,rho,d2d_power_dbm\n";
    std::vector<int> rho(res.alloc.rho.begin(), res.alloc.rho.end());
    std::vector<std::string> powers;
    for (double p : res.alloc.d2d_power_dbm) powers.push_back(fmt::format("{}", p));
    out << fmt::format("{},{},{},{},{},{},{},{},{},{}\n", mode_name, opt.fading_seed, res.candidates, res.feasible,
                       res.index, res.ssc, res.ris.location_index, join_levels(res.ris.phase_levels),
                       join_levels(rho), fmt::join(powers, "-"));
    fmt::print(stderr, "oracle {}: best SSC {:.4g} bit/s at candidate {} of {} ({} feasible)\n", mode_name, res.ssc,
               res.index, res.candidates, res.feasible);
    finish_step(run, step);
    fmt::print("{}\n", run.dir.string());
}

void cmd_baseline(const CommonOptions& o, const std::string& which, int episodes) {
    const auto run = open_run(o);
    const std::string step = "baseline-" + which;
    begin_step(run, step);
    const auto topo = topology_for(run);
    if (which == "random") {
        const auto opt = eval_options(run, episodes);
        RandomAllocationPolicy random(run.cfg, mix_seed(opt.seed, 1));
        auto out = open_output(run.file("baseline_random.csv"));
        out << kEvalHeader;
        write_eval_rows(out, "alloc-random", evaluate_allocation(random, topo, run.cfg, opt));
    } else {
        const auto res = train_d2d_dqn(topo, run.cfg);
        save_alloc(run, res, "dqn_");
        summarize_log("baseline dqn (allocation)", res.log);
        // the RIS comparison runs against the DDQN allocation policy when it exists
        if (auto nets = load_alloc_nets(run, "")) {
            GreedyD2DPolicy greedy(std::move(*nets), run.cfg);
            const auto ris = train_ris_dqn(topo, greedy, run.cfg);
            save_ris(run, ris, "dqn_");
            summarize_log("baseline dqn (RIS)", ris.log);
        }
    }
    finish_step(run, step);
    fmt::print("{}\n", run.dir.string());
}

// ---------------------------------------------------------------- report

std::optional<CsvTable> try_csv(const Run& run, const std::string& name) {
    if (!fs::exists(run.file(name))) return std::nullopt;
    return read_csv_file(run.file(name).string());
}

void write_text(const fs::path& path, const std::string& text) { open_output(path) << text; }

void cmd_report(const CommonOptions& o) {
    const auto run = open_run(o);
    int charts = 0;

    // loss and reward against epoch for whichever trainers ran (RIS first)
    for (const auto& [metric, file, ylabel] :
         {std::tuple{"loss", "fig_loss.svg", "mean minibatch loss"}, std::tuple{"reward", "fig_reward.svg", "mean reward"}}) {
        std::vector<Series> series;
        for (const auto& [csv, label] : {std::pair{"ris_metrics.csv", "RIS DDQN"}, std::pair{"dqn_ris_metrics.csv", "RIS DQN"},
                                         std::pair{"alloc_metrics.csv", "D2D DDQN"},
                                         std::pair{"dqn_alloc_metrics.csv", "D2D DQN"}}) {
            if (auto t = try_csv(run, csv)) {
                auto s = group_mean(*t, "epoch", metric, label);
                series.push_back(moving_average(s, std::max<int>(1, static_cast<int>(s.x.size()) / 50)));
            }
        }
        if (series.empty()) {
            fmt::print(stderr, "report: no training metrics, skipping {}\n", file);
            continue;
        }
        write_text(run.file(file), line_chart_svg({fmt::format("Training {} per epoch", metric), "epoch", ylabel}, series));
        ++charts;
    }

    if (auto t = try_csv(run, "evaluate.csv")) {
        const auto pi = t->column("policy");
        std::vector<std::string> names;
        for (const auto& r : t->rows)
            if (std::find(names.begin(), names.end(), r[pi]) == names.end()) names.push_back(r[pi]);
        std::vector<Series> series;
        for (const auto& name : names) {
            CsvTable sub{t->header, {}};
            for (const auto& r : t->rows)
                if (r[pi] == name) sub.rows.push_back(r);
            series.push_back(group_mean(sub, "episode", "ssc", name));
        }
        if (auto oracle = try_csv(run, "oracle_alloc.csv"); oracle && !series.empty()) {
            const double bound = oracle->numeric("ssc").at(0);
            series.push_back({"search (fixed draws)", {series[0].x.front(), series[0].x.back()}, {bound, bound}});
        }
        write_text(run.file("fig_ssc.svg"), line_chart_svg({"Sum secrecy capacity per test episode", "test episode",
                                                            "SSC (bit/s)"},
                                                           series));
        ++charts;
    } else {
        fmt::print(stderr, "report: no evaluate.csv, skipping fig_ssc.svg\n");
    }

    if (auto t = try_csv(run, "ris_locations.csv")) {
        const auto values = t->numeric("mean_reward");
        const int side = static_cast<int>(std::lround(std::sqrt(static_cast<double>(values.size()))));
        if (side * side != static_cast<int>(values.size())) throw std::runtime_error("ris_locations.csv is not a square grid");
        int best = 0;
        for (std::size_t j = 1; j < values.size(); ++j)
            if (values[j] > values[best]) best = static_cast<int>(j);
        write_text(run.file("fig_locations.svg"),
                   heatmap_svg({"Mean reward by RIS location during training", "x cell", "y cell"}, side, side, values,
                               best));
        ++charts;
    } else {
        fmt::print(stderr, "report: no ris_locations.csv, skipping fig_locations.svg\n");
    }

    if (charts == 0) throw PrerequisiteError(fmt::format("nothing to report in {}", run.dir.string()));
    fmt::print(stderr, "report: {} chart(s) written\n", charts);
    fmt::print("{}\n", run.dir.string());
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"RIS-assisted D2D secrecy simulator: DDQN allocation and RIS training, baselines and reports"};
    app.require_subcommand(1);

    CommonOptions common;
    int episodes = 10;
    std::string fixed_alloc, mode = "alloc", which;
    bool dump = false;
    int location = 0;

    auto* gen = app.add_subcommand("gen-topology", "place nodes and write topology.txt / topology.csv");
    auto* talloc = app.add_subcommand("train-alloc", "train the per-pair allocation agents");
    auto* tris = app.add_subcommand("train-ris", "train the RIS agent against the trained allocation policy");
    tris->add_option("--fixed-alloc", fixed_alloc, "use a fixed allocation policy instead of checkpoints (idle)");
    auto* eval = app.add_subcommand("evaluate", "greedy rollouts of the trained agents and the random baselines");
    eval->add_option("--episodes", episodes, "test episodes per policy")->check(CLI::PositiveNumber);
    auto* oracle = app.add_subcommand("oracle", "exhaustive search on the fixed fading draw set");
    oracle->add_option("--mode", mode, "search space")->check(CLI::IsMember({"alloc", "ris", "joint"}));
    oracle->add_flag("--dump", dump, "write every candidate's score");
    oracle->add_option("--ris-location", location, "RIS location for alloc mode");
    auto* base = app.add_subcommand("baseline", "random allocation or DQN-target training");
    base->add_option("kind", which, "random | dqn")->required()->check(CLI::IsMember({"random", "dqn"}));
    base->add_option("--episodes", episodes, "test episodes (random)")->check(CLI::PositiveNumber);
    auto* rep = app.add_subcommand("report", "render SVG charts from the run's CSV files");
    for (auto* sub : {gen, talloc, tris, eval, oracle, base, rep}) add_common(sub, common);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kOk : kConfig;
    }

    try {
        if (gen->parsed()) cmd_gen_topology(common);
        else if (talloc->parsed()) cmd_train_alloc(common);
        else if (tris->parsed()) cmd_train_ris(common, fixed_alloc);
        else if (eval->parsed()) cmd_evaluate(common, episodes);
        else if (oracle->parsed()) cmd_oracle(common, mode, dump, location);
        else if (base->parsed()) cmd_baseline(common, which, episodes);
        else if (rep->parsed()) cmd_report(common);
        return kOk;
    } catch (const ConfigError& e) {
        fmt::print(stderr, "config error: {}\n", e.what());
        return kConfig;
    } catch (const PrerequisiteError& e) {
        fmt::print(stderr, "missing prerequisite: {}\n", e.what());
        return kPrerequisite;
    } catch (const NumericError& e) {
        fmt::print(stderr, "numeric error: {}\n", e.what());
        return kNumeric;
    } catch (const RunExistsError& e) {
        fmt::print(stderr, "{}\n", e.what());
        return kRunExists;
    } catch (const std::exception& e) {
        fmt::print(stderr, "error: {}\n", e.what());
        return kOther;
    }
}