#include "rissec/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>
#include <fmt/format.h>

#include "rissec/common.hpp"

namespace rissec {

namespace pt = boost::property_tree;

double RadioParams::wavelength(int subchannel) const {
    return kSpeedOfLight / (carrier_hz + subchannel * bandwidth_hz);
}

double TrainConfig::epsilon_at(int epoch) const {
    return std::max(epsilon_min, epsilon_start * std::pow(epsilon_decay, epoch));
}

namespace {

// One registered setting: how to read it from text and how to print it.
struct Field {
    std::function<void(SimulationConfig&, const std::string&)> set;
    std::function<std::string(const SimulationConfig&)> get;
};

template <class T>
T parse_value(const std::string& key, const std::string& raw) {
    std::istringstream in(raw);
    T value{};
    in >> value;
    if (in.fail() || !(in >> std::ws).eof())
        throw ConfigError(fmt::format("config key '{}': cannot parse '{}'", key, raw));
    return value;
}

template <>
bool parse_value<bool>(const std::string& key, const std::string& raw) {
    if (raw == "true" || raw == "1" || raw == "yes") return true;
    if (raw == "false" || raw == "0" || raw == "no") return false;
    throw ConfigError(fmt::format("config key '{}': expected boolean, got '{}'", key, raw));
}

std::string print(double v) { return fmt::format("{}", v); }
std::string print(int v) { return fmt::format("{}", v); }
std::string print(std::uint64_t v) { return fmt::format("{}", v); }
std::string print(bool v) { return v ? "true" : "false"; }

template <class T, class Getter>
Field scalar(Getter member) {
    return Field{
        [member](SimulationConfig& c, const std::string& raw) {
            // key name is attached by the caller on failure
            member(c) = parse_value<T>("", raw);
        },
        [member](const SimulationConfig& c) {
            return print(member(c));
        }};
}

const char* mask_name(ReflectionMask m) {
    switch (m) {
        case ReflectionMask::all: return "all";
        case ReflectionMask::d2d_only: return "d2d";
        case ReflectionMask::none: return "none";
    }
    return "all";
}

const std::map<std::string, Field>& registry() {
    using C = SimulationConfig;
    static const std::map<std::string, Field> fields = [] {
        std::map<std::string, Field> f;
        f["network.cellular_users"] = scalar<int>([](auto& c) -> auto& { return c.network.cellular_users; });
        f["network.d2d_pairs"] = scalar<int>([](auto& c) -> auto& { return c.network.d2d_pairs; });
        f["network.eavesdroppers"] = scalar<int>([](auto& c) -> auto& { return c.network.eavesdroppers; });
        f["network.area_width"] = scalar<double>([](auto& c) -> auto& { return c.network.area_width; });
        f["network.area_length"] = scalar<double>([](auto& c) -> auto& { return c.network.area_length; });
        f["network.pair_radius"] = scalar<double>([](auto& c) -> auto& { return c.network.pair_radius; });
        f["network.height_user"] = scalar<double>([](auto& c) -> auto& { return c.network.height_user; });
        f["network.height_bs"] = scalar<double>([](auto& c) -> auto& { return c.network.height_bs; });
        f["network.height_ris"] = scalar<double>([](auto& c) -> auto& { return c.network.height_ris; });
        f["network.height_eve"] = scalar<double>([](auto& c) -> auto& { return c.network.height_eve; });

        f["ris.elements"] = scalar<int>([](auto& c) -> auto& { return c.ris.elements; });
        f["ris.grid_sections"] = scalar<int>([](auto& c) -> auto& { return c.ris.grid_sections; });
        f["ris.phase_bits"] = scalar<int>([](auto& c) -> auto& { return c.ris.phase_bits; });
        f["ris.amplitude"] = scalar<double>([](auto& c) -> auto& { return c.ris.amplitude; });
        f["ris.element_spacing"] = scalar<double>([](auto& c) -> auto& { return c.ris.element_spacing; });
        f["ris.reflection"] = Field{
            [](C& c, const std::string& raw) {
                if (raw == "all") c.ris.reflection = ReflectionMask::all;
                else if (raw == "d2d") c.ris.reflection = ReflectionMask::d2d_only;
                else if (raw == "none") c.ris.reflection = ReflectionMask::none;
                else throw ConfigError(fmt::format("expected all|d2d|none, got '{}'", raw));
            },
            [](const C& c) { return std::string(mask_name(c.ris.reflection)); }};

        f["radio.carrier_hz"] = scalar<double>([](auto& c) -> auto& { return c.radio.carrier_hz; });
        f["radio.bandwidth_hz"] = scalar<double>([](auto& c) -> auto& { return c.radio.bandwidth_hz; });
        f["radio.cu_power_dbm"] = scalar<double>([](auto& c) -> auto& { return c.radio.cu_power_dbm; });
        f["radio.d2d_power_min_dbm"] = scalar<double>([](auto& c) -> auto& { return c.radio.d2d_power_min_dbm; });
        f["radio.d2d_power_max_dbm"] = scalar<double>([](auto& c) -> auto& { return c.radio.d2d_power_max_dbm; });
        f["radio.power_levels"] = scalar<int>([](auto& c) -> auto& { return c.radio.power_levels; });
        f["radio.noise_dbm"] = scalar<double>([](auto& c) -> auto& { return c.radio.noise_dbm; });
        f["radio.ref_gain_db"] = scalar<double>([](auto& c) -> auto& { return c.radio.path_loss.ref_gain_db; });
        f["radio.ref_gain_ris_db"] = scalar<double>([](auto& c) -> auto& { return c.radio.path_loss.ref_gain_ris_db; });
        f["radio.exponent_direct"] = scalar<double>([](auto& c) -> auto& { return c.radio.path_loss.exponent_direct; });
        f["radio.exponent_ris"] = scalar<double>([](auto& c) -> auto& { return c.radio.path_loss.exponent_ris; });

        f["secrecy.fading_draws"] = scalar<int>([](auto& c) -> auto& { return c.secrecy.fading_draws; });
        f["secrecy.sinr_min_d2d_db"] = scalar<double>([](auto& c) -> auto& { return c.secrecy.sinr_min_d2d_db; });
        f["secrecy.sinr_min_cu_db"] = scalar<double>([](auto& c) -> auto& { return c.secrecy.sinr_min_cu_db; });
        f["secrecy.per_draw_constraints"] = scalar<bool>([](auto& c) -> auto& { return c.secrecy.per_draw_constraints; });

        f["train.discount"] = scalar<double>([](auto& c) -> auto& { return c.train.discount; });
        f["train.learning_rate"] = scalar<double>([](auto& c) -> auto& { return c.train.learning_rate; });
        f["train.rmsprop_decay"] = scalar<double>([](auto& c) -> auto& { return c.train.rmsprop_decay; });
        f["train.rmsprop_epsilon"] = scalar<double>([](auto& c) -> auto& { return c.train.rmsprop_epsilon; });
        f["train.batch_size"] = scalar<int>([](auto& c) -> auto& { return c.train.batch_size; });
        f["train.buffer_capacity"] = scalar<int>([](auto& c) -> auto& { return c.train.buffer_capacity; });
        f["train.epsilon_start"] = scalar<double>([](auto& c) -> auto& { return c.train.epsilon_start; });
        f["train.epsilon_min"] = scalar<double>([](auto& c) -> auto& { return c.train.epsilon_min; });
        f["train.epsilon_decay"] = scalar<double>([](auto& c) -> auto& { return c.train.epsilon_decay; });
        f["train.target_sync"] = scalar<int>([](auto& c) -> auto& { return c.train.target_sync; });
        f["train.reward_scale"] = scalar<double>([](auto& c) -> auto& { return c.train.reward_scale; });
        f["train.grad_clip"] = scalar<double>([](auto& c) -> auto& { return c.train.grad_clip; });
        f["train.epochs"] = scalar<int>([](auto& c) -> auto& { return c.train.epochs; });
        f["train.steps_per_epoch"] = scalar<int>([](auto& c) -> auto& { return c.train.steps_per_epoch; });
        f["train.refresh_fading"] = scalar<bool>([](auto& c) -> auto& { return c.train.refresh_fading; });
        f["train.hidden_layers"] = Field{
            [](C& c, const std::string& raw) {
                std::vector<int> dims;
                std::istringstream in(raw);
                std::string tok;
                while (std::getline(in, tok, ',')) dims.push_back(parse_value<int>("", tok));
                c.train.hidden_layers = std::move(dims);
            },
            [](const C& c) { return fmt::format("{}", fmt::join(c.train.hidden_layers, ",")); }};

        f["seeds.topology"] = scalar<std::uint64_t>([](auto& c) -> auto& { return c.seeds.topology; });
        f["seeds.fading"] = scalar<std::uint64_t>([](auto& c) -> auto& { return c.seeds.fading; });
        f["seeds.init"] = scalar<std::uint64_t>([](auto& c) -> auto& { return c.seeds.init; });
        f["seeds.exploration"] = scalar<std::uint64_t>([](auto& c) -> auto& { return c.seeds.exploration; });

        f["oracle.max_candidates"] = scalar<std::uint64_t>([](auto& c) -> auto& { return c.max_candidates; });
        return f;
    }();
    return fields;
}

void require(bool ok, const char* key, const char* bound) {
    if (!ok) throw ConfigError(fmt::format("config key '{}' out of bounds: must be {}", key, bound));
}

}  // namespace

void SimulationConfig::validate() const {
    require(network.cellular_users >= 1, "network.cellular_users", ">= 1");
    require(network.d2d_pairs >= 1, "network.d2d_pairs", ">= 1");
    require(network.eavesdroppers >= 1, "network.eavesdroppers", ">= 1");
    require(network.area_width > 0, "network.area_width", "> 0");
    require(network.area_length > 0, "network.area_length", "> 0");
    require(network.pair_radius > 0, "network.pair_radius", "> 0");
    require(network.height_user > 0, "network.height_user", "> 0");
    require(network.height_bs > 0, "network.height_bs", "> 0");
    require(network.height_ris > 0, "network.height_ris", "> 0");
    require(network.height_eve > 0, "network.height_eve", "> 0");

    require(ris.elements >= 1, "ris.elements", ">= 1");
    require(ris.grid_sections >= 1, "ris.grid_sections", ">= 1");
    const int side = static_cast<int>(std::lround(std::sqrt(ris.grid_sections)));
    require(side * side == ris.grid_sections, "ris.grid_sections", "a perfect square");
    require(ris.phase_bits >= 1 && ris.phase_bits <= 8, "ris.phase_bits", "in [1, 8]");
    require(ris.amplitude >= 0 && ris.amplitude <= 1, "ris.amplitude", "in [0, 1]");
    require(ris.element_spacing > 0, "ris.element_spacing", "> 0");

    require(radio.carrier_hz > 0, "radio.carrier_hz", "> 0");
    require(radio.bandwidth_hz > 0, "radio.bandwidth_hz", "> 0");
    require(radio.d2d_power_min_dbm <= radio.d2d_power_max_dbm, "radio.d2d_power_min_dbm",
            "<= radio.d2d_power_max_dbm");
    require(radio.power_levels >= 1, "radio.power_levels", ">= 1");
    require(std::isfinite(radio.noise_dbm), "radio.noise_dbm", "finite");
    require(std::isfinite(radio.path_loss.ref_gain_db), "radio.ref_gain_db", "finite");
    require(std::isfinite(radio.path_loss.ref_gain_ris_db), "radio.ref_gain_ris_db", "finite");
    require(radio.path_loss.exponent_direct > 0, "radio.exponent_direct", "> 0");
    require(radio.path_loss.exponent_ris > 0, "radio.exponent_ris", "> 0");

    require(secrecy.fading_draws >= 1, "secrecy.fading_draws", ">= 1");

    require(train.discount >= 0 && train.discount < 1, "train.discount", "in [0, 1)");
    require(train.learning_rate >= 0, "train.learning_rate", ">= 0");
    require(train.rmsprop_decay >= 0 && train.rmsprop_decay < 1, "train.rmsprop_decay", "in [0, 1)");
    require(train.rmsprop_epsilon > 0, "train.rmsprop_epsilon", "> 0");
    require(train.batch_size >= 1, "train.batch_size", ">= 1");
    require(train.buffer_capacity >= train.batch_size, "train.buffer_capacity", ">= train.batch_size");
    require(train.epsilon_start >= 0 && train.epsilon_start <= 1, "train.epsilon_start", "in [0, 1]");
    require(train.epsilon_min >= 0 && train.epsilon_min <= 1, "train.epsilon_min", "in [0, 1]");
    require(train.epsilon_decay > 0 && train.epsilon_decay <= 1, "train.epsilon_decay", "in (0, 1]");
    require(train.target_sync >= 1, "train.target_sync", ">= 1");
    require(train.reward_scale > 0, "train.reward_scale", "> 0");
    require(train.grad_clip >= 0, "train.grad_clip", ">= 0");
    require(train.epochs >= 1, "train.epochs", ">= 1");
    require(train.steps_per_epoch >= 1, "train.steps_per_epoch", ">= 1");
    require(!train.hidden_layers.empty(), "train.hidden_layers", "non-empty");
    for (int h : train.hidden_layers) require(h >= 1, "train.hidden_layers", "all entries >= 1");

    require(max_candidates >= 1, "oracle.max_candidates", ">= 1");
}

void SimulationConfig::apply_master_seed(std::uint64_t seed) {
    seeds.topology = mix_seed(seed, 0);
    seeds.fading = mix_seed(seed, 1);
    seeds.init = mix_seed(seed, 2);
    seeds.exploration = mix_seed(seed, 3);
}

SimulationConfig parse_config(const std::string& text) {
    pt::ptree tree;
    std::istringstream in(text);
    try {
        pt::read_ini(in, tree);
    } catch (const pt::ini_parser_error& e) {
        throw ConfigError(fmt::format("config parse error at line {}: {}", e.line(), e.message()));
    }

    SimulationConfig cfg;
    bool noise_given = false;
    const auto& fields = registry();
    for (const auto& [section, body] : tree) {
        if (body.empty() && !body.data().empty())
            throw ConfigError(fmt::format("config key '{}' must live inside a [section]", section));
        for (const auto& [name, value] : body) {
            const std::string key = section + "." + name;
            auto it = fields.find(key);
            if (it == fields.end()) throw ConfigError(fmt::format("unknown config key '{}'", key));
            try {
                it->second.set(cfg, value.data());
            } catch (const ConfigError& e) {
                throw ConfigError(fmt::format("config key '{}': {}", key, e.what()));
            }
            if (key == "radio.noise_dbm") noise_given = true;
        }
    }
    if (!noise_given) cfg.radio.noise_dbm = -174.0 + 10.0 * std::log10(cfg.radio.bandwidth_hz);
    cfg.validate();
    return cfg;
}

SimulationConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read config file '{}'", path.string()));
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::string dump_config(const SimulationConfig& cfg) {
    std::string out;
    std::string current;
    for (const auto& [key, field] : registry()) {
        const auto dot = key.find('.');
        const std::string section = key.substr(0, dot);
        if (section != current) {
            if (!current.empty()) out += "\n";
            out += fmt::format("[{}]\n", section);
            current = section;
        }
        out += fmt::format("{} = {}\n", key.substr(dot + 1), field.get(cfg));
    }
    return out;
}

std::string config_hash(const SimulationConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : dump_config(cfg)) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return fmt::format("{:016x}", h);
}

}  // namespace rissec
