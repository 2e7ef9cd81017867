#pragma once

// Experiment orchestration: configuration, the per-frame simulation loop,
// policy comparisons, parameter sweeps and CSV exports.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <istream>
#include <limits>
#include <numbers>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "hetfl/association.hpp"
#include "hetfl/channel.hpp"
#include "hetfl/common.hpp"
#include "hetfl/data_split.hpp"
#include "hetfl/energy.hpp"
#include "hetfl/fl.hpp"
#include "hetfl/topology.hpp"

namespace hetfl::sim {

enum class Policy { Bfs, H2rma, Random };
enum class Scheduling { Off, Heuristic, Random };
enum class Mobility { Off, Hmm };

inline std::string to_string(Policy p) {
    switch (p) {
        case Policy::Bfs: return "bfs";
        case Policy::H2rma: return "h2rma";
        case Policy::Random: return "random";
    }
    return "?";
}
inline std::string to_string(Scheduling s) {
    switch (s) {
        case Scheduling::Off: return "off";
        case Scheduling::Heuristic: return "heuristic";
        case Scheduling::Random: return "random";
    }
    return "?";
}
inline std::string to_string(Mobility m) { return m == Mobility::Hmm ? "hmm" : "off"; }

inline Policy parse_policy(const std::string& s) {
    if (s == "bfs") return Policy::Bfs;
    if (s == "h2rma") return Policy::H2rma;
    if (s == "random") return Policy::Random;
    fail(ErrorKind::Config, "unknown policy '" + s + "'");
}
inline Scheduling parse_scheduling(const std::string& s) {
    if (s == "off") return Scheduling::Off;
    if (s == "heuristic") return Scheduling::Heuristic;
    if (s == "random") return Scheduling::Random;
    fail(ErrorKind::Config, "unknown scheduling '" + s + "'");
}
inline Mobility parse_mobility(const std::string& s) {
    if (s == "off") return Mobility::Off;
    if (s == "hmm") return Mobility::Hmm;
    fail(ErrorKind::Config, "unknown mobility '" + s + "'");
}

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }

struct SimConfig {
    // network
    std::int64_t n_cu = 128;
    std::int64_t n_mec = 16;
    std::int64_t mecs = 8;
    std::int64_t devices = 20;
    std::int64_t frames = 50;
    double cell_radius = 200.0;
    double pathloss_exponent = 3.7;
    double reference_distance = 1.0;
    double rician_k = 10.0;
    bool enforce_capacity = true;
    bool frozen_channels = false;
    // radio and energy
    double bandwidth = 20e6;
    double noise_psd_dbm = -174.0;
    double circuit_power_dbm = 30.0;
    double circuit_duration = 0.01;
    double vartheta = 1e9;
    double omega = 40.0;
    double varsigma = 1e-27;
    double model_bits = 1.6e8;  // 0: 32 bits per classifier parameter
    double rate_dev = 0.0;      // 0: equal to the bandwidth
    double rate_mec = 0.0;
    double b_max = 1000.0;
    double b_0 = 200.0;
    std::vector<double> alpha;  // per frame, last value repeats; empty: 1
    std::string xi_mode = "uniform";
    // association and scheduling
    Policy policy = Policy::H2rma;
    Scheduling scheduling = Scheduling::Off;
    double theta_max = 0.5;
    double e_th = -1.0;  // negative: percentile of the frame's access energies
    double e_th_percentile = 0.75;
    unsigned bfs_threads = 1;
    // mobility
    Mobility mobility = Mobility::Off;
    bool dhda = true;
    double frame_duration = 1.0;
    double micro_cell = 20.0;
    topology::MobilityParams mobility_params{};
    double hmm_stay = 0.8;
    // learning
    std::int64_t classes = 10;
    std::int64_t features = 16;
    std::int64_t classes_per_device = 2;
    std::int64_t samples_min = 20;
    std::int64_t samples_max = 80;
    double class_separation = 3.0;
    double noise_std = 1.0;
    std::int64_t test_per_class = 100;
    double lr = 0.5;
    std::int64_t batch = 32;
    std::int64_t epochs_local = 1;
    bool train = true;
    std::uint64_t seed = 1;

    [[nodiscard]] double sigma2() const { return dbm_to_watts(noise_psd_dbm) * bandwidth; }
    [[nodiscard]] double circuit_energy() const { return dbm_to_watts(circuit_power_dbm) * circuit_duration; }
    [[nodiscard]] double payload_bits() const {
        return model_bits > 0.0 ? model_bits : 32.0 * static_cast<double>(classes * (features + 1));
    }
    [[nodiscard]] std::size_t capacity() const {
        return enforce_capacity ? static_cast<std::size_t>(n_mec) : assoc::kUnlimited;
    }

    [[nodiscard]] assoc::EnergyContext energy_context() const {
        assoc::EnergyContext ctx;
        ctx.device = {varsigma, omega, vartheta, payload_bits(), circuit_energy(),
                      rate_dev > 0.0 ? rate_dev : bandwidth};
        ctx.n_mec = static_cast<double>(n_mec);
        ctx.bandwidth = bandwidth;
        ctx.sigma2 = sigma2();
        ctx.mec_rate = rate_mec > 0.0 ? rate_mec : bandwidth;
        ctx.b_max = b_max;
        ctx.mec_circuit = circuit_energy();
        ctx.alpha_by_frame = alpha;
        return ctx;
    }

    void validate() const {
        auto need = [](bool ok, const char* what) {
            if (!ok) fail(ErrorKind::Config, what);
        };
        need(mecs >= 1 && devices >= 1, "M and K must be at least 1");
        need(n_mec >= 1 && n_cu >= 1, "antenna counts must be positive");
        need(frames >= 0, "L must be non-negative");
        need(n_cu > (mecs - 1) * n_mec, "N_cu must exceed (M-1) N_mec for block diagonalisation");
        need(!enforce_capacity || devices <= mecs * n_mec, "K exceeds the total MEC antenna capacity");
        need(classes >= 1 && features >= 1, "C and d must be positive");
        need(classes_per_device >= 1 && classes_per_device <= classes, "classes_per_device must lie in [1, C]");
        need(samples_min >= 1 && samples_max >= samples_min, "bad per-class sample counts");
        need(cell_radius > 0.0 && pathloss_exponent > 0.0 && reference_distance > 0.0, "bad geometry");
        need(bandwidth > 0.0 && b_max > 0.0 && b_0 >= 0.0 && b_0 <= b_max, "bad radio or battery parameters");
        need(theta_max >= 0.0, "theta_max must be non-negative");
        need(xi_mode == "uniform", "only xi_mode = uniform is supported");
        need(lr > 0.0 && batch >= 1 && epochs_local >= 0, "bad training parameters");
        need(frame_duration > 0.0 && micro_cell > 0.0, "bad mobility parameters");
        need(hmm_stay >= 0.0 && hmm_stay <= 1.0, "hmm_stay must lie in [0, 1]");
        need(e_th_percentile >= 0.0 && e_th_percentile <= 1.0, "e_th_percentile must lie in [0, 1]");
        topology::check_row_stochastic(mobility_params.transition);
    }
};

// ---------------------------------------------------------------------------
// key = value configuration

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used != v.size()) throw std::invalid_argument(v);
        return d;
    } catch (const std::exception&) {
        fail(ErrorKind::Config, "key '" + key + "' expects a number, got '" + v + "'");
    }
}

inline std::int64_t to_int(const std::string& key, const std::string& v) {
    const double d = to_double(key, v);
    if (d != std::floor(d)) fail(ErrorKind::Config, "key '" + key + "' expects an integer, got '" + v + "'");
    return static_cast<std::int64_t>(d);
}

inline bool to_bool(const std::string& key, const std::string& v) {
    if (v == "on" || v == "true" || v == "1") return true;
    if (v == "off" || v == "false" || v == "0") return false;
    fail(ErrorKind::Config, "key '" + key + "' expects on/off, got '" + v + "'");
}

inline std::vector<double> to_list(const std::string& key, const std::string& v) {
    std::vector<double> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(to_double(key, item));
    }
    return out;
}

inline std::string list_str(const std::vector<double>& v) {
    std::string s;
    for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + fmt_double(v[i]);
    return s;
}

struct Field {
    std::string key;
    std::function<std::string(const SimConfig&)> get;
    std::function<void(SimConfig&, const std::string&)> set;
};

inline Field num(std::string key, double SimConfig::*m) {
    return {key, [m](const SimConfig& c) { return fmt_double(c.*m); },
            [m, key](SimConfig& c, const std::string& v) { c.*m = to_double(key, v); }};
}
inline Field integer(std::string key, std::int64_t SimConfig::*m) {
    return {key, [m](const SimConfig& c) { return std::to_string(c.*m); },
            [m, key](SimConfig& c, const std::string& v) { c.*m = to_int(key, v); }};
}
inline Field flag(std::string key, bool SimConfig::*m) {
    return {key, [m](const SimConfig& c) { return std::string(c.*m ? "on" : "off"); },
            [m, key](SimConfig& c, const std::string& v) { c.*m = to_bool(key, v); }};
}
inline Field mob(std::string key, double topology::MobilityParams::*m) {
    return {key, [m](const SimConfig& c) { return fmt_double(c.mobility_params.*m); },
            [m, key](SimConfig& c, const std::string& v) { c.mobility_params.*m = to_double(key, v); }};
}

inline void apply_hmm_stay(SimConfig& c) {
    const double off = (1.0 - c.hmm_stay) / 2.0;
    for (int i = 0; i < 3; ++i)
        for (int j = 0; j < 3; ++j) c.mobility_params.transition[i][j] = i == j ? c.hmm_stay : off;
}

}  // namespace detail

/// Every configuration key in manifest order.
inline const std::vector<detail::Field>& config_fields() {
    using namespace detail;
    static const std::vector<Field> fields = [] {
        std::vector<Field> f{
            integer("N_cu", &SimConfig::n_cu),
            integer("N_mec", &SimConfig::n_mec),
            integer("M", &SimConfig::mecs),
            integer("K", &SimConfig::devices),
            integer("L", &SimConfig::frames),
            num("cell_radius", &SimConfig::cell_radius),
            num("nu", &SimConfig::pathloss_exponent),
            num("d0", &SimConfig::reference_distance),
            num("rician_k", &SimConfig::rician_k),
            flag("enforce_capacity", &SimConfig::enforce_capacity),
            flag("frozen_channels", &SimConfig::frozen_channels),
            num("lambda", &SimConfig::bandwidth),
            num("noise_psd_dbm", &SimConfig::noise_psd_dbm),
            num("circuit_power_dbm", &SimConfig::circuit_power_dbm),
            num("circuit_duration", &SimConfig::circuit_duration),
            num("vartheta", &SimConfig::vartheta),
            num("omega", &SimConfig::omega),
            num("varsigma", &SimConfig::varsigma),
            num("model_bits", &SimConfig::model_bits),
            num("r_dev", &SimConfig::rate_dev),
            num("r_mec", &SimConfig::rate_mec),
            num("B_max", &SimConfig::b_max),
            num("B_0", &SimConfig::b_0),
            {"alpha", [](const SimConfig& c) { return list_str(c.alpha); },
             [](SimConfig& c, const std::string& v) { c.alpha = to_list("alpha", v); }},
            {"xi_mode", [](const SimConfig& c) { return c.xi_mode; },
             [](SimConfig& c, const std::string& v) { c.xi_mode = v; }},
            {"policy", [](const SimConfig& c) { return to_string(c.policy); },
             [](SimConfig& c, const std::string& v) { c.policy = parse_policy(v); }},
            {"scheduling", [](const SimConfig& c) { return to_string(c.scheduling); },
             [](SimConfig& c, const std::string& v) { c.scheduling = parse_scheduling(v); }},
            num("theta_max", &SimConfig::theta_max),
            num("E_th", &SimConfig::e_th),
            num("E_th_percentile", &SimConfig::e_th_percentile),
            {"bfs_threads", [](const SimConfig& c) { return std::to_string(c.bfs_threads); },
             [](SimConfig& c, const std::string& v) {
                 c.bfs_threads = static_cast<unsigned>(std::max<std::int64_t>(1, to_int("bfs_threads", v)));
             }},
            {"mobility", [](const SimConfig& c) { return to_string(c.mobility); },
             [](SimConfig& c, const std::string& v) { c.mobility = parse_mobility(v); }},
            flag("dhda", &SimConfig::dhda),
            num("frame_duration", &SimConfig::frame_duration),
            num("micro_cell", &SimConfig::micro_cell),
            mob("step_length", &topology::MobilityParams::step_length),
            mob("steps_per_min_threshold", &topology::MobilityParams::steps_per_min_threshold),
            mob("v_normal", &topology::MobilityParams::v_normal),
            mob("v_risky", &topology::MobilityParams::v_risky),
            mob("gamma_shape", &topology::MobilityParams::gamma_shape),
            mob("kappa_normal", &topology::MobilityParams::kappa_normal),
            mob("kappa_risky", &topology::MobilityParams::kappa_risky),
            {"hmm_stay", [](const SimConfig& c) { return fmt_double(c.hmm_stay); },
             [](SimConfig& c, const std::string& v) {
                 c.hmm_stay = to_double("hmm_stay", v);
                 apply_hmm_stay(c);
             }},
            integer("C", &SimConfig::classes),
            integer("features", &SimConfig::features),
            integer("classes_per_device", &SimConfig::classes_per_device),
            integer("samples_min", &SimConfig::samples_min),
            integer("samples_max", &SimConfig::samples_max),
            num("class_separation", &SimConfig::class_separation),
            num("noise_std", &SimConfig::noise_std),
            integer("test_per_class", &SimConfig::test_per_class),
            num("lr", &SimConfig::lr),
            integer("batch", &SimConfig::batch),
            integer("epochs_local", &SimConfig::epochs_local),
            flag("train", &SimConfig::train),
            {"seed", [](const SimConfig& c) { return std::to_string(c.seed); },
             [](SimConfig& c, const std::string& v) {
                 try {
                     std::size_t used = 0;
                     c.seed = std::stoull(v, &used);
                     if (used != v.size()) throw std::invalid_argument(v);
                 } catch (const std::exception&) {
                     fail(ErrorKind::Config, "key 'seed' expects an unsigned integer, got '" + v + "'");
                 }
             }},
        };
        return f;
    }();
    return fields;
}

inline bool is_config_key(const std::string& key) {
    const auto& f = config_fields();
    return std::any_of(f.begin(), f.end(), [&](const auto& x) { return x.key == key; });
}

inline void set_key(SimConfig& cfg, const std::string& key, const std::string& value) {
    for (const auto& f : config_fields())
        if (f.key == key) {
            f.set(cfg, detail::trim(value));
            return;
        }
    fail(ErrorKind::Config, "unknown config key '" + key + "'");
}

/// Reads `key = value` lines; '#' starts a comment.
inline void load_config(SimConfig& cfg, std::istream& in) {
    std::string line;
    int n = 0;
    while (std::getline(in, line)) {
        ++n;
        if (const auto h = line.find('#'); h != std::string::npos) line.erase(h);
        line = detail::trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) fail(ErrorKind::Config, "line " + std::to_string(n) + ": expected key = value");
        set_key(cfg, detail::trim(line.substr(0, eq)), line.substr(eq + 1));
    }
}

inline SimConfig load_config_file(const std::filesystem::path& path, SimConfig base = {}) {
    std::ifstream in(path);
    if (!in) fail(ErrorKind::Config, "cannot open config file " + path.string());
    load_config(base, in);
    return base;
}

inline void write_config(std::ostream& os, const SimConfig& cfg) {
    for (const auto& f : config_fields()) os << f.key << " = " << f.get(cfg) << '\n';
}

// ---------------------------------------------------------------------------
// Single experiment

struct RoundMetrics {
    std::int64_t round = 0;
    double theta = 0.0;
    double accuracy = std::numeric_limits<double>::quiet_NaN();
    double loss = std::numeric_limits<double>::quiet_NaN();
    std::size_t active = 0;
};

struct FrameAssociation {
    std::int64_t frame = 0;
    assoc::Association association;
    std::vector<bool> active;
    double theta = 0.0;
};

struct ExperimentResult {
    SimConfig config;
    energy::EnergyLedger ledger;
    std::vector<RoundMetrics> metrics;
    std::vector<FrameAssociation> history;
    std::vector<topology::TraceRow> trace;
    assoc::Association initial;
    double wall_seconds = 0.0;

    [[nodiscard]] double delta() const { return ledger.delta(); }
    [[nodiscard]] double final_accuracy() const {
        return metrics.empty() ? std::numeric_limits<double>::quiet_NaN() : metrics.back().accuracy;
    }
    [[nodiscard]] double final_theta() const {
        return metrics.empty() ? 0.0 : metrics.back().theta;
    }
};

/// Static part of a run that depends only on the seed and sizes.
struct Scenario {
    std::vector<topology::Position> mec_pos;
    std::vector<topology::Position> dev_pos;
    DataSplit split;
    fl::SyntheticData data;
};

inline Scenario build_scenario(const SimConfig& cfg) {
    Scenario s;
    auto mec_rng = make_stream(cfg.seed, kTagPlacement, 0);
    auto dev_rng = make_stream(cfg.seed, kTagPlacement, 1);
    s.mec_pos = topology::place_uniform(static_cast<std::size_t>(cfg.mecs), cfg.cell_radius, mec_rng);
    s.dev_pos = topology::place_uniform(static_cast<std::size_t>(cfg.devices), cfg.cell_radius, dev_rng);
    auto split_rng = make_stream(cfg.seed, kTagData, 0);
    s.split = make_skewed_split(static_cast<std::size_t>(cfg.classes), static_cast<std::size_t>(cfg.devices),
                                static_cast<std::size_t>(cfg.classes_per_device), cfg.samples_min,
                                cfg.samples_max, split_rng);
    if (cfg.train) {
        auto mean_rng = make_stream(cfg.seed, kTagData, 1);
        const auto means = fl::make_class_means(static_cast<std::size_t>(cfg.classes),
                                                static_cast<std::size_t>(cfg.features), cfg.class_separation,
                                                mean_rng);
        auto data_rng = make_stream(cfg.seed, kTagData, 2);
        s.data = fl::synth_datasets(s.split, means, cfg.noise_std, cfg.test_per_class, data_rng);
    }
    return s;
}

inline assoc::GainMatrix gain_matrix(const std::vector<topology::Position>& mecs,
                                     const std::vector<topology::Position>& devs, const SimConfig& cfg) {
    assoc::GainMatrix g(static_cast<Eigen::Index>(mecs.size()), static_cast<Eigen::Index>(devs.size()));
    for (std::size_t m = 0; m < mecs.size(); ++m)
        for (std::size_t k = 0; k < devs.size(); ++k)
            g(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = topology::pathloss_gain(
                topology::distance(mecs[m], devs[k]), cfg.pathloss_exponent, cfg.reference_distance);
    return g;
}

/// Small-scale fading and backhaul detector gains of frame `frame`; a pure
/// function of the seed and frame so every policy sees the same draws.
inline assoc::FrameChannels sample_frame_channels(const SimConfig& cfg, std::int64_t frame,
                                                  assoc::GainMatrix gains) {
    assoc::FrameChannels ch;
    ch.gains = std::move(gains);
    const auto m_count = static_cast<std::size_t>(cfg.mecs);
    for (std::size_t m = 0; m < m_count; ++m) {
        auto rng = make_stream(cfg.seed, kTagAccess, static_cast<std::uint64_t>(frame), m);
        ch.fading.push_back(channel::sample_cn(cfg.n_mec, cfg.devices, rng));
    }
    std::vector<channel::BackhaulChannel> bh;
    for (std::size_t m = 0; m < m_count; ++m) {
        auto rng = make_stream(cfg.seed, kTagBackhaul, static_cast<std::uint64_t>(frame), m);
        bh.push_back(channel::sample_rician(cfg.n_mec, cfg.n_cu, cfg.rician_k, rng));
    }
    ch.bd_gain = channel::bd_gains(bh);
    return ch;
}

inline assoc::Association choose_association(const SimConfig& cfg, const Scenario& sc,
                                             const assoc::GainMatrix& gains) {
    switch (cfg.policy) {
        case Policy::H2rma:
            return assoc::h2rma_associate(sc.split, gains, cfg.theta_max, cfg.capacity()).association;
        case Policy::Random: {
            auto rng = make_stream(cfg.seed, kTagPolicy);
            return assoc::random_associate(static_cast<std::size_t>(cfg.mecs),
                                           static_cast<std::size_t>(cfg.devices), rng, cfg.capacity());
        }
        case Policy::Bfs: {
            const auto frozen = sample_frame_channels(cfg, 1, gains);
            const auto ctx = cfg.energy_context();
            const std::vector<double> b0(static_cast<std::size_t>(cfg.devices), cfg.b_0);
            auto cost = [&](const assoc::Association& a) {
                return assoc::frozen_cost(a, frozen, cfg.frames, b0, ctx);
            };
            return assoc::bfs_optimal(sc.split, static_cast<std::size_t>(cfg.mecs), cfg.theta_max, cost,
                                      cfg.capacity(), cfg.bfs_threads)
                .association;
        }
    }
    return {};
}

/// One full run: per frame, mobility, DHDA, channels, scheduling, energy
/// settlement, local training and two-tier aggregation.
inline ExperimentResult run_experiment(const SimConfig& cfg) {
    cfg.validate();
    const auto t0 = std::chrono::steady_clock::now();
    ExperimentResult res;
    res.config = cfg;
    const auto K = static_cast<std::size_t>(cfg.devices);
    const auto M = static_cast<std::size_t>(cfg.mecs);

    const Scenario sc = build_scenario(cfg);
    assoc::GainMatrix gains = gain_matrix(sc.mec_pos, sc.dev_pos, cfg);
    assoc::Association chi = choose_association(cfg, sc, gains);
    chi.check();
    res.initial = chi;

    const auto ctx = cfg.energy_context();
    std::vector<double> batteries(K, cfg.b_0);

    // mobility
    std::vector<topology::Walker> walkers(K);
    std::vector<Rng> walk_rng;
    const topology::MicroCellGrid grid{cfg.micro_cell, {-cfg.cell_radius, -cfg.cell_radius}};
    std::vector<topology::CellIndex> anchors(K), cells(K);
    const std::int64_t psi_nml = topology::frames_per_cell(cfg.micro_cell, cfg.frame_duration,
                                                           cfg.mobility_params.v_normal);
    const std::int64_t psi_rsk = topology::frames_per_cell(cfg.micro_cell, cfg.frame_duration,
                                                           cfg.mobility_params.v_risky);
    if (cfg.mobility == Mobility::Hmm) {
        for (std::size_t k = 0; k < K; ++k) {
            walk_rng.push_back(make_stream(cfg.seed, kTagMobility, k));
            std::uniform_int_distribution<int> st(0, 2);
            std::uniform_real_distribution<double> ang(-std::numbers::pi, std::numbers::pi);
            walkers[k].pos = sc.dev_pos[k];
            walkers[k].st.state = static_cast<topology::Motion>(st(walk_rng[k]));
            walkers[k].st.heading = ang(walk_rng[k]);
            walkers[k].st.speed = topology::sample_speed(walkers[k].st.state, cfg.mobility_params, walk_rng[k]);
            anchors[k] = topology::micro_cell_of(walkers[k].pos, grid);
        }
    }

    // learning
    fl::ModelWeights global = fl::ModelWeights::zeros(static_cast<std::size_t>(cfg.classes),
                                                      static_cast<std::size_t>(cfg.features));
    std::vector<double> sizes(K);
    for (std::size_t k = 0; k < K; ++k) sizes[k] = static_cast<double>(sc.split.device_size(k));

    std::optional<assoc::FrameChannels> frozen;
    for (std::int64_t l = 1; l <= cfg.frames; ++l) {
        if (cfg.mobility == Mobility::Hmm) {
            std::vector<topology::Position> pos(K);
            for (std::size_t k = 0; k < K; ++k) {
                walkers[k].advance(cfg.mobility_params, cfg.frame_duration, cfg.cell_radius, walk_rng[k]);
                pos[k] = walkers[k].pos;
                cells[k] = topology::micro_cell_of(pos[k], grid);
                res.trace.push_back({l, k, pos[k], walkers[k].st.state, walkers[k].st.speed});
            }
            gains = gain_matrix(sc.mec_pos, pos, cfg);
            if (cfg.dhda)
                chi = assoc::dhda_update(chi, anchors, cells, l, psi_nml, psi_rsk, sc.split, gains, cfg.theta_max,
                                         cfg.capacity());
        }

        assoc::FrameChannels fresh;
        const assoc::FrameChannels* ch = nullptr;
        if (cfg.frozen_channels) {
            if (!frozen) frozen = sample_frame_channels(cfg, 1, gains);
            frozen->gains = gains;
            ch = &*frozen;
        } else {
            fresh = sample_frame_channels(cfg, l, gains);
            ch = &fresh;
        }

        std::vector<bool> active(K, true);
        if (cfg.scheduling != Scheduling::Off) {
            const auto e_ac = assoc::access_energies(chi, active, *ch, ctx);
            const double e_th = cfg.e_th >= 0.0 ? cfg.e_th : assoc::percentile(e_ac, cfg.e_th_percentile);
            if (cfg.scheduling == Scheduling::Heuristic) {
                active = assoc::schedule_devices(e_ac, e_th, sc.split, chi, cfg.theta_max).active;
            } else {
                auto rng = make_stream(cfg.seed, kTagSchedule, static_cast<std::uint64_t>(l));
                active = assoc::schedule_random(e_ac, e_th, K, rng).active;
            }
        }

        assoc::settle_frame(l, chi, active, *ch, ctx, batteries, &res.ledger);

        RoundMetrics rm;
        rm.round = l;
        rm.active = static_cast<std::size_t>(std::count(active.begin(), active.end(), true));
        rm.theta = assoc::divergence_active(sc.split, chi, active);
        if (cfg.train) {
            const double lr = cfg.lr / std::sqrt(static_cast<double>(l));
            const fl::SgdOptions opt{static_cast<int>(cfg.epochs_local), lr, static_cast<std::size_t>(cfg.batch)};
            std::vector<fl::ModelWeights> mec_models;
            std::vector<double> mec_sizes;
            for (std::size_t m = 0; m < M; ++m) {
                std::vector<fl::ModelWeights> local;
                std::vector<double> local_sizes;
                for (std::size_t k = 0; k < K; ++k) {
                    if (!active[k] || chi.mec_of[k] != m) continue;
                    auto rng = make_stream(cfg.seed, kTagTrain, static_cast<std::uint64_t>(l), k);
                    local.push_back(fl::local_train(global, sc.data.devices[k], opt, rng));
                    local_sizes.push_back(sizes[k]);
                }
                if (local.empty()) continue;
                mec_models.push_back(fl::mec_aggregate(local, local_sizes));
                mec_sizes.push_back(std::accumulate(local_sizes.begin(), local_sizes.end(), 0.0));
            }
            global = fl::cu_aggregate(mec_models, mec_sizes);
            const auto ev = fl::evaluate(global, sc.data.test);
            rm.accuracy = ev.accuracy;
            rm.loss = ev.loss;
        }
        res.metrics.push_back(rm);
        res.history.push_back({l, chi, active, rm.theta});
    }
    res.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return res;
}

// ---------------------------------------------------------------------------
// Exports

inline void write_metrics_csv(std::ostream& os, const std::vector<RoundMetrics>& rows, const std::string& policy) {
    os << "round,policy,theta,test_accuracy,test_loss\n";
    for (const auto& r : rows)
        os << r.round << ',' << policy << ',' << fmt_double(r.theta) << ',' << fmt_double(r.accuracy) << ','
           << fmt_double(r.loss) << '\n';
}

inline void write_history_csv(std::ostream& os, const std::vector<FrameAssociation>& hist) {
    assoc::write_association_header(os);
    for (const auto& h : hist) assoc::write_association_rows(os, h.frame, h.association, h.active, h.theta);
}

struct RunRow {
    std::string policy;
    std::string param;
    std::string value;
    std::uint64_t seed = 0;
    double delta = 0.0;
    double accuracy = 0.0;
    double theta_final = 0.0;
};

inline void write_run_rows(std::ostream& os, const std::vector<RunRow>& rows) {
    os << "policy,param,value,seed,delta,accuracy,theta_final\n";
    for (const auto& r : rows)
        os << r.policy << ',' << r.param << ',' << r.value << ',' << r.seed << ',' << fmt_double(r.delta) << ','
           << fmt_double(r.accuracy) << ',' << fmt_double(r.theta_final) << '\n';
}

inline void write_manifest(std::ostream& os, const SimConfig& cfg, const std::string& verb) {
    os << "# hetfl " << kVersion << '\n' << "# verb: " << verb << '\n';
    write_config(os, cfg);
}

/// Writes every per-run artefact into `dir`.
inline void export_run(const std::filesystem::path& dir, const ExperimentResult& r, const std::string& verb) {
    std::filesystem::create_directories(dir);
    auto open = [&](const char* name) {
        std::ofstream f(dir / name);
        if (!f) fail(ErrorKind::Config, std::string("cannot write ") + (dir / name).string());
        return f;
    };
    {
        auto f = open("ledger_mec.csv");
        energy::write_mec_csv(f, r.ledger);
    }
    {
        auto f = open("ledger_devices.csv");
        energy::write_device_csv(f, r.ledger);
    }
    {
        auto f = open("association.csv");
        write_history_csv(f, r.history);
    }
    {
        auto f = open("metrics.csv");
        write_metrics_csv(f, r.metrics, to_string(r.config.policy));
    }
    if (r.config.mobility == Mobility::Hmm) {
        auto f = open("trace.csv");
        topology::write_trace_csv(f, r.trace);
    }
    {
        auto f = open("summary.csv");
        write_run_rows(f, {{to_string(r.config.policy), "", "", r.config.seed, r.delta(), r.final_accuracy(),
                            r.final_theta()}});
    }
    {
        auto f = open("manifest.cfg");
        write_manifest(f, r.config, verb);
    }
}

// ---------------------------------------------------------------------------
// Comparisons and sweeps

/// Seed of the i-th replicate, shared by every policy so they see the same
/// placement, data and channels.
inline std::uint64_t replicate_seed(std::uint64_t base, std::size_t i) { return derive_seed(base, i); }

/// Runs jobs on up to hardware_concurrency threads; results land by index.
template <typename Job>
void parallel_for(std::size_t n, Job&& job) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const std::size_t workers = std::min<std::size_t>(hw, n);
    if (workers <= 1) {
        for (std::size_t i = 0; i < n; ++i) job(i);
        return;
    }
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(workers);
    {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < workers; ++w)
            pool.emplace_back([&, w] {
                try {
                    for (std::size_t i = next++; i < n; i = next++) job(i);
                } catch (...) {
                    errors[w] = std::current_exception();
                }
            });
    }
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

struct PolicySummary {
    std::string policy;
    double mean_delta = 0.0;
    double std_delta = 0.0;
    double mean_accuracy = 0.0;
    double std_accuracy = 0.0;
};

struct Comparison {
    std::vector<RunRow> runs;  // policy-major, then replicate
    std::vector<PolicySummary> summary;
};

inline std::pair<double, double> mean_std(const std::vector<double>& v) {
    if (v.empty()) return {0.0, 0.0};
    const double mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

inline Comparison compare_policies(const SimConfig& cfg, const std::vector<Policy>& policies, std::size_t n_seeds,
                                   const std::string& param = "", const std::string& value = "") {
    if (n_seeds < 1) fail(ErrorKind::Config, "need at least one seed");
    Comparison out;
    out.runs.resize(policies.size() * n_seeds);
    parallel_for(out.runs.size(), [&](std::size_t idx) {
        SimConfig c = cfg;
        c.policy = policies[idx / n_seeds];
        c.seed = replicate_seed(cfg.seed, idx % n_seeds);
        const auto r = run_experiment(c);
        out.runs[idx] = {to_string(c.policy), param, value, c.seed, r.delta(), r.final_accuracy(), r.final_theta()};
    });
    for (std::size_t p = 0; p < policies.size(); ++p) {
        std::vector<double> d, a;
        for (std::size_t i = 0; i < n_seeds; ++i) {
            d.push_back(out.runs[p * n_seeds + i].delta);
            a.push_back(out.runs[p * n_seeds + i].accuracy);
        }
        const auto [md, sd] = mean_std(d);
        const auto [ma, sa] = mean_std(a);
        out.summary.push_back({to_string(policies[p]), md, sd, ma, sa});
    }
    return out;
}

inline void write_policy_summary(std::ostream& os, const std::vector<PolicySummary>& rows) {
    os << "policy,mean_delta,std_delta,mean_acc,std_acc\n";
    for (const auto& r : rows)
        os << r.policy << ',' << fmt_double(r.mean_delta) << ',' << fmt_double(r.std_delta) << ','
           << fmt_double(r.mean_accuracy) << ',' << fmt_double(r.std_accuracy) << '\n';
}

struct SweepRow {
    std::string param;
    std::string value;
    std::string policy;
    double mean_delta = 0.0;
    double std_delta = 0.0;
    double mean_accuracy = 0.0;
};

struct SweepResult {
    std::vector<SweepRow> rows;
    std::vector<RunRow> runs;
};

inline void set_sweep_param(SimConfig& c, const std::string& param, double v) {
    if (param == "K") c.devices = static_cast<std::int64_t>(std::llround(v));
    else if (param == "M") c.mecs = static_cast<std::int64_t>(std::llround(v));
    else if (param == "E_th") c.e_th = v;
    else if (param == "B_0") c.b_0 = v;
    else fail(ErrorKind::Config, "sweep parameter must be one of K, M, E_th, B_0");
}

inline SweepResult sweep(const SimConfig& cfg, const std::string& param, const std::vector<double>& values,
                         const std::vector<Policy>& policies, std::size_t n_seeds) {
    SweepResult out;
    SimConfig probe = cfg;
    set_sweep_param(probe, param, 0.0);  // rejects unknown names up front
    for (double v : values) {
        SimConfig c = cfg;
        set_sweep_param(c, param, v);
        const std::string label = fmt_double(v);
        auto cmp = compare_policies(c, policies, n_seeds, param, label);
        for (const auto& s : cmp.summary)
            out.rows.push_back({param, label, s.policy, s.mean_delta, s.std_delta, s.mean_accuracy});
        out.runs.insert(out.runs.end(), cmp.runs.begin(), cmp.runs.end());
    }
    return out;
}

inline void write_sweep_rows(std::ostream& os, const std::vector<SweepRow>& rows) {
    os << "param,value,policy,mean_delta,std_delta,mean_acc\n";
    for (const auto& r : rows)
        os << r.param << ',' << r.value << ',' << r.policy << ',' << fmt_double(r.mean_delta) << ','
           << fmt_double(r.std_delta) << ',' << fmt_double(r.mean_accuracy) << '\n';
}

}  // namespace hetfl::sim
