#pragma once

// Device association and scheduling: the class-divergence metric, the
// exhaustive (BFS) optimum, the H2RMA heuristic, random baselines, the
// energy-driven scheduler and dynamic re-association (DHDA) for mobile
// devices. Also the fixed-association frame loop that turns channels into
// an energy ledger with the closed-form optimal WET.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <thread>
#include <vector>

#include <Eigen/Core>

#include "hetfl/channel.hpp"
#include "hetfl/common.hpp"
#include "hetfl/data_split.hpp"
#include "hetfl/energy.hpp"
#include "hetfl/topology.hpp"

namespace hetfl::assoc {

using GainMatrix = Eigen::MatrixXd;  // M x K pathloss gains

inline constexpr std::size_t kUnlimited = std::numeric_limits<std::size_t>::max();

/// Each device belongs to exactly one MEC; stored as the MEC index per device.
struct Association {
    std::size_t mecs = 0;
    std::vector<std::size_t> mec_of;

    [[nodiscard]] std::size_t devices() const { return mec_of.size(); }

    [[nodiscard]] Eigen::MatrixXi chi() const {
        Eigen::MatrixXi x = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(mecs),
                                                  static_cast<Eigen::Index>(devices()));
        for (std::size_t k = 0; k < devices(); ++k)
            x(static_cast<Eigen::Index>(mec_of[k]), static_cast<Eigen::Index>(k)) = 1;
        return x;
    }

    static Association from_chi(const Eigen::MatrixXi& x) {
        Association a{static_cast<std::size_t>(x.rows()), {}};
        for (Eigen::Index k = 0; k < x.cols(); ++k) {
            if ((x.col(k).array() != 0 && x.col(k).array() != 1).any())
                fail(ErrorKind::Config, "association entries must be binary");
            if (x.col(k).sum() != 1) fail(ErrorKind::Config, "device must join exactly one MEC");
            Eigen::Index m = 0;
            x.col(k).maxCoeff(&m);
            a.mec_of.push_back(static_cast<std::size_t>(m));
        }
        return a;
    }

    void check() const {
        for (std::size_t m : mec_of)
            if (m >= mecs) fail(ErrorKind::Numeric, "association points at a non-existent MEC");
    }

    [[nodiscard]] std::vector<std::vector<std::size_t>> members() const {
        std::vector<std::vector<std::size_t>> out(mecs);
        for (std::size_t k = 0; k < devices(); ++k) out[mec_of[k]].push_back(k);
        return out;
    }

    [[nodiscard]] std::vector<std::size_t> loads() const {
        std::vector<std::size_t> out(mecs, 0);
        for (std::size_t m : mec_of) ++out[m];
        return out;
    }

    friend bool operator==(const Association&, const Association&) = default;
};

// ---------------------------------------------------------------------------
// Divergence

/// Per-MEC class counts of an included subset of devices. The divergence is
/// sum_m (n_m / n) * sum_c |p(c) - p_m(c)|, where p is either the class
/// distribution of the included devices or a fixed reference distribution.
class DivergenceTracker {
public:
    DivergenceTracker(const DataSplit& split, std::size_t mecs,
                      std::optional<std::vector<double>> reference = std::nullopt)
        : split_(&split),
          mecs_(mecs),
          per_mec_(mecs * split.classes(), 0),
          mec_total_(mecs, 0),
          global_(split.classes(), 0),
          reference_(reference ? std::move(*reference) : std::vector<double>{}) {}

    void add(std::size_t k, std::size_t m) { apply(k, m, +1); }
    void remove(std::size_t k, std::size_t m) { apply(k, m, -1); }

    [[nodiscard]] double theta() const {
        if (total_ == 0) return 0.0;
        const std::size_t nc = split_->classes();
        const double n = static_cast<double>(total_);
        double out = 0.0;
        for (std::size_t m = 0; m < mecs_; ++m) {
            if (mec_total_[m] == 0) continue;
            const double nm = static_cast<double>(mec_total_[m]);
            double gap = 0.0;
            for (std::size_t c = 0; c < nc; ++c) {
                const double p = !reference_.empty() ? reference_[c] : static_cast<double>(global_[c]) / n;
                gap += std::abs(p - static_cast<double>(per_mec_[m * nc + c]) / nm);
            }
            out += nm / n * gap;
        }
        return out;
    }

    /// Divergence if device k provisionally joined MEC m.
    [[nodiscard]] double theta_with(std::size_t k, std::size_t m) {
        add(k, m);
        const double t = theta();
        remove(k, m);
        return t;
    }

private:
    void apply(std::size_t k, std::size_t m, std::int64_t sign) {
        const std::size_t nc = split_->classes();
        for (std::size_t c = 0; c < nc; ++c) {
            const std::int64_t v = sign * split_->count(c, k);
            per_mec_[m * nc + c] += v;
            global_[c] += v;
            mec_total_[m] += v;
            total_ += v;
        }
    }

    const DataSplit* split_;
    std::size_t mecs_;
    std::vector<std::int64_t> per_mec_;
    std::vector<std::int64_t> mec_total_;
    std::vector<std::int64_t> global_;
    std::int64_t total_ = 0;
    std::vector<double> reference_;  // empty: use the included devices
};

/// Divergence of an association over all devices.
inline double divergence(const DataSplit& split, const Association& a) {
    DivergenceTracker t(split, a.mecs);
    for (std::size_t k = 0; k < a.devices(); ++k) t.add(k, a.mec_of[k]);
    return t.theta();
}

/// Divergence of the active subset, measured against the distribution of the
/// full population so that dropping a class entirely is penalised.
inline double divergence_active(const DataSplit& split, const Association& a,
                                const std::vector<bool>& active) {
    DivergenceTracker t(split, a.mecs, split.global_distribution());
    for (std::size_t k = 0; k < a.devices(); ++k)
        if (active[k]) t.add(k, a.mec_of[k]);
    return t.theta();
}

// ---------------------------------------------------------------------------
// Ranges and the per-device association rule shared by H2RMA and DHDA

inline constexpr double kEmptyRange = std::numeric_limits<double>::infinity();

/// Range of each MEC: the smallest gain among its devices (its farthest one).
inline std::vector<double> ranges_of(const Association& a, const GainMatrix& gains,
                                     std::optional<std::size_t> skip = std::nullopt) {
    std::vector<double> r(a.mecs, kEmptyRange);
    for (std::size_t k = 0; k < a.devices(); ++k) {
        if (skip && *skip == k) continue;
        const std::size_t m = a.mec_of[k];
        r[m] = std::min(r[m], gains(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)));
    }
    return r;
}

/// Picks the in-range MEC of least divergence (not above theta_max); failing
/// that, the MEC with the largest gain, whose range is then widened.
inline std::size_t choose_mec(std::size_t k, const GainMatrix& gains, std::vector<double>& ranges,
                              DivergenceTracker& tracker, const std::vector<std::size_t>& loads,
                              std::size_t capacity, double theta_max) {
    const auto kk = static_cast<Eigen::Index>(k);
    const std::size_t mecs = ranges.size();
    std::optional<std::size_t> pick;
    double theta_min = theta_max;
    for (std::size_t m = 0; m < mecs; ++m) {
        if (loads[m] >= capacity) continue;
        if (!(gains(static_cast<Eigen::Index>(m), kk) >= ranges[m])) continue;
        const double t = tracker.theta_with(k, m);
        if (t <= theta_min && (!pick || t < theta_min)) {
            pick = m;
            theta_min = t;
        }
    }
    if (!pick) {
        double best = -1.0;
        for (std::size_t m = 0; m < mecs; ++m) {
            if (loads[m] >= capacity) continue;
            const double g = gains(static_cast<Eigen::Index>(m), kk);
            if (g > best) {
                best = g;
                pick = m;
            }
        }
        if (!pick) fail(ErrorKind::Infeasible, "every MEC is at antenna capacity");
        ranges[*pick] = std::min(ranges[*pick], best);
    }
    return *pick;
}

struct H2rmaAssociation {
    Association association;
    std::vector<double> ranges;
};

/// Device-by-device association of the H2RMA heuristic. Divergence is
/// evaluated over the devices associated so far plus the candidate.
inline H2rmaAssociation h2rma_associate(const DataSplit& split, const GainMatrix& gains,
                                        double theta_max, std::size_t capacity = kUnlimited) {
    const auto mecs = static_cast<std::size_t>(gains.rows());
    const auto devices = static_cast<std::size_t>(gains.cols());
    if (split.devices() != devices) fail(ErrorKind::Config, "gain matrix and data split disagree on K");
    if (mecs == 0) fail(ErrorKind::Config, "need at least one MEC");
    H2rmaAssociation out{{mecs, std::vector<std::size_t>(devices, 0)}, std::vector<double>(mecs, kEmptyRange)};
    DivergenceTracker tracker(split, mecs);
    std::vector<std::size_t> loads(mecs, 0);
    for (std::size_t k = 0; k < devices; ++k) {
        const std::size_t m = choose_mec(k, gains, out.ranges, tracker, loads, capacity, theta_max);
        out.association.mec_of[k] = m;
        tracker.add(k, m);
        ++loads[m];
    }
    return out;
}

/// Uniform MEC per device among those below capacity.
inline Association random_associate(std::size_t mecs, std::size_t devices, Rng& rng,
                                    std::size_t capacity = kUnlimited) {
    if (mecs == 0 || devices == 0) fail(ErrorKind::Config, "random association needs M, K >= 1");
    Association a{mecs, std::vector<std::size_t>(devices, 0)};
    std::vector<std::size_t> loads(mecs, 0);
    std::vector<std::size_t> open;
    for (std::size_t k = 0; k < devices; ++k) {
        open.clear();
        for (std::size_t m = 0; m < mecs; ++m)
            if (loads[m] < capacity) open.push_back(m);
        if (open.empty()) fail(ErrorKind::Infeasible, "every MEC is at antenna capacity");
        std::uniform_int_distribution<std::size_t> pick(0, open.size() - 1);
        const std::size_t m = open[pick(rng)];
        a.mec_of[k] = m;
        ++loads[m];
    }
    return a;
}

// ---------------------------------------------------------------------------
// Exhaustive search

struct BfsResult {
    Association association;
    double cost = 0.0;
    std::uint64_t feasible = 0;
};

inline constexpr double kBfsBudget = 1e7;

/// Enumerates all M^K assignments (device 0 is the most significant digit),
/// keeps those with divergence <= theta_max and loads <= capacity, and
/// returns the cheapest under `cost`. Ties go to the lexicographically
/// smallest assignment whatever the thread partition.
template <typename CostFn>
BfsResult bfs_optimal(const DataSplit& split, std::size_t mecs, double theta_max, CostFn&& cost,
                      std::size_t capacity = kUnlimited, unsigned threads = 1) {
    const std::size_t devices = split.devices();
    if (mecs == 0) fail(ErrorKind::Config, "need at least one MEC");
    if (std::pow(static_cast<double>(mecs), static_cast<double>(devices)) > kBfsBudget)
        fail(ErrorKind::Infeasible, "instance too large for BFS");
    std::uint64_t space = 1;
    for (std::size_t k = 0; k < devices; ++k) space *= mecs;

    struct Best {
        std::uint64_t code = std::numeric_limits<std::uint64_t>::max();
        double cost = std::numeric_limits<double>::infinity();
        std::uint64_t feasible = 0;
    };
    auto decode = [&](std::uint64_t code) {
        Association a{mecs, std::vector<std::size_t>(devices, 0)};
        for (std::size_t k = devices; k-- > 0;) {
            a.mec_of[k] = static_cast<std::size_t>(code % mecs);
            code /= mecs;
        }
        return a;
    };
    auto scan = [&](std::uint64_t lo, std::uint64_t hi) {
        Best b;
        for (std::uint64_t code = lo; code < hi; ++code) {
            const Association a = decode(code);
            if (capacity != kUnlimited) {
                const auto loads = a.loads();
                if (std::any_of(loads.begin(), loads.end(), [&](std::size_t l) { return l > capacity; }))
                    continue;
            }
            if (divergence(split, a) > theta_max) continue;
            ++b.feasible;
            const double c = cost(a);
            if (c < b.cost) {
                b.cost = c;
                b.code = code;
            }
        }
        return b;
    };

    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::min<std::uint64_t>(space, 64))));
    std::vector<Best> parts(threads);
    if (threads == 1) {
        parts[0] = scan(0, space);
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) {
            const std::uint64_t lo = space * t / threads;
            const std::uint64_t hi = space * (t + 1) / threads;
            pool.emplace_back([&, t, lo, hi] { parts[t] = scan(lo, hi); });
        }
    }
    Best best;
    for (const auto& p : parts) {
        best.feasible += p.feasible;
        if (p.cost < best.cost || (p.cost == best.cost && p.code < best.code)) {
            best.cost = p.cost;
            best.code = p.code;
        }
    }
    if (best.feasible == 0) fail(ErrorKind::Infeasible, "infeasible: theta_max too tight");
    return {decode(best.code), best.cost, best.feasible};
}

// ---------------------------------------------------------------------------
// Scheduling

struct Schedule {
    std::vector<bool> active;
    std::vector<std::size_t> candidates;  // the over-threshold set, highest energy first
};

/// Nearest-rank percentile, q in [0, 1].
inline double percentile(std::vector<double> v, double q) {
    if (v.empty()) return 0.0;
    std::sort(v.begin(), v.end());
    const auto rank = static_cast<std::size_t>(std::ceil(q * static_cast<double>(v.size())));
    return v[std::clamp<std::size_t>(rank, 1, v.size()) - 1];
}

/// Devices whose access energy exceeds e_th, highest first (ties by index).
inline std::vector<std::size_t> over_threshold(std::span<const double> e_ac, double e_th) {
    std::vector<std::size_t> omega;
    for (std::size_t k = 0; k < e_ac.size(); ++k)
        if (e_ac[k] > e_th) omega.push_back(k);
    std::stable_sort(omega.begin(), omega.end(),
                     [&](std::size_t a, std::size_t b) { return e_ac[a] > e_ac[b]; });
    return omega;
}

/// Starting from all active, switches off over-threshold devices one at a
/// time, keeping each switch-off only if the active divergence stays within
/// theta_max. At least one device always stays on.
inline Schedule schedule_devices(std::span<const double> e_ac, double e_th, const DataSplit& split,
                                 const Association& a, double theta_max) {
    Schedule s{std::vector<bool>(a.devices(), true), over_threshold(e_ac, e_th)};
    DivergenceTracker t(split, a.mecs, split.global_distribution());
    for (std::size_t k = 0; k < a.devices(); ++k) t.add(k, a.mec_of[k]);
    std::size_t on = a.devices();
    for (std::size_t k : s.candidates) {
        if (on <= 1) break;
        t.remove(k, a.mec_of[k]);
        if (t.theta() <= theta_max) {
            s.active[k] = false;
            --on;
        } else {
            t.add(k, a.mec_of[k]);
        }
    }
    return s;
}

/// Baseline: switches off as many uniformly chosen devices as the heuristic
/// had candidates, with no divergence check.
inline Schedule schedule_random(std::span<const double> e_ac, double e_th, std::size_t devices, Rng& rng) {
    Schedule s{std::vector<bool>(devices, true), over_threshold(e_ac, e_th)};
    const std::size_t n_off = std::min(s.candidates.size(), devices > 0 ? devices - 1 : 0);
    std::vector<std::size_t> idx(devices);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    for (std::size_t i = 0; i < n_off; ++i) {
        std::uniform_int_distribution<std::size_t> pick(i, devices - 1);
        std::swap(idx[i], idx[pick(rng)]);
        s.active[idx[i]] = false;
    }
    return s;
}

// ---------------------------------------------------------------------------
// Dynamic re-association

/// At check frames (l divisible by psi_rsk or psi_nml) every device whose
/// micro-cell differs from the one recorded at its last association is
/// re-associated by the H2RMA rule against the current gains; ranges are
/// recomputed from the current gains of the other devices. `anchors` is
/// updated for re-associated devices.
inline Association dhda_update(const Association& chi, std::vector<topology::CellIndex>& anchors,
                               std::span<const topology::CellIndex> cells, std::int64_t frame,
                               std::int64_t psi_nml, std::int64_t psi_rsk, const DataSplit& split,
                               const GainMatrix& gains, double theta_max,
                               std::size_t capacity = kUnlimited) {
    if (frame < 1) fail(ErrorKind::Config, "DHDA frames are 1-based");
    auto divides = [frame](std::int64_t psi) {
        return psi != topology::kNeverChangesCell && psi > 0 && frame % psi == 0;
    };
    if (!divides(psi_rsk) && !divides(psi_nml)) return chi;

    Association out = chi;
    DivergenceTracker tracker(split, out.mecs);
    for (std::size_t k = 0; k < out.devices(); ++k) tracker.add(k, out.mec_of[k]);
    auto loads = out.loads();
    for (std::size_t k = 0; k < out.devices(); ++k) {
        if (cells[k] == anchors[k]) continue;
        tracker.remove(k, out.mec_of[k]);
        --loads[out.mec_of[k]];
        auto ranges = ranges_of(out, gains, k);
        const std::size_t m = choose_mec(k, gains, ranges, tracker, loads, capacity, theta_max);
        out.mec_of[k] = m;
        tracker.add(k, m);
        ++loads[m];
        anchors[k] = cells[k];
    }
    return out;
}

// ---------------------------------------------------------------------------
// Frame energy loop over an association

/// Channel state of one frame: per-MEC small-scale fading over every device,
/// per-MEC backhaul detector gains and the pathloss gains.
struct FrameChannels {
    std::vector<channel::CMatrix> fading;  // per MEC, N_mec x K, unit variance
    std::vector<double> bd_gain;           // per MEC
    GainMatrix gains;                      // M x K
};

struct EnergyContext {
    energy::DeviceEnergyParams device;
    double n_mec = 16.0;
    double bandwidth = 20e6;
    double sigma2 = 7.96e-14;
    double mec_rate = 20e6;
    double b_max = 1000.0;
    double mec_circuit = 0.01;
    std::vector<double> alpha_by_frame;  // empty: all 1

    [[nodiscard]] double alpha(std::size_t /*m*/, std::int64_t frame) const {
        if (alpha_by_frame.empty()) return 1.0;
        const auto i = static_cast<std::size_t>(std::max<std::int64_t>(frame - 1, 0));
        return alpha_by_frame[std::min(i, alpha_by_frame.size() - 1)];
    }
};

/// Access energy of each active device under per-MEC ZF over the active
/// devices of that MEC; inactive devices get 0.
inline std::vector<double> access_energies(const Association& a, const std::vector<bool>& active,
                                           const FrameChannels& ch, const EnergyContext& ctx) {
    std::vector<double> e(a.devices(), 0.0);
    std::vector<std::size_t> members;
    std::vector<double> betas(a.devices());
    for (std::size_t m = 0; m < a.mecs; ++m) {
        members.clear();
        for (std::size_t k = 0; k < a.devices(); ++k)
            if (active[k] && a.mec_of[k] == m) members.push_back(k);
        if (members.empty()) continue;
        for (std::size_t k = 0; k < a.devices(); ++k)
            betas[k] = ch.gains(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
        const auto zf = channel::zf_decode(channel::access_from_fading(ch.fading[m], betas, members));
        for (std::size_t i = 0; i < members.size(); ++i)
            e[members[i]] = energy::access_energy(ctx.device.rate, zf.noise_gain(static_cast<Eigen::Index>(i)),
                                                  ctx.device.model_bits, ctx.bandwidth, ctx.sigma2);
    }
    return e;
}

struct FrameOutcome {
    double cost = 0.0;                 // sum_m alpha * E_mec this frame
    std::vector<double> wet;           // per MEC
    std::vector<double> xi;            // per device (0 if inactive)
};

/// Settles one frame: device requirements, optimal WET per MEC, harvest,
/// battery update and MEC energy. Batteries are updated in place; rows go to
/// `ledger` when given.
inline FrameOutcome settle_frame(std::int64_t frame, const Association& a, const std::vector<bool>& active,
                                 const FrameChannels& ch, const EnergyContext& ctx,
                                 std::vector<double>& batteries, energy::EnergyLedger* ledger) {
    const std::vector<double> e_ac = access_energies(a, active, ch, ctx);
    const double e_cmp = energy::compute_energy(ctx.device);
    const auto loads = [&] {
        std::vector<std::size_t> l(a.mecs, 0);
        for (std::size_t k = 0; k < a.devices(); ++k)
            if (active[k]) ++l[a.mec_of[k]];
        return l;
    }();

    FrameOutcome out{0.0, std::vector<double>(a.mecs, 0.0), std::vector<double>(a.devices(), 0.0)};
    std::vector<double> e_dev(a.devices(), 0.0);
    std::vector<energy::WetRequirement> reqs;
    for (std::size_t m = 0; m < a.mecs; ++m) {
        reqs.clear();
        for (std::size_t k = 0; k < a.devices(); ++k) {
            if (!active[k] || a.mec_of[k] != m) continue;
            out.xi[k] = 1.0 / static_cast<double>(loads[m]);
            e_dev[k] = energy::device_energy(ctx.device.circuit, e_cmp, e_ac[k]);
            reqs.push_back({e_dev[k], batteries[k],
                            ch.gains(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)), out.xi[k]});
        }
        out.wet[m] = energy::optimal_wet(reqs, ctx.n_mec);
    }

    for (std::size_t k = 0; k < a.devices(); ++k) {
        energy::DeviceRecord rec{frame, k, a.mec_of[k], static_cast<bool>(active[k])};
        if (active[k]) {
            const std::size_t m = a.mec_of[k];
            const double harvest = energy::harvested(
                out.wet[m], ch.gains(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)), out.xi[k],
                ctx.n_mec);
            batteries[k] = energy::battery_update({batteries[k], ctx.b_max}, e_dev[k], harvest).level;
            rec.e_cmp = e_cmp;
            rec.e_ac = e_ac[k];
            rec.e_dev = e_dev[k];
            rec.harvest = harvest;
        }
        rec.battery = batteries[k];
        if (ledger) ledger->add(rec);
    }

    for (std::size_t m = 0; m < a.mecs; ++m) {
        const double e_bh = energy::backhaul_energy(ctx.mec_rate, ch.bd_gain[m], ctx.device.model_bits,
                                                    ctx.bandwidth, ctx.sigma2);
        const double e_mec = energy::mec_energy(ctx.mec_circuit, out.wet[m], e_bh);
        const double alpha = ctx.alpha(m, frame);
        out.cost += alpha * e_mec;
        if (ledger) ledger->add(energy::MecRecord{frame, m, out.wet[m], e_bh, e_mec, alpha});
    }
    return out;
}

struct WetPlan {
    std::vector<std::vector<double>> wet;  // [frame][mec]
    std::vector<double> xi;                // per device, uniform over its MEC
};

struct FixedRun {
    Association association;
    WetPlan plan;
    energy::EnergyLedger ledger;
};

/// Energy side of the H2RMA frame loop over a fixed association, every device
/// active: requirements, optimal WET, battery updates and ledger accrual for
/// frames 1..L. `frames(l)` supplies the channels of frame l.
template <typename FrameSource>
FixedRun run_fixed_association(const Association& a, FrameSource&& frames, std::int64_t frame_count,
                               std::vector<double> batteries, const EnergyContext& ctx) {
    FixedRun out{a, {}, {}};
    const std::vector<bool> all(a.devices(), true);
    for (std::int64_t l = 1; l <= frame_count; ++l) {
        auto f = settle_frame(l, a, all, frames(l), ctx, batteries, &out.ledger);
        out.plan.wet.push_back(std::move(f.wet));
        out.plan.xi = std::move(f.xi);
    }
    return out;
}

/// Grid cost of holding `a` for `frame_count` frames on one frozen channel.
inline double frozen_cost(const Association& a, const FrameChannels& ch, std::int64_t frame_count,
                          std::vector<double> batteries, const EnergyContext& ctx) {
    const std::vector<bool> all(a.devices(), true);
    double total = 0.0;
    for (std::int64_t l = 1; l <= frame_count; ++l)
        total += settle_frame(l, a, all, ch, ctx, batteries, nullptr).cost;
    return total;
}

inline void write_association_header(std::ostream& os) {
    os << "frame,device_id,mec_id,active_flag,theta\n";
}

inline void write_association_rows(std::ostream& os, std::int64_t frame, const Association& a,
                                   const std::vector<bool>& active, double theta) {
    for (std::size_t k = 0; k < a.devices(); ++k)
        os << frame << ',' << k << ',' << a.mec_of[k] << ',' << (active[k] ? 1 : 0) << ','
           << fmt_double(theta) << '\n';
}

}  // namespace hetfl::assoc
