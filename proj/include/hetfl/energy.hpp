#pragma once

// Energy accounting for devices and MECs: computation, access and backhaul
// transmission, wireless energy transfer (WET), batteries and grid cost.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <ostream>
#include <span>
#include <vector>

#include "hetfl/common.hpp"

namespace hetfl::energy {

struct DeviceEnergyParams {
    double varsigma = 1e-27;  // chip energy coefficient
    double omega = 40.0;      // CPU cycles per bit
    double vartheta = 1e9;    // CPU clock, Hz
    double model_bits = 1e6;  // Q
    double circuit = 0.01;    // E_cir, J
    double rate = 20e6;       // r_dev, bit/s
};

/// varsigma * omega * vartheta^2 * Q.
inline double compute_energy(const DeviceEnergyParams& p) {
    return p.varsigma * p.omega * p.vartheta * p.vartheta * p.model_bits;
}

/// Energy to push Q bits at rate r through a ZF-equalised access link.
inline double access_energy(double rate, double noise_gain, double model_bits, double bandwidth,
                            double sigma2) {
    if (!(rate > 0.0)) fail(ErrorKind::Numeric, "zero-rate transmission undefined");
    return sigma2 * model_bits * noise_gain * std::expm1(rate / bandwidth * std::log(2.0)) / rate;
}

inline double device_energy(double circuit, double compute, double access) {
    return circuit + compute + access;
}

/// E_wet * beta * xi * N_mec.
inline double harvested(double wet, double beta, double xi, double n_mec) {
    return wet * beta * xi * n_mec;
}

struct BatteryState {
    double level = 0.0;
    double capacity = 0.0;
};

/// min(B_max, B - E_dev + A). Round-off below 1e-9 J is clamped to zero;
/// anything more negative is an infeasible schedule.
inline BatteryState battery_update(const BatteryState& b, double e_dev, double harvest) {
    const double next = b.level - e_dev + harvest;
    if (next < -1e-9 * std::max(1.0, e_dev))
        fail(ErrorKind::Infeasible, "battery underflow: infeasible schedule");
    return {std::clamp(next, 0.0, b.capacity), b.capacity};
}

inline double backhaul_energy(double rate, double bd_gain, double model_bits, double bandwidth,
                              double sigma2) {
    if (!(rate > 0.0)) fail(ErrorKind::Numeric, "zero-rate transmission undefined");
    if (!(bd_gain > 0.0)) fail(ErrorKind::Numeric, "backhaul detector has zero gain");
    return sigma2 * model_bits * std::expm1(rate / bandwidth * std::log(2.0)) / (bd_gain * rate);
}

inline double mec_energy(double circuit, double wet, double backhaul) {
    return circuit + wet + backhaul;
}

struct WetRequirement {
    double e_dev = 0.0;
    double battery = 0.0;
    double beta = 0.0;
    double xi = 0.0;
};

/// Least transferred energy that keeps every served battery non-negative:
/// the largest per-device deficit divided by its harvesting coefficient,
/// clamped at zero.
inline double optimal_wet(std::span<const WetRequirement> reqs, double n_mec) {
    double best = 0.0;
    for (const auto& r : reqs) {
        const double deficit = r.e_dev - r.battery;
        if (deficit <= 0.0) continue;
        const double coef = r.beta * r.xi * n_mec;
        if (!(coef > 0.0)) fail(ErrorKind::Infeasible, "device cannot harvest: zero WET coefficient");
        best = std::max(best, deficit / coef);
    }
    return best;
}

struct MecRecord {
    std::int64_t frame = 0;
    std::size_t mec = 0;
    double e_wet = 0.0;
    double e_bh = 0.0;
    double e_mec = 0.0;
    double alpha = 1.0;
};

struct DeviceRecord {
    std::int64_t frame = 0;
    std::size_t device = 0;
    std::size_t mec = 0;
    bool active = true;
    double e_cmp = 0.0;
    double e_ac = 0.0;
    double e_dev = 0.0;
    double harvest = 0.0;
    double battery = 0.0;  // level after the frame's update
};

/// Per-frame energy terms of one run plus the incrementally accumulated cost.
class EnergyLedger {
public:
    void add(const MecRecord& r) {
        if (r.e_wet < 0.0 || r.e_bh < 0.0 || r.e_mec < 0.0 || r.alpha < 0.0)
            fail(ErrorKind::Numeric, "negative MEC energy term");
        delta_ += r.alpha * r.e_mec;
        mecs_.push_back(r);
    }
    void add(const DeviceRecord& r) { devices_.push_back(r); }

    [[nodiscard]] double delta() const { return delta_; }
    [[nodiscard]] const std::vector<MecRecord>& mec_rows() const { return mecs_; }
    [[nodiscard]] const std::vector<DeviceRecord>& device_rows() const { return devices_; }
    [[nodiscard]] bool empty() const { return mecs_.empty() && devices_.empty(); }

private:
    std::vector<MecRecord> mecs_;
    std::vector<DeviceRecord> devices_;
    double delta_ = 0.0;
};

/// Sum over recorded (frame, MEC) pairs of alpha * E_mec, recomputed from rows.
inline double grid_cost(const EnergyLedger& ledger) {
    double s = 0.0;
    for (const auto& r : ledger.mec_rows()) s += r.alpha * r.e_mec;
    return s;
}

inline void write_mec_csv(std::ostream& os, const EnergyLedger& ledger) {
    os << "frame,mec_id,E_wet,E_bh,E_mec,alpha\n";
    for (const auto& r : ledger.mec_rows())
        os << r.frame << ',' << r.mec << ',' << fmt_double(r.e_wet) << ',' << fmt_double(r.e_bh) << ','
           << fmt_double(r.e_mec) << ',' << fmt_double(r.alpha) << '\n';
}

inline void write_device_csv(std::ostream& os, const EnergyLedger& ledger) {
    os << "frame,device_id,E_cmp,E_ac,E_dev,A,battery\n";
    for (const auto& r : ledger.device_rows())
        os << r.frame << ',' << r.device << ',' << fmt_double(r.e_cmp) << ',' << fmt_double(r.e_ac)
           << ',' << fmt_double(r.e_dev) << ',' << fmt_double(r.harvest) << ','
           << fmt_double(r.battery) << '\n';
}

}  // namespace hetfl::energy
