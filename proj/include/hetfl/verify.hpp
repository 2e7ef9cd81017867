#pragma once

// Self-checks shared by the `verify` command and the test suite: grid search
// against the closed-form WET, detector residuals, softmax gradient against
// finite differences and nested-vs-flat aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "hetfl/channel.hpp"
#include "hetfl/common.hpp"
#include "hetfl/energy.hpp"
#include "hetfl/fl.hpp"

namespace hetfl::verify {

struct CheckResult {
    std::string name;
    bool pass = false;
    double worst = 0.0;  // the quantity compared against the tolerance
    double tolerance = 0.0;
    std::string detail;
};

struct WetInstance {
    std::vector<energy::WetRequirement> reqs;
    double n_mec = 16.0;
};

inline WetInstance random_wet_instance(Rng& rng, std::size_t max_devices = 6) {
    std::uniform_int_distribution<std::size_t> nk(1, max_devices);
    std::uniform_real_distribution<double> e(0.01, 10.0), b(0.0, 12.0), beta(1e-6, 1e-2);
    std::uniform_int_distribution<int> nm(1, 32);
    WetInstance inst;
    inst.n_mec = nm(rng);
    const std::size_t k = nk(rng);
    for (std::size_t i = 0; i < k; ++i)
        inst.reqs.push_back({e(rng), b(rng), beta(rng), 1.0 / static_cast<double>(k)});
    return inst;
}

inline bool wet_feasible(const WetInstance& inst, double wet) {
    for (const auto& r : inst.reqs)
        if (r.battery - r.e_dev + energy::harvested(wet, r.beta, r.xi, inst.n_mec) < 0.0) return false;
    return true;
}

/// Smallest feasible grid point of [0, range] with `steps` intervals, or -1.
inline double grid_min_feasible(const WetInstance& inst, double range, std::int64_t steps) {
    for (std::int64_t i = 0; i <= steps; ++i) {
        const double w = range * static_cast<double>(i) / static_cast<double>(steps);
        if (wet_feasible(inst, w)) return w;
    }
    return -1.0;
}

/// On `instances` random MEC instances, no grid value below the closed form
/// minus one step is feasible.
inline CheckResult wet_grid_oracle(std::uint64_t seed, int instances = 500) {
    auto rng = make_stream(seed, kTagTest, 1);
    constexpr std::int64_t steps = 10000;
    CheckResult res{"wet_grid_oracle", true, 0.0, 0.0, {}};
    int violations = 0;
    for (int i = 0; i < instances; ++i) {
        const auto inst = random_wet_instance(rng);
        const double star = energy::optimal_wet(inst.reqs, inst.n_mec);
        const double range = star > 0.0 ? 2.0 * star : 1.0;
        const double step = range / static_cast<double>(steps);
        const double grid = grid_min_feasible(inst, range, steps);
        // grid must find a point, and none may undercut the closed form
        if (grid < 0.0 || grid < star - step) ++violations;
        res.worst = std::max(res.worst, star > 0.0 ? (star - grid) / step : 0.0);
    }
    res.pass = violations == 0;
    res.tolerance = 1.0;
    res.detail = std::to_string(violations) + " violations over " + std::to_string(instances) + " instances";
    return res;
}

/// max over MECs of ||Z^H G - I||_F at the given sizes.
inline CheckResult zf_residual(std::uint64_t seed, Eigen::Index n_mec = 16, Eigen::Index k = 16, int trials = 20) {
    auto rng = make_stream(seed, kTagTest, 2);
    std::uniform_real_distribution<double> b(1e-9, 1e-3);
    CheckResult res{"zf_residual", true, 0.0, 1e-8, {}};
    for (int t = 0; t < trials; ++t) {
        std::vector<double> betas(static_cast<std::size_t>(k));
        for (auto& x : betas) x = b(rng);
        const auto ch = channel::sample_access(betas, n_mec, rng);
        const auto zf = channel::zf_decode(ch);
        const double r = (zf.z.adjoint() * ch.g - channel::CMatrix::Identity(k, k)).norm();
        res.worst = std::max(res.worst, r);
    }
    res.pass = res.worst < res.tolerance;
    return res;
}

/// Leakage ||H_j W_m|| / ||H_j|| for j != m, plus agreement between the SVD
/// construction and the Gram-matrix shortcut for the detector gain.
inline CheckResult bd_residual(std::uint64_t seed, Eigen::Index n_cu = 128, std::size_t mecs = 8,
                               Eigen::Index n_mec = 16, double rician_k = 10.0) {
    auto rng = make_stream(seed, kTagTest, 3);
    std::vector<channel::BackhaulChannel> all;
    for (std::size_t m = 0; m < mecs; ++m) all.push_back(channel::sample_rician(n_mec, n_cu, rician_k, rng));
    const auto fast = channel::bd_gains(all);
    CheckResult res{"bd_residual", true, 0.0, 1e-8, {}};
    double gain_gap = 0.0;
    for (std::size_t m = 0; m < mecs; ++m) {
        const auto bd = channel::bd_decode(all, m);
        for (std::size_t j = 0; j < mecs; ++j)
            if (j != m) res.worst = std::max(res.worst, (all[j].h * bd.w).norm() / all[j].h.norm());
        gain_gap = std::max(gain_gap, std::abs(bd.bd_gain - fast[m]) / bd.bd_gain);
    }
    res.worst = std::max(res.worst, gain_gap);
    res.pass = res.worst < res.tolerance;
    return res;
}

/// Relative error between the analytic softmax gradient and central
/// differences on random coordinates.
inline CheckResult gradient_check(std::uint64_t seed, int probes = 100) {
    auto rng = make_stream(seed, kTagTest, 4);
    constexpr std::size_t classes = 4, features = 5, n = 12;
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> lab(0, classes - 1);
    auto w = fl::ModelWeights::zeros(classes, features);
    for (Eigen::Index i = 0; i < w.w.size(); ++i) w.w(i) = 0.5 * z(rng);
    Eigen::MatrixXd x(n, features);
    for (Eigen::Index i = 0; i < x.size(); ++i) x(i) = z(rng);
    std::vector<int> y(n);
    for (auto& v : y) v = lab(rng);

    Eigen::VectorXd grad;
    fl::loss_and_gradient(w, x, y, &grad);
    std::uniform_int_distribution<Eigen::Index> coord(0, w.w.size() - 1);
    CheckResult res{"gradient_check", true, 0.0, 1e-5, {}};
    const double h = 1e-6;
    for (int p = 0; p < probes; ++p) {
        const Eigen::Index i = coord(rng);
        auto plus = w, minus = w;
        plus.w(i) += h;
        minus.w(i) -= h;
        const double fd = (fl::loss_and_gradient(plus, x, y, nullptr) - fl::loss_and_gradient(minus, x, y, nullptr)) /
                          (2.0 * h);
        const double rel = std::abs(fd - grad(i)) / std::max(1e-3, std::abs(fd) + std::abs(grad(i)));
        res.worst = std::max(res.worst, rel);
    }
    res.pass = res.worst < res.tolerance;
    return res;
}

/// Two-tier aggregation against one flat size-weighted average.
inline CheckResult aggregation_identity(std::uint64_t seed, int trials = 50) {
    auto rng = make_stream(seed, kTagTest, 5);
    std::normal_distribution<double> z(0.0, 1.0);
    std::uniform_int_distribution<int> sz(1, 500), groups(1, 6), per(1, 5);
    CheckResult res{"aggregation_identity", true, 0.0, 1e-12, {}};
    for (int t = 0; t < trials; ++t) {
        std::vector<fl::ModelWeights> all, mec_models;
        std::vector<double> all_sizes, mec_sizes;
        const int g = groups(rng);
        for (int m = 0; m < g; ++m) {
            std::vector<fl::ModelWeights> local;
            std::vector<double> local_sizes;
            const int n = per(rng);
            for (int k = 0; k < n; ++k) {
                auto w = fl::ModelWeights::zeros(3, 4);
                for (Eigen::Index i = 0; i < w.w.size(); ++i) w.w(i) = z(rng);
                local.push_back(w);
                local_sizes.push_back(sz(rng));
            }
            all.insert(all.end(), local.begin(), local.end());
            all_sizes.insert(all_sizes.end(), local_sizes.begin(), local_sizes.end());
            mec_models.push_back(fl::mec_aggregate(local, local_sizes));
            double s = 0.0;
            for (double v : local_sizes) s += v;
            mec_sizes.push_back(s);
        }
        const auto nested = fl::cu_aggregate(mec_models, mec_sizes);
        const auto flat = fl::weighted_average(all, all_sizes);
        res.worst = std::max(res.worst, (nested.w - flat.w).lpNorm<Eigen::Infinity>());
    }
    res.pass = res.worst < res.tolerance;
    return res;
}

inline std::vector<CheckResult> run_all(std::uint64_t seed) {
    return {wet_grid_oracle(seed), zf_residual(seed), bd_residual(seed), gradient_check(seed),
            aggregation_identity(seed)};
}

}  // namespace hetfl::verify
