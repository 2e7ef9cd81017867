#pragma once

// Network geometry, pathloss and the worker-mobility model.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <ostream>
#include <random>
#include <string_view>
#include <vector>

#include "hetfl/common.hpp"

namespace hetfl::topology {

struct Position {
    double x = 0.0;
    double y = 0.0;

    [[nodiscard]] double norm() const { return std::hypot(x, y); }
    friend bool operator==(const Position&, const Position&) = default;
};

inline double distance(const Position& a, const Position& b) {
    return std::hypot(a.x - b.x, a.y - b.y);
}

/// n points i.i.d. uniform over the disk of `radius` centred on the origin.
inline std::vector<Position> place_uniform(std::size_t n, double radius, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::vector<Position> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double r = radius * std::sqrt(u(rng));
        const double phi = 2.0 * std::numbers::pi * u(rng);
        out.push_back({r * std::cos(phi), r * std::sin(phi)});
    }
    return out;
}

/// Clamped power law (max(d, d0)/d0)^-nu; equals 1 inside the reference distance.
inline double pathloss_gain(double d, double nu, double d0 = 1.0) {
    return std::pow(std::max(d, d0) / d0, -nu);
}

// ---------------------------------------------------------------------------
// Mobility

enum class Motion : int { Static = 0, Normal = 1, Risky = 2 };

inline std::string_view to_string(Motion m) {
    switch (m) {
        case Motion::Static: return "static";
        case Motion::Normal: return "normal";
        case Motion::Risky: return "risky";
    }
    return "?";
}

struct MobilityState {
    Motion state = Motion::Static;
    double heading = 0.0;  // radians
    double speed = 0.0;    // m/s
};

using TransitionMatrix = std::array<std::array<double, 3>, 3>;

struct MobilityParams {
    // Gait conversion: one step is 0.7 m, so 84 steps/min is 0.98 m/s.
    double step_length = 0.7;
    double steps_per_min_threshold = 84.0;
    double v_normal = 0.5;
    double v_risky = 1.5;
    double gamma_shape = 2.0;
    double kappa_normal = 4.0;
    double kappa_risky = 0.5;
    TransitionMatrix transition{{{0.8, 0.1, 0.1}, {0.1, 0.8, 0.1}, {0.1, 0.1, 0.8}}};

    [[nodiscard]] double speed_threshold() const {
        return steps_per_min_threshold * step_length / 60.0;
    }
    [[nodiscard]] double kappa(Motion m) const {
        return m == Motion::Risky ? kappa_risky : kappa_normal;
    }
};

inline void check_row_stochastic(const TransitionMatrix& p) {
    for (const auto& row : p) {
        double s = 0.0;
        for (double v : row) {
            if (!(v >= 0.0)) fail(ErrorKind::Config, "transition matrix has a negative entry");
            s += v;
        }
        if (std::abs(s - 1.0) > 1e-9) fail(ErrorKind::Config, "transition matrix is not row-stochastic");
    }
}

/// Speed for a freshly entered state. Normal speeds lie in (0, threshold];
/// risky speeds in (threshold, 2*v_risky - threshold) so their mean is v_risky.
inline double sample_speed(Motion m, const MobilityParams& mp, Rng& rng) {
    const double thr = mp.speed_threshold();
    std::uniform_real_distribution<double> u(0.0, 1.0);
    switch (m) {
        case Motion::Static: return 0.0;
        case Motion::Normal: return thr * (1.0 - u(rng));
        case Motion::Risky: {
            const double hi = std::max(2.0 * mp.v_risky - thr, thr * 1.5);
            const double v = thr + (hi - thr) * (1.0 - u(rng));
            return v > thr ? v : std::nextafter(thr, hi);
        }
    }
    return 0.0;
}

/// One hidden-state transition. Heading is left to sample_displacement.
inline MobilityState hmm_step(const MobilityState& s, const TransitionMatrix& p,
                              const MobilityParams& mp, Rng& rng) {
    check_row_stochastic(p);
    const auto& row = p[static_cast<int>(s.state)];
    std::discrete_distribution<int> pick(row.begin(), row.end());
    MobilityState next = s;
    next.state = static_cast<Motion>(pick(rng));
    next.speed = sample_speed(next.state, mp, rng);
    return next;
}

/// Best-Fisher rejection sampler; kappa == 0 is the uniform circle.
inline double sample_von_mises(double mu, double kappa, Rng& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    if (kappa < 1e-8) return mu + std::numbers::pi * (2.0 * u(rng) - 1.0);
    const double tau = 1.0 + std::sqrt(1.0 + 4.0 * kappa * kappa);
    const double rho = (tau - std::sqrt(2.0 * tau)) / (2.0 * kappa);
    const double r = (1.0 + rho * rho) / (2.0 * rho);
    double f = 0.0;
    for (;;) {
        const double z = std::cos(std::numbers::pi * u(rng));
        f = (1.0 + r * z) / (r + z);
        const double c = kappa * (r - f);
        const double u2 = u(rng);
        if (c * (2.0 - c) - u2 > 0.0) break;
        if (std::log(c / u2) + 1.0 - c >= 0.0) break;
    }
    f = std::clamp(f, -1.0, 1.0);
    const double sign = u(rng) < 0.5 ? -1.0 : 1.0;
    return mu + sign * std::acos(f);
}

struct Displacement {
    double dx = 0.0;
    double dy = 0.0;
    double heading = 0.0;
};

/// Gamma step length along the current heading turned by a von Mises angle.
inline Displacement sample_displacement(const MobilityState& s, double gamma_shape,
                                        double gamma_scale, double kappa, Rng& rng) {
    if (s.state == Motion::Static) return {0.0, 0.0, s.heading};
    std::gamma_distribution<double> step(gamma_shape, gamma_scale);
    const double heading = sample_von_mises(s.heading, kappa, rng);
    const double len = step(rng);
    return {len * std::cos(heading), len * std::sin(heading), heading};
}

inline constexpr std::int64_t kNeverChangesCell = std::numeric_limits<std::int64_t>::max();

/// ceil(mu / (T V)); a zero speed never crosses a cell.
inline std::int64_t frames_per_cell(double mu, double frame_duration, double speed) {
    if (speed <= 0.0) return kNeverChangesCell;
    return std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(mu / (frame_duration * speed))));
}

struct MicroCellGrid {
    double mu = 20.0;
    Position origin{};
};

struct CellIndex {
    std::int64_t i = 0;
    std::int64_t j = 0;
    friend bool operator==(const CellIndex&, const CellIndex&) = default;
};

inline CellIndex micro_cell_of(const Position& p, const MicroCellGrid& grid) {
    return {static_cast<std::int64_t>(std::floor((p.x - grid.origin.x) / grid.mu)),
            static_cast<std::int64_t>(std::floor((p.y - grid.origin.y) / grid.mu))};
}

/// Mirrors a point that left the disk back across the boundary circle and
/// turns the heading around.
inline void reflect_into_disk(Position& p, double& heading, double radius) {
    const double r = p.norm();
    if (r <= radius) return;
    const double back = std::max(0.0, 2.0 * radius - r);
    p = {p.x * back / r, p.y * back / r};
    heading += std::numbers::pi;
}

/// Per-device mobility driver; one instance per device, advanced once per frame.
struct Walker {
    Position pos;
    MobilityState st;

    void advance(const MobilityParams& mp, double frame_duration, double radius, Rng& rng) {
        st = hmm_step(st, mp.transition, mp, rng);
        if (st.state == Motion::Static) return;
        const double mean = st.speed * frame_duration;
        const Displacement d = sample_displacement(st, mp.gamma_shape, mean / mp.gamma_shape,
                                                   mp.kappa(st.state), rng);
        st.heading = d.heading;
        pos.x += d.dx;
        pos.y += d.dy;
        reflect_into_disk(pos, st.heading, radius);
    }
};

struct TraceRow {
    std::int64_t frame = 0;
    std::size_t device = 0;
    Position pos;
    Motion state = Motion::Static;
    double speed = 0.0;
};

inline void write_trace_csv(std::ostream& os, const std::vector<TraceRow>& rows) {
    os << "frame,device_id,x,y,state,speed\n";
    for (const auto& r : rows) {
        os << r.frame << ',' << r.device << ',' << fmt_double(r.pos.x) << ','
           << fmt_double(r.pos.y) << ',' << to_string(r.state) << ',' << fmt_double(r.speed) << '\n';
    }
}

}  // namespace hetfl::topology
