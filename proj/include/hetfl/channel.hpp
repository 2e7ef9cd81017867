#pragma once

// Random channel generation and linear receive processing for the access
// (device -> MEC) and backhaul (MEC -> CU) links.

#include <cmath>
#include <complex>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hetfl/common.hpp"

namespace hetfl::channel {

using CMatrix = Eigen::MatrixXcd;
using RVector = Eigen::VectorXd;

/// N_mec x K_m matrix whose column k is sqrt(beta_k) times an i.i.d. CN(0, I) vector.
struct AccessChannel {
    CMatrix g;
};

/// Backhaul channel of one MEC, stored as N_mec x N_cu so that the CU-side
/// detector W acts on the right (H_j W_m).
struct BackhaulChannel {
    CMatrix h;
};

struct ZfDecoder {
    CMatrix z;
    RVector noise_gain;  // diag((G^H G)^-1)
};

struct BdDecoder {
    CMatrix w;
    double bd_gain = 0.0;  // ||H_m W_m||_F^2
    Eigen::Index interference_rank = 0;
    Eigen::Index signal_rank = 0;
};

/// Unit-variance circularly-symmetric complex Gaussian entries.
inline CMatrix sample_cn(Eigen::Index rows, Eigen::Index cols, Rng& rng) {
    std::normal_distribution<double> n(0.0, std::sqrt(0.5));
    CMatrix out(rows, cols);
    for (Eigen::Index c = 0; c < cols; ++c)
        for (Eigen::Index r = 0; r < rows; ++r) {
            const double re = n(rng);
            const double im = n(rng);
            out(r, c) = {re, im};
        }
    return out;
}

inline AccessChannel sample_access(std::span<const double> betas, Eigen::Index n_mec, Rng& rng) {
    const auto k = static_cast<Eigen::Index>(betas.size());
    if (k > n_mec) fail(ErrorKind::Infeasible, "ZF infeasible: more devices than MEC antennas");
    AccessChannel ch{sample_cn(n_mec, k, rng)};
    for (Eigen::Index c = 0; c < k; ++c) ch.g.col(c) *= std::sqrt(betas[c]);
    return ch;
}

/// Builds G_m from a per-frame fading matrix that covers every device, so
/// that all association policies see the same small-scale fading.
inline AccessChannel access_from_fading(const CMatrix& fading, std::span<const double> betas,
                                        std::span<const std::size_t> devices) {
    if (static_cast<Eigen::Index>(devices.size()) > fading.rows())
        fail(ErrorKind::Infeasible, "ZF infeasible: more devices than MEC antennas");
    AccessChannel ch{CMatrix(fading.rows(), static_cast<Eigen::Index>(devices.size()))};
    for (std::size_t c = 0; c < devices.size(); ++c)
        ch.g.col(static_cast<Eigen::Index>(c)) =
            fading.col(static_cast<Eigen::Index>(devices[c])) * std::sqrt(betas[devices[c]]);
    return ch;
}

/// H = sqrt(K/(K+1)) H_los + sqrt(1/(K+1)) H_nlos with an all-ones LOS component.
inline BackhaulChannel sample_rician(Eigen::Index rows, Eigen::Index cols, double k_factor, Rng& rng) {
    const double los = std::sqrt(k_factor / (k_factor + 1.0));
    const double nlos = std::sqrt(1.0 / (k_factor + 1.0));
    BackhaulChannel ch{sample_cn(rows, cols, rng) * nlos};
    ch.h.array() += std::complex<double>(los, 0.0);
    return ch;
}

inline ZfDecoder zf_decode(const AccessChannel& ch) {
    const CMatrix& g = ch.g;
    if (g.cols() == 0) return {CMatrix(g.rows(), 0), RVector(0)};
    if (g.cols() > g.rows()) fail(ErrorKind::Infeasible, "ZF infeasible: resample channel");
    Eigen::JacobiSVD<CMatrix> svd(g);
    const RVector& sv = svd.singularValues();
    if (!(sv(sv.size() - 1) > 0.0) || sv(0) / sv(sv.size() - 1) >= 1e12)
        fail(ErrorKind::Infeasible, "ZF infeasible: resample channel");
    const CMatrix gram = g.adjoint() * g;
    const CMatrix inv = gram.ldlt().solve(CMatrix::Identity(g.cols(), g.cols()));
    ZfDecoder out;
    out.z = g * inv;
    out.noise_gain = inv.diagonal().real();
    return out;
}

namespace detail {

inline Eigen::Index numeric_rank(const RVector& sv) {
    if (sv.size() == 0 || sv(0) == 0.0) return 0;
    const double tol = 1e-10 * sv(0);
    Eigen::Index r = 0;
    while (r < sv.size() && sv(r) > tol) ++r;
    return r;
}

}  // namespace detail

/// Block-diagonalisation detector for MEC m: W_m = V0 V1 where V0 spans the
/// null space of the stacked channels of every other MEC and V1 holds the
/// leading right singular vectors of H_m V0.
inline BdDecoder bd_decode(std::span<const BackhaulChannel> all, std::size_t m) {
    const Eigen::Index n_cu = all[m].h.cols();
    Eigen::Index others = 0;
    for (std::size_t j = 0; j < all.size(); ++j)
        if (j != m) others += all[j].h.rows();

    CMatrix v0;
    Eigen::Index jbar = 0;
    if (others == 0) {
        v0 = CMatrix::Identity(n_cu, n_cu);
    } else {
        CMatrix hbar(others, n_cu);
        Eigen::Index row = 0;
        for (std::size_t j = 0; j < all.size(); ++j) {
            if (j == m) continue;
            hbar.middleRows(row, all[j].h.rows()) = all[j].h;
            row += all[j].h.rows();
        }
        Eigen::BDCSVD<CMatrix> svd(hbar, Eigen::ComputeFullV);
        jbar = detail::numeric_rank(svd.singularValues());
        if (n_cu <= jbar) fail(ErrorKind::Infeasible, "BD infeasible: interference null space is empty");
        v0 = svd.matrixV().rightCols(n_cu - jbar);
    }

    const CMatrix hv0 = all[m].h * v0;
    Eigen::BDCSVD<CMatrix> svd1(hv0, Eigen::ComputeFullV);
    const Eigen::Index jm = detail::numeric_rank(svd1.singularValues());

    BdDecoder out;
    out.w = v0 * svd1.matrixV().leftCols(jm);
    out.bd_gain = (all[m].h * out.w).squaredNorm();
    out.interference_rank = jbar;
    out.signal_rank = jm;
    return out;
}

/// ||H_m W_m||_F^2 for every MEC at once through the Schur complement of the
/// stacked Gram matrix: the (m, m) block of (A A^H)^-1 inverts the Gram of
/// H_m's component orthogonal to the other MECs' rows. Requires the stacked
/// channel to have full row rank; otherwise falls back to bd_decode.
inline std::vector<double> bd_gains(std::span<const BackhaulChannel> all) {
    std::vector<double> out(all.size(), 0.0);
    if (all.empty()) return out;
    Eigen::Index rows = 0;
    for (const auto& b : all) rows += b.h.rows();
    const Eigen::Index n_cu = all.front().h.cols();

    bool fast = rows <= n_cu;
    CMatrix inv;
    if (fast) {
        CMatrix a(rows, n_cu);
        Eigen::Index r = 0;
        for (const auto& b : all) {
            a.middleRows(r, b.h.rows()) = b.h;
            r += b.h.rows();
        }
        Eigen::LLT<CMatrix> llt(a * a.adjoint());
        fast = llt.info() == Eigen::Success;
        if (fast) inv = llt.solve(CMatrix::Identity(rows, rows));
    }
    if (!fast) {
        for (std::size_t m = 0; m < all.size(); ++m) out[m] = bd_decode(all, m).bd_gain;
        return out;
    }
    Eigen::Index r = 0;
    for (std::size_t m = 0; m < all.size(); ++m) {
        const Eigen::Index n = all[m].h.rows();
        const CMatrix block = inv.block(r, r, n, n);
        out[m] = block.ldlt().solve(CMatrix::Identity(n, n)).trace().real();
        r += n;
    }
    return out;
}

/// lambda log2(1 + p / (sigma2 g)).
inline double device_rate(double power, double noise_gain, double bandwidth, double sigma2) {
    return bandwidth * std::log2(1.0 + power / (sigma2 * noise_gain));
}

/// lambda log2(1 + p ||H W||^2 / sigma2).
inline double mec_rate(double power, double bd_gain, double bandwidth, double sigma2) {
    return bandwidth * std::log2(1.0 + power * bd_gain / sigma2);
}

}  // namespace hetfl::channel
