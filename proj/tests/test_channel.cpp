#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "hetfl/channel.hpp"

using namespace hetfl;
using namespace hetfl::channel;

TEST(Access, SecondMoment) {
    auto rng = make_stream(1);
    const std::vector<double> beta{1.0};
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += std::norm(sample_access(beta, 1, rng).g(0, 0));
    EXPECT_NEAR(s / n, 1.0, 0.02);
}

TEST(Access, ZeroGainColumn) {
    auto rng = make_stream(2);
    const std::vector<double> beta{0.0};
    EXPECT_EQ(sample_access(beta, 4, rng).g.norm(), 0.0);
}

TEST(Access, Deterministic) {
    auto a = make_stream(3), b = make_stream(3);
    const std::vector<double> beta{0.3, 0.7};
    EXPECT_TRUE(sample_access(beta, 4, a).g.isApprox(sample_access(beta, 4, b).g, 0.0));
}

TEST(Access, TooManyDevices) {
    auto rng = make_stream(4);
    const std::vector<double> beta(5, 1.0);
    EXPECT_THROW(sample_access(beta, 4, rng), Error);
}

TEST(Rician, RayleighLimitMoment) {
    auto rng = make_stream(5);
    double s = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) s += std::norm(sample_rician(1, 1, 0.0, rng).h(0, 0));
    EXPECT_NEAR(s / n, 1.0, 0.02);
}

TEST(Rician, LosLimit) {
    auto rng = make_stream(6);
    const auto h = sample_rician(4, 8, 1e9, rng).h;
    const double var = (h.array() - std::complex<double>(1.0, 0.0)).abs2().mean();
    EXPECT_LT(var, 1e-6);
}

TEST(Rician, PowerNormalised) {
    auto rng = make_stream(7);
    for (double k : {0.5, 3.0, 10.0}) {
        double s = 0.0;
        const int n = 100000;
        for (int i = 0; i < n; ++i) s += std::norm(sample_rician(1, 1, k, rng).h(0, 0));
        EXPECT_NEAR(s / n, 1.0, 0.02) << "K=" << k;
    }
}

TEST(Zf, OrthonormalColumns) {
    auto rng = make_stream(8);
    CMatrix a = sample_cn(6, 3, rng);
    Eigen::HouseholderQR<CMatrix> qr(a);
    const CMatrix q = qr.householderQ() * CMatrix::Identity(6, 3);
    const auto zf = zf_decode({q});
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(zf.noise_gain(i), 1.0, 1e-12);
}

TEST(Zf, ScaledIdentity) {
    const auto zf = zf_decode({CMatrix::Identity(3, 3) * 2.0});
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(zf.noise_gain(i), 0.25, 1e-15);
}

TEST(Zf, RankDeficientRejected) {
    CMatrix g(4, 2);
    g.col(0) = CMatrix::Ones(4, 1);
    g.col(1) = CMatrix::Ones(4, 1) * 2.0;
    try {
        zf_decode({g});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Infeasible);
        EXPECT_NE(std::string(e.what()).find("ZF infeasible"), std::string::npos);
    }
}

TEST(Zf, ResidualProperty) {
    auto rng = make_stream(9);
    std::uniform_int_distribution<int> kd(1, 16);
    std::uniform_real_distribution<double> b(1e-9, 1.0);
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        std::vector<double> betas(static_cast<std::size_t>(kd(rng)));
        for (auto& x : betas) x = b(rng);
        const auto ch = sample_access(betas, 16, rng);
        const auto zf = zf_decode(ch);
        const auto k = static_cast<Eigen::Index>(betas.size());
        worst = std::max(worst, (zf.z.adjoint() * ch.g - CMatrix::Identity(k, k)).norm());
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(Zf, NoiseGainMatchesInverseGram) {
    auto rng = make_stream(10);
    const std::vector<double> betas{0.2, 0.5, 1.0};
    const auto ch = sample_access(betas, 5, rng);
    const CMatrix inv = (ch.g.adjoint() * ch.g).inverse();
    const auto zf = zf_decode(ch);
    for (Eigen::Index i = 0; i < 3; ++i) EXPECT_NEAR(zf.noise_gain(i), inv(i, i).real(), 1e-9 * inv(i, i).real());
}

TEST(Zf, StrongerDeviceLessNoise) {
    // noise gain of column 0 scales as 1/beta_0 for fixed fading
    auto rng = make_stream(11);
    int better = 0;
    const int trials = 1000;
    for (int t = 0; t < trials; ++t) {
        const CMatrix f = sample_cn(8, 4, rng);
        const std::vector<std::size_t> all{0, 1, 2, 3};
        std::vector<double> weak{0.1, 0.5, 0.5, 0.5}, strong{0.4, 0.5, 0.5, 0.5};
        const double gw = zf_decode(access_from_fading(f, weak, all)).noise_gain(0);
        const double gs = zf_decode(access_from_fading(f, strong, all)).noise_gain(0);
        better += gs <= gw;
    }
    EXPECT_EQ(better, trials);
}

TEST(Bd, SingleMec) {
    auto rng = make_stream(12);
    const std::vector<BackhaulChannel> all{sample_rician(4, 16, 10.0, rng)};
    const auto bd = bd_decode(all, 0);
    EXPECT_GT(bd.bd_gain, 0.0);
    EXPECT_LT((bd.w.adjoint() * bd.w - CMatrix::Identity(bd.w.cols(), bd.w.cols())).norm(), 1e-10);
    EXPECT_NEAR(bd.bd_gain, all[0].h.squaredNorm(), 1e-9 * bd.bd_gain);
}

TEST(Bd, TwoMecLeakage) {
    auto rng = make_stream(13);
    const std::vector<BackhaulChannel> all{sample_rician(2, 8, 0.0, rng), sample_rician(2, 8, 0.0, rng)};
    const auto bd = bd_decode(all, 0);
    EXPECT_LT((all[1].h * bd.w).norm(), 1e-8);
    EXPECT_EQ(bd.interference_rank, 2);
}

TEST(Bd, NullSpaceTooSmall) {
    auto rng = make_stream(14);
    const std::vector<BackhaulChannel> all{sample_rician(4, 8, 0.0, rng), sample_rician(4, 8, 0.0, rng),
                                           sample_rician(4, 8, 0.0, rng)};
    try {
        bd_decode(all, 0);
        FAIL();
    } catch (const Error& e) {
        EXPECT_NE(std::string(e.what()).find("BD infeasible"), std::string::npos);
    }
}

TEST(Bd, TableDimensionsResidual) {
    auto rng = make_stream(15);
    double worst = 0.0;
    for (int t = 0; t < 200; ++t) {
        std::vector<BackhaulChannel> all;
        for (int m = 0; m < 8; ++m) all.push_back(sample_rician(16, 128, 10.0, rng));
        // one MEC per instance keeps the suite fast; m cycles over instances
        const std::size_t m = static_cast<std::size_t>(t % 8);
        const auto bd = bd_decode(all, m);
        for (std::size_t j = 0; j < all.size(); ++j)
            if (j != m) worst = std::max(worst, (all[j].h * bd.w).norm());
    }
    EXPECT_LT(worst, 1e-8);
}

TEST(Bd, GramRouteMatchesSvd) {
    auto rng = make_stream(16);
    for (int t = 0; t < 5; ++t) {
        std::vector<BackhaulChannel> all;
        for (int m = 0; m < 4; ++m) all.push_back(sample_rician(6, 40, 3.0, rng));
        const auto fast = bd_gains(all);
        for (std::size_t m = 0; m < all.size(); ++m) {
            const double slow = bd_decode(all, m).bd_gain;
            EXPECT_NEAR(fast[m], slow, 1e-9 * slow);
        }
    }
}

TEST(Rates, HandValues) {
    EXPECT_EQ(device_rate(0.0, 1.0, 20e6, 1e-13), 0.0);
    EXPECT_NEAR(device_rate(1e-13, 1.0, 20e6, 1e-13), 2.0e7, 1e-6);
    EXPECT_NEAR(device_rate(3e-13, 1.0, 20e6, 1e-13), 4.0e7, 1e-6);
    EXPECT_EQ(mec_rate(0.0, 1.0, 20e6, 1e-13), 0.0);
    EXPECT_NEAR(mec_rate(1e-13, 1.0, 20e6, 1e-13), 2.0e7, 1e-6);
}

TEST(Rates, StrictlyIncreasing) {
    double prev = -1.0;
    for (double p = 0.1; p < 10.0; p *= 1.5) {
        const double r = device_rate(p, 2.0, 1e6, 1.0);
        EXPECT_GT(r, prev);
        EXPECT_GT(device_rate(p, 2.0, 2e6, 1.0), r);
        EXPECT_GT(mec_rate(p * 1.5, 0.5, 1e6, 1.0), mec_rate(p, 0.5, 1e6, 1.0));
        prev = r;
    }
}
