#pragma once

// Desk-scale federated learning: synthetic class-skewed Gaussian data,
// multinomial logistic regression trained by mini-batch SGD, and the
// two-tier (device -> MEC -> CU) weighted aggregation.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "hetfl/common.hpp"
#include "hetfl/data_split.hpp"

namespace hetfl::fl {

/// Flat parameters of a C-class softmax classifier over d features, laid out
/// class-major as C rows of (d weights, bias).
struct ModelWeights {
    std::size_t classes = 0;
    std::size_t features = 0;
    Eigen::VectorXd w;

    static ModelWeights zeros(std::size_t classes, std::size_t features) {
        return {classes, features, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(classes * (features + 1)))};
    }

    [[nodiscard]] std::size_t size() const { return static_cast<std::size_t>(w.size()); }

    [[nodiscard]] auto as_matrix() const {
        return Eigen::Map<const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(
            w.data(), static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(features + 1));
    }
};

struct LocalDataset {
    Eigen::MatrixXd features;  // n x d
    std::vector<int> labels;

    [[nodiscard]] std::size_t size() const { return labels.size(); }
};

struct SyntheticData {
    std::vector<LocalDataset> devices;
    LocalDataset test;
};

/// Class centres on scaled coordinate axes (pairwise distance `separation`)
/// when C <= d, random Gaussian directions otherwise.
inline Eigen::MatrixXd make_class_means(std::size_t classes, std::size_t features, double separation,
                                        Rng& rng) {
    Eigen::MatrixXd means = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(classes),
                                                  static_cast<Eigen::Index>(features));
    if (classes <= features) {
        for (std::size_t c = 0; c < classes; ++c)
            means(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(c)) = separation / std::sqrt(2.0);
        return means;
    }
    std::normal_distribution<double> n(0.0, 1.0);
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        for (Eigen::Index j = 0; j < means.cols(); ++j) means(c, j) = n(rng);
        means.row(c) *= separation / std::sqrt(2.0) / means.row(c).norm();
    }
    return means;
}

inline LocalDataset sample_blobs(std::span<const std::int64_t> per_class, const Eigen::MatrixXd& means,
                                 double noise_std, Rng& rng) {
    const std::int64_t n = std::accumulate(per_class.begin(), per_class.end(), std::int64_t{0});
    LocalDataset ds{Eigen::MatrixXd(n, means.cols()), {}};
    ds.labels.reserve(static_cast<std::size_t>(n));
    std::normal_distribution<double> z(0.0, noise_std);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < per_class.size(); ++c)
        for (std::int64_t i = 0; i < per_class[c]; ++i, ++row) {
            for (Eigen::Index j = 0; j < means.cols(); ++j)
                ds.features(row, j) = means(static_cast<Eigen::Index>(c), j) + z(rng);
            ds.labels.push_back(static_cast<int>(c));
        }
    return ds;
}

/// Device k receives exactly S(c, k) samples of class c; the test set holds
/// `test_per_class` samples of every class.
inline SyntheticData synth_datasets(const DataSplit& split, const Eigen::MatrixXd& class_means,
                                    double noise_std, std::int64_t test_per_class, Rng& rng) {
    if (!(noise_std > 0.0)) fail(ErrorKind::Config, "noise_std must be positive");
    if (static_cast<std::size_t>(class_means.rows()) != split.classes())
        fail(ErrorKind::Config, "one class mean per class required");
    SyntheticData out;
    std::vector<std::int64_t> counts(split.classes());
    for (std::size_t k = 0; k < split.devices(); ++k) {
        for (std::size_t c = 0; c < split.classes(); ++c) counts[c] = split.count(c, k);
        out.devices.push_back(sample_blobs(counts, class_means, noise_std, rng));
    }
    std::fill(counts.begin(), counts.end(), test_per_class);
    out.test = sample_blobs(counts, class_means, noise_std, rng);
    return out;
}

/// Row-wise softmax of X W^T + b.
inline Eigen::MatrixXd predict_proba(const ModelWeights& w, const Eigen::MatrixXd& x) {
    const auto m = w.as_matrix();
    const auto d = static_cast<Eigen::Index>(w.features);
    Eigen::MatrixXd logits = x * m.leftCols(d).transpose();
    logits.rowwise() += m.col(d).transpose();
    for (Eigen::Index i = 0; i < logits.rows(); ++i) {
        const double mx = logits.row(i).maxCoeff();
        logits.row(i) = (logits.row(i).array() - mx).exp();
        logits.row(i) /= logits.row(i).sum();
    }
    return logits;
}

inline constexpr double kLogFloor = 1e-12;

/// sum_c -p(c) * mean over samples of class c of log d_c(x). Classes with no
/// evaluation samples contribute nothing.
inline double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels,
                            std::span<const double> p) {
    std::vector<double> sum(p.size(), 0.0);
    std::vector<std::int64_t> n(p.size(), 0);
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const auto c = static_cast<std::size_t>(labels[i]);
        sum[c] += std::log(std::max(probs(static_cast<Eigen::Index>(i), labels[i]), kLogFloor));
        ++n[c];
    }
    double loss = 0.0;
    for (std::size_t c = 0; c < p.size(); ++c)
        if (n[c] > 0) loss -= p[c] * sum[c] / static_cast<double>(n[c]);
    return loss;
}

/// Mean softmax cross-entropy over the given rows and its gradient in the
/// flat layout of ModelWeights.
inline double loss_and_gradient(const ModelWeights& w, const Eigen::MatrixXd& x, std::span<const int> y,
                                Eigen::VectorXd* grad) {
    const Eigen::MatrixXd p = predict_proba(w, x);
    const auto n = static_cast<double>(y.size());
    double loss = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i)
        loss -= std::log(std::max(p(static_cast<Eigen::Index>(i), y[i]), kLogFloor));
    loss /= n;
    if (grad) {
        Eigen::MatrixXd delta = p;
        for (std::size_t i = 0; i < y.size(); ++i) delta(static_cast<Eigen::Index>(i), y[i]) -= 1.0;
        delta /= n;
        const auto d = static_cast<Eigen::Index>(w.features);
        Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> g(
            static_cast<Eigen::Index>(w.classes), d + 1);
        g.leftCols(d) = delta.transpose() * x;
        g.col(d) = delta.colwise().sum().transpose();
        *grad = Eigen::Map<const Eigen::VectorXd>(g.data(), g.size());
    }
    return loss;
}

struct SgdOptions {
    int epochs = 1;
    double lr = 0.1;
    std::size_t batch = 32;
};

/// Mini-batch SGD on softmax cross-entropy with a reshuffle every epoch.
inline ModelWeights local_train(ModelWeights w, const LocalDataset& data, const SgdOptions& opt, Rng& rng) {
    if (!(opt.lr > 0.0)) fail(ErrorKind::Config, "learning rate must be positive");
    const std::size_t n = data.size();
    if (n == 0 || opt.epochs <= 0) return w;
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    const std::size_t batch = std::max<std::size_t>(1, opt.batch);
    Eigen::MatrixXd xb;
    std::vector<int> yb;
    Eigen::VectorXd grad;
    for (int e = 0; e < opt.epochs; ++e) {
        for (std::size_t i = n; i-- > 1;) {
            std::uniform_int_distribution<std::size_t> pick(0, i);
            std::swap(order[i], order[pick(rng)]);
        }
        for (std::size_t start = 0; start < n; start += batch) {
            const std::size_t len = std::min(batch, n - start);
            xb.resize(static_cast<Eigen::Index>(len), data.features.cols());
            yb.resize(len);
            for (std::size_t i = 0; i < len; ++i) {
                xb.row(static_cast<Eigen::Index>(i)) = data.features.row(static_cast<Eigen::Index>(order[start + i]));
                yb[i] = data.labels[order[start + i]];
            }
            const double loss = loss_and_gradient(w, xb, yb, &grad);
            w.w -= opt.lr * grad;
            if (!std::isfinite(loss) || !w.w.allFinite()) fail(ErrorKind::Numeric, "learning rate too high");
        }
    }
    return w;
}

/// sum_k (n_k / sum_j n_j) w_k, accumulated in input order.
inline ModelWeights weighted_average(std::span<const ModelWeights> weights, std::span<const double> sizes) {
    if (weights.empty()) fail(ErrorKind::Numeric, "MEC has no devices this round");
    if (weights.size() != sizes.size()) fail(ErrorKind::Numeric, "one size per weight vector required");
    const double total = std::accumulate(sizes.begin(), sizes.end(), 0.0);
    if (!(total > 0.0)) fail(ErrorKind::Numeric, "aggregation sizes sum to zero");
    ModelWeights out{weights[0].classes, weights[0].features, Eigen::VectorXd::Zero(weights[0].w.size())};
    for (std::size_t i = 0; i < weights.size(); ++i) {
        if (weights[i].w.size() != out.w.size()) fail(ErrorKind::Numeric, "weight vectors differ in length");
        out.w += (sizes[i] / total) * weights[i].w;
    }
    return out;
}

/// Aggregation at an MEC over its devices' local models, weighted by |D_k|.
inline ModelWeights mec_aggregate(std::span<const ModelWeights> weights, std::span<const double> sizes) {
    return weighted_average(weights, sizes);
}

/// Aggregation at the CU over MEC models, weighted by each MEC's union size.
inline ModelWeights cu_aggregate(std::span<const ModelWeights> weights, std::span<const double> sizes) {
    return weighted_average(weights, sizes);
}

struct Evaluation {
    double accuracy = 0.0;
    double loss = 0.0;
};

/// Argmax accuracy and mean cross-entropy on a held-out set.
inline Evaluation evaluate(const ModelWeights& w, const LocalDataset& test) {
    if (test.size() == 0) fail(ErrorKind::Numeric, "empty evaluation set");
    const Eigen::MatrixXd p = predict_proba(w, test.features);
    std::size_t hits = 0;
    double loss = 0.0;
    for (std::size_t i = 0; i < test.size(); ++i) {
        Eigen::Index arg = 0;
        p.row(static_cast<Eigen::Index>(i)).maxCoeff(&arg);
        if (arg == test.labels[i]) ++hits;
        loss -= std::log(std::max(p(static_cast<Eigen::Index>(i), test.labels[i]), kLogFloor));
    }
    const auto n = static_cast<double>(test.size());
    return {static_cast<double>(hits) / n, loss / n};
}

}  // namespace hetfl::fl
