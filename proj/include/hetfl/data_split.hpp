#pragma once

#include <algorithm>
#include <cstdint>
#include <numeric>
#include <random>
#include <vector>

#include <Eigen/Core>

#include "hetfl/common.hpp"

namespace hetfl {

using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Samples per class (rows) per device (columns). Every device owns data.
class DataSplit {
public:
    DataSplit() = default;

    explicit DataSplit(CountMatrix s) : s_(std::move(s)) {
        if (s_.rows() == 0) fail(ErrorKind::Config, "data split needs at least one class");
        if ((s_.array() < 0).any()) fail(ErrorKind::Config, "data split has negative counts");
        for (Eigen::Index k = 0; k < s_.cols(); ++k)
            if (s_.col(k).sum() <= 0) fail(ErrorKind::Config, "device owns no data");
    }

    [[nodiscard]] std::size_t classes() const { return static_cast<std::size_t>(s_.rows()); }
    [[nodiscard]] std::size_t devices() const { return static_cast<std::size_t>(s_.cols()); }
    [[nodiscard]] std::int64_t count(std::size_t c, std::size_t k) const {
        return s_(static_cast<Eigen::Index>(c), static_cast<Eigen::Index>(k));
    }
    [[nodiscard]] std::int64_t device_size(std::size_t k) const {
        return s_.col(static_cast<Eigen::Index>(k)).sum();
    }
    [[nodiscard]] std::int64_t total() const { return s_.sum(); }
    [[nodiscard]] const CountMatrix& matrix() const { return s_; }

    /// p(c): row sums over the grand total.
    [[nodiscard]] std::vector<double> global_distribution() const {
        std::vector<double> p(classes());
        const double n = static_cast<double>(total());
        for (std::size_t c = 0; c < p.size(); ++c)
            p[c] = static_cast<double>(s_.row(static_cast<Eigen::Index>(c)).sum()) / n;
        return p;
    }

private:
    CountMatrix s_;
};

/// Class-skewed split: each device draws `classes_per_device` distinct classes
/// and a uniform count in [min_count, max_count] for each of them.
inline DataSplit make_skewed_split(std::size_t classes, std::size_t devices,
                                   std::size_t classes_per_device, std::int64_t min_count,
                                   std::int64_t max_count, Rng& rng) {
    if (classes_per_device == 0 || classes_per_device > classes)
        fail(ErrorKind::Config, "classes_per_device must lie in [1, C]");
    if (min_count < 1 || max_count < min_count) fail(ErrorKind::Config, "bad per-class sample counts");
    CountMatrix s = CountMatrix::Zero(static_cast<Eigen::Index>(classes),
                                      static_cast<Eigen::Index>(devices));
    std::vector<std::size_t> order(classes);
    std::uniform_int_distribution<std::int64_t> cnt(min_count, max_count);
    for (std::size_t k = 0; k < devices; ++k) {
        std::iota(order.begin(), order.end(), std::size_t{0});
        // partial Fisher-Yates
        for (std::size_t i = 0; i < classes_per_device; ++i) {
            std::uniform_int_distribution<std::size_t> pick(i, classes - 1);
            std::swap(order[i], order[pick(rng)]);
        }
        for (std::size_t i = 0; i < classes_per_device; ++i)
            s(static_cast<Eigen::Index>(order[i]), static_cast<Eigen::Index>(k)) = cnt(rng);
    }
    return DataSplit(std::move(s));
}

}  // namespace hetfl
