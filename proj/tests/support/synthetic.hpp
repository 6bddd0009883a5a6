#pragma once

#include <cstdint>

#include "bitweight/hashing.hpp"
#include "bitweight/rng.hpp"

namespace bitweight::oracle {

/// Isotropic Gaussian classes: class means drawn from N(0, spread^2 I), samples
/// from N(mean, I). Labels cycle through the classes.
inline FeatureMatrix gaussian_classes(std::size_t classes, std::size_t dims, std::size_t rows, double spread,
                                      std::uint64_t seed, std::size_t informative = 0) {
    if (informative == 0 || informative > dims) informative = dims;
    Rng rng(seed);
    Eigen::MatrixXd means(static_cast<Eigen::Index>(classes), static_cast<Eigen::Index>(dims));
    for (Eigen::Index c = 0; c < means.rows(); ++c) {
        for (Eigen::Index d = 0; d < means.cols(); ++d) {
            means(c, d) = static_cast<std::size_t>(d) < informative ? spread * rng.normal() : 0.0;
        }
    }
    FeatureMatrix fm;
    fm.values.resize(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(dims));
    for (std::size_t r = 0; r < rows; ++r) {
        const auto c = static_cast<ClassId>(r % classes);
        fm.labels.push_back(c);
        for (Eigen::Index d = 0; d < fm.values.cols(); ++d) {
            fm.values(static_cast<Eigen::Index>(r), d) = means(c, d) + rng.normal();
        }
    }
    return fm;
}

}  // namespace bitweight::oracle
