#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "bitweight/core.hpp"
#include "bitweight/rng.hpp"

namespace bitweight {

/// N x D real features, one sample per row, with optional per-row labels.
struct FeatureMatrix {
    Eigen::MatrixXd values;
    std::vector<ClassId> labels;  // empty, or one per row

    std::size_t rows() const noexcept { return static_cast<std::size_t>(values.rows()); }
    std::size_t dims() const noexcept { return static_cast<std::size_t>(values.cols()); }
    bool has_labels() const noexcept { return !labels.empty(); }

    void validate() const {
        if (values.cols() < 1) throw std::invalid_argument("features need at least one column");
        if (!labels.empty() && labels.size() != rows()) {
            throw std::invalid_argument("label count does not match feature rows");
        }
        if (!values.allFinite()) throw std::invalid_argument("features contain non-finite values");
    }
};

enum class HashKind : std::uint32_t { Lsh = 0, Itq = 1 };

inline const char* to_string(HashKind kind) { return kind == HashKind::Lsh ? "lsh" : "itq"; }

/// Bit k of x is 1 iff ((x - mean) * projection * rotation)_k >= 0.
struct HashModel {
    HashKind kind = HashKind::Lsh;
    std::uint64_t seed = 0;
    Eigen::VectorXd mean;        // D
    Eigen::MatrixXd projection;  // D x K
    Eigen::MatrixXd rotation;    // K x K, orthogonal

    std::size_t dims() const noexcept { return static_cast<std::size_t>(projection.rows()); }
    std::size_t bits() const noexcept { return static_cast<std::size_t>(projection.cols()); }

    void validate() const {
        const auto d = projection.rows();
        const auto k = projection.cols();
        if (d < 1) throw std::invalid_argument("hash model has no input dimensions");
        check_bit_length(static_cast<std::size_t>(k));
        if (mean.size() != d) throw std::invalid_argument("hash model mean has wrong dimension");
        if (rotation.rows() != k || rotation.cols() != k) {
            throw std::invalid_argument("hash model rotation must be K x K");
        }
        if (!mean.allFinite() || !projection.allFinite() || !rotation.allFinite()) {
            throw std::invalid_argument("hash model contains non-finite values");
        }
        for (Eigen::Index c = 0; c < k; ++c) {
            if (projection.col(c).cwiseAbs().maxCoeff() == 0.0) {
                throw std::invalid_argument("projection column " + std::to_string(c) + " is all zero");
            }
        }
        const double err = (rotation.transpose() * rotation - Eigen::MatrixXd::Identity(k, k)).norm();
        if (err >= 1e-8) throw std::invalid_argument("hash model rotation is not orthogonal");
    }
};

struct HashOptions {
    /// Divide centred features by their per-column standard deviation before
    /// projecting. The scaling is folded into the stored projection.
    bool unit_variance = false;
};

namespace detail {

inline Eigen::VectorXd column_scale(const Eigen::MatrixXd& centered, bool unit_variance) {
    Eigen::VectorXd scale = Eigen::VectorXd::Ones(centered.cols());
    if (!unit_variance) return scale;
    const double n = static_cast<double>(centered.rows());
    for (Eigen::Index c = 0; c < centered.cols(); ++c) {
        const double sd = std::sqrt(centered.col(c).squaredNorm() / n);
        if (sd > 0.0) scale(c) = 1.0 / sd;
    }
    return scale;
}

inline Eigen::MatrixXd gaussian_matrix(Rng& rng, Eigen::Index rows, Eigen::Index cols) {
    Eigen::MatrixXd m(rows, cols);
    // Column-major fill order is part of the determinism contract.
    for (Eigen::Index c = 0; c < cols; ++c) {
        for (Eigen::Index r = 0; r < rows; ++r) m(r, c) = rng.normal();
    }
    return m;
}

inline Eigen::MatrixXd random_orthogonal(Rng& rng, Eigen::Index k) {
    const Eigen::MatrixXd g = gaussian_matrix(rng, k, k);
    Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(k, k);
    const Eigen::MatrixXd r = qr.matrixQR().triangularView<Eigen::Upper>();
    for (Eigen::Index c = 0; c < k; ++c) {
        if (r(c, c) < 0.0) q.col(c) = -q.col(c);
    }
    return q;
}

inline void require_trainable(const FeatureMatrix& features, std::size_t bits) {
    features.validate();
    if (features.rows() == 0) throw std::invalid_argument("cannot train a hash model on empty features");
    check_bit_length(bits);
}

}  // namespace detail

/// Random-projection hashing: mean-centred features projected on i.i.d.
/// standard normal directions.
inline HashModel train_lsh(const FeatureMatrix& features, std::size_t bits, std::uint64_t seed,
                           const HashOptions& options = {}) {
    detail::require_trainable(features, bits);
    const auto d = static_cast<Eigen::Index>(features.dims());
    const auto k = static_cast<Eigen::Index>(bits);

    HashModel model;
    model.kind = HashKind::Lsh;
    model.seed = seed;
    model.mean = features.values.colwise().mean().transpose();
    const Eigen::MatrixXd centered = features.values.rowwise() - model.mean.transpose();
    const Eigen::VectorXd scale = detail::column_scale(centered, options.unit_variance);

    Rng rng(seed);
    model.projection = scale.asDiagonal() * detail::gaussian_matrix(rng, d, k);
    model.rotation = Eigen::MatrixXd::Identity(k, k);
    return model;
}

struct ItqTraining {
    HashModel model;
    /// ||B - V R||_F^2 at each iteration, measured after binarisation and
    /// before the rotation update.
    std::vector<double> quantization_loss;
};

/// Iterative quantization: PCA to K dimensions, then alternate between
/// binarising and solving the orthogonal Procrustes problem for the rotation.
inline ItqTraining train_itq_traced(const FeatureMatrix& features, std::size_t bits, int iters,
                                    std::uint64_t seed, const HashOptions& options = {}) {
    detail::require_trainable(features, bits);
    if (bits > features.dims()) {
        throw std::invalid_argument("ITQ needs K <= D (K=" + std::to_string(bits) +
                                    ", D=" + std::to_string(features.dims()) + ")");
    }
    if (features.rows() <= bits) throw std::invalid_argument("ITQ needs more samples than bits");
    if (iters < 1) throw std::invalid_argument("ITQ needs at least one iteration");

    const auto k = static_cast<Eigen::Index>(bits);
    const double n = static_cast<double>(features.rows());

    ItqTraining out;
    HashModel& model = out.model;
    model.kind = HashKind::Itq;
    model.seed = seed;
    model.mean = features.values.colwise().mean().transpose();
    Eigen::MatrixXd centered = features.values.rowwise() - model.mean.transpose();
    const Eigen::VectorXd scale = detail::column_scale(centered, options.unit_variance);
    centered = centered * scale.asDiagonal();

    const Eigen::MatrixXd cov = (centered.transpose() * centered) / n;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
    if (eig.info() != Eigen::Success) throw std::invalid_argument("covariance eigendecomposition failed");

    const Eigen::VectorXd& evals = eig.eigenvalues();  // ascending
    const double top = std::max(evals.maxCoeff(), 0.0);
    const double floor = top * 1e-12;
    Eigen::Index positive = 0;
    for (Eigen::Index i = 0; i < evals.size(); ++i) {
        if (evals(i) > floor && evals(i) > 0.0) ++positive;
    }
    if (positive < k) {
        throw std::invalid_argument("covariance has only " + std::to_string(positive) +
                                    " positive eigenvalues, fewer than K=" + std::to_string(bits));
    }

    Eigen::MatrixXd pca(cov.rows(), k);
    for (Eigen::Index c = 0; c < k; ++c) {
        Eigen::VectorXd v = eig.eigenvectors().col(evals.size() - 1 - c);
        Eigen::Index arg;
        v.cwiseAbs().maxCoeff(&arg);
        if (v(arg) < 0.0) v = -v;  // fix the sign so runs are reproducible
        pca.col(c) = v;
    }

    const Eigen::MatrixXd projected = centered * pca;  // N x K
    Rng rng(seed);
    Eigen::MatrixXd rotation = detail::random_orthogonal(rng, k);

    out.quantization_loss.reserve(static_cast<std::size_t>(iters));
    for (int it = 0; it < iters; ++it) {
        const Eigen::MatrixXd z = projected * rotation;
        const Eigen::MatrixXd b = z.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
        out.quantization_loss.push_back((b - z).squaredNorm());

        const Eigen::MatrixXd c = b.transpose() * projected;  // K x K
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeFullU | Eigen::ComputeFullV);
        rotation = svd.matrixV() * svd.matrixU().transpose();
    }

    model.projection = scale.asDiagonal() * pca;
    model.rotation = rotation;
    return out;
}

inline HashModel train_itq(const FeatureMatrix& features, std::size_t bits, int iters, std::uint64_t seed,
                           const HashOptions& options = {}) {
    return train_itq_traced(features, bits, iters, seed, options).model;
}

/// Applies the hash functions to every row. Labels are carried over when
/// present, otherwise every code gets label 0.
inline CodeDatabase encode(const HashModel& model, const FeatureMatrix& features) {
    model.validate();
    features.validate();
    if (features.dims() != model.dims()) {
        throw std::invalid_argument("feature dimension " + std::to_string(features.dims()) +
                                    " does not match model dimension " + std::to_string(model.dims()));
    }
    const std::size_t bits = model.bits();
    const Eigen::MatrixXd combined = model.projection * model.rotation;  // D x K
    const Eigen::MatrixXd z = (features.values.rowwise() - model.mean.transpose()) * combined;

    CodeDatabase db(bits);
    BinaryCode code(bits);
    for (Eigen::Index r = 0; r < z.rows(); ++r) {
        for (std::size_t k = 0; k < bits; ++k) code.set(k, z(r, static_cast<Eigen::Index>(k)) >= 0.0);
        db.push_back(code, features.has_labels() ? features.labels[static_cast<std::size_t>(r)] : ClassId{0});
    }
    return db;
}

}  // namespace bitweight
