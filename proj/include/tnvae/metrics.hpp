#pragma once

// Representation-quality metrics over latent encodings: Neighbor Loss,
// silhouette, Procrustes disparity, per-cluster moments, the Gaussian
// random-walk log-likelihood and rank/linear correlations.

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numbers>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "tnvae/error.hpp"
#include "tnvae/rng.hpp"

namespace tnvae {

/// Time-indexed latent representation of an evaluation set: row i of z is the
/// encoding assigned to time step time_indices[i].
class EncodingMatrix {
public:
    EncodingMatrix() = default;

    EncodingMatrix(Eigen::MatrixXd z, std::vector<Eigen::Index> time_indices, std::string source_model = {})
        : z_(std::move(z)), time_indices_(std::move(time_indices)), source_model_(std::move(source_model))
    {
        if (static_cast<std::size_t>(z_.rows()) != time_indices_.size())
            throw ShapeError("encoding has " + std::to_string(z_.rows()) + " rows but " +
                             std::to_string(time_indices_.size()) + " time indices");
        for (std::size_t i = 1; i < time_indices_.size(); ++i)
            if (time_indices_[i] <= time_indices_[i - 1])
                throw UsageError("encoding time indices must be strictly increasing");
        if (!z_.allFinite())
            throw NumericError("non-finite encoding row");
    }

    const Eigen::MatrixXd& z() const { return z_; }
    const std::vector<Eigen::Index>& time_indices() const { return time_indices_; }
    const std::string& source_model() const { return source_model_; }
    Eigen::Index rows() const { return z_.rows(); }
    Eigen::Index dim() const { return z_.cols(); }

private:
    Eigen::MatrixXd z_;
    std::vector<Eigen::Index> time_indices_;
    std::string source_model_;
};

// ---------------------------------------------------------------------------
// Neighbor Loss

struct NeighborLossResult {
    double value = 0;     ///< sum over adjacent pairs of |z_{t+1} - z_t| / zbar
    double per_pair = 0;  ///< value / pairs
    Eigen::Index pairs = 0;
    double mean_norm = 0; ///< zbar, mean row norm over all rows
};

/// Only rows whose time indices differ by exactly one form a pair; the mean
/// norm runs over every row.
template <typename Derived>
NeighborLossResult neighbor_loss(const Eigen::MatrixBase<Derived>& z, std::span<const Eigen::Index> time_indices)
{
    if (static_cast<std::size_t>(z.rows()) != time_indices.size())
        throw ShapeError("neighbor_loss: row count != index count");
    if (z.rows() < 2)
        throw UsageError("neighbor_loss needs at least two rows");

    NeighborLossResult r;
    r.mean_norm = z.rowwise().norm().sum() / static_cast<double>(z.rows());
    double displacement = 0;
    for (Eigen::Index i = 0; i + 1 < z.rows(); ++i) {
        if (time_indices[i + 1] - time_indices[i] != 1)
            continue;
        displacement += (z.row(i + 1) - z.row(i)).norm();
        ++r.pairs;
    }
    if (r.pairs == 0)
        throw UsageError("neighbor_loss: no temporally adjacent rows");
    if (!(r.mean_norm > 0))
        throw NumericError("neighbor_loss: degenerate encoding (all rows at the origin)");
    r.value = displacement / r.mean_norm;
    r.per_pair = r.value / static_cast<double>(r.pairs);
    return r;
}

inline NeighborLossResult neighbor_loss(const EncodingMatrix& enc)
{
    return neighbor_loss(enc.z(), std::span<const Eigen::Index>(enc.time_indices()));
}

/// Sum of squared displacements over temporally adjacent rows, with the pair count.
template <typename Derived>
std::pair<double, Eigen::Index> sum_squared_steps(const Eigen::MatrixBase<Derived>& z,
                                                  std::span<const Eigen::Index> time_indices)
{
    if (static_cast<std::size_t>(z.rows()) != time_indices.size())
        throw ShapeError("row count != index count");
    double sum = 0;
    Eigen::Index n = 0;
    for (Eigen::Index i = 0; i + 1 < z.rows(); ++i) {
        if (time_indices[i + 1] - time_indices[i] != 1)
            continue;
        sum += (z.row(i + 1) - z.row(i)).squaredNorm();
        ++n;
    }
    return {sum, n};
}

// ---------------------------------------------------------------------------
// Random-walk log-likelihood

enum class RandomWalkNormalization {
    /// -(n/2) log 2pi - n log sigma - (1/(2 sigma)) sum |dz|^2, for any d.
    closed_form,
    /// Exact log density of n isotropic Gaussian steps with per-coordinate
    /// variance sigma: -(n d / 2) log(2 pi sigma) - (1/(2 sigma)) sum |dz|^2.
    exact_density,
};

/// Log-likelihood of the adjacent steps of a latent trajectory under a
/// Gaussian random walk with variance `sigma`. Both normalizations share the
/// quadratic term, so they rank trajectories identically.
template <typename Derived>
double random_walk_loglik(const Eigen::MatrixBase<Derived>& z, std::span<const Eigen::Index> time_indices,
                          double sigma, RandomWalkNormalization norm = RandomWalkNormalization::closed_form)
{
    if (!(sigma > 0))
        throw UsageError("random_walk_loglik: sigma must be positive");
    if (z.rows() < 2)
        throw UsageError("random_walk_loglik needs at least two rows");
    const auto [quad, pairs] = sum_squared_steps(z, time_indices);
    if (pairs == 0)
        throw UsageError("random_walk_loglik: no temporally adjacent rows");
    const double n = static_cast<double>(pairs);
    const double quadratic = quad / (2.0 * sigma);
    if (norm == RandomWalkNormalization::closed_form)
        return -0.5 * n * std::log(2.0 * std::numbers::pi) - n * std::log(sigma) - quadratic;
    const double d = static_cast<double>(z.cols());
    return -0.5 * n * d * std::log(2.0 * std::numbers::pi * sigma) - quadratic;
}

inline double random_walk_loglik(const EncodingMatrix& enc, double sigma,
                                 RandomWalkNormalization norm = RandomWalkNormalization::closed_form)
{
    return random_walk_loglik(enc.z(), std::span<const Eigen::Index>(enc.time_indices()), sigma, norm);
}

// ---------------------------------------------------------------------------
// Silhouette

namespace detail {

/// Maps arbitrary labels onto 0..k-1 in ascending label order.
inline std::pair<std::vector<int>, int> compact_labels(std::span<const int> labels)
{
    std::map<int, int> ids;
    for (int l : labels)
        ids.emplace(l, 0);
    int next = 0;
    for (auto& [label, id] : ids)
        id = next++;
    std::vector<int> out(labels.size());
    for (std::size_t i = 0; i < labels.size(); ++i)
        out[i] = ids[labels[i]];
    return {std::move(out), next};
}

} // namespace detail

/// Per-sample silhouette values (Euclidean). Points in singleton clusters get 0.
template <typename Derived>
Eigen::VectorXd silhouette_samples(const Eigen::MatrixBase<Derived>& points, std::span<const int> labels)
{
    const Eigen::Index n = points.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw ShapeError("silhouette: label count != point count");
    auto [ids, k] = detail::compact_labels(labels);
    if (k < 2)
        throw UsageError("silhouette needs at least two clusters");

    std::vector<Eigen::Index> counts(k, 0);
    for (int id : ids)
        ++counts[id];

    const Eigen::MatrixXd p = points.template cast<double>();
    Eigen::VectorXd s(n);
    Eigen::VectorXd dist(n);
    std::vector<double> sums(k);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int own = ids[i];
        if (counts[own] < 2) {
            s(i) = 0;
            continue;
        }
        dist = (p.rowwise() - p.row(i)).rowwise().norm();
        std::fill(sums.begin(), sums.end(), 0.0);
        for (Eigen::Index j = 0; j < n; ++j)
            sums[ids[j]] += dist(j);
        const double a = sums[own] / static_cast<double>(counts[own] - 1);
        double b = std::numeric_limits<double>::infinity();
        for (int c = 0; c < k; ++c)
            if (c != own)
                b = std::min(b, sums[c] / static_cast<double>(counts[c]));
        const double denom = std::max(a, b);
        s(i) = denom > 0 ? (b - a) / denom : 0.0;
    }
    return s;
}

struct SilhouetteOptions {
    /// Above this many rows a seeded subsample of this size is scored.
    Eigen::Index max_rows = 20000;
    std::uint64_t seed = 0;
};

struct SilhouetteResult {
    double score = 0;
    bool subsampled = false;
    Eigen::Index rows_used = 0;
};

template <typename Derived>
SilhouetteResult silhouette(const Eigen::MatrixBase<Derived>& points, std::span<const int> labels,
                            SilhouetteOptions options = {})
{
    const Eigen::Index n = points.rows();
    if (static_cast<std::size_t>(n) != labels.size())
        throw ShapeError("silhouette: label count != point count");
    SilhouetteResult r;
    if (n <= options.max_rows) {
        r.rows_used = n;
        r.score = silhouette_samples(points, labels).mean();
        return r;
    }
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    std::iota(order.begin(), order.end(), Eigen::Index{0});
    RngStream rng = RngStream(options.seed).substream("silhouette");
    rng.shuffle(std::span<Eigen::Index>(order));
    order.resize(static_cast<std::size_t>(options.max_rows));
    std::sort(order.begin(), order.end());
    Eigen::MatrixXd sub(options.max_rows, points.cols());
    std::vector<int> sub_labels(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = points.row(order[i]).template cast<double>();
        sub_labels[i] = labels[order[i]];
    }
    r.subsampled = true;
    r.rows_used = options.max_rows;
    r.score = silhouette_samples(sub, sub_labels).mean();
    return r;
}

// ---------------------------------------------------------------------------
// Procrustes

/// Disparity after optimal translation, uniform scaling, rotation and
/// reflection: both configurations are centered and scaled to unit Frobenius
/// norm, then min over orthogonal R and s > 0 of |A' - s B' R|^2 equals
/// 1 - (sum of singular values of A'^T B')^2.
template <typename DerivedA, typename DerivedB>
double procrustes_distance(const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b)
{
    if (a.rows() != b.rows() || a.cols() != b.cols())
        throw ShapeError("procrustes: matrices differ in shape");
    if (a.rows() <= a.cols())
        throw UsageError("procrustes: need more rows than columns");

    Eigen::MatrixXd ac = a.template cast<double>();
    Eigen::MatrixXd bc = b.template cast<double>();
    ac.rowwise() -= ac.colwise().mean();
    bc.rowwise() -= bc.colwise().mean();
    const double na = ac.norm();
    const double nb = bc.norm();
    if (!(na > 0) || !(nb > 0))
        throw NumericError("procrustes: constant configuration");
    ac /= na;
    bc /= nb;
    const Eigen::MatrixXd cross = ac.transpose() * bc;
    const Eigen::JacobiSVD<Eigen::MatrixXd> svd(cross);
    const double trace = svd.singularValues().sum();
    return std::max(0.0, 1.0 - trace * trace);
}

/// Procrustes disparity between two models' encodings of the same evaluation set.
inline double encoding_distance(const EncodingMatrix& a, const EncodingMatrix& b)
{
    if (a.time_indices() != b.time_indices())
        throw UsageError("encoding_distance: encodings cover different time indices");
    if (a.dim() != b.dim())
        throw UsageError("encoding_distance: latent dimensions differ");
    return procrustes_distance(a.z(), b.z());
}

// ---------------------------------------------------------------------------
// Per-cluster moments

struct ClusterMoments {
    int label = 0;
    Eigen::Index count = 0;
    Eigen::VectorXd skew;             ///< per dimension, m3 / m2^1.5
    Eigen::VectorXd excess_kurtosis;  ///< per dimension, m4 / m2^2 - 3
    bool degenerate = false;          ///< some dimension had zero variance
};

struct MomentsSummary {
    std::vector<ClusterMoments> clusters;
    double mean_abs_skew = 0;
    double mean_excess_kurtosis = 0;
    bool excluded_degenerate = false;
};

/// Standardized third and fourth central moments per cluster and dimension.
/// Degenerate clusters are reported but left out of the aggregate means.
template <typename Derived>
MomentsSummary cluster_moments(const Eigen::MatrixBase<Derived>& points, std::span<const int> labels)
{
    if (static_cast<std::size_t>(points.rows()) != labels.size())
        throw ShapeError("cluster_moments: label count != point count");
    std::map<int, std::vector<Eigen::Index>> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
        members[labels[i]].push_back(static_cast<Eigen::Index>(i));

    MomentsSummary out;
    double skew_sum = 0, kurt_sum = 0;
    Eigen::Index terms = 0;
    for (const auto& [label, rows] : members) {
        if (rows.size() < 8)
            throw UsageError("cluster_moments: cluster " + std::to_string(label) + " has fewer than 8 points");
        const Eigen::Index m = static_cast<Eigen::Index>(rows.size());
        Eigen::MatrixXd c(m, points.cols());
        for (Eigen::Index i = 0; i < m; ++i)
            c.row(i) = points.row(rows[static_cast<std::size_t>(i)]).template cast<double>();
        c.rowwise() -= c.colwise().mean();
        const Eigen::ArrayXd m2 = c.array().square().colwise().mean();
        const Eigen::ArrayXd m3 = c.array().cube().colwise().mean();
        const Eigen::ArrayXd m4 = c.array().square().square().colwise().mean();

        ClusterMoments cm;
        cm.label = label;
        cm.count = m;
        cm.degenerate = !(m2 > 0.0).all();
        cm.skew = (m3 / m2.pow(1.5)).matrix();
        cm.excess_kurtosis = (m4 / m2.square() - 3.0).matrix();
        if (cm.degenerate) {
            out.excluded_degenerate = true;
        } else {
            skew_sum += cm.skew.cwiseAbs().sum();
            kurt_sum += cm.excess_kurtosis.sum();
            terms += cm.skew.size();
        }
        out.clusters.push_back(std::move(cm));
    }
    if (terms > 0) {
        out.mean_abs_skew = skew_sum / static_cast<double>(terms);
        out.mean_excess_kurtosis = kurt_sum / static_cast<double>(terms);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Correlations

struct CorrelationReport {
    double pearson = 0;
    double spearman = 0;
    std::size_t n = 0;
};

/// Ranks starting at 1; tied values share the average of their ranks.
inline std::vector<double> average_ranks(std::span<const double> x)
{
    std::vector<std::size_t> order(x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });
    std::vector<double> ranks(x.size());
    for (std::size_t i = 0; i < order.size();) {
        std::size_t j = i;
        while (j + 1 < order.size() && x[order[j + 1]] == x[order[i]])
            ++j;
        const double r = 0.5 * static_cast<double>(i + j) + 1.0;
        for (std::size_t k = i; k <= j; ++k)
            ranks[order[k]] = r;
        i = j + 1;
    }
    return ranks;
}

inline double pearson(std::span<const double> x, std::span<const double> y)
{
    const Eigen::Map<const Eigen::ArrayXd> xa(x.data(), static_cast<Eigen::Index>(x.size()));
    const Eigen::Map<const Eigen::ArrayXd> ya(y.data(), static_cast<Eigen::Index>(y.size()));
    const Eigen::ArrayXd dx = xa - xa.mean();
    const Eigen::ArrayXd dy = ya - ya.mean();
    const double sxx = dx.square().sum();
    const double syy = dy.square().sum();
    if (!(sxx > 0) || !(syy > 0))
        throw NumericError("correlation undefined: zero variance");
    return std::clamp((dx * dy).sum() / std::sqrt(sxx * syy), -1.0, 1.0);
}

inline CorrelationReport correlations(std::span<const double> x, std::span<const double> y)
{
    if (x.size() != y.size())
        throw ShapeError("correlations: length mismatch");
    if (x.size() < 3)
        throw UsageError("correlations need at least 3 samples");
    CorrelationReport r;
    r.n = x.size();
    r.pearson = pearson(x, y);
    const std::vector<double> rx = average_ranks(x);
    const std::vector<double> ry = average_ranks(y);
    r.spearman = pearson(rx, ry);
    return r;
}

} // namespace tnvae
