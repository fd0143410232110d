#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace tnvae {

struct SeriesMeta {
    std::string name;
    double noise_level = 0;
    std::uint64_t seed = 0;
};

/// Time-ordered N x D feature matrix with optional per-row ground-truth labels.
/// Immutable once built. `time_offset` is the global time index of row 0, so
/// slices keep their position in the parent series.
class SeriesMatrix {
public:
    SeriesMatrix() = default;
    SeriesMatrix(Eigen::MatrixXd values, std::optional<std::vector<int>> labels, SeriesMeta meta = {},
                 Eigen::Index time_offset = 0);

    const Eigen::MatrixXd& values() const { return values_; }
    const std::optional<std::vector<int>>& labels() const { return labels_; }
    bool has_labels() const { return labels_.has_value(); }
    const SeriesMeta& meta() const { return meta_; }
    Eigen::Index rows() const { return values_.rows(); }
    Eigen::Index dim() const { return values_.cols(); }
    Eigen::Index time_offset() const { return time_offset_; }

    /// Rows [begin, end) as a new series; labels and meta carried over.
    SeriesMatrix slice(Eigen::Index begin, Eigen::Index end) const;

    /// Rows reordered by `order` (a permutation); time offset resets to 0.
    SeriesMatrix permuted(const std::vector<Eigen::Index>& order, const std::string& name_suffix) const;

    /// Content hash over shape, value bits and labels.
    std::uint64_t content_hash() const;

private:
    Eigen::MatrixXd values_;
    std::optional<std::vector<int>> labels_;
    SeriesMeta meta_;
    Eigen::Index time_offset_ = 0;
};

// ---------------------------------------------------------------------------
// Spiral

struct SpiralConfig {
    Eigen::Index n_points = 5000;
    double turns = 3.0;
    /// Noise std as a fraction of each clean coordinate's std.
    double noise_sigma = 0.2;
    Eigen::Index embed_dim = 31;
    /// Drives the noise only.
    std::uint64_t seed = 1;
    /// Drives the embedding map only, so noise studies share one manifold.
    std::uint64_t embedding_seed = 2024;

    void validate() const;
};

/// Fixed random nonlinear map R^2 -> R^D: x = W2 tanh(W1 p + b1) + b2.
struct SpiralEmbedding {
    Eigen::MatrixXd w1; // D x 2
    Eigen::VectorXd b1;
    Eigen::MatrixXd w2; // D x D
    Eigen::VectorXd b2;

    static SpiralEmbedding make(Eigen::Index embed_dim, std::uint64_t seed);
    Eigen::VectorXd apply(const Eigen::Vector2d& p) const;
};

struct SpiralData {
    SeriesMatrix series;
    Eigen::MatrixXd coords;      ///< N x 2 ground-truth positions on the spiral
    Eigen::VectorXd arc_length;  ///< N, arc length from the innermost point
    Eigen::MatrixXd clean;       ///< N x D embedded points before noise
    SpiralEmbedding embedding;
};

/// Archimedean spiral arc length from 0 to theta for r = theta.
double spiral_arc_length(double theta);

/// Inverse of spiral_arc_length by Newton iteration (tolerance 1e-10).
double spiral_theta_at(double arc_length);

SpiralData gen_spiral(const SpiralConfig& cfg);

// ---------------------------------------------------------------------------
// Hidden Markov model with Gaussian emissions

struct HmmConfig {
    Eigen::Index n_states = 3;
    Eigen::MatrixXd transition; ///< row-stochastic n x n
    Eigen::MatrixXd means;      ///< n x D
    Eigen::MatrixXd variances;  ///< n x D, positive
    Eigen::Index n_points = 20000;
    std::uint64_t seed = 1;

    void validate() const;
};

/// Stand-in parameters for three wake/REM/SWS-like states: self-transition
/// 0.98, 0.95, 0.98; per-dimension stds log-uniform over [0.5, max_std]; means
/// scaled so the closest pair sits `separation` average stds apart.
HmmConfig default_hmm_config(Eigen::Index n_points, std::uint64_t seed, Eigen::Index dim = 31,
                             std::uint64_t geometry_seed = 7, double separation = 3.0, double max_std = 3.0);

/// Stationary distribution of a row-stochastic matrix (left eigenvector for 1).
Eigen::VectorXd stationary_distribution(const Eigen::MatrixXd& transition);

SeriesMatrix gen_hmm(const HmmConfig& cfg);

/// Rows in a seeded random order with labels carried along, which removes all
/// temporal structure while keeping the marginal distribution.
SeriesMatrix shuffle_time(const SeriesMatrix& series, std::uint64_t seed);

// ---------------------------------------------------------------------------
// CSV ingestion

/// Reads a header + one row per time step. With `has_labels` the last column
/// holds integer labels.
SeriesMatrix load_csv(const std::filesystem::path& path, bool has_labels);

/// Writes columns f0..f{D-1} (+ `label`). Values round-trip bit-exactly.
void write_csv(const std::filesystem::path& path, const SeriesMatrix& series);

/// Detects a trailing `label` header column.
bool csv_has_label_column(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Splits

/// Pair t denotes the adjacent rows (t, t + 1), in local row indices.
struct SeriesSplit {
    std::vector<Eigen::Index> train_pairs;
    std::vector<Eigen::Index> val_pairs;
    Eigen::Index test_begin = 0; ///< first row of the contiguous tail segment
    Eigen::Index test_end = 0;
};

/// Reserves the last ceil(test_fraction * N) rows as the ordered test segment,
/// then shuffles the remaining adjacent pairs by seed into train / val.
SeriesSplit split_series(const SeriesMatrix& series, std::uint64_t seed, double val_fraction, double test_fraction);

} // namespace tnvae
