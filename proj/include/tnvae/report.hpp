#pragma once

#include <Eigen/Core>

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "tnvae/hyperparams.hpp"
#include "tnvae/metrics.hpp"
#include "tnvae/series.hpp"
#include "tnvae/sweep.hpp"
#include "tnvae/vae.hpp"

namespace tnvae {

struct ModelRow {
    std::string run_id;
    Eigen::Index grid_index = -1;
    std::uint64_t seed = 0;
    Hyperparams hyperparams;
    double val_loss = 0;
    double val_nl = 0;
    // NaN without ground-truth labels.
    double silhouette = 0;
    double mean_abs_skew = 0;
    double mean_excess_kurtosis = 0;
};

struct ComboRow {
    Eigen::Index grid_index = -1;
    Hyperparams hyperparams;
    std::size_t models = 0;
    double mean_val_loss = 0;
    double mean_val_nl = 0;
    /// Mean over seed pairs; NaN with fewer than two models.
    double mean_encoding_distance = 0;
    std::size_t pairs = 0;
};

struct SeedPairRow {
    Eigen::Index grid_index = -1;
    std::string run_a;
    std::string run_b;
    double val_loss_a = 0;
    double val_loss_b = 0;
    double distance = 0;
};

struct NamedCorrelation {
    std::string x;
    std::string y;
    bool available = false;
    std::string note;
    CorrelationReport value;
};

struct CorrelationTables {
    bool has_labels = false;
    std::size_t failed_runs = 0;
    std::vector<ModelRow> models;
    std::vector<ComboRow> combos;
    std::vector<SeedPairRow> seed_pairs;
    std::vector<NamedCorrelation> correlations;

    const NamedCorrelation& find(const std::string& x, const std::string& y) const;
};

/// Ground-truth label for every encoding row whose assigned time index falls
/// inside the series; rows past the end are dropped.
struct LabeledEncoding {
    Eigen::MatrixXd z;
    std::vector<int> labels;
};

LabeledEncoding label_encoding(const EncodingMatrix& enc, const SeriesMatrix& series);

/// Silhouette of `model`'s encodings of rows [test_begin, test_end) against
/// the series labels at the assigned time indices.
double model_silhouette(const VaeModel& model, const SeriesMatrix& series, Eigen::Index test_begin,
                        Eigen::Index test_end);

/// Pure function of the records and their models. `records[i]` belongs to
/// `models[i]`; failed records are counted and skipped (models entry unused).
CorrelationTables correlation_report(std::span<const ModelRecord> records, std::span<const VaeModel> models,
                                     const SeriesMatrix& series, Eigen::Index test_begin, Eigen::Index test_end);

/// Loads every finished run of the manifest and reports on the test segment
/// implied by its grid.
CorrelationTables correlation_report(const SweepManifest& manifest, const SeriesMatrix& series);

/// Writes models.csv, combos.csv, seed_pairs.csv, correlations.csv and the
/// scatter files fig2c.csv, fig2e.csv, fig3_row.csv, fig4.csv into `dir`.
void write_report(const CorrelationTables& tables, const std::filesystem::path& dir);

/// `time_index,z0,...,z{d-1}`.
void write_encoding_csv(const std::filesystem::path& path, const EncodingMatrix& enc);
EncodingMatrix read_encoding_csv(const std::filesystem::path& path);

} // namespace tnvae
