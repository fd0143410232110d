#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "tnvae/gaussian.hpp"
#include "tnvae/hyperparams.hpp"
#include "tnvae/metrics.hpp"
#include "tnvae/mlp.hpp"
#include "tnvae/series.hpp"

namespace tnvae {

/// Encoder D -> 2d (mean stacked over log-variance), decoder d -> D.
struct VaeModel {
    Mlp encoder;
    Mlp decoder;
    Eigen::Index latent_dim = 2;
    Variant variant = Variant::standard;
    double beta = 1e-3;

    Eigen::Index input_dim() const { return encoder.input_dim(); }

    /// Throws ShapeError unless the two networks fit together.
    void validate() const;
};

struct ModelSpec {
    Eigen::Index input_dim = 31;
    Eigen::Index n_layers = 2;
    Eigen::Index hidden_width = 100;
    Eigen::Index latent_dim = 2;
    Variant variant = Variant::time_neighbor;
    double beta = 1e-3;
    Activation activation = Activation::tanh;

    static ModelSpec from(const Hyperparams& hp, Eigen::Index input_dim);
};

/// Mirrored MLPs with Glorot initialisation drawn from `init`.
VaeModel make_vae(const ModelSpec& spec, RngStream& init);

struct LossTerms {
    double total = 0;          ///< reconstruction + beta * kl
    double reconstruction = 0; ///< batch mean of per-sample mean squared error
    double kl = 0;             ///< batch mean of KL(q || N(0, I))
};

struct LossResult {
    LossTerms terms;
    LayerGrads encoder_grad;
    LayerGrads decoder_grad;
};

/// Standard-normal noise, one column per sample.
Eigen::MatrixXd draw_noise(Eigen::Index latent_dim, Eigen::Index batch, RngStream& rng);

/// Single-sample ELBO objective on column batches: encode `inputs`, sample
/// z = mean + exp(log_var / 2) * noise, decode, compare with `targets`.
LossResult elbo_objective(const VaeModel& model, const Eigen::MatrixXd& inputs, const Eigen::MatrixXd& targets,
                          const Eigen::MatrixXd& noise, bool with_gradients = true);

/// Standard VAE: reconstruct each column of `batch` (D x B).
LossResult vae_loss(const VaeModel& model, const Eigen::MatrixXd& batch, RngStream& rng);
/// Standard VAE on the given rows of a series.
LossResult vae_loss(const VaeModel& model, const SeriesMatrix& series, std::span<const Eigen::Index> rows,
                    RngStream& rng);

/// Time-neighbor VAE: predict column i of `next` from column i of `current`.
LossResult tnvae_loss(const VaeModel& model, const Eigen::MatrixXd& current, const Eigen::MatrixXd& next,
                      RngStream& rng);
/// Time-neighbor VAE on adjacent pairs (t, t + 1) of a series.
LossResult tnvae_loss(const VaeModel& model, const SeriesMatrix& series, std::span<const Eigen::Index> pairs,
                      RngStream& rng);

struct Encoded {
    DiagGaussian posterior;
    Eigen::Index assigned_index = 0; ///< t, or t + 1 for the time-neighbor variant
};

Encoded encode(const VaeModel& model, const Eigen::VectorXd& x, Eigen::Index t);

/// Posterior means for every row, indexed by assigned time step.
EncodingMatrix encode_series(const VaeModel& model, const SeriesMatrix& series, std::string source_model = {});

struct TrainConfig {
    Eigen::Index epochs = 500;
    Eigen::Index batch_size = 256;
    double lr = 1e-3;
    std::uint64_t seed = 0;
    double val_fraction = 0.2;

    void validate() const;
};

struct EpochRecord {
    double train_loss = 0;
    double val_loss = 0;
    double val_reconstruction = 0;
    double val_kl = 0;
    double val_nl = 0;
};

struct ModelRecord {
    std::string run_id;
    Eigen::Index grid_index = -1;
    Hyperparams hyperparams;
    std::uint64_t seed = 0;
    bool failed = false;
    std::string failure;
    double final_train_loss = std::numeric_limits<double>::quiet_NaN();
    double final_val_loss = std::numeric_limits<double>::quiet_NaN();
    double final_val_reconstruction = std::numeric_limits<double>::quiet_NaN();
    double final_val_kl = std::numeric_limits<double>::quiet_NaN();
    double val_nl = std::numeric_limits<double>::quiet_NaN();
    double val_nl_per_pair = std::numeric_limits<double>::quiet_NaN();
    std::vector<EpochRecord> loss_curves;
    std::string checkpoint_ref;
};

void write_record(std::ostream& out, const ModelRecord& record);
ModelRecord read_record(std::istream& in);

struct TrainResult {
    VaeModel model;
    ModelRecord record;
};

/// Minibatch Adam over the split's training pairs. Per-epoch train and
/// validation loss and the Neighbor Loss of the test segment go into the
/// record. A non-finite loss stops training and marks the record failed.
TrainResult train(const ModelSpec& spec, const SeriesMatrix& series, const SeriesSplit& split,
                  const TrainConfig& config);

} // namespace tnvae
