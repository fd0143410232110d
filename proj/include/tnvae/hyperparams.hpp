#pragma once

#include <Eigen/Core>

#include <string>

namespace tnvae {

enum class Variant { standard, time_neighbor };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

/// One point of a sweep grid.
struct Hyperparams {
    Eigen::Index n_layers = 2;      ///< hidden layers per network (encoder; decoder mirrors)
    Eigen::Index hidden_width = 100;
    Eigen::Index latent_dim = 2;
    double beta = 1e-3;
    Eigen::Index batch_size = 256;
    double lr = 1e-3;
    Eigen::Index epochs = 500;
    Variant variant = Variant::time_neighbor;

    /// Stable textual form used for run identity hashing.
    std::string canonical() const;

    friend bool operator==(const Hyperparams&, const Hyperparams&) = default;
};

} // namespace tnvae
