#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

#include "tnvae/error.hpp"
#include "tnvae/rng.hpp"

namespace tnvae {

inline constexpr double kLogVarMin = -30.0;
inline constexpr double kLogVarMax = 30.0;

/// Diagonal Gaussian posterior. log_var is clamped on construction.
template <typename Scalar>
struct BasicDiagGaussian {
    using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    VectorType mean;
    VectorType log_var;

    BasicDiagGaussian() = default;

    template <typename DerivedM, typename DerivedL>
    BasicDiagGaussian(const Eigen::MatrixBase<DerivedM>& m, const Eigen::MatrixBase<DerivedL>& lv)
        : mean(m), log_var(lv.array().max(Scalar(kLogVarMin)).min(Scalar(kLogVarMax)).matrix())
    {
        if (mean.size() != log_var.size())
            throw ShapeError("mean and log_var lengths differ");
        if (!mean.allFinite() || !lv.allFinite())
            throw NumericError("non-finite Gaussian parameters");
    }

    static BasicDiagGaussian standard(Eigen::Index dim)
    {
        return BasicDiagGaussian(VectorType::Zero(dim), VectorType::Zero(dim));
    }

    Eigen::Index dim() const { return mean.size(); }
};

using DiagGaussian = BasicDiagGaussian<double>;

/// KL(N(mean, diag(exp(log_var))) || N(0, I)), closed form. Accepts vectors or
/// d x B matrices (then sums over all entries).
template <typename DerivedM, typename DerivedL>
typename DerivedM::Scalar kl_to_standard_normal(const Eigen::MatrixBase<DerivedM>& mean,
                                                const Eigen::MatrixBase<DerivedL>& log_var)
{
    using Scalar = typename DerivedM::Scalar;
    if (mean.rows() != log_var.rows() || mean.cols() != log_var.cols())
        throw ShapeError("mean and log_var shapes differ");
    if (!mean.allFinite() || !log_var.allFinite())
        throw NumericError("non-finite input to KL");
    return Scalar(0.5) *
           (mean.array().square() + log_var.array().exp() - Scalar(1) - log_var.array()).sum();
}

template <typename Scalar>
Scalar kl_to_standard_normal(const BasicDiagGaussian<Scalar>& q)
{
    return kl_to_standard_normal(q.mean, q.log_var);
}

/// z = mean + exp(log_var / 2) * eps with eps ~ N(0, I) drawn from `rng`.
template <typename Scalar>
typename BasicDiagGaussian<Scalar>::VectorType reparameterize(const BasicDiagGaussian<Scalar>& q, RngStream& rng)
{
    typename BasicDiagGaussian<Scalar>::VectorType z(q.dim());
    for (Eigen::Index i = 0; i < q.dim(); ++i) {
        const Scalar lv = std::clamp(q.log_var(i), Scalar(kLogVarMin), Scalar(kLogVarMax));
        z(i) = q.mean(i) + std::exp(Scalar(0.5) * lv) * static_cast<Scalar>(rng.normal());
    }
    return z;
}

} // namespace tnvae
