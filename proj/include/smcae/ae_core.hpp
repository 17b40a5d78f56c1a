#pragma once

// Single-channel sparse autoencoder: sigmoid encoder/decoder, the
// reconstruction objective with weight decay and KL sparsity penalty, and its
// analytic gradient. Every function here is pure.

#include "smcae/common.hpp"

namespace smcae::ae {

/// Parameters of one encoder/decoder pair. The encoder maps m inputs to k
/// hidden units, the decoder maps k hidden units back to m outputs.
struct ChannelParams {
    Matrix enc_w;  // k x m
    Vector enc_b;  // k
    Matrix dec_w;  // m x k
    Vector dec_b;  // m

    Eigen::Index input_dim() const { return enc_w.cols(); }
    Eigen::Index hidden_dim() const { return enc_w.rows(); }
    Eigen::Index output_dim() const { return dec_w.rows(); }

    /// Throws ShapeError on inconsistent block shapes, DomainError on
    /// non-finite entries.
    void validate() const;

    static ChannelParams zeros(Eigen::Index input_dim, Eigen::Index hidden_dim);
};

/// Gradient blocks mirror the parameter blocks one to one.
using ChannelGradient = ChannelParams;

struct SparsityConfig {
    double target = 0.05;  // desired mean activation of each hidden unit
    double weight = 0.1;   // multiplier of the KL penalty
    double decay = 3e-3;   // multiplier of the weight-decay term

    void validate() const;
};

double sigmoid(double z);

/// Elementwise logistic function.
Matrix sigmoid(const Matrix& z);

/// sigmoid(X * W^T + 1 b^T), one row per instance. Shared by encode/decode.
Matrix affine_sigmoid(const Matrix& x, const Matrix& w, const Vector& b);

Matrix encode(const ChannelParams& p, const FeatureMatrix& x);
Matrix decode(const ChannelParams& p, const FeatureMatrix& h);

/// (sum of squared encoder weights + sum of squared decoder weights) / 2.
double weight_decay(const ChannelParams& p);

/// Mean activation of each hidden unit over the instances (rows) of h.
Vector mean_activations(const Matrix& h);

/// Sum over hidden units of KL(Bernoulli(target) || Bernoulli(mean_i)).
double kl_sparsity(double target, const Vector& mean_activation);

/// d kl_sparsity / d mean_activation.
Vector kl_sparsity_gradient(double target, const Vector& mean_activation);

/// (1/n) sum_i |decode(encode(x_i)) - t_i|^2 + decay * weight_decay
///   + weight * kl_sparsity(target, mean hidden activation).
double channel_objective(const ChannelParams& p, const FeatureMatrix& input,
                         const FeatureMatrix& target, const SparsityConfig& s);

struct ChannelEvaluation {
    double objective = 0.0;
    double reconstruction = 0.0;  // the averaged squared-error part alone
    ChannelGradient gradient;
};

/// Objective and gradient in one forward/backward pass.
ChannelEvaluation channel_evaluate(const ChannelParams& p, const FeatureMatrix& input,
                                   const FeatureMatrix& target, const SparsityConfig& s);

ChannelGradient channel_gradient(const ChannelParams& p, const FeatureMatrix& input,
                                 const FeatureMatrix& target, const SparsityConfig& s);

}  // namespace smcae::ae
