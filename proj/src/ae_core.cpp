#include "smcae/ae_core.hpp"

#include <cmath>
#include <limits>
#include <string>

namespace smcae::ae {

namespace {

void require_rows_match(const Matrix& a, const Matrix& b, const char* what) {
    if (a.rows() != b.rows()) {
        throw ShapeError(std::string(what) + ": instance counts differ (" +
                         std::to_string(a.rows()) + " vs " + std::to_string(b.rows()) + ")");
    }
}

// True when every mean activation lies strictly inside (0,1).
bool inside_open_unit(const Vector& v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        if (!(v[i] > 0.0 && v[i] < 1.0)) return false;
    }
    return true;
}

}  // namespace

void ChannelParams::validate() const {
    const auto k = enc_w.rows();
    const auto m = enc_w.cols();
    if (dec_w.rows() != m || dec_w.cols() != k) {
        throw ShapeError("decoder weights are " + shape_string(dec_w.rows(), dec_w.cols()) +
                         ", expected " + shape_string(m, k) + " to mirror encoder " +
                         shape_string(k, m));
    }
    if (enc_b.size() != k) {
        throw ShapeError("encoder bias has length " + std::to_string(enc_b.size()) +
                         ", expected " + std::to_string(k));
    }
    if (dec_b.size() != m) {
        throw ShapeError("decoder bias has length " + std::to_string(dec_b.size()) +
                         ", expected " + std::to_string(m));
    }
    require_finite(enc_w, "encoder weights");
    require_finite(dec_w, "decoder weights");
    require_finite(enc_b.transpose(), "encoder bias");
    require_finite(dec_b.transpose(), "decoder bias");
}

ChannelParams ChannelParams::zeros(Eigen::Index input_dim, Eigen::Index hidden_dim) {
    return {Matrix::Zero(hidden_dim, input_dim), Vector::Zero(hidden_dim),
            Matrix::Zero(input_dim, hidden_dim), Vector::Zero(input_dim)};
}

void SparsityConfig::validate() const {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("sparsity target must lie strictly inside (0,1), got " +
                          std::to_string(target));
    }
    if (!(weight >= 0.0) || !(decay >= 0.0)) {
        throw DomainError("sparsity and decay weights must be non-negative");
    }
}

double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

Matrix sigmoid(const Matrix& z) {
    return z.unaryExpr([](double v) { return sigmoid(v); });
}

Matrix affine_sigmoid(const Matrix& x, const Matrix& w, const Vector& b) {
    if (x.cols() != w.cols()) {
        throw ShapeError("input has " + std::to_string(x.cols()) +
                         " features but weights expect " + std::to_string(w.cols()) +
                         " (weights are " + shape_string(w.rows(), w.cols()) + ")");
    }
    if (b.size() != w.rows()) {
        throw ShapeError("bias length " + std::to_string(b.size()) +
                         " does not match weight rows " + std::to_string(w.rows()));
    }
    Matrix z = x * w.transpose();
    z.rowwise() += b.transpose();
    return sigmoid(z);
}

Matrix encode(const ChannelParams& p, const FeatureMatrix& x) {
    return affine_sigmoid(x, p.enc_w, p.enc_b);
}

Matrix decode(const ChannelParams& p, const FeatureMatrix& h) {
    return affine_sigmoid(h, p.dec_w, p.dec_b);
}

double weight_decay(const ChannelParams& p) {
    return 0.5 * (p.enc_w.squaredNorm() + p.dec_w.squaredNorm());
}

Vector mean_activations(const Matrix& h) {
    if (h.rows() == 0) throw ShapeError("mean_activations of an empty matrix");
    return h.colwise().mean().transpose();
}

double kl_sparsity(double target, const Vector& mean_activation) {
    if (!(target > 0.0 && target < 1.0)) {
        throw DomainError("sparsity target outside (0,1)");
    }
    if (!inside_open_unit(mean_activation)) {
        throw DomainError("mean activation outside (0,1)");
    }
    double sum = 0.0;
    for (Eigen::Index i = 0; i < mean_activation.size(); ++i) {
        const double d = mean_activation[i];
        sum += target * std::log(target / d) + (1.0 - target) * std::log((1.0 - target) / (1.0 - d));
    }
    return sum;
}

Vector kl_sparsity_gradient(double target, const Vector& mean_activation) {
    return mean_activation.unaryExpr(
        [target](double d) { return -target / d + (1.0 - target) / (1.0 - d); });
}

ChannelEvaluation channel_evaluate(const ChannelParams& p, const FeatureMatrix& input,
                                   const FeatureMatrix& target, const SparsityConfig& s) {
    require_rows_match(input, target, "channel objective");
    if (target.cols() != p.output_dim()) {
        throw ShapeError("target has " + std::to_string(target.cols()) +
                         " columns but decoder produces " + std::to_string(p.output_dim()));
    }
    if (input.rows() == 0) throw ShapeError("channel objective needs at least one instance");

    const double n = static_cast<double>(input.rows());
    const Matrix hidden = encode(p, input);
    const Matrix output = decode(p, hidden);
    const Matrix residual = output - target;

    ChannelEvaluation ev;
    ev.reconstruction = residual.squaredNorm() / n;
    const Vector mean_act = mean_activations(hidden);

    double sparsity = 0.0;
    if (s.weight > 0.0) {
        // KL diverges as a unit saturates; report +inf so line searches back off.
        if (!inside_open_unit(mean_act)) {
            ev.objective = std::numeric_limits<double>::infinity();
            ev.gradient = ChannelParams::zeros(p.input_dim(), p.hidden_dim());
            return ev;
        }
        sparsity = kl_sparsity(s.target, mean_act);
    }
    ev.objective = ev.reconstruction + s.decay * weight_decay(p) + s.weight * sparsity;

    // Backward pass.
    Matrix delta_out = (2.0 / n) * residual.cwiseProduct(output.cwiseProduct((1.0 - output.array()).matrix()));
    Matrix grad_hidden = delta_out * p.dec_w;
    if (s.weight > 0.0) {
        const Vector kl_grad = (s.weight / n) * kl_sparsity_gradient(s.target, mean_act);
        grad_hidden.rowwise() += kl_grad.transpose();
    }
    const Matrix delta_hidden =
        grad_hidden.cwiseProduct(hidden.cwiseProduct((1.0 - hidden.array()).matrix()));

    ev.gradient.dec_w = delta_out.transpose() * hidden + s.decay * p.dec_w;
    ev.gradient.dec_b = delta_out.colwise().sum().transpose();
    ev.gradient.enc_w = delta_hidden.transpose() * input + s.decay * p.enc_w;
    ev.gradient.enc_b = delta_hidden.colwise().sum().transpose();
    return ev;
}

double channel_objective(const ChannelParams& p, const FeatureMatrix& input,
                         const FeatureMatrix& target, const SparsityConfig& s) {
    return channel_evaluate(p, input, target, s).objective;
}

ChannelGradient channel_gradient(const ChannelParams& p, const FeatureMatrix& input,
                                 const FeatureMatrix& target, const SparsityConfig& s) {
    return channel_evaluate(p, input, target, s).gradient;
}

}  // namespace smcae::ae
