#pragma once

// Stacked multichannel autoencoder. Two reconstruction tasks ("channels")
// share every encoder layer; the output layer is split into a left decoder
// (synthetic -> real) and a right decoder (real -> real). The joint objective
// adds a balance penalty gamma/2 (J_L - J_R)^2 that discourages one channel
// from dominating training.

#include "smcae/ae_core.hpp"
#include "smcae/optim.hpp"
#include "smcae/scaling.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace smcae {

class Rng;

/// Which data feeds each channel's input and reconstruction target.
///   smcae    : left <Xs -> Xr>, right <Xr -> Xr>
///   smcae_ii : left <Xs -> Xs>, right <Xr -> Xr>
///   sae_i    : one channel <[Xs; Xr] -> [Xr; Xr]>
///   sae_ii   : one channel <Xs -> Xr>
enum class Variant { smcae, smcae_ii, sae_i, sae_ii };

const char* to_string(Variant v);
Variant parse_variant(std::string_view name);
bool is_two_channel(Variant v);

struct ChannelData {
    FeatureMatrix input;
    FeatureMatrix target;
};

struct ChannelBindings {
    ChannelData left;
    std::optional<ChannelData> right;

    bool two_channel() const { return right.has_value(); }
    Eigen::Index input_dim() const { return left.input.cols(); }
};

/// Per-channel (input, target) matrices for a variant. Xs and Xr must be
/// paired row by row.
ChannelBindings build_variant(Variant v, const FeatureMatrix& xs, const FeatureMatrix& xr);

struct SmcaeLayer {
    Matrix enc_w;    // k x m, shared
    Vector enc_b;    // k
    Matrix left_w;   // m x k
    Vector left_b;   // m
    Matrix right_w;  // m x k, empty for single-channel variants
    Vector right_b;  // m

    Eigen::Index input_dim() const { return enc_w.cols(); }
    Eigen::Index hidden_dim() const { return enc_w.rows(); }
    bool has_right() const { return right_w.size() > 0; }

    ae::ChannelParams left() const { return {enc_w, enc_b, left_w, left_b}; }
    ae::ChannelParams right() const { return {enc_w, enc_b, right_w, right_b}; }

    void validate() const;

    /// Uniform weights in [-r, r] with r = sqrt(6 / (m + k)); zero biases.
    static SmcaeLayer initialize(Eigen::Index input_dim, Eigen::Index hidden_dim,
                                 bool two_channel, Rng& rng);
    static SmcaeLayer zeros_like(const SmcaeLayer& shape);
};

/// Flattened layout: enc_w (row-major), enc_b, left_w, left_b, right_w, right_b.
Vector flatten(const SmcaeLayer& layer);
void unflatten(const Vector& flat, SmcaeLayer& layer);
Eigen::Index parameter_count(const SmcaeLayer& layer);

struct SmcaeConfig {
    std::vector<int> layer_sizes{1000, 1000};
    ae::SparsityConfig sparsity;
    double gamma = 50.0;
    int max_iterations = 400;  // per L-BFGS run (each greedy layer, fine-tuning)
    double tolerance = 1e-7;
    int memory = 10;
    bool fine_tune = true;
    std::uint64_t rng_seed = 0;

    void validate() const;
    optim::LbfgsOptions lbfgs_options() const;
};

struct LayerObjective {
    double total = 0.0;  // E
    double left = 0.0;   // J_L
    double right = 0.0;  // J_R (zero for single-channel variants)
};

/// E = J_L + J_R + gamma * (J_L - J_R)^2 / 2.
double balanced_objective(double left, double right, double gamma);

/// Weights applied to dJ_L and dJ_R in dE: (1 + gamma d, 1 - gamma d), d = J_L - J_R.
std::pair<double, double> balance_factors(double left, double right, double gamma);

struct LayerEvaluation {
    LayerObjective value;
    SmcaeLayer gradient;
};

/// Objective and gradient of one layer under arbitrary channel bindings.
/// Single-channel bindings ignore gamma and the right decoder.
LayerEvaluation layer_evaluate(const SmcaeLayer& layer, const ChannelBindings& data,
                               const ae::SparsityConfig& s, double gamma);

LayerObjective smcae_objective(const SmcaeLayer& layer, const FeatureMatrix& xs,
                               const FeatureMatrix& xr, const ae::SparsityConfig& s, double gamma);
SmcaeLayer smcae_gradient(const SmcaeLayer& layer, const FeatureMatrix& xs, const FeatureMatrix& xr,
                          const ae::SparsityConfig& s, double gamma);

struct LogEntry {
    int iteration = 0;
    double total = 0.0;
    double left = 0.0;
    double right = 0.0;
};

/// Optimizer history for one L-BFGS run ("layer1", "layer2", ..., "finetune").
struct TrainingStage {
    std::string name;
    std::vector<LogEntry> entries;
    int iterations = 0;
    int evaluations = 0;
    optim::Status status = optim::Status::max_iterations;
};

struct TrainedLayer {
    SmcaeLayer layer;
    TrainingStage log;
};

/// Training diverged; carries the last parameters with a finite objective.
class TrainingError : public std::runtime_error {
public:
    TrainingError(const std::string& what, SmcaeLayer last) : std::runtime_error(what), last_(std::move(last)) {}
    const SmcaeLayer& last_state() const { return last_; }

private:
    SmcaeLayer last_;
};

TrainedLayer train_layer(const ChannelBindings& data, int hidden_dim, const ae::SparsityConfig& s,
                         double gamma, const optim::LbfgsOptions& opts, std::uint64_t seed);

TrainedLayer train_layer(const FeatureMatrix& xs, const FeatureMatrix& xr, int hidden_dim,
                         const ae::SparsityConfig& s, double gamma,
                         const optim::LbfgsOptions& opts, std::uint64_t seed);

struct SmcaeModel {
    std::vector<SmcaeLayer> layers;
    SmcaeConfig config;
    Variant variant = Variant::smcae;
    std::vector<TrainingStage> training_log;
    std::optional<FeatureScaler> scaler;  // input scaling fitted with the model, if any

    bool trained() const { return !layers.empty(); }
    Eigen::Index input_dim() const { return layers.empty() ? 0 : layers.front().input_dim(); }
    int total_iterations() const;
};

/// Unrolled stack objective used for fine-tuning. Inner decoders (layers
/// 2..L) are shared and live in each layer's left slot; only layer 1's
/// decoder is split left/right. Weight decay covers every weight a channel
/// uses; the sparsity penalty applies at every encoder layer.
struct StackEvaluation {
    LayerObjective value;
    std::vector<SmcaeLayer> gradient;
};

StackEvaluation stack_evaluate(const std::vector<SmcaeLayer>& layers, const ChannelBindings& data,
                               const ae::SparsityConfig& s, double gamma);

/// Flattening used for fine-tuning: every layer's encoder, inner layers'
/// shared decoder, layer 1's left (and right) decoder.
Vector flatten_stack(const std::vector<SmcaeLayer>& layers);
void unflatten_stack(const Vector& flat, std::vector<SmcaeLayer>& layers);

/// Greedy layerwise training followed by optional fine-tuning.
SmcaeModel train_stack(const FeatureMatrix& xs, const FeatureMatrix& xr, const SmcaeConfig& config,
                       Variant variant = Variant::smcae);

/// Encode through every shared layer, decode through the shared inner
/// decoders and layer 1's left decoder.
FeatureMatrix transform(const SmcaeModel& model, const FeatureMatrix& xs);

/// Self-describing binary container (JSON header + raw little-endian blocks).
void save_model(const SmcaeModel& model, const std::string& path);
SmcaeModel load_model(const std::string& path);
std::string serialize_model(const SmcaeModel& model);
SmcaeModel deserialize_model(const std::string& bytes);

}  // namespace smcae
