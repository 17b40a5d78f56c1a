#include "smcae/model.hpp"

#include "smcae/rng.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>

namespace smcae {

const char* to_string(Variant v) {
    switch (v) {
        case Variant::smcae: return "SMCAE";
        case Variant::smcae_ii: return "SMCAE_II";
        case Variant::sae_i: return "SAE_I";
        case Variant::sae_ii: return "SAE_II";
    }
    return "unknown";
}

Variant parse_variant(std::string_view name) {
    std::string key;
    for (char c : name) key += c == '-' ? '_' : static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
    if (key == "SMCAE") return Variant::smcae;
    if (key == "SMCAE_II") return Variant::smcae_ii;
    if (key == "SAE_I") return Variant::sae_i;
    if (key == "SAE_II") return Variant::sae_ii;
    throw DomainError("unknown variant '" + std::string(name) + "'");
}

bool is_two_channel(Variant v) { return v == Variant::smcae || v == Variant::smcae_ii; }

ChannelBindings build_variant(Variant v, const FeatureMatrix& xs, const FeatureMatrix& xr) {
    if (xs.rows() != xr.rows()) {
        throw ShapeError("synthetic and real data must be paired: " + std::to_string(xs.rows()) +
                         " vs " + std::to_string(xr.rows()) + " instances");
    }
    if (xs.cols() != xr.cols()) {
        throw ShapeError("synthetic and real feature dimensions differ: " +
                         std::to_string(xs.cols()) + " vs " + std::to_string(xr.cols()));
    }
    ChannelBindings b;
    switch (v) {
        case Variant::smcae:
            b.left = {xs, xr};
            b.right = ChannelData{xr, xr};
            break;
        case Variant::smcae_ii:
            b.left = {xs, xs};
            b.right = ChannelData{xr, xr};
            break;
        case Variant::sae_i: {
            FeatureMatrix in(2 * xs.rows(), xs.cols());
            in << xs, xr;
            FeatureMatrix out(2 * xs.rows(), xs.cols());
            out << xr, xr;
            b.left = {std::move(in), std::move(out)};
            break;
        }
        case Variant::sae_ii:
            b.left = {xs, xr};
            break;
    }
    return b;
}

// ---------------------------------------------------------------------------
// Layers

void SmcaeLayer::validate() const {
    left().validate();
    if (has_right()) {
        right().validate();
    } else if (right_b.size() != 0) {
        throw ShapeError("right decoder bias present without right decoder weights");
    }
}

SmcaeLayer SmcaeLayer::initialize(Eigen::Index m, Eigen::Index k, bool two_channel, Rng& rng) {
    if (m < 1 || k < 1) throw ShapeError("layer dimensions must be positive, got " + shape_string(k, m));
    const double r = std::sqrt(6.0 / static_cast<double>(m + k));
    auto uniform = [&](Eigen::Index rows, Eigen::Index cols) {
        Matrix w(rows, cols);
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = rng.uniform(-r, r);
        return w;
    };
    SmcaeLayer l;
    l.enc_w = uniform(k, m);
    l.enc_b = Vector::Zero(k);
    l.left_w = uniform(m, k);
    l.left_b = Vector::Zero(m);
    if (two_channel) {
        l.right_w = uniform(m, k);
        l.right_b = Vector::Zero(m);
    }
    return l;
}

SmcaeLayer SmcaeLayer::zeros_like(const SmcaeLayer& s) {
    SmcaeLayer z;
    z.enc_w = Matrix::Zero(s.enc_w.rows(), s.enc_w.cols());
    z.enc_b = Vector::Zero(s.enc_b.size());
    z.left_w = Matrix::Zero(s.left_w.rows(), s.left_w.cols());
    z.left_b = Vector::Zero(s.left_b.size());
    z.right_w = Matrix::Zero(s.right_w.rows(), s.right_w.cols());
    z.right_b = Vector::Zero(s.right_b.size());
    return z;
}

namespace {

template <class Visitor>
void for_each_block(SmcaeLayer& l, Visitor&& visit) {
    visit(l.enc_w.data(), l.enc_w.size());
    visit(l.enc_b.data(), l.enc_b.size());
    visit(l.left_w.data(), l.left_w.size());
    visit(l.left_b.data(), l.left_b.size());
    visit(l.right_w.data(), l.right_w.size());
    visit(l.right_b.data(), l.right_b.size());
}

// Encoder blocks plus the decoder blocks that take part in the unrolled
// stack: both output decoders for layer 0, the shared (left) slot otherwise.
template <class Visitor>
void for_each_stack_block(std::vector<SmcaeLayer>& layers, Visitor&& visit) {
    for (std::size_t j = 0; j < layers.size(); ++j) {
        auto& l = layers[j];
        visit(l.enc_w.data(), l.enc_w.size());
        visit(l.enc_b.data(), l.enc_b.size());
        visit(l.left_w.data(), l.left_w.size());
        visit(l.left_b.data(), l.left_b.size());
        if (j == 0) {
            visit(l.right_w.data(), l.right_w.size());
            visit(l.right_b.data(), l.right_b.size());
        }
    }
}

}  // namespace

Eigen::Index parameter_count(const SmcaeLayer& l) {
    return l.enc_w.size() + l.enc_b.size() + l.left_w.size() + l.left_b.size() +
           l.right_w.size() + l.right_b.size();
}

Vector flatten(const SmcaeLayer& layer) {
    Vector flat(parameter_count(layer));
    Eigen::Index at = 0;
    for_each_block(const_cast<SmcaeLayer&>(layer), [&](double* p, Eigen::Index n) {
        std::copy(p, p + n, flat.data() + at);
        at += n;
    });
    return flat;
}

void unflatten(const Vector& flat, SmcaeLayer& layer) {
    if (flat.size() != parameter_count(layer)) {
        throw ShapeError("flat vector has " + std::to_string(flat.size()) + " entries, layer needs " +
                         std::to_string(parameter_count(layer)));
    }
    Eigen::Index at = 0;
    for_each_block(layer, [&](double* p, Eigen::Index n) {
        std::copy(flat.data() + at, flat.data() + at + n, p);
        at += n;
    });
}

Vector flatten_stack(const std::vector<SmcaeLayer>& layers) {
    auto& ls = const_cast<std::vector<SmcaeLayer>&>(layers);
    Eigen::Index total = 0;
    for_each_stack_block(ls, [&](double*, Eigen::Index n) { total += n; });
    Vector flat(total);
    Eigen::Index at = 0;
    for_each_stack_block(ls, [&](double* p, Eigen::Index n) {
        std::copy(p, p + n, flat.data() + at);
        at += n;
    });
    return flat;
}

void unflatten_stack(const Vector& flat, std::vector<SmcaeLayer>& layers) {
    Eigen::Index total = 0;
    for_each_stack_block(layers, [&](double*, Eigen::Index n) { total += n; });
    if (flat.size() != total) {
        throw ShapeError("flat vector has " + std::to_string(flat.size()) + " entries, stack needs " +
                         std::to_string(total));
    }
    Eigen::Index at = 0;
    for_each_stack_block(layers, [&](double* p, Eigen::Index n) {
        std::copy(flat.data() + at, flat.data() + at + n, p);
        at += n;
    });
}

// ---------------------------------------------------------------------------
// Objectives

double balanced_objective(double left, double right, double gamma) {
    const double d = left - right;
    return left + right + 0.5 * gamma * d * d;
}

std::pair<double, double> balance_factors(double left, double right, double gamma) {
    const double d = left - right;
    return {1.0 + gamma * d, 1.0 - gamma * d};
}

namespace {

void accumulate(SmcaeLayer& g, const ae::ChannelGradient& c, double factor, bool right) {
    g.enc_w += factor * c.enc_w;
    g.enc_b += factor * c.enc_b;
    if (right) {
        g.right_w = factor * c.dec_w;
        g.right_b = factor * c.dec_b;
    } else {
        g.left_w = factor * c.dec_w;
        g.left_b = factor * c.dec_b;
    }
}

void check_layer_input(const SmcaeLayer& layer, const ChannelBindings& data) {
    if (data.input_dim() != layer.input_dim()) {
        throw ShapeError("data has " + std::to_string(data.input_dim()) +
                         " features, layer expects " + std::to_string(layer.input_dim()));
    }
    if (data.two_channel() && !layer.has_right()) {
        throw ShapeError("two-channel data given to a single-channel layer");
    }
}

}  // namespace

LayerEvaluation layer_evaluate(const SmcaeLayer& layer, const ChannelBindings& data,
                               const ae::SparsityConfig& s, double gamma) {
    check_layer_input(layer, data);
    LayerEvaluation ev;
    ev.gradient = SmcaeLayer::zeros_like(layer);
    const auto left = ae::channel_evaluate(layer.left(), data.left.input, data.left.target, s);
    if (!data.two_channel()) {
        ev.value = {left.objective, left.objective, 0.0};
        accumulate(ev.gradient, left.gradient, 1.0, false);
        return ev;
    }
    const auto right = ae::channel_evaluate(layer.right(), data.right->input, data.right->target, s);
    ev.value.left = left.objective;
    ev.value.right = right.objective;
    ev.value.total = balanced_objective(left.objective, right.objective, gamma);
    const auto [fl, fr] = balance_factors(left.objective, right.objective, gamma);
    accumulate(ev.gradient, left.gradient, fl, false);
    accumulate(ev.gradient, right.gradient, fr, true);
    return ev;
}

LayerObjective smcae_objective(const SmcaeLayer& layer, const FeatureMatrix& xs,
                               const FeatureMatrix& xr, const ae::SparsityConfig& s, double gamma) {
    return layer_evaluate(layer, build_variant(Variant::smcae, xs, xr), s, gamma).value;
}

SmcaeLayer smcae_gradient(const SmcaeLayer& layer, const FeatureMatrix& xs, const FeatureMatrix& xr,
                          const ae::SparsityConfig& s, double gamma) {
    return layer_evaluate(layer, build_variant(Variant::smcae, xs, xr), s, gamma).gradient;
}

namespace {

struct PathStep {
    const Matrix* w;
    const Vector* b;
    bool sparse;  // the activation produced by this step carries the KL penalty
};

struct PathResult {
    double objective = 0.0;
    std::vector<Matrix> grad_w;
    std::vector<Vector> grad_b;
};

// Chain of sigmoid layers trained to reproduce target from input.
PathResult evaluate_path(const std::vector<PathStep>& steps, const Matrix& input,
                         const Matrix& target, const ae::SparsityConfig& s) {
    const auto depth = steps.size();
    const double n = static_cast<double>(input.rows());
    std::vector<Matrix> acts(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        acts[l] = ae::affine_sigmoid(l == 0 ? input : acts[l - 1], *steps[l].w, *steps[l].b);
    }
    auto act_in = [&](std::size_t l) -> const Matrix& { return l == 0 ? input : acts[l - 1]; };

    PathResult r;
    const Matrix residual = acts.back() - target;
    double decay = 0.0;
    double sparsity = 0.0;
    std::vector<Vector> means(depth);
    for (std::size_t l = 0; l < depth; ++l) {
        decay += 0.5 * steps[l].w->squaredNorm();
        if (steps[l].sparse && s.weight > 0.0) {
            means[l] = ae::mean_activations(acts[l]);
            if (!(means[l].minCoeff() > 0.0 && means[l].maxCoeff() < 1.0)) {
                r.objective = std::numeric_limits<double>::infinity();
                for (const auto& st : steps) {
                    r.grad_w.push_back(Matrix::Zero(st.w->rows(), st.w->cols()));
                    r.grad_b.push_back(Vector::Zero(st.b->size()));
                }
                return r;
            }
            sparsity += ae::kl_sparsity(s.target, means[l]);
        }
    }
    r.objective = residual.squaredNorm() / n + s.decay * decay + s.weight * sparsity;

    r.grad_w.resize(depth);
    r.grad_b.resize(depth);
    const Matrix& out = acts.back();
    Matrix delta = (2.0 / n) * residual.cwiseProduct(out.cwiseProduct((1.0 - out.array()).matrix()));
    for (std::size_t l = depth; l-- > 0;) {
        r.grad_w[l] = delta.transpose() * act_in(l) + s.decay * *steps[l].w;
        r.grad_b[l] = delta.colwise().sum().transpose();
        if (l == 0) break;
        Matrix grad_act = delta * *steps[l].w;
        if (steps[l - 1].sparse && s.weight > 0.0) {
            const Vector kl = (s.weight / n) * ae::kl_sparsity_gradient(s.target, means[l - 1]);
            grad_act.rowwise() += kl.transpose();
        }
        const Matrix& a = acts[l - 1];
        delta = grad_act.cwiseProduct(a.cwiseProduct((1.0 - a.array()).matrix()));
    }
    return r;
}

std::vector<PathStep> channel_path(const std::vector<SmcaeLayer>& layers, bool right) {
    std::vector<PathStep> steps;
    for (const auto& l : layers) steps.push_back({&l.enc_w, &l.enc_b, true});
    for (std::size_t j = layers.size(); j-- > 1;) {
        steps.push_back({&layers[j].left_w, &layers[j].left_b, false});
    }
    const auto& first = layers.front();
    if (right) {
        steps.push_back({&first.right_w, &first.right_b, false});
    } else {
        steps.push_back({&first.left_w, &first.left_b, false});
    }
    return steps;
}

void scatter_path(const PathResult& r, double factor, bool right, std::vector<SmcaeLayer>& grads) {
    const std::size_t depth = grads.size();
    for (std::size_t j = 0; j < depth; ++j) {
        grads[j].enc_w += factor * r.grad_w[j];
        grads[j].enc_b += factor * r.grad_b[j];
    }
    // Inner decoders follow in order layer L .. layer 2.
    for (std::size_t i = 0; i + 1 < depth; ++i) {
        const std::size_t j = depth - 1 - i;
        grads[j].left_w += factor * r.grad_w[depth + i];
        grads[j].left_b += factor * r.grad_b[depth + i];
    }
    const std::size_t last = 2 * depth - 1;
    if (right) {
        grads[0].right_w += factor * r.grad_w[last];
        grads[0].right_b += factor * r.grad_b[last];
    } else {
        grads[0].left_w += factor * r.grad_w[last];
        grads[0].left_b += factor * r.grad_b[last];
    }
}

}  // namespace

StackEvaluation stack_evaluate(const std::vector<SmcaeLayer>& layers, const ChannelBindings& data,
                               const ae::SparsityConfig& s, double gamma) {
    if (layers.empty()) throw DomainError("stack has no layers");
    check_layer_input(layers.front(), data);
    for (std::size_t j = 1; j < layers.size(); ++j) {
        if (layers[j].input_dim() != layers[j - 1].hidden_dim()) {
            throw ShapeError("layer " + std::to_string(j + 1) + " expects " +
                             std::to_string(layers[j].input_dim()) + " inputs but layer " +
                             std::to_string(j) + " produces " + std::to_string(layers[j - 1].hidden_dim()));
        }
    }
    StackEvaluation ev;
    for (const auto& l : layers) ev.gradient.push_back(SmcaeLayer::zeros_like(l));

    const auto left = evaluate_path(channel_path(layers, false), data.left.input, data.left.target, s);
    if (!data.two_channel()) {
        ev.value = {left.objective, left.objective, 0.0};
        scatter_path(left, 1.0, false, ev.gradient);
        return ev;
    }
    const auto right = evaluate_path(channel_path(layers, true), data.right->input, data.right->target, s);
    ev.value = {balanced_objective(left.objective, right.objective, gamma), left.objective, right.objective};
    const auto [fl, fr] = balance_factors(left.objective, right.objective, gamma);
    scatter_path(left, fl, false, ev.gradient);
    scatter_path(right, fr, true, ev.gradient);
    return ev;
}

// ---------------------------------------------------------------------------
// Training

void SmcaeConfig::validate() const {
    if (layer_sizes.empty()) throw DomainError("layer_sizes must not be empty");
    for (int k : layer_sizes) {
        if (k < 1) throw DomainError("every layer width must be positive");
    }
    if (!(gamma >= 0.0)) throw DomainError("gamma must be non-negative");
    sparsity.validate();
    lbfgs_options().validate();
}

optim::LbfgsOptions SmcaeConfig::lbfgs_options() const {
    optim::LbfgsOptions o;
    o.max_iterations = max_iterations;
    o.tolerance = tolerance;
    o.memory = memory;
    return o;
}

int SmcaeModel::total_iterations() const {
    int total = 0;
    for (const auto& st : training_log) total += st.iterations;
    return total;
}

namespace {

// Runs L-BFGS over a parameter object, logging (iteration, E, J_L, J_R).
template <class Params, class Flatten, class Unflatten, class Evaluate>
TrainingStage run_stage(std::string name, Params& params, Flatten flatten_fn, Unflatten unflatten_fn,
                        Evaluate evaluate_fn, const optim::LbfgsOptions& opts) {
    TrainingStage stage;
    stage.name = std::move(name);
    Params work = params;
    LayerObjective last;
    const optim::ValueAndGradient fg = [&](const Vector& x, Vector& g) {
        unflatten_fn(x, work);
        auto ev = evaluate_fn(work);
        last = ev.value;
        g = flatten_fn(ev.gradient);
        return ev.value.total;
    };
    const Vector x0 = flatten_fn(params);
    bool first = true;
    const optim::ValueAndGradient logged = [&](const Vector& x, Vector& g) {
        const double v = fg(x, g);
        if (first) {
            stage.entries.push_back({0, v, last.left, last.right});
            first = false;
        }
        return v;
    };
    const optim::IterationCallback cb = [&](int it, double v) {
        stage.entries.push_back({it, v, last.left, last.right});
    };
    optim::Result res;
    try {
        res = optim::minimize(logged, x0, opts, cb);
    } catch (const optim::OptimizationError& e) {
        unflatten_fn(e.last_x(), params);
        throw;
    }
    unflatten_fn(res.x, params);
    stage.iterations = res.iterations;
    stage.evaluations = res.evaluations;
    stage.status = res.status;
    return stage;
}

ChannelBindings encode_bindings(const SmcaeLayer& layer, const ChannelBindings& data) {
    auto enc = [&](const FeatureMatrix& x) { return ae::affine_sigmoid(x, layer.enc_w, layer.enc_b); };
    ChannelBindings next;
    next.left = {enc(data.left.input), enc(data.left.target)};
    if (data.two_channel()) next.right = ChannelData{enc(data.right->input), enc(data.right->target)};
    return next;
}

}  // namespace

TrainedLayer train_layer(const ChannelBindings& data, int hidden_dim, const ae::SparsityConfig& s,
                         double gamma, const optim::LbfgsOptions& opts, std::uint64_t seed) {
    if (hidden_dim < 1) throw DomainError("hidden layer width must be at least 1");
    if (data.left.input.rows() == 0) throw ShapeError("training data is empty");
    s.validate();
    Rng rng(seed);
    TrainedLayer out;
    out.layer = SmcaeLayer::initialize(data.input_dim(), hidden_dim, data.two_channel(), rng);
    const double g = data.two_channel() ? gamma : 0.0;
    try {
        out.log = run_stage(
            "layer", out.layer, [](const SmcaeLayer& l) { return flatten(l); },
            [](const Vector& x, SmcaeLayer& l) { unflatten(x, l); },
            [&](const SmcaeLayer& l) { return layer_evaluate(l, data, s, g); }, opts);
    } catch (const optim::OptimizationError& e) {
        throw TrainingError(std::string("layer training diverged: ") + e.what(), out.layer);
    }
    return out;
}

TrainedLayer train_layer(const FeatureMatrix& xs, const FeatureMatrix& xr, int hidden_dim,
                         const ae::SparsityConfig& s, double gamma,
                         const optim::LbfgsOptions& opts, std::uint64_t seed) {
    return train_layer(build_variant(Variant::smcae, xs, xr), hidden_dim, s, gamma, opts, seed);
}

SmcaeModel train_stack(const FeatureMatrix& xs, const FeatureMatrix& xr, const SmcaeConfig& config,
                       Variant variant) {
    config.validate();
    SmcaeModel model;
    model.config = config;
    model.variant = variant;
    const ChannelBindings data = build_variant(variant, xs, xr);
    const double gamma = data.two_channel() ? config.gamma : 0.0;
    const auto opts = config.lbfgs_options();

    ChannelBindings current = data;
    for (std::size_t j = 0; j < config.layer_sizes.size(); ++j) {
        auto trained = train_layer(current, config.layer_sizes[j], config.sparsity, gamma, opts,
                                   config.rng_seed + j);
        trained.log.name = "layer" + std::to_string(j + 1);
        model.layers.push_back(std::move(trained.layer));
        model.training_log.push_back(std::move(trained.log));
        if (j + 1 < config.layer_sizes.size()) current = encode_bindings(model.layers.back(), current);
    }

    if (config.fine_tune) {
        try {
            auto stage = run_stage(
                "finetune", model.layers,
                [](const std::vector<SmcaeLayer>& ls) { return flatten_stack(ls); },
                [](const Vector& x, std::vector<SmcaeLayer>& ls) { unflatten_stack(x, ls); },
                [&](const std::vector<SmcaeLayer>& ls) { return stack_evaluate(ls, data, config.sparsity, gamma); },
                opts);
            model.training_log.push_back(std::move(stage));
        } catch (const optim::OptimizationError& e) {
            throw TrainingError(std::string("fine-tuning diverged: ") + e.what(), model.layers.front());
        }
    }
    return model;
}

FeatureMatrix transform(const SmcaeModel& model, const FeatureMatrix& xs) {
    if (!model.trained()) throw DomainError("cannot transform with an untrained model");
    if (xs.cols() != model.input_dim()) {
        throw ShapeError("model expects " + std::to_string(model.input_dim()) + " features, got " +
                         std::to_string(xs.cols()));
    }
    Matrix h = xs;
    for (const auto& l : model.layers) h = ae::affine_sigmoid(h, l.enc_w, l.enc_b);
    for (std::size_t j = model.layers.size(); j-- > 0;) {
        h = ae::affine_sigmoid(h, model.layers[j].left_w, model.layers[j].left_b);
    }
    return h;
}

}  // namespace smcae
