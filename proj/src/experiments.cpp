#include "smcae/experiments.hpp"

#include "smcae/ae_core.hpp"
#include "smcae/optim.hpp"
#include "smcae/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>

namespace smcae::exp {

namespace {

void say(const Progress& p, const std::string& msg) {
    if (p) p(msg);
}

std::string join_numbers(const std::vector<double>& v) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + format_number(v[i]);
    return out;
}

// Distinct, well-mixed stream seeds derived from one base seed.
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t salt) {
    std::uint64_t z = base + 0x9E3779B97F4A7C15ull * (salt + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

FeatureMatrix vstack(const FeatureMatrix& a, const FeatureMatrix& b) {
    if (a.rows() == 0) return b;
    if (b.rows() == 0) return a;
    if (a.cols() != b.cols()) throw ShapeError("vstack: " + shape_string(a.rows(), a.cols()) + " vs " +
                                               shape_string(b.rows(), b.cols()));
    FeatureMatrix out(a.rows() + b.rows(), a.cols());
    out << a, b;
    return out;
}

FeatureMatrix select_rows(const FeatureMatrix& x, const std::vector<int>& rows) {
    FeatureMatrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
    for (std::size_t i = 0; i < rows.size(); ++i) out.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
    return out;
}

template <class T>
std::vector<T> concat(std::vector<T> a, const std::vector<T>& b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
}

// `count` row indices spread evenly over classes (remainder to the lowest
// classes), each class drawn without replacement in seeded random order.
std::vector<int> balanced_subset(const std::vector<int>& labels, int count, std::uint64_t seed) {
    std::map<int, std::vector<int>> members;
    for (std::size_t i = 0; i < labels.size(); ++i) members[labels[i]].push_back(static_cast<int>(i));
    if (count > static_cast<int>(labels.size()))
        throw DomainError("requested " + std::to_string(count) + " rows from a pool of " + std::to_string(labels.size()));
    const int classes = static_cast<int>(members.size());
    Rng rng(seed);
    std::vector<int> out;
    int k = 0;
    for (auto& [cls, idx] : members) {
        const int want = count / classes + (k < count % classes ? 1 : 0);
        if (want > static_cast<int>(idx.size()))
            throw DomainError("class " + std::to_string(cls) + " has " + std::to_string(idx.size()) + " rows, " +
                              std::to_string(want) + " requested");
        rng.shuffle(idx.begin(), idx.end());
        out.insert(out.end(), idx.begin(), idx.begin() + want);
        ++k;
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace

void ExperimentConfig::validate() const {
    smcae.validate();
    hog.validate();
    match.validate();
    auto positive = [](int v, const char* name) {
        if (v <= 0) throw DomainError(std::string(name) + " must be positive, got " + std::to_string(v));
    };
    positive(image_size, "image_size");
    positive(pairs_per_digit, "pairs_per_digit");
    positive(synthetic_per_class, "synthetic_per_class");
    positive(prototype_images, "prototype_images");
    positive(replicates, "replicates");
    positive(schedule_step, "schedule_step");
    positive(schedule_start, "schedule_start");
    if (schedule_stop < schedule_start) throw DomainError("schedule_stop is below schedule_start");
    if (control_points < 3) throw DomainError("control_points must be at least 3");
    if (cv_folds < 2) throw DomainError("cv_folds must be at least 2");
    if (cv_subsample < 0) throw DomainError("cv_subsample must be non-negative");
    if (svm_c < 0.0 || svm_g < 0.0) throw DomainError("svm_c and svm_g must be non-negative");
    if (gammas.empty()) throw DomainError("gammas must not be empty");
    for (double g : gammas)
        if (!(g >= 0.0)) throw DomainError("gammas must be non-negative");
}

std::vector<int> ExperimentConfig::schedule() const {
    std::vector<int> out;
    for (int c = schedule_start; c <= schedule_stop; c += schedule_step) out.push_back(c);
    return out;
}

std::string ExperimentConfig::to_text() const {
    std::ostringstream o;
    auto kv = [&](const char* k, const std::string& v) { o << k << " = " << v << '\n'; };
    auto num = [&](const char* k, double v) { kv(k, format_number(v)); };
    kv("train_path", train_path);
    kv("test_path", test_path);
    kv("bitmap_train_path", bitmap_train_path);
    kv("bitmap_test_path", bitmap_test_path);
    kv("photo_dir", photo_dir);
    kv("sketch_dir", sketch_dir);
    kv("split_file", split_file);
    num("image_size", image_size);
    std::string sizes;
    for (std::size_t i = 0; i < smcae.layer_sizes.size(); ++i) sizes += (i ? "," : "") + std::to_string(smcae.layer_sizes[i]);
    kv("layer_sizes", sizes);
    num("sparsity_target", smcae.sparsity.target);
    num("sparsity_weight", smcae.sparsity.weight);
    num("weight_decay", smcae.sparsity.decay);
    num("gamma", smcae.gamma);
    num("max_iterations", smcae.max_iterations);
    num("tolerance", smcae.tolerance);
    num("memory", smcae.memory);
    kv("fine_tune", smcae.fine_tune ? "true" : "false");
    kv("variant", to_string(variant));
    kv("scale_features", scale_features ? "true" : "false");
    num("hog_cell_size", hog.cell_size);
    num("hog_bins", hog.orientation_bins);
    num("hog_block_size", hog.block_size);
    num("hog_block_stride", hog.block_stride);
    kv("hog_signed", hog.signed_orientation ? "true" : "false");
    num("pairs_per_digit", pairs_per_digit);
    num("synthetic_per_class", synthetic_per_class);
    num("prototype_images", prototype_images);
    num("control_points", control_points);
    num("match_steps", match.steps);
    num("match_iterations", match.max_iterations);
    num("match_tolerance", match.tolerance);
    num("schedule_start", schedule_start);
    num("schedule_stop", schedule_stop);
    num("schedule_step", schedule_step);
    num("replicates", replicates);
    num("cv_folds", cv_folds);
    num("cv_subsample", cv_subsample);
    num("svm_c", svm_c);
    num("svm_g", svm_g);
    kv("averaging", averaging == eval::Averaging::macro ? "macro" : "micro");
    kv("run_schedule", run_schedule ? "true" : "false");
    kv("gammas", join_numbers(gammas));
    kv("seed", std::to_string(seed));
    return o.str();
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : cfg.to_text()) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

std::string format_number(double v) {
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

void write_results_csv(std::ostream& out, const std::vector<ResultRow>& rows) {
    out << kResultHeader << '\n';
    for (const auto& r : rows)
        out << r.experiment << ',' << r.variant << ',' << r.training_set << ',' << r.count << ',' << r.seed << ','
            << r.metric << ',' << format_number(r.value) << '\n';
}

void write_results_csv(const std::vector<ResultRow>& rows, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    write_results_csv(out, rows);
}

std::string manifest_json(const Manifest& m) {
    nlohmann::json j;
    j["command"] = m.command;
    j["config_hash"] = m.config_hash;
    j["seed"] = m.seed;
    j["feature_source"] = m.feature_source;
    j["outputs"] = m.outputs;
    j["warnings"] = m.warnings;
    j["config"] = m.config_text;
    j["versions"] = {{"smcae", kVersion}, {"model_format", 1}, {"shape_format", 1}};
    return j.dump(2) + "\n";
}

void write_manifest(const Manifest& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path + "'");
    out << manifest_json(m);
}

SynthesisOptions synthesis_options(const ExperimentConfig& cfg) {
    SynthesisOptions o;
    o.pairs_per_digit = cfg.pairs_per_digit;
    o.samples_per_class = cfg.synthetic_per_class;
    o.prototype_images = cfg.prototype_images;
    o.control_points = cfg.control_points;
    o.match = cfg.match;
    return o;
}

DigitSynthesis synthesize_digits(const data::LabeledBitmaps& train, const SynthesisOptions& opts,
                                 std::uint64_t seed, const Progress& progress) {
    if (train.images.size() != train.labels.size()) throw ShapeError("bitmaps and labels differ in length");
    if (train.images.empty()) throw DomainError("no training bitmaps");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < train.labels.size(); ++i) by_class[train.labels[i]].push_back(i);

    DigitSynthesis out;
    const int max_class = by_class.rbegin()->first;
    out.prototypes.resize(static_cast<std::size_t>(max_class + 1));
    out.prototype_shapes.resize(static_cast<std::size_t>(max_class + 1));
    double iou_start = 0.0, iou_matched = 0.0;
    std::size_t matched = 0;

    for (const auto& [cls, idx] : by_class) {
        const int w = train.images[idx.front()].width(), h = train.images[idx.front()].height();
        std::vector<GrayImage> gray;
        for (std::size_t k = 0; k < idx.size() && static_cast<int>(k) < opts.prototype_images; ++k)
            gray.push_back(to_gray(train.images[idx[k]]));
        const auto proto = build_prototype(gray, opts.prototype);
        const BinaryImage proto_bin = binarize(proto.prototype.pixels, BinarizeMode::intensity, 0.5);
        const ShapeModel shape = extract_control_points(proto_bin, opts.control_points);
        const BinaryImage start = rasterize(shape, w, h);
        out.prototypes[static_cast<std::size_t>(cls)] = start;
        out.prototype_shapes[static_cast<std::size_t>(cls)] = shape;

        std::vector<ShapeModel> shapes;
        for (std::size_t k = 0; k < idx.size() && static_cast<int>(k) < opts.pairs_per_digit; ++k) {
            const BinaryImage& real = train.images[idx[k]];
            const MatchResult m = match_synthetic(real, shape, start, opts.match);
            out.pair_synthetic.push_back(m.image);
            out.pair_real.push_back(real);
            out.pair_labels.push_back(cls);
            shapes.push_back(m.shape);
            iou_start += iou(start, real);
            iou_matched += m.iou;
            ++matched;
        }

        const ShapeDistribution dist = fit_mvn(shapes);
        for (const auto& s : sample_shapes(dist, opts.samples_per_class, derive_seed(seed, static_cast<std::uint64_t>(cls)))) {
            out.samples.push_back(rasterize(s, w, h));
            out.sample_labels.push_back(cls);
        }
        say(progress, "class " + std::to_string(cls) + ": " + std::to_string(shapes.size()) + " matched, " +
                          std::to_string(opts.samples_per_class) + " sampled");
    }
    out.mean_iou_start = iou_start / static_cast<double>(matched);
    out.mean_iou_matched = iou_matched / static_cast<double>(matched);
    return out;
}

FeatureMatrix bitmap_features(const std::vector<BinaryImage>& images, const HogConfig& cfg) {
    std::vector<GrayImage> gray;
    gray.reserve(images.size());
    for (const auto& b : images) gray.push_back(to_gray(b));
    return hog_features(gray, cfg);
}

SvmChoice choose_svm_parameters(const FeatureMatrix& x, const eval::Labels& y, const ExperimentConfig& cfg) {
    if (cfg.svm_c > 0.0 && cfg.svm_g > 0.0) return {cfg.svm_c, cfg.svm_g, false};
    FeatureMatrix xs = x;
    eval::Labels ys = y;
    if (cfg.cv_subsample > 0 && cfg.cv_subsample < static_cast<int>(y.size())) {
        const auto rows = balanced_subset(y, cfg.cv_subsample, derive_seed(cfg.seed, 1000));
        xs = select_rows(x, rows);
        ys.clear();
        for (int r : rows) ys.push_back(y[static_cast<std::size_t>(r)]);
    }
    const auto cv = eval::cross_validate(xs, ys, eval::default_c_grid(), eval::default_g_grid(x.cols()), cfg.cv_folds,
                                         cfg.seed, cfg.averaging);
    return {cv.c_box, cv.g_rbf, true};
}

double svm_f1(const FeatureMatrix& x, const eval::Labels& y, const FeatureMatrix& test_x, const eval::Labels& test_y,
              const SvmChoice& p, eval::Averaging avg) {
    const auto model = eval::svm_train(x, y, p.c_box, p.g_rbf);
    return eval::f1_score(eval::svm_predict(model, test_x), test_y, avg);
}

namespace {

struct PreparedDigits {
    DigitSynthesis synth;
    FeatureMatrix real, test, pair_syn, pair_real, samples;
    eval::Labels real_y, test_y;
    std::optional<FeatureScaler> scaler;
};

PreparedDigits prepare_digits(const ExperimentConfig& cfg, const data::DigitData& data, const Progress& progress) {
    PreparedDigits p;
    say(progress, "synthesizing digits");
    p.synth = synthesize_digits(data.train, synthesis_options(cfg), cfg.seed, progress);
    say(progress, "extracting features");
    p.real = bitmap_features(data.train.images, cfg.hog);
    p.test = bitmap_features(data.test.images, cfg.hog);
    p.pair_syn = bitmap_features(p.synth.pair_synthetic, cfg.hog);
    p.pair_real = bitmap_features(p.synth.pair_real, cfg.hog);
    p.samples = bitmap_features(p.synth.samples, cfg.hog);
    p.real_y = data.train.labels;
    p.test_y = data.test.labels;
    if (cfg.scale_features) {
        p.scaler = FeatureScaler::fit(vstack(p.real, p.pair_syn));
        for (auto* m : {&p.real, &p.test, &p.pair_syn, &p.pair_real, &p.samples}) *m = p.scaler->apply(*m);
    }
    return p;
}

SmcaeConfig seeded(const ExperimentConfig& cfg) {
    SmcaeConfig c = cfg.smcae;
    c.rng_seed = cfg.seed;
    return c;
}

}  // namespace

DigitsOutcome run_digits_experiment(const ExperimentConfig& cfg, const data::DigitData& data,
                                    const Progress& progress) {
    cfg.validate();
    const auto p = prepare_digits(cfg, data, progress);
    DigitsOutcome out;

    say(progress, "training autoencoder");
    out.model = train_stack(p.pair_syn, p.pair_real, seeded(cfg), cfg.variant);
    out.model.scaler = p.scaler;
    const FeatureMatrix transformed = transform(out.model, p.samples);
    const auto& sample_y = p.synth.sample_labels;

    // Every classifier gets its own cross-validated parameters.
    const std::string variant = to_string(cfg.variant);
    auto add = [&](const std::string& set, long count, std::uint64_t seed, const FeatureMatrix& x, const eval::Labels& y) {
        say(progress, "training set: " + set);
        const SvmChoice svm = choose_svm_parameters(x, y, cfg);
        if (set == "real") out.svm = svm;
        out.report.set("svm_c_" + set, svm.c_box);
        out.report.set("svm_g_" + set, svm.g_rbf);
        out.rows.push_back({"digits", variant, set, count, seed, "f1", svm_f1(x, y, p.test, p.test_y, svm, cfg.averaging)});
    };
    const long n_syn = static_cast<long>(sample_y.size());
    add("real", 0, cfg.seed, p.real, p.real_y);
    add("synthetic", n_syn, cfg.seed, p.samples, sample_y);
    add("transformed", n_syn, cfg.seed, transformed, sample_y);
    add("real+transformed", n_syn, cfg.seed, vstack(p.real, transformed), concat(p.real_y, sample_y));

    if (cfg.run_schedule) {
        for (int count : cfg.schedule()) {
            for (int r = 0; r < cfg.replicates; ++r) {
                const std::uint64_t s = cfg.seed + static_cast<std::uint64_t>(r);
                const auto rows = balanced_subset(sample_y, count, derive_seed(s, 2000));
                eval::Labels y = p.real_y;
                for (int i : rows) y.push_back(sample_y[static_cast<std::size_t>(i)]);
                const FeatureMatrix x = vstack(p.real, select_rows(transformed, rows));
                say(progress, "schedule: " + std::to_string(count) + " transformed, seed " + std::to_string(s));
                const SvmChoice svm = choose_svm_parameters(x, y, cfg);
                out.rows.push_back({"digits-schedule", variant, "real+transformed", count, s, "f1",
                                    svm_f1(x, y, p.test, p.test_y, svm, cfg.averaging)});
            }
        }
    }

    out.report.set("autoencoder_iterations", out.model.total_iterations());
    out.report.set("pairs", static_cast<double>(p.synth.pair_labels.size()));
    out.report.set("synthetic_samples", static_cast<double>(n_syn));
    out.report.set("mean_iou_prototype", p.synth.mean_iou_start);
    out.report.set("mean_iou_matched", p.synth.mean_iou_matched);
    for (const auto& r : out.rows)
        if (r.experiment == "digits") out.report.set("f1_" + r.training_set, r.value);
    return out;
}

CufsfOutcome retrieval_study(const FeatureMatrix& sketch_train, const FeatureMatrix& photo_train,
                             const FeatureMatrix& sketch_test, const FeatureMatrix& photo_test,
                             const ExperimentConfig& cfg, const Progress& progress) {
    cfg.validate();
    if (sketch_test.rows() != photo_test.rows()) throw ShapeError("test sketches and photos must be paired");
    FeatureMatrix s_train = sketch_train, p_train = photo_train, s_test = sketch_test, p_test = photo_test;
    if (cfg.scale_features) {
        const auto scaler = FeatureScaler::fit(vstack(s_train, p_train));
        for (auto* m : {&s_train, &p_train, &s_test, &p_test}) *m = scaler.apply(*m);
    }
    say(progress, "training autoencoder");
    const SmcaeModel model = train_stack(s_train, p_train, seeded(cfg), cfg.variant);
    const FeatureMatrix queries = transform(model, s_test);

    std::vector<int> truth(static_cast<std::size_t>(sketch_test.rows()));
    std::iota(truth.begin(), truth.end(), 0);
    CufsfOutcome out;
    out.roc_raw = eval::roc_and_auc(eval::distance_scores(sketch_test, photo_test, truth));
    out.roc_transformed = eval::roc_and_auc(eval::distance_scores(queries, p_test, truth));
    const std::string variant = to_string(cfg.variant);
    const long n = static_cast<long>(truth.size());
    auto emit = [&](const std::string& set, const eval::Roc& roc, double r1) {
        const double vr = eval::vr_at_far(roc, 0.001);
        out.rows.push_back({"cufsf", variant, set, n, cfg.seed, "auc", roc.auc});
        out.rows.push_back({"cufsf", variant, set, n, cfg.seed, "vr_at_0.1%far", vr});
        out.rows.push_back({"cufsf", variant, set, n, cfg.seed, "rank1", r1});
        out.report.set(set + "_auc", roc.auc);
        out.report.set(set + "_vr_at_0.1%far", vr);
        out.report.set(set + "_rank1", r1);
    };
    emit("raw", out.roc_raw, eval::rank1(sketch_test, photo_test, truth));
    emit("transformed", out.roc_transformed, eval::rank1(queries, p_test, truth));
    out.report.set("autoencoder_iterations", model.total_iterations());
    return out;
}

CufsfOutcome run_cufsf_experiment(const ExperimentConfig& cfg, const data::PairSplit& pairs, const Progress& progress) {
    cfg.validate();
    if (pairs.train.empty() || pairs.test.empty()) throw DomainError("face-sketch study needs training and test pairs");
    auto features = [&](const std::vector<data::ImagePair>& ps, bool sketch) {
        std::vector<GrayImage> imgs;
        for (const auto& p : ps) imgs.push_back(resize(sketch ? p.sketch : p.photo, cfg.image_size, cfg.image_size));
        return hog_features(imgs, cfg.hog);
    };
    say(progress, "extracting features");
    return retrieval_study(features(pairs.train, true), features(pairs.train, false), features(pairs.test, true),
                           features(pairs.test, false), cfg, progress);
}

std::vector<GammaRow> run_gamma_sweep(const ExperimentConfig& cfg, const data::DigitData& data,
                                      const Progress& progress) {
    cfg.validate();
    const auto p = prepare_digits(cfg, data, progress);
    const auto y = concat(p.real_y, p.synth.sample_labels);
    std::vector<GammaRow> rows;
    for (double g : cfg.gammas) {
        say(progress, "gamma " + format_number(g));
        SmcaeConfig c = seeded(cfg);
        c.gamma = g;
        const auto model = train_stack(p.pair_syn, p.pair_real, c, cfg.variant);
        const FeatureMatrix x = vstack(p.real, transform(model, p.samples));
        const double f1 = svm_f1(x, y, p.test, p.test_y, choose_svm_parameters(x, y, cfg), cfg.averaging);
        rows.push_back({g, f1, model.total_iterations()});
    }
    return rows;
}

void write_gamma_csv(std::ostream& out, const std::vector<GammaRow>& rows) {
    out << kGammaHeader << '\n';
    for (const auto& r : rows) out << format_number(r.gamma) << ',' << format_number(r.f1) << ',' << r.iterations << '\n';
}

namespace {

// Per-block maximum of the relative error, blocks given as (name, length)
// over the flattened layout.
void block_errors(const Vector& analytic, const Vector& numeric,
                  const std::vector<std::pair<std::string, Eigen::Index>>& blocks, double gamma,
                  GradcheckReport& report) {
    Eigen::Index offset = 0;
    for (const auto& [name, len] : blocks) {
        const double e = optim::relative_gradient_error(analytic.segment(offset, len), numeric.segment(offset, len));
        report.lines.push_back({gamma, name, e});
        report.worst = std::max(report.worst, e);
        offset += len;
    }
}

}  // namespace

GradcheckReport run_gradcheck(std::uint64_t seed, double threshold, bool sabotage) {
    constexpr Eigen::Index m = 6, k = 4, n = 8;
    const double factor = sabotage ? 2.0 : 1.0;
    const ae::SparsityConfig sparsity;
    Rng rng(seed);
    auto random = [&](Eigen::Index r, Eigen::Index c) {
        Matrix x(r, c);
        for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(0.05, 0.95);
        return x;
    };
    const FeatureMatrix xs = random(n, m), xr = random(n, m);
    SmcaeLayer base = SmcaeLayer::initialize(m, k, true, rng);
    for (Vector* b : {&base.enc_b, &base.left_b, &base.right_b})
        for (Eigen::Index i = 0; i < b->size(); ++i) (*b)[i] = rng.uniform(-0.5, 0.5);

    GradcheckReport report;
    const std::vector<std::pair<std::string, Eigen::Index>> layer_blocks{
        {"encoder_weights", k * m}, {"encoder_bias", k}, {"left_weights", m * k},
        {"left_bias", m},           {"right_weights", m * k}, {"right_bias", m}};
    const std::vector<std::pair<std::string, Eigen::Index>> channel_blocks{
        {"channel_encoder_weights", k * m}, {"channel_encoder_bias", k},
        {"channel_decoder_weights", m * k}, {"channel_decoder_bias", m}};

    auto channel_flat = [](const ae::ChannelParams& p) {
        Vector v(p.enc_w.size() + p.enc_b.size() + p.dec_w.size() + p.dec_b.size());
        v << Eigen::Map<const Vector>(p.enc_w.data(), p.enc_w.size()), p.enc_b,
            Eigen::Map<const Vector>(p.dec_w.data(), p.dec_w.size()), p.dec_b;
        return v;
    };
    auto channel_unflat = [&](const Vector& v) {
        ae::ChannelParams p = ae::ChannelParams::zeros(m, k);
        std::copy(v.data(), v.data() + p.enc_w.size(), p.enc_w.data());
        Eigen::Index o = p.enc_w.size();
        p.enc_b = v.segment(o, k);
        o += k;
        std::copy(v.data() + o, v.data() + o + p.dec_w.size(), p.dec_w.data());
        o += p.dec_w.size();
        p.dec_b = v.segment(o, m);
        return p;
    };

    const Vector cx = channel_flat(base.left());
    const optim::Objective cf = [&](const Vector& v) { return ae::channel_objective(channel_unflat(v), xs, xr, sparsity); };
    const Vector canalytic = factor * channel_flat(ae::channel_gradient(base.left(), xs, xr, sparsity));
    block_errors(canalytic, optim::finite_diff(cf, cx), channel_blocks, 0.0, report);

    for (double gamma : {0.0, 1.0, 50.0}) {
        const Vector x = flatten(base);
        const optim::Objective f = [&](const Vector& v) {
            SmcaeLayer l = base;
            unflatten(v, l);
            return smcae_objective(l, xs, xr, sparsity, gamma).total;
        };
        const Vector analytic = factor * flatten(smcae_gradient(base, xs, xr, sparsity, gamma));
        block_errors(analytic, optim::finite_diff(f, x), layer_blocks, gamma, report);
    }
    report.passed = report.worst <= threshold;
    return report;
}

}  // namespace smcae::exp
