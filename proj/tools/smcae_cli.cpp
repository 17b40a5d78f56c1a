#include "smcae/datasets.hpp"
#include "smcae/experiments.hpp"
#include "smcae/model.hpp"
#include "smcae/scaling.hpp"

#include <CLI11.hpp>
#include <malloc.h>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using namespace smcae;

namespace {

struct Settings {
    exp::ExperimentConfig cfg;
    std::string variant = "smcae";
    std::string averaging = "macro";
    bool quiet = false;

    void finish() {
        cfg.variant = parse_variant(variant);
        if (averaging == "macro") cfg.averaging = eval::Averaging::macro;
        else if (averaging == "micro") cfg.averaging = eval::Averaging::micro;
        else throw DomainError("averaging must be 'macro' or 'micro', got '" + averaging + "'");
        cfg.validate();
    }
};

void add_config_options(CLI::App& app, Settings& s) {
    auto& c = s.cfg;
    app.add_option("--train_path", c.train_path, "Preprocessed optical-digits training file");
    app.add_option("--test_path", c.test_path, "Preprocessed optical-digits test file");
    app.add_option("--bitmap_train_path", c.bitmap_train_path, "32x32 bitmap training file (optional)");
    app.add_option("--bitmap_test_path", c.bitmap_test_path, "32x32 bitmap test file (optional)");
    app.add_option("--photo_dir", c.photo_dir, "Face photo directory");
    app.add_option("--sketch_dir", c.sketch_dir, "Face sketch directory");
    app.add_option("--split_file", c.split_file, "Train/test identifier list");
    app.add_option("--image_size", c.image_size, "Side of the square photos and sketches are resized to");
    app.add_option("--layer_sizes", c.smcae.layer_sizes, "Hidden units per layer")->delimiter(',');
    app.add_option("--sparsity_target", c.smcae.sparsity.target, "Target mean activation");
    app.add_option("--sparsity_weight", c.smcae.sparsity.weight, "Weight of the sparsity penalty");
    app.add_option("--weight_decay", c.smcae.sparsity.decay, "Weight decay");
    app.add_option("--gamma", c.smcae.gamma, "Balance weight between the two channels");
    app.add_option("--max_iterations", c.smcae.max_iterations, "L-BFGS iteration cap per stage");
    app.add_option("--tolerance", c.smcae.tolerance, "Relative objective decrease that stops a stage");
    app.add_option("--memory", c.smcae.memory, "L-BFGS history length");
    app.add_option("--fine_tune", c.smcae.fine_tune, "Fine-tune the unrolled stack");
    app.add_option("--variant", s.variant, "smcae, smcae_ii, sae_i or sae_ii");
    app.add_option("--scale_features", c.scale_features, "Min-max rescale features before the autoencoder");
    app.add_option("--hog_cell_size", c.hog.cell_size, "HOG cell side in pixels");
    app.add_option("--hog_bins", c.hog.orientation_bins, "HOG orientation bins");
    app.add_option("--hog_block_size", c.hog.block_size, "HOG block side in cells");
    app.add_option("--hog_block_stride", c.hog.block_stride, "HOG block stride in cells");
    app.add_option("--hog_signed", c.hog.signed_orientation, "Signed gradient orientations");
    app.add_option("--pairs_per_digit", c.pairs_per_digit, "Real digits matched per class");
    app.add_option("--synthetic_per_class", c.synthetic_per_class, "Synthetic samples drawn per class");
    app.add_option("--prototype_images", c.prototype_images, "Images aligned into each class prototype");
    app.add_option("--control_points", c.control_points, "Boundary control points per prototype");
    app.add_option("--match_steps", c.match.steps, "Intermediate shapes per migration");
    app.add_option("--match_iterations", c.match.max_iterations, "Migration rounds per image");
    app.add_option("--match_tolerance", c.match.tolerance, "Point displacement that ends matching");
    app.add_option("--schedule_start", c.schedule_start, "First synthetic count of the schedule");
    app.add_option("--schedule_stop", c.schedule_stop, "Last synthetic count of the schedule");
    app.add_option("--schedule_step", c.schedule_step, "Schedule increment");
    app.add_option("--replicates", c.replicates, "Seeds per schedule point");
    app.add_option("--cv_folds", c.cv_folds, "Cross-validation folds");
    app.add_option("--cv_subsample", c.cv_subsample, "Rows used for cross-validation (0 = all)");
    app.add_option("--svm_c", c.svm_c, "Fixed SVM box constraint (with --svm_g skips cross-validation)");
    app.add_option("--svm_g", c.svm_g, "Fixed RBF bandwidth");
    app.add_option("--averaging", s.averaging, "F1 averaging: macro or micro");
    app.add_option("--run_schedule", c.run_schedule, "Run the growing synthetic-count schedule");
    app.add_option("--gammas", c.gammas, "Balance weights for the sweep")->delimiter(',');
    app.add_option("--seed", c.seed, "Random seed");
    app.add_option("--output_dir", c.output_dir, "Directory for results");
    app.add_option("--workers", "Accepted for compatibility; every command runs on one thread")->check(CLI::PositiveNumber);
    app.add_flag("--quiet", s.quiet, "No progress messages");
}

exp::Progress progress(const Settings& s) {
    if (s.quiet) return {};
    return [](const std::string& m) { std::cerr << "[smcae] " << m << '\n'; };
}

fs::path output_dir(const Settings& s) {
    const fs::path dir(s.cfg.output_dir);
    fs::create_directories(dir);
    return dir;
}

exp::Manifest manifest(const Settings& s, const std::string& command) {
    exp::Manifest m;
    m.command = command;
    m.config_hash = exp::config_hash(s.cfg);
    m.seed = s.cfg.seed;
    m.config_text = s.cfg.to_text();
    return m;
}

void write_text(const fs::path& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw ParseError("cannot write '" + path.string() + "'");
    out << text;
}

data::DigitData load_digits(const Settings& s) {
    auto d = data::load_digits(s.cfg.train_path, s.cfg.test_path, s.cfg.bitmap_train_path, s.cfg.bitmap_test_path);
    for (const auto& w : d.warnings) std::cerr << "warning: " << w << '\n';
    return d;
}

int cmd_train(const Settings& s, const std::string& xs_path, const std::string& xr_path, const std::string& model_path) {
    FeatureMatrix xs = data::read_feature_csv(xs_path);
    FeatureMatrix xr = data::read_feature_csv(xr_path);
    std::optional<FeatureScaler> scaler;
    if (s.cfg.scale_features) {
        FeatureMatrix both(xs.rows() + xr.rows(), xs.cols());
        if (xs.cols() != xr.cols()) throw ShapeError("synthetic and real features differ in width");
        both << xs, xr;
        scaler = FeatureScaler::fit(both);
        xs = scaler->apply(xs);
        xr = scaler->apply(xr);
    }
    SmcaeConfig c = s.cfg.smcae;
    c.rng_seed = s.cfg.seed;
    auto model = train_stack(xs, xr, c, s.cfg.variant);
    model.scaler = scaler;
    save_model(model, model_path);
    for (const auto& st : model.training_log)
        std::cout << st.name << ": " << st.iterations << " iterations, " << optim::to_string(st.status) << '\n';
    return 0;
}

int cmd_transform(const std::string& model_path, const std::string& in_path, const std::string& out_path) {
    const auto model = load_model(model_path);
    FeatureMatrix x = data::read_feature_csv(in_path);
    if (model.scaler) x = model.scaler->apply(x);
    data::write_feature_csv(transform(model, x), out_path);
    return 0;
}

int cmd_generate(const Settings& s) {
    const auto d = load_digits(s);
    const auto synth = exp::synthesize_digits(d.train, exp::synthesis_options(s.cfg), s.cfg.seed, progress(s));
    const auto dir = output_dir(s);
    auto m = manifest(s, "generate-digits");
    m.feature_source = d.bitmap_source;
    m.warnings = d.warnings;
    {
        std::ofstream out(dir / "synthetic_digits.txt", std::ios::binary);
        for (std::size_t i = 0; i < synth.samples.size(); ++i)
            data::write_optdigits_bitmap(out, synth.samples[i], synth.sample_labels[i]);
        std::ofstream pairs(dir / "matched_digits.txt", std::ios::binary);
        for (std::size_t i = 0; i < synth.pair_synthetic.size(); ++i)
            data::write_optdigits_bitmap(pairs, synth.pair_synthetic[i], synth.pair_labels[i]);
    }
    m.outputs = {"synthetic_digits.txt", "matched_digits.txt"};
    for (std::size_t c = 0; c < synth.prototype_shapes.size(); ++c) {
        if (synth.prototype_shapes[c].points.empty()) continue;
        const std::string name = "prototype_" + std::to_string(c) + ".shape";
        save_shape(synth.prototype_shapes[c], (dir / name).string());
        m.outputs.push_back(name);
    }
    exp::write_manifest(m, (dir / "manifest.json").string());
    std::cout << synth.samples.size() << " synthetic digits, mean IoU " << exp::format_number(synth.mean_iou_start)
              << " -> " << exp::format_number(synth.mean_iou_matched) << '\n';
    return 0;
}

int cmd_eval_digits(const Settings& s) {
    const auto d = load_digits(s);
    const auto out = exp::run_digits_experiment(s.cfg, d, progress(s));
    const auto dir = output_dir(s);
    exp::write_results_csv(out.rows, (dir / "results.csv").string());
    write_text(dir / "metrics.txt", out.report.to_text());
    write_text(dir / "metrics.json", out.report.to_json() + "\n");
    save_model(out.model, (dir / "model.smcae").string());
    auto m = manifest(s, "eval-digits");
    m.feature_source = d.bitmap_source;
    m.warnings = d.warnings;
    m.outputs = {"results.csv", "metrics.txt", "metrics.json", "model.smcae"};
    exp::write_manifest(m, (dir / "manifest.json").string());
    std::cout << out.report.to_text();
    return 0;
}

int cmd_eval_cufsf(const Settings& s) {
    if (s.cfg.photo_dir.empty() || s.cfg.sketch_dir.empty() || s.cfg.split_file.empty()) {
        std::cerr << "error: the face-sketch dataset is user-supplied; set --photo_dir, --sketch_dir and "
                     "--split_file to a local copy\n";
        return 2;
    }
    const auto pairs = data::load_image_pairs(s.cfg.photo_dir, s.cfg.sketch_dir, s.cfg.split_file);
    const auto out = exp::run_cufsf_experiment(s.cfg, pairs, progress(s));
    const auto dir = output_dir(s);
    exp::write_results_csv(out.rows, (dir / "results.csv").string());
    {
        std::ofstream roc(dir / "roc.csv", std::ios::binary);
        roc << "query_set,far,vr\n";
        for (const auto& [name, curve] : {std::pair{"raw", &out.roc_raw}, std::pair{"transformed", &out.roc_transformed}})
            for (const auto& p : curve->curve)
                roc << name << ',' << exp::format_number(p.far) << ',' << exp::format_number(p.vr) << '\n';
    }
    write_text(dir / "metrics.txt", out.report.to_text());
    write_text(dir / "metrics.json", out.report.to_json() + "\n");
    auto m = manifest(s, "eval-cufsf");
    m.feature_source = "hog";
    m.outputs = {"results.csv", "roc.csv", "metrics.txt", "metrics.json"};
    exp::write_manifest(m, (dir / "manifest.json").string());
    std::cout << out.report.to_text();
    return 0;
}

int cmd_gamma_sweep(const Settings& s) {
    const auto d = load_digits(s);
    const auto rows = exp::run_gamma_sweep(s.cfg, d, progress(s));
    const auto dir = output_dir(s);
    {
        std::ofstream out(dir / "gamma_sweep.csv", std::ios::binary);
        exp::write_gamma_csv(out, rows);
    }
    auto m = manifest(s, "gamma-sweep");
    m.feature_source = d.bitmap_source;
    m.warnings = d.warnings;
    m.outputs = {"gamma_sweep.csv"};
    exp::write_manifest(m, (dir / "manifest.json").string());
    exp::write_gamma_csv(std::cout, rows);
    return 0;
}

int cmd_gradcheck(const Settings& s, bool sabotage) {
    const auto r = exp::run_gradcheck(s.cfg.seed, 1e-5, sabotage);
    for (const auto& l : r.lines)
        std::cout << "gamma=" << exp::format_number(l.gamma) << ' ' << l.block << ' ' << exp::format_number(l.error) << '\n';
    std::cout << (r.passed ? "PASS" : "FAIL") << " max relative error " << exp::format_number(r.worst) << '\n';
    return r.passed ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
    // Keep large temporaries on the heap so optimizer evaluations reuse pages.
    mallopt(M_MMAP_MAX, 0);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
    CLI::App app{"Stacked multichannel autoencoder experiments"};
    app.set_config("--config", "", "key = value configuration file; command-line flags win");
    app.allow_config_extras(CLI::config_extras_mode::error);
    app.require_subcommand(1);
    Settings s;
    add_config_options(app, s);

    std::string xs_path, xr_path, model_path, in_path, out_path;
    auto* train = app.add_subcommand("train", "Train an autoencoder on paired feature CSV files");
    train->add_option("--synthetic", xs_path, "Synthetic features, one row per instance")->required();
    train->add_option("--real", xr_path, "Real features paired row by row")->required();
    train->add_option("--model", model_path, "Output model file")->required();

    auto* tr = app.add_subcommand("transform", "Map synthetic features through a trained model");
    tr->add_option("--model", model_path, "Model file")->required();
    tr->add_option("--input", in_path, "Feature CSV")->required();
    tr->add_option("--output", out_path, "Output CSV")->required();

    auto* gen = app.add_subcommand("generate-digits", "Write synthetic digit bitmaps and prototypes");
    auto* digits = app.add_subcommand("eval-digits", "Digit classification study");
    auto* cufsf = app.add_subcommand("eval-cufsf", "Sketch-to-photo retrieval study");
    auto* sweep = app.add_subcommand("gamma-sweep", "Balance-weight sweep on the digit task");
    auto* grad = app.add_subcommand("gradcheck", "Finite-difference gradient check");
    bool sabotage = false;
    grad->add_flag("--inject-gradient-bug", sabotage)->group("");  // hidden test hook
    for (auto* sub : {train, tr, gen, digits, cufsf, sweep, grad}) sub->fallthrough();

    CLI11_PARSE(app, argc, argv);
    try {
        s.finish();
        if (train->parsed()) return cmd_train(s, xs_path, xr_path, model_path);
        if (tr->parsed()) return cmd_transform(model_path, in_path, out_path);
        if (gen->parsed()) return cmd_generate(s);
        if (digits->parsed()) return cmd_eval_digits(s);
        if (cufsf->parsed()) return cmd_eval_cufsf(s);
        if (sweep->parsed()) return cmd_gamma_sweep(s);
        if (grad->parsed()) return cmd_gradcheck(s, sabotage);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
    return 0;
}
