#include "oracles.hpp"
#include "smcae/model.hpp"
#include "smcae/rng.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdio>
#include <filesystem>

using namespace smcae;

namespace {

SmcaeLayer random_layer(Rng& rng, Eigen::Index m, Eigen::Index k, bool two = true) {
    SmcaeLayer l;
    l.enc_w = oracle::random_matrix(rng, k, m, -1, 1);
    l.enc_b = oracle::random_vector(rng, k, -0.5, 0.5);
    l.left_w = oracle::random_matrix(rng, m, k, -1, 1);
    l.left_b = oracle::random_vector(rng, m, -0.5, 0.5);
    if (two) {
        l.right_w = oracle::random_matrix(rng, m, k, -1, 1);
        l.right_b = oracle::random_vector(rng, m, -0.5, 0.5);
    }
    return l;
}

// E computed from the scalar-loop channel oracle.
double oracle_energy(const SmcaeLayer& l, const Matrix& xs, const Matrix& xr, const ae::SparsityConfig& s,
                     double gamma) {
    const double jl = oracle::channel_objective({l.enc_w, l.enc_b, l.left_w, l.left_b}, xs, xr, s.target,
                                                s.weight, s.decay);
    const double jr = oracle::channel_objective({l.enc_w, l.enc_b, l.right_w, l.right_b}, xr, xr, s.target,
                                                s.weight, s.decay);
    return jl + jr + gamma * 0.5 * (jl - jr) * (jl - jr);
}

std::vector<double*> layer_slots(SmcaeLayer& l) {
    std::vector<double*> out;
    for (Eigen::Index i = 0; i < l.enc_w.size(); ++i) out.push_back(l.enc_w.data() + i);
    for (Eigen::Index i = 0; i < l.enc_b.size(); ++i) out.push_back(l.enc_b.data() + i);
    for (Eigen::Index i = 0; i < l.left_w.size(); ++i) out.push_back(l.left_w.data() + i);
    for (Eigen::Index i = 0; i < l.left_b.size(); ++i) out.push_back(l.left_b.data() + i);
    for (Eigen::Index i = 0; i < l.right_w.size(); ++i) out.push_back(l.right_w.data() + i);
    for (Eigen::Index i = 0; i < l.right_b.size(); ++i) out.push_back(l.right_b.data() + i);
    return out;
}

bool same_layer(const SmcaeLayer& a, const SmcaeLayer& b) {
    return a.enc_w == b.enc_w && a.enc_b == b.enc_b && a.left_w == b.left_w && a.left_b == b.left_b &&
           a.right_w == b.right_w && a.right_b == b.right_b;
}

// Shifted-Gaussian toy pair: real ~ N(0.6, 0.05^2) clipped, synthetic = real - 0.2.
std::pair<Matrix, Matrix> shifted_pair(std::uint64_t seed, Eigen::Index n, Eigen::Index m) {
    Rng rng(seed);
    Matrix xr(n, m);
    for (Eigen::Index i = 0; i < xr.size(); ++i) xr.data()[i] = std::clamp(0.6 + 0.05 * rng.normal(), 0.01, 0.99);
    Matrix xs = (xr.array() - 0.2).cwiseMax(0.0).matrix();
    return {xs, xr};
}

double mean_row_distance(const Matrix& a, const Matrix& b) {
    return (a - b).rowwise().norm().mean();
}

}  // namespace

TEST_CASE("variant names") {
    CHECK(parse_variant("smcae") == Variant::smcae);
    CHECK(parse_variant("SMCAE-II") == Variant::smcae_ii);
    CHECK(parse_variant("sae_i") == Variant::sae_i);
    CHECK(parse_variant("SAE_II") == Variant::sae_ii);
    CHECK_THROWS((void)parse_variant("sae3"));
    for (auto v : {Variant::smcae, Variant::smcae_ii, Variant::sae_i, Variant::sae_ii})
        CHECK(parse_variant(to_string(v)) == v);
}

TEST_CASE("variant bindings") {
    Matrix xs = Matrix::Constant(3, 2, 0.1);
    Matrix xr = Matrix::Constant(3, 2, 0.9);

    auto b = build_variant(Variant::smcae, xs, xr);
    REQUIRE(b.two_channel());
    CHECK(b.left.input == xs);
    CHECK(b.left.target == xr);
    CHECK(b.right->input == xr);
    CHECK(b.right->target == xr);

    b = build_variant(Variant::smcae_ii, xs, xr);
    CHECK(b.left.input == xs);
    CHECK(b.left.target == xs);
    CHECK(b.right->input == xr);
    CHECK(b.right->target == xr);

    b = build_variant(Variant::sae_i, xs, xr);
    CHECK_FALSE(b.two_channel());
    REQUIRE(b.left.input.rows() == 6);
    CHECK(b.left.input.topRows(3) == xs);
    CHECK(b.left.input.bottomRows(3) == xr);
    CHECK(b.left.target.topRows(3) == xr);
    CHECK(b.left.target.bottomRows(3) == xr);

    b = build_variant(Variant::sae_ii, xs, xr);
    CHECK_FALSE(b.two_channel());
    CHECK(b.left.input == xs);
    CHECK(b.left.target == xr);

    CHECK_THROWS_AS((void)build_variant(Variant::smcae, xs, Matrix::Zero(4, 2)), ShapeError);
}

TEST_CASE("balanced objective") {
    CHECK(balanced_objective(3.0, 1.0, 1.0) == 6.0);
    CHECK(balanced_objective(3.0, 1.0, 0.0) == 4.0);
    CHECK(balanced_objective(2.0, 2.0, 50.0) == 4.0);
    const auto [fl, fr] = balance_factors(3.0, 1.0, 1.0);
    CHECK(fl == 3.0);
    CHECK(fr == -1.0);
}

TEST_CASE("smcae objective agrees with the channel oracle") {
    ae::SparsityConfig s{0.05, 0.2, 0.01};
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        Rng rng(seed);
        const auto l = random_layer(rng, 5, 3);
        const Matrix xs = oracle::random_matrix(rng, 7, 5, 0, 1);
        const Matrix xr = oracle::random_matrix(rng, 7, 5, 0, 1);
        for (double gamma : {0.0, 1.0, 50.0}) {
            const auto v = smcae_objective(l, xs, xr, s, gamma);
            CHECK(v.total == doctest::Approx(oracle_energy(l, xs, xr, s, gamma)).epsilon(1e-12));
            CHECK(v.total >= v.left + v.right - 1e-15);
        }
    }
}

TEST_CASE("symmetric channels make the balance term vanish") {
    Rng rng(2);
    auto l = random_layer(rng, 4, 3);
    l.right_w = l.left_w;
    l.right_b = l.left_b;
    const Matrix x = oracle::random_matrix(rng, 6, 4, 0, 1);
    ae::SparsityConfig s;
    const auto v = smcae_objective(l, x, x, s, 50.0);
    CHECK(v.left == v.right);
    CHECK(v.total == v.left + v.right);

    const auto g50 = smcae_gradient(l, x, x, s, 50.0);
    const auto g0 = smcae_gradient(l, x, x, s, 0.0);
    CHECK(same_layer(g50, g0));
}

TEST_CASE("gamma zero splits the channel gradients") {
    Rng rng(12);
    const auto l = random_layer(rng, 4, 3);
    const Matrix xs = oracle::random_matrix(rng, 6, 4, 0, 1);
    const Matrix xr = oracle::random_matrix(rng, 6, 4, 0, 1);
    ae::SparsityConfig s;
    const auto g = smcae_gradient(l, xs, xr, s, 0.0);
    const auto gl = ae::channel_gradient(l.left(), xs, xr, s);
    const auto gr = ae::channel_gradient(l.right(), xr, xr, s);
    CHECK((g.enc_w - gl.enc_w - gr.enc_w).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.enc_b - gl.enc_b - gr.enc_b).cwiseAbs().maxCoeff() < 1e-14);
    CHECK((g.left_w - gl.dec_w).cwiseAbs().maxCoeff() == 0.0);
    CHECK((g.right_w - gr.dec_w).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("smcae gradient matches finite differences of the oracle energy") {
    ae::SparsityConfig s{0.05, 0.1, 3e-3};
    double worst = 0.0;
    for (double gamma : {0.0, 1.0, 50.0}) {
        for (std::uint64_t seed = 0; seed < 20; ++seed) {
            Rng rng(1000 + seed);
            auto l = random_layer(rng, 6, 4);
            const Matrix xs = oracle::random_matrix(rng, 8, 6, 0, 1);
            const Matrix xr = oracle::random_matrix(rng, 8, 6, 0, 1);
            auto g = smcae_gradient(l, xs, xr, s, gamma);
            const auto analytic_slots = layer_slots(g);
            const auto fd = oracle::central_differences([&] { return oracle_energy(l, xs, xr, s, gamma); },
                                                        layer_slots(l));
            for (std::size_t i = 0; i < fd.size(); ++i)
                worst = std::max(worst, oracle::symmetric_relative_error(*analytic_slots[i], fd[i]));
        }
    }
    CHECK(worst < 1e-6);
}

TEST_CASE("flatten layout round trip") {
    Rng rng(1);
    const auto l = random_layer(rng, 3, 2);
    const Vector f = flatten(l);
    CHECK(f.size() == parameter_count(l));
    CHECK(f.size() == 6 + 2 + 6 + 3 + 6 + 3);
    CHECK(f[0] == l.enc_w(0, 0));
    CHECK(f[1] == l.enc_w(0, 1));
    CHECK(f[6] == l.enc_b[0]);
    CHECK(f[8] == l.left_w(0, 0));
    CHECK(f[f.size() - 1] == l.right_b[2]);
    auto back = SmcaeLayer::zeros_like(l);
    unflatten(f, back);
    CHECK(same_layer(back, l));
    CHECK_THROWS_AS(unflatten(Vector::Zero(3), back), ShapeError);
}

TEST_CASE("initialization") {
    Rng a(5), b(5);
    const auto l1 = SmcaeLayer::initialize(10, 4, true, a);
    const auto l2 = SmcaeLayer::initialize(10, 4, true, b);
    CHECK(same_layer(l1, l2));
    const double r = std::sqrt(6.0 / 14.0);
    CHECK(l1.enc_w.cwiseAbs().maxCoeff() <= r);
    CHECK(l1.left_w.cwiseAbs().maxCoeff() <= r);
    CHECK(l1.enc_b.isZero());
    CHECK(l1.right_b.isZero());
    Rng c(5);
    CHECK_FALSE(SmcaeLayer::initialize(10, 4, false, c).has_right());
}

TEST_CASE("train_layer on constant data") {
    const Matrix x = Matrix::Constant(20, 5, 0.5);
    optim::LbfgsOptions o;
    o.max_iterations = 100;
    const auto t = train_layer(x, x, 3, ae::SparsityConfig{}, 50.0, o, 7);
    const auto v = smcae_objective(t.layer, x, x, ae::SparsityConfig{0.05, 0.0, 0.0}, 0.0);
    CHECK(v.left <= 1e-3);
    CHECK(v.right <= 1e-3);
    CHECK(t.log.iterations <= 100);
}

TEST_CASE("train_layer descends and is deterministic") {
    Rng rng(3);
    const Matrix xs = oracle::random_matrix(rng, 30, 6, 0, 1);
    const Matrix xr = oracle::random_matrix(rng, 30, 6, 0, 1);
    optim::LbfgsOptions o;
    o.max_iterations = 40;
    ae::SparsityConfig s;
    const auto a = train_layer(xs, xr, 4, s, 50.0, o, 11);
    const auto b = train_layer(xs, xr, 4, s, 50.0, o, 11);
    CHECK(same_layer(a.layer, b.layer));

    Rng init(11);
    const auto start = SmcaeLayer::initialize(6, 4, true, init);
    const double e0 = smcae_objective(start, xs, xr, s, 50.0).total;
    const double e1 = smcae_objective(a.layer, xs, xr, s, 50.0).total;
    CHECK(e1 <= e0);
    REQUIRE(!a.log.entries.empty());
    CHECK(a.log.entries.front().iteration == 0);
    CHECK(a.log.entries.front().total == doctest::Approx(e0).epsilon(1e-12));
    for (std::size_t i = 1; i < a.log.entries.size(); ++i)
        CHECK(a.log.entries[i].total <= a.log.entries[i - 1].total);
}

TEST_CASE("stack of one layer equals the layer objective") {
    Rng rng(21);
    const auto l = random_layer(rng, 5, 3);
    const Matrix xs = oracle::random_matrix(rng, 9, 5, 0, 1);
    const Matrix xr = oracle::random_matrix(rng, 9, 5, 0, 1);
    ae::SparsityConfig s;
    const auto data = build_variant(Variant::smcae, xs, xr);
    const auto st = stack_evaluate({l}, data, s, 50.0);
    const auto ly = layer_evaluate(l, data, s, 50.0);
    CHECK(st.value.total == doctest::Approx(ly.value.total).epsilon(1e-13));
    CHECK((st.gradient[0].enc_w - ly.gradient.enc_w).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((st.gradient[0].right_w - ly.gradient.right_w).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("stack gradient matches finite differences") {
    ae::SparsityConfig s{0.05, 0.1, 3e-3};
    for (auto variant : {Variant::smcae, Variant::sae_ii}) {
        for (double gamma : {0.0, 50.0}) {
            Rng rng(31);
            std::vector<SmcaeLayer> layers{random_layer(rng, 5, 4), random_layer(rng, 4, 3)};
            const Matrix xs = oracle::random_matrix(rng, 7, 5, 0, 1);
            const Matrix xr = oracle::random_matrix(rng, 7, 5, 0, 1);
            const auto data = build_variant(variant, xs, xr);
            const Vector x0 = flatten_stack(layers);
            auto objective = [&](const Vector& x) {
                auto ls = layers;
                unflatten_stack(x, ls);
                return stack_evaluate(ls, data, s, gamma).value.total;
            };
            const Vector g = flatten_stack(stack_evaluate(layers, data, s, gamma).gradient);
            const Vector fd = optim::finite_diff(objective, x0);
            CAPTURE(gamma);
            CHECK(optim::relative_gradient_error(g, fd) < 1e-6);
        }
    }
}

TEST_CASE("flatten_stack skips the inner right decoders") {
    Rng rng(4);
    std::vector<SmcaeLayer> layers{random_layer(rng, 5, 4), random_layer(rng, 4, 3)};
    const Vector f = flatten_stack(layers);
    const auto expected = parameter_count(layers[0]) + layers[1].enc_w.size() + layers[1].enc_b.size() +
                          layers[1].left_w.size() + layers[1].left_b.size();
    CHECK(f.size() == expected);
    auto copy = layers;
    unflatten_stack(f, copy);
    CHECK(same_layer(copy[0], layers[0]));
    CHECK(same_layer(copy[1], layers[1]));
}

TEST_CASE("train_stack") {
    auto [xs, xr] = shifted_pair(1, 40, 6);
    SmcaeConfig c;
    c.layer_sizes = {4};
    c.max_iterations = 30;
    c.fine_tune = false;
    c.rng_seed = 9;

    SUBCASE("one layer without fine-tuning equals train_layer") {
        const auto m = train_stack(xs, xr, c);
        const auto t = train_layer(xs, xr, 4, c.sparsity, c.gamma, c.lbfgs_options(), 9);
        REQUIRE(m.layers.size() == 1);
        CHECK(same_layer(m.layers[0], t.layer));
        CHECK(m.training_log.size() == 1);
        CHECK(m.training_log[0].name == "layer1");
    }
    SUBCASE("two layers chain and fine-tuning does not increase the objective") {
        c.layer_sizes = {5, 3};
        const auto greedy = train_stack(xs, xr, c);
        REQUIRE(greedy.layers.size() == 2);
        CHECK(greedy.layers[1].input_dim() == 5);
        c.fine_tune = true;
        const auto tuned = train_stack(xs, xr, c);
        const auto data = build_variant(Variant::smcae, xs, xr);
        const double before = stack_evaluate(greedy.layers, data, c.sparsity, c.gamma).value.total;
        const double after = stack_evaluate(tuned.layers, data, c.sparsity, c.gamma).value.total;
        CHECK(after <= before);
        REQUIRE(tuned.training_log.size() == 3);
        CHECK(tuned.training_log[2].name == "finetune");
        CHECK(tuned.training_log[2].entries.front().total == doctest::Approx(before).epsilon(1e-12));
        CHECK(tuned.total_iterations() ==
              tuned.training_log[0].iterations + tuned.training_log[1].iterations + tuned.training_log[2].iterations);
    }
    SUBCASE("determinism") {
        c.layer_sizes = {5, 3};
        c.fine_tune = true;
        const auto a = train_stack(xs, xr, c);
        const auto b = train_stack(xs, xr, c);
        CHECK(serialize_model(a) == serialize_model(b));
    }
}

TEST_CASE("transform") {
    SmcaeModel empty;
    CHECK_THROWS_AS((void)transform(empty, Matrix::Zero(2, 3)), DomainError);

    auto [xs, xr] = shifted_pair(5, 120, 8);
    SmcaeConfig c;
    c.layer_sizes = {16};
    c.max_iterations = 200;
    c.rng_seed = 3;
    const auto m = train_stack(xs, xr, c);
    const Matrix out = transform(m, xs);
    CHECK(out.rows() == xs.rows());
    CHECK(out.cols() == xs.cols());
    CHECK((out.array() > 0).all());
    CHECK((out.array() < 1).all());
    CHECK_THROWS_AS((void)transform(m, Matrix::Zero(2, 3)), ShapeError);

    auto [hs, hr] = shifted_pair(6, 60, 8);
    CHECK(mean_row_distance(transform(m, hs), hr) < mean_row_distance(hs, hr));
}

TEST_CASE("transform approximates identity without a gap") {
    auto [unused, xr] = shifted_pair(8, 100, 6);
    SmcaeConfig c;
    c.layer_sizes = {12};
    c.max_iterations = 200;
    const auto m = train_stack(xr, xr, c);
    const double mse = (transform(m, xr) - xr).squaredNorm() / static_cast<double>(xr.rows());
    const double train_err = smcae_objective(m.layers[0], xr, xr, ae::SparsityConfig{0.05, 0.0, 0.0}, 0.0).left;
    CHECK(mse <= train_err + 1e-12);
}

TEST_CASE("model serialization round trip is bit exact") {
    auto [xs, xr] = shifted_pair(2, 30, 5);
    SmcaeConfig c;
    c.layer_sizes = {4, 3};
    c.max_iterations = 15;
    c.gamma = 10;
    auto m = train_stack(xs, xr, c, Variant::smcae_ii);
    m.scaler = FeatureScaler::fit(xs);
    const std::string bytes = serialize_model(m);
    const auto back = deserialize_model(bytes);
    CHECK(serialize_model(back) == bytes);
    REQUIRE(back.layers.size() == 2);
    CHECK(same_layer(back.layers[0], m.layers[0]));
    CHECK(same_layer(back.layers[1], m.layers[1]));
    CHECK(back.variant == Variant::smcae_ii);
    CHECK(back.config.gamma == 10.0);
    CHECK(back.config.layer_sizes == c.layer_sizes);
    REQUIRE(back.scaler.has_value());
    CHECK(back.scaler->min == m.scaler->min);
    CHECK(back.training_log.size() == m.training_log.size());
    CHECK(transform(back, xs) == transform(m, xs));

    const auto path = std::filesystem::temp_directory_path() / "smcae_roundtrip.model";
    save_model(m, path.string());
    CHECK(serialize_model(load_model(path.string())) == bytes);
    std::filesystem::remove(path);

    CHECK_THROWS_AS((void)deserialize_model("garbage"), ParseError);
    CHECK_THROWS_AS((void)deserialize_model(bytes.substr(0, bytes.size() - 8)), ParseError);
}

TEST_CASE("single-channel variants train without a right decoder") {
    auto [xs, xr] = shifted_pair(4, 30, 5);
    SmcaeConfig c;
    c.layer_sizes = {4};
    c.max_iterations = 10;
    for (auto v : {Variant::sae_i, Variant::sae_ii}) {
        const auto m = train_stack(xs, xr, c, v);
        CHECK_FALSE(m.layers[0].has_right());
        for (const auto& e : m.training_log[0].entries) CHECK(e.right == 0.0);
    }
}
