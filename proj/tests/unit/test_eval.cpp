#include "smcae/eval.hpp"
#include "smcae/rng.hpp"

#include "oracles.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>

using namespace smcae;
using namespace smcae::eval;

namespace {

// Counting oracle: VR and FAR at every threshold drawn from the scores.
struct Counted {
    double far, vr;
};

std::vector<Counted> enumerate_thresholds(const ScoredPairs& sp) {
    std::set<double> thresholds(sp.scores.data(), sp.scores.data() + sp.scores.size());
    double ng = 0, ni = 0;
    for (bool g : sp.genuine) (g ? ng : ni) += 1;
    std::vector<Counted> out{{0.0, 0.0}};
    for (double t : thresholds) {
        double a = 0, f = 0;
        for (Eigen::Index i = 0; i < sp.scores.size(); ++i)
            if (sp.scores[i] >= t) (sp.genuine[i] ? a : f) += 1;
        out.push_back({f / ni, a / ng});
    }
    return out;
}

double brute_rank1(const Matrix& q, const Matrix& g, const std::vector<int>& truth) {
    int hits = 0;
    for (Eigen::Index i = 0; i < q.rows(); ++i) {
        int best = -1;
        double bd = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < g.rows(); ++j) {
            double d = 0;
            for (Eigen::Index c = 0; c < q.cols(); ++c) d += (q(i, c) - g(j, c)) * (q(i, c) - g(j, c));
            if (d < bd) {
                bd = d;
                best = static_cast<int>(j);
            }
        }
        if (best == truth[static_cast<std::size_t>(i)]) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(q.rows());
}

ScoredPairs make_pairs(std::vector<double> s, std::vector<bool> g) {
    ScoredPairs sp;
    sp.scores = Eigen::Map<Vector>(s.data(), static_cast<Eigen::Index>(s.size()));
    sp.genuine = std::move(g);
    return sp;
}

// Conditions checked directly from decision values, independent of the
// solver's own stopping rule.
double decision_kkt_violation(const Matrix& x, const std::vector<int>& y, const BinarySolution& s, double c,
                              double g_rbf) {
    double worst = 0.0;
    const auto n = x.rows();
    for (Eigen::Index i = 0; i < n; ++i) {
        double f = s.bias;
        for (Eigen::Index j = 0; j < n; ++j) {
            double d = 0;
            for (Eigen::Index k = 0; k < x.cols(); ++k) d += (x(i, k) - x(j, k)) * (x(i, k) - x(j, k));
            f += s.alpha[j] * y[static_cast<std::size_t>(j)] * std::exp(-g_rbf * d);
        }
        const double m = y[static_cast<std::size_t>(i)] * f;
        const double a = s.alpha[i];
        if (a <= 0.0) worst = std::max(worst, 1.0 - m);
        else if (a >= c) worst = std::max(worst, m - 1.0);
        else worst = std::max(worst, std::abs(m - 1.0));
    }
    return worst;
}

}  // namespace

TEST_CASE("f1 examples") {
    CHECK(f1_score({0, 1, 2, 1}, {0, 1, 2, 1}) == 1.0);
    CHECK(f1_score({1, 2, 0}, {0, 1, 2}) == 0.0);
    // TP = 2, FP = 1, FN = 1
    CHECK(f1_binary({1, 1, 1, 0, 0}, {1, 1, 0, 1, 0}) == doctest::Approx(2.0 / 3.0));
    CHECK(f1_binary({0, 0}, {0, 0}) == 0.0);
    CHECK_THROWS(f1_score({}, {}));
    CHECK_THROWS(f1_score({1}, {1, 2}));
}

TEST_CASE("f1 averaging") {
    const Labels p{0, 0, 1, 1, 2, 2, 2};
    const Labels a{0, 1, 1, 1, 2, 0, 2};
    // class 0: tp1 fp1 fn1 -> 1/2; class 1: tp2 fp0 fn1 -> 4/5; class 2: tp2 fp1 fn0 -> 4/5
    CHECK(f1_score(p, a) == doctest::Approx((0.5 + 0.8 + 0.8) / 3.0));
    CHECK(f1_score(p, a, Averaging::micro) == doctest::Approx(accuracy(p, a)));
}

TEST_CASE("f1 is permutation invariant") {
    Rng rng(3);
    Labels p(60), a(60);
    for (std::size_t i = 0; i < p.size(); ++i) {
        p[i] = static_cast<int>(rng.below(4));
        a[i] = static_cast<int>(rng.below(4));
    }
    const double ref = f1_score(p, a);
    std::vector<std::size_t> idx(p.size());
    std::iota(idx.begin(), idx.end(), 0);
    for (int t = 0; t < 5; ++t) {
        rng.shuffle(idx.begin(), idx.end());
        Labels pp, aa;
        for (auto i : idx) {
            pp.push_back(p[i]);
            aa.push_back(a[i]);
        }
        CHECK(f1_score(pp, aa) == doctest::Approx(ref).epsilon(1e-14));
    }
}

TEST_CASE("auc hand cases") {
    CHECK(roc_and_auc(make_pairs({0.9, 0.8, 0.2, 0.1}, {true, true, false, false})).auc == 1.0);
    CHECK(roc_and_auc(make_pairs({0.5, 0.5, 0.5, 0.5}, {true, false, true, false})).auc == 0.5);
    CHECK(roc_and_auc(make_pairs({0.9, 0.4, 0.6, 0.1}, {true, true, false, false})).auc == doctest::Approx(0.75));
    CHECK(roc_and_auc(make_pairs({0.1, 0.2, 0.8, 0.9}, {true, true, false, false})).auc == 0.0);
    // genuine 0.5/0.5, impostor 0.5/0.1: the tie contributes a diagonal half
    CHECK(roc_and_auc(make_pairs({0.5, 0.5, 0.5, 0.1}, {true, true, false, false})).auc == doctest::Approx(0.75));

    const auto roc = roc_and_auc(make_pairs({0.9, 0.4, 0.6, 0.1}, {true, true, false, false}));
    REQUIRE(roc.curve.size() == 5);
    CHECK(roc.curve.front().far == 0.0);
    CHECK(roc.curve.front().vr == 0.0);
    CHECK(roc.curve.back().far == 1.0);
    CHECK(roc.curve.back().vr == 1.0);
}

TEST_CASE("roc errors") {
    CHECK_THROWS(roc_and_auc(make_pairs({0.1, 0.2}, {true, true})));
    CHECK_THROWS(roc_and_auc(make_pairs({0.1, 0.2}, {false, false})));
    CHECK_THROWS(roc_and_auc(make_pairs({0.1}, {true, false})));
    CHECK_THROWS(vr_at_far(make_pairs({0.1, 0.2}, {true, true})));
}

TEST_CASE("auc complements under negation and stays in range") {
    Rng rng(11);
    for (int t = 0; t < 50; ++t) {
        const int n = 5 + static_cast<int>(rng.below(40));
        std::vector<double> s;
        std::vector<bool> g;
        for (int i = 0; i < n; ++i) {
            s.push_back(std::round(rng.uniform() * 20.0) / 20.0);  // ties on purpose
            g.push_back(i % 3 == 0);
        }
        auto sp = make_pairs(s, g);
        const double auc = roc_and_auc(sp).auc;
        CHECK(auc >= 0.0);
        CHECK(auc <= 1.0);
        sp.scores = -sp.scores;
        CHECK(roc_and_auc(sp).auc == doctest::Approx(1.0 - auc).epsilon(1e-12));
    }
}

TEST_CASE("roc matches threshold enumeration") {
    Rng rng(5);
    for (int t = 0; t < 30; ++t) {
        std::vector<double> s;
        std::vector<bool> g;
        for (int i = 0; i < 30; ++i) {
            s.push_back(std::round(rng.uniform() * 10.0));
            g.push_back(rng.uniform() < 0.4 || i == 0);
        }
        g[1] = false;
        const auto sp = make_pairs(s, g);
        auto ref = enumerate_thresholds(sp);
        std::sort(ref.begin(), ref.end(), [](auto a, auto b) { return a.far < b.far || (a.far == b.far && a.vr < b.vr); });
        const auto roc = roc_and_auc(sp);
        REQUIRE(roc.curve.size() == ref.size());
        double auc = 0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            CHECK(roc.curve[i].far == doctest::Approx(ref[i].far));
            CHECK(roc.curve[i].vr == doctest::Approx(ref[i].vr));
            if (i > 0) auc += (ref[i].far - ref[i - 1].far) * (ref[i].vr + ref[i - 1].vr) / 2.0;
        }
        CHECK(roc.auc == doctest::Approx(auc));
    }
}

TEST_CASE("vr at far examples") {
    const auto sep = make_pairs({0.9, 0.8, 0.2, 0.1}, {true, true, false, false});
    for (double far : {0.0, 0.001, 0.5, 1.0}) CHECK(vr_at_far(sep, far) == 1.0);
    CHECK(vr_at_far(make_pairs({0.5, 0.5, 0.5, 0.5}, {true, false, true, false}), 0.001) == 0.0);

    // 100 genuines, half above every impostor and half below one of them;
    // the other impostors sit between the two genuine groups.
    std::vector<double> s;
    std::vector<bool> g;
    for (int i = 0; i < 50; ++i) s.push_back(0.95), g.push_back(true);
    for (int i = 0; i < 50; ++i) s.push_back(0.5), g.push_back(true);
    s.push_back(0.7), g.push_back(false);
    for (int i = 0; i < 999; ++i) s.push_back(0.6), g.push_back(false);
    CHECK(vr_at_far(make_pairs(s, g), 0.001) == 0.5);
}

TEST_CASE("vr at far is monotone and matches enumeration") {
    Rng rng(17);
    for (int t = 0; t < 100; ++t) {
        std::vector<double> s;
        std::vector<bool> g;
        for (int i = 0; i < 40; ++i) {
            const bool gen = i % 2 == 0;
            s.push_back(rng.normal() + (gen ? 1.0 : 0.0));
            g.push_back(gen);
        }
        const auto sp = make_pairs(s, g);
        const auto ref = enumerate_thresholds(sp);
        double prev = -1.0;
        for (double far : {0.0, 0.001, 0.01, 0.05, 0.1, 0.2, 0.5, 1.0}) {
            const double v = vr_at_far(sp, far);
            CHECK(v >= prev);
            prev = v;
            double expect = 0.0;
            for (auto c : ref)
                if (c.far <= far) expect = std::max(expect, c.vr);
            CHECK(v == expect);
        }
    }
}

TEST_CASE("rank1") {
    Rng rng(2);
    const Matrix q = oracle::random_matrix(rng, 8, 5, -1, 1);
    std::vector<int> self(8);
    std::iota(self.begin(), self.end(), 0);
    CHECK(rank1(q, q, self) == 1.0);

    // One-hot queries against a permuted gallery: truth marks 3 of 6 correctly.
    const Matrix eye = Matrix::Identity(6, 6);
    const std::vector<int> perm{2, 0, 1, 3, 4, 5};
    Matrix gal(6, 6);
    for (int i = 0; i < 6; ++i) gal.row(perm[static_cast<std::size_t>(i)]) = eye.row(i);
    const std::vector<int> truth{2, 1, 0, 3, 4, 5};
    CHECK(rank1(eye, gal, truth) == doctest::Approx(4.0 / 6.0));

    CHECK_THROWS(rank1(q, Matrix(0, 5), self));
    CHECK_THROWS(rank1(q, oracle::random_matrix(rng, 8, 4, -1, 1), self));
}

TEST_CASE("rank1 against the brute-force oracle") {
    Rng rng(23);
    for (int t = 0; t < 50; ++t) {
        const int nq = 10, ng = 50, d = 1 + static_cast<int>(rng.below(6));
        Matrix q = oracle::random_matrix(rng, nq, d, -1, 1);
        Matrix g = oracle::random_matrix(rng, ng, d, -1, 1);
        // Coarse grid forces exact distance ties.
        q = (q * 2.0).array().round() / 2.0;
        g = (g * 2.0).array().round() / 2.0;
        std::vector<int> truth(nq);
        for (auto& v : truth) v = static_cast<int>(rng.below(ng));
        CHECK(rank1(q, g, truth) == brute_rank1(q, g, truth));
    }
}

TEST_CASE("nearest neighbor ties go to the lowest index") {
    Matrix g(3, 1);
    g << 1.0, -1.0, 1.0;
    Matrix q(1, 1);
    q << 0.0;
    CHECK(nearest_neighbors(q, g) == std::vector<int>{0});
}

TEST_CASE("distance scores") {
    Matrix g(2, 1), q(2, 1);
    g << 0.0, 3.0;
    q << 0.0, 4.0;
    const auto sp = distance_scores(q, g, {0, 1});
    REQUIRE(sp.scores.size() == 4);
    CHECK(sp.scores[0] == 0.0);
    CHECK(sp.scores[1] == -3.0);
    CHECK(sp.scores[2] == -4.0);
    CHECK(sp.scores[3] == -1.0);
    CHECK(sp.genuine == std::vector<bool>{true, false, false, true});
}

TEST_CASE("svm separates two clusters") {
    Rng rng(8);
    Matrix x(40, 1);
    Labels y(40);
    for (int i = 0; i < 40; ++i) {
        const bool hi = i % 2 == 1;
        x(i, 0) = (hi ? 0.8 : 0.2) + rng.uniform(-0.05, 0.05);
        y[static_cast<std::size_t>(i)] = hi ? 5 : 2;
    }
    const auto m = svm_train(x, y, 10.0, 5.0);
    CHECK(m.classes == std::vector<int>{2, 5});
    CHECK(accuracy(svm_predict(m, x), y) == 1.0);

    Matrix held(20, 1);
    Labels hy(20);
    for (int i = 0; i < 20; ++i) {
        const bool hi = i % 2 == 0;
        held(i, 0) = (hi ? 0.8 : 0.2) + rng.uniform(-0.05, 0.05);
        hy[static_cast<std::size_t>(i)] = hi ? 5 : 2;
    }
    CHECK(accuracy(svm_predict(m, held), hy) == 1.0);

    // A support vector keeps its own label.
    for (Eigen::Index i = 0; i < m.machines[0].support.rows(); ++i) {
        const Matrix sv = m.machines[0].support.row(i);
        const int lbl = m.machines[0].coef[i] > 0 ? 2 : 5;
        CHECK(svm_predict(m, sv)[0] == lbl);
    }
    for (const auto& mc : m.machines) CHECK(mc.coef.cwiseAbs().maxCoeff() <= 10.0);
    CHECK_THROWS(svm_predict(m, Matrix::Zero(2, 3)));
}

TEST_CASE("svm solves xor") {
    Matrix x(4, 2);
    x << 0, 0, 1, 1, 0, 1, 1, 0;
    const Labels y{0, 0, 1, 1};
    const auto m = svm_train(x, y, 10.0, 2.0);
    CHECK(svm_predict(m, x) == y);
}

TEST_CASE("symmetric tie goes to the lowest class") {
    Matrix x(2, 1);
    x << 1.0, -1.0;
    const Labels y{7, 3};
    const auto m = svm_train(x, y, 1.0, 0.5);
    Matrix probe(1, 1);
    probe << 0.0;
    const Matrix d = svm_decision(m, probe);
    CHECK(d(0, 0) == d(0, 1));
    CHECK(svm_predict(m, probe)[0] == 3);
}

TEST_CASE("svm errors") {
    CHECK_THROWS(svm_train(Matrix::Zero(3, 2), {1, 1, 1}, 1.0, 1.0));
    CHECK_THROWS(svm_train(Matrix::Zero(3, 2), {1, 0}, 1.0, 1.0));
    CHECK_THROWS(svm_train(Matrix::Zero(2, 2), {1, 0}, 0.0, 1.0));
    CHECK_THROWS(svm_train(Matrix::Zero(2, 2), {1, 0}, 1.0, -1.0));
    Matrix bad = Matrix::Zero(2, 2);
    bad(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CHECK_THROWS(svm_train(bad, {1, 0}, 1.0, 1.0));
}

TEST_CASE("duplicating the training set leaves the decision function unchanged") {
    Rng rng(31);
    Matrix x(12, 2);
    Labels y(12);
    for (int i = 0; i < 12; ++i) {
        const int c = i % 3;
        x(i, 0) = c + rng.uniform(-0.2, 0.2);
        x(i, 1) = (c == 1 ? 1.0 : 0.0) + rng.uniform(-0.2, 0.2);
        y[static_cast<std::size_t>(i)] = c;
    }
    Matrix x2(24, 2);
    x2 << x, x;
    Labels y2 = y;
    y2.insert(y2.end(), y.begin(), y.end());
    // Hard-margin regime so no multiplier sits at the box bound.
    SmoOptions tight;
    tight.tolerance = 1e-10;
    const auto a = svm_train(x, y, 1e4, 1.0, tight);
    const auto b = svm_train(x2, y2, 1e4, 1.0, tight);
    Matrix probe(25, 2);
    for (int i = 0; i < 25; ++i) probe.row(i) << -0.5 + 0.75 * (i % 5), -0.5 + 0.5 * (i / 5);
    CHECK((svm_decision(a, probe) - svm_decision(b, probe)).cwiseAbs().maxCoeff() <= 1e-6);
}

TEST_CASE("smo solutions satisfy the optimality conditions") {
    Rng rng(41);
    for (int t = 0; t < 10; ++t) {
        const int n = 30;
        Matrix x = oracle::random_matrix(rng, n, 3, -1, 1);
        std::vector<int> y(n);
        for (int i = 0; i < n; ++i) y[static_cast<std::size_t>(i)] = (x(i, 0) + 0.3 * rng.normal() > 0) ? 1 : -1;
        y[0] = 1;
        y[1] = -1;
        const double g = 0.5 + rng.uniform();
        const double c = t % 2 == 0 ? 1.0 : 100.0;
        const Matrix k = rbf_gram(x, x, g);
        const auto s = smo_solve(k, y, c);
        CHECK(s.converged);
        CHECK(s.alpha.minCoeff() >= 0.0);
        CHECK(s.alpha.maxCoeff() <= c);
        double balance = 0;
        for (int i = 0; i < n; ++i) balance += s.alpha[i] * y[static_cast<std::size_t>(i)];
        CHECK(std::abs(balance) <= 1e-9 * c);
        CHECK(decision_kkt_violation(x, y, s, c, g) <= 1e-3 + 1e-9);
        CHECK(kkt_violation(k, y, s.alpha, c) <= 1e-3);
    }
}

TEST_CASE("smo on a row subset equals smo on the extracted problem") {
    Rng rng(43);
    const Matrix x = oracle::random_matrix(rng, 20, 2, -1, 1);
    std::vector<int> y(20);
    for (int i = 0; i < 20; ++i) y[static_cast<std::size_t>(i)] = x(i, 1) > 0 ? 1 : -1;
    const std::vector<int> rows{1, 3, 4, 8, 9, 12, 15, 19};
    Matrix sub(rows.size(), 2);
    std::vector<int> ys;
    for (std::size_t i = 0; i < rows.size(); ++i) {
        sub.row(static_cast<Eigen::Index>(i)) = x.row(rows[i]);
        ys.push_back(y[static_cast<std::size_t>(rows[i])]);
    }
    const auto a = smo_solve(rbf_gram(x, x, 1.0), y, 1.0, {}, rows);
    const auto b = smo_solve(rbf_gram(sub, sub, 1.0), ys, 1.0);
    CHECK(a.alpha.size() == static_cast<Eigen::Index>(rows.size()));
    CHECK((a.alpha - b.alpha).cwiseAbs().maxCoeff() <= 1e-9);
    CHECK(std::abs(a.bias - b.bias) <= 1e-9);
}

TEST_CASE("stratified folds") {
    Labels y;
    for (int i = 0; i < 23; ++i) y.push_back(i % 3 == 0 ? 9 : 4);
    const auto f = stratified_folds(y, 4, 1);
    REQUIRE(f.size() == y.size());
    for (int cls : {4, 9}) {
        std::vector<int> count(4, 0);
        for (std::size_t i = 0; i < y.size(); ++i)
            if (y[i] == cls) ++count[static_cast<std::size_t>(f[i])];
        CHECK(*std::max_element(count.begin(), count.end()) - *std::min_element(count.begin(), count.end()) <= 1);
    }
    CHECK(stratified_folds(y, 4, 1) == f);
    CHECK_THROWS(stratified_folds({0, 0, 1, 1, 1}, 3, 1));
    CHECK_THROWS(stratified_folds(y, 1, 1));
}

TEST_CASE("cross validation") {
    Rng rng(51);
    Matrix x(30, 2);
    Labels y(30);
    for (int i = 0; i < 30; ++i) {
        const int c = i % 2;
        x(i, 0) = c * 2.0 + rng.uniform(-0.3, 0.3);
        x(i, 1) = rng.uniform(-0.3, 0.3);
        y[static_cast<std::size_t>(i)] = c;
    }
    const auto single = cross_validate(x, y, {3.0}, {0.7}, 3, 1);
    CHECK(single.c_box == 3.0);
    CHECK(single.g_rbf == 0.7);

    // An enormous bandwidth makes every held-out point look like nothing it
    // has seen, so only the moderate value classifies.
    const auto pick = cross_validate(x, y, {1.0}, {1e6, 0.5}, 3, 1);
    CHECK(pick.g_rbf == 0.5);
    CHECK(pick.score == 1.0);

    // Separable data scores perfectly everywhere, so the tie rule decides.
    const auto tie = cross_validate(x, y, {10.0, 1.0}, {1.0, 0.5}, 3, 2);
    CHECK(tie.c_box == 1.0);
    CHECK(tie.g_rbf == 0.5);
    CHECK(tie.grid.size() == 4);

    const auto again = cross_validate(x, y, {1.0}, {1e6, 0.5}, 3, 1);
    CHECK(again.grid == pick.grid);

    CHECK_THROWS(cross_validate(x, y, {}, {1.0}, 3, 1));
    CHECK_THROWS(cross_validate(x, y, {1.0}, {1.0}, 16, 1));
}

TEST_CASE("default grids") {
    CHECK(default_c_grid() == std::vector<double>{0.1, 1, 10, 100});
    const auto g = default_g_grid(50);
    REQUIRE(g.size() == 4);
    CHECK(g[0] == doctest::Approx(0.01 / 50));
    CHECK(g[3] == doctest::Approx(10.0 / 50));
}

TEST_CASE("metric report") {
    MetricReport r;
    r.set("f1", 0.875);
    r.set("auc", 0.1);
    r.set("f1", 0.5);
    CHECK(r.values.size() == 2);
    CHECK(r.get("f1") == 0.5);
    CHECK_THROWS(r.get("rank1"));
    CHECK(r.to_text() == "f1=0.5\nauc=0.1\n");
    CHECK(r.to_json() == "{\"f1\":0.5,\"auc\":0.1}");
    const auto back = MetricReport::from_text(r.to_text());
    CHECK(back.values == r.values);
    CHECK_THROWS_AS(MetricReport::from_text("f1 0.5\n"), ParseError);
}
