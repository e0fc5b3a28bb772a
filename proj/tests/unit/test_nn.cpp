#include <doctest.h>

#include <cmath>
#include <vector>

#include "ghostrec/common/error.hpp"
#include "ghostrec/common/rng.hpp"
#include "ghostrec/nn/adam.hpp"
#include "ghostrec/nn/grad_check.hpp"
#include "ghostrec/nn/ops.hpp"
#include "ghostrec/nn/tape.hpp"

using namespace ghostrec;
using namespace ghostrec::nn;

namespace {

Matrix<double> mat(int rows, int cols, std::initializer_list<double> v) {
    Matrix<double> m(rows, cols);
    auto it = v.begin();
    for (int r = 0; r < rows; ++r)
        for (int c = 0; c < cols; ++c) m(r, c) = *it++;
    return m;
}

Matrix<double> random_matrix(Rng& rng, int rows, int cols, double scale = 1.0) {
    Matrix<double> m(rows, cols);
    for (int i = 0; i < m.size(); ++i) m.data()[i] = rng.normal() * scale;
    return m;
}

DenseParams<double> dense_from(Matrix<double> w, Matrix<double> b) {
    DenseParams<double> p;
    p.weight = Param<double>(std::move(w));
    p.bias = Param<double>(std::move(b));
    return p;
}

}  // namespace

TEST_CASE("dense_forward") {
    SUBCASE("zero input passes the bias") {
        Rng rng(1);
        auto p = dense_from(random_matrix(rng, 2, 3), mat(1, 2, {1, 2}));
        auto y = dense_forward<double>(Matrix<double>::Zero(1, 3), p);
        CHECK(y(0, 0) == 1.0);
        CHECK(y(0, 1) == 2.0);
    }
    SUBCASE("identity weights") {
        auto p = dense_from(Matrix<double>::Identity(2, 2), Matrix<double>::Zero(1, 2));
        auto y = dense_forward<double>(mat(1, 2, {3, 4}), p);
        CHECK(y(0, 0) == 3.0);
        CHECK(y(0, 1) == 4.0);
    }
    SUBCASE("hand-evaluated affine map") {
        auto p = dense_from(mat(2, 2, {1, 2, 3, 4}), mat(1, 2, {0.5, -0.5}));
        auto y = dense_forward<double>(mat(1, 2, {1, 1}), p);
        CHECK(y(0, 0) == doctest::Approx(3.5));
        CHECK(y(0, 1) == doctest::Approx(6.5));
    }
    SUBCASE("shape mismatch") {
        auto p = dense_from(Matrix<double>::Identity(2, 2), Matrix<double>::Zero(1, 2));
        CHECK_THROWS_AS(dense_forward<double>(Matrix<double>::Zero(1, 3), p), DimensionError);
    }
}

TEST_CASE("activations") {
    Matrix<double> x = mat(1, 3, {0.0, -1.0, 3.0});
    auto s = activation(x, Activation::sigmoid());
    CHECK(s(0, 0) == 0.5);
    auto l = activation(x, Activation::leaky_relu(0.2));
    CHECK(l(0, 1) == doctest::Approx(-0.2));
    CHECK(l(0, 2) == 3.0);
    auto t = activation(x, Activation::tanh());
    CHECK(t(0, 0) == 0.0);

    Rng rng(3);
    Matrix<double> big = random_matrix(rng, 8, 16, 30.0);
    auto sb = activation(big, Activation::sigmoid());
    auto tb = activation(big, Activation::tanh());
    CHECK((sb.array() >= 0.0).all());
    CHECK((sb.array() <= 1.0).all());
    CHECK((tb.array().abs() <= 1.0).all());
}

TEST_CASE("softmax") {
    SUBCASE("uniform row") {
        auto p = softmax<double>(Matrix<double>::Zero(1, 10));
        for (int i = 0; i < 10; ++i) CHECK(p(0, i) == doctest::Approx(0.1).epsilon(1e-15));
    }
    SUBCASE("large equal logits do not overflow") {
        auto p = softmax<double>(mat(1, 2, {1000, 1000}));
        CHECK(p(0, 0) == 0.5);
        CHECK(p(0, 1) == 0.5);
    }
    SUBCASE("direct evaluation") {
        auto p = softmax<double>(mat(1, 3, {1, 2, 3}));
        CHECK(std::abs(p(0, 0) - 0.09003) < 1e-5);
        CHECK(std::abs(p(0, 1) - 0.24473) < 1e-5);
        CHECK(std::abs(p(0, 2) - 0.66524) < 1e-5);
    }
    SUBCASE("rows sum to one and shift invariance (property)") {
        Rng rng(11);
        for (int trial = 0; trial < 200; ++trial) {
            const int k = 1 + static_cast<int>(rng.below(20));
            Matrix<double> x = random_matrix(rng, 3, k, 10.0);
            auto p = softmax(x);
            for (int r = 0; r < 3; ++r) {
                CHECK(std::abs(p.row(r).sum() - 1.0) <= 1e-12);
                CHECK((p.row(r).array() > 0.0).all());
                CHECK((p.row(r).array() <= 1.0).all());
            }
            // Integer-valued logits with an integer shift subtract exactly.
            Matrix<double> xi = x.array().round();
            const double shift = static_cast<double>(rng.below(1000)) - 500.0;
            Matrix<double> shifted = xi.array() + shift;
            CHECK(softmax(xi) == softmax(shifted));
        }
    }
}

TEST_CASE("batchnorm_forward") {
    Rng rng(5);
    Matrix<double> x = random_matrix(rng, 32, 6, 3.0);
    x.array() += 7.0;

    SUBCASE("training mode standardises the batch") {
        auto p = make_batchnorm<double>(6);
        auto y = batchnorm_forward(x, p, BatchNormMode::Train);
        for (int c = 0; c < 6; ++c) {
            const double mean = y.col(c).mean();
            const double var = (y.col(c).array() - mean).square().mean();
            CHECK(std::abs(mean) <= 1e-9);
            CHECK(std::abs(var - 1.0) <= 1e-6 * 1.0 + 1e-5);  // epsilon shrinks the variance slightly
        }
        // running stats moved toward the batch statistics
        CHECK(p.running_mean(0, 0) == doctest::Approx(0.1 * x.col(0).mean()));
        CHECK((p.running_var.array() >= 0.0).all());
    }
    SUBCASE("gamma and beta give the affine image") {
        auto p = make_batchnorm<double>(6);
        p.gamma.value.setConstant(2.0);
        p.beta.value.setConstant(3.0);
        p.epsilon = 0.0;
        auto y = batchnorm_forward(x, p, BatchNormMode::Train);
        for (int c = 0; c < 6; ++c) {
            const double mean = y.col(c).mean();
            const double sd = std::sqrt((y.col(c).array() - mean).square().mean());
            CHECK(std::abs(mean - 3.0) <= 1e-6);
            CHECK(std::abs(sd - 2.0) <= 1e-6);
        }
    }
    SUBCASE("inference with unit running stats is the identity up to epsilon") {
        auto p = make_batchnorm<double>(6);
        auto y = batchnorm_forward(x, p, BatchNormMode::Infer);
        const double scale = 1.0 / std::sqrt(1.0 + 1e-5);
        CHECK((y - x * scale).cwiseAbs().maxCoeff() <= 1e-12);
        CHECK(p.running_mean.isZero(0.0));
    }
    SUBCASE("degenerate batch") {
        auto p = make_batchnorm<double>(6);
        CHECK_THROWS_AS(batchnorm_forward<double>(x.topRows(1), p, BatchNormMode::Train), DegenerateError);
        CHECK_NOTHROW(batchnorm_forward<double>(x.topRows(1), p, BatchNormMode::Infer));
    }
}

TEST_CASE("bce_loss") {
    std::vector<double> ones{1, 1, 1};
    CHECK(bce_loss<double>(ones, ones) <= 1e-6);
    std::vector<double> half{0.5, 0.5, 0.5, 0.5};
    std::vector<double> t{1, 0, 0, 1};
    CHECK(bce_loss<double>(half, t) == doctest::Approx(0.693147).epsilon(1e-6));
    std::vector<double> p2{0.9, 0.1}, t2{1, 0};
    CHECK(bce_loss<double>(p2, t2) == doctest::Approx(0.10536).epsilon(1e-4));
    std::vector<double> zero{0.0}, one{1.0};
    CHECK(std::isfinite(bce_loss<double>(zero, one)));
    CHECK_THROWS_AS(bce_loss<double>(p2, ones), DimensionError);

    Rng rng(9);
    for (int i = 0; i < 500; ++i) {
        std::vector<double> p{rng.uniform()}, y{static_cast<double>(rng.below(2))};
        CHECK(bce_loss<double>(p, y) >= 0.0);
    }
}

TEST_CASE("cce_loss") {
    std::vector<int> labels{3, 7};
    CHECK(cce_loss<double>(Matrix<double>::Constant(2, 10, 0.1), labels) == doctest::Approx(2.302585).epsilon(1e-6));
    Matrix<double> onehot = Matrix<double>::Zero(2, 10);
    onehot(0, 3) = onehot(1, 7) = 1.0;
    CHECK(cce_loss<double>(onehot, labels) <= 1e-6);
    std::vector<int> one{1};
    CHECK(cce_loss<double>(mat(1, 3, {0.7, 0.2, 0.1}), one) == doctest::Approx(1.60944).epsilon(1e-5));
    std::vector<int> bad{3};
    CHECK_THROWS_AS(cce_loss<double>(mat(1, 3, {0.7, 0.2, 0.1}), bad), LabelError);
}

TEST_CASE("tape backward") {
    SUBCASE("sum of dense output gives batch-size bias gradient") {
        Rng rng(2);
        auto p = make_dense<double>(3, 4, rng);
        Tape<double> tape;
        auto x = tape.constant(random_matrix(rng, 5, 3));
        auto loss = tape.sum(tape.dense(x, p));
        tape.backward(loss);
        for (int j = 0; j < 4; ++j) CHECK(p.bias.grad(0, j) == 5.0);
    }
    SUBCASE("sigmoid local gradient at zero") {
        Tape<double> tape;
        auto x = tape.variable(Matrix<double>::Zero(1, 1));
        auto loss = tape.sum(tape.activation(x, Activation::sigmoid()));
        tape.backward(loss);
        CHECK(tape.grad(x)(0, 0) == 0.25);
    }
    SUBCASE("errors") {
        Tape<double> empty;
        CHECK_THROWS_AS(empty.backward(Tape<double>::Var{0}), TapeError);

        Tape<double> tape;
        auto x = tape.variable(Matrix<double>::Ones(2, 2));
        auto y = tape.activation(x, Activation::tanh());
        CHECK_THROWS_AS(tape.backward(y), TapeError);  // not scalar
        auto loss = tape.sum(y);
        tape.backward(loss);
        CHECK_THROWS_AS(tape.backward(loss), TapeError);  // replayed
    }
    SUBCASE("each node is visited exactly once, in reverse order") {
        Rng rng(4);
        auto p1 = make_dense<double>(4, 6, rng, 0.5);
        auto p2 = make_dense<double>(6, 3, rng, 0.5);
        Tape<double> tape;
        auto x = tape.constant(random_matrix(rng, 4, 4));
        auto h = tape.activation(tape.dense(x, p1), Activation::leaky_relu());
        auto probs = tape.softmax(tape.dense(h, p2));
        std::vector<int> labels{0, 1, 2, 0};
        auto loss = tape.cce(probs, labels);
        tape.backward(loss);
        const auto& order = tape.visit_order();
        REQUIRE(order.size() == tape.size());
        for (std::size_t i = 0; i < order.size(); ++i) CHECK(order[i] == tape.size() - 1 - i);
    }
}

TEST_CASE("grad_check: every layer type matches central differences") {
    Rng rng(21);
    const int b = 4;
    auto l1 = make_dense<double>(5, 7, rng, 0.5);
    auto bn = make_batchnorm<double>(7);
    bn.gamma.value = random_matrix(rng, 1, 7, 0.3);
    bn.gamma.value.array() += 1.0;
    bn.beta.value = random_matrix(rng, 1, 7, 0.3);
    bn.running_mean = random_matrix(rng, 1, 7, 0.2);
    bn.running_var = random_matrix(rng, 1, 7, 0.2).cwiseAbs();
    bn.running_var.array() += 0.5;
    auto l2 = make_dense<double>(7 + 2, 6, rng, 0.5);
    auto hs = make_dense<double>(6, 1, rng, 0.5);
    auto hc = make_dense<double>(6, 3, rng, 0.5);
    Matrix<double> x = random_matrix(rng, b, 5);
    Matrix<double> side = random_matrix(rng, b, 2);
    std::vector<double> targets{1, 0, 1, 0};
    std::vector<int> labels{0, 2, 1, 2};

    std::vector<Param<double>*> params;
    for (auto* d : {&l1, &l2, &hs, &hc}) collect(*d, params);
    collect(bn, params);

    for (auto mode : {BatchNormMode::Train, BatchNormMode::Infer}) {
        for (auto act : {Activation::leaky_relu(0.2), Activation::tanh(), Activation::sigmoid()}) {
            LossBuilder build = [&](Tape<double>& t) {
                auto h = t.dense(t.constant(x), l1);
                h = t.batchnorm(h, bn, mode, ParamGrad::Accumulate, false);
                h = t.activation(h, act);
                h = t.concat(h, t.constant(side));
                h = t.activation(t.dense(h, l2), Activation::leaky_relu(0.2));
                auto s = t.activation(t.dense(h, hs), Activation::sigmoid());
                auto c = t.softmax(t.dense(h, hc));
                return t.combine(t.bce(s, targets), 1.0, t.cce(c, labels), 1.0);
            };
            // Batch statistics cancel any shift added before the normalisation,
            // so the first bias has an identically zero gradient in train mode.
            std::vector<Param<double>*> probed = params;
            if (mode == BatchNormMode::Train) {
                probed.erase(probed.begin() + 1);
                l1.bias.zero_grad();
                Tape<double> t;
                t.backward(build(t));
                CHECK(l1.bias.grad.cwiseAbs().maxCoeff() <= 1e-12);
                l1.bias.zero_grad();
            }
            auto report = grad_check(build, probed);
            INFO(report.worst);
            CHECK(report.max_rel_error <= 1e-4);
            CHECK(report.coords_checked > 100);
        }
    }
}

TEST_CASE("grad_check: three-layer network and the linear model") {
    Rng rng(8);
    auto a = make_dense<double>(6, 8, rng, 0.4);
    auto b = make_dense<double>(8, 8, rng, 0.4);
    auto c = make_dense<double>(8, 3, rng, 0.4);
    Matrix<double> x = random_matrix(rng, 4, 6);
    Matrix<double> proj = random_matrix(rng, 4, 3);
    std::vector<Param<double>*> params;
    for (auto* d : {&a, &b, &c}) collect(*d, params);
    LossBuilder deep = [&](Tape<double>& t) {
        auto h = t.activation(t.dense(t.constant(x), a), Activation::leaky_relu());
        h = t.activation(t.dense(h, b), Activation::tanh());
        return t.dot(t.dense(h, c), proj);
    };
    CHECK(grad_check(deep, params).max_rel_error <= 1e-4);

    std::vector<Param<double>*> linear_params;
    collect(a, linear_params);
    Matrix<double> proj_a = random_matrix(rng, 4, 8);
    LossBuilder linear = [&](Tape<double>& t) { return t.dot(t.dense(t.constant(x), a), proj_a); };
    CHECK(grad_check(linear, linear_params).max_rel_error <= 1e-9);
}

TEST_CASE("grad_check: kinks and the extended-precision reference") {
    SUBCASE("branch signature tracks LeakyReLU signs") {
        auto run = [](double v) {
            Tape<double> t;
            t.activation(t.constant(mat(1, 2, {v, 1.0})), Activation::leaky_relu());
            return t.branch_signature();
        };
        CHECK(run(0.5) == run(0.25));
        CHECK(run(0.5) != run(-0.5));
        Tape<double> t;
        const auto empty = t.branch_signature();
        t.activation(t.constant(mat(1, 1, {-1.0})), Activation::tanh());
        CHECK(t.branch_signature() == empty);
    }
    SUBCASE("a stencil straddling the kink is replaced") {
        // Bias 3e-6 puts the pre-activation within eps of zero for one entry.
        auto d = dense_from(mat(1, 1, {1.0}), mat(1, 1, {3e-6}));
        Matrix<double> x = mat(2, 1, {0.0, 2.0});
        std::vector<Param<double>*> params;
        collect(d, params);
        LossBuilder f = [&](Tape<double>& t) {
            return t.sum(t.activation(t.dense(t.constant(x), d), Activation::leaky_relu()));
        };
        auto r = grad_check(f, params);
        CHECK(r.kinks_skipped == 1);
        CHECK(r.coords_checked == 1);  // the weight; the bias had no other coordinate
        CHECK(r.max_rel_error <= 1e-9);
    }
    SUBCASE("long double mirror") {
        Rng rng(12);
        auto a = make_dense<double>(5, 4, rng, 0.5);
        Matrix<double> x = random_matrix(rng, 3, 5);
        std::vector<Param<double>*> params;
        collect(a, params);
        DenseParams<long double> wide{Param<long double>(a.weight.value.cast<long double>()),
                                      Param<long double>(a.bias.value.cast<long double>())};
        std::vector<Param<long double>*> wide_params;
        collect(wide, wide_params);
        const Matrix<long double> xw = x.cast<long double>();
        LossBuilder f = [&](Tape<double>& t) {
            return t.sum(t.activation(t.dense(t.constant(x), a), Activation::tanh()));
        };
        ExtendedLossBuilder fw = [&](Tape<long double>& t) {
            return t.sum(t.activation(t.dense(t.constant(xw), wide), Activation::tanh()));
        };
        auto r = grad_check(f, params, fw, wide_params);
        CHECK(r.coords_checked == 24);
        CHECK(r.max_rel_error <= 1e-8);
        std::vector<Param<long double>*> short_list(wide_params.begin(), wide_params.begin() + 1);
        CHECK_THROWS_AS(grad_check(f, params, fw, short_list), DimensionError);
    }
}

TEST_CASE("adam_step") {
    SUBCASE("zero gradient leaves parameters unchanged in any state") {
        Rng rng(6);
        Param<double> p(random_matrix(rng, 3, 3));
        std::vector<Param<double>*> ps{&p};
        auto state = make_adam_state<double>(ps);
        p.grad = random_matrix(rng, 3, 3);
        adam_step<double>(ps, state);  // non-trivial moments
        const Matrix<double> before = p.value;
        p.zero_grad();
        adam_step<double>(ps, state);
        CHECK(p.value == before);
        CHECK(state.step == 2);
    }
    SUBCASE("first step with unit gradient") {
        Param<double> p(Matrix<double>::Zero(1, 1));
        std::vector<Param<double>*> ps{&p};
        auto state = make_adam_state<double>(ps, AdamHyper{1e-3, 0.9, 0.999, 1e-8});
        p.grad(0, 0) = 1.0;
        adam_step<double>(ps, state);
        CHECK(std::abs(p.value(0, 0) - (-9.99999e-4)) < 1e-9);
    }
    SUBCASE("constant gradient: step size tends to the learning rate") {
        Param<double> p(Matrix<double>::Zero(1, 1));
        std::vector<Param<double>*> ps{&p};
        auto state = make_adam_state<double>(ps, AdamHyper{1e-3, 0.9, 0.999, 1e-8});
        double last = 0.0, delta = 0.0;
        for (int i = 0; i < 5000; ++i) {
            p.grad(0, 0) = 0.37;
            adam_step<double>(ps, state);
            delta = p.value(0, 0) - last;
            last = p.value(0, 0);
        }
        CHECK(std::abs(std::abs(delta) - 1e-3) < 1e-9);
    }
    SUBCASE("shape mismatch") {
        Param<double> p(Matrix<double>::Zero(2, 2));
        Param<double> q(Matrix<double>::Zero(3, 1));
        std::vector<Param<double>*> ps{&p};
        auto state = make_adam_state<double>(ps);
        std::vector<Param<double>*> qs{&q};
        CHECK_THROWS_AS(adam_step<double>(qs, state), DimensionError);
    }
}

TEST_CASE("forward ops are deterministic") {
    Rng r1(77), r2(77);
    auto p1 = make_dense<float>(64, 32, r1);
    auto p2 = make_dense<float>(64, 32, r2);
    Matrix<float> x = Matrix<float>::Random(16, 64);
    CHECK(dense_forward(x, p1) == dense_forward(x, p2));
    CHECK(softmax<float>(dense_forward(x, p1)) == softmax<float>(dense_forward(x, p2)));
}
