#include <doctest.h>

#include <cmath>
#include <numbers>

#include "ghostrec/common/error.hpp"
#include "ghostrec/gan/checkpoint.hpp"
#include "ghostrec/gan/loss.hpp"
#include "ghostrec/gan/model.hpp"
#include "ghostrec/gan/train.hpp"
#include "ghostrec/gan/verify.hpp"
#include "test_support.hpp"

using namespace ghostrec;
using namespace ghostrec::gan;
using nn::BatchNormMode;
using Md = nn::Matrix<double>;
using Mf = nn::Matrix<float>;

namespace {

ModelConfig small_model(int classes = 3, int rows = 4, int cols = 4) {
    ModelConfig m;
    m.num_classes = classes;
    m.rows = rows;
    m.cols = cols;
    m.noise_dim = 6;
    m.generator_hidden = {8, 12};
    m.discriminator_hidden = {10, 7};
    return m;
}

Md random_matrix(Rng& rng, Eigen::Index r, Eigen::Index c, double lo = -1.0, double hi = 1.0) {
    Md m(r, c);
    for (Eigen::Index k = 0; k < m.size(); ++k) m.data()[k] = rng.uniform(lo, hi);
    return m;
}

// Two classes, 8x8: class 0 is bright in the top half, class 1 in the bottom.
data::BucketDataset toy_separable(int per_class, std::uint64_t seed) {
    Rng rng(seed);
    data::BucketDataset ds;
    ds.num_classes = 2;
    ds.rows = 8;
    ds.cols = 8;
    ds.speckle_fingerprint = sha256(std::string_view("toy-separable"));
    for (int i = 0; i < per_class; ++i)
        for (int c = 0; c < 2; ++c) {
            sim::BucketArray arr{8, 8, std::vector<double>(64), {}};
            for (int k = 0; k < 64; ++k) {
                const bool top = k < 32;
                arr.values[static_cast<std::size_t>(k)] =
                    data::to_stored(rng.uniform(0.0, 1.0) + ((top == (c == 0)) ? 0.6 : 0.0));
            }
            ds.samples.push_back({std::move(arr), c});
        }
    return data::normalize_dataset(ds).first;
}

double class_accuracy(const Discriminator<float>& d, const TrainingData<float>& data) {
    auto out = discriminator_infer(d, data.x);
    int ok = 0;
    for (Eigen::Index i = 0; i < out.class_probs.rows(); ++i) {
        Eigen::Index arg = 0;
        out.class_probs.row(i).maxCoeff(&arg);
        ok += arg == data.labels[static_cast<std::size_t>(i)];
    }
    return static_cast<double>(ok) / static_cast<double>(data.labels.size());
}

template <class T>
DiscriminatorOutput<T> planted(std::vector<double> realness, std::vector<std::vector<double>> probs) {
    DiscriminatorOutput<T> o;
    o.realness.resize(static_cast<Eigen::Index>(realness.size()), 1);
    o.class_probs.resize(static_cast<Eigen::Index>(probs.size()), static_cast<Eigen::Index>(probs[0].size()));
    for (std::size_t i = 0; i < realness.size(); ++i) {
        o.realness(static_cast<Eigen::Index>(i), 0) = static_cast<T>(realness[i]);
        for (std::size_t k = 0; k < probs[i].size(); ++k)
            o.class_probs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = static_cast<T>(probs[i][k]);
    }
    return o;
}

}  // namespace

TEST_CASE("model config") {
    ModelConfig m;
    CHECK(m.generator_hidden == std::vector<int>{256, 512, 1024, 1024});
    CHECK(m.discriminator_hidden == std::vector<int>{512, 512, 512});
    CHECK(m.noise_dim == 100);
    nlohmann::json j = small_model();
    CHECK(j.get<ModelConfig>() == small_model());
    j["bogus"] = 1;
    CHECK_THROWS_AS(j.get<ModelConfig>(), UsageError);
    ModelConfig bad = small_model();
    bad.num_classes = 1;
    CHECK_THROWS_AS(bad.validate(), UsageError);
    CHECK(parse_objective("contrast") == Objective::Contrast);
    CHECK_THROWS_AS(parse_objective("wgan"), UsageError);
}

TEST_CASE("generator_forward") {
    Rng rng(1);
    auto cfg = small_model();
    auto g = make_generator<double>(cfg, rng);
    CHECK(g.layers.size() == 3);
    CHECK(g.layers.front().in() == cfg.num_classes + cfg.noise_dim);
    CHECK(g.layers.back().out() == 16);

    Md z = random_matrix(rng, 5, cfg.noise_dim, -3, 3);
    std::vector<int> labels{0, 1, 2, 1, 0};
    Md out = generator_forward(g, z, labels);
    CHECK(out.rows() == 5);
    CHECK(out.cols() == 16);
    CHECK((out.array().abs() < 1.0).all());
    CHECK(generator_forward(g, z, labels) == out);

    std::vector<int> other{2, 1, 2, 1, 0};
    Md changed = generator_forward(g, z, other);
    CHECK(changed.row(0) != out.row(0));
    CHECK(changed.row(1) == out.row(1));

    // Large weights saturate tanh but never reach +-1 in float.
    for (auto& l : g.layers) l.weight.value *= 200.0;
    Md sat = generator_forward(g, z, labels);
    CHECK((sat.array().abs() <= 1.0).all());

    std::vector<int> bad{0, 1, 3, 1, 0};
    CHECK_THROWS_AS(generator_forward(g, z, bad), LabelError);
    Md wrong = random_matrix(rng, 5, cfg.noise_dim + 1);
    CHECK_THROWS_AS(generator_forward(g, wrong, labels), DimensionError);

    // The tape path records the same function.
    auto g2 = make_generator<double>(cfg, rng);
    nn::Tape<double> t;
    auto v = generator_on_tape(t, g2, z, labels);
    CHECK((t.value(v) - generator_forward(g2, z, labels)).cwiseAbs().maxCoeff() <= 1e-15);
}

TEST_CASE("discriminator_forward") {
    Rng rng(2);
    auto cfg = small_model(5);
    auto d = make_discriminator<double>(cfg, rng);
    CHECK(d.trunk.size() == 2);
    CHECK(d.head_c.out() == 5);
    CHECK(d.head_s.out() == 1);

    SUBCASE("zero heads give 0.5 and a uniform class distribution") {
        d.head_s.weight.value.setZero();
        d.head_c.weight.value.setZero();
        Md x = random_matrix(rng, 4, 16);
        auto out = discriminator_forward(d, x, BatchNormMode::Train);
        for (Eigen::Index i = 0; i < 4; ++i) {
            CHECK(out.realness(i, 0) == 0.5);
            for (Eigen::Index k = 0; k < 5; ++k) CHECK(out.class_probs(i, k) == doctest::Approx(0.2).epsilon(1e-15));
        }
    }
    SUBCASE("head consistency on random inputs") {
        for (int trial = 0; trial < 50; ++trial) {
            Md x = random_matrix(rng, 2 + static_cast<int>(rng.below(6)), 16, -5, 5);
            for (auto mode : {BatchNormMode::Train, BatchNormMode::Infer}) {
                auto out = discriminator_forward(d, x, mode);
                for (Eigen::Index i = 0; i < x.rows(); ++i) {
                    CHECK(std::abs(out.class_probs.row(i).sum() - 1.0) <= 1e-12);
                    CHECK(out.realness(i, 0) > 0.0);
                    CHECK(out.realness(i, 0) < 1.0);
                }
            }
        }
    }
    SUBCASE("running statistics") {
        Md x = random_matrix(rng, 6, 16);
        auto before = d.norms[0].running_mean;
        discriminator_forward(d, x, BatchNormMode::Train, false);
        CHECK(d.norms[0].running_mean == before);
        discriminator_forward(d, x, BatchNormMode::Train, true);
        CHECK(d.norms[0].running_mean != before);
        auto infer = discriminator_infer(d, x);
        nn::Tape<double> t;
        auto v = discriminator_on_tape(t, t.constant(x), d, BatchNormMode::Infer, nn::ParamGrad::Skip, false);
        CHECK((t.value(v.class_probs) - infer.class_probs).cwiseAbs().maxCoeff() <= 1e-15);
    }
    SUBCASE("shape errors") {
        Md x = random_matrix(rng, 4, 15);
        CHECK_THROWS_AS(discriminator_infer(d, x), DimensionError);
    }
}

TEST_CASE("discriminator_loss") {
    const double ln2 = std::log(2.0);
    SUBCASE("undecided outputs") {
        auto o = planted<double>({0.5, 0.5}, {{0.25, 0.25, 0.25, 0.25}, {0.25, 0.25, 0.25, 0.25}});
        std::vector<int> l{0, 3};
        auto loss = discriminator_loss(o, l, o, l);
        CHECK(loss.l_s == doctest::Approx(ln2).epsilon(1e-12));
        CHECK(loss.l_c == doctest::Approx(std::log(4.0)).epsilon(1e-12));
        CHECK(loss.total == doctest::Approx(ln2 + std::log(4.0)).epsilon(1e-12));
    }
    SUBCASE("perfect discrimination") {
        auto real = planted<double>({1.0, 1.0}, {{1.0, 0.0}, {0.0, 1.0}});
        auto fake = planted<double>({0.0, 0.0}, {{0.0, 1.0}, {1.0, 0.0}});
        std::vector<int> rl{0, 1}, fl{1, 0};
        auto loss = discriminator_loss(real, rl, fake, fl);
        CHECK(loss.total >= 0.0);
        CHECK(loss.total <= 1e-5);
    }
    SUBCASE("hand-computed batch of four") {
        auto real = planted<double>({0.9, 0.6, 0.3, 0.8}, {{0.7, 0.2, 0.1}, {0.1, 0.8, 0.1}, {0.3, 0.3, 0.4}, {0.5, 0.25, 0.25}});
        auto fake = planted<double>({0.2, 0.4, 0.7, 0.1}, {{0.6, 0.3, 0.1}, {0.2, 0.2, 0.6}, {0.1, 0.1, 0.8}, {0.4, 0.4, 0.2}});
        std::vector<int> rl{0, 1, 2, 1}, fl{1, 2, 2, 0};
        const double ls = -(std::log(0.9) + std::log(0.6) + std::log(0.3) + std::log(0.8) + std::log(0.8) +
                            std::log(0.6) + std::log(0.3) + std::log(0.9)) / 8.0;
        const double lc = -(std::log(0.7) + std::log(0.8) + std::log(0.4) + std::log(0.25) + std::log(0.3) +
                            std::log(0.6) + std::log(0.8) + std::log(0.4)) / 8.0;
        auto loss = discriminator_loss(real, rl, fake, fl);
        CHECK(std::abs(loss.l_s - ls) <= 1e-9);
        CHECK(std::abs(loss.l_c - lc) <= 1e-9);
        CHECK(std::abs(loss.total - (ls + lc)) <= 1e-9);
    }
    SUBCASE("tape version agrees") {
        Rng rng(4);
        auto cfg = small_model();
        auto d = make_discriminator<double>(cfg, rng);
        Md xr = random_matrix(rng, 4, 16), xf = random_matrix(rng, 3, 16);
        std::vector<int> rl{0, 1, 2, 0}, fl{2, 2, 1};
        nn::Tape<double> t;
        auto r = discriminator_on_tape(t, t.constant(xr), d, BatchNormMode::Infer, nn::ParamGrad::Skip, false);
        auto f = discriminator_on_tape(t, t.constant(xf), d, BatchNormMode::Infer, nn::ParamGrad::Skip, false);
        auto tape_loss = breakdown(t, discriminator_loss_on_tape(t, r, rl, f, fl));
        auto direct = discriminator_loss(discriminator_infer(d, xr), rl, discriminator_infer(d, xf), fl);
        CHECK(tape_loss.l_s == doctest::Approx(direct.l_s).epsilon(1e-12));
        CHECK(tape_loss.l_c == doctest::Approx(direct.l_c).epsilon(1e-12));
    }
}

TEST_CASE("generator_loss") {
    const double ln2 = std::log(2.0);
    std::vector<int> l{1, 0};
    auto fooled = planted<double>({1.0, 1.0}, {{0.0, 1.0}, {1.0, 0.0}});
    auto g = generator_loss(fooled, l, Objective::AcGan);
    CHECK(g.total >= 0.0);
    CHECK(g.total <= 1e-5);

    auto undecided = planted<double>({0.5, 0.5}, {{0.5, 0.5}, {0.5, 0.5}});
    auto u = generator_loss(undecided, l, Objective::AcGan);
    CHECK(u.total == doctest::Approx(ln2 + std::log(2.0)).epsilon(1e-12));

    auto p = generator_loss(undecided, l, Objective::Contrast);
    CHECK(p.l_s == doctest::Approx(ln2));
    CHECK(p.total == doctest::Approx(0.0).epsilon(1e-12));
    auto pf = generator_loss(fooled, l, Objective::Contrast);
    CHECK(pf.l_s > 10.0);  // the literal sign rewards looking fake

    SUBCASE("finite differences through a frozen discriminator") {
        for (auto objective : {Objective::AcGan, Objective::Contrast}) {
            auto cfg = small_model();
            cfg.objective = objective;
            nn::GradCheckOptions opt;
            opt.eps = 1e-5;
            auto r = grad_check_generator(cfg, 4, 21, opt);
            INFO(r.report.worst);
            CHECK(r.report.max_rel_error <= 1e-4);
            CHECK(r.report.coords_checked > 300);
        }
    }
}

TEST_CASE("full-network gradient checks on a small architecture") {
    auto cfg = small_model(4, 3, 5);
    nn::GradCheckOptions opt;
    auto infer = grad_check_discriminator(cfg, 4, 5, BatchNormMode::Infer, opt);
    INFO(infer.report.worst);
    CHECK(infer.report.max_rel_error <= 1e-4);
    auto train = grad_check_discriminator(cfg, 4, 5, BatchNormMode::Train, opt);
    INFO(train.report.worst);
    CHECK(train.report.max_rel_error <= 1e-4);
    CHECK(train.max_excluded_grad <= 1e-12);
    CHECK(train.tensors == infer.tensors - cfg.discriminator_hidden.size());
}

TEST_CASE("training steps") {
    auto cfg = small_model(2, 8, 8);
    TrainConfig tc;
    tc.batch_size = 8;
    tc.seed = 3;
    auto ds = toy_separable(12, 1);
    auto data = to_training_data<double>(ds);

    SUBCASE("update isolation") {
        auto s = init_state<double>(cfg, tc);
        auto gp = s.g.params();
        auto dp = s.d.params();
        Rng rng(9);
        for (int step = 0; step < 5; ++step) {
            Md x = data.x.topRows(8);
            std::vector<int> labels(data.labels.begin(), data.labels.begin() + 8);
            auto g0 = hash_params<double>(gp), d0 = hash_params<double>(dp);
            discriminator_step(s, x, labels, true);
            CHECK(hash_params<double>(gp) == g0);
            CHECK(hash_params<double>(dp) != d0);

            Md z = random_matrix(rng, 8, cfg.noise_dim);
            GeneratorPass<double> pass(s.g, z, labels);
            g0 = hash_params<double>(gp);
            d0 = hash_params<double>(dp);
            discriminator_step(s, pass.fakes(), labels, false);
            CHECK(hash_params<double>(gp) == g0);
            d0 = hash_params<double>(dp);
            auto bn0 = s.d.norms[0].running_mean;
            generator_step(s, pass);
            CHECK(hash_params<double>(dp) == d0);
            CHECK(s.d.norms[0].running_mean == bn0);
            CHECK(hash_params<double>(gp) != g0);
        }
        CHECK(s.adam_d.step == 10);
        CHECK(s.adam_g.step == 5);
    }
    SUBCASE("one epoch: finite losses, batch accounting") {
        auto s = init_state<double>(cfg, tc);
        auto rec = train_epoch(s, data, tc);
        CHECK(rec.epoch == 1);
        CHECK(rec.iterations == 3);  // 24 samples / 8
        for (double v : {rec.d.l_s, rec.d.l_c, rec.d.total, rec.g.l_s, rec.g.l_c, rec.g.total}) CHECK(std::isfinite(v));
        CHECK(s.history.size() == 1);

        TrainingData<double> odd{data.x.topRows(17), {data.labels.begin(), data.labels.begin() + 17}};
        auto s2 = init_state<double>(cfg, tc);
        CHECK(train_epoch(s2, odd, tc).iterations == 2);  // 8 + 9, the single leftover is merged
        TrainingData<double> empty{Md(0, 64), {}};
        CHECK_THROWS_AS(train_epoch(s2, empty, tc), DegenerateError);
    }
}

TEST_CASE("train") {
    auto cfg = small_model(2, 8, 8);
    auto ds = toy_separable(16, 2);
    TrainConfig tc;
    tc.batch_size = 8;
    tc.seed = 5;

    SUBCASE("zero epochs leave the initial parameters") {
        tc.epochs = 0;
        auto ck = train(cfg, tc, ds);
        auto init = init_state<double>(cfg, tc);
        auto fresh = make_checkpoint(init_state<float>(cfg, tc), tc, ds);
        CHECK(encode_checkpoint(ck) == encode_checkpoint(fresh));
        CHECK(ck.history.empty());
        CHECK(ck.epoch == 0);
    }
    SUBCASE("determinism and history") {
        tc.epochs = 3;
        auto a = train(cfg, tc, ds), b = train(cfg, tc, ds);
        CHECK(encode_checkpoint(a) == encode_checkpoint(b));
        CHECK(a.history.size() == 3);
        CHECK(a.fingerprint == ds.speckle_fingerprint);
        CHECK(a.norm_stats == ds.norm_stats);
        tc.seed = 6;
        CHECK(encode_checkpoint(train(cfg, tc, ds)) != encode_checkpoint(a));
        tc.seed = 5;
        tc.precision = Precision::F64;
        auto c = train(cfg, tc, ds), d = train(cfg, tc, ds);
        CHECK(encode_checkpoint(c) == encode_checkpoint(d));
    }
    SUBCASE("checkpoint cadence") {
        tc.epochs = 6;
        tc.checkpoint_every = 2;
        std::vector<int> seen;
        int epochs_seen = 0;
        TrainHooks hooks;
        hooks.on_epoch = [&](const EpochLosses&) { ++epochs_seen; };
        hooks.on_checkpoint = [&](const Checkpoint& c) { seen.push_back(c.epoch); };
        auto final_ck = train(cfg, tc, ds, hooks);
        CHECK(seen == std::vector<int>{2, 4, 6});
        CHECK(epochs_seen == 6);
        CHECK(final_ck.epoch == 6);
    }
    SUBCASE("errors") {
        tc.epochs = 1;
        auto raw = data::denormalize(ds);
        CHECK_THROWS_AS(train(cfg, tc, raw), ContractError);
        tc.batch_size = 40;
        CHECK_THROWS_AS(train(cfg, tc, ds), DimensionError);
        tc.batch_size = 1;
        CHECK_THROWS_AS(train(cfg, tc, ds), UsageError);
        tc.batch_size = 8;
        auto wrong = small_model(3, 8, 8);
        CHECK_THROWS_AS(train(wrong, tc, ds), DimensionError);
        auto nofp = ds;
        nofp.speckle_fingerprint = {};
        CHECK_THROWS_AS(train(cfg, tc, nofp), ContractError);
    }
}

TEST_CASE("toy separable set reaches full class-head accuracy") {
    ModelConfig cfg;
    cfg.num_classes = 2;
    cfg.rows = 8;
    cfg.cols = 8;
    auto ds = toy_separable(32, 3);
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 16;
    tc.seed = 11;
    auto ck = train(cfg, tc, ds);
    CHECK(class_accuracy(ck.d, to_training_data<float>(ds)) == 1.0);
    for (const auto& e : ck.history) CHECK(std::isfinite(e.d.total));
}

TEST_CASE("equilibrium probe: a generator replaced by the data sampler") {
    auto cfg = small_model(2, 8, 8);
    cfg.discriminator_hidden = {32, 32};
    auto ds = toy_separable(64, 4);
    auto data = to_training_data<float>(ds);
    TrainConfig tc;
    tc.batch_size = 16;
    tc.seed = 8;
    auto s = init_state<float>(cfg, tc);
    FakeSampler<float> sampler = [&](Rng& rng, std::span<const int> labels) {
        Mf out(static_cast<Eigen::Index>(labels.size()), data.x.cols());
        for (std::size_t i = 0; i < labels.size(); ++i) {
            // A random real sample of the requested class.
            std::size_t idx;
            do idx = rng.below(data.labels.size());
            while (data.labels[idx] != labels[i]);
            out.row(static_cast<Eigen::Index>(i)) = data.x.row(static_cast<Eigen::Index>(idx));
        }
        return out;
    };
    EpochLosses last;
    for (int e = 0; e < 40; ++e) last = train_epoch(s, data, tc, sampler);
    MESSAGE("realness real " << last.real_realness << " fake " << last.fake_realness);
    CHECK(std::abs(last.real_realness - 0.5) <= 0.1);
    CHECK(std::abs(last.fake_realness - 0.5) <= 0.1);
}

TEST_CASE("checkpoint persistence") {
    auto cfg = small_model(3, 4, 4);
    data::BucketDataset ds;
    ds.num_classes = 3;
    ds.rows = ds.cols = 4;
    ds.speckle_fingerprint = sha256(std::string_view("ckpt"));
    Rng rng(6);
    for (int i = 0; i < 12; ++i) {
        sim::BucketArray arr{4, 4, std::vector<double>(16), {}};
        for (double& v : arr.values) v = data::to_stored(rng.uniform(0, 9));
        ds.samples.push_back({arr, i % 3});
    }
    ds = data::normalize_dataset(ds).first;
    TrainConfig tc;
    tc.epochs = 2;
    tc.batch_size = 4;
    auto ck = train(cfg, tc, ds);

    auto bytes = encode_checkpoint(ck);
    auto back = decode_checkpoint(bytes);
    CHECK(encode_checkpoint(back) == bytes);
    CHECK(back.model == ck.model);
    CHECK(back.train == ck.train);
    CHECK(back.history == ck.history);
    CHECK(back.adam_d.step == ck.adam_d.step);
    Mf x = random_matrix(rng, 5, 16).cast<float>();
    auto o1 = discriminator_infer(ck.d, x), o2 = discriminator_infer(back.d, x);
    CHECK(o1.class_probs == o2.class_probs);
    CHECK(o1.realness == o2.realness);
    Mf z = random_matrix(rng, 3, cfg.noise_dim).cast<float>();
    std::vector<int> labels{0, 1, 2};
    CHECK(generator_forward(ck.g, z, labels) == generator_forward(back.g, z, labels));

    auto path = test::temp_path("model.grck");
    save_checkpoint(ck, path);
    CHECK(encode_checkpoint(load_checkpoint(path)) == bytes);

    SUBCASE("corruption") {
        auto bad = bytes;
        bad[bad.size() - 100] ^= 0x10;
        CHECK_THROWS_AS(decode_checkpoint(bad), ChecksumError);
    }
    SUBCASE("version") {
        auto bad = bytes;
        bad[4] = 7;
        CHECK_THROWS_AS(decode_checkpoint(bad), VersionError);
    }
    SUBCASE("missing fingerprint") {
        auto blank = ck;
        blank.fingerprint = {};
        CHECK_THROWS_AS(decode_checkpoint(encode_checkpoint(blank)), ValidationError);
    }
    SUBCASE("foreign file") {
        CHECK_THROWS_AS(decode_checkpoint(data::encode_dataset(ds)), FormatError);
    }
}
