#include "ghostrec/gan/checkpoint.hpp"

#include <cstring>
#include <type_traits>

#include "ghostrec/common/error.hpp"

namespace ghostrec::gan {

namespace {

constexpr char kMagic[4] = {'G', 'R', 'C', 'K'};

template <class To, class From>
nn::AdamState<To> cast_adam(const nn::AdamState<From>& s) {
    nn::AdamState<To> out;
    out.step = s.step;
    out.hyper = s.hyper;
    for (const auto& m : s.m) out.m.push_back(m.template cast<To>());
    for (const auto& v : s.v) out.v.push_back(v.template cast<To>());
    return out;
}

nlohmann::json loss_json(const LossBreakdown& l) { return {l.l_s, l.l_c, l.total}; }

LossBreakdown loss_from(const nlohmann::json& j) {
    return {j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>()};
}

// Every tensor in a fixed order. The pointers stay valid while c lives.
template <class C>
auto tensor_slots(C& c) {
    using M = std::conditional_t<std::is_const_v<C>, const nn::Matrix<float>, nn::Matrix<float>>;
    using D = std::conditional_t<std::is_const_v<C>, const nn::DenseParams<float>, nn::DenseParams<float>>;
    std::vector<std::pair<std::string, M*>> out;
    auto dense = [&](const std::string& prefix, D& p) {
        out.emplace_back(prefix + ".weight", &p.weight.value);
        out.emplace_back(prefix + ".bias", &p.bias.value);
    };
    for (std::size_t i = 0; i < c.g.layers.size(); ++i) dense("g.dense" + std::to_string(i), c.g.layers[i]);
    for (std::size_t i = 0; i < c.d.trunk.size(); ++i) {
        dense("d.dense" + std::to_string(i), c.d.trunk[i]);
        const std::string bn = "d.bn" + std::to_string(i);
        out.emplace_back(bn + ".gamma", &c.d.norms[i].gamma.value);
        out.emplace_back(bn + ".beta", &c.d.norms[i].beta.value);
        out.emplace_back(bn + ".running_mean", &c.d.norms[i].running_mean);
        out.emplace_back(bn + ".running_var", &c.d.norms[i].running_var);
    }
    dense("d.head_s", c.d.head_s);
    dense("d.head_c", c.d.head_c);
    for (std::size_t i = 0; i < c.adam_g.m.size(); ++i) {
        out.emplace_back("adam_g.m" + std::to_string(i), &c.adam_g.m[i]);
        out.emplace_back("adam_g.v" + std::to_string(i), &c.adam_g.v[i]);
    }
    for (std::size_t i = 0; i < c.adam_d.m.size(); ++i) {
        out.emplace_back("adam_d.m" + std::to_string(i), &c.adam_d.m[i]);
        out.emplace_back("adam_d.v" + std::to_string(i), &c.adam_d.v[i]);
    }
    return out;
}

nlohmann::json header_json(const Checkpoint& c) {
    nlohmann::json h;
    h["model"] = c.model;
    h["train"] = c.train;
    if (c.norm_stats)
        h["norm_stats"] = {c.norm_stats->min, c.norm_stats->max};
    else
        h["norm_stats"] = nullptr;
    h["noise_config"] = c.noise_config;
    h["epoch"] = c.epoch;
    h["iterations"] = c.iterations;
    h["adam_g_step"] = c.adam_g.step;
    h["adam_d_step"] = c.adam_d.step;
    h["bn_momentum"] = c.d.norms.empty() ? 0.9 : static_cast<double>(c.d.norms.front().momentum);
    h["bn_epsilon"] = c.d.norms.empty() ? 1e-5 : static_cast<double>(c.d.norms.front().epsilon);
    auto& hist = h["history"] = nlohmann::json::array();
    for (const auto& e : c.history)
        hist.push_back({{"epoch", e.epoch},
                        {"d", loss_json(e.d)},
                        {"g", loss_json(e.g)},
                        {"iterations", e.iterations},
                        {"real_realness", e.real_realness},
                        {"fake_realness", e.fake_realness}});
    return h;
}

}  // namespace

template <class T>
Checkpoint make_checkpoint(const GanState<T>& s, const TrainConfig& train, const data::BucketDataset& ds) {
    Checkpoint c;
    c.model = s.model;
    c.train = train;
    c.fingerprint = ds.speckle_fingerprint;
    c.norm_stats = ds.norm_stats;
    c.noise_config = ds.noise_config;
    c.g = cast_generator<float>(s.g);
    if (s.d_average.empty()) {
        c.d = cast_discriminator<float>(s.d);
    } else {
        Discriminator<T> avg = s.d;
        auto params = avg.params();
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s.d_average[i];
        c.d = cast_discriminator<float>(avg);
    }
    c.adam_g = cast_adam<float>(s.adam_g);
    c.adam_d = cast_adam<float>(s.adam_d);
    c.epoch = s.epoch;
    c.iterations = s.iterations;
    c.history = s.history;
    return c;
}

namespace {

template <class T>
Checkpoint run_training(const ModelConfig& model, const TrainConfig& config, const data::BucketDataset& ds,
                        const TrainHooks& hooks) {
    auto state = init_state<T>(model, config);
    const auto training = to_training_data<T>(ds);
    const auto population = to_training_data<float>(ds);
    // Inference statistics come from the whole training set under the
    // current weights; the running averages lag the weights too much.
    auto snapshot = [&] {
        auto c = make_checkpoint(state, config, ds);
        if (state.epoch > 0) recalibrate_batchnorm(c.d, population.x);
        return c;
    };
    for (int e = 0; e < config.epochs; ++e) {
        auto rec = train_epoch(state, training, config);
        if (hooks.on_epoch) hooks.on_epoch(rec);
        if (hooks.on_checkpoint && config.checkpoint_every > 0 && state.epoch % config.checkpoint_every == 0)
            hooks.on_checkpoint(snapshot());
    }
    return snapshot();
}

}  // namespace

Checkpoint train(const ModelConfig& model, const TrainConfig& config, const data::BucketDataset& ds,
                 const TrainHooks& hooks) {
    model.validate();
    config.validate();
    if (!ds.normalized || !ds.norm_stats) throw ContractError("training needs a normalized dataset");
    if (is_zero(ds.speckle_fingerprint)) throw ContractError("training dataset carries no speckle fingerprint");
    if (ds.num_classes != model.num_classes)
        throw DimensionError("dataset has " + std::to_string(ds.num_classes) + " classes, model expects " +
                             std::to_string(model.num_classes));
    if (ds.rows != model.rows || ds.cols != model.cols) throw DimensionError("dataset arrays do not match the model input");
    if (static_cast<std::size_t>(config.batch_size) > ds.size())
        throw DimensionError("batch size " + std::to_string(config.batch_size) + " exceeds the " +
                             std::to_string(ds.size()) + " training samples");
    return config.precision == Precision::F32 ? run_training<float>(model, config, ds, hooks)
                                              : run_training<double>(model, config, ds, hooks);
}

Bytes encode_checkpoint(const Checkpoint& ckpt) {
    const Checkpoint& c = ckpt;
    ByteWriter w;
    w.bytes(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(kMagic), 4));
    w.u16(kCheckpointFormatVersion);
    w.bytes(c.fingerprint);
    w.string32(header_json(c).dump());
    const auto slots = tensor_slots(c);
    w.u32(static_cast<std::uint32_t>(slots.size()));
    for (const auto& [name, m] : slots) {
        w.u16(static_cast<std::uint16_t>(name.size()));
        w.text(name);
        w.u32(static_cast<std::uint32_t>(m->rows()));
        w.u32(static_cast<std::uint32_t>(m->cols()));
        for (Eigen::Index k = 0; k < m->size(); ++k) w.f32(m->data()[k]);
    }
    w.u32(crc32(w.data()));
    return w.take();
}

Checkpoint decode_checkpoint(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < 10 || std::memcmp(bytes.data(), kMagic, 4) != 0) throw FormatError("not a GRCK checkpoint file");
    ByteReader r(bytes);
    r.bytes(4);
    const auto version = r.u16();
    if (version == 0 || version > kCheckpointFormatVersion)
        throw VersionError("checkpoint format version " + std::to_string(version) + " is not supported (max " +
                           std::to_string(kCheckpointFormatVersion) + ")");
    if (bytes.size() < 4) throw FormatError("truncated checkpoint");
    ByteReader trailer(bytes.subspan(bytes.size() - 4));
    if (crc32(bytes.first(bytes.size() - 4)) != trailer.u32())
        throw ChecksumError("checkpoint checksum mismatch: file is corrupted");

    Checkpoint c;
    auto fp = r.bytes(32);
    std::copy(fp.begin(), fp.end(), c.fingerprint.begin());
    if (is_zero(c.fingerprint)) throw ValidationError("checkpoint has no speckle fingerprint");

    nlohmann::json h;
    try {
        h = nlohmann::json::parse(r.string32());
        c.model = h.at("model").get<ModelConfig>();
        c.train = h.at("train").get<TrainConfig>();
        if (!h.at("norm_stats").is_null()) c.norm_stats = data::NormStats{h["norm_stats"].at(0), h["norm_stats"].at(1)};
        c.noise_config = h.at("noise_config").get<std::string>();
        c.epoch = h.at("epoch").get<int>();
        c.iterations = h.at("iterations").get<std::uint64_t>();
        for (const auto& e : h.at("history"))
            c.history.push_back(EpochLosses{e.at("epoch").get<int>(), loss_from(e.at("d")), loss_from(e.at("g")),
                                            e.at("iterations").get<std::uint64_t>(),
                                            e.at("real_realness").get<double>(), e.at("fake_realness").get<double>()});
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("bad checkpoint header: ") + e.what());
    } catch (const UsageError& e) {
        throw ValidationError(std::string("bad checkpoint header: ") + e.what());
    }

    // Rebuild the architecture, then overwrite every tensor from the file.
    Rng scratch(0);
    try {
        c.model.validate();
    } catch (const UsageError& e) {
        throw ValidationError(std::string("bad checkpoint model: ") + e.what());
    }
    c.g = make_generator<float>(c.model, scratch);
    c.d = make_discriminator<float>(c.model, scratch);
    for (auto& n : c.d.norms) {
        n.momentum = h.value("bn_momentum", 0.9f);
        n.epsilon = h.value("bn_epsilon", 1e-5f);
    }
    auto gp = c.g.params();
    auto dp = c.d.params();
    c.adam_g = nn::make_adam_state<float>(gp, c.train.adam);
    c.adam_d = nn::make_adam_state<float>(dp, c.train.adam);
    c.adam_g.step = h.at("adam_g_step").get<std::uint64_t>();
    c.adam_d.step = h.at("adam_d_step").get<std::uint64_t>();

    auto slots = tensor_slots(c);
    const auto count = r.u32();
    if (count != slots.size())
        throw ValidationError("checkpoint holds " + std::to_string(count) + " tensors, architecture needs " +
                              std::to_string(slots.size()));
    for (auto& [name, m] : slots) {
        const auto len = r.u16();
        const auto got = r.text(len);
        if (got != name) throw ValidationError("expected tensor '" + name + "', found '" + got + "'");
        const auto rows = r.u32(), cols = r.u32();
        if (rows != static_cast<std::uint32_t>(m->rows()) || cols != static_cast<std::uint32_t>(m->cols()))
            throw ValidationError("tensor '" + name + "' has the wrong shape");
        for (Eigen::Index k = 0; k < m->size(); ++k) m->data()[k] = r.f32();
    }
    if (r.remaining() != 4) throw FormatError("trailing bytes in checkpoint");
    for (auto* p : gp) p->zero_grad();
    for (auto* p : dp) p->zero_grad();
    return c;
}

void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path) {
    write_file(path, encode_checkpoint(ckpt));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) { return decode_checkpoint(read_file(path)); }

template <class T>
Digest hash_params(std::span<nn::Param<T>* const> params) {
    ByteWriter w;
    for (const auto* p : params) {
        const auto* raw = reinterpret_cast<const std::uint8_t*>(p->value.data());
        w.bytes(std::span<const std::uint8_t>(raw, static_cast<std::size_t>(p->value.size()) * sizeof(T)));
    }
    return sha256(w.data());
}

template Checkpoint make_checkpoint(const GanState<float>&, const TrainConfig&, const data::BucketDataset&);
template Checkpoint make_checkpoint(const GanState<double>&, const TrainConfig&, const data::BucketDataset&);
template Digest hash_params(std::span<nn::Param<float>* const>);
template Digest hash_params(std::span<nn::Param<double>* const>);

}  // namespace ghostrec::gan
