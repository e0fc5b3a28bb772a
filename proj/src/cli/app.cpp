#include "ghostrec/cli/app.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <memory>
#include <optional>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "ghostrec/cli/config.hpp"
#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/error.hpp"
#include "ghostrec/common/hash.hpp"
#include "ghostrec/data/dataset.hpp"
#include "ghostrec/data/glyphs.hpp"
#include "ghostrec/data/idx.hpp"
#include "ghostrec/data/rotate.hpp"
#include "ghostrec/eval/evaluate.hpp"
#include "ghostrec/eval/pgm.hpp"
#include "ghostrec/eval/presets.hpp"
#include "ghostrec/gan/checkpoint.hpp"
#include "ghostrec/sim/speckle.hpp"
#include "ghostrec/sim/stats.hpp"

namespace ghostrec::cli {

namespace fs = std::filesystem;

namespace {

constexpr double kReferenceCorrelationLo = 0.0595;
constexpr double kReferenceCorrelationHi = 0.4078;

// Flag values parsed by CLI11 and applied on top of the loaded config.
class Overrides {
public:
    template <class T, class F>
    CLI::Option* option(CLI::App* app, const std::string& name, F apply, const std::string& help) {
        auto value = std::make_shared<T>();
        auto* opt = app->add_option(name, *value, help);
        setters_.push_back([value, opt, apply](RunConfig& c) {
            if (opt->count() > 0) apply(c, *value);
        });
        return opt;
    }

    template <class F>
    CLI::Option* flag(CLI::App* app, const std::string& name, F apply, const std::string& help) {
        auto value = std::make_shared<bool>(false);
        auto* opt = app->add_flag(name, *value, help);
        setters_.push_back([value, opt, apply](RunConfig& c) {
            if (opt->count() > 0) apply(c, *value);
        });
        return opt;
    }

    void apply(RunConfig& c) const {
        for (const auto& s : setters_) s(c);
    }

private:
    std::vector<std::function<void(RunConfig&)>> setters_;
};

std::pair<int, int> parse_size(const std::string& text) {
    const auto x = text.find('x');
    auto number = [&](std::string_view s) {
        int v = 0;
        auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc() || p != s.data() + s.size() || s.empty())
            throw UsageError("size must look like HxW, got '" + text + "'");
        return v;
    };
    if (x == std::string::npos) throw UsageError("size must look like HxW, got '" + text + "'");
    const std::string_view s(text);
    return {number(s.substr(0, x)), number(s.substr(x + 1))};
}

double parse_double(const std::string& text, const std::string& what) {
    try {
        std::size_t used = 0;
        const double v = std::stod(text, &used);
        if (used != text.size()) throw std::invalid_argument(text);
        return v;
    } catch (const std::logic_error&) {
        throw UsageError("bad " + what + " '" + text + "'");
    }
}

// none | fixed:SIGMA[:SEED] | awgn:SNR_DB[:SEED]
data::ChannelConfig parse_noise(const std::string& text) {
    if (text == "none" || text.empty()) return data::ChannelConfig::none();
    std::vector<std::string> parts;
    std::stringstream ss(text);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) throw UsageError("noise must be none, fixed:SIGMA[:SEED] or awgn:SNR[:SEED]");
    const double v = parse_double(parts[1], "noise level");
    std::uint64_t seed = 11;
    if (parts.size() == 3) seed = static_cast<std::uint64_t>(parse_double(parts[2], "noise seed"));
    if (parts[0] == "fixed") {
        if (!(v >= 0.0)) throw UsageError("fixed noise sigma must be >= 0");
        return data::ChannelConfig::fixed(v, seed);
    }
    if (parts[0] == "awgn") return data::ChannelConfig::awgn(v, seed);
    throw UsageError("unknown noise kind '" + parts[0] + "'");
}

std::string fixed(double v, int digits) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(digits) << v;
    return os.str();
}

// Files written by one command; the manifest hashes them at the end.
class Session {
public:
    Session(std::string command, RunConfig config, std::vector<std::string> args)
        : command_(std::move(command)), config_(std::move(config)), args_(std::move(args)) {
        dir_ = config_.output.dir;
        fs::create_directories(dir_);
    }

    const RunConfig& config() const { return config_; }
    const fs::path& dir() const { return dir_; }

    fs::path input(const std::string& path) {
        if (path.empty()) throw UsageError(command_ + ": missing input path");
        inputs_.emplace_back(path);
        return inputs_.back();
    }

    fs::path output(const std::string& relative) {
        fs::path p = dir_ / relative;
        fs::create_directories(p.parent_path());
        outputs_.push_back(p);
        return p;
    }

    void write_text(const std::string& relative, const std::string& text) {
        const auto p = output(relative);
        write_file(p, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

    void write_pgm(const std::string& relative, std::span<const double> values, int rows, int cols) {
        const auto p = output(relative);
        eval::write_pgm(p, values, rows, cols);
        outputs_.emplace_back(p.string() + ".txt");
    }

    // Every regular file below dir, for commands that delegate their writes.
    void adopt_tree() {
        for (const auto& e : fs::recursive_directory_iterator(dir_))
            if (e.is_regular_file()) outputs_.push_back(e.path());
    }

    void finish() {
        const std::string echo_name = "config-" + command_ + ".json";
        const std::string manifest_name = "manifest-" + command_ + ".txt";
        write_text(echo_name, nlohmann::json(config_).dump(2) + "\n");

        std::sort(outputs_.begin(), outputs_.end());
        outputs_.erase(std::unique(outputs_.begin(), outputs_.end()), outputs_.end());
        std::ostringstream m;
        m << "command " << command_ << "\n";
        m << "args";
        for (const auto& a : args_) m << ' ' << a;
        m << "\n";
        for (const auto& p : inputs_) m << "input " << to_hex(sha256(read_file(p))) << ' ' << p.string() << "\n";
        for (const auto& p : outputs_) {
            if (p.filename() == manifest_name) continue;
            m << "output " << to_hex(sha256(read_file(p))) << ' ' << fs::relative(p, dir_).generic_string() << "\n";
        }
        const auto text = m.str();
        write_file(dir_ / manifest_name, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
    }

private:
    std::string command_;
    RunConfig config_;
    std::vector<std::string> args_;
    fs::path dir_;
    std::vector<fs::path> inputs_;
    std::vector<fs::path> outputs_;
};

sim::SpeckleSequence speckles_from_config(const SpeckleBlock& s) {
    return sim::generate_speckles(s.seed, s.count, s.height, s.width, sim::SpeckleDistribution::parse(s.distribution));
}

sim::TargetImage transposed(const sim::TargetImage& img) {
    sim::TargetImage t = img;
    t.height = img.width;
    t.width = img.height;
    for (int r = 0; r < img.height; ++r)
        for (int c = 0; c < img.width; ++c)
            t.pixels[static_cast<std::size_t>(c * t.width + r)] = img.at(r, c);
    return t;
}

struct Context {
    std::ostream& out;
    std::ostream& err;
    std::vector<std::string> args;
};

int cmd_gen_speckles(const RunConfig& cfg, Context& ctx) {
    Session s("gen-speckles", cfg, ctx.args);
    const auto seq = speckles_from_config(cfg.speckle);
    sim::save_speckles(seq, s.output("speckles.gspk"));
    if (cfg.output.emit_images) {
        const auto px = seq.pattern_pixels(0);
        s.write_pgm("images/speckle_0.pgm", std::vector<double>(px.begin(), px.end()), seq.height(), seq.width());
    }
    s.finish();
    ctx.out << "fingerprint " << to_hex(seq.fingerprint()) << "\n";
    ctx.out << "wrote " << (s.dir() / "speckles.gspk").string() << " (" << seq.count() << " patterns, " << seq.height()
            << "x" << seq.width() << ", " << seq.distribution().to_string() << ")\n";
    return 0;
}

struct GlyphArgs {
    std::string glyphs = "0123";
    int per_class = 10;
    std::uint64_t seed = 2024;
    int size = 28;
};

int cmd_gen_glyphs(const RunConfig& cfg, const GlyphArgs& g, Context& ctx) {
    Session s("gen-glyphs", cfg, ctx.args);
    for (char c : g.glyphs)
        if (!data::has_glyph(c)) throw UsageError(std::string("no glyph skeleton for '") + c + "'");
    if (g.per_class < 1) throw UsageError("--per-class must be >= 1");
    const auto targets = data::synth_handwriting(g.glyphs, g.per_class, g.seed, {}, g.size);
    std::vector<sim::TargetImage> images;
    std::vector<int> labels;
    for (const auto& t : targets) {
        images.push_back(t.image);
        labels.push_back(t.label);
    }
    data::save_idx_images(images, s.output("glyphs-images-idx3-ubyte"));
    data::save_idx_labels(labels, s.output("glyphs-labels-idx1-ubyte"));
    s.finish();
    ctx.out << "wrote " << images.size() << " glyph images (" << g.glyphs << ")\n";
    return 0;
}

int cmd_synth(const RunConfig& cfg, Context& ctx) {
    Session s("synth", cfg, ctx.args);
    const auto& d = cfg.dataset;
    const auto images = data::load_idx_images(s.input(d.images));
    const auto labels = data::load_idx_labels(s.input(d.labels));
    if (images.size() != labels.size())
        throw UsageError("image and label files hold different counts (" + std::to_string(images.size()) + " vs " +
                         std::to_string(labels.size()) + ")");
    const auto seq = sim::load_speckles(s.input(d.speckles));

    const std::vector<double> angles = d.rotations.empty() ? std::vector<double>{0.0} : d.rotations;
    std::vector<data::LabeledTarget> targets;
    std::vector<int> taken;
    int max_label = -1;
    for (std::size_t i = 0; i < images.size(); ++i) {
        int label = labels[i] - d.label_offset;
        if (!d.select_labels.empty()) {
            auto it = std::find(d.select_labels.begin(), d.select_labels.end(), labels[i]);
            if (it == d.select_labels.end()) continue;
            label = static_cast<int>(it - d.select_labels.begin());
        }
        if (label < 0) throw UsageError("label " + std::to_string(labels[i]) + " is negative after the offset");
        if (static_cast<int>(taken.size()) <= label) taken.resize(static_cast<std::size_t>(label) + 1, 0);
        if (d.per_class > 0 && taken[static_cast<std::size_t>(label)] >= d.per_class) continue;
        ++taken[static_cast<std::size_t>(label)];
        max_label = std::max(max_label, label);
        const auto img = d.transpose ? transposed(images[i]) : images[i];
        for (double a : angles)
            targets.push_back({data::rotate_target(img, a), label, "idx:" + std::to_string(i) + "@" + fixed(a, 1)});
    }
    if (targets.empty()) throw UsageError("no images left after label selection");
    int num_classes = d.num_classes;
    if (num_classes == 0)
        num_classes = d.select_labels.empty() ? max_label + 1 : static_cast<int>(d.select_labels.size());

    auto ds = data::synth_dataset(targets, seq, num_classes, parse_noise(d.noise), d.rows, d.cols);
    data::save_dataset(ds, s.output("dataset.gbds"));
    if (cfg.output.emit_images) {
        const auto& a = ds.samples.front().array;
        s.write_pgm("images/bucket_0.pgm", a.values, a.rows, a.cols);
    }
    s.finish();
    ctx.out << "wrote " << ds.size() << " samples, " << num_classes << " classes, " << ds.rows << "x" << ds.cols
            << " arrays, noise " << ds.noise_config << "\n";
    return 0;
}

int cmd_split(const RunConfig& cfg, Context& ctx) {
    Session s("split", cfg, ctx.args);
    const auto ds = data::load_dataset(s.input(cfg.dataset.data));
    const auto [train, test] =
        data::split(ds, {cfg.dataset.train_fraction, cfg.dataset.split_seed, cfg.dataset.stratified});
    data::save_dataset(train, s.output("train.gbds"));
    data::save_dataset(test, s.output("test.gbds"));
    s.finish();
    ctx.out << "train " << train.size() << " test " << test.size() << "\n";
    return 0;
}

int cmd_train(RunConfig cfg, Context& ctx) {
    if (cfg.dataset.data.empty()) throw UsageError("train: missing --data");
    auto ds = data::load_dataset(cfg.dataset.data);
    if (!ds.normalized) ds = data::normalize_dataset(ds).first;
    cfg.model.num_classes = ds.num_classes;
    cfg.model.rows = ds.rows;
    cfg.model.cols = ds.cols;
    Session s("train", cfg, ctx.args);
    s.input(cfg.dataset.data);

    gan::TrainHooks hooks;
    hooks.on_epoch = [&](const gan::EpochLosses& e) {
        ctx.out << "epoch " << e.epoch << " d " << fixed(e.d.total, 4) << " g " << fixed(e.g.total, 4) << " real "
                << fixed(e.real_realness, 3) << " fake " << fixed(e.fake_realness, 3) << "\n";
    };
    hooks.on_checkpoint = [&](const gan::Checkpoint& c) {
        gan::save_checkpoint(c, s.output("checkpoints/epoch_" + std::to_string(c.epoch) + ".grck"));
    };
    const auto ckpt = gan::train(cfg.model, cfg.train, ds, hooks);
    gan::save_checkpoint(ckpt, s.output("checkpoints/model.grck"));
    s.write_text("tables/history.csv", eval::history_csv(ckpt.history));
    s.finish();
    ctx.out << "wrote " << (s.dir() / "checkpoints/model.grck").string() << " after " << ckpt.epoch << " epochs\n";
    return 0;
}

struct ModelArgs {
    std::string model;
    std::optional<double> snr_db;
    std::uint64_t noise_seed = 11;
    std::vector<int> indices;
};

int cmd_eval(const RunConfig& cfg, const ModelArgs& m, Context& ctx) {
    Session s("eval", cfg, ctx.args);
    const auto ckpt = gan::load_checkpoint(s.input(m.model));
    auto ds = data::load_dataset(s.input(cfg.dataset.data));
    eval::require_fingerprint(ckpt, ds.speckle_fingerprint);
    std::string condition = "clean";
    if (m.snr_db) {
        ds = data::apply_channel(ds, data::ChannelConfig::awgn(*m.snr_db, m.noise_seed));
        condition = "snr=" + fixed(*m.snr_db, 1) + "dB";
    }
    const auto report = eval::evaluate(ds, ckpt, {cfg.train.threads});

    std::ostringstream acc;
    acc << "class,condition,samples,correct,accuracy\n";
    for (int c = 0; c < report.num_classes; ++c)
        acc << c << ',' << condition << ',' << report.per_class_total[c] << ',' << report.per_class_correct[c] << ','
            << fixed(report.class_accuracy(c), 6) << "\n";
    acc << "overall," << condition << ',' << report.total << ',' << report.correct << ',' << fixed(report.overall, 6)
        << "\n";
    s.write_text("tables/eval.csv", acc.str());

    std::ostringstream conf;
    conf << "true\\predicted";
    for (int c = 0; c < report.num_classes; ++c) conf << ',' << c;
    conf << "\n";
    for (int t = 0; t < report.num_classes; ++t) {
        conf << t;
        for (int p = 0; p < report.num_classes; ++p) conf << ',' << report.confusion[t][p];
        conf << "\n";
    }
    s.write_text("tables/confusion.csv", conf.str());
    s.finish();

    ctx.out << "condition " << condition << "\n";
    ctx.out << "accuracy " << fixed(report.overall, 4) << " (" << report.correct << "/" << report.total << ")\n";
    ctx.out << "mean latency " << fixed(report.mean_latency_ms, 3) << " ms\n";
    ctx.out << "config " << report.config_hash << " seed " << report.seed << "\n";
    return 0;
}

int cmd_classify(const RunConfig& cfg, const ModelArgs& m, Context& ctx) {
    Session s("classify", cfg, ctx.args);
    const auto ckpt = gan::load_checkpoint(s.input(m.model));
    const auto ds = eval::prepare_for(data::load_dataset(s.input(cfg.dataset.data)), ckpt);
    std::vector<int> indices = m.indices;
    if (indices.empty())
        for (std::size_t i = 0; i < ds.size(); ++i) indices.push_back(static_cast<int>(i));
    nn::Matrix<float> x(static_cast<Eigen::Index>(indices.size()), ds.rows * ds.cols);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        const int i = indices[r];
        if (i < 0 || static_cast<std::size_t>(i) >= ds.size())
            throw UsageError("index " + std::to_string(i) + " is outside the dataset");
        const auto& v = ds.samples[static_cast<std::size_t>(i)].array.values;
        for (std::size_t k = 0; k < v.size(); ++k) x(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(k)) = static_cast<float>(v[k]);
    }
    const auto recs = eval::classify_rows(x, ckpt);
    std::ostringstream csv;
    csv << "index,label,predicted,confidence\n";
    for (std::size_t r = 0; r < recs.size(); ++r) {
        const int truth = ds.samples[static_cast<std::size_t>(indices[r])].label;
        csv << indices[r] << ',' << truth << ',' << recs[r].label << ',' << fixed(recs[r].confidence, 6) << "\n";
        ctx.out << "sample " << indices[r] << " predicted " << recs[r].label << " confidence "
                << fixed(recs[r].confidence, 4) << " label " << truth << "\n";
    }
    s.write_text("tables/classify.csv", csv.str());
    s.finish();
    return 0;
}

int cmd_corr(const RunConfig& cfg, Context& ctx) {
    Session s("corr", cfg, ctx.args);
    const auto ds = data::load_dataset(s.input(cfg.dataset.data));
    const auto table = eval::class_mean_correlation_table(ds);
    std::vector<std::string> names;
    for (int c = 0; c < ds.num_classes; ++c) names.push_back(std::to_string(c));
    s.write_text("tables/correlation.csv", eval::matrix_csv(table, names));
    s.finish();
    const auto range = eval::off_diagonal_range(table);
    ctx.out << "off-diagonal range " << fixed(range.min, 4) << " .. " << fixed(range.max, 4) << " (reference "
            << kReferenceCorrelationLo << " .. " << kReferenceCorrelationHi << ")\n";
    return 0;
}

struct ReconstructArgs {
    std::optional<int> measurements;
    int index = 0;
};

int cmd_reconstruct(const RunConfig& cfg, const ReconstructArgs& r, Context& ctx) {
    Session s("reconstruct", cfg, ctx.args);
    sim::SpeckleSequence seq;
    if (!cfg.dataset.speckles.empty()) {
        if (r.measurements) throw UsageError("--measurements conflicts with a speckle file");
        seq = sim::load_speckles(s.input(cfg.dataset.speckles));
    } else {
        auto block = cfg.speckle;
        if (r.measurements) block.count = *r.measurements;
        seq = speckles_from_config(block);
    }
    const auto images = data::load_idx_images(s.input(cfg.dataset.images));
    if (r.index < 0 || static_cast<std::size_t>(r.index) >= images.size())
        throw UsageError("--index " + std::to_string(r.index) + " is outside the image file");
    auto target = images[static_cast<std::size_t>(r.index)];
    if (cfg.dataset.transpose) target = transposed(target);

    const auto buckets = sim::measure_sequence(seq, target);
    const auto g2 = sim::g2_reconstruct(seq, buckets);
    const double rho = sim::pearson(g2.pixels, target.pixels);
    s.write_pgm("images/g2.pgm", g2.pixels, g2.height, g2.width);
    s.write_pgm("images/target.pgm", target.pixels, target.height, target.width);
    s.write_text("tables/reconstruct.csv", "measurements,pearson\n" + std::to_string(seq.count()) + "," + fixed(rho, 6) + "\n");
    s.finish();
    ctx.out << "measurements " << seq.count() << " pearson " << fixed(rho, 4) << "\n";
    return 0;
}

struct ReportArgs {
    std::string preset = "letters";
    std::string preset_config;
    std::optional<int> epochs;
    std::optional<int> train_per_class;
    std::optional<int> test_per_class;
};

int cmd_report(const RunConfig& cfg, const ReportArgs& r, Context& ctx) {
    eval::ExperimentPreset p = eval::make_preset(r.preset);
    if (!r.preset_config.empty()) {
        const Bytes bytes = read_file(r.preset_config);
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(bytes.begin(), bytes.end());
        } catch (const nlohmann::json::parse_error& e) {
            throw UsageError("preset config is not valid JSON: " + std::string(e.what()));
        }
        nlohmann::json merged = p;
        merged.merge_patch(j);
        p = merged.get<eval::ExperimentPreset>();
    }
    if (r.epochs) {
        p.train.epochs = *r.epochs;
        p.eval_epochs.erase(std::remove_if(p.eval_epochs.begin(), p.eval_epochs.end(),
                                           [&](int e) { return e > *r.epochs; }),
                            p.eval_epochs.end());
    }
    if (r.train_per_class) p.train_per_class = *r.train_per_class;
    if (r.test_per_class) p.test_per_class = *r.test_per_class;
    p.train.threads = cfg.train.threads;
    p.validate();

    Session s("report", cfg, ctx.args);
    if (!r.preset_config.empty()) s.input(r.preset_config);
    eval::RunOptions options;
    options.output_dir = s.dir();
    options.emit_images = cfg.output.emit_images;
    options.threads = cfg.train.threads;
    options.log = [&](const std::string& line) { ctx.out << line << "\n"; };
    const auto result = eval::run_preset(p, options);
    s.adopt_tree();
    s.finish();

    for (const auto& c : result.conditions)
        ctx.out << "condition " << c.condition << " accuracy " << fixed(c.report.overall, 4) << " latency "
                << fixed(c.report.mean_latency_ms, 3) << " ms\n";
    const auto range = eval::off_diagonal_range(result.correlation);
    ctx.out << "correlation off-diagonal range " << fixed(range.min, 4) << " .. " << fixed(range.max, 4)
            << " (reference " << kReferenceCorrelationLo << " .. " << kReferenceCorrelationHi << ")\n";
    return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Ghost-imaging recognition pipeline: speckles, bucket datasets, GAN training and evaluation",
                 "ghostrec"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "ghostrec 1.0.0");

    Overrides ov;
    std::string config_path;
    Context ctx{out, err, args};

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "JSON run config; flags override it")->check(CLI::ExistingFile);
        ov.option<std::string>(sub, "--out-dir", [](RunConfig& c, const std::string& v) { c.output.dir = v; },
                               "output directory");
        ov.option<int>(sub, "--threads", [](RunConfig& c, int v) { c.train.threads = v; },
                       "evaluation worker threads (1 = reference mode)");
        ov.flag(sub, "--no-images", [](RunConfig& c, bool v) { c.output.emit_images = !v; }, "skip PGM output");
    };
    auto speckle_opts = [&](CLI::App* sub) {
        ov.option<std::uint64_t>(sub, "--seed", [](RunConfig& c, std::uint64_t v) { c.speckle.seed = v; },
                                 "speckle seed");
        ov.option<int>(sub, "--count", [](RunConfig& c, int v) { c.speckle.count = v; }, "number of patterns");
        ov.option<std::string>(
            sub, "--size",
            [](RunConfig& c, const std::string& v) { std::tie(c.speckle.height, c.speckle.width) = parse_size(v); },
            "pattern size HxW");
        ov.option<std::string>(sub, "--dist", [](RunConfig& c, const std::string& v) { c.speckle.distribution = v; },
                               "bernoulli, bernoulli:P or uniform");
    };
    auto data_opt = [&](CLI::App* sub) {
        ov.option<std::string>(sub, "--data", [](RunConfig& c, const std::string& v) { c.dataset.data = v; },
                               "GBDS dataset");
    };

    auto* gen_speckles = app.add_subcommand("gen-speckles", "write a GSPK speckle sequence");
    common(gen_speckles);
    speckle_opts(gen_speckles);

    GlyphArgs glyph_args;
    auto* gen_glyphs = app.add_subcommand("gen-glyphs", "write synthetic handwritten glyphs as IDX files");
    common(gen_glyphs);
    gen_glyphs->add_option("--glyphs", glyph_args.glyphs, "characters, one class each")->capture_default_str();
    gen_glyphs->add_option("--per-class", glyph_args.per_class, "images per character")->capture_default_str();
    gen_glyphs->add_option("--seed", glyph_args.seed, "glyph seed")->capture_default_str();
    gen_glyphs->add_option("--size", glyph_args.size, "canvas size")->capture_default_str();

    auto* synth = app.add_subcommand("synth", "simulate bucket arrays for IDX images");
    common(synth);
    ov.option<std::string>(synth, "--images", [](RunConfig& c, const std::string& v) { c.dataset.images = v; },
                           "IDX image file");
    ov.option<std::string>(synth, "--labels", [](RunConfig& c, const std::string& v) { c.dataset.labels = v; },
                           "IDX label file");
    ov.option<std::string>(synth, "--speckles", [](RunConfig& c, const std::string& v) { c.dataset.speckles = v; },
                           "GSPK speckle file");
    ov.option<std::vector<double>>(synth, "--rotate",
                                   [](RunConfig& c, const std::vector<double>& v) { c.dataset.rotations = v; },
                                   "rotation angles in degrees; one sample per image and angle")
        ->delimiter(',');
    ov.option<std::string>(synth, "--noise", [](RunConfig& c, const std::string& v) { c.dataset.noise = v; },
                           "none | fixed:SIGMA[:SEED] | awgn:SNR_DB[:SEED]");
    ov.option<std::vector<int>>(synth, "--select-labels",
                                [](RunConfig& c, const std::vector<int>& v) { c.dataset.select_labels = v; },
                                "keep these labels, renumbered by position")
        ->delimiter(',');
    ov.flag(synth, "--transpose", [](RunConfig& c, bool v) { c.dataset.transpose = v; }, "transpose every image");
    ov.option<int>(synth, "--label-offset", [](RunConfig& c, int v) { c.dataset.label_offset = v; },
                   "subtracted from every label");
    ov.option<int>(synth, "--per-class", [](RunConfig& c, int v) { c.dataset.per_class = v; },
                   "first N images of each class");
    ov.option<int>(synth, "--classes", [](RunConfig& c, int v) { c.dataset.num_classes = v; }, "class count");
    ov.option<std::string>(
        synth, "--fold",
        [](RunConfig& c, const std::string& v) { std::tie(c.dataset.rows, c.dataset.cols) = parse_size(v); },
        "bucket array fold RxC");

    auto* split = app.add_subcommand("split", "split a dataset into train.gbds and test.gbds");
    common(split);
    data_opt(split);
    ov.option<double>(split, "--fraction", [](RunConfig& c, double v) { c.dataset.train_fraction = v; },
                      "train fraction");
    ov.option<std::uint64_t>(split, "--seed", [](RunConfig& c, std::uint64_t v) { c.dataset.split_seed = v; },
                             "split seed");
    ov.flag(split, "--no-stratify", [](RunConfig& c, bool v) { c.dataset.stratified = !v; }, "plain random split");

    auto* train = app.add_subcommand("train", "train the conditional GAN on a dataset");
    common(train);
    data_opt(train);
    ov.option<int>(train, "--epochs", [](RunConfig& c, int v) { c.train.epochs = v; }, "epochs");
    ov.option<int>(train, "--batch-size", [](RunConfig& c, int v) { c.train.batch_size = v; }, "batch size");
    ov.option<double>(train, "--lr", [](RunConfig& c, double v) { c.train.adam.lr = v; }, "Adam learning rate");
    ov.option<double>(train, "--beta1", [](RunConfig& c, double v) { c.train.adam.beta1 = v; }, "Adam beta1");
    ov.option<double>(train, "--beta2", [](RunConfig& c, double v) { c.train.adam.beta2 = v; }, "Adam beta2");
    ov.option<std::uint64_t>(train, "--seed", [](RunConfig& c, std::uint64_t v) { c.train.seed = v; },
                             "training seed");
    ov.option<std::string>(
          train, "--precision",
          [](RunConfig& c, const std::string& v) { c.train.precision = v == "f64" ? gan::Precision::F64 : gan::Precision::F32; },
          "f32 or f64")
        ->check(CLI::IsMember({"f32", "f64"}));
    ov.option<std::string>(train, "--objective",
                           [](RunConfig& c, const std::string& v) { c.model.objective = gan::parse_objective(v); },
                           "acgan or contrast");
    ov.option<int>(train, "--noise-dim", [](RunConfig& c, int v) { c.model.noise_dim = v; }, "generator noise size");
    ov.option<std::vector<int>>(train, "--g-widths",
                                [](RunConfig& c, const std::vector<int>& v) { c.model.generator_hidden = v; },
                                "generator hidden widths")
        ->delimiter(',');
    ov.option<std::vector<int>>(train, "--d-widths",
                                [](RunConfig& c, const std::vector<int>& v) { c.model.discriminator_hidden = v; },
                                "discriminator hidden widths")
        ->delimiter(',');
    ov.option<int>(train, "--checkpoint-every", [](RunConfig& c, int v) { c.train.checkpoint_every = v; },
                   "extra checkpoint cadence in epochs");
    ov.option<double>(train, "--d-average-decay", [](RunConfig& c, double v) { c.train.d_average_decay = v; },
                      "checkpoint D weight averaging decay (0 = off)");

    ModelArgs model_args;
    double snr_value = 0.0;
    auto* eval_cmd = app.add_subcommand("eval", "accuracy and latency of a checkpoint on a dataset");
    common(eval_cmd);
    data_opt(eval_cmd);
    eval_cmd->add_option("--model", model_args.model, "GRCK checkpoint")->required();
    auto* snr_opt = eval_cmd->add_option("--snr", snr_value, "add AWGN at this SNR (dB) to a raw dataset");
    eval_cmd->add_option("--noise-seed", model_args.noise_seed, "AWGN seed")->capture_default_str();

    auto* classify = app.add_subcommand("classify", "per-sample predictions");
    common(classify);
    data_opt(classify);
    classify->add_option("--model", model_args.model, "GRCK checkpoint")->required();
    classify->add_option("--index", model_args.indices, "sample indices (default: all)")->delimiter(',');

    auto* corr = app.add_subcommand("corr", "class-mean correlation table");
    common(corr);
    data_opt(corr);

    ReconstructArgs recon_args;
    int measurements = 0;
    auto* reconstruct = app.add_subcommand("reconstruct", "second-order correlation image of one IDX target");
    common(reconstruct);
    speckle_opts(reconstruct);
    ov.option<std::string>(reconstruct, "--images", [](RunConfig& c, const std::string& v) { c.dataset.images = v; },
                           "IDX image file");
    ov.option<std::string>(reconstruct, "--speckles",
                           [](RunConfig& c, const std::string& v) { c.dataset.speckles = v; },
                           "GSPK speckle file instead of generating");
    auto* meas_opt = reconstruct->add_option("--measurements", measurements, "number of generated patterns");
    reconstruct->add_option("--index", recon_args.index, "image index")->capture_default_str();

    ReportArgs report_args;
    int report_epochs = 0, report_train = 0, report_test = 0;
    auto* report = app.add_subcommand("report", "run an experiment preset end to end");
    common(report);
    report->add_option("--preset", report_args.preset, "preset name")
        ->check(CLI::IsMember(eval::preset_names()))
        ->capture_default_str();
    report->add_option("--preset-config", report_args.preset_config, "JSON preset overrides")
        ->check(CLI::ExistingFile);
    auto* rep_epochs = report->add_option("--epochs", report_epochs, "training epochs");
    auto* rep_train = report->add_option("--train-per-class", report_train, "training samples per class");
    auto* rep_test = report->add_option("--test-per-class", report_test, "test samples per class");

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg = config_path.empty() ? RunConfig{} : load_run_config(config_path);
        ov.apply(cfg);
        if (cfg.train.threads < 1) throw UsageError("--threads must be >= 1");

        if (*gen_speckles) return cmd_gen_speckles(cfg, ctx);
        if (*gen_glyphs) return cmd_gen_glyphs(cfg, glyph_args, ctx);
        if (*synth) return cmd_synth(cfg, ctx);
        if (*split) return cmd_split(cfg, ctx);
        if (*train) return cmd_train(cfg, ctx);
        if (*eval_cmd) {
            if (snr_opt->count() > 0) model_args.snr_db = snr_value;
            return cmd_eval(cfg, model_args, ctx);
        }
        if (*classify) return cmd_classify(cfg, model_args, ctx);
        if (*corr) return cmd_corr(cfg, ctx);
        if (*reconstruct) {
            if (meas_opt->count() > 0) recon_args.measurements = measurements;
            return cmd_reconstruct(cfg, recon_args, ctx);
        }
        if (*report) {
            if (rep_epochs->count() > 0) report_args.epochs = report_epochs;
            if (rep_train->count() > 0) report_args.train_per_class = report_train;
            if (rep_test->count() > 0) report_args.test_per_class = report_test;
            return cmd_report(cfg, report_args, ctx);
        }
        return 2;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << "\n";
        return 1;
    } catch (const FormatError& e) {
        err << "format error: " << e.what() << "\n";
        return 2;
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "file error: " << e.what() << "\n";
        return 2;
    }
}

}  // namespace ghostrec::cli
