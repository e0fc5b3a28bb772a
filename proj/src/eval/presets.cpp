#include "ghostrec/eval/presets.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "ghostrec/common/error.hpp"
#include "ghostrec/data/glyphs.hpp"
#include "ghostrec/data/idx.hpp"
#include "ghostrec/data/rotate.hpp"
#include "ghostrec/eval/pgm.hpp"

namespace ghostrec::eval {

namespace fs = std::filesystem;

int ExperimentPreset::num_classes() const {
    if (!angles.empty()) return static_cast<int>(angles.size());
    if (!idx_classes.empty()) return static_cast<int>(idx_classes.size());
    return static_cast<int>(glyphs.size());
}

namespace {

std::string angle_name(double a) {
    std::ostringstream os;
    os << a;
    return os.str() + "deg";
}

bool use_idx(const ExperimentPreset& p) { return !p.idx_images.empty() || !p.idx_labels.empty(); }

}  // namespace

std::vector<std::string> ExperimentPreset::class_names() const {
    std::vector<std::string> out;
    const std::string base = use_idx(*this) ? std::string() : glyphs;
    if (!angles.empty()) {
        const std::string who = use_idx(*this) ? "idx" + std::to_string(idx_classes.front()) : base;
        for (double a : angles) out.push_back(who + "@" + angle_name(a));
    } else if (use_idx(*this)) {
        for (int c : idx_classes) out.push_back("idx" + std::to_string(c));
    } else {
        for (char c : glyphs) out.emplace_back(1, c);
    }
    return out;
}

void ExperimentPreset::validate() const {
    auto fail = [this](const std::string& why) { throw ValidationError("preset '" + name + "': " + why); };
    if (use_idx(*this)) {
        if (idx_images.empty() || idx_labels.empty()) fail("idx_images and idx_labels go together");
        if (idx_classes.empty()) fail("idx_classes must list the labels to use");
        if (!angles.empty() && idx_classes.size() != 1) fail("a rotation preset takes exactly one idx class");
        if (std::set<int>(idx_classes.begin(), idx_classes.end()).size() != idx_classes.size())
            fail("idx_classes has duplicates");
    } else {
        if (glyphs.empty()) fail("no glyphs");
        for (char c : glyphs)
            if (!data::has_glyph(c)) fail(std::string("no glyph skeleton for '") + c + "'");
        if (!angles.empty() && glyphs.size() != 1) fail("a rotation preset takes exactly one glyph");
        if (angles.empty() && std::set<char>(glyphs.begin(), glyphs.end()).size() != glyphs.size())
            fail("glyphs has duplicates");
    }
    if (num_classes() < 2) fail("needs at least two classes");
    if (std::set<double>(angles.begin(), angles.end()).size() != angles.size()) fail("angles has duplicates");
    if (train_per_class < 2 || test_per_class < 1) fail("needs >= 2 training and >= 1 test sample per class");
    if (rows < 1 || cols < 1) fail("array dims must be positive");
    if (target_size < 2) fail("target_size must be at least 2");
    if (!(rotation_sd_deg >= 0.0)) fail("rotation_sd_deg must be >= 0");
    if (!(turbulence_fraction >= 0.0)) fail("turbulence_fraction must be >= 0");
    if (turbulence_fraction > 0.0 && !snr_db.empty()) fail("turbulence and an SNR sweep are separate presets");
    for (double s : snr_db)
        if (!std::isfinite(s)) fail("SNR levels must be finite");
    for (int e : eval_epochs)
        if (e < 1 || e > train.epochs) fail("eval epoch " + std::to_string(e) + " outside [1, epochs]");
    if (!std::is_sorted(eval_epochs.begin(), eval_epochs.end()) ||
        std::adjacent_find(eval_epochs.begin(), eval_epochs.end()) != eval_epochs.end())
        fail("eval_epochs must be strictly increasing");
    if (model.num_classes != num_classes() || model.rows != rows || model.cols != cols)
        fail("model block (" + std::to_string(model.num_classes) + " classes, " + std::to_string(model.rows) + "x" +
             std::to_string(model.cols) + ") disagrees with the preset");
    try {
        sim::SpeckleDistribution::parse(distribution);
        model.validate();
        train.validate();
    } catch (const UsageError& e) {
        fail(e.what());
    }
    if (train.batch_size > num_classes() * train_per_class) fail("batch larger than the training set");
}

void to_json(nlohmann::json& j, const ExperimentPreset& p) {
    j = nlohmann::json{{"name", p.name},
                       {"glyphs", p.glyphs},
                       {"angles", p.angles},
                       {"train_per_class", p.train_per_class},
                       {"test_per_class", p.test_per_class},
                       {"rows", p.rows},
                       {"cols", p.cols},
                       {"target_size", p.target_size},
                       {"distribution", p.distribution},
                       {"speckle_seed", p.speckle_seed},
                       {"data_seed", p.data_seed},
                       {"rotation_sd_deg", p.rotation_sd_deg},
                       {"turbulence_fraction", p.turbulence_fraction},
                       {"noise_seed", p.noise_seed},
                       {"snr_db", p.snr_db},
                       {"eval_epochs", p.eval_epochs},
                       {"idx_images", p.idx_images},
                       {"idx_labels", p.idx_labels},
                       {"idx_classes", p.idx_classes},
                       {"model", p.model},
                       {"train", p.train}};
}

void from_json(const nlohmann::json& j, ExperimentPreset& p) {
    if (!j.is_object()) throw UsageError("preset must be a JSON object");
    const nlohmann::json defaults = p;
    for (const auto& [key, _] : j.items())
        if (!defaults.contains(key)) throw UsageError("unknown preset key '" + key + "'");
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) j.at(key).get_to(field);
        };
        get("name", p.name);
        get("glyphs", p.glyphs);
        get("angles", p.angles);
        get("train_per_class", p.train_per_class);
        get("test_per_class", p.test_per_class);
        get("rows", p.rows);
        get("cols", p.cols);
        get("target_size", p.target_size);
        get("distribution", p.distribution);
        get("speckle_seed", p.speckle_seed);
        get("data_seed", p.data_seed);
        get("rotation_sd_deg", p.rotation_sd_deg);
        get("turbulence_fraction", p.turbulence_fraction);
        get("noise_seed", p.noise_seed);
        get("snr_db", p.snr_db);
        get("eval_epochs", p.eval_epochs);
        get("idx_images", p.idx_images);
        get("idx_labels", p.idx_labels);
        get("idx_classes", p.idx_classes);
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad preset: ") + e.what());
    }
    if (j.contains("model")) {
        nlohmann::json merged = p.model;
        merged.update(j.at("model"));
        p.model = merged.get<gan::ModelConfig>();
    }
    if (j.contains("train")) {
        nlohmann::json merged = p.train;
        merged.update(j.at("train"));
        p.train = merged.get<gan::TrainConfig>();
    }
}

std::vector<std::string> preset_names() {
    return {"letters", "numbers", "shared_speckles", "attitudes", "turbulence", "snr_sweep", "physical_scale"};
}

ExperimentPreset make_preset(const std::string& name) {
    ExperimentPreset p;
    p.name = name;
    if (name == "letters") {
        p.glyphs = "ABCDEFGHIJ";
    } else if (name == "numbers") {
        p.glyphs = "0123456789";
    } else if (name == "shared_speckles") {
        p.glyphs = "ABCDEFGHIJ0123456789";
        p.train_per_class = 200;
        p.test_per_class = 50;
        p.train.epochs = 150;
    } else if (name == "attitudes") {
        p.glyphs = "A";
        p.angles = {0, 30, -30, 50, -50, 60, -60, 90, -90, 180};
        p.train_per_class = 200;
        p.test_per_class = 50;
        p.rotation_sd_deg = 2.0;
        p.train.epochs = 200;
    } else if (name == "turbulence") {
        p.glyphs = "XJTU";
        p.turbulence_fraction = 0.3;
        p.train.epochs = 150;
    } else if (name == "snr_sweep") {
        p.glyphs = "XJTU";
        p.snr_db = {14, 8, 4, 2, 0, -1, -3, -4, -5};
        p.train.epochs = 150;
    } else if (name == "physical_scale") {
        p.glyphs = "LSNZ";
        p.rows = p.cols = 10;
        p.eval_epochs = {20, 60, 80};
        p.train.epochs = 80;
    } else {
        std::string all;
        for (const auto& n : preset_names()) all += (all.empty() ? "" : ", ") + n;
        throw UsageError("unknown preset '" + name + "' (one of " + all + ")");
    }
    p.model.num_classes = p.num_classes();
    p.model.rows = p.rows;
    p.model.cols = p.cols;
    return p;
}

namespace {

struct IdxSource {
    std::vector<std::vector<sim::TargetImage>> by_class;  // in file order
};

IdxSource load_idx_source(const ExperimentPreset& p) {
    auto images = data::load_idx_images(p.idx_images);
    auto labels = data::load_idx_labels(p.idx_labels);
    if (images.size() != labels.size())
        throw ValidationError("idx source: " + std::to_string(images.size()) + " images but " +
                              std::to_string(labels.size()) + " labels");
    IdxSource src;
    src.by_class.resize(p.idx_classes.size());
    for (std::size_t i = 0; i < images.size(); ++i) {
        auto it = std::find(p.idx_classes.begin(), p.idx_classes.end(), labels[i]);
        if (it != p.idx_classes.end()) src.by_class[static_cast<std::size_t>(it - p.idx_classes.begin())].push_back(images[i]);
    }
    const auto need = static_cast<std::size_t>(p.train_per_class + p.test_per_class);
    const std::size_t copies = p.angles.empty() ? 1 : p.angles.size();
    for (std::size_t c = 0; c < src.by_class.size(); ++c)
        if (src.by_class[c].size() < need * copies)
            throw ValidationError("idx source: label " + std::to_string(p.idx_classes[c]) + " has " +
                                  std::to_string(src.by_class[c].size()) + " images, preset needs " +
                                  std::to_string(need * copies));
    return src;
}

// Base images for one split: per base class, `count` images starting at
// `offset` (IDX) or drawn from `seed` (glyphs).
std::vector<std::vector<sim::TargetImage>> base_images(const ExperimentPreset& p, const IdxSource* idx, int count,
                                                       std::size_t offset, std::uint64_t seed, std::size_t copy) {
    std::vector<std::vector<sim::TargetImage>> out;
    if (idx) {
        for (const auto& imgs : idx->by_class) {
            const std::size_t start = offset + copy * static_cast<std::size_t>(p.train_per_class + p.test_per_class);
            out.emplace_back(imgs.begin() + static_cast<std::ptrdiff_t>(start),
                             imgs.begin() + static_cast<std::ptrdiff_t>(start) + count);
        }
        return out;
    }
    data::GlyphStyle style;
    style.rotation_sd_deg = p.rotation_sd_deg;
    const auto targets = data::synth_handwriting(p.glyphs, count, derive_seed(seed, copy), style, p.target_size);
    out.resize(p.glyphs.size());
    for (const auto& t : targets) out[static_cast<std::size_t>(t.label)].push_back(t.image);
    return out;
}

std::vector<data::LabeledTarget> split_targets(const ExperimentPreset& p, const IdxSource* idx, bool train) {
    const int count = train ? p.train_per_class : p.test_per_class;
    const std::size_t offset = train ? 0 : static_cast<std::size_t>(p.train_per_class);
    const std::uint64_t seed = derive_seed(p.data_seed, train ? 0 : 1);
    const auto names = p.class_names();
    std::vector<data::LabeledTarget> out;
    if (p.angles.empty()) {
        const auto base = base_images(p, idx, count, offset, seed, 0);
        for (std::size_t c = 0; c < base.size(); ++c)
            for (std::size_t j = 0; j < base[c].size(); ++j)
                out.push_back({base[c][j], static_cast<int>(c), names[c] + ":" + std::to_string(j)});
    } else {
        for (std::size_t k = 0; k < p.angles.size(); ++k) {
            const auto base = base_images(p, idx, count, offset, seed, k).front();
            for (std::size_t j = 0; j < base.size(); ++j)
                out.push_back({data::rotate_target(base[j], p.angles[k]), static_cast<int>(k),
                               names[k] + ":" + std::to_string(j)});
        }
    }
    for (auto& t : out) t.image.label = t.label;
    return out;
}

double pooled_sd(const data::BucketDataset& ds) {
    double sum = 0.0, sq = 0.0;
    std::size_t n = 0;
    for (const auto& s : ds.samples)
        for (double v : s.array.values) {
            sum += v;
            sq += v * v;
            ++n;
        }
    const double mean = sum / static_cast<double>(n);
    return std::sqrt(std::max(0.0, sq / static_cast<double>(n) - mean * mean));
}

void write_text(const fs::path& path, const std::string& text) {
    fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw FormatError("cannot write " + path.string());
}

std::string slug(std::string s) {
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '.') c = '_';
    return s;
}

void emit_images(const PresetData& d, const std::vector<std::string>& names, const fs::path& dir) {
    const auto images = dir / "images";
    for (int i = 0; i < std::min(4, d.speckles.count()); ++i) {
        const auto px = d.speckles.pattern_pixels(i);
        const std::vector<double> v(px.begin(), px.end());
        write_pgm(images / ("speckle_" + std::to_string(i) + ".pgm"), v, d.speckles.height(), d.speckles.width());
    }
    std::vector<bool> done(names.size(), false);
    for (std::size_t i = 0; i < d.train.samples.size(); ++i) {
        const auto& s = d.train.samples[i];
        const auto c = static_cast<std::size_t>(s.label);
        if (done[c]) continue;
        done[c] = true;
        const std::string tag = slug(names[c]);
        write_pgm(images / ("target_" + tag + ".pgm"), d.train_targets[i].image.pixels,
                  d.train_targets[i].image.height, d.train_targets[i].image.width);
        write_pgm(images / ("bucket_" + tag + ".pgm"), s.array.values, s.array.rows, s.array.cols);
        try {
            const auto g2 = sim::g2_reconstruct(d.speckles, s.array.values);
            write_pgm(images / ("g2_" + tag + ".pgm"), g2.pixels, g2.height, g2.width);
        } catch (const DegenerateError&) {
            // A speckle pixel that is never lit has no g2 value; skip the dump.
        }
    }
}

}  // namespace

PresetData synthesize_preset_data(const ExperimentPreset& p) {
    p.validate();
    std::optional<IdxSource> idx;
    if (use_idx(p)) idx = load_idx_source(p);
    const IdxSource* src = idx ? &*idx : nullptr;

    PresetData d;
    d.train_targets = split_targets(p, src, true);
    const auto test_targets = split_targets(p, src, false);
    const int size = d.train_targets.front().image.height;
    d.speckles = sim::generate_speckles(p.speckle_seed, p.rows * p.cols, size, d.train_targets.front().image.width,
                                        sim::SpeckleDistribution::parse(p.distribution));
    d.train = data::synth_dataset(d.train_targets, d.speckles, p.num_classes(), data::ChannelConfig::none(), p.rows,
                                  p.cols);
    d.test = data::synth_dataset(test_targets, d.speckles, p.num_classes(), data::ChannelConfig::none(), p.rows, p.cols);
    return d;
}

const ConditionResult& PresetResult::condition(const std::string& name) const {
    for (const auto& c : conditions)
        if (c.condition == name) return c;
    throw UsageError("preset result has no condition '" + name + "'");
}

PresetResult run_preset(const ExperimentPreset& p, const RunOptions& options) {
    auto log = [&](const std::string& msg) {
        if (options.log) options.log(msg);
    };
    const auto data = synthesize_preset_data(p);
    PresetResult result;
    result.preset = p.name;
    result.class_names = p.class_names();
    result.correlation = class_mean_correlation_table(data.train);
    const bool files = !options.output_dir.empty();
    if (files) {
        fs::create_directories(options.output_dir);
        write_text(options.output_dir / "preset.json", nlohmann::json(p).dump(2) + "\n");
        if (options.emit_images) emit_images(data, result.class_names, options.output_dir);
    }
    EvalOptions eval_options{options.threads};

    // Trains on raw `train_raw`, evaluating `tests` at each requested epoch.
    auto run = [&](const std::string& tag, const data::BucketDataset& train_raw,
                   const std::vector<std::pair<std::string, data::BucketDataset>>& tests) {
        const auto normalized = data::normalize_dataset(train_raw).first;
        gan::TrainConfig tc = p.train;
        const bool staged = !p.eval_epochs.empty();
        std::vector<int> at = staged ? p.eval_epochs : std::vector<int>{tc.epochs};
        if (staged) tc.checkpoint_every = std::reduce(at.begin(), at.end(), 0, [](int a, int b) { return std::gcd(a, b); });
        gan::TrainHooks hooks;
        hooks.on_epoch = [&](const gan::EpochLosses& e) {
            if (e.epoch % 10 == 0 || e.epoch == tc.epochs) {
                std::ostringstream os;
                os.precision(4);
                os << p.name << "/" << tag << " epoch " << e.epoch << " d " << e.d.total << " g " << e.g.total;
                log(os.str());
            }
        };
        auto evaluate_at = [&](const gan::Checkpoint& ck) {
            if (std::find(at.begin(), at.end(), ck.epoch) == at.end()) return;
            for (const auto& [cond, test] : tests) {
                const std::string name = staged ? cond + "@epoch" + std::to_string(ck.epoch) : cond;
                result.conditions.push_back({name, evaluate(test, ck, eval_options)});
                std::ostringstream os;
                os << p.name << " " << name << " accuracy " << result.conditions.back().report.overall;
                log(os.str());
            }
            if (files) gan::save_checkpoint(ck, options.output_dir / "checkpoints" / (slug(tag) + "_epoch" + std::to_string(ck.epoch) + ".grck"));
        };
        if (staged) hooks.on_checkpoint = evaluate_at;
        const auto final_ck = gan::train(p.model, tc, normalized, hooks);
        if (!staged) evaluate_at(final_ck);
        if (result.history.empty()) result.history = final_ck.history;
    };

    if (p.turbulence_fraction > 0.0) {
        result.turbulence_sigma = p.turbulence_fraction * pooled_sd(data.train);
        const auto channel = data::ChannelConfig::fixed(result.turbulence_sigma, p.noise_seed);
        run("turbulent", data::apply_channel(data.train, channel), {{"turbulent", data::apply_channel(data.test, channel)}});
        run("clean", data.train, {{"clean-matched", data.test}});
    } else if (!p.snr_db.empty()) {
        std::vector<std::pair<std::string, data::BucketDataset>> tests{{"clean", data.test}};
        for (std::size_t i = 0; i < p.snr_db.size(); ++i) {
            std::ostringstream os;
            os << "snr=" << p.snr_db[i] << "dB";
            tests.emplace_back(os.str(), data::apply_channel(data.test, data::ChannelConfig::awgn(
                                                                           p.snr_db[i], derive_seed(p.noise_seed, i))));
        }
        run("clean", data.train, tests);
    } else {
        run("clean", data.train, {{"clean", data.test}});
    }

    if (files) {
        write_text(options.output_dir / "tables" / "accuracy.csv", accuracy_csv(result));
        write_text(options.output_dir / "tables" / "correlation.csv", matrix_csv(result.correlation, result.class_names));
        write_text(options.output_dir / "tables" / "history.csv", history_csv(result.history));
    }
    return result;
}

std::string accuracy_csv(const PresetResult& r) {
    std::ostringstream os;
    os.precision(6);
    os << "preset,class,condition,samples,correct,accuracy\n";
    for (const auto& c : r.conditions) {
        const auto& rep = c.report;
        for (int k = 0; k < rep.num_classes; ++k)
            os << r.preset << "," << r.class_names.at(static_cast<std::size_t>(k)) << "," << c.condition << ","
               << rep.per_class_total[static_cast<std::size_t>(k)] << ","
               << rep.per_class_correct[static_cast<std::size_t>(k)] << "," << rep.class_accuracy(k) << "\n";
        os << r.preset << ",overall," << c.condition << "," << rep.total << "," << rep.correct << "," << rep.overall
           << "\n";
    }
    return os.str();
}

std::string matrix_csv(const Eigen::MatrixXd& m, const std::vector<std::string>& names) {
    std::ostringstream os;
    os.precision(10);
    os << "class";
    for (Eigen::Index c = 0; c < m.cols(); ++c) os << "," << names.at(static_cast<std::size_t>(c));
    os << "\n";
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        os << names.at(static_cast<std::size_t>(r));
        for (Eigen::Index c = 0; c < m.cols(); ++c) os << "," << m(r, c);
        os << "\n";
    }
    return os.str();
}

std::string history_csv(const std::vector<gan::EpochLosses>& history) {
    std::ostringstream os;
    os.precision(9);
    os << "epoch,iterations,d_ls,d_lc,d_total,g_ls,g_lc,g_total,real_realness,fake_realness\n";
    for (const auto& e : history)
        os << e.epoch << "," << e.iterations << "," << e.d.l_s << "," << e.d.l_c << "," << e.d.total << "," << e.g.l_s
           << "," << e.g.l_c << "," << e.g.total << "," << e.real_realness << "," << e.fake_realness << "\n";
    return os.str();
}

}  // namespace ghostrec::eval
