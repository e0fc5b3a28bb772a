#include "ghostrec/cli/config.hpp"

#include <set>

#include "ghostrec/common/binio.hpp"
#include "ghostrec/common/error.hpp"

namespace ghostrec::cli {

namespace {

void check_keys(const nlohmann::json& j, const std::set<std::string>& known, const std::string& block) {
    if (!j.is_object()) throw UsageError("config block '" + block + "' must be a JSON object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw UsageError("unknown config key '" + block + "." + key + "'");
}

template <class T>
void get(const nlohmann::json& j, const char* key, T& field) {
    if (j.contains(key)) j.at(key).get_to(field);
}

}  // namespace

void to_json(nlohmann::json& j, const RunConfig& c) {
    const auto& s = c.speckle;
    const auto& d = c.dataset;
    j = nlohmann::json{
        {"speckle",
         {{"seed", s.seed}, {"count", s.count}, {"height", s.height}, {"width", s.width}, {"distribution", s.distribution}}},
        {"dataset",
         {{"images", d.images},
          {"labels", d.labels},
          {"speckles", d.speckles},
          {"data", d.data},
          {"train_fraction", d.train_fraction},
          {"split_seed", d.split_seed},
          {"stratified", d.stratified},
          {"rotations", d.rotations},
          {"noise", d.noise},
          {"select_labels", d.select_labels},
          {"transpose", d.transpose},
          {"label_offset", d.label_offset},
          {"per_class", d.per_class},
          {"num_classes", d.num_classes},
          {"rows", d.rows},
          {"cols", d.cols}}},
        {"model", c.model},
        {"train", c.train},
        {"output", {{"dir", c.output.dir}, {"emit_images", c.output.emit_images}}}};
}

void from_json(const nlohmann::json& j, RunConfig& c) {
    check_keys(j, {"speckle", "dataset", "model", "train", "output"}, "(top level)");
    try {
        if (j.contains("speckle")) {
            const auto& s = j.at("speckle");
            check_keys(s, {"seed", "count", "height", "width", "distribution"}, "speckle");
            get(s, "seed", c.speckle.seed);
            get(s, "count", c.speckle.count);
            get(s, "height", c.speckle.height);
            get(s, "width", c.speckle.width);
            get(s, "distribution", c.speckle.distribution);
        }
        if (j.contains("dataset")) {
            const auto& d = j.at("dataset");
            check_keys(d,
                       {"images", "labels", "speckles", "data", "train_fraction", "split_seed", "stratified", "rotations",
                        "noise", "select_labels", "transpose", "label_offset", "per_class", "num_classes", "rows",
                        "cols"},
                       "dataset");
            auto& o = c.dataset;
            get(d, "images", o.images);
            get(d, "labels", o.labels);
            get(d, "speckles", o.speckles);
            get(d, "data", o.data);
            get(d, "train_fraction", o.train_fraction);
            get(d, "split_seed", o.split_seed);
            get(d, "stratified", o.stratified);
            get(d, "rotations", o.rotations);
            get(d, "noise", o.noise);
            get(d, "select_labels", o.select_labels);
            get(d, "transpose", o.transpose);
            get(d, "label_offset", o.label_offset);
            get(d, "per_class", o.per_class);
            get(d, "num_classes", o.num_classes);
            get(d, "rows", o.rows);
            get(d, "cols", o.cols);
        }
        if (j.contains("output")) {
            const auto& o = j.at("output");
            check_keys(o, {"dir", "emit_images"}, "output");
            get(o, "dir", c.output.dir);
            get(o, "emit_images", c.output.emit_images);
        }
    } catch (const nlohmann::json::exception& e) {
        throw UsageError(std::string("bad config value: ") + e.what());
    }
    // Partial model/train blocks keep the defaults of missing keys.
    if (j.contains("model")) {
        nlohmann::json merged = c.model;
        check_keys(j.at("model"), [&] {
            std::set<std::string> k;
            for (const auto& [key, _] : merged.items()) k.insert(key);
            return k;
        }(), "model");
        merged.update(j.at("model"));
        c.model = merged.get<gan::ModelConfig>();
    }
    if (j.contains("train")) {
        nlohmann::json merged = c.train;
        check_keys(j.at("train"), [&] {
            std::set<std::string> k;
            for (const auto& [key, _] : merged.items()) k.insert(key);
            return k;
        }(), "train");
        merged.update(j.at("train"));
        c.train = merged.get<gan::TrainConfig>();
    }
}

RunConfig load_run_config(const std::filesystem::path& path) {
    const Bytes bytes = read_file(path);
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(bytes.begin(), bytes.end());
    } catch (const nlohmann::json::parse_error& e) {
        throw UsageError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return j.get<RunConfig>();
}

}  // namespace ghostrec::cli
