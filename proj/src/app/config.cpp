#include "spv/app/config.hpp"

#include <fstream>
#include <sstream>

namespace spv::app {

using nlohmann::ordered_json;

namespace {

ordered_json views_json(const std::vector<vae::ViewMode>& views) {
    ordered_json out = ordered_json::array();
    for (auto v : views) out.push_back(vae::to_string(v));
    return out;
}

// Overlay `patch` onto `base`; every key in `patch` must already exist.
void merge_into(ordered_json& base, const ordered_json& patch, const std::string& where) {
    if (!patch.is_object()) throw ConfigError(where + ": expected an object");
    for (auto it = patch.begin(); it != patch.end(); ++it) {
        const std::string key = where.empty() ? it.key() : where + "." + it.key();
        if (!base.contains(it.key())) throw ConfigError("unknown config key '" + key + "'");
        auto& slot = base[it.key()];
        if (slot.is_object()) merge_into(slot, it.value(), key);
        else slot = it.value();
    }
}

template <typename T>
T get(const ordered_json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw ConfigError("config key '" + where + key + "' has the wrong type");
    }
}

}  // namespace

vae::ViewMode parse_views(const std::string& s) {
    if (s == "single") return vae::ViewMode::Single;
    if (s == "dual") return vae::ViewMode::Dual;
    throw ConfigError("views must be 'single' or 'dual', got '" + s + "'");
}

ExperimentConfig preset_config(const std::string& name) {
    ExperimentConfig cfg;
    cfg.preset = name;
    cfg.train.schedule.fast_gemm = true;
    cfg.unet.schedule.epochs = 20;
    cfg.unet.schedule.batch_size = 4;
    cfg.unet.schedule.fast_gemm = true;
    if (name == "desk") {
        cfg.data.n = 200;
        return cfg;
    }
    if (name == "paper") {
        cfg.data.n = 150;
        cfg.vae.latent_dim = 128;
        cfg.vae.w1 = 0.2;
        cfg.vae.w2 = 0.2;
        cfg.train.schedule.stage1_epochs = 150;
        cfg.train.schedule.total_epochs = 800;
        cfg.train.schedule.batch_size = 8;
        cfg.train.schedule.lr = 1e-3;
        cfg.train.schedule.fast_gemm = false;
        cfg.unet.schedule.epochs = 800;
        cfg.unet.schedule.batch_size = 8;
        cfg.unet.schedule.lr = 1e-3;
        cfg.unet.schedule.fast_gemm = false;
        cfg.unet.max_train_records = 0;
        return cfg;
    }
    throw ConfigError("unknown preset '" + name + "' (expected desk or paper)");
}

ordered_json to_json(const ExperimentConfig& c) {
    const auto& d = c.data;
    const auto& s = c.train.schedule;
    ordered_json j;
    j["preset"] = c.preset;
    j["seed"] = c.seed;
    j["out_dir"] = c.out_dir.string();
    j["views"] = views_json(c.views);
    j["threshold_ml"] = c.threshold_ml;
    j["data"] = {{"n", d.n},
                 {"min_volume_ml", d.min_volume_ml},
                 {"max_volume_ml", d.max_volume_ml},
                 {"splenomegaly_fraction", d.splenomegaly_fraction},
                 {"grid_dims", d.geometry.dims},
                 {"spacing_mm", d.geometry.spacing},
                 {"max_deform_amplitude", d.max_deform_amplitude},
                 {"harmonic_order", d.harmonic_order},
                 {"max_pose_deg", d.max_pose_deg},
                 {"width_ratio", {d.min_width_ratio, d.max_width_ratio}},
                 {"depth_ratio", {d.min_depth_ratio, d.max_depth_ratio}},
                 {"slice_size", c.slice_size}};
    j["augment"] = {{"variants", c.augment.variants}, {"max_angle_deg", c.augment.max_angle_deg}};
    j["vae"] = {{"latent_dim", c.vae.latent_dim},
                {"base_channels", c.vae.base_channels},
                {"head_hidden", c.vae.head_hidden},
                {"w1", c.vae.w1},
                {"w2", c.vae.w2},
                {"volume_scale", c.vae.volume_scale}};
    j["train"] = {{"stage1_epochs", s.stage1_epochs},
                  {"total_epochs", s.total_epochs},
                  {"batch_size", s.batch_size},
                  {"lr", s.lr},
                  {"fast_gemm", s.fast_gemm},
                  {"ci_samples", s.ci_samples},
                  {"ci_variant", c.train.ci_variant},
                  {"validation_folds", c.train.validation_folds}};
    j["us"] = {{"apex_row", c.cone.apex_row},
               {"apex_col", c.cone.apex_col},
               {"width_deg", c.cone.width_deg},
               {"inner_radius", c.cone.inner_radius},
               {"outer_radius", c.cone.outer_radius},
               {"rows", c.cone.rows},
               {"cols", c.cone.cols},
               {"organ_intensity", c.render.organ_intensity},
               {"tissue_intensity", c.render.tissue_intensity},
               {"speckle_scale", c.render.speckle_scale},
               {"blur_sigma_px", c.render.blur_sigma_px},
               {"attenuation", c.render.attenuation}};
    j["unet"] = {{"base_channels", c.unet.model.base_channels},
                 {"depth", c.unet.model.depth},
                 {"convs_per_block", c.unet.model.convs_per_block},
                 {"epochs", c.unet.schedule.epochs},
                 {"batch_size", c.unet.schedule.batch_size},
                 {"lr", c.unet.schedule.lr},
                 {"fast_gemm", c.unet.schedule.fast_gemm},
                 {"max_train_records", c.unet.max_train_records}};
    j["robustness_angles_deg"] = c.robustness_angles;
    j["latent_map"] = {{"samples", c.latent_samples}, {"fold", c.latent_fold}};
    return j;
}

ExperimentConfig config_from_json(const ordered_json& user) {
    if (!user.is_object()) throw ConfigError("config must be a JSON object");
    std::string preset = "desk";
    if (user.contains("preset")) {
        if (!user["preset"].is_string()) throw ConfigError("config key 'preset' must be a string");
        preset = user["preset"].get<std::string>();
    }
    ordered_json j = to_json(preset_config(preset));
    merge_into(j, user, "");

    ExperimentConfig c = preset_config(preset);
    c.seed = get<std::uint64_t>(j, "seed", "");
    c.out_dir = get<std::string>(j, "out_dir", "");
    c.views.clear();
    for (const auto& v : get<std::vector<std::string>>(j, "views", "")) c.views.push_back(parse_views(v));
    c.threshold_ml = get<double>(j, "threshold_ml", "");

    const auto& d = j["data"];
    c.data.n = get<std::size_t>(d, "n", "data.");
    c.data.min_volume_ml = get<double>(d, "min_volume_ml", "data.");
    c.data.max_volume_ml = get<double>(d, "max_volume_ml", "data.");
    c.data.splenomegaly_fraction = get<double>(d, "splenomegaly_fraction", "data.");
    c.data.geometry.dims = get<phantom::Dims>(d, "grid_dims", "data.");
    c.data.geometry.spacing = get<phantom::Spacing>(d, "spacing_mm", "data.");
    c.data.max_deform_amplitude = get<double>(d, "max_deform_amplitude", "data.");
    c.data.harmonic_order = get<int>(d, "harmonic_order", "data.");
    c.data.max_pose_deg = get<double>(d, "max_pose_deg", "data.");
    const auto wr = get<std::array<double, 2>>(d, "width_ratio", "data.");
    const auto dr = get<std::array<double, 2>>(d, "depth_ratio", "data.");
    c.data.min_width_ratio = wr[0];
    c.data.max_width_ratio = wr[1];
    c.data.min_depth_ratio = dr[0];
    c.data.max_depth_ratio = dr[1];
    c.slice_size = get<std::size_t>(d, "slice_size", "data.");

    c.augment.variants = get<std::size_t>(j["augment"], "variants", "augment.");
    c.augment.max_angle_deg = get<double>(j["augment"], "max_angle_deg", "augment.");

    const auto& v = j["vae"];
    c.vae.latent_dim = get<std::size_t>(v, "latent_dim", "vae.");
    c.vae.base_channels = get<std::size_t>(v, "base_channels", "vae.");
    c.vae.head_hidden = get<std::size_t>(v, "head_hidden", "vae.");
    c.vae.w1 = get<double>(v, "w1", "vae.");
    c.vae.w2 = get<double>(v, "w2", "vae.");
    c.vae.volume_scale = get<double>(v, "volume_scale", "vae.");

    const auto& t = j["train"];
    auto& s = c.train.schedule;
    s.stage1_epochs = get<std::size_t>(t, "stage1_epochs", "train.");
    s.total_epochs = get<std::size_t>(t, "total_epochs", "train.");
    s.batch_size = get<std::size_t>(t, "batch_size", "train.");
    s.lr = get<double>(t, "lr", "train.");
    s.fast_gemm = get<bool>(t, "fast_gemm", "train.");
    s.ci_samples = get<std::size_t>(t, "ci_samples", "train.");
    c.train.ci_variant = get<bool>(t, "ci_variant", "train.");
    c.train.validation_folds = get<std::vector<int>>(t, "validation_folds", "train.");

    const auto& u = j["us"];
    c.cone.apex_row = get<double>(u, "apex_row", "us.");
    c.cone.apex_col = get<double>(u, "apex_col", "us.");
    c.cone.width_deg = get<double>(u, "width_deg", "us.");
    c.cone.inner_radius = get<double>(u, "inner_radius", "us.");
    c.cone.outer_radius = get<double>(u, "outer_radius", "us.");
    c.cone.rows = get<std::size_t>(u, "rows", "us.");
    c.cone.cols = get<std::size_t>(u, "cols", "us.");
    c.render.organ_intensity = get<double>(u, "organ_intensity", "us.");
    c.render.tissue_intensity = get<double>(u, "tissue_intensity", "us.");
    c.render.speckle_scale = get<double>(u, "speckle_scale", "us.");
    c.render.blur_sigma_px = get<double>(u, "blur_sigma_px", "us.");
    c.render.attenuation = get<double>(u, "attenuation", "us.");

    const auto& n = j["unet"];
    c.unet.model.base_channels = get<std::size_t>(n, "base_channels", "unet.");
    c.unet.model.depth = get<std::size_t>(n, "depth", "unet.");
    c.unet.model.convs_per_block = get<std::size_t>(n, "convs_per_block", "unet.");
    c.unet.schedule.epochs = get<std::size_t>(n, "epochs", "unet.");
    c.unet.schedule.batch_size = get<std::size_t>(n, "batch_size", "unet.");
    c.unet.schedule.lr = get<double>(n, "lr", "unet.");
    c.unet.schedule.fast_gemm = get<bool>(n, "fast_gemm", "unet.");
    c.unet.max_train_records = get<std::size_t>(n, "max_train_records", "unet.");

    c.robustness_angles = get<std::vector<double>>(j, "robustness_angles_deg", "");
    c.latent_samples = get<std::size_t>(j["latent_map"], "samples", "latent_map.");
    c.latent_fold = get<int>(j["latent_map"], "fold", "latent_map.");
    validate(c);
    return c;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    ordered_json j;
    try {
        j = ordered_json::parse(in);
    } catch (const nlohmann::json::parse_error& e) {
        throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
    }
    return config_from_json(j);
}

void validate(const ExperimentConfig& c) {
    auto require = [](bool ok, const std::string& msg) {
        if (!ok) throw ConfigError(msg);
    };
    require(!c.out_dir.empty(), "out_dir must be set");
    require(!c.views.empty(), "views must list at least one view mode");
    require(c.data.n >= 10, "data.n must be at least 10");
    require(c.data.min_volume_ml > 0 && c.data.min_volume_ml < c.data.max_volume_ml, "data volume range is empty");
    require(c.data.splenomegaly_fraction > 0 && c.data.splenomegaly_fraction < 1, "data.splenomegaly_fraction must lie in (0, 1)");
    for (auto s : c.data.geometry.spacing) require(s > 0, "data.spacing_mm must be positive");
    require(c.slice_size >= 32 && c.slice_size % 32 == 0, "data.slice_size must be a positive multiple of 32");
    require(c.augment.variants >= 1, "augment.variants must be at least 1");
    require(c.augment.max_angle_deg >= 0 && c.augment.max_angle_deg <= 45, "augment.max_angle_deg must lie in [0, 45]");
    require(c.vae.latent_dim >= 2, "vae.latent_dim must be at least 2");
    require(c.vae.base_channels >= 1 && c.vae.head_hidden >= 1, "vae widths must be positive");
    require(c.vae.w1 >= 0 && c.vae.w2 >= 0, "vae loss weights must be non-negative");
    require(c.vae.volume_scale > 0, "vae.volume_scale must be positive");
    const auto& s = c.train.schedule;
    require(s.stage1_epochs < s.total_epochs, "train.stage1_epochs must be below train.total_epochs");
    require(s.batch_size >= 2, "train.batch_size must be at least 2");
    require(s.lr > 0, "train.lr must be positive");
    require(s.ci_samples >= 2, "train.ci_samples must be at least 2");
    require(!c.train.validation_folds.empty(), "train.validation_folds must not be empty");
    for (int f : c.train.validation_folds)
        require(f >= 1 && f < phantom::kFoldCount, "train.validation_folds entries must lie in 1..4 (fold 0 is the hold-out)");
    require(c.unet.schedule.epochs >= 1 && c.unet.schedule.batch_size >= 2 && c.unet.schedule.lr > 0, "unet schedule is invalid");
    try {
        segnet::validate(segnet::UNetConfig{c.cone.rows, c.unet.model.base_channels, c.unet.model.depth,
                                            c.unet.model.convs_per_block});
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("unet: ") + e.what());
    }
    require(c.cone.rows == c.cone.cols, "us image must be square");
    require(!c.robustness_angles.empty(), "robustness_angles_deg must not be empty");
    require(c.latent_samples >= 2, "latent_map.samples must be at least 2");
    bool fold_listed = false;
    for (int f : c.train.validation_folds) fold_listed |= f == c.latent_fold;
    require(fold_listed, "latent_map.fold must be one of train.validation_folds");
}

std::string config_schema() {
    std::ostringstream out;
    out << "Experiment configuration (JSON). Keys missing from a file take the preset value.\n"
           "  preset                 desk | paper\n"
           "  seed                   root seed; every random stream derives from it\n"
           "  out_dir                output directory\n"
           "  views                  list of view modes to train and evaluate: single, dual\n"
           "  threshold_ml           splenomegaly threshold for SEN/SPE/ACC\n"
           "  data.*                 phantom count, volume range, splenomegaly fraction, grid dims,\n"
           "                         spacing_mm, deformation, pose, shape ratios, slice_size\n"
           "  augment.*              variants per training record, max_angle_deg per axis\n"
           "  vae.*                  latent_dim, base_channels, head_hidden, w1 (KLD), w2 (MSE), volume_scale\n"
           "  train.*                stage1_epochs, total_epochs, batch_size, lr, fast_gemm, ci_samples,\n"
           "                         ci_variant, validation_folds\n"
           "  us.*                   cone geometry and rendering intensities\n"
           "  unet.*                 base_channels, depth, convs_per_block, epochs, batch_size, lr,\n"
           "                         fast_gemm, max_train_records\n"
           "  robustness_angles_deg  in-plane rotation sweep\n"
           "  latent_map.*           samples along the principal axis, fold of the visualised model\n\n"
           "Desk preset:\n"
        << to_json(preset_config("desk")).dump(2) << "\n";
    return out.str();
}

}  // namespace spv::app
