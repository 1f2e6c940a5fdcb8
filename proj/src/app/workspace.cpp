#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "internal.hpp"
#include "spv/common/digest.hpp"
#include "spv/common/parallel.hpp"
#include "spv/common/rng.hpp"

namespace spv::app {

fs::path Paths::slice(const std::string& id, phantom::SliceAxis axis) const {
    return data_dir() / "slices" / (id + "_" + phantom::to_string(axis) + ".pgm");
}

fs::path Paths::model(vae::ViewMode views, int fold, const std::string& kind) const {
    return root / "models" / vae::to_string(views) / ("fold" + std::to_string(fold) + "_" + kind + ".spvw");
}

fs::path Paths::model_log(vae::ViewMode views, int fold, const std::string& kind) const {
    return root / "models" / vae::to_string(views) / ("fold" + std::to_string(fold) + "_" + kind + "_log.csv");
}

namespace detail {

Workspace load_workspace(const ExperimentConfig& cfg, bool with_grids) {
    Workspace ws{Paths{cfg.out_dir}, {}, {}};
    if (!fs::exists(ws.paths.manifest())) throw DataError("no dataset at " + ws.paths.manifest().string() + "; run gen-data first");
    ws.records = guard_io("reading manifest", [&] { return phantom::read_manifest(ws.paths.manifest()); });
    if (ws.records.empty()) throw DataError("manifest is empty");
    if (with_grids) {
        ws.grids.resize(ws.records.size());
        parallel_for(ws.records.size(), [&](std::size_t i) {
            ws.grids[i] = guard_io("reading grid", [&] { return phantom::read_grid(ws.paths.data_dir() / ws.records[i].grid_file); });
        });
    }
    return ws;
}

std::vector<std::size_t> fold_indices(const Workspace& ws, int fold) {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < ws.records.size(); ++i)
        if (ws.records[i].fold == fold) out.push_back(i);
    return out;
}

Split cv_split(const Workspace& ws, int val_fold) {
    Split s;
    for (std::size_t i = 0; i < ws.records.size(); ++i) {
        const int f = ws.records[i].fold;
        (f == 0 ? s.test : f == val_fold ? s.val : s.train).push_back(i);
    }
    std::set<std::string> held_out;
    for (auto i : s.test) held_out.insert(ws.records[i].id);
    for (const auto* part : {&s.train, &s.val})
        for (auto i : *part)
            if (held_out.count(ws.records[i].id)) throw std::logic_error("hold-out record " + ws.records[i].id + " leaked into development data");
    if (s.test.empty() || s.val.empty() || s.train.empty()) throw DataError("fold " + std::to_string(val_fold) + " split has an empty part");
    return s;
}

vae::VAEConfig model_config(const ExperimentConfig& cfg, vae::ViewMode views, vae::HeadInput head) {
    vae::VAEConfig v = cfg.vae;
    v.views = views;
    v.input_size = cfg.slice_size;
    v.head_input = head;
    return v;
}

std::string config_digest(const ExperimentConfig& cfg) {
    auto j = to_json(cfg);
    j.erase("out_dir");
    return digest_hex(j.dump());
}

std::uint64_t model_seed(const ExperimentConfig& cfg, const std::string& purpose, vae::ViewMode views, int fold) {
    return derive_seed(cfg.seed, purpose + "." + vae::to_string(views) + ".fold" + std::to_string(fold));
}

void save_vae(const fs::path& path, const std::string& kind, vae::VAE& model, const ExperimentConfig& cfg,
              nlohmann::ordered_json metadata) {
    grad::Checkpoint ck{kind, {}, model.store().export_tensors()};
    ck.metadata["views"] = vae::to_string(model.config().views);
    ck.metadata["head_input"] = vae::to_string(model.config().head_input);
    ck.metadata["latent_dim"] = model.config().latent_dim;
    ck.metadata["config_digest"] = config_digest(cfg);
    for (auto it = metadata.begin(); it != metadata.end(); ++it) ck.metadata[it.key()] = it.value();
    fs::create_directories(path.parent_path());
    guard_io("writing checkpoint", [&] { grad::save_checkpoint(path, ck); return 0; });
}

std::unique_ptr<vae::VAE> load_vae(const fs::path& path, const std::string& kind, const ExperimentConfig& cfg,
                                   vae::ViewMode views) {
    if (!fs::exists(path)) throw DataError("missing checkpoint " + path.string() + "; run train-vae for this view mode");
    const auto ck = guard_io("reading checkpoint", [&] { return grad::load_checkpoint(path); });
    if (ck.kind != kind) throw DataError(path.string() + " holds a '" + ck.kind + "' model, expected '" + kind + "'");
    const std::string stored_views = ck.metadata.value("views", "");
    if (stored_views != vae::to_string(views))
        throw DataError(path.string() + " was trained for view mode '" + stored_views + "', expected '" + vae::to_string(views) + "'");
    const auto head = ck.metadata.value("head_input", "mu") == "z" ? vae::HeadInput::Z : vae::HeadInput::Mu;
    auto model = std::make_unique<vae::VAE>(model_config(cfg, views, head), 0);
    guard_io("loading " + path.string(), [&] { model->store().import_tensors(ck.tensors); return 0; });
    return model;
}

std::vector<FoldModel> load_fold_models(const ExperimentConfig& cfg, vae::ViewMode views, bool with_plain, bool with_ci) {
    const Paths paths{cfg.out_dir};
    std::vector<FoldModel> out;
    for (int fold : cfg.train.validation_folds) {
        FoldModel m;
        m.fold = fold;
        m.rvae = load_vae(paths.model(views, fold, "rvae"), "rvae", cfg, views);
        if (with_plain) m.plain = load_vae(paths.model(views, fold, "vae"), "vae", cfg, views);
        if (with_ci) m.ci = load_vae(paths.model(views, fold, "rvae_ci"), "rvae_ci", cfg, views);
        out.push_back(std::move(m));
    }
    return out;
}

void write_text(const fs::path& path, const std::string& text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out || !out.write(text.data(), static_cast<std::streamsize>(text.size()))) throw DataError("cannot write " + path.string());
}

std::string read_text(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return buf;
}

std::string fmt(const std::optional<double>& v) { return v ? fmt(*v) : std::string(); }

grad::Tensor gray_to_tensor(const ussim::Gray8& g) {
    grad::Tensor t({1, g.rows, g.cols});
    for (std::size_t i = 0; i < g.px.size(); ++i) t[i] = g.px[i] / 255.0;
    return t;
}

phantom::Mask2D gray_to_mask(const ussim::Gray8& g, std::uint8_t value, double spacing_mm) {
    phantom::Mask2D m(g.rows, g.cols, spacing_mm);
    for (std::size_t i = 0; i < g.px.size(); ++i) m.px[i] = g.px[i] == value;
    return m;
}

}  // namespace detail
}  // namespace spv::app
