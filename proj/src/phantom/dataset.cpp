#include "spv/phantom/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "spv/common/rng.hpp"

namespace spv::phantom {

namespace {

std::string record_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "p%04zu", i);
    return buf;
}

PhantomSpec draw_spec(const DatasetConfig& cfg, bool positive, Rng& rng) {
    auto uni = [&](double lo, double hi) { return std::uniform_real_distribution<double>(lo, hi)(rng); };
    const double lo = positive ? kSplenomegalyThresholdMl : cfg.min_volume_ml;
    const double hi = positive ? cfg.max_volume_ml : kSplenomegalyThresholdMl;
    const double target_ml = std::exp(uni(std::log(lo), std::log(hi)));
    const double rb = uni(cfg.min_width_ratio, cfg.max_width_ratio);
    const double rc = uni(cfg.min_depth_ratio, cfg.max_depth_ratio);
    // V = 4/3 pi a b c with b = rb a, c = rc b
    const double a = std::cbrt(target_ml * 1000.0 / (4.0 / 3.0 * std::numbers::pi * rb * rb * rc));
    PhantomSpec spec;
    spec.a = a;
    spec.b = rb * a;
    spec.c = rc * rb * a;
    spec.deform_amplitude = uni(0.0, cfg.max_deform_amplitude);
    spec.harmonic_order = cfg.harmonic_order;
    for (auto& p : spec.pose_deg) p = uni(-cfg.max_pose_deg, cfg.max_pose_deg);
    spec.seed = rng();
    return spec;
}

}  // namespace

std::vector<int> stratified_folds(const std::vector<bool>& labels, std::uint64_t seed) {
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] ? pos : neg).push_back(i);
    Rng rng(derive_seed(seed, "folds"));
    std::shuffle(pos.begin(), pos.end(), rng);
    std::shuffle(neg.begin(), neg.end(), rng);
    std::vector<int> fold(labels.size(), 0);
    std::size_t k = 0;
    for (auto i : pos) fold[i] = static_cast<int>(k++ % kFoldCount);
    for (auto i : neg) fold[i] = static_cast<int>(k++ % kFoldCount);
    return fold;
}

Dataset make_dataset(const DatasetConfig& cfg) {
    if (cfg.n < 10) throw std::invalid_argument("make_dataset: need at least 10 records");
    if (!(cfg.splenomegaly_fraction > 0.0 && cfg.splenomegaly_fraction < 1.0)) {
        throw std::invalid_argument("make_dataset: splenomegaly fraction must lie in (0, 1)");
    }
    if (!(cfg.min_volume_ml > 0.0 && cfg.min_volume_ml < kSplenomegalyThresholdMl &&
          cfg.max_volume_ml > kSplenomegalyThresholdMl)) {
        throw std::invalid_argument("make_dataset: volume range must straddle the splenomegaly threshold");
    }
    const auto positives = static_cast<std::size_t>(std::lround(cfg.n * cfg.splenomegaly_fraction));

    // Interleave classes deterministically so ids do not encode the label.
    std::vector<bool> labels(cfg.n, false);
    std::fill(labels.begin(), labels.begin() + static_cast<long>(positives), true);
    Rng order_rng(derive_seed(cfg.seed, "labels"));
    std::shuffle(labels.begin(), labels.end(), order_rng);

    Dataset ds;
    ds.records.reserve(cfg.n);
    ds.grids.reserve(cfg.n);
    const double limit_mm = 0.46 * std::min({cfg.geometry.dims[0] * cfg.geometry.spacing[0],
                                             cfg.geometry.dims[1] * cfg.geometry.spacing[1],
                                             cfg.geometry.dims[2] * cfg.geometry.spacing[2]});
    for (std::size_t i = 0; i < cfg.n; ++i) {
        const std::uint64_t record_seed = derive_seed(cfg.seed, i);
        Rng rng(record_seed);
        for (int attempt = 0;; ++attempt) {
            if (attempt > 200) throw std::runtime_error("make_dataset: could not realise record " + record_id(i));
            const PhantomSpec spec = draw_spec(cfg, labels[i], rng);
            if (std::max({spec.a, spec.b, spec.c}) * (1.0 + spec.deform_amplitude) > limit_mm) continue;
            VoxelGrid grid;
            try {
                grid = centroid_crop_pad(generate_phantom(spec, cfg.geometry), cfg.geometry.dims);
            } catch (const GridTooSmall&) {
                continue;
            }
            const double vol = voxel_volume(grid);
            if (is_splenomegaly(vol) != labels[i] || vol < cfg.min_volume_ml * 0.9 || vol > cfg.max_volume_ml * 1.1) continue;
            PhantomRecord rec;
            rec.id = record_id(i);
            rec.grid_file = "grids/" + rec.id + ".spvg";
            rec.volume_ml = vol;
            rec.splenomegaly = is_splenomegaly(vol);
            rec.seed = record_seed;
            rec.spec = spec;
            ds.records.push_back(std::move(rec));
            ds.grids.push_back(std::move(grid));
            break;
        }
    }
    const auto folds = stratified_folds(labels, cfg.seed);
    for (std::size_t i = 0; i < cfg.n; ++i) ds.records[i].fold = folds[i];
    return ds;
}

std::string manifest_jsonl(const std::vector<PhantomRecord>& records) {
    std::ostringstream os;
    for (const auto& r : records) {
        nlohmann::ordered_json j;
        j["id"] = r.id;
        j["grid_file"] = r.grid_file;
        j["volume_ml"] = r.volume_ml;
        j["splenomegaly"] = r.splenomegaly;
        j["fold"] = r.fold;
        j["seed"] = r.seed;
        os << j.dump() << '\n';
    }
    return os.str();
}

void write_manifest(const std::filesystem::path& path, const std::vector<PhantomRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << manifest_jsonl(records);
}

std::vector<PhantomRecord> read_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open manifest " + path.string());
    std::vector<PhantomRecord> out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            PhantomRecord r;
            r.id = j.at("id").get<std::string>();
            r.grid_file = j.at("grid_file").get<std::string>();
            r.volume_ml = j.at("volume_ml").get<double>();
            r.splenomegaly = j.at("splenomegaly").get<bool>();
            r.fold = j.at("fold").get<int>();
            r.seed = j.at("seed").get<std::uint64_t>();
            if (r.fold < 0 || r.fold >= kFoldCount) throw std::invalid_argument("fold out of range");
            if (r.splenomegaly != is_splenomegaly(r.volume_ml)) throw std::invalid_argument("label contradicts volume");
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

}  // namespace spv::phantom
