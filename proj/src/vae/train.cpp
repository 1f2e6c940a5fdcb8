#include "spv/vae/train.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>

#include "spv/grad/adam.hpp"
#include "spv/grad/ops.hpp"

namespace spv::vae {

using namespace spv::grad;

namespace {

void require_data(const std::vector<VAESample>& data, const VAEConfig& cfg, const char* what) {
    if (data.empty()) throw std::invalid_argument(std::string(what) + ": empty dataset");
    const Shape want{input_channels(cfg), cfg.input_size, cfg.input_size};
    for (const auto& s : data) {
        if (s.variants.empty()) throw std::invalid_argument(std::string(what) + ": record " + s.id + " has no inputs");
        for (const auto& v : s.variants)
            if (v.shape() != want)
                throw ShapeError(what, "record " + s.id + " input " + shape_str(v.shape()) + ", expected " + shape_str(want));
    }
}

Tensor standard_normal(Rng& rng, Shape shape) {
    std::normal_distribution<double> g(0.0, 1.0);
    Tensor t(std::move(shape));
    for (double& v : t.data()) v = g(rng);
    return t;
}

struct Streams {
    Rng shuffle, augment, noise;
    Streams(std::uint64_t seed, const char* stage)
        : shuffle(derive_seed(seed, std::string(stage) + ".shuffle")),
          augment(derive_seed(seed, std::string(stage) + ".augment")),
          noise(derive_seed(seed, std::string(stage) + ".noise")) {}
};

struct EpochSums {
    double bce = 0.0, kld = 0.0, mse = 0.0;
    std::size_t n = 0;
};

// One pass over the shuffled training set; `regress` switches on the head.
EpochSums run_epoch(VAE& model, Adam& opt, const std::vector<VAESample>& train, const TrainSchedule& sch, Streams& st,
                    bool regress) {
    const auto& cfg = model.config();
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), st.shuffle);
    std::vector<std::size_t> pick(train.size());
    for (std::size_t i : order) pick[i] = std::uniform_int_distribution<std::size_t>(0, train[i].variants.size() - 1)(st.augment);

    std::optional<PrecisionScope> precision;
    if (sch.fast_gemm) precision.emplace(Precision::F32);
    EpochSums sums;
    for (std::size_t start = 0; start < order.size(); start += sch.batch_size) {
        const std::size_t end = std::min(order.size(), start + sch.batch_size);
        if (end - start < 2) break;  // batch statistics need at least two samples
        std::vector<const Tensor*> xs;
        Tensor target({end - start});
        for (std::size_t k = start; k < end; ++k) {
            const auto& rec = train[order[k]];
            xs.push_back(&rec.variants[pick[order[k]]]);
            target[k - start] = rec.volume_ml / cfg.volume_scale;
        }
        const Tensor batch = stack(xs);
        model.store().zero_grad();
        const Var x(batch);
        const auto enc = model.encode(x, true);
        const Var z = reparameterize(enc.mu, enc.logvar, standard_normal(st.noise, enc.mu.shape()));
        const Var recon = model.decode(z, true);
        const Var bce = bce_loss(recon, batch);
        const Var kld = kld_loss(enc.mu, enc.logvar);
        Var loss;
        double mse = 0.0;
        if (regress) {
            const Var pred = model.head(cfg.head_input == HeadInput::Mu ? enc.mu : z, true);
            loss = rvae_loss(bce, kld, pred, target, cfg.w1, cfg.w2);
            for (std::size_t i = 0; i < target.numel(); ++i) mse += std::pow(pred.value()[i] - target[i], 2);
        } else {
            loss = total_loss(bce, kld, cfg.w1);
        }
        if (!std::isfinite(loss.value().item())) throw NumericalError("VAE loss became non-finite");
        backward(loss);
        opt.step();
        for (std::size_t i = 0; i < end - start; ++i) {
            sums.bce += bce.value()[i];
            sums.kld += kld.value()[i];
        }
        sums.mse += mse;
        sums.n += end - start;
    }
    return sums;
}

EpochLog summarise(std::size_t epoch, int stage, const EpochSums& s) {
    EpochLog log;
    log.epoch = epoch;
    log.stage = stage;
    const double n = static_cast<double>(std::max<std::size_t>(1, s.n));
    log.bce = s.bce / n;
    log.kld = s.kld / n;
    if (stage == 2) log.mse = s.mse / n;
    return log;
}

double mean_relative_accuracy(const std::vector<double>& truth, const std::vector<double>& est) {
    double acc = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i) acc += (1.0 - std::abs(std::max(0.0, est[i]) - truth[i]) / truth[i]) * 100.0;
    return acc / static_cast<double>(truth.size());
}

}  // namespace

std::vector<EpochLog> train_stage1(VAE& model, const std::vector<VAESample>& train, const TrainSchedule& sch,
                                   std::uint64_t seed, const EpochCallback& progress) {
    require_data(train, model.config(), "train_stage1");
    Adam opt(model.vae_params(), AdamConfig{sch.lr});
    Streams st(seed, "stage1");
    std::vector<EpochLog> logs;
    for (std::size_t e = 1; e <= sch.stage1_epochs; ++e) {
        logs.push_back(summarise(e, 1, run_epoch(model, opt, train, sch, st, false)));
        if (progress) progress(logs.back());
    }
    return logs;
}

TrainResult train_stage2(VAE& model, const std::vector<VAESample>& train, const std::vector<VAESample>& val,
                         const TrainSchedule& sch, std::uint64_t seed, const EpochCallback& progress) {
    require_data(train, model.config(), "train_stage2");
    require_data(val, model.config(), "train_stage2 validation");
    if (sch.stage1_epochs >= sch.total_epochs) throw std::invalid_argument("stage-1 epochs must be fewer than total epochs");
    std::vector<Parameter> all = model.vae_params();
    const auto head = model.head_params();
    all.insert(all.end(), head.begin(), head.end());
    Adam opt(all, AdamConfig{sch.lr});
    Streams st(seed, "stage2");

    std::vector<Tensor> val_inputs;
    std::vector<double> val_truth;
    for (const auto& s : val) {
        val_inputs.push_back(s.variants[0]);
        val_truth.push_back(s.volume_ml);
    }
    TrainResult result;
    for (std::size_t e = sch.stage1_epochs + 1; e <= sch.total_epochs; ++e) {
        auto log = summarise(e, 2, run_epoch(model, opt, train, sch, st, true));
        log.val_mrva = mean_relative_accuracy(val_truth, raw_volume_estimates(model, val_inputs, sch.ci_samples, derive_seed(seed, "validation")));
        if (!result.best_val_mrva || *log.val_mrva > *result.best_val_mrva) {
            result.best_val_mrva = log.val_mrva;
            result.best_epoch = e;
            result.best = model.store().export_tensors();
        }
        result.log.push_back(log);
        if (progress) progress(log);
    }
    model.store().import_tensors(result.best);
    return result;
}

TrainResult train_vae(VAE& model, const std::vector<VAESample>& train, const std::vector<VAESample>& val,
                      const TrainSchedule& sch, std::uint64_t seed, const EpochCallback& progress) {
    auto logs = train_stage1(model, train, sch, seed, progress);
    auto stage1 = model.store().export_tensors();
    TrainResult result;
    if (sch.total_epochs > sch.stage1_epochs) result = train_stage2(model, train, val, sch, seed, progress);
    else {
        result.best = stage1;
        result.best_epoch = sch.stage1_epochs;
    }
    result.stage1 = std::move(stage1);
    logs.insert(logs.end(), result.log.begin(), result.log.end());
    result.log = std::move(logs);
    return result;
}

std::vector<double> raw_volume_estimates(VAE& model, const std::vector<Tensor>& inputs, std::size_t samples,
                                         std::uint64_t seed) {
    const auto codes = encode_all(model, inputs);
    const double scale = model.config().volume_scale;
    std::vector<double> out(codes.size());
    if (model.config().head_input == HeadInput::Mu) {
        std::vector<std::vector<double>> mus;
        for (const auto& c : codes) mus.push_back(c.mu);
        const auto h = head_outputs(model, mus);
        for (std::size_t i = 0; i < out.size(); ++i) out[i] = h[i] * scale;
        return out;
    }
    if (samples < 1) throw std::invalid_argument("raw_volume_estimates: need at least one latent draw");
    Rng rng(seed);
    std::normal_distribution<double> g(0.0, 1.0);
    for (std::size_t i = 0; i < codes.size(); ++i) {
        std::vector<std::vector<double>> zs(samples);
        std::vector<double> zeta(codes[i].mu.size());
        for (auto& z : zs) {
            for (double& v : zeta) v = g(rng);
            z = reparameterize(codes[i], zeta);
        }
        const auto h = head_outputs(model, zs);
        out[i] = std::accumulate(h.begin(), h.end(), 0.0) / static_cast<double>(samples) * scale;
    }
    return out;
}

std::string log_csv(const std::vector<EpochLog>& log) {
    std::string out = "epoch,bce,kld,mse,val_mrva\n";
    char buf[192];
    for (const auto& e : log) {
        std::snprintf(buf, sizeof buf, "%zu,%.8f,%.8f,", e.epoch, e.bce, e.kld);
        out += buf;
        if (e.mse) {
            std::snprintf(buf, sizeof buf, "%.8f", *e.mse);
            out += buf;
        }
        out += ',';
        if (e.val_mrva) {
            std::snprintf(buf, sizeof buf, "%.6f", *e.val_mrva);
            out += buf;
        }
        out += '\n';
    }
    return out;
}

}  // namespace spv::vae
