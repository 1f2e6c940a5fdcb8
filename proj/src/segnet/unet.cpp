#include "spv/segnet/unet.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <optional>
#include <stdexcept>

#include "spv/grad/adam.hpp"
#include "spv/grad/ops.hpp"

namespace spv::segnet {

using namespace spv::grad;

void validate(const UNetConfig& cfg) {
    if (cfg.depth == 0 || cfg.convs_per_block == 0 || cfg.base_channels == 0)
        throw std::invalid_argument("U-Net depth, block size and width must be positive");
    const std::size_t f = std::size_t{1} << cfg.depth;
    if (cfg.input_size == 0 || cfg.input_size % f != 0)
        throw std::invalid_argument("U-Net input size " + std::to_string(cfg.input_size) + " is not divisible by " +
                                    std::to_string(f));
}

std::size_t expected_parameter_count(const UNetConfig& cfg) {
    validate(cfg);
    // conv (no bias) + batch norm (gamma, beta) per layer
    auto layer = [](std::size_t in, std::size_t out) { return 9 * in * out + 2 * out; };
    auto block = [&](std::size_t in, std::size_t out) {
        std::size_t n = layer(in, out);
        for (std::size_t i = 1; i < cfg.convs_per_block; ++i) n += layer(out, out);
        return n;
    };
    std::size_t total = 0, in = 1;
    for (std::size_t l = 0; l <= cfg.depth; ++l) {
        const std::size_t w = cfg.base_channels << l;
        total += block(in, w);
        in = w;
    }
    for (std::size_t l = cfg.depth; l-- > 0;) {
        const std::size_t w = cfg.base_channels << l;
        total += layer(2 * w, w);  // upsampling conv
        total += block(2 * w, w);  // after concatenation
    }
    return total + cfg.base_channels + 1;  // 1x1 output conv with bias
}

namespace {

struct ConvBnRelu {
    Conv2d conv;
    BatchNorm bn;
    ConvBnRelu() = default;
    ConvBnRelu(ParameterStore& s, const std::string& name, std::size_t in, std::size_t out, Rng& rng)
        : conv(s, name + ".conv", in, out, 3, 1, 1, false, rng), bn(s, name + ".bn", out) {}
    Var operator()(const Var& x, bool training) const { return relu(bn(conv(x), training)); }
};

struct Block {
    std::vector<ConvBnRelu> layers;
    Block() = default;
    Block(ParameterStore& s, const std::string& name, std::size_t in, std::size_t out, std::size_t n, Rng& rng) {
        for (std::size_t i = 0; i < n; ++i) layers.emplace_back(s, name + ".c" + std::to_string(i), i == 0 ? in : out, out, rng);
    }
    Var operator()(Var x, bool training) const {
        for (const auto& l : layers) x = l(x, training);
        return x;
    }
};

}  // namespace

struct UNet::Net {
    std::vector<Block> down;  // depth blocks then the bottleneck
    std::vector<ConvBnRelu> up_conv;
    std::vector<Block> up;    // indexed by level
    Conv2d out;
};

UNet::UNet(const UNetConfig& cfg, std::uint64_t init_seed) : cfg_(cfg), net_(std::make_unique<Net>()) {
    validate(cfg);
    Rng rng(derive_seed(init_seed, "unet.init"));
    auto& n = *net_;
    std::size_t in = 1;
    for (std::size_t l = 0; l <= cfg.depth; ++l) {
        const std::size_t w = cfg.base_channels << l;
        n.down.emplace_back(store_, l == cfg.depth ? "bottleneck" : "down" + std::to_string(l), in, w, cfg.convs_per_block, rng);
        in = w;
    }
    n.up_conv.resize(cfg.depth);
    n.up.resize(cfg.depth);
    for (std::size_t l = cfg.depth; l-- > 0;) {
        const std::size_t w = cfg.base_channels << l;
        n.up_conv[l] = ConvBnRelu(store_, "up" + std::to_string(l) + ".upconv", 2 * w, w, rng);
        n.up[l] = Block(store_, "up" + std::to_string(l), 2 * w, w, cfg.convs_per_block, rng);
    }
    n.out = Conv2d(store_, "out", cfg.base_channels, 1, 1, 1, 0, true, rng);
}

UNet::~UNet() = default;

Var UNet::forward(const Var& x, bool training) {
    const auto& s = x.shape();
    if (s.size() != 4 || s[1] != 1 || s[2] != cfg_.input_size || s[3] != cfg_.input_size)
        throw ShapeError("unet.forward", "expected [N, 1, " + std::to_string(cfg_.input_size) + ", " +
                                             std::to_string(cfg_.input_size) + "], got " + shape_str(s));
    auto& n = *net_;
    std::vector<Var> skips;
    Var h = x;
    for (std::size_t l = 0; l < cfg_.depth; ++l) {
        h = n.down[l](h, training);
        skips.push_back(h);
        h = max_pool2x2(h);
    }
    h = n.down[cfg_.depth](h, training);
    for (std::size_t l = cfg_.depth; l-- > 0;) {
        h = n.up_conv[l](upsample2x(h), training);
        h = n.up[l](concat_channels(skips[l], h), training);
    }
    return sigmoid(n.out(h));
}

std::vector<phantom::Mask2D> segment_all(UNet& model, const std::vector<Tensor>& images, std::size_t batch) {
    const std::size_t sz = model.config().input_size;
    for (const auto& im : images)
        if (im.shape() != Shape{1, sz, sz})
            throw ShapeError("segment", "image " + shape_str(im.shape()) + " does not match the model input size " + std::to_string(sz));
    NoGradScope ng;
    std::vector<phantom::Mask2D> out;
    for (std::size_t start = 0; start < images.size(); start += batch) {
        const std::size_t end = std::min(images.size(), start + batch);
        Tensor x({end - start, 1, sz, sz});
        for (std::size_t i = start; i < end; ++i) std::copy(images[i].ptr(), images[i].ptr() + sz * sz, x.ptr() + (i - start) * sz * sz);
        const Tensor p = model.forward(Var(x), false).value();
        for (std::size_t i = 0; i < end - start; ++i) {
            phantom::Mask2D m(sz, sz);
            for (std::size_t k = 0; k < sz * sz; ++k) m.px[k] = p[i * sz * sz + k] > 0.5 ? 1 : 0;
            out.push_back(std::move(m));
        }
    }
    return out;
}

phantom::Mask2D segment(UNet& model, const Tensor& image) { return segment_all(model, {image}).front(); }

namespace {

double mask_dice(const phantom::Mask2D& pred, const Tensor& truth) {
    double both = 0, np = 0, nt = 0;
    for (std::size_t k = 0; k < pred.px.size(); ++k) {
        const bool p = pred.px[k], t = truth[k] > 0.5;
        both += p && t, np += p, nt += t;
    }
    return np + nt == 0 ? 1.0 : 2.0 * both / (np + nt);
}

}  // namespace

SegTrainResult train_unet(UNet& model, const std::vector<SegPair>& train, const std::vector<SegPair>& val,
                          const SegSchedule& sch, std::uint64_t seed, const std::function<void(const SegEpoch&)>& progress) {
    if (train.size() < 10) throw std::invalid_argument("train_unet: need at least 10 training pairs, got " + std::to_string(train.size()));
    if (val.empty()) throw std::invalid_argument("train_unet: empty validation set");
    const std::size_t sz = model.config().input_size;
    Adam opt(model.store().params(), AdamConfig{sch.lr});
    Rng shuffle(derive_seed(seed, "unet.shuffle"));
    std::vector<Tensor> val_images;
    for (const auto& p : val) val_images.push_back(p.image);

    SegTrainResult result;
    result.best_val_dice = -1.0;
    std::vector<std::size_t> order(train.size());
    std::iota(order.begin(), order.end(), 0);
    for (std::size_t e = 1; e <= sch.epochs; ++e) {
        std::shuffle(order.begin(), order.end(), shuffle);
        double loss_sum = 0.0;
        std::size_t seen = 0;
        {
            std::optional<PrecisionScope> precision;
            if (sch.fast_gemm) precision.emplace(Precision::F32);
            for (std::size_t start = 0; start < order.size(); start += sch.batch_size) {
                const std::size_t end = std::min(order.size(), start + sch.batch_size);
                if (end - start < 2) break;
                Tensor x({end - start, 1, sz, sz}), y({end - start, 1, sz, sz});
                for (std::size_t i = start; i < end; ++i) {
                    const auto& p = train[order[i]];
                    std::copy(p.image.ptr(), p.image.ptr() + sz * sz, x.ptr() + (i - start) * sz * sz);
                    std::copy(p.mask.ptr(), p.mask.ptr() + sz * sz, y.ptr() + (i - start) * sz * sz);
                }
                model.store().zero_grad();
                const Var per_sample = binary_cross_entropy(model.forward(Var(x), true), y);
                const Var loss = mean(per_sample);
                if (!std::isfinite(loss.value().item())) throw NumericalError("U-Net loss became non-finite");
                backward(loss);
                opt.step();
                loss_sum += loss.value().item() * static_cast<double>(end - start);
                seen += end - start;
            }
        }
        const auto pred = segment_all(model, val_images);
        double dice = 0.0;
        for (std::size_t i = 0; i < val.size(); ++i) dice += mask_dice(pred[i], val[i].mask);
        SegEpoch log{e, loss_sum / static_cast<double>(std::max<std::size_t>(1, seen)), dice / static_cast<double>(val.size())};
        if (log.val_dice > result.best_val_dice) {
            result.best_val_dice = log.val_dice;
            result.best_epoch = e;
            result.best = model.store().export_tensors();
        }
        result.log.push_back(log);
        if (progress) progress(log);
    }
    model.store().import_tensors(result.best);
    return result;
}

}  // namespace spv::segnet
