#include "spv/vae/vae.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "spv/grad/ops.hpp"

namespace spv::vae {

using namespace spv::grad;

const char* to_string(ViewMode v) { return v == ViewMode::Single ? "single" : "dual"; }
const char* to_string(HeadInput h) { return h == HeadInput::Mu ? "mu" : "z"; }

std::size_t input_channels(const VAEConfig& cfg) { return cfg.views == ViewMode::Single ? 1 : 2; }

void validate(const VAEConfig& cfg) {
    if (cfg.latent_dim < 2) throw std::invalid_argument("VAE latent dimension must be >= 2");
    if (cfg.input_size < 32 || cfg.input_size % 32 != 0) throw std::invalid_argument("VAE input size must be a multiple of 32");
    if (cfg.base_channels == 0 || cfg.head_hidden == 0) throw std::invalid_argument("VAE widths must be positive");
    if (!(cfg.w1 >= 0.0 && cfg.w2 >= 0.0)) throw std::invalid_argument("VAE loss weights must be non-negative");
    if (!(cfg.volume_scale > 0.0)) throw std::invalid_argument("VAE volume scale must be positive");
}

namespace {

// conv-BN-ReLU-conv-BN plus shortcut, then ReLU. Downsampling blocks stride
// the first conv; upsampling blocks upsample their input first.
struct ResBlock {
    enum class Resample { None, Down, Up };
    Conv2d c1, c2, proj;
    BatchNorm b1, b2, bp;
    Resample mode = Resample::None;
    bool has_proj = false;

    ResBlock() = default;
    ResBlock(ParameterStore& s, const std::string& name, std::size_t in, std::size_t out, Resample m, Rng& rng)
        : mode(m) {
        const std::size_t stride = m == Resample::Down ? 2 : 1;
        c1 = Conv2d(s, name + ".conv1", in, out, 3, stride, 1, false, rng);
        b1 = BatchNorm(s, name + ".bn1", out);
        c2 = Conv2d(s, name + ".conv2", out, out, 3, 1, 1, false, rng);
        b2 = BatchNorm(s, name + ".bn2", out);
        has_proj = in != out || m == Resample::Down;
        if (has_proj) {
            proj = Conv2d(s, name + ".proj", in, out, 1, stride, 0, false, rng);
            bp = BatchNorm(s, name + ".bnp", out);
        }
    }

    Var operator()(const Var& x, bool training) const {
        const Var in = mode == Resample::Up ? upsample2x(x) : x;
        Var h = relu(b1(c1(in), training));
        h = b2(c2(h), training);
        const Var shortcut = has_proj ? bp(proj(in), training) : in;
        return relu(add(h, shortcut));
    }
};

constexpr std::size_t kBlocks = 8;
constexpr std::size_t kEncWidth[kBlocks] = {1, 1, 2, 2, 4, 4, 8, 8};
constexpr std::size_t kDecWidth[kBlocks] = {8, 8, 4, 4, 2, 2, 1, 1};

}  // namespace

struct VAE::Net {
    Conv2d stem;
    BatchNorm stem_bn;
    std::vector<ResBlock> enc, dec;
    Linear fc_mu, fc_logvar, fc_dec;
    Conv2d out_conv;
    Linear head1, head2;
    std::size_t bottleneck_side = 0, bottleneck_channels = 0;
};

VAE::VAE(const VAEConfig& cfg, std::uint64_t init_seed) : cfg_(cfg), net_(std::make_unique<Net>()) {
    validate(cfg);
    Rng rng(derive_seed(init_seed, "vae.init"));
    auto& n = *net_;
    const std::size_t c = cfg.base_channels, cin = input_channels(cfg);
    n.stem = Conv2d(store_, "enc.stem", cin, c, 3, 2, 1, false, rng);
    n.stem_bn = BatchNorm(store_, "enc.stem_bn", c);
    std::size_t width = c;
    for (std::size_t i = 0; i < kBlocks; ++i) {
        const std::size_t out = c * kEncWidth[i];
        n.enc.emplace_back(store_, "enc.block" + std::to_string(i), width, out,
                           i % 2 == 0 ? ResBlock::Resample::Down : ResBlock::Resample::None, rng);
        width = out;
    }
    n.bottleneck_side = cfg.input_size / 32;
    n.bottleneck_channels = width;
    const std::size_t flat = width * n.bottleneck_side * n.bottleneck_side;
    n.fc_mu = Linear(store_, "enc.fc_mu", flat, cfg.latent_dim, rng, 1.0);
    n.fc_logvar = Linear(store_, "enc.fc_logvar", flat, cfg.latent_dim, rng, 0.1);
    n.fc_dec = Linear(store_, "dec.fc", cfg.latent_dim, flat, rng);
    for (std::size_t i = 0; i < kBlocks; ++i) {
        const std::size_t out = c * kDecWidth[i];
        n.dec.emplace_back(store_, "dec.block" + std::to_string(i), width, out,
                           i % 2 == 1 ? ResBlock::Resample::Up : ResBlock::Resample::None, rng);
        width = out;
    }
    n.out_conv = Conv2d(store_, "dec.out", width, cin, 3, 1, 1, true, rng);
    n.head1 = Linear(store_, "head.fc1", cfg.latent_dim, cfg.head_hidden, rng);
    n.head2 = Linear(store_, "head.fc2", cfg.head_hidden, 1, rng, 1.0);
}

VAE::~VAE() = default;

Encoded VAE::encode(const Var& x, bool training) {
    const auto& s = x.shape();
    const std::size_t cin = input_channels(cfg_);
    if (s.size() != 4 || s[1] != cin || s[2] != cfg_.input_size || s[3] != cfg_.input_size)
        throw ShapeError("vae.encode", "expected [N, " + std::to_string(cin) + ", " + std::to_string(cfg_.input_size) + ", " +
                                           std::to_string(cfg_.input_size) + "], got " + shape_str(s));
    auto& n = *net_;
    Var h = relu(n.stem_bn(n.stem(x), training));
    for (const auto& b : n.enc) h = b(h, training);
    h = reshape(h, {s[0], h.value().numel() / s[0]});
    return {n.fc_mu(h), n.fc_logvar(h)};
}

Var VAE::decode(const Var& z, bool training) {
    const auto& s = z.shape();
    if (s.size() != 2 || s[1] != cfg_.latent_dim)
        throw ShapeError("vae.decode", "expected [N, " + std::to_string(cfg_.latent_dim) + "], got " + shape_str(s));
    auto& n = *net_;
    Var h = relu(n.fc_dec(z));
    h = reshape(h, {s[0], n.bottleneck_channels, n.bottleneck_side, n.bottleneck_side});
    for (const auto& b : n.dec) h = b(h, training);
    return sigmoid(n.out_conv(upsample2x(h)));
}

Var VAE::head(const Var& latent, bool) {
    const auto& s = latent.shape();
    if (s.size() != 2 || s[1] != cfg_.latent_dim)
        throw ShapeError("vae.head", "expected [N, " + std::to_string(cfg_.latent_dim) + "], got " + shape_str(s));
    return net_->head2(relu(net_->head1(latent)));
}

std::vector<Parameter> VAE::vae_params() const {
    auto enc = store_.params_with_prefix("enc.");
    const auto dec = store_.params_with_prefix("dec.");
    enc.insert(enc.end(), dec.begin(), dec.end());
    return enc;
}

std::vector<Parameter> VAE::head_params() const { return store_.params_with_prefix("head."); }

Var reparameterize(const Var& mu, const Var& logvar, const Tensor& zeta) {
    if (zeta.shape() != mu.shape()) throw ShapeError("reparameterize", "zeta " + shape_str(zeta.shape()) + " vs mu " + shape_str(mu.shape()));
    const Var sigma = grad::exp(scale(logvar, 0.5));
    return add(mu, mul(sigma, Var(zeta)));
}

std::vector<double> reparameterize(const LatentCode& code, const std::vector<double>& zeta) {
    if (zeta.size() != code.mu.size() || code.sigma.size() != code.mu.size())
        throw std::invalid_argument("reparameterize: dimension mismatch");
    std::vector<double> z(zeta.size());
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = code.mu[i] + zeta[i] * code.sigma[i];
    return z;
}

Var bce_loss(const Var& recon, const Tensor& target) { return binary_cross_entropy(recon, target); }

Var kld_loss(const Var& mu, const Var& logvar) {
    // -1/2 * sum(1 + logvar - mu^2 - exp(logvar))
    const Var inner = sub(add_scalar(logvar, 1.0), add(square(mu), grad::exp(logvar)));
    return scale(sum_per_sample(inner), -0.5);
}

Var total_loss(const Var& bce, const Var& kld, double w1) { return mean(add(bce, scale(kld, w1))); }

Var rvae_loss(const Var& bce, const Var& kld, const Var& pred, const Tensor& scaled_target, double w1, double w2) {
    const std::size_t n = bce.value().numel();
    if (scaled_target.numel() != n || pred.value().numel() != n)
        throw std::invalid_argument("rvae_loss: every sample needs a ground-truth volume and a prediction");
    const Var err = square(sub(reshape(pred, {n}), Var(scaled_target.reshaped({n}))));
    return mean(add(add(bce, scale(kld, w1)), scale(err, w2)));
}

Tensor stack(const std::vector<const Tensor*>& samples) {
    if (samples.empty()) throw std::invalid_argument("stack: no samples");
    const Shape inner = samples[0]->shape();
    Shape shape{samples.size()};
    shape.insert(shape.end(), inner.begin(), inner.end());
    Tensor out(shape);
    const std::size_t per = samples[0]->numel();
    for (std::size_t i = 0; i < samples.size(); ++i) {
        if (samples[i]->shape() != inner) throw ShapeError("stack", "sample " + std::to_string(i) + " has shape " + shape_str(samples[i]->shape()));
        std::copy(samples[i]->ptr(), samples[i]->ptr() + per, out.ptr() + i * per);
    }
    return out;
}

namespace {

template <typename F>
void for_batches(const std::vector<Tensor>& inputs, std::size_t batch, F&& f) {
    for (std::size_t start = 0; start < inputs.size(); start += batch) {
        const std::size_t end = std::min(inputs.size(), start + batch);
        std::vector<const Tensor*> ptrs;
        for (std::size_t i = start; i < end; ++i) ptrs.push_back(&inputs[i]);
        f(start, end, stack(ptrs));
    }
}

Tensor rows_to_tensor(const std::vector<std::vector<double>>& rows) {
    if (rows.empty()) throw std::invalid_argument("empty latent set");
    Tensor t({rows.size(), rows[0].size()});
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i].size() != rows[0].size()) throw std::invalid_argument("inconsistent latent dimensions");
        std::copy(rows[i].begin(), rows[i].end(), t.ptr() + i * rows[0].size());
    }
    return t;
}

}  // namespace

std::vector<LatentCode> encode_all(VAE& model, const std::vector<Tensor>& inputs, std::size_t batch) {
    NoGradScope ng;
    std::vector<LatentCode> out(inputs.size());
    const std::size_t d = model.config().latent_dim;
    for_batches(inputs, batch, [&](std::size_t start, std::size_t end, const Tensor& x) {
        const auto enc = model.encode(Var(x), false);
        for (std::size_t i = start; i < end; ++i) {
            auto& code = out[i];
            code.mu.resize(d);
            code.sigma.resize(d);
            for (std::size_t j = 0; j < d; ++j) {
                code.mu[j] = enc.mu.value()[(i - start) * d + j];
                code.sigma[j] = std::exp(0.5 * enc.logvar.value()[(i - start) * d + j]);
            }
        }
    });
    return out;
}

std::vector<Tensor> reconstruct_all(VAE& model, const std::vector<Tensor>& inputs, std::size_t batch) {
    NoGradScope ng;
    std::vector<Tensor> out;
    for_batches(inputs, batch, [&](std::size_t start, std::size_t end, const Tensor& x) {
        const Tensor r = model.decode(model.encode(Var(x), false).mu, false).value();
        const std::size_t per = r.numel() / (end - start);
        for (std::size_t i = 0; i < end - start; ++i)
            out.emplace_back(inputs[start + i].shape(), std::vector<double>(r.ptr() + i * per, r.ptr() + (i + 1) * per));
    });
    return out;
}

std::vector<Tensor> decode_latents(VAE& model, const std::vector<std::vector<double>>& zs) {
    NoGradScope ng;
    const Tensor r = model.decode(Var(rows_to_tensor(zs)), false).value();
    const std::size_t s = model.config().input_size, c = input_channels(model.config());
    const std::size_t per = c * s * s;
    std::vector<Tensor> out;
    for (std::size_t i = 0; i < zs.size(); ++i)
        out.emplace_back(Shape{c, s, s}, std::vector<double>(r.ptr() + i * per, r.ptr() + (i + 1) * per));
    return out;
}

std::vector<double> head_outputs(VAE& model, const std::vector<std::vector<double>>& latents) {
    NoGradScope ng;
    const Tensor r = model.head(Var(rows_to_tensor(latents)), false).value();
    return {r.ptr(), r.ptr() + r.numel()};
}

}  // namespace spv::vae
