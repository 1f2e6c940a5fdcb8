#include "spv/grad/nn.hpp"

#include <cmath>
#include <stdexcept>

namespace spv::grad {

namespace {

Tensor he_normal(Shape shape, std::size_t fan_in, double gain, Rng& rng) {
    Tensor t(std::move(shape));
    std::normal_distribution<double> dist(0.0, std::sqrt(gain / static_cast<double>(fan_in)));
    for (auto& v : t.data()) v = dist(rng);
    return t;
}

}  // namespace

void ParameterStore::claim(const std::string& name) {
    if (!names_.emplace(name, 0).second) throw std::invalid_argument("duplicate tensor name '" + name + "'");
}

Var ParameterStore::add(const std::string& name, Tensor init) {
    claim(name);
    Var v(std::move(init), true);
    params_.push_back({name, v});
    return v;
}

BatchNormState& ParameterStore::add_batch_norm(const std::string& name, std::size_t channels) {
    claim(name + ".running_mean");
    claim(name + ".running_var");
    auto& [n, st] = norms_.emplace_back(name, BatchNormState{});
    st.running_mean = Tensor({channels}, 0.0);
    st.running_var = Tensor({channels}, 1.0);
    return st;
}

std::vector<Parameter> ParameterStore::params_with_prefix(const std::string& prefix) const {
    std::vector<Parameter> out;
    for (const auto& p : params_)
        if (p.name.rfind(prefix, 0) == 0) out.push_back(p);
    return out;
}

std::size_t ParameterStore::parameter_count() const {
    std::size_t n = 0;
    for (const auto& p : params_) n += p.value().numel();
    return n;
}

void ParameterStore::zero_grad() {
    for (auto& p : params_) {
        Tensor& g = p.var.node()->grad_buffer();
        g.fill(0.0);
    }
}

std::vector<NamedTensor> ParameterStore::export_tensors() const {
    std::vector<NamedTensor> out;
    for (const auto& p : params_) out.push_back({p.name, p.value()});
    for (const auto& [name, st] : norms_) {
        out.push_back({name + ".running_mean", st.running_mean});
        out.push_back({name + ".running_var", st.running_var});
    }
    return out;
}

void ParameterStore::import_tensors(const std::vector<NamedTensor>& tensors) {
    std::map<std::string, const Tensor*> by_name;
    for (const auto& t : tensors) by_name[t.name] = &t.tensor;
    auto fetch = [&](const std::string& name, const Tensor& like) -> const Tensor& {
        auto it = by_name.find(name);
        if (it == by_name.end()) throw std::invalid_argument("checkpoint is missing tensor '" + name + "'");
        if (it->second->shape() != like.shape()) {
            throw ShapeError("import_tensors", "'" + name + "' has shape " + shape_str(it->second->shape()) +
                                                   ", model expects " + shape_str(like.shape()));
        }
        return *it->second;
    };
    for (auto& p : params_) p.var.mutable_value() = fetch(p.name, p.value());
    for (auto& [name, st] : norms_) {
        st.running_mean = fetch(name + ".running_mean", st.running_mean);
        st.running_var = fetch(name + ".running_var", st.running_var);
    }
}

Conv2d::Conv2d(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, std::size_t kernel,
               std::size_t stride, std::size_t padding, bool bias, Rng& rng)
    : stride_(stride), padding_(padding) {
    weight_ = store.add(name + ".weight", he_normal({out, in, kernel, kernel}, in * kernel * kernel, 2.0, rng));
    if (bias) bias_ = store.add(name + ".bias", Tensor({out}, 0.0));
}

Linear::Linear(ParameterStore& store, const std::string& name, std::size_t in, std::size_t out, Rng& rng,
               double init_gain) {
    weight_ = store.add(name + ".weight", he_normal({out, in}, in, init_gain, rng));
    bias_ = store.add(name + ".bias", Tensor({out}, 0.0));
}

BatchNorm::BatchNorm(ParameterStore& store, const std::string& name, std::size_t channels) {
    gamma_ = store.add(name + ".gamma", Tensor({channels}, 1.0));
    beta_ = store.add(name + ".beta", Tensor({channels}, 0.0));
    state_ = &store.add_batch_norm(name, channels);
}

}  // namespace spv::grad
