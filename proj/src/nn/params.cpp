#include "tocomm/nn/params.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

namespace tocomm::nn {

Parameter& ParamStore::add(std::string name, Tensor value) {
    Tensor grad(value.shape(), 0.0);
    auto [it, inserted] = params_.emplace(std::move(name), Parameter{std::move(value), std::move(grad)});
    if (!inserted) throw std::invalid_argument("param store: duplicate name '" + it->first + "'");
    return it->second;
}

bool ParamStore::contains(std::string_view name) const { return params_.find(name) != params_.end(); }

Parameter& ParamStore::get(std::string_view name) {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + std::string(name) + "'");
    return it->second;
}

const Parameter& ParamStore::get(std::string_view name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("param store: no parameter '" + std::string(name) + "'");
    return it->second;
}

void ParamStore::zero_grad() {
    for (auto& [name, p] : params_) p.grad.fill(0.0);
}

std::size_t ParamStore::scalar_count() const noexcept {
    std::size_t n = 0;
    for (const auto& [name, p] : params_) n += p.value.size();
    return n;
}

std::vector<std::string> ParamStore::names() const {
    std::vector<std::string> out;
    out.reserve(params_.size());
    for (const auto& [name, p] : params_) out.push_back(name);
    return out;
}

void ParamStore::import_prefix(const ParamStore& source, std::string_view from_prefix,
                               std::string_view to_prefix) {
    for (const auto& [name, p] : source.params_) {
        if (!name.starts_with(from_prefix)) continue;
        std::string target = std::string(to_prefix) + name.substr(from_prefix.size());
        auto it = params_.find(target);
        if (it == params_.end()) {
            add(std::move(target), p.value);
        } else {
            if (it->second.value.shape() != p.value.shape()) {
                throw std::invalid_argument("param store: shape mismatch importing '" + name + "'");
            }
            it->second.value = p.value;
        }
    }
}

bool ParamStore::values_equal(const ParamStore& other, std::string_view prefix) const {
    auto a = params_.lower_bound(prefix);
    auto b = other.params_.lower_bound(prefix);
    for (;; ++a, ++b) {
        const bool a_done = a == params_.end() || !a->first.starts_with(prefix);
        const bool b_done = b == other.params_.end() || !b->first.starts_with(prefix);
        if (a_done || b_done) return a_done && b_done;
        if (a->first != b->first || a->second.value.shape() != b->second.value.shape()) return false;
        if (std::memcmp(a->second.value.raw(), b->second.value.raw(), a->second.value.size() * sizeof(double)) != 0) {
            return false;
        }
    }
}

Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)};
    return Rng(seq);
}

Tensor glorot_uniform(std::size_t fan_out, std::size_t fan_in, Rng& rng) {
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-limit, limit);
    Tensor w = Tensor::matrix(fan_out, fan_in);
    for (double& v : w.data()) v = dist(rng);
    return w;
}

}  // namespace tocomm::nn
