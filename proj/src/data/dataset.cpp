#include "tocomm/data/dataset.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>
#include <string>

namespace tocomm::data {

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed) {
    std::uint64_t h = seed;
    for (unsigned char b : bytes) {
        h ^= b;
        h *= 1099511628211ULL;
    }
    return h;
}

MultiViewDataset::MultiViewDataset(std::vector<nn::Tensor> views, std::vector<Label> labels, std::size_t num_classes)
    : views_(std::move(views)), labels_(std::move(labels)), num_classes_(num_classes) {
    if (views_.empty()) throw std::invalid_argument("dataset: at least one view is required");
    for (std::size_t k = 0; k < views_.size(); ++k) {
        if (views_[k].rows() != labels_.size() && !(labels_.empty() && views_[k].empty())) {
            throw std::invalid_argument("dataset: view " + std::to_string(k) + " has " +
                                        std::to_string(views_[k].rows()) + " rows for " +
                                        std::to_string(labels_.size()) + " labels");
        }
    }
    for (Label y : labels_) {
        if (y >= num_classes_) throw std::invalid_argument("dataset: label " + std::to_string(y) + " out of range");
    }
}

ViewSample MultiViewDataset::sample(std::size_t i) const {
    if (i >= size()) throw std::out_of_range("dataset: sample index out of range");
    ViewSample s;
    s.label = labels_[i];
    for (const auto& v : views_) {
        const auto r = v.row(i);
        s.views.emplace_back(std::vector<std::size_t>{r.size()}, std::vector<double>(r.begin(), r.end()));
    }
    return s;
}

nn::Tensor MultiViewDataset::batch_view(std::size_t k, std::span<const std::size_t> indices) const {
    return nn::gather_rows(views_.at(k), indices);
}

std::vector<Label> MultiViewDataset::batch_labels(std::span<const std::size_t> indices) const {
    std::vector<Label> out;
    out.reserve(indices.size());
    for (std::size_t i : indices) out.push_back(labels_.at(i));
    return out;
}

MultiViewDataset MultiViewDataset::subset(std::span<const std::size_t> indices) const {
    std::vector<nn::Tensor> views;
    for (std::size_t k = 0; k < views_.size(); ++k) views.push_back(batch_view(k, indices));
    return MultiViewDataset(std::move(views), batch_labels(indices), num_classes_);
}

MultiViewDataset MultiViewDataset::head(std::size_t n) const { return range(0, std::min(n, size())); }

MultiViewDataset MultiViewDataset::range(std::size_t begin, std::size_t count) const {
    if (begin + count > size()) throw std::out_of_range("dataset: range exceeds size");
    std::vector<std::size_t> idx(count);
    std::iota(idx.begin(), idx.end(), begin);
    return subset(idx);
}

MultiViewDataset MultiViewDataset::with_views(std::vector<nn::Tensor> views) const {
    return MultiViewDataset(std::move(views), labels_, num_classes_);
}

std::uint64_t MultiViewDataset::content_hash() const {
    std::uint64_t h = fnv1a(std::span(reinterpret_cast<const unsigned char*>(labels_.data()), labels_.size() * sizeof(Label)));
    for (const auto& v : views_) {
        h = fnv1a(std::span(reinterpret_cast<const unsigned char*>(v.raw()), v.size() * sizeof(double)), h);
    }
    return h;
}

void MultiViewDataset::validate_pixels() const {
    for (std::size_t k = 0; k < views_.size(); ++k) {
        for (double v : views_[k].data()) {
            if (!(v >= 0.0 && v <= 1.0)) {
                throw std::invalid_argument("dataset: view " + std::to_string(k) + " has a value outside [0, 1]");
            }
        }
    }
}

BatchSampler::BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed)
    : n_(dataset_size), batch_(batch_size), seed_(seed) {
    if (n_ == 0) throw std::invalid_argument("batch sampler: empty dataset");
    if (batch_ == 0) throw std::invalid_argument("batch sampler: batch size must be positive");
    order_ = epoch_order(n_, seed_, epoch_);
}

std::vector<std::size_t> BatchSampler::epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(epoch), 0x5eedu};
    nn::Rng rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

std::vector<std::size_t> BatchSampler::next() {
    if (cursor_ >= n_) {
        ++epoch_;
        cursor_ = 0;
        order_ = epoch_order(n_, seed_, epoch_);
    }
    const std::size_t take = std::min(batch_, n_ - cursor_);
    std::vector<std::size_t> out(order_.begin() + static_cast<std::ptrdiff_t>(cursor_),
                                 order_.begin() + static_cast<std::ptrdiff_t>(cursor_ + take));
    cursor_ += take;
    return out;
}

}  // namespace tocomm::data
