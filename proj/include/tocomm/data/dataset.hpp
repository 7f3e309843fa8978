#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "tocomm/nn/params.hpp"
#include "tocomm/nn/tensor.hpp"

namespace tocomm::data {

using Label = std::uint32_t;

// One multi-view example: per-device observations and the target label.
struct ViewSample {
    std::vector<nn::Tensor> views;
    Label label = 0;
};

// K views stored column-wise per device: view(k) is [N x dim_k], pixels in [0, 1].
class MultiViewDataset {
public:
    MultiViewDataset() = default;
    MultiViewDataset(std::vector<nn::Tensor> views, std::vector<Label> labels, std::size_t num_classes);

    std::size_t devices() const noexcept { return views_.size(); }
    std::size_t size() const noexcept { return labels_.size(); }
    bool empty() const noexcept { return labels_.empty(); }
    std::size_t num_classes() const noexcept { return num_classes_; }
    std::size_t view_dim(std::size_t k) const { return views_.at(k).cols(); }

    const nn::Tensor& view(std::size_t k) const { return views_.at(k); }
    const std::vector<Label>& labels() const noexcept { return labels_; }

    ViewSample sample(std::size_t i) const;
    nn::Tensor batch_view(std::size_t k, std::span<const std::size_t> indices) const;
    std::vector<Label> batch_labels(std::span<const std::size_t> indices) const;

    MultiViewDataset subset(std::span<const std::size_t> indices) const;
    MultiViewDataset head(std::size_t n) const;
    // Rows [begin, begin + count).
    MultiViewDataset range(std::size_t begin, std::size_t count) const;

    // Replaces device views (e.g. with extracted features); labels are kept.
    MultiViewDataset with_views(std::vector<nn::Tensor> views) const;

    // FNV-1a over labels and view bytes.
    std::uint64_t content_hash() const;

    // Throws std::invalid_argument when a pixel leaves [0, 1] or a label is out of range.
    void validate_pixels() const;

private:
    std::vector<nn::Tensor> views_;
    std::vector<Label> labels_;
    std::size_t num_classes_ = 0;
};

// Minibatch index stream. The order within epoch e is a pure function of
// (seed, e); batches never straddle an epoch boundary.
class BatchSampler {
public:
    BatchSampler(std::size_t dataset_size, std::size_t batch_size, std::uint64_t seed);

    std::vector<std::size_t> next();
    std::size_t epoch() const noexcept { return epoch_; }

    static std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch);

private:
    std::size_t n_;
    std::size_t batch_;
    std::uint64_t seed_;
    std::size_t epoch_ = 0;
    std::size_t cursor_ = 0;
    std::vector<std::size_t> order_;
};

std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t seed = 1469598103934665603ULL);

}  // namespace tocomm::data
