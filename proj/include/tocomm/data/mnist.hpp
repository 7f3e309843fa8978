#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tocomm/data/dataset.hpp"
#include "tocomm/nn/params.hpp"
#include "tocomm/nn/tensor.hpp"

namespace tocomm::data {

class IdxFormatError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// images: [N, H, W] scaled by 1/255.
struct LabeledImages {
    nn::Tensor images;
    std::vector<Label> labels;

    std::size_t size() const noexcept { return labels.size(); }
    std::size_t height() const { return images.shape().at(1); }
    std::size_t width() const { return images.shape().at(2); }
    // Copy of image i as [H, W].
    nn::Tensor image(std::size_t i) const;
};

LabeledImages parse_idx(std::span<const unsigned char> image_bytes, std::span<const unsigned char> label_bytes);
LabeledImages load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path);

struct MnistFiles {
    std::filesystem::path train_images, train_labels, test_images, test_labels;
};
MnistFiles mnist_files(const std::filesystem::path& dir);
bool mnist_available(const std::filesystem::path& dir);

// Train followed by test images.
LabeledImages concat(const LabeledImages& a, const LabeledImages& b);

// Left view keeps ceil(W/2) columns.
std::pair<nn::Tensor, nn::Tensor> split_vertical(const nn::Tensor& image);

struct CorruptionParams {
    std::size_t mask_size = 15;
    double noise_max = 3.0;
};

// One concrete draw of the corruption process.
struct CorruptionDraw {
    std::size_t mask_row = 0;
    std::size_t mask_col = 0;
    nn::Tensor noise;  // [H, W]
};

CorruptionDraw draw_corruption(std::size_t height, std::size_t width, const CorruptionParams& params, nn::Rng& rng);
std::pair<nn::Tensor, nn::Tensor> apply_corruption(const nn::Tensor& image, const CorruptionDraw& draw,
                                                   std::size_t mask_size);
std::pair<nn::Tensor, nn::Tensor> corrupt_views(const nn::Tensor& image, const CorruptionParams& params, nn::Rng& rng);

// Views are flattened row-major per sample.
MultiViewDataset make_two_view(const LabeledImages& set);
MultiViewDataset make_corrupted(const LabeledImages& set, std::span<const std::size_t> indices,
                                const CorruptionParams& params, nn::Rng& rng);

enum class DataSource { idx_files, corrupted_mnist, synthetic_discrete };
DataSource parse_data_source(std::string_view name);
std::string_view to_string(DataSource source);

struct DatasetSpec {
    DataSource source = DataSource::idx_files;
    std::filesystem::path data_dir;
    std::size_t devices = 2;
    std::size_t train_size = 0;       // 0 keeps everything available
    std::size_t validation_size = 0;  // carved from the end of the train pool
    std::size_t test_size = 0;
    std::optional<CorruptionParams> corruption;
    std::uint64_t seed = 0;

    // Throws std::invalid_argument when fields contradict the source.
    void validate() const;
};

struct DataSplits {
    MultiViewDataset train;
    MultiViewDataset validation;
    MultiViewDataset test;
};

// MNIST-backed splits. Corrupted: 70k images permuted, train then test drawn in order.
DataSplits build_mnist_splits(const DatasetSpec& spec);

}  // namespace tocomm::data
