#include "tocomm/data/mnist.hpp"

#include <algorithm>
#include <fstream>
#include <iterator>
#include <numeric>
#include <stdexcept>

namespace tocomm::data {

namespace {

constexpr std::uint32_t kImageMagic = 0x00000803;
constexpr std::uint32_t kLabelMagic = 0x00000801;

std::uint32_t read_be32(std::span<const unsigned char> bytes, std::size_t offset) {
    if (offset + 4 > bytes.size()) throw IdxFormatError("idx: truncated header");
    return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
           (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string hex(std::uint32_t v) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s = "0x";
    for (int shift = 28; shift >= 0; shift -= 4) s += digits[(v >> shift) & 0xF];
    return s;
}

}  // namespace

nn::Tensor LabeledImages::image(std::size_t i) const {
    const std::size_t h = height(), w = width();
    if (i >= size()) throw std::out_of_range("image index out of range");
    const auto begin = images.data().begin() + static_cast<std::ptrdiff_t>(i * h * w);
    return nn::Tensor({h, w}, std::vector<double>(begin, begin + static_cast<std::ptrdiff_t>(h * w)));
}

LabeledImages parse_idx(std::span<const unsigned char> image_bytes, std::span<const unsigned char> label_bytes) {
    const std::uint32_t im = read_be32(image_bytes, 0);
    if (im != kImageMagic) throw IdxFormatError("idx: image magic " + hex(im) + ", expected " + hex(kImageMagic));
    const std::uint32_t lm = read_be32(label_bytes, 0);
    if (lm != kLabelMagic) throw IdxFormatError("idx: label magic " + hex(lm) + ", expected " + hex(kLabelMagic));

    const std::size_t n = read_be32(image_bytes, 4);
    const std::size_t h = read_be32(image_bytes, 8);
    const std::size_t w = read_be32(image_bytes, 12);
    const std::size_t nl = read_be32(label_bytes, 4);
    if (n != nl) {
        throw IdxFormatError("idx: " + std::to_string(n) + " images but " + std::to_string(nl) + " labels");
    }
    if (image_bytes.size() != 16 + n * h * w) throw IdxFormatError("idx: image payload size mismatch");
    if (label_bytes.size() != 8 + n) throw IdxFormatError("idx: label payload size mismatch");

    LabeledImages out;
    std::vector<double> pixels(n * h * w);
    for (std::size_t i = 0; i < pixels.size(); ++i) pixels[i] = image_bytes[16 + i] / 255.0;
    out.images = nn::Tensor({n, h, w}, std::move(pixels));
    out.labels.assign(label_bytes.begin() + 8, label_bytes.end());
    return out;
}

LabeledImages load_idx(const std::filesystem::path& images_path, const std::filesystem::path& labels_path) {
    const auto images = read_file(images_path);
    const auto labels = read_file(labels_path);
    try {
        return parse_idx(images, labels);
    } catch (const IdxFormatError& e) {
        throw IdxFormatError(std::string(e.what()) + " (" + images_path.string() + ", " + labels_path.string() + ")");
    }
}

MnistFiles mnist_files(const std::filesystem::path& dir) {
    return {dir / "train-images-idx3-ubyte", dir / "train-labels-idx1-ubyte", dir / "t10k-images-idx3-ubyte",
            dir / "t10k-labels-idx1-ubyte"};
}

bool mnist_available(const std::filesystem::path& dir) {
    const auto f = mnist_files(dir);
    return std::filesystem::exists(f.train_images) && std::filesystem::exists(f.train_labels) &&
           std::filesystem::exists(f.test_images) && std::filesystem::exists(f.test_labels);
}

LabeledImages concat(const LabeledImages& a, const LabeledImages& b) {
    if (a.height() != b.height() || a.width() != b.width()) throw std::invalid_argument("concat: image sizes differ");
    std::vector<double> pixels(a.images.data().begin(), a.images.data().end());
    pixels.insert(pixels.end(), b.images.data().begin(), b.images.data().end());
    LabeledImages out;
    out.images = nn::Tensor({a.size() + b.size(), a.height(), a.width()}, std::move(pixels));
    out.labels = a.labels;
    out.labels.insert(out.labels.end(), b.labels.begin(), b.labels.end());
    return out;
}

std::pair<nn::Tensor, nn::Tensor> split_vertical(const nn::Tensor& image) {
    if (image.rank() != 2) throw std::invalid_argument("split_vertical: expected [H x W], got " + nn::shape_string(image.shape()));
    const std::size_t h = image.shape()[0], w = image.shape()[1];
    if (w < 2) throw std::invalid_argument("split_vertical: width must be at least 2");
    const std::size_t left = (w + 1) / 2;
    nn::Tensor a({h, left}), b({h, w - left});
    for (std::size_t r = 0; r < h; ++r) {
        for (std::size_t c = 0; c < w; ++c) {
            if (c < left) a.at(r, c) = image.at(r, c);
            else b.at(r, c - left) = image.at(r, c);
        }
    }
    return {std::move(a), std::move(b)};
}

CorruptionDraw draw_corruption(std::size_t height, std::size_t width, const CorruptionParams& params, nn::Rng& rng) {
    if (params.mask_size > height || params.mask_size > width) throw std::invalid_argument("corrupt: mask larger than image");
    if (!(params.noise_max >= 0.0)) throw std::invalid_argument("corrupt: noise range must be nonnegative");
    CorruptionDraw d;
    d.mask_row = std::uniform_int_distribution<std::size_t>(0, height - params.mask_size)(rng);
    d.mask_col = std::uniform_int_distribution<std::size_t>(0, width - params.mask_size)(rng);
    d.noise = nn::Tensor({height, width});
    std::uniform_real_distribution<double> noise(0.0, params.noise_max);
    for (double& v : d.noise.data()) v = noise(rng);
    return d;
}

std::pair<nn::Tensor, nn::Tensor> apply_corruption(const nn::Tensor& image, const CorruptionDraw& draw,
                                                   std::size_t mask_size) {
    if (image.rank() != 2 || draw.noise.shape() != image.shape()) throw std::invalid_argument("corrupt: shape mismatch");
    const std::size_t h = image.shape()[0], w = image.shape()[1];
    if (draw.mask_row + mask_size > h || draw.mask_col + mask_size > w) {
        throw std::invalid_argument("corrupt: mask leaves the image");
    }
    nn::Tensor masked = image;
    for (std::size_t r = draw.mask_row; r < draw.mask_row + mask_size; ++r) {
        for (std::size_t c = draw.mask_col; c < draw.mask_col + mask_size; ++c) masked.at(r, c) = 0.0;
    }
    nn::Tensor noisy = image;
    for (std::size_t i = 0; i < noisy.size(); ++i) noisy[i] = std::clamp(image[i] + draw.noise[i], 0.0, 1.0);
    return {std::move(masked), std::move(noisy)};
}

std::pair<nn::Tensor, nn::Tensor> corrupt_views(const nn::Tensor& image, const CorruptionParams& params, nn::Rng& rng) {
    if (image.rank() != 2) throw std::invalid_argument("corrupt: expected [H x W]");
    const auto draw = draw_corruption(image.shape()[0], image.shape()[1], params, rng);
    return apply_corruption(image, draw, params.mask_size);
}

MultiViewDataset make_two_view(const LabeledImages& set) {
    const std::size_t n = set.size(), h = set.height(), w = set.width();
    const std::size_t left = (w + 1) / 2;
    nn::Tensor a = nn::Tensor::matrix(n, h * left), b = nn::Tensor::matrix(n, h * (w - left));
    for (std::size_t i = 0; i < n; ++i) {
        const auto [va, vb] = split_vertical(set.image(i));
        std::copy(va.data().begin(), va.data().end(), a.row(i).begin());
        std::copy(vb.data().begin(), vb.data().end(), b.row(i).begin());
    }
    std::vector<nn::Tensor> views;
    views.push_back(std::move(a));
    views.push_back(std::move(b));
    return MultiViewDataset(std::move(views), set.labels, 10);
}

MultiViewDataset make_corrupted(const LabeledImages& set, std::span<const std::size_t> indices,
                                const CorruptionParams& params, nn::Rng& rng) {
    const std::size_t hw = set.height() * set.width();
    nn::Tensor a = nn::Tensor::matrix(indices.size(), hw), b = nn::Tensor::matrix(indices.size(), hw);
    std::vector<Label> labels;
    labels.reserve(indices.size());
    for (std::size_t i = 0; i < indices.size(); ++i) {
        const auto [va, vb] = corrupt_views(set.image(indices[i]), params, rng);
        std::copy(va.data().begin(), va.data().end(), a.row(i).begin());
        std::copy(vb.data().begin(), vb.data().end(), b.row(i).begin());
        labels.push_back(set.labels.at(indices[i]));
    }
    std::vector<nn::Tensor> views;
    views.push_back(std::move(a));
    views.push_back(std::move(b));
    return MultiViewDataset(std::move(views), std::move(labels), 10);
}

DataSource parse_data_source(std::string_view name) {
    if (name == "idx-files") return DataSource::idx_files;
    if (name == "corrupted-mnist") return DataSource::corrupted_mnist;
    if (name == "synthetic-discrete") return DataSource::synthetic_discrete;
    throw std::invalid_argument("unknown data source '" + std::string(name) + "'");
}

std::string_view to_string(DataSource source) {
    switch (source) {
        case DataSource::idx_files: return "idx-files";
        case DataSource::corrupted_mnist: return "corrupted-mnist";
        case DataSource::synthetic_discrete: return "synthetic-discrete";
    }
    return "unknown";
}

void DatasetSpec::validate() const {
    if (corruption.has_value() != (source == DataSource::corrupted_mnist)) {
        throw std::invalid_argument("dataset spec: corruption parameters are required for, and only for, corrupted-mnist");
    }
    if (devices == 0) throw std::invalid_argument("dataset spec: at least one device");
    if (source != DataSource::synthetic_discrete && devices != 2) {
        throw std::invalid_argument("dataset spec: MNIST sources produce exactly two views");
    }
}

DataSplits build_mnist_splits(const DatasetSpec& spec) {
    spec.validate();
    if (spec.source == DataSource::synthetic_discrete) {
        throw std::invalid_argument("build_mnist_splits: synthetic sources are built from a DiscreteTask");
    }
    const auto files = mnist_files(spec.data_dir);
    const LabeledImages train = load_idx(files.train_images, files.train_labels);
    const LabeledImages test = load_idx(files.test_images, files.test_labels);

    auto take = [](std::size_t requested, std::size_t available) {
        return requested == 0 ? available : std::min(requested, available);
    };

    if (spec.source == DataSource::idx_files) {
        const MultiViewDataset pool = make_two_view(train);
        if (spec.validation_size >= pool.size()) throw std::invalid_argument("dataset spec: validation consumes the train pool");
        const std::size_t pool_train = pool.size() - spec.validation_size;
        DataSplits s;
        s.train = pool.range(0, take(spec.train_size, pool_train));
        s.validation = pool.range(pool_train, spec.validation_size);
        s.test = make_two_view(test).head(take(spec.test_size, test.size()));
        return s;
    }

    // Corrupted: one shuffle of all 70k images; train pool first, then test.
    const LabeledImages all = concat(train, test);
    nn::Rng rng(spec.seed);
    std::vector<std::size_t> order(all.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::shuffle(order.begin(), order.end(), rng);
    const std::size_t pool_size = take(spec.train_size, 50000);
    const std::size_t test_size = take(spec.test_size, 20000);
    if (pool_size + test_size > all.size() || spec.validation_size >= pool_size) {
        throw std::invalid_argument("dataset spec: corrupted split sizes exceed the image pool");
    }
    const auto pool_idx = std::span(order).subspan(0, pool_size);
    const auto test_idx = std::span(order).subspan(pool_size, test_size);
    const MultiViewDataset pool = make_corrupted(all, pool_idx, *spec.corruption, rng);
    DataSplits s;
    const std::size_t pool_train = pool_size - spec.validation_size;
    s.train = pool.range(0, pool_train);
    s.validation = pool.range(pool_train, spec.validation_size);
    s.test = make_corrupted(all, test_idx, *spec.corruption, rng);
    return s;
}

}  // namespace tocomm::data
