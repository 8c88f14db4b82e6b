#include "vmfguard/classifier.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <numbers>
#include <stdexcept>
#include <string>

#include "vmfguard/rng.hpp"

namespace vmfguard {

int Classifier::predict(const Image& img) const { return argmax(predict_logits(img)); }

std::vector<double> softmax(std::span<const double> logits) {
    const double top = *std::max_element(logits.begin(), logits.end());
    std::vector<double> out(logits.size());
    double total = 0.0;
    for (std::size_t k = 0; k < logits.size(); ++k) {
        out[k] = std::exp(logits[k] - top);
        total += out[k];
    }
    for (double& p : out) p /= total;
    return out;
}

int argmax(std::span<const double> values) {
    return static_cast<int>(std::max_element(values.begin(), values.end()) - values.begin());
}

ReferenceModel::ReferenceModel(int num_classes, int height, int width, int channels, int pool_factor)
    : classes_(num_classes), height_(height), width_(width), channels_(channels), pool_(pool_factor) {
    if (num_classes < 1) throw std::invalid_argument("model: need at least one class");
    if (pool_factor < 1 || height % pool_factor != 0 || width % pool_factor != 0) {
        throw std::invalid_argument("model: pool_factor must divide the image dimensions");
    }
    weights_.assign(std::size_t(classes_) * (feature_count() + 1), 0.0);
}

void ReferenceModel::check_input(const Image& img) const {
    if (img.height() != height_ || img.width() != width_ || img.channels() != channels_) {
        throw std::invalid_argument("model: input is " + std::to_string(img.height()) + "x" +
                                    std::to_string(img.width()) + "x" + std::to_string(img.channels()) +
                                    ", expected " + std::to_string(height_) + "x" + std::to_string(width_) + "x" +
                                    std::to_string(channels_));
    }
}

std::vector<double> ReferenceModel::features(const Image& img) const {
    check_input(img);
    const int cells_r = height_ / pool_, cells_c = width_ / pool_;
    const double area = static_cast<double>(pool_) * pool_;
    std::vector<double> phi(feature_count() + 1, 0.0);
    for (int cr = 0; cr < cells_r; ++cr) {
        for (int cc = 0; cc < cells_c; ++cc) {
            double* cell = phi.data() + (std::size_t(cr) * cells_c + cc) * channels_;
            for (int r = cr * pool_; r < (cr + 1) * pool_; ++r) {
                for (int c = cc * pool_; c < (cc + 1) * pool_; ++c) {
                    const auto px = img.pixel(r, c);
                    for (int ch = 0; ch < channels_; ++ch) cell[ch] += px[ch];
                }
            }
            for (int ch = 0; ch < channels_; ++ch) cell[ch] /= area;
        }
    }
    phi.back() = 1.0;
    return phi;
}

std::vector<double> ReferenceModel::predict_logits(const Image& img) const {
    const auto phi = features(img);
    const std::size_t stride = phi.size();
    std::vector<double> logits(classes_, 0.0);
    for (int k = 0; k < classes_; ++k) {
        const double* w = weights_.data() + k * stride;
        double acc = 0.0;
        for (std::size_t f = 0; f < stride; ++f) acc += w[f] * phi[f];
        logits[k] = acc;
    }
    return logits;
}

Field ReferenceModel::input_gradient(const Image& img, int cls) const {
    check_input(img);
    if (cls < 0 || cls >= classes_) throw std::invalid_argument("model: class index out of range");
    const int cells_c = width_ / pool_;
    const double area = static_cast<double>(pool_) * pool_;
    const double* w = weights_.data() + std::size_t(cls) * (feature_count() + 1);
    Field grad(height_, width_, channels_);
    for (int r = 0; r < height_; ++r) {
        for (int c = 0; c < width_; ++c) {
            const double* cell = w + (std::size_t(r / pool_) * cells_c + c / pool_) * channels_;
            for (int ch = 0; ch < channels_; ++ch) grad.at(r, c, ch) = cell[ch] / area;
        }
    }
    return grad;
}

SyntheticDataset generate_synthetic(std::uint64_t seed, int num_classes, int per_class, int height, int width,
                                    int channels, const GratingParams& params) {
    if (num_classes < 2) throw std::invalid_argument("synthetic: need at least 2 classes");
    if (num_classes > 16) throw std::invalid_argument("synthetic: more than 16 classes is unsupported");
    if (per_class < 1) throw std::invalid_argument("synthetic: per_class must be >= 1");
    if (channels < 1 || channels > 4) throw std::invalid_argument("synthetic: channels must be in 1..4");

    if (!(params.amplitude >= 0.0) || !(params.noise >= 0.0)) {
        throw std::invalid_argument("synthetic: amplitude and noise must be >= 0");
    }
    constexpr double gains[4] = {1.0, 0.8, 0.6, 0.4};

    Rng rng(seed);
    SyntheticDataset out;
    out.num_classes = num_classes;
    out.seed = seed;
    out.items.reserve(std::size_t(num_classes) * per_class);
    for (int i = 0; i < per_class; ++i) {
        for (int k = 0; k < num_classes; ++k) {
            const double theta = std::numbers::pi * k / num_classes;
            const double wavelength = rng.uniform(14.0, 18.0);
            const double phase = rng.uniform(-0.5, 0.5);
            const double kx = std::cos(theta) * 2.0 * std::numbers::pi / wavelength;
            const double ky = std::sin(theta) * 2.0 * std::numbers::pi / wavelength;
            std::vector<double> data(std::size_t(height) * width * channels);
            std::size_t idx = 0;
            for (int r = 0; r < height; ++r) {
                for (int c = 0; c < width; ++c) {
                    // Centered coordinates keep the grating phase anchored mid-image.
                    const double wave = std::sin(kx * (c - 0.5 * width) + ky * (r - 0.5 * height) + phase);
                    for (int ch = 0; ch < channels; ++ch) {
                        const double v = 0.5 + params.amplitude * gains[ch] * wave + params.noise * rng.normal();
                        data[idx++] = std::clamp(v, 0.0, 1.0);
                    }
                }
            }
            out.items.push_back({Image(height, width, channels, std::move(data)), k});
        }
    }
    return out;
}

ReferenceModel train_reference(const SyntheticDataset& data, const TrainOptions& options, TrainReport* report) {
    if (data.items.empty()) throw std::invalid_argument("train: empty dataset");
    if (options.epochs < 0 || !(options.learning_rate > 0.0)) throw std::invalid_argument("train: bad options");
    const Image& first = data.items.front().image;
    ReferenceModel model(data.num_classes, first.height(), first.width(), first.channels(), options.pool_factor);

    const int K = data.num_classes;
    const std::size_t N = data.items.size();
    std::vector<std::vector<double>> phi(N);
    for (std::size_t i = 0; i < N; ++i) {
        const int y = data.items[i].label;
        if (y < 0 || y >= K) throw std::invalid_argument("train: label out of range");
        phi[i] = model.features(data.items[i].image);
    }
    const std::size_t dim = phi.front().size();
    std::span<double> W = model.weights();
    std::vector<double> grad(W.size());
    std::vector<double> logits(K);

    // Mean cross-entropy and, when `accumulate`, its gradient into `grad`.
    auto evaluate = [&](bool accumulate) {
        double loss = 0.0;
        if (accumulate) std::fill(grad.begin(), grad.end(), 0.0);
        for (std::size_t i = 0; i < N; ++i) {
            for (int k = 0; k < K; ++k) {
                double acc = 0.0;
                for (std::size_t f = 0; f < dim; ++f) acc += W[k * dim + f] * phi[i][f];
                logits[k] = acc;
            }
            const auto p = softmax(logits);
            const int y = data.items[i].label;
            loss -= std::log(std::max(p[y], 1e-300));
            if (!accumulate) continue;
            for (int k = 0; k < K; ++k) {
                const double residual = p[k] - (k == y ? 1.0 : 0.0);
                for (std::size_t f = 0; f < dim; ++f) grad[k * dim + f] += residual * phi[i][f];
            }
        }
        return loss / static_cast<double>(N);
    };

    std::vector<double> history;
    const double scale = options.learning_rate / static_cast<double>(N);
    for (int epoch = 0; epoch < options.epochs; ++epoch) {
        history.push_back(evaluate(true));
        for (std::size_t j = 0; j < W.size(); ++j) W[j] -= scale * grad[j];
    }
    history.push_back(evaluate(false));

    if (report) {
        report->loss_history = std::move(history);
        report->train_accuracy = accuracy(model, data);
    }
    return model;
}

double accuracy(const Classifier& model, const SyntheticDataset& data) {
    if (data.items.empty()) return 0.0;
    std::size_t correct = 0;
    for (const auto& item : data.items) correct += model.predict(item.image) == item.label ? 1 : 0;
    return static_cast<double>(correct) / static_cast<double>(data.items.size());
}

namespace {

constexpr char model_magic[8] = {'V', 'M', 'F', 'G', 'M', 'D', 'L', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
    const auto bits = std::bit_cast<std::uint64_t>(v);
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>(bits >> (8 * i)));
}

class ByteReader {
public:
    explicit ByteReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

    std::uint64_t take(int width) {
        if (pos_ + width > bytes_.size()) throw ParseError("model: truncated file");
        std::uint64_t v = 0;
        for (int i = 0; i < width; ++i) v |= std::uint64_t(bytes_[pos_++]) << (8 * i);
        return v;
    }
    int u32() { return static_cast<int>(take(4)); }
    double f64() { return std::bit_cast<double>(take(8)); }
    bool done() const { return pos_ == bytes_.size(); }

private:
    std::span<const std::uint8_t> bytes_;
    std::size_t pos_ = 0;
};

}  // namespace

std::vector<std::uint8_t> serialize_model(const ReferenceModel& model) {
    std::vector<std::uint8_t> out(std::begin(model_magic), std::end(model_magic));
    put_u32(out, model.num_classes());
    put_u32(out, model.height());
    put_u32(out, model.width());
    put_u32(out, model.channels());
    put_u32(out, model.pool_factor());
    for (double w : model.weights()) put_f64(out, w);
    return out;
}

ReferenceModel deserialize_model(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < sizeof model_magic || std::memcmp(bytes.data(), model_magic, sizeof model_magic) != 0) {
        throw ParseError("model: bad magic");
    }
    ByteReader in(bytes.subspan(sizeof model_magic));
    const int K = in.u32(), h = in.u32(), w = in.u32(), c = in.u32(), pool = in.u32();
    if (K < 1 || K > 4096 || h < 1 || w < 1 || c < 1 || c > 4 || pool < 1 || h > 1 << 16 || w > 1 << 16) {
        throw ParseError("model: implausible header");
    }
    ReferenceModel model(K, h, w, c, pool);
    for (double& v : model.weights()) {
        v = in.f64();
        if (!std::isfinite(v)) throw ParseError("model: non-finite weight");
    }
    if (!in.done()) throw ParseError("model: trailing bytes");
    return model;
}

}  // namespace vmfguard
