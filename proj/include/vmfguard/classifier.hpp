#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "vmfguard/image.hpp"

namespace vmfguard {

/// Differentiable classifier consumed by the attack and the evaluation.
class Classifier {
public:
    virtual ~Classifier() = default;

    virtual int num_classes() const = 0;
    virtual std::vector<double> predict_logits(const Image& img) const = 0;
    /// ∂ logit_cls / ∂ x for every input element.
    virtual Field input_gradient(const Image& img, int cls) const = 0;

    int predict(const Image& img) const;
};

std::vector<double> softmax(std::span<const double> logits);
int argmax(std::span<const double> values);

/// Multinomial logistic regression on average-pooled pixels:
/// logits = W · [pool(x), 1].
class ReferenceModel final : public Classifier {
public:
    ReferenceModel() = default;
    ReferenceModel(int num_classes, int height, int width, int channels, int pool_factor);

    int num_classes() const override { return classes_; }
    std::vector<double> predict_logits(const Image& img) const override;
    Field input_gradient(const Image& img, int cls) const override;

    int height() const { return height_; }
    int width() const { return width_; }
    int channels() const { return channels_; }
    int pool_factor() const { return pool_; }
    /// Pooled feature length D (bias excluded).
    int feature_count() const { return (height_ / pool_) * (width_ / pool_) * channels_; }

    /// Row-major K x (D+1); the last column is the bias.
    std::span<const double> weights() const { return weights_; }
    std::span<double> weights() { return weights_; }

    /// Pooled features with the trailing 1.
    std::vector<double> features(const Image& img) const;

    bool operator==(const ReferenceModel& other) const {
        return classes_ == other.classes_ && height_ == other.height_ && width_ == other.width_ &&
               channels_ == other.channels_ && pool_ == other.pool_ && weights_ == other.weights_;
    }

private:
    void check_input(const Image& img) const;

    int classes_ = 0;
    int height_ = 0;
    int width_ = 0;
    int channels_ = 0;
    int pool_ = 1;
    std::vector<double> weights_;
};

struct LabeledImage {
    Image image;
    int label = 0;
};

struct SyntheticDataset {
    std::vector<LabeledImage> items;
    int num_classes = 0;
    std::uint64_t seed = 0;
};

struct GratingParams {
    /// Peak grating deviation from mid-gray, scaled per channel by 1, .8, .6, .4.
    /// Low contrast keeps the class evidence small relative to what a
    /// 10%-area patch can change.
    double amplitude = 0.02;
    double noise = 0.08;  // per-element Gaussian std
};

/// Oriented gratings, one orientation per class, with phase/wavelength
/// jitter and pixel noise. Items are interleaved by class.
SyntheticDataset generate_synthetic(std::uint64_t seed, int num_classes, int per_class, int height, int width,
                                    int channels = 3, const GratingParams& params = {});

struct TrainOptions {
    int epochs = 10000;
    double learning_rate = 0.1;
    int pool_factor = 4;
};

struct TrainReport {
    std::vector<double> loss_history;  // loss before each epoch's update, then the final loss
    double train_accuracy = 0.0;
};

/// Full-batch gradient descent on softmax cross-entropy from zero weights.
ReferenceModel train_reference(const SyntheticDataset& data, const TrainOptions& options,
                               TrainReport* report = nullptr);

double accuracy(const Classifier& model, const SyntheticDataset& data);

std::vector<std::uint8_t> serialize_model(const ReferenceModel& model);
ReferenceModel deserialize_model(std::span<const std::uint8_t> bytes);

}  // namespace vmfguard
