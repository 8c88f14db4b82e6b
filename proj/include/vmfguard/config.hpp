#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "vmfguard/ablation.hpp"
#include "vmfguard/adversary.hpp"
#include "vmfguard/classifier.hpp"
#include "vmfguard/evaluation.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace vmfguard {

/// Bad key, bad value or failed validation. The message names the key.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Everything a CLI run can be configured with. Paths that are empty mean
/// "not given".
struct RunConfig {
    std::uint64_t seed = 7;

    FilterConfig filter;
    std::string attention;  // PGM saliency map for the filter

    AblationSpec ablation;
    AttackConfig attack;

    // Reference model and synthetic data.
    int classes = 4;
    int per_class = 25;
    int image_size = 32;
    int eval_per_class = 5;  // held-out images per class for sweeps
    TrainOptions train;
    std::string model;  // serialized model; empty trains one from `seed`

    int label = -1;  // true class for evaluate; -1 uses the model's prediction
    Defense defense = Defense::filtered;
    PipelineOrder order = PipelineOrder::filter_then_ablate;
    int classic_side = 3;

    std::string dump;
    int threads = 0;  // 0 leaves the OpenMP default
};

/// Canonical key order.
const std::vector<std::string>& config_keys();

bool is_config_key(const std::string& key);
void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value);
std::string get_config_value(const RunConfig& cfg, const std::string& key);

/// Applies `key=value` lines on top of `cfg`. Blank lines and `#` comments
/// are skipped; `source` prefixes error messages.
void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source = "config");

/// One `key=value` line per key in canonical order; parses back to `cfg`.
std::string canonical_config(const RunConfig& cfg);

/// Cross-field checks; throws ConfigError.
void validate(const RunConfig& cfg);

}  // namespace vmfguard
