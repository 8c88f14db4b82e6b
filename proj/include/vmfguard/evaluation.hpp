#pragma once

#include <stdexcept>
#include <string>
#include <vector>

#include "vmfguard/ablation.hpp"
#include "vmfguard/adversary.hpp"
#include "vmfguard/classifier.hpp"
#include "vmfguard/smart_vmf.hpp"

namespace vmfguard {

/// Raised when a sweep observes a broken invariant (CLI exit code 2).
class InvariantViolation : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

struct AblationVote {
    std::vector<int> counts;
    int n = 0;

    /// Lowest index wins ties.
    int top() const;
};

struct CleanResult {
    double accuracy_pct = 0.0;
    AblationVote vote;
};

/// Percentage of ablation members classified as `true_class`, plus the
/// full vote histogram.
CleanResult clean_accuracy(const Classifier& model, const AblationSet& ablations, int true_class);

/// count_c > max_{c'≠c} count_c' + 2·delta·n. Ties never certify.
bool robust_certified(const AblationVote& vote, int true_class, double delta);

enum class Defense { none, classic_vmf, smoothed_only, filtered };

std::string to_string(Defense defense);
Defense parse_defense(const std::string& text);

enum class PipelineOrder { filter_then_ablate, ablate_then_filter };

std::string to_string(PipelineOrder order);
PipelineOrder parse_pipeline_order(const std::string& text);

/// One attack setting: `patches` corner patches each covering `percent`% of
/// the image. patches == 0 is the unattacked row.
struct AttackCell {
    int patches = 0;
    int percent = 0;

    bool attacked() const { return patches > 0; }
    auto operator<=>(const AttackCell&) const = default;
};

/// The seven (count, size%) rows of the benchmark table, in table order.
std::vector<AttackCell> table_attack_rows();

struct SweepConfig {
    FilterConfig filter;
    AblationSpec ablation;
    AttackConfig attack;  // target_class, area_fraction and patches are set per cell
    std::vector<Defense> defenses{Defense::none, Defense::classic_vmf, Defense::smoothed_only, Defense::filtered};
    std::vector<AttackCell> attacks;  // empty: unattacked row plus the seven table rows
    int classic_side = 3;
    PipelineOrder order = PipelineOrder::filter_then_ablate;
    /// When set, attacked and filtered PPMs are written here per image and cell.
    std::string dump_dir;
};

struct EvalRecord {
    int image_id = 0;
    int true_class = 0;
    int attack_n = 0;
    int attack_pct = 0;
    Defense defense = Defense::none;
    double clean = 0.0;  // percent of ablations voting for the true class
    bool robust = false;
    int n_ablations = 0;
    double delta = 0.0;
    AblationVote vote;

    bool operator==(const EvalRecord& other) const;
};

/// Δ used for certification: the single-patch bound for side m times the
/// patch count (union bound), capped at 1.
double certification_delta(const AblationSpec& spec, int height, int width, int patch_side, int patches);

/// Runs one defense on an (already attacked) image and scores it.
EvalRecord evaluate_defense(const Classifier& model, const Image& img, int true_class, Defense defense,
                            const SweepConfig& cfg, int patch_side, int patches);

/// Every image x attack cell x defense, sorted by (image, attack, defense).
std::vector<EvalRecord> run_sweep(const SyntheticDataset& data, const Classifier& model, const SweepConfig& cfg);

/// Target class for the attack on an image of class `true_class` currently
/// predicted as `predicted`; -1 if no class other than those two exists.
int pick_target(int true_class, int predicted, int num_classes);

std::string write_report(const std::vector<EvalRecord>& records);
/// Parses a report produced by write_report (vote histograms are not stored).
std::vector<EvalRecord> parse_report(const std::string& csv);

struct SummaryRow {
    AttackCell attack;
    Defense defense = Defense::none;
    double mean_clean = 0.0;
    double robust_pct = 0.0;
    int images = 0;
};

std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records);
std::string write_summary(const std::vector<SummaryRow>& rows);

}  // namespace vmfguard
