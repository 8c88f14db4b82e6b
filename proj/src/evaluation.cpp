#include "vmfguard/evaluation.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <map>
#include <sstream>
#include <tuple>

namespace vmfguard {

int AblationVote::top() const {
    return static_cast<int>(std::max_element(counts.begin(), counts.end()) - counts.begin());
}

CleanResult clean_accuracy(const Classifier& model, const AblationSet& ablations, int true_class) {
    if (ablations.members.empty()) throw std::invalid_argument("clean_accuracy: empty ablation set");
    const int K = model.num_classes();
    if (true_class < 0 || true_class >= K) throw std::invalid_argument("clean_accuracy: class out of range");

    CleanResult out;
    out.vote.counts.assign(K, 0);
    out.vote.n = static_cast<int>(ablations.members.size());
    for (const auto& member : ablations.members) ++out.vote.counts[model.predict(member.image)];
    out.accuracy_pct = 100.0 * out.vote.counts[true_class] / out.vote.n;
    return out;
}

bool robust_certified(const AblationVote& vote, int true_class, double delta) {
    int runner_up = 0;
    for (std::size_t k = 0; k < vote.counts.size(); ++k) {
        if (static_cast<int>(k) != true_class) runner_up = std::max(runner_up, vote.counts[k]);
    }
    return vote.counts[true_class] - runner_up > 2.0 * delta * vote.n;
}

std::string to_string(Defense defense) {
    switch (defense) {
        case Defense::none: return "none";
        case Defense::classic_vmf: return "classic-vmf";
        case Defense::smoothed_only: return "smoothed-only";
        case Defense::filtered: return "filtered";
    }
    return "none";
}

Defense parse_defense(const std::string& text) {
    for (Defense d : {Defense::none, Defense::classic_vmf, Defense::smoothed_only, Defense::filtered}) {
        if (to_string(d) == text) return d;
    }
    throw std::invalid_argument("defense must be none|classic-vmf|smoothed-only|filtered, got '" + text + "'");
}

std::string to_string(PipelineOrder order) {
    return order == PipelineOrder::filter_then_ablate ? "filter-first" : "smooth-first";
}

PipelineOrder parse_pipeline_order(const std::string& text) {
    if (text == "filter-first") return PipelineOrder::filter_then_ablate;
    if (text == "smooth-first") return PipelineOrder::ablate_then_filter;
    throw std::invalid_argument("order must be filter-first|smooth-first, got '" + text + "'");
}

std::vector<AttackCell> table_attack_rows() { return {{1, 1}, {2, 1}, {1, 2}, {3, 1}, {1, 3}, {4, 1}, {1, 4}}; }

bool EvalRecord::operator==(const EvalRecord& other) const {
    return std::tie(image_id, attack_n, attack_pct, defense, clean, robust, n_ablations, delta) ==
           std::tie(other.image_id, other.attack_n, other.attack_pct, other.defense, other.clean, other.robust,
                    other.n_ablations, other.delta);
}

double certification_delta(const AblationSpec& spec, int height, int width, int patch_side, int patches) {
    return std::min(1.0, patches * delta_for(spec, height, width, patch_side));
}

namespace {

Image filter_image(const Image& img, Defense defense, const SweepConfig& cfg) {
    switch (defense) {
        case Defense::filtered: return smart_vmf(img, nullptr, cfg.filter);
        case Defense::classic_vmf: return classic_vmf(img, cfg.classic_side);
        default: return img;
    }
}

}  // namespace

EvalRecord evaluate_defense(const Classifier& model, const Image& img, int true_class, Defense defense,
                            const SweepConfig& cfg, int patch_side, int patches) {
    // The undefended pipeline still votes, over full-width bands that each
    // keep the whole image.
    AblationSpec spec = cfg.ablation;
    if (defense == Defense::none) spec = AblationSpec{AblationKind::band, img.width(), 1, cfg.ablation.fill};

    AblationSet set;
    if (cfg.order == PipelineOrder::filter_then_ablate || defense == Defense::none ||
        defense == Defense::smoothed_only) {
        set = generate_ablations(filter_image(img, defense, cfg), spec, patch_side);
    } else {
        set = generate_ablations(img, spec, patch_side);
        for (auto& member : set.members) member.image = filter_image(member.image, defense, cfg);
    }

    const CleanResult clean = clean_accuracy(model, set, true_class);
    EvalRecord rec;
    rec.true_class = true_class;
    rec.defense = defense;
    rec.clean = clean.accuracy_pct;
    rec.n_ablations = static_cast<int>(set.n());
    rec.delta = certification_delta(spec, img.height(), img.width(), patch_side, patches);
    rec.robust = robust_certified(clean.vote, true_class, rec.delta);
    rec.vote = clean.vote;
    return rec;
}

int pick_target(int true_class, int predicted, int num_classes) {
    for (int offset = 1; offset < num_classes; ++offset) {
        const int k = (true_class + offset) % num_classes;
        if (k != predicted) return k;
    }
    return -1;
}

namespace {

void check_record(const EvalRecord& rec) {
    int total = 0;
    for (int c : rec.vote.counts) total += c;
    if (total != rec.vote.n || rec.vote.n != rec.n_ablations) {
        throw InvariantViolation("vote counts do not sum to the ablation count");
    }
    if (rec.robust && rec.vote.top() != rec.true_class) {
        throw InvariantViolation("certified record whose majority is not the true class");
    }
    if (!(rec.clean >= 0.0 && rec.clean <= 100.0) || !(rec.delta >= 0.0 && rec.delta <= 1.0)) {
        throw InvariantViolation("clean accuracy or delta out of range");
    }
}

void dump_cell(const SweepConfig& cfg, int id, AttackCell cell, const Image& attacked) {
    const std::filesystem::path dir = cfg.dump_dir;
    const std::string stem = "img" + std::to_string(id) + "_n" + std::to_string(cell.patches) + "_p" +
                             std::to_string(cell.percent);
    write_ppm(dir / (stem + "_attacked.ppm"), attacked);
    write_ppm(dir / (stem + "_filtered.ppm"), smart_vmf(attacked, nullptr, cfg.filter));
}

}  // namespace

std::vector<EvalRecord> run_sweep(const SyntheticDataset& data, const Classifier& model, const SweepConfig& cfg) {
    if (data.items.empty()) throw std::invalid_argument("sweep: empty dataset");
    cfg.filter.validate();
    std::vector<AttackCell> cells = cfg.attacks;
    if (cells.empty()) {
        cells.push_back({0, 0});
        for (const auto& row : table_attack_rows()) cells.push_back(row);
    }

    const int count = static_cast<int>(data.items.size());
    std::vector<std::vector<EvalRecord>> per_image(count);
    std::string failure;

#pragma omp parallel for schedule(dynamic, 1)
    for (int id = 0; id < count; ++id) {
        try {
            const Image& img = data.items[id].image;
            const int label = data.items[id].label;
            const int predicted = model.predict(img);
            std::vector<EvalRecord> out;
            for (const AttackCell cell : cells) {
                // The unattacked row is certified against one 1% patch.
                const AttackCell threat = cell.attacked() ? cell : AttackCell{1, 1};
                AttackConfig acfg = cfg.attack;
                acfg.patches = threat.patches;
                acfg.area_fraction = threat.percent / 100.0;
                const int side = acfg.patch_side(img.height(), img.width());

                Image attacked = img;
                const int target = pick_target(label, predicted, model.num_classes());
                if (cell.attacked() && target >= 0) {
                    acfg.target_class = target;
                    attacked = train_lavan_corners(img, model, acfg).adversarial;
                }
                if (!cfg.dump_dir.empty()) dump_cell(cfg, id, cell, attacked);
                for (const Defense defense : cfg.defenses) {
                    EvalRecord rec = evaluate_defense(model, attacked, label, defense, cfg, side, threat.patches);
                    rec.image_id = id;
                    rec.attack_n = cell.patches;
                    rec.attack_pct = cell.percent;
                    check_record(rec);
                    out.push_back(std::move(rec));
                }
            }
            per_image[id] = std::move(out);
        } catch (const std::exception& e) {
#pragma omp critical
            if (failure.empty()) failure = e.what();
        }
    }
    if (!failure.empty()) throw InvariantViolation("sweep failed: " + failure);

    std::vector<EvalRecord> records;
    for (auto& block : per_image) records.insert(records.end(), block.begin(), block.end());
    std::stable_sort(records.begin(), records.end(), [](const EvalRecord& a, const EvalRecord& b) {
        return std::tie(a.image_id, a.attack_n, a.attack_pct, a.defense) <
               std::tie(b.image_id, b.attack_n, b.attack_pct, b.defense);
    });
    return records;
}

namespace {

constexpr const char* report_header = "image_id,attack_n,attack_pct,defense,clean,robust,n_ablations,delta\n";

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

double parse_double(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ParseError("report: bad number '" + s + "'");
    return v;
}

int parse_int(const std::string& s) {
    int v = 0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc{} || res.ptr != s.data() + s.size()) throw ParseError("report: bad integer '" + s + "'");
    return v;
}

}  // namespace

std::string write_report(const std::vector<EvalRecord>& records) {
    std::string out = report_header;
    for (const auto& r : records) {
        out += std::to_string(r.image_id) + ',' + std::to_string(r.attack_n) + ',' + std::to_string(r.attack_pct) +
               ',' + to_string(r.defense) + ',' + format_double(r.clean) + ',' + (r.robust ? "1" : "0") + ',' +
               std::to_string(r.n_ablations) + ',' + format_double(r.delta) + '\n';
    }
    return out;
}

std::vector<EvalRecord> parse_report(const std::string& csv) {
    std::istringstream in(csv);
    std::string line;
    if (!std::getline(in, line) || line + '\n' != report_header) throw ParseError("report: missing header");
    std::vector<EvalRecord> out;
    while (std::getline(in, line)) {
        std::vector<std::string> cols;
        std::stringstream row(line);
        for (std::string cell; std::getline(row, cell, ',');) cols.push_back(cell);
        if (cols.size() != 8) throw ParseError("report: expected 8 columns in '" + line + "'");
        EvalRecord r;
        r.image_id = parse_int(cols[0]);
        r.attack_n = parse_int(cols[1]);
        r.attack_pct = parse_int(cols[2]);
        r.defense = parse_defense(cols[3]);
        r.clean = parse_double(cols[4]);
        r.robust = parse_int(cols[5]) != 0;
        r.n_ablations = parse_int(cols[6]);
        r.delta = parse_double(cols[7]);
        out.push_back(r);
    }
    return out;
}

std::vector<SummaryRow> summarize(const std::vector<EvalRecord>& records) {
    std::map<std::tuple<int, int, Defense>, SummaryRow> cells;
    for (const auto& r : records) {
        SummaryRow& row = cells[{r.attack_n, r.attack_pct, r.defense}];
        row.attack = {r.attack_n, r.attack_pct};
        row.defense = r.defense;
        row.mean_clean += r.clean;
        row.robust_pct += r.robust ? 100.0 : 0.0;
        ++row.images;
    }
    std::vector<SummaryRow> out;
    for (auto& [key, row] : cells) {
        row.mean_clean /= row.images;
        row.robust_pct /= row.images;
        out.push_back(row);
    }
    return out;
}

std::string write_summary(const std::vector<SummaryRow>& rows) {
    std::string out = "attack_n,attack_pct,defense,mean_clean,robust_pct,images\n";
    for (const auto& r : rows) {
        out += std::to_string(r.attack.patches) + ',' + std::to_string(r.attack.percent) + ',' +
               to_string(r.defense) + ',' + format_double(r.mean_clean) + ',' + format_double(r.robust_pct) + ',' +
               std::to_string(r.images) + '\n';
    }
    return out;
}

}  // namespace vmfguard
