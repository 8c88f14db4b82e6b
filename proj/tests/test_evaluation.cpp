#include <doctest.h>

#include <algorithm>
#include <tuple>

#include "oracles.hpp"
#include "vmfguard/evaluation.hpp"

using namespace vmfguard;

namespace {

/// Always answers `cls`.
class ConstantModel final : public Classifier {
public:
    ConstantModel(int k, int cls) : k_(k), cls_(cls) {}
    int num_classes() const override { return k_; }
    std::vector<double> predict_logits(const Image&) const override {
        std::vector<double> l(k_, 0.0);
        l[cls_] = 1.0;
        return l;
    }
    Field input_gradient(const Image& img, int) const override {
        return Field(img.height(), img.width(), img.channels());
    }

private:
    int k_, cls_;
};

const ReferenceModel& trained_model() {
    static const ReferenceModel model = train_reference(generate_synthetic(7, 4, 25, 32, 32), TrainOptions{});
    return model;
}

AblationSet set_of(std::vector<Image> images) {
    AblationSet set;
    for (auto& img : images) set.members.push_back({RetainedRegion{}, std::move(img)});
    return set;
}

}  // namespace

TEST_CASE("clean accuracy examples") {
    const auto set = set_of({Image(2, 2, 1, 0.1), Image(2, 2, 1, 0.2), Image(2, 2, 1, 0.3)});
    const auto all = clean_accuracy(ConstantModel(3, 1), set, 1);
    CHECK(all.accuracy_pct == 100.0);
    CHECK(all.vote.counts == std::vector<int>{0, 3, 0});
    CHECK(all.vote.n == 3);
    CHECK(clean_accuracy(ConstantModel(3, 2), set, 1).accuracy_pct == 0.0);
    CHECK_THROWS_AS(clean_accuracy(ConstantModel(3, 2), AblationSet{}, 1), std::invalid_argument);
    CHECK_THROWS_AS(clean_accuracy(ConstantModel(3, 2), set, 3), std::invalid_argument);
}

TEST_CASE("clean accuracy on hand-built members") {
    // One pooling cell, one channel: logit_1 - logit_0 = x - 0.5.
    ReferenceModel model(2, 2, 2, 1, 2);
    auto w = model.weights();
    w[0] = 0.0, w[1] = 0.0;   // class 0
    w[2] = 1.0, w[3] = -0.5;  // class 1
    const auto set = set_of({Image(2, 2, 1, 0.9), Image(2, 2, 1, 0.7), Image(2, 2, 1, 0.2), Image(2, 2, 1, 0.6)});
    for (const auto& m : set.members) CHECK(model.predict(m.image) == (m.image.at(0, 0, 0) > 0.5 ? 1 : 0));
    const auto res = clean_accuracy(model, set, 1);
    CHECK(res.accuracy_pct == 75.0);
    CHECK(res.vote.counts == std::vector<int>{1, 3});
}

TEST_CASE("certification examples") {
    CHECK(robust_certified({{10, 0}, 10}, 0, 0.0));
    CHECK_FALSE(robust_certified({{6, 5}, 11}, 0, 0.1));
    CHECK(robust_certified({{9, 2}, 11}, 0, 0.1));
    for (double delta : {0.0, 0.05, 0.3}) CHECK_FALSE(robust_certified({{4, 4, 0}, 8}, 0, delta));
}

TEST_CASE("certification matches the brute-force margin rule") {
    for (int K = 2; K <= 3; ++K) {
        for (int n = 1; n <= 8; ++n) {
            std::vector<int> counts(K, 0);
            // Enumerate every histogram of n votes over K classes.
            auto visit = [&](auto&& self, int k, int left) -> void {
                if (k == K - 1) {
                    counts[k] = left;
                    for (int c = 0; c < K; ++c) {
                        for (double delta : {0.0, 0.05, 0.2}) {
                            const AblationVote vote{counts, n};
                            const bool got = robust_certified(vote, c, delta);
                            CHECK(got == oracle::certified(counts, c, delta));
                            if (got) CHECK(vote.top() == c);
                        }
                    }
                    return;
                }
                for (int v = 0; v <= left; ++v) {
                    counts[k] = v;
                    self(self, k + 1, left - v);
                }
            };
            visit(visit, 0, n);
        }
    }
}

TEST_CASE("certification is monotone in delta") {
    Rng rng(9);
    for (int trial = 0; trial < 500; ++trial) {
        std::vector<int> counts(3);
        int n = 0;
        for (int& c : counts) n += c = rng.index(20);
        if (n == 0) continue;
        const AblationVote vote{counts, n};
        const double d1 = rng.uniform(0.0, 0.5), d2 = rng.uniform(0.0, d1);
        if (robust_certified(vote, 0, d1)) CHECK(robust_certified(vote, 0, d2));
    }
}

TEST_CASE("labels parse and print") {
    for (Defense d : {Defense::none, Defense::classic_vmf, Defense::smoothed_only, Defense::filtered}) {
        CHECK(parse_defense(to_string(d)) == d);
    }
    CHECK(to_string(Defense::classic_vmf) == "classic-vmf");
    CHECK_THROWS_AS(parse_defense("vit"), std::invalid_argument);
    CHECK(parse_pipeline_order("smooth-first") == PipelineOrder::ablate_then_filter);
    CHECK_THROWS_AS(parse_pipeline_order("both"), std::invalid_argument);
    CHECK(table_attack_rows().size() == 7);
    CHECK(pick_target(0, 0, 4) == 1);
    CHECK(pick_target(0, 1, 4) == 2);
    CHECK(pick_target(3, 0, 4) == 1);
    CHECK(pick_target(0, 1, 2) == -1);
}

TEST_CASE("certification delta uses the union bound") {
    const AblationSpec spec;  // bands of width 4 on 32 columns
    CHECK(certification_delta(spec, 32, 32, 3, 1) == delta_band(32, 32, 3, 4));
    CHECK(certification_delta(spec, 32, 32, 3, 2) == 2 * delta_band(32, 32, 3, 4));
    CHECK(certification_delta(spec, 32, 32, 3, 4) == 0.75);
    CHECK(certification_delta(spec, 32, 32, 10, 4) == 1.0);
}

TEST_CASE("undefended pipeline on clean images equals plain accuracy") {
    const auto& model = trained_model();
    const auto data = generate_synthetic(8, 4, 3, 32, 32);
    SweepConfig cfg;
    for (const auto& it : data.items) {
        const auto rec = evaluate_defense(model, it.image, it.label, Defense::none, cfg, 3, 1);
        CHECK(rec.n_ablations == 32);
        CHECK(rec.clean == (model.predict(it.image) == it.label ? 100.0 : 0.0));
        CHECK(rec.delta == 1.0);
        CHECK_FALSE(rec.robust);
    }
}

TEST_CASE("report round trip") {
    CHECK(write_report({}) == "image_id,attack_n,attack_pct,defense,clean,robust,n_ablations,delta\n");
    EvalRecord r;
    r.image_id = 3;
    r.attack_n = 2;
    r.attack_pct = 1;
    r.defense = Defense::smoothed_only;
    r.clean = 100.0 / 3.0;
    r.robust = true;
    r.n_ablations = 32;
    r.delta = 0.1 + 0.2;
    const std::string one = write_report({r});
    CHECK(std::count(one.begin(), one.end(), '\n') == 2);
    CHECK(one.find('\r') == std::string::npos);
    const auto back = parse_report(one);
    REQUIRE(back.size() == 1);
    CHECK(back[0] == r);
    CHECK(write_report(back) == one);
    CHECK_THROWS_AS(parse_report("nope\n"), ParseError);
    CHECK_THROWS_AS(parse_report(one + "1,2,3\n"), ParseError);
}

TEST_CASE("sweep is deterministic, sorted and summarized") {
    const auto& model = trained_model();
    const auto data = generate_synthetic(8, 4, 1, 32, 32);
    SweepConfig cfg;
    cfg.attacks = {{0, 0}, {1, 1}, {4, 1}};
    cfg.filter.scales = {3};
    const auto a = run_sweep(data, model, cfg);
    const auto b = run_sweep(data, model, cfg);
    REQUIRE(a.size() == 4 * 3 * 4);
    CHECK(write_report(a) == write_report(b));
    for (std::size_t i = 1; i < a.size(); ++i) {
        CHECK(std::tie(a[i - 1].image_id, a[i - 1].attack_n, a[i - 1].attack_pct, a[i - 1].defense) <
              std::tie(a[i].image_id, a[i].attack_n, a[i].attack_pct, a[i].defense));
    }
    for (const auto& r : a) {
        if (r.robust) CHECK(r.vote.top() == r.true_class);
    }
    const auto summary = summarize(a);
    CHECK(summary.size() == 3 * 4);
    for (const auto& s : summary) CHECK(s.images == 4);
    CHECK(write_summary(summary).rfind("attack_n,attack_pct,defense,mean_clean,robust_pct,images\n", 0) == 0);
}

TEST_CASE("swapping filter and smoothing changes the outcome") {
    const auto& model = trained_model();
    const auto data = generate_synthetic(8, 4, 1, 32, 32);
    SweepConfig cfg;
    cfg.attacks = {{1, 2}};
    cfg.defenses = {Defense::filtered};
    const auto first = run_sweep(data, model, cfg);
    cfg.order = PipelineOrder::ablate_then_filter;
    const auto second = run_sweep(data, model, cfg);
    CHECK(write_report(first) != write_report(second));
}

TEST_CASE("sweep rejects an empty dataset") {
    CHECK_THROWS_AS(run_sweep(SyntheticDataset{}, trained_model(), SweepConfig{}), std::invalid_argument);
}
