// vmfguard command-line front end: filter, attack, ablate, evaluate, sweep, train.
//
// Exit codes: 0 success, 1 usage or configuration error, 2 runtime failure.

#include <omp.h>

#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "vmfguard/config.hpp"

namespace fs = std::filesystem;
using namespace vmfguard;

namespace {

/// Raised for problems the user can fix by changing the command line.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct Invocation {
    std::string config_file;
    std::map<std::string, std::string> raw;        // key -> flag value
    std::map<std::string, CLI::Option*> options;  // key -> option, to test presence
    std::string input;
    std::string output;
    std::string spec;
    std::string summary;
};

std::string dashed(std::string key) {
    for (char& ch : key) {
        if (ch == '_') ch = '-';
    }
    return key;
}

bool is_flag_key(const std::string& key) {
    return key.rfind("use_", 0) == 0 || key == "alg1_literal_sign" || key == "pin_source";
}

void add_config_options(CLI::App& cmd, Invocation& inv) {
    cmd.add_option("--config", inv.config_file, "key=value config file")->check(CLI::ExistingFile);
    for (const std::string& key : config_keys()) {
        std::string names = "--" + key;
        if (dashed(key) != key) names += ",--" + dashed(key);
        if (key == "dump") names += ",--dump-ablations";
        std::string& slot = inv.raw[key];
        CLI::Option* opt = is_flag_key(key) ? cmd.add_flag(names + "{true}", slot, "config key " + key)
                                            : cmd.add_option(names, slot, "config key " + key);
        inv.options[key] = opt;
    }
}

RunConfig resolve(const Invocation& inv) {
    RunConfig cfg;
    if (!inv.config_file.empty()) {
        const auto bytes = read_file(inv.config_file);
        apply_config_text(cfg, std::string(bytes.begin(), bytes.end()), inv.config_file);
    }
    for (const auto& [key, opt] : inv.options) {
        if (opt->count() > 0) set_config_value(cfg, key, inv.raw.at(key));
    }
    validate(cfg);
    std::cerr << canonical_config(cfg);
    return cfg;
}

void require_input(const std::string& path) {
    if (!fs::is_regular_file(path)) throw UsageError("input file not found: " + path);
}

void require_output_parent(const std::string& path) {
    const fs::path parent = fs::path(path).parent_path();
    if (!parent.empty() && !fs::is_directory(parent)) {
        throw UsageError("output directory does not exist: " + parent.string());
    }
}

void write_text(const fs::path& path, const std::string& text) {
    write_file(path, std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

void prepare_dump(const RunConfig& cfg) {
    if (cfg.dump.empty()) return;
    fs::create_directories(cfg.dump);
    write_text(fs::path(cfg.dump) / "config.txt", canonical_config(cfg));
}

ReferenceModel load_or_train(const RunConfig& cfg, TrainReport* report = nullptr) {
    if (!cfg.model.empty()) return deserialize_model(read_file(cfg.model));
    const auto data = generate_synthetic(cfg.seed, cfg.classes, cfg.per_class, cfg.image_size, cfg.image_size);
    return train_reference(data, cfg.train, report);
}

int run_filter(const Invocation& inv, const RunConfig& cfg) {
    const Image img = read_image(inv.input);
    AttentionMap attention;
    if (!cfg.attention.empty()) {
        attention = AttentionMap::from_image(read_image(cfg.attention));
        if (!attention.matches(img)) throw UsageError("attention map size does not match the input image");
    }
    FilterDiagnostics diag;
    const Image out = smart_vmf(img, cfg.attention.empty() ? nullptr : &attention, cfg.filter, &diag);
    write_ppm(inv.output, out);
    if (!cfg.dump.empty()) write_ppm(fs::path(cfg.dump) / "filtered.ppm", out);
    if (diag.max_fusion_error > 1e-12) {
        throw InvariantViolation("fusion weights do not sum to 1 (error " + std::to_string(diag.max_fusion_error) + ")");
    }
    return 0;
}

int run_attack(const Invocation& inv, const RunConfig& cfg) {
    const Image img = read_image(inv.input);
    const ReferenceModel model = load_or_train(cfg);
    if (cfg.attack.target_class >= model.num_classes()) throw UsageError("target: class index out of range");
    const AttackResult res = train_lavan_corners(img, model, cfg.attack);

    const std::string prefix = inv.output;
    write_ppm(prefix + ".attacked.ppm", res.adversarial);
    for (std::size_t k = 0; k < res.patch.contents.size(); ++k) {
        write_ppm(prefix + ".patch" + std::to_string(k) + ".ppm", res.patch.contents[k]);
    }

    std::ostringstream trace;
    trace.precision(17);
    trace << "iteration,target_prob,predicted,objective\n";
    for (const auto& row : res.trace) {
        trace << row.iteration << ',' << row.target_prob << ',' << row.predicted << ',' << row.objective << '\n';
    }
    write_text(prefix + ".trace.csv", trace.str());

    std::ostringstream manifest;
    manifest.precision(17);
    manifest << "success=" << (res.success ? "true" : "false") << '\n'
             << "source_class=" << res.source_class << '\n'
             << "target_class=" << cfg.attack.target_class << '\n'
             << "iterations=" << res.trace.back().iteration << '\n'
             << "final_target_prob=" << res.trace.back().target_prob << '\n'
             << "side=" << res.patch.side << '\n';
    for (std::size_t k = 0; k < res.patch.placements.size(); ++k) {
        manifest << "placement" << k << '=' << res.patch.placements[k].row << ',' << res.patch.placements[k].col
                 << '\n';
    }
    manifest << "# resolved config\n";
    std::istringstream lines(canonical_config(cfg));
    for (std::string line; std::getline(lines, line);) manifest << "# " << line << '\n';
    write_text(prefix + ".manifest.txt", manifest.str());

    if (!cfg.dump.empty()) write_ppm(fs::path(cfg.dump) / "delta.ppm", res.delta);
    std::cout << (res.success ? "success" : "failure") << " after " << res.trace.back().iteration
              << " iterations, target prob " << res.trace.back().target_prob << '\n';
    return 0;
}

AblationSpec parse_spec(const std::string& text, AblationSpec base) {
    if (text.empty()) return base;
    std::vector<std::string> parts;
    std::stringstream in(text);
    for (std::string part; std::getline(in, part, ':');) parts.push_back(part);
    if (parts.empty() || parts.size() > 3) throw UsageError("--spec must be kind[:size[:stride]]");
    RunConfig scratch;
    try {
        set_config_value(scratch, "ablation_kind", parts[0]);
        if (parts.size() > 1) set_config_value(scratch, "ablation_size", parts[1]);
        if (parts.size() > 2) set_config_value(scratch, "ablation_stride", parts[2]);
    } catch (const ConfigError& e) {
        throw UsageError(std::string("--spec: ") + e.what());
    }
    base.kind = scratch.ablation.kind;
    if (parts.size() > 1) base.size = scratch.ablation.size;
    if (parts.size() > 2) base.stride = scratch.ablation.stride;
    return base;
}

int run_ablate(const Invocation& inv, const RunConfig& cfg) {
    const Image img = read_image(inv.input);
    const AblationSpec spec = parse_spec(inv.spec, cfg.ablation);
    try {
        spec.validate(img.height(), img.width());
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    const int m = cfg.attack.patch_side(img.height(), img.width());
    const AblationSet set = generate_ablations(img, spec, m);
    if (!cfg.dump.empty()) {
        char name[32];
        for (std::size_t k = 0; k < set.n(); ++k) {
            std::snprintf(name, sizeof name, "ablation_%04zu.ppm", k);
            write_ppm(fs::path(cfg.dump) / name, set.members[k].image);
        }
    }
    std::cout << "kind=" << to_string(spec.kind) << " size=" << spec.resolved_size(img.width())
              << " stride=" << spec.stride << " n=" << set.n() << " delta=" << set.delta << '\n';
    return 0;
}

SweepConfig sweep_config(const RunConfig& cfg) {
    SweepConfig sc;
    sc.filter = cfg.filter;
    sc.ablation = cfg.ablation;
    sc.attack = cfg.attack;
    sc.classic_side = cfg.classic_side;
    sc.order = cfg.order;
    sc.dump_dir = cfg.dump;
    return sc;
}

int run_evaluate(const Invocation& inv, const RunConfig& cfg) {
    const Image img = read_image(inv.input);
    const ReferenceModel model = load_or_train(cfg);
    const int label = cfg.label >= 0 ? cfg.label : model.predict(img);
    if (label >= model.num_classes()) throw UsageError("label: class index out of range");
    const int m = cfg.attack.patch_side(img.height(), img.width());
    const EvalRecord rec = evaluate_defense(model, img, label, cfg.defense, sweep_config(cfg), m, cfg.attack.patches);

    std::cout << "defense=" << to_string(rec.defense) << " label=" << label << " clean=" << rec.clean
              << " robust=" << (rec.robust ? "true" : "false") << " n=" << rec.n_ablations << " delta=" << rec.delta
              << " votes=";
    for (std::size_t k = 0; k < rec.vote.counts.size(); ++k) std::cout << (k ? "," : "") << rec.vote.counts[k];
    std::cout << '\n';
    return 0;
}

int run_sweep_cmd(const Invocation& inv, const RunConfig& cfg) {
    const ReferenceModel model = load_or_train(cfg);
    const auto held_out =
        generate_synthetic(cfg.seed + 1, cfg.classes, cfg.eval_per_class, cfg.image_size, cfg.image_size);
    const auto records = run_sweep(held_out, model, sweep_config(cfg));
    write_text(inv.output, write_report(records));
    const std::string summary = write_summary(summarize(records));
    if (!inv.summary.empty()) write_text(inv.summary, summary);
    std::cout << summary;
    return 0;
}

int run_train(const Invocation& inv, const RunConfig& cfg) {
    TrainReport report;
    const auto data = generate_synthetic(cfg.seed, cfg.classes, cfg.per_class, cfg.image_size, cfg.image_size);
    const ReferenceModel model = train_reference(data, cfg.train, &report);
    write_file(inv.output, serialize_model(model));
    std::ostringstream manifest;
    manifest.precision(17);
    manifest << "train_accuracy=" << report.train_accuracy << '\n'
             << "final_loss=" << report.loss_history.back() << '\n'
             << canonical_config(cfg);
    write_text(inv.output + ".manifest.txt", manifest.str());
    std::cout << "train accuracy " << report.train_accuracy << ", final loss " << report.loss_history.back() << '\n';
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Adaptive vector median filtering, patch attacks and certified smoothing"};
    app.require_subcommand(1);

    Invocation inv;
    auto* filter = app.add_subcommand("filter", "filter an image");
    filter->add_option("input", inv.input, "input PPM/PGM/PNG")->required();
    filter->add_option("output", inv.output, "output PPM/PGM")->required();

    auto* attack = app.add_subcommand("attack", "train a corner patch against the reference model");
    attack->add_option("input", inv.input, "input image")->required();
    attack->add_option("--out", inv.output, "output prefix")->required();

    auto* ablate = app.add_subcommand("ablate", "enumerate the ablation set of an image");
    ablate->add_option("input", inv.input, "input image")->required();
    ablate->add_option("--spec", inv.spec, "kind[:size[:stride]]");

    auto* evaluate = app.add_subcommand("evaluate", "clean and certified accuracy for one image");
    evaluate->add_option("input", inv.input, "input image")->required();

    auto* sweep = app.add_subcommand("sweep", "attack x defense sweep on held-out synthetic images");
    sweep->add_option("--out", inv.output, "CSV report path")->required();
    sweep->add_option("--summary", inv.summary, "per-cell summary CSV path");

    auto* train = app.add_subcommand("train", "train and save the reference model");
    train->add_option("--out", inv.output, "model path")->required();

    // Config keys are registered on every subcommand, each with its own slots.
    std::map<CLI::App*, Invocation> per_cmd;
    for (CLI::App* cmd : {filter, attack, ablate, evaluate, sweep, train}) add_config_options(*cmd, per_cmd[cmd]);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    CLI::App* cmd = app.get_subcommands().front();
    Invocation& shared = per_cmd[cmd];
    shared.input = inv.input;
    shared.output = inv.output;
    shared.spec = inv.spec;
    shared.summary = inv.summary;

    RunConfig cfg;
    try {
        cfg = resolve(shared);
        if (cmd != sweep && cmd != train) require_input(shared.input);
        if (!shared.output.empty()) require_output_parent(shared.output);
        if (!shared.summary.empty()) require_output_parent(shared.summary);
        if (!cfg.model.empty()) require_input(cfg.model);
        if (!cfg.attention.empty()) require_input(cfg.attention);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    }

    try {
        if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
        prepare_dump(cfg);
        if (cmd == filter) return run_filter(shared, cfg);
        if (cmd == attack) return run_attack(shared, cfg);
        if (cmd == ablate) return run_ablate(shared, cfg);
        if (cmd == evaluate) return run_evaluate(shared, cfg);
        if (cmd == sweep) return run_sweep_cmd(shared, cfg);
        return run_train(shared, cfg);
    } catch (const UsageError& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return 2;
    }
}
