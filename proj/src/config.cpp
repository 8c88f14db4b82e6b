#include "vmfguard/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <functional>
#include <sstream>

namespace vmfguard {

namespace {

std::string fmt(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

std::string fmt(bool v) { return v ? "true" : "false"; }

template <typename Int>
Int parse_integer(const std::string& key, const std::string& text) {
    Int v{};
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size()) {
        throw ConfigError(key + ": expected an integer, got '" + text + "'");
    }
    return v;
}

double parse_real(const std::string& key, const std::string& text) {
    double v = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || res.ec != std::errc{} || res.ptr != text.data() + text.size() || !std::isfinite(v)) {
        throw ConfigError(key + ": expected a finite number, got '" + text + "'");
    }
    return v;
}

bool parse_flag(const std::string& key, const std::string& text) {
    if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
    if (text == "false" || text == "0" || text == "no" || text == "off") return false;
    throw ConfigError(key + ": expected true or false, got '" + text + "'");
}

std::vector<int> parse_scales(const std::string& key, const std::string& text) {
    std::vector<int> out;
    std::stringstream in(text);
    for (std::string item; std::getline(in, item, ',');) out.push_back(parse_integer<int>(key, item));
    if (out.empty()) throw ConfigError(key + ": expected a comma-separated list of odd sides");
    return out;
}

template <typename Fn>
auto wrap(const std::string& key, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(key + ": " + e.what());
    }
}

struct Entry {
    std::string key;
    std::function<void(RunConfig&, const std::string&, const std::string&)> set;
    std::function<std::string(const RunConfig&)> get;
};

#define INT_FIELD(name, member)                                                                              \
    Entry {                                                                                                  \
        name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_integer<int>(k, v); }, \
            [](const RunConfig& c) { return std::to_string(c.member); }                                      \
    }
#define REAL_FIELD(name, member)                                                                          \
    Entry {                                                                                               \
        name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_real(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                              \
    }
#define FLAG_FIELD(name, member)                                                                          \
    Entry {                                                                                               \
        name, [](RunConfig& c, const std::string& k, const std::string& v) { c.member = parse_flag(k, v); }, \
            [](const RunConfig& c) { return fmt(c.member); }                                              \
    }
#define PATH_FIELD(name, member)                                                                    \
    Entry {                                                                                         \
        name, [](RunConfig& c, const std::string&, const std::string& v) { c.member = v; },        \
            [](const RunConfig& c) { return c.member; }                                             \
    }

const std::vector<Entry>& entries() {
    static const std::vector<Entry> table{
        {"seed", [](RunConfig& c, const std::string& k, const std::string& v) { c.seed = parse_integer<std::uint64_t>(k, v); },
         [](const RunConfig& c) { return std::to_string(c.seed); }},
        {"scales", [](RunConfig& c, const std::string& k, const std::string& v) { c.filter.scales = parse_scales(k, v); },
         [](const RunConfig& c) {
             std::string out;
             for (int s : c.filter.scales) out += (out.empty() ? "" : ",") + std::to_string(s);
             return out;
         }},
        REAL_FIELD("sigma_c", filter.sigma_c),
        {"sigma_p",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             if (v == "auto") c.filter.sigma_p.reset();
             else c.filter.sigma_p = parse_real(k, v);
         },
         [](const RunConfig& c) { return c.filter.sigma_p ? fmt(*c.filter.sigma_p) : std::string("auto"); }},
        REAL_FIELD("lambda", filter.lambda),
        REAL_FIELD("tau", filter.tau),
        INT_FIELD("max_iters", filter.max_iters),
        REAL_FIELD("epsilon", filter.epsilon),
        FLAG_FIELD("use_content", filter.use_content),
        FLAG_FIELD("use_spatial", filter.use_spatial),
        FLAG_FIELD("use_attention", filter.use_attention),
        {"fusion",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.filter.fusion = wrap(k, [&] { return parse_fusion_mode(v); });
         },
         [](const RunConfig& c) { return to_string(c.filter.fusion); }},
        PATH_FIELD("attention", attention),
        {"ablation_kind",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ablation.kind = wrap(k, [&] { return parse_ablation_kind(v); });
         },
         [](const RunConfig& c) { return to_string(c.ablation.kind); }},
        {"ablation_size",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.ablation.size = v == "auto" ? 0 : parse_integer<int>(k, v);
         },
         [](const RunConfig& c) { return c.ablation.size > 0 ? std::to_string(c.ablation.size) : std::string("auto"); }},
        INT_FIELD("ablation_stride", ablation.stride),
        REAL_FIELD("ablation_fill", ablation.fill),
        INT_FIELD("target", attack.target_class),
        REAL_FIELD("target_prob", attack.target_prob),
        REAL_FIELD("attack_step", attack.step),
        INT_FIELD("attack_iters", attack.max_iters),
        REAL_FIELD("area_fraction", attack.area_fraction),
        INT_FIELD("patches", attack.patches),
        FLAG_FIELD("alg1_literal_sign", attack.literal_sign),
        FLAG_FIELD("pin_source", attack.pin_source),
        INT_FIELD("classes", classes),
        INT_FIELD("per_class", per_class),
        INT_FIELD("image_size", image_size),
        INT_FIELD("eval_per_class", eval_per_class),
        INT_FIELD("epochs", train.epochs),
        REAL_FIELD("lr", train.learning_rate),
        INT_FIELD("pool_factor", train.pool_factor),
        PATH_FIELD("model", model),
        {"label",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.label = v == "auto" ? -1 : parse_integer<int>(k, v);
         },
         [](const RunConfig& c) { return c.label >= 0 ? std::to_string(c.label) : std::string("auto"); }},
        {"defense",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.defense = wrap(k, [&] { return parse_defense(v); });
         },
         [](const RunConfig& c) { return to_string(c.defense); }},
        {"order",
         [](RunConfig& c, const std::string& k, const std::string& v) {
             c.order = wrap(k, [&] { return parse_pipeline_order(v); });
         },
         [](const RunConfig& c) { return to_string(c.order); }},
        INT_FIELD("classic_side", classic_side),
        PATH_FIELD("dump", dump),
        INT_FIELD("threads", threads),
    };
    return table;
}

#undef INT_FIELD
#undef REAL_FIELD
#undef FLAG_FIELD
#undef PATH_FIELD

const Entry& find_entry(const std::string& key) {
    const auto& table = entries();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Entry& e) { return e.key == key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    return *it;
}

std::string trim(const std::string& s) {
    const auto first = s.find_first_not_of(" \t\r");
    if (first == std::string::npos) return {};
    const auto last = s.find_last_not_of(" \t\r");
    return s.substr(first, last - first + 1);
}

}  // namespace

const std::vector<std::string>& config_keys() {
    static const std::vector<std::string> keys = [] {
        std::vector<std::string> out;
        for (const auto& e : entries()) out.push_back(e.key);
        return out;
    }();
    return keys;
}

bool is_config_key(const std::string& key) {
    const auto& keys = config_keys();
    return std::find(keys.begin(), keys.end(), key) != keys.end();
}

void set_config_value(RunConfig& cfg, const std::string& key, const std::string& value) {
    find_entry(key).set(cfg, key, value);
}

std::string get_config_value(const RunConfig& cfg, const std::string& key) { return find_entry(key).get(cfg); }

void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& source) {
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key=value, got '" + line + "'");
        }
        const std::string key = trim(line.substr(0, eq));
        try {
            set_config_value(cfg, key, trim(line.substr(eq + 1)));
        } catch (const ConfigError& e) {
            throw ConfigError(source + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
}

std::string canonical_config(const RunConfig& cfg) {
    std::string out;
    for (const auto& e : entries()) out += e.key + "=" + e.get(cfg) + "\n";
    return out;
}

void validate(const RunConfig& cfg) {
    try {
        cfg.filter.validate();
        cfg.attack.validate();
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
    if (cfg.classes < 2 || cfg.classes > 16) throw ConfigError("classes: must be in 2..16");
    if (cfg.per_class < 1) throw ConfigError("per_class: must be >= 1");
    if (cfg.eval_per_class < 1) throw ConfigError("eval_per_class: must be >= 1");
    if (cfg.image_size < 1) throw ConfigError("image_size: must be >= 1");
    if (cfg.train.epochs < 0) throw ConfigError("epochs: must be >= 0");
    if (!(cfg.train.learning_rate > 0.0)) throw ConfigError("lr: must be > 0");
    if (cfg.train.pool_factor < 1 || cfg.image_size % cfg.train.pool_factor != 0) {
        throw ConfigError("pool_factor: must divide image_size");
    }
    if (cfg.ablation.size < 0) throw ConfigError("ablation_size: must be auto or >= 1");
    if (cfg.ablation.stride < 1) throw ConfigError("ablation_stride: must be >= 1");
    if (!(cfg.ablation.fill >= 0.0 && cfg.ablation.fill <= 1.0)) throw ConfigError("ablation_fill: must be in [0,1]");
    if (cfg.label < -1) throw ConfigError("label: must be auto or a class index");
    if (cfg.classic_side < 1 || cfg.classic_side % 2 == 0) throw ConfigError("classic_side: must be odd and >= 1");
    if (cfg.threads < 0) throw ConfigError("threads: must be >= 0");
}

}  // namespace vmfguard
