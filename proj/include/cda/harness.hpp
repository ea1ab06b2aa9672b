#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "cda/dataio.hpp"
#include "cda/error.hpp"
#include "cda/evalkit.hpp"
#include "cda/gasearch.hpp"
#include "cda/hash.hpp"

namespace cda {

// ---- scenario configuration (plain-text key=value with [section] headers) ----

struct DomainSpec {
    std::string kind; // idx | usps | braille
    std::string images;
    std::string labels;
    std::string path;
    int rotate = 0;
    int braille_n_per_class = 80;
    double braille_noise = 0.05;
    std::uint64_t braille_seed = 1;
};

struct ScenarioConfig {
    std::string name = "scenario";
    DomainSpec source;
    DomainSpec target;
    int depth = 5;
    std::vector<int> depths; // depth-sweep list; falls back to {depth}
    std::vector<std::string> methods = {"no_adapt", "joint", "separate"};
    std::vector<std::uint64_t> seeds = {1};
    std::string out_csv = "results.csv";
    std::string cache_dir;
    int workers = 1;
    int subspace_d = 30;
    bool transductive = false;
    StackPlan plan;
    bool grid_search = false;
    GaConfig ga;
    SplitSpec split;
};

namespace detail {

inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

inline std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::string field;
    std::istringstream is(s);
    while (std::getline(is, field, ',')) {
        field = trim(field);
        if (!field.empty()) out.push_back(field);
    }
    return out;
}

inline long to_long(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const long x = std::stol(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad integer for " + key + ": '" + v + "'");
    }
}

inline double to_double(const std::string& v, const std::string& key) {
    try {
        std::size_t pos = 0;
        const double x = std::stod(v, &pos);
        if (pos != v.size()) throw std::invalid_argument(v);
        return x;
    } catch (const std::exception&) {
        throw ConfigError("config: bad number for " + key + ": '" + v + "'");
    }
}

inline bool to_bool(const std::string& v, const std::string& key) {
    if (v == "true" || v == "1" || v == "yes") return true;
    if (v == "false" || v == "0" || v == "no") return false;
    throw ConfigError("config: bad boolean for " + key + ": '" + v + "'");
}

inline void apply_domain_key(DomainSpec& d, const std::string& key, const std::string& value,
                             const std::string& section) {
    if (key == "kind") d.kind = value;
    else if (key == "images") d.images = value;
    else if (key == "labels") d.labels = value;
    else if (key == "path") d.path = value;
    else if (key == "rotate") d.rotate = static_cast<int>(to_long(value, key));
    else if (key == "n_per_class") d.braille_n_per_class = static_cast<int>(to_long(value, key));
    else if (key == "noise_std") d.braille_noise = to_double(value, key);
    else if (key == "seed") d.braille_seed = static_cast<std::uint64_t>(to_long(value, key));
    else throw ConfigError("config: unknown key '" + key + "' in [" + section + "]");
}

} // namespace detail

inline ScenarioConfig parse_config_text(const std::string& text) {
    ScenarioConfig cfg;
    std::istringstream in(text);
    std::string line, section;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const auto hash_pos = line.find('#');
        if (hash_pos != std::string::npos) line.erase(hash_pos);
        line = detail::trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']')
                throw ConfigError("config line " + std::to_string(line_no) + ": bad section header");
            section = line.substr(1, line.size() - 2);
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw ConfigError("config line " + std::to_string(line_no) + ": expected key=value");
        const std::string key = detail::trim(line.substr(0, eq));
        const std::string value = detail::trim(line.substr(eq + 1));

        if (section == "scenario") {
            if (key == "name") cfg.name = value;
            else if (key == "depth") cfg.depth = static_cast<int>(detail::to_long(value, key));
            else if (key == "depths") {
                cfg.depths.clear();
                for (const auto& f : detail::split_list(value))
                    cfg.depths.push_back(static_cast<int>(detail::to_long(f, key)));
            } else if (key == "methods") cfg.methods = detail::split_list(value);
            else if (key == "seeds") {
                cfg.seeds.clear();
                for (const auto& f : detail::split_list(value))
                    cfg.seeds.push_back(static_cast<std::uint64_t>(detail::to_long(f, key)));
            } else if (key == "out") cfg.out_csv = value;
            else if (key == "cache_dir") cfg.cache_dir = value;
            else if (key == "workers") cfg.workers = static_cast<int>(detail::to_long(value, key));
            else if (key == "subspace_d") cfg.subspace_d = static_cast<int>(detail::to_long(value, key));
            else throw ConfigError("config: unknown key '" + key + "' in [scenario]");
        } else if (section == "source") {
            detail::apply_domain_key(cfg.source, key, value, section);
        } else if (section == "target") {
            detail::apply_domain_key(cfg.target, key, value, section);
        } else if (section == "split") {
            if (key == "n_train_per_class")
                cfg.split.n_train_per_class = static_cast<int>(detail::to_long(value, key));
            else if (key == "n_eval_per_class")
                cfg.split.n_eval_per_class = static_cast<int>(detail::to_long(value, key));
            else if (key == "seed") cfg.split.seed = static_cast<std::uint64_t>(detail::to_long(value, key));
            else if (key == "transductive") cfg.transductive = detail::to_bool(value, key);
            else throw ConfigError("config: unknown key '" + key + "' in [split]");
        } else if (section == "sdae") {
            if (key == "epsilon0") cfg.plan.epsilon0 = detail::to_double(value, key);
            else if (key == "tau") cfg.plan.tau = static_cast<int>(detail::to_long(value, key));
            else if (key == "corruption") cfg.plan.corruption = detail::to_double(value, key);
            else if (key == "max_iters") cfg.plan.max_iters = static_cast<int>(detail::to_long(value, key));
            else if (key == "patience") cfg.plan.patience = static_cast<int>(detail::to_long(value, key));
            else if (key == "size_rule") cfg.plan.size_rule = detail::to_double(value, key);
            else if (key == "sizes") {
                cfg.plan.explicit_sizes.clear();
                for (const auto& f : detail::split_list(value))
                    cfg.plan.explicit_sizes.push_back(static_cast<int>(detail::to_long(f, key)));
            } else if (key == "seed") cfg.plan.seed = static_cast<std::uint64_t>(detail::to_long(value, key));
            else if (key == "domain_seeds") {
                if (value == "shared") cfg.plan.domain_specific_seeds = false;
                else if (value == "distinct") cfg.plan.domain_specific_seeds = true;
                else throw ConfigError("config: domain_seeds must be shared or distinct");
            } else if (key == "grid_search") cfg.grid_search = detail::to_bool(value, key);
            else throw ConfigError("config: unknown key '" + key + "' in [sdae]");
        } else if (section == "ga") {
            if (key == "population") cfg.ga.population_size = static_cast<int>(detail::to_long(value, key));
            else if (key == "elite_fraction") cfg.ga.elite_fraction = detail::to_double(value, key);
            else if (key == "patience") cfg.ga.patience = static_cast<int>(detail::to_long(value, key));
            else if (key == "mutation_rate") cfg.ga.mutation_rate = detail::to_double(value, key);
            else if (key == "max_generations")
                cfg.ga.max_generations = static_cast<int>(detail::to_long(value, key));
            else if (key == "seed") cfg.ga.seed = static_cast<std::uint64_t>(detail::to_long(value, key));
            else throw ConfigError("config: unknown key '" + key + "' in [ga]");
        } else {
            throw ConfigError("config: unknown section [" + section + "]");
        }
    }

    static const std::set<std::string> known_methods = {"no_adapt", "joint", "separate", "concat",
                                                        "subspace"};
    if (cfg.methods.empty())
        throw ConfigError("config: at least one method required");
    for (const auto& m : cfg.methods)
        if (!known_methods.count(m))
            throw ConfigError("config: unknown method '" + m + "'");
    if (cfg.depth < 1)
        throw ConfigError("config: depth must be >= 1");
    if (cfg.seeds.empty())
        throw ConfigError("config: at least one seed required");
    if (cfg.workers < 1)
        throw ConfigError("config: workers must be >= 1");
    for (const auto* d : {&cfg.source, &cfg.target})
        if (d->rotate != 0 && d->rotate != 90 && d->rotate != 180 && d->rotate != 270)
            throw ConfigError("config: rotate must be one of 0/90/180/270");
    return cfg;
}

inline ScenarioConfig parse_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return parse_config_text(os.str());
}

// Canonical serialization; its hash identifies the effective configuration
// in every CSV row.
inline std::string serialize_config(const ScenarioConfig& cfg) {
    std::ostringstream os;
    auto domain = [&os](const char* sec, const DomainSpec& d) {
        os << '[' << sec << "]\n"
           << "kind = " << d.kind << "\nimages = " << d.images << "\nlabels = " << d.labels
           << "\npath = " << d.path << "\nrotate = " << d.rotate
           << "\nn_per_class = " << d.braille_n_per_class << "\nnoise_std = " << d.braille_noise
           << "\nseed = " << d.braille_seed << "\n";
    };
    os << "[scenario]\nname = " << cfg.name << "\ndepth = " << cfg.depth << "\ndepths = ";
    for (std::size_t i = 0; i < cfg.depths.size(); ++i)
        os << (i ? "," : "") << cfg.depths[i];
    os << "\nmethods = ";
    for (std::size_t i = 0; i < cfg.methods.size(); ++i)
        os << (i ? "," : "") << cfg.methods[i];
    os << "\nseeds = ";
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        os << (i ? "," : "") << cfg.seeds[i];
    os << "\nsubspace_d = " << cfg.subspace_d << "\n";
    domain("source", cfg.source);
    domain("target", cfg.target);
    os << "[split]\nn_train_per_class = " << cfg.split.n_train_per_class
       << "\nn_eval_per_class = " << cfg.split.n_eval_per_class << "\nseed = " << cfg.split.seed
       << "\ntransductive = " << (cfg.transductive ? "true" : "false") << "\n";
    os << "[sdae]\nepsilon0 = " << cfg.plan.epsilon0 << "\ntau = " << cfg.plan.tau
       << "\ncorruption = " << cfg.plan.corruption << "\nmax_iters = " << cfg.plan.max_iters
       << "\npatience = " << cfg.plan.patience << "\nsize_rule = " << cfg.plan.size_rule
       << "\nsizes = ";
    for (std::size_t i = 0; i < cfg.plan.explicit_sizes.size(); ++i)
        os << (i ? "," : "") << cfg.plan.explicit_sizes[i];
    os << "\nseed = " << cfg.plan.seed
       << "\ndomain_seeds = " << (cfg.plan.domain_specific_seeds ? "distinct" : "shared")
       << "\ngrid_search = " << (cfg.grid_search ? "true" : "false") << "\n";
    os << "[ga]\npopulation = " << cfg.ga.population_size
       << "\nelite_fraction = " << cfg.ga.elite_fraction << "\npatience = " << cfg.ga.patience
       << "\nmutation_rate = " << cfg.ga.mutation_rate
       << "\nmax_generations = " << cfg.ga.max_generations << "\nseed = " << cfg.ga.seed << "\n";
    return os.str();
}

inline std::string config_hash(const ScenarioConfig& cfg) {
    return hex64(fnv1a(serialize_config(cfg)));
}

// ---- CSV emission and parsing ----

inline std::string format_report_row(const EvalReport& r) {
    char num[64];
    std::ostringstream os;
    os << r.scenario << ',' << r.method << ',' << r.depth << ',' << r.seed << ',';
    std::snprintf(num, sizeof num, "%.10g", r.accuracy);
    os << num << ',';
    if (!std::isnan(r.adjustment_degree)) {
        std::snprintf(num, sizeof num, "%.10g", r.adjustment_degree);
        os << num;
    }
    os << ',';
    std::snprintf(num, sizeof num, "%.3f", r.wall_seconds);
    os << num << ',' << r.config_hash;
    return os.str();
}

inline const char* report_csv_header() {
    return "scenario,method,depth,seed,accuracy,adjustment_degree,wall_seconds,config_hash";
}

inline void append_reports_csv(const std::string& path, const std::vector<EvalReport>& reports) {
    const bool fresh = !std::filesystem::exists(path) || std::filesystem::file_size(path) == 0;
    std::ofstream out(path, std::ios::app);
    if (!out)
        throw DataError("cannot open " + path + " for append");
    if (fresh)
        out << report_csv_header() << '\n';
    for (const auto& r : reports)
        out << format_report_row(r) << '\n';
}

inline std::vector<EvalReport> parse_reports_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    std::vector<EvalReport> out;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (first) {
            first = false;
            if (line == report_csv_header()) continue;
        }
        std::vector<std::string> fields;
        std::string f;
        std::istringstream is(line);
        while (std::getline(is, f, ','))
            fields.push_back(f);
        if (line.back() == ',') fields.push_back("");
        if (fields.size() != 8)
            throw DataError(path + ": malformed CSV row '" + line + "'");
        EvalReport r;
        r.scenario = fields[0];
        r.method = fields[1];
        r.depth = static_cast<int>(detail::to_long(fields[2], "depth"));
        r.seed = static_cast<std::uint64_t>(detail::to_long(fields[3], "seed"));
        r.accuracy = detail::to_double(fields[4], "accuracy");
        r.adjustment_degree = fields[5].empty() ? std::numeric_limits<double>::quiet_NaN()
                                                : detail::to_double(fields[5], "adjustment_degree");
        r.wall_seconds = detail::to_double(fields[6], "wall_seconds");
        r.config_hash = fields[7];
        out.push_back(std::move(r));
    }
    return out;
}

// ---- SDAE model cache: in-memory plus optional on-disk store ----

class ModelCache {
  public:
    explicit ModelCache(std::string dir = "") : dir_(std::move(dir)) {
        if (!dir_.empty())
            std::filesystem::create_directories(dir_);
    }

    static std::string layer_cfg_text(const DaeConfig& c) {
        std::ostringstream os;
        os << c.hidden_size << '|' << c.epsilon0 << '|' << c.tau << '|' << c.corruption << '|'
           << c.max_iters << '|' << c.patience << '|' << c.seed << ';';
        return os.str();
    }

    static std::string stack_key(std::uint64_t data_fp, const std::vector<DaeConfig>& cfgs,
                                 std::size_t depth) {
        std::string text = hex64(data_fp) + ":";
        for (std::size_t k = 0; k < depth; ++k)
            text += layer_cfg_text(cfgs[k]);
        return hex64(fnv1a(text));
    }

    // Returns the cached stack for the full config chain, training and
    // persisting any missing suffix layers. Every depth prefix trained along
    // the way is stored so depth sweeps reuse shallower stacks.
    SdaeModel get_or_train(const Matrix& data, std::uint64_t data_fp,
                           const std::vector<DaeConfig>& cfgs) {
        const std::string want = stack_key(data_fp, cfgs, cfgs.size());
        if (auto m = lookup(want))
            return *m;

        // deepest cached prefix
        std::size_t have = 0;
        SdaeModel model;
        for (std::size_t k = cfgs.size(); k-- > 1;) {
            if (auto m = lookup(stack_key(data_fp, cfgs, k))) {
                model = *m;
                have = k;
                break;
            }
        }
        if (have == 0) {
            model = train_sdae(data, {cfgs.begin(), cfgs.begin() + 1});
            store(stack_key(data_fp, cfgs, 1), model);
            have = 1;
        }
        while (have < cfgs.size()) {
            extend_sdae(model, data, {cfgs.begin() + static_cast<std::ptrdiff_t>(have),
                                      cfgs.begin() + static_cast<std::ptrdiff_t>(have) + 1});
            ++have;
            store(stack_key(data_fp, cfgs, have), model);
        }
        return model;
    }

    // Grid variant: each layer's hidden size, learning rate and corruption
    // come from a grid search over the candidate sets; the base configs
    // supply depth, stopping rules and seeds.
    SdaeModel get_or_train_grid(const Matrix& data, std::uint64_t data_fp,
                                const std::vector<DaeConfig>& base_cfgs) {
        std::string text = hex64(data_fp) + ":grid:";
        for (const auto& c : base_cfgs)
            text += layer_cfg_text(c);
        const std::string key = hex64(fnv1a(text));
        if (auto m = lookup(key))
            return *m;

        SdaeModel model;
        model.layer_sizes.push_back(data.cols());
        Matrix acts = data;
        int prev = static_cast<int>(data.cols());
        for (const auto& base : base_cfgs) {
            const DaeConfig chosen = grid_search_layer(
                acts, hidden_grid_for(prev), {1e-3, 1e-2, 1e-1, 1.0}, {0.0, 0.3, 0.5}, base);
            DaeLayer layer = train_dae(acts, chosen);
            acts = detail::affine_sigmoid(acts, layer.w_enc, layer.b_enc);
            prev = chosen.hidden_size;
            model.layer_sizes.push_back(layer.hidden());
            model.layers.push_back(std::move(layer));
        }
        store(key, model);
        return model;
    }

    bool hit_recorded() const { return hits_ > 0; }
    long hits() const { return hits_; }
    long misses() const { return misses_; }

  private:
    std::optional<SdaeModel> lookup(const std::string& key) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            auto it = mem_.find(key);
            if (it != mem_.end()) {
                ++hits_;
                return it->second;
            }
        }
        if (!dir_.empty()) {
            const std::string path = dir_ + "/" + key + ".sdae";
            if (std::filesystem::exists(path)) {
                SdaeModel m = load_model(path);
                std::lock_guard<std::mutex> lock(mu_);
                mem_.emplace(key, m);
                ++hits_;
                return m;
            }
        }
        ++misses_;
        return std::nullopt;
    }

    void store(const std::string& key, const SdaeModel& model) {
        {
            std::lock_guard<std::mutex> lock(mu_);
            mem_.emplace(key, model);
        }
        if (!dir_.empty()) {
            const std::string path = dir_ + "/" + key + ".sdae";
            if (!std::filesystem::exists(path)) {
                const std::string tmp = path + ".tmp" + std::to_string(
                    std::hash<std::thread::id>{}(std::this_thread::get_id()) & 0xffff);
                save_model(tmp, model);
                std::filesystem::rename(tmp, path);
            }
        }
    }

    std::string dir_;
    std::mutex mu_;
    std::unordered_map<std::string, SdaeModel> mem_;
    std::atomic<long> hits_{0};
    std::atomic<long> misses_{0};
};

// ---- scenario orchestration ----

struct MethodFailure {
    std::string method;
    std::uint64_t seed = 0;
    int depth = 0;
    std::string what;
};

struct RunRecord {
    std::vector<EvalReport> reports;
    std::vector<MethodFailure> failures;
    std::string environment;
    double elapsed_seconds = 0.0;

    bool ok() const { return failures.empty(); }
};

inline Dataset load_domain(const DomainSpec& spec) {
    Dataset ds;
    if (spec.kind == "idx") {
        if (spec.images.empty() || spec.labels.empty())
            throw ConfigError("idx domain needs images= and labels=");
        ds = load_idx(spec.images, spec.labels);
    } else if (spec.kind == "usps") {
        if (spec.path.empty())
            throw ConfigError("usps domain needs path=");
        ds = load_usps_text(spec.path);
    } else if (spec.kind == "braille") {
        ds = synth_braille(spec.braille_n_per_class, spec.braille_noise, spec.braille_seed);
    } else {
        throw ConfigError("unknown domain kind '" + spec.kind + "'");
    }
    if (spec.rotate != 0)
        ds = rotate_dataset(ds, spec.rotate);
    return ds;
}

class ScenarioRunner {
  public:
    explicit ScenarioRunner(ScenarioConfig cfg)
        : cfg_(std::move(cfg)), cache_(cfg_.cache_dir), hash_(config_hash(cfg_)) {}

    const ScenarioConfig& config() const { return cfg_; }
    ModelCache& cache() { return cache_; }

    // Executes every requested method per seed at cfg.depth, appends CSV
    // rows, and reports per-method failures without aborting the rest.
    RunRecord run_scenario() { return run(cfg_.methods, {cfg_.depth}); }

    // Separate-and-adjust plus joint at each depth, and the adjusted-joint
    // measurement whose mapping deviation from the identity gives the
    // per-depth adjustment degree (unit indices are only comparable within
    // the shared network).
    RunRecord depth_sweep(std::vector<int> depths) {
        if (depths.empty())
            throw ConfigError("depth_sweep: depths list is empty");
        for (int d : depths)
            if (d < 1)
                throw ConfigError("depth_sweep: depths must be >= 1");
        return run({"separate", "joint", "joint_adjust"}, std::move(depths));
    }

    RunRecord method_comparison() {
        for (const char* need : {"joint", "separate", "concat"})
            if (std::find(cfg_.methods.begin(), cfg_.methods.end(), need) == cfg_.methods.end())
                throw ConfigError(std::string("method_comparison requires method '") + need + "'");
        return run(cfg_.methods, {cfg_.depth});
    }

    RunRecord run(const std::vector<std::string>& methods, const std::vector<int>& depths) {
        const auto t0 = std::chrono::steady_clock::now();
        ensure_loaded();

        std::vector<SeedOutcome> outcomes(cfg_.seeds.size());

        std::atomic<std::size_t> cursor{0};
        auto worker = [&]() {
            for (;;) {
                const std::size_t i = cursor.fetch_add(1);
                if (i >= cfg_.seeds.size()) return;
                outcomes[i] = run_seed(cfg_.seeds[i], methods, depths);
            }
        };
        const int n_workers = std::min<int>(cfg_.workers, static_cast<int>(cfg_.seeds.size()));
        if (n_workers <= 1) {
            worker();
        } else {
            std::vector<std::thread> pool;
            for (int w = 0; w < n_workers; ++w)
                pool.emplace_back(worker);
            for (auto& t : pool)
                t.join();
        }

        RunRecord rec;
        rec.environment = std::string("compiler=") + __VERSION__;
        for (auto& o : outcomes) {
            rec.reports.insert(rec.reports.end(), o.reports.begin(), o.reports.end());
            rec.failures.insert(rec.failures.end(), o.failures.begin(), o.failures.end());
        }
        if (!cfg_.out_csv.empty())
            append_reports_csv(cfg_.out_csv, rec.reports);
        rec.elapsed_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        return rec;
    }

  private:
    void ensure_loaded() {
        std::call_once(load_once_, [this]() {
            source_full_ = load_domain(cfg_.source);
            target_full_ = load_domain(cfg_.target);
        });
    }

    struct SeedOutcome {
        std::vector<EvalReport> reports;
        std::vector<MethodFailure> failures;
    };

    SeedOutcome run_seed(std::uint64_t seed, const std::vector<std::string>& methods,
                         const std::vector<int>& depths) {
        SeedOutcome out;

        SplitSpec src_split = cfg_.split;
        src_split.seed = mix_seed(cfg_.split.seed, seed * 4 + 0);
        SplitSpec tgt_split = cfg_.split;
        tgt_split.seed = mix_seed(cfg_.split.seed, seed * 4 + 1);

        Dataset src_train, tgt_train, tgt_eval;
        TargetSplit split;
        try {
            auto src_pair = subsample_balanced(source_full_, src_split);
            src_train = std::move(src_pair.first);
            auto tgt_pair = subsample_balanced(target_full_, tgt_split);
            tgt_train = std::move(tgt_pair.first);
            tgt_eval = std::move(tgt_pair.second);
            if (cfg_.transductive) {
                split.search = tgt_eval;
                split.report = tgt_eval;
            } else {
                SplitSpec half;
                half.n_train_per_class = std::max(1, cfg_.split.n_eval_per_class / 2);
                half.n_eval_per_class = cfg_.split.n_eval_per_class - half.n_train_per_class;
                half.seed = mix_seed(cfg_.split.seed, seed * 4 + 2);
                auto [search, report] = subsample_balanced(tgt_eval, half);
                split.search = std::move(search);
                split.report = std::move(report);
            }
        } catch (const Error& e) {
            out.failures.push_back({"(data)", seed, 0, e.what()});
            return out;
        }

        StackPlan plan = cfg_.plan;
        plan.seed = mix_seed(cfg_.plan.seed, seed);
        GaConfig ga = cfg_.ga;
        ga.seed = mix_seed(cfg_.ga.seed, seed);

        // With the grid flag on, the per-layer hyper-parameters in `cfgs`
        // are replaced by a layer-wise grid search; the chain lengths,
        // stopping rules and seeds still come from the plan.
        ModelProvider provider = [this](const Matrix& data, const std::vector<DaeConfig>& cfgs) {
            if (cfg_.grid_search)
                return cache_.get_or_train_grid(data, matrix_fingerprint(data), cfgs);
            return cache_.get_or_train(data, matrix_fingerprint(data), cfgs);
        };

        auto emit = [&](const std::string& method, int depth, auto&& fn) {
            const auto m0 = std::chrono::steady_clock::now();
            try {
                EvalReport rep = fn();
                rep.scenario = cfg_.name;
                rep.seed = seed;
                rep.config_hash = hash_;
                rep.wall_seconds =
                    std::chrono::duration<double>(std::chrono::steady_clock::now() - m0).count();
                out.reports.push_back(std::move(rep));
            } catch (const std::exception& e) {
                out.failures.push_back({method, seed, depth, e.what()});
            }
        };

        // depth-independent baselines run once per seed
        for (const auto& m : methods) {
            if (m == "no_adapt")
                emit(m, 0, [&]() { return no_adapt_baseline(src_train, split.report); });
            else if (m == "subspace")
                emit(m, 0, [&]() {
                    return subspace_alignment_baseline(src_train, tgt_train, cfg_.subspace_d,
                                                       &split.report);
                });
        }
        for (int depth : depths) {
            for (const auto& m : methods) {
                if (m == "joint") {
                    emit(m, depth, [&]() {
                        return joint_baseline(src_train, tgt_train, depth, plan, &split.report,
                                              provider);
                    });
                } else if (m == "joint_adjust") {
                    emit(m, depth, [&]() {
                        return joint_adjust(src_train, tgt_train, depth, ga, plan, &split, nullptr,
                                            provider);
                    });
                } else if (m == "separate") {
                    emit(m, depth, [&]() {
                        return conceptual_adapt(src_train, tgt_train, depth, ga, plan, &split,
                                                nullptr, provider);
                    });
                } else if (m == "concat") {
                    emit(m, depth, [&]() {
                        return concat_adapt(src_train, tgt_train, depth, ga, plan, &split, nullptr,
                                            provider);
                    });
                }
            }
        }
        return out;
    }

    static std::uint64_t matrix_fingerprint(const Matrix& m) {
        const std::size_t dims[2] = {m.rows(), m.cols()};
        const std::uint64_t h = fnv1a(dims, sizeof dims);
        return fnv1a(m.data(), m.size() * sizeof(double), h);
    }

    ScenarioConfig cfg_;
    ModelCache cache_;
    std::string hash_;
    std::once_flag load_once_;
    Dataset source_full_;
    Dataset target_full_;
};

} // namespace cda
