// Command-line front end for the conceptual domain adaptation pipeline:
// data preparation, SDAE training, mapping search, and the scenario
// experiment families, all driven by a plain-text config file.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include "cda/cda.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitMethodFailure = 1;
constexpr int kExitConfigError = 2;
constexpr int kExitDataError = 3;

struct CommonFlags {
    std::string config_path;
    std::string out;
    std::string cache_dir;
    std::vector<std::string> methods;
    long long seed = -1;
    int depth = 0;
    std::vector<int> depths;
};

void add_common(CLI::App* cmd, CommonFlags& f, bool config_required = true) {
    auto* opt = cmd->add_option("--config", f.config_path, "scenario config file (key=value)");
    if (config_required)
        opt->required();
    cmd->add_option("--out", f.out, "output path override");
    cmd->add_option("--cache-dir", f.cache_dir, "model cache directory");
    cmd->add_option("--seed", f.seed, "single seed override");
    cmd->add_option("--depth", f.depth, "stack depth override");
    cmd->add_option("--methods", f.methods, "methods override (comma separated)")
        ->delimiter(',');
    cmd->add_option("--depths", f.depths, "depth list for sweeps (comma separated)")
        ->delimiter(',');
}

cda::ScenarioConfig load_config(const CommonFlags& f) {
    cda::ScenarioConfig cfg = cda::parse_config_file(f.config_path);
    if (!f.out.empty()) cfg.out_csv = f.out;
    if (!f.cache_dir.empty()) cfg.cache_dir = f.cache_dir;
    if (f.seed >= 0) cfg.seeds = {static_cast<std::uint64_t>(f.seed)};
    if (f.depth > 0) cfg.depth = f.depth;
    if (!f.methods.empty()) cfg.methods = f.methods;
    if (!f.depths.empty()) cfg.depths = f.depths;
    return cfg;
}

int report_outcome(const cda::RunRecord& rec, const cda::ScenarioConfig& cfg) {
    for (const auto& r : rec.reports)
        std::printf("%-10s depth=%d seed=%llu accuracy=%.4f%s\n", r.method.c_str(), r.depth,
                    static_cast<unsigned long long>(r.seed), r.accuracy,
                    std::isnan(r.adjustment_degree)
                        ? ""
                        : (" adjustment=" + std::to_string(r.adjustment_degree) + "%").c_str());
    for (const auto& f : rec.failures)
        std::fprintf(stderr, "method %s (seed %llu, depth %d) failed: %s\n", f.method.c_str(),
                     static_cast<unsigned long long>(f.seed), f.depth, f.what.c_str());
    std::printf("%zu rows appended to %s (%.1fs)\n", rec.reports.size(), cfg.out_csv.c_str(),
                rec.elapsed_seconds);
    return rec.ok() ? kExitOk : kExitMethodFailure;
}

int cmd_prepare_data(const CommonFlags& f) {
    cda::ScenarioConfig cfg = load_config(f);
    const std::string out_dir = f.out.empty() ? "prepared" : f.out;
    std::filesystem::create_directories(out_dir);
    const std::uint64_t seed = cfg.seeds.front();

    for (const auto& [role, spec] : {std::pair<std::string, cda::DomainSpec>{"source", cfg.source},
                                     {"target", cfg.target}}) {
        cda::Dataset full = cda::load_domain(spec);
        cda::SplitSpec split = cfg.split;
        split.seed = cda::mix_seed(cfg.split.seed, seed * 4 + (role == "source" ? 0 : 1));
        auto [train, eval] = cda::subsample_balanced(full, split);
        const std::string train_path = out_dir + "/" + role + "_train.usps";
        const std::string eval_path = out_dir + "/" + role + "_eval.usps";
        cda::save_usps_text(train_path, train);
        cda::save_usps_text(eval_path, eval);
        std::vector<std::string> manifest = train.source_manifest;
        manifest.push_back("role=" + role);
        manifest.push_back("n_train=" + std::to_string(train.size()));
        manifest.push_back("n_eval=" + std::to_string(eval.size()));
        manifest.push_back("fingerprint_train=" + cda::hex64(cda::dataset_fingerprint(train)));
        manifest.push_back("fingerprint_eval=" + cda::hex64(cda::dataset_fingerprint(eval)));
        cda::save_manifest(out_dir + "/" + role + ".manifest", manifest);
        std::printf("%s: %zu train / %zu eval -> %s, %s\n", role.c_str(), train.size(),
                    eval.size(), train_path.c_str(), eval_path.c_str());
    }
    return kExitOk;
}

int cmd_train(const CommonFlags& f) {
    cda::ScenarioConfig cfg = load_config(f);
    const std::string out = f.out.empty() ? "model.sdae" : f.out;
    const std::uint64_t seed = cfg.seeds.front();

    cda::Dataset full = cda::load_domain(cfg.source);
    cda::SplitSpec split = cfg.split;
    split.seed = cda::mix_seed(cfg.split.seed, seed * 4);
    auto [train, eval] = cda::subsample_balanced(full, split);
    (void)eval;

    cda::StackPlan plan = cfg.plan;
    plan.seed = cda::mix_seed(cfg.plan.seed, seed);
    const cda::Matrix px = train.pixel_matrix();
    const auto cfgs = cda::plan_configs(px.cols(), cfg.depth, plan, 0);
    const cda::SdaeModel model = cda::train_sdae(px, cfgs);
    cda::save_model(out, model);
    std::printf("trained depth-%d stack on %zu samples, sizes", cfg.depth, train.size());
    for (std::size_t s : model.layer_sizes)
        std::printf(" %zu", s);
    std::printf(", saved to %s\n", out.c_str());
    return kExitOk;
}

int cmd_align(const CommonFlags& f, const std::string& source_model_path,
              const std::string& target_model_path, const std::string& trace_path) {
    cda::ScenarioConfig cfg = load_config(f);
    const std::uint64_t seed = cfg.seeds.front();
    const std::string out = f.out.empty() ? "genome.txt" : f.out;

    cda::Dataset source_full = cda::load_domain(cfg.source);
    cda::Dataset target_full = cda::load_domain(cfg.target);
    cda::SplitSpec s_split = cfg.split, t_split = cfg.split;
    s_split.seed = cda::mix_seed(cfg.split.seed, seed * 4 + 0);
    t_split.seed = cda::mix_seed(cfg.split.seed, seed * 4 + 1);
    auto [src_train, src_eval] = cda::subsample_balanced(source_full, s_split);
    auto [tgt_train, tgt_eval] = cda::subsample_balanced(target_full, t_split);
    (void)src_eval;
    (void)tgt_train;

    const cda::SdaeModel src_model = cda::load_model(source_model_path);
    const cda::SdaeModel tgt_model = cda::load_model(target_model_path);

    cda::SplitSpec half;
    half.n_train_per_class = std::max(1, cfg.split.n_eval_per_class / 2);
    half.n_eval_per_class = cfg.split.n_eval_per_class - half.n_train_per_class;
    half.seed = cda::mix_seed(cfg.split.seed, seed * 4 + 2);
    auto [search_ds, report_ds] = cda::subsample_balanced(tgt_eval, half);

    const cda::BinaryMatrix src_reps =
        cda::binarize(cda::encode(src_model, src_train.pixel_matrix()));
    const cda::BinaryMatrix search_reps =
        cda::binarize(cda::encode(tgt_model, search_ds.pixel_matrix()));
    const cda::BinaryMatrix report_reps =
        cda::binarize(cda::encode(tgt_model, report_ds.pixel_matrix()));
    const cda::FitnessContext ctx =
        cda::make_fitness_context(src_reps, src_train.labels(), search_reps, search_ds.labels(),
                                  report_reps, report_ds.labels());

    cda::GaConfig ga = cfg.ga;
    ga.seed = cda::mix_seed(cfg.ga.seed, seed);
    if (!trace_path.empty())
        ga.checkpoint_csv = trace_path;
    const cda::SearchResult result = cda::evolve(ctx, ga);

    cda::save_genomes(out, {result.best_genome});
    std::printf("best fitness %.4f after %d generations, report accuracy %.4f", result.best_fitness,
                result.generations_run, result.report_accuracy);
    if (ctx.p() == ctx.q())
        std::printf(", adjustment degree %.1f%%", cda::adjustment_degree(result.best_genome));
    std::printf("\nbest genome written to %s\n", out.c_str());
    return kExitOk;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"conceptual domain adaptation pipeline"};
    app.require_subcommand(1);

    CommonFlags prep_f, train_f, align_f, eval_f, scen_f, sweep_f, cmp_f;
    std::string align_source_model, align_target_model, align_trace;

    auto* prep = app.add_subcommand("prepare-data", "subsample domains and write datasets");
    add_common(prep, prep_f);
    auto* train = app.add_subcommand("train", "train an SDAE on the source domain");
    add_common(train, train_f);
    auto* align = app.add_subcommand("align", "search a mapping between trained models");
    add_common(align, align_f);
    align->add_option("--source-model", align_source_model, "trained source model")->required();
    align->add_option("--target-model", align_target_model, "trained target model")->required();
    align->add_option("--trace", align_trace, "per-generation CSV trace path");
    auto* eval = app.add_subcommand("evaluate", "run the configured methods once");
    add_common(eval, eval_f);
    auto* scen = app.add_subcommand("scenario", "run the full scenario per seed");
    add_common(scen, scen_f);
    auto* sweep = app.add_subcommand("depth-sweep", "separate+joint across depths");
    add_common(sweep, sweep_f);
    auto* cmp = app.add_subcommand("compare", "joint vs separate vs concatenated");
    add_common(cmp, cmp_f);

    CLI11_PARSE(app, argc, argv);

    try {
        if (prep->parsed()) return cmd_prepare_data(prep_f);
        if (train->parsed()) return cmd_train(train_f);
        if (align->parsed())
            return cmd_align(align_f, align_source_model, align_target_model, align_trace);
        if (eval->parsed()) {
            cda::ScenarioConfig cfg = load_config(eval_f);
            cda::ScenarioRunner runner(cfg);
            return report_outcome(runner.run_scenario(), cfg);
        }
        if (scen->parsed()) {
            cda::ScenarioConfig cfg = load_config(scen_f);
            cda::ScenarioRunner runner(cfg);
            return report_outcome(runner.run_scenario(), cfg);
        }
        if (sweep->parsed()) {
            cda::ScenarioConfig cfg = load_config(sweep_f);
            cda::ScenarioRunner runner(cfg);
            std::vector<int> depths = cfg.depths.empty() ? std::vector<int>{cfg.depth} : cfg.depths;
            return report_outcome(runner.depth_sweep(depths), cfg);
        }
        if (cmp->parsed()) {
            cda::ScenarioConfig cfg = load_config(cmp_f);
            cda::ScenarioRunner runner(cfg);
            return report_outcome(runner.method_comparison(), cfg);
        }
    } catch (const cda::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return kExitConfigError;
    } catch (const cda::MagicMismatch& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::CountMismatch& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::TruncatedFile& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::MalformedLine& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::RangeError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::InsufficientClassCount& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return kExitDataError;
    } catch (const cda::Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitMethodFailure;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return kExitMethodFailure;
    }
    return kExitOk;
}
