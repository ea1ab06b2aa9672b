#pragma once

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "cda/error.hpp"
#include "cda/mapping.hpp"
#include "cda/matrix.hpp"
#include "cda/random.hpp"

namespace cda {

// Binary representations packed into 64-bit words; L1 distance between
// binary rows is the Hamming distance, computed via popcount.
struct PackedReps {
    std::size_t rows = 0;
    std::size_t width = 0; // bits per row
    std::size_t words = 0; // words per row
    std::vector<std::uint64_t> bits;
    std::vector<int> labels;

    const std::uint64_t* row(std::size_t r) const { return bits.data() + r * words; }
    bool bit(std::size_t r, std::size_t c) const {
        return (row(r)[c >> 6] >> (c & 63)) & 1u;
    }
};

inline PackedReps pack_reps(const BinaryMatrix& m, std::vector<int> labels) {
    if (!labels.empty() && labels.size() != m.rows())
        throw DimensionMismatch("pack_reps: label count mismatch");
    PackedReps p;
    p.rows = m.rows();
    p.width = m.cols();
    p.words = (m.cols() + 63) / 64;
    p.bits.assign(p.rows * p.words, 0);
    p.labels = std::move(labels);
    for (std::size_t r = 0; r < m.rows(); ++r) {
        std::uint64_t* w = p.bits.data() + r * p.words;
        for (std::size_t c = 0; c < m.cols(); ++c)
            if (m(r, c))
                w[c >> 6] |= std::uint64_t(1) << (c & 63);
    }
    return p;
}

inline std::size_t hamming(const std::uint64_t* a, const std::uint64_t* b, std::size_t words) {
    std::size_t d = 0;
    for (std::size_t i = 0; i < words; ++i)
        d += static_cast<std::size_t>(std::popcount(a[i] ^ b[i]));
    return d;
}

// Exact 1-NN under Hamming distance, ties broken by lowest reference index.
inline int packed_nearest_label(const PackedReps& refs, const std::uint64_t* query) {
    std::size_t best = std::numeric_limits<std::size_t>::max();
    std::size_t best_idx = 0;
    for (std::size_t r = 0; r < refs.rows; ++r) {
        const std::size_t d = hamming(refs.row(r), query, refs.words);
        if (d < best) {
            best = d;
            best_idx = r;
        }
    }
    return refs.labels[best_idx];
}

// The per-instance search problem: source representations (the classifier
// training set), a target split scored during search, and a disjoint target
// split used only for final reporting.
struct FitnessContext {
    PackedReps source;        // N_s x q
    PackedReps target_search; // N1 x p
    PackedReps target_report; // N2 x p

    // ablation: score on continuous activations instead of binary codes
    bool use_continuous = false;
    Matrix source_cont, search_cont, report_cont;

    std::size_t p() const { return target_search.width; }
    std::size_t q() const { return source.width; }
};

inline FitnessContext make_fitness_context(const BinaryMatrix& source, std::vector<int> source_labels,
                                           const BinaryMatrix& search, std::vector<int> search_labels,
                                           const BinaryMatrix& report, std::vector<int> report_labels) {
    if (search.cols() != report.cols())
        throw DimensionMismatch("fitness context: search/report widths differ");
    if (source.rows() == 0 || search.rows() == 0 || report.rows() == 0)
        throw EmptyTrainingSet("fitness context: empty split");
    FitnessContext ctx;
    ctx.source = pack_reps(source, std::move(source_labels));
    ctx.target_search = pack_reps(search, std::move(search_labels));
    ctx.target_report = pack_reps(report, std::move(report_labels));
    return ctx;
}

namespace detail {

// Score one genome against a target split: adjust rows column-by-column per
// the genome, then 1-NN against the source under L1.
inline double genome_fitness_on(const Genome& g, const FitnessContext& ctx,
                                const PackedReps& split, const Matrix& split_cont) {
    const std::size_t q = ctx.q();
    const std::size_t p = ctx.p();
    if (g.size() != q)
        throw DimensionMismatch("fitness: genome length " + std::to_string(g.size()) +
                                " vs source width " + std::to_string(q));
    for (std::size_t j = 0; j < q; ++j)
        if (g[j] < 0 || static_cast<std::size_t>(g[j]) > p)
            throw OutOfRange("fitness: genome entry out of range");

    std::size_t correct = 0;
    if (!ctx.use_continuous) {
        std::vector<std::uint64_t> mapped(ctx.source.words, 0);
        for (std::size_t n = 0; n < split.rows; ++n) {
            std::fill(mapped.begin(), mapped.end(), 0);
            for (std::size_t j = 0; j < q; ++j)
                if (g[j] > 0 && split.bit(n, static_cast<std::size_t>(g[j] - 1)))
                    mapped[j >> 6] |= std::uint64_t(1) << (j & 63);
            if (packed_nearest_label(ctx.source, mapped.data()) == split.labels[n])
                ++correct;
        }
        return static_cast<double>(correct) / static_cast<double>(split.rows);
    }

    // continuous ablation path: L1 over mapped activations
    std::vector<double> mapped(q, 0.0);
    for (std::size_t n = 0; n < split_cont.rows(); ++n) {
        for (std::size_t j = 0; j < q; ++j)
            mapped[j] = g[j] > 0 ? split_cont(n, static_cast<std::size_t>(g[j] - 1)) : 0.0;
        double best = std::numeric_limits<double>::infinity();
        std::size_t best_idx = 0;
        for (std::size_t r = 0; r < ctx.source_cont.rows(); ++r) {
            double dist = 0.0;
            const double* sr = ctx.source_cont.row(r);
            for (std::size_t j = 0; j < q; ++j)
                dist += std::abs(sr[j] - mapped[j]);
            if (dist < best) {
                best = dist;
                best_idx = r;
            }
        }
        if (ctx.source.labels[best_idx] == split.labels[n])
            ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(split_cont.rows());
}

} // namespace detail

inline double fitness(const Genome& g, const FitnessContext& ctx) {
    return detail::genome_fitness_on(g, ctx, ctx.target_search, ctx.search_cont);
}

inline double fitness(const MappingMatrix& m, const FitnessContext& ctx) {
    if (m.target_units() != ctx.p() || m.source_units() != ctx.q())
        throw DimensionMismatch("fitness: mapping matrix shape does not match context");
    return fitness(to_genome(m), ctx);
}

inline double report_fitness(const Genome& g, const FitnessContext& ctx) {
    return detail::genome_fitness_on(g, ctx, ctx.target_report, ctx.report_cont);
}

struct GaConfig {
    int population_size = 100;
    double elite_fraction = 0.2;
    int patience = 200;
    double mutation_rate = -1.0; // negative means the 1/q default
    int max_generations = 2000;
    std::uint64_t seed = 0;
    std::string checkpoint_csv;     // per-generation trace, empty = off
    std::string checkpoint_genomes; // latest population dump, empty = off
};

struct SearchResult {
    Genome best_genome;
    double best_fitness = 0.0;
    std::vector<double> fitness_trace; // best per generation, non-decreasing
    int generations_run = 0;
    double report_accuracy = 0.0;
};

namespace detail {

struct Individual {
    Genome genome;
    double fitness = 0.0;
};

// fitness descending, then genome lexicographic ascending
inline bool individual_before(const Individual& a, const Individual& b) {
    if (a.fitness != b.fitness) return a.fitness > b.fitness;
    return a.genome < b.genome;
}

} // namespace detail

// Observer sees each generation's sorted population (tests and checkpoints).
using GaObserver =
    std::function<void(int generation, const std::vector<Genome>&, const std::vector<double>&)>;

// Genetic search over genomes. The initial population holds the identity
// genome, any caller-provided genomes, then uniform random genomes. Each
// generation keeps the elite unchanged, breeds the rest by rank-weighted
// parent selection, uniform crossover and per-gene mutation, and stops once
// the best fitness stalls for `patience` generations.
inline SearchResult evolve(const FitnessContext& ctx, const GaConfig& cfg,
                           const std::vector<Genome>& initial_genomes = {},
                           const GaObserver& observer = nullptr) {
    if (cfg.population_size < 2)
        throw ConfigError("evolve: population_size must be >= 2");
    if (cfg.elite_fraction <= 0.0 || cfg.elite_fraction >= 1.0)
        throw ConfigError("evolve: elite_fraction must lie in (0,1)");

    const std::size_t q = ctx.q();
    const int p = static_cast<int>(ctx.p());
    const std::size_t pop_size = static_cast<std::size_t>(cfg.population_size);
    const double mut_rate = cfg.mutation_rate >= 0.0
                                ? cfg.mutation_rate
                                : 1.0 / static_cast<double>(std::max<std::size_t>(1, q));

    Rng rng(cfg.seed);
    std::vector<detail::Individual> pop;
    pop.reserve(pop_size);
    pop.push_back({identity_genome(ctx.p(), q), 0.0});
    for (const auto& g : initial_genomes) {
        if (pop.size() >= pop_size) break;
        if (g.size() != q)
            throw DimensionMismatch("evolve: seeded genome length mismatch");
        pop.push_back({g, 0.0});
    }
    while (pop.size() < pop_size) {
        Genome g;
        g.v.resize(q);
        for (std::size_t i = 0; i < q; ++i)
            g[i] = rng.uniform_int(0, p);
        pop.push_back({std::move(g), 0.0});
    }
    for (auto& ind : pop)
        ind.fitness = fitness(ind.genome, ctx);
    std::sort(pop.begin(), pop.end(), detail::individual_before);

    SearchResult result;
    result.best_genome = pop.front().genome;
    result.best_fitness = pop.front().fitness;
    result.fitness_trace.push_back(result.best_fitness);

    std::ofstream trace_csv;
    if (!cfg.checkpoint_csv.empty()) {
        trace_csv.open(cfg.checkpoint_csv);
        trace_csv << "generation,best_fitness,mean_fitness,adjustment_degree_of_best\n";
    }
    auto checkpoint = [&](int gen) {
        if (observer || trace_csv.is_open() || !cfg.checkpoint_genomes.empty()) {
            std::vector<Genome> genomes;
            std::vector<double> fits;
            genomes.reserve(pop.size());
            fits.reserve(pop.size());
            double total = 0.0;
            for (const auto& ind : pop) {
                genomes.push_back(ind.genome);
                fits.push_back(ind.fitness);
                total += ind.fitness;
            }
            if (observer) observer(gen, genomes, fits);
            if (trace_csv.is_open()) {
                trace_csv << gen << ',' << result.best_fitness << ','
                          << total / static_cast<double>(pop.size()) << ',';
                if (ctx.p() == ctx.q())
                    trace_csv << adjustment_degree(result.best_genome);
                trace_csv << '\n';
            }
            if (!cfg.checkpoint_genomes.empty())
                save_genomes(cfg.checkpoint_genomes, genomes);
        }
    };
    checkpoint(0);

    const std::size_t elite_n = std::min<std::size_t>(
        pop_size - 1,
        static_cast<std::size_t>(std::ceil(cfg.elite_fraction * static_cast<double>(pop_size))));
    // linear rank weights over the sorted population
    const double total_weight = static_cast<double>(pop_size) *
                                static_cast<double>(pop_size + 1) / 2.0;
    auto select_parent = [&]() -> const Genome& {
        double u = rng.uniform() * total_weight;
        for (std::size_t r = 0; r < pop_size; ++r) {
            u -= static_cast<double>(pop_size - r);
            if (u <= 0.0) return pop[r].genome;
        }
        return pop[pop_size - 1].genome;
    };

    int gen = 0;
    int stale = 0;
    while (gen < cfg.max_generations && stale < cfg.patience) {
        ++gen;
        // elite tier keeps the best distinct genomes; carrying clones would
        // starve the search of diversity on small spaces
        std::vector<detail::Individual> next;
        next.reserve(pop_size);
        for (const auto& ind : pop) {
            if (next.size() >= elite_n)
                break;
            bool duplicate = false;
            for (const auto& kept : next)
                if (kept.genome == ind.genome) {
                    duplicate = true;
                    break;
                }
            if (!duplicate)
                next.push_back(ind);
        }
        while (next.size() < pop_size) {
            const Genome& pa = select_parent();
            const Genome& pb = select_parent();
            Genome child;
            child.v.resize(q);
            for (std::size_t i = 0; i < q; ++i)
                child[i] = rng.uniform() < 0.5 ? pa[i] : pb[i];
            for (std::size_t i = 0; i < q; ++i)
                if (rng.uniform() < mut_rate)
                    child[i] = rng.uniform_int(0, p);
            detail::Individual ind{std::move(child), 0.0};
            ind.fitness = fitness(ind.genome, ctx);
            next.push_back(std::move(ind));
        }
        pop = std::move(next);
        std::sort(pop.begin(), pop.end(), detail::individual_before);

        if (pop.front().fitness > result.best_fitness) {
            result.best_fitness = pop.front().fitness;
            result.best_genome = pop.front().genome;
            stale = 0;
        } else {
            if (pop.front().fitness == result.best_fitness &&
                pop.front().genome < result.best_genome)
                result.best_genome = pop.front().genome;
            ++stale;
        }
        result.fitness_trace.push_back(result.best_fitness);
        checkpoint(gen);
    }
    result.generations_run = gen;
    result.report_accuracy = report_fitness(result.best_genome, ctx);
    return result;
}

// Exact argmax by enumerating every genome in lexicographic order; the
// strict comparison keeps the lexicographically first among ties.
inline SearchResult exhaustive_search(const FitnessContext& ctx) {
    const std::size_t q = ctx.q();
    const std::size_t p = ctx.p();
    double space = 1.0;
    for (std::size_t i = 0; i < q; ++i) {
        space *= static_cast<double>(p + 1);
        if (space > 1e6)
            throw SpaceTooLarge("exhaustive_search: (p+1)^q exceeds 1e6");
    }

    Genome g;
    g.v.assign(q, 0);
    SearchResult result;
    result.best_fitness = -1.0;
    for (;;) {
        const double f = fitness(g, ctx);
        if (f > result.best_fitness) {
            result.best_fitness = f;
            result.best_genome = g;
        }
        // next genome in lexicographic order, least-significant last
        std::size_t i = q;
        while (i > 0) {
            --i;
            if (g[i] < static_cast<int>(p)) {
                ++g[i];
                std::fill(g.v.begin() + static_cast<std::ptrdiff_t>(i) + 1, g.v.end(), 0);
                break;
            }
            if (i == 0) {
                result.fitness_trace.push_back(result.best_fitness);
                result.generations_run = 0;
                result.report_accuracy = report_fitness(result.best_genome, ctx);
                return result;
            }
        }
        if (q == 0) {
            result.fitness_trace.push_back(result.best_fitness);
            result.generations_run = 0;
            result.report_accuracy = report_fitness(result.best_genome, ctx);
            return result;
        }
    }
}

} // namespace cda
