#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "cda/autoencoder.hpp"
#include "cda/dataio.hpp"
#include "cda/error.hpp"
#include "cda/gasearch.hpp"
#include "cda/mapping.hpp"
#include "cda/matrix.hpp"

namespace cda {

// ---- exact k-NN under L1 distance ----

struct KnnModel {
    Matrix x;
    std::vector<int> y;
    int k = 1;
};

inline KnnModel knn_train(Matrix x, std::vector<int> y, int k = 1) {
    if (x.rows() == 0)
        throw EmptyTrainingSet("knn_train: no training rows");
    if (x.rows() != y.size())
        throw DimensionMismatch("knn_train: rows vs labels mismatch");
    if (k < 1)
        throw ConfigError("knn_train: k must be >= 1");
    return KnnModel{std::move(x), std::move(y), k};
}

inline double l1_distance(const double* a, const double* b, std::size_t n) {
    double d = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        d += std::abs(a[i] - b[i]);
    return d;
}

// Distance ties are broken by the lowest training index. For k > 1 the
// majority label wins; a vote tie falls to the label owning the closest
// tied neighbor.
inline std::vector<int> knn_classify(const KnnModel& model, const Matrix& queries) {
    if (queries.cols() != model.x.cols())
        throw DimensionMismatch("knn_classify: query width " + std::to_string(queries.cols()) +
                                " vs training width " + std::to_string(model.x.cols()));
    std::vector<int> out(queries.rows());
    const std::size_t k = static_cast<std::size_t>(model.k);
    std::vector<std::pair<double, std::size_t>> best; // (distance, index)
    for (std::size_t qi = 0; qi < queries.rows(); ++qi) {
        const double* qrow = queries.row(qi);
        if (k == 1) {
            double bd = std::numeric_limits<double>::infinity();
            std::size_t bi = 0;
            for (std::size_t r = 0; r < model.x.rows(); ++r) {
                const double d = l1_distance(model.x.row(r), qrow, model.x.cols());
                if (d < bd) {
                    bd = d;
                    bi = r;
                }
            }
            out[qi] = model.y[bi];
            continue;
        }
        best.clear();
        for (std::size_t r = 0; r < model.x.rows(); ++r) {
            const double d = l1_distance(model.x.row(r), qrow, model.x.cols());
            best.emplace_back(d, r);
        }
        std::sort(best.begin(), best.end());
        best.resize(std::min(k, best.size()));
        std::map<int, int> votes;
        for (const auto& [d, r] : best)
            ++votes[model.y[r]];
        int win_label = model.y[best.front().second];
        int win_count = 0;
        for (const auto& [d, r] : best) {
            const int c = votes[model.y[r]];
            if (c > win_count) { // first encountered = closest representative
                win_count = c;
                win_label = model.y[r];
            }
        }
        out[qi] = win_label;
    }
    return out;
}

inline double accuracy(const std::vector<int>& predicted, const std::vector<int>& truth) {
    if (predicted.size() != truth.size())
        throw LengthMismatch("accuracy: length mismatch");
    if (predicted.empty()) return 0.0;
    std::size_t equal = 0;
    for (std::size_t i = 0; i < predicted.size(); ++i)
        if (predicted[i] == truth[i])
            ++equal;
    return static_cast<double>(equal) / static_cast<double>(predicted.size());
}

// ---- symmetric eigendecomposition (cyclic Jacobi) ----

struct EigenDecomposition {
    std::vector<double> values; // descending
    Matrix vectors;             // columns are eigenvectors
};

// Cyclic-by-rows Jacobi rotations until the off-diagonal mass is negligible.
// Eigenvectors follow a fixed sign convention: the largest-magnitude
// component of each vector is made positive.
inline EigenDecomposition jacobi_eigen_symmetric(const Matrix& sym, int max_sweeps = 100) {
    if (sym.rows() != sym.cols())
        throw NonSquare("jacobi_eigen_symmetric: matrix not square");
    const std::size_t n = sym.rows();
    Matrix a = sym;
    Matrix v(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        v(i, i) = 1.0;

    double frob = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i)
        frob += a.data()[i] * a.data()[i];
    frob = std::sqrt(frob);
    const double stop = std::max(frob, 1.0e-300) * 1e-15;

    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t r = 0; r < n; ++r)
            for (std::size_t c = r + 1; c < n; ++c)
                off += 2.0 * a(r, c) * a(r, c);
        if (std::sqrt(off) <= stop)
            break;
        for (std::size_t pi = 0; pi + 1 < n; ++pi) {
            for (std::size_t qi = pi + 1; qi < n; ++qi) {
                const double apq = a(pi, qi);
                if (apq == 0.0)
                    continue;
                const double theta = (a(qi, qi) - a(pi, pi)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::abs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (std::size_t kk = 0; kk < n; ++kk) {
                    const double akp = a(kk, pi);
                    const double akq = a(kk, qi);
                    a(kk, pi) = c * akp - s * akq;
                    a(kk, qi) = s * akp + c * akq;
                }
                for (std::size_t kk = 0; kk < n; ++kk) {
                    const double apk = a(pi, kk);
                    const double aqk = a(qi, kk);
                    a(pi, kk) = c * apk - s * aqk;
                    a(qi, kk) = s * apk + c * aqk;
                }
                for (std::size_t kk = 0; kk < n; ++kk) {
                    const double vkp = v(kk, pi);
                    const double vkq = v(kk, qi);
                    v(kk, pi) = c * vkp - s * vkq;
                    v(kk, qi) = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i)
        order[i] = i;
    std::vector<double> diag(n);
    for (std::size_t i = 0; i < n; ++i)
        diag[i] = a(i, i);
    std::sort(order.begin(), order.end(), [&diag](std::size_t l, std::size_t r) {
        if (diag[l] != diag[r]) return diag[l] > diag[r];
        return l < r;
    });

    EigenDecomposition dec;
    dec.values.resize(n);
    dec.vectors = Matrix(n, n);
    for (std::size_t j = 0; j < n; ++j) {
        const std::size_t src = order[j];
        dec.values[j] = diag[src];
        std::size_t arg = 0;
        double mag = -1.0;
        for (std::size_t i = 0; i < n; ++i)
            if (std::abs(v(i, src)) > mag) {
                mag = std::abs(v(i, src));
                arg = i;
            }
        const double sign = v(arg, src) < 0.0 ? -1.0 : 1.0;
        for (std::size_t i = 0; i < n; ++i)
            dec.vectors(i, j) = sign * v(i, src);
    }
    return dec;
}

inline std::vector<double> column_means(const Matrix& x) {
    std::vector<double> mu(x.cols(), 0.0);
    for (std::size_t r = 0; r < x.rows(); ++r) {
        const double* row = x.row(r);
        for (std::size_t c = 0; c < x.cols(); ++c)
            mu[c] += row[c];
    }
    for (auto& m : mu)
        m /= static_cast<double>(x.rows());
    return mu;
}

// Sample covariance (1/(N-1)) of mean-centered data.
inline Matrix covariance(const Matrix& x, const std::vector<double>& mu) {
    Matrix centered(x.rows(), x.cols());
    for (std::size_t r = 0; r < x.rows(); ++r)
        for (std::size_t c = 0; c < x.cols(); ++c)
            centered(r, c) = x(r, c) - mu[c];
    Matrix cov = detail::matmul_tn(centered, centered);
    const double denom = x.rows() > 1 ? static_cast<double>(x.rows() - 1) : 1.0;
    for (std::size_t i = 0; i < cov.size(); ++i)
        cov.data()[i] /= denom;
    return cov;
}

// ---- evaluation reports ----

struct EvalReport {
    std::string method;
    std::string scenario;
    int depth = 0;
    double accuracy = 0.0;
    double adjustment_degree = std::numeric_limits<double>::quiet_NaN(); // NaN = n/a
    std::uint64_t seed = 0;
    std::string config_hash;
    double wall_seconds = 0.0;
};

// SDAE training hook so the harness can interpose a model cache; the
// default trains from scratch.
using ModelProvider = std::function<SdaeModel(const Matrix& data, const std::vector<DaeConfig>&)>;

inline SdaeModel default_model_provider(const Matrix& data, const std::vector<DaeConfig>& cfgs) {
    return train_sdae(data, cfgs);
}

// Per-layer training configs for one stack: sizes follow the fractional
// rule from the input width, seeds derive from the base seed per layer.
struct StackPlan {
    double epsilon0 = 1.0;
    int tau = 20;
    double corruption = 0.3;
    int max_iters = 500;
    int patience = 20;
    double size_rule = 2.0 / 3.0;
    std::vector<int> explicit_sizes; // overrides size_rule when non-empty
    std::uint64_t seed = 0;
    bool domain_specific_seeds = false; // distinct init per domain stream
};

inline std::vector<DaeConfig> plan_configs(std::size_t input, int depth, const StackPlan& plan,
                                           std::uint64_t domain_stream = 0) {
    if (depth < 1)
        throw ConfigError("plan_configs: depth must be >= 1");
    std::vector<std::size_t> sizes;
    if (!plan.explicit_sizes.empty()) {
        if (static_cast<int>(plan.explicit_sizes.size()) < depth)
            throw ConfigError("plan_configs: explicit_sizes shorter than depth");
        sizes.push_back(input);
        for (int k = 0; k < depth; ++k)
            sizes.push_back(static_cast<std::size_t>(plan.explicit_sizes[static_cast<std::size_t>(k)]));
    } else {
        sizes = size_chain(input, depth, plan.size_rule);
    }
    std::vector<DaeConfig> cfgs;
    for (int k = 0; k < depth; ++k) {
        DaeConfig c;
        c.hidden_size = static_cast<int>(sizes[static_cast<std::size_t>(k) + 1]);
        c.epsilon0 = plan.epsilon0;
        c.tau = plan.tau;
        c.corruption = plan.corruption;
        c.max_iters = plan.max_iters;
        c.patience = plan.patience;
        const std::uint64_t stream = plan.domain_specific_seeds ? domain_stream : 0;
        c.seed = mix_seed(plan.seed, static_cast<std::uint64_t>(k) * 16 + stream);
        cfgs.push_back(c);
    }
    return cfgs;
}

// Target splits used by the searching methods: fitness is scored on
// `search`, the report accuracy comes from the disjoint `report`.
struct TargetSplit {
    Dataset search;
    Dataset report;
};

// 1-NN on raw pixels, source to target.
inline EvalReport no_adapt_baseline(const Dataset& source, const Dataset& target) {
    const KnnModel model = knn_train(source.pixel_matrix(), source.labels(), 1);
    const std::vector<int> pred = knn_classify(model, target.pixel_matrix());
    EvalReport rep;
    rep.method = "no_adapt";
    rep.depth = 0;
    rep.accuracy = accuracy(pred, target.labels());
    return rep;
}

namespace detail {

inline double packed_1nn_accuracy(const PackedReps& refs, const PackedReps& queries) {
    std::size_t correct = 0;
    for (std::size_t r = 0; r < queries.rows; ++r)
        if (packed_nearest_label(refs, queries.row(r)) == queries.labels[r])
            ++correct;
    return queries.rows == 0 ? 0.0
                             : static_cast<double>(correct) / static_cast<double>(queries.rows);
}

inline Matrix vstack(const Matrix& a, const Matrix& b) {
    if (a.cols() != b.cols())
        throw DimensionMismatch("vstack: widths differ");
    Matrix out(a.rows() + b.rows(), a.cols());
    std::copy(a.data(), a.data() + a.size(), out.data());
    std::copy(b.data(), b.data() + b.size(), out.data() + a.size());
    return out;
}

inline BinaryMatrix hconcat(const BinaryMatrix& a, const BinaryMatrix& b) {
    if (a.rows() != b.rows())
        throw DimensionMismatch("hconcat: row counts differ");
    BinaryMatrix out(a.rows(), a.cols() + b.cols());
    for (std::size_t r = 0; r < a.rows(); ++r) {
        std::copy(a.row(r), a.row(r) + a.cols(), out.row(r));
        std::copy(b.row(r), b.row(r) + b.cols(), out.row(r) + a.cols());
    }
    return out;
}

} // namespace detail

// One network trained on the union of both domains; source representations
// classify target representations with no mapping applied.
inline EvalReport joint_baseline(const Dataset& source, const Dataset& target, int depth,
                                 const StackPlan& plan, const Dataset* target_score = nullptr,
                                 const ModelProvider& provider = default_model_provider) {
    const Dataset& score = target_score ? *target_score : target;
    if (source.empty() || target.empty() || score.empty())
        throw EmptyTrainingSet("joint_baseline: empty dataset");
    const Matrix src_px = source.pixel_matrix();
    const Matrix tgt_px = target.pixel_matrix();
    if (src_px.cols() != tgt_px.cols())
        throw DimensionMismatch("joint_baseline: input widths differ");
    const Matrix joint_data = detail::vstack(src_px, tgt_px);
    const SdaeModel model = provider(joint_data, plan_configs(src_px.cols(), depth, plan, 2));

    const PackedReps src_reps = pack_reps(binarize(encode(model, src_px)), source.labels());
    const PackedReps tgt_reps =
        pack_reps(binarize(encode(model, score.pixel_matrix())), score.labels());
    EvalReport rep;
    rep.method = "joint";
    rep.depth = depth;
    rep.accuracy = detail::packed_1nn_accuracy(src_reps, tgt_reps);
    return rep;
}

// Adjustment on top of the jointly trained network: both domains share one
// representation space, and the mapping search re-assigns its units. The
// deviation of the best mapping from the identity is the depth profile the
// sweep records, since unit indices are only comparable within one network.
inline EvalReport joint_adjust(const Dataset& source, const Dataset& target, int depth,
                               const GaConfig& ga, const StackPlan& plan,
                               const TargetSplit* split = nullptr,
                               SearchResult* search_out = nullptr,
                               const ModelProvider& provider = default_model_provider) {
    if (source.empty() || target.empty())
        throw EmptyTrainingSet("joint_adjust: empty dataset");
    const Matrix src_px = source.pixel_matrix();
    const Matrix tgt_px = target.pixel_matrix();
    if (src_px.cols() != tgt_px.cols())
        throw DimensionMismatch("joint_adjust: input widths differ");
    const SdaeModel model =
        provider(detail::vstack(src_px, tgt_px), plan_configs(src_px.cols(), depth, plan, 2));

    const BinaryMatrix src_reps = binarize(encode(model, src_px));
    BinaryMatrix search_reps, report_reps;
    std::vector<int> search_labels, report_labels;
    if (split) {
        search_reps = binarize(encode(model, split->search.pixel_matrix()));
        search_labels = split->search.labels();
        report_reps = binarize(encode(model, split->report.pixel_matrix()));
        report_labels = split->report.labels();
    } else {
        search_reps = binarize(encode(model, tgt_px));
        search_labels = target.labels();
        report_reps = search_reps;
        report_labels = search_labels;
    }
    const FitnessContext ctx = make_fitness_context(src_reps, source.labels(), search_reps,
                                                    std::move(search_labels), report_reps,
                                                    std::move(report_labels));
    const SearchResult result = evolve(ctx, ga);

    EvalReport rep;
    rep.method = "joint_adjust";
    rep.depth = depth;
    rep.accuracy = result.report_accuracy;
    rep.adjustment_degree = adjustment_degree(result.best_genome); // n x n by construction
    if (search_out)
        *search_out = result;
    return rep;
}

// Separate per-domain networks aligned by the genetic search; reports the
// report-split accuracy and, when square, the adjustment degree of the best
// mapping.
inline EvalReport conceptual_adapt(const Dataset& source, const Dataset& target, int depth,
                                   const GaConfig& ga, const StackPlan& plan,
                                   const TargetSplit* split = nullptr,
                                   SearchResult* search_out = nullptr,
                                   const ModelProvider& provider = default_model_provider) {
    if (source.empty() || target.empty())
        throw EmptyTrainingSet("conceptual_adapt: empty dataset");
    const Matrix src_px = source.pixel_matrix();
    const Matrix tgt_px = target.pixel_matrix();
    const SdaeModel src_model = provider(src_px, plan_configs(src_px.cols(), depth, plan, 0));
    const SdaeModel tgt_model = provider(tgt_px, plan_configs(tgt_px.cols(), depth, plan, 1));

    const BinaryMatrix src_reps = binarize(encode(src_model, src_px));
    BinaryMatrix search_reps, report_reps;
    std::vector<int> search_labels, report_labels;
    if (split) {
        search_reps = binarize(encode(tgt_model, split->search.pixel_matrix()));
        search_labels = split->search.labels();
        report_reps = binarize(encode(tgt_model, split->report.pixel_matrix()));
        report_labels = split->report.labels();
    } else {
        // transductive mode: all target data plays both roles
        search_reps = binarize(encode(tgt_model, tgt_px));
        search_labels = target.labels();
        report_reps = search_reps;
        report_labels = search_labels;
    }
    const FitnessContext ctx = make_fitness_context(src_reps, source.labels(), search_reps,
                                                    std::move(search_labels), report_reps,
                                                    std::move(report_labels));
    const SearchResult result = evolve(ctx, ga);

    EvalReport rep;
    rep.method = "separate";
    rep.depth = depth;
    rep.accuracy = result.report_accuracy;
    if (ctx.p() == ctx.q())
        rep.adjustment_degree = adjustment_degree(result.best_genome);
    if (search_out)
        *search_out = result;
    return rep;
}

namespace detail {

// Initial genomes for the concatenated search per the block scheme: the
// joint block maps diagonally, the separate block is zero for the first
// genome and uniformly random afterwards.
inline std::vector<Genome> block_seed_genomes(std::size_t n, std::size_t p, std::size_t q,
                                              std::size_t count, std::uint64_t seed) {
    std::vector<Genome> out;
    Rng rng(mix_seed(seed, 0x626c6f63)); // "bloc"
    for (std::size_t g = 0; g < count; ++g) {
        Genome v;
        v.v.assign(n + q, 0);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = static_cast<int>(i) + 1;
        if (g > 0)
            for (std::size_t i = 0; i < q; ++i) {
                const int pick = rng.uniform_int(0, static_cast<int>(p));
                v[n + i] = pick == 0 ? 0 : static_cast<int>(n) + pick;
            }
        out.push_back(std::move(v));
    }
    return out;
}

} // namespace detail

// Concatenates the joint-network and separate-network representations per
// sample and searches the block-structured mapping space.
inline EvalReport concat_adapt(const Dataset& source, const Dataset& target, int depth,
                               const GaConfig& ga, const StackPlan& plan,
                               const TargetSplit* split = nullptr,
                               SearchResult* search_out = nullptr,
                               const ModelProvider& provider = default_model_provider) {
    if (source.empty() || target.empty())
        throw EmptyTrainingSet("concat_adapt: empty dataset");
    const Matrix src_px = source.pixel_matrix();
    const Matrix tgt_px = target.pixel_matrix();
    if (src_px.cols() != tgt_px.cols())
        throw DimensionMismatch("concat_adapt: input widths differ");
    const SdaeModel joint_model =
        provider(detail::vstack(src_px, tgt_px), plan_configs(src_px.cols(), depth, plan, 2));
    const SdaeModel src_model = provider(src_px, plan_configs(src_px.cols(), depth, plan, 0));
    const SdaeModel tgt_model = provider(tgt_px, plan_configs(tgt_px.cols(), depth, plan, 1));

    auto concat_target = [&](const Matrix& px) {
        return detail::hconcat(binarize(encode(joint_model, px)),
                               binarize(encode(tgt_model, px)));
    };
    const BinaryMatrix src_reps = detail::hconcat(binarize(encode(joint_model, src_px)),
                                                  binarize(encode(src_model, src_px)));

    BinaryMatrix search_reps, report_reps;
    std::vector<int> search_labels, report_labels;
    if (split) {
        search_reps = concat_target(split->search.pixel_matrix());
        search_labels = split->search.labels();
        report_reps = concat_target(split->report.pixel_matrix());
        report_labels = split->report.labels();
    } else {
        search_reps = concat_target(tgt_px);
        search_labels = target.labels();
        report_reps = search_reps;
        report_labels = search_labels;
    }

    const std::size_t n = joint_model.top_size();
    const std::size_t p = tgt_model.top_size();
    const std::size_t q = src_model.top_size();
    const FitnessContext ctx = make_fitness_context(src_reps, source.labels(), search_reps,
                                                    std::move(search_labels), report_reps,
                                                    std::move(report_labels));
    const std::vector<Genome> seeds = detail::block_seed_genomes(
        n, p, q, static_cast<std::size_t>(ga.population_size) - 1, ga.seed);
    const SearchResult result = evolve(ctx, ga, seeds);

    EvalReport rep;
    rep.method = "concat";
    rep.depth = depth;
    rep.accuracy = result.report_accuracy;
    if (ctx.p() == ctx.q())
        rep.adjustment_degree = adjustment_degree(result.best_genome);
    if (search_out)
        *search_out = result;
    return rep;
}

// Concept-alignment audit with class labels standing in for concepts:
// every cross-domain pair of same-class rows is flagged aligned when it
// activates identical unit sets. Locality statistics cover all rows of both
// sides.
inline AlignmentReport alignment_profile(const BinaryMatrix& src,
                                         const std::vector<int>& src_labels,
                                         const BinaryMatrix& tgt,
                                         const std::vector<int>& tgt_labels) {
    if (src.cols() != tgt.cols())
        throw DimensionMismatch("alignment_profile: representation widths differ");
    if (src.rows() != src_labels.size() || tgt.rows() != tgt_labels.size())
        throw DimensionMismatch("alignment_profile: label counts mismatch");
    AlignmentReport rep = locality_profile(src);
    const AlignmentReport tgt_loc = locality_profile(tgt);
    rep.n_rows += tgt_loc.n_rows;
    rep.n_local += tgt_loc.n_local;
    rep.n_strictly_local += tgt_loc.n_strictly_local;
    for (std::size_t i = 0; i < src.rows(); ++i)
        for (std::size_t j = 0; j < tgt.rows(); ++j) {
            if (src_labels[i] != tgt_labels[j])
                continue;
            bool aligned = true;
            for (std::size_t h = 0; h < src.cols(); ++h)
                if ((src(i, h) != 0) != (tgt(j, h) != 0)) {
                    aligned = false;
                    break;
                }
            rep.pair_aligned.push_back(aligned ? 1 : 0);
        }
    return rep;
}

// Pieces of the subspace-alignment computation, exposed for diagnostics.
struct SubspaceParts {
    EigenDecomposition source_eig;
    EigenDecomposition target_eig;
    Matrix p_s; // D x d
    Matrix p_t; // D x d
    Matrix m_a; // d x d alignment transform
};

// PCA-subspace alignment baseline: project each domain onto its top-d
// principal directions, align the source basis onto the target basis via
// M_a = P_s^T P_t, then 1-NN in the aligned space.
inline EvalReport subspace_alignment_baseline(const Dataset& source, const Dataset& target, int d,
                                              const Dataset* target_score = nullptr,
                                              SubspaceParts* parts_out = nullptr) {
    const Dataset& score = target_score ? *target_score : target;
    if (source.empty() || target.empty() || score.empty())
        throw EmptyTrainingSet("subspace_alignment_baseline: empty dataset");
    const Matrix xs = source.pixel_matrix();
    const Matrix xt = target.pixel_matrix();
    if (xs.cols() != xt.cols())
        throw DimensionMismatch("subspace_alignment_baseline: pixel widths differ");
    const std::size_t dim = xs.cols();
    if (d < 1 || static_cast<std::size_t>(d) > std::min({xs.rows(), xt.rows(), dim}))
        throw DimensionMismatch("subspace_alignment_baseline: d out of range");

    const std::vector<double> mu_s = column_means(xs);
    const std::vector<double> mu_t = column_means(xt);
    const EigenDecomposition eig_s = jacobi_eigen_symmetric(covariance(xs, mu_s));
    const EigenDecomposition eig_t = jacobi_eigen_symmetric(covariance(xt, mu_t));

    // positive means clearly above eigenvalue noise for this matrix
    auto count_positive = [](const EigenDecomposition& e) {
        const double lead = e.values.empty() ? 0.0 : std::max(e.values.front(), 0.0);
        const double tol = lead * 1e-10;
        std::size_t n = 0;
        for (double v : e.values)
            if (v > tol && v > 0.0)
                ++n;
        return n;
    };
    if (count_positive(eig_s) < static_cast<std::size_t>(d))
        throw RankDeficient("subspace_alignment_baseline: source covariance has fewer than " +
                            std::to_string(d) + " positive eigenvalues");
    if (count_positive(eig_t) < static_cast<std::size_t>(d))
        throw RankDeficient("subspace_alignment_baseline: target covariance has fewer than " +
                            std::to_string(d) + " positive eigenvalues");

    Matrix p_s(dim, static_cast<std::size_t>(d));
    Matrix p_t(dim, static_cast<std::size_t>(d));
    for (std::size_t i = 0; i < dim; ++i)
        for (int j = 0; j < d; ++j) {
            p_s(i, static_cast<std::size_t>(j)) = eig_s.vectors(i, static_cast<std::size_t>(j));
            p_t(i, static_cast<std::size_t>(j)) = eig_t.vectors(i, static_cast<std::size_t>(j));
        }
    const Matrix m_a = matmul(transpose(p_s), p_t);

    auto center = [](const Matrix& x, const std::vector<double>& mu) {
        Matrix c(x.rows(), x.cols());
        for (std::size_t r = 0; r < x.rows(); ++r)
            for (std::size_t cc = 0; cc < x.cols(); ++cc)
                c(r, cc) = x(r, cc) - mu[cc];
        return c;
    };
    const Matrix src_aligned = matmul(matmul(center(xs, mu_s), p_s), m_a);
    const Matrix tgt_proj = matmul(center(score.pixel_matrix(), mu_t), p_t);

    const KnnModel model = knn_train(src_aligned, source.labels(), 1);
    const std::vector<int> pred = knn_classify(model, tgt_proj);

    if (parts_out)
        *parts_out = SubspaceParts{eig_s, eig_t, p_s, p_t, m_a};

    EvalReport rep;
    rep.method = "subspace";
    rep.depth = 0;
    rep.accuracy = accuracy(pred, score.labels());
    return rep;
}

} // namespace cda
