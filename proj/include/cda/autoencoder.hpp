#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

#include "cda/error.hpp"
#include "cda/matrix.hpp"
#include "cda/random.hpp"

namespace cda {

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// One de-noising auto-encoder: sigmoid encoder and sigmoid decoder trained
// to reconstruct the clean input from a corrupted encoding pass.
struct DaeLayer {
    Matrix w_enc; // hidden x visible
    std::vector<double> b_enc;
    Matrix w_dec; // visible x hidden
    std::vector<double> b_dec;

    std::size_t visible() const { return w_enc.cols(); }
    std::size_t hidden() const { return w_enc.rows(); }
};

struct DaeConfig {
    int hidden_size = 0;
    double epsilon0 = 1.0;   // initial learning rate
    int tau = 20;            // iterations before the rate starts decaying
    double corruption = 0.0; // per-component masking probability
    int max_iters = 500;
    int patience = 20;
    std::uint64_t seed = 0;
};

struct SdaeModel {
    std::vector<DaeLayer> layers;
    std::vector<std::size_t> layer_sizes; // visible of layer 1 first

    std::size_t input_size() const { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
    std::size_t top_size() const { return layer_sizes.empty() ? 0 : layer_sizes.back(); }
    int depth() const { return static_cast<int>(layers.size()); }
};

struct RepresentationMatrix {
    Matrix continuous;   // N x d activations in (0,1)
    BinaryMatrix binary; // step function at 0.5
    std::vector<int> labels;
};

// Learning-rate schedule: constant at epsilon0 until tau, then decays as
// epsilon0 * tau / t.
inline double lr_schedule(int t, double epsilon0, int tau) {
    return epsilon0 * static_cast<double>(tau) / static_cast<double>(std::max(t, tau));
}

namespace detail {

// H = sigmoid(X * W^T + b), W given as rows of per-unit weights
inline Matrix affine_sigmoid(const Matrix& x, const Matrix& w, const std::vector<double>& b) {
    if (x.cols() != w.cols())
        throw DimensionMismatch("affine_sigmoid: input width " + std::to_string(x.cols()) +
                                " vs weight fan-in " + std::to_string(w.cols()));
    Matrix h(x.rows(), w.rows());
    for (std::size_t n = 0; n < x.rows(); ++n) {
        const double* xr = x.row(n);
        double* hr = h.row(n);
        for (std::size_t j = 0; j < w.rows(); ++j) {
            const double* wr = w.row(j);
            double acc = b[j];
            for (std::size_t k = 0; k < x.cols(); ++k)
                acc += wr[k] * xr[k];
            hr[j] = sigmoid(acc);
        }
    }
    return h;
}

// C = A^T * B over the sample axis: C(i,j) = sum_n A(n,i) * B(n,j)
inline Matrix matmul_tn(const Matrix& a, const Matrix& b) {
    Matrix c(a.cols(), b.cols(), 0.0);
    for (std::size_t n = 0; n < a.rows(); ++n) {
        const double* ar = a.row(n);
        const double* br = b.row(n);
        for (std::size_t i = 0; i < a.cols(); ++i) {
            const double v = ar[i];
            if (v == 0.0) continue;
            double* cr = c.row(i);
            for (std::size_t j = 0; j < b.cols(); ++j)
                cr[j] += v * br[j];
        }
    }
    return c;
}

inline DaeLayer init_layer(std::size_t visible, std::size_t hidden, Rng& rng) {
    DaeLayer l;
    l.w_enc = Matrix(hidden, visible);
    l.w_dec = Matrix(visible, hidden);
    l.b_enc.assign(hidden, 0.0);
    l.b_dec.assign(visible, 0.0);
    const double a_enc = 1.0 / std::sqrt(static_cast<double>(visible));
    for (std::size_t i = 0; i < l.w_enc.size(); ++i)
        l.w_enc.data()[i] = rng.uniform(-a_enc, a_enc);
    const double a_dec = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (std::size_t i = 0; i < l.w_dec.size(); ++i)
        l.w_dec.data()[i] = rng.uniform(-a_dec, a_dec);
    return l;
}

} // namespace detail

// Mean over samples of the squared Euclidean reconstruction error, with
// corruption disabled.
inline double reconstruction_error(const DaeLayer& layer, const Matrix& data) {
    if (data.cols() != layer.visible())
        throw DimensionMismatch("reconstruction_error: data width " + std::to_string(data.cols()) +
                                " vs layer visible " + std::to_string(layer.visible()));
    const Matrix h = detail::affine_sigmoid(data, layer.w_enc, layer.b_enc);
    const Matrix z = detail::affine_sigmoid(h, layer.w_dec, layer.b_dec);
    double total = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i) {
        const double d = z.data()[i] - data.data()[i];
        total += d * d;
    }
    return total / static_cast<double>(data.rows());
}

struct TrainStats {
    int iterations = 0;
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

struct DaeGradients {
    Matrix w_enc;
    std::vector<double> b_enc;
    Matrix w_dec;
    std::vector<double> b_dec;
    double loss = 0.0;
};

// Objective value for one forward pass: mean over samples of the squared
// Euclidean error reconstructing `clean` from `input` (the possibly
// corrupted encoding pass).
inline double dae_loss(const DaeLayer& layer, const Matrix& clean, const Matrix& input) {
    const Matrix h = detail::affine_sigmoid(input, layer.w_enc, layer.b_enc);
    const Matrix z = detail::affine_sigmoid(h, layer.w_dec, layer.b_dec);
    double loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double diff = z.data()[i] - clean.data()[i];
        loss += diff * diff;
    }
    return loss / static_cast<double>(clean.rows());
}

// Analytic gradients of dae_loss with respect to every parameter tensor.
inline DaeGradients dae_backprop(const DaeLayer& layer, const Matrix& clean, const Matrix& input) {
    const std::size_t n = clean.rows();
    const std::size_t d = clean.cols();
    const std::size_t hd = layer.hidden();

    const Matrix h = detail::affine_sigmoid(input, layer.w_enc, layer.b_enc);
    const Matrix z = detail::affine_sigmoid(h, layer.w_dec, layer.b_dec);

    DaeGradients g;
    g.loss = 0.0;
    for (std::size_t i = 0; i < z.size(); ++i) {
        const double diff = z.data()[i] - clean.data()[i];
        g.loss += diff * diff;
    }
    g.loss /= static_cast<double>(n);

    // delta at the decoder pre-activation, 2/N folded in
    Matrix dz(n, d);
    for (std::size_t i = 0; i < dz.size(); ++i) {
        const double zi = z.data()[i];
        dz.data()[i] = 2.0 / static_cast<double>(n) * (zi - clean.data()[i]) * zi * (1.0 - zi);
    }
    g.w_dec = detail::matmul_tn(dz, h); // visible x hidden
    Matrix dh = matmul(dz, layer.w_dec);
    for (std::size_t i = 0; i < dh.size(); ++i) {
        const double hi = h.data()[i];
        dh.data()[i] *= hi * (1.0 - hi);
    }
    g.w_enc = detail::matmul_tn(dh, input); // hidden x visible
    g.b_dec.assign(d, 0.0);
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t r = 0; r < n; ++r)
            g.b_dec[j] += dz(r, j);
    g.b_enc.assign(hd, 0.0);
    for (std::size_t j = 0; j < hd; ++j)
        for (std::size_t r = 0; r < n; ++r)
            g.b_enc[j] += dh(r, j);
    return g;
}

namespace detail {

// Full-batch gradient descent on the de-noising reconstruction objective.
// use_masking runs the corruption branch even at rate 0, which must not
// change the trajectory.
inline DaeLayer train_dae_impl(const Matrix& data, const DaeConfig& cfg, bool use_masking,
                               TrainStats* stats) {
    if (data.rows() < 1 || data.cols() < 1)
        throw DimensionMismatch("train_dae: empty data");
    if (cfg.hidden_size < 1)
        throw DimensionMismatch("train_dae: hidden_size must be >= 1");
    if (!(cfg.epsilon0 > 0.0) || cfg.tau < 1 || cfg.corruption < 0.0 || cfg.corruption >= 1.0)
        throw ConfigError("train_dae: invalid config (epsilon0 > 0, tau >= 1, corruption in [0,1))");

    const std::size_t d = data.cols();
    const std::size_t hd = static_cast<std::size_t>(cfg.hidden_size);

    Rng rng(cfg.seed);
    DaeLayer layer = init_layer(d, hd, rng);

    double best_loss = std::numeric_limits<double>::infinity();
    int stale = 0;
    Matrix corrupted = data;

    for (int t = 1; t <= cfg.max_iters; ++t) {
        const double lr = lr_schedule(t, cfg.epsilon0, cfg.tau);

        const Matrix* input = &data;
        if (use_masking) {
            corrupted = data;
            for (std::size_t i = 0; i < corrupted.size(); ++i)
                if (rng.uniform() < cfg.corruption)
                    corrupted.data()[i] = 0.0;
            input = &corrupted;
        }

        const DaeGradients g = dae_backprop(layer, data, *input);
        if (!std::isfinite(g.loss))
            throw NonFiniteLoss("training diverged at iteration " + std::to_string(t) +
                                " (learning rate too large)");
        if (stats) {
            if (t == 1) stats->initial_loss = g.loss;
            stats->final_loss = g.loss;
            stats->iterations = t;
        }
        if (g.loss < best_loss) {
            best_loss = g.loss;
            stale = 0;
        } else {
            ++stale;
        }

        for (std::size_t i = 0; i < layer.w_dec.size(); ++i)
            layer.w_dec.data()[i] -= lr * g.w_dec.data()[i];
        for (std::size_t i = 0; i < layer.w_enc.size(); ++i)
            layer.w_enc.data()[i] -= lr * g.w_enc.data()[i];
        for (std::size_t j = 0; j < d; ++j)
            layer.b_dec[j] -= lr * g.b_dec[j];
        for (std::size_t j = 0; j < hd; ++j)
            layer.b_enc[j] -= lr * g.b_enc[j];

        if (stale >= cfg.patience)
            break;
    }
    return layer;
}

} // namespace detail

inline DaeLayer train_dae(const Matrix& data, const DaeConfig& cfg, TrainStats* stats = nullptr) {
    return detail::train_dae_impl(data, cfg, cfg.corruption > 0.0, stats);
}

// Layer-wise stack: layer k trains on the uncorrupted activations of layer
// k-1; layer 1 trains on the input.
inline SdaeModel train_sdae(const Matrix& data, const std::vector<DaeConfig>& layer_configs) {
    if (layer_configs.empty())
        throw DimensionMismatch("train_sdae: need at least one layer config");
    SdaeModel model;
    model.layer_sizes.push_back(data.cols());
    Matrix acts = data;
    for (std::size_t k = 0; k < layer_configs.size(); ++k) {
        DaeLayer layer;
        try {
            layer = train_dae(acts, layer_configs[k]);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss("layer " + std::to_string(k + 1) + ": " + e.what());
        }
        acts = detail::affine_sigmoid(acts, layer.w_enc, layer.b_enc);
        model.layer_sizes.push_back(layer.hidden());
        model.layers.push_back(std::move(layer));
    }
    return model;
}

// Extends an already trained stack with further layers; layer k+1 trains on
// the current top activations of `data`.
inline void extend_sdae(SdaeModel& model, const Matrix& data,
                        const std::vector<DaeConfig>& more_configs) {
    Matrix acts = data;
    for (const auto& l : model.layers)
        acts = detail::affine_sigmoid(acts, l.w_enc, l.b_enc);
    for (std::size_t k = 0; k < more_configs.size(); ++k) {
        DaeLayer layer;
        try {
            layer = train_dae(acts, more_configs[k]);
        } catch (const NonFiniteLoss& e) {
            throw NonFiniteLoss("layer " + std::to_string(model.layers.size() + 1) + ": " + e.what());
        }
        acts = detail::affine_sigmoid(acts, layer.w_enc, layer.b_enc);
        model.layer_sizes.push_back(layer.hidden());
        model.layers.push_back(std::move(layer));
    }
}

// Forward pass through all encoder halves.
inline Matrix encode(const SdaeModel& model, const Matrix& data) {
    if (model.layers.empty())
        throw DimensionMismatch("encode: empty model");
    if (data.cols() != model.input_size())
        throw DimensionMismatch("encode: data width " + std::to_string(data.cols()) +
                                " vs model input " + std::to_string(model.input_size()));
    Matrix acts = detail::affine_sigmoid(data, model.layers[0].w_enc, model.layers[0].b_enc);
    for (std::size_t k = 1; k < model.layers.size(); ++k)
        acts = detail::affine_sigmoid(acts, model.layers[k].w_enc, model.layers[k].b_enc);
    return acts;
}

// Step function at 0.5, boundary inclusive.
inline BinaryMatrix binarize(const Matrix& activations) {
    BinaryMatrix b(activations.rows(), activations.cols());
    for (std::size_t i = 0; i < activations.rows(); ++i)
        for (std::size_t j = 0; j < activations.cols(); ++j)
            b(i, j) = activations(i, j) >= 0.5 ? 1 : 0;
    return b;
}

inline RepresentationMatrix make_representation(const SdaeModel& model, const Matrix& data,
                                                std::vector<int> labels) {
    RepresentationMatrix rep;
    rep.continuous = encode(model, data);
    rep.binary = binarize(rep.continuous);
    rep.labels = std::move(labels);
    return rep;
}

// Hidden-size chain under the fractional sizing rule, floor applied.
// rule = 2/3 gives the 2L/3 chain used throughout the experiments.
inline std::vector<std::size_t> size_chain(std::size_t input, int depth, double rule = 2.0 / 3.0) {
    std::vector<std::size_t> sizes{input};
    for (int k = 0; k < depth; ++k) {
        const auto next =
            static_cast<std::size_t>(std::floor(static_cast<double>(sizes.back()) * rule));
        sizes.push_back(std::max<std::size_t>(1, next));
    }
    return sizes;
}

// ---- hyper-parameter grid search ----

// Evaluates explicit candidates on a seeded 80/20 split by held-out
// reconstruction error; the first strictly-best candidate in list order
// wins, so pre-sorted lists implement the tie-break rule.
inline DaeConfig grid_search_configs(const Matrix& data, const std::vector<DaeConfig>& candidates,
                                     std::uint64_t split_seed) {
    if (candidates.empty())
        throw ConfigError("grid_search: no candidates");
    std::vector<std::size_t> idx(data.rows());
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng(mix_seed(split_seed, 0x67726964)); // "grid"
    rng.shuffle(idx);
    const std::size_t n_val = std::max<std::size_t>(1, data.rows() / 5);
    const std::size_t n_train = data.rows() - n_val;
    if (n_train < 1)
        throw DimensionMismatch("grid_search: not enough samples to split");
    Matrix train(n_train, data.cols());
    Matrix val(n_val, data.cols());
    for (std::size_t i = 0; i < n_train; ++i)
        std::copy(data.row(idx[i]), data.row(idx[i]) + data.cols(), train.row(i));
    for (std::size_t i = 0; i < n_val; ++i)
        std::copy(data.row(idx[n_train + i]), data.row(idx[n_train + i]) + data.cols(),
                  val.row(i));

    double best_err = std::numeric_limits<double>::infinity();
    std::size_t best = 0;
    for (std::size_t c = 0; c < candidates.size(); ++c) {
        const DaeLayer layer = train_dae(train, candidates[c]);
        const double err = reconstruction_error(layer, val);
        if (err < best_err) {
            best_err = err;
            best = c;
        }
    }
    return candidates[best];
}

// Builds the candidate grid in tie-break order (hidden ascending, then
// learning rate, then corruption) and picks the best by validation error.
inline DaeConfig grid_search_layer(const Matrix& data, std::vector<int> hidden_choices,
                                   std::vector<double> lr_choices,
                                   std::vector<double> corruption_choices,
                                   const DaeConfig& base) {
    std::sort(hidden_choices.begin(), hidden_choices.end());
    hidden_choices.erase(std::unique(hidden_choices.begin(), hidden_choices.end()),
                         hidden_choices.end());
    std::sort(lr_choices.begin(), lr_choices.end());
    std::sort(corruption_choices.begin(), corruption_choices.end());
    std::vector<DaeConfig> candidates;
    for (int hs : hidden_choices)
        for (double lr : lr_choices)
            for (double corr : corruption_choices) {
                DaeConfig c = base;
                c.hidden_size = hs;
                c.epsilon0 = lr;
                c.corruption = corr;
                candidates.push_back(c);
            }
    return grid_search_configs(data, candidates, base.seed);
}

// Hidden-size candidate set {L, 2L/3, L/2, L/5}, floored and deduplicated.
inline std::vector<int> hidden_grid_for(int prev_size) {
    std::vector<int> v{prev_size, (2 * prev_size) / 3, prev_size / 2, prev_size / 5};
    for (auto& x : v) x = std::max(1, x);
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v;
}

// ---- model serialization: versioned flat binary, bit-exact round trip ----

namespace detail {

constexpr char kModelMagic[4] = {'S', 'D', 'A', 'E'};
constexpr std::uint32_t kModelVersion = 1;

inline void write_u32(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 24)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

inline std::uint32_t read_u32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFile(path + ": truncated header");
    return std::uint32_t(b[0]) | (std::uint32_t(b[1]) << 8) | (std::uint32_t(b[2]) << 16) |
           (std::uint32_t(b[3]) << 24);
}

inline void write_doubles(std::ostream& out, const double* p, std::size_t n) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

inline void read_doubles(std::istream& in, double* p, std::size_t n, const std::string& path) {
    if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double))))
        throw TruncatedFile(path + ": truncated parameter block");
}

} // namespace detail

inline void save_model(const std::string& path, const SdaeModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open " + path + " for writing");
    out.write(detail::kModelMagic, 4);
    detail::write_u32(out, detail::kModelVersion);
    detail::write_u32(out, static_cast<std::uint32_t>(model.layers.size()));
    for (std::size_t s : model.layer_sizes)
        detail::write_u32(out, static_cast<std::uint32_t>(s));
    for (const auto& l : model.layers) {
        detail::write_doubles(out, l.w_enc.data(), l.w_enc.size());
        detail::write_doubles(out, l.b_enc.data(), l.b_enc.size());
        detail::write_doubles(out, l.w_dec.data(), l.w_dec.size());
        detail::write_doubles(out, l.b_dec.data(), l.b_dec.size());
    }
    if (!out) throw DataError("write failed for " + path);
}

inline SdaeModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open " + path);
    char magic[4];
    if (!in.read(magic, 4))
        throw TruncatedFile(path + ": empty file");
    if (std::memcmp(magic, detail::kModelMagic, 4) != 0)
        throw MagicMismatch(path + ": not an SDAE model file");
    const std::uint32_t version = detail::read_u32(in, path);
    if (version != detail::kModelVersion)
        throw DataError(path + ": unsupported model version " + std::to_string(version));
    const std::uint32_t n_layers = detail::read_u32(in, path);
    SdaeModel model;
    model.layer_sizes.resize(n_layers + 1);
    for (auto& s : model.layer_sizes)
        s = detail::read_u32(in, path);
    model.layers.resize(n_layers);
    for (std::uint32_t k = 0; k < n_layers; ++k) {
        const std::size_t vis = model.layer_sizes[k];
        const std::size_t hid = model.layer_sizes[k + 1];
        DaeLayer& l = model.layers[k];
        l.w_enc = Matrix(hid, vis);
        l.b_enc.assign(hid, 0.0);
        l.w_dec = Matrix(vis, hid);
        l.b_dec.assign(vis, 0.0);
        detail::read_doubles(in, l.w_enc.data(), l.w_enc.size(), path);
        detail::read_doubles(in, l.b_enc.data(), l.b_enc.size(), path);
        detail::read_doubles(in, l.w_dec.data(), l.w_dec.size(), path);
        detail::read_doubles(in, l.b_dec.data(), l.b_dec.size(), path);
    }
    return model;
}

} // namespace cda
