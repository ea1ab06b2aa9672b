#include <catch2/catch.hpp>

#include <cmath>
#include <filesystem>
#include <limits>
#include <unistd.h>

#include "cda/autoencoder.hpp"
#include "cda/random.hpp"
#include "support/oracles.hpp"

using namespace cda;

namespace {

Matrix random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double lo = 0.0,
                     double hi = 1.0) {
    Matrix m(rows, cols);
    for (std::size_t i = 0; i < m.size(); ++i)
        m.data()[i] = rng.uniform(lo, hi);
    return m;
}

DaeLayer zero_layer(std::size_t visible, std::size_t hidden) {
    DaeLayer l;
    l.w_enc = Matrix(hidden, visible, 0.0);
    l.b_enc.assign(hidden, 0.0);
    l.w_dec = Matrix(visible, hidden, 0.0);
    l.b_dec.assign(visible, 0.0);
    return l;
}

DaeLayer random_layer(std::size_t visible, std::size_t hidden, Rng& rng) {
    DaeLayer l = zero_layer(visible, hidden);
    for (std::size_t i = 0; i < l.w_enc.size(); ++i)
        l.w_enc.data()[i] = rng.uniform(-1.0, 1.0);
    for (std::size_t i = 0; i < l.w_dec.size(); ++i)
        l.w_dec.data()[i] = rng.uniform(-1.0, 1.0);
    for (auto& b : l.b_enc)
        b = rng.uniform(-0.5, 0.5);
    for (auto& b : l.b_dec)
        b = rng.uniform(-0.5, 0.5);
    return l;
}

} // namespace

TEST_CASE("lr_schedule follows the decay rule") {
    CHECK(lr_schedule(10, 1.0, 20) == 1.0);
    CHECK(lr_schedule(40, 1.0, 20) == 0.5);
    CHECK(lr_schedule(20, 0.1, 20) == Approx(0.1));

    SECTION("constant before tau, strictly decreasing after") {
        double prev = lr_schedule(1, 0.3, 15);
        for (int t = 2; t <= 15; ++t)
            CHECK(lr_schedule(t, 0.3, 15) == prev);
        for (int t = 16; t <= 60; ++t) {
            const double cur = lr_schedule(t, 0.3, 15);
            CHECK(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("zero-parameter layer reconstructs 0.5 everywhere") {
    Rng rng(1);
    const Matrix data = random_matrix(4, 6, rng);
    const DaeLayer l = zero_layer(6, 3);

    // initial loss per sample is sum_k (x_k - 0.5)^2
    double expect = 0.0;
    for (std::size_t i = 0; i < data.size(); ++i)
        expect += (data.data()[i] - 0.5) * (data.data()[i] - 0.5);
    expect /= static_cast<double>(data.rows());
    CHECK(reconstruction_error(l, data) == Approx(expect).margin(1e-15));

    const Matrix half(5, 6, 0.5);
    CHECK(reconstruction_error(l, half) == 0.0);
}

TEST_CASE("reconstruction error is zero on a constructed fixed point") {
    // zero weights and b_dec = logit(c) reproduce constant-c data exactly
    const double c = 0.73;
    DaeLayer l = zero_layer(4, 2);
    for (auto& b : l.b_dec)
        b = std::log(c / (1.0 - c));
    const Matrix data(6, 4, c);
    CHECK(reconstruction_error(l, data) == Approx(0.0).margin(1e-28));
}

TEST_CASE("reconstruction error matches the scalar-loop oracle") {
    Rng rng(2);
    const Matrix data = random_matrix(7, 5, rng);
    const DaeLayer l = random_layer(5, 3, rng);
    CHECK(reconstruction_error(l, data) ==
          Approx(oracle::scalar_reconstruction_error(l, data)).margin(1e-12));
    CHECK_THROWS_AS(reconstruction_error(l, Matrix(3, 4)), DimensionMismatch);
}

TEST_CASE("train_dae matches the independent scalar-loop trainer") {
    Rng rng(3);
    const Matrix data = random_matrix(16, 8, rng);
    DaeConfig cfg;
    cfg.hidden_size = 5;
    cfg.epsilon0 = 0.1;
    cfg.tau = 20;
    cfg.corruption = 0.0;
    cfg.max_iters = 50;
    cfg.patience = 50;
    cfg.seed = 99;

    TrainStats stats;
    const DaeLayer ours = train_dae(data, cfg, &stats);
    const DaeLayer ref = oracle::scalar_train_dae(data, cfg);

    const double our_final = reconstruction_error(ours, data);
    const double ref_final = oracle::scalar_reconstruction_error(ref, data);
    CHECK(our_final <= stats.initial_loss);
    CHECK(our_final == Approx(ref_final).margin(1e-9));
}

TEST_CASE("corrupted training matches the oracle too") {
    Rng rng(4);
    const Matrix data = random_matrix(12, 6, rng);
    DaeConfig cfg;
    cfg.hidden_size = 4;
    cfg.epsilon0 = 0.2;
    cfg.corruption = 0.3;
    cfg.max_iters = 30;
    cfg.patience = 30;
    cfg.seed = 5;
    const DaeLayer ours = train_dae(data, cfg);
    const DaeLayer ref = oracle::scalar_train_dae(data, cfg);
    CHECK(reconstruction_error(ours, data) ==
          Approx(oracle::scalar_reconstruction_error(ref, data)).margin(1e-9));
}

TEST_CASE("analytic gradients match central finite differences") {
    Rng rng(6);
    const Matrix clean = random_matrix(4, 3, rng);
    Matrix corrupted = clean;
    corrupted(1, 2) = 0.0;
    corrupted(3, 0) = 0.0;
    const DaeLayer l = random_layer(3, 2, rng);
    CHECK(oracle::gradient_max_rel_error(l, clean, corrupted, 1e-5) < 1e-4);
    CHECK(oracle::gradient_max_rel_error(l, clean, clean, 1e-5) < 1e-4);
}

TEST_CASE("corruption zero bypasses masking without changing the trajectory") {
    Rng rng(7);
    const Matrix data = random_matrix(10, 5, rng);
    DaeConfig cfg;
    cfg.hidden_size = 3;
    cfg.epsilon0 = 0.5;
    cfg.corruption = 0.0;
    cfg.max_iters = 25;
    cfg.patience = 25;
    cfg.seed = 8;
    const DaeLayer bypass = train_dae(data, cfg);
    const DaeLayer masked = detail::train_dae_impl(data, cfg, true, nullptr);
    CHECK(bypass.w_enc == masked.w_enc);
    CHECK(bypass.w_dec == masked.w_dec);
    CHECK(bypass.b_enc == masked.b_enc);
    CHECK(bypass.b_dec == masked.b_dec);
}

TEST_CASE("training is bit-reproducible for a fixed seed") {
    Rng rng(9);
    const Matrix data = random_matrix(9, 4, rng);
    DaeConfig cfg;
    cfg.hidden_size = 3;
    cfg.epsilon0 = 0.3;
    cfg.corruption = 0.3;
    cfg.max_iters = 40;
    cfg.patience = 40;
    cfg.seed = 10;
    const DaeLayer a = train_dae(data, cfg);
    const DaeLayer b = train_dae(data, cfg);
    CHECK(a.w_enc == b.w_enc);
    CHECK(a.w_dec == b.w_dec);
    CHECK(a.b_enc == b.b_enc);
    CHECK(a.b_dec == b.b_dec);
}

TEST_CASE("diverging configurations raise NonFiniteLoss") {
    Rng rng(10);
    const Matrix data = random_matrix(6, 4, rng);
    DaeConfig cfg;
    cfg.hidden_size = 3;
    cfg.epsilon0 = std::numeric_limits<double>::infinity();
    cfg.max_iters = 50;
    cfg.seed = 11;
    CHECK_THROWS_AS(train_dae(data, cfg), NonFiniteLoss);
}

TEST_CASE("invalid training configs are rejected") {
    Rng rng(55);
    const Matrix data = random_matrix(4, 3, rng);
    DaeConfig cfg;
    cfg.hidden_size = 2;
    cfg.corruption = 1.0;
    CHECK_THROWS_AS(train_dae(data, cfg), ConfigError);
    cfg.corruption = 0.0;
    cfg.epsilon0 = 0.0;
    CHECK_THROWS_AS(train_dae(data, cfg), ConfigError);
    cfg.epsilon0 = 0.1;
    cfg.tau = 0;
    CHECK_THROWS_AS(train_dae(data, cfg), ConfigError);
}

TEST_CASE("max_iters zero returns the untrained layer") {
    Rng rng(12);
    const Matrix data = random_matrix(5, 4, rng);
    DaeConfig cfg;
    cfg.hidden_size = 2;
    cfg.max_iters = 0;
    cfg.seed = 13;
    TrainStats stats;
    const DaeLayer l = train_dae(data, cfg, &stats);
    CHECK(stats.iterations == 0);
    CHECK(l.hidden() == 2);
}

TEST_CASE("train_sdae stacks layer-wise") {
    Rng rng(14);
    const Matrix data = random_matrix(20, 12, rng);

    SECTION("one-layer stack equals a single train_dae") {
        DaeConfig cfg;
        cfg.hidden_size = 5;
        cfg.epsilon0 = 0.2;
        cfg.max_iters = 20;
        cfg.seed = 15;
        const SdaeModel model = train_sdae(data, {cfg});
        const DaeLayer single = train_dae(data, cfg);
        CHECK(model.layers.size() == 1);
        CHECK(model.layers[0].w_enc == single.w_enc);
        CHECK(model.layer_sizes == std::vector<std::size_t>{12, 5});
    }

    SECTION("layer k trains on the previous uncorrupted activations") {
        DaeConfig c1;
        c1.hidden_size = 6;
        c1.epsilon0 = 0.2;
        c1.corruption = 0.3;
        c1.max_iters = 15;
        c1.seed = 16;
        DaeConfig c2 = c1;
        c2.hidden_size = 4;
        c2.seed = 17;
        const SdaeModel model = train_sdae(data, {c1, c2});

        const DaeLayer l1 = train_dae(data, c1);
        const Matrix h1 = detail::affine_sigmoid(data, l1.w_enc, l1.b_enc);
        const DaeLayer l2 = train_dae(h1, c2);
        CHECK(model.layers[1].w_enc == l2.w_enc);
        CHECK(model.layer_sizes == std::vector<std::size_t>{12, 6, 4});
    }
}

TEST_CASE("size_chain applies the two-thirds rule with floor") {
    CHECK(size_chain(256, 2) == std::vector<std::size_t>{256, 170, 113});
    CHECK(size_chain(256, 5) == std::vector<std::size_t>{256, 170, 113, 75, 50, 33});
}

TEST_CASE("hidden_grid_for builds the candidate set") {
    const auto g = hidden_grid_for(30);
    CHECK(g == std::vector<int>{6, 15, 20, 30});
}

TEST_CASE("encode runs the stacked forward pass") {
    Rng rng(18);
    SECTION("zero-weight model maps everything to one half") {
        SdaeModel model;
        model.layer_sizes = {4, 3};
        model.layers.push_back(zero_layer(4, 3));
        const Matrix acts = encode(model, random_matrix(5, 4, rng));
        for (std::size_t i = 0; i < acts.size(); ++i)
            CHECK(acts.data()[i] == 0.5);
    }
    SECTION("deterministic and strictly inside (0,1)") {
        SdaeModel model;
        model.layer_sizes = {5, 4, 3};
        model.layers.push_back(random_layer(5, 4, rng));
        model.layers.push_back(random_layer(4, 3, rng));
        const Matrix data = random_matrix(6, 5, rng);
        const Matrix a = encode(model, data);
        const Matrix b = encode(model, data);
        CHECK(a == b);
        for (std::size_t i = 0; i < a.size(); ++i) {
            CHECK(a.data()[i] > 0.0);
            CHECK(a.data()[i] < 1.0);
        }
    }
    SECTION("matches the per-element forward oracle") {
        SdaeModel model;
        model.layer_sizes = {6, 4, 2};
        model.layers.push_back(random_layer(6, 4, rng));
        model.layers.push_back(random_layer(4, 2, rng));
        const Matrix data = random_matrix(5, 6, rng);
        const Matrix ours = encode(model, data);
        const Matrix ref = oracle::scalar_encode(model, data);
        REQUIRE(ours.rows() == ref.rows());
        for (std::size_t i = 0; i < ours.size(); ++i)
            CHECK(ours.data()[i] == Approx(ref.data()[i]).margin(1e-12));
    }
    SECTION("dimension mismatch rejected") {
        SdaeModel model;
        model.layer_sizes = {4, 2};
        model.layers.push_back(zero_layer(4, 2));
        CHECK_THROWS_AS(encode(model, Matrix(3, 5)), DimensionMismatch);
    }
    SECTION("representation bundles satisfy the step-rule invariant") {
        SdaeModel model;
        model.layer_sizes = {5, 3};
        model.layers.push_back(random_layer(5, 3, rng));
        const Matrix data = random_matrix(8, 5, rng);
        const RepresentationMatrix rep = make_representation(model, data, {0, 1, 2, 3, 0, 1, 2, 3});
        REQUIRE(rep.labels.size() == 8);
        for (std::size_t i = 0; i < rep.continuous.rows(); ++i)
            for (std::size_t j = 0; j < rep.continuous.cols(); ++j)
                CHECK((rep.binary(i, j) == 1) == (rep.continuous(i, j) >= 0.5));
    }
}

TEST_CASE("binarize applies the inclusive step rule") {
    Matrix m(1, 3);
    m(0, 0) = 0.49;
    m(0, 1) = 0.5;
    m(0, 2) = 0.51;
    const BinaryMatrix b = binarize(m);
    CHECK(b(0, 0) == 0);
    CHECK(b(0, 1) == 1);
    CHECK(b(0, 2) == 1);

    const Matrix halves(3, 4, 0.5);
    const BinaryMatrix all_ones = binarize(halves);
    for (std::size_t i = 0; i < all_ones.rows(); ++i)
        for (std::size_t j = 0; j < all_ones.cols(); ++j)
            CHECK(all_ones(i, j) == 1);

    SECTION("idempotent on binary values") {
        Rng rng(19);
        const Matrix r = random_matrix(6, 6, rng);
        const BinaryMatrix once = binarize(r);
        CHECK(binarize(to_matrix(once)) == once);
    }
}

TEST_CASE("grid search picks by validation error with first-wins ties") {
    // clustered data so training genuinely lowers held-out error
    Rng rng(20);
    Matrix data(30, 6);
    std::vector<std::vector<double>> protos(3, std::vector<double>(6));
    for (auto& p : protos)
        for (auto& v : p)
            v = rng.uniform() < 0.5 ? 0.05 : 0.95;
    for (std::size_t r = 0; r < data.rows(); ++r)
        for (std::size_t c = 0; c < data.cols(); ++c)
            data(r, c) = std::clamp(protos[r % 3][c] + rng.uniform(-0.03, 0.03), 0.0, 1.0);
    DaeConfig base;
    base.hidden_size = 4;
    base.epsilon0 = 0.1;
    base.tau = 20;
    base.max_iters = 100;
    base.patience = 100;
    base.seed = 21;

    SECTION("single candidate returned") {
        const DaeConfig chosen = grid_search_configs(data, {base}, 7);
        CHECK(chosen.hidden_size == base.hidden_size);
        CHECK(chosen.epsilon0 == base.epsilon0);
    }
    SECTION("trained candidate beats the untrained one") {
        DaeConfig untrained = base;
        untrained.max_iters = 0;
        const DaeConfig chosen = grid_search_configs(data, {untrained, base}, 7);
        CHECK(chosen.max_iters == 100);
    }
    SECTION("duplicate candidates tie to the first") {
        DaeConfig twin = base;
        const DaeConfig chosen = grid_search_configs(data, {base, twin}, 7);
        CHECK(chosen.seed == base.seed); // same object content; first index wins
        // equal losses: the second candidate must not displace the first
        DaeConfig marked = base;
        marked.patience = base.patience + 1; // distinguishable, same training path
        const DaeConfig chosen2 = grid_search_configs(data, {base, marked}, 7);
        CHECK(chosen2.patience == base.patience);
    }
    SECTION("grid_search_layer iterates the stated tie-break order") {
        const DaeConfig chosen =
            grid_search_layer(data, {4, 4}, {0.1, 0.1}, {0.0, 0.0}, base);
        CHECK(chosen.hidden_size == 4);
        CHECK(chosen.corruption == 0.0);
    }
}

TEST_CASE("model serialization round trips bit-exactly") {
    Rng rng(22);
    const Matrix data = random_matrix(15, 8, rng);
    DaeConfig c1;
    c1.hidden_size = 5;
    c1.epsilon0 = 0.2;
    c1.corruption = 0.3;
    c1.max_iters = 10;
    c1.seed = 23;
    DaeConfig c2 = c1;
    c2.hidden_size = 3;
    const SdaeModel model = train_sdae(data, {c1, c2});

    const std::string path = (std::filesystem::temp_directory_path() /
                              ("cda_model_" + std::to_string(::getpid()) + ".sdae"))
                                 .string();
    save_model(path, model);
    const SdaeModel back = load_model(path);
    std::filesystem::remove(path);

    REQUIRE(back.layer_sizes == model.layer_sizes);
    REQUIRE(back.layers.size() == model.layers.size());
    for (std::size_t k = 0; k < model.layers.size(); ++k) {
        CHECK(back.layers[k].w_enc == model.layers[k].w_enc);
        CHECK(back.layers[k].b_enc == model.layers[k].b_enc);
        CHECK(back.layers[k].w_dec == model.layers[k].w_dec);
        CHECK(back.layers[k].b_dec == model.layers[k].b_dec);
    }

    // encoded representations identical through the round trip
    const Matrix a = encode(model, data);
    const Matrix b = encode(back, data);
    CHECK(a == b);
}
