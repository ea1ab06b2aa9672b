#include <catch2/catch.hpp>

#include "cda/mapping.hpp"
#include "cda/random.hpp"
#include "support/oracles.hpp"

using namespace cda;

namespace {

MappingMatrix identity_mapping(std::size_t n) {
    MappingMatrix m{BinaryMatrix(n, n, 0)};
    for (std::size_t i = 0; i < n; ++i)
        m.entries(i, i) = 1;
    return m;
}

Genome random_genome(std::size_t q, std::size_t p, Rng& rng) {
    Genome g;
    g.v.resize(q);
    for (std::size_t i = 0; i < q; ++i)
        g[i] = rng.uniform_int(0, static_cast<int>(p));
    return g;
}

} // namespace

TEST_CASE("validate accepts identity and zero matrices") {
    CHECK_FALSE(validate(identity_mapping(4)).has_value());
    MappingMatrix zero{BinaryMatrix(3, 5, 0)};
    CHECK_FALSE(validate(zero).has_value()); // all columns unmapped is legal
}

TEST_CASE("validate reports a column with two active entries") {
    MappingMatrix m{BinaryMatrix(3, 3, 0)};
    m.entries(0, 2) = 1;
    m.entries(2, 2) = 1;
    const auto bad = validate(m);
    REQUIRE(bad.has_value());
    CHECK(bad->col == 2);
}

TEST_CASE("validate rejects non-binary entries") {
    MappingMatrix m{BinaryMatrix(2, 2, 0)};
    m.entries(1, 0) = 2;
    const auto bad = validate(m);
    REQUIRE(bad.has_value());
    CHECK(bad->row == 1);
    CHECK(bad->col == 0);
}

TEST_CASE("apply with identity leaves rows unchanged") {
    const MappingMatrix m = identity_mapping(3);
    BinaryMatrix t(1, 3);
    t(0, 0) = 1;
    t(0, 2) = 1;
    const BinaryMatrix out = apply(m, t);
    CHECK(out(0, 0) == 1);
    CHECK(out(0, 1) == 0);
    CHECK(out(0, 2) == 1);
}

TEST_CASE("apply follows the genome column semantics") {
    // p=2, q=3, V=[2,0,1]: col1 <- unit2, col2 <- none, col3 <- unit1
    Genome g;
    g.v = {2, 0, 1};
    const MappingMatrix m = from_genome(g, 2);
    BinaryMatrix t(1, 2);
    t(0, 0) = 1;
    t(0, 1) = 0;
    const BinaryMatrix out = apply(m, t);
    CHECK(out(0, 0) == 0);
    CHECK(out(0, 1) == 0);
    CHECK(out(0, 2) == 1);
}

TEST_CASE("apply equals the naive multiplication oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 100; ++trial) {
        const std::size_t p = 6, q = 6;
        const Genome g = random_genome(q, p, rng);
        const MappingMatrix m = from_genome(g, p);
        BinaryMatrix t(20, p);
        for (std::size_t r = 0; r < t.rows(); ++r)
            for (std::size_t c = 0; c < t.cols(); ++c)
                t(r, c) = rng.uniform() < 0.5 ? 1 : 0;
        CHECK(apply(m, t) == oracle::naive_binary_matmul(t, m.entries));
    }
}

TEST_CASE("apply rejects mismatched widths") {
    const MappingMatrix m = identity_mapping(3);
    CHECK_THROWS_AS(apply(m, BinaryMatrix(2, 4)), DimensionMismatch);
}

TEST_CASE("genome and matrix encodings are inverse bijections") {
    SECTION("all-zero genome gives the zero matrix") {
        Genome g;
        g.v = {0, 0, 0};
        const MappingMatrix m = from_genome(g, 4);
        CHECK(m.target_units() == 4);
        CHECK(m.source_units() == 3);
        for (std::size_t i = 0; i < 4; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(m.entries(i, j) == 0);
        CHECK(to_genome(m) == g);
    }
    SECTION("column swap") {
        Genome g;
        g.v = {2, 1};
        const MappingMatrix m = from_genome(g, 2);
        CHECK(m.entries(0, 1) == 1);
        CHECK(m.entries(1, 0) == 1);
        CHECK(m.entries(0, 0) == 0);
        CHECK(m.entries(1, 1) == 0);
    }
    SECTION("1000 random round trips are exact") {
        Rng rng(7);
        for (int trial = 0; trial < 1000; ++trial) {
            const std::size_t p = static_cast<std::size_t>(rng.uniform_int(1, 12));
            const std::size_t q = static_cast<std::size_t>(rng.uniform_int(1, 12));
            const Genome g = random_genome(q, p, rng);
            CHECK(to_genome(from_genome(g, p)) == g);
        }
    }
    SECTION("out-of-range entries rejected") {
        Genome g;
        g.v = {3};
        CHECK_THROWS_AS(from_genome(g, 2), OutOfRange);
        g.v = {-1};
        CHECK_THROWS_AS(from_genome(g, 2), OutOfRange);
    }
}

TEST_CASE("adjustment degree versus the identity mapping") {
    CHECK(adjustment_degree(identity_mapping(5)) == 0.0);

    Genome swap_two;
    swap_two.v = {2, 1, 3};
    CHECK(adjustment_degree(from_genome(swap_two, 3)) == Approx(100.0 * 2.0 / 3.0));

    Genome zeros;
    zeros.v = {0, 0, 0};
    CHECK(adjustment_degree(from_genome(zeros, 3)) == 100.0);

    CHECK_THROWS_AS(adjustment_degree(MappingMatrix{BinaryMatrix(2, 3)}), NonSquare);
}

TEST_CASE("identity genome has zero adjustment degree at every size") {
    for (std::size_t n : {1u, 2u, 7u, 33u})
        CHECK(adjustment_degree(from_genome(identity_genome(n, n), n)) == 0.0);
}

TEST_CASE("block_concat places blocks on the diagonal") {
    const MappingMatrix j = identity_mapping(2);
    MappingMatrix s{BinaryMatrix(2, 2, 0)};
    const MappingMatrix out = block_concat(j, s);
    REQUIRE(out.target_units() == 4);
    REQUIRE(out.source_units() == 4);
    for (std::size_t i = 0; i < 4; ++i)
        for (std::size_t jj = 0; jj < 4; ++jj)
            CHECK(out.entries(i, jj) == ((i == jj && i < 2) ? 1 : 0));
}

TEST_CASE("block_concat of valid blocks is valid, 500 random pairs") {
    Rng rng(11);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t n = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const std::size_t p = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const std::size_t q = static_cast<std::size_t>(rng.uniform_int(1, 6));
        const MappingMatrix j = from_genome(random_genome(n, n, rng), n);
        const MappingMatrix s = from_genome(random_genome(q, p, rng), p);
        const MappingMatrix out = block_concat(j, s);
        CHECK_FALSE(validate(out).has_value());

        // genome of the block matrix = block genomes with the S rows offset
        const Genome gj = to_genome(j);
        const Genome gs = to_genome(s);
        Genome expect;
        expect.v = gj.v;
        for (int e : gs.v)
            expect.v.push_back(e == 0 ? 0 : e + static_cast<int>(n));
        CHECK(to_genome(out) == expect);
    }
}

TEST_CASE("closure: products of valid mappings stay valid, 1000 pairs") {
    Rng rng(13);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t p = static_cast<std::size_t>(rng.uniform_int(1, 8));
        const std::size_t q = static_cast<std::size_t>(rng.uniform_int(1, 8));
        const std::size_t r = static_cast<std::size_t>(rng.uniform_int(1, 8));
        const MappingMatrix a = from_genome(random_genome(q, p, rng), p);
        const MappingMatrix b = from_genome(random_genome(r, q, rng), q);
        const BinaryMatrix prod = oracle::naive_binary_matmul(a.entries, b.entries);
        const auto bad = validate(MappingMatrix{prod});
        CHECK_FALSE(bad.has_value());
    }
}

TEST_CASE("apply preserves binariness and zero columns for unmapped genes") {
    Rng rng(17);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t p = static_cast<std::size_t>(rng.uniform_int(1, 9));
        const std::size_t q = static_cast<std::size_t>(rng.uniform_int(1, 9));
        const Genome g = random_genome(q, p, rng);
        const MappingMatrix m = from_genome(g, p);
        BinaryMatrix t(10, p);
        for (std::size_t i = 0; i < t.rows(); ++i)
            for (std::size_t j = 0; j < t.cols(); ++j)
                t(i, j) = rng.uniform() < 0.5 ? 1 : 0;
        const BinaryMatrix out = apply(m, t);
        for (std::size_t i = 0; i < out.rows(); ++i)
            for (std::size_t j = 0; j < out.cols(); ++j) {
                CHECK(out(i, j) <= 1);
                if (g[j] == 0)
                    CHECK(out(i, j) == 0);
            }
    }
}

TEST_CASE("locality profile counts active units per row") {
    BinaryMatrix r(3, 3, 0);
    r(0, 1) = 1;             // exactly one
    r(1, 0) = r(1, 1) = 1;   // two active
    const AlignmentReport rep = locality_profile(r);
    CHECK(rep.n_rows == 3);
    CHECK(rep.n_local == 1);
    CHECK(rep.n_strictly_local == 2);
    CHECK(rep.fraction_local() == Approx(1.0 / 3.0));
    CHECK(rep.fraction_strictly_local() == Approx(2.0 / 3.0));
}

TEST_CASE("is_aligned compares activation patterns") {
    CHECK(is_aligned({0, 1}, {0, 1}));
    CHECK_FALSE(is_aligned({0, 1}, {1, 1}));
    CHECK(is_aligned({0, 0}, {0, 0})); // vacuous
    CHECK_THROWS_AS(is_aligned({0, 1}, {0, 1, 0}), LengthMismatch);
}

TEST_CASE("genome text lines round trip") {
    Genome g;
    g.v = {0, 3, 1, 0, 7};
    CHECK(genome_to_line(g) == "0,3,1,0,7");
    CHECK(genome_from_line("0,3,1,0,7") == g);
    CHECK_THROWS_AS(genome_from_line("1,x,3"), MalformedLine);
}
