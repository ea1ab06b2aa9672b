#pragma once

#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "cda/error.hpp"
#include "cda/matrix.hpp"

namespace cda {

// Binary mapping matrix: rows index target units, columns index source
// units, and each column carries at most one active entry. Applying it to a
// binary target representation reassigns every source-side column to one
// target unit (or drops it).
struct MappingMatrix {
    BinaryMatrix entries; // p x q

    std::size_t target_units() const { return entries.rows(); } // p
    std::size_t source_units() const { return entries.cols(); } // q
};

// Integer encoding of a MappingMatrix: one entry per source column, value in
// {0..p} where entry i == j (1-based) means row j of column i is active and
// 0 means the column is unmapped.
struct Genome {
    std::vector<int> v;

    std::size_t size() const { return v.size(); }
    int operator[](std::size_t i) const { return v[i]; }
    int& operator[](std::size_t i) { return v[i]; }
    bool operator==(const Genome& o) const { return v == o.v; }
    bool operator<(const Genome& o) const { return v < o.v; } // lexicographic
};

struct MappingViolation {
    std::size_t row;
    std::size_t col;
    std::string what;
};

// Checks binariness and the per-column sum constraint. Returns the first
// violation found (row-major scan for non-binary entries, then columns).
inline std::optional<MappingViolation> validate(const MappingMatrix& m) {
    for (std::size_t i = 0; i < m.entries.rows(); ++i)
        for (std::size_t j = 0; j < m.entries.cols(); ++j)
            if (m.entries(i, j) > 1)
                return MappingViolation{i, j, "entry not in {0,1}"};
    for (std::size_t j = 0; j < m.entries.cols(); ++j) {
        int sum = 0;
        std::size_t last_row = 0;
        for (std::size_t i = 0; i < m.entries.rows(); ++i) {
            if (m.entries(i, j)) {
                ++sum;
                last_row = i;
            }
        }
        if (sum > 1)
            return MappingViolation{last_row, j, "column sum exceeds 1"};
    }
    return std::nullopt;
}

inline MappingMatrix from_genome(const Genome& g, std::size_t p) {
    MappingMatrix m{BinaryMatrix(p, g.size(), 0)};
    for (std::size_t i = 0; i < g.size(); ++i) {
        const int j = g[i];
        if (j < 0 || static_cast<std::size_t>(j) > p)
            throw OutOfRange("genome entry " + std::to_string(j) +
                             " outside {0.." + std::to_string(p) + "}");
        if (j > 0)
            m.entries(static_cast<std::size_t>(j - 1), i) = 1;
    }
    return m;
}

inline Genome to_genome(const MappingMatrix& m) {
    if (auto bad = validate(m))
        throw OutOfRange("invalid mapping matrix at (" + std::to_string(bad->row) +
                         "," + std::to_string(bad->col) + "): " + bad->what);
    Genome g;
    g.v.assign(m.source_units(), 0);
    for (std::size_t j = 0; j < m.source_units(); ++j)
        for (std::size_t i = 0; i < m.target_units(); ++i)
            if (m.entries(i, j))
                g[j] = static_cast<int>(i) + 1;
    return g;
}

// Identity genome: column i maps to row i while both exist, 0 past the
// smaller dimension. For square matrices this is the identity mapping.
inline Genome identity_genome(std::size_t p, std::size_t q) {
    Genome g;
    g.v.assign(q, 0);
    for (std::size_t i = 0; i < q && i < p; ++i)
        g[i] = static_cast<int>(i) + 1;
    return g;
}

// T_new = T x M. Column j of the result is target column genome[j]-1, or
// all zeros for unmapped columns, so the product stays binary.
inline BinaryMatrix apply(const MappingMatrix& m, const BinaryMatrix& t) {
    if (auto bad = validate(m))
        throw OutOfRange("apply: invalid mapping matrix: " + bad->what);
    if (t.cols() != m.target_units())
        throw DimensionMismatch("apply: matrix has " + std::to_string(m.target_units()) +
                                " rows but data has " + std::to_string(t.cols()) + " columns");
    const Genome g = to_genome(m);
    BinaryMatrix out(t.rows(), m.source_units(), 0);
    for (std::size_t n = 0; n < t.rows(); ++n) {
        const std::uint8_t* in = t.row(n);
        std::uint8_t* o = out.row(n);
        for (std::size_t j = 0; j < g.size(); ++j)
            o[j] = g[j] > 0 ? in[static_cast<std::size_t>(g[j] - 1)] : 0;
    }
    return out;
}

// Percentage of columns whose diagonal entry is not active, i.e. deviation
// from the identity mapping. Square matrices only.
inline double adjustment_degree(const MappingMatrix& m) {
    if (m.target_units() != m.source_units())
        throw NonSquare("adjustment_degree requires p == q");
    const std::size_t q = m.source_units();
    if (q == 0) return 0.0;
    std::size_t off = 0;
    for (std::size_t j = 0; j < q; ++j)
        if (m.entries(j, j) != 1)
            ++off;
    return 100.0 * static_cast<double>(off) / static_cast<double>(q);
}

inline double adjustment_degree(const Genome& g) {
    std::size_t off = 0;
    for (std::size_t j = 0; j < g.size(); ++j)
        if (g[j] != static_cast<int>(j) + 1)
            ++off;
    return g.size() == 0 ? 0.0
                         : 100.0 * static_cast<double>(off) / static_cast<double>(g.size());
}

// Block-diagonal placement [[J,0],[0,S]] for the concatenated-representation
// mapping. Off-diagonal blocks stay zero.
inline MappingMatrix block_concat(const MappingMatrix& j_block, const MappingMatrix& s_block) {
    const std::size_t n = j_block.target_units();
    const std::size_t nc = j_block.source_units();
    const std::size_t p = s_block.target_units();
    const std::size_t q = s_block.source_units();
    MappingMatrix out{BinaryMatrix(n + p, nc + q, 0)};
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t jj = 0; jj < nc; ++jj)
            out.entries(i, jj) = j_block.entries(i, jj);
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t jj = 0; jj < q; ++jj)
            out.entries(n + i, nc + jj) = s_block.entries(i, jj);
    return out;
}

// Locality and alignment diagnostics over binary representations.
struct AlignmentReport {
    std::size_t n_rows = 0;
    std::size_t n_local = 0;          // exactly one active unit
    std::size_t n_strictly_local = 0; // at least one active unit
    std::vector<std::uint8_t> pair_aligned; // flags for the audited pairs, when any

    double fraction_local() const {
        return n_rows == 0 ? 0.0 : static_cast<double>(n_local) / static_cast<double>(n_rows);
    }
    double fraction_strictly_local() const {
        return n_rows == 0 ? 0.0
                           : static_cast<double>(n_strictly_local) / static_cast<double>(n_rows);
    }
    double fraction_aligned() const {
        if (pair_aligned.empty()) return 0.0;
        std::size_t n = 0;
        for (auto f : pair_aligned)
            n += f ? 1u : 0u;
        return static_cast<double>(n) / static_cast<double>(pair_aligned.size());
    }
};

inline AlignmentReport locality_profile(const BinaryMatrix& r) {
    AlignmentReport rep;
    rep.n_rows = r.rows();
    for (std::size_t i = 0; i < r.rows(); ++i) {
        std::size_t active = 0;
        for (std::size_t j = 0; j < r.cols(); ++j)
            active += r(i, j) ? 1u : 0u;
        if (active == 1) ++rep.n_local;
        if (active >= 1) ++rep.n_strictly_local;
    }
    return rep;
}

// Two local representations are aligned when they activate the same units.
inline bool is_aligned(const std::vector<std::uint8_t>& r_s,
                       const std::vector<std::uint8_t>& r_t) {
    if (r_s.size() != r_t.size())
        throw LengthMismatch("is_aligned: representation widths differ");
    for (std::size_t h = 0; h < r_s.size(); ++h)
        if ((r_s[h] != 0) != (r_t[h] != 0))
            return false;
    return true;
}

// ---- genome text format: comma-separated integers, one genome per line ----

inline std::string genome_to_line(const Genome& g) {
    std::ostringstream os;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (i) os << ',';
        os << g[i];
    }
    return os.str();
}

inline Genome genome_from_line(const std::string& line) {
    Genome g;
    std::string field;
    std::istringstream is(line);
    while (std::getline(is, field, ',')) {
        try {
            g.v.push_back(std::stoi(field));
        } catch (const std::exception&) {
            throw MalformedLine("genome line has non-integer field '" + field + "'");
        }
    }
    return g;
}

inline void save_genomes(const std::string& path, const std::vector<Genome>& gs) {
    std::ofstream out(path);
    if (!out)
        throw DataError("cannot open " + path + " for writing");
    for (const auto& g : gs)
        out << genome_to_line(g) << '\n';
}

inline std::vector<Genome> load_genomes(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError("cannot open " + path);
    std::vector<Genome> gs;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        gs.push_back(genome_from_line(line));
    }
    return gs;
}

} // namespace cda
