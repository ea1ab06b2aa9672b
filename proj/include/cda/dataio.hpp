#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "cda/error.hpp"
#include "cda/matrix.hpp"
#include "cda/random.hpp"

namespace cda {

constexpr int kImageSide = 16;
constexpr int kImageDim = kImageSide * kImageSide;
constexpr int kNumClasses = 10;

// One 16x16 grayscale digit, row-major, intensities in [0,1].
struct ImageSample {
    std::vector<double> pixels;
    int label = 0;
};

struct Dataset {
    std::vector<ImageSample> samples;
    std::string domain_tag;
    std::vector<std::string> source_manifest; // provenance: paths, transforms, seeds

    std::size_t size() const { return samples.size(); }
    bool empty() const { return samples.empty(); }

    // samples as an N x 256 matrix
    Matrix pixel_matrix() const {
        Matrix m(samples.size(), samples.empty() ? 0 : samples[0].pixels.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            std::copy(samples[i].pixels.begin(), samples[i].pixels.end(), m.row(i));
        return m;
    }

    std::vector<int> labels() const {
        std::vector<int> y(samples.size());
        for (std::size_t i = 0; i < samples.size(); ++i)
            y[i] = samples[i].label;
        return y;
    }
};

struct SplitSpec {
    int n_train_per_class = 50;
    int n_eval_per_class = 20;
    std::uint64_t seed = 0;
};

// ---- IDX binary format ----

namespace detail {

inline std::uint32_t read_be32(std::istream& in, const std::string& path) {
    unsigned char b[4];
    if (!in.read(reinterpret_cast<char*>(b), 4))
        throw TruncatedFile(path + ": unexpected end of file in header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

} // namespace detail

// Bilinear resampling of an H x W intensity grid to 16x16. Pixel centers are
// aligned so the four corners map onto corners; a 16x16 input passes through
// unchanged and a 1x1 input broadcasts its value.
inline std::vector<double> resize_16(const std::vector<double>& pixels, int h, int w) {
    if (h < 1 || w < 1 || pixels.size() != static_cast<std::size_t>(h) * static_cast<std::size_t>(w))
        throw DimensionMismatch("resize_16: bad input grid");
    std::vector<double> out(kImageDim);
    const double sr = h == 1 ? 0.0 : double(h - 1) / double(kImageSide - 1);
    const double sc = w == 1 ? 0.0 : double(w - 1) / double(kImageSide - 1);
    for (int r = 0; r < kImageSide; ++r) {
        const double fr = r * sr;
        const int r0 = static_cast<int>(fr);
        const int r1 = std::min(r0 + 1, h - 1);
        const double ar = fr - r0;
        for (int c = 0; c < kImageSide; ++c) {
            const double fc = c * sc;
            const int c0 = static_cast<int>(fc);
            const int c1 = std::min(c0 + 1, w - 1);
            const double ac = fc - c0;
            const double top = pixels[std::size_t(r0) * w + c0] * (1.0 - ac) +
                               pixels[std::size_t(r0) * w + c1] * ac;
            const double bot = pixels[std::size_t(r1) * w + c0] * (1.0 - ac) +
                               pixels[std::size_t(r1) * w + c1] * ac;
            out[std::size_t(r) * kImageSide + c] = top * (1.0 - ar) + bot * ar;
        }
    }
    return out;
}

// Loads an IDX image/label pair (magic 2051 / 2049, big-endian dims, raw
// bytes). Images are scaled to [0,1] and resized to 16x16 when needed.
inline Dataset load_idx(const std::string& image_path, const std::string& label_path) {
    std::ifstream img(image_path, std::ios::binary);
    if (!img) throw DataError("cannot open " + image_path);
    std::ifstream lab(label_path, std::ios::binary);
    if (!lab) throw DataError("cannot open " + label_path);

    const std::uint32_t img_magic = detail::read_be32(img, image_path);
    if (img_magic != 2051)
        throw MagicMismatch(image_path + ": magic " + std::to_string(img_magic) +
                            ", expected 2051");
    const std::uint32_t lab_magic = detail::read_be32(lab, label_path);
    if (lab_magic != 2049)
        throw MagicMismatch(label_path + ": magic " + std::to_string(lab_magic) +
                            ", expected 2049");

    const std::uint32_t n_images = detail::read_be32(img, image_path);
    const std::uint32_t n_rows = detail::read_be32(img, image_path);
    const std::uint32_t n_cols = detail::read_be32(img, image_path);
    const std::uint32_t n_labels = detail::read_be32(lab, label_path);
    if (n_images != n_labels)
        throw CountMismatch(image_path + ": " + std::to_string(n_images) + " images vs " +
                            std::to_string(n_labels) + " labels");

    Dataset ds;
    ds.domain_tag = "idx";
    ds.source_manifest = {"format=idx", "images=" + image_path, "labels=" + label_path};
    ds.samples.reserve(n_images);

    std::vector<unsigned char> buf(std::size_t(n_rows) * n_cols);
    for (std::uint32_t i = 0; i < n_images; ++i) {
        if (!img.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
            throw TruncatedFile(image_path + ": truncated at image " + std::to_string(i));
        char lb;
        if (!lab.read(&lb, 1))
            throw TruncatedFile(label_path + ": truncated at label " + std::to_string(i));
        ImageSample s;
        s.label = static_cast<unsigned char>(lb);
        std::vector<double> raw(buf.size());
        for (std::size_t k = 0; k < buf.size(); ++k)
            raw[k] = buf[k] / 255.0;
        s.pixels = (n_rows == kImageSide && n_cols == kImageSide)
                       ? std::move(raw)
                       : resize_16(raw, static_cast<int>(n_rows), static_cast<int>(n_cols));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

// USPS text format: one sample per line, label first, then 256 reals in
// [-1,1], mapped to [0,1] via p = (v+1)/2. Values past the range by at most
// 1e-6 are clamped; anything further is a corrupt file.
inline Dataset load_usps_text(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open " + path);
    Dataset ds;
    ds.domain_tag = "usps";
    ds.source_manifest = {"format=usps_text", "path=" + path};
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
        std::istringstream is(line);
        double label_field;
        if (!(is >> label_field))
            throw MalformedLine(path + ":" + std::to_string(line_no) + ": missing label");
        ImageSample s;
        s.label = static_cast<int>(std::lround(label_field));
        if (s.label < 0 || s.label > 9)
            throw MalformedLine(path + ":" + std::to_string(line_no) + ": label out of range");
        s.pixels.reserve(kImageDim);
        double v;
        while (is >> v) {
            if (v < -1.0 - 1e-6 || v > 1.0 + 1e-6)
                throw RangeError(path + ":" + std::to_string(line_no) + ": value " +
                                 std::to_string(v) + " outside [-1,1]");
            s.pixels.push_back(std::clamp((v + 1.0) / 2.0, 0.0, 1.0));
        }
        if (s.pixels.size() != kImageDim)
            throw MalformedLine(path + ":" + std::to_string(line_no) + ": expected 256 values, got " +
                                std::to_string(s.pixels.size()));
        ds.samples.push_back(std::move(s));
    }
    return ds;
}

inline void save_usps_text(const std::string& path, const Dataset& ds) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    char buf[16];
    for (const auto& s : ds.samples) {
        out << s.label;
        for (double p : s.pixels) {
            std::snprintf(buf, sizeof buf, " %.6f", 2.0 * p - 1.0);
            out << buf;
        }
        out << '\n';
    }
}

// Right-angle rotation by exact pixel permutation.
inline Dataset rotate_dataset(const Dataset& ds, int angle_degrees) {
    if (angle_degrees != 90 && angle_degrees != 180 && angle_degrees != 270)
        throw UnsupportedAngle("rotate_dataset supports 90/180/270, got " +
                               std::to_string(angle_degrees));
    Dataset out;
    out.domain_tag = ds.domain_tag + "_rot" + std::to_string(angle_degrees);
    out.source_manifest = ds.source_manifest;
    out.source_manifest.push_back("rotate=" + std::to_string(angle_degrees));
    out.samples.reserve(ds.size());
    const int n = kImageSide;
    for (const auto& s : ds.samples) {
        ImageSample r;
        r.label = s.label;
        r.pixels.assign(kImageDim, 0.0);
        for (int row = 0; row < n; ++row) {
            for (int col = 0; col < n; ++col) {
                int nr, nc; // clockwise rotations
                switch (angle_degrees) {
                    case 90: nr = col; nc = n - 1 - row; break;
                    case 180: nr = n - 1 - row; nc = n - 1 - col; break;
                    default: nr = n - 1 - col; nc = row; break; // 270
                }
                r.pixels[std::size_t(nr) * n + nc] = s.pixels[std::size_t(row) * n + col];
            }
        }
        out.samples.push_back(std::move(r));
    }
    return out;
}

namespace detail {

// Braille digits use the upper four dot positions of the cell (dots 1,2,4,5),
// i.e. a 2x2 grid: index 0 = top-left (dot 1), 1 = bottom-left (dot 2),
// 2 = top-right (dot 4), 3 = bottom-right (dot 5). Digit d maps to letter
// a..j.
inline const std::array<std::array<int, 4>, 10>& braille_dots() {
    static const std::array<std::array<int, 4>, 10> table = {{
        {0, 1, 1, 1}, // 0 (j): dots 2,4,5
        {1, 0, 0, 0}, // 1 (a): dot 1
        {1, 1, 0, 0}, // 2 (b): dots 1,2
        {1, 0, 1, 0}, // 3 (c): dots 1,4
        {1, 0, 1, 1}, // 4 (d): dots 1,4,5
        {1, 0, 0, 1}, // 5 (e): dots 1,5
        {1, 1, 1, 0}, // 6 (f): dots 1,2,4
        {1, 1, 1, 1}, // 7 (g): dots 1,2,4,5
        {1, 1, 0, 1}, // 8 (h): dots 1,2,5
        {0, 1, 1, 0}, // 9 (i): dots 2,4
    }};
    return table;
}

} // namespace detail

// Renders each digit as its braille dot pattern: a filled disc of radius 3
// centered in each active quadrant of the 16x16 canvas, plus optional
// additive Gaussian pixel noise clamped to [0,1].
inline Dataset synth_braille(int n_per_class, double noise_std, std::uint64_t seed) {
    if (n_per_class < 1)
        throw DataError("synth_braille: n_per_class must be >= 1");
    Dataset ds;
    ds.domain_tag = "braille";
    ds.source_manifest = {"format=braille", "n_per_class=" + std::to_string(n_per_class),
                          "noise_std=" + std::to_string(noise_std),
                          "seed=" + std::to_string(seed)};
    Rng rng(seed);
    const double radius = 3.0;
    // quadrant centers: columns select left/right, rows top/bottom
    const double centers[2] = {3.5, 11.5};
    for (int rep = 0; rep < n_per_class; ++rep) {
        for (int digit = 0; digit < kNumClasses; ++digit) {
            const auto& dots = detail::braille_dots()[static_cast<std::size_t>(digit)];
            ImageSample s;
            s.label = digit;
            s.pixels.assign(kImageDim, 0.0);
            for (int q = 0; q < 4; ++q) {
                if (!dots[static_cast<std::size_t>(q)]) continue;
                const double cy = centers[q % 2]; // 0,1 = left column, top/bottom
                const double cx = centers[q / 2];
                for (int y = 0; y < kImageSide; ++y)
                    for (int x = 0; x < kImageSide; ++x) {
                        const double dy = y - cy;
                        const double dx = x - cx;
                        if (dy * dy + dx * dx <= radius * radius)
                            s.pixels[std::size_t(y) * kImageSide + x] = 1.0;
                    }
            }
            if (noise_std > 0.0) {
                for (auto& p : s.pixels)
                    p = std::clamp(p + noise_std * rng.gaussian(), 0.0, 1.0);
            }
            ds.samples.push_back(std::move(s));
        }
    }
    return ds;
}

// Class-balanced disjoint train/eval split, deterministic for a fixed seed.
inline std::pair<Dataset, Dataset> subsample_balanced(const Dataset& ds, const SplitSpec& spec) {
    if (spec.n_train_per_class < 1 || spec.n_eval_per_class < 0)
        throw DataError("subsample_balanced: counts must be >= 1");
    std::vector<std::vector<std::size_t>> by_class(kNumClasses);
    for (std::size_t i = 0; i < ds.size(); ++i)
        by_class[static_cast<std::size_t>(ds.samples[i].label)].push_back(i);

    const std::size_t need =
        static_cast<std::size_t>(spec.n_train_per_class) + static_cast<std::size_t>(spec.n_eval_per_class);
    for (int c = 0; c < kNumClasses; ++c)
        if (by_class[static_cast<std::size_t>(c)].size() < need)
            throw InsufficientClassCount(
                c, "class " + std::to_string(c) + " has " +
                       std::to_string(by_class[static_cast<std::size_t>(c)].size()) +
                       " samples, need " + std::to_string(need));

    Rng rng(spec.seed);
    Dataset train, eval;
    const std::string note = "split_seed=" + std::to_string(spec.seed);
    train.domain_tag = ds.domain_tag;
    eval.domain_tag = ds.domain_tag;
    train.source_manifest = ds.source_manifest;
    train.source_manifest.push_back(note);
    train.source_manifest.push_back("part=train");
    eval.source_manifest = ds.source_manifest;
    eval.source_manifest.push_back(note);
    eval.source_manifest.push_back("part=eval");
    for (int c = 0; c < kNumClasses; ++c) {
        auto idx = by_class[static_cast<std::size_t>(c)];
        rng.shuffle(idx);
        for (int k = 0; k < spec.n_train_per_class; ++k)
            train.samples.push_back(ds.samples[idx[static_cast<std::size_t>(k)]]);
        for (int k = 0; k < spec.n_eval_per_class; ++k)
            eval.samples.push_back(
                ds.samples[idx[static_cast<std::size_t>(spec.n_train_per_class + k)]]);
    }
    return {std::move(train), std::move(eval)};
}

// ---- manifest: plain-text key=value lines next to derived datasets ----

inline void save_manifest(const std::string& path, const std::vector<std::string>& lines) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot open " + path + " for writing");
    for (const auto& l : lines)
        out << l << '\n';
}

inline std::uint64_t dataset_fingerprint(const Dataset& ds) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](const void* p, std::size_t n) {
        const unsigned char* b = static_cast<const unsigned char*>(p);
        for (std::size_t i = 0; i < n; ++i) {
            h ^= b[i];
            h *= 0x100000001b3ULL;
        }
    };
    for (const auto& s : ds.samples) {
        mix(&s.label, sizeof s.label);
        mix(s.pixels.data(), s.pixels.size() * sizeof(double));
    }
    return h;
}

} // namespace cda
