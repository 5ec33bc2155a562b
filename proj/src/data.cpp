#include "cr/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "cr/rng.hpp"

namespace cr {

namespace {
// Substream tag for family-level parameters, out of the per-sample range.
constexpr std::uint64_t kParamsTag = ~0ULL;
}  // namespace

Vector Dataset::row(std::size_t i) const {
    const double* p = X.row_ptr(i);
    return Vector(p, p + X.cols());
}

double Dataset::scalar_target(std::size_t i) const {
    switch (kind) {
        case TargetKind::Regression: return targets[i];
        case TargetKind::Ordinal: return static_cast<double>(labels[i]);
        case TargetKind::Classes:
            throw std::logic_error("scalar_target on a classification dataset");
    }
    return 0.0;
}

void Dataset::validate() const {
    const std::size_t n = X.rows();
    if (kind == TargetKind::Regression) {
        if (targets.size() != n) throw std::invalid_argument("dataset: target count mismatch");
    } else {
        if (labels.size() != n) throw std::invalid_argument("dataset: label count mismatch");
        for (int l : labels) {
            const int lo = kind == TargetKind::Ordinal ? 1 : 0;
            const int hi = kind == TargetKind::Ordinal ? num_classes : num_classes - 1;
            if (l < lo || l > hi)
                throw std::invalid_argument("dataset: label " + std::to_string(l) +
                                            " out of range");
        }
    }
}

FamilyKind family_from_string(const std::string& s) {
    if (s == "smooth") return FamilyKind::Smooth;
    if (s == "piecewise") return FamilyKind::Piecewise;
    if (s == "sparse") return FamilyKind::Sparse;
    if (s == "oscillatory") return FamilyKind::Oscillatory;
    if (s == "entangled") return FamilyKind::Entangled;
    throw std::invalid_argument("unknown synthetic family: " + s);
}

std::string to_string(FamilyKind f) {
    switch (f) {
        case FamilyKind::Smooth: return "smooth";
        case FamilyKind::Piecewise: return "piecewise";
        case FamilyKind::Sparse: return "sparse";
        case FamilyKind::Oscillatory: return "oscillatory";
        case FamilyKind::Entangled: return "entangled";
    }
    return "?";
}

std::vector<std::size_t> sparse_active_dims(const SyntheticFamily& spec) {
    std::size_t n_active = static_cast<std::size_t>(
        std::ceil(spec.sparse_fraction * static_cast<double>(spec.dim)));
    n_active = std::max<std::size_t>(n_active, 2);
    n_active = std::min(n_active, spec.dim);
    Rng rng(spec.seed, kParamsTag - 1);
    std::vector<std::size_t> all(spec.dim);
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
    rng.shuffle(all);
    all.resize(n_active);
    std::sort(all.begin(), all.end());
    return all;
}

namespace {

struct FamilyParams {
    Vector w;                          // per-dimension frequencies
    Vector tau;                        // piecewise thresholds
    std::vector<std::size_t> active;   // sparse
    Matrix ent_w1;                     // entangler
    Vector ent_w2;
    Vector w_inner;                    // inner-product reading
};

FamilyParams draw_family_params(const SyntheticFamily& spec) {
    FamilyParams p;
    Rng rng(spec.seed, kParamsTag);
    const double default_sigma =
        spec.kind == FamilyKind::Oscillatory ? 5.0 : 0.5;
    const double sigma = spec.freq_scale >= 0.0 ? spec.freq_scale : default_sigma;
    switch (spec.kind) {
        case FamilyKind::Smooth:
        case FamilyKind::Oscillatory:
        case FamilyKind::Sparse:
            p.w.resize(spec.dim);
            for (double& w : p.w) w = rng.normal(0.0, sigma);
            if (spec.kind == FamilyKind::Sparse) p.active = sparse_active_dims(spec);
            if (spec.inner_product_reading) {
                p.w_inner.resize(spec.dim);
                for (double& w : p.w_inner) w = rng.normal(0.0, sigma);
            }
            break;
        case FamilyKind::Piecewise:
            p.tau.resize(spec.dim);
            for (double& t : p.tau) t = rng.uniform(-0.5, 0.5);
            break;
        case FamilyKind::Entangled: {
            const std::size_t w = spec.entangler_width;
            p.ent_w1 = Matrix(w, spec.dim);
            const double s1 = 1.0 / std::sqrt(static_cast<double>(spec.dim));
            for (double& v : p.ent_w1.data()) v = rng.normal(0.0, 1.0) * s1;
            p.ent_w2.resize(w);
            const double s2 = 1.0 / std::sqrt(static_cast<double>(w));
            for (double& v : p.ent_w2) v = rng.normal(0.0, 1.0) * s2;
            break;
        }
    }
    return p;
}

double family_target(const SyntheticFamily& spec, const FamilyParams& p, const Vector& x) {
    switch (spec.kind) {
        case FamilyKind::Smooth:
        case FamilyKind::Oscillatory: {
            if (spec.inner_product_reading) return std::sin(dot(p.w_inner, x));
            double y = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) y += std::sin(p.w[j] * x[j]);
            return y;
        }
        case FamilyKind::Sparse: {
            double y = 0.0;
            for (std::size_t j : p.active) y += std::sin(p.w[j] * x[j]);
            return y;
        }
        case FamilyKind::Piecewise: {
            double y = 0.0;
            for (std::size_t j = 0; j < x.size(); ++j) y += std::abs(x[j] - p.tau[j]);
            return y;
        }
        case FamilyKind::Entangled: {
            Vector hidden = matvec(p.ent_w1, x);
            double y = 0.0;
            for (std::size_t i = 0; i < hidden.size(); ++i)
                y += p.ent_w2[i] * std::tanh(hidden[i]);
            return y;
        }
    }
    return 0.0;
}

void standardize(Vector& y) {
    const double n = static_cast<double>(y.size());
    double mean = 0.0;
    for (double v : y) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : y) var += (v - mean) * (v - mean);
    var /= n;
    if (var < 1e-15) {  // degenerate (e.g. zero-frequency override): center only
        for (double& v : y) v -= mean;
        return;
    }
    const double inv_std = 1.0 / std::sqrt(var);
    for (double& v : y) v = (v - mean) * inv_std;
}

}  // namespace

Dataset gen_synthetic(const SyntheticFamily& spec) {
    if (spec.dim < 1 || spec.n < 1) throw std::invalid_argument("gen_synthetic: D, N >= 1");
    const FamilyParams params = draw_family_params(spec);

    Dataset ds;
    ds.X = Matrix(spec.n, spec.dim);
    ds.targets.resize(spec.n);
    ds.kind = TargetKind::Regression;
    ds.source = to_string(spec.kind);
    ds.seed = spec.seed;

    Vector x(spec.dim);
    for (std::size_t i = 0; i < spec.n; ++i) {
        Rng rng(spec.seed, i);  // per-sample substream: order-independent
        for (std::size_t j = 0; j < spec.dim; ++j) x[j] = rng.uniform(-1.0, 1.0);
        std::copy(x.begin(), x.end(), ds.X.row_ptr(i));
        ds.targets[i] = family_target(spec, params, x);
    }
    standardize(ds.targets);
    return ds;
}

// ---------------------------------------------------------------------------
// IDX
// ---------------------------------------------------------------------------

namespace {

std::uint32_t read_u32_be(std::ifstream& f, const std::string& path, std::size_t offset) {
    unsigned char buf[4];
    f.read(reinterpret_cast<char*>(buf), 4);
    if (!f)
        throw std::runtime_error(path + ": truncated at byte offset " + std::to_string(offset));
    return (std::uint32_t(buf[0]) << 24) | (std::uint32_t(buf[1]) << 16) |
           (std::uint32_t(buf[2]) << 8) | std::uint32_t(buf[3]);
}

void write_u32_be(std::ofstream& f, std::uint32_t v) {
    unsigned char buf[4] = {static_cast<unsigned char>(v >> 24),
                            static_cast<unsigned char>(v >> 16),
                            static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    f.write(reinterpret_cast<char*>(buf), 4);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path,
                 std::size_t limit) {
    std::ifstream imgf(images_path, std::ios::binary);
    if (!imgf) throw std::runtime_error("cannot open " + images_path);
    const std::uint32_t img_magic = read_u32_be(imgf, images_path, 0);
    if (img_magic != 2051)
        throw std::runtime_error(images_path + ": bad magic " + std::to_string(img_magic) +
                                 " at byte offset 0 (expected 2051)");
    const std::uint32_t n_img = read_u32_be(imgf, images_path, 4);
    const std::uint32_t rows = read_u32_be(imgf, images_path, 8);
    const std::uint32_t cols = read_u32_be(imgf, images_path, 12);

    std::ifstream labf(labels_path, std::ios::binary);
    if (!labf) throw std::runtime_error("cannot open " + labels_path);
    const std::uint32_t lab_magic = read_u32_be(labf, labels_path, 0);
    if (lab_magic != 2049)
        throw std::runtime_error(labels_path + ": bad magic " + std::to_string(lab_magic) +
                                 " at byte offset 0 (expected 2049)");
    const std::uint32_t n_lab = read_u32_be(labf, labels_path, 4);
    if (n_img != n_lab)
        throw std::runtime_error("image/label count mismatch: " + std::to_string(n_img) +
                                 " vs " + std::to_string(n_lab));

    std::size_t n = n_img;
    if (limit > 0) n = std::min<std::size_t>(n, limit);
    const std::size_t dim = static_cast<std::size_t>(rows) * cols;

    Dataset ds;
    ds.X = Matrix(n, dim);
    ds.labels.resize(n);
    ds.kind = TargetKind::Classes;
    ds.num_classes = 10;
    ds.source = images_path;

    std::vector<unsigned char> buf(dim);
    for (std::size_t i = 0; i < n; ++i) {
        imgf.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(dim));
        if (!imgf)
            throw std::runtime_error(images_path + ": truncated at byte offset " +
                                     std::to_string(16 + i * dim));
        double* row = ds.X.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j) row[j] = buf[j] / 255.0;
        char lab;
        labf.read(&lab, 1);
        if (!labf)
            throw std::runtime_error(labels_path + ": truncated at byte offset " +
                                     std::to_string(8 + i));
        ds.labels[i] = static_cast<unsigned char>(lab);
    }
    ds.validate();
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path,
              const std::string& labels_path) {
    if (ds.kind != TargetKind::Classes || ds.dim() != 784)
        throw std::invalid_argument("save_idx: expects a 784-dim classification dataset");
    std::ofstream imgf(images_path, std::ios::binary);
    if (!imgf) throw std::runtime_error("cannot open " + images_path + " for writing");
    write_u32_be(imgf, 2051);
    write_u32_be(imgf, static_cast<std::uint32_t>(ds.size()));
    write_u32_be(imgf, 28);
    write_u32_be(imgf, 28);
    std::vector<unsigned char> buf(784);
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const double* row = ds.X.row_ptr(i);
        for (std::size_t j = 0; j < 784; ++j)
            buf[j] = static_cast<unsigned char>(std::lround(std::clamp(row[j], 0.0, 1.0) * 255));
        imgf.write(reinterpret_cast<char*>(buf.data()), 784);
    }
    std::ofstream labf(labels_path, std::ios::binary);
    if (!labf) throw std::runtime_error("cannot open " + labels_path + " for writing");
    write_u32_be(labf, 2049);
    write_u32_be(labf, static_cast<std::uint32_t>(ds.size()));
    for (std::size_t i = 0; i < ds.size(); ++i) {
        const char lab = static_cast<char>(ds.labels[i]);
        labf.write(&lab, 1);
    }
}

// ---------------------------------------------------------------------------
// CSV embeddings
// ---------------------------------------------------------------------------

Dataset load_embedding_csv(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path);
    std::string line;
    if (!std::getline(f, line)) throw std::runtime_error(path + ": empty file");
    // header: label,f0,...,f{D-1}
    std::size_t dim = 0;
    {
        std::stringstream ss(line);
        std::string cell;
        if (!std::getline(ss, cell, ',') || cell != "label")
            throw std::runtime_error(path + ": header must start with 'label'");
        while (std::getline(ss, cell, ',')) ++dim;
        if (dim == 0) throw std::runtime_error(path + ": no feature columns");
    }

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t lineno = 1;
    while (std::getline(f, line)) {
        ++lineno;
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string cell;
        std::size_t col = 0;
        while (std::getline(ss, cell, ',')) {
            std::size_t pos = 0;
            double v;
            try {
                v = std::stod(cell, &pos);
            } catch (const std::exception&) {
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": non-numeric cell '" + cell + "'");
            }
            if (pos != cell.size())
                throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                         ": non-numeric cell '" + cell + "'");
            if (col == 0) {
                const int lab = static_cast<int>(v);
                if (v != lab || lab < 1 || lab > 5)
                    throw std::runtime_error(path + ":" + std::to_string(lineno) +
                                             ": label out of range 1..5: " + cell);
                labels.push_back(lab);
            } else {
                values.push_back(v);
            }
            ++col;
        }
        if (col != dim + 1)
            throw std::runtime_error(path + ":" + std::to_string(lineno) + ": ragged row (" +
                                     std::to_string(col) + " cells, expected " +
                                     std::to_string(dim + 1) + ")");
    }

    Dataset ds;
    ds.X = Matrix(labels.size(), dim, std::move(values));
    ds.labels = std::move(labels);
    ds.kind = TargetKind::Ordinal;
    ds.num_classes = 5;
    ds.source = path;
    ds.validate();
    return ds;
}

// ---------------------------------------------------------------------------
// Fixtures
// ---------------------------------------------------------------------------

namespace {

// Seven-segment layout on the 28x28 canvas; enough structure that a small
// classifier is non-trivial once jitter and noise are added. seg[i] is the
// per-segment intensity, 0 meaning the segment is absent; partially dropped
// or ghosted segments make some samples genuinely ambiguous (an 8 missing a
// segment reads as 0, 6, or 9), which keeps test accuracy off the ceiling.
void draw_digit(double* img, const double seg[7], int dx, int dy) {
    double intensity = 0.0;
    auto put = [&](int r, int c) {
        if (r >= 0 && r < 28 && c >= 0 && c < 28) img[r * 28 + c] = intensity;
    };
    auto hline = [&](int r, int c0, int c1) {
        for (int c = c0; c <= c1; ++c) {
            put(r, c);
            put(r + 1, c);
        }
    };
    auto vline = [&](int r0, int r1, int c) {
        for (int r = r0; r <= r1; ++r) {
            put(r, c);
            put(r, c + 1);
        }
    };
    const int top = 5 + dy, mid = 13 + dy, bot = 21 + dy;
    const int left = 9 + dx, right = 17 + dx;
    auto seg_on = [&](int i) {
        intensity = seg[i];
        return seg[i] > 0.0;
    };
    if (seg_on(0)) hline(top, left, right);         // A
    if (seg_on(1)) vline(top, mid, right);          // B
    if (seg_on(2)) vline(mid, bot, right);          // C
    if (seg_on(3)) hline(bot, left, right);         // D
    if (seg_on(4)) vline(mid, bot, left);           // E
    if (seg_on(5)) vline(top, mid, left);           // F
    if (seg_on(6)) hline(mid, left, right);         // G
}

constexpr int kSegMask[10] = {
    0b1111110, 0b0110000, 0b1101101, 0b1111001, 0b0110011,
    0b1011011, 0b1011111, 0b1110000, 0b1111111, 0b1111011};

}  // namespace

Dataset make_synthetic_digits(std::size_t n, std::uint64_t seed) {
    Dataset ds;
    ds.X = Matrix(n, 784);
    ds.labels.resize(n);
    ds.kind = TargetKind::Classes;
    ds.num_classes = 10;
    ds.source = "synthetic-digits";
    ds.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, i);
        const int digit = static_cast<int>(rng.below(10));
        const int dx = static_cast<int>(rng.below(7)) - 3;
        const int dy = static_cast<int>(rng.below(7)) - 3;
        // Per-segment rendering noise: independent intensity jitter, a 5%
        // chance a lit segment drops out, a 3% chance an unlit one ghosts in
        // faintly. This puts the Bayes error above zero on purpose.
        double seg[7];
        for (int s = 0; s < 7; ++s) {
            const bool lit = (kSegMask[digit] >> (6 - s)) & 1;
            const double jitter = rng.uniform(0.5, 1.0);
            const double roll = rng.uniform();
            if (lit)
                seg[s] = roll < 0.05 ? 0.0 : jitter;
            else
                seg[s] = roll < 0.03 ? 0.35 * jitter : 0.0;
        }
        double* img = ds.X.row_ptr(i);
        draw_digit(img, seg, dx, dy);
        for (std::size_t j = 0; j < 784; ++j) {
            img[j] = std::clamp(img[j] + rng.normal(0.0, 0.18), 0.0, 1.0);
        }
        ds.labels[i] = digit;
    }
    return ds;
}

Dataset make_ordinal_fixture(std::size_t n, int num_classes, double noise,
                             std::uint64_t seed, std::size_t dim) {
    Rng master(seed, kParamsTag);
    Vector u(dim);
    for (double& v : u) v = master.uniform(-1.0, 1.0);
    const double norm = l2_norm(u);
    for (double& v : u) v /= norm;

    Dataset ds;
    ds.X = Matrix(n, dim);
    ds.labels.resize(n);
    ds.kind = TargetKind::Ordinal;
    ds.num_classes = num_classes;
    ds.source = "ordinal-fixture";
    ds.seed = seed;
    for (std::size_t i = 0; i < n; ++i) {
        Rng rng(seed, i);
        const int rating = 1 + static_cast<int>(rng.below(num_classes));
        const double score = rating + rng.normal(0.0, noise);
        double* row = ds.X.row_ptr(i);
        for (std::size_t j = 0; j < dim; ++j)
            row[j] = 0.2 * score * u[j] + 0.02 * rng.normal();
        ds.labels[i] = rating;
    }
    return ds;
}

SplitResult split(const Dataset& ds, double train_frac, double val_frac, double test_frac,
                  std::uint64_t seed) {
    if (train_frac <= 0 || val_frac <= 0 || test_frac <= 0)
        throw std::invalid_argument("split: fractions must be positive");
    if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
        throw std::invalid_argument("split: fractions must sum to 1");
    const std::size_t n = ds.size();
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    Rng rng(seed);
    rng.shuffle(perm);

    const std::size_t n_train = static_cast<std::size_t>(std::llround(train_frac * n));
    const std::size_t n_val = static_cast<std::size_t>(std::llround(val_frac * n));
    if (n_train == 0 || n_val == 0 || n_train + n_val >= n)
        throw std::invalid_argument("split: a split would be empty");

    auto slice = [&](std::size_t lo, std::size_t hi) {
        return take_rows(ds, std::vector<std::size_t>(perm.begin() + lo, perm.begin() + hi));
    };
    SplitResult r;
    r.train = slice(0, n_train);
    r.val = slice(n_train, n_train + n_val);
    r.test = slice(n_train + n_val, n);
    return r;
}

Dataset take_rows(const Dataset& ds, const std::vector<std::size_t>& idx) {
    Dataset out;
    out.X = Matrix(idx.size(), ds.dim());
    out.kind = ds.kind;
    out.num_classes = ds.num_classes;
    out.source = ds.source;
    out.seed = ds.seed;
    if (ds.kind == TargetKind::Regression)
        out.targets.resize(idx.size());
    else
        out.labels.resize(idx.size());
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const double* src = ds.X.row_ptr(idx[i]);
        std::copy(src, src + ds.dim(), out.X.row_ptr(i));
        if (ds.kind == TargetKind::Regression)
            out.targets[i] = ds.targets[idx[i]];
        else
            out.labels[i] = ds.labels[idx[i]];
    }
    return out;
}

}  // namespace cr
