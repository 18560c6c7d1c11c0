#include "sgcldff/data/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "sgcldff/core/errors.hpp"
#include "sgcldff/data/png_io.hpp"

namespace fs = std::filesystem;

namespace sgcldff {

namespace {

struct Disk {
    double cy, cx, r;
    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        return dy * dy + dx * dx <= r * r;
    }
};

struct Ellipse {
    double cy, cx, a, b, phi;  // a along rotated x-axis, b along y
    bool contains(double y, double x) const {
        const double dy = y - cy, dx = x - cx;
        const double cs = std::cos(phi), sn = std::sin(phi);
        const double u = cs * dx + sn * dy;
        const double v = -sn * dx + cs * dy;
        return (u * u) / (a * a) + (v * v) / (b * b) <= 1.0;
    }
};

struct Color {
    double r, g, b;
};

struct CellSpec {
    Ellipse cytoplasm;
    std::vector<Disk> lobes;
    Disk bite;           // monocyte only: carved out of the single lobe
    bool has_bite = false;
    Color cyto_color;
    Color nucleus_color;
};

bool in_nucleus(const CellSpec& cell, double y, double x) {
    for (const auto& lobe : cell.lobes)
        if (lobe.contains(y, x)) {
            if (cell.has_bite && cell.bite.contains(y, x)) continue;
            return true;
        }
    return false;
}

// Default label order: 0 neutrophil (3 lobes), 1 lymphocyte (1 round lobe),
// 2 monocyte (kidney), 3 eosinophil (2 lobes).
CellSpec make_cell(int label, int size, Rng& rng) {
    const double s = static_cast<double>(size);
    CellSpec cell;
    const double cy = s * (0.5 + rng.uniform(-0.10, 0.10));
    const double cx = s * (0.5 + rng.uniform(-0.10, 0.10));
    const double a = s * rng.uniform(0.17, 0.21);
    const double b = s * rng.uniform(0.15, 0.19);
    cell.cytoplasm = {cy, cx, a, b, rng.uniform(0.0, 3.14159265)};

    cell.cyto_color = {0.66 + rng.uniform(-0.03, 0.03), 0.70 + rng.uniform(-0.03, 0.03),
                       0.88 + rng.uniform(-0.03, 0.03)};
    cell.nucleus_color = {0.34 + rng.uniform(-0.03, 0.03), 0.20 + rng.uniform(-0.03, 0.03),
                          0.52 + rng.uniform(-0.03, 0.03)};

    switch (label) {
        case 0: {  // neutrophil: 3 small lobes on a ring
            const double theta0 = rng.uniform(0.0, 2.0943951);
            for (int i = 0; i < 3; ++i) {
                const double th = theta0 + i * 2.0943951;
                cell.lobes.push_back({cy + 0.080 * s * std::sin(th), cx + 0.080 * s * std::cos(th),
                                      s * rng.uniform(0.055, 0.068)});
            }
            break;
        }
        case 1: {  // lymphocyte: one large round lobe
            cell.lobes.push_back({cy + rng.uniform(-0.02, 0.02) * s,
                                  cx + rng.uniform(-0.02, 0.02) * s,
                                  s * rng.uniform(0.105, 0.125)});
            break;
        }
        case 2: {  // monocyte: kidney shape = lobe minus offset bite
            const double r = s * rng.uniform(0.115, 0.135);
            const double th = rng.uniform(0.0, 6.2831853);
            cell.lobes.push_back({cy, cx, r});
            cell.bite = {cy + 0.95 * r * std::sin(th), cx + 0.95 * r * std::cos(th), 0.70 * r};
            cell.has_bite = true;
            break;
        }
        case 3: {  // eosinophil: two lobes; cytoplasm carries a warm tint
            const double th = rng.uniform(0.0, 3.14159265);
            const double d = 0.082 * s;
            cell.lobes.push_back(
                {cy + d * std::sin(th), cx + d * std::cos(th), s * rng.uniform(0.07, 0.085)});
            cell.lobes.push_back(
                {cy - d * std::sin(th), cx - d * std::cos(th), s * rng.uniform(0.07, 0.085)});
            cell.cyto_color = {0.90 + rng.uniform(-0.02, 0.02), 0.60 + rng.uniform(-0.03, 0.03),
                               0.50 + rng.uniform(-0.03, 0.03)};
            break;
        }
        default:
            throw ConfigError("synth: label out of range");
    }
    return cell;
}

}  // namespace

std::vector<int> quota_counts(int n, const std::vector<double>& balance) {
    const int k = static_cast<int>(balance.size());
    std::vector<int> counts(static_cast<std::size_t>(k), 0);
    std::vector<std::pair<double, int>> remainders;
    int assigned = 0;
    for (int c = 0; c < k; ++c) {
        const double exact = balance[static_cast<std::size_t>(c)] * n;
        counts[static_cast<std::size_t>(c)] = static_cast<int>(std::floor(exact));
        assigned += counts[static_cast<std::size_t>(c)];
        remainders.push_back({exact - std::floor(exact), c});
    }
    std::sort(remainders.begin(), remainders.end(), [](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; i < n - assigned; ++i)
        counts[static_cast<std::size_t>(remainders[static_cast<std::size_t>(i)].second)]++;
    return counts;
}

DatasetManifest synth_generate(const std::string& root, int n, int image_size,
                               std::uint64_t seed, const std::vector<double>& class_balance) {
    const auto& names = default_class_names();
    const int k = static_cast<int>(class_balance.size());
    if (k != static_cast<int>(names.size()))
        throw ConfigError("synth: class_balance must have one entry per class");
    if (n < k) throw ConfigError("synth: n must be >= number of classes");
    double sum = std::accumulate(class_balance.begin(), class_balance.end(), 0.0);
    if (std::abs(sum - 1.0) > 1e-6) throw ConfigError("synth: class_balance must sum to 1");

    std::error_code ec;
    fs::create_directories(fs::path(root) / "images", ec);
    fs::create_directories(fs::path(root) / "masks", ec);
    if (!fs::is_directory(fs::path(root) / "images") || !fs::is_directory(fs::path(root) / "masks"))
        throw IoError("synth: cannot create output directories under '" + root + "'");

    // Exact per-class quotas, then a seeded shuffle over sample slots.
    const std::vector<int> counts = quota_counts(n, class_balance);
    std::vector<int> labels;
    for (int c = 0; c < k; ++c)
        labels.insert(labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(c)]),
                      c);
    Rng label_rng = Rng::stream(seed, "synth_labels");
    for (std::size_t i = labels.size(); i > 1; --i)
        std::swap(labels[i - 1], labels[static_cast<std::size_t>(label_rng.uniform_int(static_cast<int>(i)))]);

    std::ofstream labels_csv(fs::path(root) / "labels.csv");
    std::ofstream split_csv(fs::path(root) / "split.csv");
    if (!labels_csv || !split_csv) throw IoError("synth: cannot write CSVs under '" + root + "'");
    labels_csv << "id,label_name\n";
    split_csv << "id,split\n";

    // Stratified 70/15/15 split, assigned per class in id order.
    std::vector<int> seen(static_cast<std::size_t>(k), 0);
    auto split_for = [&](int label) {
        const int nc = counts[static_cast<std::size_t>(label)];
        const int n_val = static_cast<int>(std::lround(0.15 * nc));
        const int n_test = static_cast<int>(std::lround(0.15 * nc));
        const int idx = seen[static_cast<std::size_t>(label)]++;
        if (idx < nc - n_val - n_test) return std::string("train");
        if (idx < nc - n_test) return std::string("val");
        return std::string("test");
    };

    const double s = static_cast<double>(image_size);
    for (int i = 0; i < n; ++i) {
        char idbuf[32];
        std::snprintf(idbuf, sizeof(idbuf), "synth_%04d", i);
        const std::string id = idbuf;
        const int label = labels[static_cast<std::size_t>(i)];
        Rng rng = Rng::stream(seed, "synth_sample", static_cast<std::uint64_t>(i));

        const Color bg = {0.90 + rng.uniform(-0.02, 0.02), 0.88 + rng.uniform(-0.02, 0.02),
                          0.86 + rng.uniform(-0.02, 0.02)};
        const int n_rbc = 6 + rng.uniform_int(6);
        std::vector<Disk> rbcs;
        std::vector<Color> rbc_colors;
        for (int d = 0; d < n_rbc; ++d) {
            rbcs.push_back({rng.uniform(0.0, s), rng.uniform(0.0, s), s * rng.uniform(0.06, 0.10)});
            rbc_colors.push_back({0.93 + rng.uniform(-0.02, 0.02), 0.72 + rng.uniform(-0.03, 0.03),
                                  0.74 + rng.uniform(-0.03, 0.03)});
        }
        const CellSpec cell = make_cell(label, image_size, rng);

        std::vector<std::uint8_t> rgb(static_cast<std::size_t>(image_size) * image_size * 3);
        std::vector<std::uint8_t> msk(static_cast<std::size_t>(image_size) * image_size);
        Rng noise_rng = Rng::stream(seed, "synth_noise", static_cast<std::uint64_t>(i));

        for (int y = 0; y < image_size; ++y)
            for (int x = 0; x < image_size; ++x) {
                double acc_r = 0, acc_g = 0, acc_b = 0;
                // 2x2 supersampling for soft shape edges.
                for (int sy = 0; sy < 2; ++sy)
                    for (int sx = 0; sx < 2; ++sx) {
                        const double py = y + 0.25 + 0.5 * sy;
                        const double px = x + 0.25 + 0.5 * sx;
                        Color c = bg;
                        for (int d = 0; d < n_rbc; ++d)
                            if (rbcs[static_cast<std::size_t>(d)].contains(py, px)) {
                                const Color& rc = rbc_colors[static_cast<std::size_t>(d)];
                                c = {0.55 * c.r + 0.45 * rc.r, 0.55 * c.g + 0.45 * rc.g,
                                     0.55 * c.b + 0.45 * rc.b};
                            }
                        if (cell.cytoplasm.contains(py, px)) c = cell.cyto_color;
                        if (in_nucleus(cell, py, px)) c = cell.nucleus_color;
                        acc_r += c.r;
                        acc_g += c.g;
                        acc_b += c.b;
                    }
                double r = acc_r / 4, g = acc_g / 4, b = acc_b / 4;
                r = std::clamp(r + 0.008 * noise_rng.normal(), 0.0, 1.0);
                g = std::clamp(g + 0.008 * noise_rng.normal(), 0.0, 1.0);
                b = std::clamp(b + 0.008 * noise_rng.normal(), 0.0, 1.0);
                const std::size_t px_idx = (static_cast<std::size_t>(y) * image_size + x);
                rgb[px_idx * 3 + 0] = static_cast<std::uint8_t>(std::lround(r * 255.0));
                rgb[px_idx * 3 + 1] = static_cast<std::uint8_t>(std::lround(g * 255.0));
                rgb[px_idx * 3 + 2] = static_cast<std::uint8_t>(std::lround(b * 255.0));

                const double cy_ = y + 0.5, cx_ = x + 0.5;
                const bool fg = cell.cytoplasm.contains(cy_, cx_) || in_nucleus(cell, cy_, cx_);
                msk[px_idx] = fg ? 255 : 0;
            }

        write_png((fs::path(root) / "images" / (id + ".png")).string(), image_size, image_size, 3,
                  rgb);
        write_png((fs::path(root) / "masks" / (id + ".png")).string(), image_size, image_size, 1,
                  msk);
        labels_csv << id << "," << names[static_cast<std::size_t>(label)] << "\n";
        split_csv << id << "," << split_for(label) << "\n";
    }
    labels_csv.close();
    split_csv.close();
    if (!labels_csv || !split_csv) throw IoError("synth: short write under '" + root + "'");

    return load_dataset(root, Split::Train, names);
}

}  // namespace sgcldff
