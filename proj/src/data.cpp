#include "npnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <numeric>

namespace npnet {

int Dataset::classes() const {
    int c = 0;
    for (int l : labels) c = std::max(c, l + 1);
    return c;
}

Tensor Dataset::sample(int i) const {
    auto s = sample_shape();
    long per = static_cast<long>(s[0]) * s[1] * s[2];
    Tensor out({1, s[0], s[1], s[2]});
    std::copy_n(&images.data[i * per], per, out.data.begin());
    return out;
}

Tensor Dataset::batch(const std::vector<int>& ids) const {
    auto s = sample_shape();
    long per = static_cast<long>(s[0]) * s[1] * s[2];
    Tensor out({static_cast<int>(ids.size()), s[0], s[1], s[2]});
    for (std::size_t i = 0; i < ids.size(); ++i)
        std::copy_n(&images.data[ids[i] * per], per, &out.data[i * per]);
    return out;
}

void Dataset::validate() const {
    if (n() == 0) throw Error("dataset: empty");
    if (static_cast<int>(labels.size()) != n()) throw Error("dataset: image/label count mismatch");
    for (double v : images.data)
        if (!(v >= 0.0 && v <= 1.0)) throw Error("dataset: pixel value outside [0,1]");
    int c = classes();
    for (int l : labels)
        if (l < 0 || l >= c) throw Error("dataset: label out of range");
}

static std::uint32_t read_u32_be(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw Error("idx: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

static void write_u32_be(std::ostream& out, std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v >> 24), static_cast<unsigned char>(v >> 16),
                          static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
    out.write(reinterpret_cast<const char*>(b), 4);
}

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream img(images_path, std::ios::binary);
    if (!img) throw Error("idx: cannot open " + images_path);
    if (read_u32_be(img) != 0x00000803u) throw Error("idx: bad image magic in " + images_path);
    std::uint32_t n = read_u32_be(img), h = read_u32_be(img), w = read_u32_be(img);

    std::ifstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error("idx: cannot open " + labels_path);
    if (read_u32_be(lab) != 0x00000801u) throw Error("idx: bad label magic in " + labels_path);
    std::uint32_t nl = read_u32_be(lab);
    if (n != nl)
        throw Error("idx: image count " + std::to_string(n) + " != label count " +
                    std::to_string(nl));
    if (n == 0) throw Error("idx: empty dataset");

    Dataset ds;
    ds.images = Tensor({static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w)});
    std::vector<unsigned char> buf(static_cast<std::size_t>(n) * h * w);
    img.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!img) throw Error("idx: truncated image file " + images_path);
    for (std::size_t i = 0; i < buf.size(); ++i) ds.images.data[i] = buf[i] / 255.0;

    std::vector<unsigned char> lbuf(n);
    lab.read(reinterpret_cast<char*>(lbuf.data()), lbuf.size());
    if (!lab) throw Error("idx: truncated label file " + labels_path);
    ds.labels.assign(lbuf.begin(), lbuf.end());
    return ds;
}

void save_idx(const Dataset& ds, const std::string& images_path, const std::string& labels_path) {
    auto s = ds.sample_shape();
    if (s[0] != 1) throw Error("save_idx: only single-channel images supported");
    std::ofstream img(images_path, std::ios::binary);
    if (!img) throw Error("save_idx: cannot write " + images_path);
    write_u32_be(img, 0x00000803u);
    write_u32_be(img, ds.n());
    write_u32_be(img, s[1]);
    write_u32_be(img, s[2]);
    for (double v : ds.images.data)
        img.put(static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0))));
    std::ofstream lab(labels_path, std::ios::binary);
    if (!lab) throw Error("save_idx: cannot write " + labels_path);
    write_u32_be(lab, 0x00000801u);
    write_u32_be(lab, ds.n());
    for (int l : ds.labels) lab.put(static_cast<char>(static_cast<unsigned char>(l)));
}

Dataset subset(const Dataset& ds, int n, std::uint64_t seed) {
    if (n > ds.n()) throw Error("subset: requested more samples than available");
    int classes = ds.classes();
    if (n < classes) throw Error("subset: need at least one sample per class");
    std::vector<std::vector<int>> by_class(classes);
    for (int i = 0; i < ds.n(); ++i) by_class[ds.labels[i]].push_back(i);
    Rng rng(seed);
    for (auto& v : by_class) std::shuffle(v.begin(), v.end(), rng.engine());

    // Largest-remainder apportionment of n across classes.
    std::vector<int> take(classes, 0);
    std::vector<std::pair<double, int>> rema;
    int assigned = 0;
    for (int c = 0; c < classes; ++c) {
        double exact = static_cast<double>(n) * by_class[c].size() / ds.n();
        take[c] = static_cast<int>(exact);
        assigned += take[c];
        rema.push_back({exact - take[c], c});
    }
    std::sort(rema.begin(), rema.end(), [](auto& a, auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return a.second < b.second;
    });
    for (int i = 0; assigned < n; ++i) {
        int c = rema[i % classes].second;
        if (take[c] < static_cast<int>(by_class[c].size())) {
            ++take[c];
            ++assigned;
        }
    }
    std::vector<int> ids;
    for (int c = 0; c < classes; ++c)
        ids.insert(ids.end(), by_class[c].begin(), by_class[c].begin() + take[c]);
    std::sort(ids.begin(), ids.end());

    Dataset out;
    out.images = ds.batch(ids);
    for (int i : ids) out.labels.push_back(ds.labels[i]);
    out.split = ds.split;
    return out;
}

static Dataset from_points(const std::vector<std::vector<double>>& pts,
                           const std::vector<int>& labels) {
    int n = static_cast<int>(pts.size());
    int p = static_cast<int>(pts[0].size());
    // Affinely squash each coordinate into [0,1] so the data obeys the box
    // contract shared with images.
    std::vector<double> lo(p, 1e300), hi(p, -1e300);
    for (const auto& pt : pts)
        for (int j = 0; j < p; ++j) {
            lo[j] = std::min(lo[j], pt[j]);
            hi[j] = std::max(hi[j], pt[j]);
        }
    Dataset ds;
    ds.images = Tensor({n, 1, 1, p});
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < p; ++j) {
            double range = hi[j] - lo[j];
            ds.images.data[static_cast<long>(i) * p + j] =
                range > 0 ? (pts[i][j] - lo[j]) / range : 0.5;
        }
    ds.labels = labels;
    return ds;
}

Dataset synth_two_moons(int n, double noise, std::uint64_t seed) {
    if (n < 2) throw Error("two_moons: need n >= 2");
    Rng rng(seed);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        int c = i % 2;
        double t = M_PI * rng.uniform(0.0, 1.0);
        double x = c == 0 ? std::cos(t) : 1.0 - std::cos(t);
        double y = c == 0 ? std::sin(t) : 0.5 - std::sin(t);
        pts.push_back({x + rng.normal(0.0, noise), y + rng.normal(0.0, noise)});
        labels.push_back(c);
    }
    auto ds = from_points(pts, labels);
    ds.split = "two_moons";
    return ds;
}

Dataset synth_gaussian_blobs(int classes, int p, int n, double noise, std::uint64_t seed) {
    if (n < classes) throw Error("blobs: need n >= classes");
    Rng rng(seed);
    std::vector<std::vector<double>> centers(classes, std::vector<double>(p));
    for (auto& c : centers)
        for (double& v : c) v = rng.uniform(-1.0, 1.0);
    std::vector<std::vector<double>> pts;
    std::vector<int> labels;
    for (int i = 0; i < n; ++i) {
        int c = i % classes;
        std::vector<double> pt(p);
        for (int j = 0; j < p; ++j) pt[j] = centers[c][j] + rng.normal(0.0, noise);
        pts.push_back(std::move(pt));
        labels.push_back(c);
    }
    auto ds = from_points(pts, labels);
    ds.split = "gaussian_blobs";
    return ds;
}

std::string dataset_fingerprint(const Dataset& ds) {
    std::uint64_t h = 1469598103934665603ull;
    auto mix = [&](std::uint64_t v) {
        h ^= v;
        h *= 1099511628211ull;
    };
    for (double v : ds.images.data) {
        std::uint64_t bits;
        static_assert(sizeof(bits) == sizeof(v));
        std::memcpy(&bits, &v, 8);
        mix(bits);
    }
    for (int l : ds.labels) mix(static_cast<std::uint64_t>(l));
    char buf[20];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace npnet
