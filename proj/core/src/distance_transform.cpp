#include "segdiag/distance_transform.hpp"

#include <algorithm>
#include <limits>
#include <vector>

namespace segdiag {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// 1-D squared distance transform (Felzenszwalb & Huttenlocher 2012).
void transform_1d(const std::vector<double>& f, std::vector<double>& out) {
    int n = static_cast<int>(f.size());
    std::vector<int> v(n);        // parabola sites
    std::vector<double> z(n + 1); // envelope breakpoints
    int k = 0;
    v[0] = 0;
    z[0] = -kInf;
    z[1] = kInf;
    for (int q = 1; q < n; ++q) {
        if (f[q] == kInf) continue;
        double s;
        while (true) {
            if (f[v[k]] == kInf) {
                // An infinite parabola never wins; drop it.
                if (k == 0) {
                    v[0] = q;
                    z[0] = -kInf;
                    z[1] = kInf;
                    s = -kInf;
                    break;
                }
                --k;
                continue;
            }
            s = ((f[q] + static_cast<double>(q) * q) -
                 (f[v[k]] + static_cast<double>(v[k]) * v[k])) /
                (2.0 * q - 2.0 * v[k]);
            if (s <= z[k]) {
                --k;
                continue;
            }
            break;
        }
        if (v[k] != q) {
            ++k;
            v[k] = q;
            z[k] = s;
            z[k + 1] = kInf;
        }
    }
    k = 0;
    for (int q = 0; q < n; ++q) {
        while (z[k + 1] < q) ++k;
        double base = f[v[k]];
        out[q] = base == kInf ? kInf : (q - v[k]) * static_cast<double>(q - v[k]) + base;
    }
}

}  // namespace

Image<double> squared_euclidean_distance(const Image<std::uint8_t>& seeds) {
    int h = seeds.height();
    int w = seeds.width();
    Image<double> d(h, w, kInf);
    for (int r = 0; r < h; ++r) {
        for (int c = 0; c < w; ++c) {
            if (seeds.at(r, c)) d.at(r, c) = 0.0;
        }
    }
    std::vector<double> f(std::max(h, w));
    std::vector<double> out(std::max(h, w));
    // Columns first, then rows.
    for (int c = 0; c < w; ++c) {
        f.resize(h);
        out.resize(h);
        for (int r = 0; r < h; ++r) f[r] = d.at(r, c);
        transform_1d(f, out);
        for (int r = 0; r < h; ++r) d.at(r, c) = out[r];
    }
    for (int r = 0; r < h; ++r) {
        f.resize(w);
        out.resize(w);
        for (int c = 0; c < w; ++c) f[c] = d.at(r, c);
        transform_1d(f, out);
        for (int c = 0; c < w; ++c) d.at(r, c) = out[c];
    }
    return d;
}

}  // namespace segdiag
