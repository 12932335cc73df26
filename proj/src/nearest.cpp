#include "sqfit/nearest.hpp"

#include "sqfit/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace sqfit {

NearestGrid::NearestGrid(std::span<const Vec3> points) {
    const std::size_t n = points.size();
    if (n == 0) {
        start_ = {0, 0};
        return;
    }
    Vec3 lo = points[0];
    Vec3 hi = points[0];
    for (const auto& p : points) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 ext = (hi - lo).cwiseMax(1e-12);
    // Points on a surface: size cells from a surface-area proxy so each
    // occupied cell holds a handful of points.
    const double area = 2.0 * (ext.x() * ext.y() + ext.y() * ext.z() + ext.z() * ext.x());
    cell_ = std::max(2.0 * std::sqrt(area / static_cast<double>(n)), 1e-9);
    const double max_cells = 8.0 * static_cast<double>(n) + 64.0;
    while ((std::floor(ext.x() / cell_) + 1) * (std::floor(ext.y() / cell_) + 1) * (std::floor(ext.z() / cell_) + 1) >
           max_cells)
        cell_ *= 1.25;
    origin_ = lo;
    for (int a = 0; a < 3; ++a) dims_[a] = static_cast<int>(std::floor(ext[a] / cell_)) + 1;

    const std::size_t cells = static_cast<std::size_t>(dims_[0]) * dims_[1] * dims_[2];
    std::vector<std::size_t> owner(n);
    start_.assign(cells + 1, 0);
    for (std::size_t i = 0; i < n; ++i) {
        int c[3];
        for (int a = 0; a < 3; ++a)
            c[a] = std::clamp(static_cast<int>(std::floor((points[i][a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
        owner[i] = cell_index(c[0], c[1], c[2]);
        ++start_[owner[i] + 1];
    }
    for (std::size_t c = 0; c < cells; ++c) start_[c + 1] += start_[c];
    std::vector<std::size_t> fill(start_.begin(), start_.end() - 1);
    x_.resize(n);
    y_.resize(n);
    z_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t slot = fill[owner[i]]++;
        x_[slot] = points[i].x();
        y_[slot] = points[i].y();
        z_[slot] = points[i].z();
    }
}

double NearestGrid::nearest_sq(const Vec3& q) const {
    double best = std::numeric_limits<double>::infinity();
    if (x_.empty()) return best;
    const auto& k = kernels::active();
    int c[3];
    for (int a = 0; a < 3; ++a)
        c[a] = std::clamp(static_cast<int>(std::floor((q[a] - origin_[a]) / cell_)), 0, dims_[a] - 1);
    const int max_ring = std::max({dims_[0], dims_[1], dims_[2]});

    auto scan = [&](int ix, int iy, int iz) {
        const std::size_t cell = cell_index(ix, iy, iz);
        const std::size_t b = start_[cell];
        const std::size_t e = start_[cell + 1];
        if (b == e) return;
        best = k.min_sq_distance(q.x(), q.y(), q.z(), std::span(x_).subspan(b, e - b),
                                 std::span(y_).subspan(b, e - b), std::span(z_).subspan(b, e - b), best);
    };

    for (int r = 0; r <= max_ring; ++r) {
        for (int dz = -r; dz <= r; ++dz) {
            const int iz = c[2] + dz;
            if (iz < 0 || iz >= dims_[2]) continue;
            for (int dy = -r; dy <= r; ++dy) {
                const int iy = c[1] + dy;
                if (iy < 0 || iy >= dims_[1]) continue;
                const bool on_shell = std::abs(dz) == r || std::abs(dy) == r;
                for (int dx = -r; dx <= r; dx += on_shell ? 1 : 2 * std::max(r, 1)) {
                    const int ix = c[0] + dx;
                    if (ix >= 0 && ix < dims_[0]) scan(ix, iy, iz);
                }
            }
        }
        // Any cell outside this ring is at least `bound` away from q.
        double bound = std::numeric_limits<double>::infinity();
        for (int a = 0; a < 3; ++a) {
            if (c[a] - r > 0) bound = std::min(bound, q[a] - (origin_[a] + (c[a] - r) * cell_));
            if (c[a] + r < dims_[a] - 1) bound = std::min(bound, origin_[a] + (c[a] + r + 1) * cell_ - q[a]);
        }
        if (bound == std::numeric_limits<double>::infinity()) break;
        if (bound > 0 && best <= bound * bound) break;
    }
    return best;
}

std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets) {
    const NearestGrid grid(targets);
    std::vector<double> out(queries.size());
    for (std::size_t i = 0; i < queries.size(); ++i) out[i] = std::sqrt(grid.nearest_sq(queries[i]));
    return out;
}

}  // namespace sqfit
