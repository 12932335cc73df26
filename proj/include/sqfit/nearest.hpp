#pragma once

#include "sqfit/geometry.hpp"

#include <span>
#include <vector>

namespace sqfit {

/// Exact nearest-neighbour queries against a fixed point set, bucketed in a
/// uniform grid. Queries are const and may run concurrently.
class NearestGrid {
  public:
    explicit NearestGrid(std::span<const Vec3> points);

    /// Squared distance to the closest stored point; +inf when empty.
    double nearest_sq(const Vec3& q) const;

    std::size_t size() const { return x_.size(); }

  private:
    Vec3 origin_ = Vec3::Zero();
    double cell_ = 1.0;
    int dims_[3] = {1, 1, 1};
    std::vector<double> x_, y_, z_;
    /// Cell c holds points [start_[c], start_[c + 1]).
    std::vector<std::size_t> start_;

    std::size_t cell_index(int ix, int iy, int iz) const {
        return (static_cast<std::size_t>(iz) * dims_[1] + iy) * dims_[0] + ix;
    }
};

/// Distance from each query to its nearest point in `targets`.
std::vector<double> nearest_distances(std::span<const Vec3> queries, std::span<const Vec3> targets);

}  // namespace sqfit
