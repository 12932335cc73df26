#pragma once

// Batched radial residuals of a fixed point set against varying models.
// Owns a structure-of-arrays copy of the points and scratch space, so one
// instance must not be shared between threads.

#include "sqfit/geometry.hpp"

#include <cstdint>
#include <span>
#include <vector>

namespace sqfit {

class ResidualEvaluator {
  public:
    explicit ResidualEvaluator(std::span<const Vec3> points);

    std::size_t size() const { return x_.size(); }

    /// Radial distance |1 - F^(-eps1/2)| |p_c| per point. Points whose
    /// canonical image is undefined (taper singular plane, outside the bend
    /// branch) or at the centre get min(size).
    void radial(const SuperquadricModel& model, std::span<double> out);

    std::vector<double> radial(const SuperquadricModel& model);

  private:
    std::vector<double> x_, y_, z_;
    std::vector<double> px_, py_, pz_;
    std::vector<std::uint8_t> valid_;
};

}  // namespace sqfit
