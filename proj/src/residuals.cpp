#include "sqfit/residuals.hpp"

#include "sqfit/kernels.hpp"

#include <algorithm>

namespace sqfit {

ResidualEvaluator::ResidualEvaluator(std::span<const Vec3> points)
    : x_(points.size()), y_(points.size()), z_(points.size()), px_(points.size()), py_(points.size()),
      pz_(points.size()), valid_(points.size()) {
    for (std::size_t i = 0; i < points.size(); ++i) {
        x_[i] = points[i].x();
        y_[i] = points[i].y();
        z_[i] = points[i].z();
    }
}

void ResidualEvaluator::radial(const SuperquadricModel& model, std::span<double> out) {
    const auto& k = kernels::active();
    const Eigen::Matrix<double, 3, 3, Eigen::RowMajor> rot = model.rotation();
    k.rigid_inverse(rot.data(), model.translation.data(), x_, y_, z_, px_, py_, pz_);
    std::fill(valid_.begin(), valid_.end(), std::uint8_t{1});

    if (const auto* taper = std::get_if<Taper>(&model.deformation)) {
        k.taper_inverse(taper->kx, taper->ky, model.size.z(), px_, py_, pz_, valid_);
    } else if (const auto* bend = std::get_if<Bend>(&model.deformation)) {
        for (std::size_t i = 0; i < px_.size(); ++i) {
            const auto p = try_inverse_bend(*bend, {px_[i], py_[i], pz_[i]});
            if (!p) {
                valid_[i] = 0;
                continue;
            }
            px_[i] = p->x();
            py_[i] = p->y();
            pz_[i] = p->z();
        }
    }
    const kernels::ShapeParams shape{model.eps1, model.eps2, model.size.x(), model.size.y(), model.size.z()};
    k.radial_residual(shape, px_, py_, pz_, valid_, model.size.minCoeff(), out);
}

std::vector<double> ResidualEvaluator::radial(const SuperquadricModel& model) {
    std::vector<double> out(size());
    radial(model, out);
    return out;
}

}  // namespace sqfit
