// AVX2 variants of the kernels in sqfit/kernels.hpp. Only this file is built
// with -mavx2 -mfma; nothing here may be called unless the dispatcher has
// confirmed CPU support.
//
// exp and log are fdlibm's reduction + polynomial schemes in vector form
// (< 1 ulp on the ranges used here). The arithmetic-only kernels evaluate in
// the same order as the scalar reference, and the library is compiled with
// -ffp-contract=off, so those agree with it bit for bit.

#include "kernels/variants.hpp"

#include <immintrin.h>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>

namespace sqfit::kernels::detail {

namespace {

using V = __m256d;
constexpr std::size_t kLanes = 4;

inline V set1(double v) { return _mm256_set1_pd(v); }
inline V abs_pd(V v) { return _mm256_andnot_pd(_mm256_set1_pd(-0.0), v); }
inline V blend(V a, V b, V mask) { return _mm256_blendv_pd(a, b, mask); }

inline V pow2_pd(V k) {
    // k integral in [-1022, 1023].
    const V biased = _mm256_add_pd(k, set1(1023.0 + 4503599627370496.0));
    const __m256i bits = _mm256_and_si256(_mm256_castpd_si256(biased), _mm256_set1_epi64x(0x7FF));
    return _mm256_castsi256_pd(_mm256_slli_epi64(bits, 52));
}

V log_pd(V x) {
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double lg1 = 6.666666666666735130e-01;
    constexpr double lg2 = 3.999999999940941908e-01;
    constexpr double lg3 = 2.857142874366239149e-01;
    constexpr double lg4 = 2.222219843214978396e-01;
    constexpr double lg5 = 1.818357216161805012e-01;
    constexpr double lg6 = 1.531383769920937332e-01;
    constexpr double lg7 = 1.479819860511658591e-01;

    const V tiny = _mm256_cmp_pd(x, set1(2.2250738585072014e-308), _CMP_LT_OQ);
    const V xs = blend(x, _mm256_mul_pd(x, set1(18014398509481984.0)), tiny);
    const V k_adjust = blend(set1(0.0), set1(-54.0), tiny);

    const __m256i bits = _mm256_castpd_si256(xs);
    const __m256i biased_exp = _mm256_srli_epi64(bits, 52);
    const V e = _mm256_sub_pd(_mm256_castsi256_pd(_mm256_or_si256(biased_exp, _mm256_set1_epi64x(0x4330000000000000))),
                              set1(4503599627370496.0));
    V m = _mm256_castsi256_pd(_mm256_or_si256(_mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFF)),
                                              _mm256_set1_epi64x(0x3FF0000000000000)));
    const V above = _mm256_cmp_pd(m, set1(1.4142135623730951), _CMP_GT_OQ);
    m = blend(m, _mm256_mul_pd(m, set1(0.5)), above);
    const V k = _mm256_add_pd(_mm256_add_pd(_mm256_sub_pd(e, set1(1023.0)), k_adjust),
                              _mm256_and_pd(above, set1(1.0)));

    const V f = _mm256_sub_pd(m, set1(1.0));
    const V s = _mm256_div_pd(f, _mm256_add_pd(set1(2.0), f));
    const V z = _mm256_mul_pd(s, s);
    const V w = _mm256_mul_pd(z, z);
    const V t1 = _mm256_mul_pd(
        w, _mm256_add_pd(set1(lg2), _mm256_mul_pd(w, _mm256_add_pd(set1(lg4), _mm256_mul_pd(w, set1(lg6))))));
    const V t2 = _mm256_mul_pd(
        z, _mm256_add_pd(set1(lg1),
                         _mm256_mul_pd(w, _mm256_add_pd(set1(lg3), _mm256_mul_pd(w, _mm256_add_pd(
                                                                                       set1(lg5),
                                                                                       _mm256_mul_pd(w, set1(lg7))))))));
    const V r = _mm256_add_pd(t2, t1);
    const V hfsq = _mm256_mul_pd(set1(0.5), _mm256_mul_pd(f, f));
    const V inner = _mm256_add_pd(_mm256_mul_pd(s, _mm256_add_pd(hfsq, r)), _mm256_mul_pd(k, set1(ln2_lo)));
    V result = _mm256_sub_pd(_mm256_mul_pd(k, set1(ln2_hi)), _mm256_sub_pd(_mm256_sub_pd(hfsq, inner), f));

    const V inf = set1(HUGE_VAL);
    result = blend(result, _mm256_sub_pd(set1(0.0), inf), _mm256_cmp_pd(x, set1(0.0), _CMP_EQ_OQ));
    result = blend(result, inf, _mm256_cmp_pd(x, inf, _CMP_EQ_OQ));
    result = blend(result, set1(NAN), _mm256_cmp_pd(x, set1(0.0), _CMP_NGE_UQ));
    return result;
}

V exp_pd(V x) {
    constexpr double ln2_hi = 6.93147180369123816490e-01;
    constexpr double ln2_lo = 1.90821492927058770002e-10;
    constexpr double inv_ln2 = 1.44269504088896338700e+00;
    constexpr double p1 = 1.66666666666666019037e-01;
    constexpr double p2 = -2.77777777770155933842e-03;
    constexpr double p3 = 6.61375632143793436117e-05;
    constexpr double p4 = -1.65339022054652515390e-06;
    constexpr double p5 = 4.13813679705723846039e-08;
    constexpr double overflow = 7.09782712893383973096e+02;
    constexpr double underflow = -7.45133219101941108420e+02;

    const V xc = _mm256_min_pd(_mm256_max_pd(x, set1(underflow)), set1(overflow));
    const V k = _mm256_round_pd(_mm256_mul_pd(xc, set1(inv_ln2)), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
    const V hi = _mm256_sub_pd(xc, _mm256_mul_pd(k, set1(ln2_hi)));
    const V lo = _mm256_mul_pd(k, set1(ln2_lo));
    const V r = _mm256_sub_pd(hi, lo);
    const V t = _mm256_mul_pd(r, r);
    const V poly = _mm256_add_pd(
        set1(p1),
        _mm256_mul_pd(t, _mm256_add_pd(set1(p2),
                                       _mm256_mul_pd(t, _mm256_add_pd(set1(p3),
                                                                      _mm256_mul_pd(t, _mm256_add_pd(
                                                                                           set1(p4),
                                                                                           _mm256_mul_pd(t, set1(p5)))))))));
    const V c = _mm256_sub_pd(r, _mm256_mul_pd(t, poly));
    const V frac = _mm256_div_pd(_mm256_mul_pd(r, c), _mm256_sub_pd(set1(2.0), c));
    const V y = _mm256_sub_pd(set1(1.0), _mm256_sub_pd(_mm256_sub_pd(lo, frac), hi));

    // Two-step scaling keeps both factors normal across the denormal range.
    const V k_half = _mm256_floor_pd(_mm256_mul_pd(k, set1(0.5)));
    V result = _mm256_mul_pd(_mm256_mul_pd(y, pow2_pd(_mm256_sub_pd(k, k_half))), pow2_pd(k_half));

    result = blend(result, set1(HUGE_VAL), _mm256_cmp_pd(x, set1(overflow), _CMP_GT_OQ));
    result = blend(result, set1(0.0), _mm256_cmp_pd(x, set1(underflow), _CMP_LT_OQ));
    result = blend(result, x, _mm256_cmp_pd(x, x, _CMP_UNORD_Q));
    return result;
}

V log_add_exp_pd(V a, V b) {
    const V neg_inf = set1(-HUGE_VAL);
    const V m = _mm256_max_pd(a, b);
    const V d = _mm256_sub_pd(set1(0.0), abs_pd(_mm256_sub_pd(a, b)));
    V result = _mm256_add_pd(m, log_pd(_mm256_add_pd(set1(1.0), exp_pd(d))));
    const V both = _mm256_and_pd(_mm256_cmp_pd(a, neg_inf, _CMP_EQ_OQ), _mm256_cmp_pd(b, neg_inf, _CMP_EQ_OQ));
    return blend(result, neg_inf, both);
}

V radial_block(const ShapeParams& s, V px, V py, V pz, V valid_mask, double fallback) {
    const V norm = _mm256_sqrt_pd(
        _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(px, px), _mm256_mul_pd(py, py)), _mm256_mul_pd(pz, pz)));
    const V lx = log_pd(_mm256_div_pd(abs_pd(px), set1(s.ax)));
    const V ly = log_pd(_mm256_div_pd(abs_pd(py), set1(s.ay)));
    const V lz = log_pd(_mm256_div_pd(abs_pd(pz), set1(s.az)));
    const V e2 = set1(2.0 / s.eps2);
    const V lxy = _mm256_mul_pd(log_add_exp_pd(_mm256_mul_pd(e2, lx), _mm256_mul_pd(e2, ly)), set1(s.eps2 / s.eps1));
    const V log_f = log_add_exp_pd(lxy, _mm256_mul_pd(set1(2.0 / s.eps1), lz));
    const V scale = exp_pd(_mm256_mul_pd(set1(-0.5 * s.eps1), log_f));
    const V res = _mm256_mul_pd(abs_pd(_mm256_sub_pd(set1(1.0), scale)), norm);
    const V good = _mm256_and_pd(valid_mask, _mm256_cmp_pd(norm, set1(kOriginGuard), _CMP_GE_OQ));
    return blend(set1(fallback), res, good);
}

V valid_mask_from(const std::uint8_t* flags) {
    std::int32_t packed;
    std::memcpy(&packed, flags, sizeof(packed));
    const __m256i wide = _mm256_cvtepu8_epi64(_mm_cvtsi32_si128(packed));
    return _mm256_castsi256_pd(_mm256_xor_si256(_mm256_cmpeq_epi64(wide, _mm256_setzero_si256()),
                                                _mm256_set1_epi64x(-1)));
}

void rigid_inverse(const double* r, const double* t, std::span<const double> x, std::span<const double> y,
                   std::span<const double> z, std::span<double> px, std::span<double> py, std::span<double> pz) {
    const std::size_t n = x.size();
    std::size_t i = 0;
    const V tx = set1(t[0]), ty = set1(t[1]), tz = set1(t[2]);
    for (; i + kLanes <= n; i += kLanes) {
        const V dx = _mm256_sub_pd(_mm256_loadu_pd(&x[i]), tx);
        const V dy = _mm256_sub_pd(_mm256_loadu_pd(&y[i]), ty);
        const V dz = _mm256_sub_pd(_mm256_loadu_pd(&z[i]), tz);
        for (int row = 0; row < 3; ++row) {
            const V v = _mm256_add_pd(
                _mm256_add_pd(_mm256_mul_pd(set1(r[row]), dx), _mm256_mul_pd(set1(r[3 + row]), dy)),
                _mm256_mul_pd(set1(r[6 + row]), dz));
            double* dst = row == 0 ? &px[i] : row == 1 ? &py[i] : &pz[i];
            _mm256_storeu_pd(dst, v);
        }
    }
    if (i < n)
        scalar_table().rigid_inverse(r, t, x.subspan(i), y.subspan(i), z.subspan(i), px.subspan(i), py.subspan(i),
                                     pz.subspan(i));
}

void taper_inverse(double kx, double ky, double az, std::span<double> px, std::span<double> py,
                   std::span<const double> pz, std::span<std::uint8_t> valid) {
    const std::size_t n = px.size();
    const V cx = set1(kx / az);
    const V cy = set1(ky / az);
    const V guard = set1(kTaperGuard);
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const V z = _mm256_loadu_pd(&pz[i]);
        const V fx = _mm256_add_pd(_mm256_mul_pd(cx, z), set1(1.0));
        const V fy = _mm256_add_pd(_mm256_mul_pd(cy, z), set1(1.0));
        const V bad = _mm256_or_pd(_mm256_cmp_pd(abs_pd(fx), guard, _CMP_LT_OQ),
                                   _mm256_cmp_pd(abs_pd(fy), guard, _CMP_LT_OQ));
        _mm256_storeu_pd(&px[i], _mm256_div_pd(_mm256_loadu_pd(&px[i]), fx));
        _mm256_storeu_pd(&py[i], _mm256_div_pd(_mm256_loadu_pd(&py[i]), fy));
        const int bits = _mm256_movemask_pd(bad);
        for (std::size_t lane = 0; lane < kLanes; ++lane)
            if (bits & (1 << lane)) valid[i + lane] = 0;
    }
    if (i < n)
        scalar_table().taper_inverse(kx, ky, az, px.subspan(i), py.subspan(i), pz.subspan(i), valid.subspan(i));
}

void radial_residual(const ShapeParams& s, std::span<const double> px, std::span<const double> py,
                     std::span<const double> pz, std::span<const std::uint8_t> valid, double fallback,
                     std::span<double> out) {
    const std::size_t n = px.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) {
        const V res = radial_block(s, _mm256_loadu_pd(&px[i]), _mm256_loadu_pd(&py[i]), _mm256_loadu_pd(&pz[i]),
                                   valid_mask_from(&valid[i]), fallback);
        _mm256_storeu_pd(&out[i], res);
    }
    if (i < n) {
        // Pad the last partial block so every element goes through the same
        // vector approximation.
        alignas(32) std::array<double, kLanes> bx{}, by{}, bz{}, bo{};
        std::array<std::uint8_t, kLanes> bv{};
        const std::size_t rem = n - i;
        for (std::size_t l = 0; l < rem; ++l) {
            bx[l] = px[i + l];
            by[l] = py[i + l];
            bz[l] = pz[i + l];
            bv[l] = valid[i + l];
        }
        const V res = radial_block(s, _mm256_load_pd(bx.data()), _mm256_load_pd(by.data()), _mm256_load_pd(bz.data()),
                                   valid_mask_from(bv.data()), fallback);
        _mm256_store_pd(bo.data(), res);
        std::copy_n(bo.begin(), rem, out.begin() + static_cast<std::ptrdiff_t>(i));
    }
}

double min_sq_distance(double qx, double qy, double qz, std::span<const double> x, std::span<const double> y,
                       std::span<const double> z, double best) {
    const std::size_t n = x.size();
    std::size_t i = 0;
    if (n >= kLanes) {
        const V vx = set1(qx), vy = set1(qy), vz = set1(qz);
        V vbest = set1(best);
        for (; i + kLanes <= n; i += kLanes) {
            const V dx = _mm256_sub_pd(_mm256_loadu_pd(&x[i]), vx);
            const V dy = _mm256_sub_pd(_mm256_loadu_pd(&y[i]), vy);
            const V dz = _mm256_sub_pd(_mm256_loadu_pd(&z[i]), vz);
            const V d2 = _mm256_add_pd(_mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy)),
                                       _mm256_mul_pd(dz, dz));
            vbest = _mm256_min_pd(vbest, d2);
        }
        alignas(32) std::array<double, kLanes> lanes;
        _mm256_store_pd(lanes.data(), vbest);
        best = std::min({lanes[0], lanes[1], lanes[2], lanes[3]});
    }
    if (i < n) best = scalar_table().min_sq_distance(qx, qy, qz, x.subspan(i), y.subspan(i), z.subspan(i), best);
    return best;
}

template <V (*Fn)(V)>
void map_n(std::span<const double> in, std::span<double> out) {
    const std::size_t n = in.size();
    std::size_t i = 0;
    for (; i + kLanes <= n; i += kLanes) _mm256_storeu_pd(&out[i], Fn(_mm256_loadu_pd(&in[i])));
    if (i < n) {
        alignas(32) std::array<double, kLanes> buf{1.0, 1.0, 1.0, 1.0};
        std::copy(in.begin() + static_cast<std::ptrdiff_t>(i), in.end(), buf.begin());
        _mm256_store_pd(buf.data(), Fn(_mm256_load_pd(buf.data())));
        std::copy_n(buf.begin(), n - i, out.begin() + static_cast<std::ptrdiff_t>(i));
    }
}

}  // namespace

const KernelTable& avx2_table_unchecked() {
    static const KernelTable table{"avx2",          rigid_inverse, taper_inverse, radial_residual, min_sq_distance,
                                   map_n<exp_pd>, map_n<log_pd>};
    return table;
}

}  // namespace sqfit::kernels::detail
