#pragma once

#include "sqfit/kernels.hpp"

namespace sqfit::kernels::detail {

#if defined(SQFIT_HAVE_AVX2_TU)
/// Defined in avx2.cpp, which is the only file built with -mavx2.
const KernelTable& avx2_table_unchecked();
#endif

}  // namespace sqfit::kernels::detail
