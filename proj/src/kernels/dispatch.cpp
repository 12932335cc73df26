#include "kernels/variants.hpp"

#include <cstdlib>
#include <string_view>

namespace sqfit::kernels {

const KernelTable* avx2_table() {
#if defined(SQFIT_HAVE_AVX2_TU)
    static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
    if (supported) return &detail::avx2_table_unchecked();
#endif
    return nullptr;
}

std::vector<const KernelTable*> available_tables() {
    std::vector<const KernelTable*> out{&scalar_table()};
    if (const auto* t = avx2_table()) out.push_back(t);
    return out;
}

const KernelTable& active() {
    static const KernelTable& table = [&]() -> const KernelTable& {
        const char* env = std::getenv("SQFIT_SIMD");
        const std::string_view request = env ? env : "";
        if (request == "scalar") return scalar_table();
        if (const auto* t = avx2_table()) return *t;
        return scalar_table();
    }();
    return table;
}

}  // namespace sqfit::kernels
