#include "rsteal/kern/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace rsteal::kern {
namespace {

const Kernels* g_active = nullptr;

const Kernels* pick_auto() {
#if defined(__x86_64__) || defined(_M_X64)
    if (avx2_supported()) return &detail::avx2_table;
#endif
    return &detail::scalar_table;
}

const Kernels* initial_table() {
    if (const char* env = std::getenv("RSTEAL_KERNELS")) {
        if (std::strcmp(env, "scalar") == 0) return &detail::scalar_table;
#if defined(__x86_64__) || defined(_M_X64)
        if (std::strcmp(env, "avx2") == 0 && avx2_supported()) return &detail::avx2_table;
#endif
    }
    return pick_auto();
}

} // namespace

bool avx2_supported() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const Kernels& K() {
    if (!g_active) g_active = initial_table();
    return *g_active;
}

bool set_backend(Backend b) {
    switch (b) {
        case Backend::kAuto:
            g_active = pick_auto();
            return true;
        case Backend::kScalar:
            g_active = &detail::scalar_table;
            return true;
        case Backend::kAvx2:
#if defined(__x86_64__) || defined(_M_X64)
            if (avx2_supported()) {
                g_active = &detail::avx2_table;
                return true;
            }
#endif
            return false;
    }
    return false;
}

const char* active_backend() { return K().name; }

} // namespace rsteal::kern
