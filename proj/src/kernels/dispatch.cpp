#include "variants.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>

namespace reachbot::kern {

std::vector<const Ops*> available_ops() {
    std::vector<const Ops*> out{&scalar_ops()};
#if defined(REACHBOT_HAVE_AVX2)
    if (cpu_has_avx2()) out.push_back(&avx2_ops());
#endif
#if defined(REACHBOT_HAVE_NEON)
    out.push_back(&neon_ops());
#endif
    return out;
}

const Ops* find_ops(std::string_view name) {
    for (const Ops* ops : available_ops()) {
        if (name == ops->name) return ops;
    }
    return nullptr;
}

namespace {

const Ops& select() {
    if (const char* forced = std::getenv("REACHBOT_KERNELS")) {
        if (const Ops* ops = find_ops(forced)) return *ops;
        std::fprintf(stderr,
                     "reachbot: REACHBOT_KERNELS=%s not available, using scalar kernels\n",
                     forced);
        return scalar_ops();
    }
    // Last entry is the widest lane compiled in and supported here.
    return *available_ops().back();
}

}  // namespace

const Ops& active_ops() {
    static const Ops& ops = select();
    return ops;
}

}  // namespace reachbot::kern
