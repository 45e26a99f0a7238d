#pragma once

#include "reachbot/kernels.hpp"

namespace reachbot::kern {

#if defined(REACHBOT_HAVE_AVX2)
const Ops& avx2_ops();
bool cpu_has_avx2();
#endif
#if defined(REACHBOT_HAVE_NEON)
const Ops& neon_ops();
#endif

}  // namespace reachbot::kern
