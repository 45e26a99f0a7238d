// NEON lane, 2 doubles per register (aarch64 baseline). Mirrors the AVX2
// lane's structure; elementwise kernels avoid FMA to stay bitwise-equal to
// the scalar reference.

#include "variants.hpp"

#include <arm_neon.h>

#include <cmath>

namespace reachbot::kern {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t va = vld1q_f64(a + i);
        float64x2_t vb = vld1q_f64(b + i);
        acc = vaddq_f64(acc, vmulq_f64(va, vb));
    }
    double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) sum += a[i] * b[i];
    return sum;
}

double sum_sq_neon(const double* x, std::size_t n) {
    float64x2_t acc = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t v = vld1q_f64(x + i);
        acc = vaddq_f64(acc, vmulq_f64(v, v));
    }
    double sum = vgetq_lane_f64(acc, 0) + vgetq_lane_f64(acc, 1);
    for (; i < n; ++i) sum += x[i] * x[i];
    return sum;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vx = vld1q_f64(x + i);
        float64x2_t vy = vld1q_f64(y + i);
        vst1q_f64(y + i, vaddq_f64(vy, vmulq_f64(va, vx)));
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void scale_neon(double* x, double alpha, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(alpha);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    }
    for (; i < n; ++i) x[i] *= alpha;
}

void matvec_neon(const double* w, const double* x, const double* bias, double* y,
                 std::size_t rows, std::size_t cols) {
    for (std::size_t r = 0; r < rows; ++r) {
        y[r] = dot_neon(w + r * cols, x, cols) + bias[r];
    }
}

void adam_step_neon(double* p, const double* g, double* m, double* v, std::size_t n,
                    double lr, double beta1, double beta2, double eps,
                    double bc1, double bc2) {
    const float64x2_t vb1 = vdupq_n_f64(beta1);
    const float64x2_t vb2 = vdupq_n_f64(beta2);
    const float64x2_t vc1 = vdupq_n_f64(1.0 - beta1);
    const float64x2_t vc2 = vdupq_n_f64(1.0 - beta2);
    const float64x2_t vbc1 = vdupq_n_f64(bc1);
    const float64x2_t vbc2 = vdupq_n_f64(bc2);
    const float64x2_t veps = vdupq_n_f64(eps);
    const float64x2_t vlr = vdupq_n_f64(lr);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t vg = vld1q_f64(g + i);
        float64x2_t vm = vaddq_f64(vmulq_f64(vb1, vld1q_f64(m + i)), vmulq_f64(vc1, vg));
        float64x2_t vv = vaddq_f64(vmulq_f64(vb2, vld1q_f64(v + i)),
                                   vmulq_f64(vc2, vmulq_f64(vg, vg)));
        vst1q_f64(m + i, vm);
        vst1q_f64(v + i, vv);
        float64x2_t mhat = vdivq_f64(vm, vbc1);
        float64x2_t vhat = vdivq_f64(vv, vbc2);
        float64x2_t denom = vaddq_f64(vsqrtq_f64(vhat), veps);
        float64x2_t vp = vld1q_f64(p + i);
        vst1q_f64(p + i, vsubq_f64(vp, vmulq_f64(vlr, vdivq_f64(mhat, denom))));
    }
    const double c1 = 1.0 - beta1;
    const double c2 = 1.0 - beta2;
    for (; i < n; ++i) {
        m[i] = beta1 * m[i] + c1 * g[i];
        v[i] = beta2 * v[i] + c2 * (g[i] * g[i]);
        const double mhat = m[i] / bc1;
        const double vhat = v[i] / bc2;
        p[i] -= lr * (mhat / (std::sqrt(vhat) + eps));
    }
}

}  // namespace

const Ops& neon_ops() {
    static const Ops ops{
        "neon",     dot_neon,   sum_sq_neon,
        axpy_neon,  scale_neon, matvec_neon,
        adam_step_neon,
    };
    return ops;
}

}  // namespace reachbot::kern
