#pragma once

#include <cstddef>
#include <string_view>
#include <vector>

namespace reachbot::kern {

// Dense double-precision primitives behind the policy/trainer inner loops.
// One scalar reference implementation plus SIMD variants selected at runtime.
//
// Elementwise kernels (axpy, scale, adam_step) perform the exact same
// per-element operation sequence in every variant and are bitwise-equal to
// the scalar reference. Reduction kernels (dot, sum_sq, matvec) use blocked
// accumulators in the SIMD lanes and agree with the reference up to
// floating-point reassociation; equivalence tests bound that error.
struct Ops {
    const char* name;

    double (*dot)(const double* a, const double* b, std::size_t n);
    double (*sum_sq)(const double* x, std::size_t n);

    // y += alpha * x
    void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
    // x *= alpha
    void (*scale)(double* x, double alpha, std::size_t n);
    // y = w * x + bias, w row-major [rows x cols]
    void (*matvec)(const double* w, const double* x, const double* bias, double* y,
                   std::size_t rows, std::size_t cols);
    // In-place Adam step on one parameter block. bc1/bc2 are the bias
    // corrections 1-beta1^t and 1-beta2^t.
    void (*adam_step)(double* p, const double* g, double* m, double* v, std::size_t n,
                      double lr, double beta1, double beta2, double eps,
                      double bc1, double bc2);
};

const Ops& scalar_ops();

// Variants compiled in and usable on this machine (scalar always present).
std::vector<const Ops*> available_ops();

// Variant by name, nullptr if absent or unsupported here.
const Ops* find_ops(std::string_view name);

// The variant every caller goes through. Picked once per process: the widest
// supported SIMD lane, unless the REACHBOT_KERNELS environment variable names
// a specific one.
const Ops& active_ops();

}  // namespace reachbot::kern
