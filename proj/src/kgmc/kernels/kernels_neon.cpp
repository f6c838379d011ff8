// NEON kernels (2 doubles per lane). Built only on aarch64, where NEON is
// baseline, so there is no runtime feature probe beyond the architecture.

#include "kgmc/kernels/kernels.hpp"

#if defined(KGMC_KERNELS_NEON)

#include <arm_neon.h>

#include <cmath>

namespace kgmc::kern {
namespace {

double dot_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    float64x2_t acc1 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
        acc1 = vaddq_f64(acc1, vmulq_f64(vld1q_f64(x + i + 2), vld1q_f64(y + i + 2)));
    }
    for (; i + 2 <= n; i += 2) {
        acc0 = vaddq_f64(acc0, vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    }
    double acc = vaddvq_f64(acc0) + vaddvq_f64(acc1);
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

double sum_neon(const double* x, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) acc0 = vaddq_f64(acc0, vld1q_f64(x + i));
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += x[i];
    return acc;
}

double l1_dist_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        acc0 = vaddq_f64(acc0, vabdq_f64(vld1q_f64(x + i), vld1q_f64(y + i)));
    }
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) acc += std::fabs(x[i] - y[i]);
    return acc;
}

double l2sq_dist_neon(const double* x, const double* y, std::size_t n) {
    float64x2_t acc0 = vdupq_n_f64(0.0);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t d = vsubq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        acc0 = vaddq_f64(acc0, vmulq_f64(d, d));
    }
    double acc = vaddvq_f64(acc0);
    for (; i < n; ++i) {
        const double d = x[i] - y[i];
        acc += d * d;
    }
    return acc;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(va, vld1q_f64(x + i));
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), prod));
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

void add_neon(const double* x, double* y, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vld1q_f64(x + i)));
    }
    for (; i < n; ++i) y[i] += x[i];
}

void scale_neon(double* x, double a, std::size_t n) {
    const float64x2_t va = vdupq_n_f64(a);
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) vst1q_f64(x + i, vmulq_f64(vld1q_f64(x + i), va));
    for (; i < n; ++i) x[i] *= a;
}

void mul_acc_neon(const double* x, const double* y, double* z, std::size_t n) {
    std::size_t i = 0;
    for (; i + 2 <= n; i += 2) {
        float64x2_t prod = vmulq_f64(vld1q_f64(x + i), vld1q_f64(y + i));
        vst1q_f64(z + i, vaddq_f64(vld1q_f64(z + i), prod));
    }
    for (; i < n; ++i) z[i] += x[i] * y[i];
}

}  // namespace

const Ops* neon_ops() {
    static const Ops ops = {
        "neon",    dot_neon,  sum_neon,   l1_dist_neon, l2sq_dist_neon,
        axpy_neon, add_neon, scale_neon, mul_acc_neon,
    };
    return &ops;
}

}  // namespace kgmc::kern

#else

namespace kgmc::kern {
const Ops* neon_ops() { return nullptr; }
}  // namespace kgmc::kern

#endif
