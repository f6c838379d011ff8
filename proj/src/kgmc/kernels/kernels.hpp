#pragma once
// Data-parallel double-precision kernels used by the embedding trainer and
// the fusion/classifier math. A scalar reference implementation always
// exists; AVX2 (x86-64) and NEON (aarch64) variants are selected at runtime
// and equivalence-tested against the scalar one.
//
// Reduction kernels (dot, sum, l1_dist, l2sq_dist) may reassociate and so
// can differ from the scalar reference in the last ulps. Elementwise kernels
// (axpy, add, scale, mul_acc) perform one multiply and one add per lane in
// the same order as the reference and match it bit for bit.

#include <cstddef>
#include <string>
#include <vector>

namespace kgmc::kern {

struct Ops {
    const char* name;
    double (*dot)(const double* x, const double* y, std::size_t n);
    double (*sum)(const double* x, std::size_t n);
    double (*l1_dist)(const double* x, const double* y, std::size_t n);
    double (*l2sq_dist)(const double* x, const double* y, std::size_t n);
    void (*axpy)(double a, const double* x, double* y, std::size_t n);  // y += a*x
    void (*add)(const double* x, double* y, std::size_t n);             // y += x
    void (*scale)(double* x, double a, std::size_t n);                  // x *= a
    void (*mul_acc)(const double* x, const double* y, double* z, std::size_t n);  // z += x.*y
};

// Reference implementation (always available).
const Ops& scalar_ops();

// Active backend. Picked once: KGMC_KERNELS env var ("scalar", "avx2",
// "neon") if set and available, otherwise the widest ISA the CPU supports.
const Ops& ops();

// Force a backend by name ("auto" re-detects). Throws if unavailable.
void force_backend(const std::string& name);

// Every backend usable on this machine, scalar first. For equivalence tests.
std::vector<const Ops*> available_backends();

}  // namespace kgmc::kern
