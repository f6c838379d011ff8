// Runtime backend selection for the kernel layer.

#include "kgmc/kernels/kernels.hpp"

#include <cstdlib>
#include <stdexcept>

namespace kgmc::kern {

const Ops* avx2_ops();  // defined in kernels_avx2.cpp (null when not built)
const Ops* neon_ops();  // defined in kernels_neon.cpp (null when not built)

namespace {

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    return __builtin_cpu_supports("avx2");
#else
    return false;
#endif
}

const Ops* find_backend(const std::string& name) {
    if (name == "scalar") return &scalar_ops();
    if (name == "avx2" && avx2_ops() != nullptr && cpu_has_avx2()) return avx2_ops();
    if (name == "neon" && neon_ops() != nullptr) return neon_ops();
    return nullptr;
}

const Ops* detect() {
    if (const char* env = std::getenv("KGMC_KERNELS")) {
        if (const Ops* o = find_backend(env)) return o;
    }
    if (avx2_ops() != nullptr && cpu_has_avx2()) return avx2_ops();
    if (neon_ops() != nullptr) return neon_ops();
    return &scalar_ops();
}

const Ops*& active() {
    static const Ops* current = detect();
    return current;
}

}  // namespace

const Ops& ops() { return *active(); }

void force_backend(const std::string& name) {
    if (name == "auto") {
        active() = detect();
        return;
    }
    const Ops* o = find_backend(name);
    if (o == nullptr) throw std::runtime_error("kernel backend unavailable: " + name);
    active() = o;
}

std::vector<const Ops*> available_backends() {
    std::vector<const Ops*> out{&scalar_ops()};
    if (avx2_ops() != nullptr && cpu_has_avx2()) out.push_back(avx2_ops());
    if (neon_ops() != nullptr) out.push_back(neon_ops());
    return out;
}

}  // namespace kgmc::kern
