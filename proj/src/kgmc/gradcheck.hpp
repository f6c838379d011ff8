#pragma once
// Central-difference gradient verification. The checker is the oracle every
// hand-derived adjoint in the repo is held to.

#include <cmath>
#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace kgmc {

struct GradCheckReport {
    double max_rel_err = 0.0;
    std::size_t worst_coord = 0;
};

// f: scalar function of a flat parameter vector. analytic: its claimed
// gradient at `point`. Returns the max over coordinates of
// |analytic - central_diff| / max(1e-12, |analytic| + |central_diff|).
inline GradCheckReport grad_check(const std::function<double(const std::vector<double>&)>& f,
                                  const std::vector<double>& analytic,
                                  const std::vector<double>& point, double step) {
    if (step <= 0.0) throw std::runtime_error("grad_check: step must be > 0");
    if (analytic.size() != point.size())
        throw std::runtime_error("grad_check: gradient/point size mismatch");
    GradCheckReport rep;
    std::vector<double> p = point;
    for (std::size_t i = 0; i < p.size(); ++i) {
        const double orig = p[i];
        p[i] = orig + step;
        const double fp = f(p);
        p[i] = orig - step;
        const double fm = f(p);
        p[i] = orig;
        if (!std::isfinite(fp) || !std::isfinite(fm))
            throw std::runtime_error("grad_check: non-finite function value at coordinate " +
                                     std::to_string(i));
        const double fd = (fp - fm) / (2.0 * step);
        const double denom = std::max(1e-12, std::fabs(analytic[i]) + std::fabs(fd));
        const double rel = std::fabs(analytic[i] - fd) / denom;
        if (rel > rep.max_rel_err) {
            rep.max_rel_err = rel;
            rep.worst_coord = i;
        }
    }
    return rep;
}

}  // namespace kgmc
