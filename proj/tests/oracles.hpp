#pragma once
// Independent straight-from-the-formula reference implementations used as
// test oracles. These deliberately avoid the library's numeric shortcuts
// (kernels, log-sum-exp) so they stay an independent check of the same math.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <vector>

namespace oracle {

inline double pseudo_label(double n, double s, double mean_dc, double mean_v) {
    return (n * s) / ((n + mean_dc) * (s + mean_v));
}

// gates: B x D row-major; targets: B
inline double teacher_loss(const std::vector<std::vector<double>>& gates,
                           const std::vector<double>& targets) {
    double loss = 0.0;
    for (std::size_t i = 0; i < gates.size(); ++i) {
        double a = 0.0;
        for (double v : gates[i]) a += v;
        a /= static_cast<double>(gates[i].size());
        const double gap = std::min(std::fabs(a - targets[i]), 1.0 - 1e-6);
        loss += -std::log(1.0 - gap);
    }
    return loss;
}

inline double bce(const std::vector<std::vector<double>>& probs,
                  const std::vector<std::vector<double>>& labels) {
    double loss = 0.0;
    for (std::size_t i = 0; i < probs.size(); ++i)
        for (std::size_t j = 0; j < probs[i].size(); ++j) {
            const double p = std::clamp(probs[i][j], 1e-7, 1.0 - 1e-7);
            loss -= labels[i][j] * std::log(p) + (1.0 - labels[i][j]) * std::log(1.0 - p);
        }
    return loss;
}

// Full contrastive objective: centroids and genre rows mapped by the shared
// affine, raw-dot similarities, naive exponentials (callers keep the scores
// in a range where that is finite).
struct GcaclInputs {
    std::vector<std::vector<double>> fused;       // B x Dp
    std::vector<std::vector<std::size_t>> genre_sets;
    std::vector<std::vector<double>> genre_rows;  // M x Dk
    std::vector<std::vector<double>> affine_w;    // Dk x Dp
    std::vector<double> affine_b;                 // Dp
    double tau = 0.1;
};

inline std::vector<double> affine_map(const GcaclInputs& in, const std::vector<double>& x) {
    const std::size_t dp = in.affine_b.size();
    std::vector<double> out = in.affine_b;
    for (std::size_t k = 0; k < x.size(); ++k)
        for (std::size_t d = 0; d < dp; ++d) out[d] += x[k] * in.affine_w[k][d];
    return out;
}

inline double gcacl_loss(const GcaclInputs& in) {
    double loss = 0.0;
    // batch union of genres
    std::set<std::size_t> uni;
    for (const auto& gs : in.genre_sets) uni.insert(gs.begin(), gs.end());
    for (std::size_t i = 0; i < in.fused.size(); ++i) {
        const auto& gs = in.genre_sets[i];
        std::vector<double> centroid(in.genre_rows[0].size(), 0.0);
        for (std::size_t g : gs)
            for (std::size_t d = 0; d < centroid.size(); ++d) centroid[d] += in.genre_rows[g][d];
        for (double& v : centroid) v /= static_cast<double>(gs.size());
        const std::vector<double> fc = affine_map(in, centroid);
        double s_pos = 0.0;
        for (std::size_t d = 0; d < fc.size(); ++d) s_pos += in.fused[i][d] * fc[d];
        double q = 0.0;
        for (std::size_t g : uni) {
            if (std::find(gs.begin(), gs.end(), g) != gs.end()) continue;
            const std::vector<double> fe = affine_map(in, in.genre_rows[g]);
            double s = 0.0;
            for (std::size_t d = 0; d < fe.size(); ++d) s += in.fused[i][d] * fe[d];
            q += std::exp(s / in.tau);
        }
        loss += -std::log(std::exp(s_pos / in.tau) / (std::exp(s_pos / in.tau) + q));
    }
    return loss;
}

struct F1Ref {
    double micro = 0.0, macro = 0.0, weighted = 0.0, samples = 0.0;
};

inline F1Ref f1_report(const std::vector<std::vector<std::size_t>>& pred,
                       const std::vector<std::vector<std::size_t>>& truth, std::size_t m) {
    F1Ref out;
    std::size_t tp_all = 0, fp_all = 0, fn_all = 0;
    double macro_sum = 0.0, weighted_sum = 0.0;
    std::size_t support_sum = 0;
    for (std::size_t g = 0; g < m; ++g) {
        std::size_t tp = 0, fp = 0, fn = 0, support = 0;
        for (std::size_t i = 0; i < pred.size(); ++i) {
            const bool p = std::find(pred[i].begin(), pred[i].end(), g) != pred[i].end();
            const bool t = std::find(truth[i].begin(), truth[i].end(), g) != truth[i].end();
            if (p && t) ++tp;
            if (p && !t) ++fp;
            if (!p && t) ++fn;
            if (t) ++support;
        }
        tp_all += tp;
        fp_all += fp;
        fn_all += fn;
        const double prec = (tp + fp) ? double(tp) / double(tp + fp) : 0.0;
        const double rec = (tp + fn) ? double(tp) / double(tp + fn) : 0.0;
        const double f1 = (prec + rec) > 0 ? 2 * prec * rec / (prec + rec) : 0.0;
        macro_sum += f1;
        weighted_sum += f1 * static_cast<double>(support);
        support_sum += support;
    }
    out.micro = (2 * tp_all + fp_all + fn_all)
                    ? 2.0 * double(tp_all) / double(2 * tp_all + fp_all + fn_all)
                    : 0.0;
    out.macro = m ? macro_sum / static_cast<double>(m) : 0.0;
    out.weighted = support_sum ? weighted_sum / static_cast<double>(support_sum) : 0.0;
    double samples_sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        std::size_t inter = 0;
        for (std::size_t g : pred[i])
            if (std::find(truth[i].begin(), truth[i].end(), g) != truth[i].end()) ++inter;
        const std::size_t denom = pred[i].size() + truth[i].size();
        samples_sum += denom == 0 ? 1.0 : 2.0 * double(inter) / double(denom);
    }
    out.samples = samples_sum / static_cast<double>(pred.size());
    return out;
}

}  // namespace oracle
