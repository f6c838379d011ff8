#include "kgmc/metrics.hpp"

#include <json.hpp>

#include <stdexcept>
#include <vector>

namespace kgmc {

MetricsReport f1_report(const std::vector<LabelSet>& predicted,
                        const std::vector<LabelSet>& truth, std::size_t n_genres) {
    if (predicted.size() != truth.size())
        throw std::runtime_error("f1_report: prediction/truth length mismatch");
    if (predicted.empty()) throw std::runtime_error("f1_report: empty sample list");

    MetricsReport rep;
    rep.per_genre.assign(n_genres, GenreScore{});

    double samples_sum = 0.0;
    std::vector<char> pred_mask(n_genres), true_mask(n_genres);
    for (std::size_t i = 0; i < predicted.size(); ++i) {
        std::fill(pred_mask.begin(), pred_mask.end(), 0);
        std::fill(true_mask.begin(), true_mask.end(), 0);
        for (std::size_t g : predicted[i]) {
            if (g >= n_genres) throw std::runtime_error("f1_report: predicted genre index out of range");
            pred_mask[g] = 1;
        }
        for (std::size_t g : truth[i]) {
            if (g >= n_genres) throw std::runtime_error("f1_report: true genre index out of range");
            true_mask[g] = 1;
        }
        std::size_t inter = 0, np = 0, nt = 0;
        for (std::size_t g = 0; g < n_genres; ++g) {
            GenreScore& gs = rep.per_genre[g];
            if (pred_mask[g] && true_mask[g]) ++gs.tp;
            if (pred_mask[g] && !true_mask[g]) ++gs.fp;
            if (!pred_mask[g] && true_mask[g]) ++gs.fn;
            if (true_mask[g]) ++gs.support;
            inter += static_cast<std::size_t>(pred_mask[g] && true_mask[g]);
            np += pred_mask[g];
            nt += true_mask[g];
        }
        if (np + nt == 0)
            samples_sum += 1.0;  // both empty: perfect by convention
        else
            samples_sum += 2.0 * static_cast<double>(inter) / static_cast<double>(np + nt);
    }
    rep.samples_f1 = samples_sum / static_cast<double>(predicted.size());

    std::size_t tp = 0, fp = 0, fn = 0;
    double macro_sum = 0.0, weighted_sum = 0.0;
    std::size_t total_support = 0;
    for (GenreScore& gs : rep.per_genre) {
        tp += gs.tp;
        fp += gs.fp;
        fn += gs.fn;
        gs.precision = (gs.tp + gs.fp) ? static_cast<double>(gs.tp) / static_cast<double>(gs.tp + gs.fp) : 0.0;
        gs.recall = (gs.tp + gs.fn) ? static_cast<double>(gs.tp) / static_cast<double>(gs.tp + gs.fn) : 0.0;
        gs.f1 = (gs.precision + gs.recall) > 0.0
                    ? 2.0 * gs.precision * gs.recall / (gs.precision + gs.recall)
                    : 0.0;
        macro_sum += gs.f1;
        weighted_sum += gs.f1 * static_cast<double>(gs.support);
        total_support += gs.support;
    }
    rep.micro_f1 = (2 * tp + fp + fn)
                       ? 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn)
                       : 0.0;
    rep.macro_f1 = n_genres ? macro_sum / static_cast<double>(n_genres) : 0.0;
    rep.weighted_f1 = total_support ? weighted_sum / static_cast<double>(total_support) : 0.0;
    return rep;
}

std::string MetricsReport::to_json() const {
    nlohmann::json j;
    j["micro"] = micro_f1;
    j["macro"] = macro_f1;
    j["weighted"] = weighted_f1;
    j["samples"] = samples_f1;
    nlohmann::json per = nlohmann::json::array();
    for (std::size_t g = 0; g < per_genre.size(); ++g) {
        nlohmann::json row;
        row["genre"] = g;
        row["precision"] = per_genre[g].precision;
        row["recall"] = per_genre[g].recall;
        row["f1"] = per_genre[g].f1;
        row["support"] = per_genre[g].support;
        per.push_back(row);
    }
    j["per_genre"] = per;
    return j.dump();
}

}  // namespace kgmc
