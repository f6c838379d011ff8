#include "kgmc/kgfeature.hpp"

#include "kgmc/kernels/kernels.hpp"

#include <stdexcept>

namespace kgmc {

EntityMatch collect_entities(const MetadataRecord& rec, const DomainKg& kg) {
    EntityMatch m;
    for (const auto& d : rec.directors)
        if (auto idx = kg.find(EntityKind::director, d)) {
            m.indices.push_back(*idx);
            ++m.n_directors;
            m.degree_sum += kg.degree(*idx);
        }
    for (const auto& c : rec.casts)
        if (auto idx = kg.find(EntityKind::cast, c)) {
            m.indices.push_back(*idx);
            ++m.n_casts;
            m.degree_sum += kg.degree(*idx);
        }
    return m;
}

KgFeature form_kg_feature(const EntityMatch& match, const Tensor& mat_e) {
    const std::size_t dim = mat_e.cols();
    KgFeature f;
    f.values.assign(dim, 0.0);
    if (match.indices.empty()) return f;
    f.present = true;
    for (std::uint32_t idx : match.indices) {
        if (idx >= mat_e.rows()) throw std::runtime_error("form_kg_feature: entity index out of range");
        kern::ops().add(mat_e.row(idx), f.values.data(), dim);
    }
    return f;
}

double pseudo_label(const EntityMatch& match, const CorpusStats& stats) {
    const double n = static_cast<double>(match.n_directors + match.n_casts);
    const double s = static_cast<double>(match.degree_sum);
    const double f_n = stats.mean_dc > 0.0 ? n / (n + stats.mean_dc) : (n > 0.0 ? 1.0 : 0.0);
    const double f_s =
        stats.mean_degree_sum > 0.0 ? s / (s + stats.mean_degree_sum) : (s > 0.0 ? 1.0 : 0.0);
    return f_n * f_s;
}

}  // namespace kgmc
