#include "kgmc/gcacl.hpp"

#include <algorithm>
#include <stdexcept>

namespace kgmc {

const char* genre_init_name(GenreInit g) { return g == GenreInit::kg ? "kg" : "random"; }

GenreInit genre_init_from_string(const std::string& s) {
    if (s == "kg") return GenreInit::kg;
    if (s == "random") return GenreInit::random;
    throw std::runtime_error("unknown genre init: '" + s + "' (kg|random)");
}

std::vector<double> genre_centroid(const GenreSet& genres, const Tensor& rows) {
    if (genres.empty()) throw std::runtime_error("genre_centroid: empty genre set");
    const std::size_t dim = rows.cols();
    std::vector<double> c(dim, 0.0);
    for (std::size_t g : genres) {
        if (g >= rows.rows()) throw std::runtime_error("genre_centroid: genre index out of range");
        const double* row = rows.row(g);
        for (std::size_t d = 0; d < dim; ++d) c[d] += row[d];
    }
    const double inv = 1.0 / static_cast<double>(genres.size());
    for (double& v : c) v *= inv;
    return c;
}

BatchNegatives batch_negatives(const std::vector<GenreSet>& genre_sets) {
    BatchNegatives out;
    for (const GenreSet& gs : genre_sets)
        out.batch_union.insert(out.batch_union.end(), gs.begin(), gs.end());
    std::sort(out.batch_union.begin(), out.batch_union.end());
    out.batch_union.erase(std::unique(out.batch_union.begin(), out.batch_union.end()),
                          out.batch_union.end());

    out.negatives.reserve(genre_sets.size());
    out.union_positions.reserve(genre_sets.size());
    for (const GenreSet& gs : genre_sets) {
        GenreSet own = gs;
        std::sort(own.begin(), own.end());
        GenreSet neg;
        std::vector<int> pos;
        for (std::size_t u = 0; u < out.batch_union.size(); ++u) {
            if (!std::binary_search(own.begin(), own.end(), out.batch_union[u])) {
                neg.push_back(out.batch_union[u]);
                pos.push_back(static_cast<int>(u));
            }
        }
        out.negatives.push_back(std::move(neg));
        out.union_positions.push_back(std::move(pos));
    }
    return out;
}

Var gcacl_loss(Tape& tape, BoundParams& params, Var fused,
               const std::vector<GenreSet>& genre_sets, const GenreSpace& space) {
    const Tensor& fval = tape.value(fused);
    if (fval.shape.size() != 2 || fval.shape[0] != genre_sets.size())
        throw std::runtime_error("gcacl_loss: fused batch / genre set mismatch");
    if (space.tau <= 0.0) throw std::runtime_error("gcacl_loss: tau must be > 0");
    const std::size_t batch = genre_sets.size();
    const std::size_t dk = space.rows.cols();

    Tensor centroids({batch, dk});
    for (std::size_t i = 0; i < batch; ++i) {
        const std::vector<double> c = genre_centroid(genre_sets[i], space.rows);
        std::copy(c.begin(), c.end(), centroids.row(i));
    }
    const BatchNegatives negs = batch_negatives(genre_sets);
    Tensor union_rows({negs.batch_union.size(), dk});
    for (std::size_t u = 0; u < negs.batch_union.size(); ++u) {
        const double* row = space.rows.row(negs.batch_union[u]);
        std::copy(row, row + dk, union_rows.row(u));
    }

    const Var w = params.bind("gcacl.w");
    const Var b = params.bind("gcacl.b");
    const Var mapped_centroids = tape.affine(tape.input(std::move(centroids)), w, b);
    const Var mapped_union = tape.affine(tape.input(std::move(union_rows)), w, b);
    const Var pos = tape.rowwise_dot(fused, mapped_centroids);
    const Var neg_scores = tape.matmul_nt(fused, mapped_union);
    return tape.contrastive_loss(pos, neg_scores, negs.union_positions, space.tau);
}

}  // namespace kgmc
