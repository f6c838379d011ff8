#include "kgmc/synth.hpp"

#include "kgmc/util/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace kgmc {

using nlohmann::json;

namespace {

const char* kGenrePool[] = {"Action",   "Comedy", "Drama",   "Horror",  "Romance", "Thriller",
                            "SciFi",    "Crime",  "Fantasy", "Mystery", "Western", "War",
                            "Musical",  "Sport",  "History", "Family"};

std::string pad_number(std::size_t n, int width) {
    std::string s = std::to_string(n);
    while (static_cast<int>(s.size()) < width) s.insert(s.begin(), '0');
    return s;
}

std::vector<std::vector<double>> make_prototypes(std::size_t count, std::size_t dim, Rng& rng) {
    std::vector<std::vector<double>> protos(count, std::vector<double>(dim));
    for (auto& p : protos) {
        double norm2 = 0.0;
        for (double& v : p) {
            v = rng.gaussian();
            norm2 += v * v;
        }
        const double inv = 1.0 / std::sqrt(std::max(norm2, 1e-12));
        for (double& v : p) v *= inv;
    }
    return protos;
}

void validate(const SynthConfig& cfg) {
    if (cfg.n_movies < 10) throw std::runtime_error("synth: n_movies must be >= 10");
    if (cfg.n_genres < 2) throw std::runtime_error("synth: need at least 2 genres");
    if (cfg.n_directors < cfg.n_genres || cfg.n_casts < cfg.n_genres)
        throw std::runtime_error("synth: need at least one director and cast per genre");
    if (cfg.kg_signal < 0.0 || cfg.kg_signal > 1.0)
        throw std::runtime_error("synth: kg_signal must be in [0,1]");
    if (cfg.unseen_frac < 0.0 || cfg.unseen_frac > 1.0)
        throw std::runtime_error("synth: unseen_frac must be in [0,1]");
    const double fsum = cfg.train_frac + cfg.test_frac + cfg.valid_frac;
    if (std::fabs(fsum - 1.0) > 1e-9)
        throw std::runtime_error("synth: split fractions must sum to 1");
}

}  // namespace

SynthCorpus generate_corpus(const SynthConfig& cfg) {
    validate(cfg);
    Rng rng(cfg.seed);
    SynthCorpus corpus;

    for (std::size_t g = 0; g < cfg.n_genres; ++g) {
        if (g < sizeof(kGenrePool) / sizeof(kGenrePool[0]))
            corpus.genre_names.push_back(kGenrePool[g]);
        else
            corpus.genre_names.push_back("Genre" + pad_number(g, 2));
    }

    // latent affinities; round-robin primaries guarantee nonempty pools
    std::vector<std::vector<std::size_t>> dir_pool(cfg.n_genres), cast_pool(cfg.n_genres);
    std::vector<std::string> dir_names(cfg.n_directors), cast_names(cfg.n_casts);
    for (std::size_t d = 0; d < cfg.n_directors; ++d) {
        dir_names[d] = "Director " + pad_number(d, 3);
        dir_pool[d % cfg.n_genres].push_back(d);
        if (rng.uniform() < 0.5) dir_pool[rng.below(cfg.n_genres)].push_back(d);
    }
    for (std::size_t c = 0; c < cfg.n_casts; ++c) {
        cast_names[c] = "Cast " + pad_number(c, 4);
        cast_pool[c % cfg.n_genres].push_back(c);
        if (rng.uniform() < 0.5) cast_pool[rng.below(cfg.n_genres)].push_back(c);
    }

    const auto text_protos = make_prototypes(cfg.n_genres, cfg.d_text, rng);
    const auto image_protos = make_prototypes(cfg.n_genres, cfg.d_image, rng);

    // splits: rounded fractions, assignment by shuffled position
    std::vector<Split> split_of(cfg.n_movies, Split::valid);
    {
        const auto n_train = static_cast<std::size_t>(
            std::llround(cfg.train_frac * static_cast<double>(cfg.n_movies)));
        const auto n_test = static_cast<std::size_t>(
            std::llround(cfg.test_frac * static_cast<double>(cfg.n_movies)));
        std::vector<std::size_t> order(cfg.n_movies);
        for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
        rng.shuffle(order);
        for (std::size_t pos = 0; pos < order.size(); ++pos) {
            if (pos < n_train)
                split_of[order[pos]] = Split::train;
            else if (pos < n_train + n_test)
                split_of[order[pos]] = Split::test;
        }
    }

    corpus.text_features.dim = static_cast<std::uint32_t>(cfg.d_text);
    corpus.image_features.dim = static_cast<std::uint32_t>(cfg.d_image);

    std::size_t unseen_counter = 0;
    for (std::size_t m = 0; m < cfg.n_movies; ++m) {
        MetadataRecord rec;
        rec.movie_id = "m" + pad_number(m, 5);
        rec.title = "Movie " + pad_number(m, 5);
        rec.split = split_of[m];

        // 1-3 genres, mildly imbalanced via a skewed first pick
        const std::size_t n_genres_i = 1 + rng.below(3);
        std::vector<std::size_t> genres;
        while (genres.size() < n_genres_i) {
            std::size_t g;
            if (genres.empty()) {
                // P(g) proportional to (n_genres - g)
                const std::size_t total = cfg.n_genres * (cfg.n_genres + 1) / 2;
                std::size_t roll = rng.below(total);
                g = 0;
                std::size_t acc = cfg.n_genres;
                while (roll >= acc) {
                    ++g;
                    acc += cfg.n_genres - g;
                }
            } else {
                g = rng.below(cfg.n_genres);
            }
            if (std::find(genres.begin(), genres.end(), g) == genres.end()) genres.push_back(g);
        }
        for (std::size_t g : genres) rec.genres.push_back(corpus.genre_names[g]);

        auto pick_person = [&](const std::vector<std::vector<std::size_t>>& pools,
                               const std::vector<std::string>& names, std::size_t n_total) {
            if (rng.uniform() < cfg.kg_signal) {
                const auto& pool = pools[genres[rng.below(genres.size())]];
                return names[pool[rng.below(pool.size())]];
            }
            return names[rng.below(n_total)];
        };

        const std::size_t n_dirs = 1 + rng.below(2);
        const std::size_t n_cast = 2 + rng.below(3);
        std::unordered_set<std::string> used;
        for (std::size_t i = 0; i < n_dirs; ++i) {
            for (int attempt = 0; attempt < 8; ++attempt) {
                const std::string name = pick_person(dir_pool, dir_names, cfg.n_directors);
                if (used.insert(name).second) {
                    rec.directors.push_back(name);
                    break;
                }
            }
        }
        for (std::size_t i = 0; i < n_cast; ++i) {
            for (int attempt = 0; attempt < 8; ++attempt) {
                const std::string name = pick_person(cast_pool, cast_names, cfg.n_casts);
                if (used.insert(name).second) {
                    rec.casts.push_back(name);
                    break;
                }
            }
        }

        // a slice of test movies gets personnel no train movie can contain
        if (rec.split == Split::test && rng.uniform() < cfg.unseen_frac) {
            rec.directors.clear();
            rec.casts.clear();
            rec.directors.push_back("Unseen Director " + pad_number(unseen_counter, 4));
            rec.casts.push_back("Unseen Cast " + pad_number(unseen_counter, 4));
            ++unseen_counter;
        }

        std::vector<double> text(cfg.d_text, 0.0), image(cfg.d_image, 0.0);
        for (std::size_t g : genres) {
            for (std::size_t d = 0; d < cfg.d_text; ++d) text[d] += text_protos[g][d];
            for (std::size_t d = 0; d < cfg.d_image; ++d) image[d] += image_protos[g][d];
        }
        for (double& v : text) v += cfg.feat_noise * rng.gaussian();
        for (double& v : image) v += cfg.feat_noise * rng.gaussian();

        corpus.text_features.ids.push_back(rec.movie_id);
        corpus.text_features.rows.push_back(std::move(text));
        corpus.image_features.ids.push_back(rec.movie_id);
        corpus.image_features.rows.push_back(std::move(image));
        corpus.records.push_back(std::move(rec));
    }

    // realized fraction of test movies whose personnel never appear in train
    std::unordered_set<std::string> train_people;
    for (const MetadataRecord& rec : corpus.records) {
        if (rec.split != Split::train) continue;
        for (const auto& d : rec.directors) train_people.insert("d:" + d);
        for (const auto& c : rec.casts) train_people.insert("c:" + c);
    }
    std::size_t n_test = 0, n_empty = 0;
    for (const MetadataRecord& rec : corpus.records) {
        if (rec.split != Split::test) continue;
        ++n_test;
        bool any = false;
        for (const auto& d : rec.directors)
            if (train_people.count("d:" + d)) any = true;
        for (const auto& c : rec.casts)
            if (train_people.count("c:" + c)) any = true;
        if (!any) ++n_empty;
    }
    corpus.realized_unseen_fraction =
        n_test ? static_cast<double>(n_empty) / static_cast<double>(n_test) : 0.0;
    return corpus;
}

SynthPaths write_corpus(const SynthCorpus& corpus, const SynthConfig& cfg,
                        const std::filesystem::path& dir) {
    std::filesystem::create_directories(dir);
    SynthPaths paths{dir / "metadata.jsonl", dir / "text.feat", dir / "image.feat",
                     dir / "manifest.json"};

    std::string meta;
    for (const MetadataRecord& rec : corpus.records) {
        meta += encode_metadata_line(rec);
        meta += '\n';
    }
    io::atomic_write(paths.metadata, meta);
    io::write_features(paths.text_features, corpus.text_features);
    io::write_features(paths.image_features, corpus.image_features);

    json manifest;
    manifest["config"] = {{"n_movies", cfg.n_movies},
                          {"n_genres", cfg.n_genres},
                          {"n_directors", cfg.n_directors},
                          {"n_casts", cfg.n_casts},
                          {"d_text", cfg.d_text},
                          {"d_image", cfg.d_image},
                          {"kg_signal", cfg.kg_signal},
                          {"feat_noise", cfg.feat_noise},
                          {"train_frac", cfg.train_frac},
                          {"test_frac", cfg.test_frac},
                          {"valid_frac", cfg.valid_frac},
                          {"unseen_frac", cfg.unseen_frac},
                          {"seed", cfg.seed}};
    manifest["genres"] = corpus.genre_names;
    manifest["realized_unseen_fraction"] = corpus.realized_unseen_fraction;
    manifest["files"] = {{"metadata.jsonl", io::file_hash(paths.metadata)},
                         {"text.feat", io::file_hash(paths.text_features)},
                         {"image.feat", io::file_hash(paths.image_features)}};
    io::atomic_write(paths.manifest, manifest.dump(2) + "\n");
    return paths;
}

}  // namespace kgmc
