#include "kgmc/kg.hpp"

#include "kgmc/util/io.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kgmc {

using nlohmann::json;

const char* entity_kind_name(EntityKind k) {
    switch (k) {
        case EntityKind::director: return "director";
        case EntityKind::title: return "title";
        case EntityKind::cast: return "cast";
        case EntityKind::genre: return "genre";
    }
    return "?";
}

EntityKind entity_kind_from_string(const std::string& s) {
    if (s == "director") return EntityKind::director;
    if (s == "title") return EntityKind::title;
    if (s == "cast") return EntityKind::cast;
    if (s == "genre") return EntityKind::genre;
    throw std::runtime_error("unknown entity kind: '" + s + "'");
}

const char* relation_kind_name(RelationKind r) {
    switch (r) {
        case RelationKind::director_title: return "d-t";
        case RelationKind::cast_title: return "c-t";
        case RelationKind::genre_title: return "g-t";
        case RelationKind::director_cast: return "d-c";
        case RelationKind::director_genre: return "d-g";
        case RelationKind::cast_genre: return "c-g";
    }
    return "?";
}

EntityKind relation_head_kind(RelationKind r) {
    switch (r) {
        case RelationKind::director_title: return EntityKind::director;
        case RelationKind::cast_title: return EntityKind::cast;
        case RelationKind::genre_title: return EntityKind::genre;
        case RelationKind::director_cast: return EntityKind::director;
        case RelationKind::director_genre: return EntityKind::director;
        case RelationKind::cast_genre: return EntityKind::cast;
    }
    throw std::runtime_error("bad relation kind");
}

EntityKind relation_tail_kind(RelationKind r) {
    switch (r) {
        case RelationKind::director_title: return EntityKind::title;
        case RelationKind::cast_title: return EntityKind::title;
        case RelationKind::genre_title: return EntityKind::title;
        case RelationKind::director_cast: return EntityKind::cast;
        case RelationKind::director_genre: return EntityKind::genre;
        case RelationKind::cast_genre: return EntityKind::genre;
    }
    throw std::runtime_error("bad relation kind");
}

namespace {
std::string entity_key(EntityKind kind, const std::string& surface) {
    std::string key;
    key.reserve(surface.size() + 2);
    key.push_back(static_cast<char>('0' + static_cast<int>(kind)));
    key.push_back('\x1f');
    key += surface;
    return key;
}

std::uint64_t triple_key(std::uint32_t head, RelationKind rel, std::uint32_t tail) {
    // head/tail are < 2^32 but we also fold the relation in; collisions are
    // resolved by the bucket's exact comparison.
    return (static_cast<std::uint64_t>(head) << 32) ^ (static_cast<std::uint64_t>(tail) << 3) ^
           static_cast<std::uint64_t>(rel);
}
}  // namespace

std::uint32_t DomainKg::intern(EntityKind kind, const std::string& surface) {
    const std::string key = entity_key(kind, surface);
    auto it = entity_index_.find(key);
    if (it != entity_index_.end()) return it->second;
    const auto idx = static_cast<std::uint32_t>(entities_.size());
    entities_.push_back(Entity{kind, surface});
    degrees_.push_back(0);
    by_kind_[static_cast<std::size_t>(kind)].push_back(idx);
    entity_index_.emplace(key, idx);
    return idx;
}

std::optional<std::uint32_t> DomainKg::find(EntityKind kind, const std::string& surface) const {
    auto it = entity_index_.find(entity_key(kind, surface));
    if (it == entity_index_.end()) return std::nullopt;
    return it->second;
}

bool DomainKg::has_triple(std::uint32_t head, RelationKind rel, std::uint32_t tail) const {
    auto it = triple_buckets_.find(triple_key(head, rel, tail));
    if (it == triple_buckets_.end()) return false;
    const Triple probe{head, rel, tail};
    for (const Triple& t : it->second)
        if (t == probe) return true;
    return false;
}

void DomainKg::add_triple(std::uint32_t head, RelationKind rel, std::uint32_t tail) {
    if (head >= entities_.size() || tail >= entities_.size())
        throw std::runtime_error("triple endpoint out of range");
    if (entities_[head].kind != relation_head_kind(rel) ||
        entities_[tail].kind != relation_tail_kind(rel))
        throw std::runtime_error(std::string("triple endpoint kinds do not match relation ") +
                                 relation_kind_name(rel));
    if (has_triple(head, rel, tail)) return;
    triples_.push_back(Triple{head, rel, tail});
    triple_buckets_[triple_key(head, rel, tail)].push_back(triples_.back());
    ++degrees_[head];
    ++degrees_[tail];
}

DomainKg build_kg(const std::vector<MetadataRecord>& records) {
    DomainKg kg;
    for (const MetadataRecord& rec : records) {
        if (rec.split != Split::train) continue;
        const std::uint32_t title = kg.intern(EntityKind::title, rec.title);
        std::vector<std::uint32_t> dirs, casts, genres;
        for (const auto& d : rec.directors) dirs.push_back(kg.intern(EntityKind::director, d));
        for (const auto& c : rec.casts) casts.push_back(kg.intern(EntityKind::cast, c));
        for (const auto& g : rec.genres) genres.push_back(kg.intern(EntityKind::genre, g));

        for (auto d : dirs) kg.add_triple(d, RelationKind::director_title, title);
        for (auto c : casts) kg.add_triple(c, RelationKind::cast_title, title);
        for (auto g : genres) kg.add_triple(g, RelationKind::genre_title, title);
        for (auto d : dirs)
            for (auto c : casts) kg.add_triple(d, RelationKind::director_cast, c);
        for (auto d : dirs)
            for (auto g : genres) kg.add_triple(d, RelationKind::director_genre, g);
        for (auto c : casts)
            for (auto g : genres) kg.add_triple(c, RelationKind::cast_genre, g);
    }
    return kg;
}

CorpusStats corpus_stats(const std::vector<MetadataRecord>& records, const DomainKg& kg) {
    CorpusStats stats;
    double sum_dc = 0.0;
    double sum_deg = 0.0;
    for (const MetadataRecord& rec : records) {
        if (rec.split != Split::train) continue;
        ++stats.n_train;
        std::size_t matched = 0;
        std::uint64_t degsum = 0;
        for (const auto& d : rec.directors)
            if (auto idx = kg.find(EntityKind::director, d)) {
                ++matched;
                degsum += kg.degree(*idx);
            }
        for (const auto& c : rec.casts)
            if (auto idx = kg.find(EntityKind::cast, c)) {
                ++matched;
                degsum += kg.degree(*idx);
            }
        sum_dc += static_cast<double>(matched);
        sum_deg += static_cast<double>(degsum);
    }
    if (stats.n_train == 0) throw std::runtime_error("corpus_stats: no train records");
    stats.mean_dc = sum_dc / static_cast<double>(stats.n_train);
    stats.mean_degree_sum = sum_deg / static_cast<double>(stats.n_train);
    return stats;
}

void write_kg_entities(const std::filesystem::path& path, const DomainKg& kg) {
    std::string out;
    for (std::uint32_t i = 0; i < kg.entity_count(); ++i) {
        json j;
        j["index"] = i;
        j["kind"] = entity_kind_name(kg.entity(i).kind);
        j["surface"] = kg.entity(i).surface;
        out += j.dump();
        out += '\n';
    }
    io::atomic_write(path, out);
}

std::string encode_kg_triples(const DomainKg& kg) {
    io::ByteWriter w;
    w.magic("KGT1");
    w.u32(static_cast<std::uint32_t>(kg.triple_count()));
    for (const Triple& t : kg.triples()) {
        w.u32(t.head);
        w.u8(static_cast<std::uint8_t>(t.relation));
        w.u32(t.tail);
    }
    return w.data();
}

void write_kg_triples(const std::filesystem::path& path, const DomainKg& kg) {
    io::atomic_write(path, encode_kg_triples(kg));
}

DomainKg load_kg(const std::filesystem::path& entities_path,
                 const std::filesystem::path& triples_path) {
    DomainKg kg;
    std::ifstream in(entities_path);
    if (!in) throw std::runtime_error("cannot open entity table: " + entities_path.string());
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(entities_path.string() + " line " + std::to_string(lineno) +
                                     ": invalid JSON: " + e.what());
        }
        const auto idx = j.at("index").get<std::uint32_t>();
        const auto kind = entity_kind_from_string(j.at("kind").get<std::string>());
        const auto surface = j.at("surface").get<std::string>();
        const std::uint32_t got = kg.intern(kind, surface);
        if (got != idx)
            throw std::runtime_error(entities_path.string() + ": non-contiguous entity index " +
                                     std::to_string(idx));
    }

    const std::string data = io::read_file(triples_path);
    io::ByteReader r(data, triples_path.string());
    r.expect_magic("KGT1");
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
        const std::uint32_t head = r.u32();
        const std::uint8_t rel = r.u8();
        const std::uint32_t tail = r.u32();
        if (rel >= kRelationKindCount)
            throw std::runtime_error(triples_path.string() + ": bad relation id " +
                                     std::to_string(rel));
        kg.add_triple(head, static_cast<RelationKind>(rel), tail);
    }
    return kg;
}

}  // namespace kgmc
