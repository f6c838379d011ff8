#pragma once
// Domain knowledge graph built from train-split metadata: four entity kinds,
// six co-occurrence relation kinds, deduplicated typed triples, degrees.

#include "kgmc/metadata.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace kgmc {

enum class EntityKind : std::uint8_t { director = 0, title = 1, cast = 2, genre = 3 };
constexpr std::size_t kEntityKindCount = 4;

enum class RelationKind : std::uint8_t {
    director_title = 0,
    cast_title = 1,
    genre_title = 2,
    director_cast = 3,
    director_genre = 4,
    cast_genre = 5,
};
constexpr std::size_t kRelationKindCount = 6;

const char* entity_kind_name(EntityKind k);
EntityKind entity_kind_from_string(const std::string& s);
const char* relation_kind_name(RelationKind r);

// Head/tail entity kinds fixed by each relation kind (first-named kind is
// always the head).
EntityKind relation_head_kind(RelationKind r);
EntityKind relation_tail_kind(RelationKind r);

struct Triple {
    std::uint32_t head;
    RelationKind relation;
    std::uint32_t tail;

    bool operator==(const Triple& o) const {
        return head == o.head && relation == o.relation && tail == o.tail;
    }
};

struct Entity {
    EntityKind kind;
    std::string surface;
};

class DomainKg {
public:
    // Entity identity is (kind, exact surface string); indices are assigned
    // in first-seen order. Returns existing index when already present.
    std::uint32_t intern(EntityKind kind, const std::string& surface);
    std::optional<std::uint32_t> find(EntityKind kind, const std::string& surface) const;

    // Deduplicated insert; updates degrees when the triple is new.
    void add_triple(std::uint32_t head, RelationKind rel, std::uint32_t tail);
    bool has_triple(std::uint32_t head, RelationKind rel, std::uint32_t tail) const;

    std::size_t entity_count() const { return entities_.size(); }
    std::size_t triple_count() const { return triples_.size(); }
    const Entity& entity(std::uint32_t idx) const { return entities_[idx]; }
    const std::vector<Triple>& triples() const { return triples_; }
    std::uint32_t degree(std::uint32_t idx) const { return degrees_[idx]; }
    const std::vector<std::uint32_t>& entities_of_kind(EntityKind k) const {
        return by_kind_[static_cast<std::size_t>(k)];
    }

private:
    std::vector<Entity> entities_;
    std::vector<std::uint32_t> degrees_;
    std::array<std::vector<std::uint32_t>, kEntityKindCount> by_kind_;
    std::unordered_map<std::string, std::uint32_t> entity_index_;  // "kind\x1fsurface"
    std::vector<Triple> triples_;
    std::unordered_map<std::uint64_t, std::vector<Triple>> triple_buckets_;
};

// Builds the KG from the train-split subset of `records` (other splits are
// ignored). An empty train split yields an empty graph.
DomainKg build_kg(const std::vector<MetadataRecord>& records);

struct CorpusStats {
    std::size_t n_train = 0;      // W
    double mean_dc = 0.0;         // mean of (N_di + N_ci) over train samples
    double mean_degree_sum = 0.0; // mean of per-sample degree sums over train samples
};

// Means over the train-split records; degree sums count only entities
// present in `kg`. Throws when there are no train records.
CorpusStats corpus_stats(const std::vector<MetadataRecord>& records, const DomainKg& kg);

// Persistence: entity table as JSON Lines of {index, kind, surface} and the
// binary KGT1 triple file.
void write_kg_entities(const std::filesystem::path& path, const DomainKg& kg);
std::string encode_kg_triples(const DomainKg& kg);
void write_kg_triples(const std::filesystem::path& path, const DomainKg& kg);
DomainKg load_kg(const std::filesystem::path& entities_path,
                 const std::filesystem::path& triples_path);

}  // namespace kgmc
