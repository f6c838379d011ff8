#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "kgmc/kg.hpp"
#include "kgmc/metadata.hpp"
#include "kgmc/util/rng.hpp"

#include <filesystem>
#include <map>
#include <set>
#include <sstream>

using namespace kgmc;

namespace {

std::vector<MetadataRecord> parse(const std::string& text) {
    std::istringstream in(text);
    return parse_metadata(in, "test");
}

MetadataRecord make_record(std::string id, std::vector<std::string> dirs,
                           std::vector<std::string> casts, std::vector<std::string> genres,
                           Split split = Split::train) {
    MetadataRecord r;
    r.movie_id = std::move(id);
    r.title = "Title " + r.movie_id;
    r.directors = std::move(dirs);
    r.casts = std::move(casts);
    r.genres = std::move(genres);
    r.split = split;
    return r;
}

// canonical, index-free view for isomorphism checks
using CanonTriple = std::tuple<int, std::string, int, int, std::string>;
std::multiset<CanonTriple> canonical_triples(const DomainKg& kg) {
    std::multiset<CanonTriple> out;
    for (const Triple& t : kg.triples()) {
        out.insert({static_cast<int>(kg.entity(t.head).kind), kg.entity(t.head).surface,
                    static_cast<int>(t.relation), static_cast<int>(kg.entity(t.tail).kind),
                    kg.entity(t.tail).surface});
    }
    return out;
}

std::map<std::pair<int, std::string>, std::uint32_t> degree_map(const DomainKg& kg) {
    std::map<std::pair<int, std::string>, std::uint32_t> out;
    for (std::uint32_t i = 0; i < kg.entity_count(); ++i)
        out[{static_cast<int>(kg.entity(i).kind), kg.entity(i).surface}] = kg.degree(i);
    return out;
}

}  // namespace

TEST_CASE("single record maps fields verbatim") {
    const auto records = parse(
        R"({"id":"m1","title":"T","directors":["D1"],"casts":["C1"],"genres":["Drama"],"split":"train"})");
    REQUIRE(records.size() == 1);
    CHECK(records[0].movie_id == "m1");
    CHECK(records[0].title == "T");
    CHECK(records[0].directors == std::vector<std::string>{"D1"});
    CHECK(records[0].casts == std::vector<std::string>{"C1"});
    CHECK(records[0].genres == std::vector<std::string>{"Drama"});
    CHECK(records[0].split == Split::train);
}

TEST_CASE("list fields are deduplicated keeping first occurrence") {
    const auto records = parse(
        R"({"id":"m1","title":"T","directors":["D1","D1"],"casts":["B","A","B"],"genres":["G"],"split":"train"})");
    CHECK(records[0].directors == std::vector<std::string>{"D1"});
    CHECK(records[0].casts == std::vector<std::string>{"B", "A"});
}

TEST_CASE("values are whitespace-trimmed") {
    const auto records = parse(
        R"({"id":" m1 ","title":"  T ","directors":[" D1"],"casts":[],"genres":["G "],"split":"train"})");
    CHECK(records[0].movie_id == "m1");
    CHECK(records[0].title == "T");
    CHECK(records[0].directors == std::vector<std::string>{"D1"});
    CHECK(records[0].genres == std::vector<std::string>{"G"});
}

TEST_CASE("train record without genres is a validation error naming the id") {
    CHECK_THROWS_WITH_AS(
        parse(R"({"id":"m7","title":"T","directors":[],"casts":[],"genres":[],"split":"train"})"),
        doctest::Contains("m7"), std::runtime_error);
    // but a test record without genres is fine
    CHECK_NOTHROW(
        parse(R"({"id":"m7","title":"T","directors":[],"casts":[],"genres":[],"split":"test"})"));
}

TEST_CASE("malformed lines report the line number") {
    CHECK_THROWS_WITH_AS(parse("{\"id\":\"m1\",\"title\":\"T\",\"directors\":[],\"casts\":[],"
                               "\"genres\":[\"G\"],\"split\":\"train\"}\nnot json"),
                         doctest::Contains("line 2"), std::runtime_error);
    CHECK_THROWS_WITH_AS(parse(R"({"id":"m1","split":"train"})"), doctest::Contains("title"),
                         std::runtime_error);
    CHECK_THROWS_WITH_AS(
        parse(R"({"id":"m1","title":"T","directors":[],"casts":[],"genres":["G"],"split":"dev"})"),
        doctest::Contains("split"), std::runtime_error);
}

TEST_CASE("duplicate movie ids are rejected") {
    const std::string line =
        R"({"id":"m1","title":"T","directors":[],"casts":[],"genres":["G"],"split":"train"})";
    CHECK_THROWS_WITH_AS(parse(line + "\n" + line), doctest::Contains("duplicate"),
                         std::runtime_error);
}

TEST_CASE("one record: entity and per-relation triple counts") {
    // 1 director, 2 casts, 1 title, 2 genres -> 6 entities, 13 triples
    const DomainKg kg = build_kg({make_record("m1", {"D"}, {"C1", "C2"}, {"G1", "G2"})});
    CHECK(kg.entity_count() == 6);
    CHECK(kg.triple_count() == 13);
    std::map<RelationKind, int> by_rel;
    for (const Triple& t : kg.triples()) ++by_rel[t.relation];
    CHECK(by_rel[RelationKind::director_title] == 1);
    CHECK(by_rel[RelationKind::cast_title] == 2);
    CHECK(by_rel[RelationKind::genre_title] == 2);
    CHECK(by_rel[RelationKind::director_cast] == 2);
    CHECK(by_rel[RelationKind::director_genre] == 2);
    CHECK(by_rel[RelationKind::cast_genre] == 4);
}

TEST_CASE("entities are shared across records") {
    const DomainKg kg = build_kg({make_record("m1", {"D1"}, {"C1"}, {"G1"}),
                                  make_record("m2", {"D1"}, {"C2"}, {"G1"})});
    std::size_t directors = kg.entities_of_kind(EntityKind::director).size();
    CHECK(directors == 1);
    CHECK(kg.entities_of_kind(EntityKind::genre).size() == 1);
    CHECK(kg.entities_of_kind(EntityKind::cast).size() == 2);
}

TEST_CASE("non-train records are ignored; empty input gives an empty graph") {
    const DomainKg kg = build_kg({make_record("m1", {"D"}, {"C"}, {"G"}, Split::test)});
    CHECK(kg.entity_count() == 0);
    CHECK(kg.triple_count() == 0);
    CHECK(build_kg({}).triple_count() == 0);
}

TEST_CASE("triple-count formula a+b+g+ab+ag+bg holds per record (brute force)") {
    Rng rng(404);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t a = rng.below(4), b = rng.below(5), g = 1 + rng.below(3);
        std::vector<std::string> dirs, casts, genres;
        for (std::size_t i = 0; i < a; ++i) dirs.push_back("D" + std::to_string(i));
        for (std::size_t i = 0; i < b; ++i) casts.push_back("C" + std::to_string(i));
        for (std::size_t i = 0; i < g; ++i) genres.push_back("G" + std::to_string(i));
        const DomainKg kg = build_kg({make_record("m", dirs, casts, genres)});
        CHECK(kg.triple_count() == a + b + g + a * b + a * g + b * g);
    }
}

TEST_CASE("record order permutation yields an isomorphic KG") {
    Rng rng(777);
    std::vector<MetadataRecord> records;
    for (int i = 0; i < 30; ++i) {
        std::vector<std::string> dirs{"D" + std::to_string(rng.below(6))};
        std::vector<std::string> casts{"C" + std::to_string(rng.below(10)),
                                       "C" + std::to_string(rng.below(10))};
        std::vector<std::string> genres{"G" + std::to_string(rng.below(4))};
        records.push_back(make_record("m" + std::to_string(i), dirs, casts, genres));
    }
    const DomainKg kg1 = build_kg(records);
    auto shuffled = records;
    rng.shuffle(shuffled);
    const DomainKg kg2 = build_kg(shuffled);
    CHECK(canonical_triples(kg1) == canonical_triples(kg2));
    CHECK(degree_map(kg1) == degree_map(kg2));
}

TEST_CASE("degree consistency and kind safety") {
    Rng rng(31337);
    std::vector<MetadataRecord> records;
    for (int i = 0; i < 40; ++i) {
        records.push_back(make_record(
            "m" + std::to_string(i), {"D" + std::to_string(rng.below(5))},
            {"C" + std::to_string(rng.below(12)), "C" + std::to_string(rng.below(12))},
            {"G" + std::to_string(rng.below(5)), "G" + std::to_string(rng.below(5))}));
    }
    const DomainKg kg = build_kg(records);
    std::uint64_t degree_sum = 0;
    for (std::uint32_t i = 0; i < kg.entity_count(); ++i) degree_sum += kg.degree(i);
    CHECK(degree_sum == 2 * kg.triple_count());
    for (const Triple& t : kg.triples()) {
        CHECK(kg.entity(t.head).kind == relation_head_kind(t.relation));
        CHECK(kg.entity(t.tail).kind == relation_tail_kind(t.relation));
    }
}

TEST_CASE("corpus stats: hand-computed means and error cases") {
    // two train samples with matched (N_d + N_c) = 2 and 4
    std::vector<MetadataRecord> records{
        make_record("m1", {"D1"}, {"C1"}, {"G1"}),
        make_record("m2", {"D1", "D2"}, {"C1", "C2"}, {"G1"}),
    };
    const DomainKg kg = build_kg(records);
    const CorpusStats stats = corpus_stats(records, kg);
    CHECK(stats.n_train == 2);
    CHECK(stats.mean_dc == doctest::Approx(3.0));

    // single sample: means equal that sample's values
    std::vector<MetadataRecord> one{make_record("m1", {"D1"}, {"C1", "C2"}, {"G1"})};
    const DomainKg kg1 = build_kg(one);
    const CorpusStats s1 = corpus_stats(one, kg1);
    CHECK(s1.mean_dc == 3.0);
    std::uint64_t total_degree = 0;
    for (const auto& name : {"C1", "C2"}) total_degree += kg1.degree(*kg1.find(EntityKind::cast, name));
    total_degree += kg1.degree(*kg1.find(EntityKind::director, "D1"));
    CHECK(s1.mean_degree_sum == static_cast<double>(total_degree));

    // entities absent from the KG contribute nothing
    std::vector<MetadataRecord> other{make_record("x1", {"DX"}, {"CX"}, {"GX"})};
    const CorpusStats s2 = corpus_stats(other, kg1);  // kg1 lacks DX/CX
    CHECK(s2.mean_dc == 0.0);
    CHECK(s2.mean_degree_sum == 0.0);

    CHECK_THROWS_AS(corpus_stats({}, kg1), std::runtime_error);
}

TEST_CASE("KG persistence round-trips entities, triples and degrees") {
    Rng rng(5150);
    std::vector<MetadataRecord> records;
    for (int i = 0; i < 25; ++i)
        records.push_back(make_record("m" + std::to_string(i),
                                      {"D" + std::to_string(rng.below(4))},
                                      {"C" + std::to_string(rng.below(9))},
                                      {"G" + std::to_string(rng.below(3))}));
    const DomainKg kg = build_kg(records);
    const auto dir = std::filesystem::temp_directory_path() / "kgmc_kg_roundtrip";
    std::filesystem::create_directories(dir);
    write_kg_entities(dir / "entities.jsonl", kg);
    write_kg_triples(dir / "triples.bin", kg);
    const DomainKg back = load_kg(dir / "entities.jsonl", dir / "triples.bin");
    CHECK(back.entity_count() == kg.entity_count());
    CHECK(back.triple_count() == kg.triple_count());
    CHECK(canonical_triples(back) == canonical_triples(kg));
    CHECK(degree_map(back) == degree_map(kg));
    std::filesystem::remove_all(dir);
}
