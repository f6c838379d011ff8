#include "kgmc/metadata.hpp"

#include <json.hpp>

#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

namespace kgmc {

using nlohmann::json;

const char* split_name(Split s) {
    switch (s) {
        case Split::train: return "train";
        case Split::valid: return "valid";
        case Split::test: return "test";
    }
    return "?";
}

Split split_from_string(const std::string& s) {
    if (s == "train") return Split::train;
    if (s == "valid") return Split::valid;
    if (s == "test") return Split::test;
    throw std::runtime_error("unknown split value: '" + s + "'");
}

namespace {

std::string trim(const std::string& s) {
    std::size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    std::size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> read_string_list(const json& j, const char* key,
                                          const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_array())
        throw std::runtime_error(where + ": missing or non-array key '" + key + "'");
    std::vector<std::string> out;
    std::unordered_set<std::string> seen;
    for (const auto& item : j.at(key)) {
        if (!item.is_string())
            throw std::runtime_error(where + ": non-string entry in '" + key + "'");
        std::string v = trim(item.get<std::string>());
        if (v.empty()) continue;
        if (seen.insert(v).second) out.push_back(std::move(v));
    }
    return out;
}

std::string read_string(const json& j, const char* key, const std::string& where) {
    if (!j.contains(key) || !j.at(key).is_string())
        throw std::runtime_error(where + ": missing or non-string key '" + key + "'");
    return trim(j.at(key).get<std::string>());
}

}  // namespace

std::vector<MetadataRecord> parse_metadata(std::istream& in, const std::string& source_name) {
    std::vector<MetadataRecord> records;
    std::unordered_set<std::string> ids;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string where = source_name + " line " + std::to_string(lineno);
        if (trim(line).empty()) continue;
        json j;
        try {
            j = json::parse(line);
        } catch (const json::exception& e) {
            throw std::runtime_error(where + ": invalid JSON: " + e.what());
        }
        if (!j.is_object()) throw std::runtime_error(where + ": not a JSON object");

        MetadataRecord rec;
        rec.movie_id = read_string(j, "id", where);
        if (rec.movie_id.empty()) throw std::runtime_error(where + ": empty id");
        if (!ids.insert(rec.movie_id).second)
            throw std::runtime_error(where + ": duplicate movie id '" + rec.movie_id + "'");
        rec.title = read_string(j, "title", where);
        if (rec.title.empty())
            throw std::runtime_error(where + ": empty title for record '" + rec.movie_id + "'");
        rec.directors = read_string_list(j, "directors", where);
        rec.casts = read_string_list(j, "casts", where);
        rec.genres = read_string_list(j, "genres", where);
        try {
            rec.split = split_from_string(read_string(j, "split", where));
        } catch (const std::exception& e) {
            throw std::runtime_error(where + ": " + e.what());
        }
        if (rec.split == Split::train && rec.genres.empty())
            throw std::runtime_error(where + ": train record '" + rec.movie_id +
                                     "' has no genres");
        records.push_back(std::move(rec));
    }
    return records;
}

std::vector<MetadataRecord> parse_metadata_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open metadata file: " + path);
    return parse_metadata(in, path);
}

std::string encode_metadata_line(const MetadataRecord& rec) {
    json j;
    j["id"] = rec.movie_id;
    j["title"] = rec.title;
    j["directors"] = rec.directors;
    j["casts"] = rec.casts;
    j["genres"] = rec.genres;
    j["split"] = split_name(rec.split);
    return j.dump();
}

}  // namespace kgmc
