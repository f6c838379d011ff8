#pragma once
// Movie metadata records: JSON Lines parsing and validation.
// One object per line with keys id, title, directors, casts, genres, split.

#include <iosfwd>
#include <string>
#include <vector>

namespace kgmc {

enum class Split { train, valid, test };

const char* split_name(Split s);
Split split_from_string(const std::string& s);

struct MetadataRecord {
    std::string movie_id;
    std::string title;
    std::vector<std::string> directors;
    std::vector<std::string> casts;
    std::vector<std::string> genres;
    Split split = Split::train;
};

// Parses newline-delimited records. Values are whitespace-trimmed and the
// three list fields deduplicated (first occurrence kept). Throws with the
// offending line number on malformed input; a train record with no genres
// is a validation error naming the record id.
std::vector<MetadataRecord> parse_metadata(std::istream& in, const std::string& source_name);
std::vector<MetadataRecord> parse_metadata_file(const std::string& path);

std::string encode_metadata_line(const MetadataRecord& rec);

}  // namespace kgmc
