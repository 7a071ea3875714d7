#pragma once

#include <filesystem>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace poisoncraft::jsonl {

using json = nlohmann::json;

// Every artifact file starts with a header record naming its schema and the
// producing tool. `extra` carries op-specific fields (seeds, ratios, counts).
// created_at is omitted when deterministic is set so reruns are byte-identical.
json make_header(std::string_view schema, json extra, bool deterministic);

void write_records(const std::filesystem::path& path, const json& header,
                   const std::vector<json>& records);

struct Artifact {
  json header;
  std::vector<json> records;
};

// Reads a JSONL artifact and checks the header's schema tag.
Artifact read_records(const std::filesystem::path& path,
                      std::string_view expect_schema);

// Single-document JSON files (reports, rule sets).
void write_json(const std::filesystem::path& path, const json& doc);
json read_json(const std::filesystem::path& path, std::string_view expect_schema);

}  // namespace poisoncraft::jsonl
