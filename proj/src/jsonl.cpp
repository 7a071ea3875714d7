#include "poisoncraft/jsonl.hpp"

#include <fstream>

#include "poisoncraft/common.hpp"

namespace poisoncraft::jsonl {

json make_header(std::string_view schema, json extra, bool deterministic) {
  json h = std::move(extra);
  h["schema"] = std::string(schema);
  h["schema_version"] = kSchemaVersion;
  h["tool"] = kToolName;
  h["tool_version"] = kToolVersion;
  if (!deterministic) h["created_at"] = now_iso8601();
  return h;
}

void write_records(const std::filesystem::path& path, const json& header,
                   const std::vector<json>& records) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << header.dump() << '\n';
  for (const json& r : records) out << r.dump() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

Artifact read_records(const std::filesystem::path& path,
                      std::string_view expect_schema) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  Artifact art;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(path.string() + ":" + std::to_string(lineno) + ": " +
                       e.what());
    }
    if (lineno == 1) {
      art.header = std::move(j);
    } else {
      art.records.push_back(std::move(j));
    }
  }
  if (art.header.is_null()) {
    throw ParseError(path.string() + ": empty artifact, missing header record");
  }
  const std::string got = art.header.value("schema", "");
  if (got != expect_schema) {
    throw ValidationError(path.string() + ": expected schema '" +
                          std::string(expect_schema) + "', found '" + got + "'");
  }
  return art;
}

void write_json(const std::filesystem::path& path, const json& doc) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << doc.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

json read_json(const std::filesystem::path& path, std::string_view expect_schema) {
  const std::string text = read_file(path);
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
  const std::string got = doc.value("schema", "");
  if (!expect_schema.empty() && got != expect_schema) {
    throw ValidationError(path.string() + ": expected schema '" +
                          std::string(expect_schema) + "', found '" + got + "'");
  }
  return doc;
}

}  // namespace poisoncraft::jsonl
