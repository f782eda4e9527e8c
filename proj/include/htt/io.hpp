#pragma once

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "htt/common/error.hpp"
#include "htt/common/text.hpp"
#include "htt/instance.hpp"
#include "htt/pipeline.hpp"
#include "htt/rulelib.hpp"
#include "htt/tasks/listfn.hpp"

namespace htt::io {

using Json = nlohmann::ordered_json;

inline void write_jsonl(const std::string& path, const std::vector<Json>& rows) {
  std::string out;
  for (const auto& r : rows) out += r.dump() + "\n";
  text::write_file(path, out);
}

inline std::vector<Json> read_jsonl(const std::string& path) {
  std::vector<Json> rows;
  const auto content = text::read_file(path);
  std::size_t line_no = 0;
  for (const auto& line : text::lines(content)) {
    ++line_no;
    if (text::trim(line).empty()) continue;
    try {
      rows.push_back(Json::parse(line));
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(path + ":" + std::to_string(line_no), e.what());
    }
  }
  return rows;
}

inline void save_instances(const std::string& path, const std::vector<StepInstance>& xs) {
  std::vector<Json> rows;
  for (const auto& x : xs) rows.push_back(to_json(x));
  write_jsonl(path, rows);
}

/// Loads and re-validates every instance.
inline std::vector<StepInstance> load_instances(const std::string& path) {
  std::vector<StepInstance> out;
  std::size_t i = 0;
  for (const auto& row : read_jsonl(path)) {
    ++i;
    try {
      out.push_back(step_instance_from_json(row));
    } catch (const std::exception& e) {
      throw ParseError(path + ": record " + std::to_string(i), e.what());
    }
  }
  return out;
}

inline void save_tasks(const std::string& path, const std::vector<listfn::ListFnTask>& ts) {
  std::vector<Json> rows;
  for (const auto& t : ts) rows.push_back(listfn::to_json(t));
  write_jsonl(path, rows);
}

inline std::vector<listfn::ListFnTask> load_tasks(const std::string& path) {
  std::vector<listfn::ListFnTask> out;
  std::size_t i = 0;
  for (const auto& row : read_jsonl(path)) {
    ++i;
    try {
      out.push_back(listfn::from_json(row));
    } catch (const std::exception& e) {
      throw ParseError(path + ": record " + std::to_string(i), e.what());
    }
  }
  return out;
}

inline Json record_json(const pipeline::InductionRecord& r) {
  Json j;
  j["instance_id"] = r.instance_id;
  j["group"] = r.group;
  if (r.failure) {
    j["failure"] = *r.failure;
    return j;
  }
  j["correct"] = r.answer_correct;
  j["answer"] = r.trace.answer ? Json(*r.trace.answer) : Json(nullptr);
  auto& steps = j["steps"] = Json::array();
  for (const auto& s : r.trace.steps) {
    Json st;
    st["rule"] = s.rule.text;
    st["provenance"] = std::string(to_string(s.provenance));
    if (s.oracle) st["oracle"] = *s.oracle;
    steps.push_back(std::move(st));
  }
  return j;
}

inline constexpr std::string_view kListLibrariesFormat = "httlab-listfn-libraries/1";

/// Per-task list-function libraries: a header line, then one line per task.
inline void save_list_libraries(const std::string& path, const std::map<std::string, RuleLibrary>& libs) {
  std::vector<Json> rows = {Json{{"format", kListLibrariesFormat}, {"tasks", libs.size()}}};
  for (const auto& [name, lib] : libs) {
    rows.push_back(Json{{"name", name}, {"library", Json::parse(serialize(lib))}});
  }
  write_jsonl(path, rows);
}

inline std::map<std::string, RuleLibrary> load_list_libraries(const std::string& path) {
  const auto rows = read_jsonl(path);
  if (rows.empty() || rows.front().value("format", "") != kListLibrariesFormat) {
    throw ParseError(path + ":1", "format is not " + std::string(kListLibrariesFormat));
  }
  std::map<std::string, RuleLibrary> out;
  for (std::size_t i = 1; i < rows.size(); ++i) {
    const auto where = path + ":" + std::to_string(i + 1);
    out.emplace(rows[i].at("name").get<std::string>(), deserialize(rows[i].at("library").dump(), where));
  }
  return out;
}

inline bool is_list_libraries(const std::string& path) {
  const auto content = text::read_file(path);
  const auto first = content.substr(0, content.find('\n'));
  try {
    return Json::parse(first).value("format", "") == kListLibrariesFormat;
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace htt::io
