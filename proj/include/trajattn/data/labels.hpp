// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <string>

#include "trajattn/data/trajectory.hpp"
#include "trajattn/errors.hpp"

namespace trajattn {

// pedestrian id -> abnormal
using LabelMap = std::map<std::int64_t, bool>;

// `pedestrian_id,label` with label in {normal, abnormal}.
inline void write_labels(std::ostream& os, const LabelMap& labels) {
  os << "pedestrian_id,label\n";
  for (const auto& [id, abnormal] : labels) os << id << ',' << (abnormal ? "abnormal" : "normal") << '\n';
}

inline LabelMap parse_labels(std::istream& in) {
  LabelMap out;
  std::string line;
  std::size_t lineno = 0;
  bool header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (lineno == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
    if (csv::trim(line).empty()) continue;
    const auto fields = csv::split(line);
    if (!header) {
      if (fields.size() < 2 || csv::trim(fields[0]) != "pedestrian_id" || csv::trim(fields[1]) != "label") {
        throw ParseError(lineno, "expected header 'pedestrian_id,label'");
      }
      header = true;
      continue;
    }
    if (fields.size() < 2) throw ParseError(lineno, "expected 2 fields");
    std::int64_t id = 0;
    if (!csv::parse_int(csv::trim(fields[0]), id)) throw ParseError(lineno, "bad pedestrian_id");
    const auto label = csv::trim(fields[1]);
    bool abnormal = false;
    if (label == "abnormal") {
      abnormal = true;
    } else if (label != "normal") {
      throw ParseError(lineno, "label must be 'normal' or 'abnormal'");
    }
    if (!out.emplace(id, abnormal).second) throw DataError("duplicate label for pedestrian " + std::to_string(id));
  }
  if (!header) throw ParseError(lineno + 1, "missing header 'pedestrian_id,label'");
  return out;
}

}  // namespace trajattn
