#pragma once

#include <string>
#include <string_view>

#include "spopf/network_case.hpp"

namespace spopf {

class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& msg, int line, int column)
      : std::runtime_error("line " + std::to_string(line) + ", column " + std::to_string(column) +
                           ": " + msg),
        line_(line),
        column_(column) {}
  int line() const { return line_; }
  int column() const { return column_; }

 private:
  int line_, column_;
};

/// Parse the supported subset of the MATPOWER `mpc` text format: baseMVA and
/// the bus/gen/branch matrices. Unsupported sections (e.g. gencost) are
/// ignored and reported in NetworkCase::warnings.
NetworkCase parse_matpower(std::string_view text);

/// Parse the JSON mirror schema (normalized per-unit quantities).
NetworkCase parse_case_json(std::string_view text);

/// Serialize a NetworkCase into the JSON mirror schema.
std::string case_to_json(const NetworkCase& nc);

/// Dispatch on file extension: ".m" -> MATPOWER, ".json" -> JSON mirror.
NetworkCase load_case_file(const std::string& path);

}  // namespace spopf
