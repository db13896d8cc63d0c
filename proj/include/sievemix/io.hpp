#pragma once

// Config parsing and report writing. Configs are YAML; numbers may be given
// as plain or quoted decimal strings and are parsed with from_chars, so a
// serialized mixture reads back bit for bit.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <yaml-cpp/yaml.h>

#include "sievemix/components.hpp"
#include "sievemix/estimator.hpp"
#include "sievemix/mixture.hpp"

namespace sievemix::io {

struct Config {
  std::filesystem::path path;
  std::string text;
  YAML::Node root;
  std::uint64_t hash = 0;
};

/// Throws ValidationError when the file is missing or does not parse.
Config load_config(const std::filesystem::path& path);
Config parse_config_text(std::string text);

std::uint64_t fnv1a64(std::string_view bytes);
std::string hex64(std::uint64_t v);

double parse_decimal(const YAML::Node& node, const std::string& what);
double decimal_or(const YAML::Node& parent, const std::string& key, double fallback);
std::size_t count_or(const YAML::Node& parent, const std::string& key, std::size_t fallback);
std::uint64_t parse_u64(const std::string& text, const std::string& what);

/// {kind: normal|student_t|t|uniform, dof?, beta?, envelope?: {v0, v1, beta}}
/// or a bare kind name.
ComponentFamily parse_family(const YAML::Node& node);
std::vector<ComponentFamily> parse_spec(const YAML::Node& node);
/// Sequence of {alpha, kind, dof?, mu, sigma} records.
MixtureParams parse_mixture(const YAML::Node& node, bool sub_probability = false);
/// {c0, d, override?}
SieveSchedule parse_schedule(const YAML::Node& node);
GridSpec parse_grid(const YAML::Node& node, GridSpec fallback = {});

/// Newline-delimited decimals; blank lines and '#' comments are skipped.
std::vector<double> read_data_file(const std::filesystem::path& path);
std::vector<double> parse_data_text(std::string_view text, const std::string& origin = "data");

/// Shortest decimal that reads back to the same double.
std::string shortest(double v);
/// 17 significant digits.
std::string fixed17(double v);

void emit_mixture(YAML::Emitter& out, const MixtureParams& theta);
std::string mixture_to_yaml(const MixtureParams& theta);

/// Ordered flat key-value record.
class Record {
 public:
  Record& add(const std::string& key, double v);
  Record& add(const std::string& key, const std::string& v);
  Record& add(const std::string& key, const char* v);
  Record& add(const std::string& key, bool v);
  Record& add(const std::string& key, std::size_t v);
  Record& add(const std::string& key, int v);
  /// Raw YAML value, emitted as-is.
  Record& add_node(const std::string& key, const YAML::Node& v);

  std::string to_yaml() const;

 private:
  std::vector<std::pair<std::string, YAML::Node>> entries_;
};

class CsvTable {
 public:
  explicit CsvTable(std::vector<std::string> header);
  CsvTable& row(std::vector<std::string> cells);
  std::string str() const;
  std::size_t rows() const { return rows_.size(); }

 private:
  std::vector<std::string> header_;
  std::vector<std::vector<std::string>> rows_;
};

void write_text(const std::filesystem::path& path, const std::string& text);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Static line chart with log-scaled x axis.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series);

}  // namespace sievemix::io
