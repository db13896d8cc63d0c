#include "sievemix/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>

#include "sievemix/errors.hpp"

namespace sievemix::io {

namespace {

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return std::string(s.substr(a, b - a));
}

double parse_double_text(const std::string& raw, const std::string& what) {
  std::string s = trim(raw);
  if (!s.empty() && s.front() == '+') s.erase(0, 1);
  if (s == "inf" || s == "-inf" || s == "nan") throw ValidationError(what + ": non-finite value '" + raw + "'");
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
    throw ValidationError(what + ": not a decimal number: '" + raw + "'");
  }
  return v;
}

double default_beta(const ComponentFamily& f) {
  if (f.kind() == FamilyKind::student_t) return std::min(2.0, f.dof() + 1.0);
  return 2.0;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + "\"";
}

}  // namespace

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

Config parse_config_text(std::string text) {
  Config c;
  c.text = std::move(text);
  c.hash = fnv1a64(c.text);
  try {
    c.root = YAML::Load(c.text);
  } catch (const YAML::Exception& e) {
    throw ValidationError(std::string("config does not parse: ") + e.what());
  }
  if (!c.root.IsMap()) throw ValidationError("config must be a mapping of sections");
  return c;
}

Config load_config(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open config '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  Config c = parse_config_text(ss.str());
  c.path = path;
  return c;
}

double parse_decimal(const YAML::Node& node, const std::string& what) {
  if (!node || !node.IsScalar()) throw ValidationError(what + ": expected a decimal scalar");
  return parse_double_text(node.Scalar(), what);
}

double decimal_or(const YAML::Node& parent, const std::string& key, double fallback) {
  if (!parent || !parent[key]) return fallback;
  return parse_decimal(parent[key], key);
}

std::uint64_t parse_u64(const std::string& text, const std::string& what) {
  std::string s = trim(text);
  std::uint64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc() || ptr != s.data() + s.size()) {
    throw ValidationError(what + ": not a nonnegative integer: '" + text + "'");
  }
  return v;
}

std::size_t count_or(const YAML::Node& parent, const std::string& key, std::size_t fallback) {
  if (!parent || !parent[key]) return fallback;
  if (!parent[key].IsScalar()) throw ValidationError(key + ": expected an integer");
  return static_cast<std::size_t>(parse_u64(parent[key].Scalar(), key));
}

ComponentFamily parse_family(const YAML::Node& node) {
  if (!node) throw ValidationError("missing family");
  std::string kind_name;
  YAML::Node body;
  if (node.IsScalar()) {
    kind_name = node.Scalar();
  } else if (node.IsMap()) {
    if (!node["kind"]) throw ValidationError("family record needs 'kind'");
    kind_name = node["kind"].Scalar();
    body = node;
  } else {
    throw ValidationError("family must be a kind name or a record");
  }
  FamilyKind kind = family_kind_from_string(kind_name);
  std::optional<double> beta;
  if (body && body["beta"]) beta = parse_decimal(body["beta"], "beta");

  ComponentFamily f = [&] {
    switch (kind) {
      case FamilyKind::normal: return ComponentFamily::normal(beta.value_or(2.0));
      case FamilyKind::student_t:
        if (!body || !body["dof"]) throw ValidationError("student_t family needs 'dof'");
        return ComponentFamily::student_t(parse_decimal(body["dof"], "dof"), beta);
      case FamilyKind::uniform: return ComponentFamily::uniform(beta.value_or(2.0));
      case FamilyKind::custom: break;
    }
    throw ValidationError("custom families cannot be declared in a config file");
  }();
  if (body && body["envelope"]) {
    const auto& e = body["envelope"];
    f = f.with_envelope(Envelope{parse_decimal(e["v0"], "envelope.v0"), parse_decimal(e["v1"], "envelope.v1"),
                                 parse_decimal(e["beta"], "envelope.beta")});
  }
  return f;
}

std::vector<ComponentFamily> parse_spec(const YAML::Node& node) {
  if (!node || !node.IsSequence() || node.size() == 0) throw ValidationError("spec must be a nonempty list of families");
  std::vector<ComponentFamily> out;
  for (const auto& f : node) out.push_back(parse_family(f));
  return out;
}

MixtureParams parse_mixture(const YAML::Node& node, bool sub_probability) {
  if (!node || !node.IsSequence()) throw ValidationError("mixture must be a list of component records");
  std::vector<Component> comps;
  for (const auto& rec : node) {
    if (!rec.IsMap()) throw ValidationError("mixture component must be a record");
    comps.push_back(Component::make(parse_decimal(rec["alpha"], "alpha"), parse_family(rec),
                                    parse_decimal(rec["mu"], "mu"), parse_decimal(rec["sigma"], "sigma")));
  }
  return sub_probability ? MixtureParams::sub_probability(std::move(comps)) : MixtureParams::full(std::move(comps));
}

SieveSchedule parse_schedule(const YAML::Node& node) {
  if (!node || !node.IsMap()) throw ValidationError("schedule must be a record {c0, d, override?}");
  SieveSchedule s;
  s.c0 = parse_decimal(node["c0"], "c0");
  s.d = decimal_or(node, "d", 0.5);
  if (node["override"]) s.override_exponent = parse_decimal(node["override"], "override");
  s.validate();
  return s;
}

GridSpec parse_grid(const YAML::Node& node, GridSpec fallback) {
  if (!node) return fallback;
  GridSpec g;
  g.lo = decimal_or(node, "lo", fallback.lo);
  g.hi = decimal_or(node, "hi", fallback.hi);
  g.count = count_or(node, "count", fallback.count);
  if (!(g.hi > g.lo) || g.count < 2) throw ValidationError("grid needs lo < hi and count >= 2");
  return g;
}

std::vector<double> parse_data_text(std::string_view text, const std::string& origin) {
  std::vector<double> out;
  std::size_t line_no = 0;
  while (!text.empty()) {
    std::size_t nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    out.push_back(parse_double_text(t, origin + ":" + std::to_string(line_no)));
  }
  return out;
}

std::vector<double> read_data_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open data file '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_data_text(ss.str(), path.string());
}

std::string shortest(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string fixed17(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void emit_mixture(YAML::Emitter& out, const MixtureParams& theta) {
  out << YAML::BeginSeq;
  for (const auto& c : theta.components()) {
    if (c.family.kind() == FamilyKind::custom) {
      throw ValidationError("custom family '" + c.family.name() + "' cannot be serialized");
    }
    out << YAML::Flow << YAML::BeginMap;
    out << YAML::Key << "alpha" << YAML::Value << shortest(c.alpha);
    out << YAML::Key << "kind" << YAML::Value << to_string(c.family.kind());
    if (c.family.kind() == FamilyKind::student_t) out << YAML::Key << "dof" << YAML::Value << shortest(c.family.dof());
    if (c.family.envelope().beta != default_beta(c.family)) {
      out << YAML::Key << "beta" << YAML::Value << shortest(c.family.envelope().beta);
    }
    out << YAML::Key << "mu" << YAML::Value << shortest(c.mu);
    out << YAML::Key << "sigma" << YAML::Value << shortest(c.sigma);
    out << YAML::EndMap;
  }
  out << YAML::EndSeq;
}

std::string mixture_to_yaml(const MixtureParams& theta) {
  YAML::Emitter out;
  emit_mixture(out, theta);
  return std::string(out.c_str()) + "\n";
}

Record& Record::add(const std::string& key, double v) { return add_node(key, YAML::Node(fixed17(v))); }
Record& Record::add(const std::string& key, const std::string& v) { return add_node(key, YAML::Node(v)); }
Record& Record::add(const std::string& key, const char* v) { return add_node(key, YAML::Node(std::string(v))); }
Record& Record::add(const std::string& key, bool v) { return add_node(key, YAML::Node(v ? "true" : "false")); }
Record& Record::add(const std::string& key, std::size_t v) { return add_node(key, YAML::Node(std::to_string(v))); }
Record& Record::add(const std::string& key, int v) { return add_node(key, YAML::Node(std::to_string(v))); }

Record& Record::add_node(const std::string& key, const YAML::Node& v) {
  entries_.emplace_back(key, v);
  return *this;
}

std::string Record::to_yaml() const {
  YAML::Emitter out;
  out.SetDoublePrecision(17);
  out << YAML::BeginMap;
  for (const auto& [k, v] : entries_) out << YAML::Key << k << YAML::Value << v;
  out << YAML::EndMap;
  return std::string(out.c_str()) + "\n";
}

CsvTable::CsvTable(std::vector<std::string> header) : header_(std::move(header)) {}

CsvTable& CsvTable::row(std::vector<std::string> cells) {
  if (cells.size() != header_.size()) throw ValidationError("csv row width does not match header");
  rows_.push_back(std::move(cells));
  return *this;
}

std::string CsvTable::str() const {
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += csv_escape(cells[i]);
    }
    out += '\n';
  };
  line(header_);
  for (const auto& r : rows_) line(r);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << text;
  if (!out) throw std::runtime_error("write failed for '" + path.string() + "'");
}

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series) {
  const double W = 640, H = 400, L = 70, R = 150, T = 40, B = 50;
  double x0 = std::numeric_limits<double>::infinity(), x1 = -x0, y0 = 0.0, y1 = 0.0;
  for (const auto& s : series) {
    for (auto [x, y] : s.points) {
      if (x > 0) {
        x0 = std::min(x0, std::log10(x));
        x1 = std::max(x1, std::log10(x));
      }
      if (std::isfinite(y)) y1 = std::max(y1, y);
    }
  }
  if (!std::isfinite(x0)) x0 = 0, x1 = 1;
  if (x1 <= x0) x1 = x0 + 1;
  if (y1 <= y0) y1 = y0 + 1;
  auto px = [&](double x) { return L + (std::log10(x) - x0) / (x1 - x0) * (W - L - R); };
  auto py = [&](double y) { return H - B - (y - y0) / (y1 - y0) * (H - T - B); };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

  std::ostringstream s;
  char buf[128];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.2f", v);
    return std::string(buf);
  };
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
  s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  s << "<text x=\"" << W / 2 << "\" y=\"22\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"15\">"
    << title << "</text>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B
    << "\" stroke=\"black\"/>\n";
  s << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
  s << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 12
    << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << x_label << "</text>\n";
  s << "<text x=\"16\" y=\"" << (T + H - B) / 2 << "\" transform=\"rotate(-90 16 " << (T + H - B) / 2
    << ")\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"12\">" << y_label << "</text>\n";
  for (int k = 0; k <= 4; ++k) {
    double y = y0 + (y1 - y0) * k / 4.0;
    s << "<text x=\"" << L - 6 << "\" y=\"" << num(py(y) + 4)
      << "\" text-anchor=\"end\" font-family=\"sans-serif\" font-size=\"10\">" << num(y) << "</text>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* color = colors[i % 6];
    std::string pts;
    for (auto [x, y] : series[i].points) {
      if (!(x > 0) || !std::isfinite(y)) continue;
      pts += num(px(x)) + "," + num(py(y)) + " ";
      s << "<circle cx=\"" << num(px(x)) << "\" cy=\"" << num(py(y)) << "\" r=\"3\" fill=\"" << color << "\"/>\n";
    }
    s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"" << pts << "\"/>\n";
    double ly = T + 16 + 18 * static_cast<double>(i);
    s << "<text x=\"" << W - R + 10 << "\" y=\"" << ly << "\" font-family=\"sans-serif\" font-size=\"11\" fill=\""
      << color << "\">" << series[i].label << "</text>\n";
  }
  for (const auto& sr : series) {
    for (auto [x, y] : sr.points) {
      if (!(x > 0)) continue;
      s << "<text x=\"" << num(px(x)) << "\" y=\"" << H - B + 14
        << "\" text-anchor=\"middle\" font-family=\"sans-serif\" font-size=\"10\">" << shortest(x) << "</text>\n";
    }
    break;
  }
  s << "</svg>\n";
  return s.str();
}

}  // namespace sievemix::io
