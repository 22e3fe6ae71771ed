#include "condcov/config.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <variant>

#include "condcov/errors.hpp"
#include "condcov/io.hpp"

namespace condcov {

namespace {

using ConfigValue = std::variant<std::monostate, bool, double, std::string,
                                 std::vector<double>, std::vector<std::string>>;

std::string trim(std::string s) {
  const auto notspace = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
  s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
  return s;
}

bool parse_number(const std::string& text, double& out) {
  std::string t = trim(text);
  if (t == "inf") {
    out = std::numeric_limits<double>::infinity();
    return true;
  }
  if (t == "-inf") {
    out = -std::numeric_limits<double>::infinity();
    return true;
  }
  const char* begin = t.c_str();
  char* end = nullptr;
  out = std::strtod(begin, &end);
  return end != begin && *end == '\0';
}

// Strips an unquoted trailing comment.
std::string strip_comment(const std::string& line) {
  bool in_string = false;
  for (size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') in_string = !in_string;
    if (line[i] == '#' && !in_string) return line.substr(0, i);
  }
  return line;
}

ConfigValue parse_value(const std::string& raw, const std::string& key,
                        std::vector<ConfigIssue>& errors) {
  const std::string text = trim(raw);
  if (text.empty()) {
    errors.push_back({key, "missing value"});
    return {};
  }
  if (text.front() == '"') {
    if (text.size() < 2 || text.back() != '"') {
      errors.push_back({key, "unterminated string"});
      return {};
    }
    return text.substr(1, text.size() - 2);
  }
  if (text.front() == '[') {
    if (text.back() != ']') {
      errors.push_back({key, "unterminated array"});
      return {};
    }
    std::vector<std::string> items;
    std::string body = text.substr(1, text.size() - 2);
    std::stringstream ss(body);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = trim(item);
      if (!item.empty()) items.push_back(item);
    }
    if (items.empty()) return std::vector<double>{};
    if (items.front().front() == '"') {
      std::vector<std::string> strings;
      for (size_t i = 0; i < items.size(); ++i) {
        if (items[i].size() < 2 || items[i].front() != '"' ||
            items[i].back() != '"') {
          errors.push_back({key + "[" + std::to_string(i) + "]",
                            "expected a quoted string"});
          return {};
        }
        strings.push_back(items[i].substr(1, items[i].size() - 2));
      }
      return strings;
    }
    std::vector<double> numbers;
    for (size_t i = 0; i < items.size(); ++i) {
      double v = 0.0;
      if (!parse_number(items[i], v)) {
        errors.push_back({key + "[" + std::to_string(i) + "]",
                          "not a number: " + items[i]});
        return {};
      }
      numbers.push_back(v);
    }
    return numbers;
  }
  if (text == "true") return true;
  if (text == "false") return false;
  double v = 0.0;
  if (parse_number(text, v)) return v;
  errors.push_back({key, "cannot parse value: " + text});
  return {};
}

std::map<std::string, ConfigValue> parse_document(
    const std::string& text, std::vector<ConfigIssue>& errors) {
  std::map<std::string, ConfigValue> values;
  std::stringstream ss(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(ss, line)) {
    ++line_no;
    line = trim(strip_comment(line));
    if (line.empty()) continue;
    const size_t eq = line.find('=');
    if (eq == std::string::npos) {
      errors.push_back({"line " + std::to_string(line_no),
                        "expected 'key = value': " + line});
      continue;
    }
    const std::string key = trim(line.substr(0, eq));
    if (key.empty()) {
      errors.push_back({"line " + std::to_string(line_no), "empty key"});
      continue;
    }
    if (values.count(key)) {
      errors.push_back({key, "duplicate key"});
      continue;
    }
    values[key] = parse_value(line.substr(eq + 1), key, errors);
  }
  return values;
}

// Typed extraction helpers -------------------------------------------------

struct Extractor {
  std::map<std::string, ConfigValue>& values;
  std::vector<ConfigIssue>& errors;

  template <class T, class Setter>
  void take(const std::string& key, Setter&& set) {
    auto it = values.find(key);
    if (it == values.end()) return;
    if (auto* v = std::get_if<T>(&it->second))
      set(*v);
    else if (!std::holds_alternative<std::monostate>(it->second))
      errors.push_back({key, "unexpected value type"});
    values.erase(it);
  }

  void string(const std::string& key, std::string& out) {
    take<std::string>(key, [&](const std::string& v) { out = v; });
  }
  void number(const std::string& key, double& out) {
    take<double>(key, [&](double v) { out = v; });
  }
  void integer(const std::string& key, int& out) {
    take<double>(key, [&](double v) { out = static_cast<int>(v); });
  }
  void integer64(const std::string& key, std::int64_t& out) {
    take<double>(key, [&](double v) { out = static_cast<std::int64_t>(v); });
  }
  void uinteger(const std::string& key, std::uint64_t& out) {
    take<double>(key, [&](double v) { out = static_cast<std::uint64_t>(v); });
  }
  void boolean(const std::string& key, bool& out) {
    take<bool>(key, [&](bool v) { out = v; });
  }
  // An empty array carries no element type; accept it for any list key.
  bool take_empty(const std::string& key) {
    auto it = values.find(key);
    if (it == values.end()) return false;
    if (auto* v = std::get_if<std::vector<double>>(&it->second);
        v && v->empty()) {
      values.erase(it);
      return true;
    }
    return false;
  }

  void numbers(const std::string& key, std::vector<double>& out) {
    if (take_empty(key)) {
      out.clear();
      return;
    }
    take<std::vector<double>>(key, [&](const std::vector<double>& v) { out = v; });
  }
  void integers(const std::string& key, std::vector<std::int64_t>& out) {
    if (take_empty(key)) {
      out.clear();
      return;
    }
    take<std::vector<double>>(key, [&](const std::vector<double>& v) {
      out.clear();
      for (double d : v) out.push_back(static_cast<std::int64_t>(d));
    });
  }
  void strings(const std::string& key, std::vector<std::string>& out) {
    if (take_empty(key)) {
      out.clear();
      return;
    }
    take<std::vector<std::string>>(
        key, [&](const std::vector<std::string>& v) { out = v; });
  }
};

const std::vector<std::string> kStageNames = {
    "preprocess", "tune", "fit", "monitor", "pca", "simulate", "report"};

bool one_of(const std::string& v, std::initializer_list<const char*> options) {
  for (const char* o : options)
    if (v == o) return true;
  return false;
}

void check_ranges(RunConfig& c, std::vector<ConfigIssue>& errors) {
  if (!c.input.empty() && !std::filesystem::exists(c.input))
    errors.push_back({"input", "file does not exist: " + c.input});
  if (!c.phase2_input.empty() && !std::filesystem::exists(c.phase2_input))
    errors.push_back({"phase2_input", "file does not exist: " + c.phase2_input});
  if (c.resample_period < 0)
    errors.push_back({"resample_period", "must be >= 0"});
  if (!(c.split_fraction > 0.0 && c.split_fraction < 1.0))
    errors.push_back({"split_fraction", "must lie in (0, 1)"});
  if (c.folds != 0 && c.folds < 2)
    errors.push_back({"folds", "must be 0 (holdout) or >= 2"});
  if (c.strata < 1) errors.push_back({"strata", "must be >= 1"});
  if (c.block_len < 0) errors.push_back({"block_len", "must be >= 0"});
  if (!one_of(c.mean_kind, {"kernel", "bilinear", "constant"}))
    errors.push_back({"mean_kind", "must be kernel, bilinear, or constant"});
  if (!(c.mean_bandwidth > 0))
    errors.push_back({"mean_bandwidth", "must be > 0"});
  if (!one_of(c.tune, {"mean", "cov", "both", "none"}))
    errors.push_back({"tune", "must be mean, cov, both, or none"});
  for (size_t i = 0; i < c.grid.size(); ++i) {
    if (!(c.grid[i] > 0))
      errors.push_back({"grid[" + std::to_string(i) + "]", "must be > 0"});
    else if (i > 0 && !(c.grid[i] > c.grid[i - 1]))
      errors.push_back({"grid[" + std::to_string(i) + "]",
                        "grid must be strictly ascending"});
  }
  if (c.grid.empty()) errors.push_back({"grid", "must not be empty"});
  if (!c.eval_grid.empty()) {
    try {
      parse_eval_grid(c.eval_grid);
    } catch (const Error& e) {
      errors.push_back({"eval_grid", e.what()});
    }
  }
  if (!one_of(c.psd_policy, {"clip-eigen", "jitter"}))
    errors.push_back({"psd_policy", "must be clip-eigen or jitter"});
  if (!(c.cov_bandwidth > 0)) errors.push_back({"cov_bandwidth", "must be > 0"});
  if (!one_of(c.regime, {"none", "mean", "full"}))
    errors.push_back({"regime", "must be none, mean, or full"});
  if (!(c.quantile > 0.0 && c.quantile < 1.0))
    errors.push_back({"quantile", "must lie in (0, 1)"});
  for (size_t i = 0; i < c.drop_components.size(); ++i)
    if (c.drop_components[i] < 1)
      errors.push_back({"drop_components[" + std::to_string(i) + "]",
                        "component indices are 1-based"});
  if (c.score_bins < 2) errors.push_back({"score_bins", "must be >= 2"});
  if (!one_of(c.scenario, {"constant", "linear", "logistic", "mixed"}))
    errors.push_back({"scenario", "must be constant, linear, logistic, or mixed"});
  if (c.sim_n < 1) errors.push_back({"sim_n", "must be >= 1"});
  if (c.sim_runs < 1) errors.push_back({"sim_runs", "must be >= 1"});
  for (size_t i = 0; i < c.h_grid.size(); ++i)
    if (!(c.h_grid[i] > 0))
      errors.push_back({"h_grid[" + std::to_string(i) + "]", "must be > 0"});
  if (c.out_dir.empty()) errors.push_back({"out_dir", "must not be empty"});
  for (size_t i = 0; i < c.stages.size(); ++i)
    if (std::find(kStageNames.begin(), kStageNames.end(), c.stages[i]) ==
        kStageNames.end())
      errors.push_back({"stages[" + std::to_string(i) + "]",
                        "unknown stage: " + c.stages[i]});

  const bool wants_data = std::any_of(
      c.stages.begin(), c.stages.end(), [](const std::string& s) {
        return s != "simulate" && s != "report";
      });
  if (wants_data) {
    if (c.input.empty()) errors.push_back({"input", "required by data stages"});
    if (c.output_cols.empty())
      errors.push_back({"output_cols", "required by data stages"});
  }
}

}  // namespace

Vector parse_eval_grid(const std::string& text) {
  double lo = 0, hi = 0, step = 0;
  std::string part;
  std::stringstream ss(text);
  std::vector<double> parts;
  while (std::getline(ss, part, ':')) {
    double v = 0.0;
    if (!parse_number(part, v))
      throw ConfigError("eval grid: not a number: " + part);
    parts.push_back(v);
  }
  if (parts.size() != 3)
    throw ConfigError("eval grid must be zmin:zmax:step");
  lo = parts[0];
  hi = parts[1];
  step = parts[2];
  if (!(step > 0) || !(hi >= lo))
    throw ConfigError("eval grid needs zmax >= zmin and step > 0");
  const Index count = static_cast<Index>(std::floor((hi - lo) / step + 1e-9)) + 1;
  Vector grid(count);
  for (Index i = 0; i < count; ++i) grid[i] = lo + static_cast<double>(i) * step;
  return grid;
}

ConfigResult validate_config_text(const std::string& text, bool lenient) {
  ConfigResult result;
  auto values = parse_document(text, result.errors);
  RunConfig& c = result.config;

  Extractor ex{values, result.errors};
  ex.string("input", c.input);
  ex.string("timestamp_col", c.timestamp_col);
  ex.string("confounder_col", c.confounder_col);
  ex.strings("output_cols", c.output_cols);
  ex.number("resample_period", c.resample_period);
  ex.number("split_fraction", c.split_fraction);
  ex.integer("folds", c.folds);
  ex.integer("strata", c.strata);
  ex.integer64("block_len", c.block_len);
  ex.uinteger("seed", c.seed);
  ex.string("mean_kind", c.mean_kind);
  ex.number("breakpoint", c.breakpoint);
  ex.number("mean_bandwidth", c.mean_bandwidth);
  ex.string("tune", c.tune);
  ex.numbers("grid", c.grid);
  ex.boolean("global_h", c.global_h);
  ex.string("eval_grid", c.eval_grid);
  ex.string("psd_policy", c.psd_policy);
  ex.number("cov_bandwidth", c.cov_bandwidth);
  ex.string("regime", c.regime);
  ex.number("quantile", c.quantile);
  ex.number("z_split", c.z_split);
  ex.string("phase2_input", c.phase2_input);
  ex.number("phase1_cutoff", c.phase1_cutoff);
  ex.numbers("pca_z", c.pca_z);
  ex.integers("drop_components", c.drop_components);
  ex.integer("score_bins", c.score_bins);
  ex.string("scenario", c.scenario);
  ex.integer("sim_n", c.sim_n);
  ex.integer("sim_runs", c.sim_runs);
  ex.numbers("h_grid", c.h_grid);
  ex.boolean("thin_rows", c.thin_rows);
  ex.string("out_dir", c.out_dir);
  ex.strings("stages", c.stages);

  for (const auto& [key, value] : values) {
    (void)value;
    if (lenient)
      result.warnings.push_back({key, "unknown key (ignored)"});
    else
      result.errors.push_back({key, "unknown key"});
  }

  // default stage list: a data pipeline when an input is named, otherwise
  // a simulation run
  if (c.stages.empty())
    c.stages = c.input.empty()
                   ? std::vector<std::string>{"simulate"}
                   : std::vector<std::string>{"preprocess", "tune", "fit",
                                              "monitor", "pca"};

  check_ranges(c, result.errors);
  return result;
}

ConfigResult validate_config(const std::string& path, bool lenient) {
  std::ifstream in(path);
  if (!in) {
    ConfigResult result;
    result.errors.push_back({"config", "cannot open config file: " + path});
    return result;
  }
  std::stringstream ss;
  ss << in.rdbuf();
  return validate_config_text(ss.str(), lenient);
}

namespace {

std::string quote(const std::string& s) { return "\"" + s + "\""; }

std::string join_numbers(const std::vector<double>& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += format_double(v[i]);
  }
  return out + "]";
}

std::string join_integers(const std::vector<std::int64_t>& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += std::to_string(v[i]);
  }
  return out + "]";
}

std::string join_strings(const std::vector<std::string>& v) {
  std::string out = "[";
  for (size_t i = 0; i < v.size(); ++i) {
    if (i) out += ", ";
    out += quote(v[i]);
  }
  return out + "]";
}

}  // namespace

std::string serialize_config(const RunConfig& c) {
  std::ostringstream out;
  out << "input = " << quote(c.input) << "\n";
  out << "timestamp_col = " << quote(c.timestamp_col) << "\n";
  out << "confounder_col = " << quote(c.confounder_col) << "\n";
  out << "output_cols = " << join_strings(c.output_cols) << "\n";
  out << "resample_period = " << format_double(c.resample_period) << "\n";
  out << "split_fraction = " << format_double(c.split_fraction) << "\n";
  out << "folds = " << c.folds << "\n";
  out << "strata = " << c.strata << "\n";
  out << "block_len = " << c.block_len << "\n";
  out << "seed = " << c.seed << "\n";
  out << "mean_kind = " << quote(c.mean_kind) << "\n";
  out << "breakpoint = " << format_double(c.breakpoint) << "\n";
  out << "mean_bandwidth = " << format_double(c.mean_bandwidth) << "\n";
  out << "tune = " << quote(c.tune) << "\n";
  out << "grid = " << join_numbers(c.grid) << "\n";
  out << "global_h = " << (c.global_h ? "true" : "false") << "\n";
  out << "eval_grid = " << quote(c.eval_grid) << "\n";
  out << "psd_policy = " << quote(c.psd_policy) << "\n";
  out << "cov_bandwidth = " << format_double(c.cov_bandwidth) << "\n";
  out << "regime = " << quote(c.regime) << "\n";
  out << "quantile = " << format_double(c.quantile) << "\n";
  out << "z_split = " << format_double(c.z_split) << "\n";
  out << "phase2_input = " << quote(c.phase2_input) << "\n";
  if (!std::isnan(c.phase1_cutoff))
    out << "phase1_cutoff = " << format_double(c.phase1_cutoff) << "\n";
  out << "pca_z = " << join_numbers(c.pca_z) << "\n";
  out << "drop_components = " << join_integers(c.drop_components) << "\n";
  out << "score_bins = " << c.score_bins << "\n";
  out << "scenario = " << quote(c.scenario) << "\n";
  out << "sim_n = " << c.sim_n << "\n";
  out << "sim_runs = " << c.sim_runs << "\n";
  out << "h_grid = " << join_numbers(c.h_grid) << "\n";
  out << "thin_rows = " << (c.thin_rows ? "true" : "false") << "\n";
  out << "out_dir = " << quote(c.out_dir) << "\n";
  out << "stages = " << join_strings(c.stages) << "\n";
  return out.str();
}

}  // namespace condcov
