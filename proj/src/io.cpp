#include "condcov/io.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "json_util.hpp"

namespace condcov {

using nlohmann::json;

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  std::array<char, 32> buf{};
  auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), ptr);
}

namespace {

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);  // LF line endings everywhere
  if (!out) throw ParseError("cannot write file: " + path);
  return out;
}

std::string csv_escape(const std::string& s) {
  if (s.find(',') == std::string::npos && s.find('"') == std::string::npos)
    return s;
  std::string quoted = "\"";
  for (char c : s) {
    if (c == '"') quoted += '"';
    quoted += c;
  }
  return quoted + "\"";
}

}  // namespace

void write_dataset_csv(const std::string& path, const AlignedDataset& data) {
  auto out = open_out(path);
  out << csv_escape(data.meta.timestamp_name) << ','
      << csv_escape(data.meta.confounder_name);
  for (Index c = 0; c < data.dims(); ++c) {
    const std::string name =
        c < static_cast<Index>(data.meta.channel_names.size())
            ? data.meta.channel_names[static_cast<size_t>(c)]
            : "x" + std::to_string(c + 1);
    out << ',' << csv_escape(name);
  }
  out << '\n';
  for (Index i = 0; i < data.rows(); ++i) {
    out << format_double(data.timestamps[i]) << ',' << format_double(data.z[i]);
    for (Index c = 0; c < data.dims(); ++c)
      out << ',' << format_double(data.X(i, c));
    out << '\n';
  }
}

void write_cov_grid_csv(const std::string& path, const CondCovModel& model,
                        const Vector& grid) {
  auto out = open_out(path);
  out << "z,j,k,sigma_jk,rho_jk\n";
  for (Index g = 0; g < grid.size(); ++g) {
    const Matrix sigma = model.eval_cov(grid[g]);
    const Matrix corr = model.eval_corr(grid[g]);
    for (Index j = 0; j < model.dims(); ++j)
      for (Index k = j; k < model.dims(); ++k)
        out << format_double(grid[g]) << ',' << (j + 1) << ',' << (k + 1)
            << ',' << format_double(sigma(j, k)) << ','
            << format_double(corr(j, k)) << '\n';
  }
}

void write_loss_curves_csv(const std::string& path,
                           const std::vector<LossCurve>& curves) {
  auto out = open_out(path);
  out << "h,loss,target_id\n";
  for (const LossCurve& curve : curves)
    for (Index i = 0; i < curve.candidates.size(); ++i)
      out << format_double(curve.candidates[i]) << ','
          << format_double(curve.losses[i]) << ',' << curve.target << '\n';
}

void write_diagnostics_csv(const std::string& path,
                           const DiagnosticSeries& series) {
  auto out = open_out(path);
  out << "timestamp,z,d2,alarm,phase\n";
  for (const DiagnosticPoint& pt : series.points)
    out << format_double(pt.timestamp) << ',' << format_double(pt.z) << ','
        << format_double(pt.d2) << ',' << (pt.alarm ? 1 : 0) << ','
        << (pt.phase == Phase::I ? "I" : "II") << '\n';
}

void write_scores_csv(const std::string& path, const Vector& timestamps,
                      const Vector& z, const Matrix& scores) {
  auto out = open_out(path);
  out << "timestamp,z";
  for (Index c = 0; c < scores.cols(); ++c) out << ",s" << (c + 1);
  out << '\n';
  for (Index i = 0; i < scores.rows(); ++i) {
    out << format_double(timestamps[i]) << ',' << format_double(z[i]);
    for (Index c = 0; c < scores.cols(); ++c)
      out << ',' << format_double(scores(i, c));
    out << '\n';
  }
}

void write_components_csv(const std::string& path,
                          const std::vector<CondEigenDecomp>& decomps) {
  auto out = open_out(path);
  out << "z,component,eigenvalue";
  if (!decomps.empty())
    for (Index r = 0; r < decomps.front().components.rows(); ++r)
      out << ",a" << (r + 1);
  out << '\n';
  for (const CondEigenDecomp& dec : decomps)
    for (Index j = 0; j < dec.eigenvalues.size(); ++j) {
      out << format_double(dec.z) << ',' << (j + 1) << ','
          << format_double(dec.eigenvalues[j]);
      for (Index r = 0; r < dec.components.rows(); ++r)
        out << ',' << format_double(dec.components(r, j));
      out << '\n';
    }
}

void write_report_json(const std::string& path, Regime regime,
                       const DiagnosticSeries& series,
                       const AlarmReport& report) {
  json doc;
  doc["regime"] = to_string(regime);
  doc["threshold"] = series.threshold;
  doc["dof"] = series.dof;
  doc["rate_overall"] = report.rate_overall;
  doc["rate_below_split"] = report.rate_below;
  doc["rate_above_split"] = report.rate_above;
  doc["n"] = report.n;
  doc["z_split"] = report.z_split;
  doc["n_below"] = report.n_below;
  doc["n_above"] = report.n_above;
  doc["alarms"] = report.alarms;
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

void write_score_diagnostics_json(const std::string& path,
                                  const ScoreDiagnostics& diag) {
  json doc;
  doc["bins"] = json::array();
  for (const ScoreBinStats& bin : diag.bins) {
    json b;
    b["z_lo"] = bin.z_lo;
    b["z_hi"] = bin.z_hi;
    b["count"] = bin.count;
    b["mean"] = std::vector<double>(bin.mean.begin(), bin.mean.end());
    b["sd"] = std::vector<double>(bin.sd.begin(), bin.sd.end());
    json corr = json::array();
    for (Index a = 0; a < bin.corr.rows(); ++a) {
      json row = json::array();
      for (Index c = 0; c < bin.corr.cols(); ++c) {
        if (std::isnan(bin.corr(a, c)))
          row.push_back(nullptr);  // undefined (zero spread)
        else
          row.push_back(bin.corr(a, c));
      }
      corr.push_back(row);
    }
    b["corr"] = corr;
    doc["bins"].push_back(b);
  }
  doc["normality_gap"] = std::vector<double>(diag.normality_gap.begin(),
                                             diag.normality_gap.end());
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Model serialization

namespace {

json schema_to_json(const CsvSchema& schema) {
  json s;
  s["timestamp_col"] = schema.timestamp_col;
  s["confounder_col"] = schema.confounder_col;
  s["output_cols"] = schema.output_cols;
  return s;
}

CsvSchema schema_from_json(const json& s) {
  CsvSchema schema;
  schema.timestamp_col = s.at("timestamp_col").get<std::string>();
  schema.confounder_col = s.at("confounder_col").get<std::string>();
  schema.output_cols = s.at("output_cols").get<std::vector<std::string>>();
  return schema;
}

json mean_model_to_json(const MeanModel& model, const std::string& training_data,
                        const CsvSchema& schema) {
  json doc;
  doc["kind"] = to_string(model.kind());
  doc["validity"] = {model.validity().lo, model.validity().hi};
  switch (model.kind()) {
    case MeanKind::kernel:
      doc["bandwidths"] = detail::json_vector(model.bandwidths());
      doc["training_data"] = training_data;
      doc["schema"] = schema_to_json(schema);
      break;
    case MeanKind::bilinear: {
      doc["breakpoint"] = model.breakpoint();
      const Matrix& c = model.coefficients();
      doc["level"] = std::vector<double>(c.row(0).begin(), c.row(0).end());
      doc["slope_below"] = std::vector<double>(c.row(1).begin(), c.row(1).end());
      doc["slope_above"] = std::vector<double>(c.row(2).begin(), c.row(2).end());
      break;
    }
    case MeanKind::constant:
      doc["values"] = std::vector<double>(model.coefficients().row(0).begin(),
                                          model.coefficients().row(0).end());
      break;
  }
  return doc;
}

// Relative training-data references resolve against the model file's
// directory so artifact folders stay relocatable.
std::string resolve_data_path(const std::string& stored,
                              const std::string& base_dir) {
  std::filesystem::path p(stored);
  if (p.is_absolute() || base_dir.empty()) return stored;
  return (std::filesystem::path(base_dir) / p).string();
}

AlignedDataset load_training_data(const json& doc, const std::string& base_dir) {
  const CsvSchema schema = schema_from_json(doc.at("schema"));
  const std::string path =
      resolve_data_path(doc.at("training_data").get<std::string>(), base_dir);
  DatasetMeta meta;
  meta.channel_names = schema.output_cols;
  meta.confounder_name = schema.confounder_col;
  meta.timestamp_name = schema.timestamp_col;
  return to_aligned(load_csv(path, schema), meta);
}

MeanModel mean_model_from_json(const json& doc, const std::string& base_dir) {
  const MeanKind kind = mean_kind_from_string(doc.at("kind").get<std::string>());
  const Interval validity{doc.at("validity")[0].get<double>(),
                          doc.at("validity")[1].get<double>()};
  switch (kind) {
    case MeanKind::kernel: {
      const AlignedDataset data = load_training_data(doc, base_dir);
      return MeanModel::fit_kernel(data.X, data.z,
                                   detail::vector_from_json(doc.at("bandwidths")));
    }
    case MeanKind::bilinear: {
      const auto level = doc.at("level").get<std::vector<double>>();
      const auto below = doc.at("slope_below").get<std::vector<double>>();
      const auto above = doc.at("slope_above").get<std::vector<double>>();
      const Index p = static_cast<Index>(level.size());
      Matrix coeff(3, p);
      for (Index k = 0; k < p; ++k) {
        coeff(0, k) = level[static_cast<size_t>(k)];
        coeff(1, k) = below[static_cast<size_t>(k)];
        coeff(2, k) = above[static_cast<size_t>(k)];
      }
      return MeanModel::bilinear_from_coefficients(
          doc.at("breakpoint").get<double>(), coeff, validity);
    }
    case MeanKind::constant: {
      const auto values = doc.at("values").get<std::vector<double>>();
      return MeanModel::constant_values(
          Eigen::Map<const Vector>(values.data(),
                                   static_cast<Index>(values.size())),
          validity);
    }
  }
  throw ParseError("unknown mean model kind");
}

}  // namespace

void write_mean_model_json(const std::string& path, const MeanModel& model,
                           const std::string& training_data,
                           const CsvSchema& schema) {
  auto out = open_out(path);
  out << mean_model_to_json(model, training_data, schema).dump(2) << '\n';
}

MeanModel load_mean_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  json doc = json::parse(in);
  return mean_model_from_json(doc,
                              std::filesystem::path(path).parent_path().string());
}

void write_cov_model_json(const std::string& path, const CondCovModel& model,
                          const std::string& training_data,
                          const CsvSchema& schema) {
  json doc;
  doc["bandwidths"] = detail::json_matrix(model.bandwidths().matrix());
  doc["validity"] = {model.validity().lo, model.validity().hi};
  doc["psd_policy"] =
      model.psd_policy() == PsdPolicy::clip_eigen ? "clip-eigen" : "jitter";
  doc["training_data"] = training_data;
  doc["schema"] = schema_to_json(schema);
  doc["mean"] = mean_model_to_json(model.mean(), training_data, schema);
  auto out = open_out(path);
  out << doc.dump(2) << '\n';
}

CondCovModel load_cov_model_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open model file: " + path);
  json doc = json::parse(in);

  const std::string base_dir =
      std::filesystem::path(path).parent_path().string();
  const AlignedDataset data = load_training_data(doc, base_dir);
  MeanModel mean = mean_model_from_json(doc.at("mean"), base_dir);

  CondCovModel model = CondCovModel::fit(
      data.X, data.z, std::move(mean),
      BandwidthMatrix(detail::matrix_from_json(doc.at("bandwidths"))));
  if (doc.value("psd_policy", "clip-eigen") == std::string("jitter"))
    model.set_psd_policy(PsdPolicy::jitter);
  return model;
}

// ---------------------------------------------------------------------------
// Hashing

namespace {

std::uint64_t fnv1a(const char* data, size_t size, std::uint64_t hash) {
  for (size_t i = 0; i < size; ++i) {
    hash ^= static_cast<unsigned char>(data[i]);
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[v & 0xF];
    v >>= 4;
  }
  return out;
}

}  // namespace

std::string text_hash(const std::string& text) {
  return hex64(fnv1a(text.data(), text.size(), 14695981039346656037ULL));
}

std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open file for hashing: " + path);
  std::uint64_t hash = 14695981039346656037ULL;
  std::array<char, 65536> buf{};
  while (in.read(buf.data(), static_cast<std::streamsize>(buf.size())) ||
         in.gcount() > 0)
    hash = fnv1a(buf.data(), static_cast<size_t>(in.gcount()), hash);
  return hex64(hash);
}

bool files_identical(const std::string& a, const std::string& b) {
  std::ifstream fa(a, std::ios::binary), fb(b, std::ios::binary);
  if (!fa || !fb) return false;
  std::stringstream sa, sb;
  sa << fa.rdbuf();
  sb << fb.rdbuf();
  return sa.str() == sb.str();
}

}  // namespace condcov
