#include "condcov/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <sstream>

#include "condcov/rng.hpp"

namespace condcov {

Interval AlignedDataset::z_range() const {
  if (z.size() == 0) return {};
  return {z.minCoeff(), z.maxCoeff()};
}

AlignedDataset AlignedDataset::select_rows(const std::vector<Index>& idx) const {
  AlignedDataset out;
  out.meta = meta;
  out.X.resize(static_cast<Index>(idx.size()), X.cols());
  out.z.resize(static_cast<Index>(idx.size()));
  out.timestamps.resize(static_cast<Index>(idx.size()));
  for (size_t r = 0; r < idx.size(); ++r) {
    out.X.row(static_cast<Index>(r)) = X.row(idx[r]);
    out.z[static_cast<Index>(r)] = z[idx[r]];
    out.timestamps[static_cast<Index>(r)] = timestamps[idx[r]];
  }
  return out;
}

void AlignedDataset::validate() const {
  if (X.rows() != z.size() || X.rows() != timestamps.size())
    throw ShapeError("dataset rows not aligned with confounder/timestamps");
  if (X.rows() < 2) throw ShapeError("dataset needs at least two rows");
  if (X.cols() < 1) throw ShapeError("dataset needs at least one channel");
  if (!X.allFinite()) throw ChannelError("dataset outputs contain non-finite values");
  if (!z.allFinite()) throw ChannelError("confounder series contains non-finite values");
}

AlignedDataset to_aligned(const std::vector<TimedRecord>& records,
                          DatasetMeta meta) {
  if (records.size() < 2)
    throw ShapeError("dataset needs at least two records");
  const Index n = static_cast<Index>(records.size());
  const Index p = records.front().x.size();
  if (p < 1) throw ShapeError("records carry no output channels");

  AlignedDataset out;
  out.meta = std::move(meta);
  out.X.resize(n, p);
  out.z.resize(n);
  out.timestamps.resize(n);
  for (Index i = 0; i < n; ++i) {
    const TimedRecord& r = records[static_cast<size_t>(i)];
    if (r.x.size() != p) throw ShapeError("inconsistent channel count across records");
    out.X.row(i) = r.x.transpose();
    out.z[i] = r.z;
    out.timestamps[i] = r.timestamp;
  }
  out.validate();
  return out;
}

// ---------------------------------------------------------------------------
// CSV ingestion

namespace {

std::string trim_cell(std::string s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t'))
    s.pop_back();
  size_t b = 0;
  while (b < s.size() && (s[b] == ' ' || s[b] == '\t')) ++b;
  s.erase(0, b);
  if (s.size() >= 2 && s.front() == '"' && s.back() == '"')
    s = s.substr(1, s.size() - 2);
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) cells.push_back(trim_cell(cell));
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

// Missing on empty / non-numeric cells.
double parse_value(const std::string& cell) {
  if (cell.empty()) return std::numeric_limits<double>::quiet_NaN();
  const char* begin = cell.c_str();
  char* end = nullptr;
  const double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    return std::numeric_limits<double>::quiet_NaN();
  return v;
}

}  // namespace

std::vector<TimedRecord> load_csv(const std::string& path,
                                  const CsvSchema& schema) {
  if (schema.output_cols.empty())
    throw SchemaError("schema names no output columns");

  std::ifstream in(path);
  if (!in) throw ParseError("cannot open file: " + path);

  std::string line;
  if (!std::getline(in, line)) throw ParseError(path + ": empty file");
  const std::vector<std::string> header = split_line(line);

  auto column_of = [&](const std::string& name) -> size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end())
      throw SchemaError(path + ": column not found: " + name);
    return static_cast<size_t>(it - header.begin());
  };

  const size_t t_col = column_of(schema.timestamp_col);
  const size_t z_col = column_of(schema.confounder_col);
  std::vector<size_t> x_cols;
  for (const auto& name : schema.output_cols) x_cols.push_back(column_of(name));

  std::vector<TimedRecord> records;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw ParseError(path + ":" + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " cells, got " +
                       std::to_string(cells.size()));
    TimedRecord rec;
    rec.timestamp = parse_value(cells[t_col]);
    if (std::isnan(rec.timestamp))
      throw ParseError(path + ":" + std::to_string(line_no) +
                       ": non-numeric timestamp");
    rec.z = parse_value(cells[z_col]);
    rec.x.resize(static_cast<Index>(x_cols.size()));
    for (size_t c = 0; c < x_cols.size(); ++c)
      rec.x[static_cast<Index>(c)] = parse_value(cells[x_cols[c]]);
    records.push_back(std::move(rec));
  }

  std::stable_sort(records.begin(), records.end(),
                   [](const TimedRecord& a, const TimedRecord& b) {
                     return a.timestamp < b.timestamp;
                   });
  return records;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

double source_period(const std::vector<TimedRecord>& records) {
  std::vector<double> gaps;
  for (size_t i = 1; i < records.size(); ++i) {
    const double dt = records[i].timestamp - records[i - 1].timestamp;
    if (dt > 0) gaps.push_back(dt);
  }
  if (gaps.empty()) return 0.0;
  std::nth_element(gaps.begin(), gaps.begin() + gaps.size() / 2, gaps.end());
  return gaps[gaps.size() / 2];
}

// Linear interpolation of (t, v) samples at time t; NaN outside coverage.
double interp_at(const std::vector<double>& ts, const std::vector<double>& vs,
                 double t) {
  if (ts.empty()) return std::numeric_limits<double>::quiet_NaN();
  if (t < ts.front() || t > ts.back())
    return std::numeric_limits<double>::quiet_NaN();
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  const size_t hi = static_cast<size_t>(it - ts.begin());
  if (hi == 0 || ts[hi] == t) return vs[std::min(hi, vs.size() - 1)];
  const size_t lo = hi - 1;
  const double span = ts[hi] - ts[lo];
  if (span <= 0) return vs[lo];
  const double a = (t - ts[lo]) / span;
  return vs[lo] + a * (vs[hi] - vs[lo]);
}

}  // namespace

std::vector<TimedRecord> resample(const std::vector<TimedRecord>& records,
                                  double target_period) {
  if (records.size() < 2)
    throw ShapeError("resample needs at least two records");
  if (!(target_period > 0.0))
    throw ParameterError("resample period must be positive");

  const double src = source_period(records);
  if (src > 0.0 && target_period < src * (1.0 - 1e-9))
    throw UpsampleError("target period " + std::to_string(target_period) +
                        " s is finer than the source period " +
                        std::to_string(src) + " s");

  const double t0 = records.front().timestamp;
  const double t1 = records.back().timestamp;
  // one bin per target period, left-aligned at the grid timestamps
  const Index bins =
      static_cast<Index>(std::floor((t1 - t0) / target_period + 1e-9)) + 1;
  const Index p = records.front().x.size();

  Matrix sums = Matrix::Zero(bins, p);
  Matrix counts = Matrix::Zero(bins, p);
  std::vector<double> z_ts, z_vs;
  for (const TimedRecord& r : records) {
    const double pos = (r.timestamp - t0) / target_period;
    const Index b = std::min(
        bins - 1, static_cast<Index>(std::floor(pos + 1e-9)));
    if (b >= 0) {
      for (Index c = 0; c < p; ++c) {
        if (!std::isnan(r.x[c])) {
          sums(b, c) += r.x[c];
          counts(b, c) += 1.0;
        }
      }
    }
    if (!r.z_missing()) {
      z_ts.push_back(r.timestamp);
      z_vs.push_back(r.z);
    }
  }

  std::vector<TimedRecord> out(static_cast<size_t>(bins));
  for (Index b = 0; b < bins; ++b) {
    TimedRecord& rec = out[static_cast<size_t>(b)];
    rec.timestamp = t0 + static_cast<double>(b) * target_period;
    rec.z = interp_at(z_ts, z_vs, rec.timestamp);
    rec.x.resize(p);
    for (Index c = 0; c < p; ++c)
      rec.x[c] = counts(b, c) > 0 ? sums(b, c) / counts(b, c)
                                  : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

// ---------------------------------------------------------------------------
// Missing-value interpolation

std::vector<TimedRecord> fill_missing(const std::vector<TimedRecord>& records) {
  if (records.empty()) return {};
  const Index p = records.front().x.size();

  auto complete = [&](const TimedRecord& r) {
    if (r.z_missing()) return false;
    for (Index c = 0; c < p; ++c)
      if (std::isnan(r.x[c])) return false;
    return true;
  };

  size_t first = 0, last = records.size();
  while (first < last && !complete(records[first])) ++first;
  while (last > first && !complete(records[last - 1])) --last;
  if (first > 0 || last < records.size())
    warn("fill_missing: trimmed " + std::to_string(first) + " leading and " +
         std::to_string(records.size() - last) + " trailing incomplete records");
  if (first >= last) throw ChannelError("no complete records to anchor interpolation");

  std::vector<TimedRecord> out(records.begin() + static_cast<std::ptrdiff_t>(first),
                               records.begin() + static_cast<std::ptrdiff_t>(last));

  // channel -1 is the confounder
  for (Index c = -1; c < p; ++c) {
    std::vector<double> ts, vs;
    for (const TimedRecord& r : out) {
      const double v = c < 0 ? r.z : r.x[c];
      if (!std::isnan(v)) {
        ts.push_back(r.timestamp);
        vs.push_back(v);
      }
    }
    if (ts.empty())
      throw ChannelError(c < 0 ? "confounder channel entirely missing"
                               : "output channel " + std::to_string(c + 1) +
                                     " entirely missing");
    for (TimedRecord& r : out) {
      double& v = c < 0 ? r.z : r.x[c];
      if (std::isnan(v)) v = interp_at(ts, vs, r.timestamp);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Stratified block splits

Index SplitPlan::day_block(const AlignedDataset& data) {
  if (data.meta.sample_period > 0.0)
    return std::max<Index>(
        1, static_cast<Index>(std::llround(86400.0 / data.meta.sample_period)));
  return 1;
}

namespace {

struct Block {
  Index begin, end;  // row range [begin, end)
  double mean_z;
};

std::vector<Interval> default_strata(const AlignedDataset& data, int count) {
  const Interval range = data.z_range();
  std::vector<Interval> strata;
  const double width = range.width() / static_cast<double>(count);
  for (int s = 0; s < count; ++s)
    strata.push_back({range.lo + s * width, range.lo + (s + 1) * width});
  strata.back().hi = range.hi;
  return strata;
}

std::string interval_str(const Interval& iv) {
  return "[" + std::to_string(iv.lo) + ", " + std::to_string(iv.hi) + "]";
}

// Blocks bucketed per stratum by their mean z; intervals are half-open
// except the last, which includes its upper bound.
std::vector<std::vector<Block>> bucket_blocks(const AlignedDataset& data,
                                              const SplitPlan& plan,
                                              const std::vector<Interval>& strata) {
  if (plan.block_len < 1) throw ParameterError("block length must be >= 1");
  std::vector<std::vector<Block>> buckets(strata.size());
  for (Index b = 0; b * plan.block_len < data.rows(); ++b) {
    Block blk;
    blk.begin = b * plan.block_len;
    blk.end = std::min(blk.begin + plan.block_len, data.rows());
    blk.mean_z = data.z.segment(blk.begin, blk.end - blk.begin).mean();
    bool placed = false;
    for (size_t s = 0; s < strata.size(); ++s) {
      const bool last = s + 1 == strata.size();
      if (blk.mean_z >= strata[s].lo &&
          (blk.mean_z < strata[s].hi || (last && blk.mean_z <= strata[s].hi))) {
        buckets[s].push_back(blk);
        placed = true;
        break;
      }
    }
    if (!placed)
      throw StratificationError("block mean z = " + std::to_string(blk.mean_z) +
                                " falls outside every stratum");
  }
  for (size_t s = 0; s < strata.size(); ++s)
    if (buckets[s].empty())
      throw StratificationError("empty stratum " + interval_str(strata[s]));
  return buckets;
}

void shuffle_blocks(std::vector<Block>& blocks, Rng& rng) {
  for (size_t i = blocks.size(); i > 1; --i)
    std::swap(blocks[i - 1], blocks[rng.below(i)]);
}

AlignedDataset gather(const AlignedDataset& data, std::vector<Index> rows) {
  std::sort(rows.begin(), rows.end());
  return data.select_rows(rows);
}

void append_rows(std::vector<Index>& rows, const Block& blk) {
  for (Index r = blk.begin; r < blk.end; ++r) rows.push_back(r);
}

}  // namespace

HoldoutSplit split_holdout(const AlignedDataset& data, const SplitPlan& plan,
                           std::uint64_t seed) {
  if (!(plan.fraction > 0.0 && plan.fraction < 1.0))
    throw ParameterError("holdout fraction must be in (0, 1)");
  const std::vector<Interval> strata =
      plan.strata.empty() ? default_strata(data, plan.n_strata) : plan.strata;
  auto buckets = bucket_blocks(data, plan, strata);

  std::vector<Index> train_rows, val_rows;
  for (size_t s = 0; s < buckets.size(); ++s) {
    Rng rng(seed, 0x5eed5, static_cast<std::uint64_t>(s));
    shuffle_blocks(buckets[s], rng);
    const auto n_blocks = buckets[s].size();
    const size_t n_val = static_cast<size_t>(std::llround(
        plan.fraction * static_cast<double>(n_blocks)));
    for (size_t b = 0; b < n_blocks; ++b)
      append_rows(b < n_val ? val_rows : train_rows, buckets[s][b]);
  }
  if (train_rows.empty() || val_rows.empty())
    throw StratificationError("split leaves an empty train or validation set");
  return {gather(data, train_rows), gather(data, val_rows)};
}

std::vector<HoldoutSplit> split_kfold(const AlignedDataset& data,
                                      const SplitPlan& plan,
                                      std::uint64_t seed) {
  if (plan.folds < 2) throw ParameterError("K-fold needs K >= 2");
  const std::vector<Interval> strata =
      plan.strata.empty() ? default_strata(data, plan.n_strata) : plan.strata;
  auto buckets = bucket_blocks(data, plan, strata);

  const size_t K = static_cast<size_t>(plan.folds);
  std::vector<std::vector<Index>> fold_rows(K);
  for (size_t s = 0; s < buckets.size(); ++s) {
    Rng rng(seed, 0x5eedf, static_cast<std::uint64_t>(s));
    shuffle_blocks(buckets[s], rng);
    for (size_t b = 0; b < buckets[s].size(); ++b)
      append_rows(fold_rows[b % K], buckets[s][b]);
  }

  std::vector<HoldoutSplit> folds;
  for (size_t k = 0; k < K; ++k) {
    if (fold_rows[k].empty())
      throw StratificationError("fold " + std::to_string(k + 1) +
                                " received no blocks; reduce K");
    std::vector<Index> train_rows;
    for (size_t j = 0; j < K; ++j)
      if (j != k)
        train_rows.insert(train_rows.end(), fold_rows[j].begin(),
                          fold_rows[j].end());
    folds.push_back({gather(data, train_rows), gather(data, fold_rows[k])});
  }
  return folds;
}

}  // namespace condcov
