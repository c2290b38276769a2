#include "tfcast/data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <numbers>
#include <set>

#include "tfcast/errors.hpp"
#include "tfcast/random.hpp"

namespace tfcast {
namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size() || !std::isfinite(v)) {
    return std::nullopt;
  }
  return v;
}

}  // namespace

ColumnMap parse_column_map(const std::string& spec) {
  ColumnMap map;
  std::string_view rest = spec;
  while (!rest.empty()) {
    const auto comma = rest.find(',');
    const std::string_view item = trim(rest.substr(0, comma));
    rest = comma == std::string_view::npos ? std::string_view{} : rest.substr(comma + 1);
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string_view::npos) {
      throw UsageError("column mapping '" + std::string(item) + "' is not field=header");
    }
    const std::string field(trim(item.substr(0, eq)));
    const std::string header(trim(item.substr(eq + 1)));
    if (field == "intersection_id") map.intersection_id = header;
    else if (field == "timestamp") map.timestamp = header;
    else if (field == "direction") map.direction = header;
    else if (field == "vehicle_class") map.vehicle_class = header;
    else if (field == "volume") map.volume = header;
    else throw UsageError("unknown column field '" + field + "'");
  }
  return map;
}

std::vector<std::string> split_csv_line(std::string_view line) {
  std::vector<std::string> fields;
  std::string current;
  bool quoted = false;
  for (std::size_t k = 0; k < line.size(); ++k) {
    const char ch = line[k];
    if (quoted) {
      if (ch == '"') {
        if (k + 1 < line.size() && line[k + 1] == '"') {
          current.push_back('"');
          ++k;
        } else {
          quoted = false;
        }
      } else {
        current.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::string(trim(current)));
      current.clear();
    } else if (ch != '\r' && ch != '\n') {
      current.push_back(ch);
    }
  }
  fields.push_back(std::string(trim(current)));
  return fields;
}

std::vector<RawRecord> parse_raw(std::istream& csv, const ColumnMap& columns) {
  std::string line;
  if (!std::getline(csv, line)) throw UsageError("raw CSV is empty (no header row)");
  // Strip a UTF-8 byte order mark.
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const auto header = split_csv_line(line);

  auto locate = [&](const std::string& name, std::vector<std::string>& missing) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      missing.push_back(name);
      return std::size_t{0};
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  std::vector<std::string> missing;
  const std::size_t c_id = locate(columns.intersection_id, missing);
  const std::size_t c_ts = locate(columns.timestamp, missing);
  const std::size_t c_dir = locate(columns.direction, missing);
  const std::size_t c_cls = locate(columns.vehicle_class, missing);
  const std::size_t c_vol = locate(columns.volume, missing);
  if (!missing.empty()) {
    std::string msg = "missing column";
    msg += missing.size() > 1 ? "s: " : ": ";
    for (std::size_t k = 0; k < missing.size(); ++k) msg += (k ? ", " : "") + missing[k];
    throw SchemaError(msg);
  }
  const std::size_t needed = std::max({c_id, c_ts, c_dir, c_cls, c_vol}) + 1;

  std::vector<RawRecord> records;
  std::size_t row = 1;
  while (std::getline(csv, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < needed) {
      throw RowError(row, "expected at least " + std::to_string(needed) + " fields, found " +
                              std::to_string(fields.size()));
    }
    RawRecord rec;
    rec.row = row;
    rec.intersection_id = fields[c_id];
    if (rec.intersection_id.empty()) throw RowError(row, "empty intersection id");
    const auto ts = parse_timestamp(fields[c_ts]);
    if (!ts) throw RowError(row, "unparseable timestamp '" + fields[c_ts] + "'");
    rec.timestamp = *ts;
    rec.direction = fields[c_dir];
    rec.vehicle_class = fields[c_cls];
    const auto volume = parse_double(fields[c_vol]);
    if (!volume) throw RowError(row, "unparseable volume '" + fields[c_vol] + "'");
    if (*volume < 0.0) throw RowError(row, "negative volume " + fields[c_vol]);
    rec.volume = *volume;
    records.push_back(std::move(rec));
  }
  return records;
}

// ---------------------------------------------------------------------------

std::size_t VolumeSeries::gap_count() const {
  return static_cast<std::size_t>(std::count(gap.begin(), gap.end(), true));
}

VolumeSeries aggregate(std::span<const RawRecord> records, const AggregateOptions& options) {
  if (options.bin_minutes < 1 || 1440 % options.bin_minutes != 0) {
    throw UsageError("bin length must divide a day evenly, got " +
                     std::to_string(options.bin_minutes) + " minutes");
  }
  std::string id;
  if (options.intersection) {
    id = *options.intersection;
  } else {
    std::set<std::string> ids;
    for (const auto& r : records) ids.insert(r.intersection_id);
    if (ids.empty()) throw UsageError("no records to aggregate");
    if (ids.size() > 1) {
      std::string msg = "records span " + std::to_string(ids.size()) +
                        " intersections; select one with an intersection filter (";
      std::size_t shown = 0;
      for (const auto& s : ids) {
        if (shown == 5) {
          msg += ", ...";
          break;
        }
        msg += (shown++ ? ", " : "") + s;
      }
      throw UsageError(msg + ")");
    }
    id = *ids.begin();
  }

  // Per-bin contributions are summed in sorted order so the totals do not
  // depend on record order.
  std::map<Timestamp, std::vector<double>> bins;
  for (const auto& r : records) {
    if (r.intersection_id != id) continue;
    bins[floor_to_bin(r.timestamp, options.bin_minutes)].push_back(r.volume);
  }
  if (bins.empty()) throw DataError("no records matched intersection '" + id + "'");

  VolumeSeries series;
  series.intersection_id = id;
  series.bin_minutes = options.bin_minutes;
  const std::chrono::minutes step{options.bin_minutes};
  const Timestamp last = bins.rbegin()->first;
  for (Timestamp t = bins.begin()->first; t <= last; t += step) {
    series.bin_start.push_back(t);
    const auto it = bins.find(t);
    if (it == bins.end()) {
      series.volume.push_back(0.0);
      series.gap.push_back(true);
      continue;
    }
    auto& contributions = it->second;
    std::sort(contributions.begin(), contributions.end());
    double total = 0.0;
    for (double v : contributions) total += v;
    series.volume.push_back(total);
    series.gap.push_back(false);
  }
  return series;
}

std::vector<Timestamp> gap_report(const VolumeSeries& series) {
  std::vector<Timestamp> out;
  for (std::size_t k = 0; k < series.size(); ++k)
    if (series.gap[k]) out.push_back(series.bin_start[k]);
  return out;
}

// ---------------------------------------------------------------------------

std::vector<double> synthetic_series(const SyntheticSeriesOptions& o) {
  if (o.period == 0) throw UsageError("synthetic series period must be at least 1");
  Rng rng(o.seed);
  std::vector<double> out;
  out.reserve(o.length);
  double noise = 0.0;
  for (std::size_t t = 0; t < o.length; ++t) {
    noise = o.ar_coefficient * noise + o.noise_stddev * rng.normal();
    const double phase = 2.0 * std::numbers::pi * static_cast<double>(t % o.period) /
                         static_cast<double>(o.period);
    out.push_back(o.level + o.amplitude * std::sin(phase) + noise);
  }
  return out;
}

// ---------------------------------------------------------------------------

std::string to_string(NormScheme scheme) {
  return scheme == NormScheme::zscore ? "zscore" : "minmax";
}

std::string to_string(FitScope scope) {
  return scope == FitScope::train_only ? "train_only" : "whole_dataset";
}

NormScheme parse_norm_scheme(const std::string& text) {
  if (text == "zscore") return NormScheme::zscore;
  if (text == "minmax") return NormScheme::minmax;
  throw UsageError("unknown normalization scheme '" + text + "' (expected zscore or minmax)");
}

FitScope parse_fit_scope(const std::string& text) {
  if (text == "train_only") return FitScope::train_only;
  if (text == "whole_dataset") return FitScope::whole_dataset;
  throw UsageError("unknown fit scope '" + text + "' (expected train_only or whole_dataset)");
}

std::string to_string(SplitPart part) {
  switch (part) {
    case SplitPart::train: return "train";
    case SplitPart::validation: return "val";
    case SplitPart::test: return "test";
  }
  return "unknown";
}

SplitPart parse_split_part(const std::string& text) {
  if (text == "train") return SplitPart::train;
  if (text == "val" || text == "validation") return SplitPart::validation;
  if (text == "test") return SplitPart::test;
  throw UsageError("unknown split '" + text + "' (expected train, val or test)");
}

NormStats fit_norm_stats(std::span<const double> values, NormScheme scheme) {
  if (values.empty()) throw UsageError("cannot fit normalization on no values");
  NormStats stats;
  stats.scheme = scheme;
  if (scheme == NormScheme::zscore) {
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    var /= static_cast<double>(values.size());
    stats.center = mean;
    stats.scale = std::sqrt(var);
  } else {
    const auto [lo, hi] = std::minmax_element(values.begin(), values.end());
    stats.center = *lo;
    stats.scale = *hi - *lo;
  }
  if (!(stats.scale > 0.0) || !std::isfinite(stats.scale)) {
    throw NumericError("normalization scale is zero: fit data is constant");
  }
  return stats;
}

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats) {
  std::vector<double> out(values.size());
  std::transform(values.begin(), values.end(), out.begin(),
                 [&](double v) { return stats.invert(v); });
  return out;
}

// ---------------------------------------------------------------------------

std::span<const double> WindowedDataset::window(std::size_t k) const {
  if (k >= sample_count()) throw UsageError("sample index " + std::to_string(k) + " out of range");
  return std::span<const double>(series_).subspan(k, window_len_);
}

double WindowedDataset::label(std::size_t k) const {
  if (k >= sample_count()) throw UsageError("sample index " + std::to_string(k) + " out of range");
  return series_[k + window_len_];
}

const Splits& WindowedDataset::splits() const {
  if (!splits_) throw StateError("dataset has not been split");
  return *splits_;
}

IndexRange WindowedDataset::range(SplitPart part) const {
  const Splits& s = splits();
  switch (part) {
    case SplitPart::train: return s.train;
    case SplitPart::validation: return s.validation;
    case SplitPart::test: return s.test;
  }
  return {};
}

const NormStats& WindowedDataset::norm() const {
  if (!norm_) throw StateError("dataset has not been normalized");
  return *norm_;
}

WindowedDataset build_windows(std::span<const double> series, std::size_t window_len) {
  if (window_len == 0) throw UsageError("window length must be at least 1");
  if (series.size() < window_len + 1) {
    throw UsageError("series of length " + std::to_string(series.size()) +
                     " is too short: need at least " + std::to_string(window_len + 1) +
                     " bins for window length " + std::to_string(window_len));
  }
  WindowedDataset ds;
  ds.series_.assign(series.begin(), series.end());
  ds.window_len_ = window_len;
  return ds;
}

WindowedDataset split(WindowedDataset ds, const SplitFractions& f) {
  if (!(f.train > 0.0 && f.validation > 0.0 && f.test > 0.0)) {
    throw UsageError("split fractions must all be positive (every split must be non-empty)");
  }
  if (std::abs(f.train + f.validation + f.test - 1.0) > 1e-9) {
    throw UsageError("split fractions must sum to 1");
  }
  const std::size_t n = ds.sample_count();
  const auto n_train = static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.train + 1e-9));
  const auto n_val =
      static_cast<std::size_t>(std::floor(static_cast<double>(n) * f.validation + 1e-9));
  if (n_train == 0 || n_val == 0 || n_train + n_val >= n) {
    throw UsageError("split of " + std::to_string(n) + " samples would leave a part empty");
  }
  ds.splits_ = Splits{{0, n_train}, {n_train, n_train + n_val}, {n_train + n_val, n}};
  return ds;
}

WindowedDataset normalize(WindowedDataset ds, NormScheme scheme, FitScope scope) {
  if (ds.norm_) throw StateError("dataset is already normalized");
  std::size_t fit_end = ds.series_.size();
  if (scope == FitScope::train_only) {
    if (!ds.splits_) throw UsageError("train_only normalization requires a split dataset");
    fit_end = ds.splits_->train.end + ds.window_len_;
  }
  NormStats stats =
      fit_norm_stats(std::span<const double>(ds.series_).first(fit_end), scheme);
  stats.scope = scope;
  stats.fit_begin = 0;
  stats.fit_end = fit_end;
  return normalize_with(std::move(ds), stats);
}

WindowedDataset normalize_with(WindowedDataset ds, const NormStats& stats) {
  if (ds.norm_) throw StateError("dataset is already normalized");
  if (!(stats.scale > 0.0)) throw NumericError("normalization scale must be positive");
  for (double& v : ds.series_) v = stats.apply(v);
  ds.norm_ = stats;
  return ds;
}

}  // namespace tfcast
