#pragma once

#include <cstddef>
#include <cstdint>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "tfcast/timestamp.hpp"

namespace tfcast {

// ---------------------------------------------------------------------------
// Raw traffic counts

/// Header names of the raw CSV fields; override to ingest exports with
/// different column labels.
struct ColumnMap {
  std::string intersection_id = "intersection_id";
  std::string timestamp = "timestamp";
  std::string direction = "direction";
  std::string vehicle_class = "vehicle_class";
  std::string volume = "volume";
};

/// Parses `field=header,field=header,...`, e.g. `timestamp=time_bin,volume=count`.
ColumnMap parse_column_map(const std::string& spec);

struct RawRecord {
  std::string intersection_id;
  Timestamp timestamp;
  std::string direction;
  std::string vehicle_class;
  double volume = 0.0;
  /// 1-based line number in the source file (the header is line 1).
  std::size_t row = 0;
};

/// Splits one CSV line, honoring double-quoted fields and `""` escapes.
std::vector<std::string> split_csv_line(std::string_view line);

/// Throws UsageError on an empty source, SchemaError on a missing column and
/// RowError (with the line number) on a malformed or negative row.
std::vector<RawRecord> parse_raw(std::istream& csv, const ColumnMap& columns = {});

// ---------------------------------------------------------------------------
// Aggregated series

struct VolumeSeries {
  std::string intersection_id;
  int bin_minutes = 15;
  std::vector<Timestamp> bin_start;  // strictly increasing, uniform spacing
  std::vector<double> volume;        // total over directions and vehicle classes
  std::vector<bool> gap;             // true for zero-filled bins with no records

  std::size_t size() const { return volume.size(); }
  std::size_t gap_count() const;
};

struct AggregateOptions {
  int bin_minutes = 15;
  /// Required when the records span more than one intersection.
  std::optional<std::string> intersection;
};

/// Sums volumes per bin; interior bins without any record are zero-filled
/// and flagged as gaps. Throws UsageError for mixed intersections without a
/// filter and DataError when the filter matches nothing.
VolumeSeries aggregate(std::span<const RawRecord> records, const AggregateOptions& options = {});

std::vector<Timestamp> gap_report(const VolumeSeries& series);

// ---------------------------------------------------------------------------
// Synthetic traffic-like series

struct SyntheticSeriesOptions {
  std::size_t length = 5000;
  std::size_t period = 96;  // one day of 15-minute bins
  double level = 200.0;
  double amplitude = 100.0;
  double ar_coefficient = 0.8;
  double noise_stddev = 20.0;  // innovation standard deviation of the AR(1) term
  std::uint64_t seed = 0;
};

/// level + amplitude·sin(2πt/period) + e_t with e_t = φ·e_{t-1} + N(0, σ²).
std::vector<double> synthetic_series(const SyntheticSeriesOptions& options);

// ---------------------------------------------------------------------------
// Windowed dataset

enum class NormScheme { zscore, minmax };
enum class FitScope { train_only, whole_dataset };

std::string to_string(NormScheme scheme);
std::string to_string(FitScope scope);
NormScheme parse_norm_scheme(const std::string& text);
FitScope parse_fit_scope(const std::string& text);

/// v ↦ (v − center) / scale.
struct NormStats {
  double center = 0.0;
  double scale = 1.0;
  NormScheme scheme = NormScheme::zscore;
  FitScope scope = FitScope::train_only;
  /// Half-open range of series indices read while fitting.
  std::size_t fit_begin = 0;
  std::size_t fit_end = 0;

  double apply(double v) const { return (v - center) / scale; }
  double invert(double v) const { return v * scale + center; }

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

/// Fits center/scale on `values`. zscore uses the population standard
/// deviation; minmax maps [min, max] onto [0, 1]. Throws NumericError when
/// the values are constant.
NormStats fit_norm_stats(std::span<const double> values, NormScheme scheme);

std::vector<double> denormalize(std::span<const double> values, const NormStats& stats);

struct IndexRange {
  std::size_t begin = 0;
  std::size_t end = 0;

  std::size_t size() const { return end - begin; }
  bool empty() const { return end == begin; }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

struct SplitFractions {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct Splits {
  IndexRange train;
  IndexRange validation;
  IndexRange test;
};

enum class SplitPart { train, validation, test };
std::string to_string(SplitPart part);
SplitPart parse_split_part(const std::string& text);

/// Stride-1 rolling windows over a univariate series: sample k is
/// series[k .. k + window_len) and its label is series[k + window_len].
/// Windows are views into the stored series, so window/label alignment holds
/// by construction.
class WindowedDataset {
 public:
  std::size_t window_len() const { return window_len_; }
  std::size_t sample_count() const { return series_.size() - window_len_; }
  std::span<const double> series() const { return series_; }
  std::span<const double> window(std::size_t k) const;
  double label(std::size_t k) const;

  bool is_split() const { return splits_.has_value(); }
  const Splits& splits() const;
  IndexRange range(SplitPart part) const;

  bool is_normalized() const { return norm_.has_value(); }
  const NormStats& norm() const;

 private:
  friend WindowedDataset build_windows(std::span<const double> series, std::size_t window_len);
  friend WindowedDataset split(WindowedDataset ds, const SplitFractions& fractions);
  friend WindowedDataset normalize(WindowedDataset ds, NormScheme scheme, FitScope scope);
  friend WindowedDataset normalize_with(WindowedDataset ds, const NormStats& stats);

  std::vector<double> series_;
  std::size_t window_len_ = 0;
  std::optional<Splits> splits_;
  std::optional<NormStats> norm_;
};

/// Throws UsageError when the series is shorter than window_len + 1.
WindowedDataset build_windows(std::span<const double> series, std::size_t window_len = 12);

/// Chronological contiguous split. Sizes are floor(n · fraction) for train
/// and validation; test takes the remainder. Every part must be non-empty.
WindowedDataset split(WindowedDataset ds, const SplitFractions& fractions);

/// Fits statistics on the requested scope and transforms the whole series.
/// train_only requires a split dataset and reads only series indices
/// [0, train.end + window_len), i.e. the training windows and labels.
WindowedDataset normalize(WindowedDataset ds, NormScheme scheme, FitScope scope);

/// Applies previously fitted statistics (e.g. from a checkpoint).
WindowedDataset normalize_with(WindowedDataset ds, const NormStats& stats);

}  // namespace tfcast
