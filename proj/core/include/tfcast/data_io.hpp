#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <utility>
#include <vector>

#include "tfcast/data.hpp"

namespace tfcast {

/// Shortest decimal text that parses back to exactly `v`.
std::string format_double(double v);
double parse_double_strict(const std::string& text, const std::string& context);

/// Ordered `key = value` pairs; `#` starts a comment line.
class KeyValues {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  bool contains(const std::string& key) const { return get(key).has_value(); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Throws UsageError naming the line for lines without `=` or duplicate keys.
KeyValues read_key_values(std::istream& in);
void write_key_values(std::ostream& out, const KeyValues& kv);

/// `bin_start,total_volume`
void write_series_csv(std::ostream& out, const VolumeSeries& series);
VolumeSeries read_series_csv(std::istream& in);
/// `bin_start` of every zero-filled bin.
void write_gap_report(std::ostream& out, const VolumeSeries& series);

/// Reads the last field of every row, so both a series CSV (with or without
/// its header) and one number per line work. A non-numeric first row is
/// taken as a header.
std::vector<double> read_value_column(std::istream& in);

void put_norm_stats(KeyValues& kv, const NormStats& stats, const std::string& prefix = "norm.");
NormStats get_norm_stats(const KeyValues& kv, const std::string& prefix = "norm.");

/// Window length, split fractions and ranges, and normalization statistics.
KeyValues dataset_manifest(const WindowedDataset& ds, const SplitFractions& fractions);

}  // namespace tfcast
