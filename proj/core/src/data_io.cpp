#include "tfcast/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "tfcast/errors.hpp"

namespace tfcast {
namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::optional<double> try_parse(const std::string& text) {
  const std::string t = trim(text);
  if (t.empty()) return std::nullopt;
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (ec != std::errc() || ptr != t.data() + t.size()) return std::nullopt;
  return v;
}

std::size_t parse_size(const std::string& text, const std::string& context) {
  const std::string t = trim(text);
  std::size_t v = 0;
  auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || ec != std::errc() || ptr != t.data() + t.size()) {
    throw DataError(context + ": expected a non-negative integer, got '" + text + "'");
  }
  return v;
}

}  // namespace

std::string format_double(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

double parse_double_strict(const std::string& text, const std::string& context) {
  const auto v = try_parse(text);
  if (!v) throw DataError(context + ": expected a number, got '" + text + "'");
  return *v;
}

void KeyValues::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

std::optional<std::string> KeyValues::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string KeyValues::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw DataError("missing key '" + key + "'");
  return *v;
}

KeyValues read_key_values(std::istream& in) {
  KeyValues kv;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t.front() == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw UsageError("line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = trim(t.substr(0, eq));
    if (key.empty()) throw UsageError("line " + std::to_string(line_no) + ": empty key");
    if (kv.contains(key)) {
      throw UsageError("line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    }
    kv.set(key, trim(t.substr(eq + 1)));
  }
  return kv;
}

void write_key_values(std::ostream& out, const KeyValues& kv) {
  for (const auto& [k, v] : kv.entries()) out << k << " = " << v << '\n';
}

// ---------------------------------------------------------------------------

void write_series_csv(std::ostream& out, const VolumeSeries& series) {
  out << "bin_start,total_volume\n";
  for (std::size_t k = 0; k < series.size(); ++k)
    out << format_timestamp(series.bin_start[k]) << ',' << format_double(series.volume[k]) << '\n';
}

VolumeSeries read_series_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw UsageError("series CSV is empty");
  const auto header = split_csv_line(line);
  if (header.size() < 2 || header[0] != "bin_start" || header[1] != "total_volume") {
    throw SchemaError("series CSV must start with header bin_start,total_volume");
  }
  VolumeSeries series;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    if (fields.size() < 2) throw RowError(row, "expected bin_start,total_volume");
    const auto ts = parse_timestamp(fields[0]);
    if (!ts) throw RowError(row, "unparseable timestamp '" + fields[0] + "'");
    const auto v = try_parse(fields[1]);
    if (!v || !std::isfinite(*v)) throw RowError(row, "unparseable volume '" + fields[1] + "'");
    if (*v < 0.0) throw RowError(row, "negative volume " + fields[1]);
    if (!series.bin_start.empty()) {
      const auto spacing = (*ts - series.bin_start.back()).count();
      if (series.bin_start.size() == 1) {
        if (spacing <= 0) throw RowError(row, "bin_start not strictly increasing");
        series.bin_minutes = static_cast<int>(spacing);
      } else if (spacing != series.bin_minutes) {
        throw RowError(row, "non-uniform bin spacing");
      }
    }
    series.bin_start.push_back(*ts);
    series.volume.push_back(*v);
    series.gap.push_back(false);
  }
  return series;
}

void write_gap_report(std::ostream& out, const VolumeSeries& series) {
  out << "bin_start\n";
  for (Timestamp t : gap_report(series)) out << format_timestamp(t) << '\n';
}

std::vector<double> read_value_column(std::istream& in) {
  std::vector<double> values;
  std::string line;
  std::size_t row = 0;
  bool first = true;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty()) continue;
    const auto fields = split_csv_line(line);
    const std::string& cell = fields.back();
    const auto v = try_parse(cell);
    if (first) {
      first = false;
      if (!v) continue;  // header row
    }
    if (!v || !std::isfinite(*v)) throw RowError(row, "unparseable value '" + cell + "'");
    values.push_back(*v);
  }
  return values;
}

// ---------------------------------------------------------------------------

void put_norm_stats(KeyValues& kv, const NormStats& stats, const std::string& prefix) {
  kv.set(prefix + "scheme", to_string(stats.scheme));
  kv.set(prefix + "scope", to_string(stats.scope));
  kv.set(prefix + "center", stats.center);
  kv.set(prefix + "scale", stats.scale);
  kv.set(prefix + "fit_begin", std::to_string(stats.fit_begin));
  kv.set(prefix + "fit_end", std::to_string(stats.fit_end));
}

NormStats get_norm_stats(const KeyValues& kv, const std::string& prefix) {
  NormStats stats;
  stats.scheme = parse_norm_scheme(kv.require(prefix + "scheme"));
  stats.scope = parse_fit_scope(kv.require(prefix + "scope"));
  stats.center = parse_double_strict(kv.require(prefix + "center"), prefix + "center");
  stats.scale = parse_double_strict(kv.require(prefix + "scale"), prefix + "scale");
  stats.fit_begin = parse_size(kv.require(prefix + "fit_begin"), prefix + "fit_begin");
  stats.fit_end = parse_size(kv.require(prefix + "fit_end"), prefix + "fit_end");
  return stats;
}

KeyValues dataset_manifest(const WindowedDataset& ds, const SplitFractions& fractions) {
  KeyValues kv;
  kv.set("window_len", std::to_string(ds.window_len()));
  kv.set("series_length", std::to_string(ds.series().size()));
  kv.set("samples", std::to_string(ds.sample_count()));
  kv.set("split_fractions", format_double(fractions.train) + "," +
                                format_double(fractions.validation) + "," +
                                format_double(fractions.test));
  if (ds.is_split()) {
    const auto& s = ds.splits();
    auto range = [](IndexRange r) {
      return std::to_string(r.begin) + ".." + std::to_string(r.end);
    };
    kv.set("split.train", range(s.train));
    kv.set("split.val", range(s.validation));
    kv.set("split.test", range(s.test));
  }
  if (ds.is_normalized()) put_norm_stats(kv, ds.norm());
  return kv;
}

}  // namespace tfcast
