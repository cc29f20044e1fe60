#include "fedleak/eval/ppc.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <tuple>

#include "fedleak/error.h"

namespace fedleak::eval {

std::string_view to_string(AttackKind kind) {
  switch (kind) {
    case AttackKind::kReconstruction: return "reconstruction";
    case AttackKind::kMembership: return "membership";
    case AttackKind::kTracing: return "tracing";
  }
  return "?";
}

AttackKind parse_attack_kind(std::string_view name) {
  if (name == "reconstruction") return AttackKind::kReconstruction;
  if (name == "membership") return AttackKind::kMembership;
  if (name == "tracing") return AttackKind::kTracing;
  throw ConfigError("unknown attack '" + std::string(name) +
                    "' (expected reconstruction, membership or tracing)");
}

std::string_view to_string(Region region) {
  switch (region) {
    case Region::kGreen: return "green";
    case Region::kWhite: return "white";
    case Region::kRed: return "red";
  }
  return "?";
}

Region parse_region(std::string_view name) {
  if (name == "green") return Region::kGreen;
  if (name == "white") return Region::kWhite;
  if (name == "red") return Region::kRed;
  throw ConfigError("unknown region '" + std::string(name) + "'");
}

void RegionThresholds::validate() const {
  if (!(green > 0.0 && green < red)) {
    throw ConfigError("region thresholds need 0 < green < red");
  }
}

Region classify(double ratio, const RegionThresholds& thresholds) {
  if (ratio <= thresholds.green) return Region::kGreen;
  if (ratio >= thresholds.red) return Region::kRed;
  return Region::kWhite;
}

std::vector<PpcPoint> build_ppc(const std::vector<SweepResult>& sweep,
                                const RegionThresholds& thresholds) {
  thresholds.validate();
  if (sweep.empty()) throw ConfigError("PPC needs at least one sweep point");
  std::vector<PpcPoint> out;
  out.reserve(sweep.size());
  for (const auto& s : sweep) {
    if (!(s.accuracy >= 0.0 && s.accuracy <= 1.0)) throw ConfigError("accuracy outside [0, 1]");
    if (!(s.distance >= 0.0)) throw ConfigError("attack distance must be non-negative");
    if (s.attack != AttackKind::kReconstruction && s.distance > 1.0) {
      throw ConfigError("categorical distances must lie in [0, 1]");
    }
    if (!(s.ratio >= 0.0)) throw ConfigError("perturbation ratio must be non-negative");
    PpcPoint p;
    p.mechanism = s.mechanism;
    p.attack = s.attack;
    p.strength = s.strength;
    p.ratio = s.ratio;
    p.x_axis = std::log10(s.ratio + 1.0);
    p.accuracy = s.accuracy;
    p.distance = s.distance;
    p.region = classify(s.ratio, thresholds);
    p.seed = s.seed;
    p.batch_size = s.batch_size;
    out.push_back(std::move(p));
  }
  return out;
}

void sort_points(std::vector<PpcPoint>& points) {
  std::stable_sort(points.begin(), points.end(), [](const PpcPoint& a, const PpcPoint& b) {
    return std::tie(a.mechanism, a.strength, a.attack, a.seed, a.batch_size) <
           std::tie(b.mechanism, b.strength, b.attack, b.seed, b.batch_size);
  });
}

double cap(const std::vector<PpcPoint>& points) {
  if (points.empty()) throw ConfigError("CAP needs at least one point");
  double sum = 0.0;
  for (const auto& p : points) sum += p.accuracy * p.distance;
  return sum / static_cast<double>(points.size());
}

std::vector<CapScore> cap_by_group(const std::vector<PpcPoint>& points) {
  if (points.empty()) throw ConfigError("CAP needs at least one point");
  std::map<std::tuple<std::string, AttackKind, std::size_t>, std::vector<PpcPoint>> groups;
  for (const auto& p : points) groups[{p.mechanism, p.attack, p.batch_size}].push_back(p);
  std::vector<CapScore> out;
  for (const auto& [key, members] : groups) {
    out.push_back({std::get<0>(key), std::get<1>(key), std::get<2>(key), cap(members),
                   members.size()});
  }
  return out;
}

std::string format_real(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", value);
  return buf;
}

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim_cr(std::string_view s) {
  if (!s.empty() && s.back() == '\r') s.remove_suffix(1);
  return s;
}

[[noreturn]] void bad(std::size_t line, std::string_view column, const std::string& why) {
  throw FormatError("line " + std::to_string(line) + ", column '" + std::string(column) +
                    "': " + why);
}

double parse_real(std::string_view s, std::size_t line, std::string_view column) {
  if (s == "inf") return INFINITY;
  if (s == "-inf") return -INFINITY;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    bad(line, column, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

std::uint64_t parse_uint(std::string_view s, std::size_t line, std::string_view column) {
  std::uint64_t v = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc{} || ptr != s.data() + s.size() || s.empty()) {
    bad(line, column, "not a non-negative integer: '" + std::string(s) + "'");
  }
  return v;
}

void expect_header(std::istream& in, std::string_view header) {
  std::string line;
  if (!std::getline(in, line)) throw FormatError("missing CSV header");
  const auto got = split(trim_cr(line));
  const auto want = split(header);
  for (std::size_t k = 0; k < want.size(); ++k) {
    if (k >= got.size() || got[k] != want[k]) {
      throw FormatError("CSV header: expected column '" + std::string(want[k]) + "' at position " +
                        std::to_string(k + 1));
    }
  }
  if (got.size() != want.size()) throw FormatError("CSV header has extra columns");
}

}  // namespace

void write_ppc_csv(std::ostream& out, const std::vector<PpcPoint>& points) {
  out << kPpcHeader << '\n';
  for (const auto& p : points) {
    out << p.mechanism << ',' << to_string(p.attack) << ',' << format_real(p.strength) << ','
        << format_real(p.ratio) << ',' << format_real(p.x_axis) << ',' << format_real(p.accuracy)
        << ',' << format_real(p.distance) << ',' << to_string(p.region) << ',' << p.seed << ','
        << p.batch_size << '\n';
  }
}

void write_ppc_csv(const std::filesystem::path& path, const std::vector<PpcPoint>& points) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_ppc_csv(out, points);
}

std::vector<PpcPoint> read_ppc_csv(std::istream& in) {
  expect_header(in, kPpcHeader);
  const auto columns = split(kPpcHeader);
  std::vector<PpcPoint> out;
  std::string raw;
  std::size_t line = 1;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim_cr(raw);
    if (text.empty()) continue;
    const auto f = split(text);
    if (f.size() != columns.size()) {
      throw FormatError("line " + std::to_string(line) + ": expected " +
                        std::to_string(columns.size()) + " columns, got " +
                        std::to_string(f.size()));
    }
    PpcPoint p;
    p.mechanism = std::string(f[0]);
    if (p.mechanism.empty()) bad(line, columns[0], "empty");
    try {
      p.attack = parse_attack_kind(f[1]);
    } catch (const ConfigError& e) {
      bad(line, columns[1], e.what());
    }
    p.strength = parse_real(f[2], line, columns[2]);
    p.ratio = parse_real(f[3], line, columns[3]);
    p.x_axis = parse_real(f[4], line, columns[4]);
    p.accuracy = parse_real(f[5], line, columns[5]);
    p.distance = parse_real(f[6], line, columns[6]);
    try {
      p.region = parse_region(f[7]);
    } catch (const ConfigError& e) {
      bad(line, columns[7], e.what());
    }
    p.seed = parse_uint(f[8], line, columns[8]);
    p.batch_size = parse_uint(f[9], line, columns[9]);
    out.push_back(std::move(p));
  }
  return out;
}

std::vector<PpcPoint> read_ppc_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("PPC file not found: " + path.string());
  try {
    return read_ppc_csv(in);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

void write_cap_csv(std::ostream& out, const std::vector<CapScore>& scores) {
  out << kCapHeader << '\n';
  for (const auto& s : scores) {
    out << s.mechanism << ',' << to_string(s.attack) << ',' << s.batch_size << ','
        << format_real(s.value) << ',' << s.n_points << '\n';
  }
}

void write_cap_csv(const std::filesystem::path& path, const std::vector<CapScore>& scores) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  write_cap_csv(out, scores);
}

std::vector<CapScore> read_cap_csv(std::istream& in) {
  expect_header(in, kCapHeader);
  const auto columns = split(kCapHeader);
  std::vector<CapScore> out;
  std::string raw;
  std::size_t line = 1;
  while (std::getline(in, raw)) {
    ++line;
    const std::string_view text = trim_cr(raw);
    if (text.empty()) continue;
    const auto f = split(text);
    if (f.size() != columns.size()) {
      throw FormatError("line " + std::to_string(line) + ": expected " +
                        std::to_string(columns.size()) + " columns");
    }
    CapScore s;
    s.mechanism = std::string(f[0]);
    try {
      s.attack = parse_attack_kind(f[1]);
    } catch (const ConfigError& e) {
      bad(line, columns[1], e.what());
    }
    s.batch_size = parse_uint(f[2], line, columns[2]);
    s.value = parse_real(f[3], line, columns[3]);
    s.n_points = parse_uint(f[4], line, columns[4]);
    out.push_back(std::move(s));
  }
  return out;
}

}  // namespace fedleak::eval
