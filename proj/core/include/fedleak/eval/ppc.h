#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fedleak::eval {

enum class AttackKind { kReconstruction, kMembership, kTracing };
enum class Region { kGreen, kWhite, kRed };

std::string_view to_string(AttackKind kind);
AttackKind parse_attack_kind(std::string_view name);
std::string_view to_string(Region region);
Region parse_region(std::string_view name);

// Green when ratio <= green, Red when ratio >= red, White otherwise.
struct RegionThresholds {
  double green = 1.0;
  double red = 10.0;

  void validate() const;
};

Region classify(double ratio, const RegionThresholds& thresholds = {});

// One row of a privacy-preserving characteristic.
struct PpcPoint {
  std::string mechanism;
  AttackKind attack = AttackKind::kReconstruction;
  double strength = 0.0;
  double ratio = 0.0;   // ||B_I|| / ||E_B||, may be +inf
  double x_axis = 0.0;  // log10(ratio + 1)
  double accuracy = 0.0;
  double distance = 0.0;
  Region region = Region::kRed;
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;

  bool operator==(const PpcPoint&) const = default;
};

// The measured outcome of one sweep point for one attack.
struct SweepResult {
  std::string mechanism;
  double strength = 0.0;
  std::uint64_t seed = 0;
  std::size_t batch_size = 1;
  double ratio = 0.0;
  double accuracy = 0.0;
  AttackKind attack = AttackKind::kReconstruction;
  double distance = 0.0;
};

// Fills x_axis and region. Throws ConfigError on an empty sweep, accuracy
// outside [0, 1], a negative distance, or a categorical distance above 1.
std::vector<PpcPoint> build_ppc(const std::vector<SweepResult>& sweep,
                                const RegionThresholds& thresholds = {});

// Sorted by mechanism, strength, attack, seed, then batch size.
void sort_points(std::vector<PpcPoint>& points);

struct CapScore {
  std::string mechanism;
  AttackKind attack = AttackKind::kReconstruction;
  std::size_t batch_size = 1;
  double value = 0.0;
  std::size_t n_points = 0;
};

// Mean of accuracy * distance. Throws ConfigError when empty.
double cap(const std::vector<PpcPoint>& points);
// One score per (mechanism, attack, batch size), in that sort order.
std::vector<CapScore> cap_by_group(const std::vector<PpcPoint>& points);

inline constexpr std::string_view kPpcHeader =
    "mechanism,attack,strength,ratio,x_axis,accuracy,distance,region,seed,batch_size";
inline constexpr std::string_view kCapHeader = "mechanism,attack,batch_size,cap,n_points";

// Reals with 6 significant digits; infinity as "inf".
std::string format_real(double value);

void write_ppc_csv(std::ostream& out, const std::vector<PpcPoint>& points);
void write_ppc_csv(const std::filesystem::path& path, const std::vector<PpcPoint>& points);
// Throws FormatError naming the line and column on schema violations.
std::vector<PpcPoint> read_ppc_csv(std::istream& in);
std::vector<PpcPoint> read_ppc_csv(const std::filesystem::path& path);

void write_cap_csv(std::ostream& out, const std::vector<CapScore>& scores);
void write_cap_csv(const std::filesystem::path& path, const std::vector<CapScore>& scores);
std::vector<CapScore> read_cap_csv(std::istream& in);

}  // namespace fedleak::eval
