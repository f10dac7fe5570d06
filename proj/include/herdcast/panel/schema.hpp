#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <vector>

#include "herdcast/core/error.hpp"

namespace herdcast::panel {

enum class Orientation { beneficial, detrimental };

inline const char* to_string(Orientation o) { return o == Orientation::beneficial ? "beneficial" : "detrimental"; }

inline Orientation orientation_from_string(const std::string& s) {
  if (s == "beneficial") return Orientation::beneficial;
  if (s == "detrimental") return Orientation::detrimental;
  throw ValidationError("unknown orientation '" + s + "'");
}

struct FeatureSpec {
  std::string name;
  Orientation orientation = Orientation::beneficial;
  // Typical level and spread in raw units; used by the synthetic fixture.
  double center = 50.0;
  double spread = 10.0;

  bool is_percentage() const { return name.size() >= 3 && name.compare(name.size() - 3, 3, "(%)") == 0; }
};

struct Schema {
  std::vector<FeatureSpec> features;

  std::size_t size() const { return features.size(); }

  std::vector<std::string> names() const {
    std::vector<std::string> out;
    for (const auto& f : features) out.push_back(f.name);
    return out;
  }

  std::vector<Orientation> orientations() const {
    std::vector<Orientation> out;
    for (const auto& f : features) out.push_back(f.orientation);
    return out;
  }

  std::optional<std::size_t> index_of(const std::string& name) const {
    for (std::size_t i = 0; i < features.size(); ++i)
      if (features[i].name == name) return i;
    return std::nullopt;
  }

  void set_orientation(const std::string& name, Orientation o) {
    const auto i = index_of(name);
    if (!i) throw ValidationError("orientation override for unknown feature '" + name + "'");
    features[*i].orientation = o;
  }

  // The 16 herd indicators used for modelling. Calving interval, replacement,
  // culling, mortality and non-calved females are higher-is-worse.
  static Schema default_icbf() {
    using O = Orientation;
    return Schema{{
        {"Calving Interval (days)", O::detrimental, 392.0, 12.0},
        {"6 Week Calving Rate (%)", O::beneficial, 62.0, 12.0},
        {"6 Week Calving Rate Seasonal (%)", O::beneficial, 68.0, 12.0},
        {"Calves per Cow per Year", O::beneficial, 0.88, 0.06},
        {"Average Lactations", O::beneficial, 3.6, 0.4},
        {"Current Replacement Rate (%)", O::detrimental, 21.0, 5.0},
        {"Potential Replacement Rate (%)", O::detrimental, 27.0, 5.0},
        {"Cows Culled in Period (%)", O::detrimental, 17.0, 5.0},
        {"Heifers calved 22-26 mths of age (%)", O::beneficial, 72.0, 12.0},
        {"Mortality - Dead at Birth (%)", O::detrimental, 3.0, 1.0},
        {"Mortality - Dead at 28 Days (%)", O::detrimental, 2.2, 0.8},
        {"Replacements bred to Dairy AI (%)", O::beneficial, 60.0, 15.0},
        {"Births with a known sire (%)", O::beneficial, 80.0, 10.0},
        {"Births with calving survey data (%)", O::beneficial, 55.0, 15.0},
        {"Recycled Cows (%)", O::beneficial, 6.0, 2.0},
        {"Females not Calved in Period (%)", O::detrimental, 9.0, 3.0},
    }};
  }
};

// Republic of Ireland counties, alphabetical.
inline const std::vector<std::string>& irish_counties() {
  static const std::vector<std::string> names = {
      "Carlow",   "Cavan",    "Clare",     "Cork",      "Donegal",   "Dublin", "Galway",
      "Kerry",    "Kildare",  "Kilkenny",  "Laois",     "Leitrim",   "Limerick", "Longford",
      "Louth",    "Mayo",     "Meath",     "Monaghan",  "Offaly",    "Roscommon", "Sligo",
      "Tipperary", "Waterford", "Westmeath", "Wexford", "Wicklow"};
  return names;
}

}  // namespace herdcast::panel
