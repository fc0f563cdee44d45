#pragma once

#include <algorithm>
#include <cmath>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "provlens/dataset.hpp"

namespace provlens {

struct ProfileBin {
  std::string label;  // category, or "[lo, hi]" for quartile bins
  double lo = 0.0;    // quartile bins only
  double hi = 0.0;
  std::size_t count = 0;
  double pct = 0.0;   // share of non-null values, in percent
};

// Distribution summary behind the expandable attribute view.
struct AttributeProfile {
  std::string attribute;
  AttributeKind kind = AttributeKind::categorical;
  std::vector<double> quartiles;  // min, q1, median, q3, max (numerical only)
  std::vector<ProfileBin> bins;
  double null_pct = 0.0;
};

// Sample quantile of sorted values with linear interpolation between closest
// ranks, position p * (n - 1).
inline double quantile_sorted(const std::vector<double>& sorted, double p) {
  if (sorted.empty()) return 0.0;
  const double pos = p * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(lo + 1, sorted.size() - 1);
  const double frac = pos - static_cast<double>(lo);
  return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

namespace detail {
inline std::string format_bound(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}
}  // namespace detail

// Numerical: four bins split at the quartile boundaries; the first bin is
// closed [q0, q1], the rest half-open (lo, hi]. Categorical: one bin per
// category ordered by descending count then name. Nulls never enter bins.
inline AttributeProfile attribute_profile(const Dataset& dataset, std::string_view name) {
  const auto idx = dataset.attribute_index(name);
  if (!idx) throw Error(ErrorCode::unknown_entity, "unknown attribute '" + std::string(name) + "'");
  const auto& desc = dataset.attributes()[*idx];

  AttributeProfile profile{desc.name, desc.kind, {}, {}, 0.0};
  const auto total = dataset.records().size();
  std::size_t nulls = 0;

  if (desc.kind == AttributeKind::numerical) {
    std::vector<double> values;
    for (std::size_t r = 0; r < total; ++r) {
      if (auto v = dataset.number(r, *idx)) {
        values.push_back(*v);
      } else {
        ++nulls;
      }
    }
    profile.null_pct = 100.0 * static_cast<double>(nulls) / static_cast<double>(total);
    if (values.empty()) return profile;
    std::sort(values.begin(), values.end());
    for (double p : {0.0, 0.25, 0.5, 0.75, 1.0}) profile.quartiles.push_back(quantile_sorted(values, p));

    for (int b = 0; b < 4; ++b) {
      const double lo = profile.quartiles[b];
      const double hi = profile.quartiles[b + 1];
      ProfileBin bin;
      bin.lo = lo;
      bin.hi = hi;
      bin.label = (b == 0 ? "[" : "(") + detail::format_bound(lo) + ", " + detail::format_bound(hi) + "]";
      for (double v : values) {
        const bool above = b == 0 ? v >= lo : v > lo;
        if (above && v <= hi) ++bin.count;
      }
      bin.pct = 100.0 * static_cast<double>(bin.count) / static_cast<double>(values.size());
      profile.bins.push_back(std::move(bin));
    }
    return profile;
  }

  std::map<std::string, std::size_t> counts;
  std::size_t non_null = 0;
  for (const auto& rec : dataset.records()) {
    const auto& cell = rec.values[*idx];
    if (!cell) {
      ++nulls;
      continue;
    }
    ++counts[*cell];
    ++non_null;
  }
  profile.null_pct = 100.0 * static_cast<double>(nulls) / static_cast<double>(total);
  for (const auto& [category, count] : counts) {
    ProfileBin bin;
    bin.label = category;
    bin.count = count;
    bin.pct = 100.0 * static_cast<double>(count) / static_cast<double>(non_null);
    profile.bins.push_back(std::move(bin));
  }
  std::stable_sort(profile.bins.begin(), profile.bins.end(),
                   [](const ProfileBin& a, const ProfileBin& b) { return a.count > b.count; });
  return profile;
}

inline json to_json(const AttributeProfile& profile) {
  json bins = json::array();
  for (const auto& b : profile.bins) {
    json j = {{"label", b.label}, {"count", b.count}, {"pct", b.pct}};
    if (profile.kind == AttributeKind::numerical) {
      j["lo"] = b.lo;
      j["hi"] = b.hi;
    }
    bins.push_back(std::move(j));
  }
  json j = {{"attribute", profile.attribute},
            {"kind", to_string(profile.kind)},
            {"bins", std::move(bins)},
            {"null_pct", profile.null_pct}};
  if (profile.kind == AttributeKind::numerical) j["quartiles"] = profile.quartiles;
  return j;
}

}  // namespace provlens
