#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "emoe/io_util.hpp"
#include "emoe/kmeans.hpp"
#include "emoe/scenario.hpp"

namespace emoe {

inline constexpr int kAnchorBankVersion = 1;

/// Per-scenario trajectory-endpoint centroids, 7 x K x 2.
struct AnchorBank {
  std::size_t k = 0;
  std::uint64_t seed = 0;
  std::array<std::size_t, kNumScenarioTypes> counts{};
  std::vector<Vec2> g;  // row-major [type][k]

  std::span<const Vec2> slice(ScenarioType t) const {
    return std::span<const Vec2>(g).subspan(static_cast<std::size_t>(index_of(t)) * k, k);
  }
  std::span<Vec2> slice(ScenarioType t) {
    return std::span<Vec2>(g).subspan(static_cast<std::size_t>(index_of(t)) * k, k);
  }

  friend bool operator==(const AnchorBank&, const AnchorBank&) = default;
};

/// Ego position at the last planning step of every scene labeled `type`.
inline std::vector<Vec2> collect_endpoints(const std::vector<Scene>& scenes, ScenarioType type,
                                           std::size_t horizon = 80) {
  std::vector<Vec2> out;
  for (const auto& s : scenes) {
    if (s.label != type || !s.ego_future_gt) continue;
    const auto& f = *s.ego_future_gt;
    if (f.empty()) continue;
    const auto& p = f[std::min(horizon, f.size()) - 1];
    out.push_back({p.x, p.y});
  }
  return out;
}

/// Orders centroids by polar angle, then radius, so mode indices stay stable
/// between rebuilds.
inline void sort_anchors(std::span<Vec2> a) {
  std::stable_sort(a.begin(), a.end(), [](Vec2 p, Vec2 q) {
    const double ap = std::atan2(p.y, p.x), aq = std::atan2(q.y, q.x);
    if (ap != aq) return ap < aq;
    return dot(p, p) < dot(q, q);
  });
}

inline AnchorBank build_bank(const std::vector<Scene>& scenes, std::size_t k, std::uint64_t seed,
                             std::size_t horizon = 80, const KMeansOptions& opt = {}) {
  AnchorBank bank;
  bank.k = k;
  bank.seed = seed;
  bank.g.resize(kNumScenarioTypes * k);
  for (ScenarioType t : kAllScenarioTypes) {
    const auto pts = collect_endpoints(scenes, t, horizon);
    if (pts.size() < k)
      throw InvalidArgument("anchor bank: scenario type " + std::string(to_string(t)) + " has " +
                            std::to_string(pts.size()) + " endpoints, need " + std::to_string(k));
    const auto km = kmeans(pts, k, derive_seed(seed, 0xa1c, static_cast<std::uint64_t>(index_of(t))), opt);
    auto dst = bank.slice(t);
    std::copy(km.centroids.begin(), km.centroids.end(), dst.begin());
    sort_anchors(dst);
    bank.counts[static_cast<std::size_t>(index_of(t))] = pts.size();
  }
  return bank;
}

inline nlohmann::json bank_to_json(const AnchorBank& bank) {
  nlohmann::json j;
  j["version"] = kAnchorBankVersion;
  j["k"] = bank.k;
  j["seed"] = bank.seed;
  nlohmann::json counts = nlohmann::json::object(), anchors = nlohmann::json::object();
  for (ScenarioType t : kAllScenarioTypes) {
    const std::string name(to_string(t));
    counts[name] = bank.counts[static_cast<std::size_t>(index_of(t))];
    auto& arr = anchors[name] = nlohmann::json::array();
    for (Vec2 p : bank.slice(t)) arr.push_back({p.x, p.y});
  }
  j["counts"] = counts;
  j["anchors"] = anchors;
  return j;
}

inline AnchorBank bank_from_json(const nlohmann::json& j) {
  try {
    if (j.at("version").get<int>() != kAnchorBankVersion) throw InvalidArgument("anchor bank: unsupported version");
    AnchorBank bank;
    bank.k = j.at("k").get<std::size_t>();
    bank.seed = j.at("seed").get<std::uint64_t>();
    bank.g.resize(kNumScenarioTypes * bank.k);
    for (ScenarioType t : kAllScenarioTypes) {
      const std::string name(to_string(t));
      bank.counts[static_cast<std::size_t>(index_of(t))] = j.at("counts").at(name).get<std::size_t>();
      const auto& arr = j.at("anchors").at(name);
      if (arr.size() != bank.k) throw InvalidArgument("anchor bank: " + name + " has wrong anchor count");
      auto dst = bank.slice(t);
      for (std::size_t i = 0; i < bank.k; ++i) dst[i] = {arr.at(i).at(0).get<double>(), arr.at(i).at(1).get<double>()};
    }
    return bank;
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("anchor bank: ") + e.what());
  }
}

inline void write_bank(const AnchorBank& bank, const std::filesystem::path& path) {
  write_file_atomic(path, bank_to_json(bank).dump(1) + "\n");
}

inline AnchorBank read_bank(const std::filesystem::path& path) {
  try {
    return bank_from_json(nlohmann::json::parse(read_file(path)));
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidArgument("anchor bank: " + std::string(e.what()));
  }
}

/// Seven scatter panels, endpoints in grey and anchors in red, x forward.
inline std::string bank_to_svg(const AnchorBank& bank, const std::vector<Scene>& scenes = {},
                               std::size_t horizon = 80) {
  constexpr double kPanel = 260.0, kPad = 22.0;
  constexpr int kCols = 4;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(2);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << kCols * kPanel << "\" height=\"" << 2 * kPanel
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  for (ScenarioType t : kAllScenarioTypes) {
    const int idx = index_of(t);
    const double ox = (idx % kCols) * kPanel, oy = (idx / kCols) * kPanel;
    const auto pts = collect_endpoints(scenes, t, horizon);
    const auto anchors = bank.slice(t);
    double lim = 10.0;
    for (Vec2 p : pts) lim = std::max({lim, std::abs(p.x), std::abs(p.y)});
    for (Vec2 p : anchors) lim = std::max({lim, std::abs(p.x), std::abs(p.y)});
    const double scale = (kPanel - 2 * kPad) / (2.0 * lim);
    const double cx = ox + kPanel / 2, cy = oy + kPanel / 2 + 6;
    // Plot y = forward (x), leftward (y) to the left, like a top-down view.
    auto sx = [&](Vec2 p) { return cx - p.y * scale; };
    auto sy = [&](Vec2 p) { return cy - p.x * scale; };
    os << "<g>\n<rect x=\"" << ox + 4 << "\" y=\"" << oy + 4 << "\" width=\"" << kPanel - 8 << "\" height=\""
       << kPanel - 8 << "\" fill=\"none\" stroke=\"#999\"/>\n";
    os << "<text x=\"" << ox + 10 << "\" y=\"" << oy + 18 << "\">" << to_string(t) << " (n=" << pts.size()
       << ")</text>\n";
    os << "<line x1=\"" << cx - 4 << "\" y1=\"" << cy << "\" x2=\"" << cx + 4 << "\" y2=\"" << cy
       << "\" stroke=\"#000\"/>\n";
    for (Vec2 p : pts)
      os << "<circle cx=\"" << sx(p) << "\" cy=\"" << sy(p) << "\" r=\"1.2\" fill=\"#bbb\"/>\n";
    for (Vec2 p : anchors)
      os << "<circle cx=\"" << sx(p) << "\" cy=\"" << sy(p) << "\" r=\"3\" fill=\"#d62728\"/>\n";
    os << "</g>\n";
  }
  os << "</svg>\n";
  return os.str();
}

}  // namespace emoe
