#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include "imgsmac/analysis/evaluate.hpp"

namespace imgsmac::analysis {

/// Everything the sweep needs for one training seed.
template <Real Scalar>
struct SweepSeed {
  const agents::Network<Scalar>* pretrained = nullptr;
  const agents::VocabMask* mask = nullptr;  // null-token mask of the pretrained checkpoint
  const agents::ClusterTable* clusters = nullptr;
  double bstar = 1.0;
  std::map<double, const agents::Network<Scalar>*> finetuned;  // budget -> finetuned network
};

struct SweepRow {
  double budget = 1.0;
  double mean_success = 0.0;
  double ci95 = 0.0;  // half-width across seeds
  std::size_t seeds = 0;
  std::string source;  // unmasked | zero_shot_mask | finetuned | no_comm, joined with '+' when seeds differ
};

/// Two-sided 95% Student t critical value.
inline double t_critical_95(std::size_t dof) {
  static const double table[] = {0.0,   12.706, 4.303, 3.182, 2.776, 2.571, 2.447, 2.365, 2.306, 2.262, 2.228,
                                 2.201, 2.179,  2.160, 2.145, 2.131, 2.120, 2.110, 2.101, 2.093, 2.086, 2.080,
                                 2.074, 2.069,  2.064, 2.060, 2.056, 2.052, 2.048, 2.045, 2.042};
  if (dof == 0) return 0.0;
  if (dof <= 30) return table[dof];
  return 1.96;
}

inline void mean_ci(const std::vector<double>& v, double& mean, double& half) {
  mean = 0.0;
  half = 0.0;
  if (v.empty()) return;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  if (v.size() < 2) return;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size() - 1);
  half = t_critical_95(v.size() - 1) * std::sqrt(var / static_cast<double>(v.size()));
}

/// Success per budget. b = 1: unmasked; b* <= b < 1: the pretrained policy under its null mask;
/// 0 < b < b*: the finetuned checkpoint for b under the same mask (seed skipped with a warning when absent);
/// b = 0: every message suppressed.
template <Real Scalar>
std::vector<SweepRow> budget_sweep(const envs::EnvConfig& env_cfg, const std::vector<SweepSeed<Scalar>>& seeds,
                                   const std::vector<double>& budgets, const EvalOptions& base,
                                   std::vector<std::string>* warnings = nullptr) {
  std::vector<SweepRow> rows;
  for (double b : budgets) {
    require(b >= 0.0 && b <= 1.0, "sweep budget outside [0, 1]");
    std::vector<double> successes;
    std::vector<std::string> sources;
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const auto& sd = seeds[s];
      EvalOptions opts = base;
      opts.clusters = sd.clusters;
      const agents::Network<Scalar>* net = sd.pretrained;
      agents::VocabMask all(agents::MaskMode::global);
      std::string source;
      if (b >= 1.0) {
        source = "unmasked";
        opts.gate_forced_open = true;
      } else if (b == 0.0) {
        source = "no_comm";
        opts.gate_forced_open = true;
        const std::size_t vocab = net->config().message_mode == agents::MessageMode::discrete
                                      ? net->config().prototypes
                                      : (sd.clusters ? sd.clusters->size() : 0);
        require(vocab > 0, "continuous sweep at b = 0 needs a cluster table");
        for (std::size_t tok = 0; tok < vocab; ++tok) all.add(static_cast<int>(tok), agents::kAllRecipients);
        opts.mask = &all;
      } else if (b >= sd.bstar) {
        source = "zero_shot_mask";
        opts.gate_forced_open = true;
        opts.mask = sd.mask;
      } else {
        source = "finetuned";
        auto it = sd.finetuned.find(b);
        if (it == sd.finetuned.end() || it->second == nullptr) {
          if (warnings)
            warnings->push_back("no finetuned checkpoint for budget " + std::to_string(b) + " (seed " +
                                std::to_string(s) + "); skipped");
          continue;
        }
        net = it->second;
        opts.gate_forced_open = false;
        opts.mask = sd.mask;
      }
      if (net == nullptr) continue;
      successes.push_back(evaluate(*net, env_cfg, opts).success);
      if (std::find(sources.begin(), sources.end(), source) == sources.end()) sources.push_back(source);
    }
    if (successes.empty()) continue;
    SweepRow row;
    row.budget = b;
    row.seeds = successes.size();
    for (const auto& src : sources) row.source += (row.source.empty() ? "" : "+") + src;
    mean_ci(successes, row.mean_success, row.ci95);
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep_csv(std::ostream& out, const std::vector<SweepRow>& rows) {
  out << "budget,mean_success,ci95,seeds,source\n";
  for (const auto& r : rows)
    out << training::format_double(r.budget) << "," << training::format_double(r.mean_success) << ","
        << training::format_double(r.ci95) << "," << r.seeds << "," << r.source << "\n";
}

/// Static line plot of success versus budget with a confidence band.
inline void write_sweep_svg(std::ostream& out, const std::vector<SweepRow>& rows, const std::string& title = "") {
  const double W = 480, H = 320, L = 60, R = 20, T = 30, B = 50;
  const double pw = W - L - R, ph = H - T - B;
  auto x = [&](double b) { return L + b * pw; };
  auto y = [&](double s) { return T + (1.0 - std::clamp(s, 0.0, 1.0)) * ph; };
  char buf[128];
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" viewBox=\"0 0 " << W
      << " " << H << "\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<g stroke=\"#444\" stroke-width=\"1\">\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T + ph << "\" x2=\"" << L + pw << "\" y2=\"" << T + ph << "\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << T + ph << "\"/>\n";
  out << "</g>\n<g font-family=\"sans-serif\" font-size=\"11\" fill=\"#222\">\n";
  for (int k = 0; k <= 5; ++k) {
    const double v = k / 5.0;
    std::snprintf(buf, sizeof(buf), "%.1f", v);
    out << "<text x=\"" << x(v) << "\" y=\"" << T + ph + 16 << "\" text-anchor=\"middle\">" << buf << "</text>\n";
    out << "<text x=\"" << L - 6 << "\" y=\"" << y(v) + 4 << "\" text-anchor=\"end\">" << buf << "</text>\n";
  }
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">budget b</text>\n";
  out << "<text x=\"16\" y=\"" << T + ph / 2 << "\" text-anchor=\"middle\" transform=\"rotate(-90 16 " << T + ph / 2
      << ")\">success</text>\n";
  if (!title.empty())
    out << "<text x=\"" << L + pw / 2 << "\" y=\"18\" text-anchor=\"middle\">" << title << "</text>\n";
  out << "</g>\n";
  if (!rows.empty()) {
    auto sorted = rows;
    std::sort(sorted.begin(), sorted.end(), [](const SweepRow& a, const SweepRow& b) { return a.budget < b.budget; });
    std::string band, line;
    for (const auto& r : sorted) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x(r.budget), y(r.mean_success + r.ci95));
      band += buf;
    }
    for (auto it = sorted.rbegin(); it != sorted.rend(); ++it) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x(it->budget), y(it->mean_success - it->ci95));
      band += buf;
    }
    for (const auto& r : sorted) {
      std::snprintf(buf, sizeof(buf), "%.2f,%.2f ", x(r.budget), y(r.mean_success));
      line += buf;
    }
    out << "<polygon points=\"" << band << "\" fill=\"#4a7fb5\" fill-opacity=\"0.25\" stroke=\"none\"/>\n";
    out << "<polyline points=\"" << line << "\" fill=\"none\" stroke=\"#1f4e79\" stroke-width=\"2\"/>\n";
    for (const auto& r : sorted)
      out << "<circle cx=\"" << x(r.budget) << "\" cy=\"" << y(r.mean_success) << "\" r=\"3\" fill=\"#1f4e79\"/>\n";
  }
  out << "</svg>\n";
}

}  // namespace imgsmac::analysis
