#pragma once

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "imgsmac/common.hpp"

namespace imgsmac::training {

struct EpochMetrics {
  std::size_t epoch = 0;
  std::uint64_t seed = 0;
  std::string phase;
  double success = 0.0;
  double mean_reward = 0.0;
  double m_avg = 0.0;
  double loss_pi = 0.0;
  double loss_l1 = 0.0;
  double loss_l2 = 0.0;
  std::vector<double> agent_m_avg;  // per agent slot; -1 when the slot never had an opportunity
  std::size_t episodes = 0;
  std::size_t samples = 0;
};

inline constexpr const char* kMetricsHeader = "epoch,seed,phase,success,mean_reward,m_avg,loss_pi,loss_l1,loss_l2";

inline std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::string metrics_row(const EpochMetrics& m) {
  return std::to_string(m.epoch) + "," + std::to_string(m.seed) + "," + m.phase + "," + format_double(m.success) +
         "," + format_double(m.mean_reward) + "," + format_double(m.m_avg) + "," + format_double(m.loss_pi) + "," +
         format_double(m.loss_l1) + "," + format_double(m.loss_l2);
}

/// Appends rows to a metrics CSV, writing the header when the file is new or empty.
class MetricsWriter {
 public:
  explicit MetricsWriter(const std::string& path) : path_(path) {
    std::ifstream probe(path, std::ios::ate);
    const bool fresh = !probe || probe.tellg() == 0;
    out_.open(path, std::ios::app);
    require(static_cast<bool>(out_), "cannot open metrics file '" + path + "'");
    if (fresh) out_ << kMetricsHeader << "\n";
  }

  void append(const EpochMetrics& m) {
    out_ << metrics_row(m) << "\n";
    out_.flush();
  }

  const std::string& path() const { return path_; }

 private:
  std::string path_;
  std::ofstream out_;
};

}  // namespace imgsmac::training
