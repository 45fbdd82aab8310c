#pragma once

#include <fstream>
#include <limits>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "imgsmac/common.hpp"

namespace imgsmac::agents {

inline constexpr int kAllRecipients = -1;

enum class MaskMode { per_recipient, global };

/// (token, recipient) pairs whose delivery is suppressed. Recipient kAllRecipients ("*")
/// suppresses the token towards everyone.
class VocabMask {
 public:
  VocabMask() = default;
  explicit VocabMask(MaskMode mode) : mode_(mode) {}

  MaskMode mode() const { return mode_; }
  void set_mode(MaskMode m) { mode_ = m; }
  const std::string& checkpoint_hash() const { return checkpoint_hash_; }
  void set_checkpoint_hash(std::string h) { checkpoint_hash_ = std::move(h); }

  void add(int token, int recipient) {
    require(token >= 0, "mask token id must be non-negative");
    entries_.insert({token, mode_ == MaskMode::global ? kAllRecipients : recipient});
  }
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::set<std::pair<int, int>>& entries() const { return entries_; }

  bool suppresses(int token, int recipient) const {
    if (token < 0 || entries_.empty()) return false;
    return entries_.contains({token, kAllRecipients}) || entries_.contains({token, recipient});
  }

  /// True when every entry of this mask also suppresses under `other`.
  bool subset_of(const VocabMask& other) const {
    for (const auto& [tok, rec] : entries_) {
      if (rec == kAllRecipients) {
        if (!other.entries_.contains({tok, kAllRecipients})) return false;
      } else if (!other.suppresses(tok, rec)) {
        return false;
      }
    }
    return true;
  }

  void validate(int vocabulary_size) const {
    for (const auto& [tok, rec] : entries_)
      require(tok < vocabulary_size, "mask token " + std::to_string(tok) + " outside vocabulary of size " +
                                         std::to_string(vocabulary_size));
  }

 private:
  MaskMode mode_ = MaskMode::per_recipient;
  std::set<std::pair<int, int>> entries_;
  std::string checkpoint_hash_;
};

// Mask file:
//   # imgsmac vocab mask v1
//   checkpoint <hash>
//   mode per_recipient|global
//   <token_id>,<recipient_id|*>
//   ...
inline void write_mask(std::ostream& out, const VocabMask& mask) {
  out << "# imgsmac vocab mask v1\n";
  out << "checkpoint " << (mask.checkpoint_hash().empty() ? "-" : mask.checkpoint_hash()) << "\n";
  out << "mode " << (mask.mode() == MaskMode::global ? "global" : "per_recipient") << "\n";
  for (const auto& [tok, rec] : mask.entries()) {
    out << tok << ",";
    if (rec == kAllRecipients)
      out << "*";
    else
      out << rec;
    out << "\n";
  }
}

inline VocabMask read_mask(std::istream& in) {
  VocabMask mask;
  std::string line;
  std::size_t lineno = 0;
  bool saw_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line.rfind("# imgsmac vocab mask", 0) == 0) {
      saw_header = true;
      continue;
    }
    if (line[0] == '#') continue;
    if (line.rfind("checkpoint ", 0) == 0) {
      const std::string h = line.substr(11);
      mask.set_checkpoint_hash(h == "-" ? "" : h);
      continue;
    }
    if (line.rfind("mode ", 0) == 0) {
      const std::string m = line.substr(5);
      require(m == "global" || m == "per_recipient", "mask line " + std::to_string(lineno) + ": bad mode '" + m + "'");
      mask.set_mode(m == "global" ? MaskMode::global : MaskMode::per_recipient);
      continue;
    }
    const auto comma = line.find(',');
    require(comma != std::string::npos, "mask line " + std::to_string(lineno) + ": expected token,recipient");
    const std::string tok = line.substr(0, comma);
    const std::string rec = line.substr(comma + 1);
    try {
      mask.add(std::stoi(tok), rec == "*" ? kAllRecipients : std::stoi(rec));
    } catch (const std::invalid_argument&) {
      throw ConfigError("mask line " + std::to_string(lineno) + ": non-numeric entry '" + line + "'");
    }
  }
  require(saw_header, "mask file lacks the '# imgsmac vocab mask' header");
  return mask;
}

inline VocabMask load_mask(const std::string& path) {
  std::ifstream in(path);
  require(static_cast<bool>(in), "cannot open mask file '" + path + "'");
  return read_mask(in);
}

/// Nearest-centroid vocabulary for continuous messages.
class ClusterTable {
 public:
  ClusterTable() = default;
  explicit ClusterTable(std::vector<std::vector<double>> centroids) : centroids_(std::move(centroids)) {
    require(!centroids_.empty(), "cluster table needs at least one centroid");
  }

  std::size_t size() const { return centroids_.size(); }
  std::size_t dim() const { return centroids_.empty() ? 0 : centroids_.front().size(); }
  const std::vector<std::vector<double>>& centroids() const { return centroids_; }

  template <typename Vec>
  int assign(const Vec& v) const {
    int best = 0;
    double best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centroids_.size(); ++k) {
      double d = 0.0;
      for (std::size_t j = 0; j < centroids_[k].size(); ++j) {
        const double diff = static_cast<double>(v[j]) - centroids_[k][j];
        d += diff * diff;
      }
      if (d < best_d) {
        best_d = d;
        best = static_cast<int>(k);
      }
    }
    return best;
  }

 private:
  std::vector<std::vector<double>> centroids_;
};

// One centroid per line, comma separated, full precision.
inline void write_clusters(std::ostream& out, const ClusterTable& table) {
  out.precision(17);
  for (const auto& c : table.centroids()) {
    for (std::size_t j = 0; j < c.size(); ++j) out << (j ? "," : "") << c[j];
    out << "\n";
  }
}

inline ClusterTable read_clusters(std::istream& in) {
  std::vector<std::vector<double>> cs;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<double> c;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) c.push_back(std::stod(cell));
    cs.push_back(std::move(c));
  }
  return ClusterTable(std::move(cs));
}

}  // namespace imgsmac::agents
