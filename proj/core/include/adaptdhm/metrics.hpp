#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace adaptdhm {

struct EvalRecord {
  double score = 0.0;
  uint8_t label = 0;
  uint32_t session = 0;
};

// Mann-Whitney AUC, ties get half credit, O(n log n). Empty or single-class
// input has no defined AUC and returns nullopt.
std::optional<double> auc(std::span<const EvalRecord> records);

struct GaucResult {
  double value = 0.0;
  size_t sessions_used = 0;
  size_t sessions_skipped = 0;  // single-class sessions, excluded from both sums
};

// Impression-weighted mean of per-session AUCs. Sessions whose AUC is
// undefined are skipped and excluded from the weight mass; if every session
// is skipped the GAUC itself is undefined.
std::optional<GaucResult> gauc(std::span<const EvalRecord> records);

// Agreement with planted clusters; both are label-permutation invariant.
double cluster_purity(std::span<const uint32_t> assigned, std::span<const uint32_t> planted);
double adjusted_rand_index(std::span<const uint32_t> assigned, std::span<const uint32_t> planted);

struct MetricReport {
  std::optional<double> auc;
  std::optional<double> gauc;
  std::map<uint32_t, double> per_domain_auc;  // domains with a defined AUC only
  size_t sessions_used = 0;
  size_t sessions_skipped = 0;
  std::optional<double> purity;  // present when planted labels exist
  std::optional<double> ari;

  std::string to_json() const;  // fixed key names, scripting-stable
};

}  // namespace adaptdhm
