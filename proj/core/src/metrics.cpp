#include "adaptdhm/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <nlohmann/json.hpp>

#include "adaptdhm/error.hpp"

namespace adaptdhm {

std::optional<double> auc(std::span<const EvalRecord> records) {
  size_t npos = 0;
  for (const auto& r : records) {
    require(std::isfinite(r.score), "auc: non-finite score");
    npos += r.label ? 1 : 0;
  }
  const size_t nneg = records.size() - npos;
  if (npos == 0 || nneg == 0) return std::nullopt;

  std::vector<uint32_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](uint32_t a, uint32_t b) { return records[a].score < records[b].score; });

  // rank sum of positives, average rank over tied scores
  double pos_rank_sum = 0.0;
  size_t i = 0;
  while (i < order.size()) {
    size_t j = i;
    while (j < order.size() && records[order[j]].score == records[order[i]].score) ++j;
    const double avg_rank = 0.5 * static_cast<double>(i + 1 + j);  // ranks are 1-based
    for (size_t t = i; t < j; ++t)
      if (records[order[t]].label) pos_rank_sum += avg_rank;
    i = j;
  }
  const double np = static_cast<double>(npos);
  const double nn = static_cast<double>(nneg);
  return (pos_rank_sum - np * (np + 1.0) / 2.0) / (np * nn);
}

std::optional<GaucResult> gauc(std::span<const EvalRecord> records) {
  require(!records.empty(), "gauc: empty input");
  std::vector<uint32_t> order(records.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](uint32_t a, uint32_t b) {
    return records[a].session != records[b].session ? records[a].session < records[b].session : a < b;
  });

  GaucResult out;
  double weighted = 0.0;
  double weight = 0.0;
  std::vector<EvalRecord> group;
  size_t i = 0;
  while (i < order.size()) {
    group.clear();
    const uint32_t session = records[order[i]].session;
    for (; i < order.size() && records[order[i]].session == session; ++i) group.push_back(records[order[i]]);
    const auto session_auc = auc(group);
    if (!session_auc) {
      ++out.sessions_skipped;
      continue;
    }
    const double impressions = static_cast<double>(group.size());
    weighted += impressions * *session_auc;
    weight += impressions;
    ++out.sessions_used;
  }
  if (out.sessions_used == 0) return std::nullopt;
  out.value = weighted / weight;
  return out;
}

namespace {

// contingency counts keyed by (assigned, planted)
std::map<std::pair<uint32_t, uint32_t>, uint64_t> contingency(std::span<const uint32_t> a,
                                                              std::span<const uint32_t> b) {
  if (a.size() != b.size()) fail("cluster metrics: length mismatch");
  require(!a.empty(), "cluster metrics: empty input");
  std::map<std::pair<uint32_t, uint32_t>, uint64_t> counts;
  for (size_t i = 0; i < a.size(); ++i) ++counts[{a[i], b[i]}];
  return counts;
}

double choose2(uint64_t n) { return 0.5 * static_cast<double>(n) * static_cast<double>(n - 1); }

}  // namespace

double cluster_purity(std::span<const uint32_t> assigned, std::span<const uint32_t> planted) {
  const auto counts = contingency(assigned, planted);
  std::map<uint32_t, uint64_t> best;  // per assigned cluster, largest planted overlap
  for (const auto& [key, c] : counts) best[key.first] = std::max(best[key.first], c);
  uint64_t matched = 0;
  for (const auto& [cluster, c] : best) matched += c;
  return static_cast<double>(matched) / static_cast<double>(assigned.size());
}

double adjusted_rand_index(std::span<const uint32_t> assigned, std::span<const uint32_t> planted) {
  const auto counts = contingency(assigned, planted);
  std::map<uint32_t, uint64_t> row_sum, col_sum;
  double sum_cells = 0.0;
  for (const auto& [key, c] : counts) {
    row_sum[key.first] += c;
    col_sum[key.second] += c;
    sum_cells += choose2(c);
  }
  double sum_rows = 0.0, sum_cols = 0.0;
  for (const auto& [k, c] : row_sum) sum_rows += choose2(c);
  for (const auto& [k, c] : col_sum) sum_cols += choose2(c);
  const double total_pairs = choose2(assigned.size());
  const double expected = sum_rows * sum_cols / total_pairs;
  const double max_index = 0.5 * (sum_rows + sum_cols);
  const double denom = max_index - expected;
  if (denom == 0.0) {
    // both partitions trivial (all singletons agreeing, or one cluster each)
    return sum_cells == max_index ? 1.0 : 0.0;
  }
  return (sum_cells - expected) / denom;
}

std::string MetricReport::to_json() const {
  nlohmann::json j;
  j["auc"] = auc ? nlohmann::json(*auc) : nlohmann::json(nullptr);
  j["gauc"] = gauc ? nlohmann::json(*gauc) : nlohmann::json(nullptr);
  nlohmann::json domains = nlohmann::json::object();
  for (const auto& [d, v] : per_domain_auc) domains[std::to_string(d)] = v;
  j["per_domain_auc"] = domains;
  j["sessions_used"] = sessions_used;
  j["sessions_skipped"] = sessions_skipped;
  if (purity) j["purity"] = *purity;
  if (ari) j["ari"] = *ari;
  return j.dump(2);
}

}  // namespace adaptdhm
