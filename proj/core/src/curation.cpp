#include "bppo/curation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "bppo/error.hpp"

namespace bppo {

EmbeddingSet embed_prompts(const PolicyParams& params,
                           const std::vector<std::vector<int>>& prompts) {
  EmbeddingSet out;
  out.n = static_cast<int64_t>(prompts.size());
  out.dim = params.config.d_model;
  out.data.resize(static_cast<size_t>(out.n * out.dim), 0.0);
  out.ids.resize(static_cast<size_t>(out.n));
  for (int64_t i = 0; i < out.n; ++i) {
    out.ids[static_cast<size_t>(i)] = i;
    const std::vector<int>& prompt = prompts[static_cast<size_t>(i)];
    if (prompt.empty()) throw ConfigError("embed_prompts: empty prompt");
    const Tensor hidden =
        backbone_hidden(params, prompt, params.config.deepest_exit());
    double* row = out.data.data() + i * out.dim;
    for (int64_t t = 0; t < hidden.rows(); ++t) {
      for (int64_t d = 0; d < out.dim; ++d) row[d] += hidden.at(t, d);
    }
    double ss = 0.0;
    for (int64_t d = 0; d < out.dim; ++d) {
      row[d] /= static_cast<double>(hidden.rows());
      ss += row[d] * row[d];
    }
    const double norm = std::sqrt(ss);
    if (norm < 1e-12) throw NumericError("embed_prompts: near-zero feature norm");
    for (int64_t d = 0; d < out.dim; ++d) row[d] /= norm;
  }
  return out;
}

double cosine_distance(const EmbeddingSet& embs, int64_t i, int64_t j) {
  const double* a = embs.row(i);
  const double* b = embs.row(j);
  double dot = 0.0;
  for (int64_t d = 0; d < embs.dim; ++d) dot += a[d] * b[d];
  return 1.0 - dot;
}

// ------------------------------------------------------------- clustering

std::vector<int64_t> hier_cluster(const EmbeddingSet& embs, int64_t k) {
  const int64_t n = embs.n;
  if (k < 1 || k > n) throw ConfigError("hier_cluster: need 1 <= k <= N");

  std::vector<std::vector<double>> dist(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(n)));
  for (int64_t i = 0; i < n; ++i) {
    for (int64_t j = i + 1; j < n; ++j) {
      const double d = cosine_distance(embs, i, j);
      dist[static_cast<size_t>(i)][static_cast<size_t>(j)] = d;
      dist[static_cast<size_t>(j)][static_cast<size_t>(i)] = d;
    }
  }

  // clusters as sorted member lists; slots keyed by smallest member id
  std::vector<std::vector<int64_t>> members(static_cast<size_t>(n));
  std::vector<bool> active(static_cast<size_t>(n), true);
  for (int64_t i = 0; i < n; ++i) members[static_cast<size_t>(i)] = {i};
  int64_t n_active = n;

  // average linkage recomputed from point distances in ascending member order,
  // so merge decisions are reproducible by an independent reimplementation
  const auto linkage = [&](int64_t a, int64_t b) {
    double sum = 0.0;
    for (int64_t p : members[static_cast<size_t>(a)]) {
      for (int64_t q : members[static_cast<size_t>(b)]) {
        sum += dist[static_cast<size_t>(p)][static_cast<size_t>(q)];
      }
    }
    return sum / static_cast<double>(members[static_cast<size_t>(a)].size() *
                                     members[static_cast<size_t>(b)].size());
  };

  while (n_active > k) {
    int64_t best_a = -1, best_b = -1;
    double best_d = 0.0;
    for (int64_t a = 0; a < n; ++a) {
      if (!active[static_cast<size_t>(a)]) continue;
      for (int64_t b = a + 1; b < n; ++b) {
        if (!active[static_cast<size_t>(b)]) continue;
        const double d = linkage(a, b);
        // slot index == smallest member id, so (a, b) ascending already walks
        // tie candidates in the required order; strict < keeps the first
        if (best_a < 0 || d < best_d) {
          best_a = a;
          best_b = b;
          best_d = d;
        }
      }
    }
    std::vector<int64_t> merged;
    std::merge(members[static_cast<size_t>(best_a)].begin(),
               members[static_cast<size_t>(best_a)].end(),
               members[static_cast<size_t>(best_b)].begin(),
               members[static_cast<size_t>(best_b)].end(), std::back_inserter(merged));
    members[static_cast<size_t>(best_a)] = std::move(merged);
    active[static_cast<size_t>(best_b)] = false;
    --n_active;
  }

  std::vector<int64_t> labels(static_cast<size_t>(n), -1);
  for (int64_t a = 0; a < n; ++a) {
    if (!active[static_cast<size_t>(a)]) continue;
    for (int64_t p : members[static_cast<size_t>(a)]) {
      labels[static_cast<size_t>(p)] = members[static_cast<size_t>(a)].front();
    }
  }
  return labels;
}

std::vector<int64_t> greedy_diverse_select(const EmbeddingSet& embs,
                                           const std::vector<int64_t>& members,
                                           int64_t m) {
  const int64_t sz = static_cast<int64_t>(members.size());
  if (m < 1 || m > sz) throw ConfigError("greedy_diverse_select: need 1 <= m <= size");
  std::vector<int64_t> ids = members;
  std::sort(ids.begin(), ids.end());

  std::vector<double> centroid(static_cast<size_t>(embs.dim), 0.0);
  for (int64_t id : ids) {
    const double* row = embs.row(id);
    for (int64_t d = 0; d < embs.dim; ++d) centroid[static_cast<size_t>(d)] += row[d];
  }
  double cn = 0.0;
  for (double& v : centroid) cn += (v /= static_cast<double>(sz)) * v;
  cn = std::sqrt(cn);

  std::vector<int64_t> picked;
  std::vector<bool> taken(static_cast<size_t>(sz), false);
  int64_t first = 0;
  if (cn > 1e-12) {
    double best = -1.0;
    for (int64_t i = 0; i < sz; ++i) {
      const double* row = embs.row(ids[static_cast<size_t>(i)]);
      double dot = 0.0;
      for (int64_t d = 0; d < embs.dim; ++d) dot += row[d] * centroid[static_cast<size_t>(d)];
      const double d = 1.0 - dot / cn;
      if (d > best) {
        best = d;
        first = i;
      }
    }
  }  // degenerate centroid: every direction ties, lowest id wins
  picked.push_back(ids[static_cast<size_t>(first)]);
  taken[static_cast<size_t>(first)] = true;

  while (static_cast<int64_t>(picked.size()) < m) {
    int64_t arg = -1;
    double best = -1.0;
    for (int64_t i = 0; i < sz; ++i) {
      if (taken[static_cast<size_t>(i)]) continue;
      double dmin = std::numeric_limits<double>::infinity();
      for (int64_t s : picked) {
        dmin = std::min(dmin, cosine_distance(embs, ids[static_cast<size_t>(i)], s));
      }
      if (dmin > best) {
        best = dmin;
        arg = i;
      }
    }
    picked.push_back(ids[static_cast<size_t>(arg)]);
    taken[static_cast<size_t>(arg)] = true;
  }
  return picked;
}

std::vector<int64_t> curate(const PolicyParams& params,
                            const std::vector<std::vector<int>>& prompts, int64_t k,
                            int64_t per_cluster_m) {
  const int64_t n = static_cast<int64_t>(prompts.size());
  if (k < 1 || per_cluster_m < 1) throw ConfigError("curate: k and m must be >= 1");
  if (k * per_cluster_m > n) throw ConfigError("curate: k*m exceeds pool size");
  const EmbeddingSet embs = embed_prompts(params, prompts);
  const std::vector<int64_t> labels = hier_cluster(embs, k);

  std::map<int64_t, std::vector<int64_t>> clusters;  // label -> members, ascending
  for (int64_t i = 0; i < n; ++i) clusters[labels[static_cast<size_t>(i)]].push_back(i);

  std::vector<int64_t> out;
  for (const auto& [label, mem] : clusters) {
    const int64_t m = std::min<int64_t>(per_cluster_m, static_cast<int64_t>(mem.size()));
    const std::vector<int64_t> sel = greedy_diverse_select(embs, mem, m);
    out.insert(out.end(), sel.begin(), sel.end());
  }
  return out;
}

}  // namespace bppo
