#pragma once

#include <cstdint>
#include <vector>

#include "bppo/policy.hpp"

namespace bppo {

// ------------------------------------------------------------ embeddings

// row-major N x dim matrix of unit-norm prompt features, with provenance ids
// back into the source pool
struct EmbeddingSet {
  int64_t n = 0;
  int64_t dim = 0;
  std::vector<double> data;
  std::vector<int64_t> ids;

  const double* row(int64_t i) const { return data.data() + i * dim; }
};

// mean over positions of the deepest-exit pre-head hidden states, L2-normalized
EmbeddingSet embed_prompts(const PolicyParams& params,
                           const std::vector<std::vector<int>>& prompts);

// 1 - cosine similarity between rows i and j (rows are unit norm)
double cosine_distance(const EmbeddingSet& embs, int64_t i, int64_t j);

// ------------------------------------------------------------- clustering

// average-linkage agglomerative clustering under cosine distance, merged until
// k clusters remain; merge ties go to the pair with the lowest smallest member
// ids. labels[i] is the smallest member id of i's cluster.
std::vector<int64_t> hier_cluster(const EmbeddingSet& embs, int64_t k);

// farthest-point greedy over `members` (ids into embs): first pick maximizes
// cosine distance to the member centroid, each later pick maximizes the minimum
// cosine distance to the already-selected set; lowest id wins ties. Returns m
// ids in pick order.
std::vector<int64_t> greedy_diverse_select(const EmbeddingSet& embs,
                                           const std::vector<int64_t>& members,
                                           int64_t m);

// embed -> cluster -> greedy select per cluster; returns pool indices ordered
// by (cluster label, greedy rank). per_cluster_m is clamped to each cluster's
// size, so small clusters contribute what they have.
std::vector<int64_t> curate(const PolicyParams& params,
                            const std::vector<std::vector<int>>& prompts, int64_t k,
                            int64_t per_cluster_m);

}  // namespace bppo
