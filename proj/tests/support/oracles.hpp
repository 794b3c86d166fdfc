/*
 * Copyright 2026 The PAN Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *   http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond plain containers.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <utility>
#include <vector>

namespace oracle {

using Table = std::vector<std::vector<double>>;

inline Table matmul(const Table& a, const Table& b) {
  Table c(a.size(), std::vector<double>(b.front().size(), 0.0));
  for (std::size_t i = 0; i < a.size(); ++i)
    for (std::size_t j = 0; j < b.front().size(); ++j)
      for (std::size_t k = 0; k < b.size(); ++k) c[i][j] += a[i][k] * b[k][j];
  return c;
}

// Index of the highest candidate score, lowest index on ties.
inline std::size_t argmaxFirst(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i)
    if (v[i] > v[best]) best = i;
  return best;
}

inline double fitb(const Table& pair_scores, const std::vector<std::vector<std::size_t>>& questions,
                   const std::vector<std::vector<std::size_t>>& candidates,
                   const std::vector<std::size_t>& answers) {
  std::size_t correct = 0;
  for (std::size_t q = 0; q < questions.size(); ++q) {
    std::vector<double> score(candidates[q].size(), 0.0);
    for (std::size_t c = 0; c < candidates[q].size(); ++c)
      for (std::size_t item : questions[q]) score[c] += pair_scores[item][candidates[q][c]];
    if (argmaxFirst(score) == answers[q]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(questions.size());
}

// O(P*N) pairwise comparison.
inline double auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0.0;
  for (double p : pos)
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  return wins / (static_cast<double>(pos.size()) * static_cast<double>(neg.size()));
}

inline double setScore(const Table& pair_scores, const std::vector<std::size_t>& set) {
  double sum = 0.0;
  double count = 0.0;
  for (std::size_t a = 0; a < set.size(); ++a)
    for (std::size_t b = a + 1; b < set.size(); ++b) {
      sum += pair_scores[set[a]][set[b]];
      count += 1.0;
    }
  return sum / count;
}

// Full sort of the gallery for each query: score descending, gallery index
// ascending.
inline double recall(const Table& query_by_gallery, const std::vector<int>& query_labels,
                     const std::vector<int>& gallery_labels, std::size_t k) {
  std::size_t hits = 0;
  for (std::size_t q = 0; q < query_by_gallery.size(); ++q) {
    std::vector<std::size_t> order(gallery_labels.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
      if (query_by_gallery[q][a] != query_by_gallery[q][b]) return query_by_gallery[q][a] > query_by_gallery[q][b];
      return a < b;
    });
    for (std::size_t r = 0; r < k; ++r) {
      if (gallery_labels[order[r]] == query_labels[q]) {
        ++hits;
        break;
      }
    }
  }
  return static_cast<double>(hits) / static_cast<double>(query_by_gallery.size());
}

// Step-wise AP: for each positive, precision among every item scored at
// least as high.
inline double averagePrecision(const std::vector<double>& scores, const std::vector<int>& labels) {
  double total = 0.0;
  double positives = 0.0;
  for (std::size_t a = 0; a < scores.size(); ++a) {
    if (labels[a] != 1) continue;
    positives += 1.0;
    double above = 0.0;
    double above_pos = 0.0;
    for (std::size_t b = 0; b < scores.size(); ++b) {
      if (scores[b] >= scores[a]) {
        above += 1.0;
        if (labels[b] == 1) above_pos += 1.0;
      }
    }
    total += above_pos / above;
  }
  return total / positives;
}

inline double choose(std::size_t n, std::size_t k) {
  if (k > n) return 0.0;
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

// Balanced presence-only Bayes accuracy for "link iff >=1 shared attribute
// and every shared attribute has the same manifestation", with r-of-m
// attribute subsets and K equiprobable manifestations. Overlap s of two
// independent r-subsets is hypergeometric and P(link | s) = K^-s for s >= 1.
inline std::pair<double, double> manifestationBayes(std::size_t m, std::size_t r, std::size_t k) {
  std::vector<double> ps(r + 1);
  std::vector<double> link(r + 1, 0.0);
  double p_link = 0.0;
  for (std::size_t s = 0; s <= r; ++s) {
    ps[s] = choose(r, s) * choose(m - r, r - s) / choose(m, r);
    if (s >= 1) link[s] = std::pow(static_cast<double>(k), -static_cast<double>(s));
    p_link += ps[s] * link[s];
  }
  double rate = 0.0;
  for (std::size_t s = 0; s <= r; ++s) {
    const double given_link = ps[s] * link[s] / p_link;
    const double given_non = ps[s] * (1.0 - link[s]) / (1.0 - p_link);
    rate += 0.5 * std::max(given_link, given_non);
  }
  return {rate, p_link};
}

}  // namespace oracle
