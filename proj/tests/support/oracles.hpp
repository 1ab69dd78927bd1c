#pragma once

// Independent reference computations used by the unit and acceptance tests.
// They share no code with the library beyond the Coalition type.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "vale/image.hpp"
#include "vale/partition.hpp"

namespace oracle {

using ValueFn = std::function<double(std::uint32_t)>;  // coalition as a bitset

/// Shapley values as the average marginal contribution over all M!
/// orderings. Feasible for M <= 8.
inline std::vector<double> shapley_by_permutations(int m, const ValueFn& v) {
  std::vector<int> order(m);
  std::iota(order.begin(), order.end(), 0);
  std::map<std::uint32_t, double> cache;
  auto val = [&](std::uint32_t s) {
    auto it = cache.find(s);
    if (it != cache.end()) return it->second;
    return cache[s] = v(s);
  };
  std::vector<double> phi(m, 0.0);
  long double count = 0;
  do {
    std::uint32_t s = 0;
    for (int p : order) {
      const double before = val(s);
      s |= 1u << p;
      phi[p] += val(s) - before;
    }
    count += 1;
  } while (std::next_permutation(order.begin(), order.end()));
  for (double& x : phi) x = static_cast<double>(x / count);
  return phi;
}

/// Shapley values from the subset formula, enumerating all 2^m coalitions
/// with weights |S|! (m-|S|-1)! / m! computed from factorials.
inline std::vector<double> shapley_by_subsets(int m, const ValueFn& v) {
  std::vector<long double> fact(m + 1, 1.0L);
  for (int i = 1; i <= m; ++i) fact[i] = fact[i - 1] * i;
  std::vector<double> phi(m, 0.0);
  for (int i = 0; i < m; ++i) {
    long double acc = 0.0L;
    for (std::uint32_t s = 0; s < (std::uint32_t{1} << m); ++s) {
      if (s & (1u << i)) continue;
      const int size = __builtin_popcount(s);
      acc += fact[size] * fact[m - size - 1] / fact[m] * (v(s | (1u << i)) - v(s));
    }
    phi[i] = static_cast<double>(acc);
  }
  return phi;
}

/// Table game: a random value for every one of the 2^m coalitions.
inline std::vector<double> random_table(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<double> t(std::size_t{1} << m);
  for (double& x : t) x = u(rng);
  return t;
}

inline std::uint32_t bits_of(const vale::Coalition& c) {
  std::uint32_t s = 0;
  for (int i = 0; i < c.region_count(); ++i)
    if (c.contains(i)) s |= 1u << i;
  return s;
}

/// Clipped n-gram matches by enumerating every n-gram over `vocab`.
inline long long clipped_matches(const std::vector<std::string>& cand,
                                 const std::vector<std::vector<std::string>>& refs, int n,
                                 const std::vector<std::string>& vocab) {
  auto occurrences = [&](const std::vector<std::string>& seq, const std::vector<std::string>& gram) {
    long long k = 0;
    for (std::size_t i = 0; i + gram.size() <= seq.size(); ++i)
      if (std::equal(gram.begin(), gram.end(), seq.begin() + i)) ++k;
    return k;
  };
  long long total = 0;
  std::vector<int> idx(n, 0);
  const int v = static_cast<int>(vocab.size());
  while (true) {
    std::vector<std::string> gram;
    for (int i : idx) gram.push_back(vocab[i]);
    long long best = 0;
    for (const auto& r : refs) best = std::max(best, occurrences(r, gram));
    total += std::min(occurrences(cand, gram), best);
    int pos = n - 1;
    while (pos >= 0 && ++idx[pos] == v) idx[pos--] = 0;
    if (pos < 0) break;
  }
  return total;
}

/// Sentence BLEU straight from its definition, using clipped_matches.
inline double bleu(const std::vector<std::string>& cand, const std::vector<std::vector<std::string>>& refs,
                   int maxOrder, const std::vector<std::string>& vocab) {
  const double c = static_cast<double>(cand.size());
  if (cand.empty()) return 0.0;
  double r = -1, bestDiff = 1e18;
  for (const auto& ref : refs) {
    const double len = static_cast<double>(ref.size());
    const double d = std::abs(len - c);
    if (d < bestDiff || (d == bestDiff && len < r)) bestDiff = d, r = len;
  }
  double logSum = 0.0;
  for (int n = 1; n <= maxOrder; ++n) {
    const double total = std::max(0.0, c - n + 1);
    const long long m = clipped_matches(cand, refs, n, vocab);
    if (total == 0 || m == 0) return 0.0;
    logSum += std::log(static_cast<double>(m) / total);
  }
  const double bp = c < r ? std::exp(1.0 - r / c) : 1.0;
  return bp * std::exp(logSum / maxOrder);
}

/// Image of vertical/horizontal blocks with given intensities; used to build
/// synthetic classification scenes.
inline vale::Image two_tone(int width, int height, float left, float right, int split) {
  vale::Image img(width, height, 1);
  for (int r = 0; r < height; ++r)
    for (int c = 0; c < width; ++c) img.at(r, c) = c < split ? left : right;
  return img;
}

}  // namespace oracle
