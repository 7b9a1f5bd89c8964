#pragma once

// Exact minimum-cost one-to-one assignment on a rectangular cost matrix.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

namespace dreamer {

class CostMatrix {
 public:
  CostMatrix() = default;
  CostMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  CostMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols_) throw std::invalid_argument("ragged cost matrix");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

struct Matching {
  // (row index k, column index n), sorted by k. Each k and n appear once.
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  double total = 0.0;
};

// Shortest augmenting path Hungarian method with row/column potentials,
// O(n^3) on the square matrix padded with zero-cost dummy rows or columns.
// Dummy pairs are dropped, so |pairs| == min(rows, cols). The reported total
// is the sum of the original costs of the returned pairs in ascending row
// order. An empty side yields an empty matching with total 0.
inline Matching optimal_matching(const CostMatrix& cost) {
  Matching result;
  const std::size_t rows = cost.rows();
  const std::size_t cols = cost.cols();
  if (rows == 0 || cols == 0) return result;
  for (std::size_t r = 0; r < rows; ++r)
    for (std::size_t c = 0; c < cols; ++c)
      if (!std::isfinite(cost(r, c))) throw std::invalid_argument("cost matrix entries must be finite");

  const std::size_t n = std::max(rows, cols);
  auto at = [&](std::size_t r, std::size_t c) { return r < rows && c < cols ? cost(r, c) : 0.0; };

  constexpr double kInf = std::numeric_limits<double>::infinity();
  // 1-based arrays; index 0 is the virtual source column.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<std::size_t> owner(n + 1, 0), way(n + 1, 0);
  for (std::size_t i = 1; i <= n; ++i) {
    owner[0] = i;
    std::size_t j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<bool> used(n + 1, false);
    do {
      used[j0] = true;
      const std::size_t i0 = owner[j0];
      double delta = kInf;
      std::size_t j1 = 0;
      for (std::size_t j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double reduced = at(i0 - 1, j - 1) - u[i0] - v[j];
        if (reduced < minv[j]) {
          minv[j] = reduced;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (std::size_t j = 0; j <= n; ++j) {
        if (used[j]) {
          u[owner[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (owner[j0] != 0);
    do {
      const std::size_t j1 = way[j0];
      owner[j0] = owner[j1];
      j0 = j1;
    } while (j0 != 0);
  }

  std::vector<std::size_t> col_of_row(n, n);
  for (std::size_t j = 1; j <= n; ++j) col_of_row[owner[j] - 1] = j - 1;
  for (std::size_t r = 0; r < rows; ++r) {
    const std::size_t c = col_of_row[r];
    if (c < cols) {
      result.pairs.emplace_back(r, c);
      result.total += cost(r, c);
    }
  }
  return result;
}

}  // namespace dreamer
