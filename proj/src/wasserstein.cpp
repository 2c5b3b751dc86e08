#include "drcs/wasserstein.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <Eigen/Eigenvalues>

namespace drcs {

double gaussian_w2(const VectorXd& mu1, const MatrixXd& sigma1, const VectorXd& mu2, const MatrixXd& sigma2) {
  const auto n = mu1.size();
  if (mu2.size() != n || sigma1.rows() != n || sigma2.rows() != n)
    throw std::invalid_argument("gaussian_w2: dimension mismatch");
  if (!is_symmetric_psd(sigma1, 1e-8) || !is_symmetric_psd(sigma2, 1e-8))
    throw std::invalid_argument("gaussian_w2: covariances must be symmetric positive semidefinite");
  const MatrixXd r2 = sym_sqrt(sigma2);
  const MatrixXd cross = sym_sqrt(r2 * sigma1 * r2);
  const double tr = sigma1.trace() + sigma2.trace() - 2.0 * cross.trace();
  return std::sqrt(std::max(0.0, (mu1 - mu2).squaredNorm() + tr));
}

namespace {

constexpr double kBig = std::numeric_limits<double>::infinity();

// Jonker-Volgenant on a dense matrix: column reduction with reduction transfer, then shortest
// augmenting paths for the rows still free. Augmenting row reduction is left out; on
// point clouds it cost several times more than it saved.
class Lapjv {
 public:
  Lapjv(const std::vector<double>& cost, int n)
      : c_(cost), n_(n), x_(n, -1), y_(n, -1), v_(n, kBig), free_(n), d_(n), pred_(n), cols_(n) {}

  std::vector<int> run() {
    const int n_free = column_reduction();
    for (int f = 0; f < n_free; ++f) augment(free_[f]);
    return x_;
  }

 private:
  double c(int i, int j) const { return c_[static_cast<std::size_t>(i) * n_ + j]; }

  int column_reduction() {
    for (int i = 0; i < n_; ++i)
      for (int j = 0; j < n_; ++j)
        if (c(i, j) < v_[j]) {
          v_[j] = c(i, j);
          y_[j] = i;
        }
    std::vector<char> unique(n_, 1);
    for (int j = n_ - 1; j >= 0; --j) {
      const int i = y_[j];
      if (x_[i] < 0) {
        x_[i] = j;
      } else {
        unique[i] = 0;
        y_[j] = -1;
      }
    }
    int n_free = 0;
    for (int i = 0; i < n_; ++i) {
      if (x_[i] < 0) {
        free_[n_free++] = i;
      } else if (unique[i]) {
        const int j = x_[i];
        double mn = kBig;
        for (int j2 = 0; j2 < n_; ++j2)
          if (j2 != j) mn = std::min(mn, c(i, j2) - v_[j2]);
        if (std::isfinite(mn)) v_[j] -= mn;
      }
    }
    return n_free;
  }

  // Moves the columns of minimal d to cols_[lo, hi).
  int find_minimum(int lo) {
    int hi = lo + 1;
    double mind = d_[cols_[lo]];
    for (int k = hi; k < n_; ++k) {
      const int j = cols_[k];
      if (d_[j] <= mind) {
        if (d_[j] < mind) {
          hi = lo;
          mind = d_[j];
        }
        cols_[k] = cols_[hi];
        cols_[hi++] = j;
      }
    }
    return hi;
  }

  int scan(int& lo, int& hi) {
    while (lo != hi) {
      int j = cols_[lo++];
      const int i = y_[j];
      const double mind = d_[j];
      const double h = c(i, j) - v_[j] - mind;
      for (int k = hi; k < n_; ++k) {
        j = cols_[k];
        const double red = c(i, j) - v_[j] - h;
        if (red < d_[j]) {
          d_[j] = red;
          pred_[j] = i;
          if (red <= mind) {
            if (y_[j] < 0) return j;
            cols_[k] = cols_[hi];
            cols_[hi++] = j;
          }
        }
      }
    }
    return -1;
  }

  void augment(int start) {
    for (int j = 0; j < n_; ++j) {
      cols_[j] = j;
      pred_[j] = start;
      d_[j] = c(start, j) - v_[j];
    }
    int lo = 0, hi = 0, ready = 0, end = -1;
    while (end < 0) {
      if (lo == hi) {
        ready = lo;
        hi = find_minimum(lo);
        for (int k = lo; k < hi; ++k)
          if (y_[cols_[k]] < 0) end = cols_[k];
      }
      if (end < 0) end = scan(lo, hi);
    }
    // scan() may return before the todo list holds a minimal column, so read the distance at the end.
    const double mind = d_[end];
    for (int k = 0; k < ready; ++k) v_[cols_[k]] += d_[cols_[k]] - mind;
    int i = -1, j = end;
    while (i != start) {
      i = pred_[j];
      y_[j] = i;
      std::swap(j, x_[i]);
    }
  }

  const std::vector<double>& c_;
  int n_;
  std::vector<int> x_, y_;
  std::vector<double> v_;
  std::vector<int> free_;
  std::vector<double> d_;
  std::vector<int> pred_, cols_;
};

}  // namespace

std::vector<int> solve_assignment(const std::vector<double>& cost, int n) {
  if (n < 0 || cost.size() != static_cast<std::size_t>(n) * n)
    throw std::invalid_argument("solve_assignment: cost must be n x n");
  for (double c : cost)
    if (!std::isfinite(c)) throw std::invalid_argument("solve_assignment: costs must be finite");
  if (n == 0) return {};
  return Lapjv(cost, n).run();
}

double empirical_w2(const MatrixXd& a, const MatrixXd& b) {
  const int n = static_cast<int>(a.cols());
  if (n == 0 || b.cols() == 0) throw std::invalid_argument("empirical_w2: empty sample");
  if (b.cols() != n) throw std::invalid_argument("empirical_w2: sample counts differ");
  if (a.rows() != b.rows()) throw std::invalid_argument("empirical_w2: dimension mismatch");
  if (n > kMaxExactW2Points) throw std::invalid_argument("empirical_w2: too many points for the exact method");
  // Centering adds only row and column constants to the cost, so the optimal matching is unchanged,
  // but the column reduction then starts much closer to it when the means differ.
  const MatrixXd ac = a.colwise() - a.rowwise().mean();
  const MatrixXd bc = b.colwise() - b.rowwise().mean();
  std::vector<double> cost(static_cast<std::size_t>(n) * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) cost[static_cast<std::size_t>(i) * n + j] = (ac.col(i) - bc.col(j)).squaredNorm();
  const auto match = solve_assignment(cost, n);
  std::vector<double> matched(n);
  for (int i = 0; i < n; ++i) matched[i] = (a.col(i) - b.col(match[i])).squaredNorm();
  // Summing in sorted order makes the value independent of which argument comes first.
  std::sort(matched.begin(), matched.end());
  double s = 0.0;
  for (double c : matched) s += c;
  return std::sqrt(s / n);
}

}  // namespace drcs
