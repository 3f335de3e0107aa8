#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <istream>
#include <limits>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "robustree/errors.hpp"
#include "robustree/metrics.hpp"

namespace robustree {

// Row player (trees) payoffs of a zero-sum game; the column player receives
// the negation.
class PayoffMatrix {
 public:
  PayoffMatrix() = default;
  PayoffMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  PayoffMatrix(std::initializer_list<std::initializer_list<double>> rows) {
    rows_ = rows.size();
    cols_ = rows_ ? rows.begin()->size() : 0;
    for (const auto& r : rows) {
      if (r.size() != cols_) throw DataError("matrix rows have different lengths");
      data_.insert(data_.end(), r.begin(), r.end());
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double& at(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }
  double at(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double min() const { return *std::min_element(data_.begin(), data_.end()); }
  double max() const { return *std::max_element(data_.begin(), data_.end()); }

  // Whitespace-separated numbers, one matrix row per non-blank line; '#' starts a comment.
  static PayoffMatrix parse(std::istream& in) {
    PayoffMatrix m;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
      std::istringstream fields(line);
      std::vector<double> row;
      std::string tok;
      while (fields >> tok) {
        std::size_t used = 0;
        double v = 0.0;
        try {
          v = std::stod(tok, &used);
        } catch (const std::exception&) {
          used = 0;
        }
        if (used != tok.size() || !std::isfinite(v)) {
          throw DataError("matrix line " + std::to_string(line_no) + ": not a finite number: '" + tok + "'");
        }
        row.push_back(v);
      }
      if (row.empty()) continue;
      if (m.rows_ == 0) m.cols_ = row.size();
      if (row.size() != m.cols_) {
        throw DataError("matrix line " + std::to_string(line_no) + ": expected " + std::to_string(m.cols_) +
                        " entries, found " + std::to_string(row.size()));
      }
      m.data_.insert(m.data_.end(), row.begin(), row.end());
      ++m.rows_;
    }
    if (m.rows_ == 0) throw DataError("matrix is empty");
    return m;
  }

  void check_finite() const {
    if (rows_ == 0 || cols_ == 0) throw InternalFault("payoff matrix has no entries");
    for (double v : data_)
      if (!std::isfinite(v)) throw InternalFault("payoff matrix has a non-finite entry");
  }

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

enum class NashMethod { LemkeHowson, LexicographicLemkeHowson, SupportEnumeration };

inline std::string_view to_string(NashMethod m) {
  switch (m) {
    case NashMethod::LemkeHowson: return "lemke-howson";
    case NashMethod::LexicographicLemkeHowson: return "lexicographic-lemke-howson";
    case NashMethod::SupportEnumeration: return "support-enumeration";
  }
  return "?";
}

struct Equilibrium {
  std::vector<double> row;  // over matrix rows
  std::vector<double> col;  // over matrix columns
  double value = 0.0;       // row player's expected payoff
  NashMethod method = NashMethod::LemkeHowson;
  int label = 0;
};

struct NashDiagnostics {
  std::size_t solves = 0;
  std::size_t support_fallbacks = 0;
  std::size_t lexicographic_fallbacks = 0;
};

inline double game_value(const PayoffMatrix& a, std::span<const double> x, std::span<const double> y) {
  double v = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) v += x[i] * a.at(i, j) * y[j];
  return v;
}

// Largest gain either player could obtain by deviating to a pure strategy.
inline double best_response_gap(const PayoffMatrix& a, std::span<const double> x, std::span<const double> y) {
  const double v = game_value(a, x, y);
  double best_row = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double r = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) r += a.at(i, j) * y[j];
    best_row = std::max(best_row, r);
  }
  double best_col = std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < a.cols(); ++j) {
    double c = 0.0;
    for (std::size_t i = 0; i < a.rows(); ++i) c += x[i] * a.at(i, j);
    best_col = std::min(best_col, c);
  }
  return std::max(best_row - v, v - best_col);
}

namespace detail {

inline constexpr double kNashTolerance = 1e-9;

// Clips tiny or negative weights and renormalizes; nullopt when nothing is left.
inline std::optional<std::vector<double>> clean_distribution(std::vector<double> p) {
  double total = 0.0;
  for (double& v : p) {
    if (!std::isfinite(v)) return std::nullopt;
    if (v < kProbabilityFloor) v = 0.0;
    total += v;
  }
  if (!(total > 0.0)) return std::nullopt;
  for (double& v : p) v /= total;
  return p;
}

inline std::optional<Equilibrium> finish(const PayoffMatrix& a, std::vector<double> x, std::vector<double> y,
                                         NashMethod method, int label) {
  auto cx = clean_distribution(std::move(x));
  auto cy = clean_distribution(std::move(y));
  if (!cx || !cy) return std::nullopt;
  if (best_response_gap(a, *cx, *cy) > kNashTolerance) return std::nullopt;
  Equilibrium eq{std::move(*cx), std::move(*cy), 0.0, method, label};
  eq.value = game_value(a, eq.row, eq.col);
  return eq;
}

// Dense tableau for {M z + I s = 1, z, s >= 0}. Column c carries label
// labels[c]; the slack columns double as the lexicographic reference basis.
class Tableau {
 public:
  Tableau(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), t_(rows * (cols + 1), 0.0), basis_(rows) {}

  double& at(std::size_t r, std::size_t c) { return t_[r * (cols_ + 1) + c]; }
  double at(std::size_t r, std::size_t c) const { return t_[r * (cols_ + 1) + c]; }
  double& rhs(std::size_t r) { return t_[r * (cols_ + 1) + cols_]; }
  double rhs(std::size_t r) const { return t_[r * (cols_ + 1) + cols_]; }

  std::vector<int> labels;          // per column
  std::vector<std::size_t> slacks;  // slack column of each row, in row order
  std::size_t rows() const { return rows_; }

  std::size_t basic(std::size_t r) const { return basis_[r]; }
  void set_basic(std::size_t r, std::size_t c) { basis_[r] = c; }

  std::optional<std::size_t> column_of(int label) const {
    for (std::size_t c = 0; c < cols_; ++c)
      if (labels[c] == label) return c;
    return std::nullopt;
  }

  // Ratio test on `col`; returns the leaving row or nullopt when unbounded.
  std::optional<std::size_t> ratio_test(std::size_t col, bool lexicographic) const {
    constexpr double kPivotEps = 1e-12;
    std::optional<std::size_t> best;
    for (std::size_t r = 0; r < rows_; ++r) {
      const double c = at(r, col);
      if (c <= kPivotEps) continue;
      if (!best) {
        best = r;
        continue;
      }
      if (lexicographic) {
        if (lex_less(r, *best, col)) best = r;
      } else {
        const double lhs = rhs(r) * at(*best, col);
        const double rhs_best = rhs(*best) * c;
        if (lhs < rhs_best - 1e-15 * std::max(1.0, std::abs(rhs_best))) best = r;
      }
    }
    return best;
  }

  void pivot(std::size_t row, std::size_t col) {
    const double p = at(row, col);
    for (std::size_t c = 0; c <= cols_; ++c) t_[row * (cols_ + 1) + c] /= p;
    for (std::size_t r = 0; r < rows_; ++r) {
      if (r == row) continue;
      const double f = at(r, col);
      if (f == 0.0) continue;
      for (std::size_t c = 0; c <= cols_; ++c) t_[r * (cols_ + 1) + c] -= f * t_[row * (cols_ + 1) + c];
      at(r, col) = 0.0;
    }
    basis_[row] = col;
  }

 private:
  // Compares rows r and s of [rhs, slack columns] scaled by the pivot column.
  bool lex_less(std::size_t r, std::size_t s, std::size_t col) const {
    const double cr = at(r, col);
    const double cs = at(s, col);
    auto cmp = [&](double a, double b) {
      const double x = a / cr;
      const double y = b / cs;
      const double tol = 1e-11 * std::max({1.0, std::abs(x), std::abs(y)});
      if (x < y - tol) return -1;
      if (x > y + tol) return 1;
      return 0;
    };
    if (int c = cmp(rhs(r), rhs(s)); c != 0) return c < 0;
    for (std::size_t k : slacks) {
      if (int c = cmp(at(r, k), at(s, k)); c != 0) return c < 0;
    }
    return r < s;
  }

  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> t_;
  std::vector<std::size_t> basis_;
};

// One complementary pivoting path of the positive bimatrix game (A', B').
inline std::optional<Equilibrium> lemke_howson_path(const PayoffMatrix& a, int label, bool lexicographic) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  const double lo = a.min();
  const double hi = a.max();

  // Row polytope: n constraints over x (labels 0..m-1), slacks labelled m+j.
  Tableau tp(n, m + n);
  // Column polytope: m constraints over y (labels m..m+n-1), slacks labelled i.
  Tableau tq(m, m + n);
  tp.labels.resize(m + n);
  tq.labels.resize(m + n);
  for (std::size_t i = 0; i < m; ++i) tp.labels[i] = static_cast<int>(i);
  for (std::size_t j = 0; j < n; ++j) tp.labels[m + j] = static_cast<int>(m + j);
  for (std::size_t j = 0; j < n; ++j) tq.labels[j] = static_cast<int>(m + j);
  for (std::size_t i = 0; i < m; ++i) tq.labels[n + i] = static_cast<int>(i);
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < m; ++i) tp.at(j, i) = hi - a.at(i, j) + 1.0;
    tp.at(j, m + j) = 1.0;
    tp.rhs(j) = 1.0;
    tp.set_basic(j, m + j);
    tp.slacks.push_back(m + j);
  }
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) tq.at(i, j) = a.at(i, j) - lo + 1.0;
    tq.at(i, n + i) = 1.0;
    tq.rhs(i) = 1.0;
    tq.set_basic(i, n + i);
    tq.slacks.push_back(n + i);
  }

  const std::size_t limit = 10 * (m + n) * (m + n);
  Tableau* current = static_cast<std::size_t>(label) < m ? &tp : &tq;
  int entering = label;
  for (std::size_t step = 0; step < limit; ++step) {
    Tableau& t = *current;
    const auto col = t.column_of(entering);
    if (!col) return std::nullopt;
    const auto row = t.ratio_test(*col, lexicographic);
    if (!row) return std::nullopt;
    const int leaving = t.labels[t.basic(*row)];
    t.pivot(*row, *col);
    if (leaving == label) {
      std::vector<double> x(m, 0.0);
      std::vector<double> y(n, 0.0);
      for (std::size_t r = 0; r < tp.rows(); ++r) {
        const int l = tp.labels[tp.basic(r)];
        if (static_cast<std::size_t>(l) < m) x[static_cast<std::size_t>(l)] = tp.rhs(r);
      }
      for (std::size_t r = 0; r < tq.rows(); ++r) {
        const int l = tq.labels[tq.basic(r)];
        if (static_cast<std::size_t>(l) >= m) y[static_cast<std::size_t>(l) - m] = tq.rhs(r);
      }
      return finish(a, std::move(x), std::move(y),
                    lexicographic ? NashMethod::LexicographicLemkeHowson : NashMethod::LemkeHowson, label);
    }
    entering = leaving;
    current = current == &tp ? &tq : &tp;
  }
  return std::nullopt;
}

// Solves the square system in place by Gaussian elimination with partial
// pivoting; false when singular.
inline bool solve_linear(std::vector<double>& mat, std::vector<double>& b, std::size_t k) {
  for (std::size_t c = 0; c < k; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < k; ++r)
      if (std::abs(mat[r * k + c]) > std::abs(mat[piv * k + c])) piv = r;
    if (std::abs(mat[piv * k + c]) < 1e-13) return false;
    if (piv != c) {
      for (std::size_t j = 0; j < k; ++j) std::swap(mat[c * k + j], mat[piv * k + j]);
      std::swap(b[c], b[piv]);
    }
    for (std::size_t r = c + 1; r < k; ++r) {
      const double f = mat[r * k + c] / mat[c * k + c];
      if (f == 0.0) continue;
      for (std::size_t j = c; j < k; ++j) mat[r * k + j] -= f * mat[c * k + j];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = k; c-- > 0;) {
    double s = b[c];
    for (std::size_t j = c + 1; j < k; ++j) s -= mat[c * k + j] * b[j];
    b[c] = s / mat[c * k + c];
  }
  return true;
}

inline double binomial(std::size_t n, std::size_t k) {
  double r = 1.0;
  for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
  return r;
}

template <typename Fn>
bool for_each_subset(std::size_t n, std::size_t k, Fn&& fn) {
  std::vector<std::size_t> idx(k);
  for (std::size_t i = 0; i < k; ++i) idx[i] = i;
  for (;;) {
    if (fn(idx)) return true;
    std::size_t i = k;
    while (i > 0 && idx[i - 1] == n - k + i - 1) --i;
    if (i == 0) return false;
    ++idx[i - 1];
    for (std::size_t j = i; j < k; ++j) idx[j] = idx[j - 1] + 1;
  }
}

}  // namespace detail

inline constexpr std::size_t kSupportEnumerationLimit = 8;

// Equilibria over equal-size support pairs in increasing size order. Each
// candidate solves the indifference system on the positive offset matrix
// and must pass the best-response check.
inline std::vector<Equilibrium> support_enumeration(const PayoffMatrix& a, bool first_only = false) {
  a.check_finite();
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  if (std::min(m, n) > kSupportEnumerationLimit) {
    throw ConfigError("support enumeration needs min(rows, cols) <= " + std::to_string(kSupportEnumerationLimit));
  }
  const double shift = 1.0 - a.min();
  std::vector<Equilibrium> found;
  auto known = [&](const Equilibrium& e) {
    for (const auto& f : found) {
      bool same = true;
      for (std::size_t i = 0; i < m && same; ++i) same = std::abs(f.row[i] - e.row[i]) <= 1e-9;
      for (std::size_t j = 0; j < n && same; ++j) same = std::abs(f.col[j] - e.col[j]) <= 1e-9;
      if (same) return true;
    }
    return false;
  };
  for (std::size_t k = 1; k <= std::min(m, n); ++k) {
    const bool stop = detail::for_each_subset(m, k, [&](const std::vector<std::size_t>& rows) {
      return detail::for_each_subset(n, k, [&](const std::vector<std::size_t>& cols) {
        // Unknowns (u_1..u_k, w) with A'_{I,J} u = w 1 and sum u = 1; here
        // solved as A'_{I,J} u' = 1 with u = u' / sum u' (kernel form).
        std::vector<double> mx(k * k);
        std::vector<double> by(k, 1.0);
        std::vector<double> bx(k, 1.0);
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t c = 0; c < k; ++c) mx[r * k + c] = a.at(rows[r], cols[c]) + shift;
        std::vector<double> mt(k * k);
        for (std::size_t r = 0; r < k; ++r)
          for (std::size_t c = 0; c < k; ++c) mt[r * k + c] = mx[c * k + r];
        if (!detail::solve_linear(mx, by, k) || !detail::solve_linear(mt, bx, k)) return false;
        std::vector<double> x(m, 0.0);
        std::vector<double> y(n, 0.0);
        for (std::size_t r = 0; r < k; ++r) {
          if (bx[r] < -1e-12 || by[r] < -1e-12) return false;
          x[rows[r]] = std::max(0.0, bx[r]);
          y[cols[r]] = std::max(0.0, by[r]);
        }
        auto eq = detail::finish(a, std::move(x), std::move(y), NashMethod::SupportEnumeration, -1);
        if (!eq || known(*eq)) return false;
        found.push_back(std::move(*eq));
        return first_only;
      });
    });
    if (stop) break;
  }
  return found;
}

// One mixed equilibrium. The plain complementary path from `initial_label`
// comes first; if it fails, small games fall back to support enumeration
// and larger ones to lexicographic paths over every label starting from
// `initial_label`.
inline Equilibrium lemke_howson(const PayoffMatrix& a, int initial_label = 0, NashDiagnostics* diag = nullptr) {
  a.check_finite();
  const int labels = static_cast<int>(a.rows() + a.cols());
  if (initial_label < 0 || initial_label >= labels) {
    throw ConfigError("initial label must lie in [0, " + std::to_string(labels - 1) + "]");
  }
  if (diag) ++diag->solves;
  if (auto eq = detail::lemke_howson_path(a, initial_label, false)) return *eq;

  const std::size_t small = std::min(a.rows(), a.cols());
  constexpr double kSupportBudget = 2e5;
  double budget = 0.0;
  for (std::size_t k = 1; k <= small; ++k) budget += detail::binomial(a.rows(), k) * detail::binomial(a.cols(), k);
  if (small <= kSupportEnumerationLimit && budget <= kSupportBudget) {
    if (diag) ++diag->support_fallbacks;
    auto all = support_enumeration(a, true);
    if (!all.empty()) return all.front();
  }
  if (diag) ++diag->lexicographic_fallbacks;
  for (int k = 0; k < labels; ++k) {
    const int label = (initial_label + k) % labels;
    if (auto eq = detail::lemke_howson_path(a, label, true)) return *eq;
  }
  throw InternalFault("no equilibrium found for a " + std::to_string(a.rows()) + "x" + std::to_string(a.cols()) +
                      " game");
}

// Payoff matrix of pure trees against pure perturbations under the
// evaluator's objective.
inline PayoffMatrix build_payoff_matrix(std::span<const std::shared_ptr<const TreeGenotype>> trees,
                                        std::span<const std::shared_ptr<const PerturbationGenotype>> perts,
                                        Evaluator& eval) {
  if (trees.empty() || perts.empty()) throw InternalFault("payoff matrix needs both strategy sets");
  PayoffMatrix m(trees.size(), perts.size());
  eval.for_each(trees.size(), [&](std::size_t i) {
    for (std::size_t j = 0; j < perts.size(); ++j) m.at(i, j) = eval.payoff(*trees[i], *perts[j]);
  });
  return m;
}

}  // namespace robustree
