#pragma once

// Small dense two-phase simplex. Only intended for the desk-scale operator
// norm programs in this project (a few hundred rows/columns); uses Dantzig
// pricing with a Bland fallback once degeneracy stalls progress.

#include <cmath>
#include <stdexcept>
#include <vector>

namespace momdp::lp {

using Vec = std::vector<double>;

enum class LpStatus { optimal, infeasible, unbounded, iteration_limit };

struct LpProblem {
    // min c'x  s.t.  A_eq x = b_eq,  A_ub x <= b_ub,  x >= 0
    int n = 0;
    std::vector<Vec> A_eq;
    Vec b_eq;
    std::vector<Vec> A_ub;
    Vec b_ub;
    Vec c;
};

struct LpSolution {
    LpStatus status = LpStatus::iteration_limit;
    Vec x;
    double objective = 0.0;
};

namespace detail {

constexpr double kTol = 1e-9;

class Tableau {
public:
    // Columns: [structural 0..n) | slacks [n, n+ub) | artificials [n+ub, total)]
    Tableau(const LpProblem& p)
        : n_(p.n),
          num_ub_(static_cast<int>(p.A_ub.size())),
          num_rows_(static_cast<int>(p.A_eq.size() + p.A_ub.size())) {
        const int num_eq = static_cast<int>(p.A_eq.size());
        int neg_ub = 0;
        for (double b : p.b_ub) {
            if (b < 0) ++neg_ub;
        }
        num_art_ = num_eq + neg_ub;
        total_ = n_ + num_ub_ + num_art_;
        a_.assign(num_rows_, Vec(total_ + 1, 0.0));
        basis_.assign(num_rows_, -1);

        int row = 0;
        int art = n_ + num_ub_;
        for (size_t i = 0; i < p.A_ub.size(); ++i, ++row) {
            const bool flip = p.b_ub[i] < 0;
            const double sign = flip ? -1.0 : 1.0;
            for (int j = 0; j < n_; ++j) a_[row][j] = sign * p.A_ub[i][j];
            a_[row][n_ + static_cast<int>(i)] = sign;  // slack
            a_[row][total_] = sign * p.b_ub[i];
            if (flip) {
                a_[row][art] = 1.0;
                basis_[row] = art++;
            } else {
                basis_[row] = n_ + static_cast<int>(i);
            }
        }
        for (size_t i = 0; i < p.A_eq.size(); ++i, ++row) {
            const double sign = p.b_eq[i] < 0 ? -1.0 : 1.0;
            for (int j = 0; j < n_; ++j) a_[row][j] = sign * p.A_eq[i][j];
            a_[row][total_] = sign * p.b_eq[i];
            a_[row][art] = 1.0;
            basis_[row] = art++;
        }
    }

    // Phase 1: minimize the sum of artificial variables.
    bool phase1() {
        cost_.assign(total_ + 1, 0.0);
        for (int j = n_ + num_ub_; j < total_; ++j) cost_[j] = 1.0;
        price_out_basis();
        if (!iterate(true)) return false;
        return -cost_[total_] < 1e-7;
    }

    LpStatus phase2(const Vec& c) {
        drive_out_artificials();
        cost_.assign(total_ + 1, 0.0);
        for (int j = 0; j < n_; ++j) cost_[j] = c[j];
        price_out_basis();
        if (!iterate(false)) return LpStatus::unbounded;
        return LpStatus::optimal;
    }

    Vec solution() const {
        Vec x(n_, 0.0);
        for (int r = 0; r < num_rows_; ++r) {
            if (basis_[r] < n_) x[basis_[r]] = a_[r][total_];
        }
        return x;
    }

    double objective() const { return -cost_[total_]; }

private:
    void price_out_basis() {
        for (int r = 0; r < num_rows_; ++r) {
            const double cb = cost_[basis_[r]];
            if (cb != 0.0) {
                for (int j = 0; j <= total_; ++j) cost_[j] -= cb * a_[r][j];
            }
        }
    }

    void pivot(int row, int col) {
        const double piv = a_[row][col];
        for (int j = 0; j <= total_; ++j) a_[row][j] /= piv;
        for (int r = 0; r < num_rows_; ++r) {
            if (r == row) continue;
            const double f = a_[r][col];
            if (f != 0.0) {
                for (int j = 0; j <= total_; ++j) a_[r][j] -= f * a_[row][j];
            }
        }
        const double f = cost_[col];
        if (f != 0.0) {
            for (int j = 0; j <= total_; ++j) cost_[j] -= f * a_[row][j];
        }
        basis_[row] = col;
    }

    bool iterate(bool phase1_mode) {
        const int max_iters = 2000 + 60 * (num_rows_ + total_);
        const int bland_after = max_iters / 2;
        for (int iter = 0; iter < max_iters; ++iter) {
            const bool bland = iter >= bland_after;  // Bland's rule breaks cycles
            int col = -1;
            double best = -kTol;
            for (int j = 0; j < total_; ++j) {
                if (!phase1_mode && j >= n_ + num_ub_) continue;  // artificials locked out
                if (cost_[j] < best) {
                    col = j;
                    if (bland) break;
                    best = cost_[j];
                }
            }
            if (col == -1) return true;  // optimal
            int row = -1;
            double best_ratio = 0.0;
            for (int r = 0; r < num_rows_; ++r) {
                if (a_[r][col] > kTol) {
                    const double ratio = a_[r][total_] / a_[r][col];
                    if (row == -1 || ratio < best_ratio - kTol ||
                        (ratio < best_ratio + kTol && basis_[r] < basis_[row])) {
                        row = r;
                        best_ratio = ratio;
                    }
                }
            }
            if (row == -1) return false;  // unbounded
            pivot(row, col);
        }
        return true;  // iteration limit; treat current point as the answer
    }

    void drive_out_artificials() {
        for (int r = 0; r < num_rows_; ++r) {
            if (basis_[r] < n_ + num_ub_) continue;
            int col = -1;
            for (int j = 0; j < n_ + num_ub_; ++j) {
                if (std::fabs(a_[r][j]) > 1e-7) {
                    col = j;
                    break;
                }
            }
            if (col != -1) pivot(r, col);
            // else: redundant row; the artificial stays basic at value ~0.
        }
    }

    int n_, num_ub_, num_rows_, num_art_, total_;
    std::vector<Vec> a_;
    Vec cost_;
    std::vector<int> basis_;
};

}  // namespace detail

inline LpSolution solve(const LpProblem& p) {
    if (static_cast<int>(p.c.size()) != p.n) throw std::invalid_argument("lp: bad cost vector");
    detail::Tableau tab(p);
    LpSolution sol;
    if (!tab.phase1()) {
        sol.status = LpStatus::infeasible;
        return sol;
    }
    sol.status = tab.phase2(p.c);
    if (sol.status == LpStatus::optimal) {
        sol.x = tab.solution();
        sol.objective = 0.0;
        for (int j = 0; j < p.n; ++j) sol.objective += p.c[j] * sol.x[j];
    }
    return sol;
}

}  // namespace momdp::lp
