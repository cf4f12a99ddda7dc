//! Small linear-system helpers for section-time assignment: bounded
//! feasibility (backed by `minilp`) and an exact projection onto equality
//! constraints.

use minilp::{ComparisonOp, OptimizationDirection, Problem};

/// Sparse row `sum(coef * x[var]) = rhs`.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Row {
    pub terms: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Row {
    pub fn residual(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, c)| c * x[v]).sum::<f64>() - self.rhs
    }
}

/// A point satisfying every equality row within the given variable bounds.
pub(crate) fn feasible_point(bounds: &[(f64, f64)], rows: &[Row]) -> Option<Vec<f64>> {
    let mut problem = Problem::new(OptimizationDirection::Minimize);
    let vars: Vec<_> = bounds.iter().map(|&b| problem.add_var(0.0, b)).collect();
    for row in rows {
        let expr: Vec<_> = row.terms.iter().map(|&(v, c)| (vars[v], c)).collect();
        problem.add_constraint(expr.as_slice(), ComparisonOp::Eq, row.rhs);
    }
    let solution = problem.solve().ok()?;
    Some(vars.iter().map(|&v| *solution.var_value(v)).collect())
}

/// Minimum-norm correction of `x` onto `{x : rows hold exactly}`:
/// `x - A^T (A A^T)^+ (A x - b)`. Dependent rows are dropped.
pub(crate) fn project(rows: &[Row], x: &[f64]) -> Vec<f64> {
    let m = rows.len();
    if m == 0 {
        return x.to_vec();
    }
    let n = x.len();
    let mut dense = vec![vec![0.0; n]; m];
    for (i, row) in rows.iter().enumerate() {
        for &(v, c) in &row.terms {
            dense[i][v] += c;
        }
    }
    let mut gram = vec![vec![0.0; m]; m];
    for i in 0..m {
        for j in 0..m {
            gram[i][j] = (0..n).map(|k| dense[i][k] * dense[j][k]).sum();
        }
    }
    let residual: Vec<f64> = rows.iter().map(|r| r.residual(x)).collect();
    let y = solve_symmetric(gram, residual);
    let mut out = x.to_vec();
    for (i, yi) in y.iter().enumerate() {
        for k in 0..n {
            out[k] -= dense[i][k] * yi;
        }
    }
    out
}

/// Gaussian elimination with partial pivoting; rank-deficient directions are
/// set to zero.
fn solve_symmetric(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let m = b.len();
    let scale = a
        .iter()
        .flat_map(|r| r.iter())
        .fold(0.0_f64, |acc, v| acc.max(v.abs()))
        .max(1.0);
    let mut pivot_col = vec![None; m];
    let mut row = 0;
    for col in 0..m {
        if row == m {
            break;
        }
        let (best, val) = (row..m)
            .map(|r| (r, a[r][col].abs()))
            .max_by(|x, y| x.1.total_cmp(&y.1))
            .expect("non-empty range");
        if val <= 1e-12 * scale {
            continue;
        }
        a.swap(row, best);
        b.swap(row, best);
        for r in 0..m {
            if r != row {
                let f = a[r][col] / a[row][col];
                if f != 0.0 {
                    let pivot = a[row].clone();
                    for (x, p) in a[r][col..m].iter_mut().zip(&pivot[col..m]) {
                        *x -= f * p;
                    }
                    b[r] -= f * b[row];
                }
            }
        }
        pivot_col[row] = Some(col);
        row += 1;
    }
    let mut y = vec![0.0; m];
    for r in 0..row {
        if let Some(c) = pivot_col[r] {
            y[c] = b[r] / a[r][c];
        }
    }
    y
}
