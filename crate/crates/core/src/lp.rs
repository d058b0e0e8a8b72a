//! Dense two-phase simplex for the small feasibility programs behind hull
//! membership. Bland's rule throughout, so degenerate corner-point sets cannot
//! cycle.

use crate::error::{Error, Result};

const PIVOT_EPS: f64 = 1e-11;
const MAX_ITERATIONS: usize = 50_000;

#[derive(Debug, Clone, PartialEq)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
    /// One multiplier per equality row, with `A^T y <= c` at optimality.
    pub duals: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

struct Tableau {
    rows: Vec<Vec<f64>>, // m rows of (n structural + m artificial + rhs)
    basis: Vec<usize>,
    n: usize,
    m: usize,
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.n + self.m]
    }

    fn pivot(&mut self, r: usize, col: usize) {
        let width = self.rows[r].len();
        let p = self.rows[r][col];
        for v in self.rows[r].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.rows[r].clone();
        for (i, row) in self.rows.iter_mut().enumerate() {
            if i == r {
                continue;
            }
            let f = row[col];
            if f != 0.0 {
                for j in 0..width {
                    row[j] -= f * pivot_row[j];
                }
                row[col] = 0.0;
            }
        }
        self.basis[r] = col;
    }

    fn reduced_costs(&self, cost: &[f64]) -> Vec<f64> {
        let width = self.n + self.m;
        (0..width)
            .map(|j| {
                let z: f64 = (0..self.m).map(|r| cost[self.basis[r]] * self.rows[r][j]).sum();
                cost[j] - z
            })
            .collect()
    }

    /// Minimizes `cost` over the current basis; columns with `allowed[j] ==
    /// false` never enter.
    fn optimize(&mut self, cost: &[f64], allowed: &[bool]) -> Result<bool> {
        for _ in 0..MAX_ITERATIONS {
            let reduced = self.reduced_costs(cost);
            let Some(enter) = (0..self.n + self.m).find(|&j| allowed[j] && reduced[j] < -PIVOT_EPS) else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.m {
                let a = self.rows[r][enter];
                if a > PIVOT_EPS {
                    let ratio = self.rhs(r) / a;
                    let better = match leave {
                        None => true,
                        Some((lr, best)) => {
                            ratio < best - PIVOT_EPS || (ratio <= best + PIVOT_EPS && self.basis[r] < self.basis[lr])
                        }
                    };
                    if better {
                        leave = Some((r, ratio));
                    }
                }
            }
            match leave {
                Some((r, _)) => self.pivot(r, enter),
                None => return Ok(false),
            }
        }
        Err(Error::Lp(format!(
            "simplex did not terminate in {MAX_ITERATIONS} pivots"
        )))
    }
}

/// Minimizes `c . x` subject to `A x = b`, `x >= 0`. `a` holds the rows of `A`.
pub fn solve_standard_form(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let m = a.len();
    let n = c.len();
    if b.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Lp("inconsistent problem dimensions".into()));
    }
    if c.iter().chain(b).chain(a.iter().flatten()).any(|v| !v.is_finite()) {
        return Err(Error::Lp("non-finite coefficient".into()));
    }
    let mut flipped = vec![false; m];
    let rows = (0..m)
        .map(|r| {
            let sign = if b[r] < 0.0 {
                flipped[r] = true;
                -1.0
            } else {
                1.0
            };
            let mut row: Vec<f64> = a[r].iter().map(|v| sign * v).collect();
            row.extend((0..m).map(|k| if k == r { 1.0 } else { 0.0 }));
            row.push(sign * b[r]);
            row
        })
        .collect();
    let mut tab = Tableau {
        rows,
        basis: (n..n + m).collect(),
        n,
        m,
    };

    // phase one: drive the artificials out
    let mut phase_one = vec![0.0; n + m];
    phase_one[n..].iter_mut().for_each(|v| *v = 1.0);
    let everything = vec![true; n + m];
    tab.optimize(&phase_one, &everything)?;
    let infeasibility: f64 = (0..m).filter(|&r| tab.basis[r] >= n).map(|r| tab.rhs(r)).sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if infeasibility > 1e-9 * scale {
        return Ok(LpOutcome::Infeasible);
    }
    for r in 0..m {
        if tab.basis[r] >= n {
            if let Some(col) = (0..n).find(|&j| tab.rows[r][j].abs() > PIVOT_EPS) {
                tab.pivot(r, col);
            }
            // otherwise the row is redundant and its artificial stays at zero
        }
    }

    // phase two
    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat_n(0.0, m));
    let mut allowed = vec![true; n + m];
    allowed[n..].iter_mut().for_each(|v| *v = false);
    if !tab.optimize(&cost, &allowed)? {
        return Ok(LpOutcome::Unbounded);
    }

    let mut x = vec![0.0; n];
    for r in 0..m {
        if tab.basis[r] < n {
            x[tab.basis[r]] = tab.rhs(r).max(0.0);
        }
    }
    // the artificial columns hold B^-1, so y = c_B B^-1
    let duals = (0..m)
        .map(|k| {
            let y: f64 = (0..m).map(|r| cost[tab.basis[r]] * tab.rows[r][n + k]).sum();
            if flipped[k] {
                -y
            } else {
                y
            }
        })
        .collect();
    let objective = c.iter().zip(&x).map(|(ci, xi)| ci * xi).sum();
    Ok(LpOutcome::Optimal(LpSolution { x, objective, duals }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(out: LpOutcome) -> LpSolution {
        match out {
            LpOutcome::Optimal(s) => s,
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_program_with_duals() {
        // min -x1 - 2 x2  s.t. x1 + x2 + s1 = 4, x1 + 3 x2 + s2 = 6
        let c = [-1.0, -2.0, 0.0, 0.0];
        let a = vec![vec![1.0, 1.0, 1.0, 0.0], vec![1.0, 3.0, 0.0, 1.0]];
        let s = optimal(solve_standard_form(&c, &a, &[4.0, 6.0]).unwrap());
        assert!((s.x[0] - 3.0).abs() < 1e-12 && (s.x[1] - 1.0).abs() < 1e-12);
        assert!((s.objective + 5.0).abs() < 1e-12);
        // strong duality: b . y equals the optimum
        let by = 4.0 * s.duals[0] + 6.0 * s.duals[1];
        assert!((by - s.objective).abs() < 1e-12);
        assert!((s.duals[0] + 0.5).abs() < 1e-12 && (s.duals[1] + 0.5).abs() < 1e-12);
    }

    #[test]
    fn negative_rhs_and_dual_sign() {
        // min x1 s.t. -x1 + s = -2  (x1 >= 2)
        let s = optimal(solve_standard_form(&[1.0, 0.0], &[vec![-1.0, 1.0]], &[-2.0]).unwrap());
        assert!((s.x[0] - 2.0).abs() < 1e-12);
        assert!((-2.0 * s.duals[0] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        // x1 + x2 = -1 with x >= 0
        assert_eq!(
            solve_standard_form(&[0.0, 0.0], &[vec![1.0, 1.0]], &[-1.0]).unwrap(),
            LpOutcome::Infeasible
        );
        // min -x1 s.t. x1 - x2 = 0
        assert_eq!(
            solve_standard_form(&[-1.0, 0.0], &[vec![1.0, -1.0]], &[0.0]).unwrap(),
            LpOutcome::Unbounded
        );
    }

    #[test]
    fn redundant_rows_are_tolerated() {
        let a = vec![vec![1.0, 1.0], vec![2.0, 2.0]];
        let s = optimal(solve_standard_form(&[1.0, 2.0], &a, &[1.0, 2.0]).unwrap());
        assert!((s.objective - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(solve_standard_form(&[1.0], &[vec![1.0, 2.0]], &[1.0]).is_err());
        assert!(solve_standard_form(&[f64::NAN], &[vec![1.0]], &[1.0]).is_err());
    }
}
