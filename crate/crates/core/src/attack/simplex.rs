//! Dense two-phase simplex for small linear programs.
//!
//! Solves `min c·x` subject to `A_eq x = b_eq`, `A_le x ≤ b_le`,
//! `0 ≤ x ≤ u`. Rows are equilibrated by their largest coefficient before
//! the tableau is built. Pivoting follows Bland's rule in both phases, so
//! the iteration cannot cycle and the result is a deterministic function of
//! the input.

/// Pivot and reduced-cost tolerance on the equilibrated tableau.
pub const PIVOT_TOLERANCE: f64 = 1e-9;

/// Phase-one objective above which the program is declared infeasible.
pub const FEASIBILITY_TOLERANCE: f64 = 1e-9;

const MAX_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    /// `residual` is the phase-one optimum on the equilibrated rows.
    Infeasible { residual: f64 },
    Unbounded,
    IterationLimit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum RowKind {
    Eq,
    Le,
}

#[derive(Debug, Clone)]
struct Row {
    coeffs: Vec<f64>,
    rhs: f64,
    kind: RowKind,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    objective: Vec<f64>,
    rows: Vec<Row>,
    upper: Vec<f64>,
}

impl LinearProgram {
    /// A program over `objective.len()` nonnegative variables with no upper bounds.
    pub fn minimize(objective: Vec<f64>) -> Self {
        let n = objective.len();
        Self {
            objective,
            rows: Vec::new(),
            upper: vec![f64::INFINITY; n],
        }
    }

    pub fn num_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn equality(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(coeffs.len(), self.num_vars(), "row length mismatch");
        self.rows.push(Row {
            coeffs,
            rhs,
            kind: RowKind::Eq,
        });
        self
    }

    pub fn at_most(mut self, coeffs: Vec<f64>, rhs: f64) -> Self {
        assert_eq!(coeffs.len(), self.num_vars(), "row length mismatch");
        self.rows.push(Row {
            coeffs,
            rhs,
            kind: RowKind::Le,
        });
        self
    }

    pub fn upper_bounds(mut self, upper: Vec<f64>) -> Self {
        assert_eq!(upper.len(), self.num_vars(), "bound length mismatch");
        self.upper = upper;
        self
    }

    pub fn solve(&self) -> LpOutcome {
        Tableau::build(self).run()
    }
}

struct Tableau {
    /// `m` constraint rows followed by the phase-two and phase-one cost rows;
    /// the last column is the right-hand side.
    t: Vec<Vec<f64>>,
    basis: Vec<usize>,
    n_struct: usize,
    first_artificial: usize,
    n_cols: usize,
    obj_scale: f64,
}

impl Tableau {
    fn build(lp: &LinearProgram) -> Self {
        let n = lp.num_vars();
        let mut rows: Vec<Row> = lp.rows.clone();
        for (j, &u) in lp.upper.iter().enumerate() {
            if u.is_finite() {
                let mut coeffs = vec![0.0; n];
                coeffs[j] = 1.0;
                rows.push(Row {
                    coeffs,
                    rhs: u,
                    kind: RowKind::Le,
                });
            }
        }
        for row in &mut rows {
            let scale = row.coeffs.iter().fold(0.0f64, |m, a| m.max(a.abs()));
            let scale = if scale > 0.0 { scale } else { row.rhs.abs() };
            if scale > 0.0 {
                row.coeffs.iter_mut().for_each(|a| *a /= scale);
                row.rhs /= scale;
            }
        }

        let m = rows.len();
        let n_slack = rows.iter().filter(|r| r.kind == RowKind::Le).count();
        let needs_artificial: Vec<bool> = rows
            .iter()
            .map(|r| r.kind == RowKind::Eq || r.rhs < 0.0)
            .collect();
        let n_art = needs_artificial.iter().filter(|&&b| b).count();
        let first_slack = n;
        let first_artificial = n + n_slack;
        let n_cols = first_artificial + n_art;

        let mut t = vec![vec![0.0; n_cols + 1]; m + 2];
        let mut basis = vec![0; m];
        let (mut slack_col, mut art_col) = (first_slack, first_artificial);
        for (i, row) in rows.iter().enumerate() {
            let sign = if row.rhs < 0.0 { -1.0 } else { 1.0 };
            for (j, &a) in row.coeffs.iter().enumerate() {
                t[i][j] = sign * a;
            }
            t[i][n_cols] = sign * row.rhs;
            if row.kind == RowKind::Le {
                t[i][slack_col] = sign;
                if !needs_artificial[i] {
                    basis[i] = slack_col;
                }
                slack_col += 1;
            }
            if needs_artificial[i] {
                t[i][art_col] = 1.0;
                basis[i] = art_col;
                art_col += 1;
            }
        }

        let obj_scale = lp.objective.iter().fold(0.0f64, |m, c| m.max(c.abs()));
        let obj_scale = if obj_scale > 0.0 { obj_scale } else { 1.0 };
        for (j, &c) in lp.objective.iter().enumerate() {
            t[m][j] = c / obj_scale;
        }
        for j in first_artificial..n_cols {
            t[m + 1][j] = 1.0;
        }
        // price out the initial basis in both cost rows
        for i in 0..m {
            let b = basis[i];
            for cost_row in [m, m + 1] {
                let cb = t[cost_row][b];
                if cb != 0.0 {
                    for j in 0..=n_cols {
                        t[cost_row][j] -= cb * t[i][j];
                    }
                }
            }
        }

        Self {
            t,
            basis,
            n_struct: n,
            first_artificial,
            n_cols,
            obj_scale,
        }
    }

    fn m(&self) -> usize {
        self.basis.len()
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let p = self.t[row][col];
        for v in self.t[row].iter_mut() {
            *v /= p;
        }
        let pivot_row = self.t[row].clone();
        for (i, r) in self.t.iter_mut().enumerate() {
            if i == row {
                continue;
            }
            let f = r[col];
            if f != 0.0 {
                for (v, pv) in r.iter_mut().zip(&pivot_row) {
                    *v -= f * pv;
                }
                r[col] = 0.0;
            }
        }
        self.basis[row] = col;
    }

    /// Bland-rule iterations against `cost_row`, considering columns `< col_limit`.
    fn iterate(&mut self, cost_row: usize, col_limit: usize) -> Result<(), LpOutcome> {
        let rhs = self.n_cols;
        for _ in 0..MAX_ITERATIONS {
            let entering = (0..col_limit).find(|&j| self.t[cost_row][j] < -PIVOT_TOLERANCE);
            let Some(col) = entering else {
                return Ok(());
            };
            let mut best: Option<(usize, f64)> = None;
            for i in 0..self.m() {
                let a = self.t[i][col];
                if a > PIVOT_TOLERANCE {
                    let ratio = self.t[i][rhs] / a;
                    best = match best {
                        None => Some((i, ratio)),
                        Some((bi, br)) => {
                            if ratio < br - 1e-15
                                || (ratio <= br + 1e-15 && self.basis[i] < self.basis[bi])
                            {
                                Some((i, ratio))
                            } else {
                                Some((bi, br))
                            }
                        }
                    };
                }
            }
            match best {
                Some((row, _)) => self.pivot(row, col),
                None => return Err(LpOutcome::Unbounded),
            }
        }
        Err(LpOutcome::IterationLimit)
    }

    fn run(mut self) -> LpOutcome {
        let m = self.m();
        let rhs = self.n_cols;
        if let Err(e) = self.iterate(m + 1, self.n_cols) {
            return e;
        }
        let residual = -self.t[m + 1][rhs];
        if residual > FEASIBILITY_TOLERANCE {
            return LpOutcome::Infeasible { residual };
        }

        // drive remaining artificials out of the basis; rows where that is
        // impossible are redundant and their artificial stays at zero
        for i in 0..m {
            if self.basis[i] >= self.first_artificial {
                if let Some(col) =
                    (0..self.first_artificial).find(|&j| self.t[i][j].abs() > PIVOT_TOLERANCE)
                {
                    self.pivot(i, col);
                }
            }
        }

        if let Err(e) = self.iterate(m, self.first_artificial) {
            return e;
        }

        let mut x = vec![0.0; self.n_struct];
        for (i, &b) in self.basis.iter().enumerate() {
            if b < self.n_struct {
                x[b] = self.t[i][rhs];
            }
        }
        LpOutcome::Optimal {
            x,
            objective: -self.t[m][rhs] * self.obj_scale,
        }
    }
}
