//! Dense two-phase simplex for the small membership linear programs.
//!
//! Problems have at most a few hundred columns and a few dozen rows, so a full
//! tableau with Bland's anti-cycling rule is fast enough. The tableau is
//! rebuilt from the original data every [`REFRESH_EVERY`] pivots and at every
//! claimed optimum, and the claim is only accepted once the refreshed tableau
//! confirms primal and dual feasibility.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-7;
const COST_TOL: f64 = 1e-10;
const PHASE1_TOL: f64 = 1e-9;
const UNBOUNDED_TOL: f64 = 1e-7;
const MAX_PIVOTS: usize = 100_000;
const REFRESH_EVERY: usize = 40;
const MAX_CONFIRMATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq)]
pub enum LpOutcome {
    Optimal { x: Vec<f64>, objective: f64 },
    Infeasible { residual: f64 },
    Unbounded,
}

/// Original data with artificial columns appended: `[A | I] (x, s) = b`,
/// rows sign-flipped so that `b >= 0`.
struct Data {
    /// Row-major, `cols` wide.
    a: Vec<f64>,
    b: Vec<f64>,
    n: usize,
}

struct Tableau {
    /// Active (non-redundant) original rows, in tableau order.
    rows: Vec<usize>,
    cols: usize,
    /// `rows.len() + 1` rows (cost last) of `cols + 1` entries (rhs last).
    t: Vec<f64>,
    basis: Vec<usize>,
}

enum Step {
    Pivoted,
    Optimal,
    Unbounded,
}

impl Tableau {
    fn m(&self) -> usize {
        self.rows.len()
    }

    fn at(&self, i: usize, j: usize) -> f64 {
        self.t[i * (self.cols + 1) + j]
    }

    fn rhs(&self, i: usize) -> f64 {
        self.t[i * (self.cols + 1) + self.cols]
    }

    /// Rebuild `B^-1 [A | b]` and the reduced costs for `cost` from the
    /// original data. Returns false if the basis matrix is singular.
    fn refresh(&mut self, data: &Data, cost: &[f64]) -> bool {
        let m = self.m();
        let w = self.cols + 1;
        let bm = DMatrix::from_fn(m, m, |i, k| {
            data.a[self.rows[i] * self.cols + self.basis[k]]
        });
        let Some(inv) = bm.try_inverse() else {
            return false;
        };
        let mut t = vec![0.0; (m + 1) * w];
        for i in 0..m {
            let dst = &mut t[i * w..(i + 1) * w];
            for k in 0..m {
                let f = inv[(i, k)];
                if f == 0.0 {
                    continue;
                }
                let r = self.rows[k];
                let src = &data.a[r * self.cols..(r + 1) * self.cols];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += f * s;
                }
                dst[self.cols] += f * data.b[r];
            }
            let s = &mut dst[self.cols];
            if *s < 0.0 && *s > -1e-12 {
                *s = 0.0;
            }
        }
        let (body, cost_row) = t.split_at_mut(m * w);
        cost_row[..self.cols].copy_from_slice(cost);
        for i in 0..m {
            let cb = cost[self.basis[i]];
            if cb == 0.0 {
                continue;
            }
            for (d, s) in cost_row.iter_mut().zip(&body[i * w..(i + 1) * w]) {
                *d -= cb * s;
            }
        }
        self.t = t;
        true
    }

    fn pivot(&mut self, pr: usize, pc: usize) {
        let w = self.cols + 1;
        let m = self.m();
        let p = self.t[pr * w + pc];
        for j in 0..w {
            self.t[pr * w + j] /= p;
        }
        let prow: Vec<f64> = self.t[pr * w..(pr + 1) * w].to_vec();
        for i in 0..=m {
            if i == pr {
                continue;
            }
            let f = self.t[i * w + pc];
            if f == 0.0 {
                continue;
            }
            for (j, pv) in prow.iter().enumerate() {
                self.t[i * w + j] -= f * pv;
            }
        }
        for i in 0..m {
            let v = &mut self.t[i * w + self.cols];
            if *v < 0.0 && *v > -1e-12 {
                *v = 0.0;
            }
        }
        self.basis[pr] = pc;
    }

    /// One Bland step over columns `< allowed`.
    fn step(&mut self, allowed: usize) -> Step {
        let m = self.m();
        for pc in (0..allowed).filter(|&j| self.at(m, j) < -COST_TOL) {
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..m {
                let a = self.at(i, pc);
                if a > PIVOT_TOL {
                    let ratio = self.rhs(i).max(0.0) / a;
                    let cand = (ratio, self.basis[i], i);
                    best = match best {
                        None => Some(cand),
                        Some(b)
                            if ratio < b.0 - 1e-14 || (ratio <= b.0 + 1e-14 && cand.1 < b.1) =>
                        {
                            Some(cand)
                        }
                        keep => keep,
                    };
                }
            }
            match best {
                Some((_, _, pr)) => {
                    self.pivot(pr, pc);
                    return Step::Pivoted;
                }
                None if self.at(m, pc) < -UNBOUNDED_TOL => return Step::Unbounded,
                None => {}
            }
        }
        Step::Optimal
    }

    /// Minimize `cost` over columns `< allowed`; returns false when unbounded.
    fn run(&mut self, data: &Data, cost: &[f64], allowed: usize) -> Result<bool> {
        let mut confirmations = 0;
        let mut since_refresh = 0;
        for _ in 0..MAX_PIVOTS {
            match self.step(allowed) {
                Step::Pivoted => {
                    since_refresh += 1;
                    if since_refresh >= REFRESH_EVERY {
                        if !self.refresh(data, cost) {
                            return Err(Error::Lp("singular basis during refresh".into()));
                        }
                        since_refresh = 0;
                    }
                }
                Step::Unbounded => return Ok(false),
                Step::Optimal => {
                    if !self.refresh(data, cost) {
                        return Err(Error::Lp("singular basis at optimum".into()));
                    }
                    since_refresh = 0;
                    let m = self.m();
                    if (0..m).any(|i| self.rhs(i) < -1e-9) {
                        return Err(Error::Lp("basis lost primal feasibility".into()));
                    }
                    if (0..allowed).all(|j| self.at(m, j) >= -COST_TOL) {
                        return Ok(true);
                    }
                    confirmations += 1;
                    if confirmations > MAX_CONFIRMATIONS {
                        return Err(Error::Lp("optimality could not be confirmed".into()));
                    }
                }
            }
        }
        Err(Error::Lp(format!(
            "no convergence after {MAX_PIVOTS} pivots"
        )))
    }
}

/// Minimize `c.x` subject to `A x = b`, `x >= 0`; `a` is row-major with
/// `b.len()` rows.
pub fn solve_standard(c: &[f64], a: &[Vec<f64>], b: &[f64]) -> Result<LpOutcome> {
    let n = c.len();
    let m = b.len();
    if a.len() != m || a.iter().any(|row| row.len() != n) {
        return Err(Error::Dimension("LP constraint matrix shape".into()));
    }
    if c.iter()
        .chain(b)
        .chain(a.iter().flatten())
        .any(|v| !v.is_finite())
    {
        return Err(Error::NonFinite);
    }
    let cols = n + m;
    let mut am = vec![0.0; m * cols];
    let mut bb = vec![0.0; m];
    for i in 0..m {
        let sign = if b[i] < 0.0 { -1.0 } else { 1.0 };
        for j in 0..n {
            am[i * cols + j] = sign * a[i][j];
        }
        am[i * cols + n + i] = 1.0;
        bb[i] = sign * b[i];
    }
    let data = Data { a: am, b: bb, n };
    let mut tab = Tableau {
        rows: (0..m).collect(),
        cols,
        t: Vec::new(),
        basis: (n..n + m).collect(),
    };

    let mut phase1 = vec![0.0; cols];
    for v in phase1.iter_mut().skip(n) {
        *v = 1.0;
    }
    tab.refresh(&data, &phase1);
    // phase 1 is bounded below by zero, so a reported ray is numerical noise
    tab.run(&data, &phase1, data.n)?;
    let residual: f64 = (0..tab.m())
        .filter(|&i| tab.basis[i] >= n)
        .map(|i| tab.rhs(i))
        .sum();
    let scale = 1.0 + b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    if residual > PHASE1_TOL * scale {
        return Ok(LpOutcome::Infeasible { residual });
    }

    // drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped
    let mut i = 0;
    while i < tab.m() {
        if tab.basis[i] < n {
            i += 1;
            continue;
        }
        let j = (0..n).max_by(|&x, &y| tab.at(i, x).abs().total_cmp(&tab.at(i, y).abs()));
        match j {
            Some(j) if tab.at(i, j).abs() > 1e-9 => {
                tab.pivot(i, j);
                i += 1;
            }
            _ => {
                tab.rows.remove(i);
                tab.basis.remove(i);
                if !tab.refresh(&data, &phase1) {
                    return Err(Error::Lp(
                        "singular basis after dropping a redundant row".into(),
                    ));
                }
            }
        }
    }

    let mut cost = c.to_vec();
    cost.extend(std::iter::repeat(0.0).take(m));
    if !tab.refresh(&data, &cost) {
        return Err(Error::Lp("singular basis entering phase 2".into()));
    }
    if !tab.run(&data, &cost, n)? {
        return Ok(LpOutcome::Unbounded);
    }
    let mut x = vec![0.0; n];
    for i in 0..tab.m() {
        if tab.basis[i] < n {
            x[tab.basis[i]] = tab.rhs(i).max(0.0);
        }
    }
    let objective = c.iter().zip(&x).map(|(a, b)| a * b).sum();
    Ok(LpOutcome::Optimal { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn optimal(o: LpOutcome) -> (Vec<f64>, f64) {
        match o {
            LpOutcome::Optimal { x, objective } => (x, objective),
            other => panic!("expected optimum, got {other:?}"),
        }
    }

    #[test]
    fn small_textbook_problem() {
        // max 3x + 2y s.t. x + y <= 4, x + 3y <= 6, x <= 3
        let c = [-3.0, -2.0, 0.0, 0.0, 0.0];
        let a = vec![
            vec![1.0, 1.0, 1.0, 0.0, 0.0],
            vec![1.0, 3.0, 0.0, 1.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0, 1.0],
        ];
        let (x, obj) = optimal(solve_standard(&c, &a, &[4.0, 6.0, 3.0]).unwrap());
        assert!((obj + 11.0).abs() < 1e-12);
        assert!((x[0] - 3.0).abs() < 1e-12 && (x[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn redundant_rows_and_negative_rhs() {
        let c = [1.0, 1.0];
        let a = vec![vec![1.0, -1.0], vec![-2.0, 2.0]];
        let (x, _) = optimal(solve_standard(&c, &a, &[-1.0, 2.0]).unwrap());
        assert!((x[1] - x[0] - 1.0).abs() < 1e-12);
        assert!(x[0].abs() < 1e-12);
    }

    #[test]
    fn infeasible_and_unbounded() {
        let a = vec![vec![1.0, 1.0]];
        assert!(matches!(
            solve_standard(&[0.0, 0.0], &a, &[-1.0]).unwrap(),
            LpOutcome::Infeasible { .. }
        ));
        let a = vec![vec![1.0, -1.0]];
        assert_eq!(
            solve_standard(&[-1.0, 0.0], &a, &[0.0]).unwrap(),
            LpOutcome::Unbounded
        );
    }
}
