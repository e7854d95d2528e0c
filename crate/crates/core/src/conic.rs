//! Small dense primal-dual interior-point solver for linear matrix
//! inequalities.
//!
//! Problem form:
//!
//! ```text
//! minimize    c.x
//! subject to  A x = b
//!             S_k = H_k - sum_j x_j G_{k,j}  is PSD for every block k
//! ```
//!
//! Blocks are real symmetric; Hermitian constraints enter through the real
//! embedding `[[Re, -Im], [Im, Re]]` and scalar inequalities are 1 x 1 blocks.
//! The method is Mehrotra predictor-corrector with Nesterov-Todd scaling and an
//! infeasible start. Each block lists only the variables it touches, which
//! keeps the Schur complement assembly cheap when there are many small blocks.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

const REFINEMENT_ROUNDS: usize = 2;

/// One constraint `H - sum_j x_j G_j` PSD.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub h: DMatrix<f64>,
    /// `(variable index, G_j)` for every variable with a nonzero coefficient.
    pub terms: Vec<(usize, DMatrix<f64>)>,
}

impl LmiBlock {
    pub fn dim(&self) -> usize {
        self.h.nrows()
    }

    /// `H - sum_j x_j G_j`.
    pub fn slack(&self, x: &[f64]) -> DMatrix<f64> {
        let mut s = self.h.clone();
        for (j, g) in &self.terms {
            s -= g * x[*j];
        }
        s
    }
}

#[derive(Debug, Clone)]
pub struct ConicProblem {
    pub c: Vec<f64>,
    /// `p x n`; may contain linearly dependent rows.
    pub a: DMatrix<f64>,
    pub b: Vec<f64>,
    pub blocks: Vec<LmiBlock>,
}

impl ConicProblem {
    pub fn n_vars(&self) -> usize {
        self.c.len()
    }

    fn check(&self) -> Result<()> {
        let n = self.n_vars();
        if n == 0 {
            return Err(Error::Dimension("conic problem without variables".into()));
        }
        if self.a.ncols() != n || self.a.nrows() != self.b.len() {
            return Err(Error::Dimension("equality constraint shape".into()));
        }
        for (k, blk) in self.blocks.iter().enumerate() {
            let d = blk.dim();
            if blk.h.ncols() != d {
                return Err(Error::Dimension(format!("block {k} is not square")));
            }
            for (j, g) in &blk.terms {
                if *j >= n || g.nrows() != d || g.ncols() != d {
                    return Err(Error::Dimension(format!("block {k} term for variable {j}")));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverSettings {
    pub max_iterations: usize,
    /// Absolute duality gap `<S, Z>` at termination.
    pub gap_tol: f64,
    pub rel_gap_tol: f64,
    /// Relative primal and dual residuals at termination.
    pub feas_tol: f64,
    /// Fraction of the step to the boundary.
    pub step_fraction: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            max_iterations: 100,
            gap_tol: 1e-8,
            rel_gap_tol: 1e-8,
            feas_tol: 1e-9,
            step_fraction: 0.99,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Status {
    Optimal,
    /// Progress stalled short of the tolerances; the best iterate is
    /// returned.
    NearOptimal,
    /// Iteration limit reached; the last iterate is returned.
    MaxIterations,
}

#[derive(Debug, Clone)]
pub struct ConicSolution {
    pub status: Status,
    pub x: Vec<f64>,
    /// Multipliers of the original equality rows (zero for dropped
    /// dependent rows).
    pub y: Vec<f64>,
    pub s: Vec<DMatrix<f64>>,
    pub z: Vec<DMatrix<f64>>,
    pub primal_objective: f64,
    pub dual_objective: f64,
    pub gap: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub iterations: usize,
}

/// Anything that can solve a [`ConicProblem`].
pub trait ConicBackend: Sync {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution>;
}

/// The built-in interior-point method.
#[derive(Debug, Clone, Copy, Default)]
pub struct InteriorPoint {
    pub settings: SolverSettings,
}

impl ConicBackend for InteriorPoint {
    fn solve(&self, problem: &ConicProblem) -> Result<ConicSolution> {
        solve(problem, &self.settings)
    }
}

fn inner(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn sym(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Drop rows of `[A | b]` that are linear combinations of earlier rows.
/// Returns the kept row indices; errors if a dropped row is inconsistent.
fn independent_rows(a: &DMatrix<f64>, b: &[f64]) -> Result<Vec<usize>> {
    let n = a.ncols();
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for i in 0..a.nrows() {
        let mut v = DVector::from_iterator(n + 1, a.row(i).iter().copied().chain([b[i]]));
        let scale = a.row(i).norm().max(1e-300);
        for _ in 0..2 {
            for u in &basis {
                let p = u.rows(0, n).dot(&v.rows(0, n));
                v.axpy(-p, u, 1.0);
            }
        }
        let rn = v.rows(0, n).norm();
        if rn > 1e-9 * scale {
            basis.push(v / rn);
            kept.push(i);
        } else if v[n].abs() > 1e-8 * (1.0 + b[i].abs()) {
            return Err(Error::Infeasible(format!(
                "equality row {i} is a combination of earlier rows with a different right-hand side"
            )));
        }
    }
    Ok(kept)
}

struct Scaling {
    r: DMatrix<f64>,
    rinv: DMatrix<f64>,
    /// `(R R^T)^-1`
    t: DMatrix<f64>,
    lambda: DVector<f64>,
}

fn nt_scaling(s: &DMatrix<f64>, z: &DMatrix<f64>) -> Result<Scaling> {
    let l1 = s
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("slack left the cone".into()))?
        .l();
    let l2 = z
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("dual left the cone".into()))?
        .l();
    let m = l2.transpose() * &l1;
    let svd = m.svd(true, true);
    let v = svd
        .v_t
        .ok_or_else(|| Error::Solver("svd failed".into()))?
        .transpose();
    let lambda = svd.singular_values;
    if lambda.iter().any(|&l| !(l > 0.0)) {
        return Err(Error::Solver("degenerate scaling".into()));
    }
    let d = lambda.len();
    let mut r = &l1 * &v;
    for j in 0..d {
        let f = 1.0 / lambda[j].sqrt();
        for i in 0..d {
            r[(i, j)] *= f;
        }
    }
    let l1inv = l1
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    let mut rinv = v.transpose() * l1inv;
    for i in 0..d {
        let f = lambda[i].sqrt();
        for j in 0..d {
            rinv[(i, j)] *= f;
        }
    }
    let t = sym(rinv.transpose() * &rinv);
    Ok(Scaling { r, rinv, t, lambda })
}

/// Largest `alpha` with `x + alpha dx` PSD, given PSD `x`.
fn max_step(x: &DMatrix<f64>, dx: &DMatrix<f64>) -> Result<f64> {
    let l = x
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Solver("iterate left the cone".into()))?
        .l();
    let d = x.nrows();
    let linv = l
        .solve_lower_triangular(&DMatrix::identity(d, d))
        .ok_or_else(|| Error::Solver("singular Cholesky factor".into()))?;
    let m = sym(&linv * dx * linv.transpose());
    let min = SymmetricEigen::new(m).eigenvalues.min();
    Ok(if min >= 0.0 {
        f64::INFINITY
    } else {
        -1.0 / min
    })
}

/// Reduced KKT solver for a fixed scaling.
struct Kkt<'a> {
    p: &'a ConicProblem,
    a: DMatrix<f64>,
    h_chol: nalgebra::Cholesky<f64, nalgebra::Dyn>,
    /// `H^-1 A^T`
    hia: DMatrix<f64>,
    s_chol: Option<nalgebra::Cholesky<f64, nalgebra::Dyn>>,
    t: Vec<DMatrix<f64>>,
    /// `R R^T`, the inverse of `t`.
    tinv: Vec<DMatrix<f64>>,
}

impl<'a> Kkt<'a> {
    fn new(
        p: &'a ConicProblem,
        a: DMatrix<f64>,
        t: Vec<DMatrix<f64>>,
        tinv: Vec<DMatrix<f64>>,
    ) -> Result<Self> {
        let n = p.n_vars();
        let mut h = DMatrix::<f64>::zeros(n, n);
        for (blk, tk) in p.blocks.iter().zip(&t) {
            let m: Vec<DMatrix<f64>> = blk.terms.iter().map(|(_, g)| tk * g * tk).collect();
            for (ii, (i, gi)) in blk.terms.iter().enumerate() {
                for (jj, (j, _)) in blk.terms.iter().enumerate().skip(ii) {
                    let v = inner(gi, &m[jj]);
                    h[(*i, *j)] += v;
                    if ii != jj {
                        h[(*j, *i)] += v;
                    }
                }
            }
        }
        // H alone can be singular (directions that leave every cone
        // unchanged but are pinned by the equalities); since A dx = ry,
        // solving with H + A^T A changes nothing but the conditioning
        let h = sym(h + a.transpose() * &a);
        let tr = h.diagonal().amax().max(f64::MIN_POSITIVE);
        let h_chol = [0.0, 1e-14, 1e-12, 1e-10]
            .iter()
            .find_map(|&reg| (&h + DMatrix::identity(n, n) * (reg * tr)).cholesky())
            .ok_or_else(|| Error::Solver("Schur complement is not positive definite".into()))?;
        let hia = h_chol.solve(&a.transpose());
        let s_chol = if a.nrows() > 0 {
            let s = sym(&a * &hia);
            let p = s.nrows();
            let scale = s.diagonal().amax().max(f64::MIN_POSITIVE);
            // small diagonal shifts absorb rounding when H is badly
            // conditioned; refinement then restores accuracy
            let chol = [0.0, 1e-14, 1e-12, 1e-10]
                .iter()
                .find_map(|&reg| (&s + DMatrix::identity(p, p) * (reg * scale)).cholesky());
            Some(chol.ok_or_else(|| Error::Solver("equality Schur complement is singular".into()))?)
        } else {
            None
        };
        Ok(Self {
            p,
            a,
            h_chol,
            hia,
            s_chol,
            t,
            tinv,
        })
    }

    /// [`Kkt::solve`] followed by rounds of iterative refinement on the full
    /// system `A^T dy + G^T dz = rx`, `A dx = ry`, `G dx - W^T W dz = rz`.
    fn solve_refined(
        &self,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &[DMatrix<f64>],
    ) -> (DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>) {
        let (mut dx, mut dy, mut dz) = self.solve(rx, ry, rz);
        for _ in 0..REFINEMENT_ROUNDS {
            let ex = rx - self.a.transpose() * &dy - apply_gt(self.p, &dz);
            let ey = ry - &self.a * &dx;
            let gdx = apply_g(self.p, dx.as_slice());
            let ez: Vec<DMatrix<f64>> = (0..rz.len())
                .map(|k| &rz[k] - &gdx[k] + &self.tinv[k] * &dz[k] * &self.tinv[k])
                .collect();
            let (cx, cy, cz) = self.solve(&ex, &ey, &ez);
            dx += cx;
            dy += cy;
            for (d, c) in dz.iter_mut().zip(cz) {
                *d += c;
            }
        }
        (dx, dy, dz)
    }

    /// Solve `H dx + A^T dy = r1`, `A dx = ry`, then
    /// `dz_k = T_k (G dx - rz_k) T_k`, where `r1 = rx + G^T (T rz T)`.
    fn solve(
        &self,
        rx: &DVector<f64>,
        ry: &DVector<f64>,
        rz: &[DMatrix<f64>],
    ) -> (DVector<f64>, DVector<f64>, Vec<DMatrix<f64>>) {
        let trzt: Vec<DMatrix<f64>> = rz.iter().zip(&self.t).map(|(r, t)| t * r * t).collect();
        let r1 = rx + apply_gt(self.p, &trzt) + self.a.transpose() * ry;
        let hr1 = self.h_chol.solve(&r1);
        let (dx, dy) = match &self.s_chol {
            Some(sc) => {
                let dy = sc.solve(&(&self.a * &hr1 - ry));
                let dx = &hr1 - &self.hia * &dy;
                (dx, dy)
            }
            None => (hr1, DVector::zeros(0)),
        };
        let gdx = apply_g(self.p, dx.as_slice());
        let dz = gdx
            .iter()
            .zip(rz)
            .zip(&self.t)
            .map(|((g, r), t)| sym(t * (g - r) * t))
            .collect();
        (dx, dy, dz)
    }
}

fn apply_g(p: &ConicProblem, x: &[f64]) -> Vec<DMatrix<f64>> {
    p.blocks
        .iter()
        .map(|blk| {
            let d = blk.dim();
            let mut m = DMatrix::zeros(d, d);
            for (j, g) in &blk.terms {
                if x[*j] != 0.0 {
                    m += g * x[*j];
                }
            }
            m
        })
        .collect()
}

fn apply_gt(p: &ConicProblem, z: &[DMatrix<f64>]) -> DVector<f64> {
    let mut out = DVector::zeros(p.n_vars());
    for (blk, zk) in p.blocks.iter().zip(z) {
        for (j, g) in &blk.terms {
            out[*j] += inner(g, zk);
        }
    }
    out
}

/// Shift a block list into the interior: `x + (1 + a) I` when `a = -min eig >= 0`.
fn push_interior(ms: &mut [DMatrix<f64>]) {
    let mut worst = f64::NEG_INFINITY;
    for m in ms.iter() {
        let min = SymmetricEigen::new(sym(m.clone())).eigenvalues.min();
        worst = worst.max(-min);
    }
    if worst >= -1e-8 {
        for m in ms.iter_mut() {
            let d = m.nrows();
            *m += DMatrix::identity(d, d) * (1.0 + worst);
        }
    }
}

struct Iterate {
    x: DVector<f64>,
    y: DVector<f64>,
    s: Vec<DMatrix<f64>>,
    z: Vec<DMatrix<f64>>,
}

struct Residuals {
    rx: DVector<f64>,
    ry: DVector<f64>,
    rz: Vec<DMatrix<f64>>,
    gap: f64,
    pobj: f64,
    dobj: f64,
    pres: f64,
    dres: f64,
}

impl Residuals {
    fn rel_gap(&self) -> f64 {
        if self.pobj < 0.0 {
            self.gap / -self.pobj
        } else if self.dobj > 0.0 {
            self.gap / self.dobj
        } else {
            f64::INFINITY
        }
    }

    /// Worst of the three termination measures.
    fn score(&self) -> f64 {
        self.pres.max(self.dres).max(self.gap.min(self.rel_gap()))
    }
}

struct Ipm<'a> {
    problem: &'a ConicProblem,
    a: DMatrix<f64>,
    b: DVector<f64>,
    c: DVector<f64>,
    hs: Vec<DMatrix<f64>>,
    bnorm: f64,
    cnorm: f64,
    cone_degree: usize,
}

impl Ipm<'_> {
    fn residuals(&self, it: &Iterate) -> Residuals {
        let gx = apply_g(self.problem, it.x.as_slice());
        let rx = -(apply_gt(self.problem, &it.z) + self.a.transpose() * &it.y + &self.c);
        let ry = &self.b - &self.a * &it.x;
        let rz: Vec<DMatrix<f64>> = (0..self.hs.len())
            .map(|k| &self.hs[k] - &gx[k] - &it.s[k])
            .collect();
        let gap: f64 = it.s.iter().zip(&it.z).map(|(a, b)| inner(a, b)).sum();
        let pobj = self.c.dot(&it.x);
        let dobj = -self
            .hs
            .iter()
            .zip(&it.z)
            .map(|(h, zk)| inner(h, zk))
            .sum::<f64>()
            - self.b.dot(&it.y);
        let pres = ry
            .norm()
            .max(rz.iter().map(|r| r.norm()).fold(0.0, f64::max))
            / self.bnorm;
        let dres = rx.norm() / self.cnorm;
        Residuals {
            rx,
            ry,
            rz,
            gap,
            pobj,
            dobj,
            pres,
            dres,
        }
    }

    fn initial_point(&self) -> Result<Iterate> {
        // two least-squares problems with identity scaling
        let ident: Vec<DMatrix<f64>> = self
            .hs
            .iter()
            .map(|h| DMatrix::identity(h.nrows(), h.nrows()))
            .collect();
        let kkt0 = Kkt::new(self.problem, self.a.clone(), ident.clone(), ident)?;
        let n = self.problem.n_vars();
        let neg_h: Vec<DMatrix<f64>> = self.hs.iter().map(|h| -h).collect();
        let (x, _, _) = kkt0.solve(&DVector::zeros(n), &self.b, &neg_h);
        let gx = apply_g(self.problem, x.as_slice());
        let mut s: Vec<DMatrix<f64>> = self.hs.iter().zip(&gx).map(|(h, g)| sym(h - g)).collect();
        let zero_blocks: Vec<DMatrix<f64>> = self
            .hs
            .iter()
            .map(|h| DMatrix::zeros(h.nrows(), h.ncols()))
            .collect();
        let (_, y, mut z) = kkt0.solve(&(-&self.c), &DVector::zeros(self.b.len()), &zero_blocks);
        push_interior(&mut s);
        push_interior(&mut z);
        Ok(Iterate { x, y, s, z })
    }

    /// One Mehrotra predictor-corrector step in place.
    fn step(&self, it: &mut Iterate, res: &Residuals, step_fraction: f64) -> Result<()> {
        let (s, z) = (&it.s, &it.z);
        let mu = res.gap / self.cone_degree as f64;
        let sc: Vec<Scaling> = s
            .iter()
            .zip(z)
            .map(|(sk, zk)| nt_scaling(sk, zk))
            .collect::<Result<_>>()?;
        let kkt = Kkt::new(
            self.problem,
            self.a.clone(),
            sc.iter().map(|w| w.t.clone()).collect(),
            sc.iter().map(|w| sym(&w.r * w.r.transpose())).collect(),
        )?;

        // Newton direction for the scaled complementarity right-hand side
        // `rc`: lambda o (ds~ + dz~) = rc
        let direction = |rc: &[DMatrix<f64>]| {
            let u: Vec<DMatrix<f64>> = rc
                .iter()
                .zip(&sc)
                .map(|(r, w)| {
                    let d = w.lambda.len();
                    DMatrix::from_fn(d, d, |i, j| 2.0 * r[(i, j)] / (w.lambda[i] + w.lambda[j]))
                })
                .collect();
            let wtu: Vec<DMatrix<f64>> = u
                .iter()
                .zip(&sc)
                .map(|(uk, w)| sym(&w.r * uk * w.r.transpose()))
                .collect();
            let rz_hat: Vec<DMatrix<f64>> = res.rz.iter().zip(&wtu).map(|(r, wu)| r - wu).collect();
            let (dx, dy, dz) = kkt.solve_refined(&res.rx, &res.ry, &rz_hat);
            let ds: Vec<DMatrix<f64>> = wtu
                .iter()
                .zip(&dz)
                .zip(&sc)
                .map(|((wu, dzk), w)| {
                    let rrt = &w.r * w.r.transpose();
                    sym(wu - &rrt * dzk * &rrt)
                })
                .collect();
            (dx, dy, dz, ds)
        };
        let step_to_boundary = |ds: &[DMatrix<f64>], dz: &[DMatrix<f64>]| -> Result<f64> {
            let mut alpha = f64::INFINITY;
            for k in 0..s.len() {
                alpha = alpha.min(max_step(&s[k], &ds[k])?);
                alpha = alpha.min(max_step(&z[k], &dz[k])?);
            }
            Ok(alpha)
        };

        let lam_sq: Vec<DMatrix<f64>> = sc
            .iter()
            .map(|w| DMatrix::from_diagonal(&w.lambda.map(|l| -l * l)))
            .collect();
        let (_, _, dz_a, ds_a) = direction(&lam_sq);
        let alpha_a = step_to_boundary(&ds_a, &dz_a)?.min(1.0);
        let gap_a: f64 = (0..s.len())
            .map(|k| inner(&(&s[k] + &ds_a[k] * alpha_a), &(&z[k] + &dz_a[k] * alpha_a)))
            .sum();
        let sigma = (gap_a.max(0.0) / res.gap).powi(3).min(1.0);

        let rc: Vec<DMatrix<f64>> = sc
            .iter()
            .enumerate()
            .map(|(k, w)| {
                let d = w.lambda.len();
                let dst = sym(&w.rinv * &ds_a[k] * w.rinv.transpose());
                let dzt = sym(w.r.transpose() * &dz_a[k] * &w.r);
                let mut m = -(&dst * &dzt + &dzt * &dst) * 0.5;
                for i in 0..d {
                    m[(i, i)] += sigma * mu - w.lambda[i] * w.lambda[i];
                }
                m
            })
            .collect();
        let (dx, dy, dz, ds) = direction(&rc);
        let alpha = (step_fraction * step_to_boundary(&ds, &dz)?).min(1.0);
        if !(alpha > 1e-14) {
            return Err(Error::Solver("step length collapsed".into()));
        }
        it.x += &dx * alpha;
        it.y += &dy * alpha;
        for k in 0..it.s.len() {
            it.s[k] = sym(&it.s[k] + &ds[k] * alpha);
            it.z[k] = sym(&it.z[k] + &dz[k] * alpha);
        }
        Ok(())
    }
}

/// Iterates this much worse than the best one seen count as divergence.
const DIVERGENCE_FACTOR: f64 = 1e3;
/// A stalled run still returns its best iterate when it is this accurate.
const NEAR_OPTIMAL_TOL: f64 = 1e-6;

pub fn solve(problem: &ConicProblem, settings: &SolverSettings) -> Result<ConicSolution> {
    problem.check()?;
    let n = problem.n_vars();
    let kept = independent_rows(&problem.a, &problem.b)?;
    let b = DVector::from_iterator(kept.len(), kept.iter().map(|&i| problem.b[i]));
    let hs: Vec<DMatrix<f64>> = problem.blocks.iter().map(|b| b.h.clone()).collect();
    let ipm = Ipm {
        problem,
        a: DMatrix::from_fn(kept.len(), n, |i, j| problem.a[(kept[i], j)]),
        bnorm: b
            .norm()
            .max(hs.iter().map(|h| h.norm()).fold(0.0, f64::max))
            .max(1.0),
        b,
        c: DVector::from_column_slice(&problem.c),
        cnorm: DVector::from_column_slice(&problem.c).norm().max(1.0),
        hs,
        cone_degree: problem.blocks.iter().map(LmiBlock::dim).sum(),
    };

    let finish = |it: Iterate, res: &Residuals, status: Status, iterations: usize| {
        let mut y_full = vec![0.0; problem.b.len()];
        for (k, &i) in kept.iter().enumerate() {
            y_full[i] = it.y[k];
        }
        ConicSolution {
            status,
            x: it.x.as_slice().to_vec(),
            y: y_full,
            s: it.s,
            z: it.z,
            primal_objective: res.pobj,
            dual_objective: res.dobj,
            gap: res.gap,
            primal_residual: res.pres,
            dual_residual: res.dres,
            iterations,
        }
    };

    let mut it = ipm.initial_point()?;
    let mut best: Option<(Iterate, Residuals, f64)> = None;
    let mut iterations = 0;
    loop {
        let res = ipm.residuals(&it);
        let converged = res.pres <= settings.feas_tol
            && res.dres <= settings.feas_tol
            && (res.gap <= settings.gap_tol || res.rel_gap() <= settings.rel_gap_tol);
        if converged {
            return Ok(finish(it, &res, Status::Optimal, iterations));
        }
        let score = res.score();
        let best_score = best.as_ref().map_or(f64::INFINITY, |b| b.2);
        if score < best_score {
            best = Some((
                Iterate {
                    x: it.x.clone(),
                    y: it.y.clone(),
                    s: it.s.clone(),
                    z: it.z.clone(),
                },
                ipm.residuals(&it),
                score,
            ));
        }
        let diverged = score > DIVERGENCE_FACTOR * best_score;
        let outcome = if diverged {
            Err(Error::Solver("iterates diverged".into()))
        } else if iterations >= settings.max_iterations {
            Err(Error::Solver(format!(
                "no convergence in {iterations} iterations"
            )))
        } else {
            ipm.step(&mut it, &res, settings.step_fraction)
        };
        if let Err(e) = outcome {
            return match best {
                Some((b, bres, s)) if s <= NEAR_OPTIMAL_TOL => {
                    Ok(finish(b, &bres, Status::NearOptimal, iterations))
                }
                Some((b, bres, _)) if iterations >= settings.max_iterations => {
                    Ok(finish(b, &bres, Status::MaxIterations, iterations))
                }
                _ => Err(Error::Solver(format!("{e} at iteration {iterations}"))),
            };
        }
        iterations += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar(v: f64) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, v)
    }

    #[test]
    fn linear_program() {
        // min -x - y s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0: optimum (8/5, 6/5)
        let blocks = vec![
            LmiBlock {
                h: scalar(4.0),
                terms: vec![(0, scalar(1.0)), (1, scalar(2.0))],
            },
            LmiBlock {
                h: scalar(6.0),
                terms: vec![(0, scalar(3.0)), (1, scalar(1.0))],
            },
            LmiBlock {
                h: scalar(0.0),
                terms: vec![(0, scalar(-1.0))],
            },
            LmiBlock {
                h: scalar(0.0),
                terms: vec![(1, scalar(-1.0))],
            },
        ];
        let p = ConicProblem {
            c: vec![-1.0, -1.0],
            a: DMatrix::zeros(0, 2),
            b: vec![],
            blocks,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert_eq!(sol.status, Status::Optimal);
        assert!(
            (sol.x[0] - 1.6).abs() < 1e-7 && (sol.x[1] - 1.2).abs() < 1e-7,
            "{:?}",
            sol.x
        );
    }

    #[test]
    fn max_eigenvalue_as_sdp() {
        // min t s.t. t I - M PSD  ->  t = lambda_max(M)
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 1.0, 0.0, 1.0, 3.0, 1.0, 0.0, 1.0, 4.0]);
        let blocks = vec![LmiBlock {
            h: -m.clone(),
            terms: vec![(0, -DMatrix::identity(3, 3))],
        }];
        let p = ConicProblem {
            c: vec![1.0],
            a: DMatrix::zeros(0, 1),
            b: vec![],
            blocks,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        let lmax = SymmetricEigen::new(m).eigenvalues.max();
        assert!((sol.x[0] - lmax).abs() < 1e-7);
        assert!((sol.primal_objective - sol.dual_objective).abs() < 1e-7);
    }

    #[test]
    fn dependent_equalities_are_dropped() {
        // min x0 + x1 s.t. x0 - x1 = 1 (twice, scaled), x >= 0
        let a = DMatrix::from_row_slice(2, 2, &[1.0, -1.0, 2.0, -2.0]);
        let blocks = vec![
            LmiBlock {
                h: scalar(0.0),
                terms: vec![(0, scalar(-1.0))],
            },
            LmiBlock {
                h: scalar(0.0),
                terms: vec![(1, scalar(-1.0))],
            },
        ];
        let p = ConicProblem {
            c: vec![1.0, 1.0],
            a,
            b: vec![1.0, 2.0],
            blocks,
        };
        let sol = solve(&p, &SolverSettings::default()).unwrap();
        assert!((sol.x[0] - 1.0).abs() < 1e-7 && sol.x[1].abs() < 1e-7);
        let mut bad = p.clone();
        bad.b = vec![1.0, 3.0];
        assert!(matches!(
            solve(&bad, &SolverSettings::default()),
            Err(Error::Infeasible(_))
        ));
    }
}
