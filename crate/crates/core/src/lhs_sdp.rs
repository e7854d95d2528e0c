//! Semidefinite program certifying that `rho(q, theta)` admits a local
//! hidden-state model for every qubit POVM on Alice's side.
//!
//! Unknowns are a 4x4 Hermitian `chi`, one 2x2 hidden state per deterministic
//! strategy of a finite measurement set, and the visibility `q`:
//!
//! ```text
//! maximize q
//!   Tr_A[(M_{a|x} (x) I) chi] = sum_l D_l(a|x) sigma_l     for nonzero M_{a|x}
//!   sigma_l PSD
//!   R = rho(q, theta) - eta chi - (1 - eta) xi_A (x) Tr_A(chi)   PSD and PPT
//!   Tr chi >= 0
//! ```
//!
//! When `eta` is at most the shrinking factor of the set for `xi_A`, the
//! bracket `eta chi + (1 - eta) xi_A (x) Tr_A chi` reproduces every qubit
//! POVM from the finite set's model, and the PPT remainder is separable.
//! Solver output is never trusted: [`verify_certificate`] recomputes every
//! constraint from the stored matrices.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::conic::{ConicBackend, ConicProblem, InteriorPoint, LmiBlock, Status};
use crate::error::{check_range, Error, Result};
use crate::linalg::{c, ComplexMatrix, DensityMatrix, HermitianMatrix, Subsystem};
use crate::measurements::{
    enumerate_strategies, tabulated_eta, xi_a, DeterministicStrategy, MeasurementSet,
};
use crate::report::{first_failure, rejection, Check};
use crate::states::canonical_affine;

/// Equality residual accepted by the verifier.
pub const EQUALITY_TOL: f64 = 1e-8;
/// Eigenvalue floor for the PSD checks.
pub const VERIFY_PSD_TOL: f64 = 1e-10;
/// Floor of the stricter re-check after polishing.
pub const STRICT_PSD_TOL: f64 = 1e-12;
/// Margin the polishing step aims for on the remainder blocks.
const POLISH_TARGET: f64 = 1e-11;
/// Bisection stops when the bracket on `q` is this narrow.
pub const BISECTION_TOL: f64 = 1e-6;

/// Where the shrinking-factor bound for `xi_A` comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EtaSource {
    Tabulated,
    Computed,
}

/// The noise state `xi_A` (through `p`), the shrinking parameter used in the
/// program and the shrinking factor it must not exceed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSpec {
    pub p: f64,
    pub eta: f64,
    pub eta_bound: f64,
    pub source: EtaSource,
}

impl ShrinkSpec {
    /// `eta` equal to the tabulated shrinking factor at `p`.
    pub fn tabulated(p: f64) -> Result<Self> {
        let bound = Self::table(p)?;
        Ok(Self {
            p,
            eta: bound,
            eta_bound: bound,
            source: EtaSource::Tabulated,
        })
    }

    /// A smaller `eta` checked against the tabulated factor at `p`.
    pub fn tabulated_with_eta(p: f64, eta: f64) -> Result<Self> {
        let bound = Self::table(p)?;
        check_range("eta", eta, f64::MIN_POSITIVE, bound, "(0, table value]")?;
        Ok(Self {
            p,
            eta,
            eta_bound: bound,
            source: EtaSource::Tabulated,
        })
    }

    /// A bound from this crate's own estimate; results are labeled
    /// non-certified.
    pub fn computed(p: f64, eta: f64, eta_bound: f64) -> Result<Self> {
        check_range("p", p, 0.0, 1.0, "[0, 1]")?;
        check_range("eta_bound", eta_bound, 0.0, 1.0, "[0, 1]")?;
        check_range("eta", eta, f64::MIN_POSITIVE, eta_bound, "(0, eta_bound]")?;
        Ok(Self {
            p,
            eta,
            eta_bound,
            source: EtaSource::Computed,
        })
    }

    fn table(p: f64) -> Result<f64> {
        tabulated_eta(p).ok_or(Error::OutOfRange {
            name: "p",
            value: p,
            range: "one of 0, 0.1, ..., 0.9",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMode {
    /// Maximize `q` in one solve.
    Direct,
    /// Bisection on `q` with margin-maximizing feasibility solves.
    Bisection,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub mode: SolveMode,
    /// Add `chi` PSD (not needed for soundness).
    pub strict_chi: bool,
    pub bisection_tol: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self {
            mode: SolveMode::Direct,
            strict_chi: false,
            bisection_tol: BISECTION_TOL,
        }
    }
}

/// Hermitian basis: diagonal units, then `E_ij + E_ji` and `i E_ij - i E_ji`
/// for each `i < j`. For `n = 2` coordinates are `[X00, X11, Re X01, Im X01]`.
fn hermitian_basis(n: usize) -> Vec<ComplexMatrix> {
    let mut out = Vec::with_capacity(n * n);
    for i in 0..n {
        let mut m = ComplexMatrix::zeros(n, n);
        m[(i, i)] = c(1.0, 0.0);
        out.push(m);
    }
    for i in 0..n {
        for j in i + 1..n {
            let mut re = ComplexMatrix::zeros(n, n);
            re[(i, j)] = c(1.0, 0.0);
            re[(j, i)] = c(1.0, 0.0);
            out.push(re);
            let mut im = ComplexMatrix::zeros(n, n);
            im[(i, j)] = c(0.0, 1.0);
            im[(j, i)] = c(0.0, -1.0);
            out.push(im);
        }
    }
    out
}

fn hermitian_coords(m: &ComplexMatrix) -> Vec<f64> {
    let n = m.rows();
    let mut out: Vec<f64> = (0..n).map(|i| m[(i, i)].re).collect();
    for i in 0..n {
        for j in i + 1..n {
            out.push(m[(i, j)].re);
            out.push(m[(i, j)].im);
        }
    }
    out
}

fn from_coords(n: usize, x: &[f64]) -> HermitianMatrix {
    let mut m = ComplexMatrix::zeros(n, n);
    for (b, v) in hermitian_basis(n).iter().zip(x) {
        m = &m + &b.scale(*v);
    }
    HermitianMatrix::new(m).expect("basis combinations are Hermitian")
}

/// `[[Re X, -Im X], [Im X, Re X]]`; PSD iff `X` is.
fn real_embedding(m: &ComplexMatrix) -> DMatrix<f64> {
    let n = m.rows();
    DMatrix::from_fn(2 * n, 2 * n, |i, j| {
        let z = m[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// `Tr_A[(M (x) I) X]` for a 4x4 `X`.
fn conditional(m: &ComplexMatrix, x: &ComplexMatrix) -> ComplexMatrix {
    let prod = m.kron(&ComplexMatrix::identity(2)).matmul(x);
    prod.partial_trace((2, 2), Subsystem::A)
        .expect("4x4 operand")
}

/// The program for one `theta`, together with the data needed to turn a
/// solution back into matrices.
#[derive(Debug, Clone)]
pub struct SdpProblem {
    pub theta_f: f64,
    pub eta: f64,
    pub xi_a: DensityMatrix,
    pub measurement_set: MeasurementSet,
    pub strategies: Vec<DeterministicStrategy>,
    pub strict_chi: bool,
    /// Equality rows, as `(povm, outcome)` per group of four rows.
    pub equality_blocks: Vec<(usize, usize)>,
    pub conic: ConicProblem,
}

impl SdpProblem {
    pub fn n_strategies(&self) -> usize {
        self.strategies.len()
    }

    /// 16 for `chi`, 4 per hidden state, 1 for `q`.
    pub fn n_vars(&self) -> usize {
        self.conic.n_vars()
    }

    fn q_index(&self) -> usize {
        16 + 4 * self.n_strategies()
    }

    fn unpack(&self, x: &[f64]) -> (f64, HermitianMatrix, Vec<HermitianMatrix>) {
        let chi = from_coords(4, &x[..16]);
        let sigmas = (0..self.n_strategies())
            .map(|l| from_coords(2, &x[16 + 4 * l..20 + 4 * l]))
            .collect();
        (x[self.q_index()], chi, sigmas)
    }

    /// Same constraints with `q` fixed and every cone shifted by a margin
    /// variable `t`; maximizing `t` decides feasibility at `q`.
    fn margin_problem(&self, q: f64) -> ConicProblem {
        let qi = self.q_index();
        let n = self.n_vars();
        let blocks = self
            .conic
            .blocks
            .iter()
            .map(|blk| {
                let mut h = blk.h.clone();
                let mut terms = Vec::with_capacity(blk.terms.len());
                for (j, g) in &blk.terms {
                    if *j == qi {
                        h -= g * q;
                    } else {
                        terms.push((*j, g.clone()));
                    }
                }
                let d = blk.dim();
                terms.push((n, DMatrix::identity(d, d)));
                LmiBlock { h, terms }
            })
            .collect();
        let mut cost = vec![0.0; n + 1];
        cost[n] = -1.0;
        let mut a = self.conic.a.clone().insert_column(n, 0.0);
        a.set_column(qi, &nalgebra::DVector::zeros(a.nrows()));
        ConicProblem {
            c: cost,
            a,
            b: self.conic.b.clone(),
            blocks,
        }
    }
}

/// Build the program for visibility `q` of `rho(q, theta_f)`.
pub fn build_protocol1(
    theta_f: f64,
    eta: f64,
    xi_a: &DensityMatrix,
    ms: &MeasurementSet,
    strict_chi: bool,
) -> Result<SdpProblem> {
    check_range(
        "theta_f",
        theta_f,
        0.0,
        std::f64::consts::FRAC_PI_4,
        "[0, pi/4]",
    )?;
    if !(eta > 0.0 && eta <= 1.0) {
        return Err(Error::OutOfRange {
            name: "eta",
            value: eta,
            range: "(0, 1]",
        });
    }
    if xi_a.dim() != 2 {
        return Err(Error::Dimension(format!(
            "xi_A must be 2x2, got {}",
            xi_a.dim()
        )));
    }
    if ms.povms.is_empty() {
        return Err(Error::Dimension("empty measurement set".into()));
    }
    if ms.povms.iter().any(|m| m.elements()[0].dim() != 2) {
        return Err(Error::Dimension(
            "measurement set must act on a qubit".into(),
        ));
    }
    let strategies = enumerate_strategies(ms)?;
    let n_l = strategies.len();
    let n = 16 + 4 * n_l + 1;
    let qi = n - 1;
    let basis4 = hermitian_basis(4);
    let basis2 = hermitian_basis(2);

    // assemblage matching
    let mut equality_blocks = Vec::new();
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (x, povm) in ms.povms.iter().enumerate() {
        for a in povm.nonzero_outcomes() {
            let m = povm.elements()[a].matrix();
            let cols: Vec<Vec<f64>> = basis4
                .iter()
                .map(|b| hermitian_coords(&conditional(m, b)))
                .collect();
            for r in 0..4 {
                let mut row = vec![0.0; n];
                for k in 0..16 {
                    row[k] = cols[k][r];
                }
                for (l, s) in strategies.iter().enumerate() {
                    row[16 + 4 * l + r] = -s.response(a, x);
                }
                rows.push(row);
            }
            equality_blocks.push((x, a));
        }
    }
    let a_mat = DMatrix::from_fn(rows.len(), n, |i, j| rows[i][j]);
    let b = vec![0.0; rows.len()];

    let mut blocks = Vec::new();
    for l in 0..n_l {
        blocks.push(LmiBlock {
            h: DMatrix::zeros(4, 4),
            terms: basis2
                .iter()
                .enumerate()
                .map(|(r, e)| (16 + 4 * l + r, -real_embedding(e)))
                .collect(),
        });
    }

    // R = base + q slope - sum_k chi_k [eta B_k + (1 - eta) xi (x) Tr_A B_k]
    let (base, slope) = canonical_affine(theta_f);
    let chi_maps: Vec<ComplexMatrix> = basis4
        .iter()
        .map(|bk| {
            let marg = bk.partial_trace((2, 2), Subsystem::A).expect("4x4");
            &bk.scale(eta) + &xi_a.matrix().kron(&marg).scale(1.0 - eta)
        })
        .collect();
    for transpose in [false, true] {
        let f = |m: &ComplexMatrix| {
            if transpose {
                m.partial_transpose((2, 2), Subsystem::B).expect("4x4")
            } else {
                m.clone()
            }
        };
        let mut terms: Vec<(usize, DMatrix<f64>)> = chi_maps
            .iter()
            .enumerate()
            .map(|(k, g)| (k, real_embedding(&f(g))))
            .collect();
        terms.push((qi, -real_embedding(&f(slope.matrix()))));
        blocks.push(LmiBlock {
            h: real_embedding(&f(base.matrix())),
            terms,
        });
    }
    blocks.push(LmiBlock {
        h: DMatrix::zeros(1, 1),
        terms: (0..4)
            .map(|k| (k, DMatrix::from_element(1, 1, -1.0)))
            .collect(),
    });
    if strict_chi {
        blocks.push(LmiBlock {
            h: DMatrix::zeros(8, 8),
            terms: basis4
                .iter()
                .enumerate()
                .map(|(k, e)| (k, -real_embedding(e)))
                .collect(),
        });
    }
    let mut cost = vec![0.0; n];
    cost[qi] = -1.0;
    Ok(SdpProblem {
        theta_f,
        eta,
        xi_a: xi_a.clone(),
        measurement_set: ms.clone(),
        strategies,
        strict_chi,
        equality_blocks,
        conic: ConicProblem {
            c: cost,
            a: a_mat,
            b,
            blocks,
        },
    })
}

/// Raw (unpolished) solver output.
#[derive(Debug, Clone)]
pub struct SdpSolution {
    pub q_star: f64,
    pub chi: HermitianMatrix,
    pub sigmas: Vec<HermitianMatrix>,
    pub mode: SolveMode,
    pub solves: usize,
    pub iterations: usize,
}

pub fn solve_direct(problem: &SdpProblem, backend: &dyn ConicBackend) -> Result<SdpSolution> {
    let sol = backend.solve(&problem.conic)?;
    if sol.status == Status::MaxIterations {
        return Err(Error::Solver(format!(
            "no convergence after {} iterations (gap {:.2e})",
            sol.iterations, sol.gap
        )));
    }
    let (q, chi, sigmas) = problem.unpack(&sol.x);
    Ok(SdpSolution {
        q_star: q,
        chi,
        sigmas,
        mode: SolveMode::Direct,
        solves: 1,
        iterations: sol.iterations,
    })
}

/// Largest `q` (within `tol`) whose margin problem has a nonnegative optimum.
pub fn solve_bisection(
    problem: &SdpProblem,
    backend: &dyn ConicBackend,
    tol: f64,
) -> Result<SdpSolution> {
    let mut solves = 0;
    let mut iterations = 0;
    let mut margin_at = |q: f64| -> Result<(f64, Vec<f64>)> {
        let sol = backend.solve(&problem.margin_problem(q))?;
        solves += 1;
        iterations += sol.iterations;
        let t = sol.x[problem.n_vars()];
        let mut x = sol.x;
        x.truncate(problem.n_vars());
        x[problem.q_index()] = q;
        Ok((t, x))
    };
    let (t0, mut best) = margin_at(0.0)?;
    if t0 < 0.0 {
        return Err(Error::Infeasible(format!(
            "program infeasible at q = 0 (margin {t0:.3e}); check eta and xi_A"
        )));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let (t1, x1) = margin_at(1.0)?;
    if t1 >= 0.0 {
        lo = 1.0;
        best = x1;
    }
    while hi - lo > tol && lo < 1.0 {
        let mid = 0.5 * (lo + hi);
        let (t, x) = margin_at(mid)?;
        if t >= 0.0 {
            lo = mid;
            best = x;
        } else {
            hi = mid;
        }
    }
    let (q, chi, sigmas) = problem.unpack(&best);
    Ok(SdpSolution {
        q_star: q,
        chi,
        sigmas,
        mode: SolveMode::Bisection,
        solves,
        iterations,
    })
}

pub fn solve(
    problem: &SdpProblem,
    backend: &dyn ConicBackend,
    mode: SolveMode,
    tol: f64,
) -> Result<SdpSolution> {
    match mode {
        SolveMode::Direct => solve_direct(problem, backend),
        SolveMode::Bisection => solve_bisection(problem, backend, tol),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Every cone margin also clears the stricter floor.
    pub strict: bool,
    /// The shrinking bound is a tabulated value rather than an estimate.
    pub certified: bool,
}

impl VerificationReport {
    pub fn first_failure(&self) -> Option<&Check> {
        first_failure(&self.checks)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CertificateMetadata {
    pub remainder_convention: String,
    pub sign_note: String,
    pub mode: SolveMode,
    pub raw_q: f64,
    pub polish_weight: f64,
    pub solves: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LhsSdpCertificate {
    pub q_star: f64,
    pub theta_f: f64,
    pub chi: HermitianMatrix,
    /// Indexed like `enumerate_strategies(&measurement_set)`.
    pub sigmas: Vec<HermitianMatrix>,
    pub eta: f64,
    pub shrink: ShrinkSpec,
    pub xi_a: DensityMatrix,
    pub measurement_set_id: String,
    pub measurement_set: MeasurementSet,
    pub strict_chi: bool,
    pub metadata: CertificateMetadata,
    pub verification_report: Option<VerificationReport>,
}

fn metadata(sol: &SdpSolution, polish_weight: f64) -> CertificateMetadata {
    CertificateMetadata {
        remainder_convention: "R = rho(q, theta) - eta chi - (1 - eta) xi_A (x) Tr_A(chi)".into(),
        sign_note: "the variant with + (1 - eta) xi_A (x) Tr_A(chi) is unbounded and does not imply a model; \
                    both terms are subtracted here"
            .into(),
        mode: sol.mode,
        raw_q: sol.q_star,
        polish_weight,
        solves: sol.solves,
        iterations: sol.iterations,
    }
}

fn remainder(
    theta: f64,
    q: f64,
    eta: f64,
    xi: &DensityMatrix,
    chi: &HermitianMatrix,
) -> Result<HermitianMatrix> {
    let (base, slope) = canonical_affine(theta);
    let chi_b = chi.partial_trace((2, 2), Subsystem::A)?;
    Ok(base
        .add(&slope.scale(q))
        .sub(&chi.scale(eta))
        .sub(&xi.hermitian().kron(&chi_b).scale(1.0 - eta)))
}

/// Smallest eigenvalue of `R` and of its partial transpose.
fn remainder_margins(
    theta: f64,
    q: f64,
    eta: f64,
    xi: &DensityMatrix,
    chi: &HermitianMatrix,
) -> Result<(f64, f64)> {
    let r = remainder(theta, q, eta, xi, chi)?;
    let rt = r.partial_transpose((2, 2), Subsystem::B)?;
    Ok((r.min_eigenvalue(), rt.min_eigenvalue()))
}

/// Project the hidden states onto the PSD cone, then pull the point towards
/// the strictly feasible origin `(q, chi, sigma) = 0` just enough to give the
/// remainder blocks a small positive margin. The feasible set is convex and
/// the origin's remainder `rho(0, theta)` has smallest eigenvalue
/// `sin^2(theta) / 2`, so the mixture stays feasible and `q` drops by at most
/// the mixing weight times `q`.
pub fn polish(
    problem: &SdpProblem,
    sol: &SdpSolution,
    shrink: &ShrinkSpec,
) -> Result<LhsSdpCertificate> {
    if (shrink.eta - problem.eta).abs() > 0.0 {
        return Err(Error::Dimension(
            "shrink spec eta differs from the program's eta".into(),
        ));
    }
    let sigmas: Vec<HermitianMatrix> = sol
        .sigmas
        .iter()
        .map(HermitianMatrix::psd_projection)
        .collect();
    let (mr, mt) = remainder_margins(
        problem.theta_f,
        sol.q_star,
        problem.eta,
        &problem.xi_a,
        &sol.chi,
    )?;
    let worst = mr.min(mt);
    let origin = problem.theta_f.sin().powi(2) / 2.0;
    let w = if worst >= POLISH_TARGET || origin <= POLISH_TARGET {
        0.0
    } else {
        ((POLISH_TARGET - worst) / (origin - worst)).min(1.0)
    };
    let keep = 1.0 - w;
    Ok(LhsSdpCertificate {
        q_star: keep * sol.q_star,
        theta_f: problem.theta_f,
        chi: sol.chi.scale(keep),
        sigmas: sigmas.iter().map(|s| s.scale(keep)).collect(),
        eta: problem.eta,
        shrink: *shrink,
        xi_a: problem.xi_a.clone(),
        measurement_set_id: problem.measurement_set.id.clone(),
        measurement_set: problem.measurement_set.clone(),
        strict_chi: problem.strict_chi,
        metadata: metadata(sol, w),
        verification_report: None,
    })
}

fn push(checks: &mut Vec<Check>, name: impl Into<String>, margin: f64, tolerance: f64) {
    checks.push(Check::new(name, margin, tolerance));
}

/// Recompute every constraint from the certificate's matrices.
pub fn check_certificate(cert: &LhsSdpCertificate) -> Result<VerificationReport> {
    let ms = &cert.measurement_set;
    if cert.measurement_set_id != ms.id {
        return Err(Error::Rejected(
            "measurement set id does not match the embedded set".into(),
        ));
    }
    let strategies = enumerate_strategies(ms)?;
    if cert.sigmas.len() != strategies.len() {
        return Err(Error::Rejected(format!(
            "{} hidden states for {} strategies",
            cert.sigmas.len(),
            strategies.len()
        )));
    }
    if cert.chi.dim() != 4 || cert.sigmas.iter().any(|s| s.dim() != 2) || cert.xi_a.dim() != 2 {
        return Err(Error::Rejected("matrix dimensions".into()));
    }
    let mut checks = Vec::new();

    let mut worst_eq: f64 = 0.0;
    let mut worst_name = String::from("assemblage");
    for (x, povm) in ms.povms.iter().enumerate() {
        for a in povm.nonzero_outcomes() {
            let lhs = conditional(povm.elements()[a].matrix(), cert.chi.matrix());
            let mut rhs = ComplexMatrix::zeros(2, 2);
            for (s, sig) in strategies.iter().zip(&cert.sigmas) {
                if s.response(a, x) != 0.0 {
                    rhs = &rhs + sig.matrix();
                }
            }
            let r = lhs.max_abs_diff(&rhs);
            if r > worst_eq {
                worst_eq = r;
                worst_name = format!("assemblage (x={x}, a={a})");
            }
        }
    }
    push(&mut checks, worst_name, -worst_eq, EQUALITY_TOL);

    let (worst_l, min_sigma) = cert
        .sigmas
        .iter()
        .enumerate()
        .map(|(l, s)| (l, s.min_eigenvalue()))
        .fold(
            (0, f64::INFINITY),
            |acc, v| if v.1 < acc.1 { v } else { acc },
        );
    push(
        &mut checks,
        format!("hidden state {worst_l} PSD"),
        min_sigma,
        VERIFY_PSD_TOL,
    );

    let (mr, mt) = remainder_margins(cert.theta_f, cert.q_star, cert.eta, &cert.xi_a, &cert.chi)?;
    push(&mut checks, "remainder PSD", mr, VERIFY_PSD_TOL);
    push(
        &mut checks,
        "remainder partial transpose PSD",
        mt,
        VERIFY_PSD_TOL,
    );
    push(&mut checks, "Tr chi >= 0", cert.chi.trace(), VERIFY_PSD_TOL);
    if cert.strict_chi {
        push(
            &mut checks,
            "chi PSD",
            cert.chi.min_eigenvalue(),
            VERIFY_PSD_TOL,
        );
    }

    let expected_xi = xi_a(cert.shrink.p)?;
    push(
        &mut checks,
        "xi_A matches p",
        -expected_xi.matrix().max_abs_diff(cert.xi_a.matrix()),
        1e-12,
    );
    push(
        &mut checks,
        "eta <= shrinking factor",
        cert.shrink.eta_bound - cert.eta,
        0.0,
    );
    if cert.shrink.source == EtaSource::Tabulated {
        let table =
            tabulated_eta(cert.shrink.p).map_or(f64::NEG_INFINITY, |t| t - cert.shrink.eta_bound);
        push(
            &mut checks,
            "shrinking factor is the tabulated value",
            -table.abs(),
            0.0,
        );
    }
    push(
        &mut checks,
        "eta in (0, 1]",
        (1.0 - cert.eta).min(cert.eta),
        0.0,
    );

    let passed = checks.iter().all(|c| c.passed);
    let strict = min_sigma.min(mr).min(mt) >= -STRICT_PSD_TOL;
    Ok(VerificationReport {
        checks,
        passed,
        strict,
        certified: cert.shrink.source == EtaSource::Tabulated,
    })
}

/// [`check_certificate`], failing with the first violated constraint.
pub fn verify_certificate(cert: &LhsSdpCertificate) -> Result<VerificationReport> {
    let report = check_certificate(cert)?;
    match report.first_failure() {
        Some(c) => Err(rejection(c)),
        None => Ok(report),
    }
}

/// Build, solve, polish and verify in one call.
pub fn protocol1_certificate(
    theta_f: f64,
    shrink: &ShrinkSpec,
    ms: &MeasurementSet,
    options: &SdpOptions,
    backend: &dyn ConicBackend,
) -> Result<LhsSdpCertificate> {
    let xi = xi_a(shrink.p)?;
    let problem = build_protocol1(theta_f, shrink.eta, &xi, ms, options.strict_chi)?;
    let sol = solve(&problem, backend, options.mode, options.bisection_tol)?;
    let mut cert = polish(&problem, &sol, shrink)?;
    let report = verify_certificate(&cert)?;
    cert.verification_report = Some(report);
    Ok(cert)
}

/// [`protocol1_certificate`] with the built-in interior-point solver.
pub fn certify_theta(
    theta_f: f64,
    shrink: &ShrinkSpec,
    ms: &MeasurementSet,
    options: &SdpOptions,
) -> Result<LhsSdpCertificate> {
    protocol1_certificate(theta_f, shrink, ms, options, &InteriorPoint::default())
}

impl LhsSdpCertificate {
    /// Convex combination `w self + (1 - w) other` of two certificates for the
    /// same program; `q` is combined the same way.
    pub fn mix(&self, other: &Self, w: f64) -> Result<Self> {
        if self.theta_f != other.theta_f
            || self.eta != other.eta
            || self.shrink != other.shrink
            || self.measurement_set != other.measurement_set
        {
            return Err(Error::Dimension(
                "certificates belong to different programs".into(),
            ));
        }
        let comb = |a: &HermitianMatrix, b: &HermitianMatrix| a.scale(w).add(&b.scale(1.0 - w));
        let mut out = self.clone();
        out.q_star = w * self.q_star + (1.0 - w) * other.q_star;
        out.chi = comb(&self.chi, &other.chi);
        out.sigmas = self
            .sigmas
            .iter()
            .zip(&other.sigmas)
            .map(|(a, b)| comb(a, b))
            .collect();
        out.verification_report = None;
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::measurements::icosahedron_set;

    fn problem(theta: f64, eta: f64) -> SdpProblem {
        build_protocol1(theta, eta, &xi_a(0.0).unwrap(), &icosahedron_set(), false).unwrap()
    }

    #[test]
    fn dimensions_of_the_icosahedron_program() {
        let p = problem(0.5, 0.66);
        assert_eq!(p.n_strategies(), 64);
        assert_eq!(p.n_vars(), 273);
        assert_eq!(p.conic.a.nrows(), 48);
        assert_eq!(p.equality_blocks.len(), 12);
    }

    #[test]
    fn empty_set_is_rejected() {
        let ms = MeasurementSet::new("empty", vec![]);
        assert!(build_protocol1(0.5, 0.66, &xi_a(0.0).unwrap(), &ms, false).is_err());
    }

    #[test]
    fn basis_coordinates_round_trip() {
        let x: Vec<f64> = (0..16).map(|k| (k as f64 * 0.37).sin()).collect();
        let h = from_coords(4, &x);
        assert_eq!(hermitian_coords(h.matrix()), x);
    }

    #[test]
    fn embedding_preserves_spectrum_sign() {
        let h = from_coords(2, &[1.0, 1.0, 0.0, 1.2]);
        let e = nalgebra::SymmetricEigen::new(real_embedding(h.matrix())).eigenvalues;
        assert!((e.min() - h.min_eigenvalue()).abs() < 1e-12);
    }

    #[test]
    fn direct_solve_matches_reference_value() {
        // reference from an independent conic solver on the same program
        let p = problem(std::f64::consts::FRAC_PI_4, 0.66);
        let sol = solve_direct(&p, &InteriorPoint::default()).unwrap();
        assert!((sol.q_star - 0.35597).abs() < 2e-5, "{}", sol.q_star);
    }
}
