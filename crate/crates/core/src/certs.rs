//! Closed-form convex-decomposition certificates.
//!
//! Each certificate writes a target `rho(alpha, theta)` as
//! `q * reference + (1 - q) * S` where the reference is known to admit a
//! local-hidden-state model and `S` is a two-qubit state with positive partial
//! transpose (hence separable). Remainders are always computed from the
//! constructed matrices; closed-form entries appear only as cross-checks.

use std::f64::consts::FRAC_PI_4;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{DensityMatrix, HermitianMatrix, Subsystem};
use crate::report::{first_failure, rejection, Check};
use crate::states::{
    canonical_state, projective_model_margin, rho_theta, werner, CanonicalParams, WernerParams,
};

/// Eigenvalue floor accepted at analytic boundaries.
pub const BOUNDARY_TOL: f64 = 1e-9;
/// Entrywise reconstruction tolerance.
pub const RECONSTRUCTION_TOL: f64 = 1e-10;
/// `1 - q` below this is treated as the no-remainder case.
const DEGENERATE_TOL: f64 = 1e-9;

/// Werner visibility whose state has a model for all POVMs.
pub const WERNER_POVM_LHS: f64 = 5.0 / 12.0;

/// Default small-angle construction: `(alpha, q, beta) = (0.4, 1/2, 3/4)`.
pub const I1_DEFAULT: I1Params = I1Params {
    alpha: 0.4,
    q: 0.5,
    beta: 0.75,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Technique {
    I3,
    #[serde(rename = "LEMMA1")]
    Lemma1,
    I1,
}

/// The component known to admit a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Reference {
    /// `werner(alpha)`; a model is known for `alpha <= 5/12`.
    Werner { alpha: f64 },
    /// `rho(alpha, theta)`, unsteerable by an external certificate.
    Canonical { alpha: f64, theta: f64 },
    /// `(rho(beta, theta) + |0><0| (x) rho_B) / 2`, unsteerable whenever the
    /// projective model condition holds for `(beta, theta)`.
    RhoTheta { beta: f64, theta: f64 },
}

impl Reference {
    pub fn state(&self) -> Result<DensityMatrix> {
        match *self {
            Reference::Werner { alpha } => Ok(werner(WernerParams::new(alpha)?)),
            Reference::Canonical { alpha, theta } => {
                Ok(canonical_state(CanonicalParams::new(alpha, theta)?))
            }
            Reference::RhoTheta { beta, theta } => rho_theta(beta, theta),
        }
    }
}

/// PPT margins of the remainder.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityWitness {
    pub min_eigenvalue: f64,
    pub min_eigenvalue_partial_transpose: f64,
}

impl SeparabilityWitness {
    pub fn margin(&self) -> f64 {
        self.min_eigenvalue
            .min(self.min_eigenvalue_partial_transpose)
    }
}

/// The four diagonal positivity conditions of the interpolation remainder,
/// each as `A alpha' + C` (the doubled diagonal of `(1 - q) S`), plus the
/// bounds on `alpha'` they imply separately.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lemma1Diagnostics {
    pub conditions: [f64; 4],
    /// `None` where the condition holds for every `alpha'`.
    pub alpha_prime_bounds: [Option<f64>; 4],
    /// Bound from `q <= 1`.
    pub q_bound: f64,
    /// The first condition gives the smallest bound (the textbook reduction).
    pub first_condition_binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionCertificate {
    pub technique: Technique,
    pub target: CanonicalParams,
    pub q: f64,
    pub reference: Reference,
    /// `None` exactly in the degenerate case `q = 1`.
    pub remainder: Option<HermitianMatrix>,
    pub witness: SeparabilityWitness,
    pub diagnostics: Option<Lemma1Diagnostics>,
}

impl DecompositionCertificate {
    pub fn margin(&self) -> f64 {
        self.witness.margin()
    }

    /// Valid without the boundary allowance.
    pub fn strictly_valid(&self) -> bool {
        self.margin() >= 0.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecompositionReport {
    pub checks: Vec<Check>,
    pub passed: bool,
    /// Where the reference's model comes from.
    pub reference_basis: String,
}

impl DecompositionReport {
    pub fn first_failure(&self) -> Option<&Check> {
        first_failure(&self.checks)
    }
}

fn min_eigs(s: &HermitianMatrix) -> Result<SeparabilityWitness> {
    Ok(SeparabilityWitness {
        min_eigenvalue: s.min_eigenvalue(),
        min_eigenvalue_partial_transpose: s
            .partial_transpose((2, 2), Subsystem::B)?
            .min_eigenvalue(),
    })
}

/// `(target - q reference) / (1 - q)`, or `None` when `q = 1` and the two
/// states coincide. Dividing by the computed trace of the difference (equal
/// to `1 - q` in exact arithmetic) keeps `Tr S = 1` when `q` is close to 1.
fn remainder(
    target: &DensityMatrix,
    reference: &DensityMatrix,
    q: f64,
) -> Result<Option<HermitianMatrix>> {
    let diff = target.hermitian().sub(&reference.hermitian().scale(q));
    if 1.0 - q < DEGENERATE_TOL {
        let gap = target.matrix().max_abs_diff(reference.matrix());
        if gap <= RECONSTRUCTION_TOL {
            return Ok(None);
        }
        return Err(Error::Condition(format!(
            "q = {q} leaves no room for a remainder, but the target differs from the reference by {gap:.3e}"
        )));
    }
    let t = diff.trace();
    Ok(Some(diff.scale(1.0 / t)))
}

fn assemble(
    technique: Technique,
    target: CanonicalParams,
    q: f64,
    reference: Reference,
    diagnostics: Option<Lemma1Diagnostics>,
) -> Result<DecompositionCertificate> {
    if !(0.0..=1.0 + 1e-12).contains(&q) {
        return Err(Error::Condition(format!(
            "mixing weight q = {q} is outside [0, 1]"
        )));
    }
    let q = q.min(1.0);
    let rho = canonical_state(target);
    let s = remainder(&rho, &reference.state()?, q)?;
    let witness = match &s {
        Some(s) => min_eigs(s)?,
        None => SeparabilityWitness {
            min_eigenvalue: 0.0,
            min_eigenvalue_partial_transpose: 0.0,
        },
    };
    let cert = DecompositionCertificate {
        technique,
        target,
        q,
        reference,
        remainder: s,
        witness,
        diagnostics,
    };
    if witness.min_eigenvalue < -BOUNDARY_TOL {
        return Err(Error::NotPsd {
            min_eigenvalue: witness.min_eigenvalue,
        });
    }
    if witness.min_eigenvalue_partial_transpose < -BOUNDARY_TOL {
        return Err(Error::Condition(format!(
            "remainder is not PPT (min eigenvalue of the partial transpose {:.3e})",
            witness.min_eigenvalue_partial_transpose
        )));
    }
    Ok(cert)
}

/// Largest `alpha` of the mixture with `werner(5/12)`: `1 / ((17/5) cot theta - 1)`.
pub fn i3_max_alpha(theta: f64) -> f64 {
    1.0 / (3.4 / theta.tan() - 1.0)
}

/// `rho(alpha, theta) = q werner(5/12) + (1 - q) S` with
/// `q = (12/5) alpha sin(2 theta)`, which makes `S` diagonal.
pub fn i3_certificate(alpha: f64, theta: f64) -> Result<DecompositionCertificate> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    if !(theta > 0.0 && theta <= FRAC_PI_4) {
        return Err(Error::OutOfRange {
            name: "theta",
            value: theta,
            range: "(0, pi/4]",
        });
    }
    let q = 2.4 * alpha * (2.0 * theta).sin();
    if q > 1.0 + 1e-12 {
        return Err(Error::Condition(format!("q = {q} exceeds 1")));
    }
    assemble(
        Technique::I3,
        CanonicalParams { alpha, theta },
        q,
        Reference::Werner {
            alpha: WERNER_POVM_LHS,
        },
        None,
    )
}

/// Largest `alpha'` with `tan(theta') alpha'/(1 + alpha') <= tan(theta) alpha/(1 + alpha)`.
pub fn lemma1_max_alpha(alpha: f64, theta: f64, theta_prime: f64) -> Result<f64> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    check_range("theta", theta, 0.0, FRAC_PI_4, "[0, pi/4]")?;
    check_range("theta_prime", theta_prime, 0.0, FRAC_PI_4, "[0, pi/4]")?;
    if theta_prime < theta {
        return Err(Error::OutOfRange {
            name: "theta_prime",
            value: theta_prime,
            range: "[theta, pi/4] (the interpolation only extends upwards)",
        });
    }
    if theta_prime == theta {
        return Ok(alpha);
    }
    let t = theta.tan() * alpha / ((1.0 + alpha) * theta_prime.tan());
    Ok(t / (1.0 - t))
}

fn lemma1_diagnostics(
    alpha: f64,
    theta: f64,
    alpha_prime: f64,
    theta_prime: f64,
) -> Lemma1Diagnostics {
    let (c, s) = (theta.cos(), theta.sin());
    let (cp, sp) = (theta_prime.cos(), theta_prime.sin());
    let l = cp * sp / (alpha * c * s);
    let coeffs = [
        (cp * cp - l * c * c * (1.0 + alpha), cp * cp),
        (-cp * cp - l * c * c * (1.0 - alpha), cp * cp),
        (-sp * sp - l * s * s * (1.0 - alpha), sp * sp),
        (sp * sp - l * s * s * (1.0 + alpha), sp * sp),
    ];
    let conditions = coeffs.map(|(a, k)| a * alpha_prime + k);
    let alpha_prime_bounds = coeffs.map(|(a, k)| (a < 0.0).then(|| -k / a));
    let q_bound = 1.0 / l;
    let first_condition_binding = alpha_prime_bounds[0].is_some_and(|first| {
        alpha_prime_bounds
            .iter()
            .skip(1)
            .all(|b| b.is_none_or(|b| first <= b * (1.0 + 1e-12)))
            && first <= q_bound * (1.0 + 1e-12)
    });
    Lemma1Diagnostics {
        conditions,
        alpha_prime_bounds,
        q_bound,
        first_condition_binding,
    }
}

/// `rho(alpha', theta') = q rho(alpha, theta) + (1 - q) S` with
/// `q = alpha' cos(theta') sin(theta') / (alpha cos(theta) sin(theta))`,
/// which cancels the anti-diagonal of `S`.
pub fn lemma1_certificate(
    alpha: f64,
    theta: f64,
    alpha_prime: f64,
    theta_prime: f64,
) -> Result<DecompositionCertificate> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    check_range("alpha_prime", alpha_prime, 0.0, 1.0, "[0, 1]")?;
    check_range("theta", theta, 0.0, FRAC_PI_4, "[0, pi/4]")?;
    check_range(
        "theta_prime",
        theta_prime,
        theta,
        FRAC_PI_4,
        "[theta, pi/4]",
    )?;
    let target = CanonicalParams {
        alpha: alpha_prime,
        theta: theta_prime,
    };
    let reference = Reference::Canonical { alpha, theta };
    if alpha_prime == alpha && theta_prime == theta {
        return assemble(Technique::Lemma1, target, 1.0, reference, None);
    }
    let denom = alpha * theta.cos() * theta.sin();
    let num = alpha_prime * theta_prime.cos() * theta_prime.sin();
    if num == 0.0 {
        // product target: pure remainder
        return assemble(Technique::Lemma1, target, 0.0, reference, None);
    }
    if denom == 0.0 {
        return Err(Error::Condition(
            "reference has no anti-diagonal to cancel an entangled target".into(),
        ));
    }
    let q = num / denom;
    let diagnostics = lemma1_diagnostics(alpha, theta, alpha_prime, theta_prime);
    if let Some(k) = diagnostics
        .conditions
        .iter()
        .position(|&v| v < -2.0 * BOUNDARY_TOL)
    {
        return Err(Error::Condition(format!(
            "positivity condition {} (S[{k}][{k}] >= 0) fails: {:.3e}",
            k + 1,
            diagnostics.conditions[k]
        )));
    }
    let cert = assemble(Technique::Lemma1, target, q, reference, Some(diagnostics))?;
    if let Some(s) = &cert.remainder {
        let anti = s.matrix()[(0, 3)].norm();
        if anti >= 1e-10 {
            return Err(Error::Condition(format!(
                "remainder anti-diagonal {anti:.3e} did not cancel"
            )));
        }
    }
    Ok(cert)
}

/// Parameters of the small-angle construction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct I1Params {
    pub alpha: f64,
    pub q: f64,
    pub beta: f64,
}

/// `rho(alpha, theta) = q rho_theta(beta, theta) + (1 - q) S`.
pub fn i1_certificate(
    alpha: f64,
    theta: f64,
    q: f64,
    beta: f64,
) -> Result<DecompositionCertificate> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    check_range("theta", theta, 0.0, FRAC_PI_4, "[0, pi/4]")?;
    if !(q > 0.0 && q < 1.0) {
        return Err(Error::OutOfRange {
            name: "q",
            value: q,
            range: "(0, 1)",
        });
    }
    assemble(
        Technique::I1,
        CanonicalParams { alpha, theta },
        q,
        Reference::RhoTheta { beta, theta },
        None,
    )
}

/// The nonzero entries `[S11, S22, S33, S44, S14]` of `4 (1 - q) S` written
/// out in closed form, for cross-checking the constructed remainder.
pub fn i1_remainder_closed_form(alpha: f64, theta: f64, q: f64, beta: f64) -> [f64; 5] {
    let (c2, s2) = (theta.cos().powi(2), theta.sin().powi(2));
    let cs = theta.cos() * theta.sin();
    [
        2.0 * c2 * (1.0 + alpha) - q * (2.0 * c2 * (1.0 + beta) + s2 * (1.0 - beta)),
        2.0 * c2 * (1.0 - alpha) - q * (2.0 * c2 * (1.0 - beta) + s2 * (1.0 + beta)),
        2.0 * s2 * (1.0 - alpha) - q * s2 * (1.0 - beta),
        2.0 * s2 * (1.0 + alpha) - q * s2 * (1.0 + beta),
        4.0 * alpha * cs - 2.0 * q * beta * cs,
    ]
}

fn i1_valid(alpha: f64, theta: f64, q: f64, beta: f64) -> bool {
    projective_model_margin(beta, theta) >= 0.0
        && i1_certificate(alpha, theta, q, beta).is_ok_and(|c| c.strictly_valid())
}

fn i1_max_alpha_at(theta: f64, q: f64, beta: f64) -> f64 {
    if !i1_valid(1e-9, theta, q, beta) {
        return 0.0;
    }
    let (mut lo, mut hi) = (1e-9, 1.0);
    if i1_valid(hi, theta, q, beta) {
        return hi;
    }
    while hi - lo > 1e-9 {
        let mid = 0.5 * (lo + hi);
        if i1_valid(mid, theta, q, beta) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// Best small-angle construction at `theta`: maximize `alpha` over `(q, beta)`
/// by a grid scan followed by compass refinement. The returned parameters are
/// strictly valid (remainder margin >= 0).
pub fn i1_search(theta: f64) -> Result<I1Params> {
    check_range("theta", theta, 0.0, FRAC_PI_4, "[0, pi/4]")?;
    let top = beta_max(theta);
    // the optimum usually sits where the projective condition is tight, so
    // beta is clamped to `top` rather than rejected beyond it
    let clamp = |b: f64| b.min(top);
    let grid: Vec<(f64, f64)> = (0..=33)
        .flat_map(|i| (1..=24).map(move |j| (0.04 * j as f64, 0.34 + 0.02 * i as f64)))
        .chain((1..=24).map(|j| (0.04 * j as f64, top)))
        .collect();
    let scored: Vec<(f64, f64, f64)> = grid
        .par_iter()
        .map(|&(q, beta)| (i1_max_alpha_at(theta, q, clamp(beta)), q, clamp(beta)))
        .collect();
    let (mut best, mut q, mut beta) =
        scored
            .into_iter()
            .fold((0.0, 0.5, 0.75), |acc, v| if v.0 > acc.0 { v } else { acc });
    if best == 0.0 {
        return Err(Error::Condition(format!(
            "no small-angle construction found at theta = {theta}"
        )));
    }
    let mut step = 0.02;
    while step > 1e-5 {
        let mut improved = false;
        for (dq, db) in [
            (1.0, 0.0),
            (-1.0, 0.0),
            (0.0, 1.0),
            (0.0, -1.0),
            (1.0, 1.0),
            (1.0, -1.0),
            (-1.0, 1.0),
            (-1.0, -1.0),
        ] {
            let (nq, nb) = (q + dq * step, clamp(beta + db * step));
            if nq <= 0.0 || nq >= 1.0 || nb <= 0.0 {
                continue;
            }
            let a = i1_max_alpha_at(theta, nq, nb);
            if a > best {
                (best, q, beta, improved) = (a, nq, nb, true);
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok(I1Params {
        alpha: best,
        q,
        beta,
    })
}

/// Largest `beta` satisfying the projective model condition at `theta`. The
/// condition's right side is negative below 1/2 and increasing above.
fn beta_max(theta: f64) -> f64 {
    if projective_model_margin(1.0, theta) >= 0.0 {
        return 1.0;
    }
    let (mut lo, mut hi) = (0.5, 1.0);
    while hi - lo > 1e-13 {
        let mid = 0.5 * (lo + hi);
        if projective_model_margin(mid, theta) >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    lo
}

/// PPT test on a two-qubit state; for 2x2 systems PPT is equivalent to
/// separability. Returns the verdict and the smallest eigenvalue of the
/// partial transpose.
pub fn is_ppt_separable(rho: &DensityMatrix) -> Result<(bool, f64)> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!(
            "expected a 4x4 two-qubit state, got {}",
            rho.dim()
        )));
    }
    let margin = rho
        .partial_transpose((2, 2), Subsystem::B)?
        .min_eigenvalue();
    Ok((margin >= -crate::linalg::PSD_TOL, margin))
}

/// Recompute a decomposition certificate from its parameters and stored
/// remainder.
pub fn check_decomposition(cert: &DecompositionCertificate) -> Result<DecompositionReport> {
    let mut checks = Vec::new();
    let target = canonical_state(CanonicalParams::new(cert.target.alpha, cert.target.theta)?);
    let reference = cert.reference.state()?;
    checks.push(Check::new("q in [0, 1]", cert.q.min(1.0 - cert.q), 0.0));
    match &cert.remainder {
        Some(s) => {
            let rebuilt = reference
                .hermitian()
                .scale(cert.q)
                .add(&s.scale(1.0 - cert.q));
            checks.push(Check::new(
                "reconstruction",
                -rebuilt.matrix().max_abs_diff(target.matrix()),
                RECONSTRUCTION_TOL,
            ));
            checks.push(Check::new(
                "remainder trace 1",
                -(s.trace() - 1.0).abs(),
                RECONSTRUCTION_TOL,
            ));
            let w = min_eigs(s)?;
            checks.push(Check::new("remainder PSD", w.min_eigenvalue, BOUNDARY_TOL));
            checks.push(Check::new(
                "remainder partial transpose PSD",
                w.min_eigenvalue_partial_transpose,
                BOUNDARY_TOL,
            ));
            if cert.technique == Technique::Lemma1 {
                checks.push(Check::new(
                    "remainder anti-diagonal",
                    -s.matrix()[(0, 3)].norm(),
                    1e-10,
                ));
            }
        }
        None => {
            checks.push(Check::new(
                "no-remainder case has q = 1",
                -(1.0 - cert.q).abs(),
                1e-12,
            ));
            checks.push(Check::new(
                "target equals reference",
                -reference.matrix().max_abs_diff(target.matrix()),
                RECONSTRUCTION_TOL,
            ));
        }
    }
    let reference_basis = match (cert.technique, cert.reference) {
        (Technique::I3, Reference::Werner { alpha }) => {
            checks.push(Check::new(
                "Werner reference within the POVM model",
                WERNER_POVM_LHS - alpha,
                0.0,
            ));
            "cited: Werner states with alpha <= 5/12 admit a POVM LHS model".to_string()
        }
        (Technique::I1, Reference::RhoTheta { beta, theta }) => {
            checks.push(Check::new(
                "projective model condition",
                projective_model_margin(beta, theta),
                0.0,
            ));
            checks.push(Check::new(
                "reference angle equals target angle",
                -(theta - cert.target.theta).abs(),
                0.0,
            ));
            "cited: projective LHS model plus the POVM extension".to_string()
        }
        (Technique::Lemma1, Reference::Canonical { theta, .. }) => {
            checks.push(Check::new(
                "reference angle below target",
                cert.target.theta - theta,
                0.0,
            ));
            "chained: reference needs its own certificate".to_string()
        }
        _ => {
            return Err(Error::Rejected(
                "technique does not match the reference kind".into(),
            ))
        }
    };
    let passed = checks.iter().all(|c| c.passed);
    Ok(DecompositionReport {
        checks,
        passed,
        reference_basis,
    })
}

/// [`check_decomposition`], failing with the first violated constraint.
pub fn verify_decomposition(cert: &DecompositionCertificate) -> Result<DecompositionReport> {
    let report = check_decomposition(cert)?;
    match report.first_failure() {
        Some(c) => Err(rejection(c)),
        None => Ok(report),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn i3_bound_at_the_werner_point() {
        assert!((i3_max_alpha(FRAC_PI_4) - 5.0 / 12.0).abs() < 1e-12);
        let c = i3_certificate(5.0 / 12.0, FRAC_PI_4).unwrap();
        assert!(c.remainder.is_none());
        verify_decomposition(&c).unwrap();
    }

    #[test]
    fn i3_boundary_saturates() {
        let theta = 0.7365;
        let c = i3_certificate(i3_max_alpha(theta), theta).unwrap();
        assert!(c.witness.min_eigenvalue.abs() < 1e-9);
        assert!(i3_certificate(i3_max_alpha(theta) + 1e-6, theta).is_err());
        let zero = i3_certificate(0.0, theta).unwrap();
        assert_eq!(zero.q, 0.0);
    }

    #[test]
    fn lemma1_examples() {
        assert_eq!(lemma1_max_alpha(0.4, 0.3, 0.3).unwrap(), 0.4);
        assert_eq!(lemma1_max_alpha(0.4, 0.0, 0.3).unwrap(), 0.0);
        let t = 0.4 * 0.3f64.tan() / (1.4 * 0.35f64.tan());
        let a = lemma1_max_alpha(0.4, 0.3, 0.35).unwrap();
        assert!((a - t / (1.0 - t)).abs() < 1e-15);
        let c = lemma1_certificate(0.4, 0.3, a, 0.35).unwrap();
        assert!(c.margin() >= -1e-9);
        assert!(c.diagnostics.as_ref().unwrap().first_condition_binding);
        assert!(lemma1_certificate(0.4, 0.3, a + 1e-3, 0.35).is_err());
        assert!(lemma1_max_alpha(0.4, 0.3, 0.2).is_err());
        let same = lemma1_certificate(0.4, 0.3, 0.4, 0.3).unwrap();
        assert!(same.remainder.is_none());
    }

    #[test]
    fn i1_defaults_and_closed_form() {
        let p = I1_DEFAULT;
        for theta in [0.0, 0.05, 0.1] {
            let c = i1_certificate(p.alpha, theta, p.q, p.beta).unwrap();
            verify_decomposition(&c).unwrap();
            let s = c.remainder.unwrap();
            let printed = i1_remainder_closed_form(p.alpha, theta, p.q, p.beta);
            let ours = [
                s.matrix()[(0, 0)].re,
                s.matrix()[(1, 1)].re,
                s.matrix()[(2, 2)].re,
                s.matrix()[(3, 3)].re,
                s.matrix()[(0, 3)].re,
            ];
            for (a, b) in printed.iter().zip(ours) {
                assert!((a - 4.0 * (1.0 - p.q) * b).abs() < 1e-12, "{a} vs {b}");
            }
        }
        assert!(i1_certificate(p.alpha, 0.3, p.q, p.beta).is_err());
    }

    #[test]
    fn ppt_oracle() {
        let (sep, m) = is_ppt_separable(&werner(WernerParams::new(1.0 / 3.0).unwrap())).unwrap();
        assert!(sep && m.abs() < 1e-12);
        let (sep, m) = is_ppt_separable(&werner(WernerParams::new(0.4).unwrap())).unwrap();
        assert!(!sep && (m + 0.05).abs() < 1e-12);
        let (_, m) = is_ppt_separable(&werner(WernerParams::new(0.0).unwrap())).unwrap();
        assert!((m - 0.25).abs() < 1e-12);
    }

    #[test]
    fn tampered_remainder_is_rejected() {
        let mut c = i1_certificate(0.4, 0.1, 0.5, 0.75).unwrap();
        let s = c.remainder.take().unwrap();
        c.remainder = Some(s.add(&HermitianMatrix::diag(&[1e-6, 0.0, 0.0, -1e-6])));
        assert!(verify_decomposition(&c).is_err());
    }
}
