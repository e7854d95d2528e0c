//! State families and the reduction of a one-sided filter to canonical form.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use serde::{Deserialize, Serialize};

use crate::error::{check_range, Error, Result};
use crate::linalg::{r, svd, ComplexMatrix, DensityMatrix, HermitianMatrix, Subsystem};

/// Success probabilities below this are treated as a vanishing denominator.
pub const MIN_SUCCESS_PROB: f64 = 1e-12;
/// Slack on the largest singular value of a filter.
pub const FILTER_NORM_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WernerParams {
    pub alpha: f64,
}

impl WernerParams {
    pub fn new(alpha: f64) -> Result<Self> {
        check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { alpha })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CanonicalParams {
    pub alpha: f64,
    pub theta: f64,
}

impl CanonicalParams {
    /// `theta` is folded into `[0, pi/4]` first; any finite angle is accepted.
    pub fn new(alpha: f64, theta: f64) -> Result<Self> {
        check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
        if !theta.is_finite() {
            return Err(Error::OutOfRange {
                name: "theta",
                value: theta,
                range: "finite",
            });
        }
        Ok(Self {
            alpha,
            theta: fold_theta(theta),
        })
    }
}

/// Map `theta` to the representative in `[0, pi/4]`.
///
/// `rho(a, theta)` is locally unitarily equivalent to `rho(a, -theta)` (a phase
/// on one side), to `rho(a, pi/2 - theta)` (bit flips on both sides), and hence
/// to `rho(a, theta + pi/2)`.
pub fn fold_theta(theta: f64) -> f64 {
    let t = theta.rem_euclid(FRAC_PI_2);
    if t > FRAC_PI_4 {
        FRAC_PI_2 - t
    } else {
        t
    }
}

pub fn werner(p: WernerParams) -> DensityMatrix {
    let a = p.alpha;
    let mut m = ComplexMatrix::diag(&[(1.0 - a) / 4.0; 4]);
    m[(0, 0)] += r(a / 2.0);
    m[(3, 3)] += r(a / 2.0);
    m[(0, 3)] = r(a / 2.0);
    m[(3, 0)] = r(a / 2.0);
    DensityMatrix::new(HermitianMatrix::symmetrized(&m))
        .expect("Werner states are valid for alpha in [0, 1]")
}

/// `rho(alpha, theta) = base(theta) + alpha * slope(theta)`, both Hermitian.
///
/// `base = rho_A (x) I/2` and `slope = |psi_theta><psi_theta| - base`.
pub fn canonical_affine(theta: f64) -> (HermitianMatrix, HermitianMatrix) {
    let (c, s) = (theta.cos(), theta.sin());
    let base = HermitianMatrix::diag(&[c * c / 2.0, c * c / 2.0, s * s / 2.0, s * s / 2.0]);
    let mut psi = ComplexMatrix::zeros(4, 4);
    psi[(0, 0)] = r(c * c);
    psi[(3, 3)] = r(s * s);
    psi[(0, 3)] = r(c * s);
    psi[(3, 0)] = r(c * s);
    let slope = HermitianMatrix::symmetrized(&(&psi - base.matrix()));
    (base, slope)
}

pub fn canonical_state(p: CanonicalParams) -> DensityMatrix {
    let (base, slope) = canonical_affine(p.theta);
    DensityMatrix::new(base.add(&slope.scale(p.alpha)))
        .expect("canonical states are valid in range")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterPair {
    pub f_a: ComplexMatrix,
    pub f_b: ComplexMatrix,
}

impl FilterPair {
    pub fn new(f_a: ComplexMatrix, f_b: ComplexMatrix) -> Result<Self> {
        check_filter("F_A", &f_a)?;
        check_filter("F_B", &f_b)?;
        Ok(Self { f_a, f_b })
    }

    pub fn identity() -> Self {
        Self {
            f_a: ComplexMatrix::identity(2),
            f_b: ComplexMatrix::identity(2),
        }
    }
}

fn check_filter(name: &str, f: &ComplexMatrix) -> Result<()> {
    if f.cols() != 2 {
        return Err(Error::Dimension(format!(
            "{name} must act on a qubit (2 columns), got {}x{}",
            f.rows(),
            f.cols()
        )));
    }
    let s = svd(f)?;
    if s.singular_values[0] > 1.0 + FILTER_NORM_TOL {
        return Err(Error::Condition(format!(
            "{name} has singular value {} > 1, so no Kraus complement exists",
            s.singular_values[0]
        )));
    }
    Ok(())
}

/// Filter a two-qubit state; returns the normalized output and the success
/// probability.
pub fn apply_filters(rho: &DensityMatrix, f: &FilterPair) -> Result<(DensityMatrix, f64)> {
    if rho.dim() != 4 {
        return Err(Error::Dimension(format!(
            "expected a two-qubit state, got dim {}",
            rho.dim()
        )));
    }
    let k = f.f_a.kron(&f.f_b);
    let out = HermitianMatrix::symmetrized(&k.conjugate(rho.matrix()));
    let prob = out.trace();
    if !(prob >= MIN_SUCCESS_PROB) {
        return Err(Error::FilterAnnihilates(prob));
    }
    Ok((DensityMatrix::new(out.scale(1.0 / prob))?, prob))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalForm {
    pub params: CanonicalParams,
    /// `d x d`.
    pub u_a: ComplexMatrix,
    /// `2 x 2`.
    pub u_b: ComplexMatrix,
    pub singular_values: [f64; 2],
    /// Success probability of the filter on any Werner state, `Tr(D^T D) / 2`.
    pub normalization: f64,
    /// Set for rank-1 filters; the output is then a product state.
    pub separable_output: bool,
}

impl NormalForm {
    /// The canonical state placed on Alice's `d`-dimensional output by
    /// zero-padding, then rotated by `U_A (x) U_B`.
    pub fn reconstruct(&self) -> DensityMatrix {
        let d = self.u_a.rows();
        let rho = canonical_state(self.params);
        let mut e = ComplexMatrix::zeros(d, 2);
        for i in 0..d.min(2) {
            e[(i, i)] = r(1.0);
        }
        let emb = e.kron(&ComplexMatrix::identity(2));
        let u = self.u_a.kron(&self.u_b);
        let m = u.matmul(&emb).conjugate(rho.matrix());
        let h = HermitianMatrix::symmetrized(&m);
        let t = h.trace();
        DensityMatrix::new(h.scale(1.0 / t)).expect("isometric image of a state")
    }
}

/// Reduce a one-sided filter on a Werner state to canonical form.
///
/// With `F_A = U D V^dagger` and the `U (x) conj(U)` invariance of Werner
/// states, the filtered state is `(U (x) conj(V))` applied to the normalized
/// `(D (x) I) rho_W (D (x) I)^dagger`, which is `rho(alpha, theta)` with
/// `tan(theta)` the singular-value ratio.
pub fn filter_normal_form(f_a: &ComplexMatrix, alpha: f64) -> Result<NormalForm> {
    check_range("alpha", alpha, 0.0, 1.0, "[0, 1]")?;
    let s = svd(f_a)?;
    let [s1, s2] = s.singular_values;
    if s1 == 0.0 {
        return Err(Error::ZeroFilter);
    }
    let theta = (s2 / s1).atan();
    Ok(NormalForm {
        params: CanonicalParams::new(alpha, theta)?,
        u_a: s.u,
        u_b: s.v.conj(),
        singular_values: [s1, s2],
        normalization: (s1 * s1 + s2 * s2) / 2.0,
        separable_output: s2 == 0.0,
    })
}

/// Condition under which the projective-measurement model of the reference
/// construction holds: `cos^2(2 theta) >= (2 beta - 1) / ((2 - beta) beta^3)`.
/// Returns the left side minus the right side.
pub fn projective_model_margin(beta: f64, theta: f64) -> f64 {
    let lhs = (2.0 * theta).cos().powi(2);
    let rhs = (2.0 * beta - 1.0) / ((2.0 - beta) * beta.powi(3));
    lhs - rhs
}

/// `(rho(beta, theta) + |0><0| (x) rho_B) / 2` with `rho_B = Tr_A rho(beta, theta)`.
pub fn rho_theta(beta: f64, theta: f64) -> Result<DensityMatrix> {
    check_range("beta", beta, 0.0, 1.0, "[0, 1]")?;
    if beta == 0.0 {
        return Err(Error::OutOfRange {
            name: "beta",
            value: beta,
            range: "(0, 1]",
        });
    }
    let margin = projective_model_margin(beta, theta);
    if margin < 0.0 {
        return Err(Error::Condition(format!(
            "cos^2(2 theta) >= (2 beta - 1)/((2 - beta) beta^3) fails at beta = {beta}, theta = {theta} (margin {margin:.3e})"
        )));
    }
    let rho = canonical_state(CanonicalParams::new(beta, theta)?);
    let rho_b = rho.partial_trace((2, 2), Subsystem::A)?;
    let zero = HermitianMatrix::diag(&[1.0, 0.0]);
    let second = zero.kron(rho_b.hermitian());
    DensityMatrix::new(rho.hermitian().add(&second).scale(0.5))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::C64;

    #[test]
    fn werner_endpoints() {
        let w0 = werner(WernerParams::new(0.0).unwrap());
        assert!(w0.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.25; 4])) < 1e-16);
        let w1 = werner(WernerParams::new(1.0).unwrap());
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let bell = DensityMatrix::pure(&[r(s), r(0.0), r(0.0), r(s)]).unwrap();
        assert!(w1.matrix().max_abs_diff(bell.matrix()) < 1e-15);
        assert!(WernerParams::new(1.1).is_err());
        let w = werner(WernerParams::new(5.0 / 12.0).unwrap());
        assert!((w.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn canonical_at_pi_over_4_is_werner() {
        for a in [0.0, 0.3, 5.0 / 12.0, 1.0] {
            let c = canonical_state(CanonicalParams::new(a, FRAC_PI_4).unwrap());
            let w = werner(WernerParams::new(a).unwrap());
            assert!(c.matrix().max_abs_diff(w.matrix()) < 1e-12);
        }
    }

    #[test]
    fn canonical_entries() {
        let (a, t) = (0.37, 0.4);
        let rho = canonical_state(CanonicalParams::new(a, t).unwrap());
        let (c, s) = (t.cos(), t.sin());
        let expect = [
            c * c * (1.0 + a) / 2.0,
            c * c * (1.0 - a) / 2.0,
            s * s * (1.0 - a) / 2.0,
            s * s * (1.0 + a) / 2.0,
        ];
        for (i, e) in expect.iter().enumerate() {
            assert!((rho.matrix()[(i, i)].re - e).abs() < 1e-15);
        }
        assert!((rho.matrix()[(0, 3)].re - a * c * s).abs() < 1e-15);
        let z = canonical_state(CanonicalParams::new(0.0, t).unwrap());
        let d = ComplexMatrix::diag(&[c * c / 2.0, c * c / 2.0, s * s / 2.0, s * s / 2.0]);
        assert!(z.matrix().max_abs_diff(&d) < 1e-15);
    }

    #[test]
    fn folding_is_a_symmetry() {
        for t in [-0.3, 0.9, 1.2, 2.0, 5.0] {
            let f = fold_theta(t);
            assert!((0.0..=FRAC_PI_4).contains(&f));
            let tan = t.tan().abs();
            let ratio = if tan > 1.0 { 1.0 / tan } else { tan };
            assert!((f.tan() - ratio).abs() < 1e-12, "{t}");
        }
    }

    #[test]
    fn reduced_state_of_pure_canonical() {
        let t = 0.3;
        let psi = canonical_state(CanonicalParams::new(1.0, t).unwrap());
        let a = psi.partial_trace((2, 2), Subsystem::B).unwrap();
        let d = ComplexMatrix::diag(&[t.cos().powi(2), t.sin().powi(2)]);
        assert!(a.matrix().max_abs_diff(&d) < 1e-15);
    }

    #[test]
    fn identity_filters_do_nothing() {
        let w = werner(WernerParams::new(0.5).unwrap());
        let (out, p) = apply_filters(&w, &FilterPair::identity()).unwrap();
        assert!((p - 1.0).abs() < 1e-15);
        assert!(out.matrix().max_abs_diff(w.matrix()) < 1e-15);
    }

    #[test]
    fn annihilating_filter_is_an_error() {
        let w = werner(WernerParams::new(1.0).unwrap());
        let f = FilterPair::new(
            ComplexMatrix::diag(&[1.0, 0.0]),
            ComplexMatrix::diag(&[0.0, 1.0]),
        )
        .unwrap();
        assert!(matches!(
            apply_filters(&w, &f),
            Err(Error::FilterAnnihilates(_))
        ));
    }

    #[test]
    fn oversized_filter_is_rejected() {
        assert!(
            FilterPair::new(ComplexMatrix::diag(&[1.5, 0.0]), ComplexMatrix::identity(2)).is_err()
        );
    }

    #[test]
    fn diagonal_filter_gives_ratio_angle() {
        let nf = filter_normal_form(&ComplexMatrix::diag(&[1.0, 0.5]), 0.4).unwrap();
        assert!((nf.params.theta - 0.5f64.atan()).abs() < 1e-15);
        assert!((nf.normalization - 0.625).abs() < 1e-15);
        let nf = filter_normal_form(&ComplexMatrix::identity(2), 0.4).unwrap();
        assert!((nf.params.theta - FRAC_PI_4).abs() < 1e-15);
    }

    #[test]
    fn rank_one_filter_is_flagged_and_product() {
        let f = ComplexMatrix::diag(&[1.0, 0.0]);
        let nf = filter_normal_form(&f, 0.6).unwrap();
        assert!(nf.separable_output);
        assert_eq!(nf.params.theta, 0.0);
        let w = werner(WernerParams::new(0.6).unwrap());
        let fp = FilterPair::new(f, ComplexMatrix::identity(2)).unwrap();
        let (out, _) = apply_filters(&w, &fp).unwrap();
        assert!(out.matrix().max_abs_diff(nf.reconstruct().matrix()) < 1e-14);
        // product: |0><0| (x) diag((1+a)/2, (1-a)/2)
        assert!(
            out.matrix()
                .max_abs_diff(&ComplexMatrix::diag(&[0.8, 0.2, 0.0, 0.0]))
                < 1e-15
        );
        assert!(matches!(
            filter_normal_form(&ComplexMatrix::zeros(2, 2), 0.5),
            Err(Error::ZeroFilter)
        ));
    }

    #[test]
    fn single_row_filter_reconstructs() {
        let f = ComplexMatrix::new(1, 2, vec![C64::new(0.3, 0.1), C64::new(-0.2, 0.5)]).unwrap();
        let nf = filter_normal_form(&f, 0.7).unwrap();
        assert!(nf.separable_output);
        let w = werner(WernerParams::new(0.7).unwrap());
        let (out, _) =
            apply_filters(&w, &FilterPair::new(f, ComplexMatrix::identity(2)).unwrap()).unwrap();
        assert!(out.matrix().max_abs_diff(nf.reconstruct().matrix()) < 1e-14);
    }

    #[test]
    fn rho_theta_condition() {
        assert!(projective_model_margin(0.75, 0.1) > 0.0);
        let m = projective_model_margin(0.75, 0.1);
        assert!((m - (0.2f64.cos().powi(2) - 0.5 / (1.25 * 0.421875))).abs() < 1e-15);
        assert!(rho_theta(0.75, 0.1).is_ok());
        assert!(matches!(
            rho_theta(1.0, FRAC_PI_4),
            Err(Error::Condition(_))
        ));
        for t in [0.0, 0.3, 0.7, FRAC_PI_4] {
            assert!(projective_model_margin(0.5, t) >= 0.0);
            let s = rho_theta(0.5, t).unwrap();
            assert!((s.trace() - 1.0).abs() < 1e-14);
        }
    }
}
