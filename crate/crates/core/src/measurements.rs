//! Qubit POVMs, the icosahedron measurement set, deterministic strategies,
//! noise shrinking and the convex-membership machinery behind shrinking
//! factors.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{check_range, Error, Result};
use crate::linalg::{
    bloch_decompose, bloch_operator, ComplexMatrix, DensityMatrix, HermitianMatrix, PSD_TOL,
};
use crate::lp::{solve_standard, LpOutcome};

/// Completeness tolerance for POVMs.
pub const POVM_TOL: f64 = 1e-10;
/// Residual accepted when a membership decomposition is substituted back.
pub const MEMBERSHIP_TOL: f64 = 1e-9;
/// Refuse to enumerate more deterministic strategies than this.
pub const MAX_STRATEGIES: usize = 1_000_000;
/// Bisection tolerance on the shrinking parameter.
pub const ETA_BISECTION_TOL: f64 = 1e-4;
/// Search mesh used when no resolution is given.
pub const DEFAULT_NET_RESOLUTION: f64 = 0.005;
/// Elements with Frobenius norm below this count as zero operators.
const ZERO_ELEMENT_TOL: f64 = 1e-12;

/// Published lower bounds on the shrinking factor of the icosahedron family,
/// keyed by the weight `p` of `|0><0|` in the reference state.
pub const SHRINK_TABLE: [(f64, f64); 10] = [
    (0.0, 0.67),
    (0.1, 0.67),
    (0.2, 0.66),
    (0.3, 0.66),
    (0.4, 0.66),
    (0.5, 0.66),
    (0.6, 0.62),
    (0.7, 0.56),
    (0.8, 0.47),
    (0.9, 0.32),
];

pub fn tabulated_eta(p: f64) -> Option<f64> {
    SHRINK_TABLE
        .iter()
        .find(|(q, _)| (q - p).abs() < 1e-9)
        .map(|(_, e)| *e)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Povm {
    pub label: String,
    elements: Vec<HermitianMatrix>,
}

impl Povm {
    pub fn new(label: impl Into<String>, elements: Vec<HermitianMatrix>) -> Result<Self> {
        if elements.is_empty() {
            return Err(Error::Dimension("POVM without elements".into()));
        }
        let mut sum = HermitianMatrix::zeros(2);
        for (a, e) in elements.iter().enumerate() {
            if e.dim() != 2 {
                return Err(Error::Dimension(format!(
                    "POVM element {a} has dim {}",
                    e.dim()
                )));
            }
            let m = e.min_eigenvalue();
            if m < -PSD_TOL {
                return Err(Error::NotPsd { min_eigenvalue: m });
            }
            sum = sum.add(e);
        }
        let dev = sum.matrix().max_abs_diff(&ComplexMatrix::identity(2));
        if dev > POVM_TOL {
            return Err(Error::Condition(format!(
                "POVM elements sum to identity only within {dev:.3e}"
            )));
        }
        Ok(Self {
            label: label.into(),
            elements,
        })
    }

    /// Elements `(w/2)(I + n . sigma)` from `(w, n)` pairs.
    pub fn from_bloch(label: impl Into<String>, parts: &[(f64, [f64; 3])]) -> Result<Self> {
        Self::new(
            label,
            parts.iter().map(|&(w, n)| bloch_operator(w, n)).collect(),
        )
    }

    /// Projective measurement along the unit vector `n`: outcomes `P_+`, `P_-`.
    pub fn projective(label: impl Into<String>, n: [f64; 3]) -> Self {
        let m = [-n[0], -n[1], -n[2]];
        Self::from_bloch(label, &[(1.0, n), (1.0, m)]).expect("projectors along a unit vector")
    }

    pub fn elements(&self) -> &[HermitianMatrix] {
        &self.elements
    }

    pub fn outcomes(&self) -> usize {
        self.elements.len()
    }

    /// Indices of elements that are not the zero operator.
    pub fn nonzero_outcomes(&self) -> Vec<usize> {
        (0..self.elements.len())
            .filter(|&a| self.elements[a].matrix().frobenius_norm() > ZERO_ELEMENT_TOL)
            .collect()
    }

    /// Append zero elements up to `k` outcomes.
    pub fn padded(&self, k: usize) -> Self {
        let mut elements = self.elements.clone();
        while elements.len() < k {
            elements.push(HermitianMatrix::zeros(2));
        }
        Self {
            label: self.label.clone(),
            elements,
        }
    }
}

#[derive(Serialize, Deserialize)]
struct ElementRepr {
    weight: f64,
    bloch: [f64; 3],
}

#[derive(Serialize, Deserialize)]
struct PovmRepr {
    label: String,
    elements: Vec<ElementRepr>,
}

impl Serialize for Povm {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        PovmRepr {
            label: self.label.clone(),
            elements: self
                .elements
                .iter()
                .map(|e| {
                    let (weight, bloch) = bloch_decompose(e);
                    ElementRepr { weight, bloch }
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Povm {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = PovmRepr::deserialize(d)?;
        let parts: Vec<_> = r.elements.iter().map(|e| (e.weight, e.bloch)).collect();
        Povm::from_bloch(r.label, &parts).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementSet {
    pub id: String,
    pub povms: Vec<Povm>,
}

impl MeasurementSet {
    pub fn new(id: impl Into<String>, povms: Vec<Povm>) -> Self {
        Self {
            id: id.into(),
            povms,
        }
    }

    pub fn count(&self) -> usize {
        self.povms.len()
    }

    /// Largest outcome count over the set.
    pub fn outcomes_per_povm(&self) -> usize {
        self.povms.iter().map(Povm::outcomes).max().unwrap_or(0)
    }
}

/// The 12 icosahedron vertices `(0, +-1, +-phi)`, `(+-1, +-phi, 0)`,
/// `(+-phi, 0, +-1)`, normalized. The z axis passes through an edge midpoint.
pub fn icosahedron_vertices() -> [[f64; 3]; 12] {
    let phi = (1.0 + 5f64.sqrt()) / 2.0;
    let n = (1.0 + phi * phi).sqrt();
    let (a, b) = (1.0 / n, phi / n);
    let mut out = [[0.0; 3]; 12];
    let mut k = 0;
    for s1 in [1.0, -1.0] {
        for s2 in [1.0, -1.0] {
            out[k] = [0.0, s1 * a, s2 * b];
            out[k + 1] = [s1 * a, s2 * b, 0.0];
            out[k + 2] = [s2 * b, 0.0, s1 * a];
            k += 3;
        }
    }
    out
}

/// One vertex per antipodal pair: the one whose last nonzero coordinate
/// (in z, y, x order) is positive.
pub fn upper_vertices() -> Vec<[f64; 3]> {
    icosahedron_vertices()
        .into_iter()
        .filter(|v| {
            let key = if v[2].abs() > 1e-12 {
                v[2]
            } else if v[1].abs() > 1e-12 {
                v[1]
            } else {
                v[0]
            };
            key > 0.0
        })
        .collect()
}

/// The six projective measurements along the icosahedron axes.
pub fn icosahedron_set() -> MeasurementSet {
    let povms = upper_vertices()
        .into_iter()
        .enumerate()
        .map(|(i, v)| Povm::projective(format!("ico{i}"), v))
        .collect();
    MeasurementSet::new("icosahedron-6", povms)
}

/// All relabelings of the set's POVMs into `slots` outcomes, plus the
/// trivial POVM `{I, 0, ...}` in every position.
///
/// For the six icosahedron projectors and four slots this gives
/// `6 * 12 + 4 = 76` POVMs.
pub fn relabeled_family(ms: &MeasurementSet, slots: usize) -> Result<MeasurementSet> {
    let mut out = Vec::new();
    for m in &ms.povms {
        let nz = m.nonzero_outcomes();
        if nz.len() > slots {
            return Err(Error::Dimension(format!(
                "POVM {} has {} nonzero outcomes, more than {slots} slots",
                m.label,
                nz.len()
            )));
        }
        for placement in injections(nz.len(), slots) {
            let mut elements = vec![HermitianMatrix::zeros(2); slots];
            for (k, &slot) in placement.iter().enumerate() {
                elements[slot] = m.elements[nz[k]].clone();
            }
            out.push(Povm {
                label: format!("{}{:?}", m.label, placement),
                elements,
            });
        }
    }
    for slot in 0..slots {
        let mut elements = vec![HermitianMatrix::zeros(2); slots];
        elements[slot] = HermitianMatrix::identity(2);
        out.push(Povm {
            label: format!("trivial[{slot}]"),
            elements,
        });
    }
    Ok(MeasurementSet::new(
        format!("{}-relabeled{slots}", ms.id),
        out,
    ))
}

/// Ordered selections of `k` distinct slots out of `n`.
fn injections(k: usize, n: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = Vec::with_capacity(k);
    fn rec(k: usize, n: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for s in 0..n {
            if !cur.contains(&s) {
                cur.push(s);
                rec(k, n, cur, out);
                cur.pop();
            }
        }
    }
    rec(k, n, &mut cur, &mut out);
    out
}

/// The 76-element icosahedron family used for shrinking-factor membership.
pub fn icosahedron_family() -> MeasurementSet {
    relabeled_family(&icosahedron_set(), 4).expect("projective POVMs fit in four slots")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicStrategy {
    pub index: usize,
    /// `assignment[x]` is the outcome (element index of POVM `x`) always
    /// returned for setting `x`.
    pub assignment: Vec<usize>,
}

impl DeterministicStrategy {
    pub fn response(&self, a: usize, x: usize) -> f64 {
        if self.assignment[x] == a {
            1.0
        } else {
            0.0
        }
    }
}

/// Every deterministic assignment of a nonzero outcome to each POVM.
///
/// Zero elements are skipped: an assemblage member for a zero operator
/// vanishes, which forces every hidden state assigned to it to vanish too.
pub fn enumerate_strategies(ms: &MeasurementSet) -> Result<Vec<DeterministicStrategy>> {
    let choices: Vec<Vec<usize>> = ms.povms.iter().map(Povm::nonzero_outcomes).collect();
    let count: f64 = choices.iter().map(|c| c.len() as f64).product();
    if count > MAX_STRATEGIES as f64 {
        return Err(Error::TooManyStrategies {
            count,
            limit: MAX_STRATEGIES,
        });
    }
    let n = count as usize;
    Ok((0..n)
        .map(|index| {
            let mut rest = index;
            let assignment = choices
                .iter()
                .map(|c| {
                    let a = c[rest % c.len()];
                    rest /= c.len();
                    a
                })
                .collect();
            DeterministicStrategy { index, assignment }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShrinkConfig {
    pub p: f64,
    pub eta: f64,
}

impl ShrinkConfig {
    pub fn new(p: f64, eta: f64) -> Result<Self> {
        check_range("p", p, 0.0, 1.0, "[0, 1]")?;
        check_range("eta", eta, 0.0, 1.0, "[0, 1]")?;
        Ok(Self { p, eta })
    }
}

/// `xi_A = p |0><0| + (1 - p) I / 2`.
pub fn xi_a(p: f64) -> Result<DensityMatrix> {
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    DensityMatrix::new(HermitianMatrix::diag(&[(1.0 + p) / 2.0, (1.0 - p) / 2.0]))
}

/// `M_a -> eta M_a + (1 - eta) Tr(xi_A M_a) I`.
pub fn shrink_povm(m: &Povm, cfg: ShrinkConfig) -> Povm {
    let xi = xi_a(cfg.p).expect("ShrinkConfig validated p");
    let elements = m
        .elements
        .iter()
        .map(|e| {
            let t = xi.matrix().inner_re(e.matrix());
            e.scale(cfg.eta)
                .add(&HermitianMatrix::identity(2).scale((1.0 - cfg.eta) * t))
        })
        .collect();
    Povm {
        label: format!("{}~eta{}", m.label, cfg.eta),
        elements,
    }
}

fn hvec(m: &HermitianMatrix) -> [f64; 4] {
    let a = m.matrix();
    [a[(0, 0)].re, a[(1, 1)].re, a[(0, 1)].re, a[(0, 1)].im]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Membership {
    pub feasible: bool,
    /// Convex weights over the family, present when feasible.
    pub weights: Option<Vec<f64>>,
    /// Largest entry of `sum_x p_x M_{a|x} - target_a` after substitution.
    pub residual: f64,
}

fn padded_family(target: &Povm, family: &MeasurementSet) -> (usize, Vec<Povm>) {
    let k = target.outcomes().max(family.outcomes_per_povm());
    (k, family.povms.iter().map(|f| f.padded(k)).collect())
}

/// Decide whether `target` is a convex combination of the family's POVMs
/// (outcome by outcome).
pub fn membership_lp(target: &Povm, family: &MeasurementSet) -> Result<Membership> {
    if family.povms.is_empty() {
        return Err(Error::Dimension("empty measurement family".into()));
    }
    let (k, fam) = padded_family(target, family);
    let target = target.padded(k);
    let n = fam.len();
    let mut a = Vec::with_capacity(4 * k + 1);
    let mut b = Vec::with_capacity(4 * k + 1);
    // every POVM sums to I, so the last outcome's equations follow from the
    // others and the normalization row
    for o in 0..k - 1 {
        let cols: Vec<[f64; 4]> = fam.iter().map(|f| hvec(&f.elements[o])).collect();
        let t = hvec(&target.elements[o]);
        for r in 0..4 {
            a.push(cols.iter().map(|c| c[r]).collect());
            b.push(t[r]);
        }
    }
    a.push(vec![1.0; n]);
    b.push(1.0);
    match solve_standard(&vec![0.0; n], &a, &b)? {
        LpOutcome::Optimal { x, .. } => {
            let residual = membership_residual(&target, &fam, &x);
            if residual > MEMBERSHIP_TOL {
                return Err(Error::Lp(format!(
                    "decomposition fails substitution check (residual {residual:.3e})"
                )));
            }
            Ok(Membership {
                feasible: true,
                weights: Some(x),
                residual,
            })
        }
        LpOutcome::Infeasible { .. } => Ok(Membership {
            feasible: false,
            weights: None,
            residual: f64::INFINITY,
        }),
        LpOutcome::Unbounded => Err(Error::Lp("feasibility problem reported unbounded".into())),
    }
}

fn membership_residual(target: &Povm, fam: &[Povm], w: &[f64]) -> f64 {
    let mut worst = (w.iter().sum::<f64>() - 1.0).abs();
    for o in 0..target.outcomes() {
        let mut acc = HermitianMatrix::zeros(2);
        for (f, &p) in fam.iter().zip(w) {
            if p != 0.0 {
                acc = acc.add(&f.elements[o].scale(p));
            }
        }
        worst = worst.max(acc.matrix().max_abs_diff(target.elements[o].matrix()));
    }
    worst
}

/// Largest `eta` in `[0, 1]` with the shrunk target inside the family's hull,
/// by bisection on [`membership_lp`].
pub fn max_eta_bisection(target: &Povm, family: &MeasurementSet, p: f64) -> Result<f64> {
    let at = |eta: f64| -> Result<bool> {
        let cfg = ShrinkConfig::new(p, eta)?;
        Ok(membership_lp(&shrink_povm(target, cfg), family)?.feasible)
    };
    if at(1.0)? {
        return Ok(1.0);
    }
    if !at(0.0)? {
        return Ok(0.0);
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    while hi - lo > ETA_BISECTION_TOL {
        let mid = 0.5 * (lo + hi);
        if at(mid)? {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo)
}

/// Largest `eta` in `[0, 1]` with the shrunk target inside the family's hull,
/// as a single linear program with `eta` as a variable.
pub fn max_eta_lp(target: &Povm, family: &MeasurementSet, p: f64) -> Result<f64> {
    let xi = xi_a(p)?;
    let (k, fam) = padded_family(target, family);
    let target = target.padded(k);
    let n = fam.len();
    // columns: p_x (n), eta, slack for eta <= 1
    let mut a = Vec::new();
    let mut b = Vec::new();
    for o in 0..k - 1 {
        let m = &target.elements[o];
        let t = xi.matrix().inner_re(m.matrix());
        let d = hvec(&m.sub(&HermitianMatrix::identity(2).scale(t)));
        let rhs = hvec(&HermitianMatrix::identity(2).scale(t));
        for r in 0..4 {
            let mut row: Vec<f64> = fam.iter().map(|f| hvec(&f.elements[o])[r]).collect();
            row.push(-d[r]);
            row.push(0.0);
            a.push(row);
            b.push(rhs[r]);
        }
    }
    let mut row = vec![1.0; n];
    row.extend([0.0, 0.0]);
    a.push(row);
    b.push(1.0);
    let mut row = vec![0.0; n];
    row.extend([1.0, 1.0]);
    a.push(row);
    b.push(1.0);
    let mut c = vec![0.0; n + 2];
    c[n] = -1.0;
    match solve_standard(&c, &a, &b)? {
        LpOutcome::Optimal { x, .. } => Ok(x[n]),
        LpOutcome::Infeasible { residual } => Err(Error::Lp(format!(
            "shrinking to the trivial POVM reported infeasible (phase-1 residual {residual:.3e})"
        ))),
        LpOutcome::Unbounded => Err(Error::Lp("bounded eta reported unbounded".into())),
    }
}

/// Rank-one POVM with the given Bloch directions and weights fixed by
/// `sum_a w_a n_a = 0`, `sum_a w_a = 2`; `None` if the weights are not all
/// nonnegative or the directions are degenerate.
pub fn rank_one_povm(dirs: &[[f64; 3]]) -> Option<Povm> {
    let units: Vec<[f64; 3]> = dirs
        .iter()
        .map(|d| {
            let n = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            [d[0] / n, d[1] / n, d[2] / n]
        })
        .collect();
    if units.iter().any(|u| u.iter().any(|v| !v.is_finite())) {
        return None;
    }
    let k = units.len();
    let mut m = nalgebra::DMatrix::<f64>::zeros(4, k);
    for (j, u) in units.iter().enumerate() {
        m[(0, j)] = u[0];
        m[(1, j)] = u[1];
        m[(2, j)] = u[2];
        m[(3, j)] = 1.0;
    }
    let rhs = nalgebra::DVector::from_vec(vec![0.0, 0.0, 0.0, 2.0]);
    let w = m.clone().svd(true, true).solve(&rhs, 1e-12).ok()?;
    if (&m * &w - &rhs).amax() > 1e-10 || w.iter().any(|&x| x < 0.0) {
        return None;
    }
    let parts: Vec<_> = w.iter().zip(&units).map(|(&w, &u)| (w, u)).collect();
    Povm::from_bloch("rank1", &parts).ok()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkEstimate {
    pub p: f64,
    /// `eta_upper_bound - slack_constant * delta`.
    pub eta_lower_estimate: f64,
    /// Certified: some tested POVM cannot be shrunk further into the hull.
    pub eta_upper_bound: f64,
    /// Final search mesh size.
    pub delta: f64,
    pub slack_constant: f64,
    pub evaluations: usize,
    /// The POVM attaining the upper bound.
    pub worst: Povm,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShrinkSearch {
    pub projective_seeds: usize,
    pub random_seeds: usize,
    pub refined: usize,
    /// Perturb-and-refine rounds around the incumbent.
    pub hops: usize,
    /// Restarts per hop round.
    pub hop_width: usize,
    pub initial_step: f64,
    pub slack_constant: f64,
    pub seed: u64,
}

impl Default for ShrinkSearch {
    fn default() -> Self {
        Self {
            projective_seeds: 100,
            random_seeds: 3000,
            refined: 16,
            hops: 6,
            hop_width: 4,
            initial_step: 0.08,
            slack_constant: 2.0,
            seed: 0x1c05_a4ed,
        }
    }
}

/// Quasi-uniform directions on the sphere (Fibonacci lattice).
pub fn fibonacci_sphere(n: usize) -> Vec<[f64; 3]> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
            let r = (1.0 - z * z).sqrt();
            let t = golden * i as f64;
            [r * t.cos(), r * t.sin(), z]
        })
        .collect()
}

fn flat_to_dirs(x: &[f64]) -> Vec<[f64; 3]> {
    x.chunks(3).map(|c| [c[0], c[1], c[2]]).collect()
}

/// Smallest `max_eta_lp` over an explicit list of POVMs.
pub fn shrinking_factor_over_net(
    family: &MeasurementSet,
    p: f64,
    net: &[Povm],
) -> Result<(f64, usize)> {
    let vals: Vec<f64> = net
        .par_iter()
        .map(|m| max_eta_lp(m, family, p))
        .collect::<Result<_>>()?;
    let (i, v) = vals
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Dimension("empty net".into()))?;
    Ok((*v, i))
}

/// Estimate the shrinking factor of `family` for `xi_A(p)`.
///
/// Seeds are projective measurements on a Fibonacci net and random rank-one
/// four-outcome POVMs; the most constraining seeds are refined by compass
/// search over their Bloch directions until the mesh is below
/// `net_resolution`. The smallest maximal shrinking found is a certified upper
/// bound; the lower estimate subtracts `slack_constant * delta`.
pub fn shrinking_factor_estimate(
    family: &MeasurementSet,
    p: f64,
    net_resolution: f64,
) -> Result<ShrinkEstimate> {
    shrinking_factor_search(family, p, net_resolution, &ShrinkSearch::default(), &[])
}

/// As [`shrinking_factor_estimate`] with explicit search settings and extra
/// starting POVMs (rank-one, given by Bloch directions).
pub fn shrinking_factor_search(
    family: &MeasurementSet,
    p: f64,
    net_resolution: f64,
    search: &ShrinkSearch,
    extra_seeds: &[Vec<[f64; 3]>],
) -> Result<ShrinkEstimate> {
    if !(net_resolution > 0.0) {
        return Err(Error::OutOfRange {
            name: "net_resolution",
            value: net_resolution,
            range: "> 0",
        });
    }
    check_range("p", p, 0.0, 1.0, "[0, 1]")?;
    let eval = |x: &[f64]| -> Result<f64> {
        match rank_one_povm(&flat_to_dirs(x)) {
            Some(m) => max_eta_lp(&m, family, p),
            None => Ok(f64::INFINITY),
        }
    };

    let mut seeds: Vec<Vec<f64>> = Vec::new();
    for n in fibonacci_sphere(search.projective_seeds) {
        seeds.push(vec![n[0], n[1], n[2], -n[0], -n[1], -n[2]]);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(search.seed);
    let mut added = 0;
    while added < search.random_seeds {
        let x: Vec<f64> = (0..12).map(|_| rng.gen_range(-1.0..1.0)).collect();
        if rank_one_povm(&flat_to_dirs(&x)).is_some() {
            seeds.push(x);
            added += 1;
        }
    }
    for s in extra_seeds {
        seeds.push(s.iter().flat_map(|d| d.iter().copied()).collect());
    }
    let mut scored: Vec<(f64, Vec<f64>)> = seeds
        .into_par_iter()
        .map(|x| eval(&x).map(|v| (v, x)))
        .collect::<Result<_>>()?;
    let mut evaluations = scored.len();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0));

    let refined: Vec<(f64, Vec<f64>, usize)> = scored
        .iter()
        .take(search.refined.max(1))
        .cloned()
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|(v, x)| compass_search(&eval, x, v, search.initial_step, net_resolution))
        .collect::<Result<_>>()?;
    let mut best = scored[0].clone();
    for (v, x, n) in refined {
        evaluations += n;
        if v < best.0 {
            best = (v, x);
        }
    }
    // basin hopping from the incumbent
    for round in 0..search.hops {
        let width = if round % 2 == 0 { 0.05 } else { 0.15 };
        let starts: Vec<Vec<f64>> = (0..search.hop_width)
            .map(|_| {
                best.1
                    .iter()
                    .map(|v| v + width * rng.gen_range(-1.0..1.0))
                    .collect()
            })
            .collect();
        let hopped: Vec<(f64, Vec<f64>, usize)> = starts
            .into_par_iter()
            .map(|x| {
                let fx = eval(&x)?;
                compass_search(&eval, x, fx, search.initial_step / 2.0, net_resolution)
            })
            .collect::<Result<_>>()?;
        for (v, x, n) in hopped {
            evaluations += n + 1;
            if v < best.0 {
                best = (v, x);
            }
        }
    }
    let worst = match rank_one_povm(&flat_to_dirs(&best.1)) {
        Some(m) => m,
        None => return Err(Error::Lp("search ended on an invalid POVM".into())),
    };
    let upper = confirmed_eta(&worst, family, p, best.0)?;
    let delta = net_resolution;
    Ok(ShrinkEstimate {
        p,
        eta_lower_estimate: (upper - search.slack_constant * delta).max(0.0),
        eta_upper_bound: upper,
        delta,
        slack_constant: search.slack_constant,
        evaluations,
        worst,
    })
}

/// The direct LP optimum, cross-checked against bisection on the
/// feasibility LP.
fn confirmed_eta(m: &Povm, family: &MeasurementSet, p: f64, direct: f64) -> Result<f64> {
    let bisected = max_eta_bisection(m, family, p)?;
    if bisected > direct + 1e-9 || direct - bisected > ETA_BISECTION_TOL + 1e-9 {
        return Err(Error::Lp(format!(
            "direct optimum {direct} and bisection {bisected} disagree"
        )));
    }
    Ok(direct)
}

fn compass_search(
    f: &(dyn Fn(&[f64]) -> Result<f64> + Sync),
    mut x: Vec<f64>,
    mut fx: f64,
    mut step: f64,
    min_step: f64,
) -> Result<(f64, Vec<f64>, usize)> {
    let mut evals = 0;
    while step >= min_step {
        let mut improved = false;
        for i in 0..x.len() {
            for s in [step, -step] {
                let mut y = x.clone();
                y[i] += s;
                let fy = f(&y)?;
                evals += 1;
                if fy < fx - 1e-12 {
                    x = y;
                    fx = fy;
                    improved = true;
                    break;
                }
            }
        }
        if !improved {
            step *= 0.5;
        }
    }
    Ok((fx, x, evals))
}

/// Estimates for several `p`, sharing every refined POVM across all `p` so
/// that each bound is the minimum over the union of tested POVMs.
pub fn shrinking_factor_table(
    family: &MeasurementSet,
    ps: &[f64],
    net_resolution: f64,
) -> Result<Vec<ShrinkEstimate>> {
    let search = ShrinkSearch::default();
    let mut out: Vec<ShrinkEstimate> = Vec::new();
    let mut pool: Vec<Vec<[f64; 3]>> = Vec::new();
    for &p in ps {
        let est = shrinking_factor_search(family, p, net_resolution, &search, &pool)?;
        pool.push(bloch_dirs(&est.worst));
        out.push(est);
    }
    for est in out.iter_mut() {
        for dirs in &pool {
            if let Some(m) = rank_one_povm(dirs) {
                let v = max_eta_lp(&m, family, est.p)?;
                if v < est.eta_upper_bound - 1e-12 {
                    let v = confirmed_eta(&m, family, est.p, v)?;
                    est.eta_upper_bound = v;
                    est.eta_lower_estimate = (v - est.slack_constant * est.delta).max(0.0);
                    est.worst = m;
                }
                est.evaluations += 1;
            }
        }
    }
    Ok(out)
}

fn bloch_dirs(m: &Povm) -> Vec<[f64; 3]> {
    m.elements
        .iter()
        .filter(|e| e.trace() > 1e-12)
        .map(|e| bloch_decompose(e).1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn icosahedron_geometry() {
        let v = icosahedron_vertices();
        let s5 = 1.0 / 5f64.sqrt();
        for a in &v {
            let n = (a[0] * a[0] + a[1] * a[1] + a[2] * a[2]).sqrt();
            assert!((n - 1.0).abs() < 1e-12);
            for b in &v {
                let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                assert!(
                    [1.0, -1.0, s5, -s5].iter().any(|t| (d - t).abs() < 1e-12),
                    "{d}"
                );
            }
        }
        let up = upper_vertices();
        assert_eq!(up.len(), 6);
        for a in &up {
            for b in &up {
                let d = a[0] * b[0] + a[1] * b[1] + a[2] * b[2];
                assert!(d > -0.99, "antipodal pair kept twice");
            }
        }
    }

    #[test]
    fn family_has_76_povms() {
        let fam = icosahedron_family();
        assert_eq!(fam.count(), 76);
        assert!(fam.povms.iter().all(|m| m.outcomes() == 4));
        for m in &fam.povms {
            Povm::new(m.label.clone(), m.elements.clone()).unwrap();
        }
    }

    #[test]
    fn strategy_counts() {
        let ms = icosahedron_set();
        let s = enumerate_strategies(&ms).unwrap();
        assert_eq!(s.len(), 64);
        let mut seen: Vec<_> = s.iter().map(|d| d.assignment.clone()).collect();
        seen.sort();
        seen.dedup();
        assert_eq!(seen.len(), 64);
        let one = MeasurementSet::new("z", vec![Povm::projective("z", [0.0, 0.0, 1.0])]);
        assert_eq!(enumerate_strategies(&one).unwrap().len(), 2);
        let two = MeasurementSet::new(
            "zx",
            vec![
                Povm::projective("z", [0.0, 0.0, 1.0]),
                Povm::projective("x", [1.0, 0.0, 0.0]),
            ],
        );
        assert_eq!(enumerate_strategies(&two).unwrap().len(), 4);
        // zero elements do not multiply the count
        let padded = MeasurementSet::new("p", ms.povms.iter().map(|m| m.padded(4)).collect());
        assert_eq!(enumerate_strategies(&padded).unwrap().len(), 64);
    }

    #[test]
    fn enumeration_guard() {
        let povms = (0..21)
            .map(|i| Povm::projective(format!("m{i}"), [0.0, 0.0, 1.0]))
            .collect();
        match enumerate_strategies(&MeasurementSet::new("big", povms)) {
            Err(Error::TooManyStrategies { count, .. }) => assert_eq!(count, 2f64.powi(21)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn shrink_examples() {
        let z = Povm::projective("z", [0.0, 0.0, 1.0]);
        assert_eq!(
            shrink_povm(&z, ShrinkConfig::new(0.3, 1.0).unwrap()).elements,
            z.elements
        );
        let zero = shrink_povm(&z, ShrinkConfig::new(0.0, 0.0).unwrap());
        for e in zero.elements() {
            assert!(e.matrix().max_abs_diff(&ComplexMatrix::diag(&[0.5, 0.5])) < 1e-15);
        }
        let half = shrink_povm(&z, ShrinkConfig::new(0.0, 0.5).unwrap());
        assert!(
            half.elements[0]
                .matrix()
                .max_abs_diff(&ComplexMatrix::diag(&[0.75, 0.25]))
                < 1e-15
        );
        assert!(
            half.elements[1]
                .matrix()
                .max_abs_diff(&ComplexMatrix::diag(&[0.25, 0.75]))
                < 1e-15
        );
    }

    #[test]
    fn membership_examples() {
        let fam = icosahedron_family();
        let member = fam.povms[5].clone();
        let r = membership_lp(&member, &fam).unwrap();
        assert!(r.feasible);
        let trivial = Povm::new("t", vec![HermitianMatrix::identity(2)]).unwrap();
        assert!(membership_lp(&trivial, &fam).unwrap().feasible);
        let z = Povm::projective("z", [0.0, 0.0, 1.0]);
        let shrunk = shrink_povm(&z, ShrinkConfig::new(0.0, 0.9).unwrap());
        assert!(!membership_lp(&shrunk, &fam).unwrap().feasible);
    }

    #[test]
    fn direct_and_bisection_agree() {
        let fam = icosahedron_family();
        let m = rank_one_povm(&[
            [1.0, 0.2, 0.3],
            [-0.4, 1.0, -0.2],
            [0.1, -0.7, 0.9],
            [-0.6, -0.3, -1.0],
        ])
        .unwrap();
        for p in [0.0, 0.5, 0.9] {
            let a = max_eta_lp(&m, &fam, p).unwrap();
            let b = max_eta_bisection(&m, &fam, p).unwrap();
            assert!(
                b <= a + 1e-9 && a - b <= ETA_BISECTION_TOL + 1e-9,
                "{p}: {a} {b}"
            );
        }
    }

    #[test]
    fn net_of_a_member_has_unit_bound() {
        let fam = icosahedron_family();
        let (v, _) = shrinking_factor_over_net(&fam, 0.3, &[fam.povms[0].clone()]).unwrap();
        assert!((v - 1.0).abs() < 1e-12);
    }

    #[test]
    fn povm_json_round_trip() {
        let m = rank_one_povm(&[
            [1.0, 0.0, 0.0],
            [0.0, 1.0, 0.0],
            [-1.0, -1.0, 0.2],
            [0.0, 0.0, -1.0],
        ])
        .unwrap();
        let s = serde_json::to_string(&m).unwrap();
        let back: Povm = serde_json::from_str(&s).unwrap();
        assert!(back
            .elements
            .iter()
            .zip(m.elements())
            .all(|(a, b)| a.matrix().max_abs_diff(b.matrix()) < 1e-15));
    }
}
