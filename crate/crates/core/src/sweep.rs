//! Sweep over the filter angle: closed-form certificates near `theta = 0` and
//! `theta = pi/4`, semidefinite certificates on a grid in between, and the
//! interpolation step that turns grid values into guarantees on whole
//! sub-intervals.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_PI_4;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

use crate::certs::{
    i1_certificate, i1_search, i3_certificate, i3_max_alpha, is_ppt_separable, lemma1_certificate,
    lemma1_max_alpha, verify_decomposition, DecompositionCertificate, I1Params, Reference,
    Technique, I1_DEFAULT,
};
use crate::error::{Error, Result};
use crate::lhs_sdp::{
    certify_theta, verify_certificate, EtaSource, LhsSdpCertificate, SdpOptions, ShrinkSpec,
    SolveMode, BISECTION_TOL,
};
use crate::linalg::ComplexMatrix;
use crate::measurements::{
    icosahedron_family, icosahedron_set, shrinking_factor_estimate, shrinking_factor_table,
    MeasurementSet, DEFAULT_NET_RESOLUTION, SHRINK_TABLE,
};
use crate::states::{
    apply_filters, canonical_state, filter_normal_form, werner, FilterPair, NormalForm,
    WernerParams,
};

pub const DEFAULT_THETA_S: f64 = 0.1;
pub const DEFAULT_THETA_L: f64 = 0.7365;
pub const DEFAULT_GRID: usize = 32;
/// Two literature values of the critical visibility, kept for comparison.
pub const REFERENCE_ALPHA_C: [f64; 2] = [0.3656, 0.3636];
/// Werner states are Bell-nonlocal above this visibility; quoted, not computed.
pub const BELL_NONLOCAL_ALPHA: f64 = 0.7055;
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "HLC_THREADS";

const THETA_MATCH_TOL: f64 = 1e-12;

/// Weight `p` of `|0><0|` in Alice's noise state: one tabulated value, or the
/// best of all of them at each grid point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PSetting {
    Auto,
    Fixed(f64),
}

impl PSetting {
    pub fn candidates(&self) -> Vec<f64> {
        match *self {
            PSetting::Auto => SHRINK_TABLE.iter().map(|(p, _)| *p).collect(),
            PSetting::Fixed(p) => vec![p],
        }
    }
}

impl fmt::Display for PSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PSetting::Auto => write!(f, "auto"),
            PSetting::Fixed(p) => write!(f, "{p}"),
        }
    }
}

impl FromStr for PSetting {
    type Err = String;
    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(PSetting::Auto);
        }
        s.parse::<f64>()
            .map(PSetting::Fixed)
            .map_err(|_| format!("expected a number or \"auto\", got {s:?}"))
    }
}

impl Serialize for PSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            PSetting::Auto => s.serialize_str("auto"),
            PSetting::Fixed(p) => s.serialize_f64(p),
        }
    }
}

impl<'de> Deserialize<'de> for PSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(p) => Ok(PSetting::Fixed(p)),
            Raw::Str(s) => s.parse().map_err(serde::de::Error::custom),
        }
    }
}

/// How the small-angle construction picks its parameters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum I1Mode {
    /// `(alpha, q, beta) = (0.4, 1/2, 3/4)`.
    Default,
    /// Best `(q, beta)` found by [`i1_search`] at each angle.
    Tuned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepConfig {
    pub theta_s: f64,
    pub theta_l: f64,
    /// Number of uniformly spaced SDP points in `[theta_s, theta_l]`, 0 or at least 2.
    pub grid: usize,
    pub p: PSetting,
    pub eta_source: EtaSource,
    pub i1: I1Mode,
    pub include_i1: bool,
    pub include_i3: bool,
    /// Sample points of the closed-form curve on `[theta_l, pi/4]`.
    pub i3_points: usize,
    /// Bisect gaps whose interpolation floor falls short.
    pub refine: bool,
    /// Gaps are not split below this width.
    pub min_gap: f64,
    /// A gap is split when its floor is this far below what its endpoints
    /// (capped by the closed-form value at `theta_l`) would allow.
    pub refine_slack: f64,
    pub strict_chi: bool,
    pub solve_mode: SolveMode,
    pub bisection_tol: f64,
    /// Mesh of the shrinking-factor search in computed mode.
    pub net_resolution: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            theta_s: DEFAULT_THETA_S,
            theta_l: DEFAULT_THETA_L,
            grid: DEFAULT_GRID,
            p: PSetting::Auto,
            eta_source: EtaSource::Tabulated,
            i1: I1Mode::Tuned,
            include_i1: true,
            include_i3: true,
            i3_points: 16,
            refine: true,
            min_gap: 1e-3,
            refine_slack: 5e-4,
            strict_chi: false,
            solve_mode: SolveMode::Direct,
            bisection_tol: BISECTION_TOL,
            net_resolution: DEFAULT_NET_RESOLUTION,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |name: &'static str, value: f64, range: &'static str| {
            Err(Error::OutOfRange { name, value, range })
        };
        if !(self.theta_s > 0.0 && self.theta_s < self.theta_l) {
            return bad("theta_s", self.theta_s, "(0, theta_l)");
        }
        if !(self.theta_l < FRAC_PI_4) {
            return bad("theta_l", self.theta_l, "(theta_s, pi/4)");
        }
        if self.grid == 1 {
            return bad("grid", 1.0, "0 or at least 2");
        }
        if !(self.min_gap > 0.0) {
            return bad("min_gap", self.min_gap, "(0, inf)");
        }
        if !(self.refine_slack >= 0.0) {
            return bad("refine_slack", self.refine_slack, "[0, inf)");
        }
        if !(self.bisection_tol > 0.0) {
            return bad("bisection_tol", self.bisection_tol, "(0, inf)");
        }
        if !(self.net_resolution > 0.0) {
            return bad("net_resolution", self.net_resolution, "(0, inf)");
        }
        for p in self.p.candidates() {
            if self.eta_source == EtaSource::Tabulated {
                ShrinkSpec::tabulated(p)?;
            } else if !(0.0..1.0).contains(&p) {
                return bad("p", p, "[0, 1)");
            }
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    fn sdp_options(&self) -> SdpOptions {
        SdpOptions {
            mode: self.solve_mode,
            strict_chi: self.strict_chi,
            bisection_tol: self.bisection_tol,
        }
    }

    /// Uniform grid including both ends.
    pub fn grid_points(&self) -> Vec<f64> {
        if self.grid == 0 {
            return Vec::new();
        }
        let h = (self.theta_l - self.theta_s) / (self.grid - 1) as f64;
        (0..self.grid)
            .map(|k| {
                if k + 1 == self.grid {
                    self.theta_l
                } else {
                    self.theta_s + h * k as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Method {
    I1,
    I2,
    #[serde(rename = "LEMMA1")]
    Lemma1,
    I3,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::I1 => "I1",
            Method::I2 => "I2",
            Method::Lemma1 => "LEMMA1",
            Method::I3 => "I3",
        }
    }
}

/// `alpha_certified` holds for every angle in `[theta_lo, theta_hi]`;
/// `theta` is where the certificate itself is evaluated (the worst point).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub theta: f64,
    pub theta_lo: f64,
    pub theta_hi: f64,
    pub alpha_certified: f64,
    pub technique: Method,
    /// Index into [`SweepResult::certificates`].
    pub certificate: usize,
    /// Certificate of the reference state, for interpolated records.
    pub depends_on: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum SweepCertificate {
    Sdp(Box<LhsSdpCertificate>),
    Decomposition(Box<DecompositionCertificate>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub config_hash: String,
    /// Both literature values, for comparison with `alpha_c`.
    pub reference_alpha_c: [f64; 2],
    /// False when any shrinking factor is this crate's own estimate.
    pub certified: bool,
    /// Records cover all of `[0, pi/4]`.
    pub coverage_complete: bool,
    pub sdp_points: usize,
    pub refined_points: usize,
    pub sdp_solves: usize,
}

/// Wall-clock diagnostics; not serialized so that output is reproducible.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Timings {
    pub total_s: f64,
    pub shrink_s: f64,
    pub sdp_s: f64,
    pub analytic_s: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridValue {
    pub theta: f64,
    pub q_star: f64,
    /// Noise setting of the best program at this angle.
    pub p: f64,
    pub certificate: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub config: SweepConfig,
    pub records: Vec<SweepRecord>,
    pub certificates: Vec<SweepCertificate>,
    /// Minimum certified visibility over all records.
    pub alpha_c: Option<f64>,
    pub technique_minima: BTreeMap<String, f64>,
    /// Raw SDP optimum at every grid point, including refinement points.
    pub grid_values: Vec<GridValue>,
    pub metadata: SweepMetadata,
    #[serde(skip)]
    pub timings: Timings,
}

impl SweepResult {
    /// Largest visibility certified at `theta` by any record covering it.
    pub fn certified_alpha(&self, theta: f64) -> Option<(f64, &SweepRecord)> {
        self.records
            .iter()
            .filter(|r| {
                r.theta_lo - THETA_MATCH_TOL <= theta && theta <= r.theta_hi + THETA_MATCH_TOL
            })
            .map(|r| (r.alpha_certified, r))
            .max_by(|a, b| a.0.total_cmp(&b.0))
    }
}

fn thread_pool() -> Result<rayon::ThreadPool> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
    {
        if n > 0 {
            builder = builder.num_threads(n);
        }
    }
    builder
        .build()
        .map_err(|e| Error::Condition(format!("cannot start worker threads: {e}")))
}

fn shrink_specs(cfg: &SweepConfig) -> Result<Vec<ShrinkSpec>> {
    let ps = cfg.p.candidates();
    match cfg.eta_source {
        EtaSource::Tabulated => ps.iter().map(|&p| ShrinkSpec::tabulated(p)).collect(),
        EtaSource::Computed => {
            let family = icosahedron_family();
            let estimates = if ps.len() == 1 {
                vec![shrinking_factor_estimate(
                    &family,
                    ps[0],
                    cfg.net_resolution,
                )?]
            } else {
                shrinking_factor_table(&family, &ps, cfg.net_resolution)?
            };
            estimates
                .iter()
                .map(|e| ShrinkSpec::computed(e.p, e.eta_lower_estimate, e.eta_lower_estimate))
                .collect()
        }
    }
}

struct Node {
    theta: f64,
    sdp: LhsSdpCertificate,
    i1: Option<I1Params>,
    solves: usize,
    refined: bool,
}

impl Node {
    fn alpha(&self) -> f64 {
        self.sdp.q_star
    }
}

fn i1_params(theta: f64, mode: I1Mode) -> Option<I1Params> {
    match mode {
        I1Mode::Default => {
            let p = I1_DEFAULT;
            i1_certificate(p.alpha, theta, p.q, p.beta)
                .ok()
                .filter(|c| c.strictly_valid())
                .map(|_| p)
        }
        I1Mode::Tuned => i1_search(theta).ok(),
    }
}

fn best_sdp(
    theta: f64,
    specs: &[ShrinkSpec],
    ms: &MeasurementSet,
    options: &SdpOptions,
) -> Result<(LhsSdpCertificate, usize)> {
    let mut best: Option<LhsSdpCertificate> = None;
    let mut last_err = None;
    for spec in specs {
        match certify_theta(theta, spec, ms, options) {
            Ok(c) => {
                if best.as_ref().is_none_or(|b| c.q_star > b.q_star) {
                    best = Some(c);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(c) => Ok((c, specs.len())),
        None => Err(Error::Condition(format!(
            "no SDP certificate at theta = {theta}: {}",
            last_err.map_or("no shrink settings".into(), |e| e.to_string())
        ))),
    }
}

fn node(
    theta: f64,
    specs: &[ShrinkSpec],
    cfg: &SweepConfig,
    ms: &MeasurementSet,
    refined: bool,
) -> Result<Node> {
    let (sdp, solves) = best_sdp(theta, specs, ms, &cfg.sdp_options())?;
    Ok(Node {
        theta,
        sdp,
        i1: if cfg.include_i1 {
            i1_params(theta, cfg.i1)
        } else {
            None
        },
        solves,
        refined,
    })
}

/// Guarantee on `[left.theta, right.theta]`: interpolation from the left end,
/// or the small-angle construction at the right end (valid for every smaller
/// angle).
fn gap_floor(left: &Node, right: &Node) -> Result<(f64, Method)> {
    let lemma = lemma1_max_alpha(left.alpha(), left.theta, right.theta)?;
    let small = right.i1.map_or(0.0, |p| p.alpha);
    Ok(if small > lemma {
        (small, Method::I1)
    } else {
        (lemma, Method::Lemma1)
    })
}

/// Run the sweep, verify every record and aggregate.
pub fn sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let pool = thread_pool()?;
    let threads = pool.current_num_threads();
    let mut result = pool.install(|| sweep_inner(cfg))?;
    result.timings.threads = threads;
    Ok(result)
}

fn sweep_inner(cfg: &SweepConfig) -> Result<SweepResult> {
    let start = Instant::now();
    let ms = icosahedron_set();
    let grid = cfg.grid_points();

    let t = Instant::now();
    let specs = if grid.is_empty() {
        Vec::new()
    } else {
        shrink_specs(cfg)?
    };
    let shrink_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut nodes: Vec<Node> = grid
        .par_iter()
        .map(|&theta| node(theta, &specs, cfg, &ms, false))
        .collect::<Result<_>>()?;
    let target = i3_max_alpha(cfg.theta_l);
    while cfg.refine && nodes.len() >= 2 {
        let mut mids = Vec::new();
        for w in nodes.windows(2) {
            let (floor, _) = gap_floor(&w[0], &w[1])?;
            let want = w[0].alpha().min(w[1].alpha()).min(target) - cfg.refine_slack;
            if floor < want && (w[1].theta - w[0].theta) / 2.0 >= cfg.min_gap {
                // the neighbours' winning noise settings are the only candidates
                let mut local: Vec<ShrinkSpec> = Vec::new();
                for n in w {
                    if let Some(s) = specs.iter().find(|s| s.p == n.sdp.shrink.p) {
                        if !local.contains(s) {
                            local.push(*s);
                        }
                    }
                }
                mids.push((0.5 * (w[0].theta + w[1].theta), local));
            }
        }
        if mids.is_empty() {
            break;
        }
        let fresh: Vec<Node> = mids
            .par_iter()
            .map(|(theta, local)| node(*theta, local, cfg, &ms, true))
            .collect::<Result<_>>()?;
        nodes.extend(fresh);
        nodes.sort_by(|a, b| a.theta.total_cmp(&b.theta));
    }
    let sdp_s = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let mut records = Vec::new();
    let mut certificates = Vec::new();
    let mut push_cert = |c: SweepCertificate| {
        certificates.push(c);
        certificates.len() - 1
    };

    if cfg.include_i1 {
        let theta = cfg.theta_s;
        let p = i1_params(theta, cfg.i1).ok_or_else(|| {
            Error::Condition(format!("no small-angle certificate at theta_s = {theta}"))
        })?;
        let cert = i1_certificate(p.alpha, theta, p.q, p.beta)?;
        records.push(SweepRecord {
            theta,
            theta_lo: 0.0,
            theta_hi: theta,
            alpha_certified: p.alpha,
            technique: Method::I1,
            certificate: push_cert(SweepCertificate::Decomposition(Box::new(cert))),
            depends_on: None,
        });
    }

    let mut previous: Option<usize> = None;
    let mut sdp_indices = Vec::with_capacity(nodes.len());
    for (k, n) in nodes.iter().enumerate() {
        if k > 0 {
            let left = &nodes[k - 1];
            let (floor, method) = gap_floor(left, n)?;
            let cert = match method {
                Method::I1 => {
                    let p = n.i1.expect("I1 floor implies parameters");
                    i1_certificate(floor, n.theta, p.q, p.beta)?
                }
                _ => lemma1_certificate(left.alpha(), left.theta, floor, n.theta)?,
            };
            records.push(SweepRecord {
                theta: n.theta,
                theta_lo: left.theta,
                theta_hi: n.theta,
                alpha_certified: floor,
                technique: method,
                certificate: push_cert(SweepCertificate::Decomposition(Box::new(cert))),
                depends_on: if method == Method::Lemma1 {
                    previous
                } else {
                    None
                },
            });
        }
        let idx = push_cert(SweepCertificate::Sdp(Box::new(n.sdp.clone())));
        records.push(SweepRecord {
            theta: n.theta,
            theta_lo: n.theta,
            theta_hi: n.theta,
            alpha_certified: n.alpha(),
            technique: Method::I2,
            certificate: idx,
            depends_on: None,
        });
        previous = Some(idx);
        sdp_indices.push(idx);
    }

    if cfg.include_i3 && cfg.i3_points > 0 {
        let m = cfg.i3_points;
        let pts: Vec<f64> = if m == 1 {
            vec![cfg.theta_l]
        } else {
            let h = (FRAC_PI_4 - cfg.theta_l) / (m - 1) as f64;
            (0..m)
                .map(|j| {
                    if j + 1 == m {
                        FRAC_PI_4
                    } else {
                        cfg.theta_l + h * j as f64
                    }
                })
                .collect()
        };
        for (j, &theta) in pts.iter().enumerate() {
            let alpha = i3_max_alpha(theta);
            let cert = i3_certificate(alpha, theta)?;
            records.push(SweepRecord {
                theta,
                theta_lo: theta,
                theta_hi: pts.get(j + 1).copied().unwrap_or(FRAC_PI_4),
                alpha_certified: alpha,
                technique: Method::I3,
                certificate: push_cert(SweepCertificate::Decomposition(Box::new(cert))),
                depends_on: None,
            });
        }
    }
    let analytic_s = t.elapsed().as_secs_f64();

    // a grid value beaten by another record at the same angle is not a
    // per-angle guarantee; it stays available in `grid_values`
    let dominated: Vec<bool> = records
        .iter()
        .enumerate()
        .map(|(i, r)| {
            r.technique == Method::I2
                && records.iter().enumerate().any(|(j, o)| {
                    j != i
                        && o.theta_lo - THETA_MATCH_TOL <= r.theta
                        && r.theta <= o.theta_hi + THETA_MATCH_TOL
                        && o.alpha_certified >= r.alpha_certified
                })
        })
        .collect();
    let mut keep = dominated.iter().map(|d| !d);
    records.retain(|_| keep.next().unwrap_or(true));
    let grid_values = nodes
        .iter()
        .zip(&sdp_indices)
        .map(|(n, &certificate)| GridValue {
            theta: n.theta,
            q_star: n.alpha(),
            p: n.sdp.shrink.p,
            certificate,
        })
        .collect();

    let mut technique_minima: BTreeMap<String, f64> = BTreeMap::new();
    for r in &records {
        let e = technique_minima
            .entry(r.technique.name().to_string())
            .or_insert(f64::INFINITY);
        *e = e.min(r.alpha_certified);
    }
    let alpha_c = records.iter().map(|r| r.alpha_certified).reduce(f64::min);
    let result = SweepResult {
        config: cfg.clone(),
        records,
        certificates,
        alpha_c,
        technique_minima,
        grid_values,
        metadata: SweepMetadata {
            config_hash: cfg.hash(),
            reference_alpha_c: REFERENCE_ALPHA_C,
            certified: cfg.eta_source == EtaSource::Tabulated,
            coverage_complete: cfg.include_i1
                && cfg.include_i3
                && cfg.i3_points > 0
                && cfg.grid >= 2,
            sdp_points: nodes.len(),
            refined_points: nodes.iter().filter(|n| n.refined).count(),
            sdp_solves: nodes.iter().map(|n| n.solves).sum(),
        },
        timings: Timings {
            total_s: 0.0,
            shrink_s,
            sdp_s,
            analytic_s,
            threads: 0,
        },
    };
    verify_sweep(&result)?;
    let mut result = result;
    result.timings.total_s = start.elapsed().as_secs_f64();
    Ok(result)
}

fn record_error(r: &SweepRecord, msg: impl fmt::Display) -> Error {
    Error::Rejected(format!(
        "{} record at theta = {}: {msg}",
        r.technique.name(),
        r.theta
    ))
}

fn same(a: f64, b: f64) -> bool {
    (a - b).abs() <= THETA_MATCH_TOL
}

/// Re-verify every certificate of a sweep and the bookkeeping tying records
/// to certificates.
pub fn verify_sweep(result: &SweepResult) -> Result<()> {
    let certs = &result.certificates;
    for r in &result.records {
        if !(r.theta_lo <= r.theta && r.theta <= r.theta_hi) {
            return Err(record_error(r, "evaluation angle outside its interval"));
        }
        let cert = certs
            .get(r.certificate)
            .ok_or_else(|| record_error(r, "missing certificate"))?;
        match (r.technique, cert) {
            (Method::I2, SweepCertificate::Sdp(c)) => {
                verify_certificate(c).map_err(|e| record_error(r, e))?;
                if !same(c.theta_f, r.theta) || c.q_star < r.alpha_certified {
                    return Err(record_error(r, "certificate does not cover the record"));
                }
            }
            (Method::I1 | Method::Lemma1 | Method::I3, SweepCertificate::Decomposition(c)) => {
                verify_decomposition(c).map_err(|e| record_error(r, e))?;
                if c.technique != technique_of(r.technique) {
                    return Err(record_error(r, "certificate technique differs"));
                }
                if !same(c.target.theta, r.theta) || c.target.alpha < r.alpha_certified {
                    return Err(record_error(r, "certificate does not cover the record"));
                }
                let covered = match r.technique {
                    // valid at theta implies valid at every smaller angle
                    Method::I1 => same(r.theta, r.theta_hi),
                    // the worst point of the interpolation is the right end
                    Method::Lemma1 => same(r.theta, r.theta_hi),
                    // the closed-form bound increases with the angle
                    _ => same(r.theta, r.theta_lo),
                };
                if !covered {
                    return Err(record_error(
                        r,
                        "certificate angle is not the worst point of the interval",
                    ));
                }
                if r.technique == Method::Lemma1 {
                    let dep = r
                        .depends_on
                        .and_then(|i| certs.get(i))
                        .ok_or_else(|| record_error(r, "missing reference certificate"))?;
                    let SweepCertificate::Sdp(s) = dep else {
                        return Err(record_error(r, "reference is not an SDP certificate"));
                    };
                    let Reference::Canonical { alpha, theta } = c.reference else {
                        return Err(record_error(
                            r,
                            "interpolation without a canonical reference",
                        ));
                    };
                    if !same(theta, s.theta_f) || !same(theta, r.theta_lo) || alpha > s.q_star {
                        return Err(record_error(
                            r,
                            "reference is not the certified left end point",
                        ));
                    }
                    verify_certificate(s).map_err(|e| record_error(r, e))?;
                }
            }
            _ => {
                return Err(record_error(
                    r,
                    "certificate kind does not match the technique",
                ))
            }
        }
    }
    for g in &result.grid_values {
        let bad =
            |msg: String| Error::Rejected(format!("grid value at theta = {}: {msg}", g.theta));
        match certs.get(g.certificate) {
            Some(SweepCertificate::Sdp(c)) => {
                verify_certificate(c).map_err(|e| bad(e.to_string()))?;
                if !same(c.theta_f, g.theta) || c.q_star != g.q_star {
                    return Err(bad("certificate does not match".into()));
                }
            }
            _ => return Err(bad("missing SDP certificate".into())),
        }
    }
    let min = result
        .records
        .iter()
        .map(|r| r.alpha_certified)
        .reduce(f64::min);
    if min != result.alpha_c {
        return Err(Error::Rejected(format!(
            "alpha_c {:?} is not the minimum over records {:?}",
            result.alpha_c, min
        )));
    }
    Ok(())
}

fn technique_of(m: Method) -> Technique {
    match m {
        Method::I3 => Technique::I3,
        Method::Lemma1 => Technique::Lemma1,
        _ => Technique::I1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum VerdictKind {
    #[serde(rename = "UNSTEERABLE-AFTER-FILTERING")]
    UnsteerableAfterFiltering,
    #[serde(rename = "UNKNOWN")]
    Unknown,
}

impl fmt::Display for VerdictKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            VerdictKind::UnsteerableAfterFiltering => "UNSTEERABLE-AFTER-FILTERING",
            VerdictKind::Unknown => "UNKNOWN",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainStep {
    pub step: String,
    pub detail: String,
    /// "computed", or "cited, not computed".
    pub status: String,
}

impl ChainStep {
    fn computed(step: &str, detail: String) -> Self {
        Self {
            step: step.into(),
            detail,
            status: "computed".into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub kind: VerdictKind,
    pub alpha: f64,
    pub normal_form: NormalForm,
    pub certified_alpha: Option<f64>,
    pub record: Option<SweepRecord>,
    /// Empty unless `kind` is a locality claim.
    pub chain: Vec<ChainStep>,
}

/// Decide whether `werner(alpha)` stays unsteerable after the filters
/// `F_A (x) F_B`. Only locality is ever claimed.
pub fn verdict(
    alpha: f64,
    f_a: &ComplexMatrix,
    f_b: &ComplexMatrix,
    sweep: &SweepResult,
) -> Result<Verdict> {
    let filters = FilterPair::new(f_a.clone(), f_b.clone())?;
    let rho = werner(WernerParams::new(alpha)?);
    apply_filters(&rho, &filters)?;
    let nf = filter_normal_form(f_a, alpha)?;
    let alice_only = FilterPair::new(f_a.clone(), ComplexMatrix::identity(2))?;
    let (filtered, _) = apply_filters(&rho, &alice_only)?;
    let residual = nf.reconstruct().matrix().max_abs_diff(filtered.matrix());
    let theta = nf.params.theta;
    let mut chain = vec![ChainStep::computed(
        "filter normal form",
        format!("F_A reduces werner({alpha}) to rho(alpha = {alpha}, theta = {theta}) up to local unitaries; reconstruction residual {residual:.3e}"),
    )];
    let bob = ChainStep {
        step: "Bob-side filter".into(),
        detail: "an unsteerable assemblage stays unsteerable, hence local, under any local operation on Bob's side".into(),
        status: "cited, not computed".into(),
    };
    let unknown = |nf: NormalForm, certified_alpha, record| Verdict {
        kind: VerdictKind::Unknown,
        alpha,
        normal_form: nf,
        certified_alpha,
        record,
        chain: Vec::new(),
    };
    if residual > 1e-9 {
        return Ok(unknown(nf, None, None));
    }
    if nf.separable_output {
        let (sep, margin) = is_ppt_separable(&canonical_state(nf.params))?;
        if sep {
            chain.push(ChainStep::computed(
                "product output",
                format!("rank-one F_A leaves a product state (PPT margin {margin:.3e}); product states are local"),
            ));
            chain.push(bob);
            return Ok(Verdict {
                kind: VerdictKind::UnsteerableAfterFiltering,
                alpha,
                normal_form: nf,
                certified_alpha: Some(1.0),
                record: None,
                chain,
            });
        }
    }
    let Some((certified, record)) = sweep.certified_alpha(theta) else {
        return Ok(unknown(nf, None, None));
    };
    let record = record.clone();
    if alpha > certified {
        return Ok(unknown(nf, Some(certified), Some(record)));
    }
    let cert = &sweep.certificates[record.certificate];
    match cert {
        SweepCertificate::Sdp(c) => verify_certificate(c).map(|_| ()),
        SweepCertificate::Decomposition(c) => verify_decomposition(c).map(|_| ()),
    }
    .map_err(|e| record_error(&record, e))?;
    chain.push(ChainStep::computed(
        "LHS certificate",
        format!(
            "{} certificate #{} covers theta in [{}, {}] up to alpha = {certified}; smaller alpha mixes in a product state",
            record.technique.name(),
            record.certificate,
            record.theta_lo,
            record.theta_hi
        ),
    ));
    chain.push(bob);
    Ok(Verdict {
        kind: VerdictKind::UnsteerableAfterFiltering,
        alpha,
        normal_form: nf,
        certified_alpha: Some(certified),
        record: Some(record),
        chain,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Json,
}

impl EmitFormat {
    fn extension(&self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Json => "json",
        }
    }
}

/// Fixed-point rendering with 12 significant digits.
pub fn format_sig(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let magnitude = x.abs().log10().floor() as i32;
    let decimals = (11 - magnitude).max(0) as usize;
    format!("{x:.decimals$}")
}

pub fn to_csv(result: &SweepResult) -> String {
    let mut out = String::from("theta,alpha_certified,technique\n");
    for r in &result.records {
        out.push_str(&format!(
            "{},{},{}\n",
            format_sig(r.theta),
            format_sig(r.alpha_certified),
            r.technique.name()
        ));
    }
    out
}

pub fn to_json(result: &SweepResult) -> Result<String> {
    Ok(serde_json::to_string_pretty(result)?)
}

/// Write `<prefix>.csv` or `<prefix>.json`.
pub fn emit(result: &SweepResult, format: EmitFormat, prefix: &Path) -> Result<PathBuf> {
    let mut path = prefix.as_os_str().to_owned();
    path.push(".");
    path.push(format.extension());
    let path = PathBuf::from(path);
    let body = match format {
        EmitFormat::Csv => to_csv(result),
        EmitFormat::Json => to_json(result)?,
    };
    std::fs::write(&path, body).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(path)
}

pub fn load_result(path: &Path) -> Result<SweepResult> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(serde_json::from_str(&text)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn analytic_only() -> SweepConfig {
        SweepConfig {
            grid: 0,
            include_i1: false,
            ..SweepConfig::default()
        }
    }

    #[test]
    fn i3_only_sweep_follows_the_closed_form() {
        let res = sweep(&SweepConfig {
            i3_points: 50,
            ..analytic_only()
        })
        .unwrap();
        assert_eq!(res.records.len(), 50);
        for r in &res.records {
            let exact = 1.0 / (3.4 / r.theta.tan() - 1.0);
            assert!((r.alpha_certified - exact).abs() < 1e-10);
        }
        assert!(!res.metadata.coverage_complete);
        assert!((res.alpha_c.unwrap() - i3_max_alpha(DEFAULT_THETA_L)).abs() < 1e-15);
    }

    #[test]
    fn empty_sweep_gives_header_only_csv() {
        let res = sweep(&SweepConfig {
            include_i3: false,
            ..analytic_only()
        })
        .unwrap();
        assert_eq!(to_csv(&res), "theta,alpha_certified,technique\n");
        assert_eq!(res.alpha_c, None);
    }

    #[test]
    fn config_validation() {
        assert!(SweepConfig {
            grid: 1,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            theta_l: 0.8,
            ..Default::default()
        }
        .validate()
        .is_err());
        assert!(SweepConfig {
            p: PSetting::Fixed(0.25),
            ..Default::default()
        }
        .validate()
        .is_err());
        assert_eq!(SweepConfig::default().hash(), SweepConfig::default().hash());
        assert_ne!(
            SweepConfig::default().hash(),
            SweepConfig {
                grid: 8,
                ..Default::default()
            }
            .hash()
        );
    }

    #[test]
    fn p_setting_round_trip() {
        assert_eq!("auto".parse::<PSetting>().unwrap(), PSetting::Auto);
        assert_eq!("0.5".parse::<PSetting>().unwrap(), PSetting::Fixed(0.5));
        let json = serde_json::to_string(&[PSetting::Auto, PSetting::Fixed(0.1)]).unwrap();
        assert_eq!(json, "[\"auto\",0.1]");
        let back: Vec<PSetting> = serde_json::from_str(&json).unwrap();
        assert_eq!(back, vec![PSetting::Auto, PSetting::Fixed(0.1)]);
    }

    #[test]
    fn significant_digits() {
        assert_eq!(format_sig(0.36), "0.360000000000");
        assert_eq!(format_sig(1.0), "1.00000000000");
        assert_eq!(format_sig(0.0), "0");
    }

    #[test]
    fn tampered_record_is_rejected() {
        let mut res = sweep(&SweepConfig {
            i3_points: 4,
            ..analytic_only()
        })
        .unwrap();
        verify_sweep(&res).unwrap();
        res.records[1].alpha_certified += 1e-3;
        res.alpha_c = res
            .records
            .iter()
            .map(|r| r.alpha_certified)
            .reduce(f64::min);
        assert!(verify_sweep(&res).is_err());
    }
}
