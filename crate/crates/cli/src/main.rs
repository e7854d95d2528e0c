use std::f64::consts::FRAC_PI_4;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use hlc_core::certs::{
    i1_certificate, i1_search, i3_certificate, lemma1_certificate, verify_decomposition,
    DecompositionCertificate, I1_DEFAULT,
};
use hlc_core::lhs_sdp::{
    certify_theta, verify_certificate, EtaSource, LhsSdpCertificate, SdpOptions, ShrinkSpec,
    SolveMode,
};
use hlc_core::measurements::{
    icosahedron_family, icosahedron_set, shrinking_factor_table, tabulated_eta,
    DEFAULT_NET_RESOLUTION,
};
use hlc_core::sweep::{
    emit, sweep, verify_sweep, EmitFormat, I1Mode, PSetting, SweepConfig, SweepResult,
};
use hlc_core::{Check, Error};

const EXIT_CERT_FAILURE: u8 = 2;
const EXIT_USAGE: u8 = 3;

#[derive(Parser)]
#[command(
    name = "hlc",
    version,
    about = "Local-hidden-state certificates for filtered Werner states"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum EtaArg {
    Tabulated,
    Computed,
}

impl From<EtaArg> for EtaSource {
    fn from(e: EtaArg) -> Self {
        match e {
            EtaArg::Tabulated => EtaSource::Tabulated,
            EtaArg::Computed => EtaSource::Computed,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum TechniqueArg {
    Auto,
    I1,
    I3,
    Lemma1,
}

#[derive(Clone, Copy, ValueEnum)]
enum I1Arg {
    Default,
    Tuned,
}

#[derive(Subcommand)]
enum Command {
    /// Certify the whole angle range and report alpha_c.
    Sweep {
        /// TOML file with sweep settings; flags override it.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        grid: Option<usize>,
        #[arg(long)]
        theta_s: Option<f64>,
        #[arg(long)]
        theta_l: Option<f64>,
        /// Noise weight for xi_A, or "auto" for the best tabulated value per angle.
        #[arg(long)]
        p: Option<PSetting>,
        #[arg(long, value_enum)]
        eta_source: Option<EtaArg>,
        #[arg(long, value_enum)]
        i1: Option<I1Arg>,
        /// Do not bisect gaps with a weak interpolation floor.
        #[arg(long)]
        no_refine: bool,
        /// Write <prefix>.csv and <prefix>.json.
        #[arg(long)]
        out_prefix: Option<PathBuf>,
    },
    /// Closed-form decomposition certificate for rho(alpha, theta).
    Certify {
        #[arg(long)]
        alpha: f64,
        #[arg(long)]
        theta: f64,
        #[arg(long, value_enum, default_value = "auto")]
        technique: TechniqueArg,
        /// Reference certificate (SDP or decomposition) for interpolation.
        #[arg(long)]
        from_cert: Option<PathBuf>,
        /// Mixing weight for the small-angle construction.
        #[arg(long)]
        q: Option<f64>,
        /// Reference visibility for the small-angle construction.
        #[arg(long)]
        beta: Option<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve the semidefinite program at one filter angle.
    Sdp {
        #[arg(long)]
        theta: f64,
        /// Shrinking parameter; defaults to the bound for p.
        #[arg(long)]
        eta: Option<f64>,
        #[arg(long, default_value_t = 0.0)]
        p: f64,
        #[arg(long, value_enum, default_value = "tabulated")]
        eta_source: EtaArg,
        /// Solve by bisection on q with this bracket width.
        #[arg(long)]
        tol: Option<f64>,
        /// Also require chi to be PSD.
        #[arg(long)]
        strict_chi: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Estimate shrinking factors of the icosahedron family.
    Shrink {
        /// Comma-separated noise weights.
        #[arg(long, value_delimiter = ',', default_values_t = [0.0, 0.5, 0.9])]
        p: Vec<f64>,
        #[arg(long, default_value_t = DEFAULT_NET_RESOLUTION)]
        resolution: f64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Re-verify a certificate or sweep file.
    Verify { file: PathBuf },
}

enum Failure {
    Usage(String),
    Certificate(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::OutOfRange { .. } | Error::Dimension(_) | Error::Io { .. } | Error::Json(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Certificate(e.to_string()),
        }
    }
}

type CliResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let out = match cli.command {
        Command::Sweep {
            config,
            grid,
            theta_s,
            theta_l,
            p,
            eta_source,
            i1,
            no_refine,
            out_prefix,
        } => run_sweep(
            config, grid, theta_s, theta_l, p, eta_source, i1, no_refine, out_prefix,
        ),
        Command::Certify {
            alpha,
            theta,
            technique,
            from_cert,
            q,
            beta,
            out,
        } => run_certify(alpha, theta, technique, from_cert, q, beta, out),
        Command::Sdp {
            theta,
            eta,
            p,
            eta_source,
            tol,
            strict_chi,
            out,
        } => run_sdp(theta, eta, p, eta_source.into(), tol, strict_chi, out),
        Command::Shrink { p, resolution, out } => run_shrink(&p, resolution, out),
        Command::Verify { file } => run_verify(&file),
    };
    match out {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_USAGE)
        }
        Err(Failure::Certificate(m)) => {
            eprintln!("certificate failure: {m}");
            ExitCode::from(EXIT_CERT_FAILURE)
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> CliResult {
    let text = serde_json::to_string_pretty(value).map_err(|e| Failure::Usage(e.to_string()))?;
    fs::write(path, text).map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    eprintln!("wrote {}", path.display());
    Ok(())
}

/// Sweep settings from a TOML file. `out_prefix` is accepted alongside the
/// sweep keys.
fn load_config(path: &Path) -> Result<(SweepConfig, Option<PathBuf>), Failure> {
    let mut table: toml::Table = read(path)?
        .parse()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let prefix = match table.remove("out_prefix") {
        Some(toml::Value::String(s)) => Some(PathBuf::from(s)),
        Some(other) => {
            return Err(Failure::Usage(format!(
                "out_prefix must be a string, got {other}"
            )))
        }
        None => None,
    };
    let cfg: SweepConfig = toml::Value::Table(table)
        .try_into()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok((cfg, prefix))
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    config: Option<PathBuf>,
    grid: Option<usize>,
    theta_s: Option<f64>,
    theta_l: Option<f64>,
    p: Option<PSetting>,
    eta_source: Option<EtaArg>,
    i1: Option<I1Arg>,
    no_refine: bool,
    out_prefix: Option<PathBuf>,
) -> CliResult {
    let (mut cfg, file_prefix) = match &config {
        Some(path) => load_config(path)?,
        None => (SweepConfig::default(), None),
    };
    if let Some(g) = grid {
        cfg.grid = g;
    }
    if let Some(t) = theta_s {
        cfg.theta_s = t;
    }
    if let Some(t) = theta_l {
        cfg.theta_l = t;
    }
    if let Some(p) = p {
        cfg.p = p;
    }
    if let Some(e) = eta_source {
        cfg.eta_source = e.into();
    }
    if let Some(m) = i1 {
        cfg.i1 = match m {
            I1Arg::Default => I1Mode::Default,
            I1Arg::Tuned => I1Mode::Tuned,
        };
    }
    if no_refine {
        cfg.refine = false;
    }
    cfg.validate()?;
    let result = sweep(&cfg)?;
    match result.alpha_c {
        Some(a) if result.metadata.coverage_complete => println!("alpha_c = {a:.6}"),
        Some(a) => {
            println!("alpha_c = {a:.6} (partial coverage: minimum over the certified angles only)")
        }
        None => println!("alpha_c = none (no records)"),
    }
    for (k, v) in &result.technique_minima {
        println!("  min {k:<6} {v:.6}");
    }
    println!(
        "  {} records, {} SDP points ({} refined), {} solves, {:.1} s on {} threads{}",
        result.records.len(),
        result.metadata.sdp_points,
        result.metadata.refined_points,
        result.metadata.sdp_solves,
        result.timings.total_s,
        result.timings.threads,
        if result.metadata.certified {
            ""
        } else {
            ", NON-CERTIFIED (computed shrinking factors)"
        }
    );
    if let Some(prefix) = out_prefix.or(file_prefix) {
        for format in [EmitFormat::Csv, EmitFormat::Json] {
            let path = emit(&result, format, &prefix)?;
            eprintln!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn reference_from(path: &Path) -> Result<(f64, f64), Failure> {
    let text = read(path)?;
    if let Ok(c) = serde_json::from_str::<LhsSdpCertificate>(&text) {
        verify_certificate(&c)?;
        return Ok((c.q_star, c.theta_f));
    }
    if let Ok(c) = serde_json::from_str::<DecompositionCertificate>(&text) {
        verify_decomposition(&c)?;
        return Ok((c.target.alpha, c.target.theta));
    }
    Err(Failure::Usage(format!(
        "{}: not a certificate file",
        path.display()
    )))
}

fn run_certify(
    alpha: f64,
    theta: f64,
    technique: TechniqueArg,
    from_cert: Option<PathBuf>,
    q: Option<f64>,
    beta: Option<f64>,
    out: Option<PathBuf>,
) -> CliResult {
    let i1 = || -> hlc_core::Result<DecompositionCertificate> {
        match (q, beta) {
            (None, None) => {
                let d = I1_DEFAULT;
                i1_certificate(alpha, theta, d.q, d.beta).or_else(|_| {
                    let t = i1_search(theta)?;
                    i1_certificate(alpha, theta, t.q, t.beta)
                })
            }
            _ => i1_certificate(
                alpha,
                theta,
                q.unwrap_or(I1_DEFAULT.q),
                beta.unwrap_or(I1_DEFAULT.beta),
            ),
        }
    };
    let lemma1 = |path: &Option<PathBuf>| -> Result<DecompositionCertificate, Failure> {
        let path = path
            .as_ref()
            .ok_or_else(|| Failure::Usage("interpolation needs --from-cert".into()))?;
        let (a0, t0) = reference_from(path)?;
        Ok(lemma1_certificate(a0, t0, alpha, theta)?)
    };
    let cert = match technique {
        TechniqueArg::I3 => i3_certificate(alpha, theta)?,
        TechniqueArg::I1 => i1()?,
        TechniqueArg::Lemma1 => lemma1(&from_cert)?,
        TechniqueArg::Auto => {
            let mut errors = Vec::new();
            let mut found = None;
            if theta > 0.0 && theta <= FRAC_PI_4 {
                match i3_certificate(alpha, theta) {
                    Ok(c) => found = Some(c),
                    Err(e) => errors.push(format!("I3: {e}")),
                }
            }
            if found.is_none() {
                match i1() {
                    Ok(c) => found = Some(c),
                    Err(e) => errors.push(format!("I1: {e}")),
                }
            }
            if found.is_none() && from_cert.is_some() {
                match lemma1(&from_cert) {
                    Ok(c) => found = Some(c),
                    Err(Failure::Usage(m) | Failure::Certificate(m)) => {
                        errors.push(format!("LEMMA1: {m}"))
                    }
                }
            }
            found.ok_or_else(|| Failure::Certificate(errors.join("; ")))?
        }
    };
    let report = verify_decomposition(&cert)?;
    println!(
        "{:?} certificate for rho({alpha}, {theta}): q = {:.12}, PPT margin {:.3e}",
        cert.technique,
        cert.q,
        cert.margin()
    );
    println!("  reference model: {}", report.reference_basis);
    print_checks(&report.checks);
    if let Some(path) = out {
        write_json(&path, &cert)?;
    }
    Ok(())
}

fn run_sdp(
    theta: f64,
    eta: Option<f64>,
    p: f64,
    source: EtaSource,
    tol: Option<f64>,
    strict_chi: bool,
    out: Option<PathBuf>,
) -> CliResult {
    let shrink = match source {
        EtaSource::Tabulated => match eta {
            Some(e) => ShrinkSpec::tabulated_with_eta(p, e)?,
            None => ShrinkSpec::tabulated(p)?,
        },
        EtaSource::Computed => {
            let est = shrinking_factor_table(&icosahedron_family(), &[p], DEFAULT_NET_RESOLUTION)?
                .remove(0);
            ShrinkSpec::computed(
                p,
                eta.unwrap_or(est.eta_lower_estimate),
                est.eta_lower_estimate,
            )?
        }
    };
    let mut options = SdpOptions {
        strict_chi,
        ..SdpOptions::default()
    };
    if let Some(t) = tol {
        options.mode = SolveMode::Bisection;
        options.bisection_tol = t;
    }
    let cert = certify_theta(theta, &shrink, &icosahedron_set(), &options)?;
    println!(
        "q* = {:.10} at theta = {theta} (eta = {}, p = {p}, {} solves, {} iterations)",
        cert.q_star, shrink.eta, cert.metadata.solves, cert.metadata.iterations
    );
    if let Some(r) = &cert.verification_report {
        if !r.certified {
            println!("  NON-CERTIFIED: shrinking bound is an estimate");
        }
        print_checks(&r.checks);
    }
    if let Some(path) = out {
        write_json(&path, &cert)?;
    }
    Ok(())
}

fn run_shrink(ps: &[f64], resolution: f64, out: Option<PathBuf>) -> CliResult {
    let estimates = shrinking_factor_table(&icosahedron_family(), ps, resolution)?;
    println!("{:>5} {:>10} {:>10} {:>8}", "p", "lower", "upper", "table");
    for e in &estimates {
        let table = tabulated_eta(e.p).map_or("-".to_string(), |v| format!("{v:.2}"));
        println!(
            "{:>5} {:>10.5} {:>10.5} {:>8}",
            e.p, e.eta_lower_estimate, e.eta_upper_bound, table
        );
    }
    if let Some(path) = out {
        write_json(&path, &estimates)?;
    }
    Ok(())
}

fn print_checks(checks: &[Check]) {
    for c in checks {
        println!(
            "  [{}] {:<40} margin {:+.3e}",
            if c.passed { "ok" } else { "FAIL" },
            c.name,
            c.margin
        );
    }
}

fn run_verify(path: &Path) -> CliResult {
    let text = read(path)?;
    let value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    let obj = value.as_object();
    let has = |k: &str| obj.is_some_and(|o| o.contains_key(k));
    let parse_err = |e: serde_json::Error| Failure::Usage(format!("{}: {e}", path.display()));
    if has("records") {
        let result: SweepResult = serde_json::from_value(value).map_err(parse_err)?;
        verify_sweep(&result)?;
        println!(
            "sweep verified: {} records, alpha_c = {}",
            result.records.len(),
            result.alpha_c.map_or("none".into(), |a| format!("{a:.6}"))
        );
    } else if has("sigmas") {
        let cert: LhsSdpCertificate = serde_json::from_value(value).map_err(parse_err)?;
        let report = verify_certificate(&cert)?;
        println!(
            "SDP certificate verified: q* = {} at theta = {}",
            cert.q_star, cert.theta_f
        );
        if !report.certified {
            println!("  NON-CERTIFIED: shrinking bound is an estimate");
        }
        print_checks(&report.checks);
    } else if has("technique") {
        let cert: DecompositionCertificate = serde_json::from_value(value).map_err(parse_err)?;
        let report = verify_decomposition(&cert)?;
        println!(
            "{:?} certificate verified for rho({}, {})",
            cert.technique, cert.target.alpha, cert.target.theta
        );
        print_checks(&report.checks);
    } else {
        return Err(Failure::Usage(format!(
            "{}: unrecognised file",
            path.display()
        )));
    }
    Ok(())
}
