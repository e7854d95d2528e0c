use hlc_core::sweep::{
    emit, load_result, sweep, to_csv, to_json, verdict, verify_sweep, EmitFormat, Method, PSetting,
    SweepCertificate, SweepConfig, VerdictKind,
};
use hlc_core::{ComplexMatrix, Error, HermitianMatrix, C64};

fn small() -> SweepConfig {
    SweepConfig {
        grid: 4,
        p: PSetting::Fixed(0.0),
        refine: false,
        i3_points: 4,
        ..SweepConfig::default()
    }
}

#[test]
fn coarse_grid_reports_a_lower_alpha_c() {
    let res = sweep(&SweepConfig {
        grid: 2,
        refine: false,
        p: PSetting::Fixed(0.0),
        ..SweepConfig::default()
    })
    .unwrap();
    let alpha_c = res.alpha_c.unwrap();
    assert!(alpha_c < 0.3636, "{alpha_c}");
    assert!(alpha_c > 0.0);
    assert!(res.metadata.coverage_complete);
    let worst = res
        .records
        .iter()
        .find(|r| r.alpha_certified == alpha_c)
        .unwrap();
    assert!(matches!(worst.technique, Method::Lemma1 | Method::I1));
}

#[test]
fn identical_configs_give_identical_output() {
    let a = sweep(&small()).unwrap();
    let b = sweep(&small()).unwrap();
    assert_eq!(to_csv(&a), to_csv(&b));
    assert_eq!(to_json(&a).unwrap(), to_json(&b).unwrap());

    let dir = tempfile::tempdir().unwrap();
    let prefix = dir.path().join("run");
    let csv = emit(&a, EmitFormat::Csv, &prefix).unwrap();
    let json = emit(&a, EmitFormat::Json, &prefix).unwrap();
    assert_eq!(std::fs::read_to_string(csv).unwrap(), to_csv(&a));
    let back = load_result(&json).unwrap();
    // POVMs are stored as Bloch vectors, so compare the serialized form
    assert_eq!(to_json(&back).unwrap(), to_json(&a).unwrap());
    assert_eq!(back.records, a.records);
    verify_sweep(&back).unwrap();
}

#[test]
fn tampered_sweep_is_rejected() {
    let mut res = sweep(&small()).unwrap();
    let idx = res
        .certificates
        .iter()
        .position(|c| matches!(c, SweepCertificate::Sdp(_)))
        .unwrap();
    if let SweepCertificate::Sdp(c) = &mut res.certificates[idx] {
        c.sigmas[0] = c.sigmas[0].add(&HermitianMatrix::diag(&[-1e-3, 0.0]));
    }
    let err = verify_sweep(&res).unwrap_err();
    assert!(matches!(err, Error::Rejected(_)), "{err}");
}

#[test]
fn emit_reports_the_path_on_failure() {
    let res = sweep(&small()).unwrap();
    let err = emit(
        &res,
        EmitFormat::Csv,
        std::path::Path::new("/nonexistent/dir/out"),
    )
    .unwrap_err();
    assert!(err.to_string().contains("/nonexistent/dir/out.csv"));
}

#[test]
fn verdicts() {
    let res = sweep(&small()).unwrap();
    let id = ComplexMatrix::identity(2);

    let v = verdict(0.8, &id, &id, &res).unwrap();
    assert_eq!(v.kind, VerdictKind::Unknown);
    assert!(v.chain.is_empty());

    let rank_one = ComplexMatrix::new(
        3,
        2,
        vec![
            C64::new(0.6, 0.0),
            C64::new(0.0, 0.0),
            C64::new(0.0, 0.2),
            C64::new(0.0, 0.0),
            C64::new(0.1, 0.0),
            C64::new(0.0, 0.0),
        ],
    )
    .unwrap();
    let v = verdict(0.36, &rank_one, &id, &res).unwrap();
    assert_eq!(v.kind, VerdictKind::UnsteerableAfterFiltering);
    assert!(v.normal_form.separable_output);
    assert_eq!(v.chain.last().unwrap().status, "cited, not computed");

    let v = verdict(0.3, &id, &id, &res).unwrap();
    assert_eq!(v.kind, VerdictKind::UnsteerableAfterFiltering);
    assert_eq!(v.record.as_ref().unwrap().technique, Method::I3);
    assert!(v.chain.iter().any(|s| s.status == "computed"));

    let zero = ComplexMatrix::zeros(2, 2);
    assert!(verdict(0.3, &id, &zero, &res).is_err());
}
