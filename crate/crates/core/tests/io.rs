mod common;

use common::dgp_sample;
use dyadml::{load_dyadic_csv, write_sample_csv, BuildOptions, ColumnRoles, DyadError, OutcomeKind};
use std::fs::File;

#[test]
fn sample_file_round_trips_through_disk() {
    let sample = dgp_sample(3, 10, 4);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sample.csv");
    write_sample_csv(&sample, File::create(&path).unwrap()).unwrap();
    let loaded = load_dyadic_csv(&path, &ColumnRoles::standard(4), OutcomeKind::Binary, BuildOptions::default()).unwrap();
    assert_eq!(loaded.covariate_names, ["x1", "x2", "x3", "x4"]);
    assert_eq!(loaded.sample.y(), sample.y());
    assert_eq!(loaded.sample.d(), sample.d());
    assert_eq!(loaded.sample.x(), sample.x());
}

#[test]
fn missing_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let err = load_dyadic_csv(&dir.path().join("absent.csv"), &ColumnRoles::standard(1), OutcomeKind::Binary, BuildOptions::default());
    assert!(err.is_err());
}

#[test]
fn non_binary_outcome_rejected_for_logit_data() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    std::fs::write(&path, "src,dst,y,d\na,b,0.5,1\nb,a,0,1\na,c,1,0\nc,a,0,0\nb,c,1,1\nc,b,0,1\n").unwrap();
    let roles = ColumnRoles::standard(0);
    let err = load_dyadic_csv(&path, &roles, OutcomeKind::Binary, BuildOptions::default()).unwrap_err();
    assert!(matches!(err, DyadError::NonBinaryOutcome { .. }), "{err}");
    assert!(load_dyadic_csv(&path, &roles, OutcomeKind::Continuous, BuildOptions::default()).is_ok());
}
