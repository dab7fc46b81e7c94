use std::io::Write;

use infofair::data::{kfold_split, load_csv, synthesize, DatasetSpec, SyntheticSpec};
use infofair::fairness::{joint_from_labels, legacy};
use infofair::{Dataset64, Error};

fn spec(path: &std::path::Path) -> DatasetSpec {
    DatasetSpec {
        csv_path: path.to_path_buf(),
        label_column: "label".into(),
        positive_label_value: None,
        sensitive_column: "group".into(),
        sensitive_positive_value: None,
        drop_column_prefixes: vec![],
    }
}

fn label_dependence(ds: &Dataset64) -> f64 {
    legacy(&joint_from_labels::<f64>(&ds.y, &ds.a, &ds.y).unwrap()).unwrap()
}

#[test]
fn csv_round_trip_is_lossless() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("synthetic.csv");
    let ds: Dataset64 = synthesize(SyntheticSpec { n: 300, bias: 0.5, noise: 0.1 }, 3).unwrap();
    ds.write_csv(&path, "label", "group").unwrap();
    let back: Dataset64 = load_csv("synthetic", &spec(&path)).unwrap();
    assert_eq!(back, ds);
}

#[test]
fn drop_prefixes_and_value_mapping() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("d.csv");
    let mut f = std::fs::File::create(&path).unwrap();
    writeln!(f, "age,c_charge_desc_theft,c_charge_desc_dui,priors,label,group").unwrap();
    for i in 0..12 {
        let label = if i % 3 == 0 { "yes" } else { "no" };
        let group = if i % 2 == 0 { "Female" } else { "Male" };
        writeln!(f, "{},{},{},{},{label},{group}", 20 + i, i % 2, 1 - i % 2, i).unwrap();
    }
    drop(f);
    let mut s = spec(&path);
    s.drop_column_prefixes = vec!["c_charge_desc".into()];
    s.positive_label_value = Some("yes".into());
    s.sensitive_positive_value = Some("Female".into());
    let ds: Dataset64 = load_csv("d", &s).unwrap();
    assert_eq!(ds.len(), 12);
    assert_eq!(ds.feature_names, vec!["age", "priors"]);
    assert_eq!(ds.y.iter().filter(|&&v| v == 1).count(), 4);
    assert_eq!(ds.a.iter().filter(|&&v| v == 1).count(), 6);
}

#[test]
fn bad_cells_report_row_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.csv");
    let mut text = String::from("f1,label,group\n");
    for i in 0..12 {
        let f1 = if i == 4 { "oops".to_string() } else { i.to_string() };
        text.push_str(&format!("{f1},{},{}\n", i % 2, (i / 2) % 2));
    }
    std::fs::write(&path, text).unwrap();
    match load_csv::<f64>("bad", &spec(&path)) {
        Err(Error::Parse { row, column, .. }) => {
            assert_eq!(row, 5);
            assert_eq!(column, "f1");
        }
        other => panic!("expected parse error, got {other:?}"),
    }
    let mut s = spec(&path);
    s.label_column = "missing".into();
    assert!(matches!(load_csv::<f64>("bad", &s), Err(Error::MissingColumn(_))));
}

#[test]
fn kfold_partitions_rows() {
    let folds = kfold_split(103, 5, 9).unwrap();
    let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
    assert_eq!(sizes, vec![21, 21, 21, 20, 20]);
    let mut all: Vec<usize> = folds.iter().flat_map(|f| f.test.clone()).collect();
    all.sort_unstable();
    assert_eq!(all, (0..103).collect::<Vec<_>>());
    for f in &folds {
        assert_eq!(f.train.len() + f.test.len(), 103);
        assert!(f.train.iter().all(|i| f.test.binary_search(i).is_err()));
    }
    assert_eq!(folds, kfold_split(103, 5, 9).unwrap());
    assert_ne!(folds, kfold_split(103, 5, 10).unwrap());
}

#[test]
fn synthetic_bias_controls_label_dependence() {
    let at = |bias: f64, noise: f64| {
        let ds: Dataset64 = synthesize(SyntheticSpec { n: 10_000, bias, noise }, 17).unwrap();
        label_dependence(&ds)
    };
    let unbiased = at(0.0, 0.1);
    assert!(unbiased <= 0.01, "I(A;Y) = {unbiased} without bias");
    let biased = at(0.8, 0.1);
    assert!(biased > 0.05, "I(A;Y) = {biased} with bias 0.8");
    let mid = at(0.4, 0.1);
    assert!(unbiased < mid && mid < biased, "{unbiased} {mid} {biased}");
}

#[test]
fn synthetic_is_seeded() {
    let s = SyntheticSpec { n: 500, bias: 0.3, noise: 0.05 };
    let a: Dataset64 = synthesize(s, 1).unwrap();
    assert_eq!(a, synthesize(s, 1).unwrap());
    assert_ne!(a, synthesize(s, 2).unwrap());
    assert_eq!(a.feature_names, vec!["x1", "x2", "x3", "proxy", "noise"]);
}
