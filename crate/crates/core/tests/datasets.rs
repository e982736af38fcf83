use std::path::PathBuf;

use dppm::data::{load_csv, pca_then_standardize, standardize, CsvOptions};

fn path(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

#[test]
fn faithful_loads_and_standardizes() {
    let data = load_csv(path("faithful.csv"), &CsvOptions::with_header()).unwrap();
    assert_eq!((data.n(), data.d()), (272, 2));
    let z = standardize(&data).unwrap();
    for j in 0..2 {
        let col = z.values().column(j);
        let mean = col.mean();
        let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 272.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-12);
    }
}

#[test]
fn iris_has_three_classes() {
    let data = load_csv(path("iris.csv"), &CsvOptions::with_header().label("species")).unwrap();
    assert_eq!((data.n(), data.d()), (150, 4));
    let labels = data.labels().unwrap();
    assert_eq!(*labels.iter().max().unwrap(), 2);
}

#[test]
fn crabs_after_projection() {
    let opts = CsvOptions::with_header().label("sp").skip("sex");
    let data = load_csv(path("crabs.csv"), &opts).unwrap();
    assert_eq!((data.n(), data.d()), (200, 5));
    let p = pca_then_standardize(&data, None).unwrap();
    assert_eq!(p.d(), 5);
    assert_eq!(p.labels().unwrap().len(), 200);
}
