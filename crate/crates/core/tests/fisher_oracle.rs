//! `fisher_z_pair` against 50-digit values from `data/gen_fisher_oracle.py`.

use scengen_core::fisher_z_pair;

const ORACLE: &str = include_str!("data/fisher_oracle.csv");

#[test]
fn matches_high_precision_oracle() {
    let mut rows = 0;
    for line in ORACLE.lines().skip(1) {
        let f: Vec<&str> = line.split(',').collect();
        let r1: f64 = f[0].parse().unwrap();
        let n1: usize = f[1].parse().unwrap();
        let r2: f64 = f[2].parse().unwrap();
        let n2: usize = f[3].parse().unwrap();
        let t: f64 = f[4].parse().unwrap();
        let p: f64 = f[5].parse().unwrap();
        let got = fisher_z_pair(r1, n1, r2, n2).unwrap();
        assert!(
            (got.statistic - t).abs() <= 1e-12 * t.abs().max(1.0),
            "{line}: statistic {}",
            got.statistic
        );
        assert!((got.p_value - p).abs() <= 1e-12, "{line}: p {}", got.p_value);
        rows += 1;
    }
    assert_eq!(rows, 1000);
}
