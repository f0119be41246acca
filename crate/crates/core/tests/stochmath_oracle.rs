mod common;

use common::normal_oracle;
use recvrp::stochmath::quantile;

#[test]
fn oracle_reference_values() {
    let q90 = normal_oracle::quantile(0.9);
    let q999 = normal_oracle::quantile(0.999);
    println!("oracle q(0.9) = {q90:.17}, q(0.999) = {q999:.17}");
    assert!((q90 - 1.281_551_6).abs() < 5e-8);
    assert!((q999 - 3.090_232_3).abs() < 5e-8);
}

#[test]
fn quantile_matches_oracle_in_tails() {
    for p in [
        1e-4, 0.001, 0.01, 0.02425, 0.3, 0.7, 0.97575, 0.99, 0.999, 0.9999,
    ] {
        let got = quantile(p).unwrap();
        let want = normal_oracle::quantile(p);
        assert!((got - want).abs() < 1e-9, "p = {p}: {got} vs {want}");
    }
}
