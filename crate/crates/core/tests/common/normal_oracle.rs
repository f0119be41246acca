//! High-precision standard-normal reference: erf by its Maclaurin series
//! (compensated summation), quantile by bisection on that CDF.

fn erf_series(x: f64) -> f64 {
    // erf(x) = 2/sqrt(pi) * sum_n (-1)^n x^(2n+1) / (n! (2n+1))
    let mut term = x; // (-1)^n x^(2n+1) / n!
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut n = 0u32;
    loop {
        let add = term / (2 * n + 1) as f64;
        let y = add - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        n += 1;
        term *= -x * x / n as f64;
        if add.abs() < 1e-30 && n > 5 {
            break;
        }
        if n > 400 {
            break;
        }
    }
    2.0 / std::f64::consts::PI.sqrt() * sum
}

pub fn cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf_series(z / std::f64::consts::SQRT_2))
}

pub fn quantile(p: f64) -> f64 {
    assert!(p > 0.0 && p < 1.0);
    let (mut lo, mut hi) = (-8.0f64, 8.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 {
            break;
        }
    }
    0.5 * (lo + hi)
}
