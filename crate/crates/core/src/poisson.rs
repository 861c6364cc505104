//! Photon-number statistics of a coherent pulse.

/// Probability of `i` photons in a pulse of mean photon number `mean`.
///
/// Evaluated in log space once `i` is large enough for `mean^i` or `i!` to
/// leave the comfortable range of `f64`.
pub fn poisson_pmf(mean: f64, i: u32) -> f64 {
    debug_assert!(mean >= 0.0, "negative Poisson mean {mean}");
    if mean == 0.0 {
        return if i == 0 { 1.0 } else { 0.0 };
    }
    if i <= 20 {
        let mut term = (-mean).exp();
        for k in 1..=i {
            term *= mean / f64::from(k);
        }
        return term;
    }
    (f64::from(i) * mean.ln() - mean - ln_factorial(i)).exp()
}

fn ln_factorial(n: u32) -> f64 {
    (2..=n).map(|k| f64::from(k).ln()).sum()
}

/// Poisson mass strictly above `cutoff`, summed directly from the tail so
/// that values far below machine epsilon stay meaningful.
pub fn poisson_tail(mean: f64, cutoff: u32) -> f64 {
    if mean == 0.0 {
        return 0.0;
    }
    let mut total = 0.0;
    let mut i = cutoff + 1;
    let mut term = poisson_pmf(mean, i);
    loop {
        total += term;
        i += 1;
        term *= mean / f64::from(i);
        // terms decrease geometrically once i > mean
        if f64::from(i) > mean && (term == 0.0 || term < total * 1e-17) {
            break;
        }
        if i > cutoff + 100_000 {
            break;
        }
    }
    total
}

/// Smallest cutoff `≥ 1` whose Poisson tail for `mean` is below `tol`.
pub fn min_cutoff(mean: f64, tol: f64) -> u32 {
    let mut n = 1;
    while poisson_tail(mean, n) >= tol {
        n += 1;
    }
    n
}
