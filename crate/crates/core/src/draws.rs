//! Integer count draws by inversion of the CDF, one uniform per draw.
//!
//! The search starts at the mode, where the CDF is evaluated with the
//! regularized incomplete gamma/beta functions, and walks outward using the
//! pmf recurrence. Expected cost is O(standard deviation) per draw.

use rand::Rng;
use statrs::function::beta::beta_reg;
use statrs::function::factorial::ln_binomial;
use statrs::function::gamma::{gamma_ur, ln_gamma};

/// Smallest `k` with `cdf(k) >= u`, searching outward from `mode`.
///
/// `up(k)` is `pmf(k+1)/pmf(k)` and `down(k)` is `pmf(k-1)/pmf(k)`.
fn invert_from_mode(
    u: f64,
    mode: u64,
    pmf_mode: f64,
    cdf_mode: f64,
    upper: u64,
    up: impl Fn(u64) -> f64,
    down: impl Fn(u64) -> f64,
) -> u64 {
    let (mut k, mut p, mut cdf) = (mode, pmf_mode, cdf_mode);
    if u <= cdf {
        while k > 0 {
            let below = cdf - p;
            if u > below || p == 0.0 {
                return k;
            }
            cdf = below;
            p *= down(k);
            k -= 1;
        }
        0
    } else {
        while k < upper {
            p *= up(k);
            k += 1;
            cdf += p;
            if u <= cdf || p == 0.0 {
                return k;
            }
        }
        upper
    }
}

pub fn poisson<R: Rng + ?Sized>(rng: &mut R, mean: f64) -> u64 {
    assert!(mean.is_finite() && mean >= 0.0, "poisson mean must be finite and nonnegative");
    if mean == 0.0 {
        return 0;
    }
    let u: f64 = rng.random();
    let mode = mean.floor();
    let pmf = (-mean + mode * mean.ln() - ln_gamma(mode + 1.0)).exp();
    let cdf = gamma_ur(mode + 1.0, mean);
    invert_from_mode(
        u,
        mode as u64,
        pmf,
        cdf,
        u64::MAX,
        |k| mean / (k as f64 + 1.0),
        |k| k as f64 / mean,
    )
}

/// Keeps each of `n` events independently with probability `p`.
pub fn binomial<R: Rng + ?Sized>(rng: &mut R, n: u64, p: f64) -> u64 {
    assert!((0.0..=1.0).contains(&p), "binomial probability must lie in [0, 1]");
    if n == 0 || p == 0.0 {
        return 0;
    }
    if p == 1.0 {
        return n;
    }
    let u: f64 = rng.random();
    let nf = n as f64;
    let mode = (((nf + 1.0) * p).floor() as u64).min(n);
    let mf = mode as f64;
    let pmf = (ln_binomial(n, mode) + mf * p.ln() + (nf - mf) * (-p).ln_1p()).exp();
    let cdf = if mode == n {
        1.0
    } else {
        beta_reg(nf - mf, mf + 1.0, 1.0 - p)
    };
    let odds = p / (1.0 - p);
    invert_from_mode(
        u,
        mode,
        pmf,
        cdf,
        n,
        |k| (nf - k as f64) / (k as f64 + 1.0) * odds,
        |k| k as f64 / (nf - k as f64 + 1.0) / odds,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed::rng_for;

    fn moments(xs: &[u64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().map(|&x| x as f64).sum::<f64>() / n;
        let var = xs.iter().map(|&x| (x as f64 - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, var)
    }

    #[test]
    fn poisson_moments() {
        for &mean in &[0.3_f64, 4.0, 37.5, 2_000.0, 1.0e6] {
            let mut rng = rng_for(11, &[mean.to_bits()]);
            let xs: Vec<u64> = (0..20_000).map(|_| poisson(&mut rng, mean)).collect();
            let (m, v) = moments(&xs);
            let se = (mean / xs.len() as f64).sqrt();
            assert!((m - mean).abs() < 4.0 * se, "mean {m} vs {mean}");
            assert!((v / mean - 1.0).abs() < 0.05, "var {v} vs {mean}");
        }
    }

    #[test]
    fn poisson_matches_pmf_for_small_mean() {
        // frequencies against the pmf summed directly
        let mean: f64 = 2.5;
        let mut rng = rng_for(5, &[]);
        let n = 100_000;
        let mut counts = [0usize; 12];
        for _ in 0..n {
            let k = poisson(&mut rng, mean) as usize;
            counts[k.min(11)] += 1;
        }
        let mut pmf = (-mean).exp();
        for (k, &c) in counts.iter().enumerate().take(8) {
            let expected = pmf * n as f64;
            let sd = expected.sqrt();
            assert!((c as f64 - expected).abs() < 5.0 * sd, "k={k}: {c} vs {expected}");
            pmf *= mean / (k as f64 + 1.0);
        }
    }

    #[test]
    fn binomial_moments_and_edges() {
        let mut rng = rng_for(2, &[]);
        assert_eq!(binomial(&mut rng, 0, 0.3), 0);
        assert_eq!(binomial(&mut rng, 17, 0.0), 0);
        assert_eq!(binomial(&mut rng, 17, 1.0), 17);
        for &(n, p) in &[(5_u64, 0.5_f64), (40, 0.02), (1_000, 0.9), (1_000_000, 0.01), (3, 0.999)] {
            let mut rng = rng_for(9, &[n, p.to_bits()]);
            let xs: Vec<u64> = (0..20_000).map(|_| binomial(&mut rng, n, p)).collect();
            assert!(xs.iter().all(|&x| x <= n));
            let (m, v) = moments(&xs);
            let mean = n as f64 * p;
            let var = mean * (1.0 - p);
            assert!((m - mean).abs() < 4.0 * (var / xs.len() as f64).sqrt() + 1e-9, "n={n} p={p} mean {m}");
            // relative sd of a sample variance shrinks with the count of minority outcomes
            let minority = xs.len() as f64 * (n as f64 * p.min(1.0 - p)).min(1.0);
            let tol = 0.05 + 3.0 / minority.sqrt();
            assert!((v / var - 1.0).abs() < tol, "n={n} p={p} var {v} vs {var}");
        }
    }

    #[test]
    fn binomial_matches_pmf() {
        let (n, p) = (6_u64, 0.3_f64);
        let mut rng = rng_for(21, &[]);
        let draws = 100_000;
        let mut counts = [0usize; 7];
        for _ in 0..draws {
            counts[binomial(&mut rng, n, p) as usize] += 1;
        }
        for (k, &c) in counts.iter().enumerate() {
            let choose = (0..k).fold(1.0, |acc, i| acc * (n - i as u64) as f64 / (i + 1) as f64);
            let expected = choose * p.powi(k as i32) * (1.0 - p).powi((n as usize - k) as i32) * draws as f64;
            assert!((c as f64 - expected).abs() < 5.0 * expected.sqrt() + 5.0, "k={k}");
        }
    }
}
