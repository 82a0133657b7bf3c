//! Small numerical building blocks shared by the models.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use statrs::distribution::{ContinuousCDF, Normal};
use statrs::function::{factorial, gamma};

/// `ln(k!)`.
pub fn ln_factorial(k: u32) -> f64 {
    factorial::ln_factorial(u64::from(k))
}

/// Poisson log-pmf; a zero rate puts all mass on zero.
pub fn poisson_log_pmf(k: u32, rate: f64) -> f64 {
    if rate == 0.0 {
        return if k == 0 { 0.0 } else { f64::NEG_INFINITY };
    }
    f64::from(k) * rate.ln() - rate - ln_factorial(k)
}

pub fn normal_log_pdf(x: f64, mean: f64, sd: f64) -> f64 {
    let z = (x - mean) / sd;
    -0.5 * (2.0 * PI * sd * sd).ln() - 0.5 * z * z
}

/// Inverse-gamma log-density with the given shape and scale, evaluated at `x > 0`.
pub fn inv_gamma_log_pdf(x: f64, shape: f64, scale: f64) -> f64 {
    if x <= 0.0 {
        return f64::NEG_INFINITY;
    }
    shape * scale.ln() - gamma::ln_gamma(shape) - (shape + 1.0) * x.ln() - scale / x
}

/// Standard normal quantile function.
pub fn std_normal_quantile(p: f64) -> f64 {
    Normal::standard().inverse_cdf(p)
}

pub fn std_normal_cdf(x: f64) -> f64 {
    Normal::standard().cdf(x)
}

/// `P(N >= k)` for `N ~ Pois(rate)`.
pub fn poisson_upper_tail(rate: f64, k: u32) -> f64 {
    if k == 0 {
        return 1.0;
    }
    if rate == 0.0 {
        return 0.0;
    }
    if rate.is_infinite() {
        return 1.0;
    }
    // Lower tail summed term by term; fine for the small k used here.
    let mut term = (-rate).exp();
    let mut lower = term;
    for j in 1..k {
        term *= rate / f64::from(j);
        lower += term;
    }
    (1.0 - lower).max(0.0)
}

/// Draws from `Pois(rate)`, returning 0 for a zero rate.
pub fn sample_poisson<R: Rng + ?Sized>(rng: &mut R, rate: f64) -> u32 {
    if rate <= 0.0 {
        return 0;
    }
    let draw: f64 = Poisson::new(rate)
        .expect("finite positive Poisson rate")
        .sample(rng);
    draw as u32
}

/// Quantile of already-sorted data by linear interpolation between order
/// statistics (the "type 7" convention).
pub fn quantile_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty(), "quantile of empty data");
    let h = (sorted.len() - 1) as f64 * p;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Ranks starting at 1, ties receiving the average of the ranks they span.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

pub fn pearson(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut sab, mut saa, mut sbb) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        sab += (x - ma) * (y - mb);
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
    }
    sab / (saa * sbb).sqrt()
}

/// Spearman rank correlation (Pearson correlation of average ranks).
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    pearson(&average_ranks(a), &average_ranks(b))
}

/// Mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (n - 1.0);
    (mean, var)
}

/// An independent random stream for task `stream` under a run seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
