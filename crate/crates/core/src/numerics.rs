//! Small quadrature and special-function helpers shared across modules.

use statrs::function::erf;

/// Composite Simpson rule on `[a, b]` with `n` (rounded up to even) intervals.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, n: usize) -> f64 {
    let n = n.max(2) + n % 2;
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + i as f64 * h);
    }
    s * h / 3.0
}

/// Trapezoid weights on a uniform grid with spacing `h` for a function vanishing at both ends.
pub fn trapz(values: &[f64], h: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    h * (inner + 0.5 * (values[0] + values[values.len() - 1]))
}

/// Standard normal CDF.
pub fn norm_cdf(x: f64) -> f64 {
    0.5 * libm::erfc(-x / std::f64::consts::SQRT_2)
}

/// Standard normal density.
pub fn norm_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

/// Standard normal quantile.
pub fn norm_quantile(p: f64) -> f64 {
    if p <= 0.0 {
        return f64::NEG_INFINITY;
    }
    if p >= 1.0 {
        return f64::INFINITY;
    }
    let x = -std::f64::consts::SQRT_2 * erf::erfc_inv(2.0 * p);
    // erfc_inv is good to ~1e-10 relative
    x - (norm_cdf(x) - p) / norm_pdf(x)
}

const ROUND_MAGIC: f64 = 6_755_399_441_055_744.0;

/// `(sin 2πt, cos 2πt)` by quadrant reduction and Taylor polynomials; valid for `|t| < 2^49`.
#[inline]
pub fn sin_cos_turns(t: f64) -> (f64, f64) {
    let y = 4.0 * t;
    let shifted = y + ROUND_MAGIC;
    let q = shifted - ROUND_MAGIC;
    let quadrant = shifted.to_bits() & 3;
    let r = (y - q) * std::f64::consts::FRAC_PI_2;
    let r2 = r * r;
    let s = r * (1.0
        + r2 * (-1.0 / 6.0
            + r2 * (1.0 / 120.0
                + r2 * (-1.0 / 5040.0
                    + r2 * (1.0 / 362_880.0
                        + r2 * (-1.0 / 39_916_800.0 + r2 * (1.0 / 6_227_020_800.0 + r2 * (-1.0 / 1_307_674_368_000.0))))))));
    let c = 1.0
        + r2 * (-0.5
            + r2 * (1.0 / 24.0
                + r2 * (-1.0 / 720.0
                    + r2 * (1.0 / 40_320.0
                        + r2 * (-1.0 / 3_628_800.0 + r2 * (1.0 / 479_001_600.0 + r2 * (-1.0 / 87_178_291_200.0)))))));
    match quadrant {
        0 => (s, c),
        1 => (c, -s),
        2 => (-s, -c),
        _ => (-c, s),
    }
}

/// Four-point Lagrange interpolation on a uniform grid `x0 + i·h`, zero outside the samples.
pub fn cubic_interp<T>(values: &[T], x0: f64, h: f64, x: f64) -> T
where
    T: Copy + Default + std::ops::Add<Output = T> + std::ops::Mul<f64, Output = T>,
{
    let s = (x - x0) / h;
    let i = s.floor();
    let t = s - i;
    let i = i as i64;
    let at = |j: i64| if j < 0 || j >= values.len() as i64 { T::default() } else { values[j as usize] };
    at(i - 1) * (-t * (t - 1.0) * (t - 2.0) / 6.0)
        + at(i) * ((t + 1.0) * (t - 1.0) * (t - 2.0) / 2.0)
        + at(i + 1) * (-(t + 1.0) * t * (t - 2.0) / 2.0)
        + at(i + 2) * ((t + 1.0) * t * (t - 1.0) / 6.0)
}

/// Reduce `x` into `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let mut f = (x + ROUND_MAGIC) - ROUND_MAGIC;
    if f > x {
        f -= 1.0;
    }
    let r = x - f;
    if r >= 1.0 {
        r - 1.0
    } else {
        r
    }
}

/// Uniform grid `lo + (i + offset) h`, `i = 0..n`.
pub fn uniform_grid(lo: f64, h: f64, n: usize, offset: f64) -> Vec<f64> {
    (0..n).map(|i| lo + (i as f64 + offset) * h).collect()
}

/// Deterministic 64-bit mixer used to derive stream seeds.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for stream `(a, b, c)` under `master`; distinct triples give distinct chains.
pub fn derive_seed(master: u64, a: u64, b: u64, c: u64) -> u64 {
    let mut s = splitmix64(master);
    for w in [a, b, c] {
        s = splitmix64(s ^ w);
    }
    s
}

/// Delete-one jackknife for estimators that are functions of per-sample feature sums.
///
/// `data` holds `width` features per sample, row-major; `h(sums, n)` maps the feature
/// sums over `n` samples to the estimate. Returns `(estimate, stderr)`.
pub fn jackknife_sums<H: Fn(&[f64], usize) -> f64>(data: &[f64], width: usize, h: H) -> (f64, f64) {
    let n = data.len() / width;
    let mut total = vec![0.0; width];
    for row in data.chunks_exact(width) {
        for (t, x) in total.iter_mut().zip(row) {
            *t += x;
        }
    }
    let full = h(&total, n);
    if n < 2 {
        return (full, f64::NAN);
    }
    let mut loo = vec![0.0; width];
    let mut thetas = Vec::with_capacity(n);
    for row in data.chunks_exact(width) {
        for i in 0..width {
            loo[i] = total[i] - row[i];
        }
        thetas.push(h(&loo, n - 1));
    }
    let mean = thetas.iter().sum::<f64>() / n as f64;
    let ss: f64 = thetas.iter().map(|t| (t - mean) * (t - mean)).sum();
    (full, ((n - 1) as f64 / n as f64 * ss).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fast_sin_cos_matches_libm() {
        for i in -4000..4000 {
            let t = i as f64 * 0.001_37 + 0.000_3;
            let (s, c) = sin_cos_turns(t);
            let (s0, c0) = (std::f64::consts::TAU * t).sin_cos();
            assert!((s - s0).abs() < 1e-14 && (c - c0).abs() < 1e-14, "{t}");
        }
    }

    #[test]
    fn cubic_interp_reproduces_cubics() {
        let p = |x: f64| 1.0 - 2.0 * x + 0.5 * x * x * x;
        let vals: Vec<f64> = (0..20).map(|i| p(i as f64 * 0.1)).collect();
        for &x in &[0.13, 0.55, 1.01, 1.62] {
            assert!((cubic_interp(&vals, 0.0, 0.1, x) - p(x)).abs() < 1e-12);
        }
    }

    #[test]
    fn wrap_unit_range() {
        for &x in &[0.0, 1.0, -1e-18, 0.999_999_999_999_999_9, -3.25, 7.5, 2.0 - 1e-16] {
            let r = wrap_unit(x);
            assert!((0.0..1.0).contains(&r), "{x} -> {r}");
        }
        assert_eq!(wrap_unit(1.25), 0.25);
        assert_eq!(wrap_unit(-0.25), 0.75);
    }

    #[test]
    fn simpson_exact_on_cubics() {
        let v = simpson(|x| x * x * x - 2.0 * x + 1.0, -1.0, 2.0, 4);
        assert!((v - (15.0 / 4.0 - 3.0 + 3.0)).abs() < 1e-13);
    }

    #[test]
    fn normal_cdf_quantile_roundtrip() {
        for &p in &[1e-6, 0.01, 0.3, 0.5, 0.77, 0.999] {
            assert!((norm_cdf(norm_quantile(p)) - p).abs() < 1e-12);
        }
        assert!((norm_cdf(1.959963984540054) - 0.975).abs() < 1e-12);
    }

    #[test]
    fn jackknife_of_mean_is_standard_error() {
        let xs: Vec<f64> = (0..50).map(|i| ((i * 37) % 11) as f64).collect();
        let (m, se) = jackknife_sums(&xs, 1, |s, n| s[0] / n as f64);
        let mean = xs.iter().sum::<f64>() / 50.0;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 49.0;
        assert!((m - mean).abs() < 1e-12);
        assert!((se - (var / 50.0).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn derived_seeds_distinct() {
        let mut seen = std::collections::HashSet::new();
        for n in 0..8 {
            for r in 0..500 {
                assert!(seen.insert(derive_seed(7, n, r, 0)));
            }
        }
    }
}
