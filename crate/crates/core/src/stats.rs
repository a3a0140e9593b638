//! Distances to the standard normal law and the CLT harness.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::ensemble::{scaling_slope, SlopeFit};
use crate::error::{Error, Result};
use crate::numerics::{norm_cdf, norm_pdf, norm_quantile};

/// Sorted finite sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EmpiricalSample {
    values: Vec<f64>,
}

impl EmpiricalSample {
    pub fn new(mut values: Vec<f64>) -> Result<Self> {
        if values.is_empty() || values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Input("sample must be non-empty and finite".into()));
        }
        values.sort_by(f64::total_cmp);
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// `sup_x |F_R(x) - Φ(x)|`, attained at a sample point on one side of the jump.
pub fn kolmogorov_distance(s: &EmpiricalSample) -> f64 {
    let r = s.len() as f64;
    s.values
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let p = norm_cdf(x);
            ((i + 1) as f64 / r - p).max(p - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

// ∫_{lo}^{hi} (x - z) φ(z) dz
fn signed_piece(x: f64, lo: f64, hi: f64) -> f64 {
    x * (norm_cdf(hi) - norm_cdf(lo)) + norm_pdf(hi) - norm_pdf(lo)
}

/// `∫_0^1 |F_R^{-1}(u) - Φ^{-1}(u)| du`, integrated exactly on each order-statistic cell.
pub fn wasserstein1_distance(s: &EmpiricalSample) -> f64 {
    let r = s.len();
    let mut total = 0.0;
    for (i, &x) in s.values.iter().enumerate() {
        let lo = norm_quantile(i as f64 / r as f64);
        let hi = norm_quantile((i + 1) as f64 / r as f64);
        total += if x <= lo {
            -signed_piece(x, lo, hi)
        } else if x >= hi {
            signed_piece(x, lo, hi)
        } else {
            signed_piece(x, lo, x) - signed_piece(x, x, hi)
        };
    }
    total
}

/// Where the standardization variance comes from.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum VarianceSource {
    /// Sample variance of `√N·Y` at each `N`.
    MonteCarlo,
    /// Fixed limiting variance `σ²`.
    Limit(f64),
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltRow {
    pub n: usize,
    pub r: usize,
    pub d_k: f64,
    pub d_k_stderr: f64,
    pub d_w: f64,
    pub d_w_stderr: f64,
    pub sigma_used: f64,
    pub floor: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CltReport {
    pub rows: Vec<CltRow>,
    pub slope_d_k: Option<SlopeFit>,
    /// `d_K` is nonincreasing in `N` except where it has already dropped below `2/√R`.
    pub monotone: bool,
}

impl CltReport {
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash}\nN,R,d_K,stderr,d_W,stderr,sigma_used\n");
        for r in &self.rows {
            let _ = writeln!(s, "{},{},{:.6e},{:.3e},{:.6e},{:.3e},{:.6e}", r.n, r.r, r.d_k, r.d_k_stderr, r.d_w, r.d_w_stderr, r.sigma_used);
        }
        s
    }
}

/// Standardize `X = √N (Y - mean)/σ` for each `N` and measure its distance to `N(0,1)`.
pub fn clt_experiment(samples: &[(usize, Vec<f64>)], source: VarianceSource, seed: u64) -> Result<CltReport> {
    let mut rows = Vec::new();
    for (n, ys) in samples {
        let r = ys.len();
        if r < 2 {
            return Err(Error::InsufficientData { need: 1, got: r });
        }
        let mean = ys.iter().sum::<f64>() / r as f64;
        let sigma = match source {
            VarianceSource::MonteCarlo => (*n as f64 * ys.iter().map(|y| (y - mean).powi(2)).sum::<f64>() / (r - 1) as f64).sqrt(),
            VarianceSource::Limit(s2) => s2.max(0.0).sqrt(),
        };
        if !(sigma > 1e-12) {
            return Err(Error::DegenerateObservable(sigma));
        }
        let scale = (*n as f64).sqrt() / sigma;
        let xs: Vec<f64> = ys.iter().map(|y| (y - mean) * scale).collect();
        let s = EmpiricalSample::new(xs.clone())?;
        let (d_k, d_w) = (kolmogorov_distance(&s), wasserstein1_distance(&s));
        let (se_k, se_w) = bootstrap_stderr(&xs, seed ^ *n as u64);
        rows.push(CltRow { n: *n, r, d_k, d_k_stderr: se_k, d_w, d_w_stderr: se_w, sigma_used: sigma, floor: 1.0 / (r as f64).sqrt() });
    }
    rows.sort_by_key(|r| r.n);
    let monotone = rows.windows(2).all(|w| w[1].d_k <= w[0].d_k.max(2.0 * w[1].floor));
    let pts: Vec<(f64, f64, f64)> = rows.iter().map(|r| (r.n as f64, r.d_k, r.d_k_stderr)).collect();
    let slope_d_k = if pts.len() >= 3 { scaling_slope(&pts).ok() } else { None };
    Ok(CltReport { rows, slope_d_k, monotone })
}

fn bootstrap_stderr(xs: &[f64], seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let b = 40;
    let mut ks = Vec::with_capacity(b);
    let mut ws = Vec::with_capacity(b);
    for _ in 0..b {
        let boot: Vec<f64> = (0..xs.len()).map(|_| xs[rng.gen_range(0..xs.len())]).collect();
        let s = EmpiricalSample::new(boot).expect("finite");
        ks.push(kolmogorov_distance(&s));
        ws.push(wasserstein1_distance(&s));
    }
    (sd(&ks), sd(&ws))
}

fn sd(v: &[f64]) -> f64 {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    (v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn point_mass_at_zero() {
        let s = EmpiricalSample::new(vec![0.0; 200]).unwrap();
        assert!((kolmogorov_distance(&s) - 0.5).abs() < 1e-15);
        assert!((wasserstein1_distance(&s) - (2.0 / std::f64::consts::PI).sqrt()).abs() < 1e-12);
    }

    #[test]
    fn degenerate_observable_rejected() {
        let r = clt_experiment(&[(100, vec![0.3; 500])], VarianceSource::MonteCarlo, 1);
        assert!(matches!(r, Err(Error::DegenerateObservable(_))));
    }
}
