//! Monte Carlo over iid initial data: replicas, cumulants, correlation pairings,
//! Glauber-derivative norms and log-log scaling fits.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dynamics::{integrate_with, replace_particles, ParticleState, SimConfig};
use crate::error::{Error, Result};
use crate::model::{InitialDensity, Observable};
use crate::numerics::{derive_seed, jackknife_sums};
use crate::partitions::{
    centred_features, connected_mixed_pairing, correlation_pairing_from_marginal_pairings, enumerate_partitions,
    k_n_from_sizes, k_stat_from_sums, k_statistics, KStat,
};

/// Default cap on particle·mode·step work per plan.
pub const DEFAULT_BUDGET: f64 = 5e12;

/// Particle counts, replica count, seeds and the model to simulate.
#[derive(Clone, Debug)]
pub struct ReplicaPlan {
    pub ns: Vec<usize>,
    pub replicas: usize,
    pub master_seed: u64,
    pub sim: SimConfig,
    pub density: InitialDensity,
    pub observables: Vec<Observable>,
    pub sample_times: Vec<f64>,
    pub budget: f64,
}

impl ReplicaPlan {
    /// Work estimate `Σ_N R · steps · (N² or N·modes)`.
    pub fn cost(&self) -> f64 {
        let steps = self.sim.total_steps().max(1) as f64;
        let modes = self.sim.potential.half_modes().len().max(1) as f64;
        self.ns
            .iter()
            .map(|&n| {
                let per_step = match self.sim.force_method {
                    crate::dynamics::ForceMethod::Direct => (n * n) as f64,
                    crate::dynamics::ForceMethod::FourierAccelerated => n as f64 * modes,
                };
                self.replicas as f64 * steps * per_step
            })
            .sum()
    }

    pub fn check_budget(&self) -> Result<()> {
        let c = self.cost();
        if c > self.budget {
            return Err(Error::Budget { estimated: c, cap: self.budget });
        }
        Ok(())
    }
}

/// Seed of replica `r` at particle count `n`.
pub fn replica_seed(master: u64, n: usize, r: usize) -> u64 {
    derive_seed(master, n as u64, r as u64, 0)
}

/// Per-replica power sums `Σ_j φ(z_j)^p`, `p = 1..3`, for every (time, observable).
#[derive(Clone, Debug, PartialEq)]
pub struct SampleMatrix {
    pub n: usize,
    pub times: Vec<f64>,
    pub labels: Vec<String>,
    pub seeds: Vec<u64>,
    data: Vec<f64>,
}

impl SampleMatrix {
    /// Build from raw power sums laid out `[replica][time][observable][p]`.
    pub fn from_power_sums(n: usize, times: Vec<f64>, labels: Vec<String>, seeds: Vec<u64>, data: Vec<f64>) -> Result<Self> {
        let width = times.len() * labels.len() * 3;
        if width == 0 || data.len() != width * seeds.len() {
            return Err(Error::Input("power-sum table does not match its axes".into()));
        }
        if data.iter().any(|x| !x.is_finite()) {
            return Err(Error::Input("non-finite entry in sample matrix".into()));
        }
        Ok(Self { n, times, labels, seeds, data })
    }

    pub fn replicas(&self) -> usize {
        self.seeds.len()
    }

    fn idx(&self, r: usize, t: usize, o: usize) -> usize {
        ((r * self.times.len() + t) * self.labels.len() + o) * 3
    }

    pub fn power_sums(&self, r: usize, t: usize, o: usize) -> [f64; 3] {
        let i = self.idx(r, t, o);
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// `∫φ dμ_N` for replica `r`.
    pub fn value(&self, r: usize, t: usize, o: usize) -> f64 {
        self.data[self.idx(r, t, o)] / self.n as f64
    }

    pub fn column(&self, t: usize, o: usize) -> Vec<f64> {
        (0..self.replicas()).map(|r| self.value(r, t, o)).collect()
    }

    /// First `r` replicas only.
    pub fn truncated(&self, r: usize) -> Self {
        let r = r.min(self.replicas());
        let w = self.times.len() * self.labels.len() * 3;
        Self { n: self.n, times: self.times.clone(), labels: self.labels.clone(), seeds: self.seeds[..r].to_vec(), data: self.data[..r * w].to_vec() }
    }

    /// `replica,time,observable,value` table preceded by a `# config_hash` line.
    pub fn to_csv(&self, config_hash: &str) -> String {
        let mut s = format!("# config_hash={config_hash} N={}\nreplica,time,observable,value\n", self.n);
        for r in 0..self.replicas() {
            for (t, time) in self.times.iter().enumerate() {
                for (o, lab) in self.labels.iter().enumerate() {
                    let _ = writeln!(s, "{r},{time},{lab},{:.17e}", self.value(r, t, o));
                }
            }
        }
        s
    }
}

/// Power sums of every observable at every requested step along one trajectory.
pub fn trajectory_power_sums(state: &mut ParticleState, sim: &SimConfig, observables: &[Observable], steps: &[u64]) -> Vec<f64> {
    let no = observables.len();
    let mut out = vec![0.0; steps.len() * no * 3];
    integrate_with(state, sim, steps, |i, s| {
        for (o, phi) in observables.iter().enumerate() {
            let mut p = [0.0; 3];
            for j in 0..s.n() {
                let y = phi.eval(s.xj(j), s.vj(j));
                p[0] += y;
                p[1] += y * y;
                p[2] += y * y * y;
            }
            out[(i * no + o) * 3..(i * no + o) * 3 + 3].copy_from_slice(&p);
        }
    });
    out
}

/// Apply `f(replica, initial state)` to `replicas` iid initial states in parallel; output order
/// is the replica order, independent of the thread count.
pub fn run_replicas_map<T, F>(density: &InitialDensity, n: usize, replicas: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize, ParticleState) -> T + Sync,
{
    (0..replicas)
        .into_par_iter()
        .map(|r| f(r, ParticleState::sample(density, n, replica_seed(master_seed, n, r))))
        .collect()
}

/// One [`SampleMatrix`] per particle count in the plan.
pub fn run_replicas(plan: &ReplicaPlan) -> Result<Vec<SampleMatrix>> {
    plan.check_budget()?;
    let steps = plan.sim.sample_steps(&plan.sample_times)?;
    let labels: Vec<String> = plan.observables.iter().map(|o| o.label.clone()).collect();
    plan.ns
        .iter()
        .map(|&n| {
            if n == 0 {
                return Err(Error::Input("particle count must be positive".into()));
            }
            let rows = run_replicas_map(&plan.density, n, plan.replicas, plan.master_seed, |_, mut st| {
                trajectory_power_sums(&mut st, &plan.sim, &plan.observables, &steps)
            });
            let seeds = (0..plan.replicas).map(|r| replica_seed(plan.master_seed, n, r)).collect();
            SampleMatrix::from_power_sums(n, plan.sample_times.clone(), labels.clone(), seeds, rows.concat())
        })
        .collect()
}

/// k-statistic of a replica column, requiring `R > 10 m`.
pub fn estimate_cumulant(samples: &[f64], m: usize) -> Result<KStat> {
    if samples.len() <= 10 * m {
        return Err(Error::InsufficientData { need: 10 * m, got: samples.len() });
    }
    k_statistics(samples, m)
}

/// Third cumulant with a control variate: `k3(Y_t) - k3(Y_0) + κ3_0`, jackknifed jointly.
pub fn k3_with_control(yt: &[f64], y0: &[f64], kappa3_at_zero: f64) -> Result<KStat> {
    if yt.len() != y0.len() || yt.len() <= 30 {
        return Err(Error::InsufficientData { need: 30, got: yt.len().min(y0.len()) });
    }
    let (ft, ct) = centred_features(yt);
    let (f0, c0) = centred_features(y0);
    let mut feat = Vec::with_capacity(8 * yt.len());
    for i in 0..yt.len() {
        feat.extend_from_slice(&ft[4 * i..4 * i + 4]);
        feat.extend_from_slice(&f0[4 * i..4 * i + 4]);
    }
    let (value, stderr) = jackknife_sums(&feat, 8, |s, n| k_stat_from_sums(&s[..4], n, 3, ct) - k_stat_from_sums(&s[4..], n, 3, c0) + kappa3_at_zero);
    Ok(KStat { value, stderr })
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub stderr: f64,
}

/// Both estimates of `∫φ^{⊗m}G_N^m` and their jackknifed difference.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationEstimate {
    pub m: usize,
    pub route_a: Estimate,
    pub route_b: Estimate,
    pub difference: Estimate,
}

// per-replica features: centred powers of Y (4), then u2, u3, u11, u21, u111
const FEAT: usize = 9;

fn correlation_features(sm: &SampleMatrix, t: usize, o: usize) -> Vec<f64> {
    let n = sm.n as f64;
    let ys = sm.column(t, o);
    let c = ys.iter().sum::<f64>() / ys.len() as f64;
    let mut out = Vec::with_capacity(FEAT * ys.len());
    for r in 0..sm.replicas() {
        let [q1, q2, q3] = sm.power_sums(r, t, o);
        // power sums of φ - c
        let p1 = q1 - n * c;
        let p2 = q2 - 2.0 * c * q1 + n * c * c;
        let p3 = q3 - 3.0 * c * q2 + 3.0 * c * c * q1 - n * c * c * c;
        let e = p1 / n;
        let u2 = p2 / n;
        let u3 = p3 / n;
        let u11 = if sm.n >= 2 { (p1 * p1 - p2) / (n * (n - 1.0)) } else { 0.0 };
        let u21 = if sm.n >= 2 { (p2 * p1 - p3) / (n * (n - 1.0)) } else { 0.0 };
        let u111 = if sm.n >= 3 { (p1 * p1 * p1 - 3.0 * p1 * p2 + 2.0 * p3) / (n * (n - 1.0) * (n - 2.0)) } else { 0.0 };
        out.extend_from_slice(&[e, e * e, e * e * e, e * e * e * e, u2, u3, u11, u21, u111]);
    }
    out
}

fn marginal_from_means(mean: &[f64], q: &[u32]) -> f64 {
    match q {
        [1] => mean[0],
        [2] => mean[4],
        [3] => mean[5],
        [1, 1] => mean[6],
        [2, 1] => mean[7],
        [1, 1, 1] => mean[8],
        _ => f64::NAN,
    }
}

fn route_a(mean: &[f64], m: usize) -> f64 {
    let mut marg = BTreeMap::new();
    marg.insert(1, mean[0]);
    marg.insert(2, mean[6]);
    marg.insert(3, mean[8]);
    correlation_pairing_from_marginal_pairings(&marg, m).unwrap_or(f64::NAN)
}

fn route_b(sums: &[f64], r: usize, mean: &[f64], m: usize, n: usize) -> f64 {
    let kappa = k_stat_from_sums(&sums[..4], r, m, 0.0);
    let g = |q: &[u32]| connected_mixed_pairing(q, &|p: &[u32]| marginal_from_means(mean, p));
    let mut rest = 0.0;
    let nf = n as f64;
    for pi in enumerate_partitions(m).expect("m ≤ 3") {
        let powers: Vec<u32> = pi.block_sizes().iter().map(|&s| s as u32).collect();
        let scale = nf.powi(pi.len() as i32 - m as i32);
        for rho in enumerate_partitions(pi.len()).expect("small") {
            let top = pi.len() == m && rho.len() == 1;
            if top {
                continue;
            }
            let k = k_n_from_sizes(&rho.block_sizes(), n);
            let prod: f64 = rho
                .blocks()
                .iter()
                .map(|d| {
                    let mut q: Vec<u32> = d.iter().map(|&b| powers[b]).collect();
                    q.sort_unstable_by(|a, b| b.cmp(a));
                    g(&q)
                })
                .product();
            rest += scale * k * prod;
        }
    }
    let k_top: f64 = (1..m).map(|i| 1.0 - i as f64 / nf).product();
    (kappa - rest) / k_top
}

/// Two independent estimates of `∫φ^{⊗m}G_N^m`, `m ∈ {2, 3}`: U-statistic marginals combined by
/// the cluster inversion, and replica cumulants solved through the cumulant/correlation identity.
pub fn estimate_correlation_pairing(sm: &SampleMatrix, t: usize, o: usize, m: usize) -> Result<CorrelationEstimate> {
    if !(2..=3).contains(&m) {
        return Err(Error::Input(format!("correlation order {m} outside 2..=3")));
    }
    if sm.replicas() <= 10 * m {
        return Err(Error::InsufficientData { need: 10 * m, got: sm.replicas() });
    }
    if sm.n < m {
        return Err(Error::Input(format!("N = {} too small for order {m}", sm.n)));
    }
    let feat = correlation_features(sm, t, o);
    let n = sm.n;
    let est = |which: u8| {
        jackknife_sums(&feat, FEAT, |s, r| {
            let mean: Vec<f64> = s.iter().map(|x| x / r as f64).collect();
            match which {
                0 => route_a(&mean, m),
                1 => route_b(s, r, &mean, m, n),
                _ => route_a(&mean, m) - route_b(s, r, &mean, m, n),
            }
        })
    };
    let (a, sa) = est(0);
    let (b, sb) = est(1);
    let (d, sd) = est(2);
    Ok(CorrelationEstimate {
        m,
        route_a: Estimate { value: a, stderr: sa },
        route_b: Estimate { value: b, stderr: sb },
        difference: Estimate { value: d, stderr: sd },
    })
}

/// Monte Carlo estimate of `‖D_J° Y‖_{L^p}` with `Y = ∫φ dμ_N^t`.
#[derive(Clone, Debug, PartialEq)]
pub struct GlauberEstimate {
    pub m: usize,
    pub p: f64,
    /// Largest per-tuple norm.
    pub norm: f64,
    pub stderr: f64,
    /// Norm pooled over all tuples (`p`-th power averaged).
    pub pooled: f64,
    pub pooled_stderr: f64,
    /// Mean `p`-th power pooled over tuples, before the root.
    pub pooled_power: Estimate,
    /// Estimated upward bias in the `p`-th power removed from the `p = 2` estimate (or left in otherwise).
    pub inner_bias: f64,
    pub resamples: usize,
    pub tuples: Vec<Vec<usize>>,
    pub per_tuple: Vec<Estimate>,
}

/// Settings of the nested resampling estimator.
#[derive(Clone, Debug)]
pub struct GlauberPlan {
    pub n: usize,
    pub outer: usize,
    pub m: usize,
    pub p: f64,
    pub resamples: usize,
    pub tuples: usize,
    pub time: f64,
    pub master_seed: u64,
    pub budget: f64,
}

/// Deterministic index tuples spread over `0..n`.
pub fn glauber_tuples(n: usize, m: usize, count: usize) -> Vec<Vec<usize>> {
    (0..count)
        .map(|i| {
            let base = (i * n) / count;
            (0..m).map(|k| (base + k * (n / (2 * m.max(1))).max(1)) % n).collect()
        })
        .collect()
}

/// Inclusion–exclusion over subsets `S ⊆ J` of `M`-sample averages of resampled reruns.
pub fn estimate_glauber_norm(
    density: &InitialDensity,
    sim: &SimConfig,
    phi: &Observable,
    plan: &GlauberPlan,
) -> Result<GlauberEstimate> {
    if !(1..=2).contains(&plan.m) {
        return Err(Error::Input(format!("Glauber order {} outside 1..=2", plan.m)));
    }
    if plan.resamples < 8 {
        return Err(Error::Input(format!("need at least 8 resamples, got {}", plan.resamples)));
    }
    if plan.n < plan.m + 1 || plan.outer < 4 || !(plan.p >= 1.0) {
        return Err(Error::Input("invalid Glauber plan".into()));
    }
    let subsets = (1usize << plan.m) - 1;
    let runs = plan.outer as f64 * (plan.tuples * subsets * plan.resamples + 1) as f64;
    let cost = runs * plan.n as f64 * sim.sample_steps(&[plan.time])?[0].max(1) as f64;
    if cost > plan.budget {
        return Err(Error::Budget { estimated: cost, cap: plan.budget });
    }
    let step = sim.sample_steps(&[plan.time])?;
    let tuples = glauber_tuples(plan.n, plan.m, plan.tuples);
    let d = density.dim();
    let y_of = |st: &ParticleState| {
        let mut s = st.clone();
        let mut y = 0.0;
        integrate_with(&mut s, sim, &step, |_, s| y = s.empirical_mean(phi));
        y
    };
    // per outer replica and tuple: (D̂, Σ_S s²_S / M)
    let rows: Vec<Vec<(f64, f64)>> = run_replicas_map(density, plan.n, plan.outer, plan.master_seed, |r, st0| {
        let y0 = y_of(&st0);
        tuples
            .iter()
            .enumerate()
            .map(|(ti, tuple)| {
                let mut dhat = y0;
                let mut noise = 0.0;
                for mask in 1..=subsets {
                    let idx: Vec<usize> = (0..plan.m).filter(|b| mask >> b & 1 == 1).map(|b| tuple[b]).collect();
                    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(plan.master_seed ^ 0xD0, r as u64, ti as u64, mask as u64));
                    let ys: Vec<f64> = (0..plan.resamples)
                        .map(|_| {
                            let repl: Vec<Vec<f64>> = idx
                                .iter()
                                .map(|_| {
                                    let mut z = vec![0.0; 2 * d];
                                    let (x, v) = z.split_at_mut(d);
                                    density.sample(&mut rng, x, v);
                                    z
                                })
                                .collect();
                            y_of(&replace_particles(&st0, &idx, &repl).expect("valid indices"))
                        })
                        .collect();
                    let mean = ys.iter().sum::<f64>() / ys.len() as f64;
                    let var = ys.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / (ys.len() - 1) as f64;
                    let sign = if idx.len() % 2 == 1 { -1.0 } else { 1.0 };
                    dhat += sign * mean;
                    noise += var / ys.len() as f64;
                }
                (dhat, noise)
            })
            .collect()
    });
    let r = plan.outer as f64;
    let debias = (plan.p - 2.0).abs() < 1e-12;
    let mut per_tuple = Vec::new();
    let mut pooled_rows: Vec<f64> = vec![0.0; plan.outer];
    let mut bias_total = 0.0;
    for ti in 0..tuples.len() {
        let vals: Vec<f64> = rows
            .iter()
            .map(|row| {
                let (dh, noise) = row[ti];
                if debias {
                    dh * dh - noise
                } else {
                    dh.abs().powf(plan.p)
                }
            })
            .collect();
        bias_total += rows.iter().map(|row| row[ti].1).sum::<f64>() / r;
        for (acc, v) in pooled_rows.iter_mut().zip(&vals) {
            *acc += v / tuples.len() as f64;
        }
        per_tuple.push(power_mean_to_norm(&vals, plan.p));
    }
    let pooled = power_mean_to_norm(&pooled_rows, plan.p);
    let pooled_power = mean_estimate(&pooled_rows);
    let best = per_tuple.iter().copied().fold(Estimate { value: -1.0, stderr: 0.0 }, |a, b| if b.value > a.value { b } else { a });
    Ok(GlauberEstimate {
        m: plan.m,
        p: plan.p,
        norm: best.value,
        stderr: best.stderr,
        pooled: pooled.value,
        pooled_stderr: pooled.stderr,
        pooled_power,
        inner_bias: bias_total / tuples.len() as f64,
        resamples: plan.resamples,
        tuples,
        per_tuple,
    })
}

fn mean_estimate(vals: &[f64]) -> Estimate {
    let r = vals.len() as f64;
    let mean = vals.iter().sum::<f64>() / r;
    let var = vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (r - 1.0);
    Estimate { value: mean, stderr: (var / r).sqrt() }
}

fn power_mean_to_norm(vals: &[f64], p: f64) -> Estimate {
    let Estimate { value: mean, stderr: se } = mean_estimate(vals);
    let norm = mean.max(0.0).powf(1.0 / p);
    let stderr = if norm > 0.0 { se / (p * norm.powf(p - 1.0)) } else { se.powf(1.0 / p) };
    Estimate { value: norm, stderr }
}

/// Weighted log-log regression result.
#[derive(Clone, Debug, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    pub intercept: f64,
    pub noise_dominated: bool,
    pub points: usize,
}

/// Weighted least-squares slope of `log|value|` against `log N`, weights `(value/stderr)²`.
pub fn scaling_slope(points: &[(f64, f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 3 {
        return Err(Error::InsufficientData { need: 2, got: points.len() });
    }
    let same_sign = points.iter().all(|p| p.1 > 0.0) || points.iter().all(|p| p.1 < 0.0);
    let resolved = points.iter().all(|p| p.1.abs() > 3.0 * p.2);
    if !(same_sign || resolved) || points.iter().any(|p| p.1 == 0.0) {
        return Ok(SlopeFit { slope: f64::NAN, stderr: f64::NAN, intercept: f64::NAN, noise_dominated: true, points: points.len() });
    }
    let mut sw = 0.0;
    let mut sx = 0.0;
    let mut sy = 0.0;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.abs().ln()).collect();
    let ws: Vec<f64> = points
        .iter()
        .map(|p| {
            let rel = p.2 / p.1.abs();
            if rel > 0.0 {
                1.0 / (rel * rel)
            } else {
                1.0
            }
        })
        .collect();
    for i in 0..points.len() {
        sw += ws[i];
        sx += ws[i] * xs[i];
        sy += ws[i] * ys[i];
    }
    let (mx, my) = (sx / sw, sy / sw);
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    for i in 0..points.len() {
        sxx += ws[i] * (xs[i] - mx) * (xs[i] - mx);
        sxy += ws[i] * (xs[i] - mx) * (ys[i] - my);
    }
    let slope = sxy / sxx;
    Ok(SlopeFit { slope, stderr: (1.0 / sxx).sqrt(), intercept: my - slope * mx, noise_dominated: false, points: points.len() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_guard_paths() {
        let noisy = [(100.0, 1e-4, 1e-3), (200.0, -2e-4, 1e-3), (400.0, 1e-5, 1e-3)];
        assert!(scaling_slope(&noisy).unwrap().noise_dominated);
        assert!(scaling_slope(&noisy[..2]).is_err());
    }

    #[test]
    fn tuples_distinct_within() {
        for t in glauber_tuples(128, 2, 8) {
            assert_ne!(t[0], t[1]);
        }
    }
}
