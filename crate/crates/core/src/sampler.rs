//! Exact sampling of squared Bessel bridges from 0 to 0 on `[0, 1]` and Monte
//! Carlo estimation of path functionals.
//!
//! Given `X_s = x` and the pin `X_1 = 0`, the squared bridge at `t > s`
//! (`τ = t - s`) is a Poisson mixture of Gamma laws:
//! `N ~ Poisson(x (1-t) / (2τ(1-s)))`, `X_t ~ Gamma(N + δ/2, rate (1-s)/(2τ(1-t)))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::laws::ExpFunctional;
use crate::num::mean_and_standard_error;
use crate::stats;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PathKind {
    Squared,
    Bessel,
}

/// A bridge sampled on `0 = t_0 < t_1 < ... < t_n = 1`, pinned at 0 at both ends.
#[derive(Clone, Debug, PartialEq)]
pub struct BridgePath {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub kind: PathKind,
}

impl BridgePath {
    /// Value at grid time `t` (exact match required).
    pub fn value_at(&self, t: f64) -> Option<f64> {
        self.times.iter().position(|&s| s == t).map(|i| self.values[i])
    }

    fn squared_to_bessel(mut self) -> Self {
        for v in &mut self.values {
            *v = v.sqrt();
        }
        self.kind = PathKind::Bessel;
        self
    }
}

/// Reproducible random stream identified by `(seed, stream id)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RngStream {
    pub seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(seed: u64, stream: u64) -> Self {
        Self { seed, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// Interior grid `i/(n+1)`, `i = 1..=n`.
pub fn uniform_grid(n: usize) -> Vec<f64> {
    (1..=n).map(|i| i as f64 / (n + 1) as f64).collect()
}

/// `n` interior points `sin²(θ_i/2)`, `θ_i = iπ/(n+1)`, denser near the endpoints.
pub fn arcsine_grid(n: usize) -> Vec<f64> {
    (1..=n)
        .map(|i| {
            let s = (0.5 * std::f64::consts::PI * i as f64 / (n + 1) as f64).sin();
            s * s
        })
        .collect()
}

/// Grid with extra points merged in (sorted, deduplicated, restricted to `(0,1)`).
pub fn merge_points(grid: &[f64], extra: &[f64]) -> Vec<f64> {
    let mut g: Vec<f64> = grid.iter().chain(extra).copied().filter(|&t| t > 0.0 && t < 1.0).collect();
    g.sort_by(f64::total_cmp);
    g.dedup();
    g
}

fn check_grid(grid: &[f64]) -> Result<()> {
    for w in grid.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::InvalidArgument("grid must be strictly increasing".into()));
        }
    }
    if grid.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
        return Err(Error::InvalidArgument("grid points must lie in (0, 1)".into()));
    }
    Ok(())
}

/// One squared Bessel bridge of dimension `delta` on the interior `grid`.
pub fn sample_besq_bridge<R: Rng + ?Sized>(delta: f64, grid: &[f64], rng: &mut R) -> Result<BridgePath> {
    if !(delta > 0.0) {
        return Err(Error::Domain(format!("dimension must be positive, got {delta}")));
    }
    check_grid(grid)?;
    let mut times = Vec::with_capacity(grid.len() + 2);
    let mut values = Vec::with_capacity(grid.len() + 2);
    times.push(0.0);
    values.push(0.0);
    let (mut s, mut x) = (0.0f64, 0.0f64);
    for &t in grid {
        let tau = t - s;
        let n = if x > 0.0 {
            let mean = x * (1.0 - t) / (2.0 * tau * (1.0 - s));
            Poisson::new(mean).map_err(|e| Error::Domain(e.to_string()))?.sample(rng)
        } else {
            0.0
        };
        let scale = 2.0 * tau * (1.0 - t) / (1.0 - s);
        x = Gamma::new(n + 0.5 * delta, scale)
            .map_err(|e| Error::Domain(e.to_string()))?
            .sample(rng);
        times.push(t);
        values.push(x);
        s = t;
    }
    times.push(1.0);
    values.push(0.0);
    Ok(BridgePath { times, values, kind: PathKind::Squared })
}

/// Bessel bridge: pointwise square root of the squared bridge.
pub fn sample_bessel_bridge<R: Rng + ?Sized>(delta: f64, grid: &[f64], rng: &mut R) -> Result<BridgePath> {
    Ok(sample_besq_bridge(delta, grid, rng)?.squared_to_bessel())
}

/// Apply `f` to `n` independent paths, path `i` drawn from stream `(seed, i)`;
/// results come back in path order regardless of thread scheduling.
pub fn map_paths<F>(n: usize, seed: u64, sample: impl Fn(&mut ChaCha8Rng) -> Result<BridgePath> + Sync, f: F) -> Result<Vec<f64>>
where
    F: Fn(&BridgePath) -> f64 + Sync,
{
    (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            sample(&mut rng).map(|p| f(&p))
        })
        .collect()
}

/// Monte Carlo mean and standard error of a path functional over Bessel bridges.
pub fn mc_expectation<F>(delta: f64, grid: &[f64], n: usize, seed: u64, f: F) -> Result<(f64, f64)>
where
    F: Fn(&BridgePath) -> f64 + Sync,
{
    if n == 0 {
        return Err(Error::InvalidArgument("number of paths must be positive".into()));
    }
    let xs = map_paths(n, seed, |rng| sample_bessel_bridge(delta, grid, rng), f)?;
    Ok(mean_and_standard_error(&xs))
}

/// `Φ(X)` for an exponential functional, with `⟨m_i, X²⟩` integrated exactly
/// against the piecewise-linear interpolant of `X²` on the path's grid.
pub fn functional_value(phi: &ExpFunctional<f64>, path: &BridgePath) -> f64 {
    let sq: Vec<f64> = match path.kind {
        PathKind::Squared => path.values.clone(),
        PathKind::Bessel => path.values.iter().map(|v| v * v).collect(),
    };
    let q: Vec<f64> = phi
        .terms()
        .iter()
        .map(|(_, sol)| sol.measure().integrate_interpolant(&path.times, &sq))
        .collect();
    phi.evaluate(&q)
}

/// Outcome of a Monte Carlo estimate of `E^δ[Φ]` with a grid-refinement bias bound.
#[derive(Clone, Copy, Debug)]
pub struct McEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    /// `|mean(Φ_fine - Φ_coarse)| + 3 SE` from the same paths, the coarse grid
    /// keeping every other point (and every atom).
    pub grid_bias_bound: f64,
}

/// `E^δ[Φ(X)]` by Monte Carlo on `grid` (atom locations are inserted).
pub fn mc_functional_expectation(
    delta: f64,
    phi: &ExpFunctional<f64>,
    grid: &[f64],
    n: usize,
    seed: u64,
) -> Result<McEstimate> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of paths must be positive".into()));
    }
    let atoms: Vec<f64> = phi
        .terms()
        .iter()
        .flat_map(|(_, s)| s.measure().atoms().iter().map(|a| a.0).collect::<Vec<_>>())
        .collect();
    let fine = merge_points(grid, &atoms);
    let keep: Vec<bool> = fine
        .iter()
        .enumerate()
        .map(|(i, t)| i % 2 == 1 || atoms.contains(t))
        .collect();
    let pairs: Vec<(f64, f64)> = (0..n as u64)
        .into_par_iter()
        .map(|i| {
            let mut rng = RngStream::new(seed, i).rng();
            let path = sample_besq_bridge(delta, &fine, &mut rng)?;
            let f = functional_value(phi, &path);
            let mut coarse = BridgePath { times: vec![0.0], values: vec![0.0], kind: path.kind };
            for (j, k) in keep.iter().enumerate() {
                if *k {
                    coarse.times.push(path.times[j + 1]);
                    coarse.values.push(path.values[j + 1]);
                }
            }
            coarse.times.push(1.0);
            coarse.values.push(0.0);
            Ok((f, functional_value(phi, &coarse)))
        })
        .collect::<Result<_>>()?;
    let fine_vals: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let diffs: Vec<f64> = pairs.iter().map(|p| p.0 - p.1).collect();
    let (estimate, standard_error) = mean_and_standard_error(&fine_vals);
    let (dm, dse) = mean_and_standard_error(&diffs);
    Ok(McEstimate { estimate, standard_error, grid_bias_bound: dm.abs() + 3.0 * dse })
}

/// One row of a marginal goodness-of-fit table.
#[derive(Clone, Copy, Debug)]
pub struct KsRow {
    pub time: f64,
    pub statistic: f64,
    pub critical: f64,
}

impl KsRow {
    pub fn passed(&self) -> bool {
        self.statistic < self.critical
    }
}

/// KS statistics of sampled squared-bridge marginals at `times` against
/// Gamma(δ/2, rate 1/(2r(1-r))), at the 1% level.
pub fn marginal_ks(delta: f64, times: &[f64], n: usize, seed: u64) -> Result<Vec<KsRow>> {
    let grid = merge_points(times, &[]);
    let paths = sample_many(delta, &grid, n, seed)?;
    ks_rows(delta, times, &paths)
}

fn sample_many(delta: f64, grid: &[f64], n: usize, seed: u64) -> Result<Vec<BridgePath>> {
    if n == 0 {
        return Err(Error::InvalidArgument("number of paths must be positive".into()));
    }
    (0..n as u64)
        .into_par_iter()
        .map(|i| sample_besq_bridge(delta, grid, &mut RngStream::new(seed, i).rng()))
        .collect()
}

fn ks_rows(delta: f64, times: &[f64], paths: &[BridgePath]) -> Result<Vec<KsRow>> {
    times
        .iter()
        .map(|&r| {
            let mut xs: Vec<f64> = paths.iter().filter_map(|p| p.value_at(r)).collect();
            let shape = 0.5 * delta;
            let rate = 1.0 / (2.0 * r * (1.0 - r));
            let statistic = stats::ks_statistic(&mut xs, |x| stats::gamma_cdf(shape, rate, x))?;
            Ok(KsRow { time: r, statistic, critical: stats::ks_critical_1pct(xs.len()) })
        })
        .collect()
}

/// Additivity check: pathwise sums of independent `Q^δ` and `Q^{δ'}` bridges
/// compared with the `δ + δ'` marginal law. `δ' = 0` is the zero path.
pub fn additivity_check(delta: f64, delta2: f64, times: &[f64], n: usize, seed: u64) -> Result<Vec<KsRow>> {
    let grid = merge_points(times, &[]);
    let first = sample_many(delta, &grid, n, seed)?;
    let summed: Vec<BridgePath> = if delta2 == 0.0 {
        first
    } else {
        // a disjoint block of stream ids for the second family
        let second: Vec<BridgePath> = (0..n as u64)
            .into_par_iter()
            .map(|i| sample_besq_bridge(delta2, &grid, &mut RngStream::new(seed, (1 << 40) + i).rng()))
            .collect::<Result<_>>()?;
        first
            .into_iter()
            .zip(second)
            .map(|(mut a, b)| {
                for (x, y) in a.values.iter_mut().zip(b.values) {
                    *x += y;
                }
                a
            })
            .collect()
    };
    ks_rows(delta + delta2, times, &summed)
}

/// KS rows as CSV `(check, delta, r, statistic, critical_1pct, passed)`.
pub fn write_ks_csv<W: std::io::Write>(rows: &[(String, f64, KsRow)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["check", "delta", "r", "statistic", "critical_1pct", "passed"])?;
    for (check, delta, row) in rows {
        w.write_record([
            check.clone(),
            crate::report::fmt(*delta),
            crate::report::fmt(row.time),
            crate::report::fmt(row.statistic),
            crate::report::fmt(row.critical),
            row.passed().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Paths as CSV rows `(path_id, t, value)`.
pub fn write_paths_csv<W: std::io::Write>(paths: &[BridgePath], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["path_id", "t", "value"])?;
    for (i, p) in paths.iter().enumerate() {
        for (t, v) in p.times.iter().zip(&p.values) {
            w.write_record([i.to_string(), crate::report::fmt(*t), crate::report::fmt(*v)])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// `n` Bessel (or squared) bridges drawn from streams `(seed, 0..n)`.
pub fn sample_paths(delta: f64, grid: &[f64], n: usize, seed: u64, kind: PathKind) -> Result<Vec<BridgePath>> {
    let paths = sample_many(delta, grid, n, seed)?;
    Ok(match kind {
        PathKind::Squared => paths,
        PathKind::Bessel => paths.into_iter().map(BridgePath::squared_to_bessel).collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_grid_gives_pinned_endpoints() {
        let mut rng = RngStream::new(1, 0).rng();
        let p = sample_besq_bridge(2.0, &[], &mut rng).unwrap();
        assert_eq!(p.times, vec![0.0, 1.0]);
        assert_eq!(p.values, vec![0.0, 0.0]);
    }

    #[test]
    fn same_stream_same_path() {
        let grid = uniform_grid(16);
        let a = sample_bessel_bridge(1.3, &grid, &mut RngStream::new(7, 3).rng()).unwrap();
        let b = sample_bessel_bridge(1.3, &grid, &mut RngStream::new(7, 3).rng()).unwrap();
        let c = sample_bessel_bridge(1.3, &grid, &mut RngStream::new(7, 4).rng()).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn rejects_bad_grids() {
        let mut rng = RngStream::new(1, 0).rng();
        assert!(sample_besq_bridge(1.0, &[0.5, 0.4], &mut rng).is_err());
        assert!(sample_besq_bridge(1.0, &[0.0, 0.4], &mut rng).is_err());
        assert!(sample_besq_bridge(0.0, &[0.5], &mut rng).is_err());
    }
}
