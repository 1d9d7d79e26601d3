//! Finite-difference dynamics on `[0, 1]` with Dirichlet boundary: the
//! stochastic heat equation `∂u = ½∂²u + ξ` and the regularized `δ = 1`
//! Bessel dynamics with the extra drift `-¼ρ''_ε(u)`. Also the deterministic
//! quantities attached to them: the mollified-limit table and the two
//! time-derivatives `J`, `L` whose mismatch separates `u` from `|v|`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::ibpf;
use crate::laws::{self, Dimension, ExpFunctional};
use crate::measures::TestFunctionH;
use crate::poly::Poly;
use crate::quad::{self, Tolerance};
use crate::report::fmt;
use crate::sampler::{self, RngStream};
use crate::stats;

const RHO_NORM: f64 = 315.0 / 256.0;

/// `ρ_ε(y) = ε^{-1} ρ(y/ε)` with `ρ(y) = (315/256)(1-y²)⁴` on `[-1, 1]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Mollifier {
    eps: f64,
}

impl Mollifier {
    pub fn new(eps: f64) -> Result<Self> {
        if !(eps > 0.0 && eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("mollifier width must be positive, got {eps}")));
        }
        Ok(Self { eps })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    /// `∫ y² ρ(y) dy` of the base bump.
    pub fn base_second_moment() -> f64 {
        1.0 / 11.0
    }

    pub fn rho(&self, y: f64) -> f64 {
        let z = y / self.eps;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - z * z;
        RHO_NORM * s.powi(4) / self.eps
    }

    pub fn rho_second(&self, y: f64) -> f64 {
        let z = y / self.eps;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - z * z;
        RHO_NORM * s * s * (56.0 * z * z - 8.0) / self.eps.powi(3)
    }

    pub fn rho_third(&self, y: f64) -> f64 {
        let z = y / self.eps;
        if z.abs() >= 1.0 {
            return 0.0;
        }
        let s = 1.0 - z * z;
        RHO_NORM * z * s * (144.0 * s - 192.0 * z * z) / self.eps.powi(4)
    }
}

/// Covariances of the stochastic heat equation started from 0:
/// `q_t(x,y) = Σ_k e_k(x) e_k(y) (1 - e^{-λ_k t})/λ_k`, `e_k = √2 sin(kπ·)`, `λ_k = k²π²`.
#[derive(Clone, Copy, Debug)]
pub struct CovarianceKernel {
    modes: usize,
}

impl CovarianceKernel {
    pub fn new(modes: usize) -> Self {
        Self { modes }
    }

    pub fn eigenvalue(k: usize) -> f64 {
        let kp = k as f64 * std::f64::consts::PI;
        kp * kp
    }

    pub fn eigenfunction(k: usize, x: f64) -> f64 {
        std::f64::consts::SQRT_2 * (k as f64 * std::f64::consts::PI * x).sin()
    }

    /// `x ∧ y - xy`.
    pub fn q_inf(&self, x: f64, y: f64) -> f64 {
        x.min(y) - x * y
    }

    /// `q^t = q_∞ - q_t`, truncated to the first `modes` terms.
    pub fn q_upper(&self, t: f64, x: f64, y: f64) -> f64 {
        (1..=self.modes)
            .map(|k| {
                let l = Self::eigenvalue(k);
                Self::eigenfunction(k, x) * Self::eigenfunction(k, y) * (-l * t).exp() / l
            })
            .sum()
    }

    pub fn q(&self, t: f64, x: f64, y: f64) -> f64 {
        self.q_inf(x, y) - self.q_upper(t, x, y)
    }
}

/// Field on the interior points `x_i = i/(M+1)` at time `t`.
#[derive(Clone, Debug, PartialEq)]
pub struct SpdeState {
    pub t: f64,
    pub dt: f64,
    pub u: Vec<f64>,
}

impl SpdeState {
    pub fn m(&self) -> usize {
        self.u.len()
    }

    pub fn dx(&self) -> f64 {
        1.0 / (self.u.len() + 1) as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i + 1) as f64 * self.dx()
    }
}

/// Stability bound `Δx²/2` for the explicit parts of the scheme.
pub fn stability_limit(m: usize) -> f64 {
    let dx = 1.0 / (m + 1) as f64;
    0.5 * dx * dx
}

/// `(I - Δt/2 L) u⁺ = u + f` with `L` the Dirichlet second difference,
/// factorized once.
#[derive(Clone, Debug)]
pub struct SemiImplicit {
    dt: f64,
    off: f64,
    diag: f64,
    c: Vec<f64>,
    inv: Vec<f64>,
}

impl SemiImplicit {
    pub fn new(m: usize, dt: f64) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("grid needs at least one interior point".into()));
        }
        let limit = stability_limit(m);
        if !(dt > 0.0 && dt <= limit) {
            return Err(Error::Stability { dt, limit });
        }
        let dx = 1.0 / (m + 1) as f64;
        let a = 0.5 * dt / (dx * dx);
        let diag = 1.0 + 2.0 * a;
        let off = -a;
        let mut c = vec![0.0; m];
        let mut inv = vec![0.0; m];
        let mut prev = 0.0;
        for i in 0..m {
            let piv = diag - off * prev;
            inv[i] = 1.0 / piv;
            c[i] = off * inv[i];
            prev = c[i];
        }
        Ok(Self { dt, off, diag, c, inv })
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn m(&self) -> usize {
        self.c.len()
    }

    /// One step in place; `forcing` is added to `u` before the implicit solve.
    pub fn step(&self, u: &mut [f64], forcing: &[f64]) {
        let m = self.m();
        let mut prev = 0.0;
        for i in 0..m {
            let y = (u[i] + forcing[i] - self.off * prev) * self.inv[i];
            u[i] = y;
            prev = y;
        }
        for i in (0..m - 1).rev() {
            u[i] -= self.c[i] * u[i + 1];
        }
    }

    /// Residual `max |(I - Δt/2 L) u⁺ - rhs|`, for checking the factorization.
    pub fn residual(&self, next: &[f64], rhs: &[f64]) -> f64 {
        let m = self.m();
        (0..m)
            .map(|i| {
                let left = if i > 0 { next[i - 1] } else { 0.0 };
                let right = if i + 1 < m { next[i + 1] } else { 0.0 };
                (self.diag * next[i] + self.off * (left + right) - rhs[i]).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// Which dynamics to run.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Model {
    /// Stochastic heat equation started from a Brownian bridge.
    She,
    /// Regularized `δ = 1` dynamics started from a reflected Brownian bridge.
    Bessel1(Mollifier),
}

/// Stationary one-point law at `x`: `N(0, x(1-x))` or its modulus.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MarginalLaw {
    Gaussian,
    Folded,
}

impl MarginalLaw {
    pub fn name(&self) -> &'static str {
        match self {
            MarginalLaw::Gaussian => "normal",
            MarginalLaw::Folded => "folded_normal",
        }
    }

    pub fn cdf(&self, sd: f64, x: f64) -> f64 {
        match self {
            MarginalLaw::Gaussian => stats::normal_cdf(sd, x),
            MarginalLaw::Folded => stats::folded_normal_cdf(sd, x),
        }
    }
}

impl Model {
    pub fn law(&self) -> MarginalLaw {
        match self {
            Model::She => MarginalLaw::Gaussian,
            Model::Bessel1(_) => MarginalLaw::Folded,
        }
    }
}

#[derive(Clone, Debug)]
pub struct SpdeSettings {
    /// Interior grid points.
    pub m: usize,
    pub dt: f64,
    pub t_end: f64,
    /// Probe positions in `(0, 1)`, snapped to the nearest grid point.
    pub probes: Vec<f64>,
    /// Record probes every this many steps.
    pub probe_every: usize,
    /// Store a full snapshot every this many steps (0: only the final state).
    pub snapshot_every: usize,
}

impl SpdeSettings {
    /// `M = 127`, `Δt = 1e-5`, `T = 2`, probes at `¼, ½, ¾`.
    pub fn reference() -> Self {
        Self {
            m: 127,
            dt: 1e-5,
            t_end: 2.0,
            probes: vec![0.25, 0.5, 0.75],
            probe_every: 10,
            snapshot_every: 20_000,
        }
    }

    pub fn steps(&self) -> usize {
        (self.t_end / self.dt).round() as usize
    }

    fn probe_indices(&self) -> Result<Vec<usize>> {
        self.probes
            .iter()
            .map(|&x| {
                if !(x > 0.0 && x < 1.0) {
                    return Err(Error::InvalidArgument(format!("probe {x} must lie in (0, 1)")));
                }
                let i = (x * (self.m + 1) as f64).round() as usize;
                Ok(i.clamp(1, self.m) - 1)
            })
            .collect()
    }

    fn validate(&self) -> Result<()> {
        if !(self.t_end > 0.0) {
            return Err(Error::InvalidArgument("final time must be positive".into()));
        }
        if self.probe_every == 0 {
            return Err(Error::InvalidArgument("probe interval must be positive".into()));
        }
        Ok(())
    }
}

/// One simulated replica.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub replica: u64,
    /// Grid positions of the probes.
    pub probe_x: Vec<f64>,
    /// Time between successive probe samples.
    pub probe_dt: f64,
    pub probe_times: Vec<f64>,
    /// `probes[j][n]`: value at probe `j`, sample `n`.
    pub probes: Vec<Vec<f64>>,
    pub snapshots: Vec<SpdeState>,
    /// Number of `(site, step)` pairs with `u < 0`, out of `visited`.
    pub negative: u64,
    pub visited: u64,
}

/// Brownian bridge on the interior grid of `m` points.
pub fn brownian_bridge<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Vec<f64> {
    let dx = 1.0 / (m + 1) as f64;
    let sd = dx.sqrt();
    let mut w = Vec::with_capacity(m + 1);
    let mut acc = 0.0;
    for _ in 0..=m {
        let z: f64 = StandardNormal.sample(rng);
        acc += sd * z;
        w.push(acc);
    }
    let end = w[m];
    (0..m).map(|i| w[i] - (i + 1) as f64 * dx * end).collect()
}

/// Reflected Brownian bridge on the interior grid, drawn by the bridge sampler
/// with `δ = 1`.
pub fn reflected_bridge<R: Rng + ?Sized>(m: usize, rng: &mut R) -> Result<Vec<f64>> {
    let grid = sampler::uniform_grid(m);
    let path = sampler::sample_bessel_bridge(1.0, &grid, rng)?;
    Ok(path.values[1..=m].to_vec())
}

/// Stochastic heat equation from `z0`.
pub fn simulate_she<R: Rng + ?Sized>(z0: &[f64], settings: &SpdeSettings, rng: &mut R) -> Result<Trajectory> {
    simulate(z0, None, settings, rng)
}

/// Regularized `δ = 1` dynamics from `u0 >= 0`.
pub fn simulate_bessel1<R: Rng + ?Sized>(
    u0: &[f64],
    mollifier: &Mollifier,
    settings: &SpdeSettings,
    rng: &mut R,
) -> Result<Trajectory> {
    if u0.iter().any(|&v| v < 0.0) {
        return Err(Error::InvalidArgument("initial condition must be nonnegative".into()));
    }
    simulate(u0, Some(mollifier), settings, rng)
}

fn simulate<R: Rng + ?Sized>(
    z0: &[f64],
    drift: Option<&Mollifier>,
    settings: &SpdeSettings,
    rng: &mut R,
) -> Result<Trajectory> {
    settings.validate()?;
    if z0.len() != settings.m {
        return Err(Error::InvalidArgument(format!(
            "initial condition has {} points, grid has {}",
            z0.len(),
            settings.m
        )));
    }
    let stepper = SemiImplicit::new(settings.m, settings.dt)?;
    let idx = settings.probe_indices()?;
    let m = settings.m;
    let dt = settings.dt;
    let dx = 1.0 / (m + 1) as f64;
    let noise = (dt / dx).sqrt();
    let steps = settings.steps();

    let mut u = z0.to_vec();
    let mut forcing = vec![0.0; m];
    let mut traj = Trajectory {
        replica: 0,
        probe_x: idx.iter().map(|&i| (i + 1) as f64 * dx).collect(),
        probe_dt: settings.probe_every as f64 * dt,
        probe_times: Vec::new(),
        probes: vec![Vec::new(); idx.len()],
        snapshots: vec![SpdeState { t: 0.0, dt, u: u.clone() }],
        negative: 0,
        visited: 0,
    };
    for n in 1..=steps {
        for (i, f) in forcing.iter_mut().enumerate() {
            let z: f64 = StandardNormal.sample(rng);
            *f = noise * z;
            if let Some(rho) = drift {
                *f -= 0.25 * dt * rho.rho_second(u[i]);
            }
        }
        stepper.step(&mut u, &forcing);
        let t = n as f64 * dt;
        let mut worst = 0.0f64;
        for &v in &u {
            worst = worst.max(v.abs());
            if v < 0.0 {
                traj.negative += 1;
            }
        }
        if !(worst <= 50.0) {
            return Err(Error::BlowUp { time: t, value: worst });
        }
        traj.visited += m as u64;
        if n % settings.probe_every == 0 {
            traj.probe_times.push(t);
            for (j, &i) in idx.iter().enumerate() {
                traj.probes[j].push(u[i]);
            }
        }
        if n == steps || (settings.snapshot_every > 0 && n % settings.snapshot_every == 0) {
            traj.snapshots.push(SpdeState { t, dt, u: u.clone() });
        }
    }
    Ok(traj)
}

/// Independent replicas `0..replicas`, replica `i` on stream `(seed, i)`;
/// the initial condition is drawn from the stationary law of the model's
/// continuum dynamics.
pub fn run_ensemble(model: &Model, settings: &SpdeSettings, replicas: usize, seed: u64) -> Result<Vec<Trajectory>> {
    if replicas == 0 {
        return Err(Error::InvalidArgument("number of replicas must be positive".into()));
    }
    settings.validate()?;
    SemiImplicit::new(settings.m, settings.dt)?;
    (0..replicas as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng: ChaCha8Rng = RngStream::new(seed, r).rng();
            let mut traj = match model {
                Model::She => {
                    let z0 = brownian_bridge(settings.m, &mut rng);
                    simulate_she(&z0, settings, &mut rng)?
                }
                Model::Bessel1(rho) => {
                    let u0 = reflected_bridge(settings.m, &mut rng)?;
                    simulate_bessel1(&u0, rho, settings, &mut rng)?
                }
            };
            traj.replica = r;
            Ok(traj)
        })
        .collect()
}

/// Summary statistics of one probe site pooled over replicas.
#[derive(Clone, Debug)]
pub struct SiteDiagnostics {
    pub x: f64,
    pub samples: usize,
    pub ks: f64,
    pub mean: f64,
    pub second_moment: f64,
    /// `x(1-x)`, the stationary second moment.
    pub target_second_moment: f64,
    /// Integrated autocorrelation time in time units, averaged over replicas.
    pub autocorrelation_time: f64,
}

#[derive(Clone, Debug)]
pub struct StationarityReport {
    pub law: MarginalLaw,
    pub burn_in: f64,
    pub sites: Vec<SiteDiagnostics>,
    pub negativity_fraction: f64,
}

impl StationarityReport {
    pub fn site(&self, x: f64) -> Option<&SiteDiagnostics> {
        self.sites.iter().find(|s| (s.x - x).abs() < 1e-12)
    }

    pub fn max_ks(&self) -> f64 {
        self.sites.iter().map(|s| s.ks).fold(0.0, f64::max)
    }
}

/// KS distances against the stationary one-point law per probe site,
/// autocorrelation times and the negativity fraction.
pub fn stationarity_report(trajectories: &[Trajectory], burn_in: f64, law: MarginalLaw) -> Result<StationarityReport> {
    let first = trajectories
        .first()
        .ok_or_else(|| Error::InvalidArgument("no trajectories to analyse".into()))?;
    let mut sites = Vec::with_capacity(first.probe_x.len());
    for (j, &x) in first.probe_x.iter().enumerate() {
        let mut pooled = Vec::new();
        let mut taus = Vec::new();
        for tr in trajectories {
            let start = tr.probe_times.partition_point(|&t| t <= burn_in);
            let series = &tr.probes[j][start..];
            if series.len() >= 2 {
                taus.push(stats::autocorrelation_time(series)? * tr.probe_dt);
            }
            pooled.extend_from_slice(series);
        }
        if pooled.is_empty() {
            return Err(Error::InvalidArgument(format!("no samples after burn-in {burn_in}")));
        }
        let n = pooled.len();
        let mean = pooled.iter().sum::<f64>() / n as f64;
        let second_moment = pooled.iter().map(|v| v * v).sum::<f64>() / n as f64;
        let var = x * (1.0 - x);
        let sd = var.sqrt();
        let ks = stats::ks_statistic(&mut pooled, |v| law.cdf(sd, v))?;
        let tau = if taus.is_empty() { f64::NAN } else { taus.iter().sum::<f64>() / taus.len() as f64 };
        sites.push(SiteDiagnostics {
            x,
            samples: n,
            ks,
            mean,
            second_moment,
            target_second_moment: var,
            autocorrelation_time: tau,
        });
    }
    let negative: u64 = trajectories.iter().map(|t| t.negative).sum();
    let visited: u64 = trajectories.iter().map(|t| t.visited).sum();
    let negativity_fraction = if visited == 0 { 0.0 } else { negative as f64 / visited as f64 };
    Ok(StationarityReport { law, burn_in, sites, negativity_fraction })
}

/// Snapshot rows `(replica, t, x, u)`, boundary points included.
pub fn write_trajectory_csv<W: std::io::Write>(trajectories: &[Trajectory], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["replica", "t", "x", "u"])?;
    for tr in trajectories {
        for s in &tr.snapshots {
            let dx = s.dx();
            let m = s.m();
            for i in 0..=m + 1 {
                let u = if i == 0 || i == m + 1 { 0.0 } else { s.u[i - 1] };
                w.write_record([tr.replica.to_string(), fmt(s.t), fmt(i as f64 * dx), fmt(u)])?;
            }
        }
    }
    w.flush()?;
    Ok(())
}

pub fn write_diagnostics_csv<W: std::io::Write>(report: &StationarityReport, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "x",
        "law",
        "samples",
        "ks_distance",
        "mean",
        "second_moment",
        "target_second_moment",
        "autocorrelation_time",
        "negativity_fraction",
    ])?;
    for s in &report.sites {
        w.write_record([
            fmt(s.x),
            report.law.name().to_string(),
            s.samples.to_string(),
            fmt(s.ks),
            fmt(s.mean),
            fmt(s.second_moment),
            fmt(s.target_second_moment),
            fmt(s.autocorrelation_time),
            fmt(report.negativity_fraction),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// `½ ∫ h_r ∫ ρ''_ε(a) g_r(a) E¹[Φ | X_r = |a|] da dr` with `g_r` the
/// `N(0, r(1-r))` density.
pub fn mollified_value(phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>, rho: &Mollifier) -> Result<f64> {
    let dim = Dimension::new(1.0)?;
    let eps = rho.eps();
    let tol = Tolerance::new(1e-300, 1e-10);
    let inner = |r: f64| -> Result<f64> {
        let v = r * (1.0 - r);
        let norm = 1.0 / (2.0 * std::f64::consts::PI * v).sqrt();
        let mut width = v.sqrt();
        for (_, sol) in phi.terms() {
            width = width.min(1.0 / sol.c(r).max(1e-300).sqrt());
        }
        let failure = std::cell::RefCell::new(None);
        let f = |a: f64| {
            let mut e = 0.0;
            for (g, sol) in phi.terms() {
                match laws::conditional_laplace(&dim, sol, r, a) {
                    Ok(c) => e += g * c,
                    Err(err) => {
                        failure.borrow_mut().get_or_insert(err);
                    }
                }
            }
            rho.rho_second(a) * norm * (-0.5 * a * a / v).exp() * e
        };
        let mut extra = vec![eps / 7f64.sqrt()];
        extra.extend((1..=8).map(|j| j as f64 * width).filter(|&p| p < eps));
        let pts = quad::breakpoints(0.0, eps, &extra);
        let value = quad::integrate_with_points(f, &pts, &tol)?;
        if let Some(e) = failure.into_inner() {
            return Err(e);
        }
        Ok(2.0 * value)
    };
    Ok(0.5 * ibpf::integrate_fallible(h, inner, &phi.knots())?)
}

#[derive(Clone, Copy, Debug)]
pub struct MollifiedRow {
    pub eps: f64,
    pub value: f64,
    pub error: f64,
}

#[derive(Clone, Debug)]
pub struct MollifiedTable {
    /// The `δ = 1` right-hand side the table converges to.
    pub target: f64,
    pub rows: Vec<MollifiedRow>,
}

impl MollifiedTable {
    /// `log(e_{i-1}/e_i)/log(ε_{i-1}/ε_i)` over consecutive rows.
    pub fn orders(&self) -> Vec<f64> {
        self.rows
            .windows(2)
            .map(|w| (w[0].error.abs() / w[1].error.abs()).ln() / (w[0].eps / w[1].eps).ln())
            .collect()
    }
}

pub fn mollified_limit_check(
    phi: &ExpFunctional<f64>,
    h: &TestFunctionH<f64>,
    eps_list: &[f64],
) -> Result<MollifiedTable> {
    let target = ibpf::rhs_special(&Dimension::new(1.0)?, phi, h)?;
    let rows = eps_list
        .iter()
        .map(|&eps| {
            let value = mollified_value(phi, h, &Mollifier::new(eps)?)?;
            Ok(MollifiedRow { eps, value, error: value - target })
        })
        .collect::<Result<_>>()?;
    Ok(MollifiedTable { target, rows })
}

/// Direction `k` of the exponential functional `e^{⟨k, β⟩}`.
#[derive(Clone, Debug, PartialEq)]
pub enum KFunction {
    /// `amplitude · sin(nπr)`.
    Sine { n: u32, amplitude: f64 },
    /// Polynomial in `r`.
    Poly(Poly<f64>),
}

impl KFunction {
    pub fn zero() -> Self {
        KFunction::Poly(Poly::zero())
    }

    pub fn sine(n: u32, amplitude: f64) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidArgument("sine mode must be at least 1".into()));
        }
        Ok(KFunction::Sine { n, amplitude })
    }

    pub fn value(&self, r: f64) -> f64 {
        match self {
            KFunction::Sine { n, amplitude } => amplitude * (*n as f64 * std::f64::consts::PI * r).sin(),
            KFunction::Poly(p) => p.eval(r),
        }
    }

    /// `K = Qk` solving `-K'' = k`, `K(0) = K(1) = 0`.
    fn big_k(&self) -> Option<Poly<f64>> {
        match self {
            KFunction::Sine { .. } => None,
            KFunction::Poly(p) => {
                let p2 = p.antiderivative().antiderivative();
                let end = p2.eval(1.0);
                Some(&p2.scale(-1.0) + &Poly::new(vec![0.0, end]))
            }
        }
    }

    /// `(K_r, K'_r)`.
    pub fn covariance_image(&self, r: f64) -> (f64, f64) {
        match self {
            KFunction::Sine { n, amplitude } => {
                let w = *n as f64 * std::f64::consts::PI;
                (amplitude * (w * r).sin() / (w * w), amplitude * (w * r).cos() / w)
            }
            KFunction::Poly(_) => {
                let k = self.big_k().unwrap_or_else(Poly::zero);
                (k.eval(r), k.derivative().eval(r))
            }
        }
    }

    /// `⟨Qk, k⟩`.
    pub fn quadratic_form(&self) -> f64 {
        match self {
            KFunction::Sine { n, amplitude } => {
                let w = *n as f64 * std::f64::consts::PI;
                0.5 * amplitude * amplitude / (w * w)
            }
            KFunction::Poly(p) => {
                let k = self.big_k().unwrap_or_else(Poly::zero);
                (&k * p).antiderivative().eval(1.0)
            }
        }
    }
}

/// `λ(x, y, r)`.
pub fn lambda(x: f64, y: f64, r: f64) -> f64 {
    let v = r * (1.0 - r);
    let b = 1.0 - 2.0 * r;
    x * x + x * y * b / v + y * y * b * b / (4.0 * v * v) - 0.25 / v
}

/// `(K')² - ((1-2r)/(r(1-r))) K K' - K²/(r(1-r))`; vanishes identically iff
/// `J = L` for every `h`.
pub fn relation_residual(k: &KFunction, r: f64) -> f64 {
    let (big, dk) = k.covariance_image(r);
    let v = r * (1.0 - r);
    dk * dk - (1.0 - 2.0 * r) / v * big * dk - big * big / v
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DistinctionResult {
    pub j: f64,
    pub l: f64,
    pub gap: f64,
}

/// `J`, `L` and `J - L` for the direction `k` and test function `h`.
pub fn distinction_gap(k: &KFunction, h: &TestFunctionH<f64>, tol: &Tolerance<f64>) -> Result<DistinctionResult> {
    let pre = (0.5 * k.quadratic_form()).exp();
    let inv_sqrt_2pi = 1.0 / (2.0 * std::f64::consts::PI).sqrt();
    let j = h.integrate_against(
        |r| {
            let v = r * (1.0 - r);
            let (big, dk) = k.covariance_image(r);
            (-big * big / (2.0 * v)).exp() * lambda(dk, -big, r) / v.sqrt()
        },
        &[],
        tol,
    )?;
    let l = h.integrate_against(
        |r| {
            let v = r * (1.0 - r);
            let (big, _) = k.covariance_image(r);
            (big * big - v) / (v * v) * (-big * big / (2.0 * v)).exp() / v.sqrt()
        },
        &[],
        tol,
    )?;
    let j = pre * inv_sqrt_2pi * j;
    let l = 0.25 * pre * inv_sqrt_2pi * l;
    Ok(DistinctionResult { j, l, gap: j - l })
}

pub fn write_distinction_csv<W: std::io::Write>(rows: &[(String, String, DistinctionResult)], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["k_id", "h_id", "J", "L", "gap"])?;
    for (k, h, d) in rows {
        w.write_record([k.clone(), h.clone(), fmt(d.j), fmt(d.l), fmt(d.gap)])?;
    }
    w.flush()?;
    Ok(())
}
