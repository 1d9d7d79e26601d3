//! Integration-by-parts formulae for Bessel bridges, evaluated by several
//! independent routes: the closed left-hand side, Monte Carlo, the
//! renormalized a-integral, the unified `μ_{δ-3}` pairing, the critical
//! dimension formulae and the classical `X^{-3}` drift for `δ >= 3`.

use crate::error::{Error, Result};
use crate::laws::{self, Dimension, ExpFunctional};
use crate::measures::{FiniteMeasure, TestFunctionH};
use crate::num::mean_and_standard_error;
use crate::ode::OdeSolution;
use crate::quad::{self, Tolerance};
use crate::renorm;
use crate::report::fmt;
use crate::sampler::{self, BridgePath};
use crate::specfun;

/// Accuracy requested from every outer `dr` quadrature.
fn outer_tol() -> Tolerance<f64> {
    Tolerance::new(1e-11, 1e-11)
}

/// Accuracy requested from the inner `da` integrals.
fn inner_tol() -> Tolerance<f64> {
    Tolerance::new(1e-14, 1e-11)
}

fn ln_gamma_ratio(delta: f64) -> Result<f64> {
    Ok(specfun::ln_gamma(0.5 * (delta + 1.0))? - specfun::ln_gamma(0.5 * delta)?)
}

/// `E^δ[∂_h Φ(X)] + E^δ[⟨h'', X⟩ Φ(X)]` in closed form:
/// per term `-Γ((δ+1)/2)/(2^{3/2}Γ(δ/2)) ψ_1^{-(δ-3)/2} ∫ h (ψψ̂)^{-3/2} dr`.
pub fn lhs_closed(dim: &Dimension<f64>, phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>) -> Result<f64> {
    let delta = dim.delta();
    let pre = -(ln_gamma_ratio(delta)? - 1.5 * std::f64::consts::LN_2).exp();
    let mut total = 0.0;
    for (g, sol) in phi.terms() {
        let integral = h.integrate_against(|r| sol.product(r).powf(-1.5), &sol.knots(), &outer_tol())?;
        total += g * pre * sol.psi_1().powf(-0.5 * (delta - 3.0)) * integral;
    }
    Ok(total)
}

/// `-κ(δ) ∫ h_r ∫_0^∞ a^{δ-4} 𝒯^{2k}_a Σ^δ_r(Φ|·) da dr` with the inner
/// renormalized integral computed by split quadrature. Refuses `δ ∈ {1, 3}`.
pub fn rhs_quadrature(dim: &Dimension<f64>, phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>) -> Result<f64> {
    if dim.is_critical() {
        return Err(Error::Domain(format!(
            "rhs_quadrature is undefined at δ = {}; use rhs_special",
            dim.delta()
        )));
    }
    let beta = dim.delta() - 4.0;
    let n = 2 * dim.k();
    let tol = inner_tol();
    let inner = |r: f64| -> Result<f64> {
        let sigma = laws::sigma_test_function(dim, phi, r)?;
        renorm::renormalized_integral(&sigma, beta, n, &tol)
    };
    let integral = integrate_fallible(h, inner, &phi.knots())?;
    Ok(-dim.kappa() * integral)
}

/// The critical-dimension formulae: `δ = 3`: `-½ ∫ h Σ³_r(Φ|0) dr`;
/// `δ = 1`: `¼ ∫ h (d²/da²) Σ¹_r(Φ|a)|_{a=0} dr`.
pub fn rhs_special(dim: &Dimension<f64>, phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>) -> Result<f64> {
    let delta = dim.delta();
    let kinks = phi.knots();
    if delta == 3.0 {
        let v = integrate_fallible(h, |r| laws::sigma_functional(dim, phi, r, 0.0), &kinks)?;
        Ok(-0.5 * v)
    } else if delta == 1.0 {
        let v = integrate_fallible(h, |r| laws::sigma_second_derivative_at_zero(dim, phi, r), &kinks)?;
        Ok(0.25 * v)
    } else {
        Err(Error::Domain(format!("rhs_special needs δ ∈ {{1, 3}}, got {delta}")))
    }
}

/// `-Γ(δ)/(4(δ-2)) ∫ h_r ⟨μ_{δ-3}, Σ^δ_r(Φ|·)⟩ dr`. Refuses `δ = 2`.
pub fn rhs_unified(dim: &Dimension<f64>, phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>) -> Result<f64> {
    let delta = dim.delta();
    if delta == 2.0 {
        return Err(Error::Domain("rhs_unified is singular at δ = 2; use rhs_quadrature".into()));
    }
    let pre = -specfun::gamma(delta)? / (4.0 * (delta - 2.0));
    let tol = inner_tol();
    let inner = |r: f64| -> Result<f64> {
        let sigma = laws::sigma_test_function(dim, phi, r)?;
        renorm::pair_mu_with(delta - 3.0, &sigma, &tol)
    };
    Ok(pre * integrate_fallible(h, inner, &phi.knots())?)
}

/// `∫ h_r f(r) dr` for a fallible integrand; the first error is reported.
pub(crate) fn integrate_fallible<F>(h: &TestFunctionH<f64>, f: F, kinks: &[f64]) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    let failure = std::cell::RefCell::new(None);
    let v = h.integrate_against(
        |r| match f(r) {
            Ok(v) => v,
            Err(e) => {
                failure.borrow_mut().get_or_insert(e);
                0.0
            }
        },
        kinks,
        &outer_tol(),
    );
    if let Some(e) = failure.into_inner() {
        return Err(e);
    }
    v
}

/// Monte Carlo settings shared by the path-based routes.
#[derive(Clone, Copy, Debug)]
pub struct McSettings {
    pub paths: usize,
    pub grid_points: usize,
    pub seed: u64,
}

/// `∫_lo^hi w(r) X(r) dr` with `X` the piecewise-linear interpolant of the
/// path, five-point Gauss–Legendre on each cell split at `breaks`.
fn integrate_path_against<W: Fn(f64) -> f64>(path: &BridgePath, w: W, lo: f64, hi: f64, breaks: &[f64]) -> f64 {
    let mut pts: Vec<f64> = path.times.iter().copied().filter(|&t| t > lo && t < hi).collect();
    pts.extend(breaks.iter().copied().filter(|&t| t > lo && t < hi));
    pts.push(lo);
    pts.push(hi);
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    pts.windows(2)
        .map(|c| {
            quad::gauss_legendre5(
                |r| w(r) * crate::measures::interpolate(&path.times, &path.values, r),
                c[0],
                c[1],
            )
        })
        .sum()
}

/// `⟨X h, m⟩` for a Bessel path.
fn path_h_measure(path: &BridgePath, h: &TestFunctionH<f64>, m: &FiniteMeasure<f64>) -> f64 {
    let (lo, hi) = h.support();
    let mut s: f64 = m
        .atoms()
        .iter()
        .map(|&(r, w)| w * h.value(r) * crate::measures::interpolate(&path.times, &path.values, r))
        .sum();
    for (b, &c) in m.breaks().windows(2).zip(m.values()) {
        let (a0, a1) = (b[0].max(lo), b[1].min(hi));
        if c == 0.0 || a1 <= a0 {
            continue;
        }
        s += c * integrate_path_against(path, |r| h.value(r), a0, a1, &[]);
    }
    s
}

/// `⟨h'', X⟩ Φ(X) + ∂_h Φ(X)` with `∂_h Φ(X) = -2 Σ γ_i ⟨X h, m_i⟩ e^{-⟨m_i, X²⟩}`,
/// `⟨h'', X⟩` from the piecewise-linear interpolant.
pub fn lhs_integrand(phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>, path: &BridgePath) -> f64 {
    let (lo, hi) = h.support();
    let hxx = integrate_path_against(path, |r| h.second_derivative(r), lo, hi, &[]);
    lhs_integrand_with(phi, h, path, hxx)
}

fn lhs_integrand_with(phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>, path: &BridgePath, hxx: f64) -> f64 {
    let squared: Vec<f64> = path.values.iter().map(|v| v * v).collect();
    let mut value = 0.0;
    for (g, sol) in phi.terms() {
        let m = sol.measure();
        let e = (-m.integrate_interpolant(&path.times, &squared)).exp();
        value += g * e * (hxx - 2.0 * path_h_measure(path, h, m));
    }
    value
}

fn atom_locations(phi: &ExpFunctional<f64>) -> Vec<f64> {
    phi.terms()
        .iter()
        .flat_map(|(_, s)| s.measure().atoms().iter().map(|a| a.0).collect::<Vec<_>>())
        .collect()
}

/// Composite quadrature for `∫ w(r) X_r dr` from path values at nodes.
/// Segments run between consecutive `cuts` (atom locations, where `X` is
/// sampled exactly). Near `r = 0` and `r = 1` the variable is changed to
/// `r ∝ 1 - cos θ` so that the `√r` behaviour of Bessel paths becomes smooth,
/// and the trapezoidal rule is applied in `θ`; ends at cuts are plain
/// trapezoid ends. With no cuts this is `r = sin²(θ/2)` over the whole interval.
fn path_rule<W: Fn(f64) -> f64>(n: usize, cuts: &[f64], w: W) -> (Vec<f64>, Vec<f64>) {
    let mut ends = vec![0.0];
    ends.extend(cuts.iter().copied().filter(|&c| c > 0.0 && c < 1.0));
    ends.push(1.0);
    ends.sort_by(f64::total_cmp);
    ends.dedup();
    let (mut nodes, mut weights) = (Vec::new(), Vec::new());
    let mut push = |r: f64, dr: f64| {
        nodes.push(r);
        weights.push(dr * w(r));
    };
    for seg in ends.windows(2) {
        let (a, b) = (seg[0], seg[1]);
        let len = b - a;
        let k = if ends.len() == 2 { n } else { ((n as f64 * len).round() as usize).max(2) };
        match (a == 0.0, b == 1.0) {
            (true, true) => {
                let dt = std::f64::consts::PI / (k + 1) as f64;
                for i in 1..=k {
                    let t = i as f64 * dt;
                    push((0.5 * t).sin().powi(2), 0.5 * t.sin() * dt);
                }
            }
            (true, false) | (false, true) => {
                let dt = std::f64::consts::FRAC_PI_2 / k as f64;
                for i in 1..=k {
                    let t = i as f64 * dt;
                    let half = if i == k { 0.5 } else { 1.0 };
                    let r = if a == 0.0 { len * (1.0 - t.cos()) } else { 1.0 - len * (1.0 - t.cos()) };
                    push(r, half * len * t.sin() * dt);
                }
            }
            (false, false) => {
                let h = len / k as f64;
                for i in 0..=k {
                    let half = if i == 0 || i == k { 0.5 } else { 1.0 };
                    push(a + i as f64 * h, half * h);
                }
            }
        }
    }
    (nodes, weights)
}

/// Monte Carlo of the left-hand side, `⟨h'', X⟩` by [`path_rule`].
pub fn lhs_mc(dim: &Dimension<f64>, phi: &ExpFunctional<f64>, h: &TestFunctionH<f64>, mc: &McSettings) -> Result<(f64, f64)> {
    let (nodes, weights) = path_rule(mc.grid_points, &atom_locations(phi), |r| h.second_derivative(r));
    let grid = sampler::merge_points(&nodes, &atom_locations(phi));
    let xs = sampler::map_paths(
        mc.paths,
        mc.seed,
        |rng| sampler::sample_bessel_bridge(dim.delta(), &grid, rng),
        |p| {
            let hxx: f64 = nodes.iter().zip(&weights).map(|(&r, w)| w * p.value_at(r).unwrap_or(f64::NAN)).sum();
            lhs_integrand_with(phi, h, p, hxx)
        },
    )?;
    Ok(mean_and_standard_error(&xs))
}

/// Classical drift form for `δ >= 3`. For `δ > 3`: Monte Carlo of
/// `-κ(δ) ⟨h, X^{-3}⟩ Φ(X)`, the `dr` integral by [`path_rule`]. For `δ = 3`: the conditioned form
/// `-∫ h_r E³[Φ | X_r = 0] (2π r³(1-r)³)^{-1/2} dr` by quadrature (SE 0).
pub fn rhs_classical(
    dim: &Dimension<f64>,
    phi: &ExpFunctional<f64>,
    h: &TestFunctionH<f64>,
    mc: &McSettings,
) -> Result<(f64, f64)> {
    let delta = dim.delta();
    if delta < 3.0 {
        return Err(Error::Domain(format!("rhs_classical needs δ >= 3, got {delta}")));
    }
    if delta == 3.0 {
        let conditioned = |r: f64| -> Result<f64> {
            let mut e = 0.0;
            for (g, sol) in phi.terms() {
                e += g * laws::conditional_laplace(dim, sol, r, 0.0)?;
            }
            let v = r * (1.0 - r);
            Ok(e / (2.0 * std::f64::consts::PI * v * v * v).sqrt())
        };
        return Ok((-integrate_fallible(h, conditioned, &phi.knots())?, 0.0));
    }
    let xs = classical_samples(dim, phi, h, mc)?;
    Ok(mean_and_standard_error(&xs))
}

/// Per-path values of `-κ(δ) ⟨h, X^{-3}⟩ Φ(X)`, path `i` from stream `(seed, i)`.
pub fn classical_samples(
    dim: &Dimension<f64>,
    phi: &ExpFunctional<f64>,
    h: &TestFunctionH<f64>,
    mc: &McSettings,
) -> Result<Vec<f64>> {
    let (nodes, weights) = path_rule(mc.grid_points, &atom_locations(phi), |r| h.value(r));
    let grid = sampler::merge_points(&nodes, &atom_locations(phi));
    let kappa = dim.kappa();
    sampler::map_paths(
        mc.paths,
        mc.seed,
        |rng| sampler::sample_bessel_bridge(dim.delta(), &grid, rng),
        |p| {
            let hx: f64 = nodes
                .iter()
                .zip(&weights)
                .map(|(&r, w)| w * p.value_at(r).unwrap_or(f64::NAN).powi(-3))
                .sum();
            -kappa * hx * sampler::functional_value(phi, p)
        },
    )
}

/// `|∫ √(ψψ̂)(h'' dr - 2h m(dr)) + ¼ ψ_1² ∫ h (ψψ̂)^{-3/2} dr|`.
pub fn skeleton_check(sol: &OdeSolution<f64>, h: &TestFunctionH<f64>) -> Result<f64> {
    let kinks = sol.knots();
    let (lo, hi) = h.support();
    let pts = quad::breakpoints(lo, hi, &kinks);
    let root = |r: f64| sol.product(r).sqrt();
    let a = quad::integrate_with_points(|r| root(r) * h.second_derivative(r), &pts, &outer_tol())?;
    let mut extra = kinks.clone();
    extra.extend([lo, hi]);
    let b = sol.measure().integrate_with(|r| h.value(r) * root(r), &outer_tol(), &extra);
    let c = 0.25 * sol.psi_1().powi(2) * h.integrate_against(|r| sol.product(r).powf(-1.5), &kinks, &outer_tol())?;
    Ok((a - 2.0 * b + c).abs())
}

/// The reference functionals `Φ` of the verification suite.
pub fn standard_functionals() -> Vec<(&'static str, ExpFunctional<f64>)> {
    let leb = FiniteMeasure::lebesgue(0.5).expect("valid");
    let atom = FiniteMeasure::atom(0.5, 1.0).expect("valid");
    let mixed = FiniteMeasure::new(vec![(0.7, 0.5)], vec![0.0, 0.4, 1.0], vec![1.0, 0.0]).expect("valid");
    let atom2 = FiniteMeasure::atom(0.25, 2.0).expect("valid");
    vec![
        ("one", ExpFunctional::one()),
        ("leb_half", ExpFunctional::single(leb).expect("valid")),
        ("atom_half", ExpFunctional::single(atom).expect("valid")),
        ("combo", ExpFunctional::new(vec![(0.7, mixed), (0.3, atom2)]).expect("valid")),
    ]
}

/// The reference test functions `h`.
pub fn standard_h() -> Vec<(&'static str, TestFunctionH<f64>)> {
    vec![("poly", TestFunctionH::standard_poly()), ("bump", TestFunctionH::centered_bump())]
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Route {
    LhsClosed,
    LhsMc,
    RhsQuadrature,
    RhsUnified,
    RhsSpecial,
    RhsClassical,
}

impl Route {
    pub fn name(&self) -> &'static str {
        match self {
            Route::LhsClosed => "lhs_closed",
            Route::LhsMc => "lhs_mc",
            Route::RhsQuadrature => "rhs_quadrature",
            Route::RhsUnified => "rhs_unified",
            Route::RhsSpecial => "rhs_special",
            Route::RhsClassical => "rhs_classical",
        }
    }
}

/// One evaluated route: value with its standard error (Monte Carlo) or the
/// deterministic tolerance it is held to.
#[derive(Clone, Copy, Debug)]
pub struct RouteValue {
    pub route: Route,
    pub value: f64,
    pub se_or_tol: f64,
    pub stochastic: bool,
}

#[derive(Clone, Debug)]
pub struct IbpfReport {
    pub delta: f64,
    pub phi_id: String,
    pub h_id: String,
    pub routes: Vec<RouteValue>,
}

impl IbpfReport {
    pub fn get(&self, route: Route) -> Option<f64> {
        self.routes.iter().find(|v| v.route == route).map(|v| v.value)
    }

    pub fn lhs_closed(&self) -> f64 {
        self.get(Route::LhsClosed).unwrap_or(f64::NAN)
    }

    /// `value - lhs_closed` per route.
    pub fn residual(&self, v: &RouteValue) -> f64 {
        v.value - self.lhs_closed()
    }

    /// Pairwise differences `routes[i] - routes[j]`.
    pub fn residual_matrix(&self) -> Vec<Vec<f64>> {
        self.routes
            .iter()
            .map(|a| self.routes.iter().map(|b| a.value - b.value).collect())
            .collect()
    }

    /// Deterministic routes within their tolerance of `lhs_closed`, Monte
    /// Carlo routes within 3 standard errors.
    pub fn passed(&self) -> bool {
        self.routes.iter().all(|v| {
            let r = self.residual(v).abs();
            let bound = if v.stochastic { 3.0 * v.se_or_tol } else { v.se_or_tol };
            r.is_finite() && r <= bound
        })
    }
}

/// Runs every applicable route for `(δ, Φ, h)`.
pub fn verify(
    dim: &Dimension<f64>,
    phi: (&str, &ExpFunctional<f64>),
    h: (&str, &TestFunctionH<f64>),
    tolerance: f64,
    mc: Option<&McSettings>,
) -> Result<IbpfReport> {
    let delta = dim.delta();
    let (f, t) = (phi.1, h.1);
    let det = |route, value| RouteValue { route, value, se_or_tol: tolerance, stochastic: false };
    let mut routes = vec![RouteValue { route: Route::LhsClosed, value: lhs_closed(dim, f, t)?, se_or_tol: 0.0, stochastic: false }];
    if !dim.is_critical() {
        routes.push(det(Route::RhsQuadrature, rhs_quadrature(dim, f, t)?));
    } else {
        routes.push(det(Route::RhsSpecial, rhs_special(dim, f, t)?));
    }
    if delta != 2.0 {
        routes.push(det(Route::RhsUnified, rhs_unified(dim, f, t)?));
    }
    if delta == 3.0 {
        let (v, _) = rhs_classical(dim, f, t, &McSettings { paths: 0, grid_points: 0, seed: 0 })?;
        routes.push(det(Route::RhsClassical, v));
    }
    if let Some(mc) = mc {
        let (v, se) = lhs_mc(dim, f, t, mc)?;
        routes.push(RouteValue { route: Route::LhsMc, value: v, se_or_tol: se, stochastic: true });
        if delta > 3.0 {
            let (v, se) = rhs_classical(dim, f, t, mc)?;
            routes.push(RouteValue { route: Route::RhsClassical, value: v, se_or_tol: se, stochastic: true });
        }
    }
    Ok(IbpfReport { delta, phi_id: phi.0.to_string(), h_id: h.0.to_string(), routes })
}

/// Rows `(delta, phi_id, h_id, route, value, se_or_tol, residual_vs_lhs_closed)`.
pub fn write_ibpf_csv<W: std::io::Write>(reports: &[IbpfReport], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["delta", "phi_id", "h_id", "route", "value", "se_or_tol", "residual_vs_lhs_closed"])?;
    for rep in reports {
        for v in &rep.routes {
            w.write_record([
                fmt(rep.delta),
                rep.phi_id.clone(),
                rep.h_id.clone(),
                v.route.name().to_string(),
                fmt(v.value),
                fmt(v.se_or_tol),
                fmt(rep.residual(v)),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn closed_lhs_reference_values() {
        let one = ExpFunctional::one();
        let h = TestFunctionH::standard_poly();
        let v3 = lhs_closed(&Dimension::new(3.0).unwrap(), &one, &h).unwrap();
        let expect3 = -std::f64::consts::PI / 8.0 / (2.0 * std::f64::consts::PI).sqrt();
        assert!((v3 - expect3).abs() < 1e-10, "{v3} vs {expect3}");
        assert!((v3 + 0.156_663_2).abs() < 5e-6);
        let v1 = lhs_closed(&Dimension::new(1.0).unwrap(), &one, &h).unwrap();
        let expect1 = -std::f64::consts::PI / 8.0 / (2.0 * std::f64::consts::SQRT_2 * std::f64::consts::PI.sqrt());
        assert!((v1 - expect1).abs() < 1e-10, "{v1} vs {expect1}");
        assert!((v1 + 0.078_331_6).abs() < 5e-6);
    }

    #[test]
    fn special_route_refuses_other_dimensions() {
        let one = ExpFunctional::one();
        let h = TestFunctionH::standard_poly();
        assert!(rhs_special(&Dimension::new(2.0).unwrap(), &one, &h).is_err());
        assert!(rhs_quadrature(&Dimension::new(1.0).unwrap(), &one, &h).is_err());
        assert!(rhs_unified(&Dimension::new(2.0).unwrap(), &one, &h).is_err());
    }
}
