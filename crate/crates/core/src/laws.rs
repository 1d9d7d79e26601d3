//! Closed-form laws of Bessel and squared Bessel processes and bridges, the
//! pinned-bridge weights `Σ^δ_r`, and exact expectations of exponential
//! functionals `Φ(X) = Σ γ_i exp(-⟨m_i, X²⟩)`.

use crate::error::{Error, Result};
use crate::measures::FiniteMeasure;
use crate::num::Real;
use crate::ode::{self, OdeSolution};
use crate::renorm::ScalarTestFunction;
use crate::specfun;

/// Dimension `δ > 0` with its derived constants.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dimension<T> {
    delta: T,
}

impl<T: Real> Dimension<T> {
    pub fn new(delta: T) -> Result<Self> {
        if !(delta > T::zero()) || !delta.is_finite() {
            return Err(Error::Domain(format!("dimension must be positive, got {delta:?}")));
        }
        Ok(Self { delta })
    }

    pub fn delta(&self) -> T {
        self.delta
    }

    /// `ν = δ/2 - 1`.
    pub fn nu(&self) -> T {
        self.delta * T::c(0.5) - T::one()
    }

    /// `κ(δ) = (δ-3)(δ-1)/4`.
    pub fn kappa(&self) -> T {
        (self.delta - T::c(3.0)) * (self.delta - T::one()) * T::c(0.25)
    }

    /// `k = ⌊(3-δ)/2⌋`.
    pub fn k(&self) -> i64 {
        ((T::c(3.0) - self.delta) * T::c(0.5)).floor().to_i64().unwrap_or(0)
    }

    /// `δ ∈ {1, 3}`.
    pub fn is_critical(&self) -> bool {
        self.delta == T::one() || self.delta == T::c(3.0)
    }
}

/// `Φ(X) = Σ γ_i exp(-⟨m_i, X²⟩)` with one cached ODE solution per term.
#[derive(Clone, Debug)]
pub struct ExpFunctional<T> {
    terms: Vec<(T, OdeSolution<T>)>,
}

impl<T: Real> ExpFunctional<T> {
    pub fn new(terms: Vec<(T, FiniteMeasure<T>)>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("functional needs at least one term".into()));
        }
        let mut solved: Vec<(T, OdeSolution<T>)> = Vec::with_capacity(terms.len());
        for (gamma, m) in terms {
            if !gamma.is_finite() {
                return Err(Error::InvalidArgument(format!("coefficient {gamma:?} is not finite")));
            }
            let sol = match solved.iter().find(|(_, s)| s.measure() == &m) {
                Some((_, s)) => s.clone(),
                None => ode::solve(&m)?,
            };
            solved.push((gamma, sol));
        }
        Ok(Self { terms: solved })
    }

    /// `Φ ≡ 1`.
    pub fn one() -> Self {
        Self::single(FiniteMeasure::zero()).expect("zero measure is valid")
    }

    /// `exp(-⟨m, X²⟩)`.
    pub fn single(m: FiniteMeasure<T>) -> Result<Self> {
        Self::new(vec![(T::one(), m)])
    }

    pub fn terms(&self) -> &[(T, OdeSolution<T>)] {
        &self.terms
    }

    /// Knots of all term measures.
    pub fn knots(&self) -> Vec<T> {
        let mut k: Vec<T> = self.terms.iter().flat_map(|(_, s)| s.knots()).collect();
        k.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
        k.dedup();
        k
    }

    /// `Φ` evaluated on a path given `⟨m_i, X²⟩` for each term.
    pub fn evaluate(&self, quadratic: &[T]) -> T {
        self.terms
            .iter()
            .zip(quadratic)
            .fold(T::zero(), |s, ((g, _), &q)| s + *g * (-q).exp())
    }
}

/// `ln(2^{1-δ/2} / Γ(δ/2))`.
fn ln_sigma_prefactor<T: Real>(dim: &Dimension<T>) -> Result<T> {
    let half = dim.delta * T::c(0.5);
    Ok((T::one() - half) * T::LN_2() - specfun::ln_gamma(half)?)
}

/// `q^δ_t(x, y)`, the squared Bessel transition density.
pub fn besq_transition<T: Real>(dim: &Dimension<T>, t: T, x: T, y: T) -> Result<T> {
    if !(t > T::zero()) || x < T::zero() || !(y > T::zero()) {
        return Err(Error::Domain(format!("besq_transition(t={t:?}, x={x:?}, y={y:?})")));
    }
    let half = dim.delta * T::c(0.5);
    let two_t = T::c(2.0) * t;
    if x == T::zero() {
        let ln = -half * two_t.ln() - specfun::ln_gamma(half)? + (half - T::one()) * y.ln() - y / two_t;
        return Ok(ln.exp());
    }
    let nu = dim.nu();
    let z = (x * y).sqrt() / t;
    let scaled = specfun::bessel_i_scaled(nu, z)?;
    // -(x+y)/(2t) + z = -(√x - √y)²/(2t)
    let d = x.sqrt() - y.sqrt();
    let ln = -two_t.ln() + nu * T::c(0.5) * (y / x).ln() - d * d / two_t;
    Ok(ln.exp() * scaled)
}

/// `p^δ_t(a, b) = 2b q^δ_t(a², b²)`.
pub fn bessel_transition<T: Real>(dim: &Dimension<T>, t: T, a: T, b: T) -> Result<T> {
    Ok(T::c(2.0) * b * besq_transition(dim, t, a * a, b * b)?)
}

/// Density of the Bessel bridge `X_r` at `a`.
pub fn bridge_marginal<T: Real>(dim: &Dimension<T>, r: T, a: T) -> Result<T> {
    check_time(r)?;
    if a < T::zero() {
        return Ok(T::zero());
    }
    let half = dim.delta * T::c(0.5);
    let v = r * (T::one() - r);
    if a == T::zero() {
        let one = dim.delta == T::one();
        if dim.delta > T::one() {
            return Ok(T::zero());
        }
        if !one {
            return Ok(T::infinity());
        }
    }
    let ln_a = if a == T::zero() { T::zero() } else { (dim.delta - T::one()) * a.ln() };
    let ln = ln_a - a * a / (T::c(2.0) * v)
        - (half - T::one()) * T::LN_2()
        - specfun::ln_gamma(half)?
        - half * v.ln();
    Ok(ln.exp())
}

/// Density of the squared Bessel bridge `X_r` at `z`: Gamma(δ/2, rate 1/(2r(1-r))).
pub fn bridge_marginal_squared<T: Real>(dim: &Dimension<T>, r: T, z: T) -> Result<T> {
    check_time(r)?;
    if z < T::zero() {
        return Ok(T::zero());
    }
    let half = dim.delta * T::c(0.5);
    let scale = T::c(2.0) * r * (T::one() - r);
    if z == T::zero() {
        if dim.delta > T::c(2.0) {
            return Ok(T::zero());
        }
        if dim.delta < T::c(2.0) {
            return Ok(T::infinity());
        }
        return Ok(T::one() / scale);
    }
    let ln = (half - T::one()) * z.ln() - z / scale - specfun::ln_gamma(half)? - half * scale.ln();
    Ok(ln.exp())
}

fn check_time<T: Real>(r: T) -> Result<()> {
    if !(r > T::zero() && r < T::one()) {
        return Err(Error::Domain(format!("time {r:?} must lie in (0, 1)")));
    }
    Ok(())
}

/// `Σ^δ_r(exp(-⟨m, X²⟩) | a) = 2^{1-δ/2}/Γ(δ/2) exp(-a² C_r/2) D_r^{δ/2}`.
pub fn sigma_eval<T: Real>(dim: &Dimension<T>, sol: &OdeSolution<T>, r: T, a: T) -> Result<T> {
    let (amp, c) = sigma_gaussian(dim, sol, r)?;
    Ok(amp * (-a * a * c * T::c(0.5)).exp())
}

/// `(A, C)` such that `Σ^δ_r(·|a) = A exp(-C a²/2)`.
fn sigma_gaussian<T: Real>(dim: &Dimension<T>, sol: &OdeSolution<T>, r: T) -> Result<(T, T)> {
    check_time(r)?;
    let ln_d = -sol.product(r).ln();
    let amp = (ln_sigma_prefactor(dim)? + dim.delta * T::c(0.5) * ln_d).exp();
    Ok((amp, sol.c(r)))
}

/// `Σ^δ_r(Φ | a)` for a functional: coefficient-weighted sum over terms.
pub fn sigma_functional<T: Real>(dim: &Dimension<T>, phi: &ExpFunctional<T>, r: T, a: T) -> Result<T> {
    let mut s = T::zero();
    for (g, sol) in phi.terms() {
        s = s + *g * sigma_eval(dim, sol, r, a)?;
    }
    Ok(s)
}

/// `(A_i, C_i)` for every term of `Φ` at time `r`, coefficients folded into `A_i`.
pub fn sigma_mixture<T: Real>(dim: &Dimension<T>, phi: &ExpFunctional<T>, r: T) -> Result<Vec<(T, T)>> {
    phi.terms()
        .iter()
        .map(|(g, sol)| sigma_gaussian(dim, sol, r).map(|(a, c)| (*g * a, c)))
        .collect()
}

/// `a ↦ Σ^δ_r(Φ | a)` as a test function on `[0, ∞)`.
pub fn sigma_test_function<T: Real>(
    dim: &Dimension<T>,
    phi: &ExpFunctional<T>,
    r: T,
) -> Result<ScalarTestFunction<T>> {
    ScalarTestFunction::gaussian_mixture(&sigma_mixture(dim, phi, r)?)
}

/// `d²/da² Σ^δ_r(Φ | a)` at `a = 0`, i.e. `-Σ_i C_r Σ_i(0)`.
pub fn sigma_second_derivative_at_zero<T: Real>(
    dim: &Dimension<T>,
    phi: &ExpFunctional<T>,
    r: T,
) -> Result<T> {
    Ok(sigma_mixture(dim, phi, r)?
        .iter()
        .fold(T::zero(), |s, &(a, c)| s - a * c))
}

/// `E^δ[exp(-⟨m, X²⟩) | X_r = a]`.
pub fn conditional_laplace<T: Real>(dim: &Dimension<T>, sol: &OdeSolution<T>, r: T, a: T) -> Result<T> {
    check_time(r)?;
    let v = r * (T::one() - r);
    let expo = -(a * a * T::c(0.5)) * (sol.c(r) - T::one() / v);
    let base = v * sol.d(r);
    Ok((expo + dim.delta * T::c(0.5) * base.ln()).exp())
}

/// `E^δ[Φ(X)] = Σ γ_i ψ_1(m_i)^{-δ/2}`.
pub fn bridge_expectation<T: Real>(dim: &Dimension<T>, phi: &ExpFunctional<T>) -> T {
    phi.terms()
        .iter()
        .fold(T::zero(), |s, (g, sol)| s + *g * sol.psi_1().powf(-dim.delta * T::c(0.5)))
}

/// `E^δ[X_r exp(-⟨m, X²⟩)]`.
pub fn weighted_first_moment<T: Real>(dim: &Dimension<T>, sol: &OdeSolution<T>, r: T) -> Result<T> {
    check_time(r)?;
    let half = dim.delta * T::c(0.5);
    let ln_ratio = specfun::ln_gamma(half + T::c(0.5))? - specfun::ln_gamma(half)?;
    let ln = T::c(0.5) * T::LN_2() + ln_ratio - (half + T::c(0.5)) * sol.psi_1().ln()
        + T::c(0.5) * sol.product(r).ln();
    Ok(ln.exp())
}
