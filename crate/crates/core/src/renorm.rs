//! Renormalized distributions `μ_α` on `[0, ∞)`: Taylor remainders, pairings
//! `⟨μ_α, φ⟩` for every real `α`, and renormalized Gamma integrals.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::poly::Poly;
use crate::quad::{self, Tolerance};
use crate::specfun;

/// Number of Taylor coefficients kept at the base point 0.
const TAYLOR_LEN: usize = 64;

/// Integer branch of `pair_mu` takes over within this distance of `0, -1, -2, ...`.
pub const POLE_GUARD: f64 = 1e-9;

/// Below `e^{-745}` a double underflows to zero.
const UNDERFLOW_EXPONENT: f64 = 745.0;

/// `p(x) exp(-λx - c x^2 / 2)` with `λ, c >= 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpPolyTerm<T> {
    pub poly: Poly<T>,
    pub lambda: T,
    pub c: T,
}

impl<T: Real> ExpPolyTerm<T> {
    fn value(&self, x: T) -> T {
        self.poly.eval(x) * (-self.lambda * x - self.c * x * x * T::c(0.5)).exp()
    }

    /// `(p' - (λ + c x) p) exp(...)`.
    fn derivative(&self) -> Self {
        let g = Poly::new(vec![self.lambda, self.c]);
        let dp = &self.poly.derivative() + &(&g * &self.poly).scale(-T::one());
        Self { poly: dp, lambda: self.lambda, c: self.c }
    }
}

/// Test function in `S([0, ∞))`: a finite sum of polynomial times
/// exponential/Gaussian terms. Closed under differentiation; all derivatives
/// are analytic.
#[derive(Clone, Debug)]
pub struct ScalarTestFunction<T> {
    terms: Vec<ExpPolyTerm<T>>,
    /// Length unit `u = min(1, 1/scale)`.
    unit: T,
    /// Taylor coefficients of `y ↦ φ(u y)` at 0.
    scaled_taylor: Vec<T>,
}

impl<T: Real> ScalarTestFunction<T> {
    pub fn new(terms: Vec<ExpPolyTerm<T>>) -> Result<Self> {
        if terms.is_empty() {
            return Err(Error::InvalidArgument("test function needs at least one term".into()));
        }
        for t in &terms {
            let ok = t.lambda >= T::zero() && t.c >= T::zero() && (t.lambda > T::zero() || t.c > T::zero());
            if !ok || !t.lambda.is_finite() || !t.c.is_finite() {
                return Err(Error::InvalidArgument(format!(
                    "term with lambda = {:?}, c = {:?} does not decay",
                    t.lambda, t.c
                )));
            }
        }
        let scale = terms
            .iter()
            .fold(T::zero(), |s, t| s.max(t.lambda).max(t.c.sqrt()));
        let unit = T::one().min(T::one() / scale);
        let mut scaled_taylor = vec![T::zero(); TAYLOR_LEN];
        for t in &terms {
            // e(y) = exp(-λu y - c u^2 y^2/2):  (j+1) e_{j+1} = -λu e_j - c u^2 e_{j-1}
            let (a, b) = (t.lambda * unit, t.c * unit * unit);
            let mut e = [T::zero(); TAYLOR_LEN];
            e[0] = T::one();
            for j in 0..TAYLOR_LEN - 1 {
                let prev = if j > 0 { e[j - 1] } else { T::zero() };
                e[j + 1] = (-a * e[j] - b * prev) / T::from_usize_(j + 1);
            }
            let mut upow = T::one();
            for (i, &p) in t.poly.coeffs().iter().enumerate() {
                let pi = p * upow;
                upow = upow * unit;
                if pi == T::zero() {
                    continue;
                }
                for j in 0..TAYLOR_LEN - i {
                    scaled_taylor[i + j] = scaled_taylor[i + j] + pi * e[j];
                }
            }
        }
        Ok(Self { terms, unit, scaled_taylor })
    }

    /// `x ↦ e^{-λx}`.
    pub fn exponential(lambda: T) -> Result<Self> {
        Self::new(vec![ExpPolyTerm { poly: Poly::constant(T::one()), lambda, c: T::zero() }])
    }

    /// `x ↦ e^{-C x^2 / 2}`.
    pub fn gaussian(c: T) -> Result<Self> {
        Self::new(vec![ExpPolyTerm { poly: Poly::constant(T::one()), lambda: T::zero(), c }])
    }

    /// `x ↦ p(x) e^{-C x^2 / 2}`.
    pub fn poly_gaussian(poly: Poly<T>, c: T) -> Result<Self> {
        Self::new(vec![ExpPolyTerm { poly, lambda: T::zero(), c }])
    }

    /// `Σ_i A_i e^{-C_i x^2 / 2}`.
    pub fn gaussian_mixture(weights_and_rates: &[(T, T)]) -> Result<Self> {
        Self::new(
            weights_and_rates
                .iter()
                .map(|&(a, c)| ExpPolyTerm { poly: Poly::constant(a), lambda: T::zero(), c })
                .collect(),
        )
    }

    /// The four reference functions used by the verification suite.
    pub fn builtins() -> Vec<(&'static str, Self)> {
        let one = T::one();
        let exp_poly = ExpPolyTerm { poly: Poly::new(vec![one, T::c(-0.5), T::c(0.25)]), lambda: T::c(1.5), c: T::zero() };
        let mixed = vec![
            ExpPolyTerm { poly: Poly::constant(T::c(0.6)), lambda: T::c(0.5), c: T::zero() },
            ExpPolyTerm { poly: Poly::new(vec![T::c(0.4), T::zero(), one]), lambda: T::zero(), c: T::c(2.0) },
        ];
        vec![
            ("exp", Self::exponential(one).expect("valid")),
            ("gauss", Self::gaussian(one).expect("valid")),
            ("poly_exp", Self::new(vec![exp_poly]).expect("valid")),
            ("mixed", Self::new(mixed).expect("valid")),
        ]
    }

    pub fn terms(&self) -> &[ExpPolyTerm<T>] {
        &self.terms
    }

    /// Highest derivative order whose value at 0 is available.
    pub fn max_order(&self) -> usize {
        TAYLOR_LEN - 1
    }

    pub fn value(&self, x: T) -> T {
        self.terms.iter().fold(T::zero(), |s, t| s + t.value(x))
    }

    /// The derivative as a test function of the same kind.
    pub fn derivative(&self) -> Self {
        Self::new(self.terms.iter().map(ExpPolyTerm::derivative).collect())
            .expect("differentiation keeps the decay rates")
    }

    /// `φ^{(k)}(x)`.
    pub fn derivative_at(&self, k: usize, x: T) -> T {
        if k == 0 {
            return self.value(x);
        }
        let mut d = self.terms.clone();
        for _ in 0..k {
            d = d.iter().map(ExpPolyTerm::derivative).collect();
        }
        d.iter().fold(T::zero(), |s, t| s + t.value(x))
    }

    /// `φ^{(j)}(0) / j!`.
    pub fn taylor_coefficient(&self, j: usize) -> T {
        if j >= TAYLOR_LEN {
            return T::zero();
        }
        self.scaled_taylor[j] / self.unit.powi(j as i32)
    }

    /// `φ^{(k)}(0)`.
    pub fn derivative_at_zero(&self, k: usize) -> T {
        let fact = (1..=k).fold(T::one(), |f, i| f * T::from_usize_(i));
        self.taylor_coefficient(k) * fact
    }

    /// `Σ_{j > n} φ^{(j)}(0) x^j / j!` summed from the stored series; accurate for `x <= unit`.
    fn tail_series(&self, n: i64, x: T) -> T {
        let y = x / self.unit;
        let start = (n + 1).max(0) as usize;
        let mut s = T::zero();
        for j in (start..TAYLOR_LEN).rev() {
            s = s * y + self.scaled_taylor[j];
        }
        s * y.powi(start as i32)
    }

    fn taylor_polynomial(&self, n: i64, x: T) -> T {
        if n < 0 {
            return T::zero();
        }
        let mut s = T::zero();
        for j in (0..=n as usize).rev() {
            s = s * x + self.taylor_coefficient(j);
        }
        s
    }

    /// Point `A` beyond which every term is below `e^{-745}` times its polynomial.
    fn negligible_from(&self) -> T {
        let mut a = T::one();
        for t in &self.terms {
            let mut x = T::one();
            let poly_size = |x: T| {
                t.poly
                    .coeffs()
                    .iter()
                    .fold(T::zero(), |s, &c| s * x + c.abs())
                    .max(T::min_positive_value())
                    .ln()
            };
            while t.lambda * x + t.c * x * x * T::c(0.5) - poly_size(x) < T::c(UNDERFLOW_EXPONENT) {
                x = x * T::c(2.0);
            }
            a = a.max(x);
        }
        a
    }
}

/// `𝒯ⁿ_x φ = φ(x) - Σ_{0<=j<=n} x^j φ^{(j)}(0)/j!`; the plain value for `n < 0`.
pub fn taylor_remainder<T: Real>(phi: &ScalarTestFunction<T>, n: i64, x: T) -> T {
    if n < 0 {
        return phi.value(x);
    }
    if x <= phi.unit {
        phi.tail_series(n, x)
    } else {
        phi.value(x) - phi.taylor_polynomial(n, x)
    }
}

/// `∫_0^∞ x^β 𝒯ⁿ_x φ dx`, convergent when the first nonzero Taylor order
/// `j > n` has `β + j + 1 > 0` and `β + n + 1 < 0` (for `n >= 0`).
///
/// Pieces: `[0, x0]` termwise from the Taylor series; `[x0, 1]` adaptive
/// Gauss–Kronrod on the remainder; `[1, ∞)` the `φ` part by Gauss–Kronrod in
/// `x = e^t` up to the underflow point and the subtracted polynomial exactly.
pub fn renormalized_integral<T: Real>(
    phi: &ScalarTestFunction<T>,
    beta: T,
    n: i64,
    tol: &Tolerance<T>,
) -> Result<T> {
    let half = T::c(0.5);
    let x0 = phi.unit * half;
    // [0, x0]
    let start = (n + 1).max(0) as usize;
    let ln_x0 = x0.ln();
    let mut near = T::zero();
    for j in start..TAYLOR_LEN {
        let b = phi.scaled_taylor[j];
        if b == T::zero() {
            continue;
        }
        let e = beta + T::from_usize_(j) + T::one();
        if e <= T::zero() {
            return Err(Error::Domain(format!(
                "x^{beta:?} times the order-{j} Taylor term is not integrable at 0"
            )));
        }
        // a_j x0^{β+j+1} / (β+j+1) with a_j x0^j = b_j 2^{-j}
        near = near + b * half.powi(j as i32) * ((beta + T::one()) * ln_x0).exp() / e;
    }
    // [x0, 1]
    let mid = if x0 < T::one() {
        quad::integrate(|x: T| x.powf(beta) * taylor_remainder(phi, n, x), x0, T::one(), tol)?
    } else {
        T::zero()
    };
    // [1, ∞)
    let a = phi.negligible_from();
    let smooth = quad::integrate(
        |t: T| {
            let x = t.exp();
            ((beta + T::one()) * t).exp() * phi.value(x)
        },
        T::zero(),
        a.ln(),
        tol,
    )?;
    let mut poly_tail = T::zero();
    if n >= 0 {
        for j in 0..=n as usize {
            let e = beta + T::from_usize_(j) + T::one();
            let aj = phi.taylor_coefficient(j);
            if aj == T::zero() {
                continue;
            }
            if e >= T::zero() {
                return Err(Error::Domain(format!(
                    "x^{beta:?} times the order-{j} Taylor term is not integrable at infinity"
                )));
            }
            // -∫_1^∞ a_j x^{β+j} dx = a_j / (β+j+1)
            poly_tail = poly_tail + aj / e;
        }
    }
    Ok(near + mid + smooth + poly_tail)
}

/// Default accuracy of pairings: absolute `1e-10` plus a relative floor.
pub fn default_tolerance<T: Real>() -> Tolerance<T> {
    Tolerance::new(T::c(1e-10), T::c(1e-12))
}

/// `⟨μ_α, φ⟩`.
pub fn pair_mu<T: Real>(alpha: T, phi: &ScalarTestFunction<T>) -> Result<T> {
    pair_mu_with(alpha, phi, &default_tolerance())
}

pub fn pair_mu_with<T: Real>(alpha: T, phi: &ScalarTestFunction<T>, tol: &Tolerance<T>) -> Result<T> {
    if !alpha.is_finite() {
        return Err(Error::Domain(format!("alpha = {alpha:?}")));
    }
    let nearest = alpha.round();
    if nearest <= T::zero() && (alpha - nearest).abs() < T::c(POLE_GUARD) {
        let k = (-nearest).to_usize().unwrap_or(0);
        if k > phi.max_order() {
            return Err(Error::Domain(format!("derivative of order {k} not available")));
        }
        let sign = if k.is_multiple_of(2) { T::one() } else { -T::one() };
        return Ok(sign * phi.derivative_at_zero(k));
    }
    let n = if alpha > T::zero() {
        -1
    } else {
        (-alpha).floor().to_i64().unwrap_or(0)
    };
    let integral = renormalized_integral(phi, alpha - T::one(), n, tol)?;
    Ok(integral / specfun::gamma(alpha)?)
}

/// `2^{1-x} ∫_0^∞ a^{2x-1} 𝒯^{2⌊-x⌋}_a(e^{-C a^2/2}) da`, which equals `Γ(x) C^{-x}`.
pub fn renorm_gamma_integral<T: Real>(x: T, c: T) -> Result<T> {
    if !(c > T::zero()) {
        return Err(Error::Domain(format!("C = {c:?} must be positive")));
    }
    if x <= T::zero() && x == x.round() {
        return Err(Error::Pole { x: x.f64() });
    }
    let n = 2 * (-x).floor().to_i64().unwrap_or(0);
    let phi = ScalarTestFunction::gaussian(c)?;
    let integral = renormalized_integral(&phi, T::c(2.0) * x - T::one(), n, &default_tolerance())?;
    Ok(T::c(2.0).powf(T::one() - x) * integral)
}
