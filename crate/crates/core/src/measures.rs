//! Finite measures on `[0, 1]` (atoms plus a piecewise-constant density) and
//! the test functions `h` that drive the integration-by-parts formulae.

use crate::error::{Error, Result};
use crate::num::Real;
use crate::poly::Poly;
use crate::quad::{self, Tolerance};

/// Nonnegative finite measure `Σ w_i δ_{r_i} + c(r) dr` on `[0, 1]`.
#[derive(Clone, Debug, PartialEq)]
pub struct FiniteMeasure<T> {
    atoms: Vec<(T, T)>,
    breaks: Vec<T>,
    values: Vec<T>,
}

impl<T: Real> FiniteMeasure<T> {
    /// Validates and builds a measure. `breaks` runs from 0 to 1 and `values`
    /// holds one density value per piece. Atoms sit strictly inside `(0, 1)`.
    pub fn new(atoms: Vec<(T, T)>, breaks: Vec<T>, values: Vec<T>) -> Result<Self> {
        for w in atoms.windows(2) {
            if !(w[1].0 > w[0].0) {
                return Err(Error::InvalidMeasure("atom locations must be strictly increasing".into()));
            }
        }
        for &(r, w) in &atoms {
            if !(r > T::zero() && r < T::one()) {
                return Err(Error::InvalidMeasure(format!(
                    "atom at {r:?} is not in the open interval (0, 1)"
                )));
            }
            if !(w >= T::zero()) || !w.is_finite() {
                return Err(Error::InvalidMeasure(format!("atom weight {w:?} must be finite and >= 0")));
            }
        }
        if breaks.len() < 2 || values.len() + 1 != breaks.len() {
            return Err(Error::InvalidMeasure(
                "density needs breaks 0 = b_0 < ... < b_M = 1 and one value per piece".into(),
            ));
        }
        if breaks[0] != T::zero() || *breaks.last().unwrap() != T::one() {
            return Err(Error::InvalidMeasure("density breaks must start at 0 and end at 1".into()));
        }
        for w in breaks.windows(2) {
            if !(w[1] > w[0]) {
                return Err(Error::InvalidMeasure("density breaks must be strictly increasing".into()));
            }
        }
        for &c in &values {
            if !(c >= T::zero()) || !c.is_finite() {
                return Err(Error::InvalidMeasure(format!("density value {c:?} must be finite and >= 0")));
            }
        }
        Ok(Self { atoms, breaks, values })
    }

    pub fn zero() -> Self {
        Self { atoms: vec![], breaks: vec![T::zero(), T::one()], values: vec![T::zero()] }
    }

    /// `lambda` times Lebesgue measure.
    pub fn lebesgue(lambda: T) -> Result<Self> {
        Self::new(vec![], vec![T::zero(), T::one()], vec![lambda])
    }

    pub fn atom(r: T, w: T) -> Result<Self> {
        Self::new(vec![(r, w)], vec![T::zero(), T::one()], vec![T::zero()])
    }

    /// Same density, with an extra atom merged in (weights add on coincidence).
    pub fn with_atom(mut self, r: T, w: T) -> Result<Self> {
        match self.atoms.iter_mut().find(|(x, _)| *x == r) {
            Some(a) => a.1 = a.1 + w,
            None => self.atoms.push((r, w)),
        }
        self.atoms
            .sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(std::cmp::Ordering::Equal));
        Self::new(self.atoms, self.breaks, self.values)
    }

    pub fn atoms(&self) -> &[(T, T)] {
        &self.atoms
    }

    pub fn breaks(&self) -> &[T] {
        &self.breaks
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn is_zero(&self) -> bool {
        self.atoms.iter().all(|a| a.1 == T::zero()) && self.values.iter().all(|c| *c == T::zero())
    }

    /// Density value on the piece containing `r` (right-continuous).
    pub fn density_at(&self, r: T) -> T {
        let i = self.breaks.partition_point(|&b| b <= r);
        let i = i.clamp(1, self.values.len());
        self.values[i - 1]
    }

    /// Interior density breakpoints and atom locations, sorted and deduplicated.
    pub fn knots(&self) -> Vec<T> {
        let interior: Vec<T> = self.breaks[1..self.breaks.len() - 1]
            .iter()
            .copied()
            .chain(self.atoms.iter().map(|a| a.0))
            .collect();
        let pts = quad::breakpoints(T::zero(), T::one(), &interior);
        pts[1..pts.len() - 1].to_vec()
    }

    pub fn total_mass(&self) -> T {
        let atoms = self.atoms.iter().fold(T::zero(), |s, a| s + a.1);
        self.breaks
            .windows(2)
            .zip(&self.values)
            .fold(atoms, |s, (b, &c)| s + c * (b[1] - b[0]))
    }

    /// `⟨m, f⟩`; the density part by adaptive quadrature to absolute `1e-10`
    /// (the best estimate is returned even if that is not reached).
    pub fn integrate<F: Fn(T) -> T>(&self, f: F) -> T {
        self.integrate_with(f, &Tolerance::absolute(T::c(1e-10)), &[])
    }

    /// `⟨m, f⟩` with an explicit tolerance and additional breakpoints for `f`.
    pub fn integrate_with<F: Fn(T) -> T>(&self, f: F, tol: &Tolerance<T>, extra: &[T]) -> T {
        let mut sum = self.atoms.iter().fold(T::zero(), |s, &(r, w)| s + w * f(r));
        for (b, &c) in self.breaks.windows(2).zip(&self.values) {
            if c == T::zero() {
                continue;
            }
            let pts = quad::breakpoints(b[0], b[1], extra);
            sum = sum + c * quad::adaptive(&f, &pts, tol).value;
        }
        sum
    }

    /// `⟨m, f⟩` for `f` the piecewise-linear interpolant of `(times, values)`,
    /// computed exactly (the interpolant is linear on every density piece
    /// after splitting at the nodes).
    pub fn integrate_interpolant(&self, times: &[T], values: &[T]) -> T {
        let eval = |r: T| interpolate(times, values, r);
        let mut sum = self.atoms.iter().fold(T::zero(), |s, &(r, w)| s + w * eval(r));
        for (b, &c) in self.breaks.windows(2).zip(&self.values) {
            if c == T::zero() {
                continue;
            }
            let pts = quad::breakpoints(b[0], b[1], times);
            let mut piece = T::zero();
            for w in pts.windows(2) {
                piece = piece + T::c(0.5) * (w[1] - w[0]) * (eval(w[0]) + eval(w[1]));
            }
            sum = sum + c * piece;
        }
        sum
    }
}

/// Piecewise-linear interpolation on sorted nodes (constant extrapolation).
pub fn interpolate<T: Real>(times: &[T], values: &[T], r: T) -> T {
    let n = times.len();
    if n == 0 {
        return T::zero();
    }
    if r <= times[0] {
        return values[0];
    }
    if r >= times[n - 1] {
        return values[n - 1];
    }
    let i = times.partition_point(|&t| t <= r);
    let (t0, t1) = (times[i - 1], times[i]);
    let (v0, v1) = (values[i - 1], values[i]);
    if t1 == t0 {
        return v1;
    }
    v0 + (v1 - v0) * (r - t0) / (t1 - t0)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum HFamily {
    /// `r^2 (1-r)^2 q(r)` on `[0, 1]`.
    Poly,
    /// `((r-a)(b-r))^4 / ((b-a)/2)^8` on `(a, b)`, zero outside.
    Bump,
}

/// Test function `h` on `[0, 1]` with its second derivative.
#[derive(Clone, Debug)]
pub struct TestFunctionH<T> {
    family: HFamily,
    lo: T,
    hi: T,
    p: Poly<T>,
    d1: Poly<T>,
    d2: Poly<T>,
}

impl<T: Real> TestFunctionH<T> {
    fn from_poly(family: HFamily, lo: T, hi: T, p: Poly<T>) -> Self {
        let d1 = p.derivative();
        let d2 = d1.derivative();
        Self { family, lo, hi, p, d1, d2 }
    }

    /// `r^2 (1-r)^2 q(r)` with `q` given by ascending coefficients.
    pub fn poly(q: &[T]) -> Result<Self> {
        if q.is_empty() || q.iter().any(|c| !c.is_finite()) {
            return Err(Error::InvalidArgument("poly h needs finite coefficients".into()));
        }
        let r = Poly::new(vec![T::zero(), T::one()]);
        let one_minus_r = Poly::new(vec![T::one(), -T::one()]);
        let base = &r.pow(2) * &one_minus_r.pow(2);
        let p = &base * &Poly::new(q.to_vec());
        Ok(Self::from_poly(HFamily::Poly, T::zero(), T::one(), p))
    }

    /// The standard `r^2 (1-r)^2`.
    pub fn standard_poly() -> Self {
        Self::poly(&[T::one()]).expect("constant polynomial is valid")
    }

    pub fn bump(a: T, b: T) -> Result<Self> {
        if !(a > T::zero() && b < T::one() && a < b) {
            return Err(Error::InvalidArgument(format!(
                "bump support ({a:?}, {b:?}) must satisfy 0 < a < b < 1"
            )));
        }
        let half = T::c(0.5) * (b - a);
        let lin = Poly::new(vec![-a * b, a + b, -T::one()]); // (r-a)(b-r)
        let p = lin.pow(4).scale(T::one() / half.powi(8));
        Ok(Self::from_poly(HFamily::Bump, a, b, p))
    }

    /// Bump centered on `1/2` over `[0.25, 0.75]`.
    pub fn centered_bump() -> Self {
        Self::bump(T::c(0.25), T::c(0.75)).expect("fixed support is valid")
    }

    pub fn family(&self) -> HFamily {
        self.family
    }

    /// Closed support `[lo, hi]`.
    pub fn support(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    fn inside(&self, r: T) -> bool {
        r >= self.lo && r <= self.hi
    }

    pub fn value(&self, r: T) -> T {
        if self.inside(r) {
            self.p.eval(r)
        } else {
            T::zero()
        }
    }

    pub fn derivative(&self, r: T) -> T {
        if self.inside(r) {
            self.d1.eval(r)
        } else {
            T::zero()
        }
    }

    pub fn second_derivative(&self, r: T) -> T {
        if self.inside(r) {
            self.d2.eval(r)
        } else {
            T::zero()
        }
    }

    /// Copy with every value multiplied by `c`.
    pub fn scaled(&self, c: T) -> Self {
        Self::from_poly(self.family, self.lo, self.hi, self.p.scale(c))
    }

    /// `∫_0^1 h_r f(r) dr` for `f` possibly blowing up like `(r(1-r))^{-3/2}`
    /// at the endpoints. Poly family: substitution `r = sin^2(θ/2)`; bump
    /// family: integration over the support. `kinks` are points in `(0,1)`
    /// where `f` is not smooth.
    pub fn integrate_against<F: Fn(T) -> T>(&self, f: F, kinks: &[T], tol: &Tolerance<T>) -> Result<T> {
        match self.family {
            HFamily::Poly => {
                let half = T::c(0.5);
                let g = |theta: T| {
                    let s = (half * theta).sin();
                    let r = s * s;
                    let w = self.value(r);
                    if w == T::zero() {
                        return T::zero();
                    }
                    w * f(r) * half * theta.sin()
                };
                let thetas: Vec<T> = kinks.iter().map(|&r| T::c(2.0) * r.sqrt().asin()).collect();
                let pts = quad::breakpoints(T::zero(), T::PI(), &thetas);
                quad::integrate_with_points(g, &pts, tol)
            }
            HFamily::Bump => {
                let pts = quad::breakpoints(self.lo, self.hi, kinks);
                quad::integrate_with_points(|r| self.p.eval(r) * f(r), &pts, tol)
            }
        }
    }
}
