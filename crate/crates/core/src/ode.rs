//! Exact solutions of `u''(dr) = 2 u(r) m(dr)` on `[0, 1]` for measures made
//! of atoms and a piecewise-constant density.

use crate::error::{Error, Result};
use crate::measures::FiniteMeasure;
use crate::num::Real;

/// A piece `[start, end)` of constant density with the solution state
/// `(u, u')` at its left end (right derivative).
#[derive(Clone, Copy, Debug)]
struct Piece<T> {
    start: T,
    end: T,
    density: T,
    u: T,
    du: T,
}

/// Propagate `(u, u')` across a distance `dx` inside a piece of constant density `c`.
fn propagate<T: Real>(c: T, u: T, du: T, dx: T) -> (T, T) {
    if c == T::zero() {
        return (u + du * dx, du);
    }
    let omega = (T::c(2.0) * c).sqrt();
    let (s, ch) = ((omega * dx).sinh(), (omega * dx).cosh());
    (u * ch + du * s / omega, u * omega * s + du * ch)
}

/// Piece layout of a measure: knots are density breaks and atom locations.
fn layout<T: Real>(m: &FiniteMeasure<T>) -> (Vec<T>, Vec<T>, Vec<T>) {
    let mut edges = vec![T::zero()];
    edges.extend(m.knots());
    edges.push(T::one());
    let densities = edges[..edges.len() - 1].iter().map(|&r| m.density_at(r)).collect();
    // atom weight at the left edge of each piece (zero for the first piece)
    let jumps = edges[..edges.len() - 1]
        .iter()
        .map(|&r| {
            m.atoms()
                .iter()
                .find(|a| a.0 == r)
                .map_or(T::zero(), |a| a.1)
        })
        .collect();
    (edges, densities, jumps)
}

/// A solution stored piecewise; evaluation is exact inside each piece.
#[derive(Clone, Debug)]
struct Piecewise<T> {
    pieces: Vec<Piece<T>>,
}

impl<T: Real> Piecewise<T> {
    fn forward(m: &FiniteMeasure<T>, u0: T, du0: T) -> Self {
        let (edges, densities, jumps) = layout(m);
        let mut pieces = Vec::with_capacity(densities.len());
        let (mut u, mut du) = (u0, du0);
        for i in 0..densities.len() {
            // the atom at the left edge acts after the previous density piece
            du = du + T::c(2.0) * jumps[i] * u;
            pieces.push(Piece { start: edges[i], end: edges[i + 1], density: densities[i], u, du });
            (u, du) = propagate(densities[i], u, du, edges[i + 1] - edges[i]);
        }
        Self { pieces }
    }

    /// From `(u, u'_-)` at `r = 1`, integrating towards 0.
    fn backward(m: &FiniteMeasure<T>, u1: T, du1: T) -> Self {
        let (edges, densities, jumps) = layout(m);
        let n = densities.len();
        let mut pieces = vec![
            Piece { start: T::zero(), end: T::zero(), density: T::zero(), u: T::zero(), du: T::zero() };
            n
        ];
        let (mut u, mut du) = (u1, du1);
        for i in (0..n).rev() {
            let (us, dus) = propagate(densities[i], u, du, edges[i] - edges[i + 1]);
            pieces[i] = Piece { start: edges[i], end: edges[i + 1], density: densities[i], u: us, du: dus };
            // crossing the atom at the left edge: u'(r-) = u'(r+) - 2 w u(r)
            u = us;
            du = dus - T::c(2.0) * jumps[i] * us;
        }
        Self { pieces }
    }

    fn piece(&self, r: T) -> &Piece<T> {
        let i = self.pieces.partition_point(|p| p.start <= r);
        &self.pieces[i.clamp(1, self.pieces.len()) - 1]
    }

    fn eval(&self, r: T) -> (T, T) {
        let p = self.piece(r);
        propagate(p.density, p.u, p.du, r - p.start)
    }

    fn end_state(&self) -> (T, T) {
        let p = self.pieces.last().expect("at least one piece");
        propagate(p.density, p.u, p.du, p.end - p.start)
    }
}

/// `ψ`, `ψ̂` and derived kernels for a measure `m`.
#[derive(Clone, Debug)]
pub struct OdeSolution<T> {
    measure: FiniteMeasure<T>,
    psi: Piecewise<T>,
    psi_hat: Piecewise<T>,
    psi_1: T,
}

/// Solve for `ψ` (forward from `ψ_0 = 0, ψ'_0 = 1`) and `ψ̂` (backward from
/// `ψ̂_1 = 0, ψ̂'_1 = -1`).
pub fn solve<T: Real>(m: &FiniteMeasure<T>) -> Result<OdeSolution<T>> {
    if m.atoms().iter().any(|a| a.0 <= T::zero() || a.0 >= T::one()) {
        return Err(Error::InvalidMeasure("atoms at the endpoints 0 or 1 are not supported".into()));
    }
    let psi = Piecewise::forward(m, T::zero(), T::one());
    let psi_hat = Piecewise::backward(m, T::zero(), -T::one());
    let psi_1 = psi.end_state().0;
    Ok(OdeSolution { measure: m.clone(), psi, psi_hat, psi_1 })
}

impl<T: Real> OdeSolution<T> {
    pub fn measure(&self) -> &FiniteMeasure<T> {
        &self.measure
    }

    pub fn psi(&self, r: T) -> T {
        self.psi.eval(r).0
    }

    /// Right derivative (left derivative at `r = 1`).
    pub fn psi_prime(&self, r: T) -> T {
        self.psi.eval(r).1
    }

    pub fn psi_hat(&self, r: T) -> T {
        self.psi_hat.eval(r).0
    }

    /// Right derivative (left derivative at `r = 1`).
    pub fn psi_hat_prime(&self, r: T) -> T {
        self.psi_hat.eval(r).1
    }

    pub fn psi_1(&self) -> T {
        self.psi_1
    }

    /// `ψ_r ψ̂_r`.
    pub fn product(&self, r: T) -> T {
        self.psi(r) * self.psi_hat(r)
    }

    /// `C_r = ψ_1 / (ψ_r ψ̂_r)`.
    pub fn c(&self, r: T) -> T {
        self.psi_1 / self.product(r)
    }

    /// `D_r = 1 / (ψ_r ψ̂_r)`.
    pub fn d(&self, r: T) -> T {
        T::one() / self.product(r)
    }

    /// Points in `(0, 1)` where derivatives of the solution jump or the density changes.
    pub fn knots(&self) -> Vec<T> {
        self.measure.knots()
    }
}

/// `φ` with `φ_0 = 1`, `φ'_1 = 0`.
#[derive(Clone, Debug)]
pub struct PhiSolution<T> {
    phi: Piecewise<T>,
    slope_at_zero: T,
}

impl<T: Real> PhiSolution<T> {
    pub fn phi(&self, r: T) -> T {
        self.phi.eval(r).0
    }

    pub fn phi_prime(&self, r: T) -> T {
        self.phi.eval(r).1
    }

    pub fn slope_at_zero(&self) -> T {
        self.slope_at_zero
    }
}

const SHOOTING_ITERATIONS: usize = 200;

/// Boundary-value problem `φ'' = 2φm`, `φ_0 = 1`, `φ'_1 = 0` by bisection
/// shooting on `φ'_0 ∈ [-2M e^{2M}, 0]`, `M` the total mass.
pub fn solve_phi<T: Real>(m: &FiniteMeasure<T>) -> Result<PhiSolution<T>> {
    let tol = T::c(1e-12);
    let shoot = |s: T| Piecewise::forward(m, T::one(), s);
    let end_slope = |s: T| shoot(s).end_state().1;
    let mass = m.total_mass();
    let mut hi = T::zero();
    let mut lo = -T::c(2.0) * mass * (T::c(2.0) * mass).exp();
    let f_hi = end_slope(hi);
    if f_hi.abs() <= tol {
        return Ok(PhiSolution { phi: shoot(hi), slope_at_zero: hi });
    }
    let f_lo = end_slope(lo);
    if f_lo.abs() <= tol {
        return Ok(PhiSolution { phi: shoot(lo), slope_at_zero: lo });
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Shooting { iterations: 0, residual: f_lo.abs().min(f_hi.abs()).f64() });
    }
    let increasing = f_hi > f_lo;
    let mut residual = f_hi.abs();
    for _ in 0..SHOOTING_ITERATIONS {
        let mid = T::c(0.5) * (lo + hi);
        let f = end_slope(mid);
        residual = f.abs();
        if residual <= tol {
            return Ok(PhiSolution { phi: shoot(mid), slope_at_zero: mid });
        }
        if (f > T::zero()) == increasing {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Err(Error::Shooting { iterations: SHOOTING_ITERATIONS, residual: residual.f64() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::FiniteMeasure;

    #[test]
    fn zero_measure() {
        let s = solve(&FiniteMeasure::zero()).unwrap();
        assert_eq!(s.psi_1(), 1.0);
        for r in [0.1, 0.5, 0.8] {
            assert!((s.psi(r) - r).abs() < 1e-15);
            assert!((s.psi_hat(r) - (1.0 - r)).abs() < 1e-15);
            assert!((s.c(r) - 1.0 / (r * (1.0 - r))).abs() < 1e-12);
        }
    }

    #[test]
    fn single_atom_by_hand() {
        let s = solve(&FiniteMeasure::atom(0.5, 1.0).unwrap()).unwrap();
        assert!((s.psi_1() - 1.5).abs() < 1e-15);
        assert!((s.psi(0.25) - 0.25).abs() < 1e-15);
        assert!((s.psi(0.75) - 1.0).abs() < 1e-15);
        assert_eq!(s.psi_prime(0.5), 2.0);
        assert_eq!(s.psi_prime(0.4999), 1.0);
    }

    #[test]
    fn phi_for_zero_measure_is_constant() {
        let p = solve_phi(&FiniteMeasure::zero()).unwrap();
        assert_eq!(p.phi(0.3), 1.0);
        assert_eq!(p.slope_at_zero(), 0.0);
    }
}
