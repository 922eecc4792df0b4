//! Scale functions, exit identities and the killed resolvent density.
//!
//! `W^(q)(x) ~ e^{Φ(q)x}/ψ'(Φ(q))` grows quickly, so every identity that only
//! needs ratios or differences is evaluated in tilted form, with `e^{Φ(q)x}`
//! factored out (or cancelled) symbolically before anything is exponentiated.
//! Raw `W^(q)(x)` refuses to overflow instead of returning infinity.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{LevyModel, Variation};
use crate::roots::ScaleBasis;

/// Largest `Φ(q)·x` for which raw `W^(q)(x)` is returned.
pub const OVERFLOW_GUARD: f64 = 700.0;

/// `W^(q)` and friends for a fixed `q`.
#[derive(Debug, Clone)]
pub struct ScaleFunction {
    basis: ScaleBasis,
}

/// `e^z − 1` without cancellation for small `|z|`.
pub(crate) fn expm1_c(z: Complex64) -> Complex64 {
    if z.im == 0.0 {
        return Complex64::new(z.re.exp_m1(), 0.0);
    }
    let half = (0.5 * z.im).sin();
    Complex64::new(z.re.exp_m1() * z.im.cos() - 2.0 * half * half, z.re.exp() * z.im.sin())
}

/// `(1 − e^{−ξx})/ξ`, with limit `x` at `ξ = 0`.
fn one_minus_exp_over(xi: Complex64, x: f64) -> Complex64 {
    if xi.norm() == 0.0 {
        Complex64::new(x, 0.0)
    } else {
        -expm1_c(-xi * x) / xi
    }
}

impl ScaleFunction {
    pub fn new(basis: ScaleBasis) -> Self {
        Self { basis }
    }

    pub fn from_model(model: &LevyModel, q: f64) -> Result<Self> {
        ScaleBasis::new(model, q).map(Self::new)
    }

    pub fn basis(&self) -> &ScaleBasis {
        &self.basis
    }

    fn q(&self) -> f64 {
        self.basis.q()
    }

    fn phi(&self) -> f64 {
        self.basis.phi()
    }

    fn lead(&self) -> f64 {
        1.0 / self.basis.dpsi_at_phi()
    }

    /// `Σ C_i e^{−ξ_i x}`, real part.
    fn decaying(&self, x: f64) -> f64 {
        self.basis
            .terms()
            .map(|(r, c)| c * (-r.value() * x).exp())
            .sum::<Complex64>()
            .re
    }

    /// `e^{−Φ(q)x} W^(q)(x)`; zero for `x < 0`.
    pub fn w_tilted(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let phi = self.phi();
        let tail: Complex64 = self
            .basis
            .terms()
            .map(|(r, c)| c * (-(r.value() + phi) * x).exp())
            .sum();
        self.lead() - tail.re
    }

    /// `W^(q)(x)`.
    pub fn w(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let exponent = self.phi() * x;
        if exponent > OVERFLOW_GUARD {
            return Err(Error::Overflow { x, exponent });
        }
        Ok(exponent.exp() * self.lead() - self.decaying(x))
    }

    /// `ln W^(q)(x)` for `x > 0`, valid far beyond the overflow guard.
    pub fn ln_w(&self, x: f64) -> f64 {
        if x < 0.0 {
            return f64::NEG_INFINITY;
        }
        self.phi() * x + self.w_tilted(x).ln()
    }

    /// Termwise derivative `W^(q)'(x)` for `x ≥ 0` (right derivative at 0).
    pub fn w_prime(&self, x: f64) -> Result<f64> {
        if x < 0.0 {
            return Ok(0.0);
        }
        let exponent = self.phi() * x;
        if exponent > OVERFLOW_GUARD {
            return Err(Error::Overflow { x, exponent });
        }
        Ok(self.phi() * exponent.exp() * self.lead() + self.decaying_derivative(x))
    }

    fn decaying_derivative(&self, x: f64) -> f64 {
        self.basis
            .terms()
            .map(|(r, c)| c * r.value() * (-r.value() * x).exp())
            .sum::<Complex64>()
            .re
    }

    /// `e^{−Φ(q)x} W^(q)'(x)`.
    pub fn w_prime_tilted(&self, x: f64) -> f64 {
        let phi = self.phi();
        let tail: Complex64 = self
            .basis
            .terms()
            .map(|(r, c)| c * r.value() * (-(r.value() + phi) * x).exp())
            .sum();
        phi * self.lead() + tail.re
    }

    /// The known boundary value `W^(q)'(0+)`: `2/σ²` with a Gaussian part,
    /// `(q + λ)/μ²` for compound Poisson claims.
    pub fn w_prime_at_zero(&self) -> f64 {
        let m = self.basis.model();
        match m.variation() {
            Variation::Unbounded => 2.0 / (m.sigma() * m.sigma()),
            Variation::Bounded => (self.q() + m.lambda()) / (m.mu() * m.mu()),
        }
    }

    /// `Z^(q)(x) = 1 + q ∫_0^x W^(q)(y) dy`, termwise.
    pub fn z(&self, x: f64) -> Result<f64> {
        if x <= 0.0 {
            return Ok(1.0);
        }
        let exponent = self.phi() * x;
        if exponent > OVERFLOW_GUARD {
            return Err(Error::Overflow { x, exponent });
        }
        let grow = self.lead() * exponent.exp_m1() / self.phi();
        Ok(1.0 + self.q() * (grow - self.integrated_decaying(x)))
    }

    /// `Σ C_i (1 − e^{−ξ_i x})/ξ_i`.
    fn integrated_decaying(&self, x: f64) -> f64 {
        self.basis
            .terms()
            .map(|(r, c)| c * one_minus_exp_over(r.value(), x))
            .sum::<Complex64>()
            .re
    }

    /// `e^{−Φ(q)x} Z^(q)(x)`.
    pub fn z_tilted(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return (-self.phi() * x.max(0.0)).exp();
        }
        let phi = self.phi();
        let damp = (-phi * x).exp();
        let grow = self.lead() * -(-phi * x).exp_m1() / phi;
        damp + self.q() * (grow - damp * self.integrated_decaying(x))
    }

    /// `ln Z^(q)(x)`.
    pub fn ln_z(&self, x: f64) -> f64 {
        if x <= 0.0 {
            return 0.0;
        }
        self.phi() * x + self.z_tilted(x).ln()
    }

    fn check_window(x: f64, b: f64) -> Result<()> {
        if !(b > 0.0) || !(x >= 0.0) || x > b {
            return Err(Error::Domain(format!("need 0 ≤ x ≤ b and b > 0, got x = {x}, b = {b}")));
        }
        Ok(())
    }

    /// `E^x[e^{−qτ_b^+}; τ_b^+ < τ_0^−] = W(x)/W(b)`.
    pub fn exit_up(&self, x: f64, b: f64) -> Result<f64> {
        Self::check_window(x, b)?;
        if x == b {
            return Ok(1.0);
        }
        let denom = self.w_tilted(b);
        Ok((self.phi() * (x - b)).exp() * self.w_tilted(x) / denom)
    }

    /// `E^x[e^{−qτ_0^−}; τ_0^− < τ_b^+] = Z(x) − Z(b)W(x)/W(b)`, evaluated
    /// as `E^x[e^{−qτ_0^−}] − (W(x)/W(b))·E^b[e^{−qτ_0^−}]` (no upward jumps,
    /// so the process sits exactly at `b` when it first exceeds it).
    pub fn exit_down(&self, x: f64, b: f64) -> Result<f64> {
        Self::check_window(x, b)?;
        if x == b {
            return Ok(0.0);
        }
        Ok(self.ruin_laplace(x) - self.exit_up(x, b)? * self.ruin_laplace(b))
    }

    /// `E^x[e^{−qτ_0^−}] = Z(x) − (q/Φ(q))W(x)` with the growing exponential
    /// cancelled analytically. Equal to one for `x < 0`.
    pub fn ruin_laplace(&self, x: f64) -> f64 {
        if x < 0.0 {
            return 1.0;
        }
        let (q, phi) = (self.q(), self.phi());
        1.0 - q * self.lead() / phi - q * self.integrated_decaying(x) + q / phi * self.decaying(x)
    }

    /// Creeping part `E^x[e^{−qτ_0^−}; X_{τ_0^−} = 0] = (σ²/2)(W'(x) − Φ W(x))`.
    pub fn creeping_laplace(&self, x: f64) -> f64 {
        let m = self.basis.model();
        if m.sigma() == 0.0 {
            return 0.0;
        }
        if x <= 0.0 {
            return 1.0;
        }
        let phi = self.phi();
        let sum: Complex64 = self
            .basis
            .terms()
            .map(|(r, c)| c * (r.value() + phi) * (-r.value() * x).exp())
            .sum();
        0.5 * m.sigma() * m.sigma() * sum.re
    }

    /// Density of the `q`-resolvent of the process killed below zero,
    /// `r(x, z) = e^{−Φ(q)z} W(x) − W(x − z)`.
    pub fn resolvent_density(&self, x: f64, z: f64) -> Result<f64> {
        if !(x > 0.0 && z > 0.0) {
            return Err(Error::Domain(format!("resolvent needs x, z > 0, got ({x}, {z})")));
        }
        Ok(self.resolvent_unchecked(x, z))
    }

    pub(crate) fn resolvent_unchecked(&self, x: f64, z: f64) -> f64 {
        let phi = self.phi();
        if z <= x {
            // the e^{Φ(x−z)}/ψ'(Φ) parts cancel
            self.decaying(x - z) - (-phi * z).exp() * self.decaying(x)
        } else {
            (phi * (x - z)).exp() * self.lead() - (-phi * z).exp() * self.decaying(x)
        }
    }

    /// Termwise Laplace transform `∫_0^∞ e^{−sx} W(x) dx` for `s > Φ(q)`.
    pub fn laplace_transform(&self, s: f64) -> Result<f64> {
        if !(s > self.phi()) {
            return Err(Error::Domain(format!("transform needs s > Φ(q) = {}", self.phi())));
        }
        let tail: Complex64 = self.basis.terms().map(|(r, c)| c / (s + r.value())).sum();
        Ok(self.lead() / (s - self.phi()) - tail.re)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::JumpLaw;
    use crate::quadrature::integrate;

    fn sf(sigma: f64) -> ScaleFunction {
        let m = LevyModel::new(1.0, sigma, 10.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        ScaleFunction::from_model(&m, 0.05).unwrap()
    }

    // quadratic-root oracle for the σ = 0 exponential model at q = 0.05
    fn oracle() -> (f64, f64, f64, f64) {
        let q: f64 = 0.05;
        let b = 9.0 + q;
        let disc = (b * b + 4.0 * q).sqrt();
        let (phi, xi) = ((b + disc) / 2.0, (disc - b) / 2.0);
        // ψ'(s) = 1 − 10/(1+s)²
        let lead = 1.0 / (1.0 - 10.0 / (1.0 + phi).powi(2));
        let c = -1.0 / (1.0 - 10.0 / (1.0 - xi).powi(2));
        (phi, xi, lead, c)
    }

    #[test]
    fn w_boundary_and_values() {
        let s = sf(0.0);
        assert!((s.w(0.0).unwrap() - 1.0).abs() < 1e-12);
        assert_eq!(s.w(-3.0).unwrap(), 0.0);
        let (phi, xi, lead, c) = oracle();
        let expect = lead * phi.exp() - c * (-xi).exp();
        assert!((s.w(1.0).unwrap() - expect).abs() < 1e-12 * expect);
        assert!(s.w(100.0).is_err());
        assert!((s.ln_w(100.0) - (100.0 * phi + (lead - c * (-(xi + phi) * 100.0f64).exp()).ln())).abs() < 1e-12);
        assert!(sf(1.0).w(0.0).unwrap().abs() < 1e-14);
    }

    #[test]
    fn w_matches_numerical_laplace_inversion_check() {
        // the closed form's transform agrees with 1/(ψ(s) − q) computed
        // independently by quadrature of w itself
        let s = sf(0.0);
        let phi = s.basis().phi();
        for shift in [1.0, 3.0, 5.0] {
            let t = phi + shift;
            let num = integrate(|x| (-t * x).exp() * s.w(x).unwrap(), 0.0, 60.0 / shift, 1e-13).value;
            let psi = s.basis().model().psi_real(t).unwrap();
            assert!((num - 1.0 / (psi - 0.05)).abs() < 1e-9 * num, "{num}");
        }
    }

    #[test]
    fn derivative_at_zero() {
        let s0 = sf(0.0);
        assert!((s0.w_prime_at_zero() - 10.05).abs() < 1e-12);
        assert!((s0.w_prime(0.0).unwrap() - 10.05).abs() < 1e-10);
        let s1 = sf(1.0);
        assert_eq!(s1.w_prime_at_zero(), 2.0);
        assert!((s1.w_prime(0.0).unwrap() - 2.0).abs() < 1e-10);
        for s in [&s0, &s1] {
            let (x, h) = (1e-6, 1e-6);
            let fd = (s.w(x + h).unwrap() - s.w(x - h).unwrap()) / (2.0 * h);
            let exact = s.w_prime(x).unwrap();
            assert!((fd - exact).abs() < 1e-4 * exact, "{fd} vs {exact}");
        }
    }

    #[test]
    fn z_values() {
        let s = sf(0.0);
        assert_eq!(s.z(0.0).unwrap(), 1.0);
        assert_eq!(s.z(-2.0).unwrap(), 1.0);
        let (phi, xi, lead, c) = oracle();
        let expect = 1.0 + 0.05 * (lead * ((phi * 5.0).exp() - 1.0) / phi - c * (1.0 - (-5.0 * xi).exp()) / xi);
        assert!((s.z(5.0).unwrap() - expect).abs() < 1e-12 * expect);
        let quad = 1.0 + 0.05 * integrate(|y| s.w(y).unwrap(), 0.0, 5.0, 1e-6).value;
        assert!((s.z(5.0).unwrap() - quad).abs() < 1e-10 * expect);
        assert!((s.z_tilted(5.0) - expect * (-phi * 5.0).exp()).abs() < 1e-13);
    }

    #[test]
    fn ruin_laplace_fixture() {
        let s = sf(0.0);
        let (phi, xi, lead, c) = oracle();
        let x = 5.0;
        let hand = 1.0 - xi * lead - c * phi * (1.0 - (-x * xi).exp()) + xi * c * (-x * xi).exp();
        assert!((s.ruin_laplace(x) - hand).abs() < 1e-12);
        assert!((s.ruin_laplace(x) - 0.96740).abs() < 5e-5);
        // x = 0: Z(0) − (q/Φ)W(0) = 1 − q/(Φμ)
        assert!((s.ruin_laplace(0.0) - (1.0 - 0.05 / phi)).abs() < 1e-12);
        // direct Z − (q/Φ)W agrees at moderate x
        let direct = s.z(2.0).unwrap() - 0.05 / phi * s.w(2.0).unwrap();
        assert!((direct - s.ruin_laplace(2.0)).abs() < 1e-9);
    }

    #[test]
    fn exit_identities() {
        for s in [sf(0.0), sf(1.0)] {
            assert_eq!(s.exit_up(3.0, 3.0).unwrap(), 1.0);
            assert_eq!(s.exit_down(3.0, 3.0).unwrap(), 0.0);
            assert!(s.exit_up(-1.0, 3.0).is_err());
            assert!(s.exit_up(4.0, 3.0).is_err());
            let direct = s.w(1.0).unwrap() / s.w(2.0).unwrap();
            assert!((s.exit_up(1.0, 2.0).unwrap() - direct).abs() < 1e-13);
            let zform = s.z(1.0).unwrap() - s.z(2.0).unwrap() * direct;
            assert!((s.exit_down(1.0, 2.0).unwrap() - zform).abs() < 1e-9);
            // far beyond the overflow guard the tilted forms still work
            let up = s.exit_up(100.0, 101.0).unwrap();
            assert!(up > 0.0 && up < 1.0);
        }
    }

    #[test]
    fn creeping_vanishes_without_gaussian_part() {
        assert_eq!(sf(0.0).creeping_laplace(2.0), 0.0);
        let s = sf(1.0);
        let c = s.creeping_laplace(2.0);
        assert!(c > 0.0 && c < s.ruin_laplace(2.0));
        assert!((s.creeping_laplace(1e-12) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn resolvent_values() {
        for s in [sf(0.0), sf(1.0)] {
            let x = 2.0;
            let phi = s.basis().phi();
            let r = s.resolvent_density(x, 3.0).unwrap();
            assert!((r - (-phi * 3.0).exp() * s.w(x).unwrap()).abs() < 1e-14);
            let direct = (-phi * 0.5).exp() * s.w(x).unwrap() - s.w(x - 0.5).unwrap();
            assert!((s.resolvent_density(x, 0.5).unwrap() - direct).abs() < 1e-9);
            assert!(s.resolvent_density(0.0, 1.0).is_err());
            // occupation mass = (1 − E^x[e^{−qτ}])/q, by quadrature
            let mass = integrate(|z| s.resolvent_unchecked(x, z), 0.0, x, 1e-13).value
                + integrate(|z| s.resolvent_unchecked(x, z), x, x + 10.0, 1e-13).value;
            let expect = (1.0 - s.ruin_laplace(x)) / 0.05;
            assert!((mass - expect).abs() < 1e-9 * expect, "{mass} vs {expect}");
        }
    }
}
