//! The Gerber-Shiu measure for hyperexponential claims.
//!
//! With claim law `Σ α_j η_j e^{−η_j u}` the discounted joint law of the
//! deficit `−X_τ` and the pre-ruin surplus `X_{τ−}` factorises per phase:
//!
//! ```text
//! h_q(x; A, B) = λ Σ_j α_j (e^{−η_j a_lo} − e^{−η_j a_hi}) κ_j(x; B),
//! κ_j(x; B)    = ∫_B r^(q)(x, z) e^{−η_j z} dz,
//! ```
//!
//! where `r^(q)` is the resolvent density of the process killed below zero.
//! `κ_j` is an exponential polynomial in the window ends, so windows,
//! marginal densities and their one-sided limits are all closed form. General
//! costs go through nested adaptive quadrature of the same kernel.

use std::cell::Cell;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{HyperExpParams, LevyModel};
use crate::quadrature::{integrate_with_breaks, Quad};
use crate::roots::ScaleBasis;
use crate::scale::{expm1_c, ScaleFunction};

/// Deficit window `A = (−hi, −lo)`, given through the deficit magnitudes
/// `0 ≤ lo ≤ hi ≤ ∞`. `hi = None` is an unbounded window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeficitWindow {
    lo: f64,
    hi: Option<f64>,
}

/// Pre-ruin window `B = (lo, hi)`, `0 ≤ lo ≤ hi ≤ ∞`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PreRuinWindow {
    lo: f64,
    hi: Option<f64>,
}

fn check_window(lo: f64, hi: Option<f64>) -> Result<()> {
    let ok = lo >= 0.0 && lo.is_finite() && hi.is_none_or(|h| h >= lo && !h.is_nan());
    if ok {
        Ok(())
    } else {
        Err(Error::Domain(format!(
            "window needs 0 ≤ lo ≤ hi, got lo = {lo}, hi = {hi:?}"
        )))
    }
}

fn normalise(hi: Option<f64>) -> Option<f64> {
    hi.filter(|h| h.is_finite())
}

macro_rules! window_impl {
    ($t:ident) => {
        impl $t {
            /// `hi = None` or `hi = +∞` means unbounded.
            pub fn new(lo: f64, hi: Option<f64>) -> Result<Self> {
                let hi = normalise(hi);
                check_window(lo, hi)?;
                Ok(Self { lo, hi })
            }

            pub fn bounded(lo: f64, hi: f64) -> Result<Self> {
                Self::new(lo, Some(hi))
            }

            pub fn full() -> Self {
                Self { lo: 0.0, hi: None }
            }

            pub fn lo(&self) -> f64 {
                self.lo
            }

            pub fn hi(&self) -> Option<f64> {
                self.hi
            }

            pub fn contains(&self, v: f64) -> bool {
                v > self.lo && self.hi.is_none_or(|h| v < h)
            }
        }
    };
}

window_impl!(DeficitWindow);
window_impl!(PreRuinWindow);

/// A penalty `f(y, z)` of the deficit position `y ≤ 0` and the pre-ruin
/// surplus `z ≥ 0`.
///
/// Breakpoints are optional hints for the quadrature: deficit magnitudes
/// `|y|` and surplus levels `z` where `f` jumps or kinks.
pub trait CostFunction: Sync {
    fn eval(&self, y: f64, z: f64) -> f64;

    fn deficit_breaks(&self) -> Vec<f64> {
        Vec::new()
    }

    fn pre_ruin_breaks(&self) -> Vec<f64> {
        Vec::new()
    }
}

impl<F: Fn(f64, f64) -> f64 + Sync> CostFunction for F {
    fn eval(&self, y: f64, z: f64) -> f64 {
        self(y, z)
    }
}

/// Named cost families with serialisable parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CostFamily {
    /// `1{−y ∈ (lo, hi)} · 1{z ∈ B}`.
    Indicator {
        deficit: DeficitWindow,
        pre_ruin: PreRuinWindow,
    },
    /// `|y|^p z^r e^{θy}` with `p, r, θ ≥ 0`.
    Power { p: f64, r: f64, theta: f64 },
}

impl CostFamily {
    pub fn power(p: f64, r: f64, theta: f64) -> Result<Self> {
        if [p, r, theta].iter().all(|v| *v >= 0.0 && v.is_finite()) {
            Ok(CostFamily::Power { p, r, theta })
        } else {
            Err(Error::Domain(format!(
                "power cost needs finite p, r, theta ≥ 0, got ({p}, {r}, {theta})"
            )))
        }
    }

    /// Growth of the deficit factor, used to size the truncated tail.
    fn deficit_power(&self) -> f64 {
        match self {
            CostFamily::Power { p, .. } => *p,
            CostFamily::Indicator { .. } => 0.0,
        }
    }
}

impl CostFunction for CostFamily {
    fn eval(&self, y: f64, z: f64) -> f64 {
        match self {
            CostFamily::Indicator { deficit, pre_ruin } => {
                if deficit.contains(-y) && pre_ruin.contains(z) {
                    1.0
                } else {
                    0.0
                }
            }
            CostFamily::Power { p, r, theta } => {
                let mut v = (theta * y).exp();
                if *p != 0.0 {
                    v *= y.abs().powf(*p);
                }
                if *r != 0.0 {
                    v *= z.powf(*r);
                }
                v
            }
        }
    }

    fn deficit_breaks(&self) -> Vec<f64> {
        match self {
            CostFamily::Indicator { deficit, .. } => [Some(deficit.lo), deficit.hi].into_iter().flatten().collect(),
            CostFamily::Power { .. } => Vec::new(),
        }
    }

    fn pre_ruin_breaks(&self) -> Vec<f64> {
        match self {
            CostFamily::Indicator { pre_ruin, .. } => [Some(pre_ruin.lo), pre_ruin.hi].into_iter().flatten().collect(),
            CostFamily::Power { .. } => Vec::new(),
        }
    }
}

/// One Gerber-Shiu evaluation request.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GerberShiuQuery {
    pub x: f64,
    pub q: f64,
    pub deficit: DeficitWindow,
    pub pre_ruin: PreRuinWindow,
    pub cost: Option<CostFamily>,
}

impl GerberShiuQuery {
    /// Full windows and no cost: the discounted ruin mass through jumps.
    pub fn new(x: f64, q: f64) -> Self {
        Self {
            x,
            q,
            deficit: DeficitWindow::full(),
            pre_ruin: PreRuinWindow::full(),
            cost: None,
        }
    }

    pub fn with_deficit(mut self, deficit: DeficitWindow) -> Self {
        self.deficit = deficit;
        self
    }

    pub fn with_pre_ruin(mut self, pre_ruin: PreRuinWindow) -> Self {
        self.pre_ruin = pre_ruin;
        self
    }

    pub fn with_cost(mut self, cost: CostFamily) -> Self {
        self.cost = Some(cost);
        self
    }
}

/// A quadrature value with its absolute error estimate.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct GsEstimate {
    pub value: f64,
    pub error: f64,
}

/// `(e^{e0 − d·u} − e^{e0 − d·v})/d`, with `v = None` meaning `+∞`
/// (requires `Re d > 0`). Stable as `d → 0`, where the limit is `e^{e0}(v − u)`.
fn window_exp(e0: Complex64, d: Complex64, u: f64, v: Option<f64>) -> Complex64 {
    match v {
        None => (e0 - d * u).exp() / d,
        Some(v) if v <= u => Complex64::new(0.0, 0.0),
        Some(v) => {
            let span = v - u;
            if d.norm() == 0.0 {
                return e0.exp() * span;
            }
            let t = -d * span;
            if t.re > 30.0 {
                ((e0 - d * u).exp() - (e0 - d * v).exp()) / d
            } else {
                -(e0 - d * u).exp() * expm1_c(t) / d
            }
        }
    }
}

/// Closed-form Gerber-Shiu measure for one model and discount rate.
#[derive(Debug, Clone)]
pub struct GerberShiu {
    scale: ScaleFunction,
    hyper: HyperExpParams,
}

impl GerberShiu {
    /// Needs hyperexponential (or exponential) claims and `q > 0`.
    pub fn new(basis: ScaleBasis) -> Result<Self> {
        let hyper = basis
            .hyperexp()
            .cloned()
            .ok_or(Error::UnsupportedLaw(basis.model().jumps().name()))?;
        if !(basis.q() > 0.0) {
            return Err(Error::Hypothesis(format!(
                "the Gerber-Shiu measure needs q > 0, got {}",
                basis.q()
            )));
        }
        Ok(Self {
            scale: ScaleFunction::new(basis),
            hyper,
        })
    }

    pub fn from_model(model: &LevyModel, q: f64) -> Result<Self> {
        if !(q > 0.0) {
            return Err(Error::Hypothesis(format!(
                "the Gerber-Shiu measure needs q > 0, got {q}"
            )));
        }
        Self::new(ScaleBasis::new(model, q)?)
    }

    pub fn scale(&self) -> &ScaleFunction {
        &self.scale
    }

    pub fn basis(&self) -> &ScaleBasis {
        self.scale.basis()
    }

    pub fn hyperexp(&self) -> &HyperExpParams {
        &self.hyper
    }

    fn lambda(&self) -> f64 {
        self.basis().model().lambda()
    }

    /// `κ_j(x; B)` for phase `j` (zero-based).
    pub fn kappa(&self, j: usize, x: f64, b: &PreRuinWindow) -> f64 {
        if x < 0.0 {
            return 0.0;
        }
        let basis = self.basis();
        let eta = self.hyper.rates()[j];
        let phi = basis.phi();
        let lift = Complex64::new(eta + phi, 0.0);
        let lead = window_exp(Complex64::new(phi * x, 0.0), lift, b.lo.max(x), b.hi.map(|h| h.max(x))).re
            / basis.dpsi_at_phi();
        let below = (b.lo.min(x), Some(b.hi.map_or(x, |h| h.min(x))));
        let sum: Complex64 = basis
            .terms()
            .map(|(root, c)| {
                let xi = root.value();
                let e0 = -xi * x;
                c * (window_exp(e0, root.gap_to_rate(j, eta), below.0, below.1) - window_exp(e0, lift, b.lo, b.hi))
            })
            .sum();
        lead + sum.re
    }

    /// `κ_j(x; (0, ∞))` in its separately simplified form.
    pub fn kappa_full(&self, j: usize, x: f64) -> f64 {
        let basis = self.basis();
        let eta = self.hyper.rates()[j];
        let phi = basis.phi();
        let lead = (-eta * x).exp() / (basis.dpsi_at_phi() * (eta + phi));
        let sum: Complex64 = basis
            .terms()
            .map(|(root, c)| {
                let e0 = -root.value() * x;
                c * (window_exp(e0, root.gap_to_rate(j, eta), 0.0, Some(x)) - e0.exp() / (eta + phi))
            })
            .sum();
        lead + sum.re
    }

    fn deficit_weight(eta: f64, a: &DeficitWindow) -> f64 {
        let upper = a.hi.map_or(0.0, |h| (-eta * h).exp());
        (-eta * a.lo).exp() - upper
    }

    /// `h_q(x; A, B) = E^x[e^{−qτ}; X_τ ∈ A, X_{τ−} ∈ B, τ < ∞]`.
    pub fn joint_measure(&self, x: f64, a: &DeficitWindow, b: &PreRuinWindow) -> f64 {
        let lambda = self.lambda();
        self.phases()
            .map(|(j, alpha, eta)| {
                let w = Self::deficit_weight(eta, a);
                if w == 0.0 {
                    0.0
                } else {
                    lambda * alpha * w * self.kappa(j, x, b)
                }
            })
            .sum()
    }

    fn phases(&self) -> impl Iterator<Item = (usize, f64, f64)> + '_ {
        self.hyper
            .weights()
            .iter()
            .zip(self.hyper.rates())
            .enumerate()
            .map(|(j, (&a, &e))| (j, a, e))
    }

    /// Density in the deficit `a > 0` of `h_q(x; ·, B)`.
    pub fn overshoot_density(&self, x: f64, a: f64, b: &PreRuinWindow) -> f64 {
        if a < 0.0 {
            return 0.0;
        }
        let lambda = self.lambda();
        self.phases()
            .map(|(j, alpha, eta)| lambda * alpha * eta * (-eta * a).exp() * self.kappa(j, x, b))
            .sum()
    }

    /// Density in the pre-ruin surplus `b > 0` of `h_q(x; A, ·)`. At `b = x`
    /// the right-hand branch is used.
    pub fn undershoot_density(&self, x: f64, b: f64, a: &DeficitWindow) -> f64 {
        if b <= 0.0 || x < 0.0 {
            return 0.0;
        }
        if b < x {
            self.undershoot_below(x, b, a)
        } else {
            self.undershoot_above(x, b, a)
        }
    }

    /// Left and right limits of the undershoot density at `b = x`. They differ
    /// by `λ W(0) Σ α_j e^{−η_j x}(…)`, so only without a Gaussian part.
    pub fn undershoot_limits(&self, x: f64, a: &DeficitWindow) -> (f64, f64) {
        (self.undershoot_below(x, x, a), self.undershoot_above(x, x, a))
    }

    fn undershoot_below(&self, x: f64, b: f64, a: &DeficitWindow) -> f64 {
        let basis = self.basis();
        let phi = basis.phi();
        let lambda = self.lambda();
        self.phases()
            .map(|(j, alpha, eta)| {
                let s: Complex64 = basis
                    .terms()
                    .map(|(root, c)| {
                        let xi = root.value();
                        let near = (-xi * x - root.gap_to_rate(j, eta) * b).exp();
                        let far = (-xi * x - (eta + phi) * b).exp();
                        c * (near - far)
                    })
                    .sum();
                lambda * alpha * Self::deficit_weight(eta, a) * s.re
            })
            .sum()
    }

    fn undershoot_above(&self, x: f64, b: f64, a: &DeficitWindow) -> f64 {
        let basis = self.basis();
        let phi = basis.phi();
        let lambda = self.lambda();
        self.phases()
            .map(|(_, alpha, eta)| {
                let lead = (phi * x - (eta + phi) * b).exp() / basis.dpsi_at_phi();
                let s: Complex64 = basis
                    .terms()
                    .map(|(root, c)| c * (-(root.value() * x) - (eta + phi) * b).exp())
                    .sum();
                lambda * alpha * Self::deficit_weight(eta, a) * (lead - s.re)
            })
            .sum()
    }

    /// `GS_f(x) = ∫∫ f(y, z) K^(q)(x, dy, dz)` by nested adaptive quadrature
    /// of the kernel `Π(dy − z) r^(q)(x, z) dz`. Fails when the error
    /// estimate exceeds `tol`.
    pub fn gs_function(&self, x: f64, cost: &dyn CostFunction, tol: f64) -> Result<GsEstimate> {
        self.gs_with_tail(x, cost, tol, 0.0)
    }

    fn gs_with_tail(&self, x: f64, cost: &dyn CostFunction, tol: f64, growth: f64) -> Result<GsEstimate> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("initial surplus must be positive, got {x}")));
        }
        if !(tol > 0.0) {
            return Err(Error::Domain(format!("tolerance must be positive, got {tol}")));
        }
        let basis = self.basis();
        let (q, phi, lambda) = (basis.q(), basis.phi(), self.lambda());
        // after u = z + v/η the deficit factor is e^{−v}; cut where it is negligible
        let v_max = 40.0 + 10.0 * growth;
        let inner_tol = 0.25 * tol / (lambda * (1.0 / q).max(1.0));
        let outer_tol = 0.5 * tol / lambda;
        let mut total = Quad::ZERO;
        let z_breaks_cost = cost.pre_ruin_breaks();
        let y_breaks_cost = cost.deficit_breaks();
        for (j, alpha, eta) in self.phases() {
            let inner_err = Cell::new(0.0_f64);
            let mut v_breaks: Vec<f64> = y_breaks_cost.iter().map(|a| a * eta).collect();
            let mut s = 1.0;
            while s < v_max {
                v_breaks.push(s);
                s *= 2.0;
            }
            let inner = |z: f64| {
                let qd = integrate_with_breaks(
                    |v| (-v).exp() * cost.eval(-v / eta, z),
                    0.0,
                    v_max,
                    &v_breaks,
                    inner_tol,
                    2_000,
                );
                inner_err.set(inner_err.get().max(qd.error));
                qd.value
            };
            let integrand = |z: f64| {
                let k = self.scale.resolvent_unchecked(x, z) * (-eta * z).exp();
                if k == 0.0 {
                    0.0
                } else {
                    k * inner(z)
                }
            };
            let decay = phi + eta;
            let z_max = x + 40.0 / decay;
            let mut z_breaks = vec![x];
            z_breaks.extend(z_breaks_cost.iter().copied());
            for k in [0.25, 1.0, 4.0, 16.0] {
                z_breaks.push(x + k / decay);
                z_breaks.push(x - k / decay);
                z_breaks.push(k / phi);
            }
            for (root, _) in basis.terms() {
                let r = root.value().re;
                if r > 0.0 {
                    z_breaks.push(x - 1.0 / r);
                }
            }
            let outer = integrate_with_breaks(integrand, 0.0, z_max, &z_breaks, outer_tol, 20_000);
            let mass = self.kappa(j, x, &PreRuinWindow::full()).abs();
            total = total
                + Quad {
                    value: outer.value,
                    error: outer.error + inner_err.get() * mass,
                }
                .scale(lambda * alpha);
        }
        if total.error <= tol && total.value.is_finite() {
            Ok(GsEstimate {
                value: total.value,
                error: total.error,
            })
        } else {
            Err(Error::Quadrature {
                estimate: total.error,
                tolerance: tol,
            })
        }
    }

    /// Evaluates a query: the closed-form window measure when no cost is
    /// attached, otherwise the cost integral over the whole kernel.
    pub fn evaluate(&self, query: &GerberShiuQuery, tol: f64) -> Result<GsEstimate> {
        if query.q != self.basis().q() {
            return Err(Error::Domain(format!(
                "query discount {} does not match the basis discount {}",
                query.q,
                self.basis().q()
            )));
        }
        match &query.cost {
            None => Ok(GsEstimate {
                value: self.joint_measure(query.x, &query.deficit, &query.pre_ruin),
                error: 0.0,
            }),
            Some(cost) => self.gs_with_tail(query.x, cost, tol, cost.deficit_power()),
        }
    }
}
