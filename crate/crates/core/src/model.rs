//! Claim-size laws, the surplus process and its Laplace exponent.
//!
//! The surplus follows `X_t − X_0 = μt + σB_t − Σ_{n ≤ N_t} Z_n` where `N` is a
//! Poisson process of rate `λ` and the `Z_n` are i.i.d. claims. For phase-type
//! claims (exponential and hyperexponential included) the Laplace exponent
//!
//! ```text
//! ψ(s) = μs + ½σ²s² + λ(α(sI − T)⁻¹t − 1)
//! ```
//!
//! is rational. Hyperexponential claims are always evaluated through the
//! explicit partial-fraction sum `−λ Σ α_j s/(η_j + s)`, never through a matrix
//! solve. Weibull and Pareto claims are simulation-only.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Invalid, Result};

/// Relative exclusion radius around the poles of `ψ`.
pub const POLE_RADIUS: f64 = 1e-12;

/// Slack allowed when renormalising transcribed mixture weights.
const TABLE_WEIGHT_SLACK: f64 = 1e-5;

/// Mixture of exponentials `f(z) = Σ α_j η_j e^{−η_j z}` with `η_1 < … < η_m`.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperExpParams {
    weights: Vec<f64>,
    rates: Vec<f64>,
}

impl HyperExpParams {
    /// Strict constructor: weights must sum to one within `1e-12` and rates
    /// must already be strictly increasing.
    pub fn new(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        let mut problems = Self::check(&weights, &rates);
        let sum: f64 = weights.iter().sum();
        if problems.is_empty() && (sum - 1.0).abs() > 1e-12 {
            problems.push(Invalid::WeightSum(sum));
        }
        if problems.is_empty() {
            Ok(Self { weights, rates })
        } else {
            Err(Error::InvalidModel(problems))
        }
    }

    /// Builds a law from a published table: phases are sorted by rate and
    /// weights are rescaled to sum to one when the table is off by rounding
    /// (at most `1e-5`).
    pub fn from_table(weights: Vec<f64>, rates: Vec<f64>) -> Result<Self> {
        if weights.len() != rates.len() {
            return Err(Error::InvalidModel(vec![Invalid::LengthMismatch {
                weights: weights.len(),
                rates: rates.len(),
            }]));
        }
        let mut phases: Vec<(f64, f64)> = weights.into_iter().zip(rates).collect();
        phases.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (weights, rates): (Vec<f64>, Vec<f64>) = phases.into_iter().unzip();
        let problems = Self::check(&weights, &rates);
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > TABLE_WEIGHT_SLACK {
            return Err(Error::InvalidModel(vec![Invalid::WeightSum(sum)]));
        }
        let weights = weights.into_iter().map(|w| w / sum).collect();
        Ok(Self { weights, rates })
    }

    pub fn exponential(rate: f64) -> Result<Self> {
        Self::new(vec![1.0], vec![rate])
    }

    fn check(weights: &[f64], rates: &[f64]) -> Vec<Invalid> {
        let mut problems = Vec::new();
        if weights.len() != rates.len() {
            problems.push(Invalid::LengthMismatch {
                weights: weights.len(),
                rates: rates.len(),
            });
            return problems;
        }
        if weights.is_empty() {
            problems.push(Invalid::Empty);
        }
        for &w in weights {
            if !(w.is_finite() && w > 0.0) {
                problems.push(Invalid::NonPositiveParameter {
                    name: "weight",
                    value: w,
                });
            }
        }
        for &r in rates {
            if !(r.is_finite() && r > 0.0) {
                problems.push(Invalid::NonPositiveParameter { name: "rate", value: r });
            }
        }
        if rates.windows(2).any(|w| w[0] >= w[1]) {
            problems.push(Invalid::RatesNotIncreasing);
        }
        problems
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn rates(&self) -> &[f64] {
        &self.rates
    }

    pub fn phases(&self) -> usize {
        self.rates.len()
    }

    pub fn mean(&self) -> f64 {
        self.weights.iter().zip(&self.rates).map(|(a, e)| a / e).sum()
    }

    pub fn density(&self, z: f64) -> f64 {
        self.weights
            .iter()
            .zip(&self.rates)
            .map(|(a, e)| a * e * (-e * z).exp())
            .sum()
    }

    /// The same law as a phase-type representation with diagonal generator.
    pub fn to_phase_type(&self) -> PhaseTypeParams {
        let m = self.phases();
        let generator = DMatrix::from_fn(m, m, |i, j| if i == j { -self.rates[i] } else { 0.0 });
        PhaseTypeParams::new(self.weights.clone(), generator)
            .expect("diagonal generator from a valid hyperexponential law")
    }
}

/// Phase-type law with representation `(m, α, T)` and exit vector `t = −T·1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseTypeParams {
    alpha: DVector<f64>,
    generator: DMatrix<f64>,
    exit: DVector<f64>,
    poles: Vec<Complex64>,
}

impl PhaseTypeParams {
    pub fn new(alpha: Vec<f64>, generator: DMatrix<f64>) -> Result<Self> {
        let m = alpha.len();
        let mut problems = Vec::new();
        if m == 0 {
            problems.push(Invalid::Empty);
        }
        if generator.nrows() != m || generator.ncols() != m {
            problems.push(Invalid::Generator(format!(
                "expected {m}×{m}, got {}×{}",
                generator.nrows(),
                generator.ncols()
            )));
            return Err(Error::InvalidModel(problems));
        }
        if alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
            problems.push(Invalid::InitialVector("entries must be nonnegative".into()));
        }
        let mass: f64 = alpha.iter().sum();
        if mass > 1.0 + 1e-12 || mass <= 0.0 {
            problems.push(Invalid::InitialVector(format!("total mass {mass} not in (0, 1]")));
        }
        for i in 0..m {
            let mut row = 0.0;
            for j in 0..m {
                let v = generator[(i, j)];
                if !v.is_finite() {
                    problems.push(Invalid::Generator(format!("entry ({i},{j}) is not finite")));
                } else if i == j && v >= 0.0 {
                    problems.push(Invalid::Generator(format!("diagonal entry {i} must be negative")));
                } else if i != j && v < 0.0 {
                    problems.push(Invalid::Generator(format!("off-diagonal entry ({i},{j}) is negative")));
                }
                row += v;
            }
            if row > 1e-12 * generator[(i, i)].abs() {
                problems.push(Invalid::Generator(format!("row {i} sums to {row} > 0")));
            }
        }
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems));
        }
        let poles: Vec<Complex64> = generator.complex_eigenvalues().iter().copied().collect();
        if poles.iter().any(|p| p.norm() == 0.0) || generator.clone().lu().determinant() == 0.0 {
            return Err(Error::InvalidModel(vec![Invalid::Generator("singular".into())]));
        }
        let exit = -(&generator * DVector::from_element(m, 1.0));
        Ok(Self {
            alpha: DVector::from_vec(alpha),
            generator,
            exit,
            poles,
        })
    }

    pub fn dimension(&self) -> usize {
        self.alpha.len()
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn generator(&self) -> &DMatrix<f64> {
        &self.generator
    }

    pub fn exit_vector(&self) -> &DVector<f64> {
        &self.exit
    }

    /// Eigenvalues of `T`; the poles of `ψ`.
    pub fn poles(&self) -> &[Complex64] {
        &self.poles
    }

    /// Probability of a zero-size claim, `1 − Σα`.
    pub fn defect(&self) -> f64 {
        (1.0 - self.alpha.sum()).max(0.0)
    }

    /// `−α T⁻¹ 1`.
    pub fn mean(&self) -> f64 {
        let m = self.dimension();
        let sol = self
            .generator
            .clone()
            .lu()
            .solve(&DVector::from_element(m, 1.0))
            .expect("generator is nonsingular");
        -self.alpha.dot(&sol)
    }

    /// `α e^{Tz} t`.
    pub fn density(&self, z: f64) -> f64 {
        let e = (&self.generator * z).exp();
        self.alpha.dot(&(e * &self.exit))
    }

    /// `α(sI − T)^{-k} t` for `k = 1, 2, 3`.
    pub(crate) fn resolvent_moments(&self, s: Complex64) -> [Complex64; 3] {
        let m = self.dimension();
        let a = DMatrix::from_fn(m, m, |i, j| {
            let diag = if i == j { s } else { Complex64::new(0.0, 0.0) };
            diag - Complex64::new(self.generator[(i, j)], 0.0)
        });
        let lu = a.lu();
        let alpha = self.alpha.map(|v| Complex64::new(v, 0.0));
        let mut v = self.exit.map(|v| Complex64::new(v, 0.0));
        let mut out = [Complex64::new(0.0, 0.0); 3];
        for slot in &mut out {
            v = lu.solve(&v).expect("s is not an eigenvalue of T");
            *slot = alpha.dot(&v);
        }
        out
    }
}

/// Claim-size law.
#[derive(Debug, Clone, PartialEq)]
pub enum JumpLaw {
    Exponential {
        rate: f64,
    },
    HyperExponential(HyperExpParams),
    PhaseType(PhaseTypeParams),
    /// `F(t) = 1 − exp(−(t/scale)^shape)`.
    Weibull {
        shape: f64,
        scale: f64,
    },
    /// `F(t) = 1 − (1 + scale·t)^{−shape}`.
    Pareto {
        shape: f64,
        scale: f64,
    },
}

impl JumpLaw {
    pub fn name(&self) -> &'static str {
        match self {
            JumpLaw::Exponential { .. } => "exponential",
            JumpLaw::HyperExponential(_) => "hyperexponential",
            JumpLaw::PhaseType(_) => "phase-type",
            JumpLaw::Weibull { .. } => "weibull",
            JumpLaw::Pareto { .. } => "pareto",
        }
    }

    /// The law as a mixture of exponentials, when it is one.
    pub fn as_hyperexp(&self) -> Option<HyperExpParams> {
        match self {
            JumpLaw::Exponential { rate } => HyperExpParams::exponential(*rate).ok(),
            JumpLaw::HyperExponential(h) => Some(h.clone()),
            _ => None,
        }
    }

    /// Density of the claim size at `z ≥ 0` (right limit at zero).
    pub fn density(&self, z: f64) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => rate * (-rate * z).exp(),
            JumpLaw::HyperExponential(h) => h.density(z),
            JumpLaw::PhaseType(p) => p.density(z),
            JumpLaw::Weibull { shape, scale } => {
                let t = z / scale;
                shape / scale * t.powf(shape - 1.0) * (-t.powf(*shape)).exp()
            }
            JumpLaw::Pareto { shape, scale } => shape * scale * (1.0 + scale * z).powf(-shape - 1.0),
        }
    }

    fn mean(&self) -> f64 {
        match self {
            JumpLaw::Exponential { rate } => 1.0 / rate,
            JumpLaw::HyperExponential(h) => h.mean(),
            JumpLaw::PhaseType(p) => p.mean(),
            JumpLaw::Weibull { shape, scale } => scale * statrs::function::gamma::gamma(1.0 + 1.0 / shape),
            JumpLaw::Pareto { shape, scale } => {
                if *shape > 1.0 {
                    1.0 / (scale * (shape - 1.0))
                } else {
                    f64::INFINITY
                }
            }
        }
    }

    fn check(&self, problems: &mut Vec<Invalid>) {
        let mut positive = |name: &'static str, value: f64| {
            if !(value.is_finite() && value > 0.0) {
                problems.push(Invalid::NonPositiveParameter { name, value });
            }
        };
        match self {
            JumpLaw::Exponential { rate } => positive("rate", *rate),
            JumpLaw::Weibull { shape, scale } | JumpLaw::Pareto { shape, scale } => {
                positive("shape", *shape);
                positive("scale", *scale);
            }
            JumpLaw::HyperExponential(_) | JumpLaw::PhaseType(_) => {}
        }
    }
}

/// Path-variation class of the surplus process.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Variation {
    Bounded,
    Unbounded,
}

/// A validated spectrally negative Lévy surplus process.
#[derive(Debug, Clone, PartialEq)]
pub struct LevyModel {
    mu: f64,
    sigma: f64,
    lambda: f64,
    jumps: JumpLaw,
    mean_jump: f64,
}

impl LevyModel {
    pub fn new(mu: f64, sigma: f64, lambda: f64, jumps: JumpLaw) -> Result<Self> {
        Self {
            mu,
            sigma,
            lambda,
            jumps,
            mean_jump: f64::NAN,
        }
        .validate()
    }

    /// Checks every invariant, collecting all violations, and caches `E[Z]`.
    pub fn validate(mut self) -> Result<Self> {
        let mut problems = Vec::new();
        if !self.mu.is_finite() {
            problems.push(Invalid::NonPositiveParameter {
                name: "mu",
                value: self.mu,
            });
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            problems.push(Invalid::NegativeSigma(self.sigma));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            problems.push(Invalid::NegativeArrivalRate(self.lambda));
        }
        if self.sigma == 0.0 && self.mu <= 0.0 {
            problems.push(Invalid::NotSpectrallyNegativeDrift(self.mu));
        }
        self.jumps.check(&mut problems);
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems));
        }
        self.mean_jump = self.jumps.mean();
        Ok(self)
    }

    /// Same process with a different Gaussian coefficient.
    pub fn with_sigma(&self, sigma: f64) -> Result<Self> {
        Self::new(self.mu, sigma, self.lambda, self.jumps.clone())
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn jumps(&self) -> &JumpLaw {
        &self.jumps
    }

    /// `E[Z]`, possibly infinite for heavy-tailed Pareto claims.
    pub fn mean_jump(&self) -> f64 {
        self.mean_jump
    }

    pub fn variation(&self) -> Variation {
        if self.sigma == 0.0 {
            Variation::Bounded
        } else {
            Variation::Unbounded
        }
    }

    /// `ψ'(0+) = μ − λE[Z]`.
    pub fn drift_at_zero(&self) -> f64 {
        self.mu - self.lambda * self.mean_jump
    }

    /// The jump law as a hyperexponential mixture, if it is one.
    pub fn hyperexp(&self) -> Option<HyperExpParams> {
        self.jumps.as_hyperexp()
    }

    fn check_poles(&self, s: Complex64) -> Result<()> {
        match &self.jumps {
            JumpLaw::Exponential { rate } => check_pole(s, Complex64::new(-rate, 0.0)),
            JumpLaw::HyperExponential(h) => h
                .rates()
                .iter()
                .try_for_each(|r| check_pole(s, Complex64::new(-r, 0.0))),
            JumpLaw::PhaseType(p) => p.poles().iter().try_for_each(|&pole| check_pole(s, pole)),
            other => Err(Error::UnsupportedLaw(other.name())),
        }
    }

    /// Jump part of `ψ` and its first two derivatives.
    fn jump_terms(&self, s: Complex64) -> Result<[Complex64; 3]> {
        self.check_poles(s)?;
        let lam = self.lambda;
        let sum_hyper = |weights: &[f64], rates: &[f64]| {
            let mut out = [Complex64::new(0.0, 0.0); 3];
            for (&a, &e) in weights.iter().zip(rates) {
                let d = s + e;
                out[0] -= lam * a * s / d;
                out[1] -= lam * a * e / (d * d);
                out[2] += 2.0 * lam * a * e / (d * d * d);
            }
            out
        };
        Ok(match &self.jumps {
            JumpLaw::Exponential { rate } => sum_hyper(&[1.0], &[*rate]),
            JumpLaw::HyperExponential(h) => sum_hyper(h.weights(), h.rates()),
            JumpLaw::PhaseType(p) => {
                let [r1, r2, r3] = p.resolvent_moments(s);
                let mass = p.alpha().sum();
                [lam * (r1 - mass), -lam * r2, 2.0 * lam * r3]
            }
            other => return Err(Error::UnsupportedLaw(other.name())),
        })
    }

    /// Laplace exponent `ψ(s) = log E[e^{sX_1}]`, continued analytically.
    pub fn psi(&self, s: Complex64) -> Result<Complex64> {
        let [j, _, _] = self.jump_terms(s)?;
        Ok(self.mu * s + 0.5 * self.sigma * self.sigma * s * s + j)
    }

    pub fn psi_prime(&self, s: Complex64) -> Result<Complex64> {
        let [_, j, _] = self.jump_terms(s)?;
        Ok(self.mu + self.sigma * self.sigma * s + j)
    }

    pub fn psi_second(&self, s: Complex64) -> Result<Complex64> {
        let [_, _, j] = self.jump_terms(s)?;
        Ok(self.sigma * self.sigma + j)
    }

    pub fn psi_real(&self, s: f64) -> Result<f64> {
        self.psi(Complex64::new(s, 0.0)).map(|v| v.re)
    }

    pub fn psi_prime_real(&self, s: f64) -> Result<f64> {
        self.psi_prime(Complex64::new(s, 0.0)).map(|v| v.re)
    }

    pub fn psi_second_real(&self, s: f64) -> Result<f64> {
        self.psi_second(Complex64::new(s, 0.0)).map(|v| v.re)
    }

    /// Lévy density of the claims (dual process), `λ f_Z(u)` for `u ≥ 0`.
    pub fn levy_density(&self, u: f64) -> Result<f64> {
        if !(u >= 0.0) {
            return Err(Error::Domain(format!("jump magnitude must be nonnegative, got {u}")));
        }
        Ok(self.lambda * self.jumps.density(u))
    }

    pub fn from_config(config: &ModelConfig) -> Result<Self> {
        let jumps = match &config.jumps {
            JumpConfig::Exponential { rate } => JumpLaw::Exponential { rate: *rate },
            JumpConfig::Hyperexp { weights, rates } => {
                JumpLaw::HyperExponential(HyperExpParams::from_table(weights.clone(), rates.clone())?)
            }
            JumpConfig::Phasetype { alpha, generator } => {
                let m = generator.len();
                if generator.iter().any(|row| row.len() != m) {
                    return Err(Error::InvalidModel(vec![Invalid::Generator(
                        "rows differ in length".into(),
                    )]));
                }
                let t = DMatrix::from_fn(m, m, |i, j| generator[i][j]);
                JumpLaw::PhaseType(PhaseTypeParams::new(alpha.clone(), t)?)
            }
            JumpConfig::Weibull { shape, scale } => JumpLaw::Weibull {
                shape: *shape,
                scale: *scale,
            },
            JumpConfig::Pareto { shape, scale } => JumpLaw::Pareto {
                shape: *shape,
                scale: *scale,
            },
        };
        Self::new(config.mu, config.sigma, config.lambda, jumps)
    }

    pub fn to_config(&self) -> ModelConfig {
        let jumps = match &self.jumps {
            JumpLaw::Exponential { rate } => JumpConfig::Exponential { rate: *rate },
            JumpLaw::HyperExponential(h) => JumpConfig::Hyperexp {
                weights: h.weights().to_vec(),
                rates: h.rates().to_vec(),
            },
            JumpLaw::PhaseType(p) => JumpConfig::Phasetype {
                alpha: p.alpha().iter().copied().collect(),
                generator: p.generator().row_iter().map(|r| r.iter().copied().collect()).collect(),
            },
            JumpLaw::Weibull { shape, scale } => JumpConfig::Weibull {
                shape: *shape,
                scale: *scale,
            },
            JumpLaw::Pareto { shape, scale } => JumpConfig::Pareto {
                shape: *shape,
                scale: *scale,
            },
        };
        ModelConfig {
            mu: self.mu,
            sigma: self.sigma,
            lambda: self.lambda,
            jumps,
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let config: ModelConfig = serde_json::from_str(text)?;
        Self::from_config(&config)
    }
}

fn check_pole(s: Complex64, pole: Complex64) -> Result<()> {
    if (s - pole).norm() <= POLE_RADIUS * pole.norm() {
        Err(Error::Pole { s, pole })
    } else {
        Ok(())
    }
}

/// JSON form of a model: `{"mu", "sigma", "lambda", "jumps": {"type", ...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub mu: f64,
    pub sigma: f64,
    pub lambda: f64,
    pub jumps: JumpConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum JumpConfig {
    Exponential { rate: f64 },
    Hyperexp { weights: Vec<f64>, rates: Vec<f64> },
    Phasetype { alpha: Vec<f64>, generator: Vec<Vec<f64>> },
    Weibull { shape: f64, scale: f64 },
    Pareto { shape: f64, scale: f64 },
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> Complex64 {
        Complex64::new(re, 0.0)
    }

    fn exp1(sigma: f64) -> LevyModel {
        LevyModel::new(1.0, sigma, 10.0, JumpLaw::Exponential { rate: 1.0 }).unwrap()
    }

    #[test]
    fn psi_vanishes_at_origin() {
        for sigma in [0.0, 1.0] {
            assert_eq!(exp1(sigma).psi(c(0.0)).unwrap(), c(0.0));
        }
    }

    #[test]
    fn psi_hand_values() {
        // ψ(s) = s + ½σ²s² − 10s/(1+s)
        assert!((exp1(0.0).psi_real(1.0).unwrap() + 4.0).abs() < 1e-15);
        assert!((exp1(1.0).psi_real(2.0).unwrap() + 8.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn psi_prime_hand_values() {
        let m = exp1(0.0);
        assert!((m.psi_prime_real(0.0).unwrap() + 9.0).abs() < 1e-15);
        assert!((m.psi_prime_real(-0.0055215).unwrap() + 9.11133).abs() < 1e-4);
        assert!((m.drift_at_zero() + 9.0).abs() < 1e-15);
        let big = exp1(1.5).psi_second_real(1e7).unwrap();
        assert!((big - 2.25).abs() < 1e-12);
    }

    #[test]
    fn pole_exclusion() {
        let m = exp1(0.0);
        assert!(matches!(m.psi(c(-1.0)), Err(Error::Pole { .. })));
        assert!(matches!(m.psi(c(-1.0 + 1e-14)), Err(Error::Pole { .. })));
        assert!(m.psi(c(-1.0 + 1e-9)).is_ok());
    }

    #[test]
    fn weibull_and_pareto_have_no_exponent() {
        let w = LevyModel::new(
            1.0,
            0.0,
            10.0,
            JumpLaw::Weibull {
                shape: 0.6,
                scale: 0.665,
            },
        )
        .unwrap();
        assert!(matches!(w.psi(c(1.0)), Err(Error::UnsupportedLaw(_))));
        let p = LevyModel::new(1.0, 0.0, 10.0, JumpLaw::Pareto { shape: 1.2, scale: 5.0 }).unwrap();
        assert!(matches!(p.psi_prime(c(1.0)), Err(Error::UnsupportedLaw(_))));
        assert!((p.mean_jump() - 1.0).abs() < 1e-12);
        assert!((w.levy_density(1.0).unwrap() - 10.0 * w.jumps().density(1.0)).abs() < 1e-15);
    }

    #[test]
    fn levy_density_values() {
        let m = exp1(0.0);
        assert_eq!(m.levy_density(0.0).unwrap(), 10.0);
        assert!(m.levy_density(800.0).unwrap() < 1e-300);
        assert!(m.levy_density(-1.0).is_err());
    }

    #[test]
    fn validation_collects_problems() {
        assert!((exp1(0.0).mean_jump() - 1.0).abs() < 1e-15);
        let h = HyperExpParams::new(vec![0.5, 0.5], vec![1.0, 2.0]).unwrap();
        assert!((h.mean() - 0.75).abs() < 1e-15);
        match LevyModel::new(-1.0, 0.0, 10.0, JumpLaw::Exponential { rate: 1.0 }) {
            Err(Error::InvalidModel(p)) => {
                assert_eq!(p, vec![Invalid::NotSpectrallyNegativeDrift(-1.0)])
            }
            other => panic!("{other:?}"),
        }
        match LevyModel::new(-1.0, -0.5, -1.0, JumpLaw::Exponential { rate: 0.0 }) {
            Err(Error::InvalidModel(p)) => assert_eq!(p.len(), 3),
            other => panic!("{other:?}"),
        }
        // drift may be negative once a Gaussian part is present
        assert!(LevyModel::new(-1.0, 1.0, 0.0, JumpLaw::Exponential { rate: 1.0 }).is_ok());
    }

    #[test]
    fn hyperexp_invariants() {
        assert!(HyperExpParams::new(vec![0.5, 0.4], vec![1.0, 2.0]).is_err());
        assert!(HyperExpParams::new(vec![0.5, 0.5], vec![2.0, 1.0]).is_err());
        assert!(HyperExpParams::new(vec![0.5, 0.5], vec![1.0, 1.0]).is_err());
        assert!(HyperExpParams::new(vec![1.0, 0.0], vec![1.0, 2.0]).is_err());
        let t = HyperExpParams::from_table(vec![0.3, 0.7 - 1e-7], vec![5.0, 1.0]).unwrap();
        assert_eq!(t.rates(), &[1.0, 5.0]);
        assert!((t.weights().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(HyperExpParams::from_table(vec![0.3, 0.6], vec![5.0, 1.0]).is_err());
    }

    #[test]
    fn phase_type_rejects_bad_generators() {
        let bad = DMatrix::from_row_slice(2, 2, &[-1.0, 2.0, 0.0, -1.0]);
        assert!(PhaseTypeParams::new(vec![0.5, 0.5], bad).is_err());
        let neg = DMatrix::from_row_slice(2, 2, &[-1.0, -0.5, 0.0, -1.0]);
        assert!(PhaseTypeParams::new(vec![0.5, 0.5], neg).is_err());
        let ok = DMatrix::from_row_slice(2, 2, &[-2.0, 2.0, 0.0, -2.0]);
        let p = PhaseTypeParams::new(vec![1.0, 0.0], ok).unwrap();
        // Erlang(2, 2)
        assert!((p.mean() - 1.0).abs() < 1e-14);
        assert!((p.density(0.5) - 4.0 * 0.5 * (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn hyperexp_matches_diagonal_phase_type() {
        let h = HyperExpParams::new(vec![0.2, 0.3, 0.5], vec![0.5, 2.0, 7.0]).unwrap();
        let ph = h.to_phase_type();
        for sigma in [0.0, 0.8] {
            let a = LevyModel::new(1.3, sigma, 4.0, JumpLaw::HyperExponential(h.clone())).unwrap();
            let b = LevyModel::new(1.3, sigma, 4.0, JumpLaw::PhaseType(ph.clone())).unwrap();
            assert!((a.mean_jump() - b.mean_jump()).abs() < 1e-14);
            for s in [
                Complex64::new(0.3, 0.0),
                Complex64::new(-0.25, 0.1),
                Complex64::new(-3.0, 0.0),
                Complex64::new(12.0, -4.0),
            ] {
                for (x, y) in [
                    (a.psi(s).unwrap(), b.psi(s).unwrap()),
                    (a.psi_prime(s).unwrap(), b.psi_prime(s).unwrap()),
                    (a.psi_second(s).unwrap(), b.psi_second(s).unwrap()),
                ] {
                    assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0), "{s}: {x} vs {y}");
                }
            }
        }
    }

    #[test]
    fn json_round_trip() {
        let text = r#"{"mu": 1, "sigma": 0.5, "lambda": 10,
            "jumps": {"type": "hyperexp", "weights": [0.4, 0.6], "rates": [3, 1]}}"#;
        let m = LevyModel::from_json(text).unwrap();
        assert_eq!(m.hyperexp().unwrap().rates(), &[1.0, 3.0]);
        let again = LevyModel::from_config(&m.to_config()).unwrap();
        assert_eq!(m, again);
        assert!(LevyModel::from_json(r#"{"mu":1,"sigma":0,"lambda":1,"jumps":{"type":"gamma"}}"#).is_err());
    }
}
