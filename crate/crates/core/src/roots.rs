//! Roots of `ψ(s) = q` and the partial-fraction data of the scale function.
//!
//! For fixed `q` the scale function of a phase-type process is
//!
//! ```text
//! W^(q)(x) = e^{Φ(q)x}/ψ'(Φ(q)) − Σ_i C_i e^{−ξ_i x},   C_i = −1/ψ'(−ξ_i),
//! ```
//!
//! where `Φ(q)` is the largest root of `ψ(s) = q` and the `−ξ_i` are the roots
//! with negative real part. [`ScaleBasis`] carries all of it.
//!
//! Hyperexponential claims get a bracketed solver: the `ξ_i` interlace with
//! the claim rates, `0 < ξ_1 < η_1 < ξ_2 < …`, one per interval. Fitted heavy
//! tails put many roots within a few ulps of a pole, so each root is located
//! and stored as an offset from its nearest pole; `η_j − ξ_i` and the pole term
//! of `ψ` are then formed without cancellation. General phase-type claims go
//! through the companion matrix of the cleared-denominator polynomial followed
//! by Newton polishing on `ψ` itself.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::model::{HyperExpParams, JumpLaw, LevyModel, PhaseTypeParams};
use crate::poly;

/// Residual tolerance for `ψ(s) − q`, relative to the size of its terms.
pub const RESIDUAL_TOL: f64 = 1e-12;

/// Roots closer than `REPEATED_TOL·(1 + |ξ|)` are treated as repeated.
pub const REPEATED_TOL: f64 = 1e-8;

const MAX_ITER: usize = 400;

/// Exact position of a root relative to the claim rate `η_phase`:
/// `ξ = η_phase + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Anchor {
    phase: usize,
    offset: f64,
}

/// One sign-changed negative root `ξ` of `ψ(−ξ) = q`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NegativeRoot {
    value: Complex64,
    anchor: Option<Anchor>,
}

impl NegativeRoot {
    fn free(value: Complex64) -> Self {
        Self { value, anchor: None }
    }

    pub fn value(&self) -> Complex64 {
        self.value
    }

    /// `η − ξ` for the claim rate `η` of phase `phase`, exact when the root
    /// was anchored at that rate.
    pub fn gap_to_rate(&self, phase: usize, rate: f64) -> Complex64 {
        match self.anchor {
            Some(a) if a.phase == phase => Complex64::new(-a.offset, 0.0),
            _ => Complex64::new(rate, 0.0) - self.value,
        }
    }

    /// Signed offset from the nearest claim rate, when the root was located
    /// relative to one.
    pub fn pole_offset(&self) -> Option<(usize, f64)> {
        self.anchor.map(|a| (a.phase, a.offset))
    }
}

/// Everything needed to evaluate `W^(q)`, `Z^(q)` and the Gerber-Shiu
/// measure in closed form for one discount rate.
#[derive(Debug, Clone)]
pub struct ScaleBasis {
    q: f64,
    phi: f64,
    dpsi_at_phi: f64,
    roots: Vec<NegativeRoot>,
    coeffs: Vec<Complex64>,
    model: LevyModel,
    hyper: Option<HyperExpParams>,
}

impl ScaleBasis {
    pub fn new(model: &LevyModel, q: f64) -> Result<Self> {
        let phi = find_phi(model, q)?;
        let roots = find_negative_roots(model, q)?;
        coefficients(model, q, roots, phi)
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    /// `Φ(q)`.
    pub fn phi(&self) -> f64 {
        self.phi
    }

    /// `ψ'(Φ(q))`.
    pub fn dpsi_at_phi(&self) -> f64 {
        self.dpsi_at_phi
    }

    pub fn roots(&self) -> &[NegativeRoot] {
        &self.roots
    }

    pub fn root_values(&self) -> Vec<Complex64> {
        self.roots.iter().map(NegativeRoot::value).collect()
    }

    /// `C_i = −1/ψ'(−ξ_i)`, in the order of [`roots`](Self::roots).
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    /// The claim law as a hyperexponential mixture, when it is one.
    pub fn hyperexp(&self) -> Option<&HyperExpParams> {
        self.hyper.as_ref()
    }

    /// `(root, coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (&NegativeRoot, Complex64)> + '_ {
        self.roots.iter().zip(self.coeffs.iter().copied())
    }

    /// Largest `|ψ(−ξ_i) − q|` and `|ψ(Φ) − q|`, each relative to the size of
    /// the terms of `ψ` at that point.
    pub fn max_relative_residual(&self) -> f64 {
        let mut worst = relative_phi_residual(&self.model, self.q, self.phi);
        for root in &self.roots {
            let r = match &self.hyper {
                Some(h) => {
                    let eval = HyperEval::new(&self.model, h, self.q);
                    let (base, d) = eval.coordinates(root);
                    let (g, scale, _) = eval.eval(base, d);
                    g.abs() / scale
                }
                None => {
                    let s = -root.value;
                    let v = self.model.psi(s).map(|p| (p - self.q).norm()).unwrap_or(f64::INFINITY);
                    v / psi_scale(&self.model, self.q, s)
                }
            };
            worst = worst.max(r);
        }
        worst
    }
}

fn psi_scale(model: &LevyModel, q: f64, s: Complex64) -> f64 {
    let s2 = model.sigma() * model.sigma();
    (q + (model.mu() * s).norm() + 0.5 * s2 * s.norm_sqr() + model.lambda() * (1.0 + s.norm())).max(1.0)
}

fn relative_phi_residual(model: &LevyModel, q: f64, phi: f64) -> f64 {
    match model.psi_real(phi) {
        Ok(v) => (v - q).abs() / psi_scale(model, q, Complex64::new(phi, 0.0)),
        Err(_) => f64::INFINITY,
    }
}

fn check_hypothesis(model: &LevyModel, q: f64) -> Result<()> {
    if !(q >= 0.0 && q.is_finite()) {
        return Err(Error::Domain(format!(
            "discount rate must be finite and nonnegative, got {q}"
        )));
    }
    match model.jumps() {
        JumpLaw::Weibull { .. } | JumpLaw::Pareto { .. } => return Err(Error::UnsupportedLaw(model.jumps().name())),
        _ => {}
    }
    if q == 0.0 && model.drift_at_zero() >= 0.0 {
        return Err(Error::Hypothesis(format!(
            "q = 0 requires ψ'(0+) < 0, got {}",
            model.drift_at_zero()
        )));
    }
    Ok(())
}

/// `Φ(q) = sup{s ≥ 0 : ψ(s) = q}` by safeguarded Newton from an analytic
/// upper bound.
pub fn find_phi(model: &LevyModel, q: f64) -> Result<f64> {
    check_hypothesis(model, q)?;
    let f = |s: f64| model.psi_real(s).map(|v| v - q);
    let tol = RESIDUAL_TOL * q.max(1.0);

    // Left end: 0, or the minimiser of ψ when ψ'(0+) < 0.
    let mut lo = 0.0;
    if model.psi_prime_real(0.0)? < 0.0 {
        let mut hi = 1.0;
        while model.psi_prime_real(hi)? <= 0.0 {
            hi *= 2.0;
            if hi > 1e300 {
                return Err(Error::Convergence("ψ' never turns positive".into()));
            }
        }
        let mut a = 0.0;
        for _ in 0..MAX_ITER {
            let m = 0.5 * (a + hi);
            if m <= a || m >= hi {
                break;
            }
            if model.psi_prime_real(m)? < 0.0 {
                a = m;
            } else {
                hi = m;
            }
        }
        lo = a;
    }

    // ψ(s) ≥ μs + ½σ²s² − λ on s ≥ 0.
    let (mu, s2, lam) = (model.mu(), model.sigma() * model.sigma(), model.lambda());
    let mut hi = if s2 > 0.0 {
        (-mu + (mu * mu + 2.0 * s2 * (lam + q)).sqrt()) / s2
    } else {
        (q + lam) / mu
    };
    hi = hi.max(lo) + 1e-3;
    let mut width = hi - lo;
    while f(hi)? < 0.0 {
        width *= 2.0;
        hi = lo + width;
        if !hi.is_finite() {
            return Err(Error::Convergence("no upper bracket for Φ(q)".into()));
        }
    }

    let mut s = hi;
    for _ in 0..MAX_ITER {
        let v = f(s)?;
        if v.abs() <= tol {
            return Ok(s);
        }
        if v > 0.0 {
            hi = s;
        } else {
            lo = s;
        }
        let d = model.psi_prime_real(s)?;
        let newton = s - v / d;
        let next = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == s || hi - lo <= f64::EPSILON * hi {
            return Ok(s);
        }
        s = next;
    }
    Err(Error::Convergence(format!("Φ({q}) after {MAX_ITER} iterations")))
}

/// The sign-changed negative roots `ξ_i` of `ψ(−ξ) = q`.
///
/// With `q = 0` the root `ξ = 0` is included: it carries the constant term
/// `−1/ψ'(0)` of the partial-fraction expansion.
pub fn find_negative_roots(model: &LevyModel, q: f64) -> Result<Vec<NegativeRoot>> {
    check_hypothesis(model, q)?;
    match model.jumps() {
        JumpLaw::Exponential { .. } | JumpLaw::HyperExponential(_) => {
            let h = model.hyperexp().expect("exponential family");
            hyperexp_roots(model, &h, q)
        }
        JumpLaw::PhaseType(p) => phase_type_roots(model, p, q),
        other => Err(Error::UnsupportedLaw(other.name())),
    }
}

/// Assembles the basis: `C_i = −1/ψ'(−ξ_i)` and `ψ'(Φ(q))`.
pub fn coefficients(model: &LevyModel, q: f64, roots: Vec<NegativeRoot>, phi: f64) -> Result<ScaleBasis> {
    let dpsi_at_phi = model.psi_prime_real(phi)?;
    if !(dpsi_at_phi > 0.0) {
        return Err(Error::Hypothesis(format!("ψ'(Φ(q)) = {dpsi_at_phi} is not positive")));
    }
    let hyper = model.hyperexp();
    let mut coeffs = Vec::with_capacity(roots.len());
    for root in &roots {
        let c = match &hyper {
            Some(h) => {
                let eval = HyperEval::new(model, h, q);
                let (base, d) = eval.coordinates(root);
                let (_, _, dg) = eval.eval(base, d);
                Complex64::new(1.0 / dg, 0.0)
            }
            None => -1.0 / model.psi_prime(-root.value)?,
        };
        coeffs.push(c);
    }
    // conjugate roots get exactly conjugate coefficients
    for i in 0..roots.len() {
        if roots[i].value.im < 0.0 {
            if let Some(j) = (0..roots.len()).find(|&j| roots[j].value == roots[i].value.conj()) {
                coeffs[i] = coeffs[j].conj();
            }
        }
    }
    Ok(ScaleBasis {
        q,
        phi,
        dpsi_at_phi,
        roots,
        coeffs,
        model: model.clone(),
        hyper,
    })
}

/// `g(s) = ψ(−s) − q` for hyperexponential claims, evaluated at
/// `s = base + d` with the pole term of `base` formed from `d` directly.
struct HyperEval<'a> {
    mu: f64,
    half_s2: f64,
    lambda: f64,
    q: f64,
    h: &'a HyperExpParams,
}

impl<'a> HyperEval<'a> {
    fn new(model: &LevyModel, h: &'a HyperExpParams, q: f64) -> Self {
        Self {
            mu: model.mu(),
            half_s2: 0.5 * model.sigma() * model.sigma(),
            lambda: model.lambda(),
            q,
            h,
        }
    }

    fn base_value(&self, base: Option<usize>) -> f64 {
        base.map_or(0.0, |j| self.h.rates()[j])
    }

    fn coordinates(&self, root: &NegativeRoot) -> (Option<usize>, f64) {
        match root.anchor {
            Some(a) => (Some(a.phase), a.offset),
            None => (None, root.value.re),
        }
    }

    /// `(g, scale, g')` where `scale` bounds the magnitude of the summands.
    fn eval(&self, base: Option<usize>, d: f64) -> (f64, f64, f64) {
        let s = self.base_value(base) + d;
        let mut value = -self.mu * s + self.half_s2 * s * s - self.q;
        let mut scale = (self.mu * s).abs() + self.half_s2 * s * s + self.q;
        let mut deriv = -self.mu + 2.0 * self.half_s2 * s;
        for (j, (&a, &e)) in self.h.weights().iter().zip(self.h.rates()).enumerate() {
            let gap = if base == Some(j) { -d } else { e - s };
            let t = self.lambda * a * s / gap;
            value += t;
            scale += t.abs();
            deriv += self.lambda * a * e / (gap * gap);
        }
        (value, scale.max(1.0), deriv)
    }

    fn g(&self, base: Option<usize>, d: f64) -> f64 {
        self.eval(base, d).0
    }
}

fn hyperexp_roots(model: &LevyModel, h: &HyperExpParams, q: f64) -> Result<Vec<NegativeRoot>> {
    let eval = HyperEval::new(model, h, q);
    let rates = h.rates();
    let m = rates.len();
    let mut roots = Vec::with_capacity(m + 1);

    if q == 0.0 {
        roots.push(NegativeRoot::free(Complex64::new(0.0, 0.0)));
    } else {
        roots.push(solve_bracket(&eval, None, Upper::Pole(0))?);
    }
    for j in 1..m {
        roots.push(solve_bracket(&eval, Some(j - 1), Upper::Pole(j))?);
    }
    if model.sigma() > 0.0 {
        let s2 = model.sigma() * model.sigma();
        let cap = rates[m - 1] + 2.0 * (model.mu().abs() + model.lambda() + q) / s2 + 1.0;
        roots.push(solve_bracket(&eval, Some(m - 1), Upper::Cap(cap))?);
    }
    for root in &roots {
        let (base, d) = eval.coordinates(root);
        let (g, scale, _) = eval.eval(base, d);
        if g.abs() > RESIDUAL_TOL * scale && root.value.re != 0.0 {
            return Err(Error::Convergence(format!(
                "root {} has residual {g:e} (scale {scale:e})",
                root.value.re
            )));
        }
    }
    Ok(roots)
}

enum Upper {
    Pole(usize),
    Cap(f64),
}

/// Locates the unique root of `g` in `(lower, upper)`. `g → −∞` (or `−q`) at
/// the lower end and `g → +∞` (or `g > 0`) at the upper end.
fn solve_bracket(eval: &HyperEval, lower: Option<usize>, upper: Upper) -> Result<NegativeRoot> {
    let lo = eval.base_value(lower);
    let hi = match upper {
        Upper::Pole(j) => eval.h.rates()[j],
        Upper::Cap(mut cap) => {
            let mut tries = 0;
            while eval.g(None, cap) <= 0.0 {
                cap = lo + 2.0 * (cap - lo);
                tries += 1;
                if tries > 200 || !cap.is_finite() {
                    return Err(Error::Convergence("no sign change above the largest rate".into()));
                }
            }
            cap
        }
    };
    let mid = 0.5 * (lo + hi);
    let gm = eval.g(None, mid);
    if gm == 0.0 {
        return Ok(finish(eval, None, mid));
    }
    if gm > 0.0 {
        // root in (lo, mid): offsets d ∈ (0, mid − lo) from the lower end
        let base = lower;
        let mag = bisect_near_end(|d| eval.g(base, d), 1.0, mid - lo, -1.0)?;
        return Ok(finish(eval, base, mag));
    }
    match upper {
        Upper::Pole(j) => {
            // root in (mid, η_j): offsets d ∈ (mid − η_j, 0)
            let mag = bisect_near_end(|e| eval.g(Some(j), -e), -1.0, hi - mid, 1.0)?;
            Ok(finish(eval, Some(j), -mag))
        }
        Upper::Cap(_) => {
            let (mut a, mut b) = (mid, hi);
            for _ in 0..MAX_ITER {
                let m = 0.5 * (a + b);
                if m <= a || m >= b {
                    break;
                }
                if eval.g(None, m) < 0.0 {
                    a = m;
                } else {
                    b = m;
                }
            }
            let pick = if eval.g(None, a).abs() <= eval.g(None, b).abs() {
                a
            } else {
                b
            };
            Ok(finish(eval, None, pick))
        }
    }
}

fn finish(eval: &HyperEval, base: Option<usize>, d: f64) -> NegativeRoot {
    let value = Complex64::new(eval.base_value(base) + d, 0.0);
    let anchor = base.map(|phase| Anchor { phase, offset: d });
    NegativeRoot { value, anchor }
}

/// Finds `t ∈ (0, far]` where `f` changes sign, given that `f(far)` has the
/// sign of `far_sign` and `f(t)` has the sign of `near_sign` as `t → 0+`.
/// Bisects geometrically while the bracket spans more than a factor of two,
/// then arithmetically down to adjacent floats.
fn bisect_near_end(f: impl Fn(f64) -> f64, far_sign: f64, far: f64, near_sign: f64) -> Result<f64> {
    let same = |v: f64, sign: f64| v * sign > 0.0;
    let mut hi = far;
    let mut fh = f(hi);
    if fh == 0.0 {
        return Ok(hi);
    }
    if !same(fh, far_sign) {
        return Err(Error::Convergence("bracket end has the wrong sign".into()));
    }
    let mut lo = far;
    loop {
        lo *= 1e-4;
        if lo < 1e-300 {
            return Err(Error::Convergence("root is indistinguishable from its pole".into()));
        }
        let fl = f(lo);
        if fl == 0.0 {
            return Ok(lo);
        }
        if same(fl, near_sign) {
            break;
        }
        hi = lo;
        fh = fl;
    }
    let _ = fh;
    for _ in 0..MAX_ITER {
        let m = if hi > 2.0 * lo {
            (lo * hi).sqrt()
        } else {
            0.5 * (lo + hi)
        };
        if m <= lo || m >= hi {
            break;
        }
        let fm = f(m);
        if fm == 0.0 {
            return Ok(m);
        }
        if same(fm, near_sign) {
            lo = m;
        } else {
            hi = m;
        }
    }
    Ok(if f(lo).abs() <= f(hi).abs() { lo } else { hi })
}

fn phase_type_roots(model: &LevyModel, p: &PhaseTypeParams, q: f64) -> Result<Vec<NegativeRoot>> {
    let (den, adj) = poly::charpoly_adjugate(p.generator());
    // adj comes leading coefficient first
    let num: Vec<f64> = adj
        .iter()
        .rev()
        .map(|mk| p.alpha().dot(&(mk * p.exit_vector())))
        .collect();
    let (mu, s2, lam) = (model.mu(), model.sigma() * model.sigma(), model.lambda());
    let mass = p.alpha().sum();
    let outer = [q + lam * mass, -mu, -0.5 * s2];
    let lam_num: Vec<f64> = num.iter().map(|c| lam * c).collect();
    let cleared = poly::sub(&poly::mul(&outer, &den), &lam_num);

    let mut found: Vec<Complex64> = Vec::new();
    for z in poly::roots(&cleared) {
        let Some(s) = polish(model, q, z) else { continue };
        if q == 0.0 && s.norm() < 1e-10 {
            found.push(Complex64::new(0.0, 0.0));
        } else if s.re < 0.0 {
            found.push(-s);
        }
    }
    // exact conjugate symmetry
    for xi in &mut found {
        if xi.im.abs() <= 1e-12 * xi.norm() {
            xi.im = 0.0;
        }
    }
    found.sort_by(|a, b| a.re.total_cmp(&b.re).then(b.im.total_cmp(&a.im)));
    let mut i = 0;
    while i < found.len() {
        if found[i].im > 0.0 && i + 1 < found.len() {
            found[i + 1] = found[i].conj();
            i += 2;
        } else {
            i += 1;
        }
    }
    for i in 0..found.len() {
        for j in i + 1..found.len() {
            if (found[i] - found[j]).norm() < REPEATED_TOL * (1.0 + found[i].norm()) {
                return Err(Error::RepeatedRoot {
                    first: found[i],
                    second: found[j],
                });
            }
        }
    }
    for xi in &found {
        let s = -*xi;
        let r = (model.psi(s)? - q).norm();
        if r > 1e-10 * psi_scale(model, q, s) {
            return Err(Error::Convergence(format!("root {xi} has residual {r:e}")));
        }
    }
    Ok(found.into_iter().map(NegativeRoot::free).collect())
}

/// Newton on `ψ(s) − q`; `None` when the iterate runs into a pole.
fn polish(model: &LevyModel, q: f64, mut s: Complex64) -> Option<Complex64> {
    for _ in 0..60 {
        let v = model.psi(s).ok()? - q;
        let d = model.psi_prime(s).ok()?;
        if d.norm() == 0.0 {
            break;
        }
        let step = v / d;
        s -= step;
        if step.norm() <= 4.0 * f64::EPSILON * s.norm().max(1e-300) {
            break;
        }
    }
    let r = (model.psi(s).ok()? - q).norm();
    (r <= 1e-8 * psi_scale(model, q, s)).then_some(s)
}
