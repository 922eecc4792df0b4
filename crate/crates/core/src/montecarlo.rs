//! First-passage simulation of the surplus process.
//!
//! Without a Gaussian part the path is simulated exactly: it rises linearly
//! between exponential claim epochs and can only be ruined at a claim. With a
//! Gaussian part the path is advanced on a sub-grid between claims, and a
//! Brownian-bridge test catches crossings between grid points. Those crossings
//! are creeping ruins and are timed at the sub-step midpoint.
//!
//! Samples are cut into fixed chunks, each with its own ChaCha stream derived
//! from the master seed, and chunk results are reduced in chunk order. The
//! output therefore does not depend on the number of worker threads.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{JumpLaw, LevyModel};

/// Samples per RNG stream.
pub const CHUNK: usize = 8192;

/// Default sub-grid step for paths with a Gaussian part.
pub const DEFAULT_SUB_STEP: f64 = 1e-3;

/// Discount level at which paths are abandoned as non-ruined.
pub const HORIZON_DISCOUNT: f64 = 1e-6;

// bridge crossing probabilities below e^{-40} are not worth a uniform draw
const BRIDGE_CUTOFF: f64 = 40.0;

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub model: LevyModel,
    pub x: f64,
    pub q: f64,
    pub samples: usize,
    pub bin_width: f64,
    /// Paths alive at this time count as non-ruined. Defaults to
    /// `−ln(1e-6)/q`.
    pub horizon: Option<f64>,
    /// Paths reaching this level count as non-ruined.
    pub escape_level: Option<f64>,
    pub sub_step: f64,
    pub seed: u64,
    pub workers: usize,
    /// Overshoot bins cover `(0, overshoot_range]`.
    pub overshoot_range: f64,
    /// Undershoot bins cover `(0, undershoot_range]`; defaults to `2x`.
    pub undershoot_range: Option<f64>,
}

impl SimConfig {
    /// 500 000 samples and bins of width 0.1.
    pub fn new(model: LevyModel, x: f64, q: f64) -> Self {
        Self {
            model,
            x,
            q,
            samples: 500_000,
            bin_width: 0.1,
            horizon: None,
            escape_level: None,
            sub_step: DEFAULT_SUB_STEP,
            seed: 0,
            workers: 1,
            overshoot_range: 10.0,
            undershoot_range: None,
        }
    }

    pub fn with_samples(mut self, samples: usize) -> Self {
        self.samples = samples;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_workers(mut self, workers: usize) -> Self {
        self.workers = workers;
        self
    }

    pub fn with_bin_width(mut self, width: f64) -> Self {
        self.bin_width = width;
        self
    }

    pub fn with_sub_step(mut self, step: f64) -> Self {
        self.sub_step = step;
        self
    }

    pub fn with_escape_level(mut self, level: f64) -> Self {
        self.escape_level = Some(level);
        self
    }

    pub fn with_horizon(mut self, horizon: f64) -> Self {
        self.horizon = Some(horizon);
        self
    }

    /// The effective time horizon.
    pub fn horizon(&self) -> f64 {
        match self.horizon {
            Some(h) => h,
            None if self.q > 0.0 => -HORIZON_DISCOUNT.ln() / self.q,
            None => f64::INFINITY,
        }
    }

    /// Upper bound on the discounted mass lost by stopping at the horizon.
    pub fn truncation_bound(&self) -> f64 {
        (-self.q * self.horizon()).exp()
    }

    pub fn undershoot_range(&self) -> f64 {
        self.undershoot_range.unwrap_or(2.0 * self.x)
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.samples == 0 {
            return fail("samples must be at least 1".into());
        }
        if !(self.bin_width > 0.0 && self.bin_width.is_finite()) {
            return fail(format!("bin width must be positive, got {}", self.bin_width));
        }
        if !(self.x >= 0.0 && self.x.is_finite()) {
            return fail(format!("initial surplus must be nonnegative, got {}", self.x));
        }
        if !(self.q >= 0.0 && self.q.is_finite()) {
            return fail(format!("discount must be nonnegative, got {}", self.q));
        }
        if !(self.sub_step > 0.0) {
            return fail(format!("sub-step must be positive, got {}", self.sub_step));
        }
        if self.workers == 0 {
            return fail("workers must be at least 1".into());
        }
        if !(self.overshoot_range > 0.0 && self.undershoot_range() > 0.0) {
            return fail("bin ranges must be positive".into());
        }
        if self.horizon().is_infinite() && self.escape_level.is_none() {
            return fail("q = 0 needs an explicit horizon or an escape level".into());
        }
        Ok(())
    }
}

/// How one simulated path ended.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RuinRecord {
    pub ruined: bool,
    /// Ruin time, or the stopping time for non-ruined paths.
    pub tau: f64,
    /// `−X_τ` (zero when creeping).
    pub deficit: f64,
    /// `X_{τ−}`.
    pub pre_ruin: f64,
    pub creeping: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PathEnd {
    Ruin {
        tau: f64,
        deficit: f64,
        pre_ruin: f64,
        creeping: bool,
    },
    Upper {
        tau: f64,
    },
    Survived {
        tau: f64,
    },
}

/// Precomputed claim sampler.
#[derive(Debug, Clone)]
enum Sampler {
    Exponential(f64),
    Mixture {
        cumulative: Vec<f64>,
        rates: Vec<f64>,
    },
    Chain {
        start: Vec<f64>,
        rates: Vec<f64>,
        /// Row-wise cumulative jump probabilities; the last column is exit.
        jumps: DMatrix<f64>,
    },
    Weibull {
        shape: f64,
        scale: f64,
    },
    Pareto {
        shape: f64,
        scale: f64,
    },
}

fn cumulative(weights: impl IntoIterator<Item = f64>) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .into_iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

/// `1 − U` with `U` uniform on `[0, 1)`, so never zero.
fn open_uniform<R: Rng>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

fn pick(cumulative: &[f64], u: f64) -> Option<usize> {
    cumulative.iter().position(|&c| u < c)
}

impl Sampler {
    fn new(law: &JumpLaw) -> Self {
        match law {
            JumpLaw::Exponential { rate } => Sampler::Exponential(*rate),
            JumpLaw::HyperExponential(h) => Sampler::Mixture {
                cumulative: cumulative(h.weights().iter().copied()),
                rates: h.rates().to_vec(),
            },
            JumpLaw::PhaseType(p) => {
                let m = p.dimension();
                let t = p.generator();
                let exit = p.exit_vector();
                let rates: Vec<f64> = (0..m).map(|i| -t[(i, i)]).collect();
                let mut jumps = DMatrix::zeros(m, m + 1);
                for i in 0..m {
                    let row = (0..m)
                        .map(|j| if i == j { 0.0 } else { t[(i, j)] / rates[i] })
                        .chain(std::iter::once(exit[i] / rates[i]));
                    for (j, c) in cumulative(row).into_iter().enumerate() {
                        jumps[(i, j)] = c;
                    }
                }
                Sampler::Chain {
                    start: cumulative(p.alpha().iter().copied()),
                    rates,
                    jumps,
                }
            }
            JumpLaw::Weibull { shape, scale } => Sampler::Weibull {
                shape: *shape,
                scale: *scale,
            },
            JumpLaw::Pareto { shape, scale } => Sampler::Pareto {
                shape: *shape,
                scale: *scale,
            },
        }
    }

    fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        match self {
            Sampler::Exponential(rate) => rng.sample::<f64, _>(Exp1) / rate,
            Sampler::Mixture { cumulative, rates } => {
                let u = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let j = pick(cumulative, u).unwrap_or(rates.len() - 1);
                rng.sample::<f64, _>(Exp1) / rates[j]
            }
            Sampler::Chain { start, rates, jumps } => {
                let m = rates.len();
                let Some(mut state) = pick(start, rng.random::<f64>()) else {
                    return 0.0; // defective initial vector: absorbed at once
                };
                let mut total = 0.0;
                loop {
                    total += rng.sample::<f64, _>(Exp1) / rates[state];
                    let u = rng.random::<f64>();
                    let row: Vec<f64> = (0..=m).map(|j| jumps[(state, j)]).collect();
                    match pick(&row, u) {
                        Some(j) if j < m => state = j,
                        _ => return total,
                    }
                }
            }
            Sampler::Weibull { shape, scale } => scale * (-open_uniform(rng).ln()).powf(1.0 / shape),
            Sampler::Pareto { shape, scale } => (open_uniform(rng).powf(-1.0 / shape) - 1.0) / scale,
        }
    }
}

/// Draws one claim size from `law`.
pub fn sample_jump<R: Rng>(law: &JumpLaw, rng: &mut R) -> f64 {
    Sampler::new(law).sample(rng)
}

struct Engine {
    mu: f64,
    sigma: f64,
    lambda: f64,
    sampler: Sampler,
    horizon: f64,
    dt: f64,
}

impl Engine {
    fn new(cfg: &SimConfig) -> Self {
        Self {
            mu: cfg.model.mu(),
            sigma: cfg.model.sigma(),
            lambda: cfg.model.lambda(),
            sampler: Sampler::new(cfg.model.jumps()),
            horizon: cfg.horizon(),
            dt: cfg.sub_step,
        }
    }

    fn next_gap<R: Rng>(&self, rng: &mut R) -> f64 {
        if self.lambda > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.lambda
        } else {
            f64::INFINITY
        }
    }

    fn run<R: Rng>(&self, x: f64, upper: Option<f64>, rng: &mut R) -> PathEnd {
        if upper.is_some_and(|b| x >= b) {
            return PathEnd::Upper { tau: 0.0 };
        }
        if self.sigma == 0.0 {
            self.run_exact(x, upper, rng)
        } else {
            self.run_diffusive(x, upper, rng)
        }
    }

    fn run_exact<R: Rng>(&self, x: f64, upper: Option<f64>, rng: &mut R) -> PathEnd {
        let (mut t, mut level) = (0.0, x);
        loop {
            let epoch = t + self.next_gap(rng);
            if let Some(b) = upper {
                let hit = t + (b - level) / self.mu;
                if hit <= epoch.min(self.horizon) {
                    return PathEnd::Upper { tau: hit };
                }
            }
            if epoch > self.horizon {
                return PathEnd::Survived { tau: self.horizon };
            }
            level += self.mu * (epoch - t);
            t = epoch;
            let pre = level;
            level -= self.sampler.sample(rng);
            if level < 0.0 {
                return PathEnd::Ruin {
                    tau: t,
                    deficit: -level,
                    pre_ruin: pre,
                    creeping: false,
                };
            }
        }
    }

    fn run_diffusive<R: Rng>(&self, x: f64, upper: Option<f64>, rng: &mut R) -> PathEnd {
        let two_over_s2 = 2.0 / (self.sigma * self.sigma);
        let (mut t, mut level) = (0.0, x);
        loop {
            let epoch = t + self.next_gap(rng);
            let stop = epoch.min(self.horizon);
            while t < stop {
                let h = self.dt.min(stop - t);
                let z: f64 = rng.sample(StandardNormal);
                let next = level + self.mu * h + self.sigma * h.sqrt() * z;
                let mid = t + 0.5 * h;
                if next <= 0.0 || self.bridge_crosses(level, next, two_over_s2 / h, rng) {
                    return PathEnd::Ruin {
                        tau: mid,
                        deficit: 0.0,
                        pre_ruin: 0.0,
                        creeping: true,
                    };
                }
                if let Some(b) = upper {
                    if next >= b || self.bridge_crosses(b - level, b - next, two_over_s2 / h, rng) {
                        return PathEnd::Upper { tau: mid };
                    }
                }
                t += h;
                level = next;
            }
            if epoch > self.horizon {
                return PathEnd::Survived { tau: self.horizon };
            }
            t = epoch;
            let pre = level;
            level -= self.sampler.sample(rng);
            if level < 0.0 {
                return PathEnd::Ruin {
                    tau: t,
                    deficit: -level,
                    pre_ruin: pre,
                    creeping: false,
                };
            }
        }
    }

    /// Crossing of a barrier at distance `u`, `v > 0` from both endpoints of
    /// a Brownian bridge: probability `exp(−2uv/(σ²h))`.
    fn bridge_crosses<R: Rng>(&self, u: f64, v: f64, k: f64, rng: &mut R) -> bool {
        let e = u * v * k;
        e < BRIDGE_CUTOFF && rng.random::<f64>() < (-e).exp()
    }
}

impl PathEnd {
    fn record(self, escape: Option<f64>) -> RuinRecord {
        match self {
            PathEnd::Ruin {
                tau,
                deficit,
                pre_ruin,
                creeping,
            } => RuinRecord {
                ruined: true,
                tau,
                deficit,
                pre_ruin,
                creeping,
            },
            PathEnd::Upper { tau } | PathEnd::Survived { tau } => RuinRecord {
                ruined: false,
                tau,
                deficit: 0.0,
                pre_ruin: escape.unwrap_or(0.0),
                creeping: false,
            },
        }
    }
}

fn chunk_rng(seed: u64, chunk: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(chunk as u64);
    rng
}

/// Runs `f(rng, n)` for every chunk and returns the results in chunk order.
fn run_chunks<A, F>(cfg: &SimConfig, f: F) -> Result<Vec<A>>
where
    A: Send,
    F: Fn(&mut ChaCha8Rng, usize) -> A + Sync,
{
    cfg.validate()?;
    let chunks: Vec<(usize, usize)> = (0..cfg.samples.div_ceil(CHUNK))
        .map(|c| (c, CHUNK.min(cfg.samples - c * CHUNK)))
        .collect();
    let work = || {
        chunks
            .par_iter()
            .map(|&(c, n)| f(&mut chunk_rng(cfg.seed, c), n))
            .collect::<Vec<A>>()
    };
    if cfg.workers == 1 {
        return Ok(chunks.iter().map(|&(c, n)| f(&mut chunk_rng(cfg.seed, c), n)).collect());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.workers)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    Ok(pool.install(work))
}

/// Simulates `config.samples` paths to ruin, horizon or escape.
pub fn simulate_ruin(config: &SimConfig) -> Result<Vec<RuinRecord>> {
    let engine = Engine::new(config);
    let chunks = run_chunks(config, |rng, n| {
        (0..n)
            .map(|_| engine.run(config.x, config.escape_level, rng).record(None))
            .collect::<Vec<_>>()
    })?;
    Ok(chunks.into_iter().flatten().collect())
}

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MassEstimate {
    pub mean: f64,
    pub std_error: f64,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    sum: f64,
    sq: f64,
    hits: u64,
}

impl Moments {
    fn add(&mut self, w: f64) {
        self.sum += w;
        self.sq += w * w;
        self.hits += 1;
    }

    fn merge(&mut self, o: &Moments) {
        self.sum += o.sum;
        self.sq += o.sq;
        self.hits += o.hits;
    }

    fn estimate(&self, n: usize) -> MassEstimate {
        let n = n as f64;
        let mean = self.sum / n;
        let var = (self.sq / n - mean * mean).max(0.0);
        let std_error = if n > 1.0 { (var / (n - 1.0)).sqrt() } else { 0.0 };
        MassEstimate { mean, std_error }
    }
}

/// Binned estimate of a discounted defective density.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DensityEstimate {
    pub bin_width: f64,
    pub centers: Vec<f64>,
    pub values: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub hits: Vec<u64>,
    /// `E[e^{−qτ}; creeping ruin]`.
    pub creeping: MassEstimate,
    /// `E[e^{−qτ}; τ < ∞]`, all ruin kinds.
    pub total: MassEstimate,
    /// Discounted jump-ruin mass falling outside the binned range.
    pub out_of_range: f64,
    pub samples: usize,
}

impl DensityEstimate {
    /// Lower and upper edge of bin `k`.
    pub fn bin_edges(&self, k: usize) -> (f64, f64) {
        (k as f64 * self.bin_width, (k + 1) as f64 * self.bin_width)
    }
}

#[derive(Debug, Clone)]
struct Tally {
    total: Moments,
    creeping: Moments,
    over: Vec<Moments>,
    under: Vec<Moments>,
    over_out: f64,
    under_out: f64,
}

impl Tally {
    fn new(over: usize, under: usize) -> Self {
        Self {
            total: Moments::default(),
            creeping: Moments::default(),
            over: vec![Moments::default(); over],
            under: vec![Moments::default(); under],
            over_out: 0.0,
            under_out: 0.0,
        }
    }

    fn merge(&mut self, o: &Tally) {
        self.total.merge(&o.total);
        self.creeping.merge(&o.creeping);
        for (a, b) in self.over.iter_mut().zip(&o.over) {
            a.merge(b);
        }
        for (a, b) in self.under.iter_mut().zip(&o.under) {
            a.merge(b);
        }
        self.over_out += o.over_out;
        self.under_out += o.under_out;
    }
}

fn bin_count(range: f64, width: f64) -> usize {
    ((range / width) - 1e-9).ceil().max(1.0) as usize
}

fn bin_of(v: f64, width: f64, n: usize) -> Option<usize> {
    let k = (v / width).floor();
    (k >= 0.0 && (k as usize) < n).then_some(k as usize)
}

fn density(bins: &[Moments], width: f64, n: usize, tally: &Tally, out: f64) -> DensityEstimate {
    let (values, std_errors): (Vec<f64>, Vec<f64>) = bins
        .iter()
        .map(|m| {
            let e = m.estimate(n);
            (e.mean / width, e.std_error / width)
        })
        .unzip();
    DensityEstimate {
        bin_width: width,
        centers: (0..bins.len()).map(|k| (k as f64 + 0.5) * width).collect(),
        values,
        std_errors,
        hits: bins.iter().map(|m| m.hits).collect(),
        creeping: tally.creeping.estimate(n),
        total: tally.total.estimate(n),
        out_of_range: out / n as f64,
        samples: n,
    }
}

/// Discounted overshoot (deficit) and undershoot (pre-ruin surplus)
/// histograms of jump ruins, each normalised to a density.
pub fn estimate_densities(config: &SimConfig) -> Result<(DensityEstimate, DensityEstimate)> {
    let engine = Engine::new(config);
    let width = config.bin_width;
    let n_over = bin_count(config.overshoot_range, width);
    let n_under = bin_count(config.undershoot_range(), width);
    let tallies = run_chunks(config, |rng, n| {
        let mut tally = Tally::new(n_over, n_under);
        for _ in 0..n {
            let PathEnd::Ruin {
                tau,
                deficit,
                pre_ruin,
                creeping,
            } = engine.run(config.x, config.escape_level, rng)
            else {
                continue;
            };
            let w = (-config.q * tau).exp();
            tally.total.add(w);
            if creeping {
                tally.creeping.add(w);
                continue;
            }
            match bin_of(deficit, width, n_over) {
                Some(k) => tally.over[k].add(w),
                None => tally.over_out += w,
            }
            match bin_of(pre_ruin, width, n_under) {
                Some(k) => tally.under[k].add(w),
                None => tally.under_out += w,
            }
        }
        tally
    })?;
    let mut all = Tally::new(n_over, n_under);
    for t in &tallies {
        all.merge(t);
    }
    let n = config.samples;
    Ok((
        density(&all.over, width, n, &all, all.over_out),
        density(&all.under, width, n, &all, all.under_out),
    ))
}

fn estimate_mass(
    config: &SimConfig,
    upper: Option<f64>,
    hit: impl Fn(PathEnd) -> Option<f64> + Sync,
) -> Result<MassEstimate> {
    let engine = Engine::new(config);
    let parts = run_chunks(config, |rng, n| {
        let mut m = Moments::default();
        for _ in 0..n {
            if let Some(w) = hit(engine.run(config.x, upper, rng)) {
                m.add(w);
            }
        }
        m
    })?;
    let mut all = Moments::default();
    for p in &parts {
        all.merge(p);
    }
    Ok(all.estimate(config.samples))
}

/// `E^x[e^{−qτ_0^−}; τ_0^− < ∞]`, paths stopped at the horizon or the escape
/// level counting as non-ruined.
pub fn estimate_ruin(config: &SimConfig) -> Result<MassEstimate> {
    let q = config.q;
    estimate_mass(config, config.escape_level, |end| match end {
        PathEnd::Ruin { tau, .. } => Some((-q * tau).exp()),
        _ => None,
    })
}

/// `E^x[e^{−qτ_b^+}; τ_b^+ < τ_0^−]`.
pub fn estimate_exit(config: &SimConfig, b: f64) -> Result<MassEstimate> {
    if !(b >= config.x) {
        return Err(Error::Domain(format!(
            "upper barrier {b} is below the start {}",
            config.x
        )));
    }
    let q = config.q;
    estimate_mass(config, Some(b), |end| match end {
        PathEnd::Upper { tau } => Some((-q * tau).exp()),
        _ => None,
    })
}
