//! Binned comparison of simulated densities against the closed form.
//!
//! Each simulated bin is an average of the density over the bin, so the
//! analytic reference is the exact window mass divided by the bin width rather
//! than the density at the bin centre.

use serde::Serialize;

use crate::gerbershiu::{DeficitWindow, GerberShiu, PreRuinWindow};
use crate::montecarlo::DensityEstimate;

/// Bins with fewer hits are not judged.
pub const MIN_HITS: u64 = 100;
pub const Z_LIMIT: f64 = 3.0;
pub const PASS_FRACTION: f64 = 0.9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum DensityKind {
    Overshoot,
    Undershoot,
}

impl DensityKind {
    pub fn name(&self) -> &'static str {
        match self {
            DensityKind::Overshoot => "overshoot",
            DensityKind::Undershoot => "undershoot",
        }
    }
}

impl std::str::FromStr for DensityKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "overshoot" => Ok(DensityKind::Overshoot),
            "undershoot" => Ok(DensityKind::Undershoot),
            other => Err(format!("unknown density kind `{other}` (overshoot | undershoot)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BinCheck {
    pub center: f64,
    pub estimate: f64,
    pub std_error: f64,
    pub hits: u64,
    pub analytic: f64,
    pub z_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonReport {
    pub kind: DensityKind,
    pub bins_checked: usize,
    pub bins_within: usize,
    pub max_abs_z: f64,
    pub pass: bool,
    #[serde(skip)]
    pub bins: Vec<BinCheck>,
}

/// Exact average of the analytic density over bin `k`.
pub fn analytic_bin(gs: &GerberShiu, x: f64, kind: DensityKind, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let mass = match kind {
        DensityKind::Overshoot => gs.joint_measure(
            x,
            &DeficitWindow::bounded(lo, hi).expect("ordered bin edges"),
            &PreRuinWindow::full(),
        ),
        DensityKind::Undershoot => gs.joint_measure(
            x,
            &DeficitWindow::full(),
            &PreRuinWindow::bounded(lo, hi).expect("ordered bin edges"),
        ),
    };
    mass / width
}

pub fn compare(gs: &GerberShiu, x: f64, kind: DensityKind, est: &DensityEstimate) -> ComparisonReport {
    let bins: Vec<BinCheck> = (0..est.centers.len())
        .map(|k| {
            let (lo, hi) = est.bin_edges(k);
            let analytic = analytic_bin(gs, x, kind, lo, hi);
            let diff = est.values[k] - analytic;
            let z_score = if est.std_errors[k] > 0.0 {
                diff / est.std_errors[k]
            } else if diff == 0.0 {
                0.0
            } else {
                f64::INFINITY.copysign(diff)
            };
            BinCheck {
                center: est.centers[k],
                estimate: est.values[k],
                std_error: est.std_errors[k],
                hits: est.hits[k],
                analytic,
                z_score,
            }
        })
        .collect();
    let judged: Vec<&BinCheck> = bins.iter().filter(|b| b.hits >= MIN_HITS).collect();
    let within = judged.iter().filter(|b| b.z_score.abs() <= Z_LIMIT).count();
    let max_abs_z = judged.iter().map(|b| b.z_score.abs()).fold(0.0, f64::max);
    let pass = !judged.is_empty() && within as f64 >= PASS_FRACTION * judged.len() as f64;
    ComparisonReport {
        kind,
        bins_checked: judged.len(),
        bins_within: within,
        max_abs_z,
        pass,
        bins,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{JumpLaw, LevyModel};
    use crate::montecarlo::{estimate_densities, SimConfig};

    #[test]
    fn exact_model_passes_and_wrong_one_fails() {
        let m = LevyModel::new(1.0, 0.0, 10.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        let gs = GerberShiu::from_model(&m, 0.05).unwrap();
        let cfg = SimConfig::new(m.clone(), 5.0, 0.05).with_samples(60_000).with_seed(5);
        let (over, _) = estimate_densities(&cfg).unwrap();
        assert!(compare(&gs, 5.0, DensityKind::Overshoot, &over).pass);

        let wrong = LevyModel::new(1.0, 0.0, 10.0, JumpLaw::Pareto { shape: 1.2, scale: 5.0 }).unwrap();
        let cfg = SimConfig::new(wrong, 5.0, 0.05).with_samples(60_000).with_seed(5);
        let (over, _) = estimate_densities(&cfg).unwrap();
        assert!(!compare(&gs, 5.0, DensityKind::Overshoot, &over).pass);
    }

    #[test]
    fn bin_average_is_window_mass() {
        let m = LevyModel::new(1.0, 0.0, 10.0, JumpLaw::Exponential { rate: 1.0 }).unwrap();
        let gs = GerberShiu::from_model(&m, 0.05).unwrap();
        let mass = gs.scale().ruin_laplace(5.0);
        let v = analytic_bin(&gs, 5.0, DensityKind::Overshoot, 1.0, 1.1);
        assert!((v - mass * ((-1.0f64).exp() - (-1.1f64).exp()) / 0.1).abs() < 1e-12);
        assert_eq!("undershoot".parse::<DensityKind>().unwrap(), DensityKind::Undershoot);
    }
}
