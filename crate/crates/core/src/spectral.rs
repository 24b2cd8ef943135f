//! Quasi-static spectral diffusion: Gaussian detuning ensembles, ensemble
//! averaging of per-detuning results, and PLE lineshapes.

use std::f64::consts::SQRT_2;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::emitter::EmitterParams;
use crate::error::{Error, Result};
use crate::quadrature::{gauss_hermite_standard_normal, gauss_legendre};
use crate::units::mhz_to_rad_per_ns;

/// FWHM of a Gaussian per unit standard deviation, 2√(2 ln 2).
pub const GAUSSIAN_FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

pub const DEFAULT_HERMITE_NODES: usize = 64;
pub const DEFAULT_MC_DRAWS: usize = 4096;

/// Discrete detuning distribution (rad/ns) with normalised weights.
#[derive(Debug, Clone, PartialEq)]
pub struct DetuningEnsemble {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

impl DetuningEnsemble {
    pub fn new(nodes: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if nodes.is_empty() || nodes.len() != weights.len() {
            return Err(Error::Domain(format!(
                "ensemble needs matching, non-empty nodes/weights ({} vs {})",
                nodes.len(),
                weights.len()
            )));
        }
        if weights.iter().any(|w| !(*w >= 0.0)) {
            return Err(Error::Domain("ensemble weights must be non-negative".into()));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("ensemble weights sum to {total}, not 1")));
        }
        Ok(Self { nodes, weights })
    }

    /// A single node at zero detuning: no inhomogeneous broadening.
    pub fn sharp() -> Self {
        Self {
            nodes: vec![0.0],
            weights: vec![1.0],
        }
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Σ wᵢ δᵢ²
    pub fn second_moment(&self) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(d, w)| w * d * d).sum()
    }

    /// Weighted mean of a scalar function of detuning.
    pub fn expect(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&d, &w)| w * f(d)).sum()
    }
}

/// Standard deviation of the quasi-static detuning, √2/T₂*.
pub fn detuning_sigma(t2_star: f64) -> Result<f64> {
    if !(t2_star > 0.0) {
        return Err(Error::Domain(format!("t2_star must be > 0, got {t2_star}")));
    }
    Ok(SQRT_2 / t2_star)
}

/// Gauss–Hermite discretisation of N(0, (√2/T₂*)²).
pub fn gauss_hermite_ensemble(t2_star: f64, n_nodes: usize) -> Result<DetuningEnsemble> {
    let sigma = detuning_sigma(t2_star)?;
    let rule = gauss_hermite_standard_normal(n_nodes)?;
    DetuningEnsemble::new(rule.nodes.iter().map(|x| sigma * x).collect(), rule.weights)
}

/// Equal-weight Monte-Carlo draws from N(0, (√2/T₂*)²).
pub fn monte_carlo_ensemble(t2_star: f64, draws: usize, seed: u64) -> Result<DetuningEnsemble> {
    let sigma = detuning_sigma(t2_star)?;
    if draws == 0 {
        return Err(Error::Usage("Monte-Carlo ensemble needs at least one draw".into()));
    }
    let normal = Normal::new(0.0, sigma).map_err(|e| Error::Domain(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nodes: Vec<f64> = (0..draws).map(|_| normal.sample(&mut rng)).collect();
    let w = 1.0 / draws as f64;
    let mut weights = vec![w; draws];
    // absorb rounding so the weights sum to exactly one
    let drift = 1.0 - weights.iter().sum::<f64>();
    weights[0] += drift;
    DetuningEnsemble::new(nodes, weights)
}

/// How detuning ensembles are built for an emitter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EnsembleSettings {
    GaussHermite { nodes: usize },
    MonteCarlo { draws: usize, seed: u64 },
}

impl Default for EnsembleSettings {
    fn default() -> Self {
        EnsembleSettings::GaussHermite {
            nodes: DEFAULT_HERMITE_NODES,
        }
    }
}

impl EnsembleSettings {
    /// Ensemble for `emitter`; a single sharp node if it has no T₂*.
    pub fn build(&self, emitter: &EmitterParams) -> Result<DetuningEnsemble> {
        match emitter.t2_star() {
            None => Ok(DetuningEnsemble::sharp()),
            Some(t2) => match *self {
                EnsembleSettings::GaussHermite { nodes } => gauss_hermite_ensemble(t2, nodes),
                EnsembleSettings::MonteCarlo { draws, seed } => monte_carlo_ensemble(t2, draws, seed),
            },
        }
    }
}

/// Weighted mean, point by point, of one series per ensemble node.
pub fn inhomogeneous_average(per_node: &[Vec<f64>], ensemble: &DetuningEnsemble) -> Result<Vec<f64>> {
    if per_node.len() != ensemble.len() {
        return Err(Error::Usage(format!(
            "{} node evaluations for an ensemble of {}",
            per_node.len(),
            ensemble.len()
        )));
    }
    let width = per_node[0].len();
    if per_node.iter().any(|s| s.len() != width) {
        return Err(Error::Usage("per-node series have different lengths".into()));
    }
    let mut out = vec![0.0; width];
    // fixed node order keeps the reduction bit-stable
    for (series, &w) in per_node.iter().zip(ensemble.weights()) {
        for (acc, v) in out.iter_mut().zip(series) {
            *acc += w * v;
        }
    }
    Ok(out)
}

/// Evaluate `f` at every node (in parallel) and average the resulting series.
pub fn average_over<F>(ensemble: &DetuningEnsemble, f: F) -> Result<Vec<f64>>
where
    F: Fn(f64) -> Result<Vec<f64>> + Sync,
{
    let per_node: Vec<Vec<f64>> = ensemble.nodes().par_iter().map(|&d| f(d)).collect::<Result<_>>()?;
    inhomogeneous_average(&per_node, ensemble)
}

/// Single-shot and ensemble PLE lineshapes on a common detuning grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PleLineshape {
    pub grid: Vec<f64>,
    pub single_shot: Vec<f64>,
    pub ensemble: Vec<f64>,
    /// FWHM of the single-shot Lorentzian, rad/ns.
    pub lorentzian_fwhm: f64,
    /// FWHM of the inhomogeneous Gaussian, rad/ns.
    pub gaussian_fwhm: f64,
}

/// Power-broadened Lorentzian FWHM Γ_hom·√(1+s), intrinsic dephasing only.
pub fn power_broadened_fwhm(emitter: &EmitterParams, s: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("saturation parameter must be >= 0, got {s}")));
    }
    Ok((emitter.gamma0() + 2.0 * emitter.gamma_pd_intrinsic()) * (1.0 + s).sqrt())
}

fn lorentzian(x: f64, fwhm: f64) -> f64 {
    let hw = 0.5 * fwhm;
    hw * hw / (x * x + hw * hw)
}

fn voigt_unnormalised(
    x: f64,
    lorentz_fwhm: f64,
    sigma: f64,
    panels: &[(f64, f64)],
    rule: &crate::quadrature::Rule,
) -> f64 {
    let norm = 1.0 / (sigma * (2.0 * std::f64::consts::PI).sqrt());
    panels
        .iter()
        .map(|&(a, b)| {
            rule.mapped(a, b)
                .integrate(|u| norm * (-0.5 * (u / sigma).powi(2)).exp() * lorentzian(x - u, lorentz_fwhm))
        })
        .sum()
}

/// Lorentzian of FWHM Γ_hom√(1+s) and its convolution with a Gaussian of FWHM
/// `inhomogeneous_fwhm_mhz`, both normalised to unit peak. `grid` is in rad/ns.
pub fn ple_lineshape(
    emitter: &EmitterParams,
    s: f64,
    inhomogeneous_fwhm_mhz: f64,
    grid: &[f64],
) -> Result<PleLineshape> {
    if grid.is_empty() {
        return Err(Error::Usage("PLE lineshape needs a non-empty detuning grid".into()));
    }
    if !(inhomogeneous_fwhm_mhz >= 0.0) {
        return Err(Error::Domain(format!(
            "inhomogeneous FWHM must be >= 0, got {inhomogeneous_fwhm_mhz}"
        )));
    }
    let lfwhm = power_broadened_fwhm(emitter, s)?;
    let gfwhm = mhz_to_rad_per_ns(inhomogeneous_fwhm_mhz);
    let single: Vec<f64> = grid.iter().map(|&x| lorentzian(x, lfwhm)).collect();

    let ensemble = if gfwhm == 0.0 {
        single.clone()
    } else {
        let sigma = gfwhm / GAUSSIAN_FWHM_PER_SIGMA;
        // panels no wider than a quarter of the narrower feature over ±9σ
        let span = 9.0 * sigma;
        let width = 0.25 * lfwhm.min(sigma);
        let n = ((2.0 * span / width).ceil() as usize).clamp(8, 4000);
        let step = 2.0 * span / n as f64;
        let panels: Vec<(f64, f64)> = (0..n)
            .map(|k| (-span + step * k as f64, -span + step * (k + 1) as f64))
            .collect();
        let rule = gauss_legendre(12)?;
        let peak = voigt_unnormalised(0.0, lfwhm, sigma, &panels, &rule);
        grid.par_iter()
            .map(|&x| voigt_unnormalised(x, lfwhm, sigma, &panels, &rule) / peak)
            .collect()
    };
    Ok(PleLineshape {
        grid: grid.to_vec(),
        single_shot: single,
        ensemble,
        lorentzian_fwhm: lfwhm,
        gaussian_fwhm: gfwhm,
    })
}

/// Full width at half maximum of a sampled unit-peak profile, by linear
/// interpolation of the outermost half-maximum crossings.
pub fn sampled_fwhm(grid: &[f64], values: &[f64]) -> Option<f64> {
    let peak = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let half = 0.5 * peak;
    let above: Vec<usize> = (0..values.len()).filter(|&i| values[i] >= half).collect();
    let (&lo, &hi) = (above.first()?, above.last()?);
    if lo == 0 || hi + 1 >= values.len() {
        return None;
    }
    let cross = |i: usize, j: usize| {
        let t = (half - values[i]) / (values[j] - values[i]);
        grid[i] + t * (grid[j] - grid[i])
    };
    Some(cross(hi, hi + 1) - cross(lo - 1, lo))
}
