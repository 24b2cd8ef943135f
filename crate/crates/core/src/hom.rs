//! Hong–Ou–Mandel coincidence probabilities and visibility for consecutive
//! exponential wavepackets from one emitter with pure dephasing.
//!
//! The ensemble-averaged joint detection density at the two output ports is
//!
//! ```text
//! P(t0, t1) = 1/(4 T1²) · e^{-(t0+t1)/T1} · (2 − 2 e^{-2 Γpd |t1 − t0|})
//! ```
//!
//! for t0, t1 ≥ 0. Distinguishable photons drop the interference term.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::{gauss_legendre, Rule};

/// Collection window measured from the start of emission.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Window {
    Finite(f64),
    Infinite,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomConfig {
    pub t1_lifetime: f64,
    pub gamma_pd: f64,
    pub window: Window,
    /// Starting Gauss–Legendre order per axis; doubled until converged.
    pub quadrature_order: usize,
}

pub const DEFAULT_QUADRATURE_ORDER: usize = 48;
const MAX_QUADRATURE_ORDER: usize = 1536;
const CONVERGENCE_TOL: f64 = 1e-9;

impl HomConfig {
    pub fn new(t1_lifetime: f64, gamma_pd: f64, window: Window) -> Result<Self> {
        let cfg = Self {
            t1_lifetime,
            gamma_pd,
            window,
            quadrature_order: DEFAULT_QUADRATURE_ORDER,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn with_window(self, window: Window) -> Result<Self> {
        Self { window, ..self }.validate_into()
    }

    fn validate_into(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1_lifetime > 0.0 && self.t1_lifetime.is_finite()) {
            return Err(Error::Domain(format!("t1 must be > 0, got {}", self.t1_lifetime)));
        }
        if !(self.gamma_pd >= 0.0 && self.gamma_pd.is_finite()) {
            return Err(Error::Domain(format!("gamma_pd must be >= 0, got {}", self.gamma_pd)));
        }
        if let Window::Finite(t) = self.window {
            if !(t >= 0.0 && t.is_finite()) {
                return Err(Error::Domain(format!("t_max must be >= 0, got {t}")));
            }
        }
        if self.quadrature_order == 0 {
            return Err(Error::Usage("quadrature order must be >= 1".into()));
        }
        Ok(())
    }

    fn gamma0(&self) -> f64 {
        1.0 / self.t1_lifetime
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HomResult {
    pub p_coincidence: f64,
    pub p_coincidence_distinguishable: f64,
    pub visibility: f64,
}

/// Deterministic part of the emitted wavepacket, H(t)·e^(−t/2T₁)/√T₁, in the
/// frame rotating at the emission frequency (so it is real).
pub fn wavepacket_amplitude(t: f64, t1: f64) -> f64 {
    if t < 0.0 {
        0.0
    } else {
        (-t / (2.0 * t1)).exp() / t1.sqrt()
    }
}

/// Ensemble-averaged joint detection density at the two output ports.
pub fn averaged_joint_probability(t0: f64, t1: f64, config: &HomConfig) -> f64 {
    if t0 < 0.0 || t1 < 0.0 {
        return 0.0;
    }
    let tl = config.t1_lifetime;
    let envelope = (-(t0 + t1) / tl).exp() / (4.0 * tl * tl);
    // 2 − 2e^{-x} written to keep precision near the diagonal
    envelope * -2.0 * (-2.0 * config.gamma_pd * (t1 - t0).abs()).exp_m1()
}

/// Joint density for fully distinguishable photons.
pub fn distinguishable_joint_probability(t0: f64, t1: f64, config: &HomConfig) -> f64 {
    if t0 < 0.0 || t1 < 0.0 {
        return 0.0;
    }
    let tl = config.t1_lifetime;
    (-(t0 + t1) / tl).exp() / (2.0 * tl * tl)
}

/// 2∫₀^T dt₀ ∫₀^{T−t₀} dv p(t₀, t₀+v), with t₀ = T·x and v = (T − t₀)·y so the
/// rule never straddles the diagonal.
fn triangle_integral(t_max: f64, rule: &Rule, density: impl Fn(f64, f64) -> f64) -> f64 {
    let unit = rule.mapped(0.0, 1.0);
    let mut total = 0.0;
    for (&x, &wx) in unit.nodes.iter().zip(&unit.weights) {
        let t0 = t_max * x;
        let span = t_max - t0;
        let inner: f64 = unit
            .nodes
            .iter()
            .zip(&unit.weights)
            .map(|(&y, &wy)| wy * density(t0, t0 + span * y))
            .sum();
        total += wx * span * inner;
    }
    2.0 * t_max * total
}

fn converged_triangle(config: &HomConfig, t_max: f64, density: impl Fn(f64, f64) -> f64) -> Result<f64> {
    let mut order = config.quadrature_order;
    let mut prev = triangle_integral(t_max, &gauss_legendre(order)?, &density);
    while order < MAX_QUADRATURE_ORDER {
        order = (order * 2).min(MAX_QUADRATURE_ORDER);
        let next = triangle_integral(t_max, &gauss_legendre(order)?, &density);
        if (next - prev).abs() < CONVERGENCE_TOL {
            return Ok(next);
        }
        prev = next;
    }
    Err(Error::Numerical(format!(
        "coincidence quadrature did not converge to {CONVERGENCE_TOL:e} by order {MAX_QUADRATURE_ORDER}"
    )))
}

/// Coincidence probability over the collection window. The infinite window
/// uses the closed form ½(1 − Γ₀/(Γ₀+2Γ_PD)) (½ when distinguishable).
pub fn coincidence_probability(config: &HomConfig, distinguishable: bool) -> Result<f64> {
    config.validate()?;
    match config.window {
        Window::Infinite => Ok(if distinguishable {
            0.5
        } else {
            0.5 * (1.0 - closed_form_visibility(config.t1_lifetime, config.gamma_pd)?)
        }),
        Window::Finite(0.0) => Ok(0.0),
        Window::Finite(t_max) => {
            if distinguishable {
                converged_triangle(config, t_max, |a, b| distinguishable_joint_probability(a, b, config))
            } else {
                converged_triangle(config, t_max, |a, b| averaged_joint_probability(a, b, config))
            }
        }
    }
}

/// Infinite-window visibility Γ₀/(Γ₀ + 2Γ_PD) = 1/θ.
pub fn closed_form_visibility(t1: f64, gamma_pd: f64) -> Result<f64> {
    if !(t1 > 0.0) || !(gamma_pd >= 0.0) {
        return Err(Error::Domain(format!(
            "need t1 > 0 and gamma_pd >= 0, got {t1}, {gamma_pd}"
        )));
    }
    let g0 = 1.0 / t1;
    Ok(g0 / (g0 + 2.0 * gamma_pd))
}

/// V = 1 − P_coinc / P_coinc(distinguishable).
pub fn visibility(config: &HomConfig) -> Result<HomResult> {
    let p_dist = coincidence_probability(config, true)?;
    if !(p_dist > 0.0) {
        return Err(Error::Degenerate("collection window admits no coincidences".into()));
    }
    let p = coincidence_probability(config, false)?;
    Ok(HomResult {
        p_coincidence: p,
        p_coincidence_distinguishable: p_dist,
        visibility: 1.0 - p / p_dist,
    })
}

/// Visibility over normalised linewidths θ = 1 + 2Γ_PD/Γ₀.
pub fn visibility_vs_theta(theta_grid: &[f64], t1: f64, window: Window) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = theta_grid.iter().find(|&&th| !(th >= 1.0)) {
        return Err(Error::Domain(format!("theta must be >= 1, got {bad}")));
    }
    let gamma0 = 1.0 / t1;
    theta_grid
        .par_iter()
        .map(|&theta| {
            let cfg = HomConfig::new(t1, 0.5 * (theta - 1.0) * gamma0, window)?;
            Ok((theta, visibility(&cfg)?.visibility))
        })
        .collect()
}

/// Visibility over finite collection windows.
pub fn visibility_vs_window(t_max_grid: &[f64], config: &HomConfig) -> Result<Vec<(f64, f64)>> {
    if let Some(bad) = t_max_grid.iter().find(|&&t| !(t > 0.0)) {
        return Err(Error::Domain(format!("window lengths must be > 0, got {bad}")));
    }
    t_max_grid
        .par_iter()
        .map(|&t| Ok((t, visibility(&config.with_window(Window::Finite(t))?)?.visibility)))
        .collect()
}

/// Monte-Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleEstimate {
    pub result: HomResult,
    pub standard_error: f64,
    pub accepted: u64,
}

const MC_CHUNK: usize = 1 << 14;

/// Stochastic estimate of the visibility: detection times drawn from the
/// emission profile, each photon's phase a Wiener process with variance rate
/// 2Γ_PD, interference term −2cos(ΔΦ₁ − ΔΦ₂). Deterministic for a given seed
/// regardless of thread count.
pub fn mc_phase_oracle(config: &HomConfig, n_trajectories: usize, seed: u64) -> Result<OracleEstimate> {
    config.validate()?;
    if n_trajectories == 0 {
        return Err(Error::Usage("need at least one trajectory".into()));
    }
    let emission = Exp::new(config.gamma0()).map_err(|e| Error::Domain(e.to_string()))?;
    let t_max = match config.window {
        Window::Finite(t) => t,
        Window::Infinite => f64::INFINITY,
    };
    let chunks = n_trajectories.div_ceil(MC_CHUNK);
    let partials: Vec<(u64, f64, f64)> = (0..chunks)
        .into_par_iter()
        .map(|chunk| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(chunk as u64);
            let count = MC_CHUNK.min(n_trajectories - chunk * MC_CHUNK);
            let (mut n, mut s1, mut s2) = (0u64, 0.0, 0.0);
            for _ in 0..count {
                let t0 = emission.sample(&mut rng);
                let t1 = emission.sample(&mut rng);
                let z1: f64 = rng.sample(StandardNormal);
                let z2: f64 = rng.sample(StandardNormal);
                if t0 >= t_max || t1 >= t_max {
                    continue;
                }
                let spread = (2.0 * config.gamma_pd * (t1 - t0).abs()).sqrt();
                let c = (spread * (z1 - z2)).cos();
                n += 1;
                s1 += c;
                s2 += c * c;
            }
            (n, s1, s2)
        })
        .collect();
    let (n, s1, s2) = partials
        .iter()
        .fold((0u64, 0.0, 0.0), |acc, p| (acc.0 + p.0, acc.1 + p.1, acc.2 + p.2));
    if n == 0 {
        return Err(Error::Degenerate("no trajectory landed inside the window".into()));
    }
    let nf = n as f64;
    let mean = s1 / nf;
    let var = if n > 1 {
        ((s2 - nf * mean * mean) / (nf - 1.0)).max(0.0)
    } else {
        0.0
    };
    let accept = nf / n_trajectories as f64;
    Ok(OracleEstimate {
        result: HomResult {
            p_coincidence: 0.5 * accept * (1.0 - mean),
            p_coincidence_distinguishable: 0.5 * accept,
            visibility: mean,
        },
        standard_error: (var / nf).sqrt(),
        accepted: n,
    })
}
