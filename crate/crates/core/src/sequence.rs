//! Experimental sequences on the driven emitter: Rabi oscillations, detuned
//! Rabi maps, Ramsey and Hahn-echo contrast, and derived figures of merit.

use std::f64::consts::PI;

use nalgebra::Matrix4;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::emitter::{uniform_centers, DensityMatrix, DriveSegment, EmitterParams, PulseSequence, TimeTrace};
use crate::error::{Error, Result};
use crate::lindblad::{
    build_liouvillian, from_vector, propagate_segment, propagate_to_end, rotate, to_vector, undriven_propagator,
};
use crate::quadrature::gauss_legendre;
use crate::spectral::{average_over, DetuningEnsemble, EnsembleSettings};

/// Ω = Γ₀√(s/2).
pub fn rabi_from_saturation(s: f64, t1: f64) -> Result<f64> {
    if !(s >= 0.0) {
        return Err(Error::Domain(format!("saturation parameter must be >= 0, got {s}")));
    }
    if !(t1 > 0.0) {
        return Err(Error::Domain(format!("lifetime must be > 0, got {t1}")));
    }
    Ok((s / 2.0).sqrt() / t1)
}

/// s = 2(ΩT₁)².
pub fn saturation_from_rabi(omega: f64, t1: f64) -> Result<f64> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("Rabi rate must be >= 0, got {omega}")));
    }
    if !(t1 > 0.0) {
        return Err(Error::Domain(format!("lifetime must be > 0, got {t1}")));
    }
    Ok(2.0 * (omega * t1).powi(2))
}

/// Excited population during a square pulse starting in the ground state,
/// sampled at the centres of `bins` uniform bins over `[0, pulse_length]`.
pub fn rabi_populations(
    emitter: &EmitterParams,
    omega: f64,
    detuning: f64,
    pulse_length: f64,
    bins: usize,
    ensemble: &DetuningEnsemble,
) -> Result<Vec<f64>> {
    if !(pulse_length > 0.0) {
        return Err(Error::Domain(format!("pulse length must be > 0, got {pulse_length}")));
    }
    let times = uniform_centers(0.0, pulse_length, bins)?;
    rabi_populations_at(emitter, omega, detuning, &times, ensemble)
}

/// Excited population at arbitrary sorted times after the pulse starts.
pub fn rabi_populations_at(
    emitter: &EmitterParams,
    omega: f64,
    detuning: f64,
    times: &[f64],
    ensemble: &DetuningEnsemble,
) -> Result<Vec<f64>> {
    let end = times.last().copied().unwrap_or(0.0).max(0.0);
    let segment = DriveSegment::driven(end, omega, detuning, 0.0)?;
    average_over(ensemble, |d| {
        Ok(
            propagate_segment(&DensityMatrix::ground(), &segment, emitter, d, times)?
                .iter()
                .map(DensityMatrix::excited_population)
                .collect(),
        )
    })
}

/// Ensemble-averaged ρ₁₁(t) during a resonant pulse at saturation `s`.
pub fn simulate_rabi(
    emitter: &EmitterParams,
    s: f64,
    pulse_length: f64,
    bins: usize,
    ensemble: &EnsembleSettings,
) -> Result<TimeTrace> {
    let omega = rabi_from_saturation(s, emitter.t1_lifetime())?;
    let nodes = ensemble.build(emitter)?;
    let pops = rabi_populations(emitter, omega, 0.0, pulse_length, bins, &nodes)?;
    TimeTrace::uniform(0.0, pulse_length, pops)
}

/// One Rabi trace per laser detuning.
pub fn simulate_detuned_rabi_map(
    emitter: &EmitterParams,
    s: f64,
    delta_grid: &[f64],
    pulse_length: f64,
    bins: usize,
    ensemble: &EnsembleSettings,
) -> Result<Vec<TimeTrace>> {
    if delta_grid.is_empty() {
        return Err(Error::Usage("detuning grid is empty".into()));
    }
    let omega = rabi_from_saturation(s, emitter.t1_lifetime())?;
    let nodes = ensemble.build(emitter)?;
    delta_grid
        .par_iter()
        .map(|&delta| {
            let pops = rabi_populations(emitter, omega, delta, pulse_length, bins, &nodes)?;
            TimeTrace::uniform(0.0, pulse_length, pops)
        })
        .collect()
}

/// Time and height of the first local maximum, refined by a parabola through
/// the three bins around it.
pub fn first_maximum(trace: &TimeTrace) -> Option<(f64, f64)> {
    let y = trace.counts();
    let x = trace.centers();
    let k = (1..y.len().saturating_sub(1)).find(|&i| y[i] >= y[i - 1] && y[i] > y[i + 1])?;
    let (a, b, c) = (y[k - 1], y[k], y[k + 1]);
    let denom = a - 2.0 * b + c;
    if denom == 0.0 {
        return Some((x[k], b));
    }
    let shift = 0.5 * (a - c) / denom;
    let h = x[k + 1] - x[k];
    Some((x[k] + shift * h, b - 0.25 * (a - c) * shift))
}

/// Rabi quality factor Q = Ω/(Γ₀/2 + Γ_PD): Ω times the 1/e envelope time.
/// A vanishing envelope decay rate gives `f64::INFINITY`.
pub fn quality_factor(omega: f64, emitter: &EmitterParams) -> Result<f64> {
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("Rabi rate must be > 0, got {omega}")));
    }
    let decay = 0.5 * emitter.gamma0() + emitter.gamma_pd(true);
    if decay == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(omega / decay)
}

/// Q(Ω) when the pure dephasing grows linearly with drive, Γ_PD = Γ_PD⁰ + αΩ.
pub fn quality_factor_linear_dephasing(omega: f64, t1: f64, gamma_pd0: f64, alpha: f64) -> f64 {
    omega / (0.5 / t1 + gamma_pd0 + alpha * omega)
}

/// π/2(φ=0) — τ free — π/2(φ=readout_phase).
pub fn build_ramsey(tau: f64, readout_phase: f64, omega: f64) -> Result<PulseSequence> {
    check_pulse_args(tau, omega)?;
    let half_pi = 0.5 * PI / omega;
    let segments = vec![
        DriveSegment::driven(half_pi, omega, 0.0, 0.0)?,
        DriveSegment::free(tau, 0.0)?,
        DriveSegment::driven(half_pi, omega, 0.0, readout_phase)?,
    ];
    let end = 2.0 * half_pi + tau;
    PulseSequence::new(segments, (end, end))
}

/// π/2(0) — τ/2 — π(0) — τ/2 — π/2(φ=readout_phase).
pub fn build_hahn(tau: f64, readout_phase: f64, omega: f64) -> Result<PulseSequence> {
    check_pulse_args(tau, omega)?;
    let half_pi = 0.5 * PI / omega;
    let segments = vec![
        DriveSegment::driven(half_pi, omega, 0.0, 0.0)?,
        DriveSegment::free(0.5 * tau, 0.0)?,
        DriveSegment::driven(2.0 * half_pi, omega, 0.0, 0.0)?,
        DriveSegment::free(0.5 * tau, 0.0)?,
        DriveSegment::driven(half_pi, omega, 0.0, readout_phase)?,
    ];
    let end = 4.0 * half_pi + tau;
    PulseSequence::new(segments, (end, end))
}

fn check_pulse_args(tau: f64, omega: f64) -> Result<()> {
    if !(tau >= 0.0) {
        return Err(Error::Domain(format!("free-precession time must be >= 0, got {tau}")));
    }
    if !(omega > 0.0) {
        return Err(Error::Domain(format!("pulse Rabi rate must be > 0, got {omega}")));
    }
    Ok(())
}

/// How driven segments are applied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum PulseMode {
    /// Instantaneous unitary rotations by Ω·duration; free segments still
    /// evolve under the full master equation.
    Ideal,
    /// Finite-duration Lindblad evolution with laser-induced dephasing.
    #[default]
    Physical,
}

/// Segment propagators already computed for one emitter and detuning, and the
/// states reached by the previous run so a shared prefix is not recomputed.
#[derive(Default)]
struct PropagatorCache {
    propagators: Vec<(DriveSegment, Matrix4<Complex64>)>,
    trail: Vec<(DriveSegment, DensityMatrix)>,
}

impl PropagatorCache {
    fn apply(
        &mut self,
        rho: &DensityMatrix,
        seg: &DriveSegment,
        emitter: &EmitterParams,
        extra: f64,
    ) -> Result<DensityMatrix> {
        let prop = match self.propagators.iter().find(|(s, _)| s == seg) {
            Some((_, p)) => *p,
            None => {
                let p = undriven_propagator(seg, emitter, extra)
                    .unwrap_or_else(|| build_liouvillian(seg, emitter, extra).propagator(seg.duration));
                self.propagators.push((*seg, p));
                p
            }
        };
        let out = from_vector(&(prop * to_vector(rho)));
        out.validate()
            .map_err(|e| Error::Numerical(format!("propagation failed: {e}")))?;
        Ok(out)
    }
}

/// State at the start of the readout window, starting from the ground state.
pub fn run_sequence(
    sequence: &PulseSequence,
    emitter: &EmitterParams,
    extra_detuning: f64,
    mode: PulseMode,
) -> Result<DensityMatrix> {
    run_cached(sequence, emitter, extra_detuning, mode, &mut PropagatorCache::default())
}

fn run_cached(
    sequence: &PulseSequence,
    emitter: &EmitterParams,
    extra_detuning: f64,
    mode: PulseMode,
    cache: &mut PropagatorCache,
) -> Result<DensityMatrix> {
    let readout = sequence.readout_window().0;
    let mut rho = DensityMatrix::ground();
    let mut t = 0.0;
    let mut shared = true;
    for (k, seg) in sequence.segments().iter().enumerate() {
        let remaining = readout - t;
        if remaining <= 1e-12 * readout.abs().max(1.0) {
            break;
        }
        let seg = if seg.duration > remaining {
            // readout falls inside this segment
            DriveSegment {
                duration: remaining,
                ..*seg
            }
        } else {
            *seg
        };
        shared = shared && cache.trail.get(k).is_some_and(|(s, _)| *s == seg);
        if shared {
            rho = cache.trail[k].1;
        } else {
            cache.trail.truncate(k);
            rho = match mode {
                PulseMode::Ideal if seg.laser_on => rotate(&rho, seg.rabi_rate * seg.duration, seg.phase),
                _ => cache.apply(&rho, &seg, emitter, extra_detuning)?,
            };
            cache.trail.push((seg, rho));
        }
        t += seg.duration;
    }
    Ok(rho)
}

/// ∫ρ₁₁ dt over the readout window, by Gauss–Legendre quadrature over the
/// segments it overlaps.
pub fn integrated_readout(
    sequence: &PulseSequence,
    emitter: &EmitterParams,
    extra_detuning: f64,
    mode: PulseMode,
) -> Result<f64> {
    let (start, end) = sequence.readout_window();
    if end <= start {
        return Ok(0.0);
    }
    let rule = gauss_legendre(32)?;
    let mut rho = DensityMatrix::ground();
    let mut t = 0.0;
    let mut total = 0.0;
    for seg in sequence.segments() {
        let (a, b) = (t, t + seg.duration);
        let lo = start.max(a);
        let hi = end.min(b);
        if hi > lo {
            let local = rule.mapped(lo - a, hi - a);
            let times = local.nodes.clone();
            let states = if matches!(mode, PulseMode::Ideal) && seg.laser_on {
                return Err(Error::Usage("ideal pulses cannot be integrated over".into()));
            } else {
                propagate_segment(&rho, seg, emitter, extra_detuning, &times)?
            };
            total += states
                .iter()
                .zip(&local.weights)
                .map(|(s, w)| w * s.excited_population())
                .sum::<f64>();
        }
        rho = match mode {
            PulseMode::Ideal if seg.laser_on => rotate(&rho, seg.rabi_rate * seg.duration, seg.phase),
            _ => propagate_to_end(&rho, seg, emitter, extra_detuning)?,
        };
        t = b;
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SequenceKind {
    Ramsey,
    Hahn,
}

impl SequenceKind {
    pub fn build(self, tau: f64, readout_phase: f64, omega: f64) -> Result<PulseSequence> {
        match self {
            SequenceKind::Ramsey => build_ramsey(tau, readout_phase, omega),
            SequenceKind::Hahn => build_hahn(tau, readout_phase, omega),
        }
    }

    /// +1 when the in-phase readout (φ=0) ends in the ground state, −1 when
    /// it ends excited. Ramsey's two π/2 pulses compose to π; Hahn's to 2π.
    fn readout_sign(self) -> f64 {
        match self {
            SequenceKind::Ramsey => -1.0,
            SequenceKind::Hahn => 1.0,
        }
    }
}

/// Free-precession times and contrast normalised to one at τ = 0.
#[derive(Debug, Clone, PartialEq)]
pub struct ContrastCurve {
    pub taus: Vec<f64>,
    pub contrast: Vec<f64>,
}

impl ContrastCurve {
    pub fn new(taus: Vec<f64>, contrast: Vec<f64>) -> Result<Self> {
        if taus.len() != contrast.len() || taus.is_empty() {
            return Err(Error::Domain("contrast curve needs matching non-empty series".into()));
        }
        if contrast.iter().chain(&taus).any(|v| !v.is_finite()) {
            return Err(Error::Numerical("contrast curve has non-finite values".into()));
        }
        Ok(Self { taus, contrast })
    }

    /// τ at which the contrast first falls through 1/e, by linear
    /// interpolation between samples.
    pub fn one_over_e_time(&self) -> Option<f64> {
        let target = (-1.0f64).exp();
        self.taus
            .windows(2)
            .zip(self.contrast.windows(2))
            .find(|(_, c)| c[0] >= target && c[1] < target)
            .map(|(t, c)| t[0] + (c[0] - target) / (c[0] - c[1]) * (t[1] - t[0]))
    }
}

/// Options for contrast evaluation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastOptions {
    pub mode: PulseMode,
    pub ensemble: EnsembleSettings,
    /// Pad every shot to this length (ns) before evaluating.
    pub shot_length: Option<f64>,
}

impl Default for ContrastOptions {
    fn default() -> Self {
        Self {
            mode: PulseMode::Physical,
            ensemble: EnsembleSettings::default(),
            shot_length: None,
        }
    }
}

/// Un-normalised contrast s·(⟨ρ₁₁(φ=π)⟩ − ⟨ρ₁₁(φ=0)⟩) per τ, sign chosen so
/// an undamped sequence has contrast +1.
pub fn raw_contrast(
    kind: SequenceKind,
    taus: &[f64],
    emitter: &EmitterParams,
    omega: f64,
    ensemble: &DetuningEnsemble,
    options: &ContrastOptions,
) -> Result<Vec<f64>> {
    let sequences: Vec<(PulseSequence, PulseSequence)> = taus
        .iter()
        .map(|&tau| {
            let pad = |s: PulseSequence| match options.shot_length {
                Some(len) => s.padded_to(len),
                None => Ok(s),
            };
            Ok((pad(kind.build(tau, 0.0, omega)?)?, pad(kind.build(tau, PI, omega)?)?))
        })
        .collect::<Result<_>>()?;
    let sign = kind.readout_sign();
    average_over(ensemble, |d| {
        let mut cache = PropagatorCache::default();
        sequences
            .iter()
            .map(|(in_phase, flipped)| {
                let p0 = run_cached(in_phase, emitter, d, options.mode, &mut cache)?.excited_population();
                let p1 = run_cached(flipped, emitter, d, options.mode, &mut cache)?.excited_population();
                Ok(sign * (p1 - p0))
            })
            .collect()
    })
}

/// Contrast at every τ in `taus`, normalised by the contrast at τ = 0.
pub fn contrast_curve(
    kind: SequenceKind,
    taus: &[f64],
    emitter: &EmitterParams,
    omega: f64,
    options: &ContrastOptions,
) -> Result<ContrastCurve> {
    if taus.is_empty() {
        return Err(Error::Usage("no free-precession times given".into()));
    }
    let ensemble = options.ensemble.build(emitter)?;
    let mut grid = Vec::with_capacity(taus.len() + 1);
    grid.push(0.0);
    grid.extend_from_slice(taus);
    let raw = raw_contrast(kind, &grid, emitter, omega, &ensemble, options)?;
    let norm = raw[0];
    if !(norm > 0.0) {
        return Err(Error::Degenerate(format!(
            "contrast at zero free precession is {norm}; cannot normalise"
        )));
    }
    ContrastCurve::new(taus.to_vec(), raw[1..].iter().map(|c| c / norm).collect())
}

/// Bi-exponential decay A₁e^(−t/τ₁) + A₂e^(−t/τ₂) + C.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BiExponential {
    pub amplitude_fast: f64,
    pub tau_fast: f64,
    pub amplitude_slow: f64,
    pub tau_slow: f64,
    pub offset: f64,
}

impl BiExponential {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude_fast * (-t / self.tau_fast).exp()
            + self.amplitude_slow * (-t / self.tau_slow).exp()
            + self.offset
    }
}

/// PLE intensity after a reset pulse, sampled on `bins` uniform bins of `[start, end]`.
pub fn dark_state_pumping_curve(model: &BiExponential, start: f64, end: f64, bins: usize) -> Result<TimeTrace> {
    if !(model.tau_fast > 0.0 && model.tau_slow > 0.0) {
        return Err(Error::Domain("decay times must be positive".into()));
    }
    TimeTrace::sample(start, end, bins, |t| model.eval(t))
}
