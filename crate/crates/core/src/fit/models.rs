use rayon::prelude::*;

use super::{fit_least_squares, FitProblem, FitResult, Parameter};
use crate::emitter::{EmitterParams, TimeTrace};
use crate::error::{Error, Result};
use crate::sequence::{contrast_curve, rabi_populations_at, ContrastCurve, ContrastOptions, PulseMode, SequenceKind};
use crate::signal::dominant_angular_frequency;
use crate::spectral::{sampled_fwhm, EnsembleSettings, GAUSSIAN_FWHM_PER_SIGMA};

/// How squared residuals are weighted.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum Weighting {
    /// 1/max(counts, 1).
    #[default]
    Poisson,
    Uniform,
    /// Known one-sigma error per point; weight 1/σ².
    Sigma(Vec<f64>),
}

impl Weighting {
    fn weights(&self, data: &[f64]) -> Result<Option<Vec<f64>>> {
        match self {
            Weighting::Poisson => Ok(Some(data.iter().map(|c| 1.0 / c.max(1.0)).collect())),
            Weighting::Uniform => Ok(None),
            Weighting::Sigma(s) => {
                if s.len() != data.len() {
                    return Err(Error::Usage(format!("{} sigmas for {} points", s.len(), data.len())));
                }
                if s.iter().any(|v| !(*v > 0.0 && v.is_finite())) {
                    return Err(Error::Domain("sigmas must be finite and > 0".into()));
                }
                Ok(Some(s.iter().map(|v| 1.0 / (v * v)).collect()))
            }
        }
    }
}

/// Weighted least-squares line through (x, y): (intercept, slope).
fn line_fit(x: &[f64], y: &[f64], w: &[f64]) -> Option<(f64, f64)> {
    let sw: f64 = w.iter().sum();
    let sx: f64 = x.iter().zip(w).map(|(a, b)| a * b).sum();
    let sy: f64 = y.iter().zip(w).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().zip(w).map(|(a, b)| a * a * b).sum();
    let sxy: f64 = x.iter().zip(y).zip(w).map(|((a, c), b)| a * c * b).sum();
    let det = sw * sxx - sx * sx;
    if !(det.abs() > 0.0) {
        return None;
    }
    Some(((sxx * sy - sx * sxy) / det, (sw * sxy - sx * sy) / det))
}

/// (amplitude, decay time) from a log-linear regression of the points that
/// stand clear of zero, weighted by y².
fn log_linear(t: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let peak = y.iter().cloned().fold(0.0, f64::max);
    let (ts, ls, ws): (Vec<f64>, Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > 0.05 * peak && **v > 0.0)
        .map(|(a, v)| (*a, v.ln(), v * v))
        .fold((vec![], vec![], vec![]), |mut acc, (a, l, w)| {
            acc.0.push(a);
            acc.1.push(l);
            acc.2.push(w);
            acc
        });
    if ts.len() < 2 {
        return None;
    }
    let (c, m) = line_fit(&ts, &ls, &ws)?;
    (m < 0.0).then(|| (c.exp(), -1.0 / m))
}

fn tail_mean(y: &[f64]) -> f64 {
    let k = (y.len() / 10).max(1);
    y[y.len() - k..].iter().sum::<f64>() / k as f64
}

fn span(x: &[f64]) -> f64 {
    x.last().unwrap() - x.first().unwrap()
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LifetimeOptions {
    pub fixed_background: Option<f64>,
    pub weighting: Weighting,
}

/// A·e^(−t/T₁) + B at bin centres; parameters `amplitude`, `t1`, `background`.
pub fn fit_lifetime(trace: &TimeTrace) -> Result<FitResult> {
    fit_lifetime_with(trace, &LifetimeOptions::default())
}

pub fn fit_lifetime_with(trace: &TimeTrace, options: &LifetimeOptions) -> Result<FitResult> {
    fit_least_squares(&lifetime_problem(trace, options)?)
}

pub fn lifetime_problem(trace: &TimeTrace, options: &LifetimeOptions) -> Result<FitProblem<'static>> {
    let y = trace.counts().to_vec();
    if y.iter().all(|v| *v == 0.0) {
        return Err(Error::Degenerate("lifetime trace is all zero".into()));
    }
    let t = trace.centers();
    let peak = y.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let floor = y.iter().cloned().fold(f64::INFINITY, f64::min);
    let b0 = options.fixed_background.unwrap_or_else(|| {
        // A tail still well above the floor means the trace stops mid-decay.
        let tail = tail_mean(&y);
        if tail - floor < 0.2 * (peak - floor) {
            tail
        } else {
            floor - 0.05 * (peak - floor)
        }
    });
    let shifted: Vec<f64> = y.iter().map(|v| v - b0).collect();
    let (a0, t1_0) =
        log_linear(&t, &shifted).ok_or_else(|| Error::Degenerate("lifetime trace shows no decay".into()))?;
    let width = span(&t).max(trace.widths()[0]);
    let t1_0 = t1_0.min(100.0 * width);
    let background = match options.fixed_background {
        Some(b) => Parameter::fixed("background", b),
        None => Parameter::free("background", b0, f64::NEG_INFINITY, f64::INFINITY).with_scale(a0.abs()),
    };
    let params = vec![
        Parameter::free("amplitude", a0, 0.0, f64::INFINITY).with_scale(a0.abs()),
        Parameter::time("t1", t1_0, 1e3 * width).with_scale(t1_0),
        background,
    ];
    let weights = options.weighting.weights(&y)?;
    let times = t.clone();
    FitProblem::new(
        "exponential",
        params,
        y,
        weights,
        Box::new(move |p| Ok(times.iter().map(|x| p[0] * (-x / p[1]).exp() + p[2]).collect())),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RabiFitOptions {
    pub ensemble: EnsembleSettings,
    /// Counts per unit excited population; `None` fits it.
    pub scale: Option<f64>,
}

impl Default for RabiFitOptions {
    fn default() -> Self {
        Self {
            ensemble: EnsembleSettings::default(),
            scale: Some(1.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RabiFit {
    pub saturation: f64,
    pub omega: f64,
    pub gamma_pd: f64,
    pub result: FitResult,
}

/// Fit Ω and the total pure-dephasing rate to each (s, trace) pair, holding
/// Γ₀ and T₂* from `emitter`. Traces are fitted concurrently.
pub fn fit_rabi(
    traces: &[(f64, TimeTrace)],
    emitter: &EmitterParams,
    options: &RabiFitOptions,
) -> Result<Vec<RabiFit>> {
    if traces.is_empty() {
        return Err(Error::Usage("no Rabi traces given".into()));
    }
    traces
        .par_iter()
        .map(|(s, trace)| {
            let (problem, warnings) = rabi_setup(trace, emitter, options)?;
            let mut result = fit_least_squares(&problem)?;
            let omega = result.value("omega").unwrap_or(f64::NAN);
            if omega * span(&trace.centers()) < 2.0 * std::f64::consts::PI {
                result
                    .warnings
                    .push("trace covers less than one Rabi period; Ω is poorly conditioned".to_string());
            }
            result.warnings.extend(warnings);
            Ok(RabiFit {
                saturation: *s,
                omega,
                gamma_pd: result.value("gamma_pd").unwrap_or(f64::NAN),
                result,
            })
        })
        .collect()
}

/// Problem behind [`fit_rabi`] for one trace: `omega`, `gamma_pd`, `scale`.
pub fn rabi_problem(
    trace: &TimeTrace,
    emitter: &EmitterParams,
    options: &RabiFitOptions,
) -> Result<FitProblem<'static>> {
    Ok(rabi_setup(trace, emitter, options)?.0)
}

fn rabi_setup(
    trace: &TimeTrace,
    emitter: &EmitterParams,
    options: &RabiFitOptions,
) -> Result<(FitProblem<'static>, Vec<String>)> {
    let ensemble = options.ensemble.build(emitter)?;
    let t = trace.centers();
    let y = trace.counts().to_vec();
    let gamma0 = emitter.gamma0();
    let widths = trace.widths();
    let uniform = widths.iter().all(|w| (w - widths[0]).abs() <= 1e-9 * widths[0]);
    let scale0 = options
        .scale
        .unwrap_or_else(|| 2.0 * y.iter().sum::<f64>() / y.len() as f64);
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let centred: Vec<f64> = y.iter().map(|v| v - mean).collect();
    let mut warnings = Vec::new();
    let omega0 = if uniform {
        dominant_angular_frequency(&centred, widths[0]).ok()
    } else {
        None
    };
    let omega0 = match omega0 {
        Some(w) if w > 0.0 => w,
        _ => {
            warnings.push("no oscillation frequency found in trace".to_string());
            std::f64::consts::PI / span(&t).max(widths[0])
        }
    };
    let mut params = vec![
        Parameter::free("omega", omega0, 0.0, f64::INFINITY).with_scale(omega0),
        Parameter::rate("gamma_pd", 0.5 * gamma0).with_scale(gamma0),
    ];
    params.push(match options.scale {
        Some(v) => Parameter::fixed("scale", v),
        None => Parameter::free("scale", scale0, 0.0, f64::INFINITY).with_scale(scale0.abs().max(1e-300)),
    });
    let t1 = emitter.t1_lifetime();
    let t2 = emitter.t2_star();
    let weights = if options.scale.is_some() {
        None
    } else {
        Weighting::Poisson.weights(&y)?
    };
    let problem = FitProblem::new(
        "rabi",
        params,
        y,
        weights,
        Box::new(move |p| {
            let e = EmitterParams::new(t1, p[1], 0.0, t2)?;
            Ok(rabi_populations_at(&e, p[0], 0.0, &t, &ensemble)?
                .into_iter()
                .map(|v| v * p[2])
                .collect())
        }),
    )?;
    Ok((problem, warnings))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ContrastFitOptions {
    pub contrast: ContrastOptions,
    /// Upper bound on the fitted T₂* (ns).
    pub t2_star_upper: f64,
}

impl Default for ContrastFitOptions {
    fn default() -> Self {
        Self {
            contrast: ContrastOptions::default(),
            t2_star_upper: 1e3,
        }
    }
}

impl ContrastFitOptions {
    pub fn with_mode(mut self, mode: PulseMode) -> Self {
        self.contrast.mode = mode;
        self
    }

    pub fn with_ensemble(mut self, ensemble: EnsembleSettings) -> Self {
        self.contrast.ensemble = ensemble;
        self
    }
}

fn check_curve(curve: &ContrastCurve) -> Result<()> {
    if curve.taus.windows(2).any(|w| w[1] <= w[0]) || curve.taus[0] < 0.0 {
        return Err(Error::Domain(
            "contrast times must be non-negative and increasing".into(),
        ));
    }
    Ok(())
}

/// Fit (`gamma_pd_intrinsic`, `gamma_pd_laser`, `t2_star`) to a Ramsey
/// contrast curve with Γ₀ from `emitter` and pulse Rabi rate `omega`.
pub fn fit_ramsey(
    curve: &ContrastCurve,
    emitter: &EmitterParams,
    omega: f64,
    options: &ContrastFitOptions,
) -> Result<FitResult> {
    fit_least_squares(&ramsey_problem(curve, emitter, omega, options)?)
}

pub fn ramsey_problem(
    curve: &ContrastCurve,
    emitter: &EmitterParams,
    omega: f64,
    options: &ContrastFitOptions,
) -> Result<FitProblem<'static>> {
    check_curve(curve)?;
    let gamma0 = emitter.gamma0();
    let tau_e = curve.one_over_e_time().unwrap_or(2.0 * curve.taus.last().unwrap());
    let rate0 = (1.0 / tau_e - 0.5 * gamma0).max(0.2 * gamma0);
    let t2_0 = (2.0 * tau_e).min(options.t2_star_upper);
    let params = vec![
        Parameter::rate("gamma_pd_intrinsic", 0.5 * rate0).with_scale(gamma0),
        Parameter::rate("gamma_pd_laser", 0.5 * rate0).with_scale(gamma0),
        Parameter::time("t2_star", t2_0, options.t2_star_upper).with_scale(t2_0),
    ];
    let t1 = emitter.t1_lifetime();
    let taus = curve.taus.clone();
    let opts = options.contrast;
    FitProblem::new(
        "ramsey",
        params,
        curve.contrast.clone(),
        None,
        Box::new(move |p| {
            let e = EmitterParams::new(t1, p[0], p[1], Some(p[2]))?;
            Ok(contrast_curve(SequenceKind::Ramsey, &taus, &e, omega, &opts)?.contrast)
        }),
    )
}

/// Fit (`gamma_pd_intrinsic`, `gamma_pd_laser`) to a Hahn-echo contrast
/// curve with Γ₀ and T₂* from `emitter`.
pub fn fit_hahn(
    curve: &ContrastCurve,
    emitter: &EmitterParams,
    omega: f64,
    options: &ContrastFitOptions,
) -> Result<FitResult> {
    fit_least_squares(&hahn_problem(curve, emitter, omega, options)?)
}

pub fn hahn_problem(
    curve: &ContrastCurve,
    emitter: &EmitterParams,
    omega: f64,
    options: &ContrastFitOptions,
) -> Result<FitProblem<'static>> {
    check_curve(curve)?;
    let gamma0 = emitter.gamma0();
    let tau_e = curve.one_over_e_time().unwrap_or(2.0 * curve.taus.last().unwrap());
    let rate0 = (1.0 / tau_e - 0.5 * gamma0).max(0.2 * gamma0);
    let params = vec![
        Parameter::rate("gamma_pd_intrinsic", 0.5 * rate0).with_scale(gamma0),
        Parameter::rate("gamma_pd_laser", 0.5 * rate0).with_scale(gamma0),
    ];
    let t1 = emitter.t1_lifetime();
    let t2 = emitter.t2_star();
    let taus = curve.taus.clone();
    let opts = options.contrast;
    FitProblem::new(
        "hahn",
        params,
        curve.contrast.clone(),
        None,
        Box::new(move |p| {
            let e = EmitterParams::new(t1, p[0], p[1], t2)?;
            Ok(contrast_curve(SequenceKind::Hahn, &taus, &e, omega, &opts)?.contrast)
        }),
    )
}

/// Q(Ω) = Ω/(Γ₀/2 + Γ_PD⁰ + αΩ); parameters `gamma_pd0`, `alpha`.
pub fn fit_q_saturation(points: &[(f64, f64)], t1: f64) -> Result<FitResult> {
    fit_least_squares(&q_saturation_problem(points, t1)?)
}

pub fn q_saturation_problem(points: &[(f64, f64)], t1: f64) -> Result<FitProblem<'static>> {
    if points.len() < 3 {
        return Err(Error::Usage(format!(
            "need at least 3 (Ω, Q) points, got {}",
            points.len()
        )));
    }
    if !(t1 > 0.0) {
        return Err(Error::Domain(format!("lifetime must be > 0, got {t1}")));
    }
    if points.iter().any(|(w, q)| !(*w > 0.0 && *q > 0.0 && q.is_finite())) {
        return Err(Error::Domain("Ω and Q must be positive and finite".into()));
    }
    let gamma0 = 1.0 / t1;
    let omegas: Vec<f64> = points.iter().map(|p| p.0).collect();
    let inv: Vec<f64> = points.iter().map(|(w, q)| w / q).collect();
    let (c, m) = line_fit(&omegas, &inv, &vec![1.0; omegas.len()]).unwrap_or((0.5 * gamma0, 0.0));
    let params = vec![
        Parameter::rate("gamma_pd0", c - 0.5 * gamma0).with_scale(gamma0),
        Parameter::free("alpha", m.max(0.0), 0.0, f64::INFINITY).with_scale(1e-2),
    ];
    FitProblem::new(
        "q_saturation",
        params,
        points.iter().map(|p| p.1).collect(),
        None,
        Box::new(move |p| Ok(omegas.iter().map(|w| w / (0.5 * gamma0 + p[0] + p[1] * w)).collect())),
    )
}

fn swap_parameters(result: &mut FitResult, a: usize, b: usize) {
    result.values.swap(a, b);
    result.uncertainties.swap(a, b);
    result.covariance.swap_rows(a, b);
    result.covariance.swap_columns(a, b);
}

/// A₁e^(−t/τ₁) + A₂e^(−t/τ₂) + C with τ₁ ≤ τ₂; parameters `amplitude_fast`,
/// `tau_fast`, `amplitude_slow`, `tau_slow`, `offset`.
pub fn fit_biexponential(trace: &TimeTrace, weighting: &Weighting) -> Result<FitResult> {
    order_biexponential(fit_least_squares(&biexponential_problem(trace, weighting)?)?)
}

pub fn biexponential_problem(trace: &TimeTrace, weighting: &Weighting) -> Result<FitProblem<'static>> {
    let y = trace.counts().to_vec();
    let t = trace.centers();
    if y.len() < 6 {
        return Err(Error::Usage("bi-exponential fit needs at least 6 points".into()));
    }
    if y.iter().all(|v| *v == y[0]) {
        return Err(Error::Degenerate("trace is flat".into()));
    }
    let c0 = tail_mean(&y);
    let shifted: Vec<f64> = y.iter().map(|v| v - c0).collect();
    let half = y.len() / 2;
    let (a_s, tau_s) = log_linear(&t[half / 2..], &shifted[half / 2..])
        .or_else(|| log_linear(&t, &shifted))
        .ok_or_else(|| Error::Degenerate("trace shows no decay".into()))?;
    let fast: Vec<f64> = t
        .iter()
        .zip(&shifted)
        .map(|(x, v)| v - a_s * (-x / tau_s).exp())
        .collect();
    let (a_f, tau_f) = log_linear(&t[..half], &fast[..half])
        .filter(|(_, tf)| *tf < tau_s)
        .unwrap_or((0.5 * a_s, 0.2 * tau_s));
    let width = span(&t);
    let scale = a_s.abs().max(a_f.abs());
    let params = vec![
        Parameter::free("amplitude_fast", a_f, f64::NEG_INFINITY, f64::INFINITY).with_scale(scale),
        Parameter::time("tau_fast", tau_f, 1e3 * width).with_scale(tau_f),
        Parameter::free("amplitude_slow", a_s, f64::NEG_INFINITY, f64::INFINITY).with_scale(scale),
        Parameter::time("tau_slow", tau_s.min(1e3 * width), 1e3 * width).with_scale(tau_s),
        Parameter::free("offset", c0, f64::NEG_INFINITY, f64::INFINITY).with_scale(scale),
    ];
    let weights = weighting.weights(&y)?;
    let times = t.clone();
    FitProblem::new(
        "biexponential",
        params,
        y,
        weights,
        Box::new(move |p| {
            Ok(times
                .iter()
                .map(|x| p[0] * (-x / p[1]).exp() + p[2] * (-x / p[3]).exp() + p[4])
                .collect())
        }),
    )
}

/// Put the shorter decay first; coincident decay times leave the two
/// amplitudes unidentifiable.
pub fn order_biexponential(mut result: FitResult) -> Result<FitResult> {
    let (tf, ts) = (result.values[1], result.values[3]);
    if (tf - ts).abs() <= 1e-3 * ts.max(tf) {
        return Err(Error::RankDeficient {
            params: vec!["amplitude_fast".into(), "amplitude_slow".into()],
        });
    }
    if tf > ts {
        swap_parameters(&mut result, 0, 2);
        swap_parameters(&mut result, 1, 3);
    }
    Ok(result)
}

fn peak_guess(x: &[f64], y: &[f64]) -> Result<(f64, f64, f64, f64)> {
    if x.len() != y.len() || x.len() < 5 {
        return Err(Error::Usage("lineshape needs at least 5 matching points".into()));
    }
    if x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Domain("lineshape grid must be increasing".into()));
    }
    let c0 = y[0].min(y[y.len() - 1]);
    let (k, &peak) = y.iter().enumerate().max_by(|a, b| a.1.total_cmp(b.1)).unwrap();
    if !(peak > c0) {
        return Err(Error::Degenerate("lineshape has no peak".into()));
    }
    let shifted: Vec<f64> = y.iter().map(|v| v - c0).collect();
    let fwhm = sampled_fwhm(x, &shifted).unwrap_or(0.25 * span(x));
    Ok((peak - c0, x[k], fwhm, c0))
}

fn peak_problem(
    id: &str,
    x: &[f64],
    y: &[f64],
    weighting: &Weighting,
    shape: fn(f64) -> f64,
) -> Result<FitProblem<'static>> {
    let (a0, x0, w0, c0) = peak_guess(x, y)?;
    let params = vec![
        Parameter::free("amplitude", a0, f64::NEG_INFINITY, f64::INFINITY).with_scale(a0),
        Parameter::free("center", x0, f64::NEG_INFINITY, f64::INFINITY).with_scale(w0),
        Parameter::free("fwhm", w0, 0.0, f64::INFINITY).with_scale(w0),
        Parameter::free("offset", c0, f64::NEG_INFINITY, f64::INFINITY).with_scale(a0),
    ];
    let grid = x.to_vec();
    FitProblem::new(
        id,
        params,
        y.to_vec(),
        weighting.weights(y)?,
        Box::new(move |p| {
            if !(p[2] > 0.0) {
                return Err(Error::Domain("fwhm must be > 0".into()));
            }
            Ok(grid.iter().map(|v| p[0] * shape((v - p[1]) / p[2]) + p[3]).collect())
        }),
    )
}

/// Lorentzian of unit height in units of its FWHM.
fn lorentz_unit(u: f64) -> f64 {
    1.0 / (1.0 + 4.0 * u * u)
}

fn gauss_unit(u: f64) -> f64 {
    let z = u * GAUSSIAN_FWHM_PER_SIGMA;
    (-0.5 * z * z).exp()
}

/// A·γ²/((x−x₀)²+γ²) + C with γ = FWHM/2; parameters `amplitude`, `center`,
/// `fwhm`, `offset`.
pub fn fit_lorentzian(grid: &[f64], values: &[f64], weighting: &Weighting) -> Result<FitResult> {
    fit_least_squares(&lorentzian_problem(grid, values, weighting)?)
}

pub fn lorentzian_problem(grid: &[f64], values: &[f64], weighting: &Weighting) -> Result<FitProblem<'static>> {
    peak_problem("lorentzian", grid, values, weighting, lorentz_unit)
}

/// A·exp(−(x−x₀)²/2σ²) + C with FWHM = 2√(2 ln 2)σ.
pub fn fit_gaussian(grid: &[f64], values: &[f64], weighting: &Weighting) -> Result<FitResult> {
    fit_least_squares(&gaussian_problem(grid, values, weighting)?)
}

pub fn gaussian_problem(grid: &[f64], values: &[f64], weighting: &Weighting) -> Result<FitProblem<'static>> {
    peak_problem("gaussian", grid, values, weighting, gauss_unit)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::{rabi_from_saturation, simulate_rabi};
    use crate::spectral::gauss_hermite_ensemble;
    use crate::units::{mhz_to_rad_per_ns, rad_per_ns_to_mhz};
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal, Poisson};

    const A: f64 = 1.423e-5;
    const T1: f64 = 7.44;
    const B: f64 = 5.6e-8;

    fn decay(bins: usize, end: f64) -> TimeTrace {
        TimeTrace::sample(0.0, end, bins, |t| A * (-t / T1).exp() + B).unwrap()
    }

    #[test]
    fn lifetime_exact_data() {
        let res = fit_lifetime(&decay(120, 60.0)).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.value("t1").unwrap(), T1, max_relative = 1e-8);
        assert_relative_eq!(res.value("amplitude").unwrap(), A, max_relative = 1e-8);
        assert_relative_eq!(res.value("background").unwrap(), B, max_relative = 1e-5);
    }

    #[test]
    fn lifetime_fixed_background() {
        let trace = TimeTrace::sample(0.0, 50.0, 100, |t| A * (-t / T1).exp()).unwrap();
        let opts = LifetimeOptions {
            fixed_background: Some(0.0),
            weighting: Weighting::Uniform,
        };
        let res = fit_lifetime_with(&trace, &opts).unwrap();
        assert_relative_eq!(res.value("t1").unwrap(), T1, max_relative = 1e-10);
        assert_eq!(res.value("background"), Some(0.0));
    }

    #[test]
    fn lifetime_noise_within_three_sigma() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let clean = decay(150, 75.0);
        let noisy: Vec<f64> = clean
            .counts()
            .iter()
            .map(|v| v + 0.01 * A * Normal::new(0.0, 1.0).unwrap().sample(&mut rng))
            .collect();
        let trace = TimeTrace::new(clean.bin_edges().to_vec(), noisy).unwrap();
        let res = fit_lifetime(&trace).unwrap();
        for (name, truth) in [("amplitude", A), ("t1", T1), ("background", B)] {
            let z = (res.value(name).unwrap() - truth).abs() / res.uncertainty(name).unwrap();
            assert!(z < 3.0, "{name}: z = {z}");
        }
    }

    #[test]
    fn lifetime_poisson_counts() {
        // Scale so the peak bin holds ~2e4 counts.
        let scale = 2e4 / A;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let clean = decay(200, 50.0);
        let counts: Vec<f64> = clean
            .counts()
            .iter()
            .map(|v| Poisson::new(v * scale).unwrap().sample(&mut rng))
            .collect();
        let res = fit_lifetime(&TimeTrace::new(clean.bin_edges().to_vec(), counts).unwrap()).unwrap();
        assert!((res.value("t1").unwrap() - T1).abs() < 0.2);
    }

    #[test]
    fn truncated_trace_is_less_informative() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let noise = Normal::new(0.0, 0.01 * A).unwrap();
        let clean = TimeTrace::sample(0.0, 60.0, 240, |t| A * (-t / T1).exp() + B).unwrap();
        let noisy = clean.counts().iter().map(|v| v + noise.sample(&mut rng)).collect();
        let full = TimeTrace::new(clean.bin_edges().to_vec(), noisy).unwrap();
        let short = TimeTrace::new(full.bin_edges()[..15].to_vec(), full.counts()[..14].to_vec()).unwrap();
        assert!(short.bin_edges().last().unwrap() < &(T1 / 2.0));
        let s_full = fit_lifetime(&full).unwrap().uncertainty("t1").unwrap();
        let s_short = fit_lifetime(&short).unwrap().uncertainty("t1").unwrap();
        assert!(s_short > s_full, "{s_short} vs {s_full}");
    }

    #[test]
    fn lifetime_all_zero_is_degenerate() {
        let trace = TimeTrace::uniform(0.0, 10.0, vec![0.0; 20]).unwrap();
        assert!(matches!(fit_lifetime(&trace), Err(Error::Degenerate(_))));
    }

    fn rabi_emitter() -> EmitterParams {
        EmitterParams::new(T1, 0.0, 0.0, Some(4.54)).unwrap()
    }

    #[test]
    fn rabi_round_trip_recovers_omega() {
        let truth = EmitterParams::new(T1, mhz_to_rad_per_ns(20.0), 0.0, Some(4.54)).unwrap();
        let settings = EnsembleSettings::GaussHermite { nodes: 32 };
        let trace = simulate_rabi(&truth, 102.0, 2.0, 100, &settings).unwrap();
        let opts = RabiFitOptions {
            ensemble: settings,
            scale: Some(1.0),
        };
        let fits = fit_rabi(&[(102.0, trace)], &rabi_emitter(), &opts).unwrap();
        let omega = rabi_from_saturation(102.0, T1).unwrap();
        assert_relative_eq!(fits[0].omega, omega, max_relative = 1e-6);
        assert_relative_eq!(
            rad_per_ns_to_mhz(fits[0].omega),
            rad_per_ns_to_mhz(omega),
            max_relative = 1e-2
        );
        assert_relative_eq!(fits[0].gamma_pd, mhz_to_rad_per_ns(20.0), max_relative = 1e-4);
    }

    #[test]
    fn rabi_without_dephasing_recovers_zero() {
        let settings = EnsembleSettings::GaussHermite { nodes: 32 };
        let trace = simulate_rabi(&rabi_emitter(), 367.0, 2.0, 100, &settings).unwrap();
        let opts = RabiFitOptions {
            ensemble: settings,
            scale: Some(1.0),
        };
        let fits = fit_rabi(&[(367.0, trace)], &rabi_emitter(), &opts).unwrap();
        assert!(fits[0].gamma_pd < mhz_to_rad_per_ns(0.1));
    }

    #[test]
    fn short_rabi_trace_warns() {
        let settings = EnsembleSettings::GaussHermite { nodes: 16 };
        let trace = simulate_rabi(&rabi_emitter(), 2.0, 5.0, 60, &settings).unwrap();
        let opts = RabiFitOptions {
            ensemble: settings,
            scale: Some(1.0),
        };
        let fits = fit_rabi(&[(2.0, trace)], &rabi_emitter(), &opts).unwrap();
        assert!(fits[0].result.warnings.iter().any(|w| w.contains("Rabi period")));
    }

    fn fast_contrast() -> ContrastFitOptions {
        ContrastFitOptions::default().with_ensemble(EnsembleSettings::GaussHermite { nodes: 16 })
    }

    #[test]
    fn ramsey_exact_round_trip() {
        let opts = fast_contrast();
        let omega = rabi_from_saturation(367.0, T1).unwrap();
        let truth = EmitterParams::new(T1, mhz_to_rad_per_ns(6.99), mhz_to_rad_per_ns(14.8), Some(4.54)).unwrap();
        let taus: Vec<f64> = (0..30).map(|i| 0.1 * i as f64).collect();
        let curve = contrast_curve(SequenceKind::Ramsey, &taus, &truth, omega, &opts.contrast).unwrap();
        let res = fit_ramsey(&curve, &EmitterParams::lifetime_limited(T1).unwrap(), omega, &opts).unwrap();
        assert!(res.converged);
        assert_relative_eq!(res.value("t2_star").unwrap(), 4.54, max_relative = 1e-4);
        assert_relative_eq!(
            res.value("gamma_pd_intrinsic").unwrap(),
            mhz_to_rad_per_ns(6.99),
            max_relative = 1e-3
        );
        assert_relative_eq!(
            res.value("gamma_pd_laser").unwrap(),
            mhz_to_rad_per_ns(14.8),
            max_relative = 1e-3
        );
    }

    #[test]
    fn ramsey_without_inhomogeneity_hits_bound() {
        let opts = fast_contrast();
        let omega = rabi_from_saturation(367.0, T1).unwrap();
        let truth = EmitterParams::new(T1, mhz_to_rad_per_ns(6.99), mhz_to_rad_per_ns(14.8), None).unwrap();
        let taus: Vec<f64> = (0..30).map(|i| 0.2 * i as f64).collect();
        let curve = contrast_curve(SequenceKind::Ramsey, &taus, &truth, omega, &opts.contrast).unwrap();
        let res = fit_ramsey(&curve, &EmitterParams::lifetime_limited(T1).unwrap(), omega, &opts).unwrap();
        assert!(res.is_at_bound("t2_star"), "{res:?}");
        assert_eq!(res.value("t2_star"), Some(opts.t2_star_upper));
    }

    #[test]
    fn hahn_ideal_pulses_cannot_see_laser_dephasing() {
        let opts = fast_contrast().with_mode(PulseMode::Ideal);
        let omega = rabi_from_saturation(367.0, T1).unwrap();
        let truth = EmitterParams::new(T1, mhz_to_rad_per_ns(6.39), mhz_to_rad_per_ns(16.0), Some(4.54)).unwrap();
        let taus: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        let curve = contrast_curve(SequenceKind::Hahn, &taus, &truth, omega, &opts.contrast).unwrap();
        match fit_hahn(&curve, &truth, omega, &opts) {
            Err(Error::RankDeficient { params }) => assert_eq!(params, vec!["gamma_pd_laser".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn hahn_zero_decoherence_is_flat() {
        let opts = fast_contrast();
        let omega = rabi_from_saturation(367.0, T1).unwrap();
        let closed = EmitterParams::new(1e12, 0.0, 0.0, None).unwrap();
        let taus: Vec<f64> = (0..20).map(|i| 0.3 * i as f64).collect();
        let curve = contrast_curve(SequenceKind::Hahn, &taus, &closed, omega, &opts.contrast).unwrap();
        assert!(curve.contrast.iter().all(|c| (c - 1.0).abs() < 1e-6));
        let res = fit_hahn(&curve, &closed, omega, &opts).unwrap();
        for name in ["gamma_pd_intrinsic", "gamma_pd_laser"] {
            assert!(res.value(name).unwrap() < 1e-6, "{name}: {:?}", res.value(name));
        }
    }

    #[test]
    fn ramsey_envelope_scales_with_rates() {
        let opts = fast_contrast().with_mode(PulseMode::Ideal);
        let e = EmitterParams::new(T1, mhz_to_rad_per_ns(6.99), mhz_to_rad_per_ns(14.8), Some(4.54)).unwrap();
        let fast = e.time_rescaled(2.0).unwrap();
        let taus: Vec<f64> = (1..200).map(|i| 0.02 * i as f64).collect();
        let a = contrast_curve(SequenceKind::Ramsey, &taus, &e, 1.0, &opts.contrast).unwrap();
        let b = contrast_curve(SequenceKind::Ramsey, &taus, &fast, 1.0, &opts.contrast).unwrap();
        let ta = a.one_over_e_time().unwrap();
        let tb = b.one_over_e_time().unwrap();
        assert_relative_eq!(tb, ta / 2.0, max_relative = 1e-3);
        let _ = gauss_hermite_ensemble(4.54, 16).unwrap();
    }

    #[test]
    fn q_saturation_linear_when_alpha_zero() {
        let g0 = 1.0 / T1;
        let pts: Vec<(f64, f64)> = (1..8)
            .map(|i| {
                let w = 0.2 * i as f64;
                (w, w / (0.5 * g0 + 0.02))
            })
            .collect();
        let res = fit_q_saturation(&pts, T1).unwrap();
        assert!(res.value("alpha").unwrap() < 1e-4);
        assert_relative_eq!(res.value("gamma_pd0").unwrap(), 0.02, max_relative = 1e-6);
    }

    #[test]
    fn q_saturation_plateau() {
        let g0 = 1.0 / T1;
        let pts: Vec<(f64, f64)> = (1..12)
            .map(|i| {
                let w = 0.3 * i as f64;
                (w, w / (0.5 * g0 + 0.03 + 0.05 * w))
            })
            .collect();
        let res = fit_q_saturation(&pts, T1).unwrap();
        let alpha = res.value("alpha").unwrap();
        assert_relative_eq!(alpha, 0.05, max_relative = 1e-6);
        let big = 1e6;
        let q = big / (0.5 * g0 + res.value("gamma_pd0").unwrap() + alpha * big);
        assert_relative_eq!(q, 1.0 / alpha, max_relative = 1e-2);
    }

    #[test]
    fn biexponential_round_trip() {
        let model = crate::sequence::BiExponential {
            amplitude_fast: 0.6,
            tau_fast: 40.0,
            amplitude_slow: 0.3,
            tau_slow: 900.0,
            offset: 0.1,
        };
        let trace = crate::sequence::dark_state_pumping_curve(&model, 0.0, 4000.0, 400).unwrap();
        let res = fit_biexponential(&trace, &Weighting::Uniform).unwrap();
        assert_relative_eq!(res.value("tau_fast").unwrap(), 40.0, max_relative = 1e-6);
        assert_relative_eq!(res.value("tau_slow").unwrap(), 900.0, max_relative = 1e-6);
        assert_relative_eq!(res.value("offset").unwrap(), 0.1, max_relative = 1e-6);
    }

    #[test]
    fn biexponential_equal_rates_is_degenerate() {
        let trace = TimeTrace::sample(0.0, 500.0, 200, |t| 0.9 * (-t / 80.0).exp() + 0.1).unwrap();
        match fit_biexponential(&trace, &Weighting::Uniform) {
            Err(Error::RankDeficient { params }) => {
                assert!(
                    params
                        .iter()
                        .any(|p| p.starts_with("amplitude") || p.starts_with("tau")),
                    "{params:?}"
                )
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn lineshape_widths() {
        let grid: Vec<f64> = (-200..=200).map(|i| i as f64).collect();
        let lor: Vec<f64> = grid
            .iter()
            .map(|x| 1.0 / (1.0 + (2.0 * (x - 3.0) / 35.0).powi(2)))
            .collect();
        let res = fit_lorentzian(&grid, &lor, &Weighting::Uniform).unwrap();
        assert_relative_eq!(res.value("fwhm").unwrap(), 35.0, max_relative = 1e-6);
        let sigma = 64.0 / GAUSSIAN_FWHM_PER_SIGMA;
        let gau: Vec<f64> = grid
            .iter()
            .map(|x| 5.0 * (-0.5 * (x / sigma).powi(2)).exp() + 0.2)
            .collect();
        let res = fit_gaussian(&grid, &gau, &Weighting::Uniform).unwrap();
        assert_relative_eq!(res.value("fwhm").unwrap(), 64.0, max_relative = 1e-6);
        assert_relative_eq!(res.value("offset").unwrap(), 0.2, max_relative = 1e-6);
    }
}
