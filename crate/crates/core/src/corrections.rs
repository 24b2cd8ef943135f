//! Interferometer imperfections and the algebra that maps raw HOM
//! measurements back to intrinsic indistinguishability.
//!
//! Beamsplitter i has transmission Tᵢ = ½ + δᵢ and reflection Rᵢ = 1 − Tᵢ;
//! the classical interference visibility is 1 − ε; g²(0) is the residual
//! multi-photon (background) contribution.

use crate::emitter::TimeTrace;
use crate::error::{Error, Result};

const PAIR_TOL: f64 = 1e-12;

fn check_probability(name: &str, v: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::Domain(format!("{name} must lie in [0, 1], got {v}")));
    }
    Ok(())
}

fn check_pair(t: f64, r: f64) -> Result<()> {
    check_probability("transmission", t)?;
    check_probability("reflection", r)?;
    if (t + r - 1.0).abs() > PAIR_TOL {
        return Err(Error::Domain(format!("T + R = {} for a lossless splitter", t + r)));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferometerModel {
    bs1_transmission: f64,
    bs1_reflection: f64,
    bs2_transmission: f64,
    bs2_reflection: f64,
    epsilon: f64,
    g2_zero: f64,
}

impl InterferometerModel {
    pub fn new(bs1_transmission: f64, bs2_transmission: f64, epsilon: f64, g2_zero: f64) -> Result<Self> {
        let m = Self {
            bs1_transmission,
            bs1_reflection: 1.0 - bs1_transmission,
            bs2_transmission,
            bs2_reflection: 1.0 - bs2_transmission,
            epsilon,
            g2_zero,
        };
        m.validate()?;
        Ok(m)
    }

    /// Balanced splitters, perfect mode overlap, no background.
    pub fn ideal() -> Self {
        Self::new(0.5, 0.5, 0.0, 0.0).expect("ideal interferometer is valid")
    }

    pub fn validate(&self) -> Result<()> {
        check_pair(self.bs1_transmission, self.bs1_reflection)?;
        check_pair(self.bs2_transmission, self.bs2_reflection)?;
        check_probability("epsilon", self.epsilon)?;
        if !(self.g2_zero >= 0.0 && self.g2_zero.is_finite()) {
            return Err(Error::Domain(format!("g2(0) must be >= 0, got {}", self.g2_zero)));
        }
        Ok(())
    }

    pub fn bs1(&self) -> (f64, f64) {
        (self.bs1_transmission, self.bs1_reflection)
    }

    pub fn bs2(&self) -> (f64, f64) {
        (self.bs2_transmission, self.bs2_reflection)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn g2_zero(&self) -> f64 {
        self.g2_zero
    }

    /// δ₁ = T₁ − ½
    pub fn delta1(&self) -> f64 {
        self.bs1_transmission - 0.5
    }

    /// δ₂ = T₂ − ½
    pub fn delta2(&self) -> f64 {
        self.bs2_transmission - 0.5
    }
}

/// Coincidence probability (T₂ − R₂)² for identical photons on an
/// imbalanced recombination splitter.
pub fn p_parallel_ideal_bs(t2: f64, r2: f64) -> Result<f64> {
    check_pair(t2, r2)?;
    Ok((t2 - r2).powi(2))
}

/// 1 − 2R₂T₂ − 2(1−ε)²V·R₂T₂: imbalance plus imperfect mode overlap.
pub fn p_parallel_partial(epsilon: f64, v_intrinsic: f64, t2: f64, r2: f64) -> Result<f64> {
    check_pair(t2, r2)?;
    check_probability("epsilon", epsilon)?;
    let rt = r2 * t2;
    Ok(1.0 - 2.0 * rt - 2.0 * (1.0 - epsilon).powi(2) * v_intrinsic * rt)
}

/// 4[R₁T₁(1 − 2R₂T₂ − 2(1−ε)²V·R₂T₂) + 2g²(0)(1 − 2R₁T₁)R₂T₂].
/// Pass `v_intrinsic = 0` for the orthogonal-polarisation reference.
pub fn p_parallel_full(model: &InterferometerModel, v_intrinsic: f64) -> f64 {
    let rt1 = model.bs1_reflection * model.bs1_transmission;
    let rt2 = model.bs2_reflection * model.bs2_transmission;
    let overlap = (1.0 - model.epsilon).powi(2);
    4.0 * (rt1 * (1.0 - 2.0 * rt2 - 2.0 * overlap * v_intrinsic * rt2) + 2.0 * model.g2_zero * (1.0 - 2.0 * rt1) * rt2)
}

/// V_raw = 1 − P∥/P⊥.
pub fn raw_visibility(p_parallel: f64, p_perpendicular: f64) -> Result<f64> {
    if !(p_perpendicular > 0.0) {
        return Err(Error::Degenerate(format!(
            "perpendicular coincidence probability must be > 0, got {p_perpendicular}"
        )));
    }
    Ok(1.0 - p_parallel / p_perpendicular)
}

fn correction_factor(epsilon: f64, g2_zero: f64, delta2: f64) -> Result<f64> {
    if !(epsilon < 1.0) {
        return Err(Error::Domain(format!("epsilon must be < 1, got {epsilon}")));
    }
    Ok((1.0 + 2.0 * g2_zero) * (1.0 + 8.0 * delta2 * delta2) / (1.0 - epsilon).powi(2))
}

/// Intrinsic indistinguishability from the raw visibility, to leading order
/// in the imperfections: V = (1+2g²(0))(1+8δ₂²)V_raw/(1−ε)².
pub fn corrected_visibility(v_raw: f64, epsilon: f64, g2_zero: f64, delta2: f64) -> Result<f64> {
    Ok(correction_factor(epsilon, g2_zero, delta2)? * v_raw)
}

/// Inverse of [`corrected_visibility`].
pub fn raw_from_corrected(v: f64, epsilon: f64, g2_zero: f64, delta2: f64) -> Result<f64> {
    Ok(v / correction_factor(epsilon, g2_zero, delta2)?)
}

/// g²(0) = 2/b for signal-to-background ratio b. Only meaningful for b ≫ 1.
pub fn g2_from_sbr(b: f64) -> Result<f64> {
    if !(b > 0.0) {
        return Err(Error::Domain(format!(
            "signal-to-background ratio must be > 0, got {b}"
        )));
    }
    Ok(2.0 / b)
}

/// (Σon − Σoff)/Σoff over the bins whose centres fall in `window`.
pub fn signal_to_background(on: &TimeTrace, off: &TimeTrace, window: (f64, f64)) -> Result<f64> {
    if !on.same_binning(off) {
        return Err(Error::Usage("on- and off-resonance traces must share binning".into()));
    }
    let (start, end) = window;
    let edges = on.bin_edges();
    let (lo, hi) = (edges[0], edges[edges.len() - 1]);
    if !(start < end) || start < lo || end > hi {
        return Err(Error::Usage(format!(
            "window ({start}, {end}) not inside trace span ({lo}, {hi})"
        )));
    }
    let (mut sig, mut bkg) = (0.0, 0.0);
    for ((c, a), b) in on.centers().iter().zip(on.counts()).zip(off.counts()) {
        if *c >= start && *c <= end {
            sig += a;
            bkg += b;
        }
    }
    if bkg == 0.0 {
        return Err(Error::Degenerate("background sum over window is zero".into()));
    }
    Ok((sig - bkg) / bkg)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PurityEstimate {
    /// 1 − g²_corrected
    pub purity: f64,
    pub g2_corrected: f64,
    /// The subtraction drove g² below zero and it was clamped.
    pub clamped: bool,
}

/// Subtract accidental coincidences caused by detector dark counts.
///
/// Per-pulse probabilities are rate × window (rates in counts/ns, window in
/// ns). Accidentals p_acc = 2·p_dark·p_sig + p_dark² are removed from the
/// zero-delay peak, renormalised to the signal-only side peaks.
pub fn dark_count_corrected_purity(
    g2_raw: f64,
    signal_rate: f64,
    dark_rate: f64,
    window: f64,
) -> Result<PurityEstimate> {
    if !(g2_raw >= 0.0) || !(signal_rate >= 0.0) || !(dark_rate >= 0.0) || !(window >= 0.0) {
        return Err(Error::Domain("g2, rates and window must be non-negative".into()));
    }
    let p_sig = signal_rate * window;
    let p_dark = dark_rate * window;
    if dark_rate == 0.0 {
        return Ok(PurityEstimate {
            purity: 1.0 - g2_raw,
            g2_corrected: g2_raw,
            clamped: false,
        });
    }
    if p_sig == 0.0 {
        return Err(Error::Degenerate("no signal to normalise against".into()));
    }
    let p_acc = 2.0 * p_dark * p_sig + p_dark * p_dark;
    let g2 = (g2_raw * (p_sig + p_dark).powi(2) - p_acc) / (p_sig * p_sig);
    let clamped = g2 < 0.0;
    let g2 = g2.max(0.0);
    Ok(PurityEstimate {
        purity: 1.0 - g2,
        g2_corrected: g2,
        clamped,
    })
}

/// Emitter-to-collection coupling implied by a detected PSB probability per
/// excitation, after dividing out the branching into the detected band, the
/// quantum efficiency, the setup efficiency and the fraction of waveguide
/// emission leaving through the collection port.
pub fn collection_efficiency_budget(
    p_detected: f64,
    branching: f64,
    quantum_efficiency: f64,
    setup_efficiency: f64,
    direction_factor: f64,
) -> Result<f64> {
    for (name, v) in [
        ("p_detected", p_detected),
        ("branching", branching),
        ("quantum_efficiency", quantum_efficiency),
        ("setup_efficiency", setup_efficiency),
        ("direction_factor", direction_factor),
    ] {
        if !(v > 0.0 && v <= 1.0) {
            return Err(Error::Domain(format!("{name} must lie in (0, 1], got {v}")));
        }
    }
    Ok(p_detected / (branching * quantum_efficiency * setup_efficiency * direction_factor))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ideal_bs_values() {
        assert_eq!(p_parallel_ideal_bs(0.5, 0.5).unwrap(), 0.0);
        assert_eq!(p_parallel_ideal_bs(1.0, 0.0).unwrap(), 1.0);
        assert!((p_parallel_ideal_bs(0.54, 0.46).unwrap() - 0.0064).abs() < 1e-15);
        assert!(p_parallel_ideal_bs(0.5, 0.4).is_err());
        let t: f64 = 0.37;
        assert!((p_parallel_ideal_bs(t, 1.0 - t).unwrap() - (1.0 - 4.0 * t * (1.0 - t))).abs() < 1e-15);
    }

    #[test]
    fn partial_values() {
        assert!(p_parallel_partial(0.0, 1.0, 0.5, 0.5).unwrap().abs() < 1e-15);
        assert!((p_parallel_partial(0.3, 0.0, 0.5, 0.5).unwrap() - 0.5).abs() < 1e-15);
        let p = p_parallel_partial(0.04, 0.73, 0.5, 0.5).unwrap();
        assert!((p - (1.0 - 0.5 - 2.0 * 0.9216 * 0.73 * 0.25)).abs() < 1e-15);
        assert!((p - 0.1636).abs() < 1e-4);
    }

    #[test]
    fn full_values() {
        let ideal = InterferometerModel::ideal();
        assert!(p_parallel_full(&ideal, 1.0).abs() < 1e-15);
        assert!((p_parallel_full(&ideal, 0.0) - 0.5).abs() < 1e-15);
        // 4[¼(½ − ½·0.9216·0.73) + 2·0.0836·½·¼]
        let m = InterferometerModel::new(0.5, 0.5, 0.04, 0.0836).unwrap();
        let hand = 4.0 * (0.25 * (0.5 - 0.5 * 0.9216 * 0.73) + 2.0 * 0.0836 * 0.5 * 0.25);
        assert!((p_parallel_full(&m, 0.73) - hand).abs() < 1e-15);
        assert!((hand - 0.247216).abs() < 1e-6);
    }

    #[test]
    fn model_validation() {
        assert!(InterferometerModel::new(1.2, 0.5, 0.0, 0.0).is_err());
        assert!(InterferometerModel::new(0.5, 0.5, 1.5, 0.0).is_err());
        assert!(InterferometerModel::new(0.5, 0.5, 0.0, -0.1).is_err());
        let m = InterferometerModel::new(0.54, 0.46, 0.0, 0.0).unwrap();
        assert!((m.delta1() - 0.04).abs() < 1e-15 && (m.delta2() + 0.04).abs() < 1e-15);
    }

    #[test]
    fn raw_visibility_values() {
        assert!((raw_visibility(0.22, 0.51).unwrap() - 0.569).abs() < 5e-4);
        assert_eq!(raw_visibility(0.0, 0.4).unwrap(), 1.0);
        assert_eq!(raw_visibility(0.4, 0.4).unwrap(), 0.0);
        assert!(matches!(raw_visibility(0.1, 0.0), Err(Error::Degenerate(_))));
    }

    #[test]
    fn corrected_values() {
        let v = corrected_visibility(0.56, 0.04, 0.0836, 0.04).unwrap();
        assert!((v - 0.718).abs() < 5e-4, "{v}");
        assert!((v - 0.73).abs() < 0.13);
        assert_eq!(corrected_visibility(0.61, 0.0, 0.0, 0.0).unwrap(), 0.61);
        assert!(corrected_visibility(0.5, 1.0, 0.0, 0.0).is_err());
        let raw = raw_from_corrected(0.632, 0.04, 0.0836, 0.04).unwrap();
        assert!((corrected_visibility(raw, 0.04, 0.0836, 0.04).unwrap() - 0.632).abs() < 1e-12);
    }

    #[test]
    fn g2_values() {
        assert!((g2_from_sbr(23.91).unwrap() - 0.0836).abs() < 5e-5);
        assert!((g2_from_sbr(13.27).unwrap() - 0.1507).abs() < 5e-5);
        assert!(g2_from_sbr(1e300).unwrap() < 1e-299);
        assert!(g2_from_sbr(0.0).is_err());
    }

    #[test]
    fn sbr_constant_floor() {
        let on = TimeTrace::uniform(0.0, 10.0, vec![3.0; 10]).unwrap();
        let off = TimeTrace::uniform(0.0, 10.0, vec![0.5; 10]).unwrap();
        assert!((signal_to_background(&on, &off, (0.0, 10.0)).unwrap() - 5.0).abs() < 1e-12);
        let zero = TimeTrace::uniform(0.0, 10.0, vec![0.0; 10]).unwrap();
        assert!(matches!(
            signal_to_background(&on, &zero, (0.0, 10.0)),
            Err(Error::Degenerate(_))
        ));
        let other = TimeTrace::uniform(0.0, 10.0, vec![0.5; 20]).unwrap();
        assert!(signal_to_background(&on, &other, (0.0, 10.0)).is_err());
        assert!(signal_to_background(&on, &off, (0.0, 12.0)).is_err());
    }

    #[test]
    fn sbr_exponential_trace_brute_force() {
        let (a, t1, b) = (1.423e-5, 7.44, 5.6e-8);
        let bins = 400;
        let on = TimeTrace::sample(0.0, 40.0, bins, |t| a * (-t / t1).exp() + b).unwrap();
        let off = TimeTrace::sample(0.0, 40.0, bins, |_| b).unwrap();
        let ratio = signal_to_background(&on, &off, (0.0, 11.1)).unwrap();
        // independent sum: bins of width 0.1 with centres 0.05 .. 11.05
        let (mut s, mut n) = (0.0, 0);
        let mut c = 0.05;
        while c <= 11.1 {
            s += a * (-c / t1).exp();
            n += 1;
            c += 0.1;
        }
        let oracle = s / (n as f64 * b);
        assert!((ratio - oracle).abs() < 1e-9 * oracle);
    }

    #[test]
    fn purity_correction() {
        let p = dark_count_corrected_purity(0.067, 1e-3, 0.0, 10.0).unwrap();
        assert!((p.purity - 0.933).abs() < 1e-15 && !p.clamped);
        let p = dark_count_corrected_purity(0.0, 1e-3, 1e-6, 10.0).unwrap();
        assert_eq!(p.purity, 1.0);
        assert!(p.clamped);
        // accidentals alone reproduce the raw value: corrected g² is zero
        let (ps, pd): (f64, f64) = (1e-2, 3.5e-4);
        let g2_raw = (2.0 * pd * ps + pd * pd) / (ps + pd).powi(2);
        let p = dark_count_corrected_purity(g2_raw, ps, pd, 1.0).unwrap();
        assert!(p.g2_corrected.abs() < 1e-12);
    }

    #[test]
    fn efficiency_budget() {
        assert!((collection_efficiency_budget(0.5, 1.0, 1.0, 1.0, 0.5).unwrap() - 1.0).abs() < 1e-15);
        let e = collection_efficiency_budget(6.7e-5, 0.4, 0.8, 0.8, 0.5).unwrap();
        assert!((e - 5.234e-4).abs() < 1e-7);
        let e2 = collection_efficiency_budget(1.34e-4, 0.4, 0.8, 0.8, 0.5).unwrap();
        assert!((e2 - 2.0 * e).abs() < 1e-15);
        assert!(collection_efficiency_budget(1e-4, 0.0, 0.8, 0.8, 0.5).is_err());
    }
}
