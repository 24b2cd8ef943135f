//! Physical types shared by every other module and the linewidth relations
//! between them.

use std::f64::consts::TAU;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::units::rad_per_ns_to_mhz;

/// Rates of the two-level emitter. Times in ns, rates in rad/ns.
///
/// The radiative rate is always derived from the lifetime, never stored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmitterParams {
    t1_lifetime: f64,
    gamma_pd_intrinsic: f64,
    gamma_pd_laser: f64,
    t2_star: Option<f64>,
}

impl EmitterParams {
    pub fn new(t1_lifetime: f64, gamma_pd_intrinsic: f64, gamma_pd_laser: f64, t2_star: Option<f64>) -> Result<Self> {
        if !(t1_lifetime > 0.0 && t1_lifetime.is_finite()) {
            return Err(Error::Domain(format!("t1_lifetime must be > 0, got {t1_lifetime}")));
        }
        if !(gamma_pd_intrinsic >= 0.0 && gamma_pd_intrinsic.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma_pd_intrinsic must be >= 0, got {gamma_pd_intrinsic}"
            )));
        }
        if !(gamma_pd_laser >= 0.0 && gamma_pd_laser.is_finite()) {
            return Err(Error::Domain(format!(
                "gamma_pd_laser must be >= 0, got {gamma_pd_laser}"
            )));
        }
        if let Some(t) = t2_star {
            if !(t > 0.0) {
                return Err(Error::Domain(format!("t2_star must be > 0 when present, got {t}")));
            }
        }
        Ok(Self {
            t1_lifetime,
            gamma_pd_intrinsic,
            gamma_pd_laser,
            t2_star,
        })
    }

    /// Lifetime-limited emitter with no dephasing of any kind.
    pub fn lifetime_limited(t1_lifetime: f64) -> Result<Self> {
        Self::new(t1_lifetime, 0.0, 0.0, None)
    }

    pub fn t1_lifetime(&self) -> f64 {
        self.t1_lifetime
    }

    /// Radiative decay rate Γ₀ = 1/T₁.
    pub fn gamma0(&self) -> f64 {
        1.0 / self.t1_lifetime
    }

    pub fn gamma_pd_intrinsic(&self) -> f64 {
        self.gamma_pd_intrinsic
    }

    pub fn gamma_pd_laser(&self) -> f64 {
        self.gamma_pd_laser
    }

    pub fn t2_star(&self) -> Option<f64> {
        self.t2_star
    }

    /// Total pure-dephasing rate with or without the drive present.
    pub fn gamma_pd(&self, laser_on: bool) -> f64 {
        if laser_on {
            self.gamma_pd_intrinsic + self.gamma_pd_laser
        } else {
            self.gamma_pd_intrinsic
        }
    }

    pub fn with_t2_star(mut self, t2_star: Option<f64>) -> Result<Self> {
        self.t2_star = t2_star;
        Self::new(self.t1_lifetime, self.gamma_pd_intrinsic, self.gamma_pd_laser, t2_star)
    }

    pub fn with_dephasing(self, intrinsic: f64, laser: f64) -> Result<Self> {
        Self::new(self.t1_lifetime, intrinsic, laser, self.t2_star)
    }

    /// Same physics with every rate multiplied by `factor` and every time divided by it.
    pub fn time_rescaled(&self, factor: f64) -> Result<Self> {
        Self::new(
            self.t1_lifetime / factor,
            self.gamma_pd_intrinsic * factor,
            self.gamma_pd_laser * factor,
            self.t2_star.map(|t| t / factor),
        )
    }
}

/// One piecewise-constant stretch of drive.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSegment {
    pub duration: f64,
    pub rabi_rate: f64,
    pub detuning: f64,
    pub phase: f64,
    pub laser_on: bool,
}

impl DriveSegment {
    pub fn new(duration: f64, rabi_rate: f64, detuning: f64, phase: f64, laser_on: bool) -> Result<Self> {
        if !(duration >= 0.0 && duration.is_finite()) {
            return Err(Error::Domain(format!("segment duration must be >= 0, got {duration}")));
        }
        if !laser_on && rabi_rate != 0.0 {
            return Err(Error::Domain("a laser-off segment cannot carry a Rabi rate".into()));
        }
        if !(rabi_rate.is_finite() && detuning.is_finite() && phase.is_finite()) {
            return Err(Error::Domain("segment parameters must be finite".into()));
        }
        Ok(Self {
            duration,
            rabi_rate,
            detuning,
            phase,
            laser_on,
        })
    }

    pub fn driven(duration: f64, rabi_rate: f64, detuning: f64, phase: f64) -> Result<Self> {
        Self::new(duration, rabi_rate, detuning, phase, true)
    }

    /// Free precession: no drive, no laser-induced dephasing.
    pub fn free(duration: f64, detuning: f64) -> Result<Self> {
        Self::new(duration, 0.0, detuning, 0.0, false)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PulseSequence {
    segments: Vec<DriveSegment>,
    readout_window: (f64, f64),
}

impl PulseSequence {
    pub fn new(segments: Vec<DriveSegment>, readout_window: (f64, f64)) -> Result<Self> {
        if segments.is_empty() {
            return Err(Error::Domain("pulse sequence needs at least one segment".into()));
        }
        let total: f64 = segments.iter().map(|s| s.duration).sum();
        let (start, end) = readout_window;
        // small slack for accumulated rounding of segment sums
        let slack = 1e-9 * total.max(1.0);
        if !(start >= -slack && start <= end && end <= total + slack) {
            return Err(Error::Domain(format!(
                "readout window ({start}, {end}) outside sequence of duration {total}"
            )));
        }
        Ok(Self {
            segments,
            readout_window,
        })
    }

    pub fn segments(&self) -> &[DriveSegment] {
        &self.segments
    }

    pub fn readout_window(&self) -> (f64, f64) {
        self.readout_window
    }

    pub fn total_duration(&self) -> f64 {
        self.segments.iter().map(|s| s.duration).sum()
    }

    /// Extend the final laser-off segment (or append one) so the shot lasts
    /// `shot_length`. The readout window is left untouched.
    pub fn padded_to(&self, shot_length: f64) -> Result<Self> {
        let total = self.total_duration();
        if shot_length < total {
            return Err(Error::Usage(format!(
                "cannot pad a {total} ns sequence down to {shot_length} ns"
            )));
        }
        let mut segments = self.segments.clone();
        let extra = shot_length - total;
        match segments.last_mut() {
            Some(last) if !last.laser_on => last.duration += extra,
            _ => segments.push(DriveSegment::free(extra, 0.0)?),
        }
        Self::new(segments, self.readout_window)
    }
}

/// 2×2 density matrix in the basis (|0⟩ ground, |1⟩ excited).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DensityMatrix {
    pub rho00: Complex64,
    pub rho01: Complex64,
    pub rho10: Complex64,
    pub rho11: Complex64,
}

impl DensityMatrix {
    pub const HERMITICITY_TOL: f64 = 1e-12;
    pub const TRACE_TOL: f64 = 1e-12;
    pub const POSITIVITY_TOL: f64 = 1e-10;

    pub fn ground() -> Self {
        Self::from_populations(1.0, 0.0)
    }

    pub fn excited() -> Self {
        Self::from_populations(0.0, 1.0)
    }

    fn from_populations(p0: f64, p1: f64) -> Self {
        let z = Complex64::new(0.0, 0.0);
        Self {
            rho00: Complex64::new(p0, 0.0),
            rho01: z,
            rho10: z,
            rho11: Complex64::new(p1, 0.0),
        }
    }

    /// Row-major vectorization (ρ₀₀, ρ₀₁, ρ₁₀, ρ₁₁).
    pub fn to_vec(&self) -> [Complex64; 4] {
        [self.rho00, self.rho01, self.rho10, self.rho11]
    }

    pub fn from_vec(v: [Complex64; 4]) -> Self {
        Self {
            rho00: v[0],
            rho01: v[1],
            rho10: v[2],
            rho11: v[3],
        }
    }

    pub fn excited_population(&self) -> f64 {
        self.rho11.re
    }

    pub fn trace(&self) -> Complex64 {
        self.rho00 + self.rho11
    }

    pub fn purity(&self) -> f64 {
        (self.rho00 * self.rho00 + self.rho01 * self.rho10 * 2.0 + self.rho11 * self.rho11).re
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let a = self.rho00.re;
        let d = self.rho11.re;
        let b = 0.5 * (self.rho01 + self.rho10.conj());
        let mean = 0.5 * (a + d);
        let half_gap = (0.25 * (a - d) * (a - d) + b.norm_sqr()).sqrt();
        mean - half_gap
    }

    /// Check Hermiticity, unit trace and positivity at the documented tolerances.
    pub fn validate(&self) -> Result<()> {
        let entries = self.to_vec();
        if entries.iter().any(|z| !(z.re.is_finite() && z.im.is_finite())) {
            return Err(Error::Numerical(format!("non-finite density matrix {self:?}")));
        }
        let herm_sq = (self.rho10 - self.rho01.conj())
            .norm_sqr()
            .max(self.rho00.im * self.rho00.im)
            .max(self.rho11.im * self.rho11.im);
        if herm_sq > Self::HERMITICITY_TOL * Self::HERMITICITY_TOL {
            let herm = herm_sq.sqrt();
            return Err(Error::Numerical(format!(
                "density matrix not Hermitian (deviation {herm:e})"
            )));
        }
        let tr_sq = (self.trace() - 1.0).norm_sqr();
        if tr_sq > Self::TRACE_TOL * Self::TRACE_TOL {
            let tr = tr_sq.sqrt();
            return Err(Error::Numerical(format!("density matrix trace off by {tr:e}")));
        }
        let ev = self.min_eigenvalue();
        if ev < -Self::POSITIVITY_TOL {
            return Err(Error::Numerical(format!("density matrix has eigenvalue {ev:e}")));
        }
        Ok(())
    }
}

/// Histogram-like series on explicit bin edges.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeTrace {
    bin_edges: Vec<f64>,
    counts: Vec<f64>,
}

impl TimeTrace {
    pub fn new(bin_edges: Vec<f64>, counts: Vec<f64>) -> Result<Self> {
        if bin_edges.len() < 2 {
            return Err(Error::Domain("a trace needs at least one bin".into()));
        }
        if bin_edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Domain("bin edges must be strictly increasing".into()));
        }
        if counts.len() != bin_edges.len() - 1 {
            return Err(Error::Domain(format!(
                "{} counts for {} bins",
                counts.len(),
                bin_edges.len() - 1
            )));
        }
        Ok(Self { bin_edges, counts })
    }

    /// Uniform bins of width `(end - start) / bins`.
    pub fn uniform(start: f64, end: f64, counts: Vec<f64>) -> Result<Self> {
        let n = counts.len();
        if n == 0 || !(end > start) {
            return Err(Error::Domain(format!("bad uniform binning [{start}, {end}] x {n}")));
        }
        let width = (end - start) / n as f64;
        let edges = (0..=n).map(|i| start + width * i as f64).collect();
        Self::new(edges, counts)
    }

    /// Build a trace by evaluating `f` at the centre of each of `bins` uniform bins.
    pub fn sample(start: f64, end: f64, bins: usize, f: impl Fn(f64) -> f64) -> Result<Self> {
        let centers = uniform_centers(start, end, bins)?;
        let counts = centers.iter().map(|&t| f(t)).collect();
        Self::uniform(start, end, counts)
    }

    pub fn bin_edges(&self) -> &[f64] {
        &self.bin_edges
    }

    pub fn counts(&self) -> &[f64] {
        &self.counts
    }

    pub fn len(&self) -> usize {
        self.counts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.counts.is_empty()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    pub fn widths(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| w[1] - w[0]).collect()
    }

    pub fn same_binning(&self, other: &TimeTrace) -> bool {
        self.bin_edges.len() == other.bin_edges.len()
            && self
                .bin_edges
                .iter()
                .zip(&other.bin_edges)
                .all(|(a, b)| (a - b).abs() <= 1e-12 * a.abs().max(1.0))
    }
}

pub(crate) fn uniform_centers(start: f64, end: f64, bins: usize) -> Result<Vec<f64>> {
    if bins == 0 || !(end > start) {
        return Err(Error::Domain(format!("bad uniform binning [{start}, {end}] x {bins}")));
    }
    let width = (end - start) / bins as f64;
    Ok((0..bins).map(|i| start + width * (i as f64 + 0.5)).collect())
}

/// Fourier-limited linewidth Γ₀/2π in MHz for a lifetime in ns.
pub fn transform_limited_linewidth(t1: f64) -> Result<f64> {
    if !(t1 > 0.0) {
        return Err(Error::Domain(format!("lifetime must be > 0, got {t1}")));
    }
    Ok(1e3 / (TAU * t1))
}

/// Homogeneous linewidth Γ = Γ₀ + 2Γ_PD (angular, rad/ns).
pub fn homogeneous_linewidth(gamma0: f64, gamma_pd: f64) -> Result<f64> {
    if !(gamma0 >= 0.0) || !(gamma_pd >= 0.0) {
        return Err(Error::Domain(format!(
            "rates must be >= 0, got gamma0={gamma0}, gamma_pd={gamma_pd}"
        )));
    }
    Ok(gamma0 + 2.0 * gamma_pd)
}

/// θ = 1 + 2Γ_PD/Γ₀, the homogeneous linewidth in units of the Fourier limit.
pub fn normalized_linewidth_theta(gamma0: f64, gamma_pd: f64) -> Result<f64> {
    if !(gamma0 > 0.0) {
        return Err(Error::Domain(format!("gamma0 must be > 0, got {gamma0}")));
    }
    if !(gamma_pd >= 0.0) {
        return Err(Error::Domain(format!("gamma_pd must be >= 0, got {gamma_pd}")));
    }
    Ok(1.0 + 2.0 * gamma_pd / gamma0)
}

/// Homogeneous linewidth of `emitter` in MHz (FWHM), intrinsic dephasing only.
pub fn homogeneous_linewidth_mhz(emitter: &EmitterParams) -> f64 {
    rad_per_ns_to_mhz(emitter.gamma0() + 2.0 * emitter.gamma_pd_intrinsic())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::units::mhz_to_rad_per_ns;

    #[test]
    fn transform_limit_values() {
        assert!((transform_limited_linewidth(7.44).unwrap() - 21.39).abs() < 5e-3);
        assert!((transform_limited_linewidth(1000.0 / TAU).unwrap() - 1.0).abs() < 1e-12);
        assert!((transform_limited_linewidth(4.5).unwrap() - 35.37).abs() < 5e-3);
        assert!(matches!(transform_limited_linewidth(0.0), Err(Error::Domain(_))));
        assert!(matches!(transform_limited_linewidth(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn homogeneous_values() {
        let g0 = mhz_to_rad_per_ns(21.4);
        let gpd = mhz_to_rad_per_ns(6.39);
        let g = homogeneous_linewidth(g0, gpd).unwrap();
        let mhz = rad_per_ns_to_mhz(g);
        assert!((mhz - 34.18).abs() < 1e-9);
        assert!((mhz - 34.8).abs() < 0.7);
        assert_eq!(homogeneous_linewidth(g0, 0.0).unwrap(), g0);
        let g = homogeneous_linewidth(mhz_to_rad_per_ns(10.0), mhz_to_rad_per_ns(5.0)).unwrap();
        assert!((rad_per_ns_to_mhz(g) - 20.0).abs() < 1e-12);
        assert!(homogeneous_linewidth(-1.0, 0.0).is_err());
        assert!(homogeneous_linewidth(1.0, -1e-3).is_err());
    }

    #[test]
    fn theta_values() {
        let th = normalized_linewidth_theta(mhz_to_rad_per_ns(21.39), mhz_to_rad_per_ns(6.39)).unwrap();
        assert!((th - 1.5975).abs() < 1e-3);
        assert_eq!(normalized_linewidth_theta(0.3, 0.0).unwrap(), 1.0);
        assert!((normalized_linewidth_theta(0.3, 0.15).unwrap() - 2.0).abs() < 1e-15);
        assert!(matches!(normalized_linewidth_theta(0.0, 0.1), Err(Error::Domain(_))));
    }

    proptest::proptest! {
        #[test]
        fn theta_at_least_one(g0 in 1e-6f64..10.0, gpd in 0.0f64..10.0) {
            proptest::prop_assert!(normalized_linewidth_theta(g0, gpd).unwrap() >= 1.0);
        }
    }

    #[test]
    fn emitter_invariants() {
        assert!(EmitterParams::new(0.0, 0.0, 0.0, None).is_err());
        assert!(EmitterParams::new(1.0, -0.1, 0.0, None).is_err());
        assert!(EmitterParams::new(1.0, 0.0, -0.1, None).is_err());
        assert!(EmitterParams::new(1.0, 0.0, 0.0, Some(0.0)).is_err());
        let e = EmitterParams::new(7.44, 0.04, 0.09, Some(4.54)).unwrap();
        assert!((e.gamma0() - 1.0 / 7.44).abs() < 1e-15);
        assert!((e.gamma_pd(true) - 0.13).abs() < 1e-15);
        assert_eq!(e.gamma_pd(false), 0.04);
    }

    #[test]
    fn segment_invariants() {
        assert!(DriveSegment::new(1.0, 0.5, 0.0, 0.0, false).is_err());
        assert!(DriveSegment::new(-1.0, 0.0, 0.0, 0.0, true).is_err());
        assert!(DriveSegment::free(2.0, 0.1).is_ok());
    }

    #[test]
    fn sequence_invariants() {
        let seg = DriveSegment::driven(2.0, 1.0, 0.0, 0.0).unwrap();
        assert!(PulseSequence::new(vec![], (0.0, 0.0)).is_err());
        assert!(PulseSequence::new(vec![seg], (0.0, 3.0)).is_err());
        let seq = PulseSequence::new(vec![seg], (2.0, 2.0)).unwrap();
        let padded = seq.padded_to(50.0).unwrap();
        assert!((padded.total_duration() - 50.0).abs() < 1e-12);
        assert_eq!(padded.readout_window(), (2.0, 2.0));
        assert!(seq.padded_to(1.0).is_err());
    }

    #[test]
    fn density_matrix_checks() {
        let g = DensityMatrix::ground();
        g.validate().unwrap();
        assert_eq!(g.purity(), 1.0);
        let mut bad = DensityMatrix::ground();
        bad.rho01 = Complex64::new(0.0, 0.3);
        assert!(bad.validate().is_err());
        let mut neg = DensityMatrix::excited();
        neg.rho01 = Complex64::new(0.2, 0.0);
        neg.rho10 = Complex64::new(0.2, 0.0);
        assert!(neg.min_eigenvalue() < -0.03);
        assert!(neg.validate().is_err());
    }

    #[test]
    fn trace_binning() {
        assert!(TimeTrace::new(vec![0.0, 1.0, 1.0], vec![1.0, 2.0]).is_err());
        assert!(TimeTrace::new(vec![0.0, 1.0, 2.0], vec![1.0]).is_err());
        let t = TimeTrace::uniform(0.0, 4.0, vec![1.0; 4]).unwrap();
        assert_eq!(t.centers(), vec![0.5, 1.5, 2.5, 3.5]);
    }
}
