//! Two-level Lindblad master equation on the row-major vectorised density
//! matrix, with exact propagation over piecewise-constant drive.

use nalgebra::{Matrix2, Matrix4, Vector4};
use num_complex::Complex64;

use crate::emitter::{DensityMatrix, DriveSegment, EmitterParams};
use crate::error::{Error, Result};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);
const ONE: C = C::new(1.0, 0.0);
const I: C = C::new(0.0, 1.0);

fn sigma_x() -> Matrix2<C> {
    Matrix2::new(ZERO, ONE, ONE, ZERO)
}

fn sigma_y() -> Matrix2<C> {
    Matrix2::new(ZERO, -I, I, ZERO)
}

fn sigma_z() -> Matrix2<C> {
    Matrix2::new(ONE, ZERO, ZERO, -ONE)
}

/// |0⟩⟨1|: lowers the excited state to the ground state.
fn lowering() -> Matrix2<C> {
    Matrix2::new(ZERO, ONE, ZERO, ZERO)
}

/// Superoperator generating dρ/dt on vec(ρ) = (ρ₀₀, ρ₀₁, ρ₁₀, ρ₁₁).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Liouvillian(Matrix4<C>);

impl Liouvillian {
    pub fn matrix(&self) -> &Matrix4<C> {
        &self.0
    }

    /// dρ/dt at `rho`.
    pub fn apply(&self, rho: &DensityMatrix) -> DensityMatrix {
        from_vector(&(self.0 * to_vector(rho)))
    }

    /// Only decay into ρ₀₀ and diagonal coherence terms, as for free evolution.
    fn is_undriven(&self) -> bool {
        (0..4).all(|i| (0..4).all(|j| i == j || (i, j) == (0, 3) || self.0[(i, j)] == ZERO)) && self.0[(0, 0)] == ZERO
    }

    /// exp(L t) as a 4×4 propagator.
    pub fn propagator(&self, t: f64) -> Matrix4<C> {
        if self.is_undriven() {
            return diagonal_propagator(-self.0[(3, 3)].re, self.0[(1, 1)], self.0[(2, 2)], t);
        }
        let mut p = (self.0 * C::new(t, 0.0)).exp();
        // Restore the exact trace row so repeated steps do not drift.
        for j in 0..4 {
            let target = if j == 0 || j == 3 {
                C::new(1.0, 0.0)
            } else {
                C::new(0.0, 0.0)
            };
            p[(0, j)] = target - p[(3, j)];
        }
        p
    }
}

/// exp(L t) when population decays at `gamma0` and the coherences evolve at
/// the complex rates `l01`, `l10`.
fn diagonal_propagator(gamma0: f64, l01: C, l10: C, t: f64) -> Matrix4<C> {
    let mut p = Matrix4::zeros();
    p[(0, 0)] = ONE;
    p[(0, 3)] = C::new(-(-gamma0 * t).exp_m1(), 0.0);
    p[(1, 1)] = (l01 * t).exp();
    p[(2, 2)] = (l10 * t).exp();
    p[(3, 3)] = C::new((-gamma0 * t).exp(), 0.0);
    p
}

/// Propagator of a segment without drive over its full duration, built from
/// the rates directly. `None` for driven segments.
pub fn undriven_propagator(segment: &DriveSegment, emitter: &EmitterParams, extra_detuning: f64) -> Option<Matrix4<C>> {
    if segment.laser_on && segment.rabi_rate != 0.0 {
        return None;
    }
    let damping = 0.5 * emitter.gamma0() + emitter.gamma_pd(segment.laser_on);
    let delta = segment.detuning + extra_detuning;
    Some(diagonal_propagator(
        emitter.gamma0(),
        C::new(-damping, -delta),
        C::new(-damping, delta),
        segment.duration,
    ))
}

// vec(A ρ B) = (A ⊗ Bᵀ) vec(ρ) for row-major vec
fn left(a: &Matrix2<C>) -> Matrix4<C> {
    a.kronecker(&Matrix2::identity())
}

fn right(b: &Matrix2<C>) -> Matrix4<C> {
    Matrix2::identity().kronecker(&b.transpose())
}

fn dissipator(c: &Matrix2<C>) -> Matrix4<C> {
    let cdc = c.adjoint() * c;
    c.kronecker(&c.conjugate()) - (left(&cdc) + right(&cdc)) * C::new(0.5, 0.0)
}

/// Hamiltonian H = (Ω/2)(cosφ σx + sinφ σy) + (δ/2)σz in rad/ns.
pub fn hamiltonian(rabi_rate: f64, detuning: f64, phase: f64) -> Matrix2<C> {
    let (s, c) = phase.sin_cos();
    (sigma_x() * C::new(c, 0.0) + sigma_y() * C::new(s, 0.0)) * C::new(0.5 * rabi_rate, 0.0)
        + sigma_z() * C::new(0.5 * detuning, 0.0)
}

/// Liouvillian of `segment` for `emitter`, with `extra_detuning` added to the
/// segment's own detuning. Laser-off segments carry no drive and no
/// laser-induced dephasing.
pub fn build_liouvillian(segment: &DriveSegment, emitter: &EmitterParams, extra_detuning: f64) -> Liouvillian {
    let rabi = if segment.laser_on { segment.rabi_rate } else { 0.0 };
    let h = hamiltonian(rabi, segment.detuning + extra_detuning, segment.phase);
    let coherent = (left(&h) - right(&h)) * (-I);

    let decay = lowering() * C::new(emitter.gamma0().sqrt(), 0.0);
    let gamma_pd = emitter.gamma_pd(segment.laser_on);
    let dephase = sigma_z() * C::new((0.5 * gamma_pd).sqrt(), 0.0);

    Liouvillian(coherent + dissipator(&decay) + dissipator(&dephase))
}

pub(crate) fn to_vector(rho: &DensityMatrix) -> Vector4<C> {
    Vector4::from(rho.to_vec())
}

pub(crate) fn from_vector(v: &Vector4<C>) -> DensityMatrix {
    DensityMatrix::from_vec([v[0], v[1], v[2], v[3]])
}

fn checked(rho: DensityMatrix, at: f64) -> Result<DensityMatrix> {
    rho.validate()
        .map_err(|e| Error::Numerical(format!("propagation failed at t = {at} ns: {e}")))?;
    Ok(rho)
}

/// ρ(t) for each of `sample_times` (measured from the segment start) under the
/// constant Liouvillian of the segment.
pub fn propagate_segment(
    rho: &DensityMatrix,
    segment: &DriveSegment,
    emitter: &EmitterParams,
    extra_detuning: f64,
    sample_times: &[f64],
) -> Result<Vec<DensityMatrix>> {
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Usage("sample times must be sorted".into()));
    }
    let tol = 1e-12 * segment.duration.max(1.0);
    if let (Some(&first), Some(&last)) = (sample_times.first(), sample_times.last()) {
        if first < -tol || last > segment.duration + tol {
            return Err(Error::Usage(format!(
                "sample times [{first}, {last}] outside segment of duration {}",
                segment.duration
            )));
        }
    }
    let l = build_liouvillian(segment, emitter, extra_detuning);
    let mut out = Vec::with_capacity(sample_times.len());
    let mut state = to_vector(rho);
    let mut t_prev = 0.0;
    let mut cached: Option<(f64, Matrix4<C>)> = None;
    for &t in sample_times {
        let step = t - t_prev;
        if step != 0.0 {
            let prop = match cached {
                Some((h, p)) if (h - step).abs() <= 1e-12 * step.abs() => p,
                _ => {
                    let p = l.propagator(step);
                    cached = Some((step, p));
                    p
                }
            };
            state = prop * state;
        }
        t_prev = t;
        out.push(checked(from_vector(&state), t)?);
    }
    Ok(out)
}

/// State at the end of the segment.
pub fn propagate_to_end(
    rho: &DensityMatrix,
    segment: &DriveSegment,
    emitter: &EmitterParams,
    extra_detuning: f64,
) -> Result<DensityMatrix> {
    if segment.duration == 0.0 {
        return Ok(*rho);
    }
    let l = build_liouvillian(segment, emitter, extra_detuning);
    checked(
        from_vector(&(l.propagator(segment.duration) * to_vector(rho))),
        segment.duration,
    )
}

/// Fixed-step classical Runge–Kutta integration of the same equation, kept as
/// an independent check on the exponential propagator.
pub fn propagate_rk4(
    rho: &DensityMatrix,
    segment: &DriveSegment,
    emitter: &EmitterParams,
    extra_detuning: f64,
    dt: f64,
) -> Result<DensityMatrix> {
    if segment.duration == 0.0 {
        return Ok(*rho);
    }
    if !(dt > 0.0) {
        return Err(Error::Usage(format!("step must be > 0, got {dt}")));
    }
    if dt > segment.duration {
        return Err(Error::Usage(format!(
            "step {dt} ns exceeds segment duration {} ns",
            segment.duration
        )));
    }
    let l = *build_liouvillian(segment, emitter, extra_detuning).matrix();
    let steps = (segment.duration / dt).ceil() as usize;
    let h = C::new(segment.duration / steps as f64, 0.0);
    let half = h * 0.5;
    let mut y = to_vector(rho);
    for _ in 0..steps {
        let k1 = l * y;
        let k2 = l * (y + k1 * half);
        let k3 = l * (y + k2 * half);
        let k4 = l * (y + k3 * h);
        y += (k1 + (k2 + k3) * C::new(2.0, 0.0) + k4) * (h / 6.0);
    }
    checked(from_vector(&y), segment.duration)
}

/// Fixed point of the segment's Liouvillian, normalised to unit trace.
pub fn steady_state(segment: &DriveSegment, emitter: &EmitterParams) -> Result<DensityMatrix> {
    let l = *build_liouvillian(segment, emitter, 0.0).matrix();
    let svd = l.svd(false, false);
    // rates below ~1e-15 rad/ns count as zero
    let scale = svd.singular_values.max().max(1e-3);
    let null_dim = svd.singular_values.iter().filter(|&&s| s <= 1e-12 * scale).count();
    if null_dim > 1 {
        return Err(Error::Degenerate(format!(
            "steady state is not unique ({null_dim}-dimensional null space)"
        )));
    }
    // replace the ρ₀₀ equation with the trace constraint
    let mut a = l;
    a[(0, 0)] = ONE;
    a[(0, 1)] = ZERO;
    a[(0, 2)] = ZERO;
    a[(0, 3)] = ONE;
    let b = Vector4::new(ONE, ZERO, ZERO, ZERO);
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::Degenerate("steady-state system is singular".into()))?;
    checked(from_vector(&x), f64::INFINITY)
}

/// Instantaneous rotation by `angle` about the equatorial axis at `phase`.
pub fn rotate(rho: &DensityMatrix, angle: f64, phase: f64) -> DensityMatrix {
    // U = exp(-i angle/2 (cosφ σx + sinφ σy))
    let (s, c) = (0.5 * angle).sin_cos();
    let axis = sigma_x() * C::new(phase.cos(), 0.0) + sigma_y() * C::new(phase.sin(), 0.0);
    let u = Matrix2::identity() * C::new(c, 0.0) - axis * (I * s);
    let m = Matrix2::new(rho.rho00, rho.rho01, rho.rho10, rho.rho11);
    let r = u * m * u.adjoint();
    DensityMatrix {
        rho00: r[(0, 0)],
        rho01: r[(0, 1)],
        rho10: r[(1, 0)],
        rho11: r[(1, 1)],
    }
}
