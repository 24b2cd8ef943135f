//! C ABI over the `qemitter` core.
//!
//! Every function returns a [`QeStatus`]; results go through out-pointers.
//! On failure the message is kept per thread and can be read with
//! [`qe_last_error_message`]. Units are ns and rad/ns throughout.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use qemitter::corrections::{corrected_visibility, g2_from_sbr, raw_visibility};
use qemitter::fit::fit_lifetime;
use qemitter::hom::{visibility, HomConfig, Window};
use qemitter::sequence::simulate_rabi;
use qemitter::spectral::EnsembleSettings;
use qemitter::{EmitterParams, Error, TimeTrace};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QeStatus {
    Ok = 0,
    Domain = 1,
    Usage = 2,
    Numerical = 3,
    Degenerate = 4,
    RankDeficient = 5,
    Config = 6,
    Io = 7,
    Csv = 8,
    NullPointer = 9,
    BufferTooSmall = 10,
    Panic = 11,
}

impl From<&Error> for QeStatus {
    fn from(e: &Error) -> Self {
        match e {
            Error::Domain(_) => QeStatus::Domain,
            Error::Usage(_) => QeStatus::Usage,
            Error::Numerical(_) => QeStatus::Numerical,
            Error::Degenerate(_) => QeStatus::Degenerate,
            Error::RankDeficient { .. } => QeStatus::RankDeficient,
            Error::Config(_) => QeStatus::Config,
            Error::Io { .. } => QeStatus::Io,
            Error::Csv(_) => QeStatus::Csv,
        }
    }
}

/// Opaque emitter handle. Create with [`qe_emitter_new`], release with
/// [`qe_emitter_free`].
pub struct QeEmitter {
    inner: EmitterParams,
}

/// Lifetime fit of A·exp(−t/T₁) + B.
#[repr(C)]
#[derive(Debug, Clone, Copy, Default)]
pub struct QeLifetimeFit {
    pub amplitude: f64,
    pub t1: f64,
    pub background: f64,
    pub amplitude_sigma: f64,
    pub t1_sigma: f64,
    pub background_sigma: f64,
    pub reduced_chi2: f64,
    pub converged: bool,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: String) {
    let c = CString::new(msg.replace('\0', " ")).expect("interior NULs removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(c));
}

fn clear_error() {
    LAST_ERROR.with(|e| *e.borrow_mut() = None);
}

enum Fail {
    Core(Error),
    Null(&'static str),
    Small { need: usize, got: usize },
}

impl From<Error> for Fail {
    fn from(e: Error) -> Self {
        Fail::Core(e)
    }
}

/// Run `f`, translate its outcome into a status and record any message.
fn guard(f: impl FnOnce() -> Result<(), Fail>) -> QeStatus {
    clear_error();
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QeStatus::Ok,
        Ok(Err(Fail::Core(e))) => {
            set_error(e.to_string());
            QeStatus::from(&e)
        }
        Ok(Err(Fail::Null(what))) => {
            set_error(format!("null pointer: {what}"));
            QeStatus::NullPointer
        }
        Ok(Err(Fail::Small { need, got })) => {
            set_error(format!("buffer holds {got} values, {need} needed"));
            QeStatus::BufferTooSmall
        }
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_error(format!("internal panic: {msg}"));
            QeStatus::Panic
        }
    }
}

unsafe fn out<'a, T>(p: *mut T, what: &'static str) -> Result<&'a mut T, Fail> {
    p.as_mut().ok_or(Fail::Null(what))
}

unsafe fn input<'a>(p: *const f64, len: usize, what: &'static str) -> Result<&'a [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    Ok(slice::from_raw_parts(p, len))
}

unsafe fn output<'a>(p: *mut f64, len: usize, need: usize, what: &'static str) -> Result<&'a mut [f64], Fail> {
    if p.is_null() {
        return Err(Fail::Null(what));
    }
    if len < need {
        return Err(Fail::Small { need, got: len });
    }
    Ok(slice::from_raw_parts_mut(p, need))
}

/// Message for the last failed call on this thread, or NULL after a
/// successful one. The pointer is valid until the next call on this thread.
#[no_mangle]
pub extern "C" fn qe_last_error_message() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn qe_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Create an emitter. `t2_star <= 0` disables spectral diffusion.
///
/// # Safety
/// `out_handle` must be a valid pointer to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn qe_emitter_new(
    t1: f64,
    gamma_pd_intrinsic: f64,
    gamma_pd_laser: f64,
    t2_star: f64,
    out_handle: *mut *mut QeEmitter,
) -> QeStatus {
    guard(|| {
        let slot = out(out_handle, "out_handle")?;
        *slot = ptr::null_mut();
        let t2 = (t2_star > 0.0).then_some(t2_star);
        let inner = EmitterParams::new(t1, gamma_pd_intrinsic, gamma_pd_laser, t2)?;
        *slot = Box::into_raw(Box::new(QeEmitter { inner }));
        Ok(())
    })
}

/// Release a handle from [`qe_emitter_new`]. NULL is ignored.
///
/// # Safety
/// `handle` must come from [`qe_emitter_new`] and not have been freed.
#[no_mangle]
pub unsafe extern "C" fn qe_emitter_free(handle: *mut QeEmitter) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Ensemble-averaged excited population during a resonant pulse at
/// saturation `s`, sampled at `bins` bin centres over `[0, pulse_length]`.
/// `hermite_nodes` sets the spectral-diffusion quadrature order.
///
/// # Safety
/// `handle` must be live; `out_times` and `out_population` must each point
/// to `capacity` writable doubles.
#[no_mangle]
pub unsafe extern "C" fn qe_simulate_rabi(
    handle: *const QeEmitter,
    s: f64,
    pulse_length: f64,
    bins: usize,
    hermite_nodes: usize,
    out_times: *mut f64,
    out_population: *mut f64,
    capacity: usize,
) -> QeStatus {
    guard(|| {
        let emitter = &handle.as_ref().ok_or(Fail::Null("handle"))?.inner;
        let times = output(out_times, capacity, bins, "out_times")?;
        let pops = output(out_population, capacity, bins, "out_population")?;
        let settings = EnsembleSettings::GaussHermite { nodes: hermite_nodes };
        let trace = simulate_rabi(emitter, s, pulse_length, bins, &settings)?;
        times.copy_from_slice(&trace.centers());
        pops.copy_from_slice(trace.counts());
        Ok(())
    })
}

/// HOM visibility of consecutive photons from one emitter. A non-finite or
/// non-positive `window` means an unbounded collection window.
///
/// # Safety
/// `out_visibility` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qe_hom_visibility(t1: f64, gamma_pd: f64, window: f64, out_visibility: *mut f64) -> QeStatus {
    guard(|| {
        let dst = out(out_visibility, "out_visibility")?;
        let w = if window.is_finite() && window > 0.0 {
            Window::Finite(window)
        } else {
            Window::Infinite
        };
        *dst = visibility(&HomConfig::new(t1, gamma_pd, w)?)?.visibility;
        Ok(())
    })
}

/// g²(0) implied by a signal-to-background ratio.
///
/// # Safety
/// `out_g2` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qe_g2_from_sbr(sbr: f64, out_g2: *mut f64) -> QeStatus {
    guard(|| {
        *out(out_g2, "out_g2")? = g2_from_sbr(sbr)?;
        Ok(())
    })
}

/// Raw visibility from co- and cross-polarised coincidence probabilities.
///
/// # Safety
/// `out_visibility` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qe_raw_visibility(
    p_parallel: f64,
    p_perpendicular: f64,
    out_visibility: *mut f64,
) -> QeStatus {
    guard(|| {
        *out(out_visibility, "out_visibility")? = raw_visibility(p_parallel, p_perpendicular)?;
        Ok(())
    })
}

/// Visibility corrected for interferometer imperfections.
///
/// # Safety
/// `out_visibility` must point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn qe_corrected_visibility(
    v_raw: f64,
    epsilon: f64,
    g2_zero: f64,
    delta2: f64,
    out_visibility: *mut f64,
) -> QeStatus {
    guard(|| {
        *out(out_visibility, "out_visibility")? = corrected_visibility(v_raw, epsilon, g2_zero, delta2)?;
        Ok(())
    })
}

/// Fit a lifetime trace given `n_bins + 1` bin edges and `n_bins` counts.
///
/// # Safety
/// `bin_edges` must point to `n_bins + 1` doubles, `counts` to `n_bins`
/// doubles and `out_fit` to one writable [`QeLifetimeFit`].
#[no_mangle]
pub unsafe extern "C" fn qe_fit_lifetime(
    bin_edges: *const f64,
    counts: *const f64,
    n_bins: usize,
    out_fit: *mut QeLifetimeFit,
) -> QeStatus {
    guard(|| {
        let dst = out(out_fit, "out_fit")?;
        let edges = input(bin_edges, n_bins + 1, "bin_edges")?;
        let counts = input(counts, n_bins, "counts")?;
        let r = fit_lifetime(&TimeTrace::new(edges.to_vec(), counts.to_vec())?)?;
        let get = |n: &str| r.value(n).unwrap_or(f64::NAN);
        let sig = |n: &str| r.uncertainty(n).unwrap_or(0.0);
        *dst = QeLifetimeFit {
            amplitude: get("amplitude"),
            t1: get("t1"),
            background: get("background"),
            amplitude_sigma: sig("amplitude"),
            t1_sigma: sig("t1"),
            background_sigma: sig("background"),
            reduced_chi2: r.reduced_chi2,
            converged: r.converged,
        };
        Ok(())
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;

    #[test]
    fn status_maps_every_error() {
        assert_eq!(QeStatus::from(&Error::Domain(String::new())), QeStatus::Domain);
        assert_eq!(
            QeStatus::from(&Error::RankDeficient { params: vec![] }),
            QeStatus::RankDeficient
        );
    }

    #[test]
    fn panic_is_contained() {
        let s = guard(|| panic!("boom"));
        assert_eq!(s, QeStatus::Panic);
        let msg = unsafe { CStr::from_ptr(qe_last_error_message()) };
        assert!(msg.to_str().unwrap().contains("boom"));
    }

    #[test]
    fn success_clears_message() {
        let mut v = 0.0;
        unsafe {
            assert_eq!(qe_g2_from_sbr(-1.0, &mut v), QeStatus::Domain);
            assert!(!qe_last_error_message().is_null());
            assert_eq!(qe_g2_from_sbr(2.0, &mut v), QeStatus::Ok);
        }
        assert!(qe_last_error_message().is_null());
        assert_eq!(v, 1.0);
    }
}
