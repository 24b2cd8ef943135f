//! Bounded Levenberg–Marquardt least squares and the model-specific fits
//! built on it.

mod models;

pub use models::*;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ITERATIONS: usize = 500;
pub const JACOBIAN_RELATIVE_STEP: f64 = 1e-6;
const COST_TOLERANCE: f64 = 1e-10;
const GRADIENT_TOLERANCE: f64 = 1e-10;
/// Smallest singular value of the column-normalised Jacobian, relative to
/// the largest, below which the problem is reported as rank deficient.
const RANK_TOLERANCE: f64 = 1e-7;
const LAMBDA_INITIAL: f64 = 1e-3;
const LAMBDA_MAX: f64 = 1e16;

/// Forward model: full parameter vector (fixed and free, declared order) to
/// predictions at every data point.
pub type ForwardModel<'a> = Box<dyn Fn(&[f64]) -> Result<Vec<f64>> + Send + Sync + 'a>;

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub fixed: bool,
    /// Magnitude used for the difference step when the value is zero.
    pub scale: f64,
}

impl Parameter {
    pub fn free(name: &str, initial: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.to_string(),
            value: initial,
            lower,
            upper,
            fixed: false,
            scale: 1.0,
        }
    }

    pub fn fixed(name: &str, value: f64) -> Self {
        Self {
            name: name.to_string(),
            value,
            lower: value,
            upper: value,
            fixed: true,
            scale: 1.0,
        }
    }

    /// Non-negative rate.
    pub fn rate(name: &str, initial: f64) -> Self {
        Self::free(name, initial.max(0.0), 0.0, f64::INFINITY)
    }

    /// Strictly positive time with an upper bound.
    pub fn time(name: &str, initial: f64, upper: f64) -> Self {
        Self::free(name, initial.clamp(MIN_TIME, upper), MIN_TIME, upper)
    }

    pub fn with_scale(mut self, scale: f64) -> Self {
        self.scale = scale;
        self
    }
}

/// Lower bound for parameters that must be strictly positive times.
pub const MIN_TIME: f64 = 1e-9;

pub struct FitProblem<'a> {
    pub model_id: String,
    parameters: Vec<Parameter>,
    data: Vec<f64>,
    weights: Vec<f64>,
    model: ForwardModel<'a>,
    pub max_iterations: usize,
}

impl<'a> FitProblem<'a> {
    /// `weights` default to one; they multiply squared residuals.
    pub fn new(
        model_id: &str,
        parameters: Vec<Parameter>,
        data: Vec<f64>,
        weights: Option<Vec<f64>>,
        model: ForwardModel<'a>,
    ) -> Result<Self> {
        let free = parameters.iter().filter(|p| !p.fixed).count();
        if free == 0 {
            return Err(Error::Usage(format!("{model_id}: no free parameters")));
        }
        if data.len() < free + 1 {
            return Err(Error::Usage(format!(
                "{model_id}: {} data points for {free} free parameters",
                data.len()
            )));
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain(format!("{model_id}: data contain non-finite values")));
        }
        for p in &parameters {
            if !(p.lower <= p.value && p.value <= p.upper) || p.value.is_nan() {
                return Err(Error::Domain(format!(
                    "{model_id}: initial {} = {} outside [{}, {}]",
                    p.name, p.value, p.lower, p.upper
                )));
            }
        }
        let weights = match weights {
            Some(w) => {
                if w.len() != data.len() {
                    return Err(Error::Usage(format!(
                        "{model_id}: {} weights for {} data points",
                        w.len(),
                        data.len()
                    )));
                }
                if w.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
                    return Err(Error::Domain(format!("{model_id}: weights must be finite and >= 0")));
                }
                w
            }
            None => vec![1.0; data.len()],
        };
        Ok(Self {
            model_id: model_id.to_string(),
            parameters,
            data,
            weights,
            model,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        })
    }

    pub fn with_max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn parameters(&self) -> &[Parameter] {
        &self.parameters
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn evaluate(&self, full: &[f64]) -> Result<Vec<f64>> {
        let y = (self.model)(full)?;
        if y.len() != self.data.len() {
            return Err(Error::Numerical(format!(
                "{}: model returned {} points for {} data",
                self.model_id,
                y.len(),
                self.data.len()
            )));
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!(
                "{}: model produced non-finite values",
                self.model_id
            )));
        }
        Ok(y)
    }

    fn free_indices(&self) -> Vec<usize> {
        (0..self.parameters.len())
            .filter(|&i| !self.parameters[i].fixed)
            .collect()
    }

    fn expand(&self, free: &[f64]) -> Vec<f64> {
        let mut full: Vec<f64> = self.parameters.iter().map(|p| p.value).collect();
        for (k, i) in self.free_indices().into_iter().enumerate() {
            full[i] = free[k];
        }
        full
    }

    fn weighted_residuals(&self, free: &[f64]) -> Result<DVector<f64>> {
        let y = self.evaluate(&self.expand(free))?;
        Ok(DVector::from_iterator(
            y.len(),
            y.iter()
                .zip(&self.data)
                .zip(&self.weights)
                .map(|((m, d), w)| w.sqrt() * (m - d)),
        ))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model_id: String,
    /// Free parameters, in declared order.
    pub names: Vec<String>,
    pub values: Vec<f64>,
    pub uncertainties: Vec<f64>,
    pub covariance: DMatrix<f64>,
    pub fixed: Vec<(String, f64)>,
    /// Weighted residual sum of squares.
    pub rss: f64,
    pub reduced_chi2: f64,
    pub dof: usize,
    pub converged: bool,
    pub iterations: usize,
    /// Weighted RSS after the initial guess and every accepted step.
    pub cost_history: Vec<f64>,
    /// Free parameters that finished on a bound; their uncertainty is zero.
    pub active_bounds: Vec<String>,
    pub warnings: Vec<String>,
    pub fitted: Vec<f64>,
    /// Data minus model.
    pub residuals: Vec<f64>,
}

impl FitResult {
    fn index(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Value of a free or fixed parameter.
    pub fn value(&self, name: &str) -> Option<f64> {
        self.index(name)
            .map(|i| self.values[i])
            .or_else(|| self.fixed.iter().find(|(n, _)| n == name).map(|(_, v)| *v))
    }

    pub fn uncertainty(&self, name: &str) -> Option<f64> {
        self.index(name).map(|i| self.uncertainties[i])
    }

    pub fn is_at_bound(&self, name: &str) -> bool {
        self.active_bounds.iter().any(|n| n == name)
    }
}

/// Central-difference Jacobian of `f` at `x`, columns for every entry of `x`.
/// Steps are `rel_step·max(|xⱼ|, scaleⱼ)` and turn one-sided next to a bound.
pub fn finite_difference_jacobian(
    f: &dyn Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    lower: &[f64],
    upper: &[f64],
    scale: &[f64],
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let f0 = f(x)?;
    let mut jac = DMatrix::zeros(f0.len(), x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(scale[j]);
        let can_down = x[j] - h >= lower[j];
        let can_up = x[j] + h <= upper[j];
        let col = match (can_down, can_up) {
            (true, true) => {
                probe[j] = x[j] + h;
                let fp = f(&probe)?;
                probe[j] = x[j] - h;
                let fm = f(&probe)?;
                (fp - fm) / (2.0 * h)
            }
            (false, true) => {
                probe[j] = x[j] + h;
                (f(&probe)? - &f0) / h
            }
            (true, false) => {
                probe[j] = x[j] - h;
                (&f0 - f(&probe)?) / h
            }
            (false, false) => DVector::zeros(f0.len()),
        };
        probe[j] = x[j];
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Five-point central-difference Jacobian, used to check the two-point one.
pub fn five_point_jacobian(
    f: &dyn Fn(&[f64]) -> Result<DVector<f64>>,
    x: &[f64],
    scale: &[f64],
    rel_step: f64,
) -> Result<DMatrix<f64>> {
    let n = f(x)?.len();
    let mut jac = DMatrix::zeros(n, x.len());
    let mut probe = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(scale[j]);
        let mut eval = |k: f64| -> Result<DVector<f64>> {
            probe[j] = x[j] + k * h;
            f(&probe)
        };
        let col = (eval(-2.0)? - eval(2.0)? * 1.0 + (eval(1.0)? - eval(-1.0)?) * 8.0) / (12.0 * h);
        probe[j] = x[j];
        jac.set_column(j, &col);
    }
    Ok(jac)
}

/// Parameters spanning the near-null space of `jac`, or `None` if it has
/// full column rank.
fn degenerate_parameters(jac: &DMatrix<f64>, names: &[String]) -> Option<Vec<String>> {
    let norms: Vec<f64> = jac.column_iter().map(|c| c.norm()).collect();
    let zero: Vec<String> = norms
        .iter()
        .zip(names)
        .filter(|(n, _)| !(**n > 0.0))
        .map(|(_, name)| name.clone())
        .collect();
    if !zero.is_empty() {
        return Some(zero);
    }
    let mut scaled = jac.clone();
    for (j, n) in norms.iter().enumerate() {
        scaled.column_mut(j).scale_mut(1.0 / n);
    }
    let svd = scaled.svd(false, true);
    let v_t = svd.v_t.as_ref()?;
    let s = &svd.singular_values;
    let s_max = s.max();
    let mut flagged = vec![false; names.len()];
    let mut any = false;
    for (k, &sk) in s.iter().enumerate() {
        if sk <= RANK_TOLERANCE * s_max {
            any = true;
            let row = v_t.row(k);
            let peak = row.amax();
            for (j, v) in row.iter().enumerate() {
                if v.abs() >= 0.1 * peak {
                    flagged[j] = true;
                }
            }
        }
    }
    any.then(|| {
        names
            .iter()
            .zip(flagged)
            .filter(|(_, f)| *f)
            .map(|(n, _)| n.clone())
            .collect()
    })
}

fn gradient_measure(jac: &DMatrix<f64>, r: &DVector<f64>) -> f64 {
    let rn = r.norm();
    if rn == 0.0 {
        return 0.0;
    }
    let g = jac.transpose() * r;
    jac.column_iter()
        .zip(g.iter())
        .map(|(c, gj)| {
            let cn = c.norm();
            if cn == 0.0 {
                0.0
            } else {
                gj.abs() / (cn * rn)
            }
        })
        .fold(0.0, f64::max)
}

/// Minimise Σ wᵢ(modelᵢ − dataᵢ)² over the free parameters.
pub fn fit_least_squares(problem: &FitProblem) -> Result<FitResult> {
    let idx = problem.free_indices();
    let names: Vec<String> = idx.iter().map(|&i| problem.parameters[i].name.clone()).collect();
    let lower: Vec<f64> = idx.iter().map(|&i| problem.parameters[i].lower).collect();
    let upper: Vec<f64> = idx.iter().map(|&i| problem.parameters[i].upper).collect();
    let scale: Vec<f64> = idx.iter().map(|&i| problem.parameters[i].scale).collect();
    let project = |x: &mut [f64]| {
        for j in 0..x.len() {
            x[j] = x[j].clamp(lower[j], upper[j]);
        }
    };
    let resid = |x: &[f64]| problem.weighted_residuals(x);
    let jacobian = |x: &[f64]| finite_difference_jacobian(&resid, x, &lower, &upper, &scale, JACOBIAN_RELATIVE_STEP);

    let mut x: Vec<f64> = idx.iter().map(|&i| problem.parameters[i].value).collect();
    let mut r = resid(&x)?;
    let mut cost = r.norm_squared();
    let mut jac = jacobian(&x)?;
    if let Some(params) = degenerate_parameters(&jac, &names) {
        return Err(Error::RankDeficient { params });
    }
    let mut history = vec![cost];
    let mut lambda = LAMBDA_INITIAL;
    let mut iterations = 0;
    let mut converged = cost == 0.0 || gradient_measure(&jac, &r) < GRADIENT_TOLERANCE;

    while !converged && iterations < problem.max_iterations {
        iterations += 1;
        let jtj = jac.transpose() * &jac;
        let g = jac.transpose() * &r;
        let diag_floor = jtj.diagonal().max() * 1e-15;
        let mut accepted = false;
        while lambda <= LAMBDA_MAX {
            let mut a = jtj.clone();
            for j in 0..x.len() {
                a[(j, j)] += lambda * jtj[(j, j)].max(diag_floor);
            }
            let Some(step) = a.cholesky().map(|c| c.solve(&(-&g))) else {
                lambda *= 10.0;
                continue;
            };
            let raw: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            let mut trial = raw.clone();
            project(&mut trial);
            if trial == x {
                break;
            }
            let mut r_trial = resid(&trial)?;
            let mut c_trial = r_trial.norm_squared();
            if trial != raw {
                // Landing on a bound can strand the fit where the model is
                // flat; compare with stopping halfway to it.
                let halfway: Vec<f64> = (0..x.len())
                    .map(|j| {
                        if trial[j] != raw[j] {
                            0.5 * (x[j] + trial[j])
                        } else {
                            trial[j]
                        }
                    })
                    .collect();
                let r_half = resid(&halfway)?;
                let c_half = r_half.norm_squared();
                if c_half < c_trial {
                    trial = halfway;
                    r_trial = r_half;
                    c_trial = c_half;
                }
            }
            if c_trial < cost {
                let rel = (cost - c_trial) / cost;
                x = trial;
                r = r_trial;
                cost = c_trial;
                history.push(cost);
                lambda = (lambda / 10.0).max(1e-12);
                accepted = true;
                if rel < COST_TOLERANCE || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No step within the trust region lowers the cost: stationary to
            // working precision.
            converged = true;
            break;
        }
        jac = jacobian(&x)?;
        if gradient_measure(&jac, &r) < GRADIENT_TOLERANCE {
            converged = true;
        }
    }

    let active: Vec<bool> = (0..x.len())
        .map(|j| (x[j] == lower[j] && lower[j].is_finite()) || (x[j] == upper[j] && upper[j].is_finite()))
        .collect();
    let active_bounds: Vec<String> = names
        .iter()
        .zip(&active)
        .filter(|(_, a)| **a)
        .map(|(n, _)| n.clone())
        .collect();
    let inner: Vec<usize> = (0..x.len()).filter(|&j| !active[j]).collect();
    let n = problem.data.len();
    let p = x.len();
    let dof = n - p;
    let reduced_chi2 = cost / dof as f64;
    let mut covariance = DMatrix::zeros(p, p);
    if !inner.is_empty() {
        let sub = jac.select_columns(&inner);
        let sub_names: Vec<String> = inner.iter().map(|&j| names[j].clone()).collect();
        if let Some(params) = degenerate_parameters(&sub, &sub_names) {
            return Err(Error::RankDeficient { params });
        }
        let normal = sub.transpose() * &sub;
        let inv = normal
            .clone()
            .cholesky()
            .map(|c| c.inverse())
            .or_else(|| normal.try_inverse())
            .ok_or_else(|| Error::RankDeficient {
                params: sub_names.clone(),
            })?;
        for (a, &ja) in inner.iter().enumerate() {
            for (b, &jb) in inner.iter().enumerate() {
                covariance[(ja, jb)] = inv[(a, b)] * reduced_chi2;
            }
        }
        covariance = (&covariance + covariance.transpose()) * 0.5;
    }
    let uncertainties: Vec<f64> = (0..p).map(|j| covariance[(j, j)].max(0.0).sqrt()).collect();
    let full = problem.expand(&x);
    let fitted = problem.evaluate(&full)?;
    let residuals = problem.data.iter().zip(&fitted).map(|(d, m)| d - m).collect();
    let mut warnings = Vec::new();
    if !converged {
        warnings.push(format!("no convergence after {iterations} iterations"));
    }
    for name in &active_bounds {
        warnings.push(format!("{name} finished on a bound"));
    }
    Ok(FitResult {
        model_id: problem.model_id.clone(),
        names,
        values: x,
        uncertainties,
        covariance,
        fixed: problem
            .parameters
            .iter()
            .filter(|p| p.fixed)
            .map(|p| (p.name.clone(), p.value))
            .collect(),
        rss: cost,
        reduced_chi2,
        dof,
        converged,
        iterations,
        cost_history: history,
        active_bounds,
        warnings,
        fitted,
        residuals,
    })
}

/// Restart from `starts − 1` random perturbations of the initial guess
/// (log-uniform within a factor of 3) and keep the lowest-cost result.
pub fn fit_multi_start(problem: &mut FitProblem, starts: usize, seed: u64) -> Result<FitResult> {
    let initial: Vec<f64> = problem.parameters.iter().map(|p| p.value).collect();
    let mut best = fit_least_squares(problem);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 1..starts {
        for (p, &v0) in problem.parameters.iter_mut().zip(&initial) {
            if !p.fixed {
                let factor = 3f64.powf(rng.random_range(-1.0..1.0));
                let v = if v0 == 0.0 {
                    p.scale * (factor - 1.0 / 3.0)
                } else {
                    v0 * factor
                };
                p.value = v.clamp(p.lower, p.upper);
            }
        }
        let candidate = fit_least_squares(problem);
        best = match (best, candidate) {
            (Ok(b), Ok(c)) => Ok(if c.rss < b.rss { c } else { b }),
            (Err(_), Ok(c)) => Ok(c),
            (b, Err(_)) => b,
        };
    }
    for (p, v0) in problem.parameters.iter_mut().zip(initial) {
        p.value = v0;
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn quadratic_problem<'a>(xs: &'a [f64], ys: Vec<f64>, guess: [f64; 3]) -> FitProblem<'a> {
        FitProblem::new(
            "quadratic",
            vec![
                Parameter::free("a", guess[0], f64::NEG_INFINITY, f64::INFINITY),
                Parameter::free("b", guess[1], f64::NEG_INFINITY, f64::INFINITY),
                Parameter::free("c", guess[2], f64::NEG_INFINITY, f64::INFINITY),
            ],
            ys,
            None,
            Box::new(move |p| Ok(xs.iter().map(|x| p[0] + p[1] * x + p[2] * x * x).collect())),
        )
        .unwrap()
    }

    #[test]
    fn quadratic_matches_normal_equations() {
        let xs: Vec<f64> = (0..25).map(|i| i as f64 * 0.2 - 2.0).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 0.3 - 1.1 * x + 0.7 * x * x + 0.05 * (7.0 * x).sin())
            .collect();
        let design = DMatrix::from_fn(xs.len(), 3, |i, j| xs[i].powi(j as i32));
        let y = DVector::from_column_slice(&ys);
        let exact = (design.transpose() * &design).try_inverse().unwrap() * design.transpose() * y;
        let res = fit_least_squares(&quadratic_problem(&xs, ys, [0.0, 0.0, 0.0])).unwrap();
        assert!(res.converged);
        for j in 0..3 {
            assert!(
                (res.values[j] - exact[j]).abs() < 1e-10,
                "{j}: {} vs {}",
                res.values[j],
                exact[j]
            );
        }
    }

    #[test]
    fn exact_start_converges_immediately() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 1.0 + 2.0 * x + 3.0 * x * x).collect();
        let res = fit_least_squares(&quadratic_problem(&xs, ys, [1.0, 2.0, 3.0])).unwrap();
        assert!(res.converged);
        assert!(res.iterations <= 2);
        assert_eq!(res.rss, 0.0);
    }

    #[test]
    fn cost_history_never_increases() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64 * 0.25).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|x| 2.0 * (-x / 1.7).exp() + 0.1 + 0.01 * (3.0 * x).cos())
            .collect();
        let problem = FitProblem::new(
            "exp",
            vec![
                Parameter::free("a", 0.5, 0.0, f64::INFINITY),
                Parameter::time("tau", 5.0, 100.0),
                Parameter::free("c", 0.0, f64::NEG_INFINITY, f64::INFINITY),
            ],
            ys,
            None,
            Box::new(|p| Ok(xs.iter().map(|x| p[0] * (-x / p[1]).exp() + p[2]).collect())),
        )
        .unwrap();
        let res = fit_least_squares(&problem).unwrap();
        assert!(res.converged);
        assert!(res.cost_history.windows(2).all(|w| w[1] <= w[0]));
        assert_relative_eq!(res.values[1], 1.7, max_relative = 1e-2);
    }

    #[test]
    fn duplicate_parameters_are_rank_deficient() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let problem = FitProblem::new(
            "dup",
            vec![
                Parameter::free("a", 1.0, f64::NEG_INFINITY, f64::INFINITY),
                Parameter::free("b", 0.5, f64::NEG_INFINITY, f64::INFINITY),
                Parameter::free("c", 0.1, f64::NEG_INFINITY, f64::INFINITY),
            ],
            ys,
            None,
            Box::new(|p| Ok(xs.iter().map(|x| (p[0] + p[1]) * x + p[2]).collect())),
        )
        .unwrap();
        match fit_least_squares(&problem) {
            Err(Error::RankDeficient { params }) => assert_eq!(params, vec!["a".to_string(), "b".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn unused_parameter_is_named() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x).collect();
        let problem = FitProblem::new(
            "unused",
            vec![
                Parameter::free("slope", 1.0, 0.0, 10.0),
                Parameter::free("ghost", 1.0, 0.0, 10.0),
            ],
            ys,
            None,
            Box::new(|p| Ok(xs.iter().map(|x| p[0] * x).collect())),
        )
        .unwrap();
        match fit_least_squares(&problem) {
            Err(Error::RankDeficient { params }) => assert_eq!(params, vec!["ghost".to_string()]),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn bounds_are_projected_and_reported() {
        let xs: Vec<f64> = (0..10).map(f64::from).collect();
        let ys: Vec<f64> = xs.iter().map(|x| -0.5 * x + 1.0).collect();
        let problem = FitProblem::new(
            "line",
            vec![Parameter::rate("slope", 1.0), Parameter::free("c", 0.0, -10.0, 10.0)],
            ys,
            None,
            Box::new(|p| Ok(xs.iter().map(|x| p[0] * x + p[1]).collect())),
        )
        .unwrap();
        let res = fit_least_squares(&problem).unwrap();
        assert_eq!(res.value("slope"), Some(0.0));
        assert!(res.is_at_bound("slope"));
        assert_eq!(res.uncertainty("slope"), Some(0.0));
    }

    #[test]
    fn iteration_cap_is_flagged() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 * 0.3).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * (-x / 2.0).exp()).collect();
        let problem = FitProblem::new(
            "exp",
            vec![Parameter::free("a", 1.0, 0.0, 10.0), Parameter::time("tau", 0.5, 100.0)],
            ys,
            None,
            Box::new(|p| Ok(xs.iter().map(|x| p[0] * (-x / p[1]).exp()).collect())),
        )
        .unwrap()
        .with_max_iterations(1);
        let res = fit_least_squares(&problem).unwrap();
        assert!(!res.converged);
        assert!(!res.warnings.is_empty());
    }

    #[test]
    fn rejects_bad_problems() {
        let model: ForwardModel = Box::new(|_| Ok(vec![0.0; 2]));
        assert!(FitProblem::new("m", vec![Parameter::fixed("a", 1.0)], vec![0.0; 2], None, model).is_err());
        let model: ForwardModel = Box::new(|_| Ok(vec![0.0; 1]));
        assert!(FitProblem::new("m", vec![Parameter::free("a", 1.0, 0.0, 2.0)], vec![0.0], None, model).is_err());
        let model: ForwardModel = Box::new(|_| Ok(vec![0.0; 3]));
        assert!(FitProblem::new(
            "m",
            vec![Parameter::free("a", 3.0, 0.0, 2.0)],
            vec![0.0; 3],
            None,
            model
        )
        .is_err());
    }

    #[test]
    fn two_and_five_point_jacobians_agree() {
        let f = |p: &[f64]| -> Result<DVector<f64>> {
            Ok(DVector::from_iterator(
                5,
                (0..5).map(|i| (p[0] * i as f64).sin() * p[1].exp()),
            ))
        };
        let x = [0.7, -0.3];
        let j2 = finite_difference_jacobian(&f, &x, &[-9.0; 2], &[9.0; 2], &[1.0; 2], 1e-6).unwrap();
        let j5 = five_point_jacobian(&f, &x, &[1.0; 2], 1e-7).unwrap();
        assert!((j2 - &j5).amax() < 1e-6 * j5.amax());
    }
}
