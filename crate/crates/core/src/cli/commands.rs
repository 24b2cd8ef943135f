use std::f64::consts::PI;
use std::path::Path;

use crate::corrections::{collection_efficiency_budget, corrected_visibility, g2_from_sbr, raw_visibility};
use crate::emitter::TimeTrace;
use crate::error::{Error, Result};
use crate::fit::{
    biexponential_problem, fit_least_squares, fit_multi_start, fit_rabi, gaussian_problem, hahn_problem,
    lifetime_problem, lorentzian_problem, order_biexponential, q_saturation_problem, ramsey_problem,
    ContrastFitOptions, FitProblem, FitResult, LifetimeOptions, RabiFitOptions, Weighting,
};
use crate::hom::{
    closed_form_visibility, mc_phase_oracle, visibility, visibility_vs_theta, visibility_vs_window, Window,
};
use crate::sequence::{
    contrast_curve, first_maximum, quality_factor, rabi_from_saturation, simulate_detuned_rabi_map, simulate_rabi,
    ContrastCurve, SequenceKind,
};
use crate::spectral::{ple_lineshape, sampled_fwhm};
use crate::units::{mhz_to_rad_per_ns, rad_per_ns_to_mhz};

use super::bundle::{ResultBundle, Table};
use super::config::{RunConfig, WeightingName};

fn key(s: f64) -> String {
    format!("{s}").replace('.', "p")
}

pub fn simulate_rabi_cmd(cfg: &RunConfig) -> Result<ResultBundle> {
    let emitter = cfg.emitter()?;
    let settings = cfg.ensemble_settings()?;
    let mut bundle = ResultBundle::new("simulate rabi");
    let mut header = vec!["t_ns".to_string()];
    let mut columns = Vec::new();
    let mut centers = Vec::new();
    for &s in &cfg.rabi.s {
        let trace = simulate_rabi(&emitter, s, cfg.rabi.pulse_ns, cfg.rabi.bins, &settings)?;
        let omega = rabi_from_saturation(s, emitter.t1_lifetime())?;
        let k = key(s);
        bundle.scalar(
            &format!("omega_mhz_s{k}"),
            rad_per_ns_to_mhz(omega),
            "derived: Ω = Γ₀√(s/2)",
        );
        bundle.scalar(&format!("pi_over_omega_ns_s{k}"), PI / omega, "derived: π/Ω");
        if let Some((t, peak)) = first_maximum(&trace) {
            bundle.scalar(&format!("first_maximum_ns_s{k}"), t, "simulation");
            bundle.scalar(
                &format!("pi_fidelity_s{k}"),
                peak,
                "simulation: ensemble ρ₁₁ at first maximum",
            );
        }
        bundle.scalar(
            &format!("quality_factor_s{k}"),
            quality_factor(omega, &emitter)?,
            "derived: Ω/(Γ₀/2 + Γ_PD)",
        );
        header.push(format!("rho11_s{k}"));
        centers = trace.centers();
        columns.push(trace.counts().to_vec());
    }
    let mut table = Table::new("rabi", &header.iter().map(String::as_str).collect::<Vec<_>>());
    for (i, t) in centers.iter().enumerate() {
        let mut row = vec![*t];
        row.extend(columns.iter().map(|c| c[i]));
        table.push(row);
    }
    bundle.table(table);
    Ok(bundle)
}

pub fn simulate_rabi_map_cmd(cfg: &RunConfig) -> Result<ResultBundle> {
    let emitter = cfg.emitter()?;
    let deltas_mhz = cfg.rabi.detuning_mhz.values()?;
    let deltas: Vec<f64> = deltas_mhz.iter().map(|d| mhz_to_rad_per_ns(*d)).collect();
    let traces = simulate_detuned_rabi_map(
        &emitter,
        cfg.rabi.map_s,
        &deltas,
        cfg.rabi.pulse_ns,
        cfg.rabi.bins,
        &cfg.ensemble_settings()?,
    )?;
    let mut bundle = ResultBundle::new("simulate rabi-map");
    let omega = rabi_from_saturation(cfg.rabi.map_s, emitter.t1_lifetime())?;
    bundle.scalar("s", cfg.rabi.map_s, "config");
    bundle.scalar("omega_mhz", rad_per_ns_to_mhz(omega), "derived: Ω = Γ₀√(s/2)");
    let mut table = Table::new("rabi_map", &["detuning_mhz", "t_ns", "rho11"]);
    for (d, trace) in deltas_mhz.iter().zip(&traces) {
        for (t, v) in trace.centers().iter().zip(trace.counts()) {
            table.push(vec![*d, *t, *v]);
        }
    }
    bundle.table(table);
    Ok(bundle)
}

pub fn simulate_contrast_cmd(cfg: &RunConfig, kind: SequenceKind) -> Result<ResultBundle> {
    let (name, section) = match kind {
        SequenceKind::Ramsey => ("ramsey", &cfg.ramsey),
        SequenceKind::Hahn => ("hahn", &cfg.hahn),
    };
    let emitter = cfg.contrast_emitter(section)?;
    let omega = rabi_from_saturation(section.s, emitter.t1_lifetime())?;
    let taus = section.tau_ns.values()?;
    let curve = contrast_curve(kind, &taus, &emitter, omega, &cfg.contrast_options(section)?)?;
    let mut bundle = ResultBundle::new(&format!("simulate {name}"));
    bundle.scalar("omega_mhz", rad_per_ns_to_mhz(omega), "derived: Ω = Γ₀√(s/2)");
    bundle.scalar(
        "gamma_pd_intrinsic_mhz",
        rad_per_ns_to_mhz(emitter.gamma_pd_intrinsic()),
        "config",
    );
    bundle.scalar(
        "gamma_pd_laser_mhz",
        rad_per_ns_to_mhz(emitter.gamma_pd_laser()),
        "config",
    );
    match curve.one_over_e_time() {
        Some(t) => bundle.scalar("one_over_e_ns", t, "simulation: interpolated"),
        None => bundle.text("one_over_e_ns", "none", "simulation: contrast stays above 1/e"),
    }
    let mut table = Table::new(name, &["tau_ns", "contrast"]);
    for (t, c) in curve.taus.iter().zip(&curve.contrast) {
        table.push(vec![*t, *c]);
    }
    bundle.table(table);
    Ok(bundle)
}

pub fn simulate_ple_cmd(cfg: &RunConfig) -> Result<ResultBundle> {
    let emitter = cfg.emitter()?;
    let grid_mhz = cfg.ple.detuning_mhz.values()?;
    let grid: Vec<f64> = grid_mhz.iter().map(|d| mhz_to_rad_per_ns(*d)).collect();
    let shape = ple_lineshape(&emitter, cfg.ple.s, cfg.ple.inhomogeneous_fwhm_mhz, &grid)?;
    let mut bundle = ResultBundle::new("simulate ple");
    bundle.scalar(
        "lorentzian_fwhm_mhz",
        rad_per_ns_to_mhz(shape.lorentzian_fwhm),
        "derived: (Γ₀ + 2Γ_PD)√(1+s)",
    );
    bundle.scalar("gaussian_fwhm_mhz", rad_per_ns_to_mhz(shape.gaussian_fwhm), "config");
    if let Some(w) = sampled_fwhm(&grid_mhz, &shape.ensemble) {
        bundle.scalar("ensemble_fwhm_mhz", w, "simulation: sampled");
    }
    let mut table = Table::new("ple", &["detuning_mhz", "single_shot", "ensemble"]);
    for ((x, single), ensemble) in grid_mhz.iter().zip(&shape.single_shot).zip(&shape.ensemble) {
        table.push(vec![*x, *single, *ensemble]);
    }
    bundle.table(table);
    Ok(bundle)
}

pub fn hom_cmd(cfg: &RunConfig, seed: u64) -> Result<ResultBundle> {
    let base = cfg.hom_config(Window::Infinite)?;
    let mut bundle = ResultBundle::new("hom");
    let v_inf = visibility(&base)?.visibility;
    bundle.scalar("t1_ns", base.t1_lifetime, "config");
    bundle.scalar("gamma_pd_mhz", rad_per_ns_to_mhz(base.gamma_pd), "config");
    bundle.scalar(
        "theta",
        1.0 + 2.0 * base.gamma_pd * base.t1_lifetime,
        "derived: (Γ₀ + 2Γ_PD)/Γ₀",
    );
    bundle.scalar("visibility_infinite", v_inf, "derived: Γ₀/(Γ₀ + 2Γ_PD)");
    let theta_window = match cfg.hom.theta_window_ns {
        Some(t) => Window::Finite(t),
        None => Window::Infinite,
    };
    let mut theta = Table::new("hom_theta", &["theta", "visibility"]);
    for (th, v) in visibility_vs_theta(&cfg.hom.theta.values()?, base.t1_lifetime, theta_window)? {
        theta.push(vec![th, v]);
    }
    bundle.table(theta);
    let windows = cfg.hom.window_ns.values()?;
    let mut window = Table::new("hom_window", &["window_ns", "visibility"]);
    for (t, v) in visibility_vs_window(&windows, &base)? {
        window.push(vec![t, v]);
    }
    bundle.table(window);
    if cfg.hom.oracle_trajectories > 0 {
        let picks = [windows[0], windows[windows.len() / 2], windows[windows.len() - 1]];
        let mut oracle = Table::new(
            "hom_oracle",
            &["window_ns", "quadrature", "monte_carlo", "standard_error", "z"],
        );
        for (i, t) in picks.iter().enumerate() {
            let c = base.with_window(Window::Finite(*t))?;
            let q = visibility(&c)?.visibility;
            let mc = mc_phase_oracle(&c, cfg.hom.oracle_trajectories, seed.wrapping_add(i as u64))?;
            let z = (mc.result.visibility - q) / mc.standard_error;
            oracle.push(vec![*t, q, mc.result.visibility, mc.standard_error, z]);
        }
        bundle.table(oracle);
    }
    bundle.scalar(
        "visibility_closed_form",
        closed_form_visibility(base.t1_lifetime, base.gamma_pd)?,
        "derived: Γ₀/(Γ₀ + 2Γ_PD)",
    );
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum FitModel {
    Lifetime,
    Rabi,
    Ramsey,
    Hahn,
    QSaturation,
    Biexponential,
    Lorentzian,
    Gaussian,
}

impl FitModel {
    fn x_column(self) -> &'static str {
        match self {
            FitModel::Lorentzian | FitModel::Gaussian => "detuning_mhz",
            FitModel::QSaturation => "omega_mhz",
            _ => "t_ns",
        }
    }
}

/// Rows of `x,value[,sigma]` with the header checked against `x_name`.
pub struct Series {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sigma: Option<Vec<f64>>,
}

pub fn read_series(path: &Path, x_name: &str) -> Result<Series> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_series(&text, x_name).map_err(|e| match e {
        Error::Csv(msg) => Error::Csv(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn parse_series(text: &str, x_name: &str) -> Result<Series> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes());
    let header = reader.headers().map_err(|e| Error::Csv(e.to_string()))?.clone();
    if header.is_empty() || (header.len() == 1 && header[0].is_empty()) {
        return Err(Error::Usage("input CSV is empty".into()));
    }
    let names: Vec<&str> = header.iter().collect();
    let with_sigma = match names.as_slice() {
        [x, "value"] if *x == x_name => false,
        [x, "value", "sigma"] if *x == x_name => true,
        _ => {
            return Err(Error::Csv(format!(
                "header must be `{x_name},value` or `{x_name},value,sigma`, got `{}`",
                names.join(",")
            )))
        }
    };
    let mut s = Series {
        x: Vec::new(),
        y: Vec::new(),
        sigma: with_sigma.then(Vec::new),
    };
    for (i, record) in reader.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| Error::Csv(format!("row {row}: {e}")))?;
        let parse = |k: usize| -> Result<f64> {
            let field = record.get(k).unwrap_or("");
            field.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                Error::Csv(format!(
                    "row {row}: `{field}` in column {} is not a finite number",
                    k + 1
                ))
            })
        };
        s.x.push(parse(0)?);
        s.y.push(parse(1)?);
        if let Some(sig) = s.sigma.as_mut() {
            sig.push(parse(2)?);
        }
    }
    if s.x.is_empty() {
        return Err(Error::Usage("input CSV has no data rows".into()));
    }
    if s.x.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Csv("first column must be strictly increasing".into()));
    }
    Ok(s)
}

/// Bin edges halfway between sample points, extended by half a spacing at
/// either end.
fn trace_from_centers(x: &[f64], y: &[f64]) -> Result<TimeTrace> {
    if x.len() < 2 {
        return Err(Error::Usage("a trace needs at least two rows".into()));
    }
    let n = x.len();
    let mut edges = Vec::with_capacity(n + 1);
    edges.push(x[0] - 0.5 * (x[1] - x[0]));
    for w in x.windows(2) {
        edges.push(0.5 * (w[0] + w[1]));
    }
    edges.push(x[n - 1] + 0.5 * (x[n - 1] - x[n - 2]));
    TimeTrace::new(edges, y.to_vec())
}

fn weighting(name: WeightingName, sigma: &Option<Vec<f64>>, counts: bool) -> Weighting {
    if let Some(s) = sigma {
        return Weighting::Sigma(s.clone());
    }
    match name {
        WeightingName::Poisson => Weighting::Poisson,
        WeightingName::Uniform => Weighting::Uniform,
        WeightingName::Auto if counts => Weighting::Poisson,
        WeightingName::Auto => Weighting::Uniform,
    }
}

fn record_fit(bundle: &mut ResultBundle, result: &FitResult, x: &[f64], y: &[f64], x_name: &str) {
    bundle.text("model", &result.model_id, "input");
    for (i, name) in result.names.iter().enumerate() {
        bundle.scalar(name, result.values[i], "fit");
        bundle.scalar(&format!("{name}_sigma"), result.uncertainties[i], "fit: one sigma");
    }
    for (name, v) in &result.fixed {
        bundle.scalar(name, *v, "fixed");
    }
    bundle.scalar("rss", result.rss, "fit: weighted");
    bundle.scalar("reduced_chi2", result.reduced_chi2, "fit");
    bundle.text("converged", &result.converged.to_string(), "fit");
    bundle.text("iterations", &result.iterations.to_string(), "fit");
    if !result.active_bounds.is_empty() {
        bundle.text("active_bounds", &result.active_bounds.join(" "), "fit");
    }
    for (i, w) in result.warnings.iter().enumerate() {
        bundle.text(&format!("warning_{i}"), w, "fit");
    }
    let mut table = Table::new("residuals", &[x_name, "value", "fitted", "residual"]);
    for i in 0..x.len() {
        table.push(vec![x[i], y[i], result.fitted[i], result.residuals[i]]);
    }
    bundle.table(table);
}

/// Fit `model` to the series in `data`. Returns the bundle together with the
/// convergence flag so the caller can still write diagnostics.
pub fn fit_cmd(cfg: &RunConfig, model: FitModel, data: &Series, seed: u64) -> Result<(ResultBundle, bool)> {
    let mut bundle = ResultBundle::new(&format!("fit {}", format!("{model:?}").to_lowercase()));
    let fc = &cfg.fit;
    let solve = |mut problem: FitProblem| -> Result<FitResult> {
        if fc.multi_start > 1 {
            fit_multi_start(&mut problem, fc.multi_start, seed)
        } else {
            fit_least_squares(&problem)
        }
    };
    let contrast_opts = |section: &super::config::ContrastSection| -> Result<ContrastFitOptions> {
        Ok(ContrastFitOptions {
            contrast: cfg.contrast_options(section)?,
            t2_star_upper: fc.t2_star_upper_ns,
        })
    };
    let result = match model {
        FitModel::Lifetime => {
            let trace = trace_from_centers(&data.x, &data.y)?;
            let opts = LifetimeOptions {
                fixed_background: fc.fixed_background,
                weighting: weighting(fc.weighting, &data.sigma, true),
            };
            solve(lifetime_problem(&trace, &opts)?)?
        }
        FitModel::Rabi => {
            if fc.multi_start > 1 {
                bundle.text("multi_start", "ignored", "Rabi fits start from the FFT estimate");
            }
            let s = *cfg
                .rabi
                .s
                .first()
                .ok_or_else(|| Error::Config("rabi.s is empty".into()))?;
            let trace = trace_from_centers(&data.x, &data.y)?;
            let opts = RabiFitOptions {
                ensemble: cfg.ensemble_settings()?,
                scale: (!fc.rabi_free_scale).then_some(1.0),
            };
            let fits = fit_rabi(&[(s, trace)], &cfg.emitter()?, &opts)?;
            let fit = fits.into_iter().next().expect("one trace in, one fit out");
            bundle.scalar("s", s, "config");
            bundle.scalar("omega_mhz", rad_per_ns_to_mhz(fit.omega), "fit");
            bundle.scalar("gamma_pd_mhz", rad_per_ns_to_mhz(fit.gamma_pd), "fit");
            fit.result
        }
        FitModel::Ramsey | FitModel::Hahn => {
            let curve = ContrastCurve::new(data.x.clone(), data.y.clone())?;
            let section = if model == FitModel::Ramsey {
                &cfg.ramsey
            } else {
                &cfg.hahn
            };
            let emitter = cfg.contrast_emitter(section)?;
            let omega = rabi_from_saturation(section.s, emitter.t1_lifetime())?;
            bundle.scalar("pulse_omega_mhz", rad_per_ns_to_mhz(omega), "derived: Ω = Γ₀√(s/2)");
            let opts = contrast_opts(section)?;
            let res = if model == FitModel::Ramsey {
                solve(ramsey_problem(&curve, &emitter, omega, &opts)?)?
            } else {
                solve(hahn_problem(&curve, &emitter, omega, &opts)?)?
            };
            for name in ["gamma_pd_intrinsic", "gamma_pd_laser"] {
                if let Some(v) = res.value(name) {
                    bundle.scalar(&format!("{name}_mhz"), rad_per_ns_to_mhz(v), "fit: Γ/2π");
                }
            }
            res
        }
        FitModel::QSaturation => {
            let pts: Vec<(f64, f64)> = data
                .x
                .iter()
                .map(|w| mhz_to_rad_per_ns(*w))
                .zip(data.y.iter().copied())
                .collect();
            let res = solve(q_saturation_problem(&pts, cfg.emitter.t1_ns)?)?;
            if let Some(v) = res.value("gamma_pd0") {
                bundle.scalar("gamma_pd0_mhz", rad_per_ns_to_mhz(v), "fit: Γ/2π");
            }
            res
        }
        FitModel::Biexponential => {
            let trace = trace_from_centers(&data.x, &data.y)?;
            let w = weighting(fc.weighting, &data.sigma, true);
            order_biexponential(solve(biexponential_problem(&trace, &w)?)?)?
        }
        FitModel::Lorentzian => {
            let w = weighting(fc.weighting, &data.sigma, false);
            solve(lorentzian_problem(&data.x, &data.y, &w)?)?
        }
        FitModel::Gaussian => {
            let w = weighting(fc.weighting, &data.sigma, false);
            solve(gaussian_problem(&data.x, &data.y, &w)?)?
        }
    };
    let converged = result.converged;
    record_fit(&mut bundle, &result, &data.x, &data.y, model.x_column());
    Ok((bundle, converged))
}

pub fn fit_input_column(model: FitModel) -> &'static str {
    model.x_column()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct CorrectArgs {
    pub sbr: Option<f64>,
    pub g2par: Option<f64>,
    pub g2perp: Option<f64>,
    pub epsilon: Option<f64>,
    pub g2: Option<f64>,
    pub delta2: Option<f64>,
    pub p_detected: Option<f64>,
    pub branching: Option<f64>,
    pub quantum_efficiency: Option<f64>,
    pub setup_efficiency: Option<f64>,
    pub direction_factor: Option<f64>,
}

fn usage(e: Error) -> Error {
    match e {
        Error::Domain(m) => Error::Usage(m),
        other => other,
    }
}

pub fn correct_cmd(args: &CorrectArgs) -> Result<ResultBundle> {
    let mut bundle = ResultBundle::new("correct");
    let mut g2 = args.g2;
    if let Some(b) = args.sbr {
        let v = g2_from_sbr(b).map_err(usage)?;
        bundle.scalar("sbr", b, "input");
        bundle.scalar("g2_from_sbr", v, "derived: 2/b");
        g2 = g2.or(Some(v));
    }
    if let (Some(par), Some(perp)) = (args.g2par, args.g2perp) {
        let v_raw = raw_visibility(par, perp).map_err(usage)?;
        bundle.scalar("v_raw", v_raw, "derived: 1 − g∥/g⊥");
        let eps = args.epsilon.unwrap_or(0.0);
        let g = g2.unwrap_or(0.0);
        let d2 = args.delta2.unwrap_or(0.0);
        let v = corrected_visibility(v_raw, eps, g, d2).map_err(usage)?;
        bundle.scalar("epsilon", eps, "input");
        bundle.scalar("g2", g, if args.g2.is_some() { "input" } else { "derived" });
        bundle.scalar("delta2", d2, "input");
        bundle.scalar("v_corrected", v, "derived: (1+2g²)(1+8δ₂²)V_raw/(1−ε)²");
    } else if args.g2par.is_some() || args.g2perp.is_some() {
        return Err(Error::Usage("--g2par and --g2perp must be given together".into()));
    }
    let budget = [
        args.p_detected,
        args.branching,
        args.quantum_efficiency,
        args.setup_efficiency,
        args.direction_factor,
    ];
    if budget.iter().all(Option::is_some) {
        let [p, b, q, s, d] = budget.map(Option::unwrap);
        let eta = collection_efficiency_budget(p, b, q, s, d).map_err(usage)?;
        bundle.scalar(
            "collection_efficiency",
            eta,
            "derived: p/(branching·QE·setup·direction)",
        );
    } else if budget.iter().any(Option::is_some) {
        return Err(Error::Usage(
            "efficiency budget needs --p-detected, --branching, --quantum-efficiency, --setup-efficiency and --direction-factor".into(),
        ));
    }
    if bundle.summary.is_empty() {
        return Err(Error::Usage(
            "nothing to compute; pass --sbr and/or --g2par/--g2perp".into(),
        ));
    }
    Ok(bundle)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Figure {
    Fig2,
    Fig3a,
    Figs8,
}

impl Figure {
    pub fn preset(self) -> &'static str {
        match self {
            Figure::Fig2 => include_str!("../../presets/fig2.toml"),
            Figure::Fig3a => include_str!("../../presets/fig3a.toml"),
            Figure::Figs8 => include_str!("../../presets/figs8.toml"),
        }
    }
}

pub fn reproduce_cmd(figure: Figure, seed_override: Option<u64>) -> Result<ResultBundle> {
    let mut cfg = RunConfig::parse(figure.preset())?;
    if let Some(seed) = seed_override {
        cfg.ensemble.seed = seed;
    }
    let mut bundle = ResultBundle::new(&format!("reproduce {}", format!("{figure:?}").to_lowercase()));
    match figure {
        Figure::Fig2 => {
            bundle.merge(simulate_rabi_cmd(&cfg)?);
            bundle.merge(simulate_rabi_map_cmd(&cfg)?);
            let emitter = cfg.emitter()?;
            let mut q = Table::new("quality_factor", &["s", "omega_mhz", "q"]);
            for &s in &cfg.rabi.s {
                let omega = rabi_from_saturation(s, emitter.t1_lifetime())?;
                q.push(vec![s, rad_per_ns_to_mhz(omega), quality_factor(omega, &emitter)?]);
            }
            bundle.table(q);
        }
        Figure::Fig3a => {
            let mut ramsey = simulate_contrast_cmd(&cfg, SequenceKind::Ramsey)?;
            prefix(&mut ramsey, "ramsey");
            let mut hahn = simulate_contrast_cmd(&cfg, SequenceKind::Hahn)?;
            prefix(&mut hahn, "hahn");
            bundle.merge(ramsey);
            bundle.merge(hahn);
        }
        Figure::Figs8 => bundle.merge(hom_cmd(&cfg, cfg.ensemble.seed)?),
    }
    bundle.text("seed", &cfg.ensemble.seed.to_string(), "config");
    Ok(bundle)
}

fn prefix(bundle: &mut ResultBundle, p: &str) {
    for e in &mut bundle.summary {
        e.key = format!("{p}_{}", e.key);
    }
}
