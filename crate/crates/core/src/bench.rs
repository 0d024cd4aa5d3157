//! Validation studies: stable configuration, sound speed, truncation error,
//! and condition-number scaling.
//!
//! Every study is a pure function of its config. Sweeps run on the rayon pool
//! and are collected in parameter order, so their CSV output is byte-stable.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carleman::{carleman_dim, embed_state, CarlemanMatrix};
use crate::error::{Error, Result};
use crate::euler::{assemble, extract_observables, propagate, step_matrix, ObservableSeries};
use crate::lattice::{
    initial_field, integrate_reference, MomentumClosure, PhysParams, StreamingScale, WeightSet,
};
use crate::solver::{
    condition_number, solve_checked, KappaMethod, KappaReport, SolveMethod, DEFAULT_RESIDUAL_TOL,
};

/// Least-squares line `y = slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    /// `NaN` when `y` is constant.
    pub r_squared: f64,
    pub samples: usize,
    pub rms_residual: f64,
}

pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if x.len() != y.len() {
        return Err(Error::SizeMismatch {
            what: "fit ordinates",
            expected: x.len(),
            actual: y.len(),
        });
    }
    if x.len() < 2 {
        return Err(Error::InvalidParameter(
            "a fit needs at least two samples".into(),
        ));
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|x| (x - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx == 0.0 {
        return Err(Error::InvalidParameter(
            "fit abscissae are all equal".into(),
        ));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_res: f64 = x
        .iter()
        .zip(y)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    let ss_tot: f64 = y.iter().map(|y| (y - my).powi(2)).sum();
    Ok(LinearFit {
        slope,
        intercept,
        r_squared: if ss_tot == 0.0 {
            f64::NAN
        } else {
            1.0 - ss_res / ss_tot
        },
        samples: x.len(),
        rms_residual: (ss_res / n).sqrt(),
    })
}

/// Fit of `ln y` against `ln x`.
pub fn loglog_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    if let Some(v) = x.iter().chain(y).find(|v| !(**v > 0.0)) {
        return Err(Error::InvalidParameter(format!(
            "log-log fit needs positive data, got {v}"
        )));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    linear_fit(&lx, &ly)
}

fn csv<T>(header: &str, rows: &[T], row: impl Fn(&T) -> String) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(header);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", row(r));
    }
    out
}

// ---------------------------------------------------------------------------
// stable configuration

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StableConfig {
    pub params: PhysParams,
    pub h0: Vec<f64>,
    pub solve_method: SolveMethod,
    /// Replace the generator by zero.
    pub disable_dynamics: bool,
}

impl Default for StableConfig {
    fn default() -> Self {
        Self {
            params: PhysParams {
                g: 9.81,
                tau: 0.4,
                length: 3.0,
                grid_points: 4,
                dt: 0.1,
                timesteps: 4,
                weights: WeightSet::Standard,
                streaming_scale: StreamingScale::Physical,
            },
            h0: (1..=10).map(|k| k as f64 / 100.0).collect(),
            solve_method: SolveMethod::BlockForward,
            disable_dynamics: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableRow {
    pub h0: f64,
    /// `Σ_α |h_α(N_t) − h₀| / N`.
    pub abs_error: f64,
    /// `abs_error / h₀`.
    pub rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StableReport {
    pub config: StableConfig,
    pub rows: Vec<StableRow>,
    /// Linear fit of `rel_error` against `h₀` (absent for a single point).
    pub fit: Option<LinearFit>,
}

impl StableReport {
    pub fn to_csv(&self) -> String {
        let p = &self.config.params;
        csv(
            "scenario,N,N_t,L,g,tau,dt,h0,abs_error,rel_error",
            &self.rows,
            |r| {
                format!(
                    "stable,{},{},{},{},{},{},{},{},{}",
                    p.grid_points,
                    p.timesteps,
                    p.length,
                    p.g,
                    p.tau,
                    p.dt,
                    r.h0,
                    r.abs_error,
                    r.rel_error
                )
            },
        )
    }
}

/// Uniform depth at rest, full pipeline through the block system.
pub fn stable_config(h0: f64, cfg: &StableConfig) -> Result<StableRow> {
    let p = &cfg.params;
    p.validate()?;
    let c = if cfg.disable_dynamics {
        CarlemanMatrix::zero(p.grid_points)
    } else {
        CarlemanMatrix::build(p)?
    };
    stable_with(h0, cfg, &c)
}

fn stable_with(h0: f64, cfg: &StableConfig, c: &CarlemanMatrix) -> Result<StableRow> {
    let p = &cfg.params;
    let n = p.grid_points;
    let field = initial_field(&vec![h0; n], &vec![0.0; n])?;
    let sys = assemble(&c.total, &embed_state(&field), p.dt, p.timesteps)?;
    let report = solve_checked(&sys, cfg.solve_method, DEFAULT_RESIDUAL_TOL)?;
    let obs = extract_observables(&report.solution, n, p.timesteps)?;
    let last = &obs.h[p.timesteps];
    if last.iter().any(|v| !v.is_finite()) {
        return Err(Error::Instability {
            step: p.timesteps,
            reason: format!("non-finite depth for h0 = {h0}"),
        });
    }
    let abs_error = last.iter().map(|h| (h - h0).abs()).sum::<f64>() / n as f64;
    Ok(StableRow {
        h0,
        abs_error,
        rel_error: abs_error / h0,
    })
}

pub fn stable_sweep(cfg: &StableConfig) -> Result<StableReport> {
    let p = &cfg.params;
    p.validate()?;
    let c = if cfg.disable_dynamics {
        CarlemanMatrix::zero(p.grid_points)
    } else {
        CarlemanMatrix::build(p)?
    };
    let rows = cfg
        .h0
        .par_iter()
        .map(|&h0| stable_with(h0, cfg, &c))
        .collect::<Result<Vec<_>>>()?;
    let fit = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.h0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.rel_error).collect();
        Some(linear_fit(&x, &y)?)
    } else {
        None
    };
    Ok(StableReport {
        config: cfg.clone(),
        rows,
        fit,
    })
}

// ---------------------------------------------------------------------------
// sound speed

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SoundSpeedConfig {
    pub h0: Vec<f64>,
    /// Step height as a fraction of `h₀`.
    pub dh_frac: f64,
    pub grid_points: usize,
    pub length: f64,
    pub g: f64,
    pub tau: f64,
    /// `δt = cfl · δx / √(g h₀)` unless `dt` is given.
    pub cfl: f64,
    pub dt: Option<f64>,
    /// Defaults to `⌈4/cfl⌉`.
    pub timesteps: Option<usize>,
    pub weights: WeightSet,
    pub streaming_scale: StreamingScale,
}

impl Default for SoundSpeedConfig {
    fn default() -> Self {
        Self {
            h0: vec![0.02, 0.04, 0.06, 0.08, 0.1],
            dh_frac: 0.01,
            grid_points: 24,
            length: 23.0,
            g: 9.81,
            tau: 0.4,
            cfl: 0.1,
            dt: None,
            timesteps: None,
            weights: WeightSet::Standard,
            streaming_scale: StreamingScale::Physical,
        }
    }
}

impl SoundSpeedConfig {
    fn params(&self, dt: f64, timesteps: usize) -> PhysParams {
        PhysParams {
            g: self.g,
            tau: self.tau,
            length: self.length,
            grid_points: self.grid_points,
            dt,
            timesteps,
            weights: self.weights,
            streaming_scale: self.streaming_scale,
        }
    }

    pub fn dx(&self) -> f64 {
        self.length / (self.grid_points as f64 - 1.0)
    }

    pub fn dt_for(&self, h0: f64) -> f64 {
        self.dt
            .unwrap_or(self.cfl * self.dx() / (self.g * h0).sqrt())
    }

    pub fn steps(&self) -> usize {
        self.timesteps.unwrap_or((4.0 / self.cfl).ceil() as usize)
    }

    fn validate(&self) -> Result<()> {
        if self.grid_points < 6 {
            return Err(Error::InvalidParameter(format!(
                "sound-speed detection needs N >= 6, got {}",
                self.grid_points
            )));
        }
        if !(self.dh_frac > 0.0 && self.dh_frac < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "dh_frac must lie in (0, 1), got {}",
                self.dh_frac
            )));
        }
        if !(self.cfl > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "cfl must be > 0, got {}",
                self.cfl
            )));
        }
        if let Some(h) = self.h0.iter().find(|h| !(**h > 0.0)) {
            return Err(Error::InvalidParameter(format!("h0 must be > 0, got {h}")));
        }
        self.params(1.0, 1).validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeedRow {
    pub h0: f64,
    pub dt: f64,
    pub steps: usize,
    /// Fractional step indices at which the front crosses the probe points.
    pub arrival_first: f64,
    pub arrival_second: f64,
    /// Steps per grid point, `n_t`.
    pub steps_per_cell: f64,
    pub v_measured: f64,
    pub v_analytic: f64,
}

impl SoundSpeedRow {
    pub fn ratio(&self) -> f64 {
        self.v_measured / self.v_analytic
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundSpeedReport {
    pub config: SoundSpeedConfig,
    pub rows: Vec<SoundSpeedRow>,
    /// Log-log fit of measured speed against `h₀`.
    pub fit: Option<LinearFit>,
}

impl SoundSpeedReport {
    pub fn to_csv(&self) -> String {
        let c = &self.config;
        csv(
            "scenario,N,L,g,tau,cfl,dh_frac,h0,dt,steps,arrival_first,arrival_second,steps_per_cell,v_measured,v_analytic,ratio",
            &self.rows,
            |r| {
                format!(
                    "sound-speed,{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
                    c.grid_points,
                    c.length,
                    c.g,
                    c.tau,
                    c.cfl,
                    c.dh_frac,
                    r.h0,
                    r.dt,
                    r.steps,
                    r.arrival_first,
                    r.arrival_second,
                    r.steps_per_cell,
                    r.v_measured,
                    r.v_analytic,
                    r.ratio()
                )
            },
        )
    }
}

/// Fractional step at which `series` first rises through `threshold`.
pub fn arrival_time(series: &[f64], threshold: f64) -> Option<f64> {
    series.windows(2).enumerate().find_map(|(j, w)| {
        (w[0] < threshold && threshold <= w[1])
            .then(|| j as f64 + (threshold - w[0]) / (w[1] - w[0]))
    })
}

/// Half-domain step of height `δh₀` on top of `h₀`, evolved with the
/// Carleman propagator. The rising front is timed at two probe points of
/// equal parity (central differences decouple odd and even points) two cells
/// apart, giving `n_t` steps per cell and `v = (L/N)/(n_t δt)`.
pub fn sound_speed(h0: f64, cfg: &SoundSpeedConfig) -> Result<SoundSpeedRow> {
    cfg.validate()?;
    let c = CarlemanMatrix::build(&cfg.params(cfg.dt_for(h0), cfg.steps()))?;
    sound_speed_with(h0, cfg, &c)
}

fn sound_speed_with(h0: f64, cfg: &SoundSpeedConfig, c: &CarlemanMatrix) -> Result<SoundSpeedRow> {
    let n = cfg.grid_points;
    let dt = cfg.dt_for(h0);
    let steps = cfg.steps();
    let dh = cfg.dh_frac * h0;
    let h: Vec<f64> = (0..n)
        .map(|a| if a < n / 2 { h0 + dh } else { h0 })
        .collect();
    let field = initial_field(&h, &vec![0.0; n])?;
    let m = step_matrix(&c.total, dt)?;
    let states = propagate(&m, &embed_state(&field), steps)?;
    let obs = ObservableSeries::from_states(&states, n)?;

    let threshold = h0 + 0.25 * dh;
    let probe = |a: usize| -> Result<f64> {
        let series: Vec<f64> = obs.h.iter().map(|h| h[a]).collect();
        arrival_time(&series, threshold).ok_or(Error::NoPropagation { steps })
    };
    let first = probe(n / 2)?;
    let second = probe(n / 2 + 2)?;
    let steps_per_cell = (second - first) / 2.0;
    if !(steps_per_cell > 0.0) {
        return Err(Error::NoPropagation { steps });
    }
    Ok(SoundSpeedRow {
        h0,
        dt,
        steps,
        arrival_first: first,
        arrival_second: second,
        steps_per_cell,
        v_measured: (cfg.length / n as f64) / (steps_per_cell * dt),
        v_analytic: (cfg.g * h0).sqrt(),
    })
}

pub fn sound_speed_sweep(cfg: &SoundSpeedConfig) -> Result<SoundSpeedReport> {
    cfg.validate()?;
    // Physical streaming does not depend on δt, so one generator serves every h₀.
    let shared = match cfg.streaming_scale {
        StreamingScale::Physical => Some(CarlemanMatrix::build(&cfg.params(1.0, cfg.steps()))?),
        StreamingScale::Lattice => None,
    };
    let rows = cfg
        .h0
        .par_iter()
        .map(|&h0| match &shared {
            Some(c) => sound_speed_with(h0, cfg, c),
            None => sound_speed(h0, cfg),
        })
        .collect::<Result<Vec<_>>>()?;
    let fit = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.h0).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.v_measured).collect();
        Some(loglog_fit(&x, &y)?)
    } else {
        None
    };
    Ok(SoundSpeedReport {
        config: cfg.clone(),
        rows,
        fit,
    })
}

// ---------------------------------------------------------------------------
// truncation error

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TruncationConfig {
    pub params: PhysParams,
    pub deviations: Vec<f64>,
    /// Uniform background velocity.
    pub u0: f64,
}

impl Default for TruncationConfig {
    fn default() -> Self {
        Self {
            params: PhysParams {
                g: 2.0 / 3.0,
                tau: 1.0,
                length: 3.0,
                grid_points: 4,
                dt: 0.2,
                timesteps: 4,
                weights: WeightSet::Standard,
                streaming_scale: StreamingScale::Physical,
            },
            deviations: vec![0.02, 0.01, 0.005],
            u0: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationRow {
    pub deviation: f64,
    /// Max over steps and points of `|h_LSE − h_ref|`, full `1/h` reference.
    pub discrepancy: f64,
    /// Same against the reference run with the truncated closure.
    pub discrepancy_truncated_ref: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruncationReport {
    pub config: TruncationConfig,
    /// Depth convention of the perturbation; always normalized about `h̄ = 1`.
    pub mode: String,
    pub rows: Vec<TruncationRow>,
    /// Log-log fit of `discrepancy` against deviation (positive entries only).
    pub fit: Option<LinearFit>,
}

impl TruncationReport {
    pub fn to_csv(&self) -> String {
        let p = &self.config.params;
        csv(
            "scenario,mode,N,N_t,L,g,tau,dt,u0,deviation,discrepancy,discrepancy_truncated_ref",
            &self.rows,
            |r| {
                format!(
                    "truncation,{},{},{},{},{},{},{},{},{},{},{}",
                    self.mode,
                    p.grid_points,
                    p.timesteps,
                    p.length,
                    p.g,
                    p.tau,
                    p.dt,
                    self.config.u0,
                    r.deviation,
                    r.discrepancy,
                    r.discrepancy_truncated_ref
                )
            },
        )
    }
}

fn max_discrepancy(lse: &ObservableSeries, reference: &[crate::lattice::DistributionField]) -> f64 {
    lse.h
        .iter()
        .zip(reference)
        .map(|(h, f)| {
            h.iter()
                .zip(f.heights())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// Depth `1 + d` on the first half of the grid and `1` elsewhere, uniform `u₀`.
pub fn truncation_point(
    d: f64,
    cfg: &TruncationConfig,
    c: &CarlemanMatrix,
) -> Result<TruncationRow> {
    let p = &cfg.params;
    let n = p.grid_points;
    let h: Vec<f64> = (0..n)
        .map(|a| if a < n / 2 { 1.0 + d } else { 1.0 })
        .collect();
    let field = initial_field(&h, &vec![cfg.u0; n])?;
    let sys = assemble(&c.total, &embed_state(&field), p.dt, p.timesteps)?;
    let sol = solve_checked(&sys, SolveMethod::BlockForward, DEFAULT_RESIDUAL_TOL)?;
    let lse = extract_observables(&sol.solution, n, p.timesteps)?;
    let exact = integrate_reference(&field, p, MomentumClosure::Exact, p.timesteps)?;
    let trunc = integrate_reference(&field, p, MomentumClosure::Truncated, p.timesteps)?;
    Ok(TruncationRow {
        deviation: d,
        discrepancy: max_discrepancy(&lse, &exact),
        discrepancy_truncated_ref: max_discrepancy(&lse, &trunc),
    })
}

pub fn truncation_error_study(cfg: &TruncationConfig) -> Result<TruncationReport> {
    cfg.params.validate()?;
    if let Some(d) = cfg.deviations.iter().find(|d| !(d.abs() <= 0.2)) {
        return Err(Error::InvalidParameter(format!(
            "deviation must satisfy |d| <= 0.2, got {d}"
        )));
    }
    let c = CarlemanMatrix::build(&cfg.params)?;
    let rows = cfg
        .deviations
        .par_iter()
        .map(|&d| truncation_point(d, cfg, &c))
        .collect::<Result<Vec<_>>>()?;
    let (x, y): (Vec<f64>, Vec<f64>) = rows
        .iter()
        .filter(|r| r.deviation > 0.0 && r.discrepancy > 0.0)
        .map(|r| (r.deviation, r.discrepancy))
        .unzip();
    let fit = if x.len() >= 2 {
        Some(loglog_fit(&x, &y)?)
    } else {
        None
    };
    Ok(TruncationReport {
        config: cfg.clone(),
        mode: "normalized".into(),
        rows,
        fit,
    })
}

// ---------------------------------------------------------------------------
// condition number sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KappaConfig {
    /// `N_t` sweep at `grid_points`.
    pub timesteps: Vec<usize>,
    pub grid_points: usize,
    /// `N` sweep at `fixed_timesteps`.
    pub grid_list: Vec<usize>,
    pub fixed_timesteps: usize,
    pub g: f64,
    pub tau: f64,
    pub dt: f64,
    /// Grid spacing; the domain length is `dx·(N − 1)`.
    pub dx: f64,
    pub method: KappaMethod,
    pub weights: WeightSet,
    pub streaming_scale: StreamingScale,
}

impl Default for KappaConfig {
    fn default() -> Self {
        Self {
            timesteps: vec![2, 4, 8, 16],
            grid_points: 3,
            grid_list: vec![3, 4, 5, 6],
            fixed_timesteps: 4,
            g: 2.0 / 3.0,
            tau: 1.0,
            dt: 0.1,
            dx: 1.0,
            method: KappaMethod::Iterative,
            weights: WeightSet::Standard,
            streaming_scale: StreamingScale::Physical,
        }
    }
}

impl KappaConfig {
    pub fn params(&self, n: usize, nt: usize) -> PhysParams {
        PhysParams {
            g: self.g,
            tau: self.tau,
            length: self.dx * (n as f64 - 1.0),
            grid_points: n,
            dt: self.dt,
            timesteps: nt,
            weights: self.weights,
            streaming_scale: self.streaming_scale,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaSweep {
    pub rows: Vec<KappaReport>,
    /// Linear fit of κ against the swept parameter.
    pub fit: Option<LinearFit>,
    /// `max κ / min κ`.
    pub spread: f64,
}

impl KappaSweep {
    fn new(rows: Vec<KappaReport>, x: impl Fn(&KappaReport) -> f64) -> Result<Self> {
        let xs: Vec<f64> = rows.iter().map(&x).collect();
        let ks: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
        let distinct = xs.iter().any(|v| *v != xs[0]);
        let fit = if rows.len() >= 2 && distinct {
            Some(linear_fit(&xs, &ks)?)
        } else {
            None
        };
        let max = ks.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = ks.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(Self {
            rows,
            fit,
            spread: max / min,
        })
    }

    pub fn to_csv(&self) -> String {
        csv(KappaReport::CSV_HEADER, &self.rows, KappaReport::csv_row)
    }
}

/// κ of the Euler block matrix for one `(N, N_t)`.
pub fn kappa_point(
    cfg: &KappaConfig,
    n: usize,
    nt: usize,
    method: KappaMethod,
) -> Result<KappaReport> {
    let p = cfg.params(n, nt);
    let c = CarlemanMatrix::build(&p)?;
    let v0 = vec![0.0; carleman_dim(n)];
    let sys = assemble(&c.total, &v0, p.dt, nt)?;
    let mut r = condition_number(&sys.matrix, method)?;
    r.grid_points = n;
    r.timesteps = nt;
    Ok(r)
}

pub fn kappa_vs_timesteps(cfg: &KappaConfig) -> Result<KappaSweep> {
    let rows = cfg
        .timesteps
        .par_iter()
        .map(|&nt| kappa_point(cfg, cfg.grid_points, nt, cfg.method))
        .collect::<Result<Vec<_>>>()?;
    KappaSweep::new(rows, |r| r.timesteps as f64)
}

pub fn kappa_vs_grid(cfg: &KappaConfig) -> Result<KappaSweep> {
    let rows = cfg
        .grid_list
        .par_iter()
        .map(|&n| kappa_point(cfg, n, cfg.fixed_timesteps, cfg.method))
        .collect::<Result<Vec<_>>>()?;
    KappaSweep::new(rows, |r| r.grid_points as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaStudy {
    pub config: KappaConfig,
    pub vs_timesteps: KappaSweep,
    pub vs_grid: KappaSweep,
}

impl KappaStudy {
    /// Both sweeps in one table, time sweep first.
    pub fn to_csv(&self) -> String {
        let rows: Vec<KappaReport> = self
            .vs_timesteps
            .rows
            .iter()
            .chain(&self.vs_grid.rows)
            .cloned()
            .collect();
        csv(KappaReport::CSV_HEADER, &rows, KappaReport::csv_row)
    }
}

pub fn kappa_sweeps(cfg: &KappaConfig) -> Result<KappaStudy> {
    Ok(KappaStudy {
        config: cfg.clone(),
        vs_timesteps: kappa_vs_timesteps(cfg)?,
        vs_grid: kappa_vs_grid(cfg)?,
    })
}

// ---------------------------------------------------------------------------
// inverse-polynomial degree

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DegreeConfig {
    pub kappas: Vec<f64>,
    pub epsilon: f64,
}

impl Default for DegreeConfig {
    fn default() -> Self {
        Self {
            kappas: vec![4.0, 8.0, 16.0, 32.0, 64.0],
            epsilon: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeReport {
    pub config: DegreeConfig,
    pub rows: Vec<crate::qsvt::DegreeRow>,
    /// `max/min` of `d/(κ ln κ)`.
    pub ratio_spread: f64,
    /// Log-log fit of degree against κ.
    pub fit: Option<LinearFit>,
}

impl DegreeReport {
    pub fn to_csv(&self) -> String {
        csv(
            crate::qsvt::DegreeRow::CSV_HEADER,
            &self.rows,
            crate::qsvt::DegreeRow::csv_row,
        )
    }
}

pub fn degree_study(cfg: &DegreeConfig) -> Result<DegreeReport> {
    let rows = crate::qsvt::degree_scaling(&cfg.kappas, cfg.epsilon)?;
    let ratios: Vec<f64> = rows.iter().map(|r| r.ratio_d_over_klogk).collect();
    let max = ratios.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    let fit = if rows.len() >= 2 {
        let x: Vec<f64> = rows.iter().map(|r| r.kappa).collect();
        let y: Vec<f64> = rows.iter().map(|r| r.degree as f64).collect();
        Some(loglog_fit(&x, &y)?)
    } else {
        None
    };
    Ok(DegreeReport {
        config: cfg.clone(),
        rows,
        ratio_spread: max / min,
        fit,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn fits() {
        let f = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert_relative_eq!(f.slope, 2.0, epsilon = 1e-14);
        assert_relative_eq!(f.intercept, 1.0, epsilon = 1e-14);
        assert_relative_eq!(f.r_squared, 1.0, epsilon = 1e-14);
        let g = loglog_fit(&[1.0, 4.0, 16.0], &[1.0, 2.0, 4.0]).unwrap();
        assert_relative_eq!(g.slope, 0.5, epsilon = 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_err());
        assert!(linear_fit(&[1.0, 1.0], &[1.0, 2.0]).is_err());
        assert!(linear_fit(&[1.0, 2.0], &[1.0, 1.0])
            .unwrap()
            .r_squared
            .is_nan());
        assert!(loglog_fit(&[1.0, 0.0], &[1.0, 1.0]).is_err());
    }

    #[test]
    fn arrival_interpolates() {
        assert_eq!(arrival_time(&[0.0, 0.0, 1.0, 2.0], 0.5), Some(1.5));
        assert_eq!(arrival_time(&[0.0, 0.1], 0.5), None);
    }

    #[test]
    fn stable_without_dynamics_has_zero_error() {
        let cfg = StableConfig {
            disable_dynamics: true,
            ..StableConfig::default()
        };
        let r = stable_config(0.05, &cfg).unwrap();
        // only the rounding of h₀(2/3 + 1/6 + 1/6) remains
        assert!(r.rel_error <= f64::EPSILON, "{r:?}");
    }

    #[test]
    fn stable_error_is_roundoff_with_standard_weights() {
        let r = stable_config(0.05, &StableConfig::default()).unwrap();
        assert!(r.rel_error < 1e-12, "{r:?}");
    }

    #[test]
    fn printed_weights_make_depth_drift_grow_with_h0() {
        let mut cfg = StableConfig::default();
        cfg.params.weights = WeightSet::Printed;
        cfg.h0 = vec![0.02, 0.06, 0.1];
        let r = stable_sweep(&cfg).unwrap();
        assert!(
            r.rows.windows(2).all(|w| w[0].rel_error < w[1].rel_error),
            "{:?}",
            r.rows
        );
    }

    #[test]
    fn truncation_zero_deviation_is_exact() {
        let cfg = TruncationConfig {
            deviations: vec![0.0],
            ..TruncationConfig::default()
        };
        let r = truncation_error_study(&cfg).unwrap();
        assert!(r.rows[0].discrepancy < 1e-14, "{:?}", r.rows);
        assert!(r.fit.is_none());
    }

    #[test]
    fn kappa_of_zero_timesteps_is_one() {
        let cfg = KappaConfig::default();
        for m in [KappaMethod::DenseSvd, KappaMethod::Iterative] {
            let r = kappa_point(&cfg, 3, 0, m).unwrap();
            assert_relative_eq!(r.kappa, 1.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn sound_speed_rejects_tiny_grids() {
        let cfg = SoundSpeedConfig {
            grid_points: 4,
            length: 3.0,
            ..SoundSpeedConfig::default()
        };
        assert!(sound_speed(0.05, &cfg).is_err());
    }

    #[test]
    fn sound_speed_without_enough_steps_reports_no_propagation() {
        let cfg = SoundSpeedConfig {
            grid_points: 8,
            length: 7.0,
            timesteps: Some(1),
            ..SoundSpeedConfig::default()
        };
        assert!(matches!(
            sound_speed(0.05, &cfg),
            Err(Error::NoPropagation { steps: 1 })
        ));
    }
}
