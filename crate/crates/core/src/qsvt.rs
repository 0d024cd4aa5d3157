//! Bounded odd polynomial approximations of `1/(2κx)` on
//! `D_κ = [−1, −1/κ] ∪ [1/κ, 1]` and the degree they need.
//!
//! The series is the Chebyshev expansion of `(1 − (1 − x²)^b)/(2κx)`, which
//! is smooth on `[−1, 1]` and within `ε` of the target on `D_κ` once
//! `b ≥ κ² ln(κ/ε)`. The returned polynomial is the shortest truncation of
//! that series whose sampled error on `D_κ` is at most `ε`.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Sample points per interval used for sup-norm checks.
pub const DEFAULT_SAMPLES: usize = 10_001;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InverseDomain {
    pub kappa: f64,
    pub epsilon: f64,
}

impl InverseDomain {
    pub fn new(kappa: f64, epsilon: f64) -> Result<Self> {
        if !(kappa.is_finite() && kappa >= 1.0) {
            return Err(Error::InvalidParameter(format!(
                "kappa must be finite and >= 1, got {kappa}"
            )));
        }
        if !(epsilon > 0.0 && epsilon < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "epsilon must lie in (0, 1), got {epsilon}"
            )));
        }
        Ok(Self { kappa, epsilon })
    }

    pub fn target(&self, x: f64) -> f64 {
        1.0 / (2.0 * self.kappa * x)
    }

    /// `samples` evenly spaced points on `[1/κ, 1]` followed by their negatives.
    pub fn sample_points(&self, samples: usize) -> Vec<f64> {
        let lo = 1.0 / self.kappa;
        let pos: Vec<f64> = if samples < 2 || lo == 1.0 {
            vec![1.0]
        } else {
            (0..samples)
                .map(|k| lo + (1.0 - lo) * k as f64 / (samples - 1) as f64)
                .collect()
        };
        pos.iter().copied().chain(pos.iter().map(|x| -x)).collect()
    }
}

/// Odd polynomial `Σ_j coeffs[j] T_{2j+1}(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolyApprox {
    pub domain: InverseDomain,
    pub coeffs: Vec<f64>,
    pub degree: usize,
    /// Sampled `sup |p − 1/(2κx)|` over `D_κ`.
    pub achieved_error: f64,
    /// Sampled `sup |p|` over `[−1, 1]`.
    pub max_magnitude: f64,
}

impl PolyApprox {
    /// Full Chebyshev coefficient vector, zeros at even indices.
    pub fn chebyshev_coeffs(&self) -> Vec<f64> {
        let mut a = vec![0.0; self.degree + 1];
        for (j, c) in self.coeffs.iter().enumerate() {
            a[2 * j + 1] = *c;
        }
        a
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let a = self.chebyshev_coeffs();
        let (mut b1, mut b2) = (0.0, 0.0);
        for k in (1..a.len()).rev() {
            let b0 = a[k] + 2.0 * x * b1 - b2;
            b2 = b1;
            b1 = b0;
        }
        a[0] + x * b1 - b2
    }

    /// Clenshaw evaluation with a square matrix argument.
    pub fn eval_matrix(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        let n = m.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let a = self.chebyshev_coeffs();
        let mut b1 = DMatrix::<f64>::zeros(n, n);
        let mut b2 = DMatrix::<f64>::zeros(n, n);
        for k in (1..a.len()).rev() {
            let b0 = &id * a[k] + (m * &b1) * 2.0 - &b2;
            b2 = b1;
            b1 = b0;
        }
        &id * a[0] + m * b1 - b2
    }

    /// CSV `index,value` over Chebyshev indices `0..=degree`.
    pub fn coeffs_csv(&self) -> String {
        let mut out = String::from("index,value\n");
        for (k, v) in self.chebyshev_coeffs().iter().enumerate() {
            let _ = writeln!(out, "{k},{v}");
        }
        out
    }
}

/// Options for [`inverse_poly_with`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolyOptions {
    pub samples_per_interval: usize,
    /// Cap on the returned degree; `None` allows the whole series.
    pub max_degree: Option<usize>,
}

impl Default for PolyOptions {
    fn default() -> Self {
        Self {
            samples_per_interval: DEFAULT_SAMPLES,
            max_degree: None,
        }
    }
}

/// `b = ⌈κ² ln(κ/ε)⌉`, at least 1.
pub fn smoothing_order(kappa: f64, epsilon: f64) -> usize {
    (kappa * kappa * (kappa / epsilon).ln()).ceil().max(1.0) as usize
}

/// Chebyshev coefficients of `(1 − (1 − x²)^b)/(2κx)` on odd indices:
/// `c_j = 4(−1)^j Σ_{i>j} C(2b, b+i)/4^b / (2κ)` for `j < b`.
pub fn smoothed_inverse_coeffs(kappa: f64, b: usize) -> Vec<f64> {
    // p_i = C(2b, b+i)/4^b via the ratio recurrence, seeded in log space
    let bf = b as f64;
    let ln_p0 = (1..=b)
        .map(|k| ((bf + k as f64) / k as f64).ln())
        .sum::<f64>()
        - 2.0 * bf * 2f64.ln();
    let mut p = Vec::with_capacity(b + 1);
    p.push(ln_p0.exp());
    for i in 0..b {
        let next = p[i] * (bf - i as f64) / (bf + i as f64 + 1.0);
        p.push(next);
    }
    let mut tail = vec![0.0; b + 2];
    for i in (0..=b).rev() {
        tail[i] = tail[i + 1] + p[i];
    }
    (0..b)
        .map(|j| {
            let sign = if j % 2 == 0 { 1.0 } else { -1.0 };
            4.0 * sign * tail[j + 1] / (2.0 * kappa)
        })
        .collect()
}

pub fn inverse_poly(kappa: f64, epsilon: f64) -> Result<PolyApprox> {
    inverse_poly_with(kappa, epsilon, PolyOptions::default())
}

pub fn inverse_poly_with(kappa: f64, epsilon: f64, opts: PolyOptions) -> Result<PolyApprox> {
    let domain = InverseDomain::new(kappa, epsilon)?;
    if kappa == 1.0 {
        // D_1 = {±1}, where x/2 is exact
        let mut p = PolyApprox {
            domain,
            coeffs: vec![0.5],
            degree: 1,
            achieved_error: 0.0,
            max_magnitude: 0.0,
        };
        p.achieved_error = sup_error(&p, &domain.sample_points(opts.samples_per_interval));
        p.max_magnitude = max_magnitude(&p, opts.samples_per_interval);
        return Ok(p);
    }

    let b = smoothing_order(kappa, epsilon);
    let full = smoothed_inverse_coeffs(kappa, b);
    let cap_terms = match opts.max_degree {
        Some(d) => full.len().min(d.div_ceil(2)),
        None => full.len(),
    };

    let xs = domain.sample_points(opts.samples_per_interval);
    let target: Vec<f64> = xs.iter().map(|&x| domain.target(x)).collect();
    let y: Vec<f64> = xs.iter().map(|&x| 2.0 * (2.0 * x * x - 1.0)).collect();
    // T_{2j−1} and T_{2j+1} at every sample, starting from T_{−1} = T_1 = x
    let mut t_prev = xs.clone();
    let mut t_cur = xs.clone();
    let mut sum = vec![0.0; xs.len()];
    let mut best = f64::INFINITY;

    for j in 0..cap_terms {
        if j > 0 {
            for k in 0..xs.len() {
                let next = y[k] * t_cur[k] - t_prev[k];
                t_prev[k] = t_cur[k];
                t_cur[k] = next;
            }
        }
        let mut err: f64 = 0.0;
        for k in 0..xs.len() {
            sum[k] += full[j] * t_cur[k];
            err = err.max((sum[k] - target[k]).abs());
        }
        best = best.min(err);
        if err <= epsilon {
            let mut p = PolyApprox {
                domain,
                coeffs: full[..=j].to_vec(),
                degree: 2 * j + 1,
                achieved_error: err,
                max_magnitude: 0.0,
            };
            p.max_magnitude = max_magnitude(&p, opts.samples_per_interval);
            if p.max_magnitude > 1.0 {
                return Err(Error::NotAdmissible {
                    max_degree: p.degree,
                    best_error: err,
                });
            }
            return Ok(p);
        }
    }
    Err(Error::NotAdmissible {
        max_degree: 2 * cap_terms.max(1) - 1,
        best_error: best,
    })
}

fn sup_error(p: &PolyApprox, xs: &[f64]) -> f64 {
    xs.iter()
        .map(|&x| (p.eval(x) - p.domain.target(x)).abs())
        .fold(0.0, f64::max)
}

/// Sampled `max |p|` on `[0, 1]`, which by oddness covers `[−1, 1]`.
fn max_magnitude(p: &PolyApprox, samples_per_interval: usize) -> f64 {
    let n = 2 * samples_per_interval.max(2);
    (0..n)
        .map(|k| k as f64 / (n - 1) as f64)
        .map(|x| p.eval(x).abs())
        .fold(0.0, f64::max)
}

/// One row of a degree-scaling table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegreeRow {
    pub kappa: f64,
    pub epsilon: f64,
    pub degree: usize,
    pub achieved_error: f64,
    /// `d/(κ ln κ)`.
    pub ratio_d_over_klogk: f64,
}

impl DegreeRow {
    pub const CSV_HEADER: &'static str = "kappa,epsilon,degree,achieved_error,ratio_d_over_klogk";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.kappa, self.epsilon, self.degree, self.achieved_error, self.ratio_d_over_klogk
        )
    }
}

/// Minimal degree for each `κ` at fixed `ε`, in input order.
pub fn degree_scaling(kappas: &[f64], epsilon: f64) -> Result<Vec<DegreeRow>> {
    if let Some(k) = kappas.iter().find(|k| !(**k >= 2.0)) {
        return Err(Error::InvalidParameter(format!(
            "degree scaling needs kappa >= 2, got {k}"
        )));
    }
    kappas
        .par_iter()
        .map(|&kappa| {
            let p = inverse_poly(kappa, epsilon)?;
            Ok(DegreeRow {
                kappa,
                epsilon,
                degree: p.degree,
                achieved_error: p.achieved_error,
                ratio_d_over_klogk: p.degree as f64 / (kappa * kappa.ln()),
            })
        })
        .collect()
}
