//! D1Q3 lattice, equilibrium distribution, moments, initial conditions and a
//! nonlinear explicit integrator used as the reference for the linearized
//! pipeline.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Discrete velocities in lattice units: rest, right, left.
pub const VELOCITIES: [f64; 3] = [0.0, 1.0, -1.0];

/// Squared lattice speed of sound.
pub const SOUND_SPEED_SQ: f64 = 1.0 / 3.0;

/// Number of discrete velocities.
pub const Q: usize = 3;

/// Choice of quadrature weights.
///
/// `Standard` satisfies every moment identity. `Printed` sums to 4/3 and is
/// kept only so that its consequences can be studied.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightSet {
    #[default]
    Standard,
    Printed,
}

impl WeightSet {
    pub fn weights(self) -> [f64; 3] {
        match self {
            WeightSet::Standard => [2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0],
            WeightSet::Printed => [2.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        }
    }
}

/// How the `(hu)²/h` term of the equilibrium is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentumClosure {
    /// Full `1/h`.
    #[default]
    Exact,
    /// First-order expansion `1/h ≈ 2 − h` about unit depth. This is the
    /// nonlinearity retained by the third-order Carleman model.
    Truncated,
}

/// Prefactor of the central-difference gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StreamingScale {
    /// `(N − 1) / (2L)`, i.e. `1/(2δx)` with `δx = L/(N − 1)`.
    #[default]
    Physical,
    /// `1/δt`.
    Lattice,
}

/// The D1Q3 velocity set with its weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LatticeD1Q3 {
    pub c: [f64; 3],
    pub w: [f64; 3],
    pub cs2: f64,
}

impl LatticeD1Q3 {
    pub fn new(weights: WeightSet) -> Self {
        Self {
            c: VELOCITIES,
            w: weights.weights(),
            cs2: SOUND_SPEED_SQ,
        }
    }

    /// Largest violation of `Σw = 1`, `Σwc = 0`, `Σwc² = ς²`.
    pub fn moment_defect(&self) -> f64 {
        let s0: f64 = self.w.iter().sum();
        let s1: f64 = self.w.iter().zip(&self.c).map(|(w, c)| w * c).sum();
        let s2: f64 = self.w.iter().zip(&self.c).map(|(w, c)| w * c * c).sum();
        (s0 - 1.0).abs().max(s1.abs()).max((s2 - self.cs2).abs())
    }

    /// Coefficient of the second-order term, `wᵢ(cᵢ² − ς²)/(2ς⁴)`.
    pub fn quadratic_coeff(&self, i: usize) -> f64 {
        self.w[i] * (self.c[i] * self.c[i] - self.cs2) / (2.0 * self.cs2 * self.cs2)
    }

    /// Equilibrium in terms of the conserved moments `(h, hu)`.
    pub fn equilibrium_hm(&self, h: f64, hu: f64, g: f64, closure: MomentumClosure) -> [f64; 3] {
        let inv_h = match closure {
            MomentumClosure::Exact => 1.0 / h,
            MomentumClosure::Truncated => 2.0 - h,
        };
        let second = 0.5 * g * h * h - self.cs2 * h + hu * hu * inv_h;
        std::array::from_fn(|i| {
            self.w[i] * (h + self.c[i] * hu / self.cs2) + self.quadratic_coeff(i) * second
        })
    }

    /// `(Σf, Σcf)`.
    pub fn moments(&self, f: &[f64; 3]) -> Moments {
        Moments {
            h: f.iter().sum(),
            hu: f.iter().zip(&self.c).map(|(f, c)| f * c).sum(),
        }
    }
}

impl Default for LatticeD1Q3 {
    fn default() -> Self {
        Self::new(WeightSet::Standard)
    }
}

/// Zeroth and first moments at one grid point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub h: f64,
    pub hu: f64,
}

impl Moments {
    /// `u = hu/h`; undefined at zero depth.
    pub fn velocity(&self) -> Option<f64> {
        (self.h != 0.0).then(|| self.hu / self.h)
    }
}

/// `(Σf, Σcf)` with the standard velocity set.
pub fn moments(f: &[f64; 3]) -> Moments {
    LatticeD1Q3::default().moments(f)
}

/// Physical and discretization parameters of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PhysParams {
    /// Gravitational acceleration.
    pub g: f64,
    /// Relaxation time, frozen at the nominal depth.
    pub tau: f64,
    /// Domain length.
    pub length: f64,
    /// Number of grid points.
    pub grid_points: usize,
    /// Time step.
    pub dt: f64,
    /// Number of time steps.
    pub timesteps: usize,
    pub weights: WeightSet,
    pub streaming_scale: StreamingScale,
}

impl Default for PhysParams {
    fn default() -> Self {
        Self {
            g: 2.0 / 3.0,
            tau: 1.0,
            length: 3.0,
            grid_points: 4,
            dt: 0.1,
            timesteps: 4,
            weights: WeightSet::Standard,
            streaming_scale: StreamingScale::Physical,
        }
    }
}

impl PhysParams {
    /// `τ = 2ν/(g h̄)` at nominal depth `h̄ = 1`.
    pub fn tau_from_viscosity(nu: f64, g: f64) -> f64 {
        2.0 * nu / g
    }

    pub fn lattice(&self) -> LatticeD1Q3 {
        LatticeD1Q3::new(self.weights)
    }

    /// `δx = L/(N − 1)`.
    pub fn dx(&self) -> f64 {
        self.length / (self.grid_points as f64 - 1.0)
    }

    /// Coefficient multiplying `f(x_{α+1}) − f(x_{α−1})`.
    pub fn gradient_coeff(&self) -> f64 {
        match self.streaming_scale {
            StreamingScale::Physical => (self.grid_points as f64 - 1.0) / (2.0 * self.length),
            StreamingScale::Lattice => 1.0 / self.dt,
        }
    }

    /// Checks everything except the grid-point count.
    pub fn validate_scalars(&self) -> Result<()> {
        let positive = |name: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!(
                    "{name} must be finite and > 0, got {v}"
                )))
            }
        };
        positive("tau", self.tau)?;
        positive("dt", self.dt)?;
        positive("length", self.length)?;
        if !(self.g.is_finite() && self.g >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "g must be finite and >= 0, got {}",
                self.g
            )));
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        self.validate_scalars()?;
        if self.grid_points < 3 {
            return Err(Error::TooFewGridPoints(self.grid_points));
        }
        Ok(())
    }
}

/// Distribution functions on the grid, one 3-vector per point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistributionField {
    pub f: Vec<[f64; 3]>,
}

impl DistributionField {
    pub fn new(f: Vec<[f64; 3]>) -> Self {
        Self { f }
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            f: vec![[0.0; 3]; n],
        }
    }

    /// Builds from the point-major flat layout `(f₁(x₁), f₂(x₁), f₃(x₁), f₁(x₂), …)`.
    pub fn from_flat(flat: &[f64]) -> Result<Self> {
        if flat.len() % Q != 0 {
            return Err(Error::SizeMismatch {
                what: "flat distribution field (multiple of 3)",
                expected: flat.len() / Q * Q,
                actual: flat.len(),
            });
        }
        Ok(Self {
            f: flat.chunks_exact(Q).map(|c| [c[0], c[1], c[2]]).collect(),
        })
    }

    pub fn to_flat(&self) -> Vec<f64> {
        self.f.iter().flatten().copied().collect()
    }

    pub fn len(&self) -> usize {
        self.f.len()
    }

    pub fn is_empty(&self) -> bool {
        self.f.is_empty()
    }

    pub fn moments(&self) -> Vec<Moments> {
        self.f.iter().map(moments).collect()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.f.iter().map(|f| f.iter().sum()).collect()
    }

    /// Velocities per point; fails at any zero-depth point.
    pub fn velocities(&self) -> Result<Vec<f64>> {
        self.moments()
            .iter()
            .enumerate()
            .map(|(point, m)| m.velocity().ok_or(Error::UndefinedVelocity { point }))
            .collect()
    }

    pub fn is_finite(&self) -> bool {
        self.f.iter().flatten().all(|v| v.is_finite())
    }

    /// CSV with columns `x_index,f1,f2,f3,h,u`. A zero-depth point gets `NaN` velocity.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("x_index,f1,f2,f3,h,u\n");
        for (a, f) in self.f.iter().enumerate() {
            let m = moments(f);
            let u = m.velocity().unwrap_or(f64::NAN);
            let _ = writeln!(out, "{a},{},{},{},{},{u}", f[0], f[1], f[2], m.h);
        }
        out
    }
}

/// Equilibrium distribution for depth `h` and velocity `u` (exact closure).
pub fn equilibrium(h: f64, u: f64, params: &PhysParams) -> Result<[f64; 3]> {
    if !(h > 0.0) {
        return Err(Error::NonPositiveDepth { point: 0, depth: h });
    }
    Ok(params
        .lattice()
        .equilibrium_hm(h, h * u, params.g, MomentumClosure::Exact))
}

/// `f = h·(2/3, 1/6 + u/2, 1/6 − u/2)` at every point.
pub fn initial_field(h: &[f64], u: &[f64]) -> Result<DistributionField> {
    if h.len() != u.len() {
        return Err(Error::SizeMismatch {
            what: "velocity array (must match depth array)",
            expected: h.len(),
            actual: u.len(),
        });
    }
    let f = h
        .iter()
        .zip(u)
        .enumerate()
        .map(|(point, (&h, &u))| {
            if !(h > 0.0) {
                return Err(Error::NonPositiveDepth { point, depth: h });
            }
            Ok([
                h * 2.0 / 3.0,
                h * (1.0 / 6.0 + u / 2.0),
                h * (1.0 / 6.0 - u / 2.0),
            ])
        })
        .collect::<Result<_>>()?;
    Ok(DistributionField { f })
}

/// Collision term `(1/τ)(f^eq − f)` at one point.
pub fn collision(f: &[f64; 3], params: &PhysParams, closure: MomentumClosure) -> [f64; 3] {
    let lat = params.lattice();
    let m = lat.moments(f);
    let eq = lat.equilibrium_hm(m.h, m.hu, params.g, closure);
    std::array::from_fn(|i| (eq[i] - f[i]) / params.tau)
}

/// Right-hand side `−cᵢ∂ₓfᵢ + (1/τ)(f^eq − fᵢ)` with periodic central differences.
///
/// With the exact closure a non-positive depth is an error since `1/h` is
/// undefined there.
pub fn rate(
    field: &DistributionField,
    params: &PhysParams,
    closure: MomentumClosure,
) -> Result<DistributionField> {
    let n = field.len();
    if n < 3 {
        return Err(Error::TooFewGridPoints(n));
    }
    let k = params.gradient_coeff();
    let f = &field.f;
    let out = (0..n)
        .map(|a| {
            if closure == MomentumClosure::Exact {
                let h: f64 = f[a].iter().sum();
                if !(h > 0.0) {
                    return Err(Error::NonPositiveDepth { point: a, depth: h });
                }
            }
            let col = collision(&f[a], params, closure);
            let right = &f[(a + 1) % n];
            let left = &f[(a + n - 1) % n];
            Ok(std::array::from_fn(|i| {
                col[i] - VELOCITIES[i] * k * (right[i] - left[i])
            }))
        })
        .collect::<Result<_>>()?;
    Ok(DistributionField { f: out })
}

/// One explicit Euler step of the nonlinear discrete-velocity equations.
pub fn reference_step(
    field: &DistributionField,
    params: &PhysParams,
    closure: MomentumClosure,
) -> Result<DistributionField> {
    step_at(field, params, closure, 1)
}

fn step_at(
    field: &DistributionField,
    params: &PhysParams,
    closure: MomentumClosure,
    step: usize,
) -> Result<DistributionField> {
    let r = rate(field, params, closure).map_err(|e| match e {
        Error::NonPositiveDepth { point, depth } => Error::Instability {
            step,
            reason: format!("depth {depth} at grid point {point}"),
        },
        other => other,
    })?;
    let next = DistributionField {
        f: field
            .f
            .iter()
            .zip(&r.f)
            .map(|(f, r)| std::array::from_fn(|i| f[i] + params.dt * r[i]))
            .collect(),
    };
    if !next.is_finite() {
        return Err(Error::Instability {
            step,
            reason: "non-finite distribution value".into(),
        });
    }
    if let Some((point, depth)) = next
        .heights()
        .into_iter()
        .enumerate()
        .find(|(_, h)| !(*h > 0.0))
    {
        return Err(Error::Instability {
            step,
            reason: format!("depth {depth} at grid point {point}"),
        });
    }
    Ok(next)
}

/// Trajectory `f₀, f₁, …, f_{steps}` of the reference integrator.
pub fn integrate_reference(
    field: &DistributionField,
    params: &PhysParams,
    closure: MomentumClosure,
    steps: usize,
) -> Result<Vec<DistributionField>> {
    let mut out = Vec::with_capacity(steps + 1);
    out.push(field.clone());
    for j in 1..=steps {
        let next = step_at(&out[j - 1], params, closure, j)?;
        out.push(next);
    }
    Ok(out)
}
