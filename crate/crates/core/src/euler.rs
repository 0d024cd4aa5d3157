//! Forward-Euler discretization of `d𝓥/dt = 𝓒𝓥` as one block linear system
//! over all time steps.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::carleman::carleman_dim;
use crate::error::{Error, Result};
use crate::lattice::{moments, Q};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// `E x = b` with `E` block lower-bidiagonal: identity on the diagonal and
/// `−(I + 𝓒δt)` directly below it.
#[derive(Debug, Clone)]
pub struct EulerSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    /// Fused one-step propagator `I + 𝓒δt`.
    pub step_matrix: CsrMatrix,
    pub dt: f64,
    pub timesteps: usize,
    pub block_dim: usize,
}

impl EulerSystem {
    pub fn dim(&self) -> usize {
        self.matrix.rows()
    }

    /// Rebuilds a system from a stored matrix and right-hand side, recovering
    /// the propagator from the first sub-diagonal block.
    pub fn from_parts(matrix: CsrMatrix, rhs: Vec<f64>, block_dim: usize, dt: f64) -> Result<Self> {
        let dim = matrix.rows();
        if !matrix.is_square() || block_dim == 0 || dim % block_dim != 0 {
            return Err(Error::SizeMismatch {
                what: "system dimension (square, multiple of the block size)",
                expected: block_dim,
                actual: dim,
            });
        }
        if rhs.len() != dim {
            return Err(Error::SizeMismatch {
                what: "right-hand side",
                expected: dim,
                actual: rhs.len(),
            });
        }
        let timesteps = dim / block_dim - 1;
        let step_matrix = if timesteps == 0 {
            CsrMatrix::identity(block_dim)
        } else {
            let mut b = TripletBuilder::new(block_dim, block_dim);
            for r in block_dim..2 * block_dim {
                for (c, v) in matrix.row(r).filter(|&(c, _)| c < block_dim) {
                    b.push(r - block_dim, c, -v);
                }
            }
            b.build()
        };
        Ok(Self {
            matrix,
            rhs,
            step_matrix,
            dt,
            timesteps,
            block_dim,
        })
    }

    /// Block `j` of a stacked vector.
    pub fn block<'a>(&self, x: &'a [f64], j: usize) -> &'a [f64] {
        &x[j * self.block_dim..(j + 1) * self.block_dim]
    }
}

/// `I + 𝓒δt` with the identity summed into 𝓒's diagonal.
pub fn step_matrix(c: &CsrMatrix, dt: f64) -> Result<CsrMatrix> {
    check_dt(dt)?;
    if !c.is_square() {
        return Err(Error::SizeMismatch {
            what: "generator columns (must be square)",
            expected: c.rows(),
            actual: c.cols(),
        });
    }
    CsrMatrix::identity(c.rows()).add_scaled(c, dt)
}

fn check_dt(dt: f64) -> Result<()> {
    if dt.is_finite() && dt > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!(
            "dt must be finite and > 0, got {dt}"
        )))
    }
}

fn check_v0(c: &CsrMatrix, v0: &[f64]) -> Result<()> {
    if v0.len() != c.rows() {
        return Err(Error::SizeMismatch {
            what: "initial Carleman vector",
            expected: c.rows(),
            actual: v0.len(),
        });
    }
    Ok(())
}

/// Builds the block system for `timesteps` steps. `timesteps = 0` gives `E = I`.
pub fn assemble(c: &CsrMatrix, v0: &[f64], dt: f64, timesteps: usize) -> Result<EulerSystem> {
    let m = step_matrix(c, dt)?;
    check_v0(c, v0)?;
    let d = c.rows();
    let dim = (timesteps + 1) * d;
    let mut b = TripletBuilder::with_capacity(dim, dim, dim + timesteps * m.nnz());
    for j in 0..=timesteps {
        for k in 0..d {
            b.push(j * d + k, j * d + k, 1.0);
        }
        if j > 0 {
            b.push_block(j * d, (j - 1) * d, &m, -1.0);
        }
    }
    let mut rhs = vec![0.0; dim];
    rhs[..d].copy_from_slice(v0);
    Ok(EulerSystem {
        matrix: b.build(),
        rhs,
        step_matrix: m,
        dt,
        timesteps,
        block_dim: d,
    })
}

/// `V_{j+1} = (I + 𝓒δt) V_j` for `j < timesteps`; returns `V_0 … V_{timesteps}`.
pub fn step_explicitly(
    c: &CsrMatrix,
    v0: &[f64],
    dt: f64,
    timesteps: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = step_matrix(c, dt)?;
    check_v0(c, v0)?;
    propagate(&m, v0, timesteps)
}

/// Repeated application of a one-step propagator.
pub fn propagate(m: &CsrMatrix, v0: &[f64], timesteps: usize) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(timesteps + 1);
    out.push(v0.to_vec());
    for j in 1..=timesteps {
        let next = m.mul_vec(&out[j - 1]);
        if let Some(k) = next.iter().position(|v| !v.is_finite()) {
            return Err(Error::Instability {
                step: j,
                reason: format!("non-finite Carleman component {k}"),
            });
        }
        out.push(next);
    }
    Ok(out)
}

/// Depth and momentum per time step and grid point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableSeries {
    pub h: Vec<Vec<f64>>,
    pub hu: Vec<Vec<f64>>,
}

impl ObservableSeries {
    /// From a sequence of Carleman vectors (or just their first levels).
    pub fn from_states<V: AsRef<[f64]>>(states: &[V], n: usize) -> Result<Self> {
        let mut h = Vec::with_capacity(states.len());
        let mut hu = Vec::with_capacity(states.len());
        for s in states {
            let s = s.as_ref();
            if s.len() < Q * n {
                return Err(Error::SizeMismatch {
                    what: "state block (at least 3N entries)",
                    expected: Q * n,
                    actual: s.len(),
                });
            }
            let (hj, huj) = s[..Q * n]
                .chunks_exact(Q)
                .map(|f| {
                    let m = moments(&[f[0], f[1], f[2]]);
                    (m.h, m.hu)
                })
                .unzip();
            h.push(hj);
            hu.push(huj);
        }
        Ok(Self { h, hu })
    }

    pub fn steps(&self) -> usize {
        self.h.len()
    }

    /// `u = hu/h` at time step `j`; fails where the depth is zero.
    pub fn velocities(&self, j: usize) -> Result<Vec<f64>> {
        self.h[j]
            .iter()
            .zip(&self.hu[j])
            .enumerate()
            .map(|(point, (&h, &hu))| {
                if h == 0.0 {
                    Err(Error::UndefinedVelocity { point })
                } else {
                    Ok(hu / h)
                }
            })
            .collect()
    }

    pub fn total_mass(&self, j: usize) -> f64 {
        self.h[j].iter().sum()
    }

    /// CSV with columns `t_index,x_index,h,u`; zero depth gives `NaN` velocity.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t_index,x_index,h,u\n");
        for (j, (h, hu)) in self.h.iter().zip(&self.hu).enumerate() {
            for (a, (&h, &hu)) in h.iter().zip(hu).enumerate() {
                let u = if h == 0.0 { f64::NAN } else { hu / h };
                let _ = writeln!(out, "{j},{a},{h},{u}");
            }
        }
        out
    }
}

/// Splits a stacked solution into time blocks and extracts observables.
pub fn extract_observables(x: &[f64], n: usize, timesteps: usize) -> Result<ObservableSeries> {
    let d = carleman_dim(n);
    if x.len() != (timesteps + 1) * d {
        return Err(Error::SizeMismatch {
            what: "stacked solution length",
            expected: (timesteps + 1) * d,
            actual: x.len(),
        });
    }
    let blocks: Vec<&[f64]> = x.chunks_exact(d).collect();
    ObservableSeries::from_states(&blocks, n)
}
