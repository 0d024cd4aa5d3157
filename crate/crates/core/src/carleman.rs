//! Carleman embedding of the D1Q3 collision polynomial and the central
//! difference streaming operator, truncated at third order.

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::lattice::{DistributionField, LatticeD1Q3, PhysParams, Q};
use crate::sparse::{CsrMatrix, TripletBuilder};

/// Carleman truncation order.
pub const TRUNCATION_ORDER: usize = 3;

/// `3N + 9N² + 27N³`.
pub fn carleman_dim(n: usize) -> usize {
    let d = Q * n;
    d + d * d + d * d * d
}

/// Sizes `(3N)^j` of the Carleman levels `j = 1..=3`.
pub fn level_dims(n: usize) -> [usize; 3] {
    let d = Q * n;
    [d, d * d, d * d * d]
}

/// Start offsets of the Carleman levels inside a state vector.
pub fn level_offsets(n: usize) -> [usize; 3] {
    let [d1, d2, _] = level_dims(n);
    [0, d1, d1 + d2]
}

/// Single-point collision polynomial split by degree, already divided by τ.
///
/// Column `3a + b` of `f2` multiplies `f_a f_b`; column `9a + 3b + d` of `f3`
/// multiplies `f_a f_b f_d`. Coefficients are symmetric under permutation of
/// those indices.
#[derive(Debug, Clone, PartialEq)]
pub struct FMatrixSet {
    pub f1: DMatrix<f64>,
    pub f2: DMatrix<f64>,
    pub f3: DMatrix<f64>,
}

impl FMatrixSet {
    /// Collision `(1/τ)(f^eq − f)` with `(hu)²/h → (hu)²(2 − h)`, expanded in
    /// powers of `f` using `h = Σf` and `hu = Σcf`.
    pub fn new(params: &PhysParams) -> Result<Self> {
        params.validate_scalars()?;
        Ok(Self::from_lattice(&params.lattice(), params.g, params.tau))
    }

    pub fn from_lattice(lat: &LatticeD1Q3, g: f64, tau: f64) -> Self {
        let c = lat.c;
        let cs2 = lat.cs2;
        let k: [f64; 3] = std::array::from_fn(|i| lat.quadratic_coeff(i));

        // Linear: w_i (h + c_i hu/ς² − ς² h (c_i² − ς²)/(2ς⁴)) − f_i
        let f1 = DMatrix::from_fn(Q, Q, |i, a| {
            let shift = (c[i] * c[i] - cs2) / (2.0 * cs2);
            let lin = lat.w[i] * (1.0 + c[i] * c[a] / cs2 - shift);
            (lin - if i == a { 1.0 } else { 0.0 }) / tau
        });
        // Quadratic: K_i (g h²/2 + 2 (hu)²)
        let f2 = DMatrix::from_fn(Q, Q * Q, |i, col| {
            let (a, b) = (col / Q, col % Q);
            k[i] * (0.5 * g + 2.0 * c[a] * c[b]) / tau
        });
        // Cubic: −K_i (hu)² h, spread evenly over the three placements of h
        let f3 = DMatrix::from_fn(Q, Q * Q * Q, |i, col| {
            let (a, b, d) = (col / (Q * Q), (col / Q) % Q, col % Q);
            let sym = (c[a] * c[b] + c[a] * c[d] + c[b] * c[d]) / 3.0;
            -k[i] * sym / tau
        });
        Self { f1, f2, f3 }
    }

    /// `F^(m)` for `m ∈ {1, 2, 3}`.
    pub fn degree(&self, m: usize) -> Result<&DMatrix<f64>> {
        match m {
            1 => Ok(&self.f1),
            2 => Ok(&self.f2),
            3 => Ok(&self.f3),
            _ => Err(Error::IndexOutOfRange {
                what: "polynomial degree",
                index: m,
                valid: "1..=3".into(),
            }),
        }
    }

    /// `F1 f + F2 f^[2] + F3 f^[3]`.
    pub fn apply(&self, f: &[f64; 3]) -> [f64; 3] {
        let v1 = nalgebra::DVector::from_column_slice(f);
        let v2 = v1.kronecker(&v1);
        let v3 = v2.kronecker(&v1);
        let r = &self.f1 * &v1 + &self.f2 * &v2 + &self.f3 * &v3;
        [r[0], r[1], r[2]]
    }

    /// Single-point transfer block `A^i_target`.
    pub fn transfer(&self, i: usize, target: usize) -> Result<DMatrix<f64>> {
        check_transfer_indices(i, target)?;
        let m = target - i + 1;
        let f = self.degree(m)?;
        let mut out = DMatrix::zeros(Q.pow(i as u32), Q.pow(target as u32));
        for r in 0..i {
            let left = DMatrix::<f64>::identity(Q.pow(r as u32), Q.pow(r as u32));
            let right_n = Q.pow((i - 1 - r) as u32);
            let right = DMatrix::<f64>::identity(right_n, right_n);
            out += left.kronecker(f).kronecker(&right);
        }
        Ok(out)
    }
}

fn check_transfer_indices(i: usize, target: usize) -> Result<()> {
    if !(1..=TRUNCATION_ORDER).contains(&i) {
        return Err(Error::IndexOutOfRange {
            what: "transfer block row",
            index: i,
            valid: format!("1..={TRUNCATION_ORDER}"),
        });
    }
    let hi = (i + 2).min(TRUNCATION_ORDER);
    if target < i || target > hi {
        return Err(Error::IndexOutOfRange {
            what: "transfer block column",
            index: target,
            valid: format!("{i}..={hi}"),
        });
    }
    Ok(())
}

/// Places `F^(j)` at grid point `α` (zero-based): a `3 × (3N)^j` matrix acting on
/// `φ^[j]` that reads only the slots of point `α`.
pub fn lift_to_grid(f: &DMatrix<f64>, j: usize, alpha: usize, n: usize) -> Result<CsrMatrix> {
    check_lift(f, j, alpha, n)?;
    let d = Q * n;
    let mut b = TripletBuilder::new(Q, d.pow(j as u32));
    push_lifted_point(&mut b, 0, f, j, alpha, n);
    Ok(b.build())
}

/// Stacks [`lift_to_grid`] over every grid point: `3N × (3N)^j`.
pub fn lift_all(f: &DMatrix<f64>, j: usize, n: usize) -> Result<CsrMatrix> {
    check_lift(f, j, 0, n)?;
    let d = Q * n;
    let mut b = TripletBuilder::new(d, d.pow(j as u32));
    for alpha in 0..n {
        push_lifted_point(&mut b, alpha * Q, f, j, alpha, n);
    }
    Ok(b.build())
}

fn check_lift(f: &DMatrix<f64>, j: usize, alpha: usize, n: usize) -> Result<()> {
    if alpha >= n {
        return Err(Error::IndexOutOfRange {
            what: "grid point",
            index: alpha,
            valid: format!("0..{n}"),
        });
    }
    if f.nrows() != Q || f.ncols() != Q.pow(j as u32) {
        return Err(Error::SizeMismatch {
            what: "columns of F^(j)",
            expected: Q.pow(j as u32),
            actual: f.ncols(),
        });
    }
    Ok(())
}

fn push_lifted_point(
    b: &mut TripletBuilder,
    row0: usize,
    f: &DMatrix<f64>,
    j: usize,
    alpha: usize,
    n: usize,
) {
    let d = Q * n;
    for col in 0..f.ncols() {
        // base-3 digits of col, most significant first
        let mut idx = 0;
        for r in (0..j).rev() {
            let digit = (col / Q.pow(r as u32)) % Q;
            idx = idx * d + alpha * Q + digit;
        }
        for i in 0..Q {
            b.push(row0 + i, idx, f[(i, col)]);
        }
    }
}

/// `Σ_r I_{D^r} ⊗ B ⊗ I_{D^{i−1−r}}` for a `D × D^m` block `B`.
pub fn kron_sum_transfer(base: &CsrMatrix, i: usize, d: usize) -> CsrMatrix {
    let rows = d.pow(i as u32);
    let cols = base.cols() * d.pow(i as u32 - 1);
    let mut b = TripletBuilder::with_capacity(rows, cols, i * base.nnz() * d.pow(i as u32 - 1));
    for r in 0..i {
        b.push_kron_sandwich(0, 0, d.pow(r as u32), base, d.pow((i - 1 - r) as u32));
    }
    b.build()
}

/// N-point transfer block `𝓐^i_target` built from the lifted `𝓕^(m)`.
pub fn transfer_matrix(fm: &FMatrixSet, i: usize, target: usize, n: usize) -> Result<CsrMatrix> {
    check_transfer_indices(i, target)?;
    let m = target - i + 1;
    let lifted = lift_all(fm.degree(m)?, m, n)?;
    Ok(kron_sum_transfer(&lifted, i, Q * n))
}

fn assemble_blocks(
    dim: usize,
    offsets: &[usize; 3],
    blocks: Vec<(usize, usize, CsrMatrix)>,
) -> CsrMatrix {
    let cap = blocks.iter().map(|(_, _, m)| m.nnz()).sum();
    let mut b = TripletBuilder::with_capacity(dim, dim, cap);
    for (i, t, m) in &blocks {
        b.push_block(offsets[*i - 1], offsets[*t - 1], m, 1.0);
    }
    b.build()
}

/// Collision part: blocks `𝓐^i_{i..=min(i+2,3)}`, zero below the diagonal.
pub fn build_collision_matrix(fm: &FMatrixSet, n: usize) -> Result<CsrMatrix> {
    if n == 0 {
        return Err(Error::InvalidParameter("grid_points must be >= 1".into()));
    }
    let pairs: Vec<(usize, usize)> = (1..=TRUNCATION_ORDER)
        .flat_map(|i| (i..=(i + 2).min(TRUNCATION_ORDER)).map(move |t| (i, t)))
        .collect();
    let blocks = pairs
        .into_par_iter()
        .map(|(i, t)| transfer_matrix(fm, i, t, n).map(|m| (i, t, m)))
        .collect::<Result<Vec<_>>>()?;
    Ok(assemble_blocks(carleman_dim(n), &level_offsets(n), blocks))
}

/// Single-level advection operator `𝓢` (`3N × 3N`): row `(α, i)` holds
/// `−cᵢ k (fᵢ(x_{α+1}) − fᵢ(x_{α−1}))` with periodic wraparound.
pub fn advection_matrix(params: &PhysParams) -> Result<CsrMatrix> {
    params.validate()?;
    let n = params.grid_points;
    let k = params.gradient_coeff();
    let lat = params.lattice();
    let mut b = TripletBuilder::new(Q * n, Q * n);
    for a in 0..n {
        let right = (a + 1) % n;
        let left = (a + n - 1) % n;
        for i in 0..Q {
            b.push(a * Q + i, right * Q + i, -lat.c[i] * k);
            b.push(a * Q + i, left * Q + i, lat.c[i] * k);
        }
    }
    Ok(b.build())
}

/// Streaming part: block diagonal with Kronecker sums of `𝓢` on each level.
pub fn build_streaming_matrix(params: &PhysParams) -> Result<CsrMatrix> {
    let s = advection_matrix(params)?;
    let n = params.grid_points;
    let blocks = (1..=TRUNCATION_ORDER)
        .into_par_iter()
        .map(|i| (i, i, kron_sum_transfer(&s, i, Q * n)))
        .collect();
    Ok(assemble_blocks(carleman_dim(n), &level_offsets(n), blocks))
}

/// Truncated Carleman generator `𝓒 = 𝓒_s + 𝓒_c`.
#[derive(Debug, Clone)]
pub struct CarlemanMatrix {
    pub grid_points: usize,
    pub collision: CsrMatrix,
    pub streaming: CsrMatrix,
    pub total: CsrMatrix,
}

impl CarlemanMatrix {
    pub fn build(params: &PhysParams) -> Result<Self> {
        params.validate()?;
        let fm = FMatrixSet::new(params)?;
        let collision = build_collision_matrix(&fm, params.grid_points)?;
        let streaming = build_streaming_matrix(params)?;
        let total = collision.add_scaled(&streaming, 1.0)?;
        Ok(Self {
            grid_points: params.grid_points,
            collision,
            streaming,
            total,
        })
    }

    /// Generator with all dynamics switched off.
    pub fn zero(n: usize) -> Self {
        let d = carleman_dim(n);
        Self {
            grid_points: n,
            collision: CsrMatrix::zeros(d, d),
            streaming: CsrMatrix::zeros(d, d),
            total: CsrMatrix::zeros(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.total.rows()
    }
}

/// `(φ, φ⊗φ, φ⊗φ⊗φ)` for the point-major flat field `φ`.
pub fn embed_state(field: &DistributionField) -> Vec<f64> {
    let phi = field.to_flat();
    let d = phi.len();
    let mut v = Vec::with_capacity(d + d * d + d * d * d);
    v.extend_from_slice(&phi);
    for &a in &phi {
        v.extend(phi.iter().map(|b| a * b));
    }
    for &a in &phi {
        for &b in &phi {
            let ab = a * b;
            v.extend(phi.iter().map(|c| ab * c));
        }
    }
    v
}

/// First level of a Carleman vector (or of the first time block of a stacked
/// solution), reshaped per grid point.
pub fn extract_state(v: &[f64], n: usize) -> Result<DistributionField> {
    let dim = carleman_dim(n);
    if n == 0 || v.is_empty() || v.len() % dim != 0 {
        return Err(Error::SizeMismatch {
            what: "Carleman vector length (multiple of 3N + 9N² + 27N³)",
            expected: dim,
            actual: v.len(),
        });
    }
    DistributionField::from_flat(&v[..Q * n])
}
