//! Classical solution of the block system and its condition number.

use std::time::Instant;

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::euler::EulerSystem;
use crate::sparse::{dot, norm2, CsrMatrix};

/// Default acceptance threshold for `‖Ex − b‖/‖b‖`.
pub const DEFAULT_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    /// Forward substitution through the unit lower-triangular structure.
    BlockForward,
    /// General sparse LU with partial pivoting.
    SparseDirect,
}

impl SolveMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SolveMethod::BlockForward => "block_forward",
            SolveMethod::SparseDirect => "sparse_direct",
        }
    }
}

impl std::str::FromStr for SolveMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "block_forward" => Ok(SolveMethod::BlockForward),
            "sparse_direct" => Ok(SolveMethod::SparseDirect),
            _ => Err(Error::InvalidParameter(format!(
                "unknown solve method {s:?} (expected block_forward or sparse_direct)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(skip)]
    pub solution: Vec<f64>,
    /// `‖Ex − b‖/‖b‖`.
    pub residual: f64,
    pub wall_time_secs: f64,
    pub method: SolveMethod,
    pub dim: usize,
}

impl SolveReport {
    pub fn check(&self, tolerance: f64) -> Result<()> {
        if self.residual <= tolerance {
            Ok(())
        } else {
            Err(Error::ResidualTooLarge {
                residual: self.residual,
                tolerance,
            })
        }
    }
}

/// `‖Ax − b‖/‖b‖`, or `‖Ax‖` when `b = 0`.
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let r: Vec<f64> = a.mul_vec(x).iter().zip(b).map(|(ax, b)| ax - b).collect();
    let nb = norm2(b);
    if nb == 0.0 {
        norm2(&r)
    } else {
        norm2(&r) / nb
    }
}

pub fn solve(sys: &EulerSystem, method: SolveMethod) -> Result<SolveReport> {
    let e = &sys.matrix;
    if !e.is_square() || sys.rhs.len() != e.rows() {
        return Err(Error::SizeMismatch {
            what: "right-hand side",
            expected: e.rows(),
            actual: sys.rhs.len(),
        });
    }
    let start = Instant::now();
    let solution = match method {
        SolveMethod::BlockForward => forward_substitute(e, &sys.rhs)?,
        SolveMethod::SparseDirect => SparseLu::factor(e)?.solve(&sys.rhs),
    };
    let wall_time_secs = start.elapsed().as_secs_f64();
    if solution.iter().any(|v| !v.is_finite()) {
        return Err(Error::Singular(
            "solution contains non-finite values".into(),
        ));
    }
    let residual = relative_residual(e, &solution, &sys.rhs);
    Ok(SolveReport {
        solution,
        residual,
        wall_time_secs,
        method,
        dim: e.rows(),
    })
}

/// [`solve`] followed by the residual contract.
pub fn solve_checked(
    sys: &EulerSystem,
    method: SolveMethod,
    tolerance: f64,
) -> Result<SolveReport> {
    let report = solve(sys, method)?;
    report.check(tolerance)?;
    Ok(report)
}

fn require_lower(e: &CsrMatrix) -> Result<()> {
    if !e.is_square() || !e.is_lower_triangular() {
        return Err(Error::Singular(
            "forward substitution needs a square lower-triangular matrix".into(),
        ));
    }
    Ok(())
}

fn diagonal(e: &CsrMatrix, r: usize) -> Result<f64> {
    let d = e.get(r, r);
    if d == 0.0 {
        Err(Error::Singular(format!("zero pivot in row {r}")))
    } else {
        Ok(d)
    }
}

/// Solves `E x = b` for lower-triangular `E`. With a unit diagonal and the
/// Euler block layout this is exactly the explicit recurrence.
pub fn forward_substitute(e: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    require_lower(e)?;
    let mut x = vec![0.0; b.len()];
    for r in 0..e.rows() {
        let mut acc = 0.0;
        let mut diag = 0.0;
        for (c, v) in e.row(r) {
            if c == r {
                diag = v;
            } else {
                acc += v * x[c];
            }
        }
        if diag == 0.0 {
            return Err(Error::Singular(format!("zero pivot in row {r}")));
        }
        x[r] = (b[r] - acc) / diag;
    }
    Ok(x)
}

/// Solves `Eᵀ x = b` for lower-triangular `E`.
pub fn backward_substitute_transpose(e: &CsrMatrix, b: &[f64]) -> Result<Vec<f64>> {
    require_lower(e)?;
    let mut y = b.to_vec();
    let mut x = vec![0.0; b.len()];
    for r in (0..e.rows()).rev() {
        x[r] = y[r] / diagonal(e, r)?;
        for (c, v) in e.row(r) {
            if c != r {
                y[c] -= v * x[r];
            }
        }
    }
    Ok(x)
}

/// LU factors from `rsparse`, with fill-reducing column order and partial
/// pivoting.
pub struct SparseLu {
    n: usize,
    numeric: rsparse::data::Nmrc<f64>,
    col_perm: Option<Vec<isize>>,
}

impl SparseLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::SizeMismatch {
                what: "columns of LU operand (must be square)",
                expected: a.rows(),
                actual: a.cols(),
            });
        }
        // CSC of A is CSR of Aᵀ
        let t = a.transpose();
        let csc = rsparse::data::Sprs {
            nzmax: t.nnz(),
            m: a.rows(),
            n: a.cols(),
            p: t.indptr().iter().map(|&p| p as isize).collect(),
            i: t.indices().to_vec(),
            x: t.values().to_vec(),
        };
        let mut symbolic = rsparse::sqr(&csc, 1, false);
        let numeric = rsparse::lu(&csc, &mut symbolic, 1.0)
            .map_err(|e| Error::Singular(format!("sparse LU: {e}")))?;
        Ok(Self {
            n: a.rows(),
            numeric,
            col_perm: symbolic.q,
        })
    }

    /// `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        scatter(&self.numeric.pinv, b, &mut x);
        rsparse::lsolve(&self.numeric.l, &mut x);
        rsparse::usolve(&self.numeric.u, &mut x);
        let mut out = vec![0.0; self.n];
        scatter(&self.col_perm, &x, &mut out);
        out
    }

    /// `Aᵀ x = b`.
    pub fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        let mut x = vec![0.0; self.n];
        gather(&self.col_perm, b, &mut x);
        rsparse::utsolve(&self.numeric.u, &mut x);
        rsparse::ltsolve(&self.numeric.l, &mut x);
        let mut out = vec![0.0; self.n];
        gather(&self.numeric.pinv, &x, &mut out);
        out
    }
}

/// `x[p[k]] = b[k]`.
fn scatter(p: &Option<Vec<isize>>, b: &[f64], x: &mut [f64]) {
    match p {
        Some(p) => b
            .iter()
            .enumerate()
            .for_each(|(k, &v)| x[p[k] as usize] = v),
        None => x.copy_from_slice(b),
    }
}

/// `x[k] = b[p[k]]`.
fn gather(p: &Option<Vec<isize>>, b: &[f64], x: &mut [f64]) {
    match p {
        Some(p) => x
            .iter_mut()
            .enumerate()
            .for_each(|(k, v)| *v = b[p[k] as usize]),
        None => x.copy_from_slice(b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KappaMethod {
    /// Full singular value decomposition of the dense matrix.
    DenseSvd,
    /// Lanczos with full reorthogonalization on `EᵀE` and on `(EᵀE)⁻¹`.
    Iterative,
}

impl KappaMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            KappaMethod::DenseSvd => "dense_svd",
            KappaMethod::Iterative => "iterative",
        }
    }
}

impl std::str::FromStr for KappaMethod {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "dense_svd" | "svd" => Ok(KappaMethod::DenseSvd),
            "iterative" | "lanczos" | "power_iter" => Ok(KappaMethod::Iterative),
            _ => Err(Error::InvalidParameter(format!(
                "unknown condition-number method {s:?} (expected dense_svd or iterative)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KappaReport {
    pub grid_points: usize,
    pub timesteps: usize,
    pub dim: usize,
    pub sigma_max: f64,
    pub sigma_min: f64,
    pub kappa: f64,
    pub method: KappaMethod,
}

impl KappaReport {
    pub const CSV_HEADER: &'static str = "N,N_t,dim,sigma_max,sigma_min,kappa,method";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{},{}",
            self.grid_points,
            self.timesteps,
            self.dim,
            self.sigma_max,
            self.sigma_min,
            self.kappa,
            self.method.as_str()
        )
    }
}

/// Iteration controls for [`KappaMethod::Iterative`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LanczosOptions {
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for LanczosOptions {
    fn default() -> Self {
        Self {
            tolerance: 1e-10,
            max_iterations: 600,
        }
    }
}

pub fn condition_number(e: &CsrMatrix, method: KappaMethod) -> Result<KappaReport> {
    condition_number_with(e, method, LanczosOptions::default())
}

pub fn condition_number_with(
    e: &CsrMatrix,
    method: KappaMethod,
    opts: LanczosOptions,
) -> Result<KappaReport> {
    if !e.is_square() || e.rows() == 0 {
        return Err(Error::SizeMismatch {
            what: "columns of condition-number operand (must be square, non-empty)",
            expected: e.rows(),
            actual: e.cols(),
        });
    }
    let (sigma_max, sigma_min) = match method {
        KappaMethod::DenseSvd => dense_extremes(&e.to_dense()),
        KappaMethod::Iterative => iterative_extremes(e, opts)?,
    };
    if !(sigma_min > 0.0) {
        return Err(Error::Singular(format!(
            "smallest singular value is {sigma_min}"
        )));
    }
    Ok(KappaReport {
        grid_points: 0,
        timesteps: 0,
        dim: e.rows(),
        sigma_max,
        sigma_min,
        kappa: sigma_max / sigma_min,
        method,
    })
}

fn dense_extremes(m: &DMatrix<f64>) -> (f64, f64) {
    let s = m.clone().singular_values();
    let max = s.iter().copied().fold(0.0, f64::max);
    let min = s.iter().copied().fold(f64::INFINITY, f64::min);
    (max, min)
}

fn iterative_extremes(e: &CsrMatrix, opts: LanczosOptions) -> Result<(f64, f64)> {
    let n = e.rows();
    let gram = |x: &[f64]| e.transpose_mul_vec(&e.mul_vec(x));
    let lam_max = lanczos_largest(n, gram, opts, "Lanczos on EᵀE")?;

    let lam_inv = if e.is_lower_triangular() {
        let inv = |x: &[f64]| -> Vec<f64> {
            let y = backward_substitute_transpose(e, x).expect("checked lower triangular");
            forward_substitute(e, &y).expect("checked lower triangular")
        };
        lanczos_largest(n, inv, opts, "Lanczos on (EᵀE)⁻¹")?
    } else {
        let lu = SparseLu::factor(e)?;
        let inv = |x: &[f64]| lu.solve(&lu.solve_transpose(x));
        lanczos_largest(n, inv, opts, "Lanczos on (EᵀE)⁻¹")?
    };
    Ok((lam_max.sqrt(), 1.0 / lam_inv.sqrt()))
}

/// Largest eigenvalue of a symmetric positive semidefinite operator.
fn lanczos_largest<F>(n: usize, apply: F, opts: LanczosOptions, what: &'static str) -> Result<f64>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut q: Vec<f64> = (0..n)
        .map(|i| 1.0 + 0.5 * (0.618_033_988_75 * i as f64).sin())
        .collect();
    let nq = norm2(&q);
    q.iter_mut().for_each(|v| *v /= nq);

    let mut basis: Vec<Vec<f64>> = vec![q];
    let mut alpha: Vec<f64> = Vec::new();
    let mut beta: Vec<f64> = Vec::new();
    let mut last = 0.0;
    let max_iter = opts.max_iterations.min(n).max(1);

    for k in 0..max_iter {
        let mut w = apply(&basis[k]);
        let a = dot(&w, &basis[k]);
        alpha.push(a);
        // full reorthogonalization, twice for stability
        for _ in 0..2 {
            for v in &basis {
                let p = dot(&w, v);
                w.iter_mut().zip(v).for_each(|(w, v)| *w -= p * v);
            }
        }
        let b = norm2(&w);

        let m = alpha.len();
        let t = DMatrix::from_fn(m, m, |i, j| {
            if i == j {
                alpha[i]
            } else if i + 1 == j {
                beta[i]
            } else if j + 1 == i {
                beta[j]
            } else {
                0.0
            }
        });
        let eig = SymmetricEigen::new(t);
        let (idx, theta) = eig.eigenvalues.iter().copied().enumerate().fold(
            (0, f64::NEG_INFINITY),
            |acc, (i, v)| if v > acc.1 { (i, v) } else { acc },
        );
        let resid = (b * eig.eigenvectors[(m - 1, idx)]).abs();
        last = theta;

        let exhausted = b <= f64::EPSILON * theta.abs().max(1.0) * 10.0 || k + 1 == n;
        if resid <= opts.tolerance * theta.abs() || exhausted {
            return Ok(theta);
        }
        beta.push(b);
        w.iter_mut().for_each(|v| *v /= b);
        basis.push(w);
    }
    Err(Error::NoConvergence {
        what,
        iterations: max_iter,
        last_estimate: last,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::carleman::{embed_state, CarlemanMatrix};
    use crate::euler::assemble;
    use crate::lattice::{initial_field, PhysParams};
    use approx::assert_relative_eq;

    fn system(n: usize, nt: usize) -> EulerSystem {
        let p = PhysParams {
            grid_points: n,
            length: n as f64 - 1.0,
            ..PhysParams::default()
        };
        let c = CarlemanMatrix::build(&p).unwrap();
        let h: Vec<f64> = (0..n).map(|a| if a < n / 2 { 1.02 } else { 1.0 }).collect();
        let v0 = embed_state(&initial_field(&h, &vec![0.05; n]).unwrap());
        assemble(&c.total, &v0, p.dt, nt).unwrap()
    }

    #[test]
    fn zero_generator_solution_repeats_v0() {
        let v0: Vec<f64> = (0..39).map(|i| i as f64 * 0.1).collect();
        let zero = CarlemanMatrix::zero(1);
        let sys = assemble(&zero.total, &v0, 0.1, 3).unwrap();
        for m in [SolveMethod::BlockForward, SolveMethod::SparseDirect] {
            let r = solve_checked(&sys, m, DEFAULT_RESIDUAL_TOL).unwrap();
            for j in 0..4 {
                assert_eq!(sys.block(&r.solution, j), &v0[..]);
            }
        }
    }

    #[test]
    fn block_forward_is_bit_identical_to_stepper() {
        let sys = system(3, 3);
        let r = solve(&sys, SolveMethod::BlockForward).unwrap();
        let seq = crate::euler::propagate(&sys.step_matrix, &sys.rhs[..sys.block_dim], 3).unwrap();
        for (j, v) in seq.iter().enumerate() {
            assert_eq!(sys.block(&r.solution, j), &v[..]);
        }
        assert!(r.residual <= DEFAULT_RESIDUAL_TOL);
    }

    #[test]
    fn methods_agree() {
        let sys = system(3, 2);
        let a = solve(&sys, SolveMethod::BlockForward).unwrap();
        let b = solve(&sys, SolveMethod::SparseDirect).unwrap();
        let scale = a.solution.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        for (x, y) in a.solution.iter().zip(&b.solution) {
            assert!((x - y).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn sparse_lu_transpose_solve() {
        let a = DMatrix::from_row_slice(3, 3, &[0.0, 2.0, 1.0, 3.0, 0.0, 1.0, 1.0, 1.0, 4.0]);
        let lu = SparseLu::factor(&CsrMatrix::from_dense(&a)).unwrap();
        let b = [1.0, -2.0, 0.5];
        let x = lu.solve(&b);
        let xt = lu.solve_transpose(&b);
        let ax = &a * nalgebra::DVector::from_column_slice(&x);
        let atx = a.transpose() * nalgebra::DVector::from_column_slice(&xt);
        for i in 0..3 {
            assert_relative_eq!(ax[i], b[i], epsilon = 1e-14);
            assert_relative_eq!(atx[i], b[i], epsilon = 1e-14);
        }
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]));
        assert!(matches!(SparseLu::factor(&a), Err(Error::Singular(_))));
        let lower = CsrMatrix::from_dense(&DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 2.0, 0.0]));
        assert!(forward_substitute(&lower, &[1.0, 1.0]).is_err());
    }

    #[test]
    fn kappa_of_simple_matrices() {
        for m in [KappaMethod::DenseSvd, KappaMethod::Iterative] {
            let id = condition_number(&CsrMatrix::identity(5), m).unwrap();
            assert_relative_eq!(id.kappa, 1.0, epsilon = 1e-12);
            let d = condition_number(&CsrMatrix::from_diagonal(&[2.0, 1.0, 0.5]), m).unwrap();
            assert_relative_eq!(d.kappa, 4.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn kappa_methods_agree_and_are_scale_invariant() {
        let sys = system(3, 2);
        let dense = condition_number(&sys.matrix, KappaMethod::DenseSvd).unwrap();
        let iter = condition_number(&sys.matrix, KappaMethod::Iterative).unwrap();
        assert!(
            (dense.kappa - iter.kappa).abs() <= 1e-6 * dense.kappa,
            "{dense:?} {iter:?}"
        );
        let scaled = condition_number(&sys.matrix.scaled(-3.0), KappaMethod::Iterative).unwrap();
        assert_relative_eq!(scaled.kappa, iter.kappa, max_relative = 1e-8);
    }

    #[test]
    fn iterative_kappa_on_non_triangular_matrix() {
        let a = DMatrix::from_row_slice(3, 3, &[4.0, 1.0, 0.0, 1.0, 3.0, 1.0, 2.0, 0.0, 2.0]);
        let s = CsrMatrix::from_dense(&a);
        let d = condition_number(&s, KappaMethod::DenseSvd).unwrap();
        let i = condition_number(&s, KappaMethod::Iterative).unwrap();
        assert_relative_eq!(d.kappa, i.kappa, max_relative = 1e-9);
    }

    #[test]
    fn method_names_parse() {
        assert_eq!(
            "power_iter".parse::<KappaMethod>().unwrap(),
            KappaMethod::Iterative
        );
        assert_eq!(
            "dense-svd".parse::<KappaMethod>().unwrap(),
            KappaMethod::DenseSvd
        );
        assert_eq!(
            "sparse_direct".parse::<SolveMethod>().unwrap(),
            SolveMethod::SparseDirect
        );
        assert!("qr".parse::<SolveMethod>().is_err());
    }
}
