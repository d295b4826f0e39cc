//! Exact finite-dimensional rank-N Krein formula with a brute-force oracle.
//!
//! Everything here acts on dense Hermitian matrices, so the resolvent
//! identities hold up to roundoff and serve as the reference for the
//! infinite-dimensional engines.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::energy::C64;
use crate::error::{KreinError, Result};

const HERMITIAN_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;
const SPECTRUM_TOL: f64 = 1e-10;
const COND_LIMIT: f64 = 1e12;

/// Largest singular value.
pub fn spectral_norm(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 || m.ncols() == 0 {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values.max()
}

pub fn hermitian_deviation(m: &DMatrix<C64>) -> f64 {
    let mut dev: f64 = 0.0;
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            dev = dev.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    dev
}

/// Eigenvalues of a Hermitian matrix (real, ascending).
pub fn hermitian_eigenvalues(m: &DMatrix<C64>) -> Vec<f64> {
    let mut ev: Vec<f64> = m
        .clone()
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap());
    ev
}

fn condition_estimate(m: &DMatrix<C64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    let sv = m.clone().svd(false, false).singular_values;
    let (smax, smin) = (sv.max(), sv.min());
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// A dense Hermitian operator, channel vectors f_1..f_N and Hermitian coupling W.
#[derive(Debug, Clone)]
pub struct FiniteModel {
    pub a: DMatrix<C64>,
    /// n x N matrix whose columns are the channel vectors.
    pub f: DMatrix<C64>,
    pub w: DMatrix<C64>,
}

impl FiniteModel {
    pub fn new(a: DMatrix<C64>, f: DMatrix<C64>, w: DMatrix<C64>) -> Result<Self> {
        let dev_a = hermitian_deviation(&a);
        if dev_a > HERMITIAN_TOL {
            return Err(KreinError::NonHermitianA { dev: dev_a });
        }
        let dev_w = hermitian_deviation(&w);
        if dev_w > HERMITIAN_TOL {
            return Err(KreinError::NonHermitianW { dev: dev_w });
        }
        assert_eq!(f.nrows(), a.nrows(), "channel vectors must live in C^n");
        assert_eq!(f.ncols(), w.nrows(), "W must be N x N");
        if f.ncols() > 0 {
            let sv = f.clone().svd(false, false).singular_values;
            let ratio = sv.min() / sv.max();
            if ratio <= RANK_TOL {
                return Err(KreinError::RankDeficientChannels { ratio });
            }
        }
        Ok(FiniteModel { a, f, w })
    }

    pub fn dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn channels(&self) -> usize {
        self.f.ncols()
    }

    /// Seeded random instance: A = (M + M*)/2 with entries uniform on the
    /// complex unit square, random channel columns, Hermitian W.
    pub fn random<R: Rng>(n: usize, channels: usize, rng: &mut R) -> Self {
        let m = DMatrix::from_fn(n, n, |_, _| C64::new(rng.gen::<f64>(), rng.gen::<f64>()));
        let a = (&m + m.adjoint()) * C64::new(0.5, 0.0);
        let f = DMatrix::from_fn(n, channels, |_, _| {
            C64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
        });
        let v = DMatrix::from_fn(channels, channels, |_, _| {
            C64::new(rng.gen::<f64>(), rng.gen::<f64>())
        });
        let w = (&v + v.adjoint()) * C64::new(0.5, 0.0);
        FiniteModel::new(a, f, w).expect("random instance satisfies the invariants")
    }
}

/// The Krein Q-matrix q_{mn}(z) = (R(z)f_n, f_m) of a finite model.
#[derive(Debug, Clone)]
pub struct QMatrixFD {
    pub z: C64,
    pub q: DMatrix<C64>,
}

/// (A - zI)^{-1} for Hermitian A, z off the spectrum.
pub fn finite_resolvent(a: &DMatrix<C64>, z: C64) -> Result<DMatrix<C64>> {
    let n = a.nrows();
    let dist = hermitian_eigenvalues(a)
        .iter()
        .map(|&lam| (z - C64::new(lam, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    if dist <= SPECTRUM_TOL {
        return Err(KreinError::SingularShift { tol: SPECTRUM_TOL });
    }
    let shifted = a - DMatrix::<C64>::identity(n, n) * z;
    shifted
        .lu()
        .try_inverse()
        .ok_or(KreinError::SingularShift { tol: SPECTRUM_TOL })
}

/// Q(z) with entries (R(z)f_n, f_m) = F* R(z) F.
pub fn gram_q(model: &FiniteModel, z: C64) -> Result<QMatrixFD> {
    if model.channels() == 0 {
        return Ok(QMatrixFD {
            z,
            q: DMatrix::zeros(0, 0),
        });
    }
    let r = finite_resolvent(&model.a, z)?;
    Ok(QMatrixFD {
        z,
        q: model.f.adjoint() * r * &model.f,
    })
}

fn krein_correction(model: &FiniteModel, _z: C64, r: &DMatrix<C64>) -> Result<DMatrix<C64>> {
    // R F [Q + W]^{-1} F* R, using (R(conj z) F)* = F* R(z)
    let rf = r * &model.f;
    let q = model.f.adjoint() * &rf;
    let m = q + &model.w;
    let inv = m.lu().try_inverse().ok_or(KreinError::QPlusWSingular)?;
    Ok(&rf * inv * model.f.adjoint() * r)
}

/// The rank-N Krein resolvent R_1(z) = R(z) - R F [Q(z)+W]^{-1} F* R(z).
pub fn krein_rank_n(model: &FiniteModel, z: C64) -> Result<DMatrix<C64>> {
    let cond = condition_estimate(&model.w);
    if cond >= COND_LIMIT {
        return Err(KreinError::NonInvertibleW { cond });
    }
    let r = finite_resolvent(&model.a, z)?;
    if model.channels() == 0 {
        return Ok(r);
    }
    let corr = krein_correction(model, z, &r)?;
    Ok(r - corr)
}

/// Brute-force oracle: builds A_1 = A + F W^{-1} F* explicitly and inverts A_1 - zI.
pub fn direct_perturbed(model: &FiniteModel, z: C64) -> Result<DMatrix<C64>> {
    let cond = condition_estimate(&model.w);
    if cond >= COND_LIMIT {
        return Err(KreinError::NonInvertibleW { cond });
    }
    let a1 = perturbed_operator(model)?;
    finite_resolvent(&a1, z)
}

/// A_1 = A + sum (W^{-1})_{mn} (., f_n) f_m.
pub fn perturbed_operator(model: &FiniteModel) -> Result<DMatrix<C64>> {
    if model.channels() == 0 {
        return Ok(model.a.clone());
    }
    let cond = condition_estimate(&model.w);
    let w_inv = model
        .w
        .clone()
        .lu()
        .try_inverse()
        .ok_or(KreinError::NonInvertibleW { cond })?;
    let a1 = &model.a + &model.f * w_inv * model.f.adjoint();
    // symmetrize roundoff so downstream eigensolves see an exact Hermitian matrix
    Ok((&a1 + a1.adjoint()) * C64::new(0.5, 0.0))
}

/// Remark-2 compression for singular W: returns the projector P onto the
/// orthogonal complement of  span{ F alpha : alpha in ker W }  and P R_1(z) P.
pub fn compress_singular_w(model: &FiniteModel, z: C64) -> Result<(DMatrix<C64>, DMatrix<C64>)> {
    let n = model.dim();
    let nch = model.channels();
    let identity = DMatrix::<C64>::identity(n, n);
    // null space of W from its SVD
    let svd = model.w.clone().svd(false, true);
    let sv = &svd.singular_values;
    let smax = if nch == 0 { 0.0 } else { sv.max() };
    let cutoff = smax / COND_LIMIT;
    let null_cols: Vec<usize> = (0..nch).filter(|&j| sv[j] <= cutoff).collect();
    if null_cols.is_empty() {
        return Err(KreinError::InvertibleW {
            smin: if nch == 0 { 0.0 } else { sv.min() },
        });
    }
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let mut kernel = DMatrix::<C64>::zeros(nch, null_cols.len());
    for (col, &j) in null_cols.iter().enumerate() {
        for i in 0..nch {
            kernel[(i, col)] = v_t[(j, i)].conj();
        }
    }
    // orthonormal basis of span(F * ker W)
    let span = &model.f * kernel;
    let span_svd = span.clone().svd(true, false);
    let u = span_svd.u.as_ref().expect("requested U");
    let ssv = &span_svd.singular_values;
    let scut = ssv.max() * 1e-12;
    let mut basis_cols = Vec::new();
    for j in 0..ssv.len() {
        if ssv[j] > scut {
            basis_cols.push(DVector::from_column_slice(u.column(j).as_slice()));
        }
    }
    let mut projector = identity.clone();
    for b in &basis_cols {
        projector -= b * b.adjoint();
    }
    let r = finite_resolvent(&model.a, z)?;
    let r1 = &r - krein_correction(model, z, &r)?;
    let compressed = &projector * r1 * &projector;
    Ok((projector, compressed))
}

/// ||R(z1) - R(z2) - (z1-z2) R(z1) R(z2)|| in the spectral norm.
pub fn hilbert_residual<F>(resolvent_map: F, z1: C64, z2: C64) -> Result<f64>
where
    F: Fn(C64) -> Result<DMatrix<C64>>,
{
    let r1 = resolvent_map(z1)?;
    let r2 = resolvent_map(z2)?;
    let residual = &r1 - &r2 - (&r1 * &r2) * (z1 - z2);
    Ok(spectral_norm(&residual))
}
