//! Linear algebra of a single spacelike subspace L of R^{n+m,k}:
//! space-time slope, adapted singular-value frames, orthogonal projection
//! and the decomposition of the normal space into a spacelike part N+ and
//! a timelike part N-.
//!
//! The construction follows the graph picture: since L is spacelike, the
//! spatial projection restricted to L is injective, so L is the graph of a
//! linear transform B from H = pi_s(L) into the temporal summand. An SVD of
//! B (positive definite metrics on both sides) yields singular values
//! `lambda_j` with `lambda_j^2 < 1`, adapted orthonormal bases `e_j^+`,
//! `e_j^-`, and
//!
//! ```text
//! tau(L) = 1 / sqrt(1 - lambda_1^2),
//! L      = span{ (e_j^+ + lambda_j e_j^-) / sqrt(1 - lambda_j^2) },
//! N+     = span{ e_j^+ } for j = n+1..n+m,
//! N-     = span{ (lambda_j e_j^+ + e_j^-) / sqrt(1 - lambda_j^2) }.
//! ```

use crate::error::{Error, Result};
use crate::mink::{mink_inner_unchecked, MinkVec, Signature};
use nalgebra::{DMatrix, DVector};

/// Default relative threshold on the smallest Gram eigenvalue below which a
/// basis is rejected as ill-conditioned.
pub const DEFAULT_COND_TOL: f64 = 1e-10;

/// Singular values below this are snapped to exactly zero, so that the
/// `n > k` case carries no SVD noise.
const LAMBDA_ZERO_SNAP: f64 = 1e-13;

/// An n-dimensional spacelike subspace of R^{n+m,k}, stored as a basis with
/// its (symmetric positive definite) Minkowski Gram matrix.
#[derive(Debug, Clone)]
pub struct SpacelikeSubspace {
    pub basis: Vec<MinkVec>,
    pub sig: Signature,
    pub gram: DMatrix<f64>,
}

impl SpacelikeSubspace {
    /// Builds the subspace, enforcing the spacelike condition (Gram SPD).
    pub fn new(basis: Vec<MinkVec>) -> Result<Self> {
        Self::with_cond_tol(basis, DEFAULT_COND_TOL)
    }

    pub fn with_cond_tol(basis: Vec<MinkVec>, cond_tol: f64) -> Result<Self> {
        if basis.is_empty() {
            return Err(Error::BadInput("empty basis".into()));
        }
        let sig = basis[0].sig;
        for b in &basis {
            if b.sig != sig {
                return Err(Error::SignatureMismatch(sig.to_string(), b.sig.to_string()));
            }
        }
        let n = basis.len();
        let gram = DMatrix::from_fn(n, n, |i, j| mink_inner_unchecked(&basis[i], &basis[j]));
        let eig = gram.clone().symmetric_eigen();
        let mut min_eig = f64::INFINITY;
        let mut max_eig = f64::NEG_INFINITY;
        for &l in eig.eigenvalues.iter() {
            min_eig = min_eig.min(l);
            max_eig = max_eig.max(l);
        }
        if min_eig <= 0.0 {
            return Err(Error::NotSpacelike(format!(
                "Gram matrix has eigenvalue {min_eig:.3e}"
            )));
        }
        if min_eig < cond_tol * max_eig {
            return Err(Error::IllConditioned {
                min_eig,
                tol: cond_tol * max_eig,
            });
        }
        Ok(SpacelikeSubspace { basis, sig, gram })
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Codimension split (m, k): spatial complement and temporal dimensions.
    pub fn codim_split(&self) -> (usize, usize) {
        (
            self.sig.space_dim - self.dim(),
            self.sig.time_dim,
        )
    }
}

/// Adapted frame of a spacelike subspace from the SVD of the graph map.
///
/// `e_plus` holds n + m spatial vectors: the first n span H = pi_s(L), the
/// remaining m span the orthogonal complement of H inside the Euclidean
/// slice. `e_minus` holds the k temporal vectors. `lambdas` are sorted
/// descending; when n > k the trailing entries are exactly zero.
#[derive(Debug, Clone)]
pub struct SpacelikeFrame {
    pub e_plus: Vec<MinkVec>,
    pub e_minus: Vec<MinkVec>,
    pub lambdas: Vec<f64>,
    pub tau: f64,
    pub l_basis_orthonormal: Vec<MinkVec>,
}

/// Orthogonal decomposition of the normal space of L.
///
/// The m vectors of `n_plus` are spacelike, the k vectors of `n_minus` are
/// timelike; on N- the positive definite norm convention is used.
#[derive(Debug, Clone)]
pub struct NormalSplit {
    pub n_plus: Vec<MinkVec>,
    pub n_minus: Vec<MinkVec>,
}

fn spatial_vec(sig: Signature, col: &DVector<f64>) -> MinkVec {
    let mut coords = vec![0.0; sig.dim()];
    coords[..sig.space_dim].copy_from_slice(col.as_slice());
    MinkVec { coords, sig }
}

fn temporal_vec(sig: Signature, col: &DVector<f64>) -> MinkVec {
    let mut coords = vec![0.0; sig.dim()];
    coords[sig.space_dim..].copy_from_slice(col.as_slice());
    MinkVec { coords, sig }
}

/// Builds the adapted frame of `l` via the SVD of the graph transform.
pub fn build_frame(l: &SpacelikeSubspace) -> Result<SpacelikeFrame> {
    let sig = l.sig;
    let n = l.dim();
    let p = sig.space_dim;
    let k = sig.time_dim;
    if n > p {
        return Err(Error::BadInput(format!(
            "subspace dimension {n} exceeds spatial dimension {p}"
        )));
    }

    // Spatial parts of the basis, as columns. pi_s restricted to L is
    // injective because L is spacelike, so S has full column rank.
    let s_mat = DMatrix::from_fn(p, n, |i, j| l.basis[j].coords[i]);
    let t_mat = DMatrix::from_fn(k, n, |i, j| l.basis[j].coords[p + i]);

    // Orthonormal basis of H = pi_s(L) by thin QR.
    let qr = s_mat.clone().qr();
    let q = qr.q(); // p x n, orthonormal columns
    let r = qr.r();
    for i in 0..n {
        if r[(i, i)].abs() < 1e-13 * r[(0, 0)].abs().max(1.0) {
            return Err(Error::IllConditioned {
                min_eig: r[(i, i)].abs(),
                tol: 1e-13,
            });
        }
    }

    // Graph transform in the q-basis of H: column j of B holds the temporal
    // part of the unique vector of L whose spatial part is q_j.
    // Solve S c = q_j, then B q_j = T c.
    let b_mat = {
        let mut b = DMatrix::zeros(k, n);
        for j in 0..n {
            let qj = q.column(j).into_owned();
            let rhs = s_mat.transpose() * &qj;
            let sts = s_mat.transpose() * &s_mat;
            let c = sts
                .lu()
                .solve(&rhs)
                .ok_or_else(|| Error::NotSpacelike("spatial projection is singular".into()))?;
            let t = &t_mat * c;
            b.set_column(j, &t);
        }
        b
    };

    // SVD of B with positive definite metrics on both sides.
    let svd = b_mat.clone().svd(true, true);
    let u = svd
        .u
        .as_ref()
        .ok_or_else(|| Error::SolverFailure("SVD did not produce U".into()))?;
    let vt = svd
        .v_t
        .as_ref()
        .ok_or_else(|| Error::SolverFailure("SVD did not produce V^T".into()))?;
    let r_rank = svd.singular_values.len(); // min(k, n)

    // Sort singular values descending; stable on ties.
    let mut order: Vec<usize> = (0..r_rank).collect();
    order.sort_by(|&a, &b| {
        svd.singular_values[b]
            .partial_cmp(&svd.singular_values[a])
            .unwrap()
    });

    let mut lambdas = vec![0.0; n];
    // Right singular vectors in the q-coefficient space of H. The thin SVD
    // only returns min(k, n) of them; when n > k the kernel directions of B
    // are appended by deterministic completion (their lambda is zero).
    let v = vt.transpose(); // n x min(k, n)
    let mut v_cols: Vec<DVector<f64>> = Vec::with_capacity(n);
    let mut e_minus_cols: Vec<DVector<f64>> = Vec::with_capacity(k);

    for (slot, &idx) in order.iter().enumerate() {
        let lam = svd.singular_values[idx];
        lambdas[slot] = if lam.abs() < LAMBDA_ZERO_SNAP { 0.0 } else { lam };
        v_cols.push(v.column(idx).into_owned());
        e_minus_cols.push(u.column(idx).into_owned());
    }
    complete_orthonormal(&mut v_cols, n);
    let e_plus_h: Vec<DVector<f64>> = v_cols.iter().map(|c| &q * c).collect();

    // Complete the temporal frame to all k axes: add an orthonormal basis
    // of the complement of span(e_minus_cols).
    complete_orthonormal(&mut e_minus_cols, k);

    // lambda_j^2 < 1 is the spacelike condition.
    for &lam in &lambdas {
        if lam >= 1.0 {
            return Err(Error::NotSpacelike(format!(
                "singular value {lam} >= 1: graph direction is not spacelike"
            )));
        }
    }
    let lambda1 = lambdas.first().copied().unwrap_or(0.0);
    let tau = 1.0 / (1.0 - lambda1 * lambda1).sqrt();

    // Spatial complement of H inside the Euclidean slice (m vectors).
    let m = p - n;
    let mut spatial_cols: Vec<DVector<f64>> = e_plus_h.clone();
    complete_orthonormal(&mut spatial_cols, p);
    debug_assert_eq!(spatial_cols.len(), n + m);

    let e_plus: Vec<MinkVec> = spatial_cols.iter().map(|c| spatial_vec(sig, c)).collect();
    let e_minus: Vec<MinkVec> = e_minus_cols.iter().map(|c| temporal_vec(sig, c)).collect();

    let l_basis_orthonormal: Vec<MinkVec> = (0..n)
        .map(|j| {
            let lam = lambdas[j];
            let norm = (1.0 - lam * lam).sqrt();
            let mut v = e_plus[j].clone();
            if lam != 0.0 && j < k {
                v = v.axpy(lam, &e_minus[j]);
            }
            v.scale(1.0 / norm)
        })
        .collect();

    Ok(SpacelikeFrame {
        e_plus,
        e_minus,
        lambdas,
        tau,
        l_basis_orthonormal,
    })
}

/// Extends `cols` (orthonormal vectors of R^dim) to a full orthonormal basis
/// by Gram-Schmidt over the coordinate axes, deterministically.
fn complete_orthonormal(cols: &mut Vec<DVector<f64>>, dim: usize) {
    let mut axis = 0;
    while cols.len() < dim && axis < dim {
        let mut cand = DVector::zeros(dim);
        cand[axis] = 1.0;
        for c in cols.iter() {
            let d = c.dot(&cand);
            cand.axpy(-d, c, 1.0);
        }
        let norm = cand.norm();
        if norm > 1e-8 {
            cols.push(cand / norm);
        }
        axis += 1;
    }
    debug_assert_eq!(cols.len(), dim);
}

/// Space-time slope tau(L) = max of |pi_s(v)| over Minkowski-unit v in L.
pub fn slope(l: &SpacelikeSubspace) -> Result<f64> {
    Ok(build_frame(l)?.tau)
}

/// Independent slope computation: largest generalized eigenvalue of the
/// spatial Gram against the Minkowski Gram, tau^2 = max_a (a'Sa)/(a'Ga).
pub fn slope_generalized_eig(l: &SpacelikeSubspace) -> Result<f64> {
    let n = l.dim();
    let s = DMatrix::from_fn(n, n, |i, j| {
        let a = l.basis[i].proj_s();
        let b = l.basis[j].proj_s();
        mink_inner_unchecked(&a, &b)
    });
    let chol = l
        .gram
        .clone()
        .cholesky()
        .ok_or_else(|| Error::NotSpacelike("Gram not SPD".into()))?;
    // tau^2 = lambda_max( Linv S Linv' ) with G = L L'.
    let li = chol
        .l()
        .try_inverse()
        .ok_or_else(|| Error::SolverFailure("Cholesky factor not invertible".into()))?;
    let m = &li * s * li.transpose();
    let eig = m.symmetric_eigen();
    let max = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);
    Ok(max.max(1.0).sqrt())
}

/// Orthogonal projection of `v` onto L under the indefinite product.
pub fn project_onto(l: &SpacelikeSubspace, v: &MinkVec) -> Result<MinkVec> {
    if v.sig != l.sig {
        return Err(Error::SignatureMismatch(l.sig.to_string(), v.sig.to_string()));
    }
    let frame = build_frame(l)?;
    Ok(project_with_frame(&frame, v))
}

/// Projection using a prebuilt frame: pi_L(v) = sum_j <v, l_j> l_j over the
/// Minkowski-orthonormal basis of L.
pub fn project_with_frame(frame: &SpacelikeFrame, v: &MinkVec) -> MinkVec {
    let mut out = MinkVec::zero(v.sig);
    for lj in &frame.l_basis_orthonormal {
        let c = mink_inner_unchecked(v, lj);
        out = out.axpy(c, lj);
    }
    out
}

/// The explicit normal decomposition N+ (spacelike, m vectors) and
/// N- (timelike, k vectors).
pub fn normal_split(l: &SpacelikeSubspace) -> Result<NormalSplit> {
    let frame = build_frame(l)?;
    Ok(normal_split_from_frame(l, &frame))
}

pub fn normal_split_from_frame(l: &SpacelikeSubspace, frame: &SpacelikeFrame) -> NormalSplit {
    let n = l.dim();
    let k = l.sig.time_dim;
    let n_plus: Vec<MinkVec> = frame.e_plus[n..].to_vec();
    let n_minus: Vec<MinkVec> = (0..k)
        .map(|j| {
            let lam = if j < n { frame.lambdas[j] } else { 0.0 };
            if lam == 0.0 {
                frame.e_minus[j].clone()
            } else {
                let norm = (1.0 - lam * lam).sqrt();
                frame.e_plus[j]
                    .scale(lam)
                    .add(&frame.e_minus[j])
                    .scale(1.0 / norm)
            }
        })
        .collect();
    NormalSplit { n_plus, n_minus }
}

impl NormalSplit {
    /// Projection onto N+; the basis is spacelike orthonormal.
    pub fn project_plus(&self, v: &MinkVec) -> MinkVec {
        let mut out = MinkVec::zero(v.sig);
        for b in &self.n_plus {
            out = out.axpy(mink_inner_unchecked(v, b), b);
        }
        out
    }

    /// Coefficients of the N- component. The basis vectors have <b,b> = -1,
    /// so the coefficient of v along b is -<v,b>.
    pub fn minus_coefficients(&self, v: &MinkVec) -> Vec<f64> {
        self.n_minus
            .iter()
            .map(|b| -mink_inner_unchecked(v, b))
            .collect()
    }

    /// The N- component of v (indefinite expansion).
    pub fn project_minus(&self, v: &MinkVec) -> MinkVec {
        let mut out = MinkVec::zero(v.sig);
        for (b, c) in self.n_minus.iter().zip(self.minus_coefficients(v)) {
            out = out.axpy(c, b);
        }
        out
    }

    /// Positive definite norm of the N- component.
    pub fn minus_norm(&self, v: &MinkVec) -> f64 {
        self.minus_coefficients(v)
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Positive definite norm of the N+ component.
    pub fn plus_norm(&self, v: &MinkVec) -> f64 {
        self.n_plus
            .iter()
            .map(|b| mink_inner_unchecked(v, b).powi(2))
            .sum::<f64>()
            .sqrt()
    }
}
