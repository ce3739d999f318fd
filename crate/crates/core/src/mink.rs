//! Arithmetic of the ambient pseudo-Euclidean space R^{p,q}.
//!
//! Vectors carry their signature: the first `space_dim` coordinates are
//! spatial (+1 in the inner product), the last `time_dim` are temporal (-1).
//! The convention is
//!
//! ```text
//! <v,v> = |pi_s(v)|^2 - |pi_t(v)|^2
//! ```
//!
//! where `pi_s` / `pi_t` are the projections onto the spatial and temporal
//! summands and both summands carry their positive definite norms.

use crate::error::{Error, Result};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use std::fmt;

/// Signature (p, q) of the ambient space: p spatial and q temporal directions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Signature {
    pub space_dim: usize,
    pub time_dim: usize,
}

impl Signature {
    pub fn new(space_dim: usize, time_dim: usize) -> Result<Self> {
        if space_dim == 0 {
            return Err(Error::BadInput(
                "signature needs at least one spatial direction".into(),
            ));
        }
        Ok(Signature {
            space_dim,
            time_dim,
        })
    }

    /// Total dimension p + q.
    pub fn dim(&self) -> usize {
        self.space_dim + self.time_dim
    }
}

impl fmt::Display for Signature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "R^({},{})", self.space_dim, self.time_dim)
    }
}

/// Causal type of a vector, decided by the sign of <v,v> against a tolerance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CausalClass {
    Spacelike,
    Timelike,
    Null,
}

/// A point or vector of R^{p,q}, coordinates stored spatial-first.
#[derive(Debug, Clone, PartialEq)]
pub struct MinkVec {
    pub coords: Vec<f64>,
    pub sig: Signature,
}

impl MinkVec {
    pub fn new(coords: Vec<f64>, sig: Signature) -> Result<Self> {
        if coords.len() != sig.dim() {
            return Err(Error::BadInput(format!(
                "coordinate count {} does not match {}",
                coords.len(),
                sig
            )));
        }
        Ok(MinkVec { coords, sig })
    }

    pub fn zero(sig: Signature) -> Self {
        MinkVec {
            coords: vec![0.0; sig.dim()],
            sig,
        }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// Spatial projection: temporal entries zeroed.
    pub fn proj_s(&self) -> MinkVec {
        let mut coords = self.coords.clone();
        for c in coords.iter_mut().skip(self.sig.space_dim) {
            *c = 0.0;
        }
        MinkVec {
            coords,
            sig: self.sig,
        }
    }

    /// Temporal projection: spatial entries zeroed.
    pub fn proj_t(&self) -> MinkVec {
        let mut coords = self.coords.clone();
        for c in coords.iter_mut().take(self.sig.space_dim) {
            *c = 0.0;
        }
        MinkVec {
            coords,
            sig: self.sig,
        }
    }

    /// Positive definite norm of the spatial part.
    pub fn norm_s(&self) -> f64 {
        self.coords[..self.sig.space_dim]
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Positive definite norm of the temporal part.
    pub fn norm_t(&self) -> f64 {
        self.coords[self.sig.space_dim..]
            .iter()
            .map(|c| c * c)
            .sum::<f64>()
            .sqrt()
    }

    /// Euclidean norm of the full coordinate vector (not the Minkowski norm).
    pub fn norm_euclidean(&self) -> f64 {
        self.coords.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    /// <v,v> under the indefinite product.
    pub fn mink_sq(&self) -> f64 {
        mink_inner_unchecked(self, self)
    }

    /// Minkowski norm of a spacelike vector; panics in debug if <v,v> < 0.
    pub fn mink_norm(&self) -> f64 {
        let sq = self.mink_sq();
        debug_assert!(sq >= -1e-12 * self.norm_euclidean().powi(2).max(1.0));
        sq.max(0.0).sqrt()
    }

    pub fn scale(&self, s: f64) -> MinkVec {
        MinkVec {
            coords: self.coords.iter().map(|c| c * s).collect(),
            sig: self.sig,
        }
    }

    pub fn add(&self, other: &MinkVec) -> MinkVec {
        debug_assert_eq!(self.sig, other.sig);
        MinkVec {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a + b)
                .collect(),
            sig: self.sig,
        }
    }

    pub fn sub(&self, other: &MinkVec) -> MinkVec {
        debug_assert_eq!(self.sig, other.sig);
        MinkVec {
            coords: self
                .coords
                .iter()
                .zip(&other.coords)
                .map(|(a, b)| a - b)
                .collect(),
            sig: self.sig,
        }
    }

    /// v + s * w without intermediate allocation of the scaled vector.
    pub fn axpy(&self, s: f64, w: &MinkVec) -> MinkVec {
        debug_assert_eq!(self.sig, w.sig);
        MinkVec {
            coords: self
                .coords
                .iter()
                .zip(&w.coords)
                .map(|(a, b)| a + s * b)
                .collect(),
            sig: self.sig,
        }
    }
}

/// Indefinite inner product sum_{i<p} u_i v_i - sum_{i>=p} u_i v_i.
pub fn mink_inner(u: &MinkVec, v: &MinkVec) -> Result<f64> {
    if u.sig != v.sig {
        return Err(Error::SignatureMismatch(
            u.sig.to_string(),
            v.sig.to_string(),
        ));
    }
    Ok(mink_inner_unchecked(u, v))
}

/// Same as [`mink_inner`] but assumes matching signatures.
pub fn mink_inner_unchecked(u: &MinkVec, v: &MinkVec) -> f64 {
    let p = u.sig.space_dim;
    let mut spatial = 0.0;
    let mut temporal = 0.0;
    for i in 0..p {
        spatial += u.coords[i] * v.coords[i];
    }
    for i in p..u.coords.len() {
        temporal += u.coords[i] * v.coords[i];
    }
    spatial - temporal
}

/// Scale-relative default tolerance for the null band.
pub fn default_null_tol(v: &MinkVec) -> f64 {
    1e-12 * v.norm_euclidean().powi(2).max(1.0)
}

/// Classify a vector by the sign of <v,v> relative to `tol` >= 0.
pub fn causal_class(v: &MinkVec, tol: f64) -> CausalClass {
    debug_assert!(tol >= 0.0);
    let sq = v.mink_sq();
    if sq > tol {
        CausalClass::Spacelike
    } else if sq < -tol {
        CausalClass::Timelike
    } else {
        CausalClass::Null
    }
}

/// A linear map of the ambient space, used for block isometries and boosts.
#[derive(Debug, Clone)]
pub struct AmbientMap {
    pub matrix: DMatrix<f64>,
    pub sig: Signature,
}

impl AmbientMap {
    pub fn identity(sig: Signature) -> Self {
        AmbientMap {
            matrix: DMatrix::identity(sig.dim(), sig.dim()),
            sig,
        }
    }

    /// Block isometry diag(a, b) with a in O(p) and b in O(q).
    pub fn block(sig: Signature, spatial: DMatrix<f64>, temporal: DMatrix<f64>) -> Result<Self> {
        let (p, q) = (sig.space_dim, sig.time_dim);
        if spatial.nrows() != p || spatial.ncols() != p {
            return Err(Error::BadInput("spatial block has wrong size".into()));
        }
        if temporal.nrows() != q || temporal.ncols() != q {
            return Err(Error::BadInput("temporal block has wrong size".into()));
        }
        let mut m = DMatrix::zeros(sig.dim(), sig.dim());
        m.view_mut((0, 0), (p, p)).copy_from(&spatial);
        m.view_mut((p, p), (q, q)).copy_from(&temporal);
        Ok(AmbientMap { matrix: m, sig })
    }

    /// Hyperbolic boost of rapidity `beta` mixing spatial axis `i` with
    /// temporal axis `j` (temporal axes indexed from 0).
    pub fn boost(sig: Signature, i: usize, j: usize, beta: f64) -> Result<Self> {
        if i >= sig.space_dim || j >= sig.time_dim {
            return Err(Error::BadInput("boost axes out of range".into()));
        }
        let jt = sig.space_dim + j;
        let mut m = DMatrix::identity(sig.dim(), sig.dim());
        let (c, s) = (beta.cosh(), beta.sinh());
        m[(i, i)] = c;
        m[(i, jt)] = s;
        m[(jt, i)] = s;
        m[(jt, jt)] = c;
        Ok(AmbientMap { matrix: m, sig })
    }

    pub fn apply(&self, v: &MinkVec) -> MinkVec {
        debug_assert_eq!(v.sig, self.sig);
        let n = self.sig.dim();
        let mut out = vec![0.0; n];
        for (r, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for c in 0..n {
                acc += self.matrix[(r, c)] * v.coords[c];
            }
            *o = acc;
        }
        MinkVec {
            coords: out,
            sig: self.sig,
        }
    }
}
