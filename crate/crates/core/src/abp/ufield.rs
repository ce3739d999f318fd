//! Scalar fields over the parameter domain with two derivative orders.
//!
//! The comparison-map machinery needs u, grad u and the covariant Hessian at
//! arbitrary parameter points. A finite element solution only carries vertex
//! values, so it is recovered by a local quadratic least-squares fit over a
//! 5x5 stencil of grid nodes around the query. When the right side of the
//! PDE is known, the fit is constrained so that its covariant Laplacian at
//! the query equals the PDE value exactly; this keeps the arithmetic-
//! geometric chain of the Jacobian bound an identity instead of an
//! approximation (the recovery tolerance would otherwise leak into it).
//!
//! The stencil is chosen by the nearest grid node and can be frozen by the
//! caller, which makes finite differences of downstream quantities across a
//! fit see one single smooth quadratic.

use crate::error::{Error, Result};
use crate::surface::mesh::StructuredGrid;
use crate::surface::parametric::ParametricSurface;
use nalgebra::{DMatrix, DVector};

/// Value, parameter gradient and parameter Hessian (uu, uv, vv) at a point.
#[derive(Debug, Clone, Copy)]
pub struct ScalarJet {
    pub value: f64,
    pub grad: [f64; 2],
    pub hess: [f64; 3],
}

/// A scalar field on the parameter domain, twice differentiable.
pub trait ScalarJet2: Send + Sync {
    fn eval(&self, u: f64, v: f64) -> ScalarJet;
}

/// Closed-form Neumann solution of a round disk of the given radius in the
/// polar chart (flat or boosted embedding): u = c0 (r^2/(2R) - R/4).
pub struct DiskSolution {
    pub c0: f64,
    pub radius: f64,
}

impl ScalarJet2 for DiskSolution {
    fn eval(&self, r: f64, _th: f64) -> ScalarJet {
        let rr = self.radius;
        ScalarJet {
            value: self.c0 * (0.5 * r * r / rr - 0.25 * rr),
            grad: [self.c0 * r / rr, 0.0],
            hess: [self.c0 / rr, 0.0, 0.0],
        }
    }
}

/// Quadratic recovery of a grid-sampled scalar field.
pub struct GridFit<'a> {
    pub surface: &'a ParametricSurface,
    pub grid: &'a StructuredGrid,
    /// One value per mesh vertex.
    pub values: &'a [f64],
}

impl<'a> GridFit<'a> {
    /// Fit around the node nearest to the query; `trace` optionally pins the
    /// covariant Laplacian of the fit at the query point.
    pub fn eval(&self, u: f64, v: f64, trace: Option<f64>) -> Result<ScalarJet> {
        let node = self.grid.nearest_node(u, v);
        self.eval_frozen(u, v, node, trace)
    }

    /// Fit with an explicitly chosen stencil center; finite differences over
    /// nearby queries stay on one quadratic when they pass the same node.
    pub fn eval_frozen(
        &self,
        u: f64,
        v: f64,
        node: (usize, usize),
        trace: Option<f64>,
    ) -> Result<ScalarJet> {
        let grid = self.grid;
        let (i0, j0) = node;
        let hu = grid.du();
        let hv = grid.dv();
        let span_v = grid.v_range.1 - grid.v_range.0;

        let i_lo = i0.saturating_sub(2);
        let i_hi = (i0 + 2).min(grid.nu);
        let mut rows: Vec<([f64; 2], f64)> = Vec::with_capacity(25);
        for i in i_lo..=i_hi {
            for dj in -2i64..=2 {
                let j_raw = j0 as i64 + dj;
                let j = if grid.periodic_v {
                    j_raw.rem_euclid(grid.ncols() as i64) as usize
                } else {
                    if j_raw < 0 || j_raw > grid.nv as i64 {
                        continue;
                    }
                    j_raw as usize
                };
                let (nu_p, nv_p) = grid.node_param(i, j);
                let mut dv = nv_p - v;
                if grid.periodic_v {
                    dv -= span_v * (dv / span_v).round();
                }
                let du = nu_p - u;
                let val = self.values[grid.vertex(i, j)];
                rows.push(([du, dv], val));
            }
        }
        if rows.len() < 6 {
            return Err(Error::SolverFailure(
                "not enough stencil nodes for the quadratic fit".into(),
            ));
        }

        // scaled monomials: 1, du/hu, dv/hv, (du/hu)^2/2, (du/hu)(dv/hv), (dv/hv)^2/2
        let n = rows.len();
        let a = DMatrix::from_fn(n, 6, |r, c| {
            let x = rows[r].0[0] / hu;
            let y = rows[r].0[1] / hv;
            match c {
                0 => 1.0,
                1 => x,
                2 => y,
                3 => 0.5 * x * x,
                4 => x * y,
                _ => 0.5 * y * y,
            }
        });
        let b = DVector::from_fn(n, |r, _| rows[r].1);
        let ata = a.transpose() * &a;
        let atb = a.transpose() * &b;

        let coeffs = match trace {
            None => ata
                .lu()
                .solve(&atb)
                .ok_or_else(|| Error::SolverFailure("singular fit system".into()))?,
            Some(target) => {
                // covariant Laplacian in scaled coefficients:
                // lap = ginv^ab H_ab - (ginv^ab Gamma^c_ab) d_c
                let m = self.surface.metric_at(u, v)?;
                let inv = m.inverse();
                let gamma = self.surface.christoffels(u, v)?;
                let mut lam = [0.0; 2];
                for (c, l) in lam.iter_mut().enumerate() {
                    for a_i in 0..2 {
                        for b_i in 0..2 {
                            *l += inv[(a_i, b_i)] * gamma[c][a_i][b_i];
                        }
                    }
                }
                let con = [
                    0.0,
                    -lam[0] / hu,
                    -lam[1] / hv,
                    inv[(0, 0)] / (hu * hu),
                    2.0 * inv[(0, 1)] / (hu * hv),
                    inv[(1, 1)] / (hv * hv),
                ];
                // KKT system [[AtA, c], [c', 0]]
                let mut kkt = DMatrix::zeros(7, 7);
                kkt.view_mut((0, 0), (6, 6)).copy_from(&ata);
                for i in 0..6 {
                    kkt[(i, 6)] = con[i];
                    kkt[(6, i)] = con[i];
                }
                let mut rhs = DVector::zeros(7);
                rhs.view_mut((0, 0), (6, 1)).copy_from(&atb);
                rhs[6] = target;
                let sol = kkt
                    .lu()
                    .solve(&rhs)
                    .ok_or_else(|| Error::SolverFailure("singular constrained fit".into()))?;
                sol.rows(0, 6).into_owned()
            }
        };

        Ok(ScalarJet {
            value: coeffs[0],
            grad: [coeffs[1] / hu, coeffs[2] / hv],
            hess: [
                coeffs[3] / (hu * hu),
                coeffs[4] / (hu * hv),
                coeffs[5] / (hv * hv),
            ],
        })
    }
}
