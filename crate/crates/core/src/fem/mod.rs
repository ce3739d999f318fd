//! Piecewise-linear finite elements for the Neumann problem
//!
//! ```text
//! lap u = c0 (c_f - f)   on the surface,
//! <grad u, eta> = c0     on the boundary,
//! c_f = (vol(boundary) + int f) / vol(surface),
//! ```
//!
//! assembled from the induced Riemannian metric per cell (the surface is
//! spacelike, so no indefinite solves appear anywhere). Mass terms are
//! lumped; the discrete right side is projected onto the complement of the
//! constants before solving, and the solution is gauged to volume-weighted
//! mean zero.

pub mod sparse;

use crate::error::{Error, Result};
use crate::mink::{mink_inner_unchecked, MinkVec};
use crate::surface::mesh::{cell_gradient, StructuredGrid, SurfaceMesh};
use crate::surface::parametric::ParametricSurface;
use sparse::{pcg_project_constants, CsrMatrix, SkylineCholesky};

/// Which density the right-hand side carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DensityKind {
    /// sqrt(-<H,H>), clamped at zero (purely timelike codimension).
    Thm1,
    /// (1/tau + sqrt(tau^2 - 1/tau^2)) |pi_s H| + sqrt(tau^2 + 1) |pi_t H|.
    Thm2,
    Custom,
}

/// Nonnegative vertex density.
#[derive(Debug, Clone)]
pub struct DensityField {
    pub values: Vec<f64>,
    pub kind: DensityKind,
    /// Largest positive <H,H> clamped away while building a Thm1 density.
    pub clamp_magnitude: f64,
}

impl DensityField {
    pub fn zero(n: usize) -> DensityField {
        DensityField {
            values: vec![0.0; n],
            kind: DensityKind::Custom,
            clamp_magnitude: 0.0,
        }
    }

    pub fn custom(values: Vec<f64>) -> DensityField {
        DensityField {
            values,
            kind: DensityKind::Custom,
            clamp_magnitude: 0.0,
        }
    }

    /// Evaluates the surface's curvature at every grid vertex parameter.
    /// On a collapsed pole the chart is singular, so the sample is nudged
    /// a twentieth of a cell inward (far enough that the tangent Gram stays
    /// well-conditioned at high resolutions).
    fn vertex_curvatures(
        surface: &ParametricSurface,
        grid: &StructuredGrid,
    ) -> Result<Vec<crate::surface::CurvatureData>> {
        let nudge = 0.05 * grid.du();
        grid.params
            .iter()
            .map(|&(u, v)| {
                let u_eval = if grid.collapse_u_min && u <= grid.u_range.0 {
                    grid.u_range.0 + nudge
                } else {
                    u
                };
                surface.mean_curvature_data(u_eval, v)
            })
            .collect()
    }

    /// Density sqrt(-<H,H>) for the purely timelike codimension case.
    /// Errors when <H,H> exceeds `h_sq_tol` at some vertex.
    pub fn thm1(
        surface: &ParametricSurface,
        grid: &StructuredGrid,
        h_sq_tol: f64,
    ) -> Result<DensityField> {
        let curv = Self::vertex_curvatures(surface, grid)?;
        let mut clamp: f64 = 0.0;
        let mut values = Vec::with_capacity(curv.len());
        for (i, c) in curv.iter().enumerate() {
            if c.h_mink_sq > h_sq_tol {
                return Err(Error::TimelikeHViolation {
                    h_sq: c.h_mink_sq,
                    tol: h_sq_tol,
                    location: format!("vertex {i}"),
                });
            }
            clamp = clamp.max(c.h_mink_sq.max(0.0));
            values.push((-c.h_mink_sq).max(0.0).sqrt());
        }
        Ok(DensityField {
            values,
            kind: DensityKind::Thm1,
            clamp_magnitude: clamp,
        })
    }

    /// Mixed-codimension density with the global slope bound `tau`.
    pub fn thm2(
        surface: &ParametricSurface,
        grid: &StructuredGrid,
        tau: f64,
    ) -> Result<DensityField> {
        let curv = Self::vertex_curvatures(surface, grid)?;
        let c_s = 1.0 / tau + (tau * tau - 1.0 / (tau * tau)).max(0.0).sqrt();
        let c_t = (tau * tau + 1.0).sqrt();
        let values = curv
            .iter()
            .map(|c| c_s * c.h_s_norm + c_t * c.h_t_norm)
            .collect();
        Ok(DensityField {
            values,
            kind: DensityKind::Thm2,
            clamp_magnitude: 0.0,
        })
    }
}

/// The compatibility constant c_f = (vol(boundary) + int f) / vol with the
/// same discrete measures the assembly uses (lumped vertex masses).
pub fn compute_cf(mesh: &SurfaceMesh, f: &DensityField) -> Result<f64> {
    let vol = mesh.volume()?;
    if vol <= 0.0 {
        return Err(Error::InvalidMesh("nonpositive volume".into()));
    }
    let masses = mesh.lumped_masses()?;
    let f_int: f64 = f.values.iter().zip(&masses).map(|(f, m)| f * m).sum();
    Ok((mesh.boundary_volume() + f_int) / vol)
}

/// Discrete Neumann solution with its gauge and compatibility diagnostics.
#[derive(Debug, Clone)]
pub struct NeumannSolution {
    pub u: Vec<f64>,
    /// Piecewise-constant ambient gradient per cell.
    pub grad_u: Vec<MinkVec>,
    pub c0: f64,
    pub c_f: f64,
    /// |sum of the projected right side| / (c0 vol(boundary)).
    pub compat_residual: f64,
    /// Same quantity before the projection onto the complement of constants.
    pub compat_residual_pre: f64,
    /// True when the pre-projection residual exceeded 1e-6.
    pub compat_warning: bool,
    /// max over boundary edges of |<grad u, eta> - c0| (diagnostic only;
    /// pointwise fluxes converge only with refinement).
    pub boundary_flux_error: f64,
}

/// Stiffness matrix of the induced metric: K_ij = <E_i, E_j> / (4 A) per
/// cell, with E_i the edge opposite vertex i.
pub fn assemble_stiffness(mesh: &SurfaceMesh) -> Result<CsrMatrix> {
    let mut triplets = Vec::with_capacity(9 * mesh.cells.len());
    for (ci, cell) in mesh.cells.iter().enumerate() {
        let p = |i: usize| &mesh.vertices[cell[i]];
        let e = [
            p(2).sub(p(1)), // opposite vertex 0
            p(0).sub(p(2)), // opposite vertex 1
            p(1).sub(p(0)), // opposite vertex 2
        ];
        let area = mesh.cell_area(ci)?;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((
                    cell[i],
                    cell[j],
                    mink_inner_unchecked(&e[i], &e[j]) / (4.0 * area),
                ));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(mesh.n_vertices(), &triplets))
}

/// Solves the projected singular system K u = b and gauges u to
/// volume-weighted mean zero. Direct envelope Cholesky on the pinned system
/// first, conjugate gradients as fallback.
fn solve_gauged(mesh: &SurfaceMesh, stiffness: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
    let n = mesh.n_vertices();
    let mut u = match SkylineCholesky::factor(&stiffness.pinned(0)) {
        Ok(chol) => {
            let mut b = rhs.to_vec();
            b[0] = 0.0;
            chol.solve(&b)
        }
        Err(_) => pcg_project_constants(stiffness, rhs, 1e-12, 20 * n)?,
    };
    let masses = mesh.lumped_masses()?;
    let total: f64 = masses.iter().sum();
    let mean: f64 = u.iter().zip(&masses).map(|(u, m)| u * m).sum::<f64>() / total;
    for v in &mut u {
        *v -= mean;
    }
    Ok(u)
}

/// General weak solve: `source` holds the pointwise values of `lap u` and
/// `flux` the pointwise Neumann data, both per vertex. Returns the gauged
/// solution and its per-cell gradient.
pub fn solve_weak(
    mesh: &SurfaceMesh,
    source: &[f64],
    flux: &[f64],
) -> Result<(Vec<f64>, Vec<MinkVec>)> {
    if !mesh.is_connected() {
        return Err(Error::NotConnected);
    }
    let masses = mesh.lumped_masses()?;
    let bmasses = mesh.boundary_masses();
    let n = mesh.n_vertices();
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        rhs[i] = -source[i] * masses[i] + flux[i] * bmasses[i];
    }
    let mean = rhs.iter().sum::<f64>() / n as f64;
    for v in &mut rhs {
        *v -= mean;
    }
    let stiffness = assemble_stiffness(mesh)?;
    let u = solve_gauged(mesh, &stiffness, &rhs)?;
    let grad = gradient_field(mesh, &u)?;
    Ok((u, grad))
}

/// Solves the Neumann problem of the surface with density `f` and flux `c0`.
pub fn solve_neumann(mesh: &SurfaceMesh, f: &DensityField, c0: f64) -> Result<NeumannSolution> {
    if c0 <= 0.0 {
        return Err(Error::BadInput("c0 must be positive".into()));
    }
    if !mesh.is_connected() {
        return Err(Error::NotConnected);
    }
    if f.values.len() != mesh.n_vertices() {
        return Err(Error::BadInput("density length mismatch".into()));
    }
    let c_f = compute_cf(mesh, f)?;
    let masses = mesh.lumped_masses()?;
    let bmasses = mesh.boundary_masses();
    let bvol = mesh.boundary_volume();
    let n = mesh.n_vertices();

    // base right side at c0 = 1; the actual right side is bit-exactly
    // proportional to c0
    let mut rhs = vec![0.0; n];
    for i in 0..n {
        let base = -(c_f - f.values[i]) * masses[i] + bmasses[i];
        rhs[i] = c0 * base;
    }
    let imbalance: f64 = rhs.iter().sum();
    let compat_residual_pre = imbalance.abs() / (c0 * bvol);
    let compat_warning = compat_residual_pre > 1e-6;
    let mean = imbalance / n as f64;
    for v in &mut rhs {
        *v -= mean;
    }
    let compat_residual = rhs.iter().sum::<f64>().abs() / (c0 * bvol);

    let stiffness = assemble_stiffness(mesh)?;
    let u = solve_gauged(mesh, &stiffness, &rhs)?;
    let grad_u = gradient_field(mesh, &u)?;

    let mut flux_err: f64 = 0.0;
    for (bi, _) in mesh.boundary.iter().enumerate() {
        let eta = mesh.conormal(bi)?;
        let g = &grad_u[mesh.boundary_cell[bi]];
        flux_err = flux_err.max((mink_inner_unchecked(g, &eta) - c0).abs());
    }

    Ok(NeumannSolution {
        u,
        grad_u,
        c0,
        c_f,
        compat_residual,
        compat_residual_pre,
        compat_warning,
        boundary_flux_error: flux_err,
    })
}

/// Ambient per-cell gradients of a vertex field: the intrinsic gradient of
/// the linear interpolant, pushed forward to the tangent plane.
pub fn gradient_field(mesh: &SurfaceMesh, u: &[f64]) -> Result<Vec<MinkVec>> {
    (0..mesh.cells.len())
        .map(|ci| cell_gradient(mesh, ci, u))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::surface::mesh_from_parametric;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn disk_mesh(res: usize) -> (crate::surface::SurfaceMesh, StructuredGrid) {
        let s = corpus::flat_disk(1.0, res);
        mesh_from_parametric(&s, res).unwrap()
    }

    fn closed_form_disk_u(mesh: &SurfaceMesh) -> Vec<f64> {
        mesh.vertices
            .iter()
            .map(|p| {
                let r2 = p.coords[0] * p.coords[0] + p.coords[1] * p.coords[1];
                r2 / 2.0 - 0.25
            })
            .collect()
    }

    #[test]
    fn cf_flat_disk_zero_density() {
        let (mesh, _) = disk_mesh(32);
        let f = DensityField::zero(mesh.n_vertices());
        let cf = compute_cf(&mesh, &f).unwrap();
        // continuous value is 2 pi / pi = 2; the mesh value matches its own
        // discrete measures exactly
        assert_relative_eq!(
            cf,
            mesh.boundary_volume() / mesh.volume().unwrap(),
            epsilon = 1e-14
        );
        assert!((cf - 2.0).abs() < 0.01);
    }

    #[test]
    fn cf_is_affine_in_constant_density() {
        let (mesh, _) = disk_mesh(16);
        let beta = 0.37;
        let f0 = DensityField::zero(mesh.n_vertices());
        let fb = DensityField::custom(vec![beta; mesh.n_vertices()]);
        let c0 = compute_cf(&mesh, &f0).unwrap();
        let cb = compute_cf(&mesh, &fb).unwrap();
        assert_relative_eq!(cb, c0 + beta, epsilon = 1e-12);
    }

    #[test]
    fn cf_catenoid_matches_quadrature_oracle() {
        let (a, r0, r1) = (1.0, 0.5, 2.0);
        let s = corpus::elliptic_catenoid(a, r0, r1, 48).unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 48).unwrap();
        let f = DensityField::thm1(&s, &grid, 1e-6).unwrap();
        // maximal surface: f vanishes, c_f = perimeter / area with
        // perimeter = 2 pi (r0 + r1), area from the closed-form integrand
        let n = 40_000;
        let h = (r1 - r0) / n as f64;
        let g = |r: f64| r * r / (r * r + a * a).sqrt();
        let mut area = g(r0) + g(r1);
        for i in 1..n {
            area += if i % 2 == 1 { 4.0 } else { 2.0 } * g(r0 + i as f64 * h);
        }
        area *= h / 3.0 * 2.0 * PI;
        let oracle = 2.0 * PI * (r0 + r1) / area;
        let cf = compute_cf(&mesh, &f).unwrap();
        assert!((cf - oracle).abs() / oracle < 5e-3, "cf={cf} oracle={oracle}");
    }

    #[test]
    fn flat_disk_reproduces_closed_form() {
        let (mesh, _) = disk_mesh(64);
        let f = DensityField::zero(mesh.n_vertices());
        let sol = solve_neumann(&mesh, &f, 1.0).unwrap();
        assert!(sol.compat_residual < 1e-10, "{}", sol.compat_residual);
        assert!(sol.compat_residual_pre < 1e-10);
        assert!(!sol.compat_warning);

        let exact = closed_form_disk_u(&mesh);
        // align the gauge: compare after subtracting the discrete mean of
        // the exact solution
        let masses = mesh.lumped_masses().unwrap();
        let total: f64 = masses.iter().sum();
        let mean: f64 =
            exact.iter().zip(&masses).map(|(u, m)| u * m).sum::<f64>() / total;
        let max_err = sol
            .u
            .iter()
            .zip(&exact)
            .map(|(u, e)| (u - (e - mean)).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 5e-3, "max err {max_err}");
    }

    #[test]
    fn manufactured_solution_converges_at_order_two() {
        // u* = x^2 - y^2 is harmonic; Neumann data 2(x^2 - y^2) on |x| = 1
        let mut errors = Vec::new();
        for res in [16usize, 32, 64] {
            let (mesh, _) = disk_mesh(res);
            let source = vec![0.0; mesh.n_vertices()];
            let flux: Vec<f64> = mesh
                .vertices
                .iter()
                .map(|p| 2.0 * (p.coords[0] * p.coords[0] - p.coords[1] * p.coords[1]))
                .collect();
            let (u, _) = solve_weak(&mesh, &source, &flux).unwrap();
            let exact: Vec<f64> = mesh
                .vertices
                .iter()
                .map(|p| p.coords[0] * p.coords[0] - p.coords[1] * p.coords[1])
                .collect();
            let masses = mesh.lumped_masses().unwrap();
            let total: f64 = masses.iter().sum();
            let mean: f64 =
                exact.iter().zip(&masses).map(|(u, m)| u * m).sum::<f64>() / total;
            let max_err = u
                .iter()
                .zip(&exact)
                .map(|(u, e)| (u - (e - mean)).abs())
                .fold(0.0f64, f64::max);
            errors.push(max_err);
        }
        let order1 = (errors[0] / errors[1]).log2();
        let order2 = (errors[1] / errors[2]).log2();
        assert!(
            order1 > 1.8 && order2 > 1.8,
            "orders {order1:.2}, {order2:.2}, errors {errors:?}"
        );
    }

    #[test]
    fn stiffness_kernel_is_exactly_the_constants() {
        let (mesh, _) = disk_mesh(16);
        let k = assemble_stiffness(&mesh).unwrap();
        let ones = vec![1.0; mesh.n_vertices()];
        let mut out = vec![0.0; mesh.n_vertices()];
        k.matvec(&ones, &mut out);
        let scale = k
            .diagonal()
            .iter()
            .cloned()
            .fold(0.0f64, f64::max);
        for v in out {
            assert!(v.abs() < 1e-10 * scale);
        }
    }

    #[test]
    fn solution_scales_linearly_in_c0() {
        let (mesh, _) = disk_mesh(24);
        let f = DensityField::zero(mesh.n_vertices());
        let s1 = solve_neumann(&mesh, &f, 1.0).unwrap();
        let s2 = solve_neumann(&mesh, &f, 2.0).unwrap();
        for (a, b) in s1.u.iter().zip(&s2.u) {
            assert_relative_eq!(2.0 * a, *b, epsilon = 1e-12);
        }
    }

    #[test]
    fn gradient_field_matches_closed_form_and_boost_equivariance() {
        let (mesh, _) = disk_mesh(32);
        let f = DensityField::zero(mesh.n_vertices());
        let sol = solve_neumann(&mesh, &f, 1.0).unwrap();
        // grad u ~ position at the barycenter
        let mut worst: f64 = 0.0;
        for (ci, cell) in mesh.cells.iter().enumerate() {
            let bary_x: f64 = cell.iter().map(|&v| mesh.vertices[v].coords[0]).sum::<f64>() / 3.0;
            let bary_y: f64 = cell.iter().map(|&v| mesh.vertices[v].coords[1]).sum::<f64>() / 3.0;
            let g = &sol.grad_u[ci];
            worst = worst.max((g.coords[0] - bary_x).hypot(g.coords[1] - bary_y));
        }
        assert!(worst < 0.1, "gradient deviation {worst}");

        // constant field has zero gradient
        let c = vec![3.25; mesh.n_vertices()];
        for g in gradient_field(&mesh, &c).unwrap() {
            assert!(g.norm_euclidean() < 1e-12);
        }

        // boost equivariance: same intrinsic data, mapped gradients
        let beta = 0.7;
        let boosted_surface = corpus::boosted_disk(beta, 1.0, 32);
        let (bmesh, _) = mesh_from_parametric(&boosted_surface, 32).unwrap();
        let bf = DensityField::zero(bmesh.n_vertices());
        let bsol = solve_neumann(&bmesh, &bf, 1.0).unwrap();
        let boost = crate::mink::AmbientMap::boost(mesh.sig, 0, 0, beta).unwrap();
        for (g_flat, g_boost) in sol.grad_u.iter().zip(&bsol.grad_u) {
            let mapped = boost.apply(g_flat);
            for (a, b) in mapped.coords.iter().zip(&g_boost.coords) {
                assert_relative_eq!(a, b, epsilon = 1e-8);
            }
        }
    }

    #[test]
    fn gradient_norm_below_c0_on_most_of_the_disk() {
        let (mesh, _) = disk_mesh(32);
        let f = DensityField::zero(mesh.n_vertices());
        let sol = solve_neumann(&mesh, &f, 1.0).unwrap();
        let mut inside_area = 0.0;
        let mut total = 0.0;
        for ci in 0..mesh.cells.len() {
            let a = mesh.cell_area(ci).unwrap();
            total += a;
            if sol.grad_u[ci].mink_norm() < sol.c0 {
                inside_area += a;
            }
        }
        assert!(inside_area / total > 0.5, "U covers {}", inside_area / total);
    }

    #[test]
    fn catenoid_solve_satisfies_green_identity() {
        let s = corpus::elliptic_catenoid(1.0, 0.5, 2.0, 32).unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 32).unwrap();
        let f = DensityField::thm1(&s, &grid, 1e-6).unwrap();
        let sol = solve_neumann(&mesh, &f, 1.0).unwrap();
        assert!(sol.compat_residual < 1e-10);
        assert!(sol.compat_residual_pre < 1e-10);
    }

    #[test]
    fn disconnected_mesh_is_rejected() {
        use crate::mink::{MinkVec, Signature};
        let sig = Signature::new(2, 2).unwrap();
        let v = |x: f64, y: f64| MinkVec::new(vec![x, y, 0.0, 0.0], sig).unwrap();
        let vertices = vec![
            v(0.0, 0.0),
            v(1.0, 0.0),
            v(0.0, 1.0),
            v(10.0, 10.0),
            v(11.0, 10.0),
            v(10.0, 11.0),
        ];
        let cells = vec![[0, 1, 2], [3, 4, 5]];
        let mesh = SurfaceMesh::new(sig, vertices, cells).unwrap();
        let f = DensityField::zero(6);
        assert!(matches!(
            solve_neumann(&mesh, &f, 1.0),
            Err(Error::NotConnected)
        ));
    }

    #[test]
    fn boundary_flux_error_shrinks_under_refinement() {
        let mut errs = Vec::new();
        for res in [16usize, 32] {
            let (mesh, _) = disk_mesh(res);
            let f = DensityField::zero(mesh.n_vertices());
            let sol = solve_neumann(&mesh, &f, 1.0).unwrap();
            errs.push(sol.boundary_flux_error);
        }
        assert!(errs[1] < errs[0]);
        assert!(errs[1] < 0.05, "flux error {}", errs[1]);
    }

    #[test]
    fn thm2_density_reduces_to_h_norm_at_unit_slope() {
        let s = corpus::sphere_cap(2.0, 1.0, 24).unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 24).unwrap();
        let f = DensityField::thm2(&s, &grid, 1.0).unwrap();
        assert_eq!(f.values.len(), mesh.n_vertices());
        // |H| = 2/R = 1 and H purely spatial, so the density is |H|
        for v in &f.values {
            assert_relative_eq!(*v, 1.0, max_relative = 1e-6);
        }
    }
}
