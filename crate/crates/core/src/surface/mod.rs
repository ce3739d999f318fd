//! Compact spacelike surfaces: a smooth parametric backend (the accuracy
//! reference) and a triangle mesh backend (what the solver runs on), with a
//! structured-grid bridge between the two.

pub mod geodesic;
pub mod io;
pub mod mesh;
pub mod parametric;
pub mod quad;

pub use geodesic::{geodesic_ball, BallMeasures};
pub use mesh::{cell_gradient, mesh_from_parametric, StructuredGrid, SurfaceMesh};
pub use parametric::{
    Domain, FiniteDifferenceImmersion, Immersion, Jet2, Metric2, ParametricSurface,
    TransformedImmersion, DEFAULT_TAU_CAP,
};

use crate::mink::MinkVec;

/// Pointwise curvature data: second fundamental form in an orthonormal
/// tangent frame (entries 11, 12, 22), mean curvature vector with its
/// spatial/temporal split, and the Gauss curvature where available.
#[derive(Debug, Clone)]
pub struct CurvatureData {
    pub h: MinkVec,
    pub ii: [MinkVec; 3],
    pub h_s_norm: f64,
    pub h_t_norm: f64,
    pub h_mink_sq: f64,
    pub gauss_k: Option<f64>,
}

/// Pointwise slope samples and their maximum.
#[derive(Debug, Clone)]
pub struct SlopeField {
    pub samples: Vec<f64>,
    pub tau: f64,
    /// True once one refinement changed the max by < 1e-6 relative.
    pub stable: bool,
    pub rounds: usize,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus;
    use crate::mink::AmbientMap;
    use approx::assert_relative_eq;
    use std::collections::HashMap;
    use std::f64::consts::PI;

    fn params(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    fn flat_disk() -> ParametricSurface {
        corpus::by_name("flat-disk", &HashMap::new(), 32).unwrap()
    }

    fn catenoid(a: f64, r0: f64, r1: f64) -> ParametricSurface {
        corpus::by_name(
            "elliptic-catenoid",
            &params(&[("a", a), ("r0", r0), ("r1", r1)]),
            32,
        )
        .unwrap()
    }

    #[test]
    fn flat_disk_metric_is_polar_flat() {
        let s = flat_disk();
        let m = s.metric_at(0.5, 1.0).unwrap();
        assert_relative_eq!(m.e, 1.0, epsilon = 1e-14);
        assert_relative_eq!(m.f, 0.0, epsilon = 1e-14);
        assert_relative_eq!(m.g, 0.25, epsilon = 1e-14);
    }

    #[test]
    fn boosted_disk_metric_is_isometric_to_flat() {
        let s = corpus::by_name("boosted-disk", &params(&[("beta", 0.8)]), 32).unwrap();
        for (u, v) in [(0.3, 0.2), (0.7, 2.0), (0.95, 4.5)] {
            let m = s.metric_at(u, v).unwrap();
            assert_relative_eq!(m.e, 1.0, epsilon = 1e-12);
            assert_relative_eq!(m.f, 0.0, epsilon = 1e-12);
            assert_relative_eq!(m.g, u * u, epsilon = 1e-12);
        }
    }

    #[test]
    fn catenoid_metric_matches_closed_form() {
        let a = 1.0;
        let s = catenoid(a, 0.5, 2.0);
        for (r, th) in [(0.6, 0.4), (1.0, 3.0), (1.9, 5.5)] {
            let m = s.metric_at(r, th).unwrap();
            assert_relative_eq!(m.e, 1.0 - a * a / (r * r + a * a), max_relative = 1e-12);
            assert_relative_eq!(m.f, 0.0, epsilon = 1e-12);
            assert_relative_eq!(m.g, r * r, max_relative = 1e-12);
        }
    }

    #[test]
    fn flat_disk_curvature_vanishes() {
        let s = flat_disk();
        let c = s.curvature_at(0.5, 1.2).unwrap();
        assert!(c.h.norm_euclidean() < 1e-12);
        for ii in &c.ii {
            assert!(ii.norm_euclidean() < 1e-12);
        }
        assert!(c.gauss_k.unwrap().abs() < 1e-8);
    }

    #[test]
    fn catenoid_is_maximal() {
        let s = catenoid(1.0, 0.5, 2.0);
        for (r, th) in [(0.55, 0.1), (0.8, 2.2), (1.4, 4.0), (1.95, 6.0)] {
            let c = s.curvature_at(r, th).unwrap();
            assert!(
                c.h.norm_euclidean() < 1e-8,
                "H = {:?} at r={r}",
                c.h.coords
            );
        }
    }

    #[test]
    fn sphere_mean_curvature_is_two_over_radius() {
        let radius = 2.0;
        let s = corpus::by_name(
            "sphere-cap",
            &params(&[("radius", radius), ("alpha", 1.2)]),
            32,
        )
        .unwrap();
        for (th, ph) in [(0.4, 0.3), (0.8, 2.0), (1.1, 5.0)] {
            let c = s.curvature_at(th, ph).unwrap();
            assert_relative_eq!(
                c.h.norm_euclidean(),
                2.0 / radius,
                max_relative = 1e-8
            );
            // H is spatial here
            assert!(c.h_t_norm < 1e-12);
            assert_relative_eq!(c.gauss_k.unwrap(), 1.0 / (radius * radius), max_relative = 1e-6);
        }
    }

    #[test]
    fn trace_of_ii_equals_h() {
        let s = catenoid(1.0, 0.5, 2.0);
        let c = s.curvature_at(1.3, 0.7).unwrap();
        let trace = c.ii[0].add(&c.ii[2]);
        for (a, b) in trace.coords.iter().zip(&c.h.coords) {
            assert_relative_eq!(a, b, epsilon = 1e-10);
        }
    }

    #[test]
    fn gauss_equation_agrees_with_brioschi() {
        let s = catenoid(1.0, 0.5, 2.0);
        for (r, th) in [(0.6, 1.0), (1.2, 2.5), (1.8, 4.8)] {
            let k_int = s.brioschi_k(r, th).unwrap();
            let k_ext = s.gauss_equation_k(r, th).unwrap();
            assert_relative_eq!(k_int, k_ext, max_relative = 1e-6, epsilon = 1e-9);
        }
    }

    #[test]
    fn catenoid_gauss_curvature_nonnegative() {
        let s = catenoid(1.0, 0.5, 2.0);
        let (nu, nv) = (24, 24);
        for i in 0..nu {
            for j in 0..nv {
                let r = 0.5 + (i as f64 + 0.5) / nu as f64 * 1.5;
                let th = (j as f64 + 0.5) / nv as f64 * 2.0 * PI;
                assert!(s.brioschi_k(r, th).unwrap() >= -1e-8);
            }
        }
    }

    #[test]
    fn slope_fields_match_closed_forms() {
        let flat = flat_disk();
        let f = flat.slope_field().unwrap();
        assert!(f.stable);
        assert_relative_eq!(f.tau, 1.0, epsilon = 1e-10);

        let beta: f64 = 0.8;
        let boosted = corpus::by_name("boosted-disk", &params(&[("beta", beta)]), 32).unwrap();
        let fb = boosted.slope_field().unwrap();
        assert_relative_eq!(fb.tau, beta.cosh(), max_relative = 1e-9);
        assert_relative_eq!(fb.tau, 1.3374349463048447, max_relative = 1e-6);

        let (a, r0) = (1.0f64, 0.5f64);
        let cat = catenoid(a, r0, 2.0);
        let fc = cat.slope_field().unwrap();
        assert_relative_eq!(
            fc.tau,
            (1.0 + a * a / (r0 * r0)).sqrt(),
            max_relative = 1e-9
        );
    }

    #[test]
    fn unit_tangent_split_identity_holds() {
        // |pi_t(v)|^2 = |pi_s(v)|^2 - |v|^2 for unit tangent vectors
        let s = catenoid(1.0, 0.5, 2.0);
        for (r, th) in [(0.7, 0.3), (1.5, 2.0)] {
            let j = s.jet(r, th);
            let m = s.metric_at(r, th).unwrap();
            let t = j.fu.scale(1.0 / m.e.sqrt());
            assert_relative_eq!(
                t.norm_t().powi(2),
                t.norm_s().powi(2) - 1.0,
                epsilon = 1e-10
            );
        }
    }

    #[test]
    fn disk_measures_and_boost_invariance() {
        let flat = flat_disk();
        assert_relative_eq!(flat.volume(4).unwrap(), PI, max_relative = 1e-10);
        assert_relative_eq!(
            flat.boundary_volume(4).unwrap(),
            2.0 * PI,
            max_relative = 1e-10
        );

        let boosted = corpus::by_name("boosted-disk", &params(&[("beta", 1.1)]), 32).unwrap();
        assert_relative_eq!(boosted.volume(4).unwrap(), PI, max_relative = 1e-10);
        assert_relative_eq!(
            boosted.boundary_volume(4).unwrap(),
            2.0 * PI,
            max_relative = 1e-10
        );
        // but the slope is not boost invariant
        assert!(boosted.slope_field().unwrap().tau > 1.0 + 1e-6);
    }

    #[test]
    fn block_isometries_preserve_measures() {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(3);
        let cat = catenoid(1.0, 0.5, 2.0);
        let vol = cat.volume(4).unwrap();
        let bvol = cat.boundary_volume(4).unwrap();
        let sig = cat.sig();
        let rot = AmbientMap::block(
            sig,
            crate::mink::tests::random_orthogonal(sig.space_dim, &mut rng),
            crate::mink::tests::random_orthogonal(sig.time_dim, &mut rng),
        )
        .unwrap();
        let moved = cat.transformed(rot);
        assert_relative_eq!(moved.volume(4).unwrap(), vol, max_relative = 1e-9);
        assert_relative_eq!(moved.boundary_volume(4).unwrap(), bvol, max_relative = 1e-9);
    }

    #[test]
    fn catenoid_volume_matches_quadrature_oracle() {
        // A = 2 pi * int_{r0}^{r1} r^2 / sqrt(r^2 + a^2) dr, Simpson oracle
        let (a, r0, r1) = (1.0, 0.5, 2.0);
        let s = catenoid(a, r0, r1);
        let n = 20_000;
        let h = (r1 - r0) / n as f64;
        let f = |r: f64| r * r / (r * r + a * a).sqrt();
        let mut simpson = f(r0) + f(r1);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            simpson += w * f(r0 + i as f64 * h);
        }
        simpson *= h / 3.0 * 2.0 * PI;
        assert_relative_eq!(s.volume(4).unwrap(), simpson, max_relative = 1e-9);
        // boundary circles have induced length 2 pi r
        assert_relative_eq!(
            s.boundary_volume(4).unwrap(),
            2.0 * PI * (r0 + r1),
            max_relative = 1e-10
        );
    }

    #[test]
    fn mesh_volume_close_to_smooth_and_converges() {
        let flat = flat_disk();
        let (mesh32, _) = mesh_from_parametric(&flat, 32).unwrap();
        let v32 = mesh32.volume().unwrap();
        assert!((v32 - PI).abs() / PI < 0.005, "v32 = {v32}");

        let cat = catenoid(1.0, 0.5, 2.0);
        let exact = cat.volume(6).unwrap();
        let exact_b = cat.boundary_volume(6).unwrap();
        let (m1, _) = mesh_from_parametric(&cat, 16).unwrap();
        let (m2, _) = mesh_from_parametric(&cat, 32).unwrap();
        let e1 = (m1.volume().unwrap() - exact).abs();
        let e2 = (m2.volume().unwrap() - exact).abs();
        let order = (e1 / e2).log2();
        assert!(order > 1.8, "volume convergence order {order}");
        let b1 = (m1.boundary_volume() - exact_b).abs();
        let b2 = (m2.boundary_volume() - exact_b).abs();
        let order_b = (b1 / b2).log2();
        assert!(order_b > 1.8, "boundary convergence order {order_b}");
    }

    #[test]
    fn timelike_codimension_surfaces_have_timelike_h() {
        // m = 0 forces <H,H> <= 0 up to rounding on every sample
        let mut params = HashMap::new();
        params.insert("c11".to_string(), 0.4);
        let surfaces = vec![
            flat_disk(),
            corpus::by_name("boosted-disk", &params_map(&[("beta", 0.9)]), 16).unwrap(),
            catenoid(1.0, 0.5, 2.0),
            corpus::by_name("maximal-graph", &params, 16).unwrap(),
        ];
        for s in surfaces {
            assert_eq!(s.dims().1, 0);
            let (_, grid) = mesh_from_parametric(&s, 12).unwrap();
            for &(u, v) in &grid.params {
                let ue = u.max(grid.u_range.0 + 0.05 * grid.du());
                let c = s.mean_curvature_data(ue, v).unwrap();
                assert!(c.h_mink_sq <= 1e-8, "{}: <H,H> = {}", s.name, c.h_mink_sq);
            }
        }
    }

    fn params_map(pairs: &[(&str, f64)]) -> HashMap<String, f64> {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn periodic_seam_has_no_boundary_and_disk_fans_close() {
        let cat = catenoid(1.0, 0.5, 2.0);
        let (mesh, _) = mesh_from_parametric(&cat, 16).unwrap();
        // annulus: boundary edges live only on the two circles
        assert_eq!(mesh.boundary.len(), 2 * 32);
        assert!(mesh.is_connected());

        let flat = flat_disk();
        let (dmesh, grid) = mesh_from_parametric(&flat, 16).unwrap();
        assert_eq!(dmesh.boundary.len(), 32);
        assert_eq!(dmesh.n_vertices(), 1 + 16 * 32);
        assert_eq!(grid.vertex(0, 5), 0);
    }

    #[test]
    fn mesh_slope_matches_parametric() {
        let beta: f64 = 0.8;
        let boosted =
            corpus::by_name("boosted-disk", &params(&[("beta", beta)]), 16).unwrap();
        let (mesh, _) = mesh_from_parametric(&boosted, 16).unwrap();
        assert_relative_eq!(mesh.slope().unwrap(), beta.cosh(), max_relative = 1e-9);
    }

    #[test]
    fn mesh_vertex_mean_curvature_approximates_smooth() {
        let radius = 1.0;
        let s = corpus::by_name(
            "sphere-cap",
            &params(&[("radius", radius), ("alpha", 1.0)]),
            24,
        )
        .unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 24).unwrap();
        let rings = mesh.vertex_rings();
        let onb = mesh.is_boundary_vertex();
        // a mid-cap vertex
        let target = grid.vertex(12, 5);
        assert!(!onb[target]);
        let h = mesh.vertex_mean_curvature(target, &rings).unwrap();
        assert_relative_eq!(h.norm_euclidean(), 2.0 / radius, max_relative = 0.05);
        // boundary vertices refuse
        let bv = grid.vertex(24, 0);
        assert!(mesh.vertex_mean_curvature(bv, &rings).is_err());
    }

    #[test]
    fn gauss_bonnet_on_disk_type_meshes() {
        // smooth K at interior vertices + discrete boundary turning ~ 2 pi
        let s = corpus::by_name(
            "sphere-cap",
            &params(&[("radius", 1.0), ("alpha", 0.9)]),
            32,
        )
        .unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 32).unwrap();
        let masses = mesh.lumped_masses().unwrap();
        let onb = mesh.is_boundary_vertex();
        let mut total_k = 0.0;
        for v in 0..mesh.n_vertices() {
            if onb[v] {
                continue;
            }
            let (u, vv) = grid.params[v];
            let u_eval = u.max(1e-3);
            total_k += s.brioschi_k(u_eval, vv).unwrap() * masses[v];
        }
        let turning = mesh.boundary_turning().unwrap();
        let defect = (total_k + turning - 2.0 * PI).abs() / (2.0 * PI);
        assert!(defect < 0.02, "gauss-bonnet defect {defect}");
    }

    #[test]
    fn angle_defect_curvature_on_sphere() {
        let s = corpus::by_name(
            "sphere-cap",
            &params(&[("radius", 1.0), ("alpha", 1.2)]),
            40,
        )
        .unwrap();
        let (mesh, grid) = mesh_from_parametric(&s, 40).unwrap();
        let target = grid.vertex(20, 7);
        let k = mesh.angle_defect_k(target).unwrap();
        assert_relative_eq!(k, 1.0, max_relative = 0.05);
    }

    #[test]
    fn minkmesh_roundtrip() {
        let cat = catenoid(1.0, 0.5, 2.0);
        let (mesh, _) = mesh_from_parametric(&cat, 8).unwrap();
        let mut buf = Vec::new();
        io::write_minkmesh(&mesh, &mut buf).unwrap();
        let back = io::read_minkmesh(std::io::Cursor::new(&buf)).unwrap();
        assert_eq!(back.n_vertices(), mesh.n_vertices());
        assert_eq!(back.cells, mesh.cells);
        assert_eq!(back.boundary.len(), mesh.boundary.len());
        assert_relative_eq!(
            back.volume().unwrap(),
            mesh.volume().unwrap(),
            max_relative = 1e-15
        );
    }

    #[test]
    fn non_spacelike_graph_is_rejected() {
        let bad = corpus::maximal_graph(&[(1, 0, 1.2)], (-1.0, 1.0), (-1.0, 1.0), 8);
        assert!(bad.is_err());
    }

    #[test]
    fn finite_difference_immersion_matches_analytic() {
        let s = catenoid(1.0, 0.5, 2.0);
        let fd = ParametricSurface {
            immersion: Box::new(FiniteDifferenceImmersion {
                sig: s.sig(),
                position: |r: f64, th: f64| {
                    vec![r * th.cos(), r * th.sin(), (r / 1.0f64).asinh(), 0.0]
                },
                step: 1e-5 * 1.5,
            }),
            domain: s.domain,
            grid: s.grid,
            name: "fd-catenoid".into(),
        };
        let ja = s.jet(1.1, 0.8);
        let jf = fd.jet(1.1, 0.8);
        for (a, b) in ja.fu.coords.iter().zip(&jf.fu.coords) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
        for (a, b) in ja.fvv.coords.iter().zip(&jf.fvv.coords) {
            assert_relative_eq!(a, b, epsilon = 1e-4);
        }
    }

    #[test]
    fn geodesic_ball_on_sphere_matches_closed_form() {
        let s = corpus::by_name(
            "sphere-cap",
            &params(&[("radius", 1.0), ("alpha", 1.4)]),
            32,
        )
        .unwrap();
        let rho = 0.3;
        let ball = geodesic_ball(&s, (0.7, 1.0), rho, 64, 200).unwrap();
        let exact_area = 2.0 * PI * (1.0 - rho.cos());
        let exact_len = 2.0 * PI * rho.sin();
        assert_relative_eq!(ball.area, exact_area, max_relative = 1e-4);
        assert_relative_eq!(ball.boundary_length, exact_len, max_relative = 1e-4);
        assert_relative_eq!(ball.total_curvature, exact_area, max_relative = 1e-3);
    }

    #[test]
    fn geodesic_ball_outside_domain_errors() {
        let s = flat_disk();
        let res = geodesic_ball(&s, (0.9, 0.0), 0.3, 16, 50);
        assert!(matches!(res, Err(crate::Error::RadiusTooLarge { .. })));
    }

    #[test]
    fn steep_but_spacelike_graph_is_accepted() {
        let g = corpus::maximal_graph(&[(1, 0, 0.999999)], (-1.0, 1.0), (-1.0, 1.0), 8);
        assert!(g.is_ok());
    }
}
