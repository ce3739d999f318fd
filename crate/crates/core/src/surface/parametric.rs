//! Smooth backend: two-dimensional immersions with analytic first and
//! second derivatives, sampled on a structured parameter grid.
//!
//! The parameter domain is a rectangle `[u0,u1] x [v0,v1]`, optionally
//! periodic in `v` and optionally with the whole edge `u = u0` collapsing to
//! a single point (polar charts of disks and caps). The chart is singular
//! on a collapsed edge, so derivative-based quantities are only ever
//! evaluated at `u > u0` there; quadrature nodes and grid samples stay in
//! the interior of each cell, which avoids the singular line.

use crate::error::{Error, Result};
use crate::linalg::{self, NormalSplit, SpacelikeSubspace};
use crate::mink::{mink_inner_unchecked, AmbientMap, MinkVec, Signature};
use crate::surface::quad::gauss_legendre;
use crate::surface::{CurvatureData, SlopeField};
use nalgebra::Matrix2;

/// Position with first and second partial derivatives of an immersion.
#[derive(Debug, Clone)]
pub struct Jet2 {
    pub f: MinkVec,
    pub fu: MinkVec,
    pub fv: MinkVec,
    pub fuu: MinkVec,
    pub fuv: MinkVec,
    pub fvv: MinkVec,
}

/// A smooth map from the parameter rectangle into R^{p,q}, evaluated
/// together with its first and second partials.
pub trait Immersion: Send + Sync {
    fn sig(&self) -> Signature;
    fn jet(&self, u: f64, v: f64) -> Jet2;
}

/// Parameter rectangle with periodicity and collapse flags.
#[derive(Debug, Clone, Copy)]
pub struct Domain {
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    pub periodic_v: bool,
    /// The edge u = u0 maps to a single ambient point (disk center, sphere
    /// pole). Requires `periodic_v`.
    pub collapse_u_min: bool,
}

impl Domain {
    pub fn rectangle(u_range: (f64, f64), v_range: (f64, f64)) -> Self {
        Domain {
            u_range,
            v_range,
            periodic_v: false,
            collapse_u_min: false,
        }
    }

    pub fn annulus(u_range: (f64, f64), v_range: (f64, f64)) -> Self {
        Domain {
            u_range,
            v_range,
            periodic_v: true,
            collapse_u_min: false,
        }
    }

    pub fn disk(u_max: f64, v_range: (f64, f64)) -> Self {
        Domain {
            u_range: (0.0, u_max),
            v_range,
            periodic_v: true,
            collapse_u_min: true,
        }
    }

    pub fn u_span(&self) -> f64 {
        self.u_range.1 - self.u_range.0
    }

    pub fn v_span(&self) -> f64 {
        self.v_range.1 - self.v_range.0
    }
}

/// Central-difference fallback wrapping a position-only map. Used for
/// user-supplied immersions without analytic derivatives; the built-in
/// corpus always provides exact jets.
pub struct FiniteDifferenceImmersion<F: Fn(f64, f64) -> Vec<f64> + Send + Sync> {
    pub sig: Signature,
    pub position: F,
    pub step: f64,
}

impl<F: Fn(f64, f64) -> Vec<f64> + Send + Sync> Immersion for FiniteDifferenceImmersion<F> {
    fn sig(&self) -> Signature {
        self.sig
    }

    fn jet(&self, u: f64, v: f64) -> Jet2 {
        let h = self.step;
        let at = |uu: f64, vv: f64| MinkVec::new((self.position)(uu, vv), self.sig).unwrap();
        let f = at(u, v);
        let fpu = at(u + h, v);
        let fmu = at(u - h, v);
        let fpv = at(u, v + h);
        let fmv = at(u, v - h);
        let fu = fpu.sub(&fmu).scale(0.5 / h);
        let fv = fpv.sub(&fmv).scale(0.5 / h);
        let fuu = fpu.add(&fmu).axpy(-2.0, &f).scale(1.0 / (h * h));
        let fvv = fpv.add(&fmv).axpy(-2.0, &f).scale(1.0 / (h * h));
        let fuv = at(u + h, v + h)
            .sub(&at(u + h, v - h))
            .sub(&at(u - h, v + h))
            .add(&at(u - h, v - h))
            .scale(0.25 / (h * h));
        Jet2 {
            f,
            fu,
            fv,
            fuu,
            fuv,
            fvv,
        }
    }
}

/// Applies an ambient linear map to another immersion; derivatives transform
/// linearly, so the jet is just mapped through.
pub struct TransformedImmersion {
    pub inner: Box<dyn Immersion>,
    pub map: AmbientMap,
}

impl Immersion for TransformedImmersion {
    fn sig(&self) -> Signature {
        self.map.sig
    }

    fn jet(&self, u: f64, v: f64) -> Jet2 {
        let j = self.inner.jet(u, v);
        Jet2 {
            f: self.map.apply(&j.f),
            fu: self.map.apply(&j.fu),
            fv: self.map.apply(&j.fv),
            fuu: self.map.apply(&j.fuu),
            fuv: self.map.apply(&j.fuv),
            fvv: self.map.apply(&j.fvv),
        }
    }
}

/// Default cap on the pointwise slope; surfaces degenerating toward null
/// fail loudly instead of producing huge constants.
pub const DEFAULT_TAU_CAP: f64 = 1e3;

/// A compact spacelike surface given by an immersion over a structured grid.
pub struct ParametricSurface {
    pub immersion: Box<dyn Immersion>,
    pub domain: Domain,
    /// Grid resolution per axis (u cells, v cells).
    pub grid: (usize, usize),
    pub name: String,
}

/// First fundamental form packed as (E, F, G).
#[derive(Debug, Clone, Copy)]
pub struct Metric2 {
    pub e: f64,
    pub f: f64,
    pub g: f64,
}

impl Metric2 {
    pub fn det(&self) -> f64 {
        self.e * self.g - self.f * self.f
    }

    pub fn matrix(&self) -> Matrix2<f64> {
        Matrix2::new(self.e, self.f, self.f, self.g)
    }

    pub fn inverse(&self) -> Matrix2<f64> {
        let d = self.det();
        Matrix2::new(self.g / d, -self.f / d, -self.f / d, self.e / d)
    }

    pub fn is_spd(&self) -> bool {
        self.e > 0.0 && self.det() > 0.0
    }
}

impl ParametricSurface {
    pub fn sig(&self) -> Signature {
        self.immersion.sig()
    }

    pub fn jet(&self, u: f64, v: f64) -> Jet2 {
        self.immersion.jet(u, v)
    }

    pub fn position(&self, u: f64, v: f64) -> MinkVec {
        self.immersion.jet(u, v).f
    }

    /// Intrinsic dimension n = 2 and the codimension split (m, k).
    pub fn dims(&self) -> (usize, usize, usize) {
        let s = self.sig();
        (2, s.space_dim - 2, s.time_dim)
    }

    /// Induced metric at a parameter point; errors if not SPD.
    pub fn metric_at(&self, u: f64, v: f64) -> Result<Metric2> {
        let j = self.jet(u, v);
        let m = Metric2 {
            e: mink_inner_unchecked(&j.fu, &j.fu),
            f: mink_inner_unchecked(&j.fu, &j.fv),
            g: mink_inner_unchecked(&j.fv, &j.fv),
        };
        if !m.is_spd() {
            return Err(Error::NotSpacelike(format!(
                "induced metric not SPD at ({u}, {v}): E={:.3e} det={:.3e}",
                m.e,
                m.det()
            )));
        }
        Ok(m)
    }

    /// Analytic first derivatives of the metric entries:
    /// (E_u, E_v, F_u, F_v, G_u, G_v), from second derivatives of the jet.
    pub fn metric_derivatives(&self, u: f64, v: f64) -> [f64; 6] {
        let j = self.jet(u, v);
        let ip = mink_inner_unchecked;
        [
            2.0 * ip(&j.fuu, &j.fu),
            2.0 * ip(&j.fuv, &j.fu),
            ip(&j.fuu, &j.fv) + ip(&j.fu, &j.fuv),
            ip(&j.fuv, &j.fv) + ip(&j.fu, &j.fvv),
            2.0 * ip(&j.fuv, &j.fv),
            2.0 * ip(&j.fvv, &j.fv),
        ]
    }

    /// Christoffel symbols of the induced metric, `gamma[c][a][b]` = Gamma^c_ab.
    pub fn christoffels(&self, u: f64, v: f64) -> Result<[[[f64; 2]; 2]; 2]> {
        let m = self.metric_at(u, v)?;
        let [eu, ev, fu, fv, gu, gv] = self.metric_derivatives(u, v);
        let inv = m.inverse();
        // dg[a][b][c] = d_c g_ab
        let dg = [
            [[eu, ev], [fu, fv]],
            [[fu, fv], [gu, gv]],
        ];
        let mut gamma = [[[0.0; 2]; 2]; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    let mut s = 0.0;
                    for d in 0..2 {
                        s += inv[(c, d)] * (dg[a][d][b] + dg[b][d][a] - dg[a][b][d]);
                    }
                    gamma[c][a][b] = 0.5 * s;
                }
            }
        }
        Ok(gamma)
    }

    /// Tangent plane as a spacelike subspace.
    pub fn tangent_subspace(&self, u: f64, v: f64) -> Result<SpacelikeSubspace> {
        let j = self.jet(u, v);
        SpacelikeSubspace::new(vec![j.fu, j.fv]).map_err(|e| match e {
            Error::NotSpacelike(_) => {
                Error::NotSpacelike(format!("tangent plane at ({u}, {v}) is not spacelike"))
            }
            other => other,
        })
    }

    /// Orthonormal tangent frame by Gram-Schmidt on (F_u, F_v):
    /// returns (R, [e1, e2]) with e_alpha = sum_a R[(a, alpha)] F_a.
    pub fn orthonormal_frame(&self, u: f64, v: f64) -> Result<(Matrix2<f64>, [MinkVec; 2])> {
        let j = self.jet(u, v);
        let m = self.metric_at(u, v)?;
        let s1 = 1.0 / m.e.sqrt();
        let w = m.g - m.f * m.f / m.e;
        if w <= 0.0 {
            return Err(Error::NotSpacelike(format!(
                "degenerate frame at ({u}, {v})"
            )));
        }
        let s2 = 1.0 / w.sqrt();
        // e1 = F_u / sqrt(E); e2 = (F_v - (F/E) F_u) / sqrt(G - F^2/E)
        let r = Matrix2::new(s1, -m.f / m.e * s2, 0.0, s2);
        let e1 = j.fu.scale(s1);
        let e2 = j.fv.axpy(-m.f / m.e, &j.fu).scale(s2);
        Ok((r, [e1, e2]))
    }

    /// Normal splitting of the normal space at a parameter point.
    pub fn normal_split_at(&self, u: f64, v: f64) -> Result<NormalSplit> {
        linalg::normal_split(&self.tangent_subspace(u, v)?)
    }

    /// Second fundamental form in coordinates: II_ab = normal part of F_ab,
    /// with the tangential part removed by a 2x2 metric solve.
    pub fn coordinate_ii(&self, u: f64, v: f64) -> Result<[MinkVec; 3]> {
        let j = self.jet(u, v);
        let m = self.metric_at(u, v)?;
        let det = m.det();
        let normal_part = |w: &MinkVec| {
            let b0 = mink_inner_unchecked(w, &j.fu);
            let b1 = mink_inner_unchecked(w, &j.fv);
            let a0 = (m.g * b0 - m.f * b1) / det;
            let a1 = (-m.f * b0 + m.e * b1) / det;
            w.axpy(-a0, &j.fu).axpy(-a1, &j.fv)
        };
        Ok([
            normal_part(&j.fuu),
            normal_part(&j.fuv),
            normal_part(&j.fvv),
        ])
    }

    /// Curvature data without the intrinsic Gauss curvature: II in the
    /// orthonormal tangent frame and the mean curvature with its split.
    pub fn mean_curvature_data(&self, u: f64, v: f64) -> Result<CurvatureData> {
        let (r, _) = self.orthonormal_frame(u, v)?;
        let [ii_uu, ii_uv, ii_vv] = self.coordinate_ii(u, v)?;

        // frame components: II(e_a, e_b) = R_ca R_db II_cd
        let comp = |a: usize, b: usize| -> MinkVec {
            let mut out = MinkVec::zero(self.sig());
            let coords = [[&ii_uu, &ii_uv], [&ii_uv, &ii_vv]];
            for c in 0..2 {
                for d in 0..2 {
                    out = out.axpy(r[(c, a)] * r[(d, b)], coords[c][d]);
                }
            }
            out
        };
        let ii11 = comp(0, 0);
        let ii12 = comp(0, 1);
        let ii22 = comp(1, 1);
        let h = ii11.add(&ii22);
        let h_mink_sq = h.mink_sq();
        Ok(CurvatureData {
            h_s_norm: h.norm_s(),
            h_t_norm: h.norm_t(),
            h_mink_sq,
            h,
            ii: [ii11, ii12, ii22],
            gauss_k: None,
        })
    }

    /// Full curvature data including the intrinsic Gauss curvature
    /// (Brioschi).
    pub fn curvature_at(&self, u: f64, v: f64) -> Result<CurvatureData> {
        let mut data = self.mean_curvature_data(u, v)?;
        data.gauss_k = Some(self.brioschi_k(u, v)?);
        Ok(data)
    }

    /// Extrinsic route to the Gauss curvature via the Gauss equation in a
    /// flat ambient space: K = <II_11, II_22> - <II_12, II_12>.
    pub fn gauss_equation_k(&self, u: f64, v: f64) -> Result<f64> {
        let c = self.curvature_at(u, v)?;
        Ok(mink_inner_unchecked(&c.ii[0], &c.ii[2])
            - mink_inner_unchecked(&c.ii[1], &c.ii[1]))
    }

    /// Intrinsic Gauss curvature by the Brioschi formula. First metric
    /// derivatives are analytic; the three second derivatives that Brioschi
    /// needs come from central differences of the analytic first derivatives.
    pub fn brioschi_k(&self, u: f64, v: f64) -> Result<f64> {
        let m = self.metric_at(u, v)?;
        let [eu, ev, fu, fv, gu, gv] = self.metric_derivatives(u, v);

        let hu = 1e-5 * self.domain.u_span().max(1e-6);
        let hv = 1e-5 * self.domain.v_span().max(1e-6);
        // keep the difference stencil inside the domain
        let uc = u
            .max(self.domain.u_range.0 + hu)
            .min(self.domain.u_range.1 - hu);
        let vc = if self.domain.periodic_v {
            v
        } else {
            v.max(self.domain.v_range.0 + hv)
                .min(self.domain.v_range.1 - hv)
        };

        let dmu_p = self.metric_derivatives(uc + hu, vc);
        let dmu_m = self.metric_derivatives(uc - hu, vc);
        let dmv_p = self.metric_derivatives(uc, vc + hv);
        let dmv_m = self.metric_derivatives(uc, vc - hv);

        let e_vv = (dmv_p[1] - dmv_m[1]) / (2.0 * hv); // d_v E_v
        let g_uu = (dmu_p[4] - dmu_m[4]) / (2.0 * hu); // d_u G_u
        let f_uv = (dmv_p[2] - dmv_m[2]) / (2.0 * hv); // d_v F_u

        let (e, f, g) = (m.e, m.f, m.g);
        let a = nalgebra::Matrix3::new(
            -0.5 * e_vv + f_uv - 0.5 * g_uu,
            0.5 * eu,
            fu - 0.5 * ev,
            fv - 0.5 * gu,
            e,
            f,
            0.5 * gv,
            f,
            g,
        );
        let b = nalgebra::Matrix3::new(
            0.0,
            0.5 * ev,
            0.5 * gu,
            0.5 * ev,
            e,
            f,
            0.5 * gu,
            f,
            g,
        );
        Ok((a.determinant() - b.determinant()) / m.det().powi(2))
    }

    /// Pointwise slope tau(x) of the tangent plane.
    pub fn slope_at(&self, u: f64, v: f64) -> Result<f64> {
        linalg::slope(&self.tangent_subspace(u, v)?)
    }

    /// Parameter samples used for pointwise fields: cell midpoints plus the
    /// non-collapsed, non-periodic domain edges. Avoids the singular chart
    /// line on collapsed domains.
    fn sample_params(&self, nu: usize, nv: usize) -> Vec<(f64, f64)> {
        let (u0, u1) = self.domain.u_range;
        let (v0, v1) = self.domain.v_range;
        let du = (u1 - u0) / nu as f64;
        let dv = (v1 - v0) / nv as f64;
        let mut us: Vec<f64> = (0..nu).map(|i| u0 + (i as f64 + 0.5) * du).collect();
        if !self.domain.collapse_u_min {
            us.push(u0);
        }
        us.push(u1);
        let mut vs: Vec<f64> = (0..nv).map(|j| v0 + (j as f64 + 0.5) * dv).collect();
        if !self.domain.periodic_v {
            vs.push(v0);
            vs.push(v1);
        }
        let mut out = Vec::with_capacity(us.len() * vs.len());
        for &u in &us {
            for &v in &vs {
                out.push((u, v));
            }
        }
        out
    }

    /// Slope field with the stability refinement: the grid max is accepted
    /// once one refinement changes it by less than 1e-6 relative (at most
    /// three rounds, after which `stable` is false).
    pub fn slope_field(&self) -> Result<SlopeField> {
        self.slope_field_capped(DEFAULT_TAU_CAP)
    }

    pub fn slope_field_capped(&self, tau_cap: f64) -> Result<SlopeField> {
        let (mut nu, mut nv) = self.grid;
        let mut samples = Vec::new();
        let mut tau = -1.0f64;
        let mut stable = false;
        let mut rounds = 0;
        for round in 0..4 {
            let params = self.sample_params(nu, nv);
            let mut new_samples = Vec::with_capacity(params.len());
            let mut new_tau = 1.0f64;
            for &(u, v) in &params {
                let t = self.slope_at(u, v)?;
                if t > tau_cap {
                    return Err(Error::SlopeCapExceeded {
                        tau: t,
                        cap: tau_cap,
                        location: format!("({u}, {v})"),
                    });
                }
                new_samples.push(t);
                new_tau = new_tau.max(t);
            }
            rounds = round + 1;
            if round > 0 && (new_tau - tau).abs() <= 1e-6 * tau.max(1.0) {
                samples = new_samples;
                tau = new_tau.max(tau);
                stable = true;
                break;
            }
            samples = new_samples;
            tau = new_tau;
            nu *= 2;
            nv *= 2;
        }
        Ok(SlopeField {
            samples,
            tau,
            stable,
            rounds,
        })
    }

    /// Intrinsic Riemannian volume by tensor-product Gauss-Legendre
    /// quadrature over the grid cells.
    pub fn volume(&self, order: usize) -> Result<f64> {
        let (nu, nv) = self.grid;
        let (nodes, weights) = gauss_legendre(order);
        let (u0, u1) = self.domain.u_range;
        let (v0, v1) = self.domain.v_range;
        let du = (u1 - u0) / nu as f64;
        let dv = (v1 - v0) / nv as f64;
        let mut total = 0.0;
        for i in 0..nu {
            for j in 0..nv {
                let uc = u0 + (i as f64 + 0.5) * du;
                let vc = v0 + (j as f64 + 0.5) * dv;
                let mut cell = 0.0;
                for (xa, wa) in nodes.iter().zip(weights) {
                    for (xb, wb) in nodes.iter().zip(weights) {
                        let u = uc + 0.5 * du * xa;
                        let v = vc + 0.5 * dv * xb;
                        let m = self.metric_at(u, v)?;
                        cell += wa * wb * m.det().sqrt();
                    }
                }
                total += cell * 0.25 * du * dv;
            }
        }
        Ok(total)
    }

    /// Volume of the boundary: 1-d quadrature of the Minkowski speed along
    /// every non-periodic, non-collapsed domain edge.
    pub fn boundary_volume(&self, order: usize) -> Result<f64> {
        let (nu, nv) = self.grid;
        let (nodes, weights) = gauss_legendre(order);
        let (u0, u1) = self.domain.u_range;
        let (v0, v1) = self.domain.v_range;
        let du = (u1 - u0) / nu as f64;
        let dv = (v1 - v0) / nv as f64;
        let mut total = 0.0;

        // edges of constant u: curve v -> F(u*, v), speed |F_v|
        let mut const_u_edges = vec![u1];
        if !self.domain.collapse_u_min {
            const_u_edges.push(u0);
        }
        for ue in const_u_edges {
            for j in 0..nv {
                let vc = v0 + (j as f64 + 0.5) * dv;
                let mut seg = 0.0;
                for (xb, wb) in nodes.iter().zip(weights) {
                    let v = vc + 0.5 * dv * xb;
                    let jet = self.jet(ue, v);
                    let speed_sq = mink_inner_unchecked(&jet.fv, &jet.fv);
                    if speed_sq <= 0.0 {
                        return Err(Error::NotSpacelike(format!(
                            "boundary curve not spacelike at ({ue}, {v})"
                        )));
                    }
                    seg += wb * speed_sq.sqrt();
                }
                total += seg * 0.5 * dv;
            }
        }

        // edges of constant v (only when not periodic): speed |F_u|
        if !self.domain.periodic_v {
            for ve in [v0, v1] {
                for i in 0..nu {
                    let uc = u0 + (i as f64 + 0.5) * du;
                    let mut seg = 0.0;
                    for (xa, wa) in nodes.iter().zip(weights) {
                        let u = uc + 0.5 * du * xa;
                        let jet = self.jet(u, ve);
                        let speed_sq = mink_inner_unchecked(&jet.fu, &jet.fu);
                        if speed_sq <= 0.0 {
                            return Err(Error::NotSpacelike(format!(
                                "boundary curve not spacelike at ({u}, {ve})"
                            )));
                        }
                        seg += wa * speed_sq.sqrt();
                    }
                    total += seg * 0.5 * du;
                }
            }
        }
        Ok(total)
    }

    /// Integral of a pointwise scalar over the surface (same quadrature as
    /// [`ParametricSurface::volume`]).
    pub fn integrate<Fm: FnMut(f64, f64) -> Result<f64>>(
        &self,
        order: usize,
        mut scalar: Fm,
    ) -> Result<f64> {
        let (nu, nv) = self.grid;
        let (nodes, weights) = gauss_legendre(order);
        let (u0, u1) = self.domain.u_range;
        let (v0, v1) = self.domain.v_range;
        let du = (u1 - u0) / nu as f64;
        let dv = (v1 - v0) / nv as f64;
        let mut total = 0.0;
        for i in 0..nu {
            for j in 0..nv {
                let uc = u0 + (i as f64 + 0.5) * du;
                let vc = v0 + (j as f64 + 0.5) * dv;
                let mut cell = 0.0;
                for (xa, wa) in nodes.iter().zip(weights) {
                    for (xb, wb) in nodes.iter().zip(weights) {
                        let u = uc + 0.5 * du * xa;
                        let v = vc + 0.5 * dv * xb;
                        let m = self.metric_at(u, v)?;
                        cell += wa * wb * scalar(u, v)? * m.det().sqrt();
                    }
                }
                total += cell * 0.25 * du * dv;
            }
        }
        Ok(total)
    }

    /// Same surface seen through an ambient linear map.
    pub fn transformed(self, map: AmbientMap) -> ParametricSurface {
        let name = format!("{}(mapped)", self.name);
        ParametricSurface {
            immersion: Box::new(TransformedImmersion {
                inner: self.immersion,
                map,
            }),
            domain: self.domain,
            grid: self.grid,
            name,
        }
    }
}
