//! Geodesic balls on the smooth backend.
//!
//! Geodesics are shot from a center point by integrating
//! `x'' + Gamma(x', x') = 0` in parameter coordinates with RK4, together
//! with the Jacobi field `J'' + K J = 0`, `J(0) = 0`, `J'(0) = 1`. The
//! polar area element is exactly `J dr dtheta`, so ball area, boundary
//! length and total curvature come out of the same integration.

use crate::error::{Error, Result};
use crate::surface::parametric::ParametricSurface;

/// Measures of a geodesic ball.
#[derive(Debug, Clone, Copy)]
pub struct BallMeasures {
    pub radius: f64,
    pub area: f64,
    pub boundary_length: f64,
    pub total_curvature: f64,
    /// Largest pointwise slope seen along the sampled geodesics.
    pub tau_max: f64,
    /// Smallest Gauss curvature seen along the sampled geodesics.
    pub min_curvature: f64,
    /// Integrals of |pi_s H|, |pi_t H| and sqrt(-<H,H>) over the ball,
    /// for assembling the applicable inequality density.
    pub int_h_s: f64,
    pub int_h_t: f64,
    pub int_h_timelike: f64,
}

struct GeodesicState {
    u: f64,
    v: f64,
    du: f64,
    dv: f64,
    jac: f64,
    djac: f64,
}

/// One RK4 step of the coupled geodesic + Jacobi system.
fn rk4_step(surface: &ParametricSurface, s: &GeodesicState, h: f64) -> Result<GeodesicState> {
    let deriv = |st: &GeodesicState| -> Result<[f64; 6]> {
        let gamma = surface.christoffels(st.u, st.v)?;
        let x = [st.du, st.dv];
        let mut acc = [0.0; 2];
        for c in 0..2 {
            for a in 0..2 {
                for b in 0..2 {
                    acc[c] -= gamma[c][a][b] * x[a] * x[b];
                }
            }
        }
        let k = surface.brioschi_k(st.u, st.v)?;
        Ok([st.du, st.dv, acc[0], acc[1], st.djac, -k * st.jac])
    };
    let add = |st: &GeodesicState, d: &[f64; 6], w: f64| GeodesicState {
        u: st.u + w * d[0],
        v: st.v + w * d[1],
        du: st.du + w * d[2],
        dv: st.dv + w * d[3],
        jac: st.jac + w * d[4],
        djac: st.djac + w * d[5],
    };
    let k1 = deriv(s)?;
    let k2 = deriv(&add(s, &k1, 0.5 * h))?;
    let k3 = deriv(&add(s, &k2, 0.5 * h))?;
    let k4 = deriv(&add(s, &k3, h))?;
    Ok(GeodesicState {
        u: s.u + h / 6.0 * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        v: s.v + h / 6.0 * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        du: s.du + h / 6.0 * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        dv: s.dv + h / 6.0 * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        jac: s.jac + h / 6.0 * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]),
        djac: s.djac + h / 6.0 * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5]),
    })
}

/// Shoots `n_dirs` unit-speed geodesics from `center` out to `radius` and
/// integrates the polar area element. Errors with [`Error::RadiusTooLarge`]
/// if a geodesic leaves the parameter domain.
pub fn geodesic_ball(
    surface: &ParametricSurface,
    center: (f64, f64),
    radius: f64,
    n_dirs: usize,
    n_steps: usize,
) -> Result<BallMeasures> {
    let (u0, v0) = center;
    let m = surface.metric_at(u0, v0)?;
    // orthonormal frame coefficients in parameter coordinates
    let s1 = 1.0 / m.e.sqrt();
    let w = m.g - m.f * m.f / m.e;
    let s2 = 1.0 / w.sqrt();

    let h = radius / n_steps as f64;
    let dtheta = 2.0 * std::f64::consts::PI / n_dirs as f64;
    let dom = surface.domain;

    let mut area = 0.0;
    let mut length = 0.0;
    let mut total_k = 0.0;
    let mut tau_max: f64 = 1.0;
    let mut min_curvature = f64::INFINITY;
    let mut int_h_s = 0.0;
    let mut int_h_t = 0.0;
    let mut int_h_timelike = 0.0;

    for d in 0..n_dirs {
        let theta = d as f64 * dtheta;
        // unit tangent with frame angle theta
        let a = theta.cos();
        let b = theta.sin();
        let mut st = GeodesicState {
            u: u0,
            v: v0,
            du: a * s1 + b * (-m.f / m.e * s2),
            dv: b * s2,
            jac: 0.0,
            djac: 1.0,
        };
        let margin_u = 1e-6 * dom.u_span();
        for step in 0..n_steps {
            let prev_jac = st.jac;
            let prev_k = surface.brioschi_k(st.u, st.v)?;
            let prev_curv = surface.mean_curvature_data(st.u, st.v)?;
            st = rk4_step(surface, &st, h)?;
            let inside_u =
                st.u > dom.u_range.0 + margin_u && st.u < dom.u_range.1 - margin_u;
            let inside_v = dom.periodic_v
                || (st.v > dom.v_range.0 && st.v < dom.v_range.1);
            if !inside_u || !inside_v {
                return Err(Error::RadiusTooLarge { radius });
            }
            // trapezoid in r for the area and curvature integrals
            let k_here = surface.brioschi_k(st.u, st.v)?;
            let curv = surface.mean_curvature_data(st.u, st.v)?;
            min_curvature = min_curvature.min(k_here).min(prev_k);
            let w = 0.5 * h * dtheta;
            area += (prev_jac + st.jac) * w;
            total_k += (prev_jac * prev_k + st.jac * k_here) * w;
            int_h_s += (prev_jac * prev_curv.h_s_norm + st.jac * curv.h_s_norm) * w;
            int_h_t += (prev_jac * prev_curv.h_t_norm + st.jac * curv.h_t_norm) * w;
            int_h_timelike += (prev_jac * (-prev_curv.h_mink_sq).max(0.0).sqrt()
                + st.jac * (-curv.h_mink_sq).max(0.0).sqrt())
                * w;
            if step % 8 == 0 {
                tau_max = tau_max.max(surface.slope_at(st.u, st.v)?);
            }
        }
        length += st.jac * dtheta;
        tau_max = tau_max.max(surface.slope_at(st.u, st.v)?);
    }

    Ok(BallMeasures {
        radius,
        area,
        boundary_length: length,
        total_curvature: total_k,
        tau_max,
        min_curvature,
        int_h_s,
        int_h_t,
        int_h_timelike,
    })
}
