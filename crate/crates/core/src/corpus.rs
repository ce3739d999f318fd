//! Built-in benchmark surfaces with closed-form jets.
//!
//! All R^{2,1} surfaces are padded with a zero second temporal coordinate so
//! the ambient signature has k = 2, which both global inequality checks
//! require. Codimension splits in play:
//!
//! * `flat-disk`, `boosted-disk`, `elliptic-catenoid`, `maximal-graph`:
//!   n = 2, m = 0, k = 2 in R^{2,2};
//! * `euclidean-catenoid`, `sphere-cap`: n = 2, m = 1, k = 2 in R^{3,2}.

use crate::error::{Error, Result};
use crate::mink::{AmbientMap, MinkVec, Signature};
use crate::surface::{Domain, Immersion, Jet2, ParametricSurface};
use std::collections::HashMap;
use std::f64::consts::PI;

pub const NAMES: [&str; 6] = [
    "flat-disk",
    "boosted-disk",
    "elliptic-catenoid",
    "euclidean-catenoid",
    "sphere-cap",
    "maximal-graph",
];

fn sig22() -> Signature {
    Signature::new(2, 2).unwrap()
}

fn sig32() -> Signature {
    Signature::new(3, 2).unwrap()
}

fn mv(sig: Signature, coords: Vec<f64>) -> MinkVec {
    MinkVec::new(coords, sig).unwrap()
}

/// Identity embedding of the round disk, polar chart.
struct FlatDisk;

impl Immersion for FlatDisk {
    fn sig(&self) -> Signature {
        sig22()
    }

    fn jet(&self, r: f64, th: f64) -> Jet2 {
        let (c, s) = (th.cos(), th.sin());
        let sig = self.sig();
        Jet2 {
            f: mv(sig, vec![r * c, r * s, 0.0, 0.0]),
            fu: mv(sig, vec![c, s, 0.0, 0.0]),
            fv: mv(sig, vec![-r * s, r * c, 0.0, 0.0]),
            fuu: mv(sig, vec![0.0, 0.0, 0.0, 0.0]),
            fuv: mv(sig, vec![-s, c, 0.0, 0.0]),
            fvv: mv(sig, vec![-r * c, -r * s, 0.0, 0.0]),
        }
    }
}

/// Rotationally symmetric graph t = a asinh(r/a) over an annulus in
/// R^{2,1}, padded to R^{2,2}: the radial solution of the maximal surface
/// equation div(grad f / sqrt(1 - |grad f|^2)) = 0.
struct EllipticCatenoid {
    a: f64,
}

impl Immersion for EllipticCatenoid {
    fn sig(&self) -> Signature {
        sig22()
    }

    fn jet(&self, r: f64, th: f64) -> Jet2 {
        let a = self.a;
        let (c, s) = (th.cos(), th.sin());
        let root = (a * a + r * r).sqrt();
        let fp = a / root;
        let fpp = -a * r / root.powi(3);
        let height = a * (r / a).asinh();
        let sig = self.sig();
        Jet2 {
            f: mv(sig, vec![r * c, r * s, height, 0.0]),
            fu: mv(sig, vec![c, s, fp, 0.0]),
            fv: mv(sig, vec![-r * s, r * c, 0.0, 0.0]),
            fuu: mv(sig, vec![0.0, 0.0, fpp, 0.0]),
            fuv: mv(sig, vec![-s, c, 0.0, 0.0]),
            fvv: mv(sig, vec![-r * c, -r * s, 0.0, 0.0]),
        }
    }
}

/// Classical minimal catenoid of R^3, embedded in R^{3,2}.
struct EuclideanCatenoid {
    a: f64,
}

impl Immersion for EuclideanCatenoid {
    fn sig(&self) -> Signature {
        sig32()
    }

    fn jet(&self, u: f64, th: f64) -> Jet2 {
        let a = self.a;
        let (c, s) = (th.cos(), th.sin());
        let ch = (u / a).cosh();
        let sh = (u / a).sinh();
        let sig = self.sig();
        Jet2 {
            f: mv(sig, vec![a * ch * c, a * ch * s, u, 0.0, 0.0]),
            fu: mv(sig, vec![sh * c, sh * s, 1.0, 0.0, 0.0]),
            fv: mv(sig, vec![-a * ch * s, a * ch * c, 0.0, 0.0, 0.0]),
            fuu: mv(sig, vec![ch / a * c, ch / a * s, 0.0, 0.0, 0.0]),
            fuv: mv(sig, vec![-sh * s, sh * c, 0.0, 0.0, 0.0]),
            fvv: mv(sig, vec![-a * ch * c, -a * ch * s, 0.0, 0.0, 0.0]),
        }
    }
}

/// Polar cap of the round sphere in R^{3,0}, embedded in R^{3,2}.
struct SphereCap {
    radius: f64,
}

impl Immersion for SphereCap {
    fn sig(&self) -> Signature {
        sig32()
    }

    fn jet(&self, th: f64, ph: f64) -> Jet2 {
        let r = self.radius;
        let (st, ct) = (th.sin(), th.cos());
        let (sp, cp) = (ph.sin(), ph.cos());
        let sig = self.sig();
        Jet2 {
            f: mv(sig, vec![r * st * cp, r * st * sp, r * ct, 0.0, 0.0]),
            fu: mv(sig, vec![r * ct * cp, r * ct * sp, -r * st, 0.0, 0.0]),
            fv: mv(sig, vec![-r * st * sp, r * st * cp, 0.0, 0.0, 0.0]),
            fuu: mv(sig, vec![-r * st * cp, -r * st * sp, -r * ct, 0.0, 0.0]),
            fuv: mv(sig, vec![-r * ct * sp, r * ct * cp, 0.0, 0.0, 0.0]),
            fvv: mv(sig, vec![-r * st * cp, -r * st * sp, 0.0, 0.0, 0.0]),
        }
    }
}

/// Spacelike polynomial graph t = p(x, y) over a rectangle in R^{2,1},
/// padded to R^{2,2}.
pub struct PolynomialGraph {
    /// terms (i, j, coeff) standing for coeff * x^i * y^j
    pub terms: Vec<(u32, u32, f64)>,
}

impl PolynomialGraph {
    fn eval(&self, x: f64, y: f64) -> (f64, f64, f64, f64, f64, f64) {
        let (mut p, mut px, mut py, mut pxx, mut pxy, mut pyy) =
            (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
        for &(i, j, c) in &self.terms {
            let (fi, fj) = (i as f64, j as f64);
            let xi = x.powi(i as i32);
            let yj = y.powi(j as i32);
            p += c * xi * yj;
            if i >= 1 {
                px += c * fi * x.powi(i as i32 - 1) * yj;
            }
            if j >= 1 {
                py += c * fj * xi * y.powi(j as i32 - 1);
            }
            if i >= 2 {
                pxx += c * fi * (fi - 1.0) * x.powi(i as i32 - 2) * yj;
            }
            if i >= 1 && j >= 1 {
                pxy += c * fi * fj * x.powi(i as i32 - 1) * y.powi(j as i32 - 1);
            }
            if j >= 2 {
                pyy += c * fj * (fj - 1.0) * xi * y.powi(j as i32 - 2);
            }
        }
        (p, px, py, pxx, pxy, pyy)
    }
}

impl Immersion for PolynomialGraph {
    fn sig(&self) -> Signature {
        sig22()
    }

    fn jet(&self, x: f64, y: f64) -> Jet2 {
        let (p, px, py, pxx, pxy, pyy) = self.eval(x, y);
        let sig = self.sig();
        Jet2 {
            f: mv(sig, vec![x, y, p, 0.0]),
            fu: mv(sig, vec![1.0, 0.0, px, 0.0]),
            fv: mv(sig, vec![0.0, 1.0, py, 0.0]),
            fuu: mv(sig, vec![0.0, 0.0, pxx, 0.0]),
            fuv: mv(sig, vec![0.0, 0.0, pxy, 0.0]),
            fvv: mv(sig, vec![0.0, 0.0, pyy, 0.0]),
        }
    }
}

fn get(params: &HashMap<String, f64>, key: &str, default: f64) -> f64 {
    params.get(key).copied().unwrap_or(default)
}

pub fn flat_disk(radius: f64, res: usize) -> ParametricSurface {
    ParametricSurface {
        immersion: Box::new(FlatDisk),
        domain: Domain::disk(radius, (0.0, 2.0 * PI)),
        grid: (res, res),
        name: "flat-disk".into(),
    }
}

pub fn boosted_disk(beta: f64, radius: f64, res: usize) -> ParametricSurface {
    let boost = AmbientMap::boost(sig22(), 0, 0, beta).unwrap();
    let mut s = flat_disk(radius, res).transformed(boost);
    s.name = format!("boosted-disk(beta={beta})");
    s
}

pub fn elliptic_catenoid(a: f64, r0: f64, r1: f64, res: usize) -> Result<ParametricSurface> {
    if r0 <= 0.0 || r1 <= r0 || a <= 0.0 {
        return Err(Error::BadInput(
            "elliptic catenoid needs 0 < r0 < r1 and a > 0".into(),
        ));
    }
    Ok(ParametricSurface {
        immersion: Box::new(EllipticCatenoid { a }),
        domain: Domain::annulus((r0, r1), (0.0, 2.0 * PI)),
        grid: (res, res),
        name: format!("elliptic-catenoid(a={a},r0={r0},r1={r1})"),
    })
}

pub fn euclidean_catenoid(a: f64, u0: f64, u1: f64, res: usize) -> Result<ParametricSurface> {
    if u1 <= u0 || a <= 0.0 {
        return Err(Error::BadInput("catenoid needs u0 < u1 and a > 0".into()));
    }
    Ok(ParametricSurface {
        immersion: Box::new(EuclideanCatenoid { a }),
        domain: Domain::annulus((u0, u1), (0.0, 2.0 * PI)),
        grid: (res, res),
        name: format!("euclidean-catenoid(a={a})"),
    })
}

pub fn sphere_cap(radius: f64, alpha: f64, res: usize) -> Result<ParametricSurface> {
    if radius <= 0.0 || alpha <= 0.0 || alpha >= PI {
        return Err(Error::BadInput(
            "sphere cap needs radius > 0 and alpha in (0, pi)".into(),
        ));
    }
    Ok(ParametricSurface {
        immersion: Box::new(SphereCap { radius }),
        domain: Domain {
            u_range: (0.0, alpha),
            v_range: (0.0, 2.0 * PI),
            periodic_v: true,
            collapse_u_min: true,
        },
        grid: (res, res),
        name: format!("sphere-cap(R={radius},alpha={alpha})"),
    })
}

/// Graph surface from polynomial terms; the spacelike condition
/// |grad p| < 1 is checked on a dense grid at construction.
pub fn maximal_graph(
    terms: &[(u32, u32, f64)],
    x_range: (f64, f64),
    y_range: (f64, f64),
    res: usize,
) -> Result<ParametricSurface> {
    let graph = PolynomialGraph {
        terms: terms.to_vec(),
    };
    let check = 4 * res.max(8);
    for i in 0..=check {
        for j in 0..=check {
            let x = x_range.0 + (x_range.1 - x_range.0) * i as f64 / check as f64;
            let y = y_range.0 + (y_range.1 - y_range.0) * j as f64 / check as f64;
            let (_, px, py, ..) = graph.eval(x, y);
            if px * px + py * py >= 1.0 {
                return Err(Error::NotSpacelike(format!(
                    "|grad p|^2 = {:.6} >= 1 at ({x}, {y})",
                    px * px + py * py
                )));
            }
        }
    }
    Ok(ParametricSurface {
        immersion: Box::new(graph),
        domain: Domain::rectangle(x_range, y_range),
        grid: (res, res),
        name: "maximal-graph".into(),
    })
}

/// Surface by name with keyword parameters; unknown names error.
/// `maximal-graph` reads coefficient keys of the form `cIJ` (one digit per
/// exponent), e.g. `c11=0.3` for 0.3 * x * y.
pub fn by_name(
    name: &str,
    params: &HashMap<String, f64>,
    res: usize,
) -> Result<ParametricSurface> {
    match name {
        "flat-disk" => Ok(flat_disk(get(params, "radius", 1.0), res)),
        "boosted-disk" => Ok(boosted_disk(
            get(params, "beta", 0.5),
            get(params, "radius", 1.0),
            res,
        )),
        "elliptic-catenoid" => elliptic_catenoid(
            get(params, "a", 1.0),
            get(params, "r0", 0.5),
            get(params, "r1", 2.0),
            res,
        ),
        "euclidean-catenoid" => euclidean_catenoid(
            get(params, "a", 1.0),
            get(params, "u0", -0.8),
            get(params, "u1", 0.8),
            res,
        ),
        "sphere-cap" => sphere_cap(
            get(params, "radius", 1.0),
            get(params, "alpha", 1.0),
            res,
        ),
        "maximal-graph" => {
            let mut terms = Vec::new();
            let mut keys: Vec<&String> = params.keys().collect();
            keys.sort();
            for key in keys {
                if let Some(rest) = key.strip_prefix('c') {
                    let digits: Vec<u32> =
                        rest.chars().filter_map(|c| c.to_digit(10)).collect();
                    if digits.len() == 2 && rest.len() == 2 {
                        terms.push((digits[0], digits[1], params[key]));
                    } else {
                        return Err(Error::BadInput(format!(
                            "bad coefficient key '{key}', expected cIJ"
                        )));
                    }
                }
            }
            if terms.is_empty() {
                terms.push((1, 1, 0.3));
            }
            maximal_graph(
                &terms,
                (get(params, "x0", -1.0), get(params, "x1", 1.0)),
                (get(params, "y0", -1.0), get(params, "y1", 1.0)),
                res,
            )
        }
        other => Err(Error::BadInput(format!("unknown corpus surface '{other}'"))),
    }
}
