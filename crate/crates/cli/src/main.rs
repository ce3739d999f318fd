//! Command line driver: slopes, curvature, the Neumann solve, the
//! comparison-map diagnostics, both global inequality checks and the
//! curvature-defect comparisons, over the built-in surface corpus or
//! `minkmesh` files.
//!
//! Exit codes: 0 all checks passed, 1 a verified inequality failed,
//! 2 input or mesh errors.

use anyhow::{anyhow, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};
use minkiso::abp::{measure_estimate_check, AbpContext};
use minkiso::corpus;
use minkiso::fem::{compute_cf, solve_neumann, DensityField};
use minkiso::linalg;
use minkiso::mink::{MinkVec, Signature};
use minkiso::report;
use minkiso::surface::{io as meshio, mesh_from_parametric, ParametricSurface, SurfaceMesh};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};
use std::collections::HashMap;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(
    name = "minkiso",
    version,
    about = "Verification toolkit for isoperimetric inequalities of spacelike surfaces in Minkowski space"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Table,
    Csv,
}

#[derive(Clone, Copy, ValueEnum)]
enum DensityArg {
    Thm1,
    Thm2,
}

#[derive(Args)]
struct SurfaceArgs {
    /// Corpus surface name (see `corpus list`).
    #[arg(long)]
    surface: Option<String>,
    /// Surface parameters as comma-separated key=value pairs.
    #[arg(long, default_value = "")]
    params: String,
    /// Grid resolution per axis.
    #[arg(long, default_value_t = 48)]
    res: usize,
    /// Read a minkmesh file instead of a corpus surface.
    #[arg(long)]
    mesh: Option<PathBuf>,
}

#[derive(Args)]
struct OutputArgs {
    #[arg(long, value_enum, default_value_t = Format::Table)]
    format: Format,
    /// Write the report to a file instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Pointwise and global space-time slope.
    Slope {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Mean curvature, its spatial/temporal split and Gauss curvature.
    Curvature {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Solve the Neumann problem lap u = c0 (c_f - f), <grad u, eta> = c0.
    SolveNeumann {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long, value_enum, default_value_t = DensityArg::Thm1)]
        density: DensityArg,
    },
    /// Comparison-map diagnostics: regions, Jacobians, surjectivity and the
    /// finite-eps measure estimate. Emits one record per check.
    AbpDiagnose {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 1.0)]
        c0: f64,
        #[arg(long, default_value_t = 7)]
        seed: u64,
        #[arg(long, default_value_t = 50_000)]
        samples: usize,
        #[arg(long, default_value_t = 1e-2)]
        eps: f64,
    },
    /// Global inequality check, purely timelike codimension (m = 0).
    CheckThm1 {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Global inequality check, mixed codimension (m >= 1).
    CheckThm2 {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Area bound with total-curvature defect vs the slope-based bound.
    FialaHuber {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Evaluate on the geodesic ball "u,v,rho" instead of the whole
        /// disk-type surface.
        #[arg(long)]
        ball: Option<String>,
        #[arg(long, default_value_t = 4)]
        quad_order: usize,
    },
    /// Isoperimetric deficit 4 pi A / L^2 - 1 of small geodesic balls.
    GeodesicExpansion {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[command(flatten)]
        output: OutputArgs,
        /// Center "u,v" in surface parameters.
        #[arg(long)]
        center: String,
        /// Radii, comma separated; defaults to 0.02..0.1 of the radial span.
        #[arg(long)]
        radii: Option<String>,
    },
    /// Fuzz the subspace projection bounds on random spacelike data.
    LemmaLinearFuzz {
        #[command(flatten)]
        output: OutputArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 100_000)]
        samples: usize,
        /// Signature triple "n,m,k"; may repeat.
        #[arg(long, default_values_t = ["1,0,1".to_string(), "2,0,2".to_string(), "2,1,2".to_string(), "3,2,2".to_string()])]
        dims: Vec<String>,
    },
    /// Corpus management.
    Corpus {
        #[command(subcommand)]
        action: CorpusCmd,
    },
}

#[derive(Subcommand)]
enum CorpusCmd {
    /// List the built-in surfaces.
    List,
    /// Triangulate a corpus surface and write it as a minkmesh file.
    Mesh {
        #[command(flatten)]
        surface: SurfaceArgs,
        #[arg(long)]
        out: PathBuf,
    },
}

fn parse_params(spec: &str) -> anyhow::Result<HashMap<String, f64>> {
    let mut map = HashMap::new();
    for pair in spec.split(',').filter(|s| !s.is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| anyhow!("bad parameter '{pair}', expected key=value"))?;
        map.insert(k.trim().to_string(), v.trim().parse::<f64>()?);
    }
    Ok(map)
}

fn load_surface(args: &SurfaceArgs) -> anyhow::Result<ParametricSurface> {
    let name = args
        .surface
        .as_deref()
        .ok_or_else(|| anyhow!("--surface is required for this command"))?;
    let params = parse_params(&args.params)?;
    Ok(corpus::by_name(name, &params, args.res)?)
}

fn load_mesh(path: &std::path::Path) -> anyhow::Result<SurfaceMesh> {
    meshio::read_minkmesh_file(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(output: &OutputArgs, value: &Value) -> anyhow::Result<()> {
    let text = match output.format {
        Format::Json => serde_json::to_string_pretty(value)?,
        Format::Table => render_table(value),
        Format::Csv => render_csv(value),
    };
    match &output.out {
        Some(path) => std::fs::write(path, text + "\n")?,
        None => println!("{text}"),
    }
    Ok(())
}

fn flatten(prefix: &str, value: &Value, rows: &mut Vec<(String, String)>) {
    match value {
        Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() {
                    k.clone()
                } else {
                    format!("{prefix}.{k}")
                };
                flatten(&key, v, rows);
            }
        }
        Value::Array(items) => {
            if items.iter().all(|i| !i.is_object() && !i.is_array()) {
                let joined: Vec<String> = items.iter().map(render_scalar).collect();
                rows.push((prefix.to_string(), joined.join(" ")));
            } else {
                for (i, item) in items.iter().enumerate() {
                    flatten(&format!("{prefix}[{i}]"), item, rows);
                }
            }
        }
        other => rows.push((prefix.to_string(), render_scalar(other))),
    }
}

fn render_scalar(v: &Value) -> String {
    match v {
        Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if f == f.trunc() && f.abs() < 1e15 {
                    format!("{f}")
                } else {
                    format!("{f:.9e}")
                }
            } else {
                n.to_string()
            }
        }
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}

fn render_table(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let width = rows.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    rows.iter()
        .map(|(k, v)| format!("{k:<width$}  {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

fn render_csv(value: &Value) -> String {
    let mut rows = Vec::new();
    flatten("", value, &mut rows);
    let header: Vec<&str> = rows.iter().map(|(k, _)| k.as_str()).collect();
    let data: Vec<&str> = rows.iter().map(|(_, v)| v.as_str()).collect();
    format!("{}\n{}", header.join(","), data.join(","))
}

fn density_for(
    surface: &ParametricSurface,
    grid: &minkiso::surface::StructuredGrid,
    which: DensityArg,
) -> anyhow::Result<DensityField> {
    match which {
        DensityArg::Thm1 => Ok(DensityField::thm1(surface, grid, 1e-6)?),
        DensityArg::Thm2 => {
            let tau = surface.slope_field()?.tau;
            Ok(DensityField::thm2(surface, grid, tau)?)
        }
    }
}

fn cmd_slope(args: &SurfaceArgs, output: &OutputArgs) -> anyhow::Result<ExitCode> {
    let value = if let Some(path) = &args.mesh {
        let mesh = load_mesh(path)?;
        json!({
            "source": path.display().to_string(),
            "backend": "mesh",
            "tau": mesh.slope()?,
            "cells": mesh.cells.len(),
        })
    } else {
        let s = load_surface(args)?;
        let field = s.slope_field()?;
        let min = field.samples.iter().cloned().fold(f64::INFINITY, f64::min);
        json!({
            "surface": s.name,
            "backend": "parametric",
            "tau": field.tau,
            "tau_min_sample": min,
            "samples": field.samples.len(),
            "refinement_stable": field.stable,
            "refinement_rounds": field.rounds,
        })
    };
    emit(output, &value)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_curvature(args: &SurfaceArgs, output: &OutputArgs) -> anyhow::Result<ExitCode> {
    let value = if let Some(path) = &args.mesh {
        let mesh = load_mesh(path)?;
        let rings = mesh.vertex_rings();
        let onb = mesh.is_boundary_vertex();
        let mut max_h: f64 = 0.0;
        let mut interior = 0usize;
        for v in 0..mesh.n_vertices() {
            if onb[v] {
                continue;
            }
            interior += 1;
            let h = mesh.vertex_mean_curvature(v, &rings)?;
            max_h = max_h.max(h.norm_euclidean());
        }
        json!({
            "source": path.display().to_string(),
            "backend": "mesh",
            "interior_vertices": interior,
            "max_mean_curvature": max_h,
        })
    } else {
        let s = load_surface(args)?;
        let (_, grid) = mesh_from_parametric(&s, args.res)?;
        let mut max_h: f64 = 0.0;
        let mut max_h_sq = f64::NEG_INFINITY;
        let mut k_min = f64::INFINITY;
        let mut k_max = f64::NEG_INFINITY;
        let nudge = 0.05 * grid.du();
        for &(u, v) in &grid.params {
            let ue = if grid.collapse_u_min && u <= grid.u_range.0 {
                grid.u_range.0 + nudge
            } else {
                u
            };
            let c = s.curvature_at(ue, v)?;
            max_h = max_h.max((c.h_s_norm * c.h_s_norm + c.h_t_norm * c.h_t_norm).sqrt());
            max_h_sq = max_h_sq.max(c.h_mink_sq);
            if let Some(k) = c.gauss_k {
                k_min = k_min.min(k);
                k_max = k_max.max(k);
            }
        }
        json!({
            "surface": s.name,
            "backend": "parametric",
            "max_mean_curvature_euclidean": max_h,
            "max_mink_square_of_h": max_h_sq,
            "gauss_min": k_min,
            "gauss_max": k_max,
        })
    };
    emit(output, &value)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_solve(
    args: &SurfaceArgs,
    output: &OutputArgs,
    c0: f64,
    which: DensityArg,
) -> anyhow::Result<ExitCode> {
    let (mesh, density, label) = if let Some(path) = &args.mesh {
        let mesh = load_mesh(path)?;
        let density = DensityField::zero(mesh.n_vertices());
        (mesh, density, path.display().to_string())
    } else {
        let s = load_surface(args)?;
        let (mesh, grid) = mesh_from_parametric(&s, args.res)?;
        let density = density_for(&s, &grid, which)?;
        (mesh, density, s.name.clone())
    };
    let cf = compute_cf(&mesh, &density)?;
    let sol = solve_neumann(&mesh, &density, c0)?;
    let mut in_u_area = 0.0;
    let mut total = 0.0;
    for ci in 0..mesh.cells.len() {
        let a = mesh.cell_area(ci)?;
        total += a;
        if sol.grad_u[ci].mink_norm() < c0 {
            in_u_area += a;
        }
    }
    let value = json!({
        "surface": label,
        "vertices": mesh.n_vertices(),
        "c0": sol.c0,
        "c_f": cf,
        "compat_residual_pre": sol.compat_residual_pre,
        "compat_residual": sol.compat_residual,
        "compat_warning": sol.compat_warning,
        "boundary_flux_error": sol.boundary_flux_error,
        "u_coverage": in_u_area / total,
    });
    emit(output, &value)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_abp(
    args: &SurfaceArgs,
    output: &OutputArgs,
    c0: f64,
    seed: u64,
    samples: usize,
    eps: f64,
) -> anyhow::Result<ExitCode> {
    let s = load_surface(args)?;
    let (mesh, grid) = mesh_from_parametric(&s, args.res)?;
    let density = report::density_for(&s, &grid)?;
    let sol = solve_neumann(&mesh, &density, c0)?;
    let ctx = AbpContext::from_fem(&s, &mesh, &grid, &sol, density)?;

    let mut records = Vec::new();
    let mut all_pass = true;

    // region nesting over random normal points
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = (samples / 10).max(100);
        let mut violations = 0usize;
        for _ in 0..n {
            let (p, _, _) = ctx.sample_normal_point(&mut rng, (0.0, 4.0 * c0 * c0), true)?;
            let flags = ctx.classify(&p)?;
            let nested = (flags.in_a != Some(true) || flags.in_omega)
                && (!flags.in_omega || (flags.in_u && flags.in_d));
            if !nested {
                violations += 1;
            }
        }
        let pass = violations == 0;
        all_pass &= pass;
        records.push(json!({
            "check": "region-nesting",
            "surface": s.name,
            "samples": n,
            "pass": pass,
            "violations": violations,
        }));
    }

    // surjectivity batch
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcd);
        let mut tried = 0usize;
        let mut failures = 0usize;
        let mut worst_residual: f64 = 0.0;
        let mut worst_eig: f64 = f64::INFINITY;
        let mut worst_at = (f64::NAN, f64::NAN);
        let scale = c0 / ctx.tau;
        while tried < 200 {
            let xi = random_xi(&ctx, scale, &mut rng);
            if !ctx.in_region_d(&xi) {
                continue;
            }
            tried += 1;
            match ctx.surjectivity_check(&xi) {
                Ok(out) => {
                    if out.residual > worst_residual {
                        worst_residual = out.residual;
                        worst_at = out.param;
                    }
                    worst_eig = worst_eig.min(out.hessian_min_eig);
                    if out.residual > 1e-4 || out.hessian_min_eig < -1e-6 {
                        failures += 1;
                    }
                }
                Err(_) => failures += 1,
            }
        }
        let pass = failures == 0;
        all_pass &= pass;
        records.push(json!({
            "check": "surjectivity",
            "surface": s.name,
            "samples": tried,
            "pass": pass,
            "failures": failures,
            "worst_residual": worst_residual,
            "worst_location": [worst_at.0, worst_at.1],
            "worst_hessian_min_eig": worst_eig,
        }));
    }

    // Jacobian identity at random Omega points
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x1234);
        let mut checked = 0usize;
        let mut worst: f64 = 0.0;
        let mut worst_at = (f64::NAN, f64::NAN);
        let mut attempts = 0usize;
        while checked < 50 && attempts < 100_000 {
            attempts += 1;
            let (p, _, _) = ctx.sample_normal_point(&mut rng, (0.0, 4.0 * c0 * c0), true)?;
            let flags = ctx.classify(&p)?;
            if !flags.in_omega {
                continue;
            }
            checked += 1;
            let det_a = ctx.jacobian_det(&p)?;
            let det_fd = ctx.jacobian_fd(&p, 1e-5)?.determinant();
            let rel = (det_fd - det_a).abs() / det_a.abs().max(1e-8);
            if rel > worst {
                worst = rel;
                worst_at = p.param;
            }
        }
        let pass = checked > 0 && worst < 1e-4;
        all_pass &= pass;
        records.push(json!({
            "check": "jacobian-identity",
            "surface": s.name,
            "samples": checked,
            "pass": pass,
            "worst_relative_error": worst,
            "worst_location": [worst_at.0, worst_at.1],
        }));
    }

    // AM-GM bound at A-points
    {
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x77);
        let mut checked = 0usize;
        let mut violations = 0usize;
        let mut attempts = 0usize;
        let target = samples.min(10_000);
        while checked < target && attempts < 50 * target.max(1) {
            attempts += 1;
            let (p, _, _) = ctx.sample_normal_point(&mut rng, (0.0, 4.0 * c0 * c0), true)?;
            let flags = ctx.classify(&p)?;
            if flags.in_a != Some(true) {
                continue;
            }
            checked += 1;
            let (lhs, rhs) = ctx.amgm_bound_check(&p)?;
            if !(lhs >= -1e-9 && lhs <= rhs + 1e-6) {
                violations += 1;
            }
        }
        let pass = checked > 0 && violations == 0;
        all_pass &= pass;
        records.push(json!({
            "check": "amgm-bound",
            "surface": s.name,
            "samples": checked,
            "pass": pass,
            "violations": violations,
        }));
    }

    // finite-eps measure estimate
    {
        match measure_estimate_check(&ctx, eps, samples, seed) {
            Ok(check) => {
                all_pass &= check.passed;
                records.push(json!({
                    "check": "measure-estimate",
                    "surface": s.name,
                    "eps": eps,
                    "samples": samples,
                    "pass": check.passed,
                    "lhs_analytic": check.run_eps.lhs_analytic,
                    "rhs_extrapolated": check.rhs_extrapolated,
                    "ci": check.run_eps.ci,
                    "slack": check.slack,
                }));
            }
            Err(e) => {
                all_pass = false;
                records.push(json!({
                    "check": "measure-estimate",
                    "surface": s.name,
                    "pass": false,
                    "error": e.to_string(),
                }));
            }
        }
    }

    emit(output, &Value::Array(records))?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn random_xi(ctx: &AbpContext, scale: f64, rng: &mut ChaCha8Rng) -> MinkVec {
    let sig = ctx.mesh.sig;
    let coords: Vec<f64> = (0..sig.dim())
        .map(|_| rng.random_range(-scale..scale))
        .collect();
    MinkVec::new(coords, sig).unwrap()
}

fn cmd_check(args: &SurfaceArgs, output: &OutputArgs, theorem: u8) -> anyhow::Result<ExitCode> {
    let s = load_surface(args)?;
    let rep = match theorem {
        1 => report::check_thm1(&s, args.res)?,
        _ => report::check_thm2(&s, args.res)?,
    };
    let passed = rep.passed;
    emit(output, &serde_json::to_value(&rep)?)?;
    Ok(if passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_fiala_huber(
    args: &SurfaceArgs,
    output: &OutputArgs,
    ball: Option<&str>,
    quad_order: usize,
) -> anyhow::Result<ExitCode> {
    let s = load_surface(args)?;
    let rep = match ball {
        Some(spec) => {
            let parts: Vec<f64> = spec
                .split(',')
                .map(|t| t.trim().parse::<f64>())
                .collect::<std::result::Result<_, _>>()?;
            if parts.len() != 3 {
                return Err(anyhow!("--ball expects u,v,rho"));
            }
            report::curvature_defect_on_ball(&s, (parts[0], parts[1]), parts[2])?
        }
        None => report::curvature_defect_compare(&s, quad_order)?,
    };
    let ok = rep.defect_bound_holds && rep.slope_bound_holds;
    emit(output, &serde_json::to_value(&rep)?)?;
    Ok(if ok {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn cmd_geodesic(
    args: &SurfaceArgs,
    output: &OutputArgs,
    center: &str,
    radii: Option<&str>,
) -> anyhow::Result<ExitCode> {
    let s = load_surface(args)?;
    let c: Vec<f64> = center
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()?;
    if c.len() != 2 {
        return Err(anyhow!("--center expects u,v"));
    }
    let radii: Vec<f64> = match radii {
        Some(spec) => spec
            .split(',')
            .map(|t| t.trim().parse::<f64>())
            .collect::<std::result::Result<_, _>>()?,
        None => {
            let scale = s.domain.u_span();
            [0.02, 0.04, 0.06, 0.08, 0.1]
                .iter()
                .map(|r| r * scale)
                .collect()
        }
    };
    let rep = report::geodesic_ball_expansion(&s, (c[0], c[1]), &radii)?;
    emit(output, &serde_json::to_value(&rep)?)?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_fuzz(
    output: &OutputArgs,
    seed: u64,
    samples: usize,
    dims: &[String],
) -> anyhow::Result<ExitCode> {
    let mut records = Vec::new();
    let mut all_pass = true;
    let per_sig = samples / dims.len().max(1);
    for spec in dims {
        let parts: Vec<usize> = spec
            .split(',')
            .map(|t| t.trim().parse::<usize>())
            .collect::<std::result::Result<_, _>>()?;
        if parts.len() != 3 {
            return Err(anyhow!("--dims expects n,m,k"));
        }
        let (n, m, k) = (parts[0], parts[1], parts[2]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ ((n * 100 + m * 10 + k) as u64));
        let sig = Signature::new(n + m, k)?;
        let mut violations = 0usize;
        let mut sharpness_misses = 0usize;
        let vectors_per_subspace = 10;
        let n_subspaces = per_sig / vectors_per_subspace;
        for _ in 0..n_subspaces {
            let l = random_spacelike_subspace(n, sig, &mut rng);
            let frame = linalg::build_frame(&l)?;
            let split = linalg::normal_split_from_frame(&l, &frame);
            let tau = frame.tau;
            let root = (tau * tau - 1.0).max(0.0).sqrt();
            for _ in 0..vectors_per_subspace {
                let v = MinkVec::new(
                    (0..sig.dim())
                        .map(|_| rng.random_range(-2.0..2.0))
                        .collect(),
                    sig,
                )?;
                let ps = v.norm_s();
                let pt = v.norm_t();
                if linalg::project_with_frame(&frame, &v).mink_norm()
                    > tau * ps + root * pt + 1e-9
                {
                    violations += 1;
                }
                if split.plus_norm(&v) > ps + 1e-9 {
                    violations += 1;
                }
                if split.minus_norm(&v) > root * ps + tau * pt + 1e-9 {
                    violations += 1;
                }
            }
            // sharpness witness for the tangential projection bound
            let w = frame.e_plus[0].sub(&frame.e_minus[0]);
            let lhs = linalg::project_with_frame(&frame, &w).mink_norm();
            let rhs = tau * w.norm_s() + root * w.norm_t();
            if (rhs - lhs).abs() > 1e-6 {
                sharpness_misses += 1;
            }
        }
        let pass = violations == 0 && sharpness_misses == 0;
        all_pass &= pass;
        records.push(json!({
            "check": "lemma-linear-fuzz",
            "dims": {"n": n, "m": m, "k": k},
            "subspaces": n_subspaces,
            "vectors": n_subspaces * vectors_per_subspace,
            "pass": pass,
            "bound_violations": violations,
            "sharpness_misses": sharpness_misses,
        }));
    }
    emit(output, &Value::Array(records))?;
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    })
}

fn random_spacelike_subspace(
    n: usize,
    sig: Signature,
    rng: &mut ChaCha8Rng,
) -> linalg::SpacelikeSubspace {
    loop {
        let basis: Vec<MinkVec> = (0..n)
            .map(|_| {
                let mut coords: Vec<f64> = (0..sig.space_dim)
                    .map(|_| rng.random_range(-1.0..1.0))
                    .collect();
                let spatial: f64 = coords.iter().map(|c| c * c).sum::<f64>().sqrt();
                let shrink =
                    rng.random_range(0.0..0.8) / (sig.time_dim as f64).sqrt().max(1.0);
                for _ in 0..sig.time_dim {
                    coords.push(rng.random_range(-1.0..1.0) * shrink * spatial);
                }
                MinkVec::new(coords, sig).unwrap()
            })
            .collect();
        if let Ok(l) = linalg::SpacelikeSubspace::new(basis) {
            return l;
        }
    }
}

fn cmd_corpus(action: &CorpusCmd) -> anyhow::Result<ExitCode> {
    match action {
        CorpusCmd::List => {
            for name in corpus::NAMES {
                println!("{name}");
            }
            Ok(ExitCode::SUCCESS)
        }
        CorpusCmd::Mesh { surface, out } => {
            let s = load_surface(surface)?;
            let (mesh, _) = mesh_from_parametric(&s, surface.res)?;
            meshio::write_minkmesh_file(&mesh, out)?;
            eprintln!(
                "wrote {} vertices, {} cells to {}",
                mesh.n_vertices(),
                mesh.cells.len(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Slope { surface, output } => cmd_slope(surface, output),
        Cmd::Curvature { surface, output } => cmd_curvature(surface, output),
        Cmd::SolveNeumann {
            surface,
            output,
            c0,
            density,
        } => cmd_solve(surface, output, *c0, *density),
        Cmd::AbpDiagnose {
            surface,
            output,
            c0,
            seed,
            samples,
            eps,
        } => cmd_abp(surface, output, *c0, *seed, *samples, *eps),
        Cmd::CheckThm1 { surface, output } => cmd_check(surface, output, 1),
        Cmd::CheckThm2 { surface, output } => cmd_check(surface, output, 2),
        Cmd::FialaHuber {
            surface,
            output,
            ball,
            quad_order,
        } => cmd_fiala_huber(surface, output, ball.as_deref(), *quad_order),
        Cmd::GeodesicExpansion {
            surface,
            output,
            center,
            radii,
        } => cmd_geodesic(surface, output, center, radii.as_deref()),
        Cmd::LemmaLinearFuzz {
            output,
            seed,
            samples,
            dims,
        } => cmd_fuzz(output, *seed, *samples, dims),
        Cmd::Corpus { action } => cmd_corpus(action),
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}
