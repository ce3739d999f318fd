//! Discrete backend: triangle meshes with ambient Minkowski coordinates.
//!
//! All intrinsic quantities are read off the edge Gram matrices; a cell is
//! accepted only if that Gram is SPD, which is exactly the spacelike
//! condition for the piecewise linear surface.

use crate::error::{Error, Result};
use crate::linalg::{self, SpacelikeSubspace};
use crate::mink::{mink_inner_unchecked, MinkVec, Signature};
use crate::surface::parametric::ParametricSurface;
use nalgebra::{DMatrix, DVector, Matrix2};
use std::collections::HashMap;

/// Triangle mesh of a spacelike surface with oriented boundary.
#[derive(Debug, Clone)]
pub struct SurfaceMesh {
    pub sig: Signature,
    pub vertices: Vec<MinkVec>,
    pub cells: Vec<[usize; 3]>,
    /// Directed boundary edges (surface on the left).
    pub boundary: Vec<[usize; 2]>,
    /// Index of the cell containing each boundary edge.
    pub boundary_cell: Vec<usize>,
}

/// Correspondence between a structured parameter grid and mesh vertices.
#[derive(Debug, Clone)]
pub struct StructuredGrid {
    pub nu: usize,
    pub nv: usize,
    pub periodic_v: bool,
    pub collapse_u_min: bool,
    pub u_range: (f64, f64),
    pub v_range: (f64, f64),
    /// Parameter location of every mesh vertex (collapsed pole gets u0, v0).
    pub params: Vec<(f64, f64)>,
    /// Per-cell parameter triplets with the periodic seam unwrapped, so that
    /// barycentric interpolation inside a cell never crosses a jump.
    pub cell_params: Vec<[(f64, f64); 3]>,
}

impl StructuredGrid {
    pub fn du(&self) -> f64 {
        (self.u_range.1 - self.u_range.0) / self.nu as f64
    }

    pub fn dv(&self) -> f64 {
        (self.v_range.1 - self.v_range.0) / self.nv as f64
    }

    /// Number of distinct v columns of grid nodes.
    pub fn ncols(&self) -> usize {
        if self.periodic_v {
            self.nv
        } else {
            self.nv + 1
        }
    }

    /// Mesh vertex index of grid node (i, j).
    pub fn vertex(&self, i: usize, j: usize) -> usize {
        let jj = j % self.ncols();
        if self.collapse_u_min {
            if i == 0 {
                0
            } else {
                1 + (i - 1) * self.ncols() + jj
            }
        } else {
            i * self.ncols() + jj
        }
    }

    /// Grid node (i, j) closest to a parameter point, clamped to the grid.
    pub fn nearest_node(&self, u: f64, v: f64) -> (usize, usize) {
        let fu = (u - self.u_range.0) / self.du();
        let i = fu.round().clamp(0.0, self.nu as f64) as usize;
        let fv = (v - self.v_range.0) / self.dv();
        let j = if self.periodic_v {
            (fv.round().rem_euclid(self.nv as f64)) as usize % self.nv
        } else {
            fv.round().clamp(0.0, self.nv as f64) as usize
        };
        (i, j)
    }

    /// Parameter location of grid node (i, j).
    pub fn node_param(&self, i: usize, j: usize) -> (f64, f64) {
        (
            self.u_range.0 + i as f64 * self.du(),
            self.v_range.0 + j as f64 * self.dv(),
        )
    }

    /// Parameter point of (cell, barycentric coordinates).
    pub fn param_of(&self, cell: usize, bary: [f64; 3]) -> (f64, f64) {
        let p = self.cell_params[cell];
        (
            bary[0] * p[0].0 + bary[1] * p[1].0 + bary[2] * p[2].0,
            bary[0] * p[0].1 + bary[1] * p[1].1 + bary[2] * p[2].1,
        )
    }

    /// Cell containing a parameter point, with its barycentric coordinates
    /// (clamped to the fan triangle over a collapsed strip).
    pub fn locate(&self, u: f64, v: f64) -> (usize, [f64; 3]) {
        let fu_raw = (u - self.u_range.0) / self.du();
        let fv_raw = (v - self.v_range.0) / self.dv();
        let i = (fu_raw.floor().max(0.0) as usize).min(self.nu - 1);
        let j = (fv_raw.floor().max(0.0) as usize).min(self.nv - 1);
        let fu = (fu_raw - i as f64).clamp(0.0, 1.0);
        let fv = (fv_raw - j as f64).clamp(0.0, 1.0);
        if self.collapse_u_min && i == 0 {
            // fan triangle (pole, (1,j), (1,j+1)); points of the strip above
            // the diagonal are clamped onto it
            let b2 = fv.min(fu);
            let b1 = (fu - fv).max(0.0);
            return (j, [1.0 - b1 - b2, b1, b2]);
        }
        let base = if self.collapse_u_min {
            self.nv + 2 * ((i - 1) * self.nv + j)
        } else {
            2 * (i * self.nv + j)
        };
        if fv <= fu {
            // triangle ((i,j), (i+1,j), (i+1,j+1))
            (base, [1.0 - fu, fu - fv, fv])
        } else {
            // triangle ((i,j), (i+1,j+1), (i,j+1))
            (base + 1, [1.0 - fv, fu, fv - fu])
        }
    }
}

impl SurfaceMesh {
    /// Builds a mesh, deriving the boundary from unshared directed edges and
    /// validating that every cell is spacelike and the mesh is connected.
    pub fn new(sig: Signature, vertices: Vec<MinkVec>, cells: Vec<[usize; 3]>) -> Result<Self> {
        let nv = vertices.len();
        for (ci, c) in cells.iter().enumerate() {
            for &i in c {
                if i >= nv {
                    return Err(Error::InvalidMesh(format!(
                        "cell {ci} references vertex {i} out of {nv}"
                    )));
                }
            }
        }
        let (boundary, boundary_cell) = derive_boundary(&cells)?;
        let mesh = SurfaceMesh {
            sig,
            vertices,
            cells,
            boundary,
            boundary_cell,
        };
        for ci in 0..mesh.cells.len() {
            let m = mesh.cell_metric(ci)?;
            if m.determinant().sqrt() < 1e-14 {
                return Err(Error::MeshDegenerate(format!("cell {ci} has zero area")));
            }
        }
        Ok(mesh)
    }

    /// Like [`SurfaceMesh::new`] but verifies a caller-supplied boundary
    /// against the derived one (as undirected edge sets).
    pub fn with_boundary(
        sig: Signature,
        vertices: Vec<MinkVec>,
        cells: Vec<[usize; 3]>,
        boundary: Vec<[usize; 2]>,
    ) -> Result<Self> {
        let mesh = Self::new(sig, vertices, cells)?;
        let mut derived: Vec<(usize, usize)> = mesh
            .boundary
            .iter()
            .map(|e| (e[0].min(e[1]), e[0].max(e[1])))
            .collect();
        let mut given: Vec<(usize, usize)> = boundary
            .iter()
            .map(|e| (e[0].min(e[1]), e[0].max(e[1])))
            .collect();
        derived.sort_unstable();
        given.sort_unstable();
        if derived != given {
            return Err(Error::InvalidMesh(
                "declared boundary does not match the cells' unshared faces".into(),
            ));
        }
        Ok(mesh)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    /// Edge vectors (p1 - p0, p2 - p0) of a cell.
    pub fn cell_edges(&self, cell: usize) -> (MinkVec, MinkVec) {
        let [a, b, c] = self.cells[cell];
        (
            self.vertices[b].sub(&self.vertices[a]),
            self.vertices[c].sub(&self.vertices[a]),
        )
    }

    /// Induced metric of a cell from its edge Gram; errors if not SPD.
    pub fn cell_metric(&self, cell: usize) -> Result<Matrix2<f64>> {
        let (ea, eb) = self.cell_edges(cell);
        let g = Matrix2::new(
            mink_inner_unchecked(&ea, &ea),
            mink_inner_unchecked(&ea, &eb),
            mink_inner_unchecked(&ea, &eb),
            mink_inner_unchecked(&eb, &eb),
        );
        if g[(0, 0)] <= 0.0 || g.determinant() <= 0.0 {
            return Err(Error::NotSpacelike(format!("cell {cell} is not spacelike")));
        }
        Ok(g)
    }

    pub fn cell_area(&self, cell: usize) -> Result<f64> {
        Ok(0.5 * self.cell_metric(cell)?.determinant().sqrt())
    }

    /// Total intrinsic volume (sum of cell areas).
    pub fn volume(&self) -> Result<f64> {
        let mut total = 0.0;
        for c in 0..self.cells.len() {
            total += self.cell_area(c)?;
        }
        Ok(total)
    }

    /// Total boundary length under the induced metric.
    pub fn boundary_volume(&self) -> f64 {
        self.boundary
            .iter()
            .map(|e| self.vertices[e[1]].sub(&self.vertices[e[0]]).mink_norm())
            .sum()
    }

    /// Lumped vertex masses: one third of the incident cell areas.
    pub fn lumped_masses(&self) -> Result<Vec<f64>> {
        let mut m = vec![0.0; self.n_vertices()];
        for (ci, c) in self.cells.iter().enumerate() {
            let a = self.cell_area(ci)? / 3.0;
            for &v in c {
                m[v] += a;
            }
        }
        Ok(m)
    }

    /// Lumped boundary masses: half of the incident boundary edge lengths.
    pub fn boundary_masses(&self) -> Vec<f64> {
        let mut m = vec![0.0; self.n_vertices()];
        for e in &self.boundary {
            let len = self.vertices[e[1]].sub(&self.vertices[e[0]]).mink_norm();
            m[e[0]] += 0.5 * len;
            m[e[1]] += 0.5 * len;
        }
        m
    }

    pub fn is_boundary_vertex(&self) -> Vec<bool> {
        let mut b = vec![false; self.n_vertices()];
        for e in &self.boundary {
            b[e[0]] = true;
            b[e[1]] = true;
        }
        b
    }

    /// Tangent plane of a cell as a spacelike subspace.
    pub fn cell_tangent(&self, cell: usize) -> Result<SpacelikeSubspace> {
        let (ea, eb) = self.cell_edges(cell);
        SpacelikeSubspace::new(vec![ea, eb])
    }

    /// Global slope: max of the per-cell tangent plane slopes.
    pub fn slope(&self) -> Result<f64> {
        let mut tau = 1.0f64;
        for c in 0..self.cells.len() {
            tau = tau.max(linalg::slope(&self.cell_tangent(c)?)?);
        }
        Ok(tau)
    }

    /// Outward unit conormal of a boundary edge: the unit tangent vector of
    /// the containing cell that is orthogonal to the edge (induced metric)
    /// and points away from the opposite vertex.
    pub fn conormal(&self, boundary_idx: usize) -> Result<MinkVec> {
        let [a, b] = self.boundary[boundary_idx];
        let cell = self.boundary_cell[boundary_idx];
        let &opp = self.cells[cell]
            .iter()
            .find(|&&w| w != a && w != b)
            .ok_or_else(|| Error::InvalidMesh("degenerate boundary cell".into()))?;
        let e = self.vertices[b].sub(&self.vertices[a]);
        let w = self.vertices[opp].sub(&self.vertices[a]);
        let ee = mink_inner_unchecked(&e, &e);
        let we = mink_inner_unchecked(&w, &e);
        // component of w orthogonal to the edge, flipped to point outward
        let inward = w.axpy(-we / ee, &e);
        let eta = inward.scale(-1.0);
        let norm = eta.mink_norm();
        if norm <= 0.0 {
            return Err(Error::MeshDegenerate(format!(
                "conormal degenerate on boundary edge {boundary_idx}"
            )));
        }
        Ok(eta.scale(1.0 / norm))
    }

    /// Interior angle of `cell` at vertex `v` under the induced metric.
    pub fn cell_angle_at(&self, cell: usize, v: usize) -> Result<f64> {
        let c = self.cells[cell];
        let pos = c
            .iter()
            .position(|&w| w == v)
            .ok_or_else(|| Error::InvalidMesh("vertex not in cell".into()))?;
        let p = &self.vertices[c[pos]];
        let q = &self.vertices[c[(pos + 1) % 3]];
        let r = &self.vertices[c[(pos + 2) % 3]];
        let e1 = q.sub(p);
        let e2 = r.sub(p);
        let cosang = mink_inner_unchecked(&e1, &e2) / (e1.mink_norm() * e2.mink_norm());
        Ok(cosang.clamp(-1.0, 1.0).acos())
    }

    /// Angle-defect Gauss curvature at interior vertices: (2 pi - sum of
    /// incident angles) / (one third of the incident area). Boundary
    /// vertices error.
    pub fn angle_defect_k(&self, v: usize) -> Result<f64> {
        if self.is_boundary_vertex()[v] {
            return Err(Error::BoundaryCurvatureUnavailable(v));
        }
        let mut angle = 0.0;
        let mut area = 0.0;
        for (ci, c) in self.cells.iter().enumerate() {
            if c.contains(&v) {
                angle += self.cell_angle_at(ci, v)?;
                area += self.cell_area(ci)? / 3.0;
            }
        }
        Ok((2.0 * std::f64::consts::PI - angle) / area)
    }

    /// Discrete total turning of the boundary: sum over boundary vertices of
    /// (pi - interior angle sum); equals the geodesic curvature integral of
    /// the piecewise linear boundary.
    pub fn boundary_turning(&self) -> Result<f64> {
        let onb = self.is_boundary_vertex();
        let mut total = 0.0;
        for v in 0..self.n_vertices() {
            if !onb[v] {
                continue;
            }
            let mut angle = 0.0;
            for (ci, c) in self.cells.iter().enumerate() {
                if c.contains(&v) {
                    angle += self.cell_angle_at(ci, v)?;
                }
            }
            total += std::f64::consts::PI - angle;
        }
        Ok(total)
    }

    /// True when the vertex adjacency graph is connected.
    pub fn is_connected(&self) -> bool {
        if self.vertices.is_empty() {
            return false;
        }
        let mut adj: Vec<Vec<usize>> = vec![Vec::new(); self.n_vertices()];
        for c in &self.cells {
            for i in 0..3 {
                adj[c[i]].push(c[(i + 1) % 3]);
                adj[c[(i + 1) % 3]].push(c[i]);
            }
        }
        let mut seen = vec![false; self.n_vertices()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(v) = stack.pop() {
            for &w in &adj[v] {
                if !seen[w] {
                    seen[w] = true;
                    stack.push(w);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// One-ring neighbours of every vertex.
    pub fn vertex_rings(&self) -> Vec<Vec<usize>> {
        let mut rings: Vec<Vec<usize>> = vec![Vec::new(); self.n_vertices()];
        for c in &self.cells {
            for i in 0..3 {
                let (a, b) = (c[i], c[(i + 1) % 3]);
                if !rings[a].contains(&b) {
                    rings[a].push(b);
                }
                if !rings[b].contains(&a) {
                    rings[b].push(a);
                }
            }
        }
        for r in &mut rings {
            r.sort_unstable();
        }
        rings
    }

    /// Mean curvature vector at an interior vertex by a quadratic
    /// least-squares fit of the one-ring (two-ring if the ring is small)
    /// in an adapted tangent/normal frame.
    pub fn vertex_mean_curvature(&self, v: usize, rings: &[Vec<usize>]) -> Result<MinkVec> {
        if self.is_boundary_vertex()[v] {
            return Err(Error::BoundaryCurvatureUnavailable(v));
        }
        let mut nbrs: Vec<usize> = rings[v].clone();
        if nbrs.len() < 6 {
            let mut two_ring: Vec<usize> = nbrs.clone();
            for &w in &nbrs {
                for &x in &rings[w] {
                    if x != v && !two_ring.contains(&x) {
                        two_ring.push(x);
                    }
                }
            }
            two_ring.sort_unstable();
            nbrs = two_ring;
        }
        let offsets: Vec<MinkVec> = nbrs
            .iter()
            .map(|&w| self.vertices[w].sub(&self.vertices[v]))
            .collect();

        // tangent estimate: dominant directions of the offsets (Euclidean
        // SVD), validated as spacelike
        let dim = self.sig.dim();
        let a = DMatrix::from_fn(dim, offsets.len(), |i, j| offsets[j].coords[i]);
        let svd = a.svd(true, false);
        let u = svd.u.as_ref().unwrap();
        let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
        order.sort_by(|&x, &y| {
            svd.singular_values[y]
                .partial_cmp(&svd.singular_values[x])
                .unwrap()
        });
        let t1 = MinkVec::new(u.column(order[0]).iter().cloned().collect(), self.sig)?;
        let t2 = MinkVec::new(u.column(order[1]).iter().cloned().collect(), self.sig)?;
        let tangent = SpacelikeSubspace::new(vec![t1, t2])?;
        let frame = linalg::build_frame(&tangent)?;
        let split = linalg::normal_split_from_frame(&tangent, &frame);

        // tangent coordinates and normal components of each offset
        let e = &frame.l_basis_orthonormal;
        let n_normals = split.n_plus.len() + split.n_minus.len();
        let rows = offsets.len();
        if rows < 6 {
            return Err(Error::BoundaryCurvatureUnavailable(v));
        }
        let mut design = DMatrix::zeros(rows, 6);
        let mut rhs = DMatrix::zeros(rows, n_normals);
        for (r, off) in offsets.iter().enumerate() {
            let x = mink_inner_unchecked(off, &e[0]);
            let y = mink_inner_unchecked(off, &e[1]);
            design[(r, 0)] = 1.0;
            design[(r, 1)] = x;
            design[(r, 2)] = y;
            design[(r, 3)] = 0.5 * x * x;
            design[(r, 4)] = x * y;
            design[(r, 5)] = 0.5 * y * y;
            for (cn, b) in split.n_plus.iter().enumerate() {
                rhs[(r, cn)] = mink_inner_unchecked(off, b);
            }
            for (cn, b) in split.n_minus.iter().enumerate() {
                rhs[(r, split.n_plus.len() + cn)] = -mink_inner_unchecked(off, b);
            }
        }
        let ata = design.transpose() * &design;
        let atb = design.transpose() * &rhs;
        let sol = ata
            .lu()
            .solve(&atb)
            .ok_or_else(|| Error::SolverFailure("curvature fit singular".into()))?;

        // H = trace of the fitted quadratic: per normal direction the fit
        // gives h_xx and h_yy in an orthonormal tangent frame
        let mut h = MinkVec::zero(self.sig);
        for (cn, b) in split
            .n_plus
            .iter()
            .chain(split.n_minus.iter())
            .enumerate()
        {
            let trace = sol[(3, cn)] + sol[(5, cn)];
            h = h.axpy(trace, b);
        }
        Ok(h)
    }
}

/// Directed boundary edges (those appearing in exactly one cell winding)
/// together with their containing cell.
fn derive_boundary(cells: &[[usize; 3]]) -> Result<(Vec<[usize; 2]>, Vec<usize>)> {
    let mut count: HashMap<(usize, usize), (usize, usize)> = HashMap::new();
    for (ci, c) in cells.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (c[i], c[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            let entry = count.entry(key).or_insert((0, ci));
            entry.0 += 1;
            if entry.0 > 2 {
                return Err(Error::InvalidMesh(format!(
                    "edge ({a}, {b}) shared by more than two cells"
                )));
            }
        }
    }
    let mut boundary = Vec::new();
    let mut boundary_cell = Vec::new();
    for (ci, c) in cells.iter().enumerate() {
        for i in 0..3 {
            let (a, b) = (c[i], c[(i + 1) % 3]);
            let key = (a.min(b), a.max(b));
            if count[&key].0 == 1 {
                boundary.push([a, b]);
                boundary_cell.push(ci);
            }
        }
    }
    Ok((boundary, boundary_cell))
}

/// Structured triangulation of a parametric surface with vertices exactly on
/// the immersion. A collapsed edge becomes a single pole vertex with a fan;
/// a periodic seam is stitched without duplicate vertices.
pub fn mesh_from_parametric(
    surface: &ParametricSurface,
    res: usize,
) -> Result<(SurfaceMesh, StructuredGrid)> {
    if res < 2 {
        return Err(Error::BadInput("resolution must be at least 2".into()));
    }
    let d = surface.domain;
    if d.collapse_u_min && !d.periodic_v {
        return Err(Error::BadInput(
            "a collapsed edge requires a periodic angular direction".into(),
        ));
    }
    // periodic angular spans are much longer than the radial span, so they
    // get twice the subdivision count
    let (nu, nv) = (res, if d.periodic_v { 2 * res } else { res });
    let grid0 = StructuredGrid {
        nu,
        nv,
        periodic_v: d.periodic_v,
        collapse_u_min: d.collapse_u_min,
        u_range: d.u_range,
        v_range: d.v_range,
        params: Vec::new(),
        cell_params: Vec::new(),
    };
    let ncols = grid0.ncols();

    let mut vertices = Vec::new();
    let mut params = Vec::new();
    if d.collapse_u_min {
        vertices.push(surface.position(d.u_range.0, d.v_range.0));
        params.push((d.u_range.0, d.v_range.0));
    }
    let i_start = if d.collapse_u_min { 1 } else { 0 };
    for i in i_start..=nu {
        for j in 0..ncols {
            let (u, v) = grid0.node_param(i, j);
            vertices.push(surface.position(u, v));
            params.push((u, v));
        }
    }

    let mut cells = Vec::new();
    let mut cell_params = Vec::new();
    // nv cells per row either way: periodic rows wrap their nv columns,
    // open rows have nv + 1 columns
    let n_vcells = nv;
    // unwrapped parameter of column index (may equal nv on the seam)
    let col_param = |i: usize, jj: usize| -> (f64, f64) {
        (
            d.u_range.0 + i as f64 * grid0.du(),
            d.v_range.0 + jj as f64 * grid0.dv(),
        )
    };
    for i in 0..nu {
        if i == 0 && d.collapse_u_min {
            for j in 0..n_vcells {
                let a = grid0.vertex(1, j);
                let b = grid0.vertex(1, j + 1);
                cells.push([0, a, b]);
                cell_params.push([col_param(0, j), col_param(1, j), col_param(1, j + 1)]);
            }
            continue;
        }
        for j in 0..n_vcells {
            let a = grid0.vertex(i, j);
            let b = grid0.vertex(i + 1, j);
            let c = grid0.vertex(i + 1, j + 1);
            let dd = grid0.vertex(i, j + 1);
            cells.push([a, b, c]);
            cell_params.push([col_param(i, j), col_param(i + 1, j), col_param(i + 1, j + 1)]);
            cells.push([a, c, dd]);
            cell_params.push([col_param(i, j), col_param(i + 1, j + 1), col_param(i, j + 1)]);
        }
    }

    let mesh = SurfaceMesh::new(surface.sig(), vertices, cells).map_err(|e| match e {
        Error::NotSpacelike(msg) => Error::MeshDegenerate(msg),
        other => other,
    })?;
    let grid = StructuredGrid {
        params,
        cell_params,
        ..grid0
    };
    Ok((mesh, grid))
}

/// Piecewise linear gradient of vertex values on a cell, expressed as an
/// ambient tangent vector: solve the 2x2 edge system and push forward.
pub fn cell_gradient(mesh: &SurfaceMesh, cell: usize, values: &[f64]) -> Result<MinkVec> {
    let [a, b, c] = mesh.cells[cell];
    let (ea, eb) = mesh.cell_edges(cell);
    let g = mesh.cell_metric(cell)?;
    let rhs = DVector::from_vec(vec![values[b] - values[a], values[c] - values[a]]);
    let sol = g
        .lu()
        .solve(&rhs)
        .ok_or_else(|| Error::SolverFailure(format!("singular metric on cell {cell}")))?;
    Ok(ea.scale(sol[0]).axpy(sol[1], &eb))
}
