//! Minimal sparse kernels for the Neumann solve: symmetric CSR assembly,
//! an envelope (skyline) Cholesky factorization and a Jacobi-preconditioned
//! conjugate gradient fallback. Everything is deterministic: assembly order,
//! factorization and iteration make no data-dependent reordering.

use crate::error::{Error, Result};
use std::collections::BTreeMap;

/// Symmetric sparse matrix in CSR form (full storage, both triangles).
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub n: usize,
    pub indptr: Vec<usize>,
    pub indices: Vec<usize>,
    pub data: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from (row, col, value) triplets, summing duplicates.
    pub fn from_triplets(n: usize, triplets: &[(usize, usize, f64)]) -> CsrMatrix {
        let mut rows: Vec<BTreeMap<usize, f64>> = vec![BTreeMap::new(); n];
        for &(r, c, v) in triplets {
            *rows[r].entry(c).or_insert(0.0) += v;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut data = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                indices.push(c);
                data.push(v);
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            n,
            indptr,
            indices,
            data,
        }
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        for r in 0..self.n {
            let mut acc = 0.0;
            for k in self.indptr[r]..self.indptr[r + 1] {
                acc += self.data[k] * x[self.indices[k]];
            }
            y[r] = acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                if self.indices[k] == r {
                    d[r] = self.data[k];
                }
            }
        }
        d
    }

    /// Returns a copy with row/column `pin` replaced by the identity row.
    pub fn pinned(&self, pin: usize) -> CsrMatrix {
        let mut triplets = Vec::with_capacity(self.data.len() + 1);
        for r in 0..self.n {
            for k in self.indptr[r]..self.indptr[r + 1] {
                let c = self.indices[k];
                if r == pin || c == pin {
                    continue;
                }
                triplets.push((r, c, self.data[k]));
            }
        }
        triplets.push((pin, pin, 1.0));
        CsrMatrix::from_triplets(self.n, &triplets)
    }
}

/// Envelope Cholesky factor U (A = U'U) stored column-wise from each
/// column's first nonzero row.
pub struct SkylineCholesky {
    n: usize,
    first_row: Vec<usize>,
    offsets: Vec<usize>,
    values: Vec<f64>,
}

impl SkylineCholesky {
    pub fn factor(a: &CsrMatrix) -> Result<SkylineCholesky> {
        let n = a.n;
        // column profiles from the symmetric pattern
        let mut first_row: Vec<usize> = (0..n).collect();
        for r in 0..n {
            for k in a.indptr[r]..a.indptr[r + 1] {
                let c = a.indices[k];
                if r < first_row[c] {
                    first_row[c] = r;
                }
            }
        }
        let mut offsets = Vec::with_capacity(n + 1);
        offsets.push(0usize);
        for (j, &fr) in first_row.iter().enumerate() {
            offsets.push(offsets[j] + (j - fr + 1));
        }
        let mut values = vec![0.0; offsets[n]];

        // scatter A's upper triangle into the envelope
        for r in 0..n {
            for k in a.indptr[r]..a.indptr[r + 1] {
                let c = a.indices[k];
                if r <= c {
                    let idx = offsets[c] + (r - first_row[c]);
                    values[idx] = a.data[k];
                }
            }
        }

        // column-oriented factorization within the envelope
        for j in 0..n {
            let fr_j = first_row[j];
            for i in fr_j..j {
                let fr_i = first_row[i];
                let start = fr_i.max(fr_j);
                let mut sum = values[offsets[j] + (i - fr_j)];
                for k in start..i {
                    sum -= values[offsets[i] + (k - fr_i)] * values[offsets[j] + (k - fr_j)];
                }
                let diag = values[offsets[i] + (i - fr_i)];
                values[offsets[j] + (i - fr_j)] = sum / diag;
            }
            let mut d = values[offsets[j] + (j - fr_j)];
            for k in fr_j..j {
                let v = values[offsets[j] + (k - fr_j)];
                d -= v * v;
            }
            if d <= 0.0 || !d.is_finite() {
                return Err(Error::SolverFailure(format!(
                    "nonpositive pivot {d:.3e} at column {j}"
                )));
            }
            values[offsets[j] + (j - fr_j)] = d.sqrt();
        }

        Ok(SkylineCholesky {
            n,
            first_row,
            offsets,
            values,
        })
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        // forward: U' y = b
        let mut y = vec![0.0; n];
        for j in 0..n {
            let fr = self.first_row[j];
            let mut sum = b[j];
            for k in fr..j {
                sum -= self.values[self.offsets[j] + (k - fr)] * y[k];
            }
            y[j] = sum / self.values[self.offsets[j] + (j - fr)];
        }
        // backward: U x = y
        let mut x = y;
        for j in (0..n).rev() {
            let fr = self.first_row[j];
            x[j] /= self.values[self.offsets[j] + (j - fr)];
            let xj = x[j];
            for k in fr..j {
                x[k] -= self.values[self.offsets[j] + (k - fr)] * xj;
            }
        }
        x
    }
}

/// Jacobi-preconditioned CG on a singular-consistent SPD system, keeping
/// iterates orthogonal to the constant kernel.
pub fn pcg_project_constants(
    a: &CsrMatrix,
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.n;
    let project = |v: &mut [f64]| {
        let mean = v.iter().sum::<f64>() / n as f64;
        for x in v.iter_mut() {
            *x -= mean;
        }
    };
    let diag = a.diagonal();
    let inv_diag: Vec<f64> = diag
        .iter()
        .map(|&d| if d.abs() > 1e-300 { 1.0 / d } else { 0.0 })
        .collect();

    let mut rhs = b.to_vec();
    project(&mut rhs);
    let b_norm = rhs.iter().map(|x| x * x).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(vec![0.0; n]);
    }

    let mut x = vec![0.0; n];
    let mut r = rhs.clone();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    project(&mut z);
    let mut p = z.clone();
    let mut rz = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
    let mut ap = vec![0.0; n];

    for _ in 0..max_iter {
        a.matvec(&p, &mut ap);
        let pap = p.iter().zip(&ap).map(|(a, b)| a * b).sum::<f64>();
        if pap <= 0.0 {
            return Err(Error::SolverFailure("CG curvature nonpositive".into()));
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= rel_tol * b_norm {
            project(&mut x);
            return Ok(x);
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        project(&mut z);
        let rz_new = r.iter().zip(&z).map(|(a, b)| a * b).sum::<f64>();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::SolverFailure(format!(
        "CG did not reach {rel_tol:.1e} in {max_iter} iterations"
    )))
}
