//! Generators of the ε-tangent cone `T = {x : x·z_l ≤ 0, l ∈ I}`.

use nalgebra::DMatrix;

use super::{dot, ConstraintSystem};
use crate::error::{Error, Result};

const RANK_TOL: f64 = 1e-10;
const ZERO_ROW: f64 = 1e-12;
const POLARITY_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConeKind {
    /// No binding constraints: the cone is all of `R^J`.
    Whole,
    /// Binding rows positively span `R^J`: only the zero direction remains.
    Trivial,
    Proper,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConeBasis {
    pub binding_indices: Vec<usize>,
    pub normal_generators: Vec<Vec<f64>>,
    pub tangent_generators: Vec<Vec<f64>>,
    pub kind: ConeKind,
}

impl ConeBasis {
    /// `s·z ≤ tol·‖s‖·‖z‖` for every generator and binding row.
    pub fn is_polar(&self) -> bool {
        self.tangent_generators.iter().all(|s| {
            let ns = norm(s);
            self.normal_generators
                .iter()
                .all(|z| dot(s, z) <= POLARITY_TOL * ns * norm(z))
        })
    }
}

fn norm(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Orthonormalizes `vectors` in order with re-orthogonalization, returning the
/// basis and the indices of the vectors that contributed a new direction.
fn gram_schmidt<'a, I>(vectors: I, dim: usize) -> (Vec<Vec<f64>>, Vec<usize>)
where
    I: IntoIterator<Item = &'a [f64]>,
{
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (i, v) in vectors.into_iter().enumerate() {
        let scale = norm(v);
        if scale == 0.0 {
            continue;
        }
        let mut r = v.to_vec();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(&r, q);
                r.iter_mut().zip(q).for_each(|(x, y)| *x -= c * y);
            }
        }
        let n = norm(&r);
        if n > RANK_TOL * scale && basis.len() < dim {
            r.iter_mut().for_each(|x| *x /= n);
            basis.push(r);
            kept.push(i);
        }
    }
    (basis, kept)
}

fn unit(dim: usize, j: usize) -> Vec<f64> {
    let mut e = vec![0.0; dim];
    e[j] = 1.0;
    e
}

/// Completes an orthonormal set to a basis of `R^dim`, returning the new vectors.
fn complement(basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let units: Vec<Vec<f64>> = (0..dim).map(|j| unit(dim, j)).collect();
    let all = basis
        .iter()
        .map(Vec::as_slice)
        .chain(units.iter().map(Vec::as_slice));
    let (full, _) = gram_schmidt(all, dim);
    full[basis.len()..].to_vec()
}

/// Builds generators of the tangent cone for the given binding rows.
///
/// Independent binding rows use the projector construction
/// `S = [I − Fᵀ(FFᵀ)⁻¹F; −(I − Fᵀ(FFᵀ)⁻¹F); −(FFᵀ)⁻¹F]`. Dependent rows (more
/// binding faces than their rank, e.g. at a corner of the region) fall back
/// to enumerating the extreme rays of the pointed part of the cone plus a
/// ± basis of its lineality space.
pub fn tangent_generators(cs: &ConstraintSystem, binding: &[usize]) -> Result<ConeBasis> {
    let dim = cs.dimension();
    let mut binding_indices = binding.to_vec();
    binding_indices.sort_unstable();
    binding_indices.dedup();
    if let Some(&bad) = binding_indices.iter().find(|&&l| l >= cs.rows().len()) {
        return Err(Error::InvalidConfig(format!("constraint index {bad} out of range")));
    }
    let normal_generators: Vec<Vec<f64>> =
        binding_indices.iter().map(|&l| cs.row(l).to_vec()).collect();

    if binding_indices.is_empty() {
        let tangent_generators = (0..dim)
            .flat_map(|j| {
                let e = unit(dim, j);
                let neg = e.iter().map(|x| -x).collect();
                [e, neg]
            })
            .collect();
        return Ok(ConeBasis {
            binding_indices,
            normal_generators,
            tangent_generators,
            kind: ConeKind::Whole,
        });
    }

    let (row_basis, independent) =
        gram_schmidt(normal_generators.iter().map(Vec::as_slice), dim);
    let tangent_generators = if independent.len() == normal_generators.len() {
        projector_generators(&normal_generators, &row_basis, dim)?
    } else {
        enumerate_generators(&normal_generators, &row_basis, dim)
    };
    let kind = if tangent_generators.is_empty() {
        ConeKind::Trivial
    } else {
        ConeKind::Proper
    };
    Ok(ConeBasis {
        binding_indices,
        normal_generators,
        tangent_generators,
        kind,
    })
}

// Evaluated through the orthonormal row basis `Q` with `F = LQ`, so that
// `I − Fᵀ(FFᵀ)⁻¹F = I − QᵀQ` and `(FFᵀ)⁻¹F = L⁻ᵀQ`; this avoids squaring the
// condition number when two binding rows are nearly parallel.
fn projector_generators(rows: &[Vec<f64>], basis: &[Vec<f64>], dim: usize) -> Result<Vec<Vec<f64>>> {
    let k = rows.len();
    let q = DMatrix::from_fn(k, dim, |i, j| basis[i][j]);
    let f = DMatrix::from_fn(k, dim, |i, j| rows[i][j]);
    let l = &f * q.transpose();
    let dual = l
        .transpose()
        .solve_upper_triangular(&q)
        .filter(|d| d.iter().all(|x| x.is_finite()))
        .ok_or(Error::SingularNormalEquations)?;
    let projector = DMatrix::<f64>::identity(dim, dim) - q.transpose() * &q;

    let mut out = Vec::with_capacity(2 * dim + k);
    let rows_of = |m: &DMatrix<f64>, sign: f64| -> Vec<Vec<f64>> {
        (0..m.nrows())
            .map(|i| (0..m.ncols()).map(|j| sign * m[(i, j)]).collect())
            .collect()
    };
    out.extend(rows_of(&projector, 1.0));
    out.extend(rows_of(&projector, -1.0));
    out.extend(rows_of(&dual, -1.0));
    out.retain(|s: &Vec<f64>| norm(s) >= ZERO_ROW);
    Ok(out)
}

fn enumerate_generators(rows: &[Vec<f64>], row_basis: &[Vec<f64>], dim: usize) -> Vec<Vec<f64>> {
    let k = row_basis.len();
    // binding rows expressed in row-space coordinates
    let reduced: Vec<Vec<f64>> = rows
        .iter()
        .map(|z| row_basis.iter().map(|q| dot(z, q)).collect())
        .collect();
    let tols: Vec<f64> = rows.iter().map(|z| POLARITY_TOL * norm(z)).collect();

    let mut out: Vec<Vec<f64>> = Vec::new();
    for subset in combinations(rows.len(), k - 1) {
        let (sub_basis, kept) =
            gram_schmidt(subset.iter().map(|&i| reduced[i].as_slice()), k);
        if kept.len() != k - 1 {
            continue;
        }
        let d = match complement(&sub_basis, k).into_iter().next() {
            Some(d) => d,
            None => continue,
        };
        for sign in [1.0, -1.0] {
            let v: Vec<f64> = d.iter().map(|x| sign * x).collect();
            if reduced.iter().zip(&tols).all(|(r, t)| dot(r, &v) <= *t) {
                let mut x = vec![0.0; dim];
                for (c, q) in v.iter().zip(row_basis) {
                    x.iter_mut().zip(q).for_each(|(xi, qi)| *xi += c * qi);
                }
                let n = norm(&x);
                x.iter_mut().for_each(|xi| *xi /= n);
                let duplicate = out
                    .iter()
                    .any(|y| y.iter().zip(&x).all(|(a, b)| (a - b).abs() < 1e-9));
                if !duplicate {
                    out.push(x);
                }
            }
        }
    }
    for n in complement(row_basis, dim) {
        let neg = n.iter().map(|x| -x).collect();
        out.push(n);
        out.push(neg);
    }
    out
}

fn combinations(n: usize, r: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(r);
    fn rec(start: usize, n: usize, r: usize, current: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if current.len() == r {
            out.push(current.clone());
            return;
        }
        for i in start..n {
            current.push(i);
            rec(i + 1, n, r, current, out);
            current.pop();
        }
    }
    rec(0, n, r, &mut current, &mut out);
    out
}
