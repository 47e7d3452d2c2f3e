//! Linear bulk-surface finite elements.
//!
//! One nodal basis serves both the bulk triangulation and its boundary curve.
//! Bulk and surface mass and stiffness matrices are kept separately so that
//! the interface parameters can weight them independently.

use std::ops::{Deref, DerefMut};

use crate::error::{Error, Result};
use crate::linsolve::{spd_solve, SolverOptions};
use crate::mesh::{dist, signed_area, Mesh, Point};
use crate::model::{Problem, SmoothField};
use crate::sparse::{dot, SparseMatrix};

/// Triangles with signed area below this are rejected by [`assemble`].
pub const DEGENERATE_AREA: f64 = 1e-14;

/// One value per mesh vertex.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct NodalVector(Vec<f64>);

impl NodalVector {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn constant(n: usize, c: f64) -> Self {
        Self(vec![c; n])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `self − other`
    pub fn sub(&self, other: &Self) -> Self {
        Self(self.0.iter().zip(&other.0).map(|(a, b)| a - b).collect())
    }
}

impl From<Vec<f64>> for NodalVector {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl Deref for NodalVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for NodalVector {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

/// Element mass matrix of a P1 triangle.
pub fn bulk_element_mass(area: f64) -> [[f64; 3]; 3] {
    let d = area / 6.0;
    let o = area / 12.0;
    [[d, o, o], [o, d, o], [o, o, d]]
}

/// Element stiffness matrix of a P1 triangle (either orientation).
pub fn bulk_element_stiffness(p: [Point; 3]) -> [[f64; 3]; 3] {
    let area = signed_area(p[0], p[1], p[2]);
    let grads = barycentric_gradients(p, area);
    let mut k = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            k[i][j] = area.abs() * (grads[i][0] * grads[j][0] + grads[i][1] * grads[j][1]);
        }
    }
    k
}

fn barycentric_gradients(p: [Point; 3], area: f64) -> [[f64; 2]; 3] {
    let mut g = [[0.0; 2]; 3];
    for (i, gi) in g.iter_mut().enumerate() {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        *gi = [(p[j][1] - p[k][1]) / (2.0 * area), (p[k][0] - p[j][0]) / (2.0 * area)];
    }
    g
}

/// Element mass matrix of a P1 boundary edge.
pub fn surface_element_mass(length: f64) -> [[f64; 2]; 2] {
    [[length / 3.0, length / 6.0], [length / 6.0, length / 3.0]]
}

/// Element Laplace-Beltrami stiffness matrix of a P1 boundary edge.
pub fn surface_element_stiffness(length: f64) -> [[f64; 2]; 2] {
    [[1.0 / length, -1.0 / length], [-1.0 / length, 1.0 / length]]
}

/// Assembled bulk and surface matrices plus the combinations used by the scheme.
#[derive(Debug, Clone)]
pub struct FemMatrices {
    pub m_bulk: SparseMatrix,
    pub m_surf: SparseMatrix,
    pub a_bulk: SparseMatrix,
    pub a_surf: SparseMatrix,
    /// `M = m_bulk + m_surf`
    pub mass: SparseMatrix,
    /// `A = a_bulk + a_surf`
    pub stiffness: SparseMatrix,
    /// `K = M + A`
    pub k: SparseMatrix,
    bulk_row_sums: Vec<f64>,
    surf_row_sums: Vec<f64>,
    mass_row_sums: Vec<f64>,
}

impl FemMatrices {
    pub fn n_dof(&self) -> usize {
        self.mass.nrows()
    }

    /// `ε·a_bulk + δκ·a_surf`, the stiffness of the chemical potential equation.
    pub fn weighted_stiffness(&self, problem: &Problem) -> SparseMatrix {
        self.a_bulk.linear_combination(problem.eps(), &self.a_surf, problem.delta() * problem.kappa())
    }
}

pub fn assemble(mesh: &Mesh) -> Result<FemMatrices> {
    let n = mesh.n_vertices();
    let v = mesh.vertices();
    let nt = mesh.triangles().len();
    let mut mb = Vec::with_capacity(9 * nt);
    let mut ab = Vec::with_capacity(9 * nt);
    for (index, &tri) in mesh.triangles().iter().enumerate() {
        let p = [v[tri[0]], v[tri[1]], v[tri[2]]];
        let area = signed_area(p[0], p[1], p[2]);
        if area < DEGENERATE_AREA {
            return Err(Error::DegenerateTriangle { index, area });
        }
        let me = bulk_element_mass(area);
        let ke = bulk_element_stiffness(p);
        for i in 0..3 {
            for j in 0..3 {
                mb.push((tri[i], tri[j], me[i][j]));
                ab.push((tri[i], tri[j], ke[i][j]));
            }
        }
    }
    let ne = mesh.boundary_edges().len();
    let mut ms = Vec::with_capacity(4 * ne);
    let mut as_ = Vec::with_capacity(4 * ne);
    for &edge in mesh.boundary_edges() {
        let len = dist(v[edge[0]], v[edge[1]]);
        let me = surface_element_mass(len);
        let ke = surface_element_stiffness(len);
        for i in 0..2 {
            for j in 0..2 {
                ms.push((edge[i], edge[j], me[i][j]));
                as_.push((edge[i], edge[j], ke[i][j]));
            }
        }
    }
    let m_bulk = SparseMatrix::from_triplets(n, n, mb)?;
    let a_bulk = SparseMatrix::from_triplets(n, n, ab)?;
    let m_surf = SparseMatrix::from_triplets(n, n, ms)?;
    let a_surf = SparseMatrix::from_triplets(n, n, as_)?;
    let mass = m_bulk.linear_combination(1.0, &m_surf, 1.0);
    let stiffness = a_bulk.linear_combination(1.0, &a_surf, 1.0);
    let k = mass.linear_combination(1.0, &stiffness, 1.0);
    Ok(FemMatrices {
        bulk_row_sums: m_bulk.row_sums(),
        surf_row_sums: m_surf.row_sums(),
        mass_row_sums: mass.row_sums(),
        m_bulk,
        m_surf,
        a_bulk,
        a_surf,
        mass,
        stiffness,
        k,
    })
}

/// Nodal interpolation `v_i = f(x_i, t)`.
pub fn interpolate(mesh: &Mesh, f: &dyn Fn(Point, f64) -> f64, t: f64) -> Result<NodalVector> {
    let mut out = Vec::with_capacity(mesh.n_vertices());
    for (vertex, &x) in mesh.vertices().iter().enumerate() {
        let value = f(x, t);
        if !value.is_finite() {
            return Err(Error::Evaluation { vertex, value });
        }
        out.push(value);
    }
    Ok(NodalVector(out))
}

/// `(1/ε)·m_bulk·W'_Ω(u) + (1/δ)·m_surf·W'_Γ(u)` with nodal evaluation of the potentials.
pub fn nonlinear_load(mats: &FemMatrices, problem: &Problem, u: &[f64]) -> Result<NodalVector> {
    let mut wb = Vec::with_capacity(u.len());
    let mut ws = Vec::with_capacity(u.len());
    for (vertex, &ui) in u.iter().enumerate() {
        let b = problem.w_bulk.derivative(ui) / problem.eps();
        let s = problem.w_surf.derivative(ui) / problem.delta();
        if !b.is_finite() || !s.is_finite() {
            return Err(Error::PotentialOverflow { vertex, value: ui });
        }
        wb.push(b);
        ws.push(s);
    }
    let mut out = mats.m_bulk.mul_vec(&wb);
    let surf = mats.m_surf.mul_vec(&ws);
    out.iter_mut().zip(surf).for_each(|(o, s)| *o += s);
    Ok(NodalVector(out))
}

/// `m_bulk·I(f_bulk) + m_surf·I(f_surf)`; absent fields count as zero.
pub fn source_load(
    mesh: &Mesh,
    mats: &FemMatrices,
    bulk: Option<&crate::model::ScalarField>,
    surf: Option<&crate::model::ScalarField>,
    t: f64,
) -> Result<NodalVector> {
    let mut out = vec![0.0; mats.n_dof()];
    if let Some(f) = bulk {
        let fi = interpolate(mesh, &|x, t| f.eval(x, t), t)?;
        out = mats.m_bulk.mul_vec(&fi);
    }
    if let Some(f) = surf {
        let fi = interpolate(mesh, &|x, t| f.eval(x, t), t)?;
        let s = mats.m_surf.mul_vec(&fi);
        out.iter_mut().zip(s).for_each(|(o, s)| *o += s);
    }
    Ok(NodalVector(out))
}

fn sqrt_form(m: &SparseMatrix, v: &[f64]) -> f64 {
    m.quadratic_form(v).max(0.0).sqrt()
}

/// `√(vᵀKv)`, the discrete H¹ norm on bulk and surface.
pub fn norm_k(mats: &FemMatrices, v: &[f64]) -> f64 {
    sqrt_form(&mats.k, v)
}

/// `√(vᵀMv)`, the combined bulk and surface L² norm.
pub fn norm_m(mats: &FemMatrices, v: &[f64]) -> f64 {
    sqrt_form(&mats.mass, v)
}

/// `√(vᵀAv)`
pub fn seminorm_a(mats: &FemMatrices, v: &[f64]) -> f64 {
    sqrt_form(&mats.stiffness, v)
}

/// Discrete dual norm `√((Md)ᵀ K⁻¹ (Md))`.
pub fn dual_norm(mats: &FemMatrices, d: &[f64], opts: SolverOptions) -> Result<f64> {
    dual_norm_with(&mats.mass, &mats.k, d, opts)
}

/// [`dual_norm`] for explicitly given mass and norm matrices.
pub fn dual_norm_with(mass: &SparseMatrix, k: &SparseMatrix, d: &[f64], opts: SolverOptions) -> Result<f64> {
    let md = mass.mul_vec(d);
    let y = spd_solve(k, &md, opts)?;
    Ok(dot(&md, &y).max(0.0).sqrt())
}

/// Discrete free energy
/// `½ε·uᵀa_bulk·u + ½δκ·uᵀa_surf·u + (1/ε)·1ᵀm_bulk·W_Ω(u) + (1/δ)·1ᵀm_surf·W_Γ(u)`.
pub fn energy(mats: &FemMatrices, problem: &Problem, u: &[f64]) -> f64 {
    let (eps, delta, kappa) = (problem.eps(), problem.delta(), problem.kappa());
    let gradient = 0.5 * eps * mats.a_bulk.quadratic_form(u) + 0.5 * delta * kappa * mats.a_surf.quadratic_form(u);
    let potential: f64 = u
        .iter()
        .zip(mats.bulk_row_sums.iter().zip(&mats.surf_row_sums))
        .map(|(&ui, (&b, &s))| b * problem.w_bulk.value(ui) / eps + s * problem.w_surf.value(ui) / delta)
        .sum();
    gradient + potential
}

/// Combined bulk and surface mass `1ᵀMu`.
pub fn total_mass(mats: &FemMatrices, u: &[f64]) -> f64 {
    dot(&mats.mass_row_sums, u)
}

/// Ritz projection: solves `K r = b` with `b_i ≈ a*(u, φ_i)` computed by
/// quadrature on the discrete mesh (edge-midpoint rule in the bulk, two-point
/// Gauss on boundary edges).
pub fn ritz_project(
    mesh: &Mesh,
    mats: &FemMatrices,
    field: &SmoothField,
    t: f64,
    opts: SolverOptions,
) -> Result<NodalVector> {
    let v = mesh.vertices();
    let mut b = vec![0.0; mesh.n_vertices()];
    for &tri in mesh.triangles() {
        let p = [v[tri[0]], v[tri[1]], v[tri[2]]];
        let area = signed_area(p[0], p[1], p[2]);
        let grads = barycentric_gradients(p, area);
        for (j, k) in [(0usize, 1usize), (1, 2), (2, 0)] {
            let m = [0.5 * (p[j][0] + p[k][0]), 0.5 * (p[j][1] + p[k][1])];
            let (u, gu) = (field.eval(m, t), field.grad(m, t));
            let w = area / 3.0;
            for i in 0..3 {
                let phi = if i == j || i == k { 0.5 } else { 0.0 };
                b[tri[i]] += w * (gu[0] * grads[i][0] + gu[1] * grads[i][1] + u * phi);
            }
        }
    }
    let g = 0.5 / 3f64.sqrt();
    for &[a, c] in mesh.boundary_edges() {
        let (pa, pc) = (v[a], v[c]);
        let len = dist(pa, pc);
        let tangent = [(pc[0] - pa[0]) / len, (pc[1] - pa[1]) / len];
        for s in [0.5 - g, 0.5 + g] {
            let x = [pa[0] + s * (pc[0] - pa[0]), pa[1] + s * (pc[1] - pa[1])];
            let (u, gu) = (field.eval(x, t), field.grad(x, t));
            let du = gu[0] * tangent[0] + gu[1] * tangent[1];
            let w = 0.5 * len;
            b[a] += w * (-du / len + u * (1.0 - s));
            b[c] += w * (du / len + u * s);
        }
    }
    spd_solve(&mats.k, &b, opts).map(NodalVector)
}
