//! Discrete operators and right-hand sides.
//!
//! Vector fields in the edge-function space are carried as *edge fields*:
//! one normal component per topology edge, measured along the edge's
//! global normal (out of its plus patch). Interior slots hold edge-basis
//! coefficients; boundary slots hold the prescribed outward normal `D`
//! component. On patch `t` such a field is `Σ_k F_k φ_k` where `φ_k` is the
//! local function with unit outward normal component on local edge `k` and
//! `F_k = sign · field[edge]`.

use crate::decomposition::{local_function, DualTree, EdgeBasisSet, FieldCoeffs, FieldRole, LoopSet};
use crate::error::{Error, Result};
use crate::mesh::MeshTopology;
use crate::problem::{ProblemSpec, Source};
use crate::quadrature::{self, GAUSS3};
use crate::sparse::SparseMatrix;

pub type LocalMatrix = [[f64; 3]; 3];

/// `∫_T φ_i · φ_j` for the three local functions of patch `t`.
pub fn local_mass(topo: &MeshTopology, t: usize) -> LocalMatrix {
    let corners = topo.mesh.corners(t);
    let area = topo.areas[t];
    let mut m = [[0.0; 3]; 3];
    for &(b, w) in &GAUSS3 {
        let r = quadrature::map_point(&corners, b);
        let phi = [0, 1, 2].map(|k| local_function(topo, t, k, r));
        for i in 0..3 {
            for j in i..3 {
                m[i][j] += w * area * (phi[i][0] * phi[j][0] + phi[i][1] * phi[j][1]);
            }
        }
    }
    for i in 0..3 {
        for j in 0..i {
            m[i][j] = m[j][i];
        }
    }
    m
}

/// Local outward fluxes of an edge field on patch `t`.
#[inline]
pub fn local_fluxes(topo: &MeshTopology, t: usize, field: &[f64]) -> [f64; 3] {
    topo.triangle_edges[t].map(|e| topo.edges[e].sign_on(t) * field[e])
}

#[inline]
fn bilinear(m: &LocalMatrix, a: &[f64; 3], b: &[f64; 3]) -> f64 {
    let mut s = 0.0;
    for i in 0..3 {
        for j in 0..3 {
            s += a[i] * m[i][j] * b[j];
        }
    }
    s
}

#[inline]
fn mat_vec(m: &LocalMatrix, a: &[f64; 3]) -> [f64; 3] {
    [0, 1, 2].map(|i| m[i][0] * a[0] + m[i][1] * a[1] + m[i][2] * a[2])
}

/// Local mass matrices of every patch.
#[derive(Clone, Debug)]
pub struct EdgeMass {
    pub local: Vec<LocalMatrix>,
}

impl EdgeMass {
    pub fn new(topo: &MeshTopology) -> Self {
        Self {
            local: (0..topo.num_patches()).map(|t| local_mass(topo, t)).collect(),
        }
    }

    /// `∫ a · b` for two edge fields.
    pub fn inner(&self, topo: &MeshTopology, a: &[f64], b: &[f64]) -> f64 {
        self.local
            .iter()
            .enumerate()
            .map(|(t, m)| bilinear(m, &local_fluxes(topo, t, a), &local_fluxes(topo, t, b)))
            .sum()
    }

    pub fn norm(&self, topo: &MeshTopology, a: &[f64]) -> f64 {
        self.inner(topo, a, a).max(0.0).sqrt()
    }

    /// `∫ f_e · a` for every edge `e`, as an edge-indexed vector.
    pub fn apply(&self, topo: &MeshTopology, a: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; topo.edges.len()];
        for (t, m) in self.local.iter().enumerate() {
            let y = mat_vec(m, &local_fluxes(topo, t, a));
            for (k, &e) in topo.triangle_edges[t].iter().enumerate() {
                out[e] += topo.edges[e].sign_on(t) * y[k];
            }
        }
        out
    }
}

/// `N_p × N_t` pulse-tested divergence matrix of the tree basis.
pub fn assemble_k(tree: &DualTree, basis: &EdgeBasisSet, topo: &MeshTopology) -> SparseMatrix {
    let mut triplets = Vec::with_capacity(2 * tree.num_tree_edges());
    for (j, &b) in tree.tree_edges.iter().enumerate() {
        let f = &basis.functions[b];
        triplets.push((f.plus, j, f.length));
        triplets.push((f.minus, j, -f.length));
    }
    SparseMatrix::from_triplets(topo.num_patches(), tree.num_tree_edges(), triplets)
}

/// Boundary edge field carrying the prescribed outward `n·D = -ε g`.
pub fn boundary_flux_field(spec: &ProblemSpec, topo: &MeshTopology) -> Vec<f64> {
    let mut field = vec![0.0; topo.edges.len()];
    if spec.neumann.is_zero() {
        return field;
    }
    let eps = spec.permittivity();
    // two-point Gauss-Legendre average of g along the edge
    let s = 0.5 / 3f64.sqrt();
    for &e in &topo.boundary_edges {
        let [a, b] = topo.edges[e].vertices.map(|v| topo.mesh.vertices[v]);
        let at = |u: f64| [a[0] + u * (b[0] - a[0]), a[1] + u * (b[1] - a[1])];
        let g = 0.5 * (spec.neumann.value(at(0.5 - s)) + spec.neumann.value(at(0.5 + s)));
        field[e] = -eps * g;
    }
    field
}

#[derive(Clone, Debug)]
pub struct ChargeVector {
    pub values: FieldCoeffs,
    /// `Σ_i V_i`: zero for a compatible pure Neumann problem.
    pub compatibility_residual: f64,
}

/// Per-patch source integral minus the prescribed boundary outflux.
pub fn assemble_charge_rhs(spec: &ProblemSpec, topo: &MeshTopology) -> Result<ChargeVector> {
    spec.validate()?;
    let np = topo.num_patches();
    let mut v = vec![0.0; np];
    for source in &spec.sources {
        match source {
            Source::Density(rho) => {
                for (t, vt) in v.iter_mut().enumerate() {
                    let corners = topo.mesh.corners(t);
                    *vt += quadrature::integrate(&corners, topo.areas[t], |p| rho(p[0], p[1]));
                }
            }
            Source::Point { x, y, q } => {
                let t = topo.mesh.locate([*x, *y]).ok_or(Error::Location(*x, *y))?;
                v[t] += q;
            }
        }
    }
    if !spec.neumann.is_zero() {
        let b = boundary_flux_field(spec, topo);
        for &e in &topo.boundary_edges {
            let edge = &topo.edges[e];
            v[edge.plus] -= edge.length * b[e];
        }
    }
    let compatibility_residual = v.iter().sum();
    Ok(ChargeVector {
        values: FieldCoeffs::new(FieldRole::Charge, v),
        compatibility_residual,
    })
}

/// Gram matrix `∫ L_i · L_j` of the loop basis.
pub fn assemble_loop_gram(loops: &LoopSet, basis: &EdgeBasisSet, topo: &MeshTopology) -> SparseMatrix {
    let n = loops.len();
    let mut triplets = Vec::with_capacity(7 * n);
    for t in 0..topo.num_patches() {
        let mut present = [(0usize, [0.0; 3]); 3];
        let mut count = 0;
        for &v in &topo.mesh.triangles[t] {
            if let Some(i) = loops.index_of_vertex[v] {
                present[count] = (i, loops.local_fluxes(topo, basis, i, t));
                count += 1;
            }
        }
        if count == 0 {
            continue;
        }
        let present = &present[..count];
        let m = local_mass(topo, t);
        for (a, (i, fi)) in present.iter().enumerate() {
            for (j, fj) in &present[a..] {
                let g = bilinear(&m, fi, fj);
                triplets.push((*i, *j, g));
                if i != j {
                    triplets.push((*j, *i, g));
                }
            }
        }
    }
    SparseMatrix::from_triplets(n, n, triplets).with_symmetric(true)
}

/// `∫ L_i · D` for every loop, `D` given as an edge field.
pub fn loop_projection(loops: &LoopSet, basis: &EdgeBasisSet, topo: &MeshTopology, field: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; loops.len()];
    for t in 0..topo.num_patches() {
        let mut m = None;
        for &v in &topo.mesh.triangles[t] {
            if let Some(i) = loops.index_of_vertex[v] {
                let m = m.get_or_insert_with(|| local_mass(topo, t));
                let fl = loops.local_fluxes(topo, basis, i, t);
                out[i] += bilinear(m, &fl, &local_fluxes(topo, t, field));
            }
        }
    }
    out
}

/// Edge field of `D_tree = Σ t_j T_j`.
pub fn tree_field(tree: &DualTree, basis: &EdgeBasisSet, topo: &MeshTopology, t: &FieldCoeffs) -> Vec<f64> {
    let mut field = vec![0.0; topo.edges.len()];
    for (&b, &c) in tree.tree_edges.iter().zip(&t.values) {
        field[basis.functions[b].edge] = c;
    }
    field
}

/// `[V_d]_i = ∫ L_i · D_tree`.
pub fn assemble_loop_projection_rhs(
    loops: &LoopSet,
    tree: &DualTree,
    t: &FieldCoeffs,
    basis: &EdgeBasisSet,
    topo: &MeshTopology,
) -> Vec<f64> {
    loop_projection(loops, basis, topo, &tree_field(tree, basis, topo, t))
}

/// `[V_φ]_j = ∫ T_j · D / (ε_r ε_0)` for every tree column `j`.
///
/// `d_field` is the edge field of the cleaned `D`, boundary slots included.
pub fn assemble_potential_rhs(
    basis: &EdgeBasisSet,
    tree: &DualTree,
    d_field: &[f64],
    spec: &ProblemSpec,
    topo: &MeshTopology,
) -> Vec<f64> {
    let inv_eps = 1.0 / spec.permittivity();
    tree.tree_edges
        .iter()
        .map(|&b| {
            let f = &basis.functions[b];
            let mut s = 0.0;
            for p in [f.plus, f.minus] {
                let m = local_mass(topo, p);
                let y = mat_vec(&m, &local_fluxes(topo, p, d_field));
                s += f.sign_on(p) * y[topo.local_slot(p, f.edge)];
            }
            s * inv_eps
        })
        .collect()
}

/// `∫_p ∇·D` over every patch for edge-basis coefficients `d`.
pub fn patch_divergence_integrals(basis: &EdgeBasisSet, topo: &MeshTopology, d: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; topo.num_patches()];
    for (f, &c) in basis.functions.iter().zip(d) {
        out[f.plus] += c * f.length;
        out[f.minus] -= c * f.length;
    }
    out
}
