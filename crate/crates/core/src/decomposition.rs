//! Edge basis, dual spanning tree and loop basis.
//!
//! The edge functions are the planar analogue of RWG functions: on each of
//! its two patches `f_e(r) = ±(l_e / 2A)(r - v_free)`, with unit normal
//! component across edge `e` (plus to minus) and zero normal component on
//! the other patch edges. The tree basis is the subset of edge functions on
//! the edges of a spanning tree of the dual graph. Loops are the rotated
//! gradients of interior nodal hat functions written in the edge basis.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{MeshTopology, Point};

#[derive(Clone, Debug)]
pub struct EdgeFunction {
    /// Topology edge id.
    pub edge: usize,
    pub plus: usize,
    pub minus: usize,
    pub length: f64,
    pub plus_free: usize,
    pub minus_free: usize,
    /// Divergence on the plus patch, `l / A⁺`.
    pub div_plus: f64,
    /// Divergence on the minus patch, `-l / A⁻`.
    pub div_minus: f64,
}

impl EdgeFunction {
    pub fn sign_on(&self, patch: usize) -> f64 {
        if patch == self.plus {
            1.0
        } else {
            -1.0
        }
    }

    pub fn divergence_on(&self, patch: usize) -> f64 {
        if patch == self.plus {
            self.div_plus
        } else if patch == self.minus {
            self.div_minus
        } else {
            0.0
        }
    }
}

#[derive(Clone, Debug)]
pub struct EdgeBasisSet {
    pub functions: Vec<EdgeFunction>,
    /// Basis index of each topology edge (`None` on the boundary).
    pub index_of_edge: Vec<Option<usize>>,
}

impl EdgeBasisSet {
    pub fn len(&self) -> usize {
        self.functions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.functions.is_empty()
    }

    /// Value of basis function `i` at point `r` of `patch`.
    pub fn value(&self, topo: &MeshTopology, i: usize, patch: usize, r: Point) -> [f64; 2] {
        let f = &self.functions[i];
        if patch != f.plus && patch != f.minus {
            return [0.0, 0.0];
        }
        let k = topo.local_slot(patch, f.edge);
        let v = local_function(topo, patch, k, r);
        let s = topo.edges[f.edge].sign_on(patch);
        [s * v[0], s * v[1]]
    }

    /// Scatters basis coefficients onto a field indexed by topology edge.
    pub fn to_edge_field(&self, topo: &MeshTopology, coeffs: &[f64]) -> Vec<f64> {
        let mut field = vec![0.0; topo.edges.len()];
        for (f, &c) in self.functions.iter().zip(coeffs) {
            field[f.edge] = c;
        }
        field
    }

    pub fn from_edge_field(&self, field: &[f64]) -> Vec<f64> {
        self.functions.iter().map(|f| field[f.edge]).collect()
    }
}

/// Value at `r` of the local function of patch `t` with unit outward
/// normal component on local edge `k` (opposite local vertex `k`).
pub fn local_function(topo: &MeshTopology, t: usize, k: usize, r: Point) -> [f64; 2] {
    let e = topo.triangle_edges[t][k];
    let p = topo.mesh.vertices[topo.mesh.triangles[t][k]];
    let s = topo.edges[e].length / (2.0 * topo.areas[t]);
    [s * (r[0] - p[0]), s * (r[1] - p[1])]
}

pub fn build_edge_basis(topo: &MeshTopology) -> EdgeBasisSet {
    let mut index_of_edge = vec![None; topo.edges.len()];
    let functions = topo
        .interior_edges
        .iter()
        .enumerate()
        .map(|(i, &e)| {
            index_of_edge[e] = Some(i);
            let edge = &topo.edges[e];
            let minus = edge.minus.expect("interior edge");
            let free = |t: usize| topo.mesh.triangles[t][topo.local_slot(t, e)];
            EdgeFunction {
                edge: e,
                plus: edge.plus,
                minus,
                length: edge.length,
                plus_free: free(edge.plus),
                minus_free: free(minus),
                div_plus: edge.length / topo.areas[edge.plus],
                div_minus: -edge.length / topo.areas[minus],
            }
        })
        .collect();
    EdgeBasisSet {
        functions,
        index_of_edge,
    }
}

/// Breadth-first spanning tree of the dual graph.
#[derive(Clone, Debug)]
pub struct DualTree {
    pub root: usize,
    pub parent: Vec<Option<usize>>,
    /// Tree column (index into `tree_edges`) linking each non-root patch to its parent.
    pub parent_link: Vec<Option<usize>>,
    pub children: Vec<Vec<usize>>,
    /// Patches in breadth-first order; every parent precedes its children.
    pub order: Vec<usize>,
    /// Basis index of tree column `j`. Column `j` links `order[j + 1]` to its parent.
    pub tree_edges: Vec<usize>,
    /// Tree column of each basis function, `None` for cotree edges.
    pub tree_index_of_basis: Vec<Option<usize>>,
    /// Basis indices not in the tree.
    pub cotree: Vec<usize>,
    /// Position of each patch in `order`.
    pub position: Vec<u32>,
    /// Position in `order` of the parent of `order[j + 1]`.
    pub parent_position: Vec<u32>,
    /// `sign · length` of tree column `j` as seen from its child patch.
    pub signed_length: Vec<f64>,
}

impl DualTree {
    pub fn num_tree_edges(&self) -> usize {
        self.tree_edges.len()
    }

    /// Patches with every child before its parent.
    pub fn bottom_up(&self) -> impl Iterator<Item = usize> + '_ {
        self.order.iter().rev().copied()
    }

    pub fn depth(&self) -> usize {
        let mut depth = vec![0usize; self.parent.len()];
        for &p in &self.order[1..] {
            depth[p] = depth[self.parent[p].unwrap()] + 1;
        }
        depth.into_iter().max().unwrap_or(0)
    }
}

pub fn build_dual_tree(topo: &MeshTopology, basis: &EdgeBasisSet, root: usize) -> Result<DualTree> {
    let np = topo.num_patches();
    if root >= np {
        return Err(Error::Argument(format!("root patch {root} out of range ({np} patches)")));
    }
    let mut parent = vec![None; np];
    let mut parent_link = vec![None; np];
    let mut children = vec![Vec::new(); np];
    let mut visited = vec![false; np];
    let mut order = Vec::with_capacity(np);
    let mut tree_edges = Vec::with_capacity(np.saturating_sub(1));
    let mut tree_index_of_basis = vec![None; basis.len()];

    visited[root] = true;
    let mut queue = VecDeque::from([root]);
    while let Some(p) = queue.pop_front() {
        order.push(p);
        // adjacency is sorted by neighbour index
        for &(q, e) in &topo.adjacency[p] {
            if visited[q] {
                continue;
            }
            debug_assert!(basis.index_of_edge[e].is_some());
            visited[q] = true;
            parent[q] = Some(p);
            children[p].push(q);
            queue.push_back(q);
        }
    }
    if let Some(unreachable) = visited.iter().position(|v| !v) {
        return Err(Error::Disconnected { root, unreachable });
    }
    let mut position = vec![0; np];
    for (k, &p) in order.iter().enumerate() {
        position[p] = k as u32;
    }
    let mut parent_position = Vec::with_capacity(np.saturating_sub(1));
    let mut signed_length = Vec::with_capacity(np.saturating_sub(1));
    // columns follow breadth-first order of the child patch
    for &p in &order[1..] {
        let q = parent[p].unwrap();
        let e = topo.adjacency[p]
            .iter()
            .find(|&&(n, _)| n == q)
            .map(|&(_, e)| e)
            .unwrap();
        let b = basis.index_of_edge[e].unwrap();
        let f = &basis.functions[b];
        signed_length.push(f.sign_on(p) * f.length);
        parent_position.push(position[q]);
        parent_link[p] = Some(tree_edges.len());
        tree_index_of_basis[b] = Some(tree_edges.len());
        tree_edges.push(b);
    }
    let cotree = (0..basis.len()).filter(|&b| tree_index_of_basis[b].is_none()).collect();
    Ok(DualTree {
        root,
        parent,
        parent_link,
        children,
        order,
        tree_edges,
        tree_index_of_basis,
        cotree,
        position,
        parent_position,
        signed_length,
    })
}

#[derive(Clone, Debug)]
pub struct Loop {
    pub vertex: usize,
    /// `(basis index, coefficient)` sorted by basis index. Coefficients are
    /// `±1/l_e`, the normal component of the rotated hat gradient.
    pub entries: Vec<(usize, f64)>,
}

#[derive(Clone, Debug)]
pub struct LoopSet {
    pub loops: Vec<Loop>,
    /// Loop index of each vertex, `None` on the boundary.
    pub index_of_vertex: Vec<Option<usize>>,
}

impl LoopSet {
    pub fn len(&self) -> usize {
        self.loops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.loops.is_empty()
    }

    /// `Σ_i coeffs[i] · L_i` as basis coefficients.
    pub fn combine(&self, n_basis: usize, coeffs: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; n_basis];
        for (lp, &c) in self.loops.iter().zip(coeffs) {
            for &(b, w) in &lp.entries {
                out[b] += c * w;
            }
        }
        out
    }

    /// Outward normal components of loop `i` on the three edges of patch `t`.
    pub fn local_fluxes(&self, topo: &MeshTopology, basis: &EdgeBasisSet, i: usize, t: usize) -> [f64; 3] {
        let lp = &self.loops[i];
        let mut out = [0.0; 3];
        for (k, &e) in topo.triangle_edges[t].iter().enumerate() {
            if let Some(b) = basis.index_of_edge[e] {
                if let Ok(pos) = lp.entries.binary_search_by_key(&b, |&(x, _)| x) {
                    out[k] = lp.entries[pos].1 * topo.edges[e].sign_on(t);
                }
            }
        }
        out
    }
}

/// Gradient of the barycentric coordinate of local vertex `k` on patch `t`.
pub fn hat_gradient(topo: &MeshTopology, t: usize, k: usize) -> [f64; 2] {
    let [p0, p1, p2] = topo.mesh.corners(t);
    let c = [p0, p1, p2];
    let (a, b) = (c[(k + 1) % 3], c[(k + 2) % 3]);
    let twice = 2.0 * topo.areas[t];
    [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice]
}

pub fn build_loop_set(topo: &MeshTopology, basis: &EdgeBasisSet) -> LoopSet {
    let mut index_of_vertex = vec![None; topo.mesh.vertices.len()];
    let mut loops = Vec::with_capacity(topo.interior_vertices.len());
    for &v in &topo.interior_vertices {
        let mut entries: Vec<(usize, f64)> = Vec::with_capacity(8);
        for &t in &topo.vertex_triangles[v] {
            let k = topo.mesh.triangles[t].iter().position(|&x| x == v).unwrap();
            let g = hat_gradient(topo, t, k);
            // rotated gradient (∂y λ, -∂x λ)
            let curl = [g[1], -g[0]];
            for (slot, &e) in topo.triangle_edges[t].iter().enumerate() {
                if slot == k || topo.edges[e].plus != t {
                    // opposite edge carries no flux; shared edges are taken from their plus side
                    continue;
                }
                let n = topo.edges[e].normal;
                let b = basis.index_of_edge[e].expect("edges at an interior vertex are interior");
                entries.push((b, curl[0] * n[0] + curl[1] * n[1]));
            }
        }
        entries.sort_unstable_by_key(|&(b, _)| b);
        index_of_vertex[v] = Some(loops.len());
        loops.push(Loop { vertex: v, entries });
    }
    LoopSet {
        loops,
        index_of_vertex,
    }
}

/// Role of a coefficient vector.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum FieldRole {
    /// Tree-basis coefficients `t`, one per tree edge.
    Tree,
    /// Loop coefficients `l`, one per interior vertex.
    Loop,
    /// Full edge-basis coefficients of `D`, one per interior edge.
    Edge,
    /// Patch potentials `ν`.
    Potential,
    /// Patch charge integrals.
    Charge,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldCoeffs {
    pub role: FieldRole,
    pub values: Vec<f64>,
}

impl FieldCoeffs {
    pub fn new(role: FieldRole, values: Vec<f64>) -> Self {
        Self { role, values }
    }

    pub fn zeros(role: FieldRole, n: usize) -> Self {
        Self::new(role, vec![0.0; n])
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

impl std::ops::Index<usize> for FieldCoeffs {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.values[i]
    }
}

/// Checks that the decomposition counts close: `N = N_t + N_l`.
pub fn check_simply_connected(topo: &MeshTopology) -> Result<()> {
    if topo.is_simply_connected() {
        Ok(())
    } else {
        Err(Error::NotSimplyConnected {
            interior_edges: topo.interior_edges.len(),
            expected: topo.expected_interior_edges(),
        })
    }
}
