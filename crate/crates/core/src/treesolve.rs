//! Direct O(N) solvers for the tree systems `K t = v` and `Kᵀ ν = w`.
//!
//! Row `p` of `K` couples patch `p` to the tree edges at `p`. Summing the
//! rows of a whole subtree cancels every edge inside it, leaving only the
//! edge to the subtree's parent, so each tree coefficient follows from a
//! subtree sum. The transposed system fixes potential differences across
//! tree edges and is integrated from the root outwards.

use crate::decomposition::{DualTree, EdgeBasisSet, FieldCoeffs, FieldRole};
use crate::error::{Error, Result};

/// Default compatibility tolerance, relative to `‖v‖₁`.
pub const DEFAULT_COMPATIBILITY_TOL: f64 = 1e-8;

/// Solves `K t = v` by accumulating subtree sums from the leaves up.
///
/// Returns the tree coefficients and the residual left at the root,
/// which equals `Σ v`.
pub fn solve_divergence(tree: &DualTree, basis: &EdgeBasisSet, v: &[f64], tol: f64) -> Result<(FieldCoeffs, f64)> {
    let np = tree.parent.len();
    if v.len() != np {
        return Err(Error::Dimension(format!("charge vector has length {}, expected {np}", v.len())));
    }
    let total: f64 = v.iter().sum();
    let scale: f64 = v.iter().map(|x| x.abs()).sum();
    if total.abs() > tol * scale {
        return Err(Error::Incompatible {
            residual: total,
            tolerance: tol * scale,
        });
    }

    debug_assert_eq!(basis.len(), tree.tree_index_of_basis.len());
    // t[j] first accumulates the subtree sum at breadth-first position j + 1,
    // so the sweep runs sequentially through memory
    let mut t: Vec<f64> = tree.order[1..].iter().map(|&p| v[p]).collect();
    let mut root = v[tree.root];
    for j in (0..t.len()).rev() {
        let a = t[j];
        match tree.parent_position[j] as usize {
            0 => root += a,
            k => t[k - 1] += a,
        }
        t[j] = a / tree.signed_length[j];
    }
    Ok((FieldCoeffs::new(FieldRole::Tree, t), root))
}

/// Solves `Kᵀ ν = w` and shifts `ν` so that `ν[ref_patch] = ref_value`.
///
/// Across tree edge `e` with plus patch `p` and minus patch `m` the
/// equation reads `l_e (ν_p - ν_m) = w_e`.
pub fn solve_gradient(
    tree: &DualTree,
    basis: &EdgeBasisSet,
    w: &[f64],
    ref_patch: usize,
    ref_value: f64,
) -> Result<FieldCoeffs> {
    let np = tree.parent.len();
    if ref_patch >= np {
        return Err(Error::Argument(format!("reference patch {ref_patch} out of range ({np} patches)")));
    }
    if w.len() != tree.num_tree_edges() {
        return Err(Error::Dimension(format!(
            "potential right-hand side has length {}, expected {}",
            w.len(),
            tree.num_tree_edges()
        )));
    }
    debug_assert_eq!(basis.len(), tree.tree_index_of_basis.len());
    let mut by_position = vec![0.0; np];
    for (j, &wj) in w.iter().enumerate() {
        // ν_p - ν_q = sign_p · w / l, with sign_p = +1 on the plus patch
        by_position[j + 1] = by_position[tree.parent_position[j] as usize] + wj / tree.signed_length[j];
    }
    let shift = ref_value - by_position[tree.position[ref_patch] as usize];
    let mut nu: Vec<f64> = tree.position.iter().map(|&k| by_position[k as usize] + shift).collect();
    nu[ref_patch] = ref_value;
    Ok(FieldCoeffs::new(FieldRole::Potential, nu))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly::assemble_k;
    use crate::decomposition::{build_dual_tree, build_edge_basis};
    use crate::mesh::{build_topology, generate_structured_square};

    #[test]
    fn two_triangle_divergence_solve() {
        let topo = build_topology(&generate_structured_square(1).unwrap()).unwrap();
        let basis = build_edge_basis(&topo);
        let tree = build_dual_tree(&topo, &basis, 0).unwrap();
        let q = 3.0;
        let (t, res) = solve_divergence(&tree, &basis, &[q, -q], 1e-8).unwrap();
        assert!((t[0] - q / 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(res, 0.0);

        let (t, res) = solve_divergence(&tree, &basis, &[0.0, 0.0], 1e-8).unwrap();
        assert_eq!((t.values, res), (vec![0.0], 0.0));

        assert!(matches!(
            solve_divergence(&tree, &basis, &[1.0, 0.0], 1e-8),
            Err(Error::Incompatible { .. })
        ));
        assert!(matches!(solve_divergence(&tree, &basis, &[1.0], 1e-8), Err(Error::Dimension(_))));
    }

    #[test]
    fn two_triangle_gradient_solve() {
        let topo = build_topology(&generate_structured_square(1).unwrap()).unwrap();
        let basis = build_edge_basis(&topo);
        let tree = build_dual_tree(&topo, &basis, 0).unwrap();
        let nu = solve_gradient(&tree, &basis, &[2f64.sqrt()], 0, 0.0).unwrap();
        assert!(nu[0] == 0.0 && (nu[1] + 1.0).abs() < 1e-15);

        let nu = solve_gradient(&tree, &basis, &[0.0], 1, 5.0).unwrap();
        assert_eq!(nu.values, vec![5.0, 5.0]);
        assert!(solve_gradient(&tree, &basis, &[0.0], 2, 0.0).is_err());
    }

    #[test]
    fn round_trip_through_k() {
        let topo = build_topology(&generate_structured_square(6).unwrap()).unwrap();
        let basis = build_edge_basis(&topo);
        let tree = build_dual_tree(&topo, &basis, 17).unwrap();
        let k = assemble_k(&tree, &basis, &topo);
        let np = topo.num_patches();
        let mut v: Vec<f64> = (0..np).map(|i| ((i * 37 % 11) as f64 - 5.0) * 0.3).collect();
        let mean = v.iter().sum::<f64>() / np as f64;
        v.iter_mut().for_each(|x| *x -= mean);
        let (t, _) = solve_divergence(&tree, &basis, &v, 1e-8).unwrap();
        let kt = k.mul_vec(&t.values);
        let vmax = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        for (a, b) in kt.iter().zip(&v) {
            assert!((a - b).abs() <= 1e-13 * vmax);
        }

        let w: Vec<f64> = (0..tree.num_tree_edges()).map(|j| (j as f64 * 0.7).sin()).collect();
        let nu = solve_gradient(&tree, &basis, &w, 0, 1.5).unwrap();
        let ktnu = k.transpose_mul_vec(&nu.values);
        for (a, b) in ktnu.iter().zip(&w) {
            assert!((a - b).abs() <= 1e-12);
        }
        let shifted = solve_gradient(&tree, &basis, &w, 0, 2.5).unwrap();
        for (a, b) in shifted.values.iter().zip(&nu.values) {
            assert!((a - b - 1.0).abs() < 1e-12);
        }
    }
}
