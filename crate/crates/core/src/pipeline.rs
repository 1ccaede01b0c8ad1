//! The two-stage solve: tree solve for `D`, loop removal, potential recovery.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::assembly::{
    assemble_charge_rhs, assemble_loop_gram, assemble_potential_rhs, boundary_flux_field, loop_projection,
    patch_divergence_integrals, tree_field, EdgeMass,
};
use crate::decomposition::{
    build_dual_tree, build_edge_basis, build_loop_set, check_simply_connected, DualTree, EdgeBasisSet, FieldCoeffs,
    FieldRole, LoopSet,
};
use crate::error::{Error, Result};
use crate::krylov::{cg_solve, gmres_solve, IterSettings, SolveStats};
use crate::mesh::{build_topology, MeshTopology, Point, TriMesh};
use crate::problem::ProblemSpec;
use crate::sparse::SparseMatrix;
use crate::treesolve::{solve_divergence, solve_gradient, DEFAULT_COMPATIBILITY_TOL};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SolverChoice {
    #[default]
    Cg,
    Gmres,
}

impl std::str::FromStr for SolverChoice {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "cg" => Ok(SolverChoice::Cg),
            "gmres" => Ok(SolverChoice::Gmres),
            other => Err(Error::Argument(format!("unknown solver '{other}' (expected cg or gmres)"))),
        }
    }
}

impl std::fmt::Display for SolverChoice {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            SolverChoice::Cg => "cg",
            SolverChoice::Gmres => "gmres",
        })
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOptions {
    pub settings: IterSettings,
    pub solver: SolverChoice,
    /// Root patch of the dual spanning tree.
    pub root: usize,
    /// Tolerance on `|Σ V_ρ|` relative to `‖V_ρ‖₁`.
    pub compatibility_tol: f64,
}

impl Default for PipelineOptions {
    fn default() -> Self {
        Self {
            settings: IterSettings::default(),
            solver: SolverChoice::Cg,
            root: 0,
            compatibility_tol: DEFAULT_COMPATIBILITY_TOL,
        }
    }
}

/// Topology and bases of one mesh, reusable across problems.
#[derive(Clone, Debug)]
pub struct Discretization {
    pub topo: MeshTopology,
    pub basis: EdgeBasisSet,
    pub tree: DualTree,
    pub loops: LoopSet,
}

impl Discretization {
    pub fn new(mesh: &TriMesh, root: usize) -> Result<Self> {
        let topo = build_topology(mesh)?;
        check_simply_connected(&topo)?;
        let basis = build_edge_basis(&topo);
        let tree = build_dual_tree(&topo, &basis, root)?;
        let loops = build_loop_set(&topo, &basis);
        Ok(Self { topo, basis, tree, loops })
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct StageTimings {
    pub setup: f64,
    pub stage1: f64,
    pub removal: f64,
    pub stage2: f64,
    pub total: f64,
    /// The tree solves alone, without right-hand-side assembly.
    pub tree_solve1: f64,
    pub tree_solve2: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct SolveReport {
    pub num_edge_basis: usize,
    pub num_tree: usize,
    pub num_loops: usize,
    pub num_patches: usize,
    pub solver: String,
    pub tolerance: f64,
    pub restart: usize,
    pub compatibility_residual: f64,
    pub projection_iterations: usize,
    pub projection_residual: f64,
    /// `max_i |∫ L_i · D| / ‖D‖` for the cleaned field.
    pub loop_projection_norm: f64,
    pub d_norm: f64,
    /// `|Σ V_ρ|` left at the tree root by the divergence solve.
    pub tree_residual_stage1: f64,
    /// `‖Kᵀ ν - V_φ‖∞ / ‖V_φ‖∞`.
    pub tree_residual_stage2: f64,
    pub reference_patch: usize,
    pub timings: StageTimings,
}

#[derive(Clone, Debug)]
pub struct Solution {
    pub disc: Discretization,
    pub potential: FieldCoeffs,
    /// Cleaned `D` in the edge basis.
    pub d: FieldCoeffs,
    pub tree_coeffs: FieldCoeffs,
    pub loop_coeffs: FieldCoeffs,
    /// Cleaned `D` as an edge field, boundary slots included.
    pub d_field: Vec<f64>,
    pub charge: FieldCoeffs,
    pub v_phi: Vec<f64>,
    pub report: SolveReport,
}

fn secs(start: Instant) -> f64 {
    start.elapsed().as_secs_f64()
}

/// Projects the loop content out of `field` (an edge field).
///
/// Returns the cleaned field, the loop coefficients and solver stats.
#[allow(clippy::too_many_arguments)]
pub fn remove_divergence_free(
    field: &[f64],
    loops: &LoopSet,
    gram: &SparseMatrix,
    basis: &EdgeBasisSet,
    topo: &MeshTopology,
    settings: &IterSettings,
    solver: SolverChoice,
) -> Result<(Vec<f64>, FieldCoeffs, SolveStats)> {
    if loops.is_empty() {
        return Ok((field.to_vec(), FieldCoeffs::zeros(FieldRole::Loop, 0), SolveStats::default()));
    }
    let v_d = loop_projection(loops, basis, topo, field);
    let (l, stats) = match solver {
        SolverChoice::Cg => cg_solve(gram, &v_d, settings)?,
        SolverChoice::Gmres => gmres_solve(gram, &v_d, settings)?,
    };
    let correction = loops.combine(basis.len(), &l);
    let mut cleaned = field.to_vec();
    for (f, c) in basis.functions.iter().zip(&correction) {
        cleaned[f.edge] -= c;
    }
    Ok((cleaned, FieldCoeffs::new(FieldRole::Loop, l), stats))
}

pub fn solve_poisson(mesh: &TriMesh, spec: &ProblemSpec, settings: &IterSettings, solver: SolverChoice) -> Result<Solution> {
    let options = PipelineOptions {
        settings: settings.clone(),
        solver,
        ..Default::default()
    };
    solve_poisson_with(mesh, spec, &options)
}

pub fn solve_poisson_with(mesh: &TriMesh, spec: &ProblemSpec, options: &PipelineOptions) -> Result<Solution> {
    let start = Instant::now();
    spec.validate()?;
    options.settings.validate()?;
    let disc = Discretization::new(mesh, options.root)?;
    let setup = secs(start);
    let mut sol = solve_on(disc, spec, options)?;
    sol.report.timings.setup = setup;
    sol.report.timings.total += setup;
    Ok(sol)
}

/// Runs both stages on an already built discretization.
pub fn solve_on(disc: Discretization, spec: &ProblemSpec, options: &PipelineOptions) -> Result<Solution> {
    let start = Instant::now();
    let Discretization { topo, basis, tree, loops } = &disc;
    let np = topo.num_patches();
    let reference = spec.reference.point;
    let ref_patch = topo.mesh.locate(reference).ok_or(Error::Location(reference[0], reference[1]))?;

    // stage 1: ∇·D = ρ on the tree
    let t0 = Instant::now();
    let charge = assemble_charge_rhs(spec, topo)?;
    let t1 = Instant::now();
    let (t, root_residual) = solve_divergence(tree, basis, &charge.values.values, options.compatibility_tol)?;
    let tree_solve1 = secs(t1);
    let mut field = tree_field(tree, basis, topo, &t);
    let boundary = boundary_flux_field(spec, topo);
    for &e in &topo.boundary_edges {
        field[e] = boundary[e];
    }
    let stage1 = secs(t0);

    // divergence-free removal
    let t0 = Instant::now();
    let gram = assemble_loop_gram(loops, basis, topo);
    let (d_field, l, stats) =
        remove_divergence_free(&field, loops, &gram, basis, topo, &options.settings, options.solver)?;
    let removal = secs(t0);

    // stage 2: ∇φ = -D/ε through the transposed tree system
    let t0 = Instant::now();
    let v_phi = assemble_potential_rhs(basis, tree, &d_field, spec, topo);
    let t1 = Instant::now();
    let potential = solve_gradient(tree, basis, &v_phi, ref_patch, spec.reference.value)?;
    let tree_solve2 = secs(t1);
    let stage2 = secs(t0);
    let total = secs(start);

    // audits, not timed
    let mass = EdgeMass::new(topo);
    let d_norm = mass.norm(topo, &d_field);
    let after = loop_projection(loops, basis, topo, &d_field);
    let worst = after.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let loop_projection_norm = if d_norm > 0.0 { worst / d_norm } else { worst };
    let tree_residual_stage2 = transpose_residual(tree, basis, &potential.values, &v_phi);

    let d = FieldCoeffs::new(FieldRole::Edge, basis.from_edge_field(&d_field));
    let report = SolveReport {
        num_edge_basis: basis.len(),
        num_tree: tree.num_tree_edges(),
        num_loops: loops.len(),
        num_patches: np,
        solver: options.solver.to_string(),
        tolerance: options.settings.tolerance,
        restart: options.settings.restart,
        compatibility_residual: charge.compatibility_residual,
        projection_iterations: stats.iterations,
        projection_residual: stats.relative_residual,
        loop_projection_norm,
        d_norm,
        tree_residual_stage1: root_residual.abs(),
        tree_residual_stage2,
        reference_patch: ref_patch,
        timings: StageTimings {
            setup: 0.0,
            stage1,
            removal,
            stage2,
            total,
            tree_solve1,
            tree_solve2,
        },
    };
    Ok(Solution {
        potential,
        d,
        tree_coeffs: t,
        loop_coeffs: l,
        d_field,
        charge: charge.values,
        v_phi,
        report,
        disc,
    })
}

/// `‖Kᵀ ν - w‖∞ / ‖w‖∞` evaluated edge by edge.
pub fn transpose_residual(tree: &DualTree, basis: &EdgeBasisSet, nu: &[f64], w: &[f64]) -> f64 {
    let mut worst = 0.0f64;
    let mut scale = 0.0f64;
    for (j, &b) in tree.tree_edges.iter().enumerate() {
        let f = &basis.functions[b];
        let ktnu = f.length * (nu[f.plus] - nu[f.minus]);
        worst = worst.max((ktnu - w[j]).abs());
        scale = scale.max(w[j].abs());
    }
    if scale > 0.0 {
        worst / scale
    } else {
        worst
    }
}

impl Solution {
    /// `∫_p ∇·D` per patch for the cleaned field.
    pub fn divergence_integrals(&self) -> Vec<f64> {
        patch_divergence_integrals(&self.disc.basis, &self.disc.topo, &self.d.values)
    }

    pub fn mesh(&self) -> &TriMesh {
        &self.disc.topo.mesh
    }
}

/// Piecewise-constant lookup of patch potentials at `points`.
pub fn evaluate_potential(nu: &FieldCoeffs, mesh: &TriMesh, points: &[Point]) -> Result<Vec<f64>> {
    points
        .iter()
        .map(|&p| mesh.locate(p).map(|t| nu[t]).ok_or(Error::Location(p[0], p[1])))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::generate_structured_square;
    use crate::problem::{Reference, Source};

    #[test]
    fn zero_problem_gives_constant_reference() {
        let mesh = generate_structured_square(4).unwrap();
        let spec = ProblemSpec {
            reference: Reference { point: [0.3, 0.3], value: 0.0 },
            ..Default::default()
        };
        let sol = solve_poisson(&mesh, &spec, &IterSettings::default(), SolverChoice::Cg).unwrap();
        assert!(sol.potential.values.iter().all(|&v| v == 0.0));
        assert!(sol.d.values.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn no_loop_mesh_skips_removal() {
        let mesh = generate_structured_square(1).unwrap();
        let spec = ProblemSpec {
            sources: vec![
                Source::Point { x: 0.7, y: 0.2, q: 1.0 },
                Source::Point { x: 0.2, y: 0.7, q: -1.0 },
            ],
            ..Default::default()
        };
        let sol = solve_poisson(&mesh, &spec, &IterSettings::default(), SolverChoice::Gmres).unwrap();
        assert_eq!(sol.report.num_loops, 0);
        assert_eq!(sol.report.projection_iterations, 0);
        assert!((sol.d[0] - 1.0 / 2f64.sqrt()).abs() < 1e-15);
        // ∫|f|² = 2/3 for the diagonal function, so l(ν0 - ν1) = (2/3)/√2
        assert!((sol.potential[0] - sol.potential[1] - 1.0 / 3.0).abs() < 1e-14);
    }

    #[test]
    fn evaluate_uses_containing_patch() {
        let mesh = generate_structured_square(1).unwrap();
        let nu = FieldCoeffs::new(FieldRole::Potential, vec![1.0, 2.0]);
        let v = evaluate_potential(&nu, &mesh, &[[0.8, 0.1], [0.1, 0.8], [0.5, 0.5]]).unwrap();
        assert_eq!(v, vec![1.0, 2.0, 1.0]);
        assert!(matches!(evaluate_potential(&nu, &mesh, &[[2.0, 0.0]]), Err(Error::Location(..))));
    }

    #[test]
    fn solver_names_parse() {
        assert_eq!("GMRES".parse::<SolverChoice>().unwrap(), SolverChoice::Gmres);
        assert!("bicgstab".parse::<SolverChoice>().is_err());
    }
}
