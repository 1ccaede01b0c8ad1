//! Independent references: a P1 finite element Neumann solver, dense
//! direct solves and the closed-form test problem on the unit square.
//!
//! Nothing here uses the edge/loop/tree machinery, so these results can
//! judge it.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::krylov::{cg_solve, IterSettings, SolveStats};
use crate::mesh::{signed_area2, Point, TriMesh};
use crate::problem::{Neumann, ProblemSpec, Reference, Source};
use crate::quadrature::{map_point, GAUSS3};
use crate::sparse::SparseMatrix;

/// How a point line-charge enters the P1 load vector.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum PointLoad {
    /// `q λ_j(x₀)`: the standard Galerkin load of a Dirac source.
    #[default]
    Nodal,
    /// `q / 3` on each node of the containing triangle: the charge spread
    /// uniformly over that patch, as the pulse discretization does.
    PatchSpread,
}

fn hat_gradients(c: &[Point; 3]) -> ([[f64; 2]; 3], f64) {
    let twice = signed_area2(c[0], c[1], c[2]);
    let g = [0, 1, 2].map(|k| {
        let (a, b) = (c[(k + 1) % 3], c[(k + 2) % 3]);
        [(a[1] - b[1]) / twice, (b[0] - a[0]) / twice]
    });
    (g, 0.5 * twice)
}

/// Triplets of the P1 stiffness matrix `∫ ∇λ_i · ∇λ_j`.
pub fn p1_stiffness_triplets(mesh: &TriMesh) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::with_capacity(9 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let (g, area) = hat_gradients(&mesh.corners(t));
        for i in 0..3 {
            for j in 0..3 {
                out.push((tri[i], tri[j], area * (g[i][0] * g[j][0] + g[i][1] * g[j][1])));
            }
        }
    }
    out
}

pub fn p1_stiffness(mesh: &TriMesh) -> SparseMatrix {
    let n = mesh.vertices.len();
    SparseMatrix::from_triplets(n, n, p1_stiffness_triplets(mesh)).with_symmetric(true)
}

fn boundary_edges(mesh: &TriMesh) -> Vec<[usize; 2]> {
    let mut count: HashMap<(usize, usize), usize> = HashMap::new();
    for tri in &mesh.triangles {
        for k in 0..3 {
            let (a, b) = (tri[k], tri[(k + 1) % 3]);
            *count.entry((a.min(b), a.max(b))).or_default() += 1;
        }
    }
    let mut out: Vec<[usize; 2]> = count.into_iter().filter(|&(_, c)| c == 1).map(|((a, b), _)| [a, b]).collect();
    out.sort_unstable();
    out
}

/// Load vector of `-∇²φ = ρ/ε` with `∂φ/∂n = g`.
pub fn p1_load(mesh: &TriMesh, spec: &ProblemSpec, point_load: PointLoad) -> Result<Vec<f64>> {
    spec.validate()?;
    let inv_eps = 1.0 / spec.permittivity();
    let mut f = vec![0.0; mesh.vertices.len()];
    for source in &spec.sources {
        match source {
            Source::Density(rho) => {
                for (t, tri) in mesh.triangles.iter().enumerate() {
                    let c = mesh.corners(t);
                    let area = mesh.area(t);
                    for &(b, w) in &GAUSS3 {
                        let p = map_point(&c, b);
                        let r = rho(p[0], p[1]) * inv_eps * w * area;
                        for k in 0..3 {
                            f[tri[k]] += r * b[k];
                        }
                    }
                }
            }
            Source::Point { x, y, q } => {
                let t = mesh.locate([*x, *y]).ok_or(Error::Location(*x, *y))?;
                let weights = match point_load {
                    PointLoad::Nodal => mesh.barycentric(t, [*x, *y]),
                    PointLoad::PatchSpread => [1.0 / 3.0; 3],
                };
                for (k, &v) in mesh.triangles[t].iter().enumerate() {
                    f[v] += q * inv_eps * weights[k];
                }
            }
        }
    }
    if let Neumann::Function(g) = &spec.neumann {
        let s = 0.5 / 3f64.sqrt();
        for [a, b] in boundary_edges(mesh) {
            let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
            let len = ((pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2)).sqrt();
            for u in [0.5 - s, 0.5 + s] {
                let gv = g(pa[0] + u * (pb[0] - pa[0]), pa[1] + u * (pb[1] - pa[1])) * 0.5 * len;
                f[a] += gv * (1.0 - u);
                f[b] += gv * u;
            }
        }
    }
    Ok(f)
}

/// P1 interpolation of nodal values at `p`.
pub fn interpolate(mesh: &TriMesh, nodal: &[f64], p: Point) -> Result<f64> {
    let t = mesh.locate(p).ok_or(Error::Location(p[0], p[1]))?;
    let l = mesh.barycentric(t, p);
    Ok(mesh.triangles[t].iter().zip(l).map(|(&v, w)| nodal[v] * w).sum())
}

fn shift_to_reference(mesh: &TriMesh, nodal: &mut [f64], reference: &Reference) -> Result<()> {
    let at = interpolate(mesh, nodal, reference.point)?;
    let shift = reference.value - at;
    nodal.iter_mut().for_each(|v| *v += shift);
    Ok(())
}

/// Dense P1 Galerkin solve with node 0 pinned, shifted to the reference.
pub fn fem_reference_solve(mesh: &TriMesh, spec: &ProblemSpec) -> Result<Vec<f64>> {
    fem_reference_solve_with(mesh, spec, PointLoad::Nodal)
}

pub fn fem_reference_solve_with(mesh: &TriMesh, spec: &ProblemSpec, point_load: PointLoad) -> Result<Vec<f64>> {
    let n = mesh.vertices.len();
    let mut k = DMatrix::<f64>::zeros(n, n);
    for (i, j, v) in p1_stiffness_triplets(mesh) {
        k[(i, j)] += v;
    }
    let mut f = p1_load(mesh, spec, point_load)?;
    pin_dense(&mut k, &mut f, 0);
    let chol = nalgebra::Cholesky::new(k).ok_or_else(|| singular("pinned stiffness matrix is not positive definite"))?;
    let mut u: Vec<f64> = chol.solve(&DVector::from_vec(f)).iter().copied().collect();
    shift_to_reference(mesh, &mut u, &spec.reference)?;
    Ok(u)
}

fn singular(msg: &str) -> Error {
    Error::Singular(msg.into())
}

fn pin_dense(k: &mut DMatrix<f64>, f: &mut [f64], node: usize) {
    let n = k.nrows();
    for i in 0..n {
        k[(node, i)] = 0.0;
        k[(i, node)] = 0.0;
    }
    k[(node, node)] = 1.0;
    f[node] = 0.0;
}

/// Sparse P1 system with node 0 pinned, solved by CG: the conventional
/// finite element baseline for timing comparisons.
pub fn fem_cg_solve(mesh: &TriMesh, spec: &ProblemSpec, settings: &IterSettings) -> Result<(Vec<f64>, SolveStats)> {
    let n = mesh.vertices.len();
    let triplets = p1_stiffness_triplets(mesh)
        .into_iter()
        .filter(|&(i, j, _)| i != 0 && j != 0)
        .chain(std::iter::once((0, 0, 1.0)))
        .collect();
    let k = SparseMatrix::from_triplets(n, n, triplets).with_symmetric(true);
    let mut f = p1_load(mesh, spec, PointLoad::Nodal)?;
    f[0] = 0.0;
    let (mut u, stats) = cg_solve(&k, &f, settings)?;
    shift_to_reference(mesh, &mut u, &spec.reference)?;
    Ok((u, stats))
}

/// Exact triangle averages of a P1 field.
pub fn patch_average(mesh: &TriMesh, nodal: &[f64]) -> Vec<f64> {
    mesh.triangles
        .iter()
        .map(|t| (nodal[t[0]] + nodal[t[1]] + nodal[t[2]]) / 3.0)
        .collect()
}

/// Direct solve. Square systems use LU; rectangular ones return the
/// minimum-norm least-squares solution and require full rank.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    if a.nrows() != b.len() {
        return Err(Error::Dimension(format!("matrix has {} rows, rhs has {}", a.nrows(), b.len())));
    }
    if a.is_square() {
        return a.clone().lu().solve(b).ok_or_else(|| singular("LU factorization is singular"));
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let eps = 1e-12 * smax.max(f64::MIN_POSITIVE);
    let rank = svd.singular_values.iter().filter(|&&s| s > eps).count();
    if rank < a.nrows().min(a.ncols()) {
        return Err(Error::Singular(format!(
            "rank {rank} below {} for a {}x{} system",
            a.nrows().min(a.ncols()),
            a.nrows(),
            a.ncols()
        )));
    }
    svd.solve(b, eps).map_err(|e| Error::Singular(e.to_string()))
}

/// `∇²φ = -π cos(πx) - π cos(πy)` on `[0,1]²` with `∂φ/∂n = 0`.
pub struct AnalyticCase {
    pub spec: ProblemSpec,
    pub exact: fn(f64, f64) -> f64,
}

pub fn analytic_exact(x: f64, y: f64) -> f64 {
    ((PI * x).cos() + (PI * y).cos()) / PI
}

/// The unit-square Neumann case with `φ = (cos πx + cos πy)/π`, anchored
/// at `φ(0,0) = 2/π`, in units with `ε_r = ε_0 = 1`.
pub fn analytic_case() -> AnalyticCase {
    AnalyticCase {
        spec: ProblemSpec {
            epsilon_r: 1.0,
            epsilon_0: 1.0,
            sources: vec![Source::Density(Arc::new(|x, y| PI * (PI * x).cos() + PI * (PI * y).cos()))],
            neumann: Neumann::Zero,
            reference: Reference {
                point: [0.0, 0.0],
                value: 2.0 / PI,
            },
        },
        exact: analytic_exact,
    }
}
