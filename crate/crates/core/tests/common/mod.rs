#![allow(dead_code)]

use std::sync::Arc;

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use treepoisson::mesh::{generate_structured_rectangle, generate_structured_square};
use treepoisson::{Neumann, ProblemSpec, Reference, Source, TriMesh};

pub const DIPOLE_PLUS: [f64; 2] = [-0.475, -0.329];
pub const DIPOLE_MINUS: [f64; 2] = [0.494, -0.459];

/// Structured unit square with interior vertices moved by up to `0.2 h`.
pub fn jittered_square(n: usize, seed: u64) -> TriMesh {
    let base = generate_structured_square(n).unwrap();
    let h = 1.0 / n as f64;
    let mut rng = StdRng::seed_from_u64(seed);
    let vertices = base
        .vertices
        .iter()
        .map(|&[x, y]| {
            let inside = x > 0.5 * h && x < 1.0 - 0.5 * h && y > 0.5 * h && y < 1.0 - 0.5 * h;
            if inside {
                [x + 0.2 * h * rng.gen_range(-1.0..1.0), y + 0.2 * h * rng.gen_range(-1.0..1.0)]
            } else {
                [x, y]
            }
        })
        .collect();
    TriMesh::new(vertices, base.triangles.clone()).unwrap()
}

/// The `[-2,2] × [-1,1]` box used for the dipole problem.
pub fn dipole_mesh(nx: usize, ny: usize) -> TriMesh {
    generate_structured_rectangle(nx, ny, [-2.0, 2.0], [-1.0, 1.0]).unwrap()
}

pub fn dipole_spec() -> ProblemSpec {
    ProblemSpec {
        sources: vec![
            Source::Point { x: DIPOLE_PLUS[0], y: DIPOLE_PLUS[1], q: 1.0 },
            Source::Point { x: DIPOLE_MINUS[0], y: DIPOLE_MINUS[1], q: -1.0 },
        ],
        reference: Reference { point: [-2.0, 1.0], value: 0.0 },
        ..Default::default()
    }
}

/// `φ = x²/2` on the unit square: `ρ = -1` inside, `∂φ/∂n = 1` on `x = 1`.
pub fn parabola_spec() -> ProblemSpec {
    ProblemSpec {
        sources: vec![Source::Density(Arc::new(|_, _| -1.0))],
        neumann: Neumann::Function(Arc::new(|x, _| if (x - 1.0).abs() < 1e-12 { 1.0 } else { 0.0 })),
        reference: Reference { point: [0.0, 0.0], value: 0.0 },
        ..Default::default()
    }
}

pub fn parabola_exact(x: f64, _y: f64) -> f64 {
    0.5 * x * x
}

/// Max-norm error of the piecewise-constant potential, sampled at the
/// corners, edge midpoints and centroid of every patch.
pub fn pulse_max_error(mesh: &TriMesh, nu: &[f64], exact: impl Fn(f64, f64) -> f64) -> f64 {
    let mut worst = 0.0f64;
    for t in 0..mesh.num_triangles() {
        let [a, b, c] = mesh.corners(t);
        let mid = |p: [f64; 2], q: [f64; 2]| [0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])];
        for p in [a, b, c, mid(a, b), mid(b, c), mid(c, a), mesh.centroid(t)] {
            worst = worst.max((nu[t] - exact(p[0], p[1])).abs());
        }
    }
    worst
}

pub fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Opposite unit charges inside the unit square.
pub fn pair_spec() -> ProblemSpec {
    ProblemSpec {
        sources: vec![
            Source::Point { x: 0.3, y: 0.4, q: 1.0 },
            Source::Point { x: 0.7, y: 0.65, q: -1.0 },
        ],
        reference: Reference { point: [0.0, 0.0], value: 0.0 },
        ..Default::default()
    }
}
