//! Triangular meshes: loading, generation, validation and edge topology.
//!
//! Triangles are the "patches" of the solver. Every stored triangle is
//! counterclockwise, and indices are 0-based internally regardless of the
//! index base of the input files.

use std::collections::{HashMap, HashSet, VecDeque};
use std::path::{Path, PathBuf};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Twice the signed area of the triangle `(a, b, c)`.
#[inline]
pub fn signed_area2(a: Point, b: Point, c: Point) -> f64 {
    (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1])
}

#[derive(Clone, Debug, Default)]
pub struct TriMesh {
    pub vertices: Vec<Point>,
    pub triangles: Vec<[usize; 3]>,
    /// Boundary markers from a `.node` file, if it had any.
    pub vertex_markers: Option<Vec<i64>>,
    /// Regional attributes from an `.ele` file, if it had any.
    pub triangle_attributes: Option<Vec<Vec<f64>>>,
}

impl TriMesh {
    /// Validates and builds a mesh, flipping clockwise triangles.
    pub fn new(vertices: Vec<Point>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        let mut triangles = triangles;
        let mut seen = HashSet::with_capacity(triangles.len());
        for (t, tri) in triangles.iter_mut().enumerate() {
            normalize_triangle(&vertices, tri).map_err(|msg| {
                Error::InvalidMesh(format!("triangle {t}: {msg}"))
            })?;
            let mut key = *tri;
            key.sort_unstable();
            if !seen.insert(key) {
                return Err(Error::InvalidMesh(format!("triangle {t} is a duplicate")));
            }
        }
        Ok(Self {
            vertices,
            triangles,
            vertex_markers: None,
            triangle_attributes: None,
        })
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_triangles(&self) -> usize {
        self.triangles.len()
    }

    pub fn corners(&self, t: usize) -> [Point; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn area(&self, t: usize) -> f64 {
        let [a, b, c] = self.corners(t);
        0.5 * signed_area2(a, b, c)
    }

    pub fn centroid(&self, t: usize) -> Point {
        let [a, b, c] = self.corners(t);
        [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0]
    }

    /// Barycentric coordinates of `p` with respect to triangle `t`.
    pub fn barycentric(&self, t: usize, p: Point) -> [f64; 3] {
        let [a, b, c] = self.corners(t);
        let det = signed_area2(a, b, c);
        let l1 = signed_area2(p, b, c) / det;
        let l2 = signed_area2(a, p, c) / det;
        [l1, l2, 1.0 - l1 - l2]
    }

    /// First (lowest-index) triangle containing `p`, boundary included.
    pub fn locate(&self, p: Point) -> Option<usize> {
        const EPS: f64 = 1e-12;
        (0..self.triangles.len()).find(|&t| self.barycentric(t, p).iter().all(|&l| l >= -EPS))
    }

    /// Keeps only the triangles selected by `keep`, dropping vertices that
    /// are no longer referenced.
    pub fn retain_triangles(&self, mut keep: impl FnMut(usize) -> bool) -> Result<TriMesh> {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        for (t, tri) in self.triangles.iter().enumerate() {
            if !keep(t) {
                continue;
            }
            let mut out = [0; 3];
            for (k, &v) in tri.iter().enumerate() {
                if remap[v] == usize::MAX {
                    remap[v] = vertices.len();
                    vertices.push(self.vertices[v]);
                }
                out[k] = remap[v];
            }
            triangles.push(out);
        }
        TriMesh::new(vertices, triangles)
    }
}

fn normalize_triangle(vertices: &[Point], tri: &mut [usize; 3]) -> std::result::Result<(), String> {
    for &v in tri.iter() {
        if v >= vertices.len() {
            return Err(format!(
                "vertex index {v} out of range (mesh has {} vertices)",
                vertices.len()
            ));
        }
    }
    if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
        return Err(format!("repeated vertex in {tri:?}"));
    }
    let a2 = signed_area2(vertices[tri[0]], vertices[tri[1]], vertices[tri[2]]);
    let scale = [tri[0], tri[1], tri[2]]
        .iter()
        .map(|&v| vertices[v][0].abs().max(vertices[v][1].abs()))
        .fold(1e-300, f64::max);
    if a2.abs() <= 1e-14 * scale * scale || !a2.is_finite() {
        return Err("zero-area triangle".into());
    }
    if a2 < 0.0 {
        tri.swap(1, 2);
    }
    Ok(())
}

/// Uniform mesh of `[0,1]²` with `n × n` cells, each cut along the
/// lower-left to upper-right diagonal.
pub fn generate_structured_square(n: usize) -> Result<TriMesh> {
    generate_structured_rectangle(n, n, [0.0, 1.0], [0.0, 1.0])
}

/// Uniform mesh of `[x0,x1] × [y0,y1]` with `nx × ny` cells.
///
/// Vertex `(i, j)` has index `j * (nx + 1) + i`; cell `(i, j)` yields the
/// triangles `(v00, v10, v11)` and `(v00, v11, v01)` in that order.
pub fn generate_structured_rectangle(
    nx: usize,
    ny: usize,
    xs: [f64; 2],
    ys: [f64; 2],
) -> Result<TriMesh> {
    if nx == 0 || ny == 0 {
        return Err(Error::Argument("structured mesh needs at least one cell per side".into()));
    }
    if !(xs[1] > xs[0] && ys[1] > ys[0]) {
        return Err(Error::Argument("empty rectangle".into()));
    }
    let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        let y = ys[0] + (ys[1] - ys[0]) * j as f64 / ny as f64;
        for i in 0..=nx {
            let x = xs[0] + (xs[1] - xs[0]) * i as f64 / nx as f64;
            vertices.push([x, y]);
        }
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut triangles = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (v00, v10, v01, v11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }
    TriMesh::new(vertices, triangles)
}

// ---------------------------------------------------------------------------
// Triangle .node / .ele files

struct Lines<'a> {
    file: &'static str,
    inner: std::iter::Enumerate<std::str::Lines<'a>>,
}

impl<'a> Lines<'a> {
    fn new(file: &'static str, text: &'a str) -> Self {
        Self {
            file,
            inner: text.lines().enumerate(),
        }
    }

    /// Next non-blank line with comments stripped, as (1-based line number, fields).
    fn next_record(&mut self) -> Option<(usize, Vec<&'a str>)> {
        for (i, line) in self.inner.by_ref() {
            let line = line.split('#').next().unwrap_or("");
            let fields: Vec<&str> = line.split_whitespace().collect();
            if !fields.is_empty() {
                return Some((i + 1, fields));
            }
        }
        None
    }

    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Parse {
            file: self.file,
            line,
            message: message.into(),
        }
    }

    fn expect_record(&mut self, what: &str) -> Result<(usize, Vec<&'a str>)> {
        match self.next_record() {
            Some(r) => Ok(r),
            None => Err(Error::Parse {
                file: self.file,
                line: 0,
                message: format!("unexpected end of file, expected {what}"),
            }),
        }
    }
}

fn field<T: std::str::FromStr>(lines: &Lines, line: usize, fields: &[&str], i: usize, what: &str) -> Result<T> {
    fields
        .get(i)
        .ok_or_else(|| lines.err(line, format!("missing {what}")))?
        .parse()
        .map_err(|_| lines.err(line, format!("cannot parse {what} '{}'", fields[i])))
}

/// Parses Triangle-format `.node` and `.ele` contents.
///
/// Both 0- and 1-based files are accepted; the base is taken from the
/// first vertex index in the `.node` file.
pub fn parse_triangle_files(node_text: &str, ele_text: &str) -> Result<TriMesh> {
    let mut nodes = Lines::new("node", node_text);
    let (hl, header) = nodes.expect_record("header")?;
    let nv: usize = field(&nodes, hl, &header, 0, "vertex count")?;
    let dim: usize = field(&nodes, hl, &header, 1, "dimension")?;
    if dim != 2 {
        return Err(nodes.err(hl, format!("dimension must be 2, got {dim}")));
    }
    let nattr: usize = if header.len() > 2 { field(&nodes, hl, &header, 2, "attribute count")? } else { 0 };
    let nmark: usize = if header.len() > 3 { field(&nodes, hl, &header, 3, "marker count")? } else { 0 };
    if nmark > 1 {
        return Err(nodes.err(hl, "at most one boundary marker column is allowed"));
    }

    let mut base = None;
    let mut vertices = Vec::with_capacity(nv);
    let mut markers = Vec::with_capacity(if nmark > 0 { nv } else { 0 });
    for k in 0..nv {
        let (ln, f) = nodes.expect_record("vertex record")?;
        if f.len() < 3 + nattr + nmark {
            return Err(nodes.err(ln, format!("expected {} fields, found {}", 3 + nattr + nmark, f.len())));
        }
        let idx: usize = field(&nodes, ln, &f, 0, "vertex index")?;
        let b = *base.get_or_insert(idx);
        if b > 1 {
            return Err(nodes.err(ln, format!("first vertex index must be 0 or 1, got {idx}")));
        }
        if idx != k + b {
            return Err(nodes.err(ln, format!("expected vertex index {}, got {idx}", k + b)));
        }
        let x: f64 = field(&nodes, ln, &f, 1, "x coordinate")?;
        let y: f64 = field(&nodes, ln, &f, 2, "y coordinate")?;
        if !(x.is_finite() && y.is_finite()) {
            return Err(nodes.err(ln, "non-finite coordinate"));
        }
        vertices.push([x, y]);
        if nmark > 0 {
            markers.push(field(&nodes, ln, &f, 3 + nattr, "boundary marker")?);
        }
    }
    let base = base.unwrap_or(0);

    let mut eles = Lines::new("ele", ele_text);
    let (hl, header) = eles.expect_record("header")?;
    let nt: usize = field(&eles, hl, &header, 0, "triangle count")?;
    let per: usize = if header.len() > 1 { field(&eles, hl, &header, 1, "nodes per triangle")? } else { 3 };
    if per != 3 {
        return Err(eles.err(hl, format!("only linear triangles are supported, got {per} nodes per triangle")));
    }
    let tattr: usize = if header.len() > 2 { field(&eles, hl, &header, 2, "attribute count")? } else { 0 };

    let mut triangles = Vec::with_capacity(nt);
    let mut attributes = Vec::with_capacity(if tattr > 0 { nt } else { 0 });
    let mut seen = HashSet::with_capacity(nt);
    for _ in 0..nt {
        let (ln, f) = eles.expect_record("triangle record")?;
        if f.len() < 4 + tattr {
            return Err(eles.err(ln, format!("expected {} fields, found {}", 4 + tattr, f.len())));
        }
        let mut tri = [0usize; 3];
        for (k, slot) in tri.iter_mut().enumerate() {
            let raw: usize = field(&eles, ln, &f, 1 + k, "vertex index")?;
            if raw < base || raw - base >= nv {
                return Err(eles.err(ln, format!("vertex index {raw} out of range ({nv} vertices, base {base})")));
            }
            *slot = raw - base;
        }
        normalize_triangle(&vertices, &mut tri).map_err(|m| eles.err(ln, m))?;
        let mut key = tri;
        key.sort_unstable();
        if !seen.insert(key) {
            return Err(eles.err(ln, "duplicate triangle"));
        }
        triangles.push(tri);
        if tattr > 0 {
            let attrs = (0..tattr)
                .map(|a| field(&eles, ln, &f, 4 + a, "attribute"))
                .collect::<Result<Vec<f64>>>()?;
            attributes.push(attrs);
        }
    }

    Ok(TriMesh {
        vertices,
        triangles,
        vertex_markers: (nmark > 0).then_some(markers),
        triangle_attributes: (tattr > 0).then_some(attributes),
    })
}

/// Reads `<prefix>.node` and `<prefix>.ele`.
///
/// The prefix may contain dots (`box.1` reads `box.1.node`).
pub fn read_triangle_files(prefix: impl AsRef<Path>) -> Result<TriMesh> {
    let with = |ext: &str| {
        let mut p = prefix.as_ref().as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    let read = |path: PathBuf| {
        std::fs::read_to_string(&path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))
    };
    let node = read(with(".node"))?;
    let ele = read(with(".ele"))?;
    parse_triangle_files(&node, &ele)
}

/// Renders a mesh as 1-based Triangle `.node` / `.ele` text.
pub fn format_triangle_files(mesh: &TriMesh) -> (String, String) {
    use std::fmt::Write;
    let mut node = format!("{} 2 0 0\n", mesh.vertices.len());
    for (i, v) in mesh.vertices.iter().enumerate() {
        let _ = writeln!(node, "{} {:.17e} {:.17e}", i + 1, v[0], v[1]);
    }
    let mut ele = format!("{} 3 0\n", mesh.triangles.len());
    for (i, t) in mesh.triangles.iter().enumerate() {
        let _ = writeln!(ele, "{} {} {} {}", i + 1, t[0] + 1, t[1] + 1, t[2] + 1);
    }
    (node, ele)
}

// ---------------------------------------------------------------------------
// Topology

#[derive(Clone, Debug)]
pub struct Edge {
    /// Endpoints, sorted ascending.
    pub vertices: [usize; 2],
    /// Lower-index adjacent patch; the only patch for a boundary edge.
    pub plus: usize,
    /// Higher-index adjacent patch, absent on the boundary.
    pub minus: Option<usize>,
    pub length: f64,
    /// Unit normal pointing out of the plus patch.
    pub normal: [f64; 2],
}

impl Edge {
    pub fn is_interior(&self) -> bool {
        self.minus.is_some()
    }

    pub fn midpoint(&self, mesh: &TriMesh) -> Point {
        let [a, b] = self.vertices.map(|v| mesh.vertices[v]);
        [0.5 * (a[0] + b[0]), 0.5 * (a[1] + b[1])]
    }

    /// +1 on the plus patch, -1 on the minus patch.
    pub fn sign_on(&self, patch: usize) -> f64 {
        if patch == self.plus {
            1.0
        } else {
            debug_assert_eq!(Some(patch), self.minus);
            -1.0
        }
    }
}

/// Edge and adjacency structure derived from a [`TriMesh`].
#[derive(Clone, Debug)]
pub struct MeshTopology {
    pub mesh: TriMesh,
    pub edges: Vec<Edge>,
    pub interior_edges: Vec<usize>,
    pub boundary_edges: Vec<usize>,
    pub interior_vertices: Vec<usize>,
    pub vertex_on_boundary: Vec<bool>,
    /// Edge ids of each triangle; slot `k` is the edge opposite local vertex `k`.
    pub triangle_edges: Vec<[usize; 3]>,
    pub areas: Vec<f64>,
    /// Dual graph: per patch, `(neighbour patch, edge id)` sorted by neighbour.
    pub adjacency: Vec<Vec<(usize, usize)>>,
    /// Triangles incident to each vertex, ascending.
    pub vertex_triangles: Vec<Vec<usize>>,
}

impl MeshTopology {
    pub fn num_patches(&self) -> usize {
        self.mesh.triangles.len()
    }

    /// Interior-edge count predicted by the Euler relation for a simply
    /// connected mesh.
    pub fn expected_interior_edges(&self) -> usize {
        self.num_patches() - 1 + self.interior_vertices.len()
    }

    pub fn is_simply_connected(&self) -> bool {
        self.interior_edges.len() == self.expected_interior_edges()
    }

    /// Local slot of edge `e` in patch `t`.
    pub fn local_slot(&self, t: usize, e: usize) -> usize {
        self.triangle_edges[t]
            .iter()
            .position(|&x| x == e)
            .expect("edge does not belong to patch")
    }
}

pub fn build_topology(mesh: &TriMesh) -> Result<MeshTopology> {
    let nt = mesh.triangles.len();
    let nv = mesh.vertices.len();
    if nt == 0 {
        return Err(Error::InvalidMesh("mesh has no triangles".into()));
    }

    let mut edge_of: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * nt / 2 + 2);
    // (first patch, second patch, number of incident patches)
    let mut incident: Vec<(usize, Option<usize>, usize)> = Vec::new();
    let mut verts: Vec<[usize; 2]> = Vec::new();
    let mut triangle_edges = Vec::with_capacity(nt);
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let mut slots = [0; 3];
        for (k, slot) in slots.iter_mut().enumerate() {
            let (a, b) = (tri[(k + 1) % 3], tri[(k + 2) % 3]);
            let key = (a.min(b), a.max(b));
            let e = *edge_of.entry(key).or_insert_with(|| {
                verts.push([key.0, key.1]);
                incident.push((t, None, 0));
                verts.len() - 1
            });
            let inc = &mut incident[e];
            if inc.2 == 1 {
                inc.1 = Some(t);
            }
            inc.2 += 1;
            *slot = e;
        }
        triangle_edges.push(slots);
    }

    let mut edges = Vec::with_capacity(verts.len());
    let mut interior_edges = Vec::new();
    let mut boundary_edges = Vec::new();
    let mut vertex_on_boundary = vec![false; nv];
    let mut adjacency = vec![Vec::with_capacity(3); nt];
    for (e, (vs, &(plus, minus, count))) in verts.iter().zip(&incident).enumerate() {
        if count > 2 {
            return Err(Error::NonManifold(vs[0], vs[1], count));
        }
        // patches were recorded in ascending triangle order
        let [a, b] = vs.map(|v| mesh.vertices[v]);
        let length = ((b[0] - a[0]).powi(2) + (b[1] - a[1]).powi(2)).sqrt();
        // outward normal of `plus` on this edge
        let k = triangle_edges[plus].iter().position(|&x| x == e).unwrap();
        let tri = mesh.triangles[plus];
        let (p, q) = (mesh.vertices[tri[(k + 1) % 3]], mesh.vertices[tri[(k + 2) % 3]]);
        let normal = [(q[1] - p[1]) / length, -(q[0] - p[0]) / length];
        match minus {
            Some(m) => {
                interior_edges.push(e);
                adjacency[plus].push((m, e));
                adjacency[m].push((plus, e));
            }
            None => {
                boundary_edges.push(e);
                vertex_on_boundary[vs[0]] = true;
                vertex_on_boundary[vs[1]] = true;
            }
        }
        edges.push(Edge {
            vertices: *vs,
            plus,
            minus,
            length,
            normal,
        });
    }
    for adj in &mut adjacency {
        adj.sort_unstable();
    }

    let mut vertex_triangles = vec![Vec::new(); nv];
    for (t, tri) in mesh.triangles.iter().enumerate() {
        for &v in tri {
            vertex_triangles[v].push(t);
        }
    }
    let interior_vertices = (0..nv)
        .filter(|&v| !vertex_on_boundary[v] && !vertex_triangles[v].is_empty())
        .collect();

    let mut seen = vec![false; nt];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(p) = queue.pop_front() {
        for &(q, _) in &adjacency[p] {
            if !seen[q] {
                seen[q] = true;
                queue.push_back(q);
            }
        }
    }
    if let Some(unreachable) = seen.iter().position(|s| !s) {
        return Err(Error::Disconnected { root: 0, unreachable });
    }

    let areas = (0..nt).map(|t| mesh.area(t)).collect();
    Ok(MeshTopology {
        mesh: mesh.clone(),
        edges,
        interior_edges,
        boundary_edges,
        interior_vertices,
        vertex_on_boundary,
        triangle_edges,
        areas,
        adjacency,
        vertex_triangles,
    })
}
