//! Interval and triangular meshes with boundary labels, uniform refinement,
//! and a plain-text file format.
//!
//! Meshes are immutable after construction and safe to share across threads.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MeshError {
    #[error("mesh must have at least one cell")]
    Empty,
    #[error("cell {cell} references vertex {vertex} out of {nv}")]
    IndexOutOfRange { cell: usize, vertex: usize, nv: usize },
    #[error("degenerate cell {0} (zero measure)")]
    DegenerateCell(usize),
    #[error("{path}:{line}: {msg}")]
    Parse { path: String, line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

/// Conforming simplicial mesh in one or two dimensions.
///
/// Cells are segments (`dim == 1`) or counter-clockwise triangles
/// (`dim == 2`), stored flat with `dim + 1` vertex indices per cell.
/// Boundary facets are endpoints in 1D and edges in 2D, each carrying an
/// integer label whose meaning is assigned by the scenario, not the mesh.
#[derive(Debug, Clone, PartialEq)]
pub struct Mesh {
    pub dim: usize,
    pub vertices: Vec<[f64; 2]>,
    cells: Vec<usize>,
    facet_nodes: Vec<usize>,
    facet_labels: Vec<i32>,
}

pub const LABEL_LEFT: i32 = 1;
pub const LABEL_RIGHT: i32 = 2;
pub const LABEL_TOP: i32 = 3;
pub const LABEL_BOTTOM: i32 = 4;

impl Mesh {
    /// Build a mesh from raw parts, validating indices, orientation and
    /// degeneracy. Triangles with negative area are flipped to
    /// counter-clockwise.
    pub fn new(
        dim: usize,
        vertices: Vec<[f64; 2]>,
        cells: Vec<usize>,
        facet_nodes: Vec<usize>,
        facet_labels: Vec<i32>,
    ) -> Result<Self, MeshError> {
        assert!(dim == 1 || dim == 2, "only 1D and 2D meshes are supported");
        let npc = dim + 1;
        if cells.is_empty() {
            return Err(MeshError::Empty);
        }
        assert_eq!(cells.len() % npc, 0);
        assert_eq!(facet_nodes.len(), dim * facet_labels.len());
        let nv = vertices.len();
        let mut cells = cells;
        for c in 0..cells.len() / npc {
            for &v in &cells[c * npc..(c + 1) * npc] {
                if v >= nv {
                    return Err(MeshError::IndexOutOfRange { cell: c, vertex: v, nv });
                }
            }
            if dim == 1 {
                let [a, b] = [cells[2 * c], cells[2 * c + 1]];
                if (vertices[b][0] - vertices[a][0]).abs() == 0.0 {
                    return Err(MeshError::DegenerateCell(c));
                }
            } else {
                let t = &mut cells[3 * c..3 * c + 3];
                let area2 = signed_area2(&vertices, t[0], t[1], t[2]);
                if area2 == 0.0 {
                    return Err(MeshError::DegenerateCell(c));
                }
                if area2 < 0.0 {
                    t.swap(1, 2);
                }
            }
        }
        for &v in &facet_nodes {
            if v >= nv {
                return Err(MeshError::IndexOutOfRange { cell: usize::MAX, vertex: v, nv });
            }
        }
        Ok(Self { dim, vertices, cells, facet_nodes, facet_labels })
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_cells(&self) -> usize {
        self.cells.len() / (self.dim + 1)
    }

    pub fn cell(&self, i: usize) -> &[usize] {
        let npc = self.dim + 1;
        &self.cells[i * npc..(i + 1) * npc]
    }

    pub fn n_facets(&self) -> usize {
        self.facet_labels.len()
    }

    pub fn facet(&self, i: usize) -> (&[usize], i32) {
        (&self.facet_nodes[i * self.dim..(i + 1) * self.dim], self.facet_labels[i])
    }

    /// Measure (length or area) of cell `i`.
    pub fn cell_measure(&self, i: usize) -> f64 {
        let c = self.cell(i);
        if self.dim == 1 {
            (self.vertices[c[1]][0] - self.vertices[c[0]][0]).abs()
        } else {
            0.5 * signed_area2(&self.vertices, c[0], c[1], c[2])
        }
    }

    pub fn total_measure(&self) -> f64 {
        (0..self.n_cells()).map(|i| self.cell_measure(i)).sum()
    }

    /// Vertex-to-vertex adjacency through cell edges, sorted and deduplicated.
    pub fn vertex_adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.n_vertices()];
        for c in 0..self.n_cells() {
            let nodes = self.cell(c);
            for (k, &a) in nodes.iter().enumerate() {
                for &b in &nodes[k + 1..] {
                    adj[a].push(b);
                    adj[b].push(a);
                }
            }
        }
        for l in &mut adj {
            l.sort_unstable();
            l.dedup();
        }
        adj
    }

    pub fn bounding_box(&self) -> ([f64; 2], [f64; 2]) {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &self.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        (lo, hi)
    }
}

fn signed_area2(verts: &[[f64; 2]], a: usize, b: usize, c: usize) -> f64 {
    let (p, q, r) = (verts[a], verts[b], verts[c]);
    (q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1])
}

/// Uniform structured triangulation of the unit square with `n` cells per
/// side: `(n+1)^2` vertices, `2n^2` triangles. Boundary labels: left=1,
/// right=2, top=3, bottom=4.
pub fn unit_square_mesh(n: usize) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::Empty);
    }
    let h = 1.0 / n as f64;
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 * h, j as f64 * h]);
        }
    }
    let mut cells = Vec::with_capacity(6 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            cells.extend_from_slice(&[a, b, c]);
            cells.extend_from_slice(&[a, c, d]);
        }
    }
    let mut facet_nodes = Vec::new();
    let mut facet_labels = Vec::new();
    for j in 0..n {
        facet_nodes.extend_from_slice(&[idx(0, j), idx(0, j + 1)]);
        facet_labels.push(LABEL_LEFT);
        facet_nodes.extend_from_slice(&[idx(n, j), idx(n, j + 1)]);
        facet_labels.push(LABEL_RIGHT);
    }
    for i in 0..n {
        facet_nodes.extend_from_slice(&[idx(i, n), idx(i + 1, n)]);
        facet_labels.push(LABEL_TOP);
        facet_nodes.extend_from_slice(&[idx(i, 0), idx(i + 1, 0)]);
        facet_labels.push(LABEL_BOTTOM);
    }
    Mesh::new(2, vertices, cells, facet_nodes, facet_labels)
}

/// Uniform 1D mesh of `[0, length]` with `n` cells. Boundary labels:
/// left=1, right=2.
pub fn interval_mesh(n: usize, length: f64) -> Result<Mesh, MeshError> {
    if n == 0 {
        return Err(MeshError::Empty);
    }
    assert!(length > 0.0);
    let h = length / n as f64;
    let vertices: Vec<[f64; 2]> = (0..=n).map(|i| [i as f64 * h, 0.0]).collect();
    let mut cells = Vec::with_capacity(2 * n);
    for i in 0..n {
        cells.extend_from_slice(&[i, i + 1]);
    }
    Mesh::new(1, vertices, cells, vec![0, n], vec![LABEL_LEFT, LABEL_RIGHT])
}

/// Coarse/fine mesh pair produced by one uniform (ratio-2) refinement.
///
/// `parent` maps each fine vertex to the coarse cell containing it together
/// with its barycentric coordinates in that cell, which is all the coarse
/// interpolation operator needs.
#[derive(Debug, Clone)]
pub struct NestedMeshPair {
    pub coarse: Mesh,
    pub fine: Mesh,
    pub parent: Vec<(usize, [f64; 3])>,
}

/// Split every segment in two / every triangle in four at edge midpoints.
///
/// Fine vertex numbering is deterministic: coarse vertices first, then edge
/// midpoints in sorted-edge order. Boundary labels are inherited.
pub fn refine_uniform(coarse: &Mesh) -> NestedMeshPair {
    let nvc = coarse.n_vertices();
    // Collect unique edges in sorted order.
    let mut edges: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for c in 0..coarse.n_cells() {
        let nodes = coarse.cell(c);
        for (k, &a) in nodes.iter().enumerate() {
            for &b in &nodes[k + 1..] {
                let key = (a.min(b), a.max(b));
                edges.entry(key).or_insert(0);
            }
        }
    }
    let mut vertices = coarse.vertices.clone();
    for (key, id) in edges.iter_mut() {
        *id = vertices.len();
        let (a, b) = *key;
        vertices.push([
            0.5 * (coarse.vertices[a][0] + coarse.vertices[b][0]),
            0.5 * (coarse.vertices[a][1] + coarse.vertices[b][1]),
        ]);
    }
    let mid = |a: usize, b: usize| edges[&(a.min(b), a.max(b))];

    let mut cells = Vec::new();
    let mut parent = vec![(usize::MAX, [0.0; 3]); vertices.len()];
    for c in 0..coarse.n_cells() {
        let nodes = coarse.cell(c);
        if coarse.dim == 1 {
            let (a, b) = (nodes[0], nodes[1]);
            let m = mid(a, b);
            cells.extend_from_slice(&[a, m]);
            cells.extend_from_slice(&[m, b]);
            set_parent(&mut parent, a, c, [1.0, 0.0, 0.0]);
            set_parent(&mut parent, b, c, [0.0, 1.0, 0.0]);
            set_parent(&mut parent, m, c, [0.5, 0.5, 0.0]);
        } else {
            let (a, b, d) = (nodes[0], nodes[1], nodes[2]);
            let (mab, mbd, mad) = (mid(a, b), mid(b, d), mid(a, d));
            cells.extend_from_slice(&[a, mab, mad]);
            cells.extend_from_slice(&[mab, b, mbd]);
            cells.extend_from_slice(&[mad, mbd, d]);
            cells.extend_from_slice(&[mab, mbd, mad]);
            set_parent(&mut parent, a, c, [1.0, 0.0, 0.0]);
            set_parent(&mut parent, b, c, [0.0, 1.0, 0.0]);
            set_parent(&mut parent, d, c, [0.0, 0.0, 1.0]);
            set_parent(&mut parent, mab, c, [0.5, 0.5, 0.0]);
            set_parent(&mut parent, mbd, c, [0.0, 0.5, 0.5]);
            set_parent(&mut parent, mad, c, [0.5, 0.0, 0.5]);
        }
    }

    // Boundary facets: split each coarse facet, keep its label.
    let mut facet_nodes = Vec::new();
    let mut facet_labels = Vec::new();
    for f in 0..coarse.n_facets() {
        let (nodes, label) = coarse.facet(f);
        if coarse.dim == 1 {
            facet_nodes.push(nodes[0]);
            facet_labels.push(label);
        } else {
            let m = mid(nodes[0], nodes[1]);
            facet_nodes.extend_from_slice(&[nodes[0], m]);
            facet_labels.push(label);
            facet_nodes.extend_from_slice(&[m, nodes[1]]);
            facet_labels.push(label);
        }
    }
    let fine = Mesh::new(coarse.dim, vertices, cells, facet_nodes, facet_labels)
        .expect("refinement of a valid mesh is valid");
    debug_assert_eq!(parent.len(), fine.n_vertices());
    debug_assert_eq!(nvc + edges.len(), fine.n_vertices());
    NestedMeshPair { coarse: coarse.clone(), fine, parent }
}

fn set_parent(parent: &mut [(usize, [f64; 3])], v: usize, cell: usize, bary: [f64; 3]) {
    // First-writer wins so shared vertices keep one well-defined parent cell.
    if parent[v].0 == usize::MAX {
        parent[v] = (cell, bary);
    }
}

/// Serialize to the plain-text mesh format:
/// `dim nv nc nb`, then coordinates, then 1-based cell indices, then
/// 1-based facet indices plus label. `#` starts a comment.
pub fn write_mesh(mesh: &Mesh, path: &Path) -> Result<(), MeshError> {
    let mut out = String::new();
    let npc = mesh.dim + 1;
    writeln!(out, "{} {} {} {}", mesh.dim, mesh.n_vertices(), mesh.n_cells(), mesh.n_facets())
        .unwrap();
    for v in &mesh.vertices {
        if mesh.dim == 1 {
            writeln!(out, "{:.17e}", v[0]).unwrap();
        } else {
            writeln!(out, "{:.17e} {:.17e}", v[0], v[1]).unwrap();
        }
    }
    for c in 0..mesh.n_cells() {
        let nodes = mesh.cell(c);
        let line: Vec<String> = nodes.iter().map(|&v| (v + 1).to_string()).collect();
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    for f in 0..mesh.n_facets() {
        let (nodes, label) = mesh.facet(f);
        let mut line: Vec<String> = nodes.iter().map(|&v| (v + 1).to_string()).collect();
        line.push(label.to_string());
        writeln!(out, "{}", line.join(" ")).unwrap();
    }
    let _ = npc;
    std::fs::write(path, out)
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })
}

pub fn read_mesh(path: &Path) -> Result<Mesh, MeshError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| MeshError::Io { path: path.display().to_string(), source: e })?;
    parse_mesh(&text, &path.display().to_string())
}

/// Token stream over the mesh file with line tracking; `#` comments run to
/// end of line.
struct MeshTokens<'a> {
    path: &'a str,
    tokens: Vec<(usize, &'a str)>,
    pos: usize,
    last_line: usize,
}

impl<'a> MeshTokens<'a> {
    fn new(text: &'a str, path: &'a str) -> Self {
        let mut tokens = Vec::new();
        for (ln, raw) in text.lines().enumerate() {
            let body = raw.split('#').next().unwrap_or("");
            for tok in body.split_whitespace() {
                tokens.push((ln + 1, tok));
            }
        }
        Self { path, tokens, pos: 0, last_line: text.lines().count() }
    }

    fn err(&self, line: usize, msg: String) -> MeshError {
        MeshError::Parse { path: self.path.to_string(), line, msg }
    }

    fn next(&mut self, what: &str) -> Result<(usize, &'a str), MeshError> {
        let t = self.tokens.get(self.pos).copied().ok_or_else(|| {
            self.err(self.last_line, format!("unexpected end of file, expected {what}"))
        })?;
        self.pos += 1;
        Ok(t)
    }

    fn usize(&mut self, what: &str) -> Result<usize, MeshError> {
        let (ln, t) = self.next(what)?;
        t.parse().map_err(|_| self.err(ln, format!("invalid {what} `{t}`")))
    }

    fn f64(&mut self, what: &str) -> Result<f64, MeshError> {
        let (ln, t) = self.next(what)?;
        t.parse().map_err(|_| self.err(ln, format!("invalid {what} `{t}`")))
    }

    fn one_based(&mut self, what: &str, nv: usize) -> Result<(usize, usize), MeshError> {
        let (ln, t) = self.next(what)?;
        let v: usize = t.parse().map_err(|_| self.err(ln, format!("invalid {what} `{t}`")))?;
        if v == 0 || v > nv {
            return Err(self.err(ln, format!("index out of range: {what} {v} of {nv}")));
        }
        Ok((ln, v - 1))
    }
}

fn parse_mesh(text: &str, path: &str) -> Result<Mesh, MeshError> {
    let mut tk = MeshTokens::new(text, path);
    let dim = tk.usize("dimension")?;
    if dim != 1 && dim != 2 {
        return Err(tk.err(1, format!("dimension must be 1 or 2, got {dim}")));
    }
    let nv = tk.usize("vertex count")?;
    let nc = tk.usize("cell count")?;
    let nb = tk.usize("facet count")?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let mut v = [0.0; 2];
        for item in v.iter_mut().take(dim) {
            *item = tk.f64("coordinate")?;
        }
        vertices.push(v);
    }
    let npc = dim + 1;
    let mut cells = Vec::with_capacity(nc * npc);
    let mut cell_lines = Vec::with_capacity(nc);
    for _ in 0..nc {
        let mut first_line = 0;
        for k in 0..npc {
            let (ln, v) = tk.one_based("cell vertex index", nv)?;
            if k == 0 {
                first_line = ln;
            }
            cells.push(v);
        }
        cell_lines.push(first_line);
    }
    let mut facet_nodes = Vec::with_capacity(nb * dim);
    let mut facet_labels = Vec::with_capacity(nb);
    for _ in 0..nb {
        for _ in 0..dim {
            let (_, v) = tk.one_based("facet vertex index", nv)?;
            facet_nodes.push(v);
        }
        let (ln, t) = tk.next("facet label")?;
        let label: i32 =
            t.parse().map_err(|_| tk.err(ln, format!("invalid facet label `{t}`")))?;
        facet_labels.push(label);
    }
    if tk.pos != tk.tokens.len() {
        let (ln, t) = tk.tokens[tk.pos];
        return Err(tk.err(ln, format!("trailing data `{t}`")));
    }
    Mesh::new(dim, vertices, cells, facet_nodes, facet_labels).map_err(|e| match e {
        MeshError::DegenerateCell(c) => {
            tk.err(cell_lines.get(c).copied().unwrap_or(0), format!("degenerate cell {}", c + 1))
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unit_square_counts() {
        let m = unit_square_mesh(1).unwrap();
        assert_eq!(m.n_vertices(), 4);
        assert_eq!(m.n_cells(), 2);
        let m = unit_square_mesh(2).unwrap();
        assert_eq!(m.n_vertices(), 9);
        assert_eq!(m.n_cells(), 8);
        assert!(unit_square_mesh(0).is_err());
    }

    #[test]
    fn unit_square_area_sums_to_one() {
        for n in [1, 2, 3, 7, 16, 64, 256] {
            let m = unit_square_mesh(n).unwrap();
            assert!((m.total_measure() - 1.0).abs() < 1e-12, "n={n}");
        }
    }

    #[test]
    fn unit_square_orientation_ccw() {
        let m = unit_square_mesh(4).unwrap();
        for c in 0..m.n_cells() {
            assert!(m.cell_measure(c) > 0.0);
        }
    }

    #[test]
    fn interval_mesh_basic() {
        let m = interval_mesh(2, 1.0).unwrap();
        let xs: Vec<f64> = m.vertices.iter().map(|v| v[0]).collect();
        assert_eq!(xs, vec![0.0, 0.5, 1.0]);
        assert!(interval_mesh(0, 1.0).is_err());

        let m = interval_mesh(5000, 1.0).unwrap();
        assert!((m.cell_measure(0) - 2e-4).abs() < 1e-18);

        let m = interval_mesh(1, 3.0).unwrap();
        assert_eq!(m.n_facets(), 2);
    }

    #[test]
    fn refine_counts_and_area() {
        let pair = refine_uniform(&unit_square_mesh(2).unwrap());
        assert_eq!(pair.fine.n_vertices(), 25);
        assert_eq!(pair.fine.n_cells(), 32);
        assert!((pair.fine.total_measure() - 1.0).abs() < 1e-12);

        let pair = refine_uniform(&interval_mesh(4, 1.0).unwrap());
        assert_eq!(pair.fine.n_cells(), 8);
        let mut xs: Vec<f64> = pair.fine.vertices.iter().map(|v| v[0]).collect();
        xs.sort_by(f64::total_cmp);
        let expect: Vec<f64> = (0..=8).map(|i| i as f64 / 8.0).collect();
        for (a, b) in xs.iter().zip(&expect) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn refine_parent_map_barycentric() {
        let coarse = unit_square_mesh(3).unwrap();
        let pair = refine_uniform(&coarse);
        for (v, &(cell, bary)) in pair.parent.iter().enumerate() {
            assert!(cell < coarse.n_cells());
            let sum: f64 = bary.iter().sum();
            assert!((sum - 1.0).abs() < 1e-12);
            assert!(bary.iter().all(|&w| w >= 0.0));
            // Barycentric combination reproduces the fine vertex position.
            let nodes = coarse.cell(cell);
            let mut p = [0.0; 2];
            for k in 0..3 {
                p[0] += bary[k] * coarse.vertices[nodes[k]][0];
                p[1] += bary[k] * coarse.vertices[nodes[k]][1];
            }
            assert!((p[0] - pair.fine.vertices[v][0]).abs() < 1e-14);
            assert!((p[1] - pair.fine.vertices[v][1]).abs() < 1e-14);
        }
        // Coarse vertices appear verbatim with weight 1 on their own corner.
        for v in 0..coarse.n_vertices() {
            assert_eq!(pair.fine.vertices[v], coarse.vertices[v]);
            let (cell, bary) = pair.parent[v];
            let k = coarse.cell(cell).iter().position(|&n| n == v).unwrap();
            assert!((bary[k] - 1.0).abs() < 1e-15);
        }
    }

    #[test]
    fn file_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.mesh");
        for m in [unit_square_mesh(3).unwrap(), interval_mesh(5, 2.5).unwrap()] {
            write_mesh(&m, &path).unwrap();
            let back = read_mesh(&path).unwrap();
            assert_eq!(m, back);
        }
    }

    #[test]
    fn parse_reports_bad_index_with_line() {
        let text = "2 3 1 0\n0 0\n1 0\n0 1\n1 2 10\n";
        let err = parse_mesh(text, "t.mesh").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("index out of range"), "{msg}");
        assert!(msg.contains("t.mesh:5"), "{msg}");
    }

    #[test]
    fn parse_reports_degenerate_cell() {
        let text = "2 3 1 0\n0 0\n1 0\n2 0\n1 2 3\n";
        let err = parse_mesh(text, "t.mesh").unwrap_err();
        assert!(err.to_string().contains("degenerate cell"), "{err}");
    }

    #[test]
    fn comments_and_whitespace_ok() {
        let text = "# header\n1 3 2 2\n0\n0.5 # midpoint\n1\n1 2\n2 3\n1 1\n3 2\n";
        let m = parse_mesh(text, "t.mesh").unwrap();
        assert_eq!(m.n_cells(), 2);
        assert_eq!(m.facet(0), (&[0usize][..], 1));
    }
}
