//! Structured triangulations of the unit square.
//!
//! Every grid square `[i/n,(i+1)/n] x [j/n,(j+1)/n]` is cut along its SW-NE
//! diagonal. Vertex `(i, j)` has index `j*(n+1) + i`; square `(i, j)` owns
//! cells `2*(j*n + i)` (below the diagonal) and `2*(j*n + i) + 1` (above).

use std::collections::HashMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Mesh edge between two vertices (`v[0] < v[1]`), with up to two adjacent cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge {
    pub vertices: [usize; 2],
    pub cells: [Option<usize>; 2],
}

impl Edge {
    pub fn is_boundary(&self) -> bool {
        self.cells[1].is_none()
    }
}

#[derive(Debug, Clone)]
pub struct TriMesh {
    n: usize,
    vertices: Vec<Point>,
    cells: Vec<[usize; 3]>,
    edges: Vec<Edge>,
    /// Local edge `k` of a cell joins local vertices `k` and `(k+1) % 3`.
    cell_edges: Vec<[usize; 3]>,
    boundary_vertex: Vec<bool>,
    boundary_edge: Vec<bool>,
}

/// Builds the SW-NE triangulation with `n` subdivisions per side.
pub fn build_uniform_mesh(n: usize) -> Result<TriMesh> {
    if n == 0 {
        return Err(Error::invalid("mesh needs at least one subdivision per side"));
    }
    let np = n + 1;
    let vid = |i: usize, j: usize| j * np + i;

    let mut vertices = Vec::with_capacity(np * np);
    let mut boundary_vertex = Vec::with_capacity(np * np);
    for j in 0..np {
        for i in 0..np {
            // Division (not i*h) keeps boundary coordinates exact and makes
            // coarse and fine vertex coordinates bitwise equal.
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
            boundary_vertex.push(i == 0 || j == 0 || i == n || j == n);
        }
    }

    let mut cells = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let sw = vid(i, j);
            let se = vid(i + 1, j);
            let ne = vid(i + 1, j + 1);
            let nw = vid(i, j + 1);
            cells.push([sw, se, ne]);
            cells.push([sw, ne, nw]);
        }
    }

    let mut edge_index: HashMap<(usize, usize), usize> = HashMap::with_capacity(3 * n * n + 2 * n);
    let mut edges: Vec<Edge> = Vec::with_capacity(3 * n * n + 2 * n);
    let mut cell_edges = Vec::with_capacity(cells.len());
    for (c, tri) in cells.iter().enumerate() {
        let mut local = [0usize; 3];
        for k in 0..3 {
            let a = tri[k];
            let b = tri[(k + 1) % 3];
            let key = (a.min(b), a.max(b));
            let e = *edge_index.entry(key).or_insert_with(|| {
                edges.push(Edge {
                    vertices: [key.0, key.1],
                    cells: [None, None],
                });
                edges.len() - 1
            });
            let slot = &mut edges[e].cells;
            if slot[0].is_none() {
                slot[0] = Some(c);
            } else {
                slot[1] = Some(c);
            }
            local[k] = e;
        }
        cell_edges.push(local);
    }
    let boundary_edge = edges.iter().map(Edge::is_boundary).collect();

    Ok(TriMesh {
        n,
        vertices,
        cells,
        edges,
        cell_edges,
        boundary_vertex,
        boundary_edge,
    })
}

impl TriMesh {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / self.n as f64
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }

    pub fn edges(&self) -> &[Edge] {
        &self.edges
    }

    pub fn cell_edges(&self) -> &[[usize; 3]] {
        &self.cell_edges
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn boundary_vertex_flags(&self) -> &[bool] {
        &self.boundary_vertex
    }

    pub fn boundary_edge_flags(&self) -> &[bool] {
        &self.boundary_edge
    }

    pub fn vertex_index(&self, i: usize, j: usize) -> usize {
        j * (self.n + 1) + i
    }

    pub fn cell_vertices(&self, c: usize) -> [Point; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn signed_area(&self, c: usize) -> f64 {
        let [p0, p1, p2] = self.cell_vertices(c);
        0.5 * ((p1[0] - p0[0]) * (p2[1] - p0[1]) - (p2[0] - p0[0]) * (p1[1] - p0[1]))
    }

    pub fn centroid(&self, c: usize) -> Point {
        let [p0, p1, p2] = self.cell_vertices(c);
        [(p0[0] + p1[0] + p2[0]) / 3.0, (p0[1] + p1[1] + p2[1]) / 3.0]
    }

    /// Index of the cell containing `p` (points on shared edges resolve to one of them).
    pub fn locate(&self, p: Point) -> Option<usize> {
        let eps = 1e-13;
        if !(-eps..=1.0 + eps).contains(&p[0]) || !(-eps..=1.0 + eps).contains(&p[1]) {
            return None;
        }
        let n = self.n as f64;
        let i = ((p[0] * n).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        let j = ((p[1] * n).floor() as isize).clamp(0, self.n as isize - 1) as usize;
        let lx = p[0] * n - i as f64;
        let ly = p[1] * n - j as f64;
        let base = 2 * (j * self.n + i);
        Some(if lx >= ly { base } else { base + 1 })
    }

    /// Writes the plain-text mesh format: a header line `NV NC`, then one
    /// `x y` line per vertex, then one `a b c` line per cell (0-based indices).
    pub fn write_text(&self, mut out: impl Write) -> std::io::Result<()> {
        let mut s = String::new();
        let _ = writeln!(s, "{} {}", self.num_vertices(), self.num_cells());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        out.write_all(s.as_bytes())
    }

    pub fn export(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_text(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Coarse SW-NE triangulation aligned with a fine one, `H = ratio * h`.
#[derive(Debug, Clone)]
pub struct CoarsePartition {
    coarse: TriMesh,
    ratio: usize,
    fine_n: usize,
    fine_to_coarse: Vec<usize>,
}

pub fn build_coarse_partition(fine: &TriMesh, ratio: usize) -> Result<CoarsePartition> {
    if ratio == 0 || ratio > fine.n {
        return Err(Error::invalid(format!(
            "coarsening ratio {ratio} must lie in 1..={}",
            fine.n
        )));
    }
    if fine.n % ratio != 0 {
        return Err(Error::invalid(format!(
            "coarsening ratio {ratio} does not divide n = {}",
            fine.n
        )));
    }
    let nc = fine.n / ratio;
    let coarse = build_uniform_mesh(nc)?;
    let mut fine_to_coarse = Vec::with_capacity(fine.num_cells());
    for j in 0..fine.n {
        for i in 0..fine.n {
            let (ci, cj) = (i / ratio, j / ratio);
            let (a, b) = (i % ratio, j % ratio);
            let base = 2 * (cj * nc + ci);
            for k in 0..2 {
                // Fine squares on the coarse diagonal split the same way the coarse square does.
                let upper = b > a || (a == b && k == 1);
                fine_to_coarse.push(base + usize::from(upper));
            }
        }
    }
    Ok(CoarsePartition {
        coarse,
        ratio,
        fine_n: fine.n,
        fine_to_coarse,
    })
}

impl CoarsePartition {
    pub fn coarse_mesh(&self) -> &TriMesh {
        &self.coarse
    }

    pub fn ratio(&self) -> usize {
        self.ratio
    }

    pub fn fine_n(&self) -> usize {
        self.fine_n
    }

    /// Coarse mesh size `H`.
    pub fn h_coarse(&self) -> f64 {
        self.coarse.h()
    }

    pub fn fine_to_coarse(&self) -> &[usize] {
        &self.fine_to_coarse
    }

    /// Fine cells grouped by the coarse cell that contains them.
    pub fn coarse_to_fine(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::with_capacity(self.ratio * self.ratio); self.coarse.num_cells()];
        for (f, &c) in self.fine_to_coarse.iter().enumerate() {
            groups[c].push(f);
        }
        groups
    }

    /// Fine vertex index of each coarse vertex.
    pub fn coarse_vertex_to_fine(&self) -> Vec<usize> {
        let nc = self.coarse.n;
        let mut map = Vec::with_capacity((nc + 1) * (nc + 1));
        for j in 0..=nc {
            for i in 0..=nc {
                map.push(j * self.ratio * (self.fine_n + 1) + i * self.ratio);
            }
        }
        map
    }

    pub fn is_aligned_with(&self, fine: &TriMesh) -> bool {
        fine.n == self.fine_n && self.fine_to_coarse.len() == fine.num_cells()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn in_closed_triangle(tri: [Point; 3], p: Point) -> bool {
        let cross = |a: Point, b: Point, c: Point| (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        let eps = 1e-12;
        cross(tri[0], tri[1], p) >= -eps && cross(tri[1], tri[2], p) >= -eps && cross(tri[2], tri[0], p) >= -eps
    }

    #[test]
    fn single_square() {
        let m = build_uniform_mesh(1).unwrap();
        assert_eq!(m.num_cells(), 2);
        assert_eq!(m.num_vertices(), 4);
        let area: f64 = (0..m.num_cells()).map(|c| m.signed_area(c)).sum();
        assert_eq!(area, 1.0);
    }

    #[test]
    fn fine_and_coarse_mesh_counts() {
        let m = build_uniform_mesh(12).unwrap();
        assert_eq!(m.h(), 1.0 / 12.0);
        assert_eq!(m.num_cells(), 288);
        assert_eq!(m.num_vertices(), 169);
    }

    #[test]
    fn boundary_vertex_count() {
        let m = build_uniform_mesh(2).unwrap();
        assert_eq!(m.boundary_vertex_flags().iter().filter(|&&b| b).count(), 8);
        for (v, &b) in m.vertices().iter().zip(m.boundary_vertex_flags()) {
            let on = v[0] == 0.0 || v[0] == 1.0 || v[1] == 0.0 || v[1] == 1.0;
            assert_eq!(on, b);
        }
    }

    #[test]
    fn zero_subdivisions_rejected() {
        assert!(matches!(build_uniform_mesh(0), Err(Error::InvalidArgument(_))));
    }

    #[test]
    fn areas_and_edge_counts() {
        for n in 1..=8 {
            let m = build_uniform_mesh(n).unwrap();
            let h = m.h();
            for c in 0..m.num_cells() {
                assert!((m.signed_area(c) - h * h / 2.0).abs() < 1e-15);
            }
            assert_eq!(m.num_edges(), 3 * n * n + 2 * n);
            let nb = m.boundary_edge_flags().iter().filter(|&&b| b).count();
            assert_eq!(nb, 4 * n);
            // Every boundary edge has both endpoints on the boundary.
            for (e, &b) in m.edges().iter().zip(m.boundary_edge_flags()) {
                if b {
                    assert!(e.vertices.iter().all(|&v| m.boundary_vertex_flags()[v]));
                }
            }
        }
    }

    #[test]
    fn locate_finds_centroids() {
        let m = build_uniform_mesh(5).unwrap();
        for c in 0..m.num_cells() {
            assert_eq!(m.locate(m.centroid(c)), Some(c));
        }
        assert_eq!(m.locate([1.5, 0.2]), None);
    }

    #[test]
    fn coarse_partition_ratio_three() {
        let fine = build_uniform_mesh(12).unwrap();
        let part = build_coarse_partition(&fine, 3).unwrap();
        assert_eq!(part.coarse_mesh().n(), 4);
        assert!((part.h_coarse() - 3.0 * fine.h()).abs() < 1e-15);
        for group in part.coarse_to_fine() {
            assert_eq!(group.len(), 9);
        }
        for (f, &c) in part.fine_to_coarse().iter().enumerate() {
            let tri = part.coarse_mesh().cell_vertices(c);
            assert!(in_closed_triangle(tri, fine.centroid(f)));
            for p in fine.cell_vertices(f) {
                assert!(in_closed_triangle(tri, p));
            }
        }
    }

    #[test]
    fn coarse_partition_identity() {
        let fine = build_uniform_mesh(4).unwrap();
        let part = build_coarse_partition(&fine, 1).unwrap();
        assert_eq!(part.coarse_mesh().cells(), fine.cells());
        assert!(part.fine_to_coarse().iter().enumerate().all(|(f, &c)| f == c));
    }

    #[test]
    fn coarse_partition_rejects_bad_ratio() {
        let fine = build_uniform_mesh(12).unwrap();
        assert!(build_coarse_partition(&fine, 5).is_err());
        assert!(build_coarse_partition(&fine, 13).is_err());
        assert!(build_coarse_partition(&fine, 0).is_err());
    }

    #[test]
    fn coarse_vertices_are_fine_vertices() {
        let fine = build_uniform_mesh(6).unwrap();
        let part = build_coarse_partition(&fine, 3).unwrap();
        for (cv, fv) in part.coarse_vertex_to_fine().into_iter().enumerate() {
            assert_eq!(part.coarse_mesh().vertices()[cv], fine.vertices()[fv]);
        }
    }

    #[test]
    fn text_export_layout() {
        let m = build_uniform_mesh(1).unwrap();
        let mut buf = Vec::new();
        m.write_text(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<_> = text.lines().collect();
        assert_eq!(lines[0], "4 2");
        assert_eq!(lines.len(), 1 + 4 + 2);
        assert_eq!(lines[5], "0 1 3");
        assert_eq!(lines[6], "0 3 2");
    }
}
