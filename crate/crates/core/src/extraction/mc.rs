use std::collections::HashMap;
use std::sync::OnceLock;

use rayon::prelude::*;

use super::grid::ScalarGrid;
use crate::error::{Error, Result};
use crate::geometry::{Point3, TriMesh, Vec3};

/// Cube corner `c` sits at offset `(c & 1, (c >> 1) & 1, (c >> 2) & 1)`.
fn corner_offset(c: usize) -> [usize; 3] {
    [c & 1, (c >> 1) & 1, (c >> 2) & 1]
}

/// The 12 cube edges as (lower corner, upper corner, axis).
fn cube_edges() -> Vec<(usize, usize, usize)> {
    let mut edges = Vec::with_capacity(12);
    for axis in 0..3 {
        let bit = 1 << axis;
        for c in (0..8).filter(|c| c & bit == 0) {
            edges.push((c, c | bit, axis));
        }
    }
    edges
}

/// Triangles of each of the 256 corner configurations, as cube-edge
/// indices. Bit `c` of the case index is set when corner `c` is at or above
/// the threshold.
struct CaseTable {
    edges: Vec<(usize, usize, usize)>,
    triangles: Vec<Vec<[usize; 3]>>,
}

fn case_table() -> &'static CaseTable {
    static TABLE: OnceLock<CaseTable> = OnceLock::new();
    TABLE.get_or_init(build_case_table)
}

/// Builds the table from first principles instead of a hand-typed list.
///
/// On every cube face the threshold crossings are joined into segments.
/// A face whose diagonal corners agree is ambiguous; there the segments
/// always cut off the above-threshold corners, so two cubes sharing the face
/// make the same choice and the surface closes up. Segments are directed
/// so that, chained into loops, they wind counterclockwise seen from the
/// above-threshold side; each loop is then fanned into triangles whose
/// normals point toward increasing values.
fn build_case_table() -> CaseTable {
    let edges = cube_edges();
    let edge_of = |a: usize, b: usize| {
        edges
            .iter()
            .position(|&(lo, hi, _)| (lo, hi) == (a.min(b), a.max(b)))
            .expect("corners share an edge")
    };
    let pos = |c: usize| {
        let o = corner_offset(c);
        Vec3::new(o[0] as f64, o[1] as f64, o[2] as f64)
    };
    let mid = |e: usize| (pos(edges[e].0) + pos(edges[e].1)) * 0.5;

    // Faces as (corners in cyclic order, outward normal).
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for side in 0..2 {
            let corner = |a: usize, b: usize| (side << axis) | (a << u) | (b << v);
            let cyc = [corner(0, 0), corner(1, 0), corner(1, 1), corner(0, 1)];
            let mut n = Vec3::zeros();
            n[axis] = if side == 1 { 1.0 } else { -1.0 };
            faces.push((cyc, n));
        }
    }

    let mut triangles = Vec::with_capacity(256);
    for case in 0..256usize {
        let above = |c: usize| case >> c & 1 == 1;
        let mut next: HashMap<usize, usize> = HashMap::new();
        for (cyc, n) in &faces {
            let mut segments: Vec<(usize, usize, Vec3)> = Vec::new();
            let crossing: Vec<usize> = (0..4).filter(|&i| above(cyc[i]) != above(cyc[(i + 1) % 4])).collect();
            match crossing.len() {
                0 => {}
                2 => {
                    let (a, b) = (crossing[0], crossing[1]);
                    let ea = edge_of(cyc[a], cyc[(a + 1) % 4]);
                    let eb = edge_of(cyc[b], cyc[(b + 1) % 4]);
                    let (mut up, mut down) = (Vec3::zeros(), Vec3::zeros());
                    for &c in cyc {
                        if above(c) {
                            up += pos(c);
                        } else {
                            down += pos(c);
                        }
                    }
                    let count_up = cyc.iter().filter(|&&c| above(c)).count() as f64;
                    let toward = up / count_up - down / (4.0 - count_up);
                    segments.push((ea, eb, toward));
                }
                4 => {
                    for i in (0..4).filter(|&i| above(cyc[i])) {
                        let ea = edge_of(cyc[(i + 3) % 4], cyc[i]);
                        let eb = edge_of(cyc[i], cyc[(i + 1) % 4]);
                        let toward = pos(cyc[i]) - (mid(ea) + mid(eb)) * 0.5;
                        segments.push((ea, eb, toward));
                    }
                }
                _ => unreachable!("a cycle of four corners changes sign an even number of times"),
            }
            for (ea, eb, toward) in segments {
                let along = toward.cross(n);
                let (from, to) = if (mid(eb) - mid(ea)).dot(&along) > 0.0 { (ea, eb) } else { (eb, ea) };
                let clash = next.insert(from, to);
                debug_assert!(clash.is_none());
            }
        }
        let mut tris = Vec::new();
        let mut starts: Vec<usize> = next.keys().copied().collect();
        starts.sort_unstable();
        let mut used = [false; 12];
        for s in starts {
            if used[s] {
                continue;
            }
            let mut lp = vec![s];
            used[s] = true;
            let mut e = next[&s];
            while e != s {
                used[e] = true;
                lp.push(e);
                e = next[&e];
            }
            for i in 1..lp.len() - 1 {
                tris.push([lp[0], lp[i], lp[i + 1]]);
            }
        }
        triangles.push(tris);
    }
    CaseTable { edges, triangles }
}

/// Level set `{f = tau}` of the grid, vertices placed by linear
/// interpolation along cell edges and shared between neighboring cells.
/// Face normals point toward increasing values. A level set that misses the
/// grid yields a mesh without faces.
pub fn marching_cubes(grid: &ScalarGrid, tau: f64) -> Result<TriMesh> {
    if !tau.is_finite() {
        return Err(Error::invalid("threshold must be finite"));
    }
    if let Some(i) = grid.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("grid value {i} is not finite")));
    }
    let table = case_table();
    let [nx, ny, nz] = grid.dims;
    // Global edge id: 3 * (index of the edge's lower node) + axis.
    let slabs: Vec<Vec<[usize; 3]>> = (0..nz - 1)
        .into_par_iter()
        .map(|k| {
            let mut out = Vec::new();
            for j in 0..ny - 1 {
                for i in 0..nx - 1 {
                    let mut case = 0usize;
                    for c in 0..8 {
                        let o = corner_offset(c);
                        if grid.value(i + o[0], j + o[1], k + o[2]) >= tau {
                            case |= 1 << c;
                        }
                    }
                    for tri in &table.triangles[case] {
                        out.push(tri.map(|e| {
                            let (lo, _, axis) = table.edges[e];
                            let o = corner_offset(lo);
                            3 * grid.index(i + o[0], j + o[1], k + o[2]) + axis
                        }));
                    }
                }
            }
            out
        })
        .collect();

    let mut ids: HashMap<usize, usize> = HashMap::new();
    let mut vertices = Vec::new();
    let mut faces = Vec::with_capacity(slabs.iter().map(Vec::len).sum());
    for tri in slabs.iter().flatten() {
        let f = tri.map(|edge| {
            *ids.entry(edge).or_insert_with(|| {
                vertices.push(edge_point(grid, edge, tau));
                vertices.len() - 1
            })
        });
        faces.push(f);
    }
    TriMesh::new(vertices, faces)
}

fn edge_point(grid: &ScalarGrid, edge: usize, tau: f64) -> Point3 {
    let (node, axis) = (edge / 3, edge % 3);
    let i = node % grid.dims[0];
    let j = (node / grid.dims[0]) % grid.dims[1];
    let k = node / (grid.dims[0] * grid.dims[1]);
    let mut o = [0, 0, 0];
    o[axis] = 1;
    let (a, b) = (grid.values[node], grid.value(i + o[0], j + o[1], k + o[2]));
    let t = (tau - a) / (b - a);
    let mut p = grid.node(i, j, k);
    p[axis] += t * grid.cell;
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_expected_shape() {
        let t = case_table();
        assert!(t.triangles[0].is_empty() && t.triangles[255].is_empty());
        // A single isolated corner gives one triangle.
        for c in 0..8 {
            assert_eq!(t.triangles[1 << c].len(), 1);
            assert_eq!(t.triangles[255 ^ (1 << c)].len(), 1);
        }
        // Complementary cases have the same number of crossings.
        for case in 0..256 {
            let edges = |c: usize| {
                let mut e: Vec<usize> = t.triangles[c].iter().flatten().copied().collect();
                e.sort_unstable();
                e.dedup();
                e
            };
            assert_eq!(edges(case), edges(255 ^ case));
        }
    }

    #[test]
    fn single_corner_normal_faces_that_corner() {
        let mut values = vec![0.0; 8];
        values[0] = 1.0;
        let grid = ScalarGrid::new(Point3::origin(), 1.0, [2, 2, 2], values).unwrap();
        let m = marching_cubes(&grid, 0.5).unwrap();
        assert_eq!(m.face_count(), 1);
        let [a, b, c] = m.triangle(0);
        let n = (b - a).cross(&(c - a));
        assert!(n.x < 0.0 && n.y < 0.0 && n.z < 0.0);
    }
}
