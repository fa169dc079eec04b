use std::collections::VecDeque;

use super::TriMesh;

/// Sorted, de-duplicated 1-ring neighbours of every vertex.
pub fn vertex_neighbors(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut adj = vec![Vec::new(); mesh.vertex_count()];
    for f in mesh.faces() {
        for k in 0..3 {
            let (a, b) = (f[k], f[(k + 1) % 3]);
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    adj
}

/// Partitions `vertex_set` by edge connectivity restricted to the set.
///
/// Components are returned largest first (ties by smallest member), each
/// sorted ascending. Indices outside the mesh are ignored.
pub fn connected_components(mesh: &TriMesh, vertex_set: &[usize]) -> Vec<Vec<usize>> {
    let n = mesh.vertex_count();
    let mut selected = vec![false; n];
    for &v in vertex_set {
        if v < n {
            selected[v] = true;
        }
    }
    let adj = vertex_neighbors(mesh);
    let mut seen = vec![false; n];
    let mut comps = Vec::new();
    let mut queue = VecDeque::new();
    for start in 0..n {
        if !selected[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let mut comp = Vec::new();
        while let Some(v) = queue.pop_front() {
            comp.push(v);
            for &w in &adj[v] {
                if selected[w] && !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        comp.sort_unstable();
        comps.push(comp);
    }
    comps.sort_by(|a, b| b.len().cmp(&a.len()).then(a[0].cmp(&b[0])));
    comps
}
