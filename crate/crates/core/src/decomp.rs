//! Overlapping mesh decomposition: recursive coordinate bisection,
//! overlap growth by vertex rings, Boolean restriction / partition-of-unity
//! operators, and the nested-pair coarse interpolation space.

use crate::mesh::{Mesh, NestedMeshPair};
use crate::sparsela::CsrMatrix;

/// Overlapping subdomain index sets over the fine-mesh vertices.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub n_sub: usize,
    /// Per-subdomain sorted vertex indices, overlap included.
    pub subdomain_dofs: Vec<Vec<usize>>,
    /// Owning subdomain of each vertex (exactly one owner per vertex).
    pub owner: Vec<usize>,
    pub overlap_layers: usize,
}

/// Boolean restriction data for one subdomain: the dof list plays the role
/// of R_i, `owned` is the diagonal of the partition-of-unity matrix D_i
/// restricted to the subdomain.
#[derive(Debug, Clone)]
pub struct Restriction {
    pub dofs: Vec<usize>,
    pub owned: Vec<bool>,
}

/// Coarse-space interpolation Z (fine×coarse) and its transpose R0.
#[derive(Debug, Clone)]
pub struct CoarseSpace {
    pub z: CsrMatrix,
    pub r0: CsrMatrix,
}

/// Partition mesh vertices into `n_sub` sets by recursive coordinate
/// bisection: split the longest bounding-box axis at the median, recurse.
/// Ties at medians go to the lower subdomain id. Zero overlap.
pub fn partition(mesh: &Mesh, n_sub: usize) -> Decomposition {
    assert!(n_sub >= 1, "need at least one subdomain");
    assert!(
        n_sub <= mesh.n_vertices(),
        "n_sub {} exceeds vertex count {}",
        n_sub,
        mesh.n_vertices()
    );
    let mut owner = vec![0usize; mesh.n_vertices()];
    let all: Vec<usize> = (0..mesh.n_vertices()).collect();
    bisect(mesh, &all, 0, n_sub, &mut owner);
    let mut subdomain_dofs = vec![Vec::new(); n_sub];
    for (v, &o) in owner.iter().enumerate() {
        subdomain_dofs[o].push(v);
    }
    Decomposition { n_sub, subdomain_dofs, owner, overlap_layers: 0 }
}

fn bisect(mesh: &Mesh, verts: &[usize], first_id: usize, parts: usize, owner: &mut [usize]) {
    if parts == 1 {
        for &v in verts {
            owner[v] = first_id;
        }
        return;
    }
    // Split counts as evenly as the (possibly odd) part count allows.
    let left_parts = parts / 2;
    let left_count = verts.len() * left_parts / parts;
    // Longest axis of this subset's bounding box.
    let mut lo = [f64::INFINITY; 2];
    let mut hi = [f64::NEG_INFINITY; 2];
    for &v in verts {
        for d in 0..2 {
            lo[d] = lo[d].min(mesh.vertices[v][d]);
            hi[d] = hi[d].max(mesh.vertices[v][d]);
        }
    }
    let axis = if hi[0] - lo[0] >= hi[1] - lo[1] { 0 } else { 1 };
    let mut sorted = verts.to_vec();
    // Sort by coordinate, breaking coordinate ties by vertex index so the
    // median split (and hence ownership) is reproducible.
    sorted.sort_by(|&a, &b| {
        mesh.vertices[a][axis]
            .total_cmp(&mesh.vertices[b][axis])
            .then(a.cmp(&b))
    });
    let (left, right) = sorted.split_at(left_count);
    bisect(mesh, left, first_id, left_parts, owner);
    bisect(mesh, right, first_id + left_parts, parts - left_parts, owner);
}

/// Grow each subdomain's dof set by `layers` rings of mesh-adjacent
/// vertices. Ownership is unchanged.
pub fn add_overlap(d: &Decomposition, mesh: &Mesh, layers: usize) -> Decomposition {
    assert!(layers >= 1, "overlap layers must be >= 1");
    let adj = mesh.vertex_adjacency();
    let mut subdomain_dofs = Vec::with_capacity(d.n_sub);
    for dofs in &d.subdomain_dofs {
        let mut member = vec![false; mesh.n_vertices()];
        for &v in dofs {
            member[v] = true;
        }
        let mut frontier: Vec<usize> = dofs.clone();
        for _ in 0..layers {
            let mut next = Vec::new();
            for &v in &frontier {
                for &u in &adj[v] {
                    if !member[u] {
                        member[u] = true;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            frontier = next;
        }
        subdomain_dofs
            .push((0..mesh.n_vertices()).filter(|&v| member[v]).collect::<Vec<usize>>());
    }
    Decomposition {
        n_sub: d.n_sub,
        subdomain_dofs,
        owner: d.owner.clone(),
        overlap_layers: d.overlap_layers + layers,
    }
}

/// Build the Boolean restriction / partition-of-unity data per subdomain.
/// The identity Σ R_iᵀ D_i R_i = I holds bit-exactly because every dof is
/// owned by exactly one subdomain and D_i masks all others.
pub fn build_restrictions(d: &Decomposition, n: usize) -> Vec<Restriction> {
    assert_eq!(d.owner.len(), n);
    d.subdomain_dofs
        .iter()
        .enumerate()
        .map(|(i, dofs)| Restriction {
            dofs: dofs.clone(),
            owned: dofs.iter().map(|&v| d.owner[v] == i).collect(),
        })
        .collect()
}

/// Coarse interpolation from the nested pair's barycentric parent map.
/// Row v of Z holds the barycentric weights of fine vertex v in its coarse
/// parent cell; coarse vertices get a single unit entry.
pub fn build_coarse_space(pair: &NestedMeshPair) -> CoarseSpace {
    let n = pair.fine.n_vertices();
    let nc = pair.coarse.n_vertices();
    let mut triplets = Vec::new();
    for (v, &(cell, bary)) in pair.parent.iter().enumerate() {
        let nodes = pair.coarse.cell(cell);
        for (k, &cv) in nodes.iter().enumerate() {
            if bary[k] != 0.0 {
                triplets.push((v, cv, bary[k]));
            }
        }
    }
    let z = CsrMatrix::from_triplets(n, nc, &triplets);
    let r0 = z.transpose();
    CoarseSpace { z, r0 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{interval_mesh, refine_uniform, unit_square_mesh};

    fn is_connected(mesh: &Mesh, set: &[usize]) -> bool {
        if set.is_empty() {
            return true;
        }
        let adj = mesh.vertex_adjacency();
        let member: std::collections::HashSet<usize> = set.iter().copied().collect();
        let mut seen = std::collections::HashSet::new();
        let mut stack = vec![set[0]];
        seen.insert(set[0]);
        while let Some(v) = stack.pop() {
            for &u in &adj[v] {
                if member.contains(&u) && seen.insert(u) {
                    stack.push(u);
                }
            }
        }
        seen.len() == set.len()
    }

    #[test]
    fn single_subdomain_is_everything() {
        let m = unit_square_mesh(4).unwrap();
        let d = partition(&m, 1);
        assert_eq!(d.subdomain_dofs[0].len(), 25);
        let d2 = add_overlap(&d, &m, 1);
        assert_eq!(d2.subdomain_dofs[0].len(), 25);
    }

    #[test]
    fn two_way_split_is_balanced() {
        let m = unit_square_mesh(4).unwrap();
        let d = partition(&m, 2);
        let mut sizes: Vec<usize> = d.subdomain_dofs.iter().map(|s| s.len()).collect();
        sizes.sort_unstable();
        assert_eq!(sizes, vec![12, 13]);
    }

    #[test]
    fn four_way_split_connected_quadrants() {
        let m = unit_square_mesh(8).unwrap();
        let d = partition(&m, 4);
        for s in &d.subdomain_dofs {
            assert!(is_connected(&m, s), "subdomain not connected");
        }
        // Every vertex owned exactly once.
        let total: usize = d.subdomain_dofs.iter().map(|s| s.len()).sum();
        assert_eq!(total, m.n_vertices());
    }

    #[test]
    fn rejects_too_many_subdomains() {
        let m = interval_mesh(2, 1.0).unwrap();
        let r = std::panic::catch_unwind(|| partition(&m, 10));
        assert!(r.is_err());
    }

    #[test]
    fn overlap_1d_halves_gain_interface_neighbor() {
        // 10 cells, 11 vertices, halves {0..5} and {6..10} after median
        // split (vertex 5 to the lower id by the tie rule — here no tie,
        // median splits 11 vertices 5/6).
        let m = interval_mesh(10, 1.0).unwrap();
        let d = partition(&m, 2);
        let d1 = add_overlap(&d, &m, 1);
        // Hand-enumerated adjacency: each side gains exactly the vertex
        // across the interface.
        let a: &Vec<usize> = &d1.subdomain_dofs[0];
        let b: &Vec<usize> = &d1.subdomain_dofs[1];
        assert_eq!(a.len(), d.subdomain_dofs[0].len() + 1);
        assert_eq!(b.len(), d.subdomain_dofs[1].len() + 1);
        let last_owned = *d.subdomain_dofs[0].last().unwrap();
        assert!(a.contains(&(last_owned + 1)));
        assert!(b.contains(&last_owned));
    }

    #[test]
    fn overlap_saturates_to_whole_mesh() {
        let m = interval_mesh(6, 1.0).unwrap();
        let d = partition(&m, 2);
        let sat = add_overlap(&d, &m, 10);
        for s in &sat.subdomain_dofs {
            assert_eq!(s.len(), m.n_vertices());
        }
        // Idempotent at saturation.
        let sat2 = add_overlap(&sat, &m, 1);
        assert_eq!(sat.subdomain_dofs, sat2.subdomain_dofs);
    }

    #[test]
    fn overlap_is_monotone() {
        let m = unit_square_mesh(6).unwrap();
        let d = partition(&m, 4);
        let mut prev = d.clone();
        for _ in 0..3 {
            let next = add_overlap(&prev, &m, 1);
            for (a, b) in prev.subdomain_dofs.iter().zip(&next.subdomain_dofs) {
                let bs: std::collections::HashSet<usize> = b.iter().copied().collect();
                assert!(a.iter().all(|v| bs.contains(v)), "overlap shrank a subdomain");
            }
            prev = next;
        }
    }

    #[test]
    fn restrictions_partition_of_unity_bit_exact() {
        let m = unit_square_mesh(7).unwrap();
        for n_sub in [2usize, 4, 8] {
            let d = add_overlap(&partition(&m, n_sub), &m, 1);
            let rs = build_restrictions(&d, m.n_vertices());
            let x: Vec<f64> = (0..m.n_vertices()).map(|i| (i as f64).sin() * 7.3).collect();
            // y = Σ R_iᵀ D_i R_i x must reproduce x bit-exactly.
            let mut y = vec![0.0f64; x.len()];
            let mut writes = vec![0usize; x.len()];
            for r in &rs {
                for (k, &g) in r.dofs.iter().enumerate() {
                    if r.owned[k] {
                        y[g] += x[g];
                        writes[g] += 1;
                    }
                }
            }
            assert!(writes.iter().all(|&w| w == 1));
            assert_eq!(x, y);
        }
    }

    #[test]
    fn unowned_overlap_dofs_masked() {
        let m = interval_mesh(10, 1.0).unwrap();
        let d = add_overlap(&partition(&m, 2), &m, 1);
        let rs = build_restrictions(&d, m.n_vertices());
        for (i, r) in rs.iter().enumerate() {
            for (k, &g) in r.dofs.iter().enumerate() {
                assert_eq!(r.owned[k], d.owner[g] == i);
            }
            assert!(r.owned.iter().any(|&o| !o), "overlap dofs should be unowned somewhere");
        }
    }

    #[test]
    fn single_subdomain_restriction_is_identity() {
        let m = interval_mesh(5, 1.0).unwrap();
        let d = partition(&m, 1);
        let rs = build_restrictions(&d, m.n_vertices());
        assert_eq!(rs.len(), 1);
        assert_eq!(rs[0].dofs, (0..6).collect::<Vec<_>>());
        assert!(rs[0].owned.iter().all(|&o| o));
    }

    #[test]
    fn coarse_space_rows() {
        let pair = refine_uniform(&unit_square_mesh(2).unwrap());
        let cs = build_coarse_space(&pair);
        assert_eq!(cs.z.n_rows, pair.fine.n_vertices());
        assert_eq!(cs.z.n_cols, pair.coarse.n_vertices());
        // Coarse vertices interpolate to themselves.
        for v in 0..pair.coarse.n_vertices() {
            let (cols, vals) = cs.z.row(v);
            assert_eq!(cols, &[v]);
            assert_eq!(vals, &[1.0]);
        }
        // Edge midpoints: two entries of 0.5.
        for v in pair.coarse.n_vertices()..pair.fine.n_vertices() {
            let (_, vals) = cs.z.row(v);
            assert_eq!(vals.len(), 2);
            assert!(vals.iter().all(|&w| (w - 0.5).abs() < 1e-15));
        }
        // Z·1 = 1 and row sums are 1.
        let ones = vec![1.0; cs.z.n_cols];
        for s in cs.z.spmv(&ones) {
            assert!((s - 1.0).abs() <= 1e-14);
        }
        // R0 is the transpose.
        assert_eq!(cs.r0, cs.z.transpose());
    }
}
