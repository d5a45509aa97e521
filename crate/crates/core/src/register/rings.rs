use std::collections::VecDeque;

use crate::voxgrid::Mesh;

/// Default neighbourhood depth for transform diffusion.
pub const DEFAULT_RING_RADIUS: usize = 4;

/// For every vertex, the vertices reachable within `radius` edge hops
/// (excluding itself), sorted ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RingAdjacency {
    radius: usize,
    rings: Vec<Vec<usize>>,
}

impl RingAdjacency {
    pub fn radius(&self) -> usize {
        self.radius
    }

    pub fn ring(&self, v: usize) -> &[usize] {
        &self.rings[v]
    }

    pub fn rings(&self) -> &[Vec<usize>] {
        &self.rings
    }

    pub fn len(&self) -> usize {
        self.rings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rings.is_empty()
    }

    /// Vertices with no edges; their rings are empty.
    pub fn isolated(&self) -> Vec<usize> {
        (0..self.rings.len()).filter(|&v| self.rings[v].is_empty()).collect()
    }
}

/// Breadth-first closure of the edge graph up to `radius` hops.
pub fn build_rings(mesh: &Mesh, radius: usize) -> RingAdjacency {
    build_rings_from_adjacency(&mesh.neighbors(), radius)
}

pub(crate) fn build_rings_from_adjacency(adj: &[Vec<usize>], radius: usize) -> RingAdjacency {
    let n = adj.len();
    let mut depth = vec![usize::MAX; n];
    let mut touched = Vec::new();
    let mut queue = VecDeque::new();
    let mut rings = Vec::with_capacity(n);
    for start in 0..n {
        depth[start] = 0;
        touched.push(start);
        queue.push_back(start);
        let mut ring = Vec::new();
        while let Some(v) = queue.pop_front() {
            if depth[v] == radius {
                continue;
            }
            for &w in &adj[v] {
                if depth[w] == usize::MAX {
                    depth[w] = depth[v] + 1;
                    touched.push(w);
                    ring.push(w);
                    queue.push_back(w);
                }
            }
        }
        for &t in &touched {
            depth[t] = usize::MAX;
        }
        touched.clear();
        ring.sort_unstable();
        rings.push(ring);
    }
    RingAdjacency { radius, rings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Vec3;

    #[test]
    fn triangle_one_ring() {
        let m = Mesh::new(vec![Vec3::zeros(), Vec3::x(), Vec3::y()], vec![[0, 1, 2]]).unwrap();
        let r = build_rings(&m, 1);
        assert_eq!(r.ring(0), &[1, 2]);
        assert_eq!(r.ring(1), &[0, 2]);
        assert_eq!(r.ring(2), &[0, 1]);
    }

    #[test]
    fn path_two_ring() {
        let adj = vec![vec![1], vec![0, 2], vec![1]];
        let r = build_rings_from_adjacency(&adj, 2);
        assert_eq!(r.ring(0), &[1, 2]);
        let r1 = build_rings_from_adjacency(&adj, 1);
        assert_eq!(r1.ring(0), &[1]);
    }

    #[test]
    fn isolated_vertex_has_empty_ring() {
        let m = Mesh::new(
            vec![Vec3::zeros(), Vec3::x(), Vec3::y(), Vec3::z()],
            vec![[0, 1, 2]],
        )
        .unwrap();
        let r = build_rings(&m, 4);
        assert!(r.ring(3).is_empty());
        assert_eq!(r.isolated(), vec![3]);
    }
}
