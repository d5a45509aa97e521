#![allow(dead_code)]

use std::collections::HashMap;

use handvox::geom::closest_point_on_triangle;
use handvox::{Mesh, Vec3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Unit icosphere with `levels` midpoint subdivisions, scaled by `radius`.
pub fn icosphere(levels: usize, radius: f64, center: Vec3) -> Mesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut verts: Vec<Vec3> = [
        (-1.0, t, 0.0),
        (1.0, t, 0.0),
        (-1.0, -t, 0.0),
        (1.0, -t, 0.0),
        (0.0, -1.0, t),
        (0.0, 1.0, t),
        (0.0, -1.0, -t),
        (0.0, 1.0, -t),
        (t, 0.0, -1.0),
        (t, 0.0, 1.0),
        (-t, 0.0, -1.0),
        (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z).normalize())
    .collect();
    let mut faces: Vec<[usize; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut cache: HashMap<(usize, usize), usize> = HashMap::new();
        let mut mid = |a: usize, b: usize, verts: &mut Vec<Vec3>| {
            let key = (a.min(b), a.max(b));
            *cache.entry(key).or_insert_with(|| {
                verts.push(((verts[a] + verts[b]) / 2.0).normalize());
                verts.len() - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = mid(a, b, &mut verts);
            let bc = mid(b, c, &mut verts);
            let ca = mid(c, a, &mut verts);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    let verts = verts.into_iter().map(|v| center + v * radius).collect();
    Mesh::new(verts, faces).unwrap()
}

/// Icosphere with independent radial noise of up to `noise` on each vertex.
pub fn noisy_sphere(seed: u64, radius: f64, noise: f64) -> Mesh {
    let base = icosphere(2, radius, Vec3::zeros());
    let mut r = rng(seed);
    let verts = base
        .vertices()
        .iter()
        .map(|v| v * (1.0 + r.random_range(-noise..noise) / radius))
        .collect();
    base.with_vertices(verts).unwrap()
}

/// Exact distance from `p` to the closest face of `mesh`.
pub fn surface_distance(mesh: &Mesh, p: &Vec3) -> f64 {
    let v = mesh.vertices();
    mesh.faces()
        .iter()
        .map(|f| (p - closest_point_on_triangle(p, &v[f[0]], &v[f[1]], &v[f[2]])).norm())
        .fold(f64::INFINITY, f64::min)
}

pub fn random_point(r: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vec3 {
    Vec3::new(r.random_range(lo..hi), r.random_range(lo..hi), r.random_range(lo..hi))
}
