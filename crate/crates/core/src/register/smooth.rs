use crate::error::{Error, Result};
use crate::voxgrid::Mesh;
use crate::Vec3;

pub const DEFAULT_SMOOTH_ITERATIONS: usize = 5;
pub const DEFAULT_SMOOTH_LAMBDA: f64 = 0.5;

/// Uniform-weight ("umbrella") Laplacian smoothing with simultaneous updates:
/// `v ← v + λ (mean(neighbours) − v)`. Vertices without edges stay put.
pub fn laplacian_smooth(mesh: &Mesh, iterations: usize, lambda: f64) -> Result<Mesh> {
    Ok(laplacian_smooth_traced(mesh, iterations, lambda)?.0)
}

/// As [`laplacian_smooth`], also returning the Laplacian energy before the
/// first and after every iteration.
pub fn laplacian_smooth_traced(mesh: &Mesh, iterations: usize, lambda: f64) -> Result<(Mesh, Vec<f64>)> {
    if !(lambda > 0.0 && lambda <= 1.0) {
        return Err(Error::invalid(format!("smoothing lambda {lambda} must lie in (0, 1]")));
    }
    let adj = mesh.neighbors();
    let mut v = mesh.vertices().to_vec();
    let mut energy = vec![energy_of(&v, &adj)];
    for _ in 0..iterations {
        let lap = umbrella(&v, &adj);
        for (p, l) in v.iter_mut().zip(&lap) {
            *p += l * lambda;
        }
        energy.push(energy_of(&v, &adj));
    }
    Ok((mesh.with_vertices(v)?, energy))
}

fn umbrella(v: &[Vec3], adj: &[Vec<usize>]) -> Vec<Vec3> {
    v.iter()
        .zip(adj)
        .map(|(p, n)| {
            if n.is_empty() {
                Vec3::zeros()
            } else {
                n.iter().map(|&j| v[j]).sum::<Vec3>() / n.len() as f64 - p
            }
        })
        .collect()
}

fn energy_of(v: &[Vec3], adj: &[Vec<usize>]) -> f64 {
    umbrella(v, adj).iter().map(|l| l.norm_squared()).sum()
}

/// Discrete Laplacian energy `Σ_v |mean(neighbours(v)) − v|²`.
pub fn laplacian_energy(mesh: &Mesh) -> f64 {
    energy_of(mesh.vertices(), &mesh.neighbors())
}
