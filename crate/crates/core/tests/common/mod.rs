#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use voroflow::{build_mesh, BoundaryKind, DomainPolygon, Mesh, Vec2};

/// `nx × ny` lattice over the box with uniform jitter of `jitter` spacings.
pub fn lattice(min: Vec2, max: Vec2, nx: usize, ny: usize, jitter: f64, seed: u64) -> Vec<Vec2> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = Vec2::new((max.x - min.x) / nx as f64, (max.y - min.y) / ny as f64);
    (0..nx * ny)
        .map(|k| {
            let (i, j) = (k % nx, k / nx);
            Vec2::new(
                min.x + (i as f64 + 0.5 + jitter * (2.0 * rng.gen::<f64>() - 1.0)) * h.x,
                min.y + (j as f64 + 0.5 + jitter * (2.0 * rng.gen::<f64>() - 1.0)) * h.y,
            )
        })
        .collect()
}

pub fn unit_box(kind: BoundaryKind) -> DomainPolygon {
    DomainPolygon::rectangle_uniform(Vec2::zeros(), Vec2::new(1.0, 1.0), kind).unwrap()
}

pub fn jittered_mesh(domain: &DomainPolygon, n: usize, jitter: f64, seed: u64) -> Mesh {
    let (min, max) = domain.bounding_box();
    build_mesh(&lattice(min, max, n, n, jitter, seed), domain).unwrap()
}

/// Cells whose neighbors all lie away from the walls.
pub fn deep_interior(mesh: &Mesh) -> Vec<bool> {
    mesh.cells
        .iter()
        .map(|c| c.is_interior() && c.facets.iter().all(|f| mesh.cells[f.neighbor].is_interior()))
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

/// A jittered `n × n` lattice in the unit box whose mesh quality falls in
/// `[lo, hi)`; the jitter amplitude is redrawn until it does.
pub fn degraded_lattice(domain: &DomainPolygon, n: usize, lo: f64, hi: f64, seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (min, max) = domain.bounding_box();
    loop {
        let jitter = rng.gen_range(0.25..0.45);
        let m = build_mesh(&lattice(min, max, n, n, jitter, rng.gen()), domain).unwrap();
        let q = voroflow::cell_quality(&m).mesh;
        if (lo..hi).contains(&q) {
            return m;
        }
    }
}
