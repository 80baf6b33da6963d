//! Bounded Voronoi tessellation of a convex domain by per-seed half-plane
//! clipping, plus the geometric queries used by the operators and the remap.

use std::collections::HashMap;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::geometry::{cross, polygon_area, polygon_centroid, polygon_diameter, vertex_mean, DomainPolygon, Vec2};
use crate::grid::{PointGrid, Shift};

/// Interior facet shared with neighbor `neighbor` (seen at `neighbor_pos`,
/// which differs from its stored seed by a periodic image shift).
#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub neighbor: usize,
    pub shift: Shift,
    pub neighbor_pos: Vec2,
    /// Facet length |Γ_ij|.
    pub area: f64,
    /// Midpoint of the clipped segment.
    pub centroid: Vec2,
    /// Seed separation r_ij.
    pub distance: f64,
    /// (x_j - x_i) / r_ij.
    pub normal: Vec2,
}

/// Portion of the cell boundary lying on domain edge `edge`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryFacet {
    pub edge: usize,
    pub area: f64,
    pub centroid: Vec2,
    /// Outward unit normal of the domain edge.
    pub normal: Vec2,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    /// Counterclockwise polygon vertices (may extend past periodic edges).
    pub vertices: Vec<Vec2>,
    pub volume: f64,
    pub diameter: f64,
    pub centroid: Vec2,
    pub facets: Vec<Facet>,
    pub boundary: Vec<BoundaryFacet>,
}

impl Cell {
    pub fn is_interior(&self) -> bool {
        self.boundary.is_empty()
    }

    pub fn perimeter(&self) -> f64 {
        self.facets.iter().map(|f| f.area).sum::<f64>() + self.boundary.iter().map(|b| b.area).sum::<f64>()
    }
}

/// Immutable tessellation snapshot.
#[derive(Debug, Clone)]
pub struct Mesh {
    pub seeds: Vec<Vec2>,
    pub cells: Vec<Cell>,
    pub domain: DomainPolygon,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum EdgeTag {
    Neighbor(usize, Shift),
    Boundary(usize),
}

type TaggedPolygon = Vec<(Vec2, EdgeTag)>;

/// Per-cell mesh quality: min over max neighbor separation.
#[derive(Debug, Clone, PartialEq)]
pub struct QualityReport {
    pub cell: Vec<f64>,
    pub mesh: f64,
}

impl Mesh {
    pub fn len(&self) -> usize {
        self.seeds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.seeds.is_empty()
    }

    pub fn total_volume(&self) -> f64 {
        self.cells.iter().map(|c| c.volume).sum()
    }

    pub fn volumes(&self) -> Vec<f64> {
        self.cells.iter().map(|c| c.volume).collect()
    }

    /// Mean spacing sqrt(|Ω| / N).
    pub fn mean_spacing(&self) -> f64 {
        (self.domain.area() / self.len() as f64).sqrt()
    }
}

/// Builds the bounded Voronoi tessellation of `domain` generated by `seeds`.
pub fn build_mesh(seeds: &[Vec2], domain: &DomainPolygon) -> Result<Mesh> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter("no seeds".into()));
    }
    validate_seeds(seeds, domain)?;
    let spacing = (domain.area() / seeds.len() as f64).sqrt();
    let grid = PointGrid::new(seeds, domain, 2.0 * spacing);
    let raw: Vec<TaggedPolygon> =
        (0..seeds.len()).into_par_iter().map(|i| clip_cell(i, seeds, domain, &grid)).collect();
    let mut cells: Vec<Cell> = raw
        .par_iter()
        .enumerate()
        .map(|(i, poly)| assemble_cell(i, poly, seeds, domain, &grid))
        .collect();
    symmetrize_facets(&mut cells, seeds, &grid, spacing);
    Ok(Mesh { seeds: seeds.to_vec(), cells, domain: domain.clone() })
}

fn validate_seeds(seeds: &[Vec2], domain: &DomainPolygon) -> Result<()> {
    let (min, max) = domain.bounding_box();
    for (i, p) in seeds.iter().enumerate() {
        let mut ok = true;
        for k in 0..domain.num_edges() {
            let n = domain.edge_normal(k);
            let periodic_edge = domain.edges()[k].kind == crate::geometry::BoundaryKind::Periodic;
            let d = domain.edge_distance(k, p);
            if periodic_edge {
                let axis = if n.x.abs() > n.y.abs() { 0 } else { 1 };
                if p[axis] < min[axis] || p[axis] >= max[axis] {
                    ok = false;
                }
            } else if d >= 0.0 {
                ok = false;
            }
        }
        if !ok {
            return Err(Error::SeedOutsideDomain { index: i, x: p.x, y: p.y });
        }
    }
    let tol = 1e-12 * domain.diameter();
    let grid = PointGrid::new(seeds, domain, 2.0 * (domain.area() / seeds.len() as f64).sqrt());
    for (i, p) in seeds.iter().enumerate() {
        let mut dup = None;
        grid.visit_radius(p, tol.max(f64::MIN_POSITIVE), |j, _| {
            if j != i && dup.is_none() {
                dup = Some(j);
            }
        });
        if let Some(j) = dup {
            return Err(Error::DuplicateSeeds(i.min(j), i.max(j)));
        }
    }
    Ok(())
}

/// Starting polygon for seed `i`, relative to the seed position.
fn initial_polygon(i: usize, seeds: &[Vec2], domain: &DomainPolygon) -> TaggedPolygon {
    let x = seeds[i];
    if !domain.is_periodic() {
        return domain
            .vertices()
            .iter()
            .enumerate()
            .map(|(k, v)| (v - x, EdgeTag::Boundary(k)))
            .collect();
    }
    // Periodic rectangle: along periodic axes the cell lies within half a
    // period of its seed, bounded by the bisectors with its own images.
    let (min, max) = domain.bounding_box();
    let period = domain.period();
    let mut lo = min - x;
    let mut hi = max - x;
    for axis in 0..2 {
        if let Some(len) = period[axis] {
            lo[axis] = -0.5 * len;
            hi[axis] = 0.5 * len;
        }
    }
    let side_tag = |normal: Vec2| -> EdgeTag {
        let axis = if normal.x.abs() > 0.5 { 0 } else { 1 };
        let sign = if normal[axis] > 0.0 { 1 } else { -1 };
        if period[axis].is_some() {
            let mut s = [0, 0];
            s[axis] = sign;
            EdgeTag::Neighbor(i, s)
        } else {
            let k = (0..domain.num_edges())
                .find(|&k| (domain.edge_normal(k) - normal).norm() < 1e-9)
                .expect("rectangle edge");
            EdgeTag::Boundary(k)
        }
    };
    vec![
        (Vec2::new(lo.x, lo.y), side_tag(Vec2::new(0.0, -1.0))),
        (Vec2::new(hi.x, lo.y), side_tag(Vec2::new(1.0, 0.0))),
        (Vec2::new(hi.x, hi.y), side_tag(Vec2::new(0.0, 1.0))),
        (Vec2::new(lo.x, hi.y), side_tag(Vec2::new(-1.0, 0.0))),
    ]
}

fn clip_cell(i: usize, seeds: &[Vec2], domain: &DomainPolygon, grid: &PointGrid) -> TaggedPolygon {
    let x = seeds[i];
    let mut poly = initial_polygon(i, seeds, domain);
    let center = grid.bin_of(&x);
    let bin = grid.bin_size();
    let mut candidates: Vec<(f64, usize, Shift, Vec2)> = Vec::new();
    let mut ring = 0i64;
    loop {
        candidates.clear();
        let more = grid.visit_ring(center, ring, |j, s| {
            if j == i {
                return;
            }
            let d = seeds[j] + grid.shift_vector(s) - x;
            candidates.push((d.norm_squared(), j, s, d));
        });
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        for &(_, j, s, d) in &candidates {
            clip_halfplane(&mut poly, d, EdgeTag::Neighbor(j, s));
        }
        let reach = poly.iter().map(|(v, _)| v.norm()).fold(0.0, f64::max);
        let covered = ring as f64 * bin;
        if !more || (ring > 0 && 2.0 * reach <= covered) {
            break;
        }
        ring += 1;
    }
    poly
}

/// Keeps the part of `poly` closer to the origin than to `d`.
fn clip_halfplane(poly: &mut TaggedPolygon, d: Vec2, tag: EdgeTag) {
    let half = 0.5 * d.norm_squared();
    let tol = 1e-13 * d.norm_squared();
    let signed: Vec<f64> = poly.iter().map(|(v, _)| v.dot(&d) - half).collect();
    if signed.iter().all(|&s| s <= tol) {
        return;
    }
    let n = poly.len();
    let mut out: TaggedPolygon = Vec::with_capacity(n + 2);
    for k in 0..n {
        let (a, ta) = poly[k];
        let (b, _) = poly[(k + 1) % n];
        let sa = signed[k];
        let sb = signed[(k + 1) % n];
        let a_in = sa <= tol;
        let b_in = sb <= tol;
        match (a_in, b_in) {
            (true, true) => out.push((a, ta)),
            (true, false) => {
                out.push((a, ta));
                let t = (sa / (sa - sb)).clamp(0.0, 1.0);
                out.push((a + t * (b - a), tag));
            }
            (false, true) => {
                let t = (sa / (sa - sb)).clamp(0.0, 1.0);
                out.push((a + t * (b - a), ta));
            }
            (false, false) => {}
        }
    }
    dedup_polygon(&mut out, 1e-13 * d.norm());
    *poly = out;
}

fn dedup_polygon(poly: &mut TaggedPolygon, tol: f64) {
    let tol2 = tol * tol;
    let mut k = 0;
    while poly.len() > 2 && k < poly.len() {
        let next = (k + 1) % poly.len();
        if (poly[k].0 - poly[next].0).norm_squared() <= tol2 {
            poly.remove(k);
        } else {
            k += 1;
        }
    }
}

fn assemble_cell(i: usize, poly: &TaggedPolygon, seeds: &[Vec2], domain: &DomainPolygon, grid: &PointGrid) -> Cell {
    let x = seeds[i];
    let rel: Vec<Vec2> = poly.iter().map(|(v, _)| *v).collect();
    let volume = polygon_area(&rel);
    let centroid = x + polygon_centroid(&rel);
    let diameter = polygon_diameter(&rel);
    let n = poly.len();
    let mut facets = Vec::new();
    let mut boundary = Vec::new();
    for k in 0..n {
        let (a, tag) = poly[k];
        let b = poly[(k + 1) % n].0;
        let area = (b - a).norm();
        let centroid = x + 0.5 * (a + b);
        match tag {
            EdgeTag::Neighbor(j, s) => {
                let neighbor_pos = seeds[j] + grid.shift_vector(s);
                let sep = neighbor_pos - x;
                let distance = sep.norm();
                facets.push(Facet { neighbor: j, shift: s, neighbor_pos, area, centroid, distance, normal: sep / distance });
            }
            EdgeTag::Boundary(e) => {
                boundary.push(BoundaryFacet { edge: e, area, centroid, normal: domain.edge_normal(e) });
            }
        }
    }
    Cell { vertices: rel.iter().map(|v| v + x).collect(), volume, diameter, centroid, facets, boundary }
}

fn neg(s: Shift) -> Shift {
    [-s[0], -s[1]]
}

/// Makes facet records pairwise consistent: both sides carry the averaged
/// length and midpoint; one-sided slivers from round-off are dropped.
fn symmetrize_facets(cells: &mut [Cell], seeds: &[Vec2], grid: &PointGrid, spacing: f64) {
    let mut index: HashMap<(usize, usize, Shift), usize> = HashMap::new();
    for (i, c) in cells.iter().enumerate() {
        for (a, f) in c.facets.iter().enumerate() {
            index.insert((i, f.neighbor, f.shift), a);
        }
    }
    let drop_tol = 1e-11 * spacing;
    let mut removals: Vec<(usize, usize)> = Vec::new();
    let mut additions: Vec<(usize, Facet)> = Vec::new();
    let mut updates: Vec<(usize, usize, f64, Vec2, f64, Vec2)> = Vec::new();
    for (i, c) in cells.iter().enumerate() {
        for (a, f) in c.facets.iter().enumerate() {
            let j = f.neighbor;
            let owner = i < j || (i == j && f.shift > neg(f.shift));
            match index.get(&(j, i, neg(f.shift))) {
                Some(&b) => {
                    if owner {
                        let g = &cells[j].facets[b];
                        let sv = grid.shift_vector(f.shift);
                        let area = 0.5 * (f.area + g.area);
                        let mid = 0.5 * (f.centroid + g.centroid + sv);
                        updates.push((j, b, area, mid - sv, f.distance, -f.normal));
                        updates.push((i, a, area, mid, f.distance, f.normal));
                    }
                }
                None => {
                    if f.area < drop_tol {
                        removals.push((i, a));
                    } else {
                        let sv = grid.shift_vector(f.shift);
                        additions.push((
                            j,
                            Facet {
                                neighbor: i,
                                shift: neg(f.shift),
                                neighbor_pos: seeds[i] - sv,
                                area: f.area,
                                centroid: f.centroid - sv,
                                distance: f.distance,
                                normal: -f.normal,
                            },
                        ));
                    }
                }
            }
        }
    }
    for (i, a, area, mid, distance, normal) in updates {
        let f = &mut cells[i].facets[a];
        f.area = area;
        f.centroid = mid;
        f.distance = distance;
        f.normal = normal;
    }
    removals.sort_unstable_by(|x, y| y.cmp(x));
    for (i, a) in removals {
        cells[i].facets.remove(a);
    }
    for (j, f) in additions {
        cells[j].facets.push(f);
    }
}

/// Per-cell quality min_j r_ij / max_k r_ik over Voronoi neighbors, and the
/// mesh minimum.
pub fn cell_quality(mesh: &Mesh) -> QualityReport {
    let cell: Vec<f64> = mesh
        .cells
        .iter()
        .map(|c| {
            if c.facets.is_empty() {
                return 1.0;
            }
            let (lo, hi) = c
                .facets
                .iter()
                .fold((f64::INFINITY, 0.0f64), |(lo, hi), f| (lo.min(f.distance), hi.max(f.distance)));
            lo / hi
        })
        .collect();
    let mesh_q = cell.iter().copied().fold(1.0, f64::min);
    QualityReport { cell, mesh: mesh_q }
}

/// Weighted centroid of cell `index`: the polygon is fanned from its vertex
/// mean and each triangle integrated with the edge-midpoint rule (exact for
/// quadratics). Falls back to the plain centroid for vanishing weights.
pub fn weighted_centroid(mesh: &Mesh, index: usize, weight: impl Fn(&Vec2) -> f64) -> Vec2 {
    let cell = &mesh.cells[index];
    polygon_weighted_centroid(&cell.vertices, &weight).unwrap_or(cell.centroid)
}

pub(crate) fn polygon_weighted_centroid(vertices: &[Vec2], weight: &impl Fn(&Vec2) -> f64) -> Option<Vec2> {
    let center = vertex_mean(vertices);
    let n = vertices.len();
    let mut mass = 0.0;
    let mut moment = Vec2::zeros();
    let mut wmax: f64 = 0.0;
    let mut area = 0.0;
    let mid_vals: Vec<(Vec2, f64)> = (0..n)
        .map(|k| {
            let p = 0.5 * (vertices[k] + center);
            (p, weight(&p))
        })
        .collect();
    for k in 0..n {
        let a = vertices[k];
        let b = vertices[(k + 1) % n];
        let tri = 0.5 * cross(&(a - center), &(b - center));
        if tri <= 0.0 {
            continue;
        }
        let p_ab = 0.5 * (a + b);
        let w_ab = weight(&p_ab);
        let (p_a, w_a) = mid_vals[k];
        let (p_b, w_b) = mid_vals[(k + 1) % n];
        wmax = wmax.max(w_ab).max(w_a).max(w_b);
        mass += tri * (w_ab + w_a + w_b) / 3.0;
        moment += tri * (w_ab * p_ab + w_a * p_a + w_b * p_b) / 3.0;
        area += tri;
    }
    if !(mass > 1e-14 * area * wmax) || wmax <= 0.0 {
        return None;
    }
    Some(moment / mass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{BoundaryKind, EdgeCondition};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn unit_square(kind: BoundaryKind) -> DomainPolygon {
        DomainPolygon::rectangle_uniform(Vec2::zeros(), Vec2::new(1.0, 1.0), kind).unwrap()
    }

    pub(crate) fn jittered(n: usize, jitter: f64, seed: u64) -> Vec<Vec2> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let h = 1.0 / n as f64;
        let mut out = Vec::new();
        for j in 0..n {
            for i in 0..n {
                let dx = (2.0 * rng.gen::<f64>() - 1.0) * jitter * h;
                let dy = (2.0 * rng.gen::<f64>() - 1.0) * jitter * h;
                out.push(Vec2::new((i as f64 + 0.5) * h + dx, (j as f64 + 0.5) * h + dy));
            }
        }
        out
    }

    #[test]
    fn single_seed_fills_domain() {
        let m = build_mesh(&[Vec2::new(0.3, 0.7)], &unit_square(BoundaryKind::NoSlip)).unwrap();
        assert_eq!(m.cells.len(), 1);
        assert!((m.cells[0].volume - 1.0).abs() < 1e-15);
        assert!(m.cells[0].facets.is_empty());
        assert_eq!(m.cells[0].boundary.len(), 4);
    }

    #[test]
    fn two_seeds_split_along_bisector() {
        let m = build_mesh(&[Vec2::new(0.25, 0.5), Vec2::new(0.75, 0.5)], &unit_square(BoundaryKind::FreeSlip))
            .unwrap();
        for c in &m.cells {
            assert!((c.volume - 0.5).abs() < 1e-15);
        }
        let f = &m.cells[0].facets[0];
        assert_eq!(f.neighbor, 1);
        assert!((f.area - 1.0).abs() < 1e-15);
        assert!((f.normal - Vec2::new(1.0, 0.0)).norm() < 1e-15);
        assert!((f.centroid - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        assert!((f.distance - 0.5).abs() < 1e-15);
        let g = &m.cells[1].facets[0];
        assert_eq!(g.normal, -f.normal);
    }

    #[test]
    fn boundary_facets_carry_edge_index() {
        let fs = EdgeCondition::new(BoundaryKind::FreeSlip);
        let ns = EdgeCondition::new(BoundaryKind::NoSlip);
        let d = DomainPolygon::rectangle(Vec2::zeros(), Vec2::new(1.0, 1.0), [ns, fs, ns, fs]).unwrap();
        let m = build_mesh(&[Vec2::new(0.25, 0.5), Vec2::new(0.75, 0.5)], &d).unwrap();
        let right: Vec<_> = m.cells[1].boundary.iter().filter(|b| b.edge == 1).collect();
        assert_eq!(right.len(), 1);
        assert_eq!(right[0].normal, Vec2::new(1.0, 0.0));
        assert!((right[0].area - 1.0).abs() < 1e-15);
    }

    #[test]
    fn errors_on_duplicates_and_outside() {
        let d = unit_square(BoundaryKind::NoSlip);
        let dup = build_mesh(&[Vec2::new(0.5, 0.5), Vec2::new(0.2, 0.2), Vec2::new(0.5, 0.5)], &d);
        assert!(matches!(dup, Err(Error::DuplicateSeeds(0, 2))));
        let out = build_mesh(&[Vec2::new(0.5, 0.5), Vec2::new(1.2, 0.2)], &d);
        assert!(matches!(out, Err(Error::SeedOutsideDomain { index: 1, .. })));
        let on_edge = build_mesh(&[Vec2::new(0.0, 0.5)], &d);
        assert!(matches!(on_edge, Err(Error::SeedOutsideDomain { .. })));
    }

    fn check_invariants(m: &Mesh) {
        let total = m.total_volume();
        assert!((total - m.domain.area()).abs() < 1e-12 * m.domain.area(), "partition {total}");
        for (i, c) in m.cells.iter().enumerate() {
            let mut closure = Vec2::zeros();
            for f in &c.facets {
                closure += f.area * f.normal;
                let back = m.cells[f.neighbor]
                    .facets
                    .iter()
                    .find(|g| g.neighbor == i && g.shift == [-f.shift[0], -f.shift[1]])
                    .expect("neighbor symmetry");
                assert_eq!(back.area, f.area);
                assert_eq!(back.distance, f.distance);
                assert_eq!(back.normal, -f.normal);
                let sv = f.neighbor_pos - m.seeds[f.neighbor];
                assert!((back.centroid + sv - f.centroid).norm() < 1e-15);
            }
            for b in &c.boundary {
                closure += b.area * b.normal;
            }
            assert!(closure.norm() < 1e-10 * c.perimeter(), "closure {i}: {}", closure.norm());
            let x = m.seeds[i];
            assert!(crate::geometry::polygon_area(&c.vertices) > 0.0);
            // Seed lies inside its own convex cell.
            let n = c.vertices.len();
            for k in 0..n {
                let e = c.vertices[(k + 1) % n] - c.vertices[k];
                assert!(cross(&e, &(x - c.vertices[k])) > 0.0);
            }
        }
    }

    #[test]
    fn jittered_lattice_invariants() {
        for seed in 0..3 {
            let pts = jittered(32, 0.3, seed);
            let m = build_mesh(&pts, &unit_square(BoundaryKind::FreeSlip)).unwrap();
            check_invariants(&m);
        }
    }

    #[test]
    fn periodic_invariants() {
        let d = unit_square(BoundaryKind::Periodic);
        let pts = jittered(16, 0.4, 7);
        let m = build_mesh(&pts, &d).unwrap();
        check_invariants(&m);
        assert!(m.cells.iter().all(|c| c.is_interior()));
        // Cartesian lattice in a periodic box: every cell a square with 4 neighbors.
        let lattice = jittered(8, 0.0, 0);
        let m = build_mesh(&lattice, &d).unwrap();
        for c in &m.cells {
            assert!((c.volume - 1.0 / 64.0).abs() < 1e-15);
        }
        check_invariants(&m);
    }

    #[test]
    fn periodic_in_one_axis() {
        let p = EdgeCondition::new(BoundaryKind::Periodic);
        let w = EdgeCondition::new(BoundaryKind::NoSlip);
        let d = DomainPolygon::rectangle(Vec2::zeros(), Vec2::new(1.0, 1.0), [w, p, w, p]).unwrap();
        let m = build_mesh(&jittered(10, 0.4, 3), &d).unwrap();
        check_invariants(&m);
        for c in &m.cells {
            for b in &c.boundary {
                assert!(b.edge == 0 || b.edge == 2);
            }
        }
    }

    #[test]
    fn single_seed_periodic_box() {
        let d = unit_square(BoundaryKind::Periodic);
        let m = build_mesh(&[Vec2::new(0.2, 0.9)], &d).unwrap();
        assert!((m.cells[0].volume - 1.0).abs() < 1e-15);
        assert_eq!(m.cells[0].facets.len(), 4);
        assert!(m.cells[0].facets.iter().all(|f| f.neighbor == 0 && (f.distance - 1.0).abs() < 1e-15));
    }

    #[test]
    fn clipping_matches_all_pairs() {
        let pts = jittered(32, 0.45, 11);
        let d = unit_square(BoundaryKind::NoSlip);
        let m = build_mesh(&pts, &d).unwrap();
        for i in 0..pts.len() {
            let mut poly = initial_polygon(i, &pts, &d);
            for j in 0..pts.len() {
                if j != i {
                    clip_halfplane(&mut poly, pts[j] - pts[i], EdgeTag::Neighbor(j, [0, 0]));
                }
            }
            let rel: Vec<Vec2> = poly.iter().map(|(v, _)| *v).collect();
            assert!((polygon_area(&rel) - m.cells[i].volume).abs() < 1e-15, "cell {i}");
        }
    }

    #[test]
    fn cells_match_nearest_seed_classification() {
        // Monte Carlo point location against the brute-force nearest seed.
        let pts = jittered(32, 0.45, 11);
        let m = build_mesh(&pts, &unit_square(BoundaryKind::NoSlip)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let samples = 1_000_000usize;
        let mut hits = vec![0usize; pts.len()];
        let grid = PointGrid::new(&pts, &m.domain, 1.0 / 32.0);
        for _ in 0..samples {
            let p = Vec2::new(rng.gen::<f64>(), rng.gen::<f64>());
            let mut best = (f64::INFINITY, 0);
            grid.visit_radius(&p, 0.1, |j, q| {
                let d = (q - p).norm_squared();
                if d < best.0 {
                    best = (d, j);
                }
            });
            hits[best.1] += 1;
        }
        for (i, c) in m.cells.iter().enumerate() {
            let frac = hits[i] as f64 / samples as f64;
            let sigma = (c.volume * (1.0 - c.volume) / samples as f64).sqrt();
            // 3 sigma family-wise over 1024 cells (Bonferroni) is ~4.5 sigma per cell.
            assert!((frac - c.volume).abs() <= 4.5 * sigma, "cell {i}: {frac} vs {}", c.volume);
        }
        let total: f64 = m.cells.iter().map(|c| c.volume).sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn quality_on_regular_lattices() {
        let m = build_mesh(&jittered(10, 0.0, 0), &unit_square(BoundaryKind::NoSlip)).unwrap();
        let q = cell_quality(&m);
        for (c, qc) in m.cells.iter().zip(&q.cell) {
            if c.is_interior() {
                assert!((qc - 1.0).abs() < 1e-12);
            }
        }
        // Hexagonal lattice.
        let h = 0.1;
        let dy = h * 3f64.sqrt() / 2.0;
        let mut pts = Vec::new();
        for j in 0..10 {
            for i in 0..9 {
                let shift = if j % 2 == 0 { 0.0 } else { 0.5 * h };
                pts.push(Vec2::new(0.05 + i as f64 * h + shift, 0.05 + j as f64 * dy));
            }
        }
        let d = DomainPolygon::rectangle_uniform(Vec2::zeros(), Vec2::new(1.0, 1.0), BoundaryKind::NoSlip).unwrap();
        let m = build_mesh(&pts, &d).unwrap();
        let q = cell_quality(&m);
        let interior: Vec<f64> =
            m.cells.iter().zip(&q.cell).filter(|(c, _)| c.is_interior()).map(|(_, q)| *q).collect();
        assert!(!interior.is_empty());
        assert!(interior.iter().all(|q| (q - 1.0).abs() < 1e-12));
        assert!(q.mesh <= interior[0]);
    }

    #[test]
    fn quality_ratio_definition() {
        // Center seed with neighbors at distance h (left) and 2h (right).
        let d = DomainPolygon::rectangle_uniform(Vec2::new(-3.0, -1.0), Vec2::new(3.0, 1.0), BoundaryKind::NoSlip)
            .unwrap();
        let m = build_mesh(&[Vec2::new(-1.0, 0.0), Vec2::zeros(), Vec2::new(2.0, 0.0)], &d).unwrap();
        let q = cell_quality(&m);
        assert!((q.cell[1] - 0.5).abs() < 1e-15);
        assert_eq!(q.mesh, q.cell.iter().copied().fold(1.0, f64::min));
    }

    #[test]
    fn weighted_centroid_cases() {
        let m = build_mesh(&[Vec2::new(0.5, 0.5)], &unit_square(BoundaryKind::NoSlip)).unwrap();
        let c = weighted_centroid(&m, 0, |_| 1.0);
        assert!((c - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        // w = 1 + x: x-centroid (1/2 + 1/3) / (3/2) = 5/9.
        let c = weighted_centroid(&m, 0, |p| 1.0 + p.x);
        assert!((c.x - 5.0 / 9.0).abs() < 1e-14);
        assert!((c.y - 0.5).abs() < 1e-14);
        let c = weighted_centroid(&m, 0, |p| if p.x < 0.5 { 1.0 } else { 0.0 });
        assert!(c.x < 0.5);
        let c = weighted_centroid(&m, 0, |_| 0.0);
        assert!((c - Vec2::new(0.5, 0.5)).norm() < 1e-15);
        // Linear weight on an irregular cell: exact against the polygon moment.
        let pts = jittered(6, 0.4, 5);
        let m = build_mesh(&pts, &unit_square(BoundaryKind::NoSlip)).unwrap();
        let c = weighted_centroid(&m, 14, |_| 2.0);
        assert!((c - m.cells[14].centroid).norm() < 1e-14);
    }

    #[test]
    fn deterministic_rebuild() {
        let pts = jittered(20, 0.45, 1);
        let d = unit_square(BoundaryKind::FreeSlip);
        let a = build_mesh(&pts, &d).unwrap();
        let b = build_mesh(&pts, &d).unwrap();
        assert_eq!(a.cells, b.cells);
    }
}
