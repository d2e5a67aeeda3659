//! Droplet boundary as closed polylines, with point-in-droplet and
//! distance-to-droplet queries.

use std::collections::HashMap;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Boundary of the droplet: finitely many closed polylines (last vertex is
/// joined to the first) plus a bucket index over their segments.
#[derive(Debug, Clone)]
pub struct DropletGeometry {
    loops: Vec<Vec<Complex64>>,
    index: SegmentIndex,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Polyline {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl DropletGeometry {
    pub fn from_loops(loops: Vec<Vec<Complex64>>) -> Self {
        let loops: Vec<_> = loops.into_iter().filter(|l| l.len() >= 3).collect();
        let index = SegmentIndex::build(&loops);
        DropletGeometry { loops, index }
    }

    /// Regular polygon approximating the circle `|ζ| = radius`.
    pub fn circle(radius: f64, vertices: usize) -> Self {
        let pts = (0..vertices)
            .map(|k| Complex64::from_polar(radius, std::f64::consts::TAU * k as f64 / vertices as f64))
            .collect();
        Self::from_loops(vec![pts])
    }

    pub fn loops(&self) -> &[Vec<Complex64>] {
        &self.loops
    }

    pub fn polylines(&self) -> Vec<Polyline> {
        self.loops
            .iter()
            .map(|l| Polyline {
                x: l.iter().map(|z| z.re).collect(),
                y: l.iter().map(|z| z.im).collect(),
            })
            .collect()
    }

    pub fn from_polylines(lines: &[Polyline]) -> Self {
        Self::from_loops(
            lines
                .iter()
                .map(|p| p.x.iter().zip(&p.y).map(|(x, y)| Complex64::new(*x, *y)).collect())
                .collect(),
        )
    }

    pub fn vertices(&self) -> impl Iterator<Item = Complex64> + '_ {
        self.loops.iter().flatten().copied()
    }

    /// Even–odd containment over all boundary components.
    pub fn contains(&self, z: Complex64) -> bool {
        let mut inside = false;
        for l in &self.loops {
            let k = l.len();
            for i in 0..k {
                let (a, b) = (l[i], l[(i + 1) % k]);
                if (a.im > z.im) != (b.im > z.im) {
                    let x = a.re + (z.im - a.im) * (b.re - a.re) / (b.im - a.im);
                    if x > z.re {
                        inside = !inside;
                    }
                }
            }
        }
        inside
    }

    /// Distance from `z` to the nearest boundary point.
    pub fn boundary_distance(&self, z: Complex64) -> f64 {
        self.index.nearest(z, &self.loops)
    }

    /// `δ(ζ)`: zero on the droplet, distance to the boundary outside it.
    pub fn distance(&self, z: Complex64) -> f64 {
        if self.contains(z) {
            0.0
        } else {
            self.boundary_distance(z)
        }
    }

    /// Area enclosed by each loop (shoelace, absolute value).
    pub fn loop_areas(&self) -> Vec<f64> {
        self.loops.iter().map(|l| shoelace(l).abs()).collect()
    }

    /// Hausdorff distance between the boundary and the curve sampled by `pts`.
    pub fn hausdorff_to(&self, pts: &[Complex64]) -> f64 {
        let other = DropletGeometry::from_loops(vec![pts.to_vec()]);
        let a = self.vertices().map(|z| other.boundary_distance(z)).fold(0.0, f64::max);
        let b = pts.iter().map(|z| self.boundary_distance(*z)).fold(0.0, f64::max);
        a.max(b)
    }
}

fn shoelace(l: &[Complex64]) -> f64 {
    let k = l.len();
    0.5 * (0..k)
        .map(|i| {
            let (a, b) = (l[i], l[(i + 1) % k]);
            a.re * b.im - b.re * a.im
        })
        .sum::<f64>()
}

fn segment_distance(z: Complex64, a: Complex64, b: Complex64) -> f64 {
    let d = b - a;
    let len2 = d.norm_sqr();
    let t = if len2 > 0.0 {
        ((z - a).re * d.re + (z - a).im * d.im) / len2
    } else {
        0.0
    };
    (z - (a + d * t.clamp(0.0, 1.0))).norm()
}

/// Uniform bucket grid over segment bounding boxes.
#[derive(Debug, Clone)]
struct SegmentIndex {
    origin: Complex64,
    cell: f64,
    nx: usize,
    ny: usize,
    /// (loop, vertex) of each segment start, per bucket.
    buckets: Vec<Vec<(u32, u32)>>,
}

impl SegmentIndex {
    fn build(loops: &[Vec<Complex64>]) -> Self {
        let all: Vec<Complex64> = loops.iter().flatten().copied().collect();
        if all.is_empty() {
            return SegmentIndex {
                origin: Complex64::new(0.0, 0.0),
                cell: 1.0,
                nx: 0,
                ny: 0,
                buckets: vec![],
            };
        }
        let (mut x0, mut x1, mut y0, mut y1) = (f64::MAX, f64::MIN, f64::MAX, f64::MIN);
        let mut total_len = 0.0;
        for l in loops {
            for i in 0..l.len() {
                let z = l[i];
                x0 = x0.min(z.re);
                x1 = x1.max(z.re);
                y0 = y0.min(z.im);
                y1 = y1.max(z.im);
                total_len += (l[(i + 1) % l.len()] - z).norm();
            }
        }
        let nseg = all.len() as f64;
        let cell = (4.0 * total_len / nseg).max(1e-9);
        let nx = (((x1 - x0) / cell).ceil() as usize).clamp(1, 4096);
        let ny = (((y1 - y0) / cell).ceil() as usize).clamp(1, 4096);
        let cell = ((x1 - x0) / nx as f64).max((y1 - y0) / ny as f64).max(1e-9);
        let origin = Complex64::new(x0, y0);
        let mut buckets = vec![Vec::new(); nx * ny];
        for (li, l) in loops.iter().enumerate() {
            for i in 0..l.len() {
                let (a, b) = (l[i], l[(i + 1) % l.len()]);
                let (ia, ja) = Self::cell_of(origin, cell, nx, ny, a);
                let (ib, jb) = Self::cell_of(origin, cell, nx, ny, b);
                for ii in ia.min(ib)..=ia.max(ib) {
                    for jj in ja.min(jb)..=ja.max(jb) {
                        buckets[ii + nx * jj].push((li as u32, i as u32));
                    }
                }
            }
        }
        SegmentIndex {
            origin,
            cell,
            nx,
            ny,
            buckets,
        }
    }

    fn cell_of(origin: Complex64, cell: f64, nx: usize, ny: usize, z: Complex64) -> (usize, usize) {
        let i = ((z.re - origin.re) / cell).floor().clamp(0.0, (nx - 1) as f64) as usize;
        let j = ((z.im - origin.im) / cell).floor().clamp(0.0, (ny - 1) as f64) as usize;
        (i, j)
    }

    fn nearest(&self, z: Complex64, loops: &[Vec<Complex64>]) -> f64 {
        if self.nx == 0 {
            return f64::INFINITY;
        }
        let seg = |&(li, i): &(u32, u32)| {
            let l = &loops[li as usize];
            let i = i as usize;
            segment_distance(z, l[i], l[(i + 1) % l.len()])
        };
        let (ci, cj) = Self::cell_of(self.origin, self.cell, self.nx, self.ny, z);
        // distance from z to the indexed box
        let outside = {
            let bx = (self.origin.re - z.re).max(z.re - (self.origin.re + self.nx as f64 * self.cell)).max(0.0);
            let by = (self.origin.im - z.im).max(z.im - (self.origin.im + self.ny as f64 * self.cell)).max(0.0);
            (bx * bx + by * by).sqrt()
        };
        let mut best = f64::INFINITY;
        let max_ring = self.nx.max(self.ny);
        for ring in 0..=max_ring {
            let lo_i = ci.saturating_sub(ring);
            let hi_i = (ci + ring).min(self.nx - 1);
            let lo_j = cj.saturating_sub(ring);
            let hi_j = (cj + ring).min(self.ny - 1);
            for i in lo_i..=hi_i {
                for j in lo_j..=hi_j {
                    let on_ring = i == ci.saturating_sub(ring)
                        || i == (ci + ring).min(self.nx - 1)
                        || j == cj.saturating_sub(ring)
                        || j == (cj + ring).min(self.ny - 1);
                    if ring > 0 && !on_ring {
                        continue;
                    }
                    for s in &self.buckets[i + self.nx * j] {
                        best = best.min(seg(s));
                    }
                }
            }
            // unvisited buckets are at least `ring · cell` from the projection of z
            if best.is_finite() && best <= outside.max(ring as f64 * self.cell) {
                break;
            }
        }
        best
    }
}

/// Marching squares for the `level` contour of a field sampled at the
/// centres of an `n × n` cell grid (index `x + n·y`). Crossings are placed by
/// linear interpolation; saddles are resolved with the mean of the corners.
pub fn marching_squares(
    field: &[f64],
    n: usize,
    origin: Complex64,
    h: f64,
    level: f64,
) -> Vec<Vec<Complex64>> {
    assert_eq!(field.len(), n * n);
    let at = |x: usize, y: usize| field[x + n * y];
    let pos = |x: usize, y: usize| origin + Complex64::new((x as f64 + 0.5) * h, (y as f64 + 0.5) * h);
    // edge keys: horizontal (0, x, y) joins (x,y)-(x+1,y); vertical (1, x, y) joins (x,y)-(x,y+1)
    type Key = (u8, usize, usize);
    let crossing = |k: Key| -> Complex64 {
        let (a, b) = match k.0 {
            0 => ((k.1, k.2), (k.1 + 1, k.2)),
            _ => ((k.1, k.2), (k.1, k.2 + 1)),
        };
        let (fa, fb) = (at(a.0, a.1), at(b.0, b.1));
        let t = if fb != fa { ((level - fa) / (fb - fa)).clamp(0.0, 1.0) } else { 0.5 };
        pos(a.0, a.1) + (pos(b.0, b.1) - pos(a.0, a.1)) * t
    };
    let mut adjacency: HashMap<Key, Vec<Key>> = HashMap::new();
    let mut link = |a: Key, b: Key| {
        adjacency.entry(a).or_default().push(b);
        adjacency.entry(b).or_default().push(a);
    };
    for y in 0..n.saturating_sub(1) {
        for x in 0..n.saturating_sub(1) {
            let v = [at(x, y), at(x + 1, y), at(x + 1, y + 1), at(x, y + 1)];
            let code = v
                .iter()
                .enumerate()
                .fold(0u8, |c, (i, f)| if *f > level { c | (1 << i) } else { c });
            let bottom: Key = (0, x, y);
            let right: Key = (1, x + 1, y);
            let top: Key = (0, x, y + 1);
            let left: Key = (1, x, y);
            let centre_high = v.iter().sum::<f64>() / 4.0 > level;
            match code {
                0 | 15 => {}
                1 | 14 => link(left, bottom),
                2 | 13 => link(bottom, right),
                3 | 12 => link(left, right),
                4 | 11 => link(right, top),
                6 | 9 => link(bottom, top),
                7 | 8 => link(left, top),
                5 => {
                    if centre_high {
                        link(left, top);
                        link(bottom, right);
                    } else {
                        link(left, bottom);
                        link(right, top);
                    }
                }
                10 => {
                    if centre_high {
                        link(left, bottom);
                        link(right, top);
                    } else {
                        link(left, top);
                        link(bottom, right);
                    }
                }
                _ => unreachable!(),
            }
        }
    }
    let mut loops = Vec::new();
    let mut keys: Vec<Key> = adjacency.keys().copied().collect();
    keys.sort_unstable();
    let mut visited: std::collections::HashSet<Key> = Default::default();
    for start in keys {
        if visited.contains(&start) {
            continue;
        }
        let mut path = vec![start];
        visited.insert(start);
        let mut prev = start;
        let mut cur = adjacency[&start][0];
        while cur != start && !visited.contains(&cur) {
            visited.insert(cur);
            path.push(cur);
            let next = adjacency[&cur].iter().copied().find(|k| *k != prev).unwrap_or(prev);
            prev = cur;
            cur = next;
        }
        loops.push(path.into_iter().map(crossing).collect());
    }
    loops
}
