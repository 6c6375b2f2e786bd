//! Brute-force mapping oracles and the randomized checks built on them,
//! shared by the oracle tests and the acceptance suite.
#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

use episodic_explore::mapping::*;
use episodic_explore::world::{LidarScan, Pose};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn random_grid(rng: &mut ChaCha8Rng, w: usize, h: usize) -> OccupancyGrid {
    let p_unknown = rng.gen_range(0.1..0.5);
    let p_occ = rng.gen_range(0.05..0.3);
    let cells = (0..w * h)
        .map(|_| {
            let r: f64 = rng.gen();
            if r < p_unknown {
                CellState::Unknown
            } else if r < p_unknown + p_occ {
                CellState::Occupied
            } else {
                CellState::Free
            }
        })
        .collect();
    OccupancyGrid::from_cells(w, h, 0.25, cells)
}

/// Frontier cells straight from the definition, grouped by repeated
/// pairwise 8-adjacency merging.
pub fn brute_frontiers(g: &OccupancyGrid, min_size: usize) -> BTreeSet<Vec<(usize, usize)>> {
    let mut cells = Vec::new();
    for y in 0..g.height() {
        for x in 0..g.width() {
            if g.get(x, y) != CellState::Free {
                continue;
            }
            let touches = [(0i64, 1i64), (0, -1), (1, 0), (-1, 0)]
                .iter()
                .any(|&(dx, dy)| {
                    let (nx, ny) = (x as i64 + dx, y as i64 + dy);
                    nx < 0
                        || ny < 0
                        || nx >= g.width() as i64
                        || ny >= g.height() as i64
                        || g.get(nx as usize, ny as usize) == CellState::Unknown
                });
            if touches {
                cells.push((x, y));
            }
        }
    }
    let mut label: Vec<usize> = (0..cells.len()).collect();
    loop {
        let mut changed = false;
        for i in 0..cells.len() {
            for j in 0..cells.len() {
                let adj =
                    cells[i].0.abs_diff(cells[j].0) <= 1 && cells[i].1.abs_diff(cells[j].1) <= 1;
                if adj && label[j] < label[i] {
                    label[i] = label[j];
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut groups = std::collections::BTreeMap::<usize, Vec<(usize, usize)>>::new();
    for (i, &c) in cells.iter().enumerate() {
        groups.entry(label[i]).or_default().push(c);
    }
    groups
        .into_values()
        .filter(|g| g.len() >= min_size)
        .map(|mut g| {
            g.sort_by_key(|&(x, y)| (y, x));
            g
        })
        .collect()
}

pub fn frontiers_match_definition_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..50 {
        let (w, h) = (rng.gen_range(3..24), rng.gen_range(3..24));
        let g = random_grid(&mut rng, w, h);
        let min = rng.gen_range(1..4);
        let got: BTreeSet<_> = extract_frontiers(&g, min)
            .into_iter()
            .map(|f| f.cells)
            .collect();
        assert_eq!(got, brute_frontiers(&g, min));
    }
}

pub fn frontier_members_satisfy_invariants() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let g = random_grid(&mut rng, 30, 30);
    for f in extract_frontiers(&g, DEFAULT_MIN_FRONTIER) {
        assert!(f.size() >= DEFAULT_MIN_FRONTIER);
        for &(x, y) in &f.cells {
            assert!(is_frontier_cell(&g, x, y));
        }
    }
}

pub fn bfs_oracle(g: &OccupancyGrid, s: (usize, usize), t: (usize, usize)) -> Option<usize> {
    let mut dist = vec![usize::MAX; g.width() * g.height()];
    let idx = |c: (usize, usize)| c.1 * g.width() + c.0;
    dist[idx(s)] = 0;
    let mut q = VecDeque::from([s]);
    while let Some(c) = q.pop_front() {
        if c == t {
            return Some(dist[idx(c)]);
        }
        let mut next = Vec::new();
        if c.0 > 0 {
            next.push((c.0 - 1, c.1));
        }
        if c.1 > 0 {
            next.push((c.0, c.1 - 1));
        }
        if c.0 + 1 < g.width() {
            next.push((c.0 + 1, c.1));
        }
        if c.1 + 1 < g.height() {
            next.push((c.0, c.1 + 1));
        }
        for n in next {
            let ok = n == t || g.get(n.0, n.1) == CellState::Free;
            if ok && dist[idx(n)] == usize::MAX {
                dist[idx(n)] = dist[idx(c)] + 1;
                q.push_back(n);
            }
        }
    }
    None
}

pub fn astar_lengths_equal_bfs_on_random_grids() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let mut reachable = 0;
    for _ in 0..100 {
        let (w, h) = (rng.gen_range(2..30), rng.gen_range(2..30));
        let mut g = random_grid(&mut rng, w, h);
        let s = (rng.gen_range(0..w), rng.gen_range(0..h));
        let t = (rng.gen_range(0..w), rng.gen_range(0..h));
        g.set(s.0, s.1, CellState::Free);
        let got = plan_path(&g, s, t);
        let want = bfs_oracle(&g, s, t);
        assert_eq!(got.as_ref().map(|p| path_length(p)), want);
        if let Some(p) = got {
            reachable += 1;
            assert_eq!(p[0], s);
            assert_eq!(*p.last().unwrap(), t);
            for pair in p.windows(2) {
                assert_eq!(
                    pair[0].0.abs_diff(pair[1].0) + pair[0].1.abs_diff(pair[1].1),
                    1
                );
            }
            assert_eq!(bfs_distances(&g, s)[t.1 * w + t.0], want);
        }
    }
    assert!(reachable > 20);
}

/// Cells whose open square the segment `[0, len]` passes through, by slab
/// clipping every cell of the grid independently.
pub fn slab_cells(
    g: &OccupancyGrid,
    ox: f64,
    oy: f64,
    angle: f64,
    len: f64,
) -> Vec<((usize, usize), f64, f64)> {
    let (dx, dy) = (angle.cos(), angle.sin());
    let r = g.resolution();
    let mut out = Vec::new();
    for y in 0..g.height() {
        for x in 0..g.width() {
            let (x0, x1) = (x as f64 * r, (x + 1) as f64 * r);
            let (y0, y1) = (y as f64 * r, (y + 1) as f64 * r);
            let (mut lo, mut hi) = (0.0f64, len);
            for (o, d, a, b) in [(ox, dx, x0, x1), (oy, dy, y0, y1)] {
                if d.abs() < 1e-15 {
                    if o < a || o >= b {
                        hi = -1.0;
                    }
                } else {
                    let (t0, t1) = ((a - o) / d, (b - o) / d);
                    lo = lo.max(t0.min(t1));
                    hi = hi.min(t0.max(t1));
                }
            }
            if lo < hi || (lo == 0.0 && hi == 0.0 && len == 0.0) {
                out.push(((x, y), lo, hi));
            }
        }
    }
    out
}

pub fn oracle_integrate(g: &mut OccupancyGrid, pose: Pose, scan: &LidarScan) {
    for (k, &r) in scan.ranges.iter().enumerate() {
        let a = scan.beam_angle(k);
        let hit = r < scan.max_range;
        let reach = if hit { r + 1e-6 } else { r };
        let mut cells = slab_cells(g, pose.x, pose.y, a, reach);
        cells.sort_by(|p, q| p.1.total_cmp(&q.1));
        let last = cells.len() - 1;
        for (i, &((x, y), _, _)) in cells.iter().enumerate() {
            if i == last && hit {
                g.set(x, y, CellState::Occupied);
            } else if g.get(x, y) == CellState::Unknown {
                g.set(x, y, CellState::Free);
            }
        }
    }
}

pub fn integration_matches_slab_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for _ in 0..50 {
        let mut g = OccupancyGrid::new(40, 40, 0.25);
        let mut o = g.clone();
        let mut last_known = 0;
        for _ in 0..5 {
            let pose = Pose::new(
                rng.gen_range(3.0..7.0),
                rng.gen_range(3.0..7.0),
                rng.gen_range(0.0..std::f64::consts::TAU),
            );
            let max_range = 2.5;
            let ranges = (0..36)
                .map(|_| {
                    if rng.gen_bool(0.3) {
                        max_range
                    } else {
                        rng.gen_range(0.05..max_range)
                    }
                })
                .collect();
            let scan = LidarScan {
                ranges,
                max_range,
                pose,
            };
            integrate_scan(&mut g, pose, &scan);
            oracle_integrate(&mut o, pose, &scan);
            assert_eq!(g.known_count(), o.known_count());
            assert_eq!(g, o);
            assert!(g.known_count() >= last_known);
            last_known = g.known_count();
        }
    }
}
