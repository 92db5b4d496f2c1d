use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use super::NavError;
use crate::geom::Point2;
use crate::world::CostGrid;

/// Weight of the average endpoint cost in every edge cost.
pub const COST_WEIGHT: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Path {
    pub waypoints: Vec<Point2>,
    pub cost: f64,
}

impl Path {
    pub fn length(&self) -> f64 {
        self.waypoints.windows(2).map(|w| w[0].distance(&w[1])).sum()
    }
}

#[derive(PartialEq)]
struct Entry {
    cost: f64,
    index: usize,
}

impl Eq for Entry {}

impl Ord for Entry {
    // Reversed so the max-heap pops the smallest (cost, index).
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .cost
            .total_cmp(&self.cost)
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

const NEIGHBORS: [(i64, i64); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (-1, 0),
    (1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
];

/// Cost of moving between adjacent cells `a` and `b`.
pub fn edge_cost(costs: &CostGrid, a: (usize, usize), b: (usize, usize)) -> f64 {
    let dx = a.0.abs_diff(b.0);
    let dy = a.1.abs_diff(b.1);
    let len = if dx + dy == 2 {
        std::f64::consts::SQRT_2
    } else {
        1.0
    } * costs.resolution();
    len * (1.0 + COST_WEIGHT * 0.5 * (costs.cost(a.0, a.1) + costs.cost(b.0, b.1)))
}

/// Minimum-cost 8-connected path through non-lethal cells.
pub fn plan_global(costs: &CostGrid, start: Point2, goal: Point2) -> Result<Path, NavError> {
    plan(costs, start, goal, false)
}

/// Like [`plan_global`] but tolerates a lethal start cell, so a robot that
/// drifted into inflated space can still be routed out of it.
pub fn plan_global_from_anywhere(
    costs: &CostGrid,
    start: Point2,
    goal: Point2,
) -> Result<Path, NavError> {
    plan(costs, start, goal, true)
}

fn plan(costs: &CostGrid, start: Point2, goal: Point2, lethal_start_ok: bool) -> Result<Path, NavError> {
    let s = costs.cell_of(start).ok_or(NavError::OutOfBounds(start))?;
    let g = costs.cell_of(goal).ok_or(NavError::OutOfBounds(goal))?;
    if costs.is_lethal(g.0, g.1) || (!lethal_start_ok && costs.is_lethal(s.0, s.1)) {
        return Err(NavError::LethalEndpoint);
    }
    let w = costs.width();
    let h = costs.height();
    let idx = |c: (usize, usize)| c.1 * w + c.0;
    let mut dist = vec![f64::INFINITY; w * h];
    let mut prev = vec![usize::MAX; w * h];
    let mut heap = BinaryHeap::new();
    dist[idx(s)] = 0.0;
    heap.push(Entry {
        cost: 0.0,
        index: idx(s),
    });
    let target = idx(g);
    while let Some(Entry { cost, index }) = heap.pop() {
        if cost > dist[index] {
            continue;
        }
        if index == target {
            break;
        }
        let cur = (index % w, index / w);
        for (dx, dy) in NEIGHBORS {
            let nx = cur.0 as i64 + dx;
            let ny = cur.1 as i64 + dy;
            if nx < 0 || ny < 0 || nx >= w as i64 || ny >= h as i64 {
                continue;
            }
            let nb = (nx as usize, ny as usize);
            if costs.is_lethal(nb.0, nb.1) {
                continue;
            }
            let nd = cost + edge_cost(costs, cur, nb);
            let ni = idx(nb);
            if nd < dist[ni] {
                dist[ni] = nd;
                prev[ni] = index;
                heap.push(Entry {
                    cost: nd,
                    index: ni,
                });
            }
        }
    }
    if !dist[target].is_finite() {
        return Err(NavError::NoPath);
    }
    let mut chain = vec![target];
    let mut cur = target;
    while cur != idx(s) {
        cur = prev[cur];
        chain.push(cur);
    }
    chain.reverse();
    let waypoints = chain
        .iter()
        .map(|i| costs.cell_center(i % w, i / w))
        .collect();
    Ok(Path {
        waypoints,
        cost: dist[target],
    })
}

/// First waypoint at least `lookahead` of arc length past the waypoint
/// nearest to `p`; the path end when none is that far.
pub fn local_goal(path: &[Point2], p: Point2, lookahead: f64) -> Option<Point2> {
    if path.is_empty() {
        return None;
    }
    let mut nearest = 0;
    let mut best = f64::INFINITY;
    for (i, q) in path.iter().enumerate() {
        let d = q.distance(&p);
        if d < best {
            best = d;
            nearest = i;
        }
    }
    let mut arc = 0.0;
    for i in nearest + 1..path.len() {
        arc += path[i - 1].distance(&path[i]);
        if arc >= lookahead - 1e-9 {
            return Some(path[i]);
        }
    }
    path.last().copied()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{inflate, InflationModel, OccupancyGrid};

    fn free_costs(w: usize, h: usize, res: f64) -> CostGrid {
        inflate(&OccupancyGrid::new(w, h, res).unwrap(), 0.0, &InflationModel::default())
    }

    #[test]
    fn straight_path_on_empty_grid() {
        let c = free_costs(10, 10, 0.1);
        let p = plan_global(&c, Point2::new(0.15, 0.55), Point2::new(0.85, 0.55)).unwrap();
        assert_eq!(p.waypoints.len(), 8);
        assert!((p.length() - 0.7).abs() < 1e-9);
        assert!((p.cost - 0.7).abs() < 1e-9);
    }

    #[test]
    fn enclosed_goal_has_no_path() {
        let mut g = OccupancyGrid::new(9, 9, 0.1).unwrap();
        for i in 4..=8 {
            g.set(i, 4, true);
            g.set(4, i, true);
        }
        let c = inflate(&g, 0.0, &InflationModel::default());
        assert_eq!(
            plan_global(&c, Point2::new(0.05, 0.05), Point2::new(0.75, 0.75)),
            Err(NavError::NoPath)
        );
    }

    #[test]
    fn lethal_endpoints_are_rejected() {
        let mut g = OccupancyGrid::new(5, 5, 0.1).unwrap();
        g.set(0, 0, true);
        let c = inflate(&g, 0.0, &InflationModel::default());
        assert_eq!(
            plan_global(&c, Point2::new(0.05, 0.05), Point2::new(0.45, 0.45)),
            Err(NavError::LethalEndpoint)
        );
        assert!(plan_global_from_anywhere(&c, Point2::new(0.05, 0.05), Point2::new(0.45, 0.45)).is_ok());
    }

    #[test]
    fn local_goal_examples() {
        let path: Vec<Point2> = (0..=50).map(|i| Point2::new(i as f64 * 0.1, 0.0)).collect();
        let lg = local_goal(&path, Point2::new(0.0, 0.0), 1.0).unwrap();
        assert!((lg.x - 1.0).abs() < 1e-9);
        let end = local_goal(&path, Point2::new(5.0, 0.0), 1.0).unwrap();
        assert_eq!(end, *path.last().unwrap());
        assert!(local_goal(&[], Point2::default(), 1.0).is_none());
    }
}
