//! Time-independent graph: one edge per ordered stop pair, weighted with the
//! shortest duration of any connection or (non-loop) footpath between them.
//! Shortest paths over it bound every journey's duration from below.

use std::cmp::Reverse;
use std::collections::{BTreeMap, BinaryHeap};

use crate::clock::{Duration, INFINITY};
use crate::error::{Error, Result};
use crate::timetable::{StopId, Timetable, Walk};

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Tig {
    fwd_offsets: Vec<u32>,
    fwd: Vec<Walk>,
    bwd_offsets: Vec<u32>,
    bwd: Vec<Walk>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    /// Durations from the root.
    Forward,
    /// Durations to the root.
    Backward,
}

fn csr(n: usize, edges: impl Iterator<Item = (StopId, StopId, Duration)>) -> (Vec<u32>, Vec<Walk>) {
    let edges: Vec<_> = edges.collect();
    let mut offsets = vec![0u32; n + 1];
    for &(a, _, _) in &edges {
        offsets[a.idx() + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let mut fill = offsets.clone();
    let mut out = vec![Walk { to: StopId(0), duration: 0 }; edges.len()];
    for (a, b, w) in edges {
        out[fill[a.idx()] as usize] = Walk { to: b, duration: w };
        fill[a.idx()] += 1;
    }
    (offsets, out)
}

impl Tig {
    /// Builds the graph from `(from, to, weight)` triples; duplicate pairs
    /// keep the smallest weight and self-edges are dropped.
    pub fn from_edges(stop_count: usize, edges: impl IntoIterator<Item = (StopId, StopId, Duration)>) -> Result<Self> {
        let mut min: BTreeMap<(StopId, StopId), Duration> = BTreeMap::new();
        for (a, b, w) in edges {
            for s in [a, b] {
                if s.idx() >= stop_count {
                    return Err(Error::UnknownStop(s.0));
                }
            }
            if a != b {
                min.entry((a, b)).and_modify(|d| *d = (*d).min(w)).or_insert(w);
            }
        }
        let (fwd_offsets, fwd) = csr(stop_count, min.iter().map(|(&(a, b), &w)| (a, b, w)));
        let mut rev: Vec<_> = min.iter().map(|(&(a, b), &w)| (b, a, w)).collect();
        rev.sort_unstable();
        let (bwd_offsets, bwd) = csr(stop_count, rev.into_iter());
        Ok(Tig { fwd_offsets, fwd, bwd_offsets, bwd })
    }

    pub fn stop_count(&self) -> usize {
        self.fwd_offsets.len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.fwd.len()
    }

    /// Edges in `(from, to)` order.
    pub fn edges(&self) -> impl Iterator<Item = (StopId, StopId, Duration)> + '_ {
        (0..self.stop_count()).flat_map(move |s| {
            let a = StopId(s as u32);
            self.neighbours(a, Direction::Forward).iter().map(move |w| (a, w.to, w.duration))
        })
    }

    pub fn weight(&self, from: StopId, to: StopId) -> Option<Duration> {
        let out = self.neighbours(from, Direction::Forward);
        out.binary_search_by_key(&to, |w| w.to).ok().map(|i| out[i].duration)
    }

    fn neighbours(&self, s: StopId, dir: Direction) -> &[Walk] {
        let (offsets, list) = match dir {
            Direction::Forward => (&self.fwd_offsets, &self.fwd),
            Direction::Backward => (&self.bwd_offsets, &self.bwd),
        };
        &list[offsets[s.idx()] as usize..offsets[s.idx() + 1] as usize]
    }
}

pub fn build_tig(tt: &Timetable) -> Tig {
    let conns = tt.connections().iter().map(|c| (c.dep_stop, c.arr_stop, c.duration()));
    let walks = tt.footpaths().iter().map(|f| (f.from, f.to, f.duration));
    Tig::from_edges(tt.stop_count(), conns.chain(walks)).expect("validated timetable")
}

/// Dijkstra from `root`. Stops farther than `budget` are reported as
/// unreachable.
pub fn shortest_durations(tig: &Tig, root: StopId, dir: Direction, budget: Duration) -> Result<Vec<Duration>> {
    let n = tig.stop_count();
    if root.idx() >= n {
        return Err(Error::UnknownStop(root.0));
    }
    let mut dist = vec![INFINITY; n];
    let mut heap = BinaryHeap::new();
    dist[root.idx()] = 0;
    heap.push(Reverse((0, root)));
    while let Some(Reverse((d, s))) = heap.pop() {
        if d > dist[s.idx()] {
            continue;
        }
        for w in tig.neighbours(s, dir) {
            let nd = d.saturating_add(w.duration);
            if nd <= budget && nd < dist[w.to.idx()] {
                dist[w.to.idx()] = nd;
                heap.push(Reverse((nd, w.to)));
            }
        }
    }
    Ok(dist)
}
