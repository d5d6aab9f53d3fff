//! Static k-d tree over a point set, answering "nearest point whose rank is
//! below a limit" queries. Each node keeps its bounding box and the smallest
//! rank stored beneath it, so subtrees with no eligible points are skipped.

use crate::points::PointSet;
use crate::scalar::{squared_distance, Scalar};

const LEAF_SIZE: usize = 12;

struct Node<T> {
    start: usize,
    end: usize,
    children: Option<(usize, usize)>,
    min_rank: usize,
    lo: Vec<T>,
    hi: Vec<T>,
}

pub(crate) struct RankedKdTree<'a, T: Scalar> {
    points: &'a PointSet<T>,
    rank: &'a [usize],
    order: Vec<usize>,
    nodes: Vec<Node<T>>,
}

impl<'a, T: Scalar> RankedKdTree<'a, T> {
    pub(crate) fn build(points: &'a PointSet<T>, rank: &'a [usize]) -> Self {
        let mut tree = Self {
            points,
            rank,
            order: (0..points.len()).collect(),
            nodes: Vec::new(),
        };
        tree.build_node(0, points.len());
        tree
    }

    fn build_node(&mut self, start: usize, end: usize) -> usize {
        let d = self.points.dim();
        let mut lo = self.points.row(self.order[start]).to_vec();
        let mut hi = lo.clone();
        let mut min_rank = usize::MAX;
        for &i in &self.order[start..end] {
            for (k, &x) in self.points.row(i).iter().enumerate() {
                if x < lo[k] {
                    lo[k] = x;
                }
                if x > hi[k] {
                    hi[k] = x;
                }
            }
            min_rank = min_rank.min(self.rank[i]);
        }
        let id = self.nodes.len();
        let split_dim = (0..d)
            .max_by(|&a, &b| {
                (hi[a] - lo[a])
                    .partial_cmp(&(hi[b] - lo[b]))
                    .expect("finite")
            })
            .unwrap_or(0);
        let spread = hi[split_dim] - lo[split_dim];
        self.nodes.push(Node {
            start,
            end,
            children: None,
            min_rank,
            lo,
            hi,
        });
        if end - start <= LEAF_SIZE || spread <= T::zero() {
            return id;
        }
        let mid = start + (end - start) / 2;
        let points = self.points;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            points.row(a)[split_dim]
                .partial_cmp(&points.row(b)[split_dim])
                .expect("finite")
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid);
        let right = self.build_node(mid, end);
        self.nodes[id].children = Some((left, right));
        id
    }

    /// Squared distance from `q` to the node's box. Never exceeds the
    /// `squared_distance` from `q` to any point inside the box: each term is
    /// a rounded difference against a bound at least as close as the point.
    fn box_lower_bound(&self, node: usize, q: &[T]) -> T {
        let n = &self.nodes[node];
        let mut acc = T::zero();
        for (k, &x) in q.iter().enumerate() {
            let gap = if x < n.lo[k] {
                n.lo[k] - x
            } else if x > n.hi[k] {
                x - n.hi[k]
            } else {
                T::zero()
            };
            acc = acc + gap * gap;
        }
        acc
    }

    /// Nearest point `j` with `rank[j] < limit` to `q`, ties in squared
    /// distance going to the smaller index. Returns `(j, squared distance)`.
    pub(crate) fn nearest_below_rank(&self, q: &[T], limit: usize) -> Option<(usize, T)> {
        let mut best: Option<(usize, T)> = None;
        let mut stack = vec![0usize];
        while let Some(node) = stack.pop() {
            let n = &self.nodes[node];
            if n.min_rank >= limit {
                continue;
            }
            if let Some((_, best_sq)) = best {
                if self.box_lower_bound(node, q) > best_sq {
                    continue;
                }
            }
            match n.children {
                None => {
                    for &j in &self.order[n.start..n.end] {
                        if self.rank[j] >= limit {
                            continue;
                        }
                        let sq = squared_distance(q, self.points.row(j));
                        let better = match best {
                            None => true,
                            Some((bj, bsq)) => sq < bsq || (sq == bsq && j < bj),
                        };
                        if better {
                            best = Some((j, sq));
                        }
                    }
                }
                Some((left, right)) => {
                    let dl = self.box_lower_bound(left, q);
                    let dr = self.box_lower_bound(right, q);
                    // Push the farther child first so the nearer one is explored first.
                    if dl <= dr {
                        stack.push(right);
                        stack.push(left);
                    } else {
                        stack.push(left);
                        stack.push(right);
                    }
                }
            }
        }
        best
    }
}
