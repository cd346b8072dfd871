use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::Matrix;

/// Gains closer than this are ties.
const GAIN_EPS: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: u32,
        right: u32,
    },
    Leaf {
        /// Sample mass per class (bootstrap multiplicity times sample
        /// weight), before class weighting.
        counts: [f64; 2],
        /// Class-weighted P(failure).
        proba: f64,
    },
}

/// A CART tree stored as a flat node array; the root is node 0. Rows go
/// left when `row[feature] <= threshold`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    #[inline]
    pub fn leaf(&self, row: &[f64]) -> &Node {
        let mut i = 0usize;
        loop {
            match &self.nodes[i] {
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    i = if row[*feature] <= *threshold {
                        *left as usize
                    } else {
                        *right as usize
                    };
                }
                leaf => return leaf,
            }
        }
    }

    #[inline]
    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self.leaf(row) {
            Node::Leaf { proba, .. } => *proba,
            Node::Split { .. } => unreachable!(),
        }
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], i: usize) -> usize {
            match &nodes[i] {
                Node::Split { left, right, .. } => {
                    1 + walk(nodes, *left as usize).max(walk(nodes, *right as usize))
                }
                Node::Leaf { .. } => 0,
            }
        }
        walk(&self.nodes, 0)
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    /// Root split, if the tree is not a single leaf.
    pub fn root_split(&self) -> Option<(usize, f64)> {
        match &self.nodes[0] {
            Node::Split {
                feature, threshold, ..
            } => Some((*feature, *threshold)),
            Node::Leaf { .. } => None,
        }
    }
}

/// 1 − p0² − p1² with p_k = w_k n_k / (w0 n0 + w1 n1). `None` when both
/// masses are zero.
pub(crate) fn gini(counts: [f64; 2], weights: (f64, f64)) -> Option<f64> {
    let a0 = weights.0 * counts[0];
    let a1 = weights.1 * counts[1];
    let total = a0 + a1;
    if total <= 0.0 {
        return None;
    }
    let (p0, p1) = (a0 / total, a1 / total);
    Some(1.0 - p0 * p0 - p1 * p1)
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
    pub class_weights: (f64, f64),
}

/// Column-major copy of the training features with each column's row order
/// presorted, shared by every tree of a forest.
pub(crate) struct Presorted<'a> {
    columns: Vec<Vec<f64>>,
    sorted_rows: Vec<Vec<u32>>,
    labels: &'a [u8],
}

impl<'a> Presorted<'a> {
    pub fn new(x: &Matrix, labels: &'a [u8]) -> Self {
        let columns: Vec<Vec<f64>> = (0..x.cols()).map(|j| x.column(j)).collect();
        let sorted_rows = columns
            .iter()
            .map(|c| {
                let mut idx: Vec<u32> = (0..c.len() as u32).collect();
                idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
                idx
            })
            .collect();
        Self {
            columns,
            sorted_rows,
            labels,
        }
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }
}

struct Candidate {
    feature: usize,
    threshold: f64,
    gain: f64,
}

/// Grows one tree. `multiplicity[r]` is how often row `r` was drawn and
/// `weight[r]` its per-draw sample weight; rows drawn zero times are absent.
pub(crate) fn grow(
    data: &Presorted<'_>,
    multiplicity: &[u32],
    weight: &[f64],
    p: &GrowParams,
    rng: &mut Rng,
) -> Tree {
    let n_rows = data.n_rows();
    let d = data.columns.len();
    // entry id per drawn row
    let mut entry_of = vec![u32::MAX; n_rows];
    let mut e_row = Vec::new();
    let mut e_mass = Vec::new();
    let mut e_mult = Vec::new();
    for r in 0..n_rows {
        if multiplicity[r] > 0 {
            entry_of[r] = e_row.len() as u32;
            e_row.push(r as u32);
            e_mass.push(multiplicity[r] as f64 * weight[r]);
            e_mult.push(multiplicity[r] as usize);
        }
    }
    let n = e_row.len();
    let e_label: Vec<u8> = e_row.iter().map(|&r| data.labels[r as usize]).collect();
    let mut order: Vec<Vec<u32>> = data
        .sorted_rows
        .iter()
        .map(|rows| {
            rows.iter()
                .filter_map(|&r| {
                    let e = entry_of[r as usize];
                    (e != u32::MAX).then_some(e)
                })
                .collect()
        })
        .collect();
    let mut goes_left = vec![false; n];
    let mut buf: Vec<u32> = Vec::with_capacity(n);
    let mut features: Vec<usize> = (0..d).collect();
    let mut nodes: Vec<Node> = vec![Node::Leaf {
        counts: [0.0; 2],
        proba: 0.0,
    }];

    // (node slot, start, end, depth)
    let mut stack = vec![(0usize, 0usize, n, 0usize)];
    while let Some((slot, start, end, depth)) = stack.pop() {
        let mut counts = [0.0; 2];
        let mut draws = 0usize;
        for &e in &order[0][start..end] {
            counts[e_label[e as usize] as usize] += e_mass[e as usize];
            draws += e_mult[e as usize];
        }
        let a0 = p.class_weights.0 * counts[0];
        let a1 = p.class_weights.1 * counts[1];
        let proba = if a0 + a1 > 0.0 { a1 / (a0 + a1) } else { 0.0 };
        let leaf = Node::Leaf { counts, proba };

        let pure = counts[0] == 0.0 || counts[1] == 0.0;
        let depth_capped = p.max_depth.is_some_and(|m| depth >= m);
        if pure || depth_capped || draws < 2 * p.min_leaf {
            nodes[slot] = leaf;
            continue;
        }

        features.shuffle(rng);
        let parent = gini(counts, p.class_weights).unwrap_or(0.0);
        let mut examined = 0;
        let mut best: Option<Candidate> = None;
        for &f in features.iter() {
            if examined >= p.mtry {
                break;
            }
            let seg = &order[f][start..end];
            let col = &data.columns[f];
            let lo = col[e_row[seg[0] as usize] as usize];
            let hi = col[e_row[seg[seg.len() - 1] as usize] as usize];
            if lo == hi {
                continue;
            }
            examined += 1;
            let scan = Scan {
                seg,
                col,
                e_row: &e_row,
                e_label: &e_label,
                e_mass: &e_mass,
                e_mult: &e_mult,
                draws,
            };
            if let Some(c) = scan.best_threshold(f, counts, parent, p) {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        c.gain > b.gain + GAIN_EPS
                            || ((c.gain - b.gain).abs() <= GAIN_EPS && c.feature < b.feature)
                    }
                };
                if better {
                    best = Some(c);
                }
            }
        }

        let Some(best) = best.filter(|b| b.gain > GAIN_EPS) else {
            nodes[slot] = leaf;
            continue;
        };

        let col = &data.columns[best.feature];
        let mut n_left = 0;
        for &e in &order[best.feature][start..end] {
            let l = col[e_row[e as usize] as usize] <= best.threshold;
            goes_left[e as usize] = l;
            n_left += usize::from(l);
        }
        // stable partition of every feature's order, keeping sortedness
        for ord in order.iter_mut() {
            let seg = &mut ord[start..end];
            buf.clear();
            let mut w = 0;
            for i in 0..seg.len() {
                let e = seg[i];
                if goes_left[e as usize] {
                    seg[w] = e;
                    w += 1;
                } else {
                    buf.push(e);
                }
            }
            seg[w..].copy_from_slice(&buf);
        }
        let mid = start + n_left;
        let left = nodes.len();
        let right = left + 1;
        let blank = Node::Leaf {
            counts: [0.0; 2],
            proba: 0.0,
        };
        nodes.push(blank.clone());
        nodes.push(blank);
        nodes[slot] = Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: left as u32,
            right: right as u32,
        };
        stack.push((right, mid, end, depth + 1));
        stack.push((left, start, mid, depth + 1));
    }
    Tree { nodes }
}

struct Scan<'s> {
    seg: &'s [u32],
    col: &'s [f64],
    e_row: &'s [u32],
    e_label: &'s [u8],
    e_mass: &'s [f64],
    e_mult: &'s [usize],
    draws: usize,
}

impl Scan<'_> {
    /// Best midpoint threshold on one feature; ties go to the lower
    /// threshold.
    fn best_threshold(
        &self,
        feature: usize,
        totals: [f64; 2],
        parent: f64,
        p: &GrowParams,
    ) -> Option<Candidate> {
        let w = p.class_weights;
        let total_mass = w.0 * totals[0] + w.1 * totals[1];
        let value = |i: usize| self.col[self.e_row[self.seg[i] as usize] as usize];
        let mut left = [0.0; 2];
        let mut left_draws = 0usize;
        let mut best: Option<Candidate> = None;
        for i in 0..self.seg.len() - 1 {
            let e = self.seg[i] as usize;
            left[self.e_label[e] as usize] += self.e_mass[e];
            left_draws += self.e_mult[e];
            let v = value(i);
            let next = value(i + 1);
            if v == next {
                continue;
            }
            if left_draws < p.min_leaf || self.draws - left_draws < p.min_leaf {
                continue;
            }
            let right = [totals[0] - left[0], totals[1] - left[1]];
            let ml = w.0 * left[0] + w.1 * left[1];
            let mr = w.0 * right[0] + w.1 * right[1];
            let gl = gini(left, w).unwrap_or(0.0);
            let gr = gini(right, w).unwrap_or(0.0);
            let gain = parent - (ml / total_mass) * gl - (mr / total_mass) * gr;
            if best.as_ref().is_none_or(|b| gain > b.gain + GAIN_EPS) {
                let mut threshold = 0.5 * (v + next);
                if threshold >= next {
                    threshold = v;
                }
                best = Some(Candidate {
                    feature,
                    threshold,
                    gain,
                });
            }
        }
        best
    }
}
