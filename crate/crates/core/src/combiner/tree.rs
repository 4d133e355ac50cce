//! Depth-limited regression trees grown by exact greedy search on
//! first/second-order statistics.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Node {
    Leaf {
        value: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

impl Node {
    /// Rows with `x[feature] < threshold` go left.
    pub fn predict(&self, x: &[f64]) -> f64 {
        let mut node = self;
        loop {
            match node {
                Node::Leaf { value } => return *value,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => node = if x[*feature] < *threshold { left } else { right },
            }
        }
    }

    pub fn add_gains(&self, out: &mut [f64]) {
        if let Node::Split {
            feature,
            gain,
            left,
            right,
            ..
        } = self
        {
            out[*feature] += gain;
            left.add_gains(out);
            right.add_gains(out);
        }
    }

    pub fn n_splits(&self) -> usize {
        match self {
            Node::Leaf { .. } => 0,
            Node::Split { left, right, .. } => 1 + left.n_splits() + right.n_splits(),
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct TreeParams {
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub reg_lambda: f64,
    pub learning_rate: f64,
}

/// Feature matrix with each column's row order presorted once.
pub struct Presorted<'a> {
    pub x: &'a [Vec<f64>],
    /// `order[f]` lists row indices by ascending `x[row][f]`, ties by row.
    pub order: Vec<Vec<usize>>,
}

impl<'a> Presorted<'a> {
    pub fn new(x: &'a [Vec<f64>]) -> Self {
        let dim = x.first().map_or(0, Vec::len);
        let order = (0..dim)
            .into_par_iter()
            .map(|f| {
                let mut idx: Vec<usize> = (0..x.len()).collect();
                idx.sort_by(|&a, &b| x[a][f].total_cmp(&x[b][f]).then(a.cmp(&b)));
                idx
            })
            .collect();
        Presorted { x, order }
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    gain: f64,
    feature: usize,
    threshold: f64,
}

fn score(g: f64, h: f64, lambda: f64) -> f64 {
    g * g / (h + lambda)
}

/// Tree under construction: nodes are open leaves until split.
enum Slot {
    Open {
        g: f64,
        h: f64,
    },
    Split {
        feature: usize,
        threshold: f64,
        gain: f64,
        left: usize,
        right: usize,
    },
    Closed {
        g: f64,
        h: f64,
    },
}

/// Grows one tree on the rows with `assign[row] == Some(0)`.
///
/// `features` restricts the split candidates (column subsampling). The
/// search is level-wise: for each depth and feature one pass over the
/// presorted rows scores every open node at once.
pub fn grow(
    data: &Presorted<'_>,
    grad: &[f64],
    hess: &[f64],
    mut assign: Vec<Option<usize>>,
    features: &[usize],
    params: &TreeParams,
) -> Node {
    let lambda = params.reg_lambda;
    let (g0, h0) = assign
        .iter()
        .enumerate()
        .filter(|(_, a)| a.is_some())
        .fold((0.0, 0.0), |(g, h), (r, _)| (g + grad[r], h + hess[r]));
    let mut slots = vec![Slot::Open { g: g0, h: h0 }];
    let mut open: Vec<usize> = vec![0];

    for _depth in 0..params.max_depth {
        if open.is_empty() {
            break;
        }
        let slot_pos: Vec<Option<usize>> = {
            let mut v = vec![None; slots.len()];
            for (k, &s) in open.iter().enumerate() {
                v[s] = Some(k);
            }
            v
        };
        let totals: Vec<(f64, f64)> = open
            .iter()
            .map(|&s| match slots[s] {
                Slot::Open { g, h } => (g, h),
                _ => unreachable!(),
            })
            .collect();

        let per_feature: Vec<Vec<Option<Candidate>>> = features
            .par_iter()
            .map(|&f| {
                let n_open = open.len();
                let mut gl = vec![0.0; n_open];
                let mut hl = vec![0.0; n_open];
                let mut last: Vec<Option<f64>> = vec![None; n_open];
                let mut best: Vec<Option<Candidate>> = vec![None; n_open];
                for &r in &data.order[f] {
                    let Some(slot) = assign[r] else { continue };
                    let Some(k) = slot_pos[slot] else { continue };
                    let v = data.x[r][f];
                    if let Some(prev) = last[k] {
                        if v > prev {
                            let (g, h) = totals[k];
                            let (lg, lh) = (gl[k], hl[k]);
                            let (rg, rh) = (g - lg, h - lh);
                            if lh >= params.min_child_weight && rh >= params.min_child_weight {
                                let gain = 0.5
                                    * (score(lg, lh, lambda) + score(rg, rh, lambda) - score(g, h, lambda));
                                if best[k].is_none_or(|b| gain > b.gain) {
                                    best[k] = Some(Candidate {
                                        gain,
                                        feature: f,
                                        threshold: prev + (v - prev) / 2.0,
                                    });
                                }
                            }
                        }
                    }
                    gl[k] += grad[r];
                    hl[k] += hess[r];
                    last[k] = Some(v);
                }
                best
            })
            .collect();

        let mut next_open = Vec::new();
        let mut new_slots: Vec<(usize, Candidate)> = Vec::new();
        for (k, &s) in open.iter().enumerate() {
            // features are scanned in order; strict > keeps the lowest index on ties
            let mut best: Option<Candidate> = None;
            for cands in &per_feature {
                if let Some(c) = cands[k] {
                    if c.gain > 0.0 && best.is_none_or(|b| c.gain > b.gain) {
                        best = Some(c);
                    }
                }
            }
            match best {
                Some(c) => new_slots.push((s, c)),
                None => {
                    if let Slot::Open { g, h } = slots[s] {
                        slots[s] = Slot::Closed { g, h };
                    }
                }
            }
        }
        if new_slots.is_empty() {
            break;
        }
        // child totals and reassignment
        let mut child_of: Vec<Option<(usize, usize, usize, f64)>> = vec![None; slots.len()];
        for (s, c) in &new_slots {
            let left = slots.len();
            slots.push(Slot::Open { g: 0.0, h: 0.0 });
            let right = slots.len();
            slots.push(Slot::Open { g: 0.0, h: 0.0 });
            child_of[*s] = Some((left, right, c.feature, c.threshold));
            slots[*s] = Slot::Split {
                feature: c.feature,
                threshold: c.threshold,
                gain: c.gain,
                left,
                right,
            };
            next_open.push(left);
            next_open.push(right);
        }
        for (r, a) in assign.iter_mut().enumerate() {
            let Some(s) = *a else { continue };
            if let Some(Some((left, right, f, t))) = child_of.get(s) {
                let dest = if data.x[r][*f] < *t { *left } else { *right };
                *a = Some(dest);
                if let Slot::Open { g, h } = &mut slots[dest] {
                    *g += grad[r];
                    *h += hess[r];
                }
            }
        }
        open = next_open;
    }

    build_node(&slots, 0, lambda, params.learning_rate)
}

fn build_node(slots: &[Slot], s: usize, lambda: f64, lr: f64) -> Node {
    match slots[s] {
        Slot::Open { g, h } | Slot::Closed { g, h } => Node::Leaf {
            value: -lr * g / (h + lambda),
        },
        Slot::Split {
            feature,
            threshold,
            gain,
            left,
            right,
        } => Node::Split {
            feature,
            threshold,
            gain,
            left: Box::new(build_node(slots, left, lambda, lr)),
            right: Box::new(build_node(slots, right, lambda, lr)),
        },
    }
}
