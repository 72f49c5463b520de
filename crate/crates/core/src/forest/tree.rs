use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::rng::Rng;
use crate::scalar::{total_cmp, Real};

pub(crate) const LEAF: u32 = u32::MAX;

/// Internal node (`feature != LEAF`) or leaf (`left` indexes the leaf table).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Node<T: Real> {
    pub feature: u32,
    pub threshold: T,
    pub left: u32,
    pub right: u32,
}

/// One CART tree. Leaf `i` owns `leaf_probs[i * k .. (i + 1) * k]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct Tree<T: Real> {
    pub nodes: Vec<Node<T>>,
    pub leaf_probs: Vec<T>,
}

impl<T: Real> Tree<T> {
    #[inline]
    pub fn leaf_for(&self, row: &[T], k: usize) -> &[T] {
        let mut at = 0usize;
        loop {
            let n = &self.nodes[at];
            if n.feature == LEAF {
                let s = n.left as usize * k;
                return &self.leaf_probs[s..s + k];
            }
            at = if row[n.feature as usize] <= n.threshold { n.left } else { n.right } as usize;
        }
    }

    pub fn depth(&self) -> usize {
        fn go<T: Real>(t: &Tree<T>, i: usize) -> usize {
            let n = &t.nodes[i];
            if n.feature == LEAF {
                0
            } else {
                1 + go(t, n.left as usize).max(go(t, n.right as usize))
            }
        }
        go(self, 0)
    }

    pub fn leaf_count(&self) -> usize {
        self.nodes.iter().filter(|n| n.feature == LEAF).count()
    }
}

pub(crate) struct GrowParams {
    pub k: usize,
    pub mtry: usize,
    pub max_depth: Option<usize>,
    pub min_samples_split: usize,
}

struct Split<T> {
    feature: usize,
    threshold: T,
    score: f64,
}

/// Grow a tree on the samples `(row, weight)`; `x` is row-major `n x m`.
pub(crate) fn grow<T: Real>(
    x: &[T],
    m: usize,
    y: &[usize],
    samples: Vec<(u32, u32)>,
    params: &GrowParams,
    rng: &mut Rng,
) -> Tree<T> {
    let k = params.k;
    let mut tree = Tree { nodes: Vec::new(), leaf_probs: Vec::new() };
    let mut samples = samples;
    let mut scratch: Vec<(T, u32, u32)> = Vec::with_capacity(samples.len());
    let mut features: Vec<usize> = (0..m).collect();
    let mut counts = vec![0u64; k];
    let mut left = vec![0u64; k];
    // (start, end, depth, node slot)
    let mut stack = vec![(0usize, samples.len(), 0usize, 0usize)];
    tree.nodes.push(Node { feature: LEAF, threshold: T::zero(), left: 0, right: 0 });

    while let Some((start, end, depth, slot)) = stack.pop() {
        let node = &samples[start..end];
        counts.iter_mut().for_each(|c| *c = 0);
        for &(i, w) in node {
            counts[y[i as usize]] += w as u64;
        }
        let total: u64 = counts.iter().sum();
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_capped = params.max_depth.is_some_and(|d| depth >= d);
        let split = if pure || depth_capped || (total as usize) < params.min_samples_split {
            None
        } else {
            best_split(x, m, y, node, &counts, params, &mut features, &mut scratch, &mut left, rng)
        };
        match split {
            None => {
                let leaf = (tree.leaf_probs.len() / k) as u32;
                let tw = T::of(total as f64);
                tree.leaf_probs.extend(counts.iter().map(|&c| T::of(c as f64) / tw));
                tree.nodes[slot] = Node { feature: LEAF, threshold: T::zero(), left: leaf, right: 0 };
            }
            Some(s) => {
                // Stable partition: rows going left first.
                scratch.clear();
                let part = &mut samples[start..end];
                let mut write = 0;
                for idx in 0..part.len() {
                    let (i, w) = part[idx];
                    if x[i as usize * m + s.feature] <= s.threshold {
                        part[write] = (i, w);
                        write += 1;
                    } else {
                        scratch.push((T::zero(), i, w));
                    }
                }
                for (off, &(_, i, w)) in scratch.iter().enumerate() {
                    part[write + off] = (i, w);
                }
                let mid = start + write;
                let l = tree.nodes.len();
                tree.nodes.push(Node { feature: LEAF, threshold: T::zero(), left: 0, right: 0 });
                tree.nodes.push(Node { feature: LEAF, threshold: T::zero(), left: 0, right: 0 });
                tree.nodes[slot] =
                    Node { feature: s.feature as u32, threshold: s.threshold, left: l as u32, right: l as u32 + 1 };
                stack.push((mid, end, depth + 1, l + 1));
                stack.push((start, mid, depth + 1, l));
            }
        }
    }
    tree
}

#[allow(clippy::too_many_arguments)]
fn best_split<T: Real>(
    x: &[T],
    m: usize,
    y: &[usize],
    node: &[(u32, u32)],
    counts: &[u64],
    params: &GrowParams,
    features: &mut [usize],
    scratch: &mut Vec<(T, u32, u32)>,
    left: &mut [u64],
    rng: &mut Rng,
) -> Option<Split<T>> {
    features.shuffle(rng);
    let total: u64 = counts.iter().sum();
    let total_sq: f64 = counts.iter().map(|&c| (c * c) as f64).sum();
    let mut best: Option<Split<T>> = None;
    let mut informative = 0;
    for &f in features.iter() {
        if informative >= params.mtry {
            break;
        }
        scratch.clear();
        scratch.extend(node.iter().map(|&(i, w)| (x[i as usize * m + f], i, w)));
        scratch.sort_unstable_by(|a, b| total_cmp(&a.0, &b.0).then(a.1.cmp(&b.1)));
        if scratch[0].0 == scratch[scratch.len() - 1].0 {
            continue;
        }
        informative += 1;
        left.iter_mut().for_each(|c| *c = 0);
        let (mut wl, mut sl) = (0u64, 0f64);
        let mut sr = total_sq;
        for p in 0..scratch.len() - 1 {
            let (v, i, w) = scratch[p];
            let c = y[i as usize];
            let (lc, w64) = (left[c], w as u64);
            let rc = counts[c] - lc;
            sl += (2 * lc * w64 + w64 * w64) as f64;
            sr -= (2 * rc * w64 - w64 * w64) as f64;
            left[c] += w64;
            wl += w64;
            let next = scratch[p + 1].0;
            if !(v < next) {
                continue;
            }
            let wr = total - wl;
            let score = sl / wl as f64 + sr / wr as f64;
            let better = match &best {
                None => true,
                Some(b) => score > b.score || (score == b.score && f < b.feature),
            };
            if better {
                let mut thr = v + (next - v) / T::of(2.0);
                if !(thr < next) {
                    thr = v;
                }
                best = Some(Split { feature: f, threshold: thr, score });
            }
        }
    }
    best
}
