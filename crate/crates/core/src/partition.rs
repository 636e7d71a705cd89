//! Median-split binary tree partitions of the joint (input, residual) space.
//!
//! Each node is a product cell `A = A_x × A_r`. Besides its own sample count
//! a node records how many samples fall in its input projection `A_x × R^q`
//! and in its residual projection `R^p × A_r`; those three counts are all
//! the mutual-information plug-in needs, and they are independent of any
//! strictly increasing per-coordinate transform of the data.

use std::rc::Rc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One (input, residual) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JointSample {
    pub x: Vec<f64>,
    pub r: Vec<f64>,
}

/// Cell-size schedule and pruning weight.
///
/// The minimum leaf population is `max(2, ceil(m · b_m))` with
/// `b_m = b_scale · m^(-ell)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionParams {
    pub ell: f64,
    pub lambda: f64,
    pub b_scale: f64,
}

impl Default for PartitionParams {
    fn default() -> Self {
        PartitionParams {
            ell: 0.3,
            lambda: 0.05,
            b_scale: 0.015,
        }
    }
}

impl PartitionParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.ell > 0.0 && self.ell < 1.0 / 3.0) {
            return Err(Error::Config(format!(
                "ell = {} must lie in (0, 1/3)",
                self.ell
            )));
        }
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::Config(format!(
                "lambda = {} must be >= 0",
                self.lambda
            )));
        }
        if !(self.b_scale.is_finite() && self.b_scale > 0.0) {
            return Err(Error::Config(format!(
                "b_scale = {} must be > 0",
                self.b_scale
            )));
        }
        Ok(())
    }

    /// b_m = b_scale · m^(-ell)
    pub fn b_m(&self, m: usize) -> f64 {
        self.b_scale * (m as f64).powf(-self.ell)
    }

    /// Minimum number of samples per leaf.
    pub fn min_cell(&self, m: usize) -> usize {
        let raw = (m as f64 * self.b_m(m)).ceil();
        (raw as usize).max(2)
    }
}

/// Column-major view of the joint sample used during construction.
#[derive(Debug, Clone)]
pub(crate) struct JointColumns {
    pub p: usize,
    pub q: usize,
    pub m: usize,
    pub cols: Vec<Vec<f64>>,
}

impl JointColumns {
    pub fn from_samples(samples: &[JointSample]) -> Result<Self> {
        let first = samples
            .first()
            .ok_or_else(|| Error::Size("no samples".into()))?;
        let (p, q) = (first.x.len(), first.r.len());
        if p == 0 || q == 0 {
            return Err(Error::Dimension(
                "input and residual blocks must be non-empty".into(),
            ));
        }
        let mut cols = vec![Vec::with_capacity(samples.len()); p + q];
        for (i, s) in samples.iter().enumerate() {
            if s.x.len() != p || s.r.len() != q {
                return Err(Error::Dimension(format!(
                    "sample {i} has inconsistent dimensions"
                )));
            }
            for (d, v) in s.x.iter().chain(&s.r).enumerate() {
                if !v.is_finite() {
                    return Err(Error::Config(format!("sample {i} has a non-finite entry")));
                }
                cols[d].push(*v);
            }
        }
        Ok(JointColumns {
            p,
            q,
            m: samples.len(),
            cols,
        })
    }

    fn dims(&self) -> usize {
        self.p + self.q
    }
}

/// Interval `(lo, hi]`; infinite ends are unbounded.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    #[serde(with = "inf_f64")]
    pub lo: f64,
    #[serde(with = "inf_f64")]
    pub hi: f64,
}

impl Interval {
    pub const ALL: Interval = Interval {
        lo: f64::NEG_INFINITY,
        hi: f64::INFINITY,
    };

    pub fn contains(&self, v: f64) -> bool {
        v > self.lo && v <= self.hi
    }
}

/// JSON has no infinities; they are written as `null`.
mod inf_f64 {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Split {
    pub dim: usize,
    pub threshold: f64,
    pub left: usize,
    pub right: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Node {
    pub depth: usize,
    /// Samples inside the cell.
    pub count: usize,
    /// Samples whose input part lies in the cell's input projection.
    pub x_count: usize,
    /// Samples whose residual part lies in the cell's residual projection.
    pub r_count: usize,
    pub bounds: Vec<Interval>,
    pub split: Option<Split>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        self.split.is_none()
    }

    /// P(A)·ln(P(A) / (P(A_x × R^q)·P(R^p × A_r))), 0 for an empty cell.
    pub fn mi_term(&self, m: usize) -> f64 {
        if self.count == 0 {
            return 0.0;
        }
        debug_assert!(self.x_count > 0 && self.r_count > 0);
        let (c, cx, cr, m) = (
            self.count as f64,
            self.x_count as f64,
            self.r_count as f64,
            m as f64,
        );
        (c / m) * ((c * m) / (cx * cr)).ln()
    }
}

/// Per-leaf empirical masses: joint cell, input projection, residual projection.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellMeasure {
    pub joint: f64,
    pub x_marginal: f64,
    pub r_marginal: f64,
}

/// Binary tree partition stored as an arena; node 0 is the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreePartition {
    pub m: usize,
    pub p: usize,
    pub q: usize,
    pub min_cell: usize,
    pub params: PartitionParams,
    pub nodes: Vec<Node>,
}

/// Indices of samples lying in a node's cell, input projection and residual
/// projection. Projections are shared with the parent when the split does
/// not touch that block.
struct Members {
    cell: Vec<u32>,
    x_proj: Rc<Vec<u32>>,
    r_proj: Rc<Vec<u32>>,
}

/// Grows the full median-split tree.
///
/// Splits cycle through the dimensions by depth (inputs first, then
/// residuals). A node whose scheduled dimension is fully tied, or whose split
/// would leave a child below the minimum cell size, tries the following
/// dimensions in cyclic order and becomes a leaf if none works.
pub fn grow_full_tree(samples: &[JointSample], params: PartitionParams) -> Result<TreePartition> {
    params.validate()?;
    let data = JointColumns::from_samples(samples)?;
    if data.m < 2 {
        return Err(Error::Size("partition needs at least two samples".into()));
    }
    Ok(grow(&data, params))
}

pub(crate) fn grow(data: &JointColumns, params: PartitionParams) -> TreePartition {
    let m = data.m;
    let min_cell = params.min_cell(m);
    let all: Rc<Vec<u32>> = Rc::new((0..m as u32).collect());
    let mut tree = TreePartition {
        m,
        p: data.p,
        q: data.q,
        min_cell,
        params,
        nodes: vec![Node {
            depth: 0,
            count: m,
            x_count: m,
            r_count: m,
            bounds: vec![Interval::ALL; data.dims()],
            split: None,
        }],
    };
    let mut stack = vec![(
        0usize,
        Members {
            cell: (*all).clone(),
            x_proj: all.clone(),
            r_proj: all,
        },
    )];
    let mut scratch = Vec::new();
    while let Some((id, members)) = stack.pop() {
        if members.cell.len() < 2 * min_cell {
            continue;
        }
        let depth = tree.nodes[id].depth;
        let Some((dim, threshold)) =
            choose_split(data, &members.cell, depth, min_cell, &mut scratch)
        else {
            continue;
        };
        let col = &data.cols[dim];
        let side = |idx: &[u32]| -> (Vec<u32>, Vec<u32>) {
            idx.iter().partition(|&&i| col[i as usize] <= threshold)
        };
        let (cell_l, cell_r) = side(&members.cell);
        let in_x = dim < data.p;
        let (x_l, x_r, r_l, r_r) = if in_x {
            let (a, b) = side(&members.x_proj);
            (
                Rc::new(a),
                Rc::new(b),
                members.r_proj.clone(),
                members.r_proj,
            )
        } else {
            let (a, b) = side(&members.r_proj);
            (
                members.x_proj.clone(),
                members.x_proj,
                Rc::new(a),
                Rc::new(b),
            )
        };

        let parent = &tree.nodes[id];
        let mut bounds_l = parent.bounds.clone();
        let mut bounds_r = parent.bounds.clone();
        bounds_l[dim].hi = threshold;
        bounds_r[dim].lo = threshold;
        let left = tree.nodes.len();
        let right = left + 1;
        let child = |cell: &Vec<u32>, x: &Rc<Vec<u32>>, r: &Rc<Vec<u32>>, bounds| Node {
            depth: depth + 1,
            count: cell.len(),
            x_count: x.len(),
            r_count: r.len(),
            bounds,
            split: None,
        };
        let node_l = child(&cell_l, &x_l, &r_l, bounds_l);
        let node_r = child(&cell_r, &x_r, &r_r, bounds_r);
        tree.nodes.push(node_l);
        tree.nodes.push(node_r);
        tree.nodes[id].split = Some(Split {
            dim,
            threshold,
            left,
            right,
        });
        stack.push((
            right,
            Members {
                cell: cell_r,
                x_proj: x_r,
                r_proj: r_r,
            },
        ));
        stack.push((
            left,
            Members {
                cell: cell_l,
                x_proj: x_l,
                r_proj: r_l,
            },
        ));
    }
    tree
}

/// Lower empirical median of the scheduled dimension, falling back to later
/// dimensions when the split is impossible or leaves a child too small.
fn choose_split(
    data: &JointColumns,
    cell: &[u32],
    depth: usize,
    min_cell: usize,
    scratch: &mut Vec<f64>,
) -> Option<(usize, f64)> {
    let d = data.dims();
    let n = cell.len();
    for offset in 0..d {
        let dim = (depth + offset) % d;
        let col = &data.cols[dim];
        scratch.clear();
        scratch.extend(cell.iter().map(|&i| col[i as usize]));
        let k = (n - 1) / 2;
        let (_, &mut median, _) = scratch.select_nth_unstable_by(k, |a, b| a.total_cmp(b));
        let left = cell.iter().filter(|&&i| col[i as usize] <= median).count();
        let right = n - left;
        if left >= min_cell && right >= min_cell {
            return Some((dim, median));
        }
    }
    None
}

impl TreePartition {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn leaves(&self) -> impl Iterator<Item = &Node> {
        self.reachable().filter(|n| n.is_leaf())
    }

    pub fn leaf_count(&self) -> usize {
        self.leaves().count()
    }

    /// Maximum depth over leaves; a single-cell partition has depth 0.
    pub fn depth(&self) -> usize {
        self.leaves().map(|n| n.depth).max().unwrap_or(0)
    }

    fn reachable(&self) -> impl Iterator<Item = &Node> {
        let mut stack = vec![0usize];
        std::iter::from_fn(move || {
            let id = stack.pop()?;
            let node = &self.nodes[id];
            if let Some(s) = node.split {
                stack.push(s.right);
                stack.push(s.left);
            }
            Some(node)
        })
    }

    /// Empirical masses of every leaf, in depth-first (left before right) order.
    pub fn empirical_measures(&self) -> Vec<CellMeasure> {
        let m = self.m as f64;
        self.leaves()
            .map(|n| CellMeasure {
                joint: n.count as f64 / m,
                x_marginal: n.x_count as f64 / m,
                r_marginal: n.r_count as f64 / m,
            })
            .collect()
    }

    /// Plug-in mutual information of the leaf partition, in nats.
    pub fn mutual_information(&self) -> f64 {
        if self.root().is_leaf() {
            return 0.0;
        }
        self.leaves().map(|n| n.mi_term(self.m)).sum()
    }

    /// Per-leaf cost of the pruning objective: λ·(p+q)·ln(m)/m.
    pub fn leaf_penalty(&self, lambda: f64) -> f64 {
        let m = self.m as f64;
        lambda * (self.p + self.q) as f64 * m.ln() / m
    }

    /// Subtree maximising `MI − λ·(p+q)·ln(m)·leaves/m`.
    ///
    /// Bottom-up dynamic programme: each internal node keeps its children
    /// only when their best subtree value strictly beats collapsing the node
    /// to a leaf. `λ = 0` leaves the tree unchanged.
    pub fn prune(&self, lambda: f64) -> TreePartition {
        if lambda == 0.0 {
            return self.clone();
        }
        let pen = self.leaf_penalty(lambda);
        let mut best = vec![0.0_f64; self.nodes.len()];
        let mut keep = vec![false; self.nodes.len()];
        // Children always come after their parent in the arena.
        for id in (0..self.nodes.len()).rev() {
            let node = &self.nodes[id];
            let collapsed = node.mi_term(self.m) - pen;
            best[id] = match node.split {
                None => collapsed,
                Some(s) => {
                    let split_value = best[s.left] + best[s.right];
                    if split_value > collapsed {
                        keep[id] = true;
                        split_value
                    } else {
                        collapsed
                    }
                }
            };
        }

        let mut pruned = TreePartition {
            nodes: Vec::with_capacity(self.nodes.len()),
            ..self.clone()
        };
        let mut queue = vec![(0usize, usize::MAX, false)];
        while let Some((old, parent, is_right)) = queue.pop() {
            let new_id = pruned.nodes.len();
            let mut node = self.nodes[old].clone();
            let old_split = node.split.take();
            pruned.nodes.push(node);
            if parent != usize::MAX {
                let ps = pruned.nodes[parent]
                    .split
                    .as_mut()
                    .expect("parent has split");
                if is_right {
                    ps.right = new_id;
                } else {
                    ps.left = new_id;
                }
            }
            if let (Some(s), true) = (old_split, keep[old]) {
                pruned.nodes[new_id].split = Some(Split {
                    left: usize::MAX,
                    right: usize::MAX,
                    ..s
                });
                queue.push((s.right, new_id, true));
                queue.push((s.left, new_id, false));
            }
        }
        pruned
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}
