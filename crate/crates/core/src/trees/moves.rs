//! GROW / PRUNE / CHANGE proposals for one tree.
//!
//! Split variables are drawn uniformly among predictors that take at least
//! two distinct values in the node; cutpoints uniformly among midpoints of
//! consecutive distinct values. Both children of any proposed split are
//! therefore non-empty.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::prior::TreePriorConfig;
use super::tree::{LeafRows, SplitRule, Tree};
use crate::error::Result;
use crate::rng::RngStream;

pub const GROW_WEIGHT: f64 = 0.4;
pub const PRUNE_WEIGHT: f64 = 0.4;
pub const CHANGE_WEIGHT: f64 = 0.2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MoveKind {
    Grow,
    Prune,
    Change,
}

/// A proposed tree together with its routing of the training rows.
///
/// `log_prior_ratio` covers the tree-shape prior and the uniform split-rule
/// prior; `log_proposal_ratio` is `log q(new → old) − log q(old → new)`.
#[derive(Clone, Debug)]
pub struct MoveProposal {
    pub tree: Tree,
    pub rows: LeafRows,
    pub kind: MoveKind,
    pub node: usize,
    pub log_proposal_ratio: f64,
    pub log_prior_ratio: f64,
}

/// Predictors with at least two distinct values among `rows`.
pub fn split_variables(x: &DMatrix<f64>, rows: &[usize]) -> Vec<usize> {
    (0..x.ncols())
        .filter(|&v| {
            let mut it = rows.iter().map(|&i| x[(i, v)]);
            match it.next() {
                Some(first) => it.any(|val| val != first),
                None => false,
            }
        })
        .collect()
}

/// Midpoints between consecutive distinct values of predictor `var`.
pub fn cutpoints(x: &DMatrix<f64>, rows: &[usize], var: usize) -> Vec<f64> {
    let mut vals: Vec<f64> = rows.iter().map(|&i| x[(i, var)]).collect();
    vals.sort_unstable_by(f64::total_cmp);
    vals.dedup();
    vals.windows(2)
        .map(|w| {
            let mid = 0.5 * (w[0] + w[1]);
            // Adjacent floats can round the midpoint down onto the lower value.
            if mid > w[0] {
                mid
            } else {
                w[1]
            }
        })
        .collect()
}

struct MoveSpace {
    growable: Vec<(usize, Vec<usize>)>,
    leaf_parents: Vec<usize>,
}

impl MoveSpace {
    fn new(tree: &Tree, x: &DMatrix<f64>, rows: &LeafRows) -> Self {
        let growable = tree
            .leaves()
            .into_iter()
            .filter_map(|leaf| {
                let vars = split_variables(x, &rows.rows[leaf]);
                (!vars.is_empty()).then_some((leaf, vars))
            })
            .collect();
        Self {
            growable,
            leaf_parents: tree.leaf_parents(),
        }
    }

    fn weights(&self) -> [(MoveKind, f64); 3] {
        let can_grow = !self.growable.is_empty();
        let can_shrink = !self.leaf_parents.is_empty();
        [
            (MoveKind::Grow, if can_grow { GROW_WEIGHT } else { 0.0 }),
            (MoveKind::Prune, if can_shrink { PRUNE_WEIGHT } else { 0.0 }),
            (MoveKind::Change, if can_shrink { CHANGE_WEIGHT } else { 0.0 }),
        ]
    }

    fn prob(&self, kind: MoveKind) -> f64 {
        let w = self.weights();
        let total: f64 = w.iter().map(|(_, v)| v).sum();
        let mine = w.iter().find(|(k, _)| *k == kind).map_or(0.0, |(_, v)| *v);
        if total > 0.0 {
            mine / total
        } else {
            0.0
        }
    }

    fn choose(&self, rng: &mut RngStream) -> Option<MoveKind> {
        let w = self.weights();
        let total: f64 = w.iter().map(|(_, v)| v).sum();
        if total == 0.0 {
            return None;
        }
        let mut u = rng.uniform() * total;
        for (k, v) in w {
            if v > 0.0 {
                if u < v {
                    return Some(k);
                }
                u -= v;
            }
        }
        w.iter().rev().find(|(_, v)| *v > 0.0).map(|(k, _)| *k)
    }
}

/// Log prior ratio for splitting a leaf at `depth` with `n_vars` candidate
/// predictors and `n_cuts` candidate cutpoints for the chosen one.
fn grow_log_prior_ratio(prior: &TreePriorConfig, depth: usize, n_vars: usize, n_cuts: usize) -> f64 {
    prior.log_split(depth) + 2.0 * prior.log_no_split(depth + 1) - prior.log_no_split(depth)
        - (n_vars as f64).ln()
        - (n_cuts as f64).ln()
}

/// Propose a structural change to `tree`. `rows` must be the routing of the
/// training rows of `x` through `tree`. Returns `None` when no move is legal.
pub fn propose_move(
    tree: &Tree,
    x: &DMatrix<f64>,
    rows: &LeafRows,
    prior: &TreePriorConfig,
    rng: &mut RngStream,
) -> Result<Option<MoveProposal>> {
    let space = MoveSpace::new(tree, x, rows);
    let Some(kind) = space.choose(rng) else {
        return Ok(None);
    };
    let proposal = match kind {
        MoveKind::Grow => {
            let (leaf, vars) = &space.growable[rng.index(space.growable.len())];
            let var = vars[rng.index(vars.len())];
            let cuts = cutpoints(x, &rows.rows[*leaf], var);
            let cut = cuts[rng.index(cuts.len())];
            let new = tree.grow(*leaf, SplitRule { var, cut })?;
            let new_rows = new.partition(x);
            let new_space = MoveSpace::new(&new, x, &new_rows);
            let (n_vars, n_cuts) = (vars.len() as f64, cuts.len() as f64);
            let forward = space.prob(MoveKind::Grow).ln() - (space.growable.len() as f64).ln() - n_vars.ln() - n_cuts.ln();
            let reverse = new_space.prob(MoveKind::Prune).ln() - (new_space.leaf_parents.len() as f64).ln();
            MoveProposal {
                log_prior_ratio: grow_log_prior_ratio(prior, tree.node(*leaf).depth, vars.len(), cuts.len()),
                log_proposal_ratio: reverse - forward,
                tree: new,
                rows: new_rows,
                kind,
                node: *leaf,
            }
        }
        MoveKind::Prune => {
            let node = space.leaf_parents[rng.index(space.leaf_parents.len())];
            let rule = tree.rule(node).expect("leaf parent has a rule");
            let under = rows.rows_under(tree, node);
            let n_vars = split_variables(x, &under).len();
            let n_cuts = cutpoints(x, &under, rule.var).len();
            let new = tree.prune(node)?;
            let new_rows = new.partition(x);
            let new_space = MoveSpace::new(&new, x, &new_rows);
            let forward = space.prob(MoveKind::Prune).ln() - (space.leaf_parents.len() as f64).ln();
            let reverse = new_space.prob(MoveKind::Grow).ln()
                - (new_space.growable.len() as f64).ln()
                - (n_vars as f64).ln()
                - (n_cuts as f64).ln();
            MoveProposal {
                log_prior_ratio: -grow_log_prior_ratio(prior, tree.node(node).depth, n_vars, n_cuts),
                log_proposal_ratio: reverse - forward,
                tree: new,
                rows: new_rows,
                kind,
                node,
            }
        }
        MoveKind::Change => {
            let node = space.leaf_parents[rng.index(space.leaf_parents.len())];
            let old = tree.rule(node).expect("leaf parent has a rule");
            let under = rows.rows_under(tree, node);
            let vars = split_variables(x, &under);
            let var = vars[rng.index(vars.len())];
            let cuts = cutpoints(x, &under, var);
            let cut = cuts[rng.index(cuts.len())];
            let old_cuts = cutpoints(x, &under, old.var).len() as f64;
            let new = tree.change(node, SplitRule { var, cut })?;
            let new_rows = new.partition(x);
            let new_space = MoveSpace::new(&new, x, &new_rows);
            let n_cuts = cuts.len() as f64;
            MoveProposal {
                log_prior_ratio: old_cuts.ln() - n_cuts.ln(),
                log_proposal_ratio: new_space.prob(MoveKind::Change).ln() - space.prob(MoveKind::Change).ln()
                    + n_cuts.ln()
                    - old_cuts.ln(),
                tree: new,
                rows: new_rows,
                kind,
                node,
            }
        }
    };
    Ok(Some(proposal))
}
