use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

/// `x[var] < cut` routes left, anything else (including equality) right.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRule {
    pub var: usize,
    pub cut: f64,
}

impl SplitRule {
    #[inline]
    pub fn goes_left(&self, value: f64) -> bool {
        value < self.cut
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum NodeKind {
    Leaf { value: f64 },
    Split { rule: SplitRule, left: usize, right: usize },
}

#[derive(Clone, Debug, PartialEq)]
pub struct Node {
    pub kind: NodeKind,
    pub depth: usize,
    pub parent: Option<usize>,
}

impl Node {
    pub fn is_leaf(&self) -> bool {
        matches!(self.kind, NodeKind::Leaf { .. })
    }
}

/// Arena-backed binary tree. Node 0 is the root; node ids are only stable
/// until the next structural edit.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(into = "TreeRepr", try_from = "TreeRepr")]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn stump(value: f64) -> Self {
        Self {
            nodes: vec![Node {
                kind: NodeKind::Leaf { value },
                depth: 0,
                parent: None,
            }],
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> &Node {
        &self.nodes[id]
    }

    /// Leaf reached by a point whose coordinates are given by `feature`.
    #[inline]
    pub fn leaf_index<F: Fn(usize) -> f64>(&self, feature: F) -> usize {
        let mut id = 0;
        loop {
            match &self.nodes[id].kind {
                NodeKind::Leaf { .. } => return id,
                NodeKind::Split { rule, left, right } => {
                    id = if rule.goes_left(feature(rule.var)) { *left } else { *right };
                }
            }
        }
    }

    #[inline]
    pub fn value_at<F: Fn(usize) -> f64>(&self, feature: F) -> f64 {
        match self.nodes[self.leaf_index(feature)].kind {
            NodeKind::Leaf { value } => value,
            NodeKind::Split { .. } => unreachable!(),
        }
    }

    /// Value of the leaf containing `x`.
    pub fn traverse(&self, x: &[f64]) -> f64 {
        self.value_at(|v| x[v])
    }

    pub fn leaf_value(&self, id: usize) -> Option<f64> {
        match self.nodes[id].kind {
            NodeKind::Leaf { value } => Some(value),
            NodeKind::Split { .. } => None,
        }
    }

    pub fn set_leaf_value(&mut self, id: usize, value: f64) {
        if let NodeKind::Leaf { value: v } = &mut self.nodes[id].kind {
            *v = value;
        }
    }

    pub fn leaves(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| self.nodes[i].is_leaf()).collect()
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).count()
    }

    pub fn internal_nodes(&self) -> Vec<usize> {
        (0..self.nodes.len()).filter(|&i| !self.nodes[i].is_leaf()).collect()
    }

    /// Internal nodes whose two children are both leaves.
    pub fn leaf_parents(&self) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| match self.nodes[i].kind {
                NodeKind::Split { left, right, .. } => self.nodes[left].is_leaf() && self.nodes[right].is_leaf(),
                NodeKind::Leaf { .. } => false,
            })
            .collect()
    }

    /// Depth of the deepest leaf (0 for a stump).
    pub fn depth(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_leaf()).map(|n| n.depth).max().unwrap_or(0)
    }

    pub fn rule(&self, id: usize) -> Option<SplitRule> {
        match self.nodes[id].kind {
            NodeKind::Split { rule, .. } => Some(rule),
            NodeKind::Leaf { .. } => None,
        }
    }

    pub fn children(&self, id: usize) -> Option<(usize, usize)> {
        match self.nodes[id].kind {
            NodeKind::Split { left, right, .. } => Some((left, right)),
            NodeKind::Leaf { .. } => None,
        }
    }

    /// Split leaf `id`; both children inherit its value.
    pub fn grow(&self, id: usize, rule: SplitRule) -> Result<Tree> {
        let value = self
            .leaf_value(id)
            .ok_or_else(|| invalid(format!("node {id} is not a leaf")))?;
        let mut t = self.clone();
        let depth = t.nodes[id].depth + 1;
        let left = t.nodes.len();
        for _ in 0..2 {
            t.nodes.push(Node {
                kind: NodeKind::Leaf { value },
                depth,
                parent: Some(id),
            });
        }
        t.nodes[id].kind = NodeKind::Split {
            rule,
            left,
            right: left + 1,
        };
        Ok(t)
    }

    /// Collapse an internal node with two leaf children into a leaf.
    pub fn prune(&self, id: usize) -> Result<Tree> {
        let (l, r) = self
            .children(id)
            .ok_or_else(|| invalid(format!("node {id} is not internal")))?;
        let (Some(a), Some(b)) = (self.leaf_value(l), self.leaf_value(r)) else {
            return Err(invalid(format!("node {id} has a non-leaf child")));
        };
        let mut t = self.clone();
        t.nodes[id].kind = NodeKind::Leaf { value: 0.5 * (a + b) };
        Ok(t.compacted())
    }

    /// Replace the split rule of internal node `id`.
    pub fn change(&self, id: usize, rule: SplitRule) -> Result<Tree> {
        let mut t = self.clone();
        match &mut t.nodes[id].kind {
            NodeKind::Split { rule: r, .. } => *r = rule,
            NodeKind::Leaf { .. } => return Err(invalid(format!("node {id} is not internal"))),
        }
        Ok(t)
    }

    /// Rebuild the arena in pre-order, dropping unreachable nodes.
    fn compacted(&self) -> Tree {
        let mut out = Vec::with_capacity(self.nodes.len());
        fn visit(src: &[Node], id: usize, parent: Option<usize>, out: &mut Vec<Node>) -> usize {
            let me = out.len();
            out.push(Node {
                kind: NodeKind::Leaf { value: 0.0 },
                depth: src[id].depth,
                parent,
            });
            out[me].kind = match src[id].kind {
                NodeKind::Leaf { value } => NodeKind::Leaf { value },
                NodeKind::Split { rule, left, right } => {
                    let l = visit(src, left, Some(me), out);
                    let r = visit(src, right, Some(me), out);
                    NodeKind::Split { rule, left: l, right: r }
                }
            };
            me
        }
        visit(&self.nodes, 0, None, &mut out);
        Tree { nodes: out }
    }

    /// Route every row of `x` and group row indices by leaf.
    pub fn partition(&self, x: &DMatrix<f64>) -> LeafRows {
        let n = x.nrows();
        let mut rows = vec![Vec::new(); self.nodes.len()];
        let mut leaf_of_row = Vec::with_capacity(n);
        for i in 0..n {
            let leaf = self.leaf_index(|v| x[(i, v)]);
            rows[leaf].push(i);
            leaf_of_row.push(leaf);
        }
        LeafRows { rows, leaf_of_row }
    }

    pub fn max_var(&self) -> Option<usize> {
        self.nodes.iter().filter_map(|n| match n.kind {
            NodeKind::Split { rule, .. } => Some(rule.var),
            NodeKind::Leaf { .. } => None,
        }).max()
    }
}

/// Training rows reaching each node of a tree (empty for internal nodes).
#[derive(Clone, Debug, PartialEq)]
pub struct LeafRows {
    pub rows: Vec<Vec<usize>>,
    pub leaf_of_row: Vec<usize>,
}

impl LeafRows {
    /// Rows reaching any node: the union over the leaves beneath it.
    pub fn rows_under(&self, tree: &Tree, id: usize) -> Vec<usize> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            match tree.children(n) {
                Some((l, r)) => {
                    stack.push(r);
                    stack.push(l);
                }
                None => out.extend_from_slice(&self.rows[n]),
            }
        }
        out.sort_unstable();
        out
    }
}

/// Nested serialized form: `{"split": {"var", "cut"}, "left", "right"}` or
/// `{"leaf": value}`.
// Structural equality: the arena order of nodes is not significant.
impl PartialEq for Tree {
    fn eq(&self, other: &Self) -> bool {
        fn same(a: &Tree, i: usize, b: &Tree, j: usize) -> bool {
            match (&a.nodes[i].kind, &b.nodes[j].kind) {
                (NodeKind::Leaf { value: x }, NodeKind::Leaf { value: y }) => x == y,
                (
                    NodeKind::Split { rule: r1, left: l1, right: g1 },
                    NodeKind::Split { rule: r2, left: l2, right: g2 },
                ) => r1 == r2 && same(a, *l1, b, *l2) && same(a, *g1, b, *g2),
                _ => false,
            }
        }
        same(self, 0, other, 0)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum TreeRepr {
    Split {
        split: SplitRule,
        left: Box<TreeRepr>,
        right: Box<TreeRepr>,
    },
    Leaf {
        leaf: f64,
    },
}

impl From<Tree> for TreeRepr {
    fn from(t: Tree) -> Self {
        fn build(t: &Tree, id: usize) -> TreeRepr {
            match t.nodes[id].kind {
                NodeKind::Leaf { value } => TreeRepr::Leaf { leaf: value },
                NodeKind::Split { rule, left, right } => TreeRepr::Split {
                    split: rule,
                    left: Box::new(build(t, left)),
                    right: Box::new(build(t, right)),
                },
            }
        }
        build(&t, 0)
    }
}

impl TryFrom<TreeRepr> for Tree {
    type Error = Error;
    fn try_from(repr: TreeRepr) -> Result<Tree> {
        fn push(repr: &TreeRepr, depth: usize, parent: Option<usize>, out: &mut Vec<Node>) -> Result<usize> {
            let me = out.len();
            out.push(Node {
                kind: NodeKind::Leaf { value: 0.0 },
                depth,
                parent,
            });
            out[me].kind = match repr {
                TreeRepr::Leaf { leaf } => {
                    if !leaf.is_finite() {
                        return Err(invalid("non-finite leaf value"));
                    }
                    NodeKind::Leaf { value: *leaf }
                }
                TreeRepr::Split { split, left, right } => {
                    let l = push(left, depth + 1, Some(me), out)?;
                    let r = push(right, depth + 1, Some(me), out)?;
                    NodeKind::Split { rule: *split, left: l, right: r }
                }
            };
            Ok(me)
        }
        let mut nodes = Vec::new();
        push(&repr, 0, None, &mut nodes)?;
        Ok(Tree { nodes })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn root_split(cut: f64, left: f64, right: f64) -> Tree {
        let mut t = Tree::stump(0.0).grow(0, SplitRule { var: 0, cut }).unwrap();
        let (l, r) = t.children(0).unwrap();
        t.set_leaf_value(l, left);
        t.set_leaf_value(r, right);
        t
    }

    #[test]
    fn stump_returns_its_value() {
        let t = Tree::stump(0.3);
        assert_eq!(t.traverse(&[5.0, -2.0]), 0.3);
    }

    #[test]
    fn routes_by_rule() {
        let t = root_split(0.0, -1.0, 1.0);
        assert_eq!(t.traverse(&[-0.5]), -1.0);
        assert_eq!(t.traverse(&[0.5]), 1.0);
    }

    #[test]
    fn equality_routes_right() {
        let t = root_split(0.25, -1.0, 1.0);
        assert_eq!(t.traverse(&[0.25]), 1.0);
    }

    #[test]
    fn prune_restores_stump() {
        let t = root_split(0.0, -1.0, 1.0);
        let p = t.prune(0).unwrap();
        assert_eq!(p.nodes().len(), 1);
        assert_eq!(p.traverse(&[3.0]), 0.0);
        assert!(Tree::stump(1.0).prune(0).is_err());
    }

    #[test]
    fn prune_compacts_deeper_tree() {
        let t = root_split(0.0, -1.0, 1.0);
        let (l, _) = t.children(0).unwrap();
        let t = t.grow(l, SplitRule { var: 1, cut: 0.5 }).unwrap();
        assert_eq!(t.depth(), 2);
        assert_eq!(t.leaf_parents(), vec![l]);
        let p = t.prune(l).unwrap();
        assert_eq!(p.nodes().len(), 3);
        assert_eq!(p.depth(), 1);
    }

    #[test]
    fn serialized_schema() {
        let t = root_split(0.5, -1.0, 2.0);
        let s = serde_json::to_string(&t).unwrap();
        assert_eq!(
            s,
            r#"{"split":{"var":0,"cut":0.5},"left":{"leaf":-1.0},"right":{"leaf":2.0}}"#
        );
        let back: Tree = serde_json::from_str(&s).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn partition_groups_rows() {
        let t = root_split(0.0, -1.0, 1.0);
        let x = DMatrix::from_column_slice(4, 1, &[-1.0, 1.0, 0.0, -0.1]);
        let p = t.partition(&x);
        let (l, r) = t.children(0).unwrap();
        assert_eq!(p.rows[l], vec![0, 3]);
        assert_eq!(p.rows[r], vec![1, 2]);
        assert_eq!(p.rows_under(&t, 0), vec![0, 1, 2, 3]);
    }
}
