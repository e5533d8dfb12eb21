//! Binary regression trees, sum-of-trees forests, the tree structure prior,
//! proposal moves and the conjugate leaf mathematics.

pub mod forest;
pub mod leaf;
pub mod moves;
pub mod prior;
pub mod tree;

pub use forest::Forest;
pub use leaf::{draw_leaf_values, leaf_marginal_loglik, LeafStats};
pub use moves::{propose_move, MoveKind, MoveProposal};
pub use prior::{log_structure_prior, TreePriorConfig};
pub use tree::{LeafRows, NodeKind, SplitRule, Tree};
