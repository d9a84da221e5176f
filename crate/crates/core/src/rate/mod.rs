//! Entropy-aware map selection, ratio choice, pruning and restoration.

mod choice;
mod mask;
mod policy;
mod prune;

pub use choice::{argmax_lowest, gumbel_noise, PolicyChoice, PolicyMode};
pub use mask::{mask_table, rank_by_entropy, ActivationMask};
pub use policy::{p1_forward, p2_forward, PruningPolicy, SelectionPolicy};
pub use prune::{l1_prune_flags, lossy_gather_plan, prune, pruned_count, restore, restore_lossy, PruneRecord};
