//! Canonical enumeration of block configurations.
//!
//! Several quantities in this crate are sums over ways of splitting a set of
//! external points among correlator blocks that are additionally wired to
//! *slots* (fiber sheet indices acting as intermediate points):
//!
//! * one block is *pinned*: it always exists and carries a distinguished
//!   first argument; it may use any number of slots (including none);
//! * every other block must use at least one slot (its *anchor*);
//! * every external point belongs to exactly one block; slots may stay
//!   unused;
//! * each block α carries a genus `h_α ≥ 0`, and the usable order of a block
//!   is `k_α = |exts| + |slots|` for the pinned block and
//!   `k_α = |exts| + |slots| - 1` otherwise (the anchor replaces the pin);
//! * the total budget is fixed: `Σ_α (h_α + k_α) = n_ext + extra`;
//! * blocks with `(k_α, h_α) = (0, 0)` would contribute a vanishing
//!   one-point planar correlator, so configurations containing one are
//!   dropped.
//!
//! Configurations are unordered collections of blocks. The enumeration is
//! canonical — each configuration is produced exactly once — by ordering
//! non-pinned blocks by their anchor, defined as the smallest slot they use:
//! scanning slots in increasing order, each either stays unused or anchors
//! the next block.

/// One correlator block of a configuration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionBlock {
    /// Indices into the external point list (ascending).
    pub exts: Vec<usize>,
    /// Slot ids used by this block (ascending; the anchor, if any, first).
    pub slots: Vec<usize>,
    /// Genus carried by this block.
    pub genus: usize,
}

impl PartitionBlock {
    /// The block's order `k_α`: its correlator is `W_{k_α + 1}^{(genus)}`.
    pub fn order(&self, pinned: bool) -> usize {
        if pinned {
            self.exts.len() + self.slots.len()
        } else {
            self.exts.len() + self.slots.len() - 1
        }
    }
}

/// One configuration: `blocks[0]` is the pinned block (possibly with no
/// externals and no slots), the rest are anchored blocks in increasing
/// anchor order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartitionTerm {
    /// The blocks; index 0 is pinned.
    pub blocks: Vec<PartitionBlock>,
}

impl PartitionTerm {
    /// Total `Σ_α (h_α + k_α)` of the configuration.
    pub fn budget(&self) -> usize {
        self.blocks
            .iter()
            .enumerate()
            .map(|(i, b)| b.genus + b.order(i == 0))
            .sum()
    }
}

/// All subsets of `items`, as bitmask-ordered vectors.
fn subsets(items: &[usize]) -> Vec<Vec<usize>> {
    let n = items.len();
    (0..(1usize << n))
        .map(|mask| {
            (0..n)
                .filter(|b| mask & (1 << b) != 0)
                .map(|b| items[b])
                .collect()
        })
        .collect()
}

/// Enumerates every canonical configuration for `n_ext` external points
/// (ids `0..n_ext`), the given slot pool, and total budget
/// `n_ext + extra`.
pub fn enumerate_configs(
    n_ext: usize,
    slot_pool: &[usize],
    extra: usize,
) -> Vec<PartitionTerm> {
    let exts: Vec<usize> = (0..n_ext).collect();
    let budget = n_ext + extra;
    let mut out = Vec::new();

    let mut pool = slot_pool.to_vec();
    pool.sort_unstable();

    // Pinned block: any subset of externals and slots.
    for pinned_exts in subsets(&exts) {
        let left: Vec<usize> = exts
            .iter()
            .copied()
            .filter(|e| !pinned_exts.contains(e))
            .collect();
        for pinned_slots in subsets(&pool) {
            let slots_left: Vec<usize> = pool
                .iter()
                .copied()
                .filter(|s| !pinned_slots.contains(s))
                .collect();
            let pinned = PartitionBlock {
                exts: pinned_exts.clone(),
                slots: pinned_slots.clone(),
                genus: 0,
            };
            let mut blocks = vec![pinned];
            gen_rest(&left, &slots_left, &mut blocks, budget, &mut out);
        }
    }
    out
}

/// Extends a partial configuration: the smallest remaining slot either stays
/// unused or anchors the next block; when no slots remain, all externals
/// must have been placed.
fn gen_rest(
    exts_left: &[usize],
    slots_left: &[usize],
    blocks: &mut Vec<PartitionBlock>,
    budget: usize,
    out: &mut Vec<PartitionTerm>,
) {
    if slots_left.is_empty() {
        if exts_left.is_empty() {
            emit_with_genus(blocks, budget, out);
        }
        return;
    }
    let anchor = slots_left[0];
    let rest = &slots_left[1..];

    // The anchor slot stays unused.
    gen_rest(exts_left, rest, blocks, budget, out);

    // The anchor starts a new block with any extra slots and externals.
    for extra_slots in subsets(rest) {
        let remaining_slots: Vec<usize> = rest
            .iter()
            .copied()
            .filter(|s| !extra_slots.contains(s))
            .collect();
        for block_exts in subsets(exts_left) {
            let remaining_exts: Vec<usize> = exts_left
                .iter()
                .copied()
                .filter(|e| !block_exts.contains(e))
                .collect();
            let mut slots = vec![anchor];
            slots.extend(extra_slots.iter().copied());
            blocks.push(PartitionBlock { exts: block_exts.clone(), slots, genus: 0 });
            gen_rest(&remaining_exts, &remaining_slots, blocks, budget, out);
            blocks.pop();
        }
    }
}

/// Distributes the remaining budget as genus over the blocks of a complete
/// structure, skipping distributions that leave a `(0, 0)` block.
fn emit_with_genus(blocks: &[PartitionBlock], budget: usize, out: &mut Vec<PartitionTerm>) {
    let orders: Vec<usize> = blocks
        .iter()
        .enumerate()
        .map(|(i, b)| b.order(i == 0))
        .collect();
    let used: usize = orders.iter().sum();
    if used > budget {
        return;
    }
    let spare = budget - used;
    // Compositions of `spare` into blocks.len() non-negative parts.
    let r = blocks.len();
    let mut genus = vec![0usize; r];
    fn rec(
        idx: usize,
        left: usize,
        genus: &mut Vec<usize>,
        blocks: &[PartitionBlock],
        orders: &[usize],
        out: &mut Vec<PartitionTerm>,
    ) {
        if idx + 1 == genus.len() {
            genus[idx] = left;
            if orders.iter().zip(genus.iter()).all(|(&k, &h)| k + h > 0) {
                let mut bl = blocks.to_vec();
                for (b, &h) in bl.iter_mut().zip(genus.iter()) {
                    b.genus = h;
                }
                out.push(PartitionTerm { blocks: bl });
            }
            return;
        }
        for g in 0..=left {
            genus[idx] = g;
            rec(idx + 1, left - g, genus, blocks, orders, out);
        }
    }
    rec(0, spare, &mut genus, blocks, &orders, out);
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_external_no_slots_has_one_config() {
        let terms = enumerate_configs(1, &[], 0);
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].blocks.len(), 1);
        assert_eq!(terms[0].blocks[0].exts, vec![0]);
        assert!(terms[0].blocks[0].slots.is_empty());
        assert_eq!(terms[0].blocks[0].genus, 0);
    }

    #[test]
    fn single_external_one_slot_planar() {
        // Budget 1: the slot cannot be used (the pinned block would exceed
        // the budget; an anchored block would leave a (0,0) pinned block).
        let terms = enumerate_configs(1, &[7], 0);
        assert_eq!(terms.len(), 1);
        assert_eq!(terms[0].blocks[0].exts, vec![0]);
        assert!(terms[0].blocks[0].slots.is_empty());
    }

    #[test]
    fn two_externals_one_slot_budget_two() {
        // Either both externals sit in the pinned block, or one of them
        // moves to a block anchored on the slot (two choices).
        let terms = enumerate_configs(2, &[4], 0);
        assert_eq!(terms.len(), 3);
        let joint = terms
            .iter()
            .filter(|t| t.blocks.len() == 1 && t.blocks[0].exts == vec![0, 1])
            .count();
        assert_eq!(joint, 1);
        let split = terms.iter().filter(|t| t.blocks.len() == 2).count();
        assert_eq!(split, 2);
        for t in &terms {
            assert_eq!(t.budget(), 2);
        }
    }

    #[test]
    fn genus_distribution_with_no_externals() {
        // Budget 2, one slot: pinned alone at genus 2; pinned with the slot
        // at genus 1; pinned + anchored block sharing genus 1 + 1.
        let terms = enumerate_configs(0, &[3], 2);
        assert_eq!(terms.len(), 3);
        assert!(terms.iter().any(|t| t.blocks.len() == 1
            && t.blocks[0].slots.is_empty()
            && t.blocks[0].genus == 2));
        assert!(terms.iter().any(|t| t.blocks.len() == 1
            && t.blocks[0].slots == vec![3]
            && t.blocks[0].genus == 1));
        assert!(terms.iter().any(|t| t.blocks.len() == 2
            && t.blocks[0].genus == 1
            && t.blocks[1].genus == 1));
    }

    #[test]
    fn budget_invariant_holds_everywhere() {
        for n_ext in 0..3 {
            for extra in 0..3 {
                for pool in [vec![], vec![5], vec![5, 9]] {
                    for t in enumerate_configs(n_ext, &pool, extra) {
                        assert_eq!(t.budget(), n_ext + extra, "term {t:?}");
                        for (i, b) in t.blocks.iter().enumerate() {
                            assert!(i == 0 || !b.slots.is_empty());
                            assert!(b.order(i == 0) + b.genus > 0);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn no_duplicate_configs() {
        let terms = enumerate_configs(2, &[5, 9], 2);
        for (i, a) in terms.iter().enumerate() {
            for b in terms.iter().skip(i + 1) {
                assert_ne!(a, b, "duplicate configuration");
            }
        }
    }

    #[test]
    fn externals_fully_covered_and_slots_disjoint() {
        for t in enumerate_configs(3, &[2, 6], 1) {
            let mut exts: Vec<usize> = t.blocks.iter().flat_map(|b| b.exts.clone()).collect();
            exts.sort_unstable();
            assert_eq!(exts, vec![0, 1, 2]);
            let mut slots: Vec<usize> = t.blocks.iter().flat_map(|b| b.slots.clone()).collect();
            let n = slots.len();
            slots.sort_unstable();
            slots.dedup();
            assert_eq!(slots.len(), n, "slot used twice");
        }
    }
}
