//! Strong bisimilarity of two machines by signature-based partition
//! refinement.
//!
//! Transition labels are `(direction, partner, label)`; the subject is left
//! out so that machines owned by different roles can be compared. Callers
//! that need role alignment rename first with [`Cfsm::rename_self`].

use std::collections::HashMap;

use crate::model::{Cfsm, Direction};

type LabelKey<'a> = (Direction, &'a str, &'a str);

/// Disjoint union of two machines as a labelled transition system over
/// interned labels.
struct Union {
    succ: Vec<Vec<(u32, usize)>>,
    offset: usize,
}

impl Union {
    fn new(a: &Cfsm, b: &Cfsm) -> Self {
        let mut labels: HashMap<LabelKey<'_>, u32> = HashMap::new();
        let offset = a.state_count();
        let mut succ = vec![Vec::new(); offset + b.state_count()];
        for (m, base) in [(a, 0), (b, offset)] {
            for t in m.transitions() {
                let key = (
                    t.action.direction,
                    t.action.partner.as_str(),
                    t.action.label.as_str(),
                );
                let next = labels.len() as u32;
                let id = *labels.entry(key).or_insert(next);
                succ[base + t.from.index()].push((id, base + t.to.index()));
            }
        }
        Union { succ, offset }
    }

    /// Coarsest stable partition; returns the block of every state.
    fn refine(&self) -> Vec<usize> {
        let n = self.succ.len();
        let mut block = vec![0usize; n];
        let mut count = 1;
        loop {
            let mut ids: HashMap<(usize, Vec<(u32, usize)>), usize> = HashMap::new();
            let mut next = Vec::with_capacity(n);
            for s in 0..n {
                let mut sig: Vec<(u32, usize)> =
                    self.succ[s].iter().map(|&(l, t)| (l, block[t])).collect();
                sig.sort_unstable();
                sig.dedup();
                let fresh = ids.len();
                next.push(*ids.entry((block[s], sig)).or_insert(fresh));
            }
            let new_count = ids.len();
            block = next;
            if new_count == count {
                return block;
            }
            count = new_count;
        }
    }
}

/// True iff the initial states of `a` and `b` are strongly bisimilar.
pub fn bisimilar(a: &Cfsm, b: &Cfsm) -> bool {
    let lts = Union::new(a, b);
    let block = lts.refine();
    block[a.initial().index()] == block[lts.offset + b.initial().index()]
}
