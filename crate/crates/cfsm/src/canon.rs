//! Canonical text form and content hash of a machine.
//!
//! States are renamed `s0..sn` in breadth-first order from the initial
//! state. The outgoing transitions of each dequeued state are explored in
//! order of `(direction symbol, partner, label, target)`, where targets that
//! already carry a canonical number sort by that number ahead of fresh ones.
//! Fresh targets that tie on the label are ordered by a structural colour;
//! remaining ties are resolved by trying each order and keeping the
//! lexicographically smallest text. Unreachable states are dropped and
//! reported.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;

use sha2::{Digest, Sha256};

use crate::model::{Cfsm, Direction, StateId, Transition};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CanonicalForm {
    pub text: String,
    /// Original names of states removed because they are unreachable.
    pub dropped_states: Vec<String>,
}

impl CanonicalForm {
    pub fn had_unreachable_states(&self) -> bool {
        !self.dropped_states.is_empty()
    }
}

/// SHA-256 of a machine's canonical text, as 64 lowercase hex digits.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ContractHash(String);

impl ContractHash {
    pub fn of_text(text: &str) -> Self {
        let digest = Sha256::digest(text.as_bytes());
        ContractHash(format!("{digest:x}"))
    }

    /// Accepts an existing 64-char lowercase hex digest.
    pub fn from_hex(hex: &str) -> Option<Self> {
        let ok = hex.len() == 64 && hex.bytes().all(|b| matches!(b, b'0'..=b'9' | b'a'..=b'f'));
        ok.then(|| ContractHash(hex.to_owned()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for ContractHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

pub fn contract_hash(m: &Cfsm) -> ContractHash {
    ContractHash::of_text(&canonicalize(m).text)
}

/// Upper bound on complete numberings compared when breaking ties between
/// structurally identical successors. Past it, ties fall back to the
/// original state names.
const TIE_LEAVES: usize = 4096;

pub fn canonicalize(m: &Cfsm) -> CanonicalForm {
    let colour = structural_colours(m);
    let mut root = Numbering::new(m);
    let mut leaves = 0;
    let text = best_text(m, &colour, &mut root, &mut leaves);

    let dropped_states = m
        .states()
        .filter(|s| root.number[s.index()].is_none())
        .map(|s| m.state_name(s).to_owned())
        .collect();
    CanonicalForm {
        text,
        dropped_states,
    }
}

/// Partial breadth-first numbering; `order[pos..]` is the pending queue.
#[derive(Clone)]
struct Numbering {
    number: Vec<Option<usize>>,
    order: Vec<StateId>,
    pos: usize,
}

impl Numbering {
    fn new(m: &Cfsm) -> Self {
        let mut number = vec![None; m.state_count()];
        number[m.initial().index()] = Some(0);
        Numbering {
            number,
            order: vec![m.initial()],
            pos: 0,
        }
    }

    fn assign(&mut self, s: StateId) {
        self.number[s.index()] = Some(self.order.len());
        self.order.push(s);
    }
}

/// Runs the numbering to completion, exploring every resolution of ties
/// (up to [`TIE_LEAVES`]) and keeping the smallest text.
fn best_text(m: &Cfsm, colour: &[usize], num: &mut Numbering, leaves: &mut usize) -> String {
    match advance(m, colour, num) {
        None => {
            *leaves += 1;
            render(m, &num.number)
        }
        Some(candidates) => {
            let mut best: Option<(String, Numbering)> = None;
            for (i, c) in candidates.into_iter().enumerate() {
                if i > 0 && *leaves >= TIE_LEAVES {
                    break;
                }
                let mut branch = num.clone();
                branch.assign(c);
                let text = best_text(m, colour, &mut branch, leaves);
                if best.as_ref().map_or(true, |(b, _)| text < *b) {
                    best = Some((text, branch));
                }
            }
            let (text, branch) = best.expect("at least one candidate");
            *num = branch;
            text
        }
    }
}

/// Numbers states deterministically until two or more fresh successors tie;
/// returns the tied candidates (ordered by original name) in that case.
fn advance(m: &Cfsm, colour: &[usize], num: &mut Numbering) -> Option<Vec<StateId>> {
    while num.pos < num.order.len() {
        let s = num.order[num.pos];
        let mut out: Vec<&Transition> = m.outgoing(s).collect();
        out.sort_by(|a, b| {
            label_key(a)
                .cmp(&label_key(b))
                .then_with(|| match (num.number[a.to.index()], num.number[b.to.index()]) {
                    (Some(x), Some(y)) => x.cmp(&y),
                    (Some(_), None) => Ordering::Less,
                    (None, Some(_)) => Ordering::Greater,
                    (None, None) => colour[a.to.index()]
                        .cmp(&colour[b.to.index()])
                        .then_with(|| name_key(m.state_name(a.to)).cmp(&name_key(m.state_name(b.to)))),
                })
        });
        for (i, t) in out.iter().enumerate() {
            if num.number[t.to.index()].is_some() {
                continue;
            }
            let mut tied: Vec<StateId> = out[i..]
                .iter()
                .take_while(|u| {
                    label_key(u) == label_key(t) && colour[u.to.index()] == colour[t.to.index()]
                })
                .map(|u| u.to)
                .filter(|&u| num.number[u.index()].is_none())
                .collect();
            tied.dedup();
            if tied.len() > 1 {
                return Some(tied);
            }
            num.assign(t.to);
        }
        num.pos += 1;
    }
    None
}

fn render(m: &Cfsm, number: &[Option<usize>]) -> String {
    let mut lines: Vec<(usize, Direction, &str, &str, usize)> = m
        .transitions()
        .iter()
        .filter_map(|t| {
            let from = number[t.from.index()]?;
            let to = number[t.to.index()].expect("successor of a reachable state is reachable");
            Some((
                from,
                t.action.direction,
                t.action.partner.as_str(),
                t.action.label.as_str(),
                to,
            ))
        })
        .collect();
    lines.sort();

    let mut text = format!(".machine {}\n.initial s0\n", m.name());
    for (from, dir, partner, label, to) in lines {
        text.push_str(&format!(
            "s{from} {} {partner} {} {label} s{to}\n",
            m.name(),
            dir.symbol()
        ));
    }
    text.push_str(".end\n");
    text
}

fn label_key(t: &Transition) -> (Direction, &str, &str) {
    (
        t.action.direction,
        t.action.partner.as_str(),
        t.action.label.as_str(),
    )
}

fn name_key(name: &str) -> (usize, &str) {
    (name.len(), name)
}

/// Name-independent colouring of the reachable part: states share a colour
/// only if iterated refinement over labelled successor and predecessor
/// colours cannot tell them apart.
fn structural_colours(m: &Cfsm) -> Vec<usize> {
    let n = m.state_count();
    let mut reachable = vec![false; n];
    for s in m.reachable() {
        reachable[s.index()] = true;
    }
    let edges: Vec<&Transition> = m
        .transitions()
        .iter()
        .filter(|t| reachable[t.from.index()])
        .collect();
    let mut colour = vec![0usize; n];
    let mut classes = 1;
    loop {
        type Sig<'a> = (usize, Vec<(Direction, &'a str, &'a str, usize)>, Vec<(Direction, &'a str, &'a str, usize)>);
        let mut signatures: Vec<Sig<'_>> = (0..n).map(|s| (colour[s], Vec::new(), Vec::new())).collect();
        for t in &edges {
            let (d, p, l) = label_key(t);
            signatures[t.from.index()].1.push((d, p, l, colour[t.to.index()]));
            signatures[t.to.index()].2.push((d, p, l, colour[t.from.index()]));
        }
        for sig in &mut signatures {
            sig.1.sort();
            sig.2.sort();
        }
        let ids: BTreeMap<&Sig<'_>, usize> = {
            let mut distinct: Vec<&Sig<'_>> = signatures.iter().collect();
            distinct.sort();
            distinct.dedup();
            distinct.into_iter().enumerate().map(|(i, sig)| (sig, i)).collect()
        };
        let next: Vec<usize> = signatures.iter().map(|sig| ids[sig]).collect();
        let count = ids.len();
        colour = next;
        if count == classes {
            return colour;
        }
        classes = count;
    }
}
