#![allow(dead_code)]

use std::collections::{BTreeSet, HashSet};

use cfsm::{Cfsm, CfsmBuilder, Direction};
use proptest::prelude::*;
use rand::Rng;

pub const PARTNERS: [&str; 2] = ["B", "C"];
pub const LABELS: [&str; 3] = ["x", "y", "z"];

type Edge = (usize, usize, Direction, usize, usize);

fn build(name: &str, states: usize, edges: &[Edge]) -> Cfsm {
    let mut b = CfsmBuilder::new(name, "q0");
    for s in 1..states {
        b = b.state(&format!("q{s}"));
    }
    let unique: BTreeSet<Edge> = edges.iter().copied().collect();
    for (from, p, d, l, to) in unique {
        b = b.transition(&format!("q{from}"), PARTNERS[p], d, LABELS[l], &format!("q{to}"));
    }
    b.build().unwrap()
}

fn random_edges(rng: &mut impl Rng, states: usize, partners: usize, labels: usize) -> Vec<Edge> {
    let count = rng.gen_range(0..=states * 2);
    (0..count)
        .map(|_| {
            (
                rng.gen_range(0..states),
                rng.gen_range(0..partners),
                if rng.gen_bool(0.5) { Direction::Send } else { Direction::Recv },
                rng.gen_range(0..labels),
                rng.gen_range(0..states),
            )
        })
        .collect()
}

pub fn random_machine(rng: &mut impl Rng, max_states: usize) -> Cfsm {
    let states = rng.gen_range(1..=max_states);
    let edges = random_edges(rng, states, PARTNERS.len(), LABELS.len());
    build("A", states, &edges)
}

/// A machine bisimilar to `m` by construction: one state is cloned and a
/// random subset of edges into it is redirected to the clone.
pub fn bisimilar_variant(rng: &mut impl Rng, m: &Cfsm) -> Cfsm {
    let n = m.state_count();
    let victim = rng.gen_range(0..n);
    let clone = n;
    let mut edges: Vec<Edge> = Vec::new();
    for t in m.transitions() {
        let p = PARTNERS.iter().position(|p| t.action.partner == *p).unwrap();
        let l = LABELS.iter().position(|l| t.action.label == *l).unwrap();
        let mut to = t.to.index();
        if to == victim && rng.gen_bool(0.5) {
            to = clone;
        }
        edges.push((t.from.index(), p, t.action.direction, l, to));
        if t.from.index() == victim {
            edges.push((clone, p, t.action.direction, l, to));
        }
    }
    build("A", n + 1, &edges)
}

/// Flips the direction of one random transition, if there is one.
pub fn mutate(rng: &mut impl Rng, m: &Cfsm) -> Cfsm {
    let mut edges: Vec<Edge> = m
        .transitions()
        .iter()
        .map(|t| {
            let p = PARTNERS.iter().position(|p| t.action.partner == *p).unwrap();
            let l = LABELS.iter().position(|l| t.action.label == *l).unwrap();
            (t.from.index(), p, t.action.direction, l, t.to.index())
        })
        .collect();
    if !edges.is_empty() {
        let i = rng.gen_range(0..edges.len());
        edges[i].2 = edges[i].2.dual();
    }
    build("A", m.state_count(), &edges)
}

pub fn machine_strategy(max_states: usize) -> impl Strategy<Value = Cfsm> {
    (1..=max_states).prop_flat_map(|states| {
        let edge = (
            0..states,
            0..PARTNERS.len(),
            prop_oneof![Just(Direction::Send), Just(Direction::Recv)],
            0..LABELS.len(),
            0..states,
        );
        proptest::collection::vec(edge, 0..=states * 2)
            .prop_map(move |edges| build("A", states, &edges))
    })
}

type Label = (Direction, String, String);

fn successors(m: &Cfsm, s: usize) -> Vec<(Label, usize)> {
    m.transitions()
        .iter()
        .filter(|t| t.from.index() == s)
        .map(|t| {
            (
                (
                    t.action.direction,
                    t.action.partner.to_string(),
                    t.action.label.to_string(),
                ),
                t.to.index(),
            )
        })
        .collect()
}

/// Greatest fixed point of the bisimulation functional over `A x B`,
/// computed by repeatedly deleting pairs that violate the transfer
/// condition.
pub fn naive_bisimilar(a: &Cfsm, b: &Cfsm) -> bool {
    let sa: Vec<_> = (0..a.state_count()).map(|s| successors(a, s)).collect();
    let sb: Vec<_> = (0..b.state_count()).map(|s| successors(b, s)).collect();
    let mut rel: HashSet<(usize, usize)> = (0..a.state_count())
        .flat_map(|s| (0..b.state_count()).map(move |t| (s, t)))
        .collect();
    loop {
        let keep: HashSet<(usize, usize)> = rel
            .iter()
            .copied()
            .filter(|&(s, t)| {
                let forth = sa[s].iter().all(|(l, s2)| {
                    sb[t].iter().any(|(l2, t2)| l == l2 && rel.contains(&(*s2, *t2)))
                });
                let back = sb[t].iter().all(|(l, t2)| {
                    sa[s].iter().any(|(l2, s2)| l == l2 && rel.contains(&(*s2, *t2)))
                });
                forth && back
            })
            .collect();
        if keep.len() == rel.len() {
            break;
        }
        rel = keep;
    }
    rel.contains(&(a.initial().index(), b.initial().index()))
}

/// Restriction of `m` to the states reachable from its initial state.
pub fn reachable_restriction(m: &Cfsm) -> Cfsm {
    let reach: HashSet<usize> = m.reachable().into_iter().map(|s| s.index()).collect();
    let mut b = CfsmBuilder::new(m.name().as_str(), m.state_name(m.initial()));
    for t in m.transitions() {
        if reach.contains(&t.from.index()) {
            b = b.transition(
                m.state_name(t.from),
                t.action.partner.as_str(),
                t.action.direction,
                t.action.label.as_str(),
                m.state_name(t.to),
            );
        }
    }
    b.build().unwrap()
}

/// Brute-force labelled graph isomorphism mapping initial to initial.
pub fn isomorphic(a: &Cfsm, b: &Cfsm) -> bool {
    if a.name() != b.name()
        || a.state_count() != b.state_count()
        || a.transitions().len() != b.transitions().len()
    {
        return false;
    }
    let ea: HashSet<(usize, Label, usize)> = edge_set(a);
    let eb: HashSet<(usize, Label, usize)> = edge_set(b);
    let n = a.state_count();
    let mut map = vec![usize::MAX; n];
    let mut used = vec![false; n];
    map[a.initial().index()] = b.initial().index();
    used[b.initial().index()] = true;
    extend(0, &mut map, &mut used, &ea, &eb)
}

fn edge_set(m: &Cfsm) -> HashSet<(usize, Label, usize)> {
    (0..m.state_count())
        .flat_map(|s| successors(m, s).into_iter().map(move |(l, t)| (s, l, t)))
        .collect()
}

fn extend(
    next: usize,
    map: &mut Vec<usize>,
    used: &mut Vec<bool>,
    ea: &HashSet<(usize, Label, usize)>,
    eb: &HashSet<(usize, Label, usize)>,
) -> bool {
    let n = map.len();
    if next == n {
        return ea
            .iter()
            .all(|(s, l, t)| eb.contains(&(map[*s], l.clone(), map[*t])));
    }
    if map[next] != usize::MAX {
        return extend(next + 1, map, used, ea, eb);
    }
    for cand in 0..n {
        if used[cand] {
            continue;
        }
        map[next] = cand;
        used[cand] = true;
        if extend(next + 1, map, used, ea, eb) {
            return true;
        }
        used[cand] = false;
    }
    map[next] = usize::MAX;
    false
}
