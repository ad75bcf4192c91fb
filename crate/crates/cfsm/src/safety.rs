//! Exhaustive exploration of the synchronous product of a global contract.
//!
//! A send `A B ! x` in machine `A` fires together with a matching receive
//! `B A ? x` in machine `B`. A configuration is final when every machine is
//! in a terminal state. The contract is safe when no reachable non-final
//! configuration is stuck and a final configuration stays reachable from
//! every reachable configuration. This is a synchronous approximation of
//! buffered execution.

use std::collections::{HashMap, VecDeque};
use std::fmt;

use crate::error::{Error, Result};
use crate::model::{Cfsm, Direction, GlobalContract, MessageLabel, ParticipantId, StateId};

pub const DEFAULT_BUDGET: usize = 1_000_000;

/// One synchronised communication in the product.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sync {
    pub sender: ParticipantId,
    pub receiver: ParticipantId,
    pub label: MessageLabel,
}

impl fmt::Display for Sync {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} -> {}: {}", self.sender, self.receiver, self.label)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ViolationKind {
    /// Non-final configuration with no enabled synchronisation.
    Deadlock,
    /// No final configuration is reachable any more.
    NoTermination,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Counterexample {
    pub kind: ViolationKind,
    /// Synchronisations leading from the initial configuration to `stuck_at`.
    pub trace: Vec<Sync>,
    /// State name of each machine in the offending configuration.
    pub stuck_at: Vec<(ParticipantId, String)>,
}

impl fmt::Display for Counterexample {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let kind = match self.kind {
            ViolationKind::Deadlock => "deadlock",
            ViolationKind::NoTermination => "cannot terminate",
        };
        writeln!(f, "{kind} after {} step(s)", self.trace.len())?;
        for (i, s) in self.trace.iter().enumerate() {
            writeln!(f, "  {}. {s}", i + 1)?;
        }
        let config: Vec<String> = self.stuck_at.iter().map(|(p, s)| format!("{p}@{s}")).collect();
        write!(f, "  configuration: {}", config.join(" "))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SafetyVerdict {
    Ok { configurations: usize },
    Violation(Counterexample),
}

impl SafetyVerdict {
    pub fn is_ok(&self) -> bool {
        matches!(self, SafetyVerdict::Ok { .. })
    }
}

pub fn check_safety(g: &GlobalContract) -> Result<SafetyVerdict> {
    check_safety_with_budget(g, DEFAULT_BUDGET)
}

type Config = Vec<StateId>;

pub fn check_safety_with_budget(g: &GlobalContract, budget: usize) -> Result<SafetyVerdict> {
    let machines: Vec<&Cfsm> = g.machines().collect();
    let index: HashMap<&ParticipantId, usize> =
        machines.iter().enumerate().map(|(i, m)| (m.name(), i)).collect();

    let initial: Config = machines.iter().map(|m| m.initial()).collect();
    let mut ids: HashMap<Config, usize> = HashMap::new();
    let mut configs: Vec<Config> = Vec::new();
    // (predecessor id, synchronisation) for trace reconstruction
    let mut parent: Vec<Option<(usize, Sync)>> = Vec::new();
    let mut edges: Vec<Vec<usize>> = Vec::new();
    let mut queue = VecDeque::new();

    ids.insert(initial.clone(), 0);
    configs.push(initial);
    parent.push(None);
    queue.push_back(0);

    let is_final = |c: &Config| machines.iter().zip(c).all(|(m, &s)| m.is_terminal(s));

    while let Some(id) = queue.pop_front() {
        let config = configs[id].clone();
        let mut succ = Vec::new();
        for (i, m) in machines.iter().enumerate() {
            for send in m.outgoing(config[i]).filter(|t| t.action.direction == Direction::Send) {
                let j = index[&send.action.partner];
                for recv in machines[j].outgoing(config[j]).filter(|t| {
                    t.action.direction == Direction::Recv
                        && &t.action.partner == m.name()
                        && t.action.label == send.action.label
                }) {
                    let mut next = config.clone();
                    next[i] = send.to;
                    next[j] = recv.to;
                    let sync = Sync {
                        sender: m.name().clone(),
                        receiver: machines[j].name().clone(),
                        label: send.action.label.clone(),
                    };
                    succ.push((next, sync));
                }
            }
        }
        if succ.is_empty() && !is_final(&config) {
            return Ok(SafetyVerdict::Violation(counterexample(
                ViolationKind::Deadlock,
                id,
                &configs,
                &parent,
                &machines,
            )));
        }
        let mut out = Vec::with_capacity(succ.len());
        for (next, sync) in succ {
            let target = match ids.get(&next) {
                Some(&t) => t,
                None => {
                    if configs.len() >= budget {
                        return Err(Error::BudgetExceeded(budget));
                    }
                    let t = configs.len();
                    ids.insert(next.clone(), t);
                    configs.push(next);
                    parent.push(Some((id, sync)));
                    queue.push_back(t);
                    t
                }
            };
            out.push(target);
        }
        edges.push(out);
        debug_assert_eq!(edges.len(), id + 1);
    }

    // Backward reachability from final configurations.
    let mut reverse: Vec<Vec<usize>> = vec![Vec::new(); configs.len()];
    for (from, out) in edges.iter().enumerate() {
        for &to in out {
            reverse[to].push(from);
        }
    }
    let mut live = vec![false; configs.len()];
    let mut stack: Vec<usize> = (0..configs.len()).filter(|&c| is_final(&configs[c])).collect();
    for &c in &stack {
        live[c] = true;
    }
    while let Some(c) = stack.pop() {
        for &p in &reverse[c] {
            if !live[p] {
                live[p] = true;
                stack.push(p);
            }
        }
    }
    if let Some(bad) = (0..configs.len()).find(|&c| !live[c]) {
        return Ok(SafetyVerdict::Violation(counterexample(
            ViolationKind::NoTermination,
            bad,
            &configs,
            &parent,
            &machines,
        )));
    }
    Ok(SafetyVerdict::Ok {
        configurations: configs.len(),
    })
}

fn counterexample(
    kind: ViolationKind,
    at: usize,
    configs: &[Config],
    parent: &[Option<(usize, Sync)>],
    machines: &[&Cfsm],
) -> Counterexample {
    let mut trace = Vec::new();
    let mut cur = at;
    while let Some((prev, sync)) = &parent[cur] {
        trace.push(sync.clone());
        cur = *prev;
    }
    trace.reverse();
    let stuck_at = machines
        .iter()
        .zip(&configs[at])
        .map(|(m, &s)| (m.name().clone(), m.state_name(s).to_owned()))
        .collect();
    Counterexample {
        kind,
        trace,
        stuck_at,
    }
}
