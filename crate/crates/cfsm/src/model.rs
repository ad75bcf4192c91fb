//! Core data model: identifiers, actions, machines and global contracts.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result, ValidationError};

fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) if c.is_ascii_alphabetic() || c == '_' => {}
        _ => return false,
    }
    chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

pub(crate) fn is_state_name(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')
}

macro_rules! identifier {
    ($(#[$meta:meta])* $name:ident) => {
        $(#[$meta])*
        #[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
        pub struct $name(String);

        impl $name {
            pub fn new(name: impl Into<String>) -> Result<Self, ValidationError> {
                let name = name.into();
                if is_identifier(&name) {
                    Ok(Self(name))
                } else {
                    Err(ValidationError::InvalidIdentifier(name))
                }
            }

            pub fn as_str(&self) -> &str {
                &self.0
            }
        }

        impl fmt::Display for $name {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(&self.0)
            }
        }

        impl FromStr for $name {
            type Err = ValidationError;

            fn from_str(s: &str) -> Result<Self, ValidationError> {
                Self::new(s)
            }
        }

        impl AsRef<str> for $name {
            fn as_ref(&self) -> &str {
                &self.0
            }
        }

        impl PartialEq<str> for $name {
            fn eq(&self, other: &str) -> bool {
                self.0 == other
            }
        }

        impl PartialEq<&str> for $name {
            fn eq(&self, other: &&str) -> bool {
                self.0 == *other
            }
        }
    };
}

identifier!(
    /// Name of a participant role, e.g. `ClientApp`.
    ParticipantId
);
identifier!(
    /// Message type name, e.g. `PurchaseRequest`.
    MessageLabel
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Direction {
    Send,
    Recv,
}

impl Direction {
    pub fn symbol(self) -> char {
        match self {
            Direction::Send => '!',
            Direction::Recv => '?',
        }
    }

    pub fn dual(self) -> Direction {
        match self {
            Direction::Send => Direction::Recv,
            Direction::Recv => Direction::Send,
        }
    }
}

/// A communication action `subject partner (!|?) label`.
///
/// For a send the subject sends `label` to `partner`; for a receive the
/// subject receives `label` from `partner`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Action {
    pub subject: ParticipantId,
    pub partner: ParticipantId,
    pub direction: Direction,
    pub label: MessageLabel,
}

impl Action {
    pub fn new(
        subject: ParticipantId,
        partner: ParticipantId,
        direction: Direction,
        label: MessageLabel,
    ) -> Result<Self, ValidationError> {
        let action = Action {
            subject,
            partner,
            direction,
            label,
        };
        if action.subject == action.partner {
            return Err(ValidationError::SelfCommunication(action));
        }
        Ok(action)
    }

    pub fn send(subject: &str, partner: &str, label: &str) -> Result<Self, ValidationError> {
        Self::parse_parts(subject, partner, Direction::Send, label)
    }

    pub fn recv(subject: &str, partner: &str, label: &str) -> Result<Self, ValidationError> {
        Self::parse_parts(subject, partner, Direction::Recv, label)
    }

    fn parse_parts(
        subject: &str,
        partner: &str,
        direction: Direction,
        label: &str,
    ) -> Result<Self, ValidationError> {
        Self::new(
            subject.parse()?,
            partner.parse()?,
            direction,
            label.parse()?,
        )
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} {} {} {}",
            self.subject,
            self.partner,
            self.direction.symbol(),
            self.label
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct StateId(pub(crate) usize);

impl StateId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Transition {
    pub from: StateId,
    pub action: Action,
    pub to: StateId,
}

/// A communicating finite state machine.
///
/// Immutable once built; construct through [`CfsmBuilder`] or
/// [`crate::parse_cfsm`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfsm {
    name: ParticipantId,
    states: Vec<String>,
    initial: StateId,
    transitions: Vec<Transition>,
}

impl Cfsm {
    pub fn builder(name: &str, initial: &str) -> CfsmBuilder {
        CfsmBuilder::new(name, initial)
    }

    pub fn name(&self) -> &ParticipantId {
        &self.name
    }

    pub fn initial(&self) -> StateId {
        self.initial
    }

    pub fn state_count(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> impl Iterator<Item = StateId> + '_ {
        (0..self.states.len()).map(StateId)
    }

    pub fn state_name(&self, state: StateId) -> &str {
        &self.states[state.0]
    }

    pub fn state_by_name(&self, name: &str) -> Option<StateId> {
        self.states.iter().position(|s| s == name).map(StateId)
    }

    pub fn transitions(&self) -> &[Transition] {
        &self.transitions
    }

    pub fn outgoing(&self, state: StateId) -> impl Iterator<Item = &Transition> + '_ {
        self.transitions.iter().filter(move |t| t.from == state)
    }

    /// A state with no outgoing transitions.
    pub fn is_terminal(&self, state: StateId) -> bool {
        self.outgoing(state).next().is_none()
    }

    /// Every participant this machine communicates with.
    pub fn partners(&self) -> BTreeSet<&ParticipantId> {
        self.transitions.iter().map(|t| &t.action.partner).collect()
    }

    pub fn labels(&self) -> BTreeSet<&MessageLabel> {
        self.transitions.iter().map(|t| &t.action.label).collect()
    }

    /// Deterministic successor of `state` under `action`.
    ///
    /// `Ok(None)` when no transition matches; [`Error::AmbiguousStep`] when
    /// more than one does.
    pub fn step(&self, state: StateId, action: &Action) -> Result<Option<StateId>> {
        let mut targets = self
            .outgoing(state)
            .filter(|t| &t.action == action)
            .map(|t| t.to);
        let first = targets.next();
        if targets.next().is_some() {
            return Err(Error::AmbiguousStep {
                state: self.state_name(state).to_owned(),
                action: action.clone(),
            });
        }
        Ok(first)
    }

    /// Replaces the machine's own name (and the subject of every action).
    pub fn rename_self(&self, new_name: &ParticipantId) -> Result<Cfsm> {
        if self.transitions.iter().any(|t| &t.action.partner == new_name) {
            return Err(Error::NameClash(new_name.clone()));
        }
        let transitions = self
            .transitions
            .iter()
            .map(|t| Transition {
                from: t.from,
                action: Action {
                    subject: new_name.clone(),
                    ..t.action.clone()
                },
                to: t.to,
            })
            .collect();
        Ok(Cfsm {
            name: new_name.clone(),
            states: self.states.clone(),
            initial: self.initial,
            transitions,
        })
    }

    /// States reachable from the initial state, in index order.
    pub fn reachable(&self) -> Vec<StateId> {
        let mut seen = vec![false; self.states.len()];
        let mut stack = vec![self.initial];
        seen[self.initial.0] = true;
        while let Some(s) = stack.pop() {
            for t in self.outgoing(s) {
                if !seen[t.to.0] {
                    seen[t.to.0] = true;
                    stack.push(t.to);
                }
            }
        }
        self.states().filter(|s| seen[s.0]).collect()
    }
}

/// Incremental constructor for [`Cfsm`]; states are declared by use.
#[derive(Debug, Clone)]
pub struct CfsmBuilder {
    name: String,
    initial: String,
    extra_states: Vec<String>,
    transitions: Vec<(String, RawAction, String)>,
}

#[derive(Debug, Clone)]
struct RawAction {
    subject: String,
    partner: String,
    direction: Direction,
    label: String,
}

impl CfsmBuilder {
    pub fn new(name: &str, initial: &str) -> Self {
        CfsmBuilder {
            name: name.to_owned(),
            initial: initial.to_owned(),
            extra_states: Vec::new(),
            transitions: Vec::new(),
        }
    }

    /// Declares a state that may have no transitions.
    pub fn state(mut self, name: &str) -> Self {
        self.extra_states.push(name.to_owned());
        self
    }

    pub fn send(self, from: &str, partner: &str, label: &str, to: &str) -> Self {
        self.transition(from, partner, Direction::Send, label, to)
    }

    pub fn recv(self, from: &str, partner: &str, label: &str, to: &str) -> Self {
        self.transition(from, partner, Direction::Recv, label, to)
    }

    pub fn transition(
        mut self,
        from: &str,
        partner: &str,
        direction: Direction,
        label: &str,
        to: &str,
    ) -> Self {
        let subject = self.name.clone();
        self.push(from, &subject, partner, direction, label, to);
        self
    }

    pub(crate) fn push(
        &mut self,
        from: &str,
        subject: &str,
        partner: &str,
        direction: Direction,
        label: &str,
        to: &str,
    ) {
        self.transitions.push((
            from.to_owned(),
            RawAction {
                subject: subject.to_owned(),
                partner: partner.to_owned(),
                direction,
                label: label.to_owned(),
            },
            to.to_owned(),
        ));
    }

    /// Validates and builds the machine. Errors carry the 0-based index of
    /// the offending transition in `line` when one is to blame.
    pub fn build(self) -> Result<Cfsm> {
        self.build_with_lines(&[])
    }

    pub(crate) fn build_with_lines(self, lines: &[usize]) -> Result<Cfsm> {
        let at = |i: usize| lines.get(i).copied();
        let name = ParticipantId::new(self.name)?;
        let mut states: Vec<String> = Vec::new();
        let mut index: HashMap<String, StateId> = HashMap::new();
        let mut intern = |s: &str| -> Result<StateId, ValidationError> {
            if !is_state_name(s) {
                return Err(ValidationError::InvalidStateName(s.to_owned()));
            }
            if let Some(&id) = index.get(s) {
                return Ok(id);
            }
            let id = StateId(states.len());
            states.push(s.to_owned());
            index.insert(s.to_owned(), id);
            Ok(id)
        };
        let initial = intern(&self.initial)?;
        for s in &self.extra_states {
            intern(s)?;
        }
        let mut transitions = Vec::with_capacity(self.transitions.len());
        let mut seen = HashSet::new();
        for (i, (from, raw, to)) in self.transitions.into_iter().enumerate() {
            let wrap = |source: ValidationError| Error::Validation {
                line: at(i),
                source,
            };
            let action = Action::new(
                raw.subject.parse().map_err(wrap)?,
                raw.partner.parse().map_err(wrap)?,
                raw.direction,
                raw.label.parse().map_err(wrap)?,
            )
            .map_err(wrap)?;
            if action.subject != name {
                return Err(wrap(ValidationError::SubjectMismatch {
                    expected: name.clone(),
                    found: action.subject,
                }));
            }
            let from_id = intern(&from).map_err(wrap)?;
            let to_id = intern(&to).map_err(wrap)?;
            let t = Transition {
                from: from_id,
                action,
                to: to_id,
            };
            if !seen.insert(t.clone()) {
                return Err(wrap(ValidationError::DuplicateTransition {
                    from,
                    action: t.action,
                    to,
                }));
            }
            transitions.push(t);
        }
        Ok(Cfsm {
            name,
            states,
            initial,
            transitions,
        })
    }
}

/// One machine per participant role.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GlobalContract {
    machines: BTreeMap<ParticipantId, Cfsm>,
}

impl GlobalContract {
    pub fn new(machines: impl IntoIterator<Item = Cfsm>) -> Result<Self> {
        let mut map = BTreeMap::new();
        for m in machines {
            if map.contains_key(m.name()) {
                return Err(ValidationError::DuplicateMachine(m.name().clone()).into());
            }
            map.insert(m.name().clone(), m);
        }
        Self::from_map(map)
    }

    pub fn from_map(machines: BTreeMap<ParticipantId, Cfsm>) -> Result<Self> {
        for (key, m) in &machines {
            if key != m.name() {
                return Err(ValidationError::RoleMismatch {
                    key: key.clone(),
                    name: m.name().clone(),
                }
                .into());
            }
            if let Some(partner) = m.partners().into_iter().find(|p| !machines.contains_key(*p)) {
                return Err(ValidationError::UnknownPartner {
                    machine: key.clone(),
                    partner: partner.clone(),
                }
                .into());
            }
        }
        if machines.len() < 2 {
            return Err(ValidationError::TooFewMachines(machines.len()).into());
        }
        Ok(GlobalContract { machines })
    }

    pub fn roles(&self) -> impl Iterator<Item = &ParticipantId> + '_ {
        self.machines.keys()
    }

    pub fn machine(&self, role: &str) -> Option<&Cfsm> {
        self.machines.iter().find(|(k, _)| k.as_str() == role).map(|(_, m)| m)
    }

    pub fn machines(&self) -> impl Iterator<Item = &Cfsm> + '_ {
        self.machines.values()
    }

    pub fn len(&self) -> usize {
        self.machines.len()
    }

    pub fn is_empty(&self) -> bool {
        self.machines.is_empty()
    }

    pub fn contains_role(&self, role: &str) -> bool {
        self.machine(role).is_some()
    }
}
