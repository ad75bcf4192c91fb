//! Line-oriented contract text format.
//!
//! ```text
//! .machine <ParticipantId>
//! .initial <state>
//! <from> <subject> <partner> (!|?) <label> <to>
//! .end
//! ```
//!
//! `#` starts a comment running to the end of the line; blank lines are
//! ignored. A global contract is a sequence of machine blocks.

use std::collections::BTreeMap;
use std::fmt;

use crate::error::{Error, Result, ValidationError};
use crate::model::{is_state_name, Cfsm, CfsmBuilder, Direction, GlobalContract};

/// Parses a file holding exactly one machine block.
pub fn parse_cfsm(text: &str) -> Result<Cfsm> {
    let mut blocks = parse_blocks(text)?;
    match blocks.len() {
        1 => Ok(blocks.remove(0).1),
        0 => Err(Error::syntax(1, "no `.machine` block found")),
        _ => Err(Error::syntax(
            blocks[1].0,
            "expected a single machine, found another `.machine` block",
        )),
    }
}

pub fn parse_global_contract(text: &str) -> Result<GlobalContract> {
    let mut machines = BTreeMap::new();
    for (line, m) in parse_blocks(text)? {
        if machines.contains_key(m.name()) {
            return Err(Error::Validation {
                line: Some(line),
                source: ValidationError::DuplicateMachine(m.name().clone()),
            });
        }
        machines.insert(m.name().clone(), m);
    }
    GlobalContract::from_map(machines)
}

struct OpenBlock {
    start: usize,
    name: String,
    builder: Option<CfsmBuilder>,
    lines: Vec<usize>,
}

fn parse_blocks(text: &str) -> Result<Vec<(usize, Cfsm)>> {
    let mut out = Vec::new();
    let mut open: Option<OpenBlock> = None;
    for (idx, raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens[0] {
            ".machine" => {
                if open.is_some() {
                    return Err(Error::syntax(lineno, "`.machine` inside an unterminated block"));
                }
                let [_, name] = tokens[..] else {
                    return Err(Error::syntax(lineno, "expected `.machine <name>`"));
                };
                open = Some(OpenBlock {
                    start: lineno,
                    name: name.to_owned(),
                    builder: None,
                    lines: Vec::new(),
                });
            }
            ".initial" => {
                let block = open
                    .as_mut()
                    .ok_or_else(|| Error::syntax(lineno, "`.initial` outside a machine block"))?;
                if block.builder.is_some() {
                    return Err(Error::syntax(lineno, "duplicate `.initial`"));
                }
                let [_, state] = tokens[..] else {
                    return Err(Error::syntax(lineno, "expected `.initial <state>`"));
                };
                if !is_state_name(state) {
                    return Err(Error::syntax(lineno, format!("invalid state name `{state}`")));
                }
                block.builder = Some(CfsmBuilder::new(&block.name, state));
            }
            ".end" => {
                let block = open
                    .take()
                    .ok_or_else(|| Error::syntax(lineno, "`.end` outside a machine block"))?;
                if tokens.len() != 1 {
                    return Err(Error::syntax(lineno, "unexpected tokens after `.end`"));
                }
                let builder = block
                    .builder
                    .ok_or_else(|| Error::syntax(lineno, "machine block has no `.initial`"))?;
                let m = builder.build_with_lines(&block.lines).map_err(|e| match e {
                    Error::Validation { line: None, source } => Error::Validation {
                        line: Some(block.start),
                        source,
                    },
                    other => other,
                })?;
                out.push((block.start, m));
            }
            t if t.starts_with('.') => {
                return Err(Error::syntax(lineno, format!("unknown directive `{t}`")));
            }
            _ => {
                let block = open
                    .as_mut()
                    .ok_or_else(|| Error::syntax(lineno, "transition outside a machine block"))?;
                let builder = block
                    .builder
                    .as_mut()
                    .ok_or_else(|| Error::syntax(lineno, "transition before `.initial`"))?;
                let [from, subject, partner, dir, label, to] = tokens[..] else {
                    return Err(Error::syntax(
                        lineno,
                        "expected `<from> <subject> <partner> (!|?) <label> <to>`",
                    ));
                };
                let direction = match dir {
                    "!" => Direction::Send,
                    "?" => Direction::Recv,
                    other => {
                        return Err(Error::syntax(
                            lineno,
                            format!("expected `!` or `?`, found `{other}`"),
                        ))
                    }
                };
                for state in [from, to] {
                    if !is_state_name(state) {
                        return Err(Error::syntax(lineno, format!("invalid state name `{state}`")));
                    }
                }
                builder.push(from, subject, partner, direction, label, to);
                block.lines.push(lineno);
            }
        }
    }
    if let Some(block) = open {
        return Err(Error::syntax(
            block.start,
            format!("machine `{}` is missing `.end`", block.name),
        ));
    }
    Ok(out)
}

impl fmt::Display for Cfsm {
    /// Writes the machine in the contract text format, keeping its own state
    /// names and transition order.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, ".machine {}", self.name())?;
        writeln!(f, ".initial {}", self.state_name(self.initial()))?;
        for t in self.transitions() {
            writeln!(
                f,
                "{} {} {}",
                self.state_name(t.from),
                t.action,
                self.state_name(t.to)
            )?;
        }
        writeln!(f, ".end")
    }
}

impl fmt::Display for GlobalContract {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, m) in self.machines().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{m}")?;
        }
        Ok(())
    }
}
