//! `contract check|hash|canon`: contract tooling over files.

use cfsm::{canonicalize, check_safety, contract_hash, parse_cfsm, parse_global_contract, Cfsm, SafetyVerdict};

/// What a contract subcommand prints and how it exits.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub stdout: String,
    pub code: i32,
}

impl Outcome {
    fn ok(stdout: String) -> Self {
        Outcome { stdout, code: 0 }
    }
}

/// Safety of a global contract: "ok", or the counterexample with exit 1.
pub fn check(text: &str) -> Result<Outcome, cfsm::Error> {
    let contract = parse_global_contract(text)?;
    Ok(match check_safety(&contract)? {
        SafetyVerdict::Ok { .. } => Outcome::ok("ok\n".into()),
        SafetyVerdict::Violation(trace) => Outcome { stdout: format!("{trace}\n"), code: 1 },
    })
}

/// Machines of a file: the single machine of a local contract, or every
/// machine of a global one.
fn machines(text: &str) -> Result<Vec<Cfsm>, cfsm::Error> {
    match parse_cfsm(text) {
        Ok(m) => Ok(vec![m]),
        Err(single) => match parse_global_contract(text) {
            Ok(g) => Ok(g.machines().cloned().collect()),
            Err(_) => Err(single),
        },
    }
}

/// One hash line per machine; the role name prefixes it when there are several.
pub fn hash(text: &str) -> Result<Outcome, cfsm::Error> {
    let machines = machines(text)?;
    let single = machines.len() == 1;
    let mut out = String::new();
    for m in &machines {
        if single {
            out.push_str(&format!("{}\n", contract_hash(m)));
        } else {
            out.push_str(&format!("{} {}\n", m.name(), contract_hash(m)));
        }
    }
    Ok(Outcome::ok(out))
}

/// Canonical text of every machine, in file order.
pub fn canon(text: &str) -> Result<Outcome, cfsm::Error> {
    let mut out = String::new();
    for m in machines(text)? {
        let form = canonicalize(&m);
        for dropped in &form.dropped_states {
            tracing::warn!(machine = %m.name(), state = %dropped, "unreachable state dropped");
        }
        out.push_str(&form.text);
        if !form.text.ends_with('\n') {
            out.push('\n');
        }
    }
    Ok(Outcome::ok(out))
}
