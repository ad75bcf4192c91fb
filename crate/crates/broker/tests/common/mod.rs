#![allow(dead_code)]

use std::collections::BTreeSet;
use std::sync::Arc;
use std::time::Duration;

use cfsm::{Cfsm, Direction, StateId};
use parking_lot::Mutex;
use search_broker::{Broker, BrokerConfig};
use search_wire::{
    read_message, write_message, InitChannelResponse, Message, StartChannelResponse, TcpUri,
};
use tokio::net::TcpListener;
use uuid::Uuid;

pub const PAYMENT: &str = include_str!("../../../../contracts/payment.gc");
pub const SELLER: &str = include_str!("../../../../contracts/seller.fsm");
pub const PPS: &str = include_str!("../../../../contracts/pps.fsm");

/// What a fake middleware does with an InitChannelRequest.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Behaviour {
    Accept,
    Reject,
    /// Reads the request and never answers.
    Hang,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Event {
    Init { at: String, session: Uuid, role: String, accepted: bool },
    Start { at: String, session: Uuid },
}

pub type EventLog = Arc<Mutex<Vec<Event>>>;

/// A scripted middleware that records every public-interface request in a
/// log shared with other fakes.
pub struct FakeMiddleware {
    pub name: String,
    pub uri: TcpUri,
    task: tokio::task::JoinHandle<()>,
}

impl FakeMiddleware {
    pub async fn spawn(name: &str, behaviour: Behaviour, delay: Duration, log: EventLog) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
        let uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
        let at = name.to_owned();
        let task = tokio::spawn(async move {
            loop {
                let Ok((mut stream, _)) = listener.accept().await else { return };
                let log = Arc::clone(&log);
                let at = at.clone();
                tokio::spawn(async move {
                    while let Ok(Some(msg)) = read_message(&mut stream).await {
                        tokio::time::sleep(delay).await;
                        let reply: Message = match msg {
                            Message::InitChannelRequest(req) => {
                                if behaviour == Behaviour::Hang {
                                    std::future::pending::<()>().await;
                                }
                                let accepted = behaviour == Behaviour::Accept;
                                log.lock().push(Event::Init {
                                    at: at.clone(),
                                    session: req.session_id,
                                    role: req.role,
                                    accepted,
                                });
                                InitChannelResponse { accept: accepted }.into()
                            }
                            Message::StartChannelRequest(req) => {
                                log.lock().push(Event::Start { at: at.clone(), session: req.session_id });
                                StartChannelResponse { ack: true }.into()
                            }
                            other => panic!("fake middleware got {other:?}"),
                        };
                        if write_message(&mut stream, &reply).await.is_err() {
                            return;
                        }
                    }
                });
            }
        });
        FakeMiddleware { name: name.to_owned(), uri, task }
    }
}

impl Drop for FakeMiddleware {
    fn drop(&mut self) {
        self.task.abort();
    }
}

/// A URI nothing listens on.
pub async fn dead_uri() -> TcpUri {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    TcpUri::from_socket_addr(listener.local_addr().unwrap())
}

pub fn broker() -> Arc<Broker> {
    Broker::open(BrokerConfig {
        init_timeout: Duration::from_millis(500),
        ..BrokerConfig::default()
    })
    .unwrap()
}

pub fn new_log() -> EventLog {
    Arc::new(Mutex::new(Vec::new()))
}

/// Strong bisimilarity by greatest fixed point over all state pairs,
/// comparing (direction, partner, label) and ignoring subjects.
pub fn naive_bisimilar(a: &Cfsm, b: &Cfsm) -> bool {
    type Label = (Direction, String, String);
    let edges = |m: &Cfsm, s: StateId| -> Vec<(Label, usize)> {
        m.outgoing(s)
            .map(|t| {
                (
                    (t.action.direction, t.action.partner.to_string(), t.action.label.to_string()),
                    t.to.index(),
                )
            })
            .collect()
    };
    let ea: Vec<_> = a.states().map(|s| edges(a, s)).collect();
    let eb: Vec<_> = b.states().map(|s| edges(b, s)).collect();
    let mut rel: BTreeSet<(usize, usize)> =
        (0..ea.len()).flat_map(|p| (0..eb.len()).map(move |q| (p, q))).collect();
    loop {
        let keep: BTreeSet<_> = rel
            .iter()
            .copied()
            .filter(|&(p, q)| {
                ea[p].iter().all(|(l, p2)| eb[q].iter().any(|(m, q2)| l == m && rel.contains(&(*p2, *q2))))
                    && eb[q].iter().all(|(m, q2)| ea[p].iter().any(|(l, p2)| l == m && rel.contains(&(*p2, *q2))))
            })
            .collect();
        if keep == rel {
            return rel.contains(&(a.initial().index(), b.initial().index()));
        }
        rel = keep;
    }
}
