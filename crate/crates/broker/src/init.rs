//! Two-phase session initiation with the assigned middlewares.

use std::fmt;
use std::time::Duration;

use futures::future::join_all;
use search_wire::{
    call, InitChannelRequest, Message, RoleUris, StartChannelRequest, TcpUri, WireError,
};
use tokio::net::TcpStream;
use uuid::Uuid;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitFailureKind {
    /// Connect, write or reply failed or timed out.
    Unreachable,
    /// The middleware answered `accept: false`.
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InitFailure {
    pub role: String,
    pub kind: InitFailureKind,
    pub detail: String,
}

impl fmt::Display for InitFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({:?}): {}", self.role, self.kind, self.detail)
    }
}

/// Everything the broker needs to open a session.
#[derive(Debug, Clone)]
pub struct InitPlan {
    pub session_id: Uuid,
    pub global_contract: String,
    /// Assigned provider middleware for every non-initiator role.
    pub providers: Vec<(String, TcpUri)>,
    pub initiator_role: String,
    pub initiator_uri: TcpUri,
}

impl InitPlan {
    /// Role to URI for every participant, the initiator included.
    pub fn participants(&self) -> RoleUris {
        let mut map: RoleUris = self
            .providers
            .iter()
            .map(|(r, u)| (r.clone(), u.to_string()))
            .collect();
        map.insert(self.initiator_role.clone(), self.initiator_uri.to_string());
        map
    }
}

/// Sends one request on a fresh connection and waits for the reply, all
/// within `timeout`.
pub async fn request(uri: &TcpUri, msg: &Message, timeout: Duration) -> Result<Message, WireError> {
    let exchange = async {
        let mut stream = TcpStream::connect(uri.authority()).await?;
        stream.set_nodelay(true)?;
        call(&mut stream, msg).await
    };
    tokio::time::timeout(timeout, exchange).await.unwrap_or_else(|_| {
        Err(WireError::Io(std::io::Error::new(
            std::io::ErrorKind::TimedOut,
            format!("no reply from {uri} within {timeout:?}"),
        )))
    })
}

/// Phase 1 sends InitChannel to every provider and requires unanimous
/// acceptance. Only then phase 2 sends StartChannel to the providers and the
/// initiator. On any phase-1 failure nothing is started and every failing
/// role is reported.
pub async fn two_phase_init(plan: &InitPlan, timeout: Duration) -> Result<(), Vec<InitFailure>> {
    let participants = plan.participants();
    let phase1 = plan.providers.iter().map(|(role, uri)| {
        let msg = Message::from(InitChannelRequest {
            session_id: plan.session_id,
            role: role.clone(),
            global_contract: plan.global_contract.clone(),
            participants: participants.clone(),
        });
        async move {
            let outcome = match request(uri, &msg, timeout).await {
                Ok(Message::InitChannelResponse(r)) if r.accept => Ok(()),
                Ok(Message::InitChannelResponse(_)) => Err((InitFailureKind::Rejected, "accept=false".to_owned())),
                Ok(other) => Err((InitFailureKind::Rejected, format!("unexpected reply {}", other.message_type()))),
                Err(e) => Err((InitFailureKind::Unreachable, e.to_string())),
            };
            tracing::info!(
                session_id = %plan.session_id,
                role = %role,
                uri = %uri,
                accepted = outcome.is_ok(),
                "init channel"
            );
            outcome.map_err(|(kind, detail)| InitFailure { role: role.clone(), kind, detail })
        }
    });
    let failures: Vec<InitFailure> = join_all(phase1).await.into_iter().filter_map(Result::err).collect();
    if !failures.is_empty() {
        return Err(failures);
    }

    let targets = plan
        .providers
        .iter()
        .map(|(r, u)| (r.as_str(), u))
        .chain(std::iter::once((plan.initiator_role.as_str(), &plan.initiator_uri)));
    let start = Message::from(StartChannelRequest { session_id: plan.session_id });
    let phase2 = targets.map(|(role, uri)| {
        let start = &start;
        async move {
            let acked = matches!(
                request(uri, start, timeout).await,
                Ok(Message::StartChannelResponse(r)) if r.ack
            );
            if acked {
                tracing::info!(session_id = %plan.session_id, role, uri = %uri, "start channel acknowledged");
            } else {
                tracing::warn!(session_id = %plan.session_id, role, uri = %uri, "start channel not acknowledged");
            }
        }
    });
    join_all(phase2).await;
    Ok(())
}
