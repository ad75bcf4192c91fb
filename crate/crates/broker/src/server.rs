use std::sync::Arc;

use search_wire::{
    read_message, write_message, Message, ProtocolError, RegisterProviderResponse, WireError,
};
use tokio::net::{TcpListener, TcpStream};
use tokio_util::sync::CancellationToken;
use tokio_util::task::TaskTracker;

use crate::broker::Broker;

/// Accepts connections until `shutdown` fires, then waits for in-flight
/// requests to finish.
pub async fn serve(broker: Arc<Broker>, listener: TcpListener, shutdown: CancellationToken) {
    let tracker = TaskTracker::new();
    loop {
        let (stream, peer) = tokio::select! {
            accepted = listener.accept() => match accepted {
                Ok(pair) => pair,
                Err(e) => {
                    tracing::warn!(error = %e, "accept failed");
                    continue;
                }
            },
            _ = shutdown.cancelled() => break,
        };
        let broker = Arc::clone(&broker);
        let shutdown = shutdown.clone();
        tracker.spawn(async move {
            tokio::select! {
                result = handle_connection(&broker, stream) => {
                    if let Err(e) = result {
                        tracing::debug!(peer = %peer, error = %e, "connection ended with error");
                    }
                }
                _ = shutdown.cancelled() => {}
            }
        });
    }
    tracker.close();
    tracker.wait().await;
}

async fn handle_connection(broker: &Broker, mut stream: TcpStream) -> Result<(), WireError> {
    stream.set_nodelay(true)?;
    loop {
        let msg = match read_message(&mut stream).await {
            Ok(Some(msg)) => msg,
            Ok(None) => return Ok(()),
            Err(WireError::Io(e)) => return Err(WireError::Io(e)),
            Err(e) => {
                let reply = ProtocolError::new(e.code(), e.to_string());
                write_message(&mut stream, &reply.into()).await?;
                return Err(e);
            }
        };
        let reply: Message = match msg {
            Message::RegisterProviderRequest(req) => match broker.register_provider(&req.contract, &req.uri) {
                Ok(record) => RegisterProviderResponse::Registered { provider_id: record.provider_id }.into(),
                Err(e) => {
                    tracing::warn!(uri = %req.uri, error = %e, "provider registration refused");
                    RegisterProviderResponse::Failed {
                        error: search_wire::Failure { code: e.code().to_owned(), detail: e.to_string(), role: None },
                    }
                    .into()
                }
            },
            Message::BrokerChannelRequest(req) => broker.broker_channel_response(&req).await.into(),
            other => ProtocolError::new(
                "UnexpectedMessage",
                format!("the broker does not handle {}", other.message_type()),
            )
            .into(),
        };
        write_message(&mut stream, &reply).await?;
    }
}
