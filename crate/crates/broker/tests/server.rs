mod common;

use common::*;
use search_broker::serve;
use search_wire::*;
use tokio::io::AsyncWriteExt;
use tokio::net::{TcpListener, TcpStream};
use tokio_util::sync::CancellationToken;

async fn start() -> (TcpUri, CancellationToken, tokio::task::JoinHandle<()>) {
    let listener = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let uri = TcpUri::from_socket_addr(listener.local_addr().unwrap());
    let shutdown = CancellationToken::new();
    let task = tokio::spawn(serve(broker(), listener, shutdown.clone()));
    (uri, shutdown, task)
}

#[tokio::test]
async fn register_and_broker_over_tcp() {
    let (uri, shutdown, task) = start().await;
    let log = new_log();
    let client = FakeMiddleware::spawn("client", Behaviour::Accept, std::time::Duration::ZERO, log.clone()).await;
    let seller = FakeMiddleware::spawn("seller", Behaviour::Accept, std::time::Duration::ZERO, log.clone()).await;
    let pps = FakeMiddleware::spawn("pps", Behaviour::Accept, std::time::Duration::ZERO, log.clone()).await;

    let mut conn = TcpStream::connect(uri.authority()).await.unwrap();
    let mut ids = Vec::new();
    for (contract, at) in [(SELLER, &seller.uri), (PPS, &pps.uri), (SELLER, &seller.uri)] {
        let reply = call(&mut conn, &RegisterProviderRequest { contract: contract.into(), uri: at.to_string() }.into())
            .await
            .unwrap();
        match reply {
            Message::RegisterProviderResponse(RegisterProviderResponse::Registered { provider_id }) => ids.push(provider_id),
            other => panic!("{other:?}"),
        }
    }
    assert_eq!(ids[0], ids[2]);

    let reply = call(&mut conn, &RegisterProviderRequest { contract: "junk".into(), uri: "tcp://h:1".into() }.into())
        .await
        .unwrap();
    assert!(matches!(
        reply,
        Message::RegisterProviderResponse(RegisterProviderResponse::Failed { error }) if error.code == "InvalidContract"
    ));

    let req = BrokerChannelRequest {
        global_contract: PAYMENT.into(),
        initiator_role: "ClientApp".into(),
        initiator_uri: client.uri.to_string(),
    };
    match call(&mut conn, &req.into()).await.unwrap() {
        Message::BrokerChannelResponse(BrokerChannelResponse::Assigned { assignments, .. }) => {
            assert_eq!(assignments["Srv"], seller.uri.to_string());
            assert_eq!(assignments["PPS"], pps.uri.to_string());
        }
        other => panic!("{other:?}"),
    }

    shutdown.cancel();
    task.await.unwrap();
}

#[tokio::test]
async fn failures_come_back_as_error_payloads() {
    let (uri, shutdown, task) = start().await;
    let mut conn = TcpStream::connect(uri.authority()).await.unwrap();
    let req = BrokerChannelRequest {
        global_contract: PAYMENT.into(),
        initiator_role: "ClientApp".into(),
        initiator_uri: "tcp://127.0.0.1:1".into(),
    };
    match call(&mut conn, &req.into()).await.unwrap() {
        Message::BrokerChannelResponse(BrokerChannelResponse::Failed { error }) => {
            assert_eq!(error.code, "NoCandidate");
            assert!(error.role.is_some());
        }
        other => panic!("{other:?}"),
    }
    shutdown.cancel();
    task.await.unwrap();
}

#[tokio::test]
async fn protocol_errors() {
    let (uri, shutdown, task) = start().await;
    let mut conn = TcpStream::connect(uri.authority()).await.unwrap();
    let reply = call(&mut conn, &StartChannelRequest { session_id: uuid::Uuid::nil() }.into()).await.unwrap();
    assert!(matches!(reply, Message::ProtocolError(e) if e.code == "UnexpectedMessage"));

    conn.write_all(&frame_bytes(br#"{"payload":{"v":1},"type":"Bogus"}"#).unwrap()).await.unwrap();
    let reply = read_message(&mut conn).await.unwrap();
    assert!(matches!(reply, Some(Message::ProtocolError(e)) if e.code == "UnknownType"));
    assert!(read_message(&mut conn).await.unwrap().is_none(), "connection closed after a bad frame");

    shutdown.cancel();
    task.await.unwrap();
}
