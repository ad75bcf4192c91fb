//! Pinned encodings, one per message type, written out by hand.

#![allow(dead_code)]

pub mod strategy;

use std::collections::BTreeMap;

use search_wire::*;
use uuid::Uuid;

pub const ID: &str = "6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11";

fn id() -> Uuid {
    Uuid::parse_str(ID).unwrap()
}

fn roles(pairs: &[(&str, &str)]) -> RoleUris {
    pairs
        .iter()
        .map(|(r, u)| (r.to_string(), u.to_string()))
        .collect::<BTreeMap<_, _>>()
}

/// `(message, exact JSON text of its frame payload)`.
pub fn golden() -> Vec<(Message, &'static str)> {
    vec![
        (
            RegisterAppRequest { local_contract: ".machine A\n.initial q\n.end\n".into() }.into(),
            r#"{"payload":{"local_contract":".machine A\n.initial q\n.end\n","v":1},"type":"RegisterAppRequest"}"#,
        ),
        (
            RegisterAppResponse::Registered { app_id: id() }.into(),
            r#"{"payload":{"app_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"RegisterAppResponse"}"#,
        ),
        (
            RegisterAppResponse::Session {
                session_id: id(),
                role_map: roles(&[("Srv", "tcp://127.0.0.1:7202"), ("ClientApp", "tcp://127.0.0.1:7102")]),
            }
            .into(),
            r#"{"payload":{"role_map":{"ClientApp":"tcp://127.0.0.1:7102","Srv":"tcp://127.0.0.1:7202"},"session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"RegisterAppResponse"}"#,
        ),
        (
            RegisterChannelRequest { global_contract: "G".into(), self_role: "ClientApp".into() }.into(),
            r#"{"payload":{"global_contract":"G","self_role":"ClientApp","v":1},"type":"RegisterChannelRequest"}"#,
        ),
        (
            RegisterChannelResponse { channel_id: id() }.into(),
            r#"{"payload":{"channel_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"RegisterChannelResponse"}"#,
        ),
        (
            AppSendRequest { channel_id: id(), to: "Srv".into(), label: "PurchaseRequest".into(), body: b"hi".to_vec() }.into(),
            r#"{"payload":{"body":"aGk=","channel_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","label":"PurchaseRequest","to":"Srv","v":1},"type":"AppSendRequest"}"#,
        ),
        (
            AppSendResponse { status: "ok".into() }.into(),
            r#"{"payload":{"status":"ok","v":1},"type":"AppSendResponse"}"#,
        ),
        (
            AppRecvRequest { channel_id: id(), from: "Srv".into() }.into(),
            r#"{"payload":{"channel_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","from":"Srv","v":1},"type":"AppRecvRequest"}"#,
        ),
        (
            AppRecvResponse { label: "TotalAmount".into(), body: vec![0, 255] }.into(),
            r#"{"payload":{"body":"AP8=","label":"TotalAmount","v":1},"type":"AppRecvResponse"}"#,
        ),
        (
            CloseChannelRequest { channel_id: id() }.into(),
            r#"{"payload":{"channel_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"CloseChannelRequest"}"#,
        ),
        (
            CloseChannelResponse { status: "ok".into() }.into(),
            r#"{"payload":{"status":"ok","v":1},"type":"CloseChannelResponse"}"#,
        ),
        (
            BrokerChannelRequest {
                global_contract: "G".into(),
                initiator_role: "ClientApp".into(),
                initiator_uri: "tcp://127.0.0.1:7102".into(),
            }
            .into(),
            r#"{"payload":{"global_contract":"G","initiator_role":"ClientApp","initiator_uri":"tcp://127.0.0.1:7102","v":1},"type":"BrokerChannelRequest"}"#,
        ),
        (
            BrokerChannelResponse::Assigned {
                session_id: id(),
                assignments: roles(&[("PPS", "tcp://127.0.0.1:7302"), ("Srv", "tcp://127.0.0.1:7202")]),
            }
            .into(),
            r#"{"payload":{"assignments":{"PPS":"tcp://127.0.0.1:7302","Srv":"tcp://127.0.0.1:7202"},"session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"BrokerChannelResponse"}"#,
        ),
        (
            BrokerChannelResponse::Failed {
                error: Failure { code: "NoCandidate".into(), detail: "no compliant provider".into(), role: Some("PPS".into()) },
            }
            .into(),
            r#"{"payload":{"error":{"code":"NoCandidate","detail":"no compliant provider","role":"PPS"},"v":1},"type":"BrokerChannelResponse"}"#,
        ),
        (
            RegisterProviderRequest { contract: "M".into(), uri: "tcp://127.0.0.1:7302".into() }.into(),
            r#"{"payload":{"contract":"M","uri":"tcp://127.0.0.1:7302","v":1},"type":"RegisterProviderRequest"}"#,
        ),
        (
            RegisterProviderResponse::Registered { provider_id: id() }.into(),
            r#"{"payload":{"provider_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"RegisterProviderResponse"}"#,
        ),
        (
            RegisterProviderResponse::Failed {
                error: Failure { code: "InvalidUri".into(), detail: "bad".into(), role: None },
            }
            .into(),
            r#"{"payload":{"error":{"code":"InvalidUri","detail":"bad"},"v":1},"type":"RegisterProviderResponse"}"#,
        ),
        (
            InitChannelRequest {
                session_id: id(),
                role: "Srv".into(),
                global_contract: "G".into(),
                participants: roles(&[("ClientApp", "tcp://127.0.0.1:7102")]),
            }
            .into(),
            r#"{"payload":{"global_contract":"G","participants":{"ClientApp":"tcp://127.0.0.1:7102"},"role":"Srv","session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"InitChannelRequest"}"#,
        ),
        (
            InitChannelResponse { accept: true }.into(),
            r#"{"payload":{"accept":true,"v":1},"type":"InitChannelResponse"}"#,
        ),
        (
            StartChannelRequest { session_id: id() }.into(),
            r#"{"payload":{"session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"StartChannelRequest"}"#,
        ),
        (
            StartChannelResponse { ack: true }.into(),
            r#"{"payload":{"ack":true,"v":1},"type":"StartChannelResponse"}"#,
        ),
        (
            MessageExchangeHeader { session_id: id(), sender: "ClientApp".into() }.into(),
            r#"{"payload":{"sender":"ClientApp","session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"MessageExchangeHeader"}"#,
        ),
        (
            AppMessage {
                session_id: id(),
                sender: "ClientApp".into(),
                receiver: "Srv".into(),
                label: "PurchaseRequest".into(),
                body: b"book".to_vec(),
                seq: 7,
            }
            .into(),
            r#"{"payload":{"body":"Ym9vaw==","label":"PurchaseRequest","receiver":"Srv","sender":"ClientApp","seq":7,"session_id":"6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11","v":1},"type":"MessageExchange"}"#,
        ),
        (
            ProtocolError::new("SeqGap", "expected 1, got 2").into(),
            r#"{"payload":{"code":"SeqGap","detail":"expected 1, got 2","v":1},"type":"ProtocolError"}"#,
        ),
    ]
}

/// Length prefix followed by the JSON text.
pub fn framed(json: &str) -> Vec<u8> {
    let mut out = (json.len() as u32).to_be_bytes().to_vec();
    out.extend_from_slice(json.as_bytes());
    out
}
