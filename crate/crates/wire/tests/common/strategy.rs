//! Generators for every message type.

use proptest::collection::{btree_map, vec};
use proptest::prelude::*;
use search_wire::*;
use uuid::Uuid;

fn ident() -> impl Strategy<Value = String> {
    "[A-Za-z_][A-Za-z0-9_]{0,12}"
}

fn uuid() -> impl Strategy<Value = Uuid> {
    any::<u128>().prop_map(Uuid::from_u128)
}

fn uri() -> impl Strategy<Value = String> {
    ("[a-z][a-z0-9.]{0,10}", any::<u16>()).prop_map(|(h, p)| format!("tcp://{h}:{p}"))
}

fn text() -> impl Strategy<Value = String> {
    any::<String>()
}

fn contract() -> impl Strategy<Value = String> {
    "[ -~\n]{0,40}[!-~]"
}

fn body() -> impl Strategy<Value = Vec<u8>> {
    vec(any::<u8>(), 0..64)
}

fn roles() -> impl Strategy<Value = RoleUris> {
    btree_map(ident(), uri(), 0..4)
}

fn failure() -> impl Strategy<Value = Failure> {
    (ident(), text(), proptest::option::of(ident())).prop_map(|(code, detail, role)| Failure { code, detail, role })
}

pub fn message() -> impl Strategy<Value = Message> {
    prop_oneof![
        contract().prop_map(|local_contract| RegisterAppRequest { local_contract }.into()),
        uuid().prop_map(|app_id| RegisterAppResponse::Registered { app_id }.into()),
        (uuid(), roles()).prop_map(|(session_id, role_map)| RegisterAppResponse::Session { session_id, role_map }.into()),
        (contract(), ident()).prop_map(|(global_contract, self_role)| RegisterChannelRequest { global_contract, self_role }.into()),
        uuid().prop_map(|channel_id| RegisterChannelResponse { channel_id }.into()),
        (uuid(), ident(), ident(), body())
            .prop_map(|(channel_id, to, label, body)| AppSendRequest { channel_id, to, label, body }.into()),
        text().prop_map(|status| AppSendResponse { status }.into()),
        (uuid(), ident()).prop_map(|(channel_id, from)| AppRecvRequest { channel_id, from }.into()),
        (ident(), body()).prop_map(|(label, body)| AppRecvResponse { label, body }.into()),
        uuid().prop_map(|channel_id| CloseChannelRequest { channel_id }.into()),
        text().prop_map(|status| CloseChannelResponse { status }.into()),
        (contract(), ident(), uri()).prop_map(|(global_contract, initiator_role, initiator_uri)| {
            BrokerChannelRequest { global_contract, initiator_role, initiator_uri }.into()
        }),
        (uuid(), roles()).prop_map(|(session_id, assignments)| BrokerChannelResponse::Assigned { session_id, assignments }.into()),
        failure().prop_map(|error| BrokerChannelResponse::Failed { error }.into()),
        (contract(), uri()).prop_map(|(contract, uri)| RegisterProviderRequest { contract, uri }.into()),
        uuid().prop_map(|provider_id| RegisterProviderResponse::Registered { provider_id }.into()),
        failure().prop_map(|error| RegisterProviderResponse::Failed { error }.into()),
        (uuid(), ident(), contract(), roles()).prop_map(|(session_id, role, global_contract, participants)| {
            InitChannelRequest { session_id, role, global_contract, participants }.into()
        }),
        any::<bool>().prop_map(|accept| InitChannelResponse { accept }.into()),
        uuid().prop_map(|session_id| StartChannelRequest { session_id }.into()),
        any::<bool>().prop_map(|ack| StartChannelResponse { ack }.into()),
        (uuid(), ident()).prop_map(|(session_id, sender)| MessageExchangeHeader { session_id, sender }.into()),
        (uuid(), ident(), ident(), ident(), body(), any::<u64>()).prop_map(
            |(session_id, sender, receiver, label, body, seq)| {
                AppMessage { session_id, sender, receiver, label, body, seq }.into()
            }
        ),
        (ident(), text()).prop_map(|(code, detail)| ProtocolError { code, detail }.into()),
    ]
}
