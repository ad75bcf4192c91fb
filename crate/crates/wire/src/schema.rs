//! Hand-written payload schemas for every message type.
//!
//! Every payload carries `"v": 1`. Each type admits one or more field sets
//! ("forms"); a payload is valid when it matches one form exactly, with no
//! extra fields.

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde_json::{Map, Value};
use uuid::Uuid;

use crate::error::SchemaError;
use crate::message::MessageType;
use crate::uri::TcpUri;

pub const PROTOCOL_VERSION: u64 = 1;

#[derive(Debug, Clone, Copy)]
enum Kind {
    /// Any string (free text, status words).
    Text,
    /// Non-empty string holding contract source text.
    Contract,
    /// `[A-Za-z_][A-Za-z0-9_]*`
    Ident,
    Uuid,
    Uri,
    Base64,
    U64,
    Bool,
    /// Object mapping identifiers to URIs.
    RoleUris,
    Failure,
}

type Form = &'static [(&'static str, Kind)];

fn forms(kind: MessageType) -> &'static [Form] {
    use Kind::*;
    use MessageType as T;
    match kind {
        T::RegisterAppRequest => &[&[("local_contract", Contract)]],
        T::RegisterAppResponse => &[
            &[("app_id", Uuid)],
            &[("session_id", Uuid), ("role_map", RoleUris)],
        ],
        T::RegisterChannelRequest => &[&[("global_contract", Contract), ("self_role", Ident)]],
        T::RegisterChannelResponse => &[&[("channel_id", Uuid)]],
        T::AppSendRequest => &[&[
            ("channel_id", Uuid),
            ("to", Ident),
            ("label", Ident),
            ("body", Base64),
        ]],
        T::AppSendResponse => &[&[("status", Text)]],
        T::AppRecvRequest => &[&[("channel_id", Uuid), ("from", Ident)]],
        T::AppRecvResponse => &[&[("label", Ident), ("body", Base64)]],
        T::CloseChannelRequest => &[&[("channel_id", Uuid)]],
        T::CloseChannelResponse => &[&[("status", Text)]],
        T::BrokerChannelRequest => &[&[
            ("global_contract", Contract),
            ("initiator_role", Ident),
            ("initiator_uri", Uri),
        ]],
        T::BrokerChannelResponse => &[
            &[("session_id", Uuid), ("assignments", RoleUris)],
            &[("error", Failure)],
        ],
        T::RegisterProviderRequest => &[&[("contract", Contract), ("uri", Uri)]],
        T::RegisterProviderResponse => &[&[("provider_id", Uuid)], &[("error", Failure)]],
        T::InitChannelRequest => &[&[
            ("session_id", Uuid),
            ("role", Ident),
            ("global_contract", Contract),
            ("participants", RoleUris),
        ]],
        T::InitChannelResponse => &[&[("accept", Bool)]],
        T::StartChannelRequest => &[&[("session_id", Uuid)]],
        T::StartChannelResponse => &[&[("ack", Bool)]],
        T::MessageExchangeHeader => &[&[("session_id", Uuid), ("sender", Ident)]],
        T::MessageExchange => &[&[
            ("session_id", Uuid),
            ("sender", Ident),
            ("receiver", Ident),
            ("label", Ident),
            ("body", Base64),
            ("seq", U64),
        ]],
        T::ProtocolError => &[&[("code", Ident), ("detail", Text)]],
    }
}

pub(crate) fn is_identifier(s: &str) -> bool {
    let mut chars = s.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_')
}

fn check(field: &str, kind: Kind, value: &Value) -> Result<(), SchemaError> {
    let expect_str = || {
        value
            .as_str()
            .ok_or_else(|| SchemaError::new(field, "expected a string"))
    };
    match kind {
        Kind::Text => {
            expect_str()?;
        }
        Kind::Contract => {
            if expect_str()?.trim().is_empty() {
                return Err(SchemaError::new(field, "contract text is empty"));
            }
        }
        Kind::Ident => {
            if !is_identifier(expect_str()?) {
                return Err(SchemaError::new(field, "not a valid identifier"));
            }
        }
        Kind::Uuid => {
            Uuid::parse_str(expect_str()?)
                .map_err(|_| SchemaError::new(field, "not a valid UUID"))?;
        }
        Kind::Uri => {
            TcpUri::parse(expect_str()?).map_err(|e| SchemaError::new(field, e.to_string()))?;
        }
        Kind::Base64 => {
            STANDARD
                .decode(expect_str()?)
                .map_err(|_| SchemaError::new(field, "not valid base64"))?;
        }
        Kind::U64 => {
            value
                .as_u64()
                .ok_or_else(|| SchemaError::new(field, "expected an unsigned 64-bit integer"))?;
        }
        Kind::Bool => {
            value
                .as_bool()
                .ok_or_else(|| SchemaError::new(field, "expected a boolean"))?;
        }
        Kind::RoleUris => {
            let map = value
                .as_object()
                .ok_or_else(|| SchemaError::new(field, "expected an object"))?;
            for (role, uri) in map {
                let path = format!("{field}.{role}");
                if !is_identifier(role) {
                    return Err(SchemaError::new(path, "role is not a valid identifier"));
                }
                check(&path, Kind::Uri, uri)?;
            }
        }
        Kind::Failure => {
            let map = value
                .as_object()
                .ok_or_else(|| SchemaError::new(field, "expected an object"))?;
            check_form(
                field,
                map,
                &[("code", Kind::Ident), ("detail", Kind::Text)],
                &[("role", Kind::Ident)],
            )?;
        }
    }
    Ok(())
}

fn check_form(
    prefix: &str,
    map: &Map<String, Value>,
    required: &[(&str, Kind)],
    optional: &[(&str, Kind)],
) -> Result<(), SchemaError> {
    let path = |f: &str| {
        if prefix.is_empty() {
            f.to_owned()
        } else {
            format!("{prefix}.{f}")
        }
    };
    for (name, kind) in required {
        let value = map
            .get(*name)
            .ok_or_else(|| SchemaError::new(path(name), "missing required field"))?;
        check(&path(name), *kind, value)?;
    }
    for (name, kind) in optional {
        if let Some(value) = map.get(*name) {
            check(&path(name), *kind, value)?;
        }
    }
    for key in map.keys() {
        let known = required.iter().chain(optional).any(|(n, _)| n == key);
        if !known && !(prefix.is_empty() && key == "v") {
            return Err(SchemaError::new(path(key), "unknown field"));
        }
    }
    Ok(())
}

/// Checks a payload object against the schema of `kind`.
pub fn validate_schema(kind: MessageType, payload: &Value) -> Result<(), SchemaError> {
    let map = payload
        .as_object()
        .ok_or_else(|| SchemaError::new("payload", "expected an object"))?;
    match map.get("v") {
        Some(v) if v.as_u64() == Some(PROTOCOL_VERSION) => {}
        Some(_) => return Err(SchemaError::new("v", "unsupported protocol version")),
        None => return Err(SchemaError::new("v", "missing required field")),
    }
    let candidates = forms(kind);
    let mut first_err = None;
    for form in candidates {
        match check_form("", map, form, &[]) {
            Ok(()) => return Ok(()),
            Err(e) => {
                // Prefer the error of a form whose fields are present.
                let relevant = form.iter().any(|(n, _)| map.contains_key(*n));
                if first_err.is_none() || relevant {
                    first_err = Some((relevant, e));
                }
                if relevant {
                    break;
                }
            }
        }
    }
    Err(first_err.map(|(_, e)| e).expect("every type has a form"))
}

#[cfg(test)]
mod tests {
    use serde_json::json;

    use super::*;

    const ID: &str = "6f1c0a6e-2f43-4a3e-9d55-4c2b6f0c9b11";

    #[test]
    fn missing_participants() {
        let err = validate_schema(
            MessageType::InitChannelRequest,
            &json!({"v": 1, "session_id": ID, "role": "Srv", "global_contract": ".machine A"}),
        )
        .unwrap_err();
        assert_eq!(err.field, "participants");
    }

    #[test]
    fn negative_seq() {
        let err = validate_schema(
            MessageType::MessageExchange,
            &json!({"v": 1, "session_id": ID, "sender": "A", "receiver": "B",
                    "label": "x", "body": "", "seq": -1}),
        )
        .unwrap_err();
        assert_eq!(err.field, "seq");
    }

    #[test]
    fn broker_channel_request_ok() {
        validate_schema(
            MessageType::BrokerChannelRequest,
            &json!({"v": 1, "global_contract": ".machine A\n.initial q\n.end\n",
                    "initiator_role": "ClientApp", "initiator_uri": "tcp://127.0.0.1:7101"}),
        )
        .unwrap();
    }

    #[test]
    fn extra_fields_rejected() {
        let err = validate_schema(
            MessageType::StartChannelRequest,
            &json!({"v": 1, "session_id": ID, "extra": 3}),
        )
        .unwrap_err();
        assert_eq!(err.field, "extra");
    }

    #[test]
    fn version_required() {
        let err = validate_schema(MessageType::StartChannelRequest, &json!({"session_id": ID}))
            .unwrap_err();
        assert_eq!(err.field, "v");
        let err = validate_schema(MessageType::StartChannelRequest, &json!({"v": 2, "session_id": ID}))
            .unwrap_err();
        assert_eq!(err.field, "v");
    }

    #[test]
    fn alternative_forms() {
        validate_schema(MessageType::RegisterAppResponse, &json!({"v": 1, "app_id": ID})).unwrap();
        validate_schema(
            MessageType::RegisterAppResponse,
            &json!({"v": 1, "session_id": ID, "role_map": {"ClientApp": "tcp://h:1"}}),
        )
        .unwrap();
        let err = validate_schema(
            MessageType::RegisterAppResponse,
            &json!({"v": 1, "session_id": ID, "role_map": {"ClientApp": "http://h"}}),
        )
        .unwrap_err();
        assert_eq!(err.field, "role_map.ClientApp");
        let err = validate_schema(
            MessageType::BrokerChannelResponse,
            &json!({"v": 1, "error": {"code": "NoCandidate"}}),
        )
        .unwrap_err();
        assert_eq!(err.field, "error.detail");
    }

    #[test]
    fn bad_kinds() {
        let cases = [
            (MessageType::AppSendRequest, json!({"v": 1, "channel_id": "nope", "to": "B", "label": "x", "body": ""}), "channel_id"),
            (MessageType::AppSendRequest, json!({"v": 1, "channel_id": ID, "to": "B", "label": "x", "body": "!!"}), "body"),
            (MessageType::AppSendRequest, json!({"v": 1, "channel_id": ID, "to": "1B", "label": "x", "body": ""}), "to"),
            (MessageType::InitChannelResponse, json!({"v": 1, "accept": "yes"}), "accept"),
            (MessageType::RegisterProviderRequest, json!({"v": 1, "contract": "x", "uri": "not-a-uri"}), "uri"),
            (MessageType::RegisterAppRequest, json!({"v": 1, "local_contract": "  "}), "local_contract"),
        ];
        for (kind, payload, field) in cases {
            assert_eq!(validate_schema(kind, &payload).unwrap_err().field, field, "{kind}");
        }
    }
}
