//! Framing: a 4-byte big-endian length followed by that many bytes of UTF-8
//! JSON, `{"payload": {...}, "type": "..."}`, keys in lexicographic order.

use serde_json::{Map, Value};
use tokio::io::{AsyncRead, AsyncReadExt, AsyncWrite, AsyncWriteExt};

use crate::error::WireError;
use crate::message::{Message, MessageType};
use crate::schema::{validate_schema, PROTOCOL_VERSION};

pub const MAX_FRAME_LEN: usize = 16 * 1024 * 1024;

/// Serialises `msg` to JSON with sorted keys and the protocol version added.
pub fn encode_json(msg: &Message) -> Result<Vec<u8>, WireError> {
    let kind = msg.message_type();
    let mut payload = msg
        .payload_value()
        .map_err(|e| WireError::MalformedJson(e.to_string()))?;
    payload
        .as_object_mut()
        .expect("payloads serialise to objects")
        .insert("v".into(), Value::from(PROTOCOL_VERSION));
    validate_schema(kind, &payload).map_err(|source| WireError::Schema {
        kind: kind.as_str(),
        source,
    })?;
    let mut envelope = Map::new();
    envelope.insert("payload".into(), payload);
    envelope.insert("type".into(), Value::from(kind.as_str()));
    // serde_json's default map is ordered, so keys come out sorted
    serde_json::to_vec(&Value::Object(envelope)).map_err(|e| WireError::MalformedJson(e.to_string()))
}

pub fn encode_frame(msg: &Message) -> Result<Vec<u8>, WireError> {
    let json = encode_json(msg)?;
    frame_bytes(&json)
}

/// Prefixes raw payload bytes with their length.
pub fn frame_bytes(payload: &[u8]) -> Result<Vec<u8>, WireError> {
    if payload.len() > MAX_FRAME_LEN {
        return Err(WireError::Oversize(payload.len()));
    }
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    Ok(out)
}

/// Parses one JSON envelope (without length prefix).
pub fn decode_json(bytes: &[u8]) -> Result<Message, WireError> {
    let value: Value =
        serde_json::from_slice(bytes).map_err(|e| WireError::MalformedJson(e.to_string()))?;
    let Value::Object(mut envelope) = value else {
        return Err(WireError::MalformedJson("top level is not an object".into()));
    };
    let kind = match envelope.get("type") {
        Some(Value::String(t)) => {
            MessageType::parse(t).ok_or_else(|| WireError::UnknownType(t.clone()))?
        }
        Some(_) => return Err(WireError::MalformedJson("`type` is not a string".into())),
        None => return Err(WireError::MalformedJson("missing `type`".into())),
    };
    if let Some(extra) = envelope.keys().find(|k| *k != "type" && *k != "payload") {
        return Err(WireError::MalformedJson(format!("unexpected key `{extra}`")));
    }
    let mut payload = envelope
        .remove("payload")
        .ok_or_else(|| WireError::MalformedJson("missing `payload`".into()))?;
    validate_schema(kind, &payload).map_err(|source| WireError::Schema {
        kind: kind.as_str(),
        source,
    })?;
    payload.as_object_mut().expect("validated").remove("v");
    Message::from_payload(kind, payload).map_err(|e| WireError::MalformedJson(e.to_string()))
}

/// Decodes the frame at the start of `bytes`, returning the message and the
/// number of bytes consumed. Trailing bytes are left alone.
pub fn decode_frame(bytes: &[u8]) -> Result<(Message, usize), WireError> {
    if bytes.len() < 4 {
        return Err(WireError::Truncated {
            needed: 4,
            available: bytes.len(),
        });
    }
    let len = u32::from_be_bytes(bytes[..4].try_into().expect("4 bytes")) as usize;
    if len > MAX_FRAME_LEN {
        return Err(WireError::Oversize(len));
    }
    let end = 4 + len;
    if bytes.len() < end {
        return Err(WireError::Truncated {
            needed: end,
            available: bytes.len(),
        });
    }
    Ok((decode_json(&bytes[4..end])?, end))
}

/// Reads one frame. `Ok(None)` on a clean end of stream at a frame boundary.
pub async fn read_message<R: AsyncRead + Unpin>(r: &mut R) -> Result<Option<Message>, WireError> {
    let mut header = [0u8; 4];
    let mut got = 0;
    while got < 4 {
        let n = r.read(&mut header[got..]).await?;
        if n == 0 {
            return if got == 0 {
                Ok(None)
            } else {
                Err(WireError::Truncated {
                    needed: 4,
                    available: got,
                })
            };
        }
        got += n;
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME_LEN {
        return Err(WireError::Oversize(len));
    }
    let mut body = vec![0u8; len];
    let mut got = 0;
    while got < len {
        let n = r.read(&mut body[got..]).await?;
        if n == 0 {
            return Err(WireError::Truncated {
                needed: 4 + len,
                available: 4 + got,
            });
        }
        got += n;
    }
    decode_json(&body).map(Some)
}

pub async fn write_message<W: AsyncWrite + Unpin>(w: &mut W, msg: &Message) -> Result<(), WireError> {
    let frame = encode_frame(msg)?;
    w.write_all(&frame).await?;
    w.flush().await?;
    Ok(())
}

/// Writes `msg` and waits for one reply frame.
pub async fn call<S>(stream: &mut S, msg: &Message) -> Result<Message, WireError>
where
    S: AsyncRead + AsyncWrite + Unpin,
{
    write_message(stream, msg).await?;
    read_message(stream).await?.ok_or_else(|| {
        WireError::Io(std::io::Error::new(
            std::io::ErrorKind::UnexpectedEof,
            "connection closed before reply",
        ))
    })
}
