//! Wire protocol spoken between applications, middlewares and the broker.
//!
//! Every message travels in its own frame: a 4-byte big-endian length and a
//! UTF-8 JSON envelope `{"payload": {...}, "type": "<MessageType>"}`. Keys
//! are emitted in lexicographic order; decoders accept any order. Payloads
//! carry `"v": 1` and are checked against a fixed schema per type.

mod error;
mod frame;
mod message;
mod schema;
mod uri;

pub use error::{SchemaError, WireError};
pub use frame::{
    call, decode_frame, decode_json, encode_frame, encode_json, frame_bytes, read_message,
    write_message, MAX_FRAME_LEN,
};
pub use message::*;
pub use schema::{validate_schema, PROTOCOL_VERSION};
pub use uri::{TcpUri, UriError};

/// True for `[A-Za-z_][A-Za-z0-9_]*`, the syntax of roles and labels.
pub fn is_identifier(s: &str) -> bool {
    schema::is_identifier(s)
}
