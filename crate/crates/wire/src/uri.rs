use std::fmt;
use std::str::FromStr;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid URI `{uri}`: expected tcp://host:port")]
pub struct UriError {
    pub uri: String,
}

/// A `tcp://host:port` endpoint.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TcpUri {
    host: String,
    port: u16,
}

impl TcpUri {
    pub fn parse(s: &str) -> Result<Self, UriError> {
        let err = || UriError { uri: s.to_owned() };
        let rest = s.strip_prefix("tcp://").ok_or_else(err)?;
        let (host, port) = rest.rsplit_once(':').ok_or_else(err)?;
        let host = host.strip_prefix('[').and_then(|h| h.strip_suffix(']')).unwrap_or(host);
        if host.is_empty() || host.contains(['/', ' ']) {
            return Err(err());
        }
        let port: u16 = port.parse().map_err(|_| err())?;
        Ok(TcpUri {
            host: host.to_owned(),
            port,
        })
    }

    pub fn from_socket_addr(addr: std::net::SocketAddr) -> Self {
        TcpUri {
            host: addr.ip().to_string(),
            port: addr.port(),
        }
    }

    pub fn host(&self) -> &str {
        &self.host
    }

    pub fn port(&self) -> u16 {
        self.port
    }

    /// `host:port`, suitable for `TcpStream::connect` / `TcpListener::bind`.
    pub fn authority(&self) -> String {
        if self.host.contains(':') {
            format!("[{}]:{}", self.host, self.port)
        } else {
            format!("{}:{}", self.host, self.port)
        }
    }
}

impl fmt::Display for TcpUri {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "tcp://{}", self.authority())
    }
}

impl FromStr for TcpUri {
    type Err = UriError;

    fn from_str(s: &str) -> Result<Self, UriError> {
        Self::parse(s)
    }
}
