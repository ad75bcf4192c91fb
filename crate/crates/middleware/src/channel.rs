use std::collections::BTreeSet;
use std::sync::{Arc, OnceLock};

use parking_lot::Mutex;
use tokio::sync::Notify;
use uuid::Uuid;

use crate::error::MwError;
use crate::session::Session;

pub(crate) enum Binding {
    /// Registered, no brokerage attempted yet.
    Unbound,
    /// Brokerage in flight; sends so far wait here in order.
    Brokering { pending: Vec<(String, String, Vec<u8>)> },
    Bound(Arc<Session>),
    Failed(MwError),
    Closed,
}

/// A private-interface channel: either a client channel awaiting or holding
/// a brokered session, or a provider session exposed to its app under the
/// session id.
pub(crate) struct Channel {
    pub id: Uuid,
    pub self_role: String,
    pub partners: BTreeSet<String>,
    pub contract_text: String,
    pub binding: Mutex<Binding>,
    /// Session id once bound; kept after close.
    pub session_id: OnceLock<Uuid>,
    /// Signalled whenever `binding` changes.
    pub changed: Notify,
}

impl Channel {
    pub fn new(id: Uuid, self_role: String, partners: BTreeSet<String>, contract_text: String, binding: Binding) -> Self {
        let session_id = OnceLock::new();
        if let Binding::Bound(s) = &binding {
            let _ = session_id.set(s.id);
        }
        Channel {
            id,
            session_id,
            self_role,
            partners,
            contract_text,
            binding: Mutex::new(binding),
            changed: Notify::new(),
        }
    }

    pub fn check_partner(&self, role: &str) -> Result<(), MwError> {
        if self.partners.contains(role) {
            Ok(())
        } else {
            Err(MwError::UnknownRole(role.to_owned()))
        }
    }

    pub fn set(&self, binding: Binding) {
        if let Binding::Bound(s) = &binding {
            let _ = self.session_id.set(s.id);
        }
        *self.binding.lock() = binding;
        self.changed.notify_waiters();
    }
}
