//! Stability windows. A window protects `⌈αn⌉` servers from crashing from
//! the moment a group-send starts until every protected server has consumed
//! its message and, under N2, until the sender has consumed each of their
//! replies.

use std::collections::BTreeSet;

use crate::proto::Output;
use crate::types::ProcessId;

#[derive(Debug)]
struct Window {
    id: u64,
    group: u64,
    sender: ProcessId,
    protected: BTreeSet<ProcessId>,
    unconsumed: BTreeSet<ProcessId>,
    awaiting_reply: BTreeSet<ProcessId>,
    n2: bool,
}

#[derive(Debug, Default)]
pub(super) struct Windows {
    open: Vec<Window>,
    next_id: u64,
}

impl Windows {
    pub fn open(&mut self, group: u64, sender: ProcessId, protected: &[ProcessId], n2: bool) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let protected: BTreeSet<ProcessId> = protected.iter().copied().collect();
        self.open.push(Window {
            id,
            group,
            sender,
            unconsumed: protected.clone(),
            protected,
            awaiting_reply: BTreeSet::new(),
            n2,
        });
        id
    }

    pub fn protects(&self, server: ProcessId) -> bool {
        self.open.iter().any(|w| w.protected.contains(&server))
    }

    /// `server` consumed its message of `group`, producing `outputs`.
    /// Returns the window and sender whose reply must now be followed.
    pub fn consumed(&mut self, group: u64, server: ProcessId, outputs: &[Output]) -> Option<(u64, ProcessId)> {
        let w = self.open.iter_mut().find(|w| w.group == group)?;
        if !w.unconsumed.remove(&server) || !w.n2 {
            return None;
        }
        let replies = outputs.iter().any(|o| matches!(o, Output::Send(m) if m.recipient == w.sender));
        if !replies {
            // Nothing for the sender to consume.
            return None;
        }
        w.awaiting_reply.insert(server);
        Some((w.id, w.sender))
    }

    pub fn reply_consumed(&mut self, window: u64, from: ProcessId) {
        if let Some(w) = self.open.iter_mut().find(|w| w.id == window) {
            w.awaiting_reply.remove(&from);
        }
    }

    /// Without a live sender only the consumption clause remains.
    pub fn sender_crashed(&mut self, sender: ProcessId) {
        for w in self.open.iter_mut().filter(|w| w.sender == sender) {
            w.n2 = false;
            w.awaiting_reply.clear();
        }
    }

    pub fn close_finished(&mut self) -> Vec<u64> {
        let mut closed = Vec::new();
        self.open.retain(|w| {
            let done = w.unconsumed.is_empty() && w.awaiting_reply.is_empty();
            if done {
                closed.push(w.id);
            }
            !done
        });
        closed
    }

    #[cfg(test)]
    pub fn open_count(&self) -> usize {
        self.open.len()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::types::{Message, OpId, Payload, Phase};

    fn reply(from: u32, to: ProcessId) -> Output {
        Output::Send(Message {
            sender: ProcessId::server(from),
            recipient: to,
            op: OpId(1),
            phase: Phase::Query,
            payload: Payload::Ack,
        })
    }

    #[test]
    fn n1_window_closes_on_consumption() {
        let w1 = ProcessId::writer(1);
        let mut ws = Windows::default();
        ws.open(7, w1, &[ProcessId::server(1), ProcessId::server(2)], false);
        assert!(ws.protects(ProcessId::server(1)));
        assert!(!ws.protects(ProcessId::server(3)));
        assert_eq!(ws.consumed(7, ProcessId::server(1), &[reply(1, w1)]), None);
        assert!(ws.close_finished().is_empty());
        // Consumed servers stay protected until the whole window closes.
        assert!(ws.protects(ProcessId::server(1)));
        ws.consumed(7, ProcessId::server(2), &[]);
        assert_eq!(ws.close_finished(), vec![0]);
        assert_eq!(ws.open_count(), 0);
    }

    #[test]
    fn n2_window_waits_for_replies() {
        let w1 = ProcessId::writer(1);
        let mut ws = Windows::default();
        let id = ws.open(1, w1, &[ProcessId::server(1), ProcessId::server(2)], true);
        assert_eq!(ws.consumed(1, ProcessId::server(1), &[reply(1, w1)]), Some((id, w1)));
        // A handler with no reply discharges its server at consumption.
        assert_eq!(ws.consumed(1, ProcessId::server(2), &[]), None);
        assert!(ws.close_finished().is_empty());
        ws.reply_consumed(id, ProcessId::server(1));
        assert_eq!(ws.close_finished(), vec![id]);
    }

    #[test]
    fn n2_falls_back_when_sender_crashes() {
        let w1 = ProcessId::writer(1);
        let mut ws = Windows::default();
        ws.open(1, w1, &[ProcessId::server(1)], true);
        ws.consumed(1, ProcessId::server(1), &[reply(1, w1)]);
        ws.sender_crashed(w1);
        assert_eq!(ws.close_finished().len(), 1);
    }
}
