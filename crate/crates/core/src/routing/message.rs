use crate::mobility::Position;
use crate::NodeId;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ControlKind {
    /// Originator message, flooded.
    Ogm,
    /// One-hop neighbor advertisement, never forwarded.
    Hello,
    /// Topology control, flooded.
    Tc,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ControlPayload {
    /// Product of link qualities accumulated so far.
    Tq { score: f64 },
    /// Path score accumulated so far plus the sender's own predicted position.
    PathScore { score: f64, predicted: Option<Position> },
    /// Advertised one-hop neighbors of the originator and where it was.
    Neighbors { neighbors: Vec<NodeId>, origin_position: Position },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ControlMessage {
    pub kind: ControlKind,
    pub originator: NodeId,
    pub seq: u32,
    /// Remaining hop budget for flooding.
    pub ttl: u8,
    /// Hops already travelled before this transmission.
    pub hops: u8,
    /// Node transmitting this copy (the receiver's previous hop).
    pub sender: NodeId,
    pub sender_position: Position,
    pub payload: ControlPayload,
}

impl ControlMessage {
    /// Bytes on the wire; neighbor lists cost four bytes per entry.
    pub fn size_bytes(&self) -> u32 {
        const BASE: u32 = 64;
        match &self.payload {
            ControlPayload::Neighbors { neighbors, .. } => BASE + 4 * neighbors.len() as u32,
            _ => BASE,
        }
    }

    /// Copy to be rebroadcast by `forwarder`, or `None` if the hop budget is
    /// spent.
    pub fn forwarded_by(&self, forwarder: NodeId, position: Position, payload: ControlPayload) -> Option<Self> {
        if self.ttl <= 1 {
            return None;
        }
        Some(ControlMessage {
            ttl: self.ttl - 1,
            hops: self.hops.saturating_add(1),
            sender: forwarder,
            sender_position: position,
            payload,
            ..self.clone()
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ogm(ttl: u8) -> ControlMessage {
        ControlMessage {
            kind: ControlKind::Ogm,
            originator: 1,
            seq: 4,
            ttl,
            hops: 0,
            sender: 1,
            sender_position: Position::default(),
            payload: ControlPayload::Tq { score: 1.0 },
        }
    }

    #[test]
    fn forwarding_spends_ttl() {
        let fwd = ogm(3).forwarded_by(2, Position::new(1.0, 0.0, 0.0), ControlPayload::Tq { score: 0.5 }).unwrap();
        assert_eq!((fwd.ttl, fwd.hops, fwd.sender, fwd.originator, fwd.seq), (2, 1, 2, 1, 4));
        assert!(ogm(1).forwarded_by(2, Position::default(), ControlPayload::Tq { score: 1.0 }).is_none());
        assert!(ogm(0).forwarded_by(2, Position::default(), ControlPayload::Tq { score: 1.0 }).is_none());
    }

    #[test]
    fn sizes() {
        assert_eq!(ogm(3).size_bytes(), 64);
        let mut tc = ogm(3);
        tc.payload = ControlPayload::Neighbors { neighbors: vec![1, 2, 3], origin_position: Position::default() };
        assert_eq!(tc.size_bytes(), 76);
    }
}
