//! Control plane: periodic control messages, flooding with duplicate
//! suppression, and the three path-quality metrics that fill each node's
//! [`NeighborRanking`].

mod flood;
pub mod geo;
mod message;
mod ranking;
pub mod pathscore;
pub mod tq;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::mobility::{MobilityHistory, Position};
use crate::time::SimTime;
use crate::NodeId;

pub use flood::{FloodFilter, Freshness};
pub use geo::{geo_score, GolsrParams, GolsrState};
pub use message::{ControlKind, ControlMessage, ControlPayload};
pub use pathscore::{pathscore_link, pathscore_path, BatMobileState, PathScoreParams};
pub use ranking::{best_forwarder, NeighborRanking, RankEntry};
pub use tq::{tq_score, BatmanParams, BatmanState, TqWindow};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Protocol {
    Batman,
    Golsr,
    Batmobile,
}

impl Protocol {
    pub const ALL: [Protocol; 3] = [Protocol::Batman, Protocol::Golsr, Protocol::Batmobile];

    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Batman => "batman",
            Protocol::Golsr => "golsr",
            Protocol::Batmobile => "batmobile",
        }
    }
}

impl fmt::Display for Protocol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Protocol {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().replace(['-', '_', '.'], "").as_str() {
            "batman" => Ok(Protocol::Batman),
            "golsr" => Ok(Protocol::Golsr),
            "batmobile" => Ok(Protocol::Batmobile),
            _ => Err(format!("unknown protocol '{s}' (expected batman, golsr or batmobile)")),
        }
    }
}

/// What a node knows about itself when handling a control event.
#[derive(Debug, Clone, Copy)]
pub struct NodeCtx<'a> {
    pub id: NodeId,
    pub now: SimTime,
    pub position: Position,
    pub history: &'a MobilityHistory,
}

/// Per-node protocol state.
#[derive(Debug, Clone)]
pub enum Router {
    Batman(BatmanState),
    Golsr(GolsrState),
    Batmobile(BatMobileState),
}

impl Router {
    pub fn protocol(&self) -> Protocol {
        match self {
            Router::Batman(_) => Protocol::Batman,
            Router::Golsr(_) => Protocol::Golsr,
            Router::Batmobile(_) => Protocol::Batmobile,
        }
    }

    /// Periodic control timers as (kind, interval).
    pub fn timers(&self) -> Vec<(ControlKind, SimTime)> {
        match self {
            Router::Batman(s) => vec![(ControlKind::Ogm, s.params().ogm_interval)],
            Router::Batmobile(s) => vec![(ControlKind::Ogm, s.params().ogm_interval)],
            Router::Golsr(s) => vec![
                (ControlKind::Hello, s.params().hello_interval),
                (ControlKind::Tc, s.params().tc_interval),
            ],
        }
    }

    pub fn emit_control(&mut self, kind: ControlKind, ctx: &NodeCtx<'_>) -> ControlMessage {
        match self {
            Router::Batman(s) => s.emit(ctx),
            Router::Batmobile(s) => s.emit(ctx),
            Router::Golsr(s) => s.emit(kind, ctx),
        }
    }

    /// Handles a received control message, updating `ranking`. Returns the
    /// copy to rebroadcast, if any.
    pub fn process_control(
        &mut self,
        msg: &ControlMessage,
        ctx: &NodeCtx<'_>,
        ranking: &mut NeighborRanking,
    ) -> Option<ControlMessage> {
        match self {
            Router::Batman(s) => s.process(msg, ctx, ranking),
            Router::Batmobile(s) => s.process(msg, ctx, ranking),
            Router::Golsr(s) => s.process(msg, ctx),
        }
    }

    /// Brings the ranking for `dest` up to date before a forwarding decision.
    pub fn prepare_lookup(&self, dest: NodeId, ctx: &NodeCtx<'_>, ranking: &mut NeighborRanking) {
        if let Router::Golsr(s) = self {
            s.refresh_ranking(dest, ctx, ranking);
        }
        ranking.purge(ctx.now);
    }
}
