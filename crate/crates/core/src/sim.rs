//! One simulation run: nodes moving in the mission area, exchanging control
//! messages and forwarding CBR datagrams over the shared medium.

use std::collections::HashMap;

use rand::Rng;

use crate::balancer::{postrouting_hook, DropReason, ForwardingPolicy, RoutingHeader, RrState};
use crate::channel::{ChannelParams, MacParams, Medium, TxId, TxQueue};
use crate::config::ScenarioConfig;
use crate::engine::Engine;
use crate::mobility::{step_waypoint, Area, MobilityHistory, MobilityState, Position};
use crate::rng::{streams, RngStream};
use crate::routing::{
    BatMobileState, BatmanState, ControlKind, ControlMessage, GolsrState, NeighborRanking, NodeCtx, Protocol,
    Router,
};
use crate::time::SimTime;
use crate::traffic::{draw_endpoints, DropCause, PdrSample, StreamSpec, StreamStats};
use crate::NodeId;

#[derive(Debug, Clone, PartialEq)]
pub struct DataPacket {
    pub id: u64,
    pub stream: usize,
    pub src: NodeId,
    pub dst: NodeId,
    pub previous_hop: Option<NodeId>,
    pub ttl: u8,
    pub created: SimTime,
    pub size: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub enum FrameBody {
    Control(ControlMessage),
    Data(DataPacket),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Frame {
    pub transmitter: NodeId,
    /// `None` for broadcast.
    pub next_hop: Option<NodeId>,
    pub body: FrameBody,
    pub enqueued: SimTime,
}

impl Frame {
    pub fn size_bytes(&self) -> u32 {
        match &self.body {
            FrameBody::Control(m) => m.size_bytes(),
            FrameBody::Data(p) => p.size,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Event {
    MobilityTick,
    ControlEmit { node: NodeId, kind: ControlKind },
    StreamSend { stream: usize },
    MacAttempt { node: NodeId },
    TxEnd { node: NodeId, tx: TxId },
}

impl Event {
    fn tag(&self) -> (u8, u64) {
        match *self {
            Event::MobilityTick => (0, 0),
            Event::ControlEmit { node, kind } => (1, node as u64 * 4 + kind as u64),
            Event::StreamSend { stream } => (2, stream as u64),
            Event::MacAttempt { node } => (3, node as u64),
            Event::TxEnd { node, tx } => (4, (tx.0 << 16) ^ node as u64),
        }
    }
}

/// MAC of one node is paused for `[from, until)`; queued frames wait.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Stall {
    pub node: NodeId,
    pub from: SimTime,
    pub until: SimTime,
}

/// Knobs for tests and fixtures beyond what the scenario file covers.
#[derive(Debug, Clone, Default)]
pub struct SimOptions {
    /// Fixed node positions; nodes do not move.
    pub static_positions: Option<Vec<Position>>,
    /// Explicit stream endpoints instead of random ones.
    pub endpoints: Option<Vec<(NodeId, NodeId)>>,
    /// Keep per-packet forwarding and round-robin logs.
    pub record_forwarding: bool,
    pub stalls: Vec<Stall>,
}

/// One forwarding decision, source or relay.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForwardRecord {
    pub time: SimTime,
    pub node: NodeId,
    pub packet: u64,
    pub forwarder: NodeId,
}

/// One round-robin dispatch with the set it was drawn from.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DispatchRecord {
    pub node: NodeId,
    pub dest: NodeId,
    pub members: Vec<NodeId>,
    pub chosen: NodeId,
}

#[derive(Debug, Default)]
struct MacState {
    attempt_pending: bool,
    transmitting: bool,
}

struct Node {
    mobility: MobilityState,
    history: MobilityHistory,
    queue: TxQueue<Frame>,
    router: Router,
    ranking: NeighborRanking,
    rr: RrState,
    mac: MacState,
}

struct Stream {
    spec: StreamSpec,
    stats: StreamStats,
    interval: SimTime,
}

#[derive(Debug, Clone)]
pub struct StreamReport {
    pub spec: StreamSpec,
    pub stats: StreamStats,
    /// Packets still queued or on air when the run ended.
    pub in_flight: u64,
}

impl StreamReport {
    /// `received + drops + in_flight == sent`.
    pub fn conserved(&self) -> bool {
        self.stats.received + self.stats.drops.total() + self.in_flight == self.stats.sent
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub streams: Vec<StreamReport>,
    pub control_transmissions: u64,
    pub data_transmissions: u64,
    pub events: u64,
    pub end: SimTime,
    /// Hash over every processed event and the final counters.
    pub digest: u64,
    pub forward_log: Vec<ForwardRecord>,
    pub dispatch_log: Vec<DispatchRecord>,
}

impl RunReport {
    pub fn sent(&self) -> u64 {
        self.streams.iter().map(|s| s.stats.sent).sum()
    }

    pub fn received(&self) -> u64 {
        self.streams.iter().map(|s| s.stats.received).sum()
    }

    pub fn overall_pdr(&self) -> Option<f64> {
        let sent = self.sent();
        (sent > 0).then(|| self.received() as f64 / sent as f64)
    }

    /// Current-PDR series summed over all streams.
    pub fn pdr_series(&self) -> Vec<PdrSample> {
        let mut combined: Vec<PdrSample> = Vec::new();
        for s in &self.streams {
            for (i, sample) in s.stats.series(self.end).into_iter().enumerate() {
                match combined.get_mut(i) {
                    Some(c) => {
                        c.sent += sample.sent;
                        c.received += sample.received;
                    }
                    None => combined.push(sample),
                }
            }
        }
        for c in &mut combined {
            c.pdr = (c.sent > 0).then(|| c.received as f64 / c.sent as f64);
        }
        combined
    }

    pub fn conserved(&self) -> bool {
        self.streams.iter().all(StreamReport::conserved)
    }

    /// Forwarding log as text, one decision per line.
    pub fn forward_log_text(&self) -> String {
        let mut out = String::new();
        for r in &self.forward_log {
            out.push_str(&format!("{} {} {} {}\n", r.time.as_micros(), r.node, r.packet, r.forwarder));
        }
        out
    }
}

const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv(mut h: u64, v: u64) -> u64 {
    for b in v.to_le_bytes() {
        h ^= u64::from(b);
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

pub struct Simulation {
    engine: Engine<Event>,
    area: Area,
    channel: ChannelParams,
    mac: MacParams,
    policy: ForwardingPolicy,
    mobility_step: SimTime,
    end: SimTime,
    moving: bool,
    nodes: Vec<Node>,
    positions: Vec<Position>,
    medium: Medium,
    on_air: HashMap<TxId, Frame>,
    streams: Vec<Stream>,
    rng_mobility: RngStream,
    rng_mac: RngStream,
    next_packet: u64,
    stalls: Vec<Stall>,
    record: bool,
    forward_log: Vec<ForwardRecord>,
    dispatch_log: Vec<DispatchRecord>,
    control_tx: u64,
    data_tx: u64,
    digest: u64,
}

impl Simulation {
    pub fn new(cfg: &ScenarioConfig, seed: u64) -> Self {
        Self::with_options(cfg, seed, SimOptions::default())
    }

    pub fn with_options(cfg: &ScenarioConfig, seed: u64, opts: SimOptions) -> Self {
        let area = cfg.area();
        let mut rng_topology = RngStream::new(streams::TOPOLOGY, seed);
        let mut rng_mobility = RngStream::new(streams::MOBILITY, seed);
        let mut rng_control = RngStream::new(streams::CONTROL, seed);
        let mut rng_traffic = RngStream::new(streams::TRAFFIC, seed);
        let rng_mac = RngStream::new(streams::MAC, seed);

        let moving = opts.static_positions.is_none();
        let n = opts.static_positions.as_ref().map_or(cfg.nodes, Vec::len);
        let start_positions: Vec<Position> = match &opts.static_positions {
            Some(p) => p.clone(),
            None => (0..n).map(|_| area.random_point(&mut rng_topology)).collect(),
        };

        let mobility_step = cfg.mobility_update();
        let expiry = cfg.ranking_expiry();
        let nodes: Vec<Node> = start_positions
            .iter()
            .enumerate()
            .map(|(id, &p)| {
                let mobility = if moving {
                    MobilityState::new(p, area.random_point(&mut rng_mobility), cfg.speed_mps())
                } else {
                    MobilityState::stationary(p)
                };
                let router = match cfg.protocol {
                    Protocol::Batman => Router::Batman(BatmanState::new(cfg.batman_params())),
                    Protocol::Golsr => Router::Golsr(GolsrState::new(cfg.golsr_params())),
                    Protocol::Batmobile => Router::Batmobile(BatMobileState::new(cfg.pathscore_params())),
                };
                let mut history = MobilityHistory::new(cfg.batmobile.score_buffer);
                history.record(SimTime::ZERO, p).expect("first sample");
                Node {
                    mobility,
                    history,
                    queue: TxQueue::new(cfg.queue_capacity),
                    router,
                    ranking: NeighborRanking::new(id, expiry),
                    rr: RrState::new(),
                    mac: MacState::default(),
                }
            })
            .collect();

        let mut engine = Engine::new();
        engine.schedule(mobility_step, Event::MobilityTick).expect("future");
        for (id, node) in nodes.iter().enumerate() {
            for (kind, interval) in node.router.timers() {
                let phase = SimTime::from_micros(rng_control.gen_range(0..interval.as_micros().max(1)));
                engine.schedule(phase, Event::ControlEmit { node: id, kind }).expect("future");
            }
        }

        let pairs = match &opts.endpoints {
            Some(p) => p.clone(),
            None => draw_endpoints(n, cfg.streams, &mut rng_traffic),
        };
        let start = SimTime::from_secs_f64(cfg.stream_start_s);
        let end = cfg.sim_time();
        let streams: Vec<Stream> = pairs
            .into_iter()
            .map(|(src, dst)| {
                let spec = StreamSpec {
                    src,
                    dst,
                    bitrate: cfg.bitrate_bps,
                    payload_bytes: cfg.mtu_bytes,
                    start,
                    stop: end,
                };
                Stream { interval: spec.interval(), spec, stats: StreamStats::new(cfg.window()) }
            })
            .collect();
        for (i, s) in streams.iter().enumerate() {
            if s.spec.start < s.spec.stop {
                engine.schedule(s.spec.start, Event::StreamSend { stream: i }).expect("future");
            }
        }

        Simulation {
            engine,
            area,
            channel: cfg.channel_params(),
            mac: cfg.mac_params(),
            policy: cfg.policy(),
            mobility_step,
            end,
            moving,
            nodes,
            positions: start_positions,
            medium: Medium::new(),
            on_air: HashMap::new(),
            streams,
            rng_mobility,
            rng_mac,
            next_packet: 0,
            stalls: opts.stalls,
            record: opts.record_forwarding,
            forward_log: Vec::new(),
            dispatch_log: Vec::new(),
            control_tx: 0,
            data_tx: 0,
            digest: 0xcbf2_9ce4_8422_2325,
        }
    }

    pub fn now(&self) -> SimTime {
        self.engine.now()
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn ranking(&self, node: NodeId) -> &NeighborRanking {
        &self.nodes[node].ranking
    }

    pub fn queue_len(&self, node: NodeId) -> usize {
        self.nodes[node].queue.len()
    }

    pub fn stream_specs(&self) -> Vec<StreamSpec> {
        self.streams.iter().map(|s| s.spec.clone()).collect()
    }

    /// Processes every event up to `t_end` and returns how many there were.
    pub fn run_until(&mut self, t_end: SimTime) -> u64 {
        let mut count = 0;
        while let Some((t, ev)) = self.engine.pop_until(t_end) {
            let (tag, arg) = ev.tag();
            self.digest = fnv(fnv(fnv(self.digest, t.as_micros()), u64::from(tag)), arg);
            self.handle(t, ev);
            count += 1;
        }
        self.engine.advance_to(t_end);
        count
    }

    /// Runs to the configured end time and reports.
    pub fn run(mut self) -> RunReport {
        let end = self.end;
        self.run_until(end);
        self.finish()
    }

    pub fn finish(self) -> RunReport {
        let mut in_flight = vec![0u64; self.streams.len()];
        let frames = self
            .nodes
            .iter()
            .flat_map(|n| n.queue.iter())
            .chain(self.on_air.values());
        for f in frames {
            if let FrameBody::Data(p) = &f.body {
                in_flight[p.stream] += 1;
            }
        }
        let mut digest = self.digest;
        for s in &self.streams {
            digest = fnv(fnv(digest, s.stats.sent), s.stats.received);
        }
        RunReport {
            streams: self
                .streams
                .into_iter()
                .zip(in_flight)
                .map(|(s, in_flight)| StreamReport { spec: s.spec, stats: s.stats, in_flight })
                .collect(),
            control_transmissions: self.control_tx,
            data_transmissions: self.data_tx,
            events: self.engine.processed(),
            end: self.engine.now(),
            digest,
            forward_log: self.forward_log,
            dispatch_log: self.dispatch_log,
        }
    }

    fn handle(&mut self, now: SimTime, ev: Event) {
        match ev {
            Event::MobilityTick => self.on_mobility_tick(now),
            Event::ControlEmit { node, kind } => self.on_control_emit(now, node, kind),
            Event::StreamSend { stream } => self.on_stream_send(now, stream),
            Event::MacAttempt { node } => self.on_mac_attempt(now, node),
            Event::TxEnd { node, tx } => self.on_tx_end(now, node, tx),
        }
    }

    fn on_mobility_tick(&mut self, now: SimTime) {
        let dt = self.mobility_step.as_secs_f64();
        for (id, node) in self.nodes.iter_mut().enumerate() {
            if self.moving {
                node.mobility = step_waypoint(&node.mobility, dt, &self.area, &mut self.rng_mobility);
                self.positions[id] = node.mobility.position;
            }
            node.history.record(now, self.positions[id]).expect("ticks increase");
        }
        self.engine.schedule_in(self.mobility_step, Event::MobilityTick);
    }

    fn on_control_emit(&mut self, now: SimTime, id: NodeId, kind: ControlKind) {
        let position = self.positions[id];
        let node = &mut self.nodes[id];
        let ctx = NodeCtx { id, now, position, history: &node.history };
        let msg = node.router.emit_control(kind, &ctx);
        let interval = node
            .router
            .timers()
            .into_iter()
            .find(|(k, _)| *k == kind)
            .map(|(_, iv)| iv)
            .expect("timer kind");
        self.engine.schedule_in(interval, Event::ControlEmit { node: id, kind });
        self.enqueue(now, Frame { transmitter: id, next_hop: None, body: FrameBody::Control(msg), enqueued: now });
    }

    fn on_stream_send(&mut self, now: SimTime, stream: usize) {
        let s = &mut self.streams[stream];
        s.stats.record_sent(now);
        let packet = DataPacket {
            id: self.next_packet,
            stream,
            src: s.spec.src,
            dst: s.spec.dst,
            previous_hop: None,
            ttl: 0,
            created: now,
            size: s.spec.payload_bytes,
        };
        let next = now + s.interval;
        if next < s.spec.stop {
            self.engine.schedule(next, Event::StreamSend { stream }).expect("future");
        }
        self.next_packet += 1;
        let ttl = self.default_ttl();
        self.forward(now, packet.src, DataPacket { ttl, ..packet });
    }

    fn default_ttl(&self) -> u8 {
        match &self.nodes[0].router {
            Router::Batman(s) => s.params().ttl,
            Router::Golsr(s) => s.params().ttl,
            Router::Batmobile(s) => s.params().ttl,
        }
    }

    fn drop_packet(&mut self, packet: &DataPacket, cause: DropCause) {
        self.streams[packet.stream].stats.record_drop(cause);
    }

    /// Route lookup followed by the postrouting hook, then enqueue.
    fn forward(&mut self, now: SimTime, id: NodeId, mut packet: DataPacket) {
        let position = self.positions[id];
        let node = &mut self.nodes[id];
        let ctx = NodeCtx { id, now, position, history: &node.history };
        node.router.prepare_lookup(packet.dst, &ctx, &mut node.ranking);
        let mut header = RoutingHeader {
            dest: packet.dst,
            previous_hop: packet.previous_hop,
            next_hop: None,
            ttl: packet.ttl,
        };
        match postrouting_hook(&mut header, &node.ranking, &mut node.rr, self.policy) {
            Ok(dispatch) => {
                if self.record {
                    self.forward_log.push(ForwardRecord {
                        time: now,
                        node: id,
                        packet: packet.id,
                        forwarder: dispatch.forwarder,
                    });
                    if let Some(set) = dispatch.set {
                        self.dispatch_log.push(DispatchRecord {
                            node: id,
                            dest: packet.dst,
                            members: set.members,
                            chosen: dispatch.forwarder,
                        });
                    }
                }
                packet.ttl = header.ttl;
                let frame = Frame {
                    transmitter: id,
                    next_hop: header.next_hop,
                    body: FrameBody::Data(packet),
                    enqueued: now,
                };
                self.enqueue(now, frame);
            }
            Err(DropReason::NoRoute) => self.drop_packet(&packet, DropCause::NoRoute),
            Err(DropReason::TtlExpired) => self.drop_packet(&packet, DropCause::Ttl),
        }
    }

    fn enqueue(&mut self, now: SimTime, frame: Frame) {
        let id = frame.transmitter;
        if let Err(frame) = self.nodes[id].queue.enqueue(frame) {
            if let FrameBody::Data(p) = &frame.body {
                self.drop_packet(p, DropCause::QueueOverflow);
            }
            return;
        }
        self.kick(now, id);
    }

    fn jitter(&mut self) -> SimTime {
        SimTime::from_micros(self.rng_mac.gen_range(0..=self.mac.max_jitter.as_micros()))
    }

    /// Schedules a channel access attempt unless one is pending or the node
    /// is already on air.
    fn kick(&mut self, now: SimTime, id: NodeId) {
        let mac = &self.nodes[id].mac;
        if mac.attempt_pending || mac.transmitting || self.nodes[id].queue.is_empty() {
            return;
        }
        let at = now + self.jitter();
        self.nodes[id].mac.attempt_pending = true;
        self.engine.schedule(at, Event::MacAttempt { node: id }).expect("future");
    }

    fn stalled_until(&self, now: SimTime, id: NodeId) -> Option<SimTime> {
        self.stalls
            .iter()
            .filter(|s| s.node == id && s.from <= now && now < s.until)
            .map(|s| s.until)
            .max()
    }

    fn on_mac_attempt(&mut self, now: SimTime, id: NodeId) {
        self.nodes[id].mac.attempt_pending = false;
        if self.nodes[id].mac.transmitting || self.nodes[id].queue.is_empty() {
            return;
        }
        if let Some(until) = self.stalled_until(now, id) {
            self.nodes[id].mac.attempt_pending = true;
            self.engine.schedule(until, Event::MacAttempt { node: id }).expect("future");
            return;
        }
        if let Some(busy) = self.medium.busy_until(id) {
            let at = busy.max(now) + self.jitter();
            self.nodes[id].mac.attempt_pending = true;
            self.engine.schedule(at, Event::MacAttempt { node: id }).expect("future");
            return;
        }
        let frame = self.nodes[id].queue.dequeue().expect("nonempty");
        let end = now + self.mac.airtime(frame.size_bytes());
        let tx = self.medium.begin(id, now, end, &self.positions, &self.channel);
        match frame.body {
            FrameBody::Control(_) => self.control_tx += 1,
            FrameBody::Data(_) => self.data_tx += 1,
        }
        self.on_air.insert(tx, frame);
        self.nodes[id].mac.transmitting = true;
        self.engine.schedule(end, Event::TxEnd { node: id, tx }).expect("future");
    }

    fn on_tx_end(&mut self, now: SimTime, id: NodeId, tx: TxId) {
        let finished = self.medium.finish(tx).expect("active transmission");
        let frame = self.on_air.remove(&tx).expect("frame on air");
        self.nodes[id].mac.transmitting = false;
        match frame.body {
            FrameBody::Control(msg) => {
                for r in finished.receptions.iter().filter(|r| !r.collided) {
                    self.receive_control(now, r.node, &msg);
                }
            }
            FrameBody::Data(packet) => {
                let next = frame.next_hop.expect("data frames are unicast");
                if finished.delivered_to(next) {
                    self.receive_data(now, next, id, packet);
                } else if finished.heard_by(next) {
                    self.drop_packet(&packet, DropCause::Collision);
                } else {
                    self.drop_packet(&packet, DropCause::OutOfRange);
                }
            }
        }
        self.kick(now, id);
    }

    fn receive_control(&mut self, now: SimTime, id: NodeId, msg: &ControlMessage) {
        let position = self.positions[id];
        let node = &mut self.nodes[id];
        let ctx = NodeCtx { id, now, position, history: &node.history };
        if let Some(fwd) = node.router.process_control(msg, &ctx, &mut node.ranking) {
            self.enqueue(now, Frame { transmitter: id, next_hop: None, body: FrameBody::Control(fwd), enqueued: now });
        }
    }

    fn receive_data(&mut self, now: SimTime, id: NodeId, from: NodeId, packet: DataPacket) {
        if packet.dst == id {
            self.streams[packet.stream].stats.record_received(now);
            return;
        }
        self.forward(now, id, DataPacket { previous_hop: Some(from), ..packet });
    }
}

/// Builds and runs one simulation.
pub fn simulate(cfg: &ScenarioConfig, seed: u64) -> RunReport {
    Simulation::new(cfg, seed).run()
}
