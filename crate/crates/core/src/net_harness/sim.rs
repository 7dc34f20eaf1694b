//! Discrete-event simulation of one host and its client peers on a virtual
//! clock. The transport is reliable and FIFO per (link, channel); it may
//! duplicate envelopes but never loses them.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{HarnessError, ScriptedBot};
use crate::protocol::{Channel, Envelope, HostState, IngestOutput, Outbound, Replica, Sender};
use crate::session_state::{digest_hex, Event, ReducerContext, RejectReason};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelLatency {
    pub control: u64,
    pub pose: u64,
    pub annotation: u64,
}

impl ChannelLatency {
    pub fn uniform(ms: u64) -> Self {
        ChannelLatency {
            control: ms,
            pose: ms,
            annotation: ms,
        }
    }

    pub fn of(&self, channel: Channel) -> u64 {
        match channel {
            Channel::Control => self.control,
            Channel::Pose => self.pose,
            Channel::Annotation => self.annotation,
        }
    }
}

/// How deliveries that fall on the same millisecond are ordered across links
/// and channels. Per-link, per-channel order is never affected.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Interleaving {
    /// In order of sending.
    #[default]
    SendOrder,
    /// Seeded random order.
    Shuffle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimSchedule {
    pub seed: u64,
    pub latency_ms: ChannelLatency,
    /// Extra delay drawn uniformly from `0..=jitter_ms` per envelope.
    pub jitter_ms: u64,
    /// Chance that an envelope is delivered a second time, right after the first.
    pub duplication: f64,
    pub interleaving: Interleaving,
}

impl SimSchedule {
    pub fn new(seed: u64) -> Self {
        SimSchedule {
            seed,
            latency_ms: ChannelLatency {
                control: 20,
                pose: 10,
                annotation: 20,
            },
            jitter_ms: 0,
            duplication: 0.0,
            interleaving: Interleaving::SendOrder,
        }
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        if !(0.0..=1.0).contains(&self.duplication) {
            return Err(HarnessError::InvalidInput(format!(
                "duplication probability {} outside [0, 1]",
                self.duplication
            )));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeerReport {
    pub peer: Sender,
    pub digest: String,
    pub applied_events: u64,
    /// Order number of the last event the peer applied.
    pub applied_order: u64,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionRecord {
    pub t_ms: u64,
    pub peer: Sender,
    pub channel: Channel,
    pub seq: u64,
    pub kind: String,
    pub reason: RejectReason,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct LatencyStats {
    pub deliveries: u64,
    pub duplicates: u64,
    pub min_ms: u64,
    pub max_ms: u64,
    pub mean_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimReport {
    pub seed: u64,
    pub duration_ms: u64,
    /// Virtual time at which the last delivery happened.
    pub end_ms: u64,
    pub peers: Vec<PeerReport>,
    pub converged: bool,
    /// Host-applied envelopes in global order.
    pub log: Vec<Envelope>,
    pub rejections: Vec<RejectionRecord>,
    /// Replica failures, each of which means a divergence bug.
    pub errors: Vec<String>,
    pub latency: LatencyStats,
    /// Deliveries that overtook an earlier send on the same link and channel.
    pub fifo_violations: u64,
}

impl SimReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

enum Item {
    Act { bot: usize, index: usize },
    Join { bot: usize },
    Deliver {
        from: Sender,
        to: Sender,
        envelope: Envelope,
        sent_ms: u64,
        /// Position in the link's send sequence.
        link_index: u64,
        duplicate: bool,
    },
}

type Link = (Sender, Sender, Channel);

struct Sim<'a> {
    schedule: &'a SimSchedule,
    rng: ChaCha8Rng,
    queue: BTreeMap<(u64, u64, u64), Item>,
    counter: u64,
    last_delivery: BTreeMap<Link, u64>,
    sent_on_link: BTreeMap<Link, u64>,
    delivered_on_link: BTreeMap<Link, u64>,
    host: HostState,
    replicas: BTreeMap<Sender, Replica>,
    outbox: BTreeMap<Sender, Vec<Event>>,
    rejections: Vec<RejectionRecord>,
    errors: Vec<String>,
    latency_sum: u64,
    latency: LatencyStats,
    fifo_violations: u64,
    now: u64,
}

impl Sim<'_> {
    fn push(&mut self, t: u64, item: Item) {
        let tiebreak = match self.schedule.interleaving {
            Interleaving::SendOrder => 0,
            Interleaving::Shuffle => self.rng.gen(),
        };
        self.counter += 1;
        self.queue.insert((t, tiebreak, self.counter), item);
    }

    fn send(&mut self, from: Sender, to: Sender, envelope: Envelope) {
        let link = (from, to, envelope.channel);
        let base = self.schedule.latency_ms.of(envelope.channel);
        let jitter = self.rng.gen_range(0..=self.schedule.jitter_ms);
        let last = self.last_delivery.get(&link).copied();
        // Strictly after the previous delivery on this link keeps it FIFO
        // under any tie-break.
        let t = (self.now + base + jitter).max(last.map_or(0, |l| l + 1));
        self.last_delivery.insert(link, t);
        let index = {
            let n = self.sent_on_link.entry(link).or_insert(0);
            *n += 1;
            *n
        };
        let duplicate = self.schedule.duplication > 0.0 && self.rng.gen_bool(self.schedule.duplication);
        let copy = duplicate.then(|| envelope.clone());
        self.push(
            t,
            Item::Deliver {
                from,
                to,
                envelope,
                sent_ms: self.now,
                link_index: index,
                duplicate: false,
            },
        );
        if let Some(envelope) = copy {
            // Retransmitted right behind the original so it does not hold up
            // later traffic on the link.
            let t2 = t + 1;
            self.last_delivery.insert(link, t2);
            self.push(
                t2,
                Item::Deliver {
                    from,
                    to,
                    envelope,
                    sent_ms: self.now,
                    link_index: index,
                    duplicate: true,
                },
            );
        }
    }

    fn route(&mut self, out: IngestOutput) {
        for o in out.outbound {
            match o {
                Outbound::To(to, env) => {
                    if to != Sender::TeacherHost {
                        self.send(Sender::TeacherHost, to, env);
                    }
                }
                Outbound::Broadcast { except, envelope } => {
                    let peers: Vec<Sender> = self.host.joined().collect();
                    for p in peers.into_iter().filter(|p| Some(*p) != except) {
                        self.send(Sender::TeacherHost, p, envelope.clone());
                    }
                }
            }
        }
    }

    fn host_ingest(&mut self, from: Sender, envelope: Envelope) {
        let channel = envelope.channel;
        let seq = envelope.seq;
        let kind = envelope.as_event().map_or("control", Event::kind).to_owned();
        let out = self.host.ingest(from, envelope);
        if let Some(reason) = out.rejected {
            self.rejections.push(RejectionRecord {
                t_ms: self.now,
                peer: from,
                channel,
                seq,
                kind,
                reason,
            });
        }
        self.route(out);
    }

    fn flush_outbox(&mut self, peer: Sender) {
        let ready = self.replicas.get(&peer).is_some_and(Replica::is_welcomed);
        if !ready {
            return;
        }
        for event in self.outbox.remove(&peer).unwrap_or_default() {
            let env = self.replicas.get_mut(&peer).expect("peer exists").send(event);
            self.send(peer, Sender::TeacherHost, env);
        }
    }

    fn act(&mut self, peer: Sender, event: Event) {
        if peer == Sender::TeacherHost {
            let kind = event.kind().to_owned();
            let channel = Channel::for_event(&event);
            let out = self.host.submit(event);
            if let Some(reason) = out.rejected {
                self.rejections.push(RejectionRecord {
                    t_ms: self.now,
                    peer,
                    channel,
                    seq: 0,
                    kind,
                    reason,
                });
            }
            self.route(out);
        } else {
            self.outbox.entry(peer).or_default().push(event);
            self.flush_outbox(peer);
        }
    }

    fn deliver(&mut self, from: Sender, to: Sender, envelope: Envelope, sent_ms: u64) {
        let transit = self.now - sent_ms;
        self.latency.deliveries += 1;
        self.latency_sum += transit;
        self.latency.min_ms = if self.latency.deliveries == 1 {
            transit
        } else {
            self.latency.min_ms.min(transit)
        };
        self.latency.max_ms = self.latency.max_ms.max(transit);
        if to == Sender::TeacherHost {
            self.host_ingest(from, envelope);
        } else if let Some(replica) = self.replicas.get_mut(&to) {
            if let Err(e) = replica.receive(envelope) {
                self.errors.push(format!("{to} at {} ms: {e}", self.now));
            }
            self.flush_outbox(to);
        }
    }
}

/// Runs the bots against one host and a replica per client bot. Bot actions
/// scheduled after `duration_ms` are skipped; in-flight traffic is drained.
pub fn run_sim(
    schedule: &SimSchedule,
    bots: &[ScriptedBot],
    duration_ms: u64,
    ctx: &ReducerContext,
) -> Result<SimReport, HarnessError> {
    schedule.validate()?;
    let mut roles = BTreeSet::new();
    for bot in bots {
        bot.validate()?;
        if !roles.insert(bot.role) {
            return Err(HarnessError::InvalidInput(format!("two bots with role {}", bot.role)));
        }
    }

    let mut sim = Sim {
        schedule,
        rng: ChaCha8Rng::seed_from_u64(schedule.seed),
        queue: BTreeMap::new(),
        counter: 0,
        last_delivery: BTreeMap::new(),
        sent_on_link: BTreeMap::new(),
        delivered_on_link: BTreeMap::new(),
        host: HostState::new(ctx.clone()),
        replicas: BTreeMap::new(),
        outbox: BTreeMap::new(),
        rejections: Vec::new(),
        errors: Vec::new(),
        latency_sum: 0,
        latency: LatencyStats::default(),
        fifo_violations: 0,
        now: 0,
    };

    for (i, bot) in bots.iter().enumerate() {
        if bot.role != Sender::TeacherHost {
            sim.replicas.insert(bot.role, Replica::new(bot.role, ctx.clone()));
            sim.push(bot.join_at_ms, Item::Join { bot: i });
        }
        for (index, action) in bot.timeline.iter().enumerate() {
            if action.t_ms <= duration_ms {
                sim.push(action.t_ms, Item::Act { bot: i, index });
            }
        }
    }

    while let Some(((t, _, _), item)) = sim.queue.pop_first() {
        sim.now = t;
        match item {
            Item::Join { bot } => {
                let peer = bots[bot].role;
                let hello = sim.replicas.get_mut(&peer).expect("peer exists").hello();
                sim.send(peer, Sender::TeacherHost, hello);
            }
            Item::Act { bot, index } => {
                let event = bots[bot].timeline[index].event.clone();
                sim.act(bots[bot].role, event);
            }
            Item::Deliver {
                from,
                to,
                envelope,
                sent_ms,
                link_index,
                duplicate,
            } => {
                let link = (from, to, envelope.channel);
                let seen = sim.delivered_on_link.entry(link).or_insert(0);
                if link_index < *seen || (link_index == *seen && !duplicate) {
                    sim.fifo_violations += 1;
                }
                *seen = (*seen).max(link_index);
                if duplicate {
                    sim.latency.duplicates += 1;
                }
                sim.deliver(from, to, envelope, sent_ms);
            }
        }
    }

    for (peer, events) in &sim.outbox {
        if !events.is_empty() {
            sim.errors.push(format!("{peer} never joined; {} events unsent", events.len()));
        }
    }

    let host_digest = digest_hex(sim.host.state());
    let mut peers = vec![PeerReport {
        peer: Sender::TeacherHost,
        digest: host_digest.clone(),
        applied_events: sim.host.state().applied_events,
        applied_order: sim.host.order(),
    }];
    for (peer, replica) in &sim.replicas {
        peers.push(PeerReport {
            peer: *peer,
            digest: digest_hex(replica.state()),
            applied_events: replica.state().applied_events,
            applied_order: replica.applied_order(),
        });
    }
    let converged = sim.errors.is_empty() && peers.iter().all(|p| p.digest == host_digest);
    if let Some(mean) = sim.latency_sum.checked_div(sim.latency.deliveries) {
        sim.latency.mean_ms = mean;
    }
    Ok(SimReport {
        seed: schedule.seed,
        duration_ms,
        end_ms: sim.now,
        peers,
        converged,
        log: sim.host.log().to_vec(),
        rejections: sim.rejections,
        errors: sim.errors,
        latency: sim.latency,
        fifo_violations: sim.fifo_violations,
    })
}
