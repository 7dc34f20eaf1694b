use std::collections::{BTreeMap, BTreeSet};

use super::wire::{seq_key, Channel, ControlFrame, Envelope, Payload, Sender, PROTOCOL_VERSION};
use crate::session_state::{
    apply_event, snapshot, AnnotationId, Applied, DerivedEffect, Event, ReducerContext,
    RejectReason, SessionState,
};

/// Applies the event carried by an envelope and records its sequence number.
/// Host, replicas and replay all go through here.
pub fn apply_envelope(
    state: &SessionState,
    envelope: &Envelope,
    ctx: &ReducerContext,
) -> Result<Applied, RejectReason> {
    let event = envelope.as_event().ok_or(RejectReason::Unsupported)?;
    let (mut next, effects) = apply_event(state, event, ctx)?;
    next.record_seq(&seq_key(envelope.sender, envelope.channel), envelope.seq);
    Ok((next, effects))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outbound {
    To(Sender, Envelope),
    /// To every joined peer except `except`.
    Broadcast {
        except: Option<Sender>,
        envelope: Envelope,
    },
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct IngestOutput {
    pub outbound: Vec<Outbound>,
    /// Envelopes applied as a result, stamped with their order numbers.
    pub applied: Vec<Envelope>,
    pub effects: Vec<DerivedEffect>,
    pub rejected: Option<RejectReason>,
}

/// The authoritative endpoint. Owns the session state and assigns the
/// global order in which every peer applies events.
#[derive(Clone, Debug)]
pub struct HostState {
    ctx: ReducerContext,
    state: SessionState,
    order: u64,
    seen: BTreeMap<(Sender, Channel), u64>,
    joined: BTreeSet<Sender>,
    sketch_authors: BTreeMap<AnnotationId, Sender>,
    next_seq: BTreeMap<Channel, u64>,
    log: Vec<Envelope>,
}

impl HostState {
    pub fn new(ctx: ReducerContext) -> Self {
        HostState::with_state(ctx, SessionState::default())
    }

    pub fn with_state(ctx: ReducerContext, state: SessionState) -> Self {
        HostState {
            ctx,
            state,
            order: 0,
            seen: BTreeMap::new(),
            joined: BTreeSet::new(),
            sketch_authors: BTreeMap::new(),
            next_seq: BTreeMap::new(),
            log: Vec::new(),
        }
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn context(&self) -> &ReducerContext {
        &self.ctx
    }

    /// Order number of the most recently applied event.
    pub fn order(&self) -> u64 {
        self.order
    }

    /// Every applied envelope, in order.
    pub fn log(&self) -> &[Envelope] {
        &self.log
    }

    pub fn joined(&self) -> impl Iterator<Item = Sender> + '_ {
        self.joined.iter().copied()
    }

    pub fn is_joined(&self, peer: Sender) -> bool {
        peer == Sender::TeacherHost || self.joined.contains(&peer)
    }

    fn take_seq(&mut self, channel: Channel) -> u64 {
        let slot = self.next_seq.entry(channel).or_insert(0);
        *slot += 1;
        *slot
    }

    /// Wraps a host-originated control frame with the next control sequence number.
    pub fn frame(&mut self, frame: ControlFrame) -> Envelope {
        let seq = self.take_seq(Channel::Control);
        Envelope::control(seq, Sender::TeacherHost, frame)
    }

    fn reject(&mut self, to: Sender, env: &Envelope, reason: RejectReason) -> IngestOutput {
        let mut out = IngestOutput {
            rejected: Some(reason),
            ..Default::default()
        };
        if to != Sender::TeacherHost {
            let frame = self.frame(ControlFrame::Reject {
                channel: env.channel,
                seq: env.seq,
                reason,
            });
            out.outbound.push(Outbound::To(to, frame));
        }
        out
    }

    /// Submits an event originating at the host itself.
    pub fn submit(&mut self, event: Event) -> IngestOutput {
        let channel = Channel::for_event(&event);
        let seq = self.take_seq(channel);
        let env = Envelope::event(channel, seq, Sender::TeacherHost, event);
        self.ingest(Sender::TeacherHost, env)
    }

    /// Handles an envelope that arrived over the connection of `from`.
    pub fn ingest(&mut self, from: Sender, env: Envelope) -> IngestOutput {
        if env.sender != from {
            return self.reject(from, &env, RejectReason::Forbidden);
        }
        if let Payload::Control(ControlFrame::Hello { version }) = &env.payload {
            return self.hello(from, env.seq, version.clone());
        }

        let key = (from, env.channel);
        if self.seen.get(&key).is_some_and(|&last| env.seq <= last) {
            // Duplicate or reordered retransmission.
            return IngestOutput::default();
        }
        self.seen.insert(key, env.seq);

        if !self.is_joined(from) {
            return self.reject(from, &env, RejectReason::NotJoined);
        }
        if !env.channel_is_legal() {
            return self.reject(from, &env, RejectReason::WrongChannel);
        }
        match &env.payload {
            Payload::Unknown(_) => self.reject(from, &env, RejectReason::Unsupported),
            Payload::Control(ControlFrame::Ping { nonce }) => {
                let pong = self.frame(ControlFrame::Pong { nonce: *nonce });
                IngestOutput {
                    outbound: vec![Outbound::To(from, pong)],
                    ..Default::default()
                }
            }
            Payload::Control(ControlFrame::Bye { .. }) => {
                let outs = self.disconnect(from);
                merge(outs)
            }
            Payload::Control(_) => self.reject(from, &env, RejectReason::Unsupported),
            Payload::Event(event) => {
                if event.authority() != from.role() {
                    return self.reject(from, &env, RejectReason::Forbidden);
                }
                self.apply(from, env)
            }
        }
    }

    fn hello(&mut self, from: Sender, seq: u64, version: String) -> IngestOutput {
        if from == Sender::TeacherHost {
            return IngestOutput {
                rejected: Some(RejectReason::Forbidden),
                ..Default::default()
            };
        }
        let key = (from, Channel::Control);
        if self.joined.contains(&from) && self.seen.get(&key).is_some_and(|&last| seq <= last) {
            return IngestOutput::default();
        }
        if version != PROTOCOL_VERSION {
            let bye = self.frame(ControlFrame::Bye {
                reason: format!("incompatible protocol version {version:?}, expected {PROTOCOL_VERSION:?}"),
            });
            return IngestOutput {
                outbound: vec![Outbound::To(from, bye)],
                rejected: Some(RejectReason::Unsupported),
                ..Default::default()
            };
        }
        // A fresh connection restarts its sequence numbers.
        for ch in Channel::ALL {
            self.seen.remove(&(from, ch));
        }
        self.seen.insert(key, seq);
        self.joined.insert(from);
        let welcome = self.frame(ControlFrame::Welcome {
            version: PROTOCOL_VERSION.to_owned(),
            snapshot: snapshot(&self.state),
            horizon: self.order,
        });
        IngestOutput {
            outbound: vec![Outbound::To(from, welcome)],
            ..Default::default()
        }
    }

    fn apply(&mut self, from: Sender, mut env: Envelope) -> IngestOutput {
        let (next, effects) = match apply_envelope(&self.state, &env, &self.ctx) {
            Ok(applied) => applied,
            Err(reason) => return self.reject(from, &env, reason),
        };
        self.state = next;
        self.order += 1;
        env.order = Some(self.order);
        if let Some(Event::SketchBegin { id, .. }) = env.as_event() {
            self.sketch_authors.insert(*id, from);
        }
        self.log.push(env.clone());

        let mut outbound = Vec::new();
        if env.channel == Channel::Pose && from != Sender::TeacherHost {
            let ack = self.frame(ControlFrame::Ack {
                channel: env.channel,
                seq: env.seq,
                order: self.order,
            });
            outbound.push(Outbound::To(from, ack));
            outbound.push(Outbound::Broadcast {
                except: Some(from),
                envelope: env.clone(),
            });
        } else {
            outbound.push(Outbound::Broadcast {
                except: None,
                envelope: env.clone(),
            });
        }
        IngestOutput {
            outbound,
            applied: vec![env],
            effects,
            rejected: None,
        }
    }

    /// Drops a peer. Sketches it left open are closed on its behalf.
    pub fn disconnect(&mut self, peer: Sender) -> Vec<IngestOutput> {
        self.joined.remove(&peer);
        let open: Vec<AnnotationId> = self
            .sketch_authors
            .iter()
            .filter(|(id, author)| {
                **author == peer && self.state.sketches.get(id).is_some_and(|s| !s.closed)
            })
            .map(|(id, _)| *id)
            .collect();
        open.into_iter()
            .map(|id| self.submit(Event::SketchEnd { id }))
            .collect()
    }
}

fn merge(outs: Vec<IngestOutput>) -> IngestOutput {
    let mut all = IngestOutput::default();
    for o in outs {
        all.outbound.extend(o.outbound);
        all.effects.extend(o.effects);
        all.applied.extend(o.applied);
    }
    all
}
