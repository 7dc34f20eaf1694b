use std::collections::{BTreeMap, BTreeSet};

use super::host::apply_envelope;
use super::wire::{Channel, ControlFrame, Envelope, Payload, Sender, PROTOCOL_VERSION};
use crate::session_state::{
    apply_snapshot, DerivedEffect, Event, ReducerContext, RejectReason, SessionState,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ReplicaError {
    #[error("host sent incompatible version {0:?}")]
    Version(String),
    #[error("event with order {order} was accepted by the host but rejected locally: {reason}")]
    Diverged { order: u64, reason: RejectReason },
    #[error("ordered envelope from the host has no order number")]
    MissingOrder,
}

/// Client-side copy of the session. Applies host-ordered events contiguously
/// and never validates on its own authority.
#[derive(Clone, Debug)]
pub struct Replica {
    me: Sender,
    ctx: ReducerContext,
    state: SessionState,
    welcomed: bool,
    next_order: u64,
    pending: BTreeMap<u64, Envelope>,
    /// Own pose events waiting for the host's Ack.
    unacked_pose: BTreeMap<u64, Envelope>,
    next_seq: BTreeMap<Channel, u64>,
    /// Sent events the host has neither echoed, acked nor rejected.
    outstanding: BTreeSet<(Channel, u64)>,
    last_control_seq: u64,
    rejections: Vec<(Channel, u64, RejectReason)>,
    effects: Vec<DerivedEffect>,
    closed: Option<String>,
}

impl Replica {
    pub fn new(me: Sender, ctx: ReducerContext) -> Self {
        Replica {
            me,
            ctx,
            state: SessionState::default(),
            welcomed: false,
            next_order: 1,
            pending: BTreeMap::new(),
            unacked_pose: BTreeMap::new(),
            next_seq: BTreeMap::new(),
            outstanding: BTreeSet::new(),
            last_control_seq: 0,
            rejections: Vec::new(),
            effects: Vec::new(),
            closed: None,
        }
    }

    pub fn me(&self) -> Sender {
        self.me
    }

    pub fn state(&self) -> &SessionState {
        &self.state
    }

    pub fn context(&self) -> &ReducerContext {
        &self.ctx
    }

    pub fn is_welcomed(&self) -> bool {
        self.welcomed
    }

    /// Order number of the last applied event.
    pub fn applied_order(&self) -> u64 {
        self.next_order - 1
    }

    /// Count of sent events still waiting for the host's verdict.
    pub fn outstanding(&self) -> usize {
        self.outstanding.len()
    }

    pub fn rejections(&self) -> &[(Channel, u64, RejectReason)] {
        &self.rejections
    }

    /// Reason the host closed the session, if it did.
    pub fn closed(&self) -> Option<&str> {
        self.closed.as_deref()
    }

    /// Effects from applied events since the last call.
    pub fn take_effects(&mut self) -> Vec<DerivedEffect> {
        std::mem::take(&mut self.effects)
    }

    /// Number of events buffered behind a gap in the order.
    pub fn buffered(&self) -> usize {
        self.pending.len()
    }

    fn take_seq(&mut self, channel: Channel) -> u64 {
        let slot = self.next_seq.entry(channel).or_insert(0);
        *slot += 1;
        *slot
    }

    pub fn hello(&mut self) -> Envelope {
        let seq = self.take_seq(Channel::Control);
        Envelope::control(
            seq,
            self.me,
            ControlFrame::Hello {
                version: PROTOCOL_VERSION.to_owned(),
            },
        )
    }

    pub fn bye(&mut self, reason: &str) -> Envelope {
        let seq = self.take_seq(Channel::Control);
        Envelope::control(seq, self.me, ControlFrame::Bye { reason: reason.to_owned() })
    }

    /// Wraps a local event for sending. Nothing is applied until the host
    /// orders it.
    pub fn send(&mut self, event: Event) -> Envelope {
        let channel = Channel::for_event(&event);
        let seq = self.take_seq(channel);
        let env = Envelope::event(channel, seq, self.me, event);
        self.outstanding.insert((channel, seq));
        if channel == Channel::Pose {
            self.unacked_pose.insert(seq, env.clone());
        }
        env
    }

    /// Handles one envelope from the host.
    pub fn receive(&mut self, env: Envelope) -> Result<(), ReplicaError> {
        if let Some(order) = env.order {
            if env.as_event().is_some() {
                if env.sender == self.me {
                    self.outstanding.remove(&(env.channel, env.seq));
                }
                if order >= self.next_order {
                    self.pending.entry(order).or_insert(env);
                }
                return self.drain();
            }
        }
        match env.payload {
            Payload::Event(_) => Err(ReplicaError::MissingOrder),
            Payload::Unknown(_) => Ok(()),
            Payload::Control(frame) => {
                if env.seq <= self.last_control_seq {
                    return Ok(());
                }
                self.last_control_seq = env.seq;
                self.control(frame)
            }
        }
    }

    fn control(&mut self, frame: ControlFrame) -> Result<(), ReplicaError> {
        match frame {
            ControlFrame::Welcome {
                version,
                snapshot,
                horizon,
            } => {
                if version != PROTOCOL_VERSION {
                    return Err(ReplicaError::Version(version));
                }
                self.state = apply_snapshot(&snapshot);
                self.welcomed = true;
                self.next_order = horizon + 1;
                self.pending = self.pending.split_off(&self.next_order);
                self.drain()
            }
            ControlFrame::Ack {
                channel: Channel::Pose,
                seq,
                order,
            } => {
                self.outstanding.remove(&(Channel::Pose, seq));
                if let Some(mut env) = self.unacked_pose.remove(&seq) {
                    // Earlier unacked samples were dropped by the host.
                    self.unacked_pose = self.unacked_pose.split_off(&seq);
                    if order >= self.next_order {
                        env.order = Some(order);
                        self.pending.insert(order, env);
                    }
                }
                self.drain()
            }
            ControlFrame::Reject {
                channel,
                seq,
                reason,
            } => {
                if channel == Channel::Pose {
                    self.unacked_pose.remove(&seq);
                }
                self.outstanding.remove(&(channel, seq));
                self.rejections.push((channel, seq, reason));
                Ok(())
            }
            ControlFrame::Bye { reason } => {
                self.closed = Some(reason);
                Ok(())
            }
            _ => Ok(()),
        }
    }

    fn drain(&mut self) -> Result<(), ReplicaError> {
        if !self.welcomed {
            return Ok(());
        }
        while let Some(env) = self.pending.remove(&self.next_order) {
            let (next, effects) = apply_envelope(&self.state, &env, &self.ctx).map_err(|reason| {
                ReplicaError::Diverged {
                    order: self.next_order,
                    reason,
                }
            })?;
            self.state = next;
            self.effects.extend(effects);
            self.next_order += 1;
        }
        Ok(())
    }
}
