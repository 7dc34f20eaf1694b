/// Default outgoing pose rate.
pub const DEFAULT_SEND_RATE_HZ: f64 = 30.0;

/// Rate limiter for pose streams. The newest sample wins; a sample is sent
/// once at least one period has passed since the last send, so the output
/// never exceeds the configured rate.
#[derive(Clone, Debug)]
pub struct PoseThrottle<T> {
    rate_hz: f64,
    last_input: Option<u64>,
    last_emit: Option<u64>,
    pending: Option<(u64, T)>,
}

impl<T> PoseThrottle<T> {
    pub fn new(rate_hz: f64) -> Self {
        assert!(rate_hz.is_finite() && rate_hz > 0.0, "rate must be positive");
        PoseThrottle {
            rate_hz,
            last_input: None,
            last_emit: None,
            pending: None,
        }
    }

    pub fn rate_hz(&self) -> f64 {
        self.rate_hz
    }

    fn due(&self, now_ms: u64) -> bool {
        self.last_emit
            .is_none_or(|last| (now_ms.saturating_sub(last)) as f64 * self.rate_hz >= 1000.0)
    }

    /// Offers a sample taken at `ts_ms`. Returns it right away if a send is
    /// due. Samples not newer than the previous input are dropped.
    pub fn offer(&mut self, ts_ms: u64, item: T) -> Option<T> {
        if self.last_input.is_some_and(|last| ts_ms <= last) {
            return None;
        }
        self.last_input = Some(ts_ms);
        self.pending = Some((ts_ms, item));
        self.poll(ts_ms)
    }

    /// Emits the pending sample if one is waiting and a send is due at `now_ms`.
    pub fn poll(&mut self, now_ms: u64) -> Option<T> {
        if self.pending.is_some() && self.due(now_ms) {
            self.last_emit = Some(now_ms);
            self.pending.take().map(|(_, item)| item)
        } else {
            None
        }
    }

    /// Timestamp at which the pending sample becomes sendable.
    pub fn next_due_ms(&self) -> Option<u64> {
        self.pending.as_ref()?;
        Some(match self.last_emit {
            None => 0,
            Some(last) => last + (1000.0 / self.rate_hz).ceil() as u64,
        })
    }

    pub fn has_pending(&self) -> bool {
        self.pending.is_some()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn latest_sample_wins() {
        let mut t = PoseThrottle::new(30.0);
        assert_eq!(t.offer(0, "a"), Some("a"));
        assert_eq!(t.offer(10, "b"), None);
        assert_eq!(t.offer(20, "c"), None);
        assert_eq!(t.poll(33), None);
        assert_eq!(t.poll(34), Some("c"));
        assert_eq!(t.poll(100), None);
    }

    #[test]
    fn old_inputs_are_dropped() {
        let mut t = PoseThrottle::new(30.0);
        t.offer(50, 1);
        assert_eq!(t.offer(50, 2), None);
        assert_eq!(t.offer(40, 3), None);
        assert!(!t.has_pending());
    }

    #[test]
    fn output_rate_is_bounded() {
        let mut t = PoseThrottle::new(30.0);
        let mut sent = Vec::new();
        for i in 0..900u64 {
            let ts = i * 1000 / 90;
            if t.offer(ts, ts).is_some() {
                sent.push(ts);
            }
        }
        assert!(sent.windows(2).all(|w| (w[1] - w[0]) as f64 * 30.0 >= 1000.0));
        assert!(sent.len() as f64 <= 10.0 * 30.0 + 1.0);
    }
}
