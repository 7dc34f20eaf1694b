//! A scripted peer that plays a timeline against a live host.

use std::io;
use std::net::{TcpStream, ToSocketAddrs};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::{Duration, Instant};

use log::{debug, error, info, warn};
use tutorlink_core::navigation::NavConfig;
use tutorlink_core::net_harness::TimedEvent;
use tutorlink_core::protocol::{read_frame, write_frame, Envelope, PoseThrottle, Replica, Sender};
use tutorlink_core::scene::{AnatomyScene, SceneConfig};
use tutorlink_core::session_state::{Event, ReducerContext};

use crate::ExitCode;

pub struct BotOptions {
    pub role: Sender,
    pub time_scale: f64,
    pub expect_rejects: bool,
    pub send_rate_hz: f64,
    /// How long to wait for the host's verdict on every sent event.
    pub settle_timeout: Duration,
    /// Scene and navigation settings the local replica applies events with.
    /// Must match the host's.
    pub context: ReducerContext,
}

impl Default for BotOptions {
    fn default() -> Self {
        BotOptions {
            role: Sender::StudentClient,
            time_scale: 1.0,
            expect_rejects: false,
            send_rate_hz: tutorlink_core::protocol::DEFAULT_SEND_RATE_HZ,
            settle_timeout: Duration::from_secs(10),
            context: ReducerContext::new(
                std::sync::Arc::new(AnatomyScene::sample(&SceneConfig::default())),
                NavConfig::default(),
            ),
        }
    }
}

enum Inbound {
    Envelope(Envelope),
    Closed(Option<String>),
}

fn connect(address: &str) -> io::Result<TcpStream> {
    let mut last = io::Error::new(io::ErrorKind::NotFound, "address resolved to nothing");
    for addr in address.to_socket_addrs()? {
        match TcpStream::connect_timeout(&addr, Duration::from_secs(3)) {
            Ok(s) => return Ok(s),
            Err(e) => last = e,
        }
    }
    Err(last)
}

fn spawn_reader(mut stream: TcpStream) -> Receiver<Inbound> {
    let (tx, rx) = mpsc::channel();
    thread::spawn(move || loop {
        match read_frame(&mut stream) {
            Ok(Some(env)) => {
                if tx.send(Inbound::Envelope(env)).is_err() {
                    break;
                }
            }
            Ok(None) => {
                let _ = tx.send(Inbound::Closed(None));
                break;
            }
            Err(e) => {
                let _ = tx.send(Inbound::Closed(Some(e.to_string())));
                break;
            }
        }
    });
    rx
}

struct Session {
    replica: Replica,
    writer: TcpStream,
    inbox: Receiver<Inbound>,
    closed: bool,
    failed: bool,
}

impl Session {
    /// Handles everything that arrived, waiting at most `wait` for the first.
    fn pump(&mut self, wait: Duration) {
        let mut timeout = wait;
        loop {
            let msg = match self.inbox.recv_timeout(timeout) {
                Ok(m) => m,
                Err(RecvTimeoutError::Timeout) => return,
                Err(RecvTimeoutError::Disconnected) => {
                    self.closed = true;
                    return;
                }
            };
            timeout = Duration::ZERO;
            match msg {
                Inbound::Envelope(env) => {
                    let before = self.replica.rejections().len();
                    if let Err(e) = self.replica.receive(env) {
                        error!("replica: {e} (is the bot using the host's scene?)");
                        self.failed = true;
                    }
                    for (channel, seq, reason) in &self.replica.rejections()[before..] {
                        warn!("host rejected {channel} #{seq}: {reason}");
                    }
                    if let Some(reason) = self.replica.closed() {
                        info!("host said goodbye: {reason}");
                        self.closed = true;
                    }
                }
                Inbound::Closed(reason) => {
                    if let Some(r) = reason {
                        debug!("connection closed: {r}");
                    }
                    self.closed = true;
                    return;
                }
            }
        }
    }

    fn send(&mut self, event: Event) -> io::Result<()> {
        let env = self.replica.send(event);
        write_frame(&mut self.writer, &env)
    }
}

fn pose_timestamp(event: &Event) -> Option<u64> {
    match event {
        Event::PoseUpdate { timestamp_ms, .. } => Some(*timestamp_ms),
        _ => None,
    }
}

/// Plays `timeline` against the host at `address`. Exit 0 when every event
/// got a verdict and none was rejected (unless rejections are expected).
pub fn cmd_bot(address: &str, timeline: Vec<TimedEvent>, opts: &BotOptions) -> ExitCode {
    let stream = match connect(address) {
        Ok(s) => s,
        Err(e) => {
            eprintln!("error: cannot reach {address}: {e}");
            return ExitCode::Connectivity;
        }
    };
    let _ = stream.set_nodelay(true);
    let writer = match stream.try_clone() {
        Ok(w) => w,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::Connectivity;
        }
    };
    let ctx = opts.context.clone();
    let mut session = Session {
        replica: Replica::new(opts.role, ctx),
        writer,
        inbox: spawn_reader(stream),
        closed: false,
        failed: false,
    };

    let hello = session.replica.hello();
    if let Err(e) = write_frame(&mut session.writer, &hello) {
        eprintln!("error: {e}");
        return ExitCode::Connectivity;
    }
    let deadline = Instant::now() + Duration::from_secs(5);
    while !session.replica.is_welcomed() && !session.closed && Instant::now() < deadline {
        session.pump(Duration::from_millis(50));
    }
    if !session.replica.is_welcomed() {
        eprintln!("error: host did not welcome {}", opts.role);
        return ExitCode::Connectivity;
    }
    info!("joined as {}; playing {} events", opts.role, timeline.len());

    let mut throttle: PoseThrottle<Event> = PoseThrottle::new(opts.send_rate_hz);
    let start = Instant::now();
    for action in timeline {
        let due = Duration::from_secs_f64(action.t_ms as f64 * 1e-3 * opts.time_scale);
        loop {
            let now = start.elapsed();
            if now >= due {
                break;
            }
            session.pump((due - now).min(Duration::from_millis(20)));
        }
        if session.closed {
            eprintln!("error: host closed the connection");
            return ExitCode::Connectivity;
        }
        let result = match pose_timestamp(&action.event) {
            Some(ts) => match throttle.offer(ts, action.event) {
                Some(ev) => session.send(ev),
                None => Ok(()),
            },
            None => session.send(action.event),
        };
        if let Err(e) = result {
            eprintln!("error: send failed: {e}");
            return ExitCode::Connectivity;
        }
    }
    if let Some(ev) = throttle.next_due_ms().and_then(|t| throttle.poll(t)) {
        if let Err(e) = session.send(ev) {
            eprintln!("error: send failed: {e}");
            return ExitCode::Connectivity;
        }
    }

    let deadline = Instant::now() + opts.settle_timeout;
    while session.replica.outstanding() > 0 && !session.closed && Instant::now() < deadline {
        session.pump(Duration::from_millis(20));
    }
    let outstanding = session.replica.outstanding();
    let bye = session.replica.bye("script finished");
    let _ = write_frame(&mut session.writer, &bye);
    let _ = session.writer.shutdown(std::net::Shutdown::Write);

    if outstanding > 0 {
        eprintln!("error: {outstanding} events never acknowledged");
        return ExitCode::Connectivity;
    }
    if session.failed {
        return ExitCode::Semantic;
    }
    let rejected = session.replica.rejections().len();
    info!(
        "done: applied through order {}, {rejected} rejected",
        session.replica.applied_order()
    );
    if rejected > 0 && !opts.expect_rejects {
        eprintln!("error: {rejected} scripted events were rejected");
        return ExitCode::Semantic;
    }
    ExitCode::Ok
}
