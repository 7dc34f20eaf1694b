//! The live host. One writer loop owns the `HostState`; every connection has
//! a reader that feeds it envelopes in arrival order.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::path::Path;
use std::sync::mpsc::{self, Receiver, Sender as Tx};
use std::sync::Arc;
use std::thread;
use std::time::Duration;

use log::{debug, info, warn};
use tungstenite::{Message, WebSocket};
use tutorlink_core::net_harness::{LogHeader, LogWriter, SceneSource};
use tutorlink_core::protocol::{
    read_frame, write_frame, ControlFrame, Envelope, HostState, IngestOutput, Outbound, Payload,
    Sender,
};
use tutorlink_core::scene::AnatomyScene;
use tutorlink_core::session_state::ReducerContext;

use crate::config::ServeConfig;
use crate::ExitCode;

type ConnId = u64;

enum Msg {
    Open { conn: ConnId, out: Tx<Envelope> },
    Frame { conn: ConnId, envelope: Envelope },
    Closed { conn: ConnId },
    Shutdown,
}

struct Conn {
    out: Tx<Envelope>,
    role: Option<Sender>,
}

/// Bytes served at `GET /scene`: the mesh and metadata a viewer needs.
pub fn scene_asset(source: &SceneSource, scene: &AnatomyScene) -> io::Result<String> {
    let (mesh_obj, config) = match source {
        SceneSource::Files { mesh, config, .. } => (std::fs::read_to_string(mesh)?, config),
        SceneSource::Sample { config } => (tutorlink_core::scene::fixture::skull_dome_obj(), config),
    };
    let metadata: serde_json::Value =
        serde_json::from_str(&scene.metadata_json()).expect("metadata json is valid");
    Ok(serde_json::json!({
        "world_scale": config.world_scale,
        "walk_barrier": config.walk_barrier,
        "metadata": metadata,
        "mesh_obj": mesh_obj,
    })
    .to_string())
}

fn header_end(buf: &[u8]) -> bool {
    buf.windows(4).any(|w| w == b"\r\n\r\n")
}

/// Looks at the request head without consuming it. A plain `GET /scene`
/// gets the asset; everything else goes on to the WebSocket handshake.
fn is_scene_request(stream: &TcpStream) -> io::Result<bool> {
    let mut buf = [0u8; 4096];
    stream.set_read_timeout(Some(Duration::from_secs(5)))?;
    let mut n;
    loop {
        n = stream.peek(&mut buf)?;
        if n == 0 || header_end(&buf[..n]) || n == buf.len() {
            break;
        }
        thread::sleep(Duration::from_millis(5));
    }
    let head = String::from_utf8_lossy(&buf[..n]).to_ascii_lowercase();
    let path_is_scene = head.starts_with("get /scene ") || head.starts_with("get /scene?");
    Ok(path_is_scene && !head.contains("upgrade: websocket"))
}

fn serve_scene(mut stream: TcpStream, asset: &str) -> io::Result<()> {
    let mut sink = [0u8; 4096];
    let _ = stream.read(&mut sink)?;
    write!(
        stream,
        "HTTP/1.1 200 OK\r\nContent-Type: application/json\r\nContent-Length: {}\r\nAccess-Control-Allow-Origin: *\r\nConnection: close\r\n\r\n",
        asset.len()
    )?;
    stream.write_all(asset.as_bytes())?;
    stream.flush()
}

fn native_conn(stream: TcpStream, conn: ConnId, tx: Tx<Msg>) -> io::Result<()> {
    let (out_tx, out_rx) = mpsc::channel::<Envelope>();
    let mut writer = stream.try_clone()?;
    let _ = tx.send(Msg::Open { conn, out: out_tx });
    thread::spawn(move || {
        for env in out_rx {
            if write_frame(&mut writer, &env).is_err() {
                break;
            }
        }
        let _ = writer.shutdown(std::net::Shutdown::Both);
    });
    let mut reader = stream;
    loop {
        match read_frame(&mut reader) {
            Ok(Some(envelope)) => {
                if tx.send(Msg::Frame { conn, envelope }).is_err() {
                    break;
                }
            }
            Ok(None) => break,
            Err(e) => {
                warn!("connection {conn}: {e}");
                break;
            }
        }
    }
    let _ = tx.send(Msg::Closed { conn });
    Ok(())
}

fn ws_conn(stream: TcpStream, conn: ConnId, tx: Tx<Msg>) -> io::Result<()> {
    stream.set_read_timeout(None)?;
    let mut ws: WebSocket<TcpStream> =
        tungstenite::accept(stream).map_err(|e| io::Error::other(e.to_string()))?;
    ws.get_ref().set_read_timeout(Some(Duration::from_millis(20)))?;
    let (out_tx, out_rx) = mpsc::channel::<Envelope>();
    let _ = tx.send(Msg::Open { conn, out: out_tx });
    'conn: loop {
        loop {
            match out_rx.try_recv() {
                Ok(env) => {
                    if ws.send(Message::text(env.to_json())).is_err() {
                        break 'conn;
                    }
                }
                Err(mpsc::TryRecvError::Empty) => break,
                Err(mpsc::TryRecvError::Disconnected) => break 'conn,
            }
        }
        match ws.read() {
            Ok(Message::Text(text)) => match Envelope::from_json(text.as_bytes()) {
                Ok(envelope) => {
                    if tx.send(Msg::Frame { conn, envelope }).is_err() {
                        break;
                    }
                }
                Err(e) => warn!("websocket {conn}: {e}"),
            },
            Ok(Message::Close(_)) => break,
            Ok(_) => {}
            Err(tungstenite::Error::Io(e))
                if matches!(e.kind(), io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut) => {}
            Err(e) => {
                debug!("websocket {conn}: {e}");
                break;
            }
        }
    }
    let _ = tx.send(Msg::Closed { conn });
    Ok(())
}

fn accept_loop<F>(listener: TcpListener, tx: Tx<Msg>, first_id: ConnId, handler: F)
where
    F: Fn(TcpStream, ConnId, Tx<Msg>) -> io::Result<()> + Send + Sync + 'static,
{
    let handler = Arc::new(handler);
    thread::spawn(move || {
        let mut next = first_id;
        for stream in listener.incoming() {
            let Ok(stream) = stream else { continue };
            let _ = stream.set_nodelay(true);
            let id = next;
            next += 2;
            let tx = tx.clone();
            let handler = Arc::clone(&handler);
            thread::spawn(move || {
                if let Err(e) = handler(stream, id, tx) {
                    debug!("connection {id}: {e}");
                }
            });
        }
    });
}

/// Addresses actually bound, useful when ports are 0.
#[derive(Debug, Clone, Copy)]
pub struct Bound {
    pub native: SocketAddr,
    pub ws: SocketAddr,
}

fn bind(port: u16) -> io::Result<TcpListener> {
    TcpListener::bind(("0.0.0.0", port))
}

/// Runs the host until SIGINT. Returns the process exit code.
pub fn cmd_serve(config: &ServeConfig) -> ExitCode {
    let scene = match config.scene.load(Path::new(".")) {
        Ok(s) => Arc::new(s),
        Err(e) => {
            eprintln!("error: scene: {e}");
            return ExitCode::Config;
        }
    };
    let asset = match scene_asset(&config.scene, &scene) {
        Ok(a) => Arc::new(a),
        Err(e) => {
            eprintln!("error: scene asset: {e}");
            return ExitCode::Config;
        }
    };
    let (native, ws) = match (bind(config.port), bind(config.ws_port)) {
        (Ok(n), Ok(w)) => (n, w),
        (Err(e), _) | (_, Err(e)) => {
            eprintln!("error: cannot listen: {e}");
            return ExitCode::Connectivity;
        }
    };
    let log_file = match File::create(&config.log) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: cannot create log {}: {e}", config.log.display());
            return ExitCode::Config;
        }
    };
    let header = LogHeader::new(config.scene.clone(), config.nav);
    let mut log = match LogWriter::new(BufWriter::new(log_file), &header) {
        Ok(l) => l,
        Err(e) => {
            eprintln!("error: writing log: {e}");
            return ExitCode::Config;
        }
    };

    let bound = Bound {
        native: native.local_addr().expect("bound socket has an address"),
        ws: ws.local_addr().expect("bound socket has an address"),
    };
    let (tx, rx) = mpsc::channel::<Msg>();
    let stop = tx.clone();
    if let Err(e) = ctrlc::set_handler(move || {
        let _ = stop.send(Msg::Shutdown);
    }) {
        warn!("no interrupt handler: {e}");
    }
    accept_loop(native, tx.clone(), 1, native_conn);
    let ws_asset = Arc::clone(&asset);
    accept_loop(ws, tx, 2, move |stream, id, tx| {
        if is_scene_request(&stream)? {
            serve_scene(stream, &ws_asset)
        } else {
            ws_conn(stream, id, tx)
        }
    });
    println!("listening native={} ws={} log={}", bound.native, bound.ws, config.log.display());
    let _ = io::stdout().flush();
    info!("scene has {} structures", scene.len());

    let host = HostState::new(ReducerContext::new(scene, config.nav));
    match writer_loop(host, rx, &mut log) {
        Ok(host) => match log.finish(host.state()) {
            Ok(_) => {
                info!("session closed after {} events", host.order());
                ExitCode::Ok
            }
            Err(e) => {
                eprintln!("error: writing log footer: {e}");
                ExitCode::Semantic
            }
        },
        Err(e) => {
            eprintln!("error: writing log: {e}");
            ExitCode::Semantic
        }
    }
}

fn writer_loop<W: Write>(
    mut host: HostState,
    rx: Receiver<Msg>,
    log: &mut LogWriter<W>,
) -> io::Result<HostState> {
    let mut conns: BTreeMap<ConnId, Conn> = BTreeMap::new();
    let mut by_role: BTreeMap<Sender, ConnId> = BTreeMap::new();

    let deliver = |out: IngestOutput,
                   host: &HostState,
                   conns: &BTreeMap<ConnId, Conn>,
                   by_role: &BTreeMap<Sender, ConnId>,
                   log: &mut LogWriter<W>|
     -> io::Result<()> {
        for env in &out.applied {
            log.append(env)?;
        }
        if let Some(reason) = out.rejected {
            debug!("rejected: {reason}");
        }
        let send_to = |peer: Sender, env: &Envelope| {
            if let Some(c) = by_role.get(&peer).and_then(|id| conns.get(id)) {
                let _ = c.out.send(env.clone());
            }
        };
        for o in &out.outbound {
            match o {
                Outbound::To(peer, env) => send_to(*peer, env),
                Outbound::Broadcast { except, envelope } => {
                    for peer in host.joined().filter(|p| Some(*p) != *except) {
                        send_to(peer, envelope);
                    }
                }
            }
        }
        Ok(())
    };

    for msg in rx {
        match msg {
            Msg::Open { conn, out } => {
                debug!("connection {conn} open");
                conns.insert(conn, Conn { out, role: None });
            }
            Msg::Frame { conn, envelope } => {
                let Some(c) = conns.get_mut(&conn) else { continue };
                let role = match c.role {
                    Some(r) => r,
                    None => {
                        let is_hello = matches!(envelope.payload, Payload::Control(ControlFrame::Hello { .. }));
                        let claimed = envelope.sender;
                        if !is_hello || claimed == Sender::TeacherHost || by_role.contains_key(&claimed) {
                            let reason = if is_hello {
                                format!("{claimed} cannot join")
                            } else {
                                "expected hello".to_owned()
                            };
                            let _ = c.out.send(host.frame(ControlFrame::Bye { reason }));
                            conns.remove(&conn);
                            continue;
                        }
                        c.role = Some(claimed);
                        by_role.insert(claimed, conn);
                        info!("{claimed} joined on connection {conn}");
                        claimed
                    }
                };
                let out = host.ingest(role, envelope);
                deliver(out, &host, &conns, &by_role, log)?;
            }
            Msg::Closed { conn } => {
                if let Some(Conn { role: Some(role), .. }) = conns.remove(&conn) {
                    by_role.remove(&role);
                    info!("{role} left");
                    for out in host.disconnect(role) {
                        deliver(out, &host, &conns, &by_role, log)?;
                    }
                }
            }
            Msg::Shutdown => {
                info!("interrupted, closing session");
                for c in conns.values() {
                    let bye = host.frame(ControlFrame::Bye {
                        reason: "host shutting down".into(),
                    });
                    let _ = c.out.send(bye);
                }
                break;
            }
        }
    }
    Ok(host)
}
