//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any fails. Tolerances and time budgets are pinned below.

mod common;

use std::collections::HashMap;
use std::process::ExitCode;
use std::sync::Arc;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tutorlink_core::geometry::{
    build_bvh, capsule_clear, clamp_teleport, sweep_tube, Capsule, Ray, TeleportOutcome,
    TriangleMesh, Vec3,
};
use tutorlink_core::navigation::NavConfig;
use tutorlink_core::net_harness::{
    check_reposition_discreteness, fixture_bots, random_events, run_sim, Interleaving, LogEntry,
    SessionLog, SimSchedule, FIXTURE_DURATION_MS,
};
use tutorlink_core::protocol::{apply_envelope, HostState, PoseThrottle};
use tutorlink_core::scene::{AnatomyScene, SceneConfig};
use tutorlink_core::session_state::{
    apply_event, state_digest, Event, ReducerContext, SessionState,
};

const RAY_DISTANCE_TOLERANCE: f64 = 1e-9;
const WALL_CLAMP_TOLERANCE: f64 = 1e-9;
/// Largest platform move a single free-fly pose may make. Anything larger
/// counts as a discontinuity.
const MAX_CONTINUOUS_STEP: f64 = 0.25;

const BVH_BUDGET: Duration = Duration::from_secs(5);
const TELEPORT_BUDGET: Duration = Duration::from_secs(10);
const TUBE_BUDGET: Duration = Duration::from_secs(5);
const CONVERGENCE_BUDGET: Duration = Duration::from_secs(60);

type Verdict = Result<String, String>;

fn ctx() -> ReducerContext {
    ReducerContext::new(
        Arc::new(AnatomyScene::sample(&SceneConfig::default())),
        NavConfig::default(),
    )
}

fn within(budget: Duration, started: Instant) -> Result<Duration, String> {
    let took = started.elapsed();
    if took < budget {
        Ok(took)
    } else {
        Err(format!("took {took:.2?}, budget {budget:?}"))
    }
}

// ---------------------------------------------------------------- geometry

/// Subdivided icosahedron projected to the unit sphere: 20·4^levels triangles.
fn icosphere(levels: u32) -> TriangleMesh {
    let t = (1.0 + 5f64.sqrt()) / 2.0;
    let mut v: Vec<Vec3> = [
        (-1.0, t, 0.0), (1.0, t, 0.0), (-1.0, -t, 0.0), (1.0, -t, 0.0),
        (0.0, -1.0, t), (0.0, 1.0, t), (0.0, -1.0, -t), (0.0, 1.0, -t),
        (t, 0.0, -1.0), (t, 0.0, 1.0), (-t, 0.0, -1.0), (-t, 0.0, 1.0),
    ]
    .iter()
    .map(|&(x, y, z)| Vec3::new(x, y, z) / Vec3::new(x, y, z).length())
    .collect();
    let mut faces: Vec<[u32; 3]> = vec![
        [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
        [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
        [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
        [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
    ];
    for _ in 0..levels {
        let mut mid: HashMap<(u32, u32), u32> = HashMap::new();
        let mut midpoint = |a: u32, b: u32, v: &mut Vec<Vec3>| {
            *mid.entry((a.min(b), a.max(b))).or_insert_with(|| {
                let m = v[a as usize] + v[b as usize];
                v.push(m / m.length());
                v.len() as u32 - 1
            })
        };
        let mut next = Vec::with_capacity(faces.len() * 4);
        for [a, b, c] in faces {
            let ab = midpoint(a, b, &mut v);
            let bc = midpoint(b, c, &mut v);
            let ca = midpoint(c, a, &mut v);
            next.extend([[a, ab, ca], [b, bc, ab], [c, ca, bc], [ab, bc, ca]]);
        }
        faces = next;
    }
    TriangleMesh::new("icosphere", v, faces).unwrap()
}

/// Plane intersection plus same-side edge tests, nearest hit over every
/// triangle.
fn brute_force_cast(mesh: &TriangleMesh, o: Vec3, d: Vec3) -> Option<(f64, usize)> {
    let mut best: Option<(f64, usize)> = None;
    for i in 0..mesh.triangles().len() {
        let tri = mesh.triangle(i);
        let n = (tri[1] - tri[0]).cross(tri[2] - tri[0]);
        let denom = n.dot(d);
        if denom.abs() < 1e-15 {
            continue;
        }
        let t = n.dot(tri[0] - o) / denom;
        if t < 0.0 || best.is_some_and(|(bt, _)| t >= bt) {
            continue;
        }
        let p = o + d * t;
        if (0..3).all(|k| (tri[(k + 1) % 3] - tri[k]).cross(p - tri[k]).dot(n) >= 0.0) {
            best = Some((t, i));
        }
    }
    best
}

fn unit_vector(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
        let l = v.length();
        if l > 0.1 && l <= 1.0 {
            return v / l;
        }
    }
}

fn geometry_oracle() -> Verdict {
    let started = Instant::now();
    let mesh = icosphere(4);
    if mesh.triangles().len() != 5120 {
        return Err(format!("fixture has {} triangles", mesh.triangles().len()));
    }
    let bvh = build_bvh(std::slice::from_ref(&mesh)).map_err(|e| e.to_string())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    let mut hits = 0;
    for i in 0..1000 {
        // Origins inside and outside the sphere, aimed near it so most rays hit.
        let origin = Vec3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0));
        let aim = unit_vector(&mut rng) * rng.gen_range(0.0..1.2);
        let Ok(ray) = Ray::new(origin, aim - origin) else { continue };
        let got = bvh.ray_cast(&ray, f64::INFINITY);
        let want = brute_force_cast(&mesh, ray.origin, ray.direction);
        match (&got, want) {
            (None, None) => {}
            (Some(h), Some((t, tri)))
                if h.triangle_index == tri && (h.distance - t).abs() < RAY_DISTANCE_TOLERANCE =>
            {
                hits += 1
            }
            _ => return Err(format!("ray {i}: bvh {got:?}, brute force {want:?}")),
        }
    }
    let took = within(BVH_BUDGET, started)?;
    Ok(format!("1000 rays on 5120 triangles, {hits} hits, {took:.2?}"))
}

fn teleport_soundness() -> Verdict {
    let started = Instant::now();
    let c = ctx();
    let bvh = c.scene.bvh();
    let template = c.nav.capsule_template();
    let mut rng = ChaCha8Rng::seed_from_u64(0x7E1E);
    let (mut accepted, mut rejected) = (0, 0);
    for i in 0..10_000 {
        // Eye height inside the dome (radius 4 m at the default scale).
        let r = rng.gen_range(0.0..2.8f64);
        let a = rng.gen_range(0.0..std::f64::consts::TAU);
        let origin = Vec3::new(r * a.cos(), rng.gen_range(0.5..2.5), r * a.sin());
        let ray = Ray::new(origin, unit_vector(&mut rng)).unwrap();
        let desired = rng.gen_range(c.nav.beam_min..c.nav.beam_max);
        match clamp_teleport(bvh, &ray, desired, c.nav.margin, &template).map_err(|e| e.to_string())? {
            TeleportOutcome::Accepted { target, length } => {
                if !capsule_clear(bvh, &template.at(target)) || length > desired {
                    return Err(format!("attempt {i}: accepted {target:?} (length {length}) is not clear"));
                }
                accepted += 1;
            }
            TeleportOutcome::Rejected(_) => rejected += 1,
        }
    }

    let corners = [(5.0, -10.0, -10.0), (5.0, 10.0, -10.0), (5.0, 10.0, 10.0), (5.0, -10.0, 10.0)];
    let wall = TriangleMesh::new(
        "wall",
        corners.iter().map(|&(x, y, z)| Vec3::new(x, y, z)).collect(),
        vec![[0, 1, 2], [0, 2, 3]],
    )
    .unwrap();
    let wall = build_bvh(&[wall]).unwrap();
    let ray = Ray::new(Vec3::ZERO, Vec3::X).unwrap();
    let target = clamp_teleport(&wall, &ray, 20.0, 0.5, &Capsule::default())
        .map_err(|e| e.to_string())?
        .target()
        .ok_or("wall case rejected")?;
    if (target.x - 4.5).abs() > WALL_CLAMP_TOLERANCE {
        return Err(format!("wall case landed at x = {}", target.x));
    }
    let took = within(TELEPORT_BUDGET, started)?;
    Ok(format!("{accepted} accepted and clear, {rejected} rejected, wall clamp x = {}, {took:.2?}", target.x))
}

/// Directed edges without exactly one opposite partner.
fn open_edges(triangles: &[[u32; 3]]) -> usize {
    let mut directed: HashMap<(u32, u32), usize> = HashMap::new();
    for t in triangles {
        for i in 0..3 {
            *directed.entry((t[i], t[(i + 1) % 3])).or_default() += 1;
        }
    }
    directed
        .iter()
        .filter(|(&(a, b), &n)| n != 1 || directed.get(&(b, a)) != Some(&1))
        .count()
}

fn tube_construction() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x70BE);
    let mut meshes = 0;
    for p in 2..=50usize {
        let wobbly: Vec<Vec3> = (0..p)
            .map(|i| {
                let s = i as f64 * 0.05;
                Vec3::new(s.cos(), s, s.sin()) + unit_vector(&mut rng) * 0.01
            })
            .collect();
        let straight: Vec<Vec3> = (0..p).map(|i| Vec3::new(0.0, 0.0, -0.03 * i as f64)).collect();
        for r in [3usize, 8, 16] {
            for (shape, line) in [("wobbly", &wobbly), ("collinear", &straight)] {
                let tube = sweep_tube(line, 0.02, r).map_err(|e| format!("{shape} P={p} R={r}: {e}"))?;
                let v = tube.mesh.vertices();
                if v.len() != p * r + 2 {
                    return Err(format!("{shape} P={p} R={r}: {} vertices", v.len()));
                }
                if v.iter().chain(&tube.normals).any(|x| !x.is_finite()) {
                    return Err(format!("{shape} P={p} R={r}: non-finite output"));
                }
                let open = open_edges(tube.mesh.triangles());
                if open != 0 {
                    return Err(format!("{shape} P={p} R={r}: {open} open edges"));
                }
                meshes += 1;
            }
        }
    }
    let took = within(TUBE_BUDGET, started)?;
    Ok(format!("{meshes} tubes closed with P·R+2 vertices, {took:.2?}"))
}

// ------------------------------------------------------------------ state

fn reducer_determinism() -> Verdict {
    let c = ctx();
    let (mut accepted, mut rejected) = (0, 0);
    for seed in 0..100u64 {
        let events = random_events(seed, 300);
        let mut digests = Vec::new();
        for _ in 0..2 {
            let mut state = SessionState::default();
            for (i, e) in events.iter().enumerate() {
                let before = state_digest(&state);
                match apply_event(&state, e, &c) {
                    Ok((next, _)) => state = next,
                    Err(reason) => {
                        if state_digest(&state) != before {
                            return Err(format!("seed {seed} event {i}: rejection ({reason}) changed state"));
                        }
                    }
                }
            }
            digests.push(state_digest(&state));
        }
        if digests[0] != digests[1] {
            return Err(format!("seed {seed}: replays disagree"));
        }

        // The host path must be just as atomic: a rejected submission leaves
        // the authoritative digest alone.
        let mut host = HostState::new(c.clone());
        for (i, e) in events.iter().enumerate() {
            let before = state_digest(host.state());
            let out = host.submit(e.clone());
            if out.rejected.is_some() {
                rejected += 1;
                if state_digest(host.state()) != before {
                    return Err(format!("seed {seed} event {i}: host rejection changed state"));
                }
            } else {
                accepted += 1;
            }
        }
    }
    Ok(format!("100 logs × 300 events, {accepted} accepted, {rejected} rejected atomically"))
}

struct SimLogs {
    logs: Vec<(u64, SessionLog)>,
    summary: String,
}

fn convergence(c: &ReducerContext) -> Result<SimLogs, String> {
    let started = Instant::now();
    let bots = fixture_bots(&c.nav);
    let mut logs = Vec::new();
    let mut max_latency = 0;
    for seed in 0..100u64 {
        let mut s = SimSchedule::new(seed);
        s.jitter_ms = 200;
        s.duplication = 0.5;
        s.interleaving = if seed % 2 == 0 { Interleaving::SendOrder } else { Interleaving::Shuffle };
        let report = run_sim(&s, &bots, FIXTURE_DURATION_MS, c).map_err(|e| format!("seed {seed}: {e}"))?;
        if !report.converged || !report.errors.is_empty() {
            return Err(format!("seed {seed}: diverged {:?} {:?}", report.peers, report.errors));
        }
        if report.fifo_violations != 0 {
            return Err(format!("seed {seed}: {} FIFO violations", report.fifo_violations));
        }
        max_latency = max_latency.max(report.latency.max_ms);
        let entries = report
            .log
            .into_iter()
            .enumerate()
            .map(|(i, envelope)| LogEntry { line: i + 1, envelope })
            .collect();
        logs.push((seed, SessionLog { header: None, entries, footer: None }));
    }
    let took = within(CONVERGENCE_BUDGET, started)?;
    Ok(SimLogs {
        logs,
        summary: format!("100 seeds, jitter 200 ms, duplication 0.5, max latency {max_latency} ms, {took:.2?}"),
    })
}

/// Independent structural check: walk the log, and require that every
/// platform jump larger than a fly step comes from a teleport or reposition,
/// and that a reposition lands exactly on its target in one step.
fn count_discontinuities(log: &SessionLog, c: &ReducerContext) -> Result<(usize, usize), String> {
    let mut state = SessionState::default();
    let (mut jumps, mut repositions) = (0, 0);
    for entry in &log.entries {
        let before = state.student.platform.position;
        state = apply_envelope(&state, &entry.envelope, c).map_err(|r| format!("order {:?}: {r}", entry.envelope.order))?.0;
        let after = state.student.platform.position;
        let jumped = before.distance(after) > MAX_CONTINUOUS_STEP;
        match entry.envelope.as_event() {
            Some(Event::RepositionCommand { target }) => {
                repositions += 1;
                if after != *target {
                    return Err(format!("reposition to {target:?} left the platform at {after:?}"));
                }
                jumps += usize::from(jumped);
            }
            Some(Event::TeleportCommit { .. }) => {}
            _ if jumped => {
                return Err(format!("{} moved the platform {:.3} m", entry.envelope.order.unwrap_or(0), before.distance(after)))
            }
            _ => {}
        }
    }
    Ok((jumps, repositions))
}

fn reposition_discreteness(sims: &SimLogs, c: &ReducerContext) -> Verdict {
    let mut total = 0;
    for (seed, log) in &sims.logs {
        let (jumps, repositions) = count_discontinuities(log, c).map_err(|e| format!("seed {seed}: {e}"))?;
        if repositions == 0 || jumps != repositions {
            return Err(format!("seed {seed}: {jumps} discontinuities for {repositions} repositions"));
        }
        let checked = check_reposition_discreteness(log, c, MAX_CONTINUOUS_STEP).map_err(|e| format!("seed {seed}: {e}"))?;
        if checked != repositions {
            return Err(format!("seed {seed}: checker saw {checked} of {repositions} repositions"));
        }
        total += repositions;
    }
    Ok(format!("{total} repositions over {} logs, one jump each, none interpolated", sims.logs.len()))
}

fn pose_throttle() -> Verdict {
    const RATE: f64 = 30.0;
    let mut throttle = PoseThrottle::new(RATE);
    let mut emitted: Vec<(u64, u64)> = Vec::new();
    let mut latest: Option<u64> = None;
    let mut next_input = 0u64;
    let mut sample = 0u64;
    // One-millisecond ticks over 10 s; a 90 Hz sample arrives on schedule.
    for now in 0..=10_000u64 {
        if now == next_input {
            latest = Some(now);
            if let Some(ts) = throttle.offer(now, now) {
                emitted.push((now, ts));
            }
            sample += 1;
            next_input = (sample as f64 * 1000.0 / 90.0).round() as u64;
        } else if let Some(ts) = throttle.poll(now) {
            emitted.push((now, ts));
        }
        if let Some(&(at, ts)) = emitted.last() {
            if at == now && Some(ts) != latest {
                return Err(format!("at {now} ms sent sample {ts}, latest was {latest:?}"));
            }
        }
    }
    for w in emitted.windows(2) {
        let ((a, ta), (b, tb)) = (w[0], w[1]);
        if tb <= ta {
            return Err(format!("timestamps not increasing: {ta} then {tb}"));
        }
        if ((b - a) as f64) * RATE < 1000.0 {
            return Err(format!("sends {} ms apart at {a} and {b}", b - a));
        }
    }
    let hz = (emitted.len() - 1) as f64 / ((emitted.last().unwrap().0 - emitted[0].0) as f64 / 1000.0);
    if hz > RATE {
        return Err(format!("{hz:.2} Hz"));
    }
    Ok(format!("{sample} inputs at 90 Hz, {} sent, mean {hz:.2} Hz, latest-wins", emitted.len()))
}

// -------------------------------------------------------------- end to end

fn end_to_end() -> Verdict {
    use common::{bin, bot, code, fixture, Server};
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let server = Server::start(dir.path());
    let teacher = bot(&server.native, &fixture("bots/teacher.json"), &["--role", "console"])
        .spawn()
        .map_err(|e| e.to_string())?;
    let student = bot(&server.native, &fixture("bots/student.json"), &["--expect-rejects"])
        .output()
        .map_err(|e| e.to_string())?;
    let teacher = teacher.wait_with_output().map_err(|e| e.to_string())?;
    let console = bot(&server.native, &fixture("bots/console.json"), &["--role", "console"])
        .output()
        .map_err(|e| e.to_string())?;
    for (who, out) in [("teacher", &teacher), ("student", &student), ("console", &console)] {
        if code(out) != 0 {
            return Err(format!("{who} bot exited {}: {}", code(out), String::from_utf8_lossy(&out.stderr)));
        }
    }
    let log = server.log.clone();
    let serve_code = server.interrupt();
    if serve_code != 0 {
        return Err(format!("serve exited {serve_code}"));
    }
    let replay = bin().arg("replay").arg(&log).output().map_err(|e| e.to_string())?;
    let digest = String::from_utf8_lossy(&replay.stdout).trim().to_string();
    if code(&replay) != 0 {
        return Err(format!("replay exited {}: {}", code(&replay), String::from_utf8_lossy(&replay.stderr)));
    }
    let events = std::fs::read_to_string(&log).map_err(|e| e.to_string())?.lines().count() - 2;
    Ok(format!("{events} logged events, footer digest {}… reproduced", &digest[..12]))
}

fn main() -> ExitCode {
    let c = ctx();
    let mut failed = 0;
    let mut report = |name: &str, verdict: Verdict| match verdict {
        Ok(detail) => println!("PASS {name}: {detail}"),
        Err(reason) => {
            failed += 1;
            println!("FAIL {name}: {reason}");
        }
    };
    report("geometry oracle suite", geometry_oracle());
    report("teleport soundness sweep", teleport_soundness());
    report("tube construction", tube_construction());
    report("reducer determinism", reducer_determinism());
    match convergence(&c) {
        Ok(sims) => {
            report("convergence under simulation", Ok(sims.summary.clone()));
            report("reposition discreteness", reposition_discreteness(&sims, &c));
        }
        Err(e) => {
            report("convergence under simulation", Err(e));
            report("reposition discreteness", Err("no simulation logs".into()));
        }
    }
    report("pose throttle", pose_throttle());
    report("end-to-end replay", end_to_end());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
