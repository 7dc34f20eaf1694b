use std::path::{Path, PathBuf};

use serde::Deserialize;
use tutorlink_core::navigation::NavConfig;
use tutorlink_core::net_harness::SceneSource;
use tutorlink_core::protocol::DEFAULT_SEND_RATE_HZ;
use tutorlink_core::scene::{SceneConfig, WalkBarrier};

pub const DEFAULT_PORT: u16 = 7740;
pub const DEFAULT_WS_PORT: u16 = 7741;
pub const DEFAULT_LOG: &str = "tutorlink-session.jsonl";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("invalid config {path}: {message}")]
    Invalid { path: PathBuf, message: String },
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SceneFile {
    mesh: Option<PathBuf>,
    metadata: Option<PathBuf>,
    world_scale: Option<f64>,
    walk_barrier: Option<WalkBarrier>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    #[serde(default)]
    scene: SceneFile,
    nav: Option<NavConfig>,
    port: Option<u16>,
    ws_port: Option<u16>,
    send_rate_hz: Option<f64>,
    log: Option<PathBuf>,
}

/// Flag values that override the file.
#[derive(Debug, Default, Clone)]
pub struct Overrides {
    pub port: Option<u16>,
    pub ws_port: Option<u16>,
    pub log: Option<PathBuf>,
}

/// Resolved serve configuration. Paths are absolute or relative to the
/// working directory.
#[derive(Debug, Clone, PartialEq)]
pub struct ServeConfig {
    pub scene: SceneSource,
    pub nav: NavConfig,
    pub port: u16,
    pub ws_port: u16,
    /// Rate at which the host streams its own pose updates.
    pub send_rate_hz: f64,
    pub log: PathBuf,
}

impl ServeConfig {
    /// Reads a config file; relative paths in it resolve against its directory.
    pub fn load(path: &Path, overrides: &Overrides) -> Result<ServeConfig, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_owned(),
            source,
        })?;
        let invalid = |message: String| ConfigError::Invalid {
            path: path.to_owned(),
            message,
        };
        let file: ConfigFile = serde_json::from_str(&text).map_err(|e| invalid(e.to_string()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        let resolve = |p: &Path| -> PathBuf {
            let joined = base.join(p);
            std::fs::canonicalize(&joined).unwrap_or(joined)
        };

        let defaults = SceneConfig::default();
        let scene_config = SceneConfig {
            world_scale: file.scene.world_scale.unwrap_or(defaults.world_scale),
            walk_barrier: file.scene.walk_barrier.unwrap_or(defaults.walk_barrier),
        };
        let scene = match (&file.scene.mesh, &file.scene.metadata) {
            (Some(mesh), Some(metadata)) => SceneSource::Files {
                mesh: resolve(mesh),
                metadata: resolve(metadata),
                config: scene_config,
            },
            (None, None) => SceneSource::Sample {
                config: scene_config,
            },
            _ => return Err(invalid("scene needs both mesh and metadata, or neither".into())),
        };

        let nav = file.nav.unwrap_or_default();
        nav.validate().map_err(|e| invalid(e.to_string()))?;
        let send_rate_hz = file.send_rate_hz.unwrap_or(DEFAULT_SEND_RATE_HZ);
        if !(send_rate_hz.is_finite() && send_rate_hz > 0.0) {
            return Err(invalid(format!("send_rate_hz must be positive, got {send_rate_hz}")));
        }
        let log = match (&overrides.log, &file.log) {
            (Some(flag), _) => flag.clone(),
            (None, Some(p)) => base.join(p),
            (None, None) => PathBuf::from(DEFAULT_LOG),
        };
        Ok(ServeConfig {
            scene,
            nav,
            port: overrides.port.or(file.port).unwrap_or(DEFAULT_PORT),
            ws_port: overrides.ws_port.or(file.ws_port).unwrap_or(DEFAULT_WS_PORT),
            send_rate_hz,
            log,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write(dir: &Path, text: &str) -> PathBuf {
        let p = dir.join("server.json");
        std::fs::write(&p, text).unwrap();
        p
    }

    #[test]
    fn flags_override_file_and_defaults_fill_in() {
        let dir = tempfile::tempdir().unwrap();
        let p = write(dir.path(), r#"{"port": 9000, "log": "s.jsonl"}"#);
        let c = ServeConfig::load(&p, &Overrides { port: Some(9100), ..Default::default() }).unwrap();
        assert_eq!(c.port, 9100);
        assert_eq!(c.ws_port, DEFAULT_WS_PORT);
        assert_eq!(c.log, dir.path().join("s.jsonl"));
        assert!(matches!(c.scene, SceneSource::Sample { .. }));
        assert_eq!(c.send_rate_hz, 30.0);
    }

    #[test]
    fn rejects_bad_files() {
        let dir = tempfile::tempdir().unwrap();
        for text in [
            "{",
            r#"{"bogus": 1}"#,
            r#"{"scene": {"mesh": "a.obj"}}"#,
            r#"{"send_rate_hz": 0}"#,
            r#"{"nav": {"margin": -1}}"#,
        ] {
            let p = write(dir.path(), text);
            assert!(matches!(ServeConfig::load(&p, &Overrides::default()), Err(ConfigError::Invalid { .. })), "{text}");
        }
        assert!(matches!(
            ServeConfig::load(&dir.path().join("missing.json"), &Overrides::default()),
            Err(ConfigError::Read { .. })
        ));
    }
}
