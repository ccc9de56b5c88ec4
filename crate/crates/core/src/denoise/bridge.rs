//! Out-of-process enhancer plug-in.
//!
//! Protocol: the bridge writes `<dir>/in.lprf` (one plane) and
//! `<dir>/meta.json` (`{"sigma": <strength>}`), runs `<cmd> <dir>` and
//! expects exit code 0 and a same-sized single plane in `<dir>/out.lprf`.

use std::path::PathBuf;
use std::process::{Command, Stdio};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::RealImage;
use crate::io;

fn default_timeout() -> f64 {
    60.0
}

/// External command invoked once per enhancement call.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExternalBridge {
    /// Program followed by fixed arguments; the exchange directory is appended.
    pub command: Vec<String>,
    /// Parent for exchange directories (system temp dir when unset).
    #[serde(default)]
    pub workdir: Option<PathBuf>,
    #[serde(default = "default_timeout")]
    pub timeout_secs: f64,
    /// One in-flight subprocess per bridge instance; clones share it.
    #[serde(skip)]
    lock: Arc<Mutex<()>>,
}

impl PartialEq for ExternalBridge {
    fn eq(&self, other: &Self) -> bool {
        self.command == other.command && self.workdir == other.workdir && self.timeout_secs == other.timeout_secs
    }
}

static EXCHANGE_COUNTER: AtomicU64 = AtomicU64::new(0);

impl ExternalBridge {
    pub fn new(command: Vec<String>) -> Self {
        Self { command, workdir: None, timeout_secs: default_timeout(), lock: Arc::default() }
    }

    pub fn with_timeout(mut self, secs: f64) -> Self {
        self.timeout_secs = secs;
        self
    }

    pub fn with_workdir(mut self, dir: impl Into<PathBuf>) -> Self {
        self.workdir = Some(dir.into());
        self
    }

    pub fn run(&self, v: &RealImage, sigma: f64) -> Result<RealImage> {
        let (program, args) = self.command.split_first().ok_or_else(|| Error::Bridge("empty bridge command".into()))?;
        let _guard = self.lock.lock().unwrap_or_else(|e| e.into_inner());
        let parent = self.workdir.clone().unwrap_or_else(std::env::temp_dir);
        let dir = parent.join(format!(
            "lpr-bridge-{}-{}",
            std::process::id(),
            EXCHANGE_COUNTER.fetch_add(1, Ordering::Relaxed)
        ));
        std::fs::create_dir_all(&dir)?;
        let result = self.exchange(program, args, &dir, v, sigma);
        let _ = std::fs::remove_dir_all(&dir);
        result
    }

    fn exchange(&self, program: &str, args: &[String], dir: &PathBuf, v: &RealImage, sigma: f64) -> Result<RealImage> {
        io::write_lprf(dir.join("in.lprf"), std::slice::from_ref(v))?;
        std::fs::write(dir.join("meta.json"), serde_json::json!({ "sigma": sigma }).to_string())?;
        let mut child = Command::new(program)
            .args(args)
            .arg(dir)
            .stdin(Stdio::null())
            .stdout(Stdio::null())
            .stderr(Stdio::null())
            .spawn()
            .map_err(|e| Error::Bridge(format!("cannot start {program}: {e}")))?;
        let deadline = Instant::now() + Duration::from_secs_f64(self.timeout_secs.max(0.0));
        let status = loop {
            if let Some(status) = child.try_wait()? {
                break status;
            }
            if Instant::now() >= deadline {
                let _ = child.kill();
                let _ = child.wait();
                return Err(Error::Bridge(format!("{program} timed out after {} s", self.timeout_secs)));
            }
            std::thread::sleep(Duration::from_millis(5));
        };
        if !status.success() {
            return Err(Error::Bridge(format!("{program} exited with {status}")));
        }
        let planes =
            io::read_lprf(dir.join("out.lprf")).map_err(|e| Error::Bridge(format!("unreadable response: {e}")))?;
        match planes.as_slice() {
            [out] if out.dims() == v.dims() => Ok(out.clone()),
            [out] => Err(Error::Bridge(format!("response is {:?}, expected {:?}", out.dims(), v.dims()))),
            _ => Err(Error::Bridge(format!("response has {} planes, expected 1", planes.len()))),
        }
    }
}
