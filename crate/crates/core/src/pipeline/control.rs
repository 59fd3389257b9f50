use std::collections::{BTreeMap, VecDeque};
use std::sync::{Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use super::config::Toggles;
use super::timing::{StageStat, StageTimings};
use crate::classify::ClassInfo;
use crate::error::{Error, Result};

/// Frames kept for the rolling timing summary.
pub const TIMING_WINDOW: usize = 200;

/// A client request on the control channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case", deny_unknown_fields)]
pub enum Command {
    /// Changes nothing; answered with the current status.
    Status,
    Pause,
    Resume,
    /// Sets a stage; flips it when `value` is absent.
    Toggle {
        stage: String,
        value: Option<bool>,
    },
}

impl Command {
    pub fn parse(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// Snapshot of the running pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Status {
    pub frame_index: Option<u64>,
    pub fps: f64,
    pub paused: bool,
    pub finished: bool,
    pub frames_emitted: u64,
    pub frames_skipped: u64,
    pub stage_states: BTreeMap<String, bool>,
    pub timings_summary: Vec<StageStat>,
    pub classes: Vec<ClassInfo>,
}

#[derive(Debug)]
struct State {
    toggles: Toggles,
    paused: bool,
    stopped: bool,
    finished: bool,
    last_frame: Option<u64>,
    emitted: u64,
    skipped: u64,
    arrivals: VecDeque<Instant>,
    recent: VecDeque<StageTimings>,
    classes: Vec<ClassInfo>,
}

/// Shared switches and status between the producer and its clients.
///
/// Commands are applied one at a time under a single lock, so the producer reads a
/// consistent toggle set at the start of every frame and a status taken after a
/// command returns always reflects it.
#[derive(Debug)]
pub struct Control {
    state: Mutex<State>,
    wake: Condvar,
}

impl Control {
    pub fn new(toggles: Toggles) -> Self {
        Control {
            state: Mutex::new(State {
                toggles,
                paused: false,
                stopped: false,
                finished: false,
                last_frame: None,
                emitted: 0,
                skipped: 0,
                arrivals: VecDeque::new(),
                recent: VecDeque::new(),
                classes: Vec::new(),
            }),
            wake: Condvar::new(),
        }
    }

    fn lock(&self) -> std::sync::MutexGuard<'_, State> {
        self.state.lock().expect("control lock")
    }

    pub fn apply(&self, cmd: &Command) -> Result<Status> {
        {
            let mut s = self.lock();
            match cmd {
                Command::Status => {}
                Command::Pause => s.paused = true,
                Command::Resume => s.paused = false,
                Command::Toggle { stage, value } => {
                    let now = s
                        .toggles
                        .get(stage)
                        .ok_or_else(|| Error::InvalidInput(format!("unknown stage {stage:?}")))?;
                    s.toggles.set(stage, value.unwrap_or(!now))?;
                }
            }
            self.wake.notify_all();
        }
        Ok(self.status())
    }

    pub fn toggles(&self) -> Toggles {
        self.lock().toggles
    }

    pub fn is_paused(&self) -> bool {
        self.lock().paused
    }

    /// Asks the producer to stop after the current frame.
    pub fn stop(&self) {
        self.lock().stopped = true;
        self.wake.notify_all();
    }

    pub fn is_stopped(&self) -> bool {
        self.lock().stopped
    }

    /// Blocks while paused. Returns false once stopped.
    pub fn wait_running(&self) -> bool {
        let mut s = self.lock();
        while s.paused && !s.stopped {
            s = self
                .wake
                .wait_timeout(s, Duration::from_millis(100))
                .expect("control lock")
                .0;
        }
        !s.stopped
    }

    /// Sleeps up to `d`, waking early on stop.
    pub fn sleep(&self, d: Duration) {
        let s = self.lock();
        if !s.stopped {
            let _ = self.wake.wait_timeout_while(s, d, |s| !s.stopped);
        }
    }

    pub(crate) fn set_classes(&self, classes: Vec<ClassInfo>) {
        self.lock().classes = classes;
    }

    pub(crate) fn record_frame(&self, index: u64, timings: &StageTimings) {
        let mut s = self.lock();
        s.last_frame = Some(index);
        s.emitted += 1;
        let now = Instant::now();
        s.arrivals.push_back(now);
        while s.arrivals.len() > 30 {
            s.arrivals.pop_front();
        }
        s.recent.push_back(timings.clone());
        while s.recent.len() > TIMING_WINDOW {
            s.recent.pop_front();
        }
    }

    pub(crate) fn record_skip(&self) {
        self.lock().skipped += 1;
    }

    pub(crate) fn finish(&self) {
        self.lock().finished = true;
        self.wake.notify_all();
    }

    /// Per-stage statistics over the most recent frames.
    pub fn timings(&self) -> StageTimings {
        let s = self.lock();
        StageTimings::from_samples(s.recent.iter().flat_map(|t| t.samples.iter().cloned()).collect())
    }

    pub fn status(&self) -> Status {
        let timings = self.timings();
        let s = self.lock();
        let fps = match (s.arrivals.front(), s.arrivals.back()) {
            (Some(a), Some(b)) if s.arrivals.len() > 1 && b > a => {
                (s.arrivals.len() - 1) as f64 / (*b - *a).as_secs_f64()
            }
            _ => 0.0,
        };
        Status {
            frame_index: s.last_frame,
            fps,
            paused: s.paused,
            finished: s.finished,
            frames_emitted: s.emitted,
            frames_skipped: s.skipped,
            stage_states: s
                .toggles
                .states()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v))
                .collect(),
            timings_summary: timings.stats,
            classes: s.classes.clone(),
        }
    }
}

impl Default for Control {
    fn default() -> Self {
        Control::new(Toggles::default())
    }
}
