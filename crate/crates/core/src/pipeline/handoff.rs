use std::sync::{Condvar, Mutex};

/// Whether a full slot blocks the producer or is overwritten.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum HandoffMode {
    /// Producer waits until the consumer has taken the pending item. Nothing is dropped.
    Replay,
    /// Producer replaces an untaken item (latest wins).
    Live,
}

#[derive(Debug)]
struct Slot<T> {
    pending: Option<T>,
    closed: bool,
    published: u64,
    dropped: u64,
}

/// Single-producer, single-consumer exchange of immutable frames.
///
/// The producer owns the frame it is building, the consumer owns the frame it took, and
/// the only shared state is one pending slot behind a mutex. A published item is
/// always complete, and the producer never touches an item after publishing it.
#[derive(Debug)]
pub struct Handoff<T> {
    mode: HandoffMode,
    slot: Mutex<Slot<T>>,
    changed: Condvar,
}

/// The other side closed the handoff.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Closed;

impl<T> Handoff<T> {
    pub fn new(mode: HandoffMode) -> Self {
        Handoff {
            mode,
            slot: Mutex::new(Slot {
                pending: None,
                closed: false,
                published: 0,
                dropped: 0,
            }),
            changed: Condvar::new(),
        }
    }

    pub fn mode(&self) -> HandoffMode {
        self.mode
    }

    pub fn publish(&self, item: T) -> Result<(), Closed> {
        let mut s = self.slot.lock().expect("handoff lock");
        if self.mode == HandoffMode::Replay {
            while s.pending.is_some() && !s.closed {
                s = self.changed.wait(s).expect("handoff lock");
            }
        }
        if s.closed {
            return Err(Closed);
        }
        if s.pending.replace(item).is_some() {
            s.dropped += 1;
        }
        s.published += 1;
        self.changed.notify_all();
        Ok(())
    }

    /// Blocks until an item is pending or the handoff is closed and drained.
    pub fn take(&self) -> Option<T> {
        let mut s = self.slot.lock().expect("handoff lock");
        loop {
            if let Some(item) = s.pending.take() {
                self.changed.notify_all();
                return Some(item);
            }
            if s.closed {
                return None;
            }
            s = self.changed.wait(s).expect("handoff lock");
        }
    }

    pub fn try_take(&self) -> Option<T> {
        let mut s = self.slot.lock().expect("handoff lock");
        let item = s.pending.take();
        if item.is_some() {
            self.changed.notify_all();
        }
        item
    }

    /// Wakes both sides; pending items can still be taken.
    pub fn close(&self) {
        let mut s = self.slot.lock().expect("handoff lock");
        s.closed = true;
        self.changed.notify_all();
    }

    pub fn is_closed(&self) -> bool {
        self.slot.lock().expect("handoff lock").closed
    }

    /// `(published, dropped)` so far.
    pub fn counters(&self) -> (u64, u64) {
        let s = self.slot.lock().expect("handoff lock");
        (s.published, s.dropped)
    }
}
