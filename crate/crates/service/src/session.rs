//! In-memory sessions wrapping a live [`Simulator`].

use std::collections::HashMap;
use std::sync::{Arc, Mutex, RwLock};
use std::time::{Duration, Instant};

use dynflow_core::dynamics::rank_events;
use dynflow_core::{
    FilterConfig, PreferenceModel, RankEvent, Ranking, Result, Scenario, Simulator, TrajectoryStep,
};

pub const DEFAULT_IDLE_TIMEOUT: Duration = Duration::from_secs(3600);

/// A live transition: the simulator state plus its append-only history.
#[derive(Debug, Clone)]
pub struct Session {
    id: String,
    sim: Simulator,
    history: Vec<TrajectoryStep>,
    events: Vec<RankEvent>,
}

impl Session {
    pub fn new(id: String, scenario: Scenario) -> Result<Self> {
        let sim = Simulator::new(scenario)?;
        let history = vec![sim.snapshot()];
        Ok(Session {
            id,
            sim,
            history,
            events: Vec::new(),
        })
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn step(&self) -> usize {
        self.sim.step()
    }

    pub fn scores(&self) -> &[f64] {
        self.sim.scores()
    }

    pub fn ranking(&self) -> Ranking {
        self.sim.ranking()
    }

    pub fn alternative_ids(&self) -> &[String] {
        self.sim.scenario().alternative_ids()
    }

    pub fn history(&self) -> &[TrajectoryStep] {
        &self.history
    }

    pub fn events(&self) -> &[RankEvent] {
        &self.events
    }

    pub fn scenario(&self) -> &Scenario {
        self.sim.scenario()
    }

    /// Applies `count` filter steps and returns the rank events they produced.
    pub fn advance(&mut self, count: usize) -> Result<Vec<RankEvent>> {
        let from = self.sim.step();
        for _ in 0..count {
            self.sim.advance()?;
            self.history.push(self.sim.snapshot());
        }
        let fresh = events_since(self.alternative_ids(), &self.history, from);
        self.events.extend(fresh.iter().cloned());
        Ok(fresh)
    }

    /// Switches preferences from the current step on. Returns that step.
    pub fn update_model(&mut self, model: PreferenceModel) -> Result<usize> {
        self.sim.set_model(model)
    }

    /// Preview of `horizon` further steps under optional overrides; `self` is untouched.
    /// The returned steps start with the current state.
    pub fn what_if(
        &self,
        model: Option<PreferenceModel>,
        filter: Option<FilterConfig>,
        horizon: usize,
    ) -> Result<(Vec<TrajectoryStep>, Vec<RankEvent>)> {
        let mut sim = self.sim.clone();
        if let Some(f) = filter {
            sim.set_filter(f);
        }
        if let Some(m) = model {
            sim.set_model(m)?;
        }
        let from = sim.step();
        let mut combined = self.history.clone();
        for _ in 0..horizon {
            sim.advance()?;
            combined.push(sim.snapshot());
        }
        let events = events_since(self.alternative_ids(), &combined, from);
        let preview = combined.split_off(self.history.len() - 1);
        Ok((preview, events))
    }
}

/// Events on intervals starting at or after `from`, with sign history from earlier steps.
fn events_since(ids: &[String], steps: &[TrajectoryStep], from: usize) -> Vec<RankEvent> {
    rank_events(ids, steps)
        .into_iter()
        .filter(|e| e.step_before >= from)
        .collect()
}

struct Slot {
    session: RwLock<Session>,
    touched: Mutex<Instant>,
}

/// Concurrent session registry with idle expiry.
///
/// Each session has its own lock: writers to one session are serialized, readers
/// share, and different sessions never contend beyond the registry lookup.
pub struct SessionStore {
    slots: Mutex<HashMap<String, Arc<Slot>>>,
    idle_timeout: Duration,
}

impl Default for SessionStore {
    fn default() -> Self {
        SessionStore::new(DEFAULT_IDLE_TIMEOUT)
    }
}

impl SessionStore {
    pub fn new(idle_timeout: Duration) -> Self {
        SessionStore {
            slots: Mutex::new(HashMap::new()),
            idle_timeout,
        }
    }

    fn sweep(&self, slots: &mut HashMap<String, Arc<Slot>>) {
        let now = Instant::now();
        slots.retain(|_, slot| now.duration_since(*slot.touched.lock().unwrap()) < self.idle_timeout);
    }

    /// Creates a session and returns a snapshot of it.
    pub fn create(&self, scenario: Scenario) -> Result<Session> {
        let id = uuid::Uuid::new_v4().simple().to_string();
        let session = Session::new(id.clone(), scenario)?;
        let snapshot = session.clone();
        let mut slots = self.slots.lock().unwrap();
        self.sweep(&mut slots);
        slots.insert(
            id,
            Arc::new(Slot {
                session: RwLock::new(session),
                touched: Mutex::new(Instant::now()),
            }),
        );
        Ok(snapshot)
    }

    fn slot(&self, id: &str) -> Option<Arc<Slot>> {
        let mut slots = self.slots.lock().unwrap();
        self.sweep(&mut slots);
        let slot = slots.get(id).cloned()?;
        *slot.touched.lock().unwrap() = Instant::now();
        Some(slot)
    }

    /// Runs `f` with shared access to session `id`; `None` if unknown or expired.
    pub fn read<T>(&self, id: &str, f: impl FnOnce(&Session) -> T) -> Option<T> {
        let slot = self.slot(id)?;
        let guard = slot.session.read().unwrap();
        Some(f(&guard))
    }

    /// Runs `f` with exclusive access to session `id`.
    pub fn write<T>(&self, id: &str, f: impl FnOnce(&mut Session) -> T) -> Option<T> {
        let slot = self.slot(id)?;
        let mut guard = slot.session.write().unwrap();
        Some(f(&mut guard))
    }

    pub fn len(&self) -> usize {
        let mut slots = self.slots.lock().unwrap();
        self.sweep(&mut slots);
        slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
