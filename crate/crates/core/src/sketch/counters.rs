//! Instrumentation: resident scalars per worker, messages and phase timings.
//!
//! Memory is tracked in scalars (f64 slots), not bytes. Every long-lived or
//! block-sized buffer the engine creates holds a [`Charge`], which releases
//! its count when dropped.

use std::collections::BTreeMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

#[derive(Debug)]
struct Inner {
    current: Vec<AtomicUsize>,
    peak: Vec<AtomicUsize>,
    phase: Mutex<PhaseState>,
    messages: AtomicU64,
    volume: AtomicU64,
    flops: AtomicU64,
}

#[derive(Debug, Default)]
struct PhaseState {
    active: Option<(String, Instant)>,
    peaks: BTreeMap<String, Vec<usize>>,
    wall: BTreeMap<String, Duration>,
    order: Vec<String>,
}

/// Shared, thread-safe cost counters for one run.
#[derive(Clone, Debug)]
pub struct CostCounters(Arc<Inner>);

impl CostCounters {
    pub fn new(workers: usize) -> Self {
        let workers = workers.max(1);
        CostCounters(Arc::new(Inner {
            current: (0..workers).map(|_| AtomicUsize::new(0)).collect(),
            peak: (0..workers).map(|_| AtomicUsize::new(0)).collect(),
            phase: Mutex::new(PhaseState::default()),
            messages: AtomicU64::new(0),
            volume: AtomicU64::new(0),
            flops: AtomicU64::new(0),
        }))
    }

    pub fn workers(&self) -> usize {
        self.0.current.len()
    }

    /// Registers `scalars` resident on `worker` until the guard is dropped.
    pub fn charge(&self, worker: usize, scalars: usize) -> Charge {
        let now = self.0.current[worker].fetch_add(scalars, Ordering::SeqCst) + scalars;
        self.0.peak[worker].fetch_max(now, Ordering::SeqCst);
        let mut ph = self.0.phase.lock().expect("phase lock");
        if let Some((name, _)) = ph.active.clone() {
            let peaks = ph.peaks.get_mut(&name).expect("active phase registered");
            peaks[worker] = peaks[worker].max(now);
        }
        Charge { counters: self.clone(), worker, scalars }
    }

    /// Ends the active phase (if any) and starts `name`. Peaks of the new
    /// phase start from what is already resident.
    pub fn begin_phase(&self, name: &str) {
        let mut ph = self.0.phase.lock().expect("phase lock");
        close_phase(&mut ph);
        let base: Vec<usize> = self.0.current.iter().map(|c| c.load(Ordering::SeqCst)).collect();
        let entry = ph.peaks.entry(name.to_string()).or_insert_with(|| vec![0; base.len()]);
        for (p, b) in entry.iter_mut().zip(&base) {
            *p = (*p).max(*b);
        }
        if !ph.order.iter().any(|n| n == name) {
            ph.order.push(name.to_string());
        }
        ph.active = Some((name.to_string(), Instant::now()));
    }

    pub fn end_phase(&self) {
        close_phase(&mut self.0.phase.lock().expect("phase lock"));
    }

    pub fn record_message(&self, scalars: usize) {
        self.0.messages.fetch_add(1, Ordering::Relaxed);
        self.0.volume.fetch_add(scalars as u64, Ordering::Relaxed);
    }

    pub fn add_flops(&self, n: u64) {
        self.0.flops.fetch_add(n, Ordering::Relaxed);
    }

    pub fn snapshot(&self) -> CounterSnapshot {
        let ph = self.0.phase.lock().expect("phase lock");
        let mut wall = ph.wall.clone();
        if let Some((name, start)) = &ph.active {
            *wall.entry(name.clone()).or_default() += start.elapsed();
        }
        CounterSnapshot {
            per_worker_peak: self.0.peak.iter().map(|p| p.load(Ordering::SeqCst)).collect(),
            per_worker_current: self.0.current.iter().map(|p| p.load(Ordering::SeqCst)).collect(),
            phase_peaks: ph.order.iter().map(|n| (n.clone(), ph.peaks[n].clone())).collect(),
            phase_wall_ms: ph
                .order
                .iter()
                .map(|n| (n.clone(), wall.get(n).map_or(0.0, |d| d.as_secs_f64() * 1e3)))
                .collect(),
            messages: self.0.messages.load(Ordering::Relaxed),
            message_volume: self.0.volume.load(Ordering::Relaxed),
            flops: self.0.flops.load(Ordering::Relaxed),
        }
    }
}

fn close_phase(ph: &mut PhaseState) {
    if let Some((name, start)) = ph.active.take() {
        *ph.wall.entry(name).or_default() += start.elapsed();
    }
}

/// RAII handle for resident scalars.
#[derive(Debug)]
pub struct Charge {
    counters: CostCounters,
    worker: usize,
    scalars: usize,
}

impl Charge {
    pub fn worker(&self) -> usize {
        self.worker
    }

    pub fn scalars(&self) -> usize {
        self.scalars
    }
}

impl Drop for Charge {
    fn drop(&mut self) {
        self.counters.0.current[self.worker].fetch_sub(self.scalars, Ordering::SeqCst);
    }
}

/// Counters frozen at one instant.
#[derive(Clone, Debug, PartialEq)]
pub struct CounterSnapshot {
    pub per_worker_peak: Vec<usize>,
    pub per_worker_current: Vec<usize>,
    /// `(phase, per-worker peak)` in the order phases were first entered.
    pub phase_peaks: Vec<(String, Vec<usize>)>,
    pub phase_wall_ms: Vec<(String, f64)>,
    pub messages: u64,
    pub message_volume: u64,
    pub flops: u64,
}

impl CounterSnapshot {
    pub fn max_peak(&self) -> usize {
        self.per_worker_peak.iter().copied().max().unwrap_or(0)
    }

    pub fn phase_max_peak(&self, phase: &str) -> Option<usize> {
        self.phase_peaks.iter().find(|(n, _)| n == phase).map(|(_, p)| p.iter().copied().max().unwrap_or(0))
    }

    pub fn phase_wall(&self, phase: &str) -> Option<f64> {
        self.phase_wall_ms.iter().find(|(n, _)| n == phase).map(|(_, t)| *t)
    }
}
