//! Event-driven simulation of `M` triangles coupled through uniform routing.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::des::tree::SumTree;
use crate::error::{Error, Result};
use crate::fluid::ensemble::ParticleEnsemble;
use crate::model::{CycleTrajectory, NetworkParams, TriangleState};

/// Service completions, one per class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EventKind {
    ODone,
    ADone,
    BaDone,
    BDone,
    AbDone,
}

impl EventKind {
    pub const ALL: [EventKind; 5] = [
        EventKind::ODone,
        EventKind::ADone,
        EventKind::BaDone,
        EventKind::BDone,
        EventKind::AbDone,
    ];

    /// Canonical index of the class that completes service.
    pub fn class(self) -> usize {
        self as usize
    }
}

/// Queue lengths of every triangle, `(O, A, BA, B, AB)` each.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MfState {
    pub n: u32,
    pub counts: Vec<[u32; 5]>,
}

impl MfState {
    pub fn m(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts
            .iter()
            .flat_map(|c| c.iter())
            .map(|v| *v as u64)
            .sum()
    }

    /// Mean counts per triangle.
    pub fn mean_counts(&self) -> [f64; 5] {
        let mut acc = [0u64; 5];
        for c in &self.counts {
            for (a, v) in acc.iter_mut().zip(c) {
                *a += *v as u64;
            }
        }
        let m = self.m() as f64;
        acc.map(|v| v as f64 / m)
    }

    /// Scaled state `counts / n` of triangle `i`.
    pub fn scaled(&self, i: usize) -> TriangleState {
        let n = self.n as f64;
        TriangleState::from_array(self.counts[i].map(|v| v as f64 / n))
    }
}

/// Initial condition of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitSpec {
    /// Every triangle at `round(n * x)` (largest-remainder rounding to `n`).
    Delta(TriangleState),
    /// Every triangle at the orbit point of the given phase, scaled by `n`.
    CyclePhase(f64),
    /// Explicit counts per triangle.
    Counts(Vec<[u32; 5]>),
}

/// Rounds `n * x / |x|` to integers summing to `n`.
pub fn scale_to_counts(x: &TriangleState, n: u32) -> Result<[u32; 5]> {
    x.validate()?;
    let total = x.total();
    if total <= 0.0 {
        return Err(Error::invalid("cannot scale a zero state to counts"));
    }
    let target: Vec<f64> = x.to_array().iter().map(|v| v / total * n as f64).collect();
    let mut out = [0u32; 5];
    let mut rem: Vec<(usize, f64)> = Vec::with_capacity(5);
    let mut assigned = 0u32;
    for (i, t) in target.iter().enumerate() {
        out[i] = t.floor() as u32;
        assigned += out[i];
        rem.push((i, t - t.floor()));
    }
    rem.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (i, _) in rem.into_iter().take((n - assigned) as usize) {
        out[i] += 1;
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub m: usize,
    pub n: u32,
    pub t_end: f64,
    pub seed: u64,
    pub init: InitSpec,
    /// Snapshot spacing; `None` means `t_end / 2000`.
    pub dt_out: Option<f64>,
    pub record_events: bool,
    /// Keep full per-triangle snapshots, not just the means.
    pub keep_states: bool,
}

impl SimConfig {
    pub fn new(m: usize, n: u32, t_end: f64, seed: u64, init: InitSpec) -> Self {
        Self {
            m,
            n,
            t_end,
            seed,
            init,
            dt_out: None,
            record_events: false,
            keep_states: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.m == 0 {
            return Err(Error::invalid("m must be at least 1"));
        }
        if self.n == 0 {
            return Err(Error::invalid("n must be at least 1"));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(Error::invalid(format!("t_end must be positive, got {}", self.t_end)));
        }
        if let Some(dt) = self.dt_out {
            if !(dt.is_finite() && dt > 0.0) {
                return Err(Error::invalid(format!("dt_out must be positive, got {dt}")));
            }
        }
        Ok(())
    }

    pub fn initial_state(&self, params: &NetworkParams) -> Result<MfState> {
        self.validate()?;
        let counts = match &self.init {
            InitSpec::Delta(x) => vec![scale_to_counts(x, self.n)?; self.m],
            InitSpec::CyclePhase(phi) => {
                let x = CycleTrajectory::new(params)?.point(*phi)?;
                vec![scale_to_counts(&x, self.n)?; self.m]
            }
            InitSpec::Counts(c) => {
                if c.len() != self.m {
                    return Err(Error::invalid(format!(
                        "expected counts for {} triangles, got {}",
                        self.m,
                        c.len()
                    )));
                }
                for (i, row) in c.iter().enumerate() {
                    let s: u32 = row.iter().sum();
                    if s != self.n {
                        return Err(Error::invalid(format!(
                            "triangle {i} holds {s} customers, expected {}",
                            self.n
                        )));
                    }
                }
                c.clone()
            }
        };
        Ok(MfState { n: self.n, counts })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventRecord {
    pub time: f64,
    pub triangle: usize,
    pub kind: EventKind,
    pub destination: usize,
}

/// Rates of the five service completions of one triangle, in class order.
pub fn triangle_rates(c: &[u32; 5], p: &NetworkParams) -> [f64; 5] {
    let ind = |b: bool, g: f64| if b { g } else { 0.0 };
    [
        ind(c[0] > 0, p.gamma_o),
        ind(c[1] > 0 && c[2] == 0, p.gamma_a),
        ind(c[2] > 0, p.gamma_ba),
        ind(c[3] > 0 && c[4] == 0, p.gamma_b),
        ind(c[4] > 0, p.gamma_ab),
    ]
}

fn triangle_total(c: &[u32; 5], p: &NetworkParams) -> f64 {
    let r = triangle_rates(c, p);
    r[0] + ((r[1] + r[3]) + (r[2] + r[4]))
}

/// All enabled events as `(triangle, kind, rate)`.
pub fn active_rates(state: &MfState, params: &NetworkParams) -> Vec<(usize, EventKind, f64)> {
    let mut out = Vec::new();
    for (i, c) in state.counts.iter().enumerate() {
        for (kind, r) in EventKind::ALL.iter().zip(triangle_rates(c, params)) {
            if r > 0.0 {
                out.push((i, *kind, r));
            }
        }
    }
    out
}

/// Stepwise simulator; [`run`] drives it to a horizon.
pub struct Simulator {
    params: NetworkParams,
    state: MfState,
    tree: SumTree,
    rng: ChaCha8Rng,
    time: f64,
    events: u64,
}

impl Simulator {
    pub fn new(state: MfState, params: NetworkParams, seed: u64) -> Result<Self> {
        params.validate()?;
        if state.counts.is_empty() {
            return Err(Error::invalid("state has no triangles"));
        }
        let leaves: Vec<f64> = state
            .counts
            .iter()
            .map(|c| triangle_total(c, &params))
            .collect();
        Ok(Self {
            params,
            tree: SumTree::new(&leaves),
            state,
            rng: ChaCha8Rng::seed_from_u64(seed),
            time: 0.0,
            events: 0,
        })
    }

    pub fn state(&self) -> &MfState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn events(&self) -> u64 {
        self.events
    }

    /// Time of the next event, drawn but not yet applied. Returns `None` when
    /// no event is enabled.
    fn draw_holding(&mut self) -> Option<f64> {
        let total = self.tree.total();
        if total <= 0.0 {
            return None;
        }
        let u: f64 = self.rng.random();
        Some(-(1.0 - u).ln() / total)
    }

    fn apply_next(&mut self, time: f64) -> EventRecord {
        let total = self.tree.total();
        let u = self.rng.random::<f64>() * total;
        let (tri, mut off) = self.tree.find(u);
        let rates = triangle_rates(&self.state.counts[tri], &self.params);
        let mut kind = None;
        for (k, r) in EventKind::ALL.iter().zip(rates) {
            if r > 0.0 {
                kind = Some(*k);
                if off < r {
                    break;
                }
                off -= r;
            }
        }
        let kind = kind.expect("a triangle with positive rate has an enabled event");
        let m = self.state.m();
        let (dest, dest_class) = match kind {
            EventKind::ODone => {
                let j = self.rng.random_range(0..2 * m);
                if j < m {
                    (j, 1)
                } else {
                    (j - m, 3)
                }
            }
            EventKind::ADone => (self.rng.random_range(0..m), 4),
            EventKind::BDone => (self.rng.random_range(0..m), 2),
            EventKind::BaDone | EventKind::AbDone => (self.rng.random_range(0..m), 0),
        };
        self.state.counts[tri][kind.class()] -= 1;
        self.state.counts[dest][dest_class] += 1;
        self.tree
            .set(tri, triangle_total(&self.state.counts[tri], &self.params));
        if dest != tri {
            self.tree
                .set(dest, triangle_total(&self.state.counts[dest], &self.params));
        }
        self.time = time;
        self.events += 1;
        EventRecord {
            time,
            triangle: tri,
            kind,
            destination: dest,
        }
    }

    /// Performs one event.
    pub fn step(&mut self) -> Option<EventRecord> {
        let dt = self.draw_holding()?;
        let t = self.time + dt;
        Some(self.apply_next(t))
    }

    /// Advances to `t_end`, calling `on_event` after each event and
    /// `on_grid(k, t_k, state)` at every grid time `k * dt` up to `t_end`.
    pub fn advance<E, G>(&mut self, t_end: f64, dt: f64, mut on_event: E, mut on_grid: G)
    where
        E: FnMut(&EventRecord, &MfState),
        G: FnMut(usize, f64, &MfState),
    {
        let n_grid = (t_end / dt + 1e-9).floor() as usize;
        let mut k = 0usize;
        loop {
            let next = match self.draw_holding() {
                Some(dt_ev) => self.time + dt_ev,
                None => f64::INFINITY,
            };
            while k <= n_grid && (k as f64 * dt) < next {
                let tk = k as f64 * dt;
                if tk > t_end + 1e-12 {
                    break;
                }
                on_grid(k, tk, &self.state);
                k += 1;
            }
            if next > t_end {
                break;
            }
            let ev = self.apply_next(next);
            on_event(&ev, &self.state);
        }
        self.time = t_end;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DesTrajectory {
    pub m: usize,
    pub n: u32,
    pub times: Vec<f64>,
    /// Mean counts per triangle at each snapshot.
    pub means: Vec<[f64; 5]>,
    pub states: Option<Vec<MfState>>,
    pub events: Option<Vec<EventRecord>>,
    pub n_events: u64,
}

/// Exact simulation to `config.t_end` with snapshots on a uniform grid.
pub fn run(config: &SimConfig, params: &NetworkParams) -> Result<DesTrajectory> {
    let state = config.initial_state(params)?;
    let dt = config.dt_out.unwrap_or(config.t_end / 2000.0);
    let mut sim = Simulator::new(state, *params, config.seed)?;
    let mut times = Vec::new();
    let mut means = Vec::new();
    let mut states = config.keep_states.then(Vec::new);
    let mut events = config.record_events.then(Vec::new);
    sim.advance(
        config.t_end,
        dt,
        |ev, _| {
            if let Some(v) = events.as_mut() {
                v.push(*ev);
            }
        },
        |_, t, s| {
            times.push(t);
            means.push(s.mean_counts());
            if let Some(v) = states.as_mut() {
                v.push(s.clone());
            }
        },
    );
    Ok(DesTrajectory {
        m: config.m,
        n: config.n,
        times,
        means,
        states,
        events,
        n_events: sim.events(),
    })
}

/// Independent replicas with seeds `seed ^ i`, returned in replica order.
pub fn run_replicas(
    config: &SimConfig,
    params: &NetworkParams,
    replicas: usize,
) -> Vec<Result<DesTrajectory>> {
    (0..replicas)
        .into_par_iter()
        .map(|i| {
            let mut c = config.clone();
            c.seed = config.seed ^ i as u64;
            run(&c, params)
        })
        .collect()
}

/// One atom of weight `1/M` per triangle at `counts / n`.
pub fn empirical_measure(state: &MfState, n: u32) -> Result<ParticleEnsemble> {
    if n == 0 {
        return Err(Error::invalid("n must be at least 1"));
    }
    let nf = n as f64;
    let states: Vec<TriangleState> = state
        .counts
        .iter()
        .map(|c| TriangleState::from_array(c.map(|v| v as f64 / nf)))
        .collect();
    ParticleEnsemble::uniform(&states)
}

/// Fluid-scale view of the mean path: `(t / n, mean counts / n)`.
pub fn euler_rescale(traj: &DesTrajectory, n: u32) -> Result<Vec<(f64, TriangleState)>> {
    if n != traj.n {
        return Err(Error::invalid(format!(
            "rescaling by n = {n} but the run used n = {}",
            traj.n
        )));
    }
    let nf = n as f64;
    Ok(traj
        .times
        .iter()
        .zip(&traj.means)
        .map(|(t, c)| (t / nf, TriangleState::from_array(c.map(|v| v / nf))))
        .collect())
}
