//! Path and terminal-value samplers for the four counting processes, each in
//! two representations (defining superposition and compound form), plus the
//! skeleton-chain sampler used for hitting-time Monte Carlo.
//!
//! Samplers are re-entrant and take the caller's random source. Parallel runs
//! derive one independent stream per worker from a master seed via
//! [`stream_rng`] and merge results in stream order, so a run is reproducible
//! given `(seed, n_streams)` and the parameters.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Binomial, Distribution, Exp};
use rayon::prelude::*;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::exactdist::{jump_law_u, jump_law_w, jump_law_y, jump_law_z, JumpLaw, JumpSampler};
use crate::params::{OrderParams, WeightTable};
use crate::subordinators::BernsteinFn;

/// Per-path cap on materialized events for the subordinated process, whose
/// event count is Poisson with a heavy-tailed random mean and so has no
/// usable upper bound. Beyond the cap the remaining marks are aggregated into
/// one final event; the terminal value keeps its exact law.
pub const W_EVENT_CAP: u64 = 65_536;

/// Saturation bound for Poisson means, below the largest mean the sampler
/// accepts; reached only through astronomically heavy subordinator draws.
const POISSON_MEAN_CAP: f64 = 1e18;

/// One sampled trajectory: strictly increasing event times with positive
/// integer increments summing to the terminal value.
#[derive(Debug, Clone, PartialEq)]
pub struct PathSample {
    event_times: Vec<f64>,
    increments: Vec<u64>,
    terminal_value: u64,
}

impl PathSample {
    /// Builds a path from unordered `(time, increment)` events: sorts by
    /// time, merges events at equal times, and totals the increments.
    /// Increments must be at least 1.
    pub fn from_events(mut events: Vec<(f64, u64)>) -> Self {
        events.sort_by(|a, b| a.0.partial_cmp(&b.0).expect("finite event times"));
        let mut event_times: Vec<f64> = Vec::with_capacity(events.len());
        let mut increments: Vec<u64> = Vec::with_capacity(events.len());
        for (time, inc) in events {
            debug_assert!(inc >= 1, "increments must be positive");
            if event_times.last() == Some(&time) {
                *increments.last_mut().expect("nonempty") += inc;
            } else {
                event_times.push(time);
                increments.push(inc);
            }
        }
        let terminal_value = increments.iter().sum();
        Self {
            event_times,
            increments,
            terminal_value,
        }
    }

    pub fn event_times(&self) -> &[f64] {
        &self.event_times
    }

    pub fn increments(&self) -> &[u64] {
        &self.increments
    }

    pub fn terminal_value(&self) -> u64 {
        self.terminal_value
    }

    /// Post-jump running values; nondecreasing by construction.
    pub fn running_values(&self) -> Vec<u64> {
        let mut acc = 0;
        self.increments
            .iter()
            .map(|&inc| {
                acc += inc;
                acc
            })
            .collect()
    }

    /// Checks the structural invariants (strictly increasing finite times,
    /// positive increments, terminal equals the total increment).
    pub fn validate(&self) -> Result<()> {
        if self.event_times.len() != self.increments.len() {
            return Err(Error::Domain {
                name: "path",
                value: self.event_times.len() as f64,
                reason: "times and increments must have equal length",
            });
        }
        for pair in self.event_times.windows(2) {
            if pair[1] <= pair[0] {
                return Err(Error::Domain {
                    name: "event_times",
                    value: pair[1],
                    reason: "event times must be strictly increasing",
                });
            }
        }
        if self.event_times.iter().any(|t| !t.is_finite()) {
            return Err(Error::Domain {
                name: "event_times",
                value: f64::NAN,
                reason: "event times must be finite",
            });
        }
        if self.increments.contains(&0) {
            return Err(Error::Domain {
                name: "increments",
                value: 0.0,
                reason: "increments must be at least 1",
            });
        }
        if self.terminal_value != self.increments.iter().sum::<u64>() {
            return Err(Error::Domain {
                name: "terminal_value",
                value: self.terminal_value as f64,
                reason: "terminal must equal the sum of increments",
            });
        }
        Ok(())
    }
}

/// Monte Carlo run shape: path budget, master seed, worker streams, and the
/// observation window used by terminal-value runs (hitting-time estimation is
/// window-free since it runs on the jump chain).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SimConfig {
    n_paths: u64,
    seed: u64,
    n_streams: u64,
    horizon: f64,
}

impl SimConfig {
    pub fn new(n_paths: u64, seed: u64, n_streams: u64, horizon: f64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::Domain {
                name: "n_paths",
                value: 0.0,
                reason: "need at least one path",
            });
        }
        if n_streams == 0 {
            return Err(Error::Domain {
                name: "n_streams",
                value: 0.0,
                reason: "need at least one stream",
            });
        }
        if !(horizon.is_finite() && horizon >= 0.0) {
            return Err(Error::Domain {
                name: "horizon",
                value: horizon,
                reason: "horizon must be finite and nonnegative",
            });
        }
        Ok(Self {
            n_paths,
            seed,
            n_streams,
            horizon,
        })
    }

    pub fn n_paths(&self) -> u64 {
        self.n_paths
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_streams(&self) -> u64 {
        self.n_streams
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }
}

/// Which representation a sampler draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleMode {
    /// The defining construction: independent components (or an explicit
    /// random time change) merged into one path.
    Superposition,
    /// The equivalent single-stream form: draw the event count first, then
    /// i.i.d. marks.
    Compound,
}

/// One of the four processes together with its parameters.
///
/// `Y` is the multi-jump process of order `i`, `Z` its weighted variant, `W`
/// the subordinated version `Y(H^f(t))`, and `U` the doubly stochastic
/// special case `Y(N_beta(t))`. Construct through [`Process::y`],
/// [`Process::z`], [`Process::w`], [`Process::u`], which validate parameter
/// consistency.
#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Process {
    Y { p: OrderParams },
    Z { p: OrderParams, g: WeightTable },
    W { p: OrderParams, f: BernsteinFn },
    U { p: OrderParams, beta: f64 },
}

impl Process {
    pub fn y(p: OrderParams) -> Self {
        Process::Y { p }
    }

    pub fn z(p: OrderParams, g: WeightTable) -> Result<Self> {
        if g.order() != p.order() {
            return Err(Error::Domain {
                name: "g",
                value: f64::from(g.order()),
                reason: "weight table length must equal the order",
            });
        }
        Ok(Process::Z { p, g })
    }

    pub fn w(p: OrderParams, f: BernsteinFn) -> Self {
        Process::W { p, f }
    }

    pub fn u(p: OrderParams, beta: f64) -> Result<Self> {
        if !(beta.is_finite() && beta > 0.0) {
            return Err(Error::Domain {
                name: "beta",
                value: beta,
                reason: "clock rate must be positive and finite",
            });
        }
        Ok(Process::U { p, beta })
    }

    pub fn params(&self) -> &OrderParams {
        match self {
            Process::Y { p }
            | Process::Z { p, .. }
            | Process::W { p, .. }
            | Process::U { p, .. } => p,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            Process::Y { .. } => "y",
            Process::Z { .. } => "z",
            Process::W { .. } => "w",
            Process::U { .. } => "u",
        }
    }

    /// Same process observed over window `t`.
    pub fn with_t(&self, t: f64) -> Result<Self> {
        let mut out = self.clone();
        let p = match &mut out {
            Process::Y { p }
            | Process::Z { p, .. }
            | Process::W { p, .. }
            | Process::U { p, .. } => p,
        };
        *p = p.with_t(t)?;
        Ok(out)
    }

    /// Jump-size law of the embedded chain. `h_max` and `eps` only matter
    /// for the truncated laws (W, U).
    pub fn jump_law(&self, h_max: u64, eps: f64) -> Result<JumpLaw> {
        match self {
            Process::Y { p } => jump_law_y(p.order()),
            Process::Z { g, .. } => Ok(jump_law_z(g)),
            Process::W { p, f } => jump_law_w(f, p, h_max, eps),
            Process::U { p, .. } => jump_law_u(p, eps),
        }
    }

    /// Draws only the value at the end of the window. Cheaper than
    /// [`Process::sample_path`] and immune to event-count blowup.
    pub fn sample_terminal<R: Rng + ?Sized>(&self, mode: SampleMode, rng: &mut R) -> u64 {
        match self {
            Process::Y { p } => {
                let g = WeightTable::consecutive(p.order());
                terminal_weighted(p, &g, mode, rng)
            }
            Process::Z { p, g } => terminal_weighted(p, g, mode, rng),
            Process::W { p, f } => {
                let h = subordinated_window(p, f, rng);
                terminal_weighted_at(
                    p.lambda(),
                    h,
                    &WeightTable::consecutive(p.order()),
                    mode,
                    rng,
                )
            }
            Process::U { p, beta } => {
                let rounds = poisson_u64(beta * p.t(), rng);
                terminal_weighted_at(
                    p.lambda(),
                    rounds as f64,
                    &WeightTable::consecutive(p.order()),
                    mode,
                    rng,
                )
            }
        }
    }

    /// Draws a full trajectory. Y and Z honor `mode`; W and U always use
    /// their native event structure (W's timestamps live in subordinator
    /// time, U's on the driving clock), so `mode` is ignored for them.
    pub fn sample_path<R: Rng + ?Sized>(&self, mode: SampleMode, rng: &mut R) -> PathSample {
        match self {
            Process::Y { p } => match mode {
                SampleMode::Superposition => sample_y_superposition(p, rng),
                SampleMode::Compound => sample_y_compound(p, rng),
            },
            Process::Z { p, g } => sample_z(p, g, mode, rng),
            Process::W { p, f } => sample_w(p, f, rng),
            Process::U { p, beta } => sample_u(p, *beta, rng),
        }
    }
}

/// Poisson draw with a saturating cast; nonpositive means give 0.
pub(crate) fn poisson_u64<R: Rng + ?Sized>(mean: f64, rng: &mut R) -> u64 {
    if mean.is_nan() || mean <= 0.0 {
        return 0;
    }
    let draw: f64 = rand_distr::Poisson::new(mean.min(POISSON_MEAN_CAP))
        .expect("positive finite mean")
        .sample(rng);
    draw as u64
}

/// Sum of `n` i.i.d. marks uniform over `weights`, drawn in O(|weights|) by
/// splitting the count multinomially with sequential binomials. Exact in
/// distribution; saturates at `u64::MAX`.
fn uniform_mark_sum<R: Rng + ?Sized>(weights: &[u64], mut n: u64, rng: &mut R) -> u64 {
    let mut total: u128 = 0;
    let mut remaining = weights.len() as u64;
    for &w in weights {
        if n == 0 {
            break;
        }
        let picked = if remaining == 1 {
            n
        } else {
            Binomial::new(n, 1.0 / remaining as f64)
                .expect("probability in (0, 1)")
                .sample(rng)
        };
        total += u128::from(picked) * u128::from(w);
        n -= picked;
        remaining -= 1;
    }
    u64::try_from(total).unwrap_or(u64::MAX)
}

/// Terminal value over window `tau` at rate `lambda` per component.
fn terminal_weighted_at<R: Rng + ?Sized>(
    lambda: f64,
    tau: f64,
    g: &WeightTable,
    mode: SampleMode,
    rng: &mut R,
) -> u64 {
    match mode {
        SampleMode::Superposition => {
            let mut total: u128 = 0;
            for &w in g.weights() {
                total += u128::from(poisson_u64(lambda * tau, rng)) * u128::from(w);
            }
            u64::try_from(total).unwrap_or(u64::MAX)
        }
        SampleMode::Compound => {
            let n = poisson_u64(f64::from(g.order()) * lambda * tau, rng);
            uniform_mark_sum(g.weights(), n, rng)
        }
    }
}

fn terminal_weighted<R: Rng + ?Sized>(
    p: &OrderParams,
    g: &WeightTable,
    mode: SampleMode,
    rng: &mut R,
) -> u64 {
    terminal_weighted_at(p.lambda(), p.t(), g, mode, rng)
}

fn subordinated_window<R: Rng + ?Sized>(p: &OrderParams, f: &BernsteinFn, rng: &mut R) -> f64 {
    f.sample(p.t(), rng)
        .expect("window from validated params")
        .value
}

/// Defining construction of the order-`i` process: `i` independent Poisson
/// components with exponential gaps, component `j` contributing increment
/// `j`, merged in time order.
pub fn sample_y_superposition<R: Rng + ?Sized>(p: &OrderParams, rng: &mut R) -> PathSample {
    superposition_path(p.lambda(), p.t(), &WeightTable::consecutive(p.order()), rng)
}

/// Compound form of the order-`i` process: a Poisson(`i*lambda*t`) event
/// count, uniform event times, i.i.d. marks uniform on `{1, ..., i}`.
pub fn sample_y_compound<R: Rng + ?Sized>(p: &OrderParams, rng: &mut R) -> PathSample {
    compound_path(p.lambda(), p.t(), &WeightTable::consecutive(p.order()), rng)
}

/// Weighted process in either representation: component `j` (or a uniform
/// mark `j`) contributes increment `g(j)`.
pub fn sample_z<R: Rng + ?Sized>(
    p: &OrderParams,
    g: &WeightTable,
    mode: SampleMode,
    rng: &mut R,
) -> PathSample {
    match mode {
        SampleMode::Superposition => superposition_path(p.lambda(), p.t(), g, rng),
        SampleMode::Compound => compound_path(p.lambda(), p.t(), g, rng),
    }
}

fn superposition_path<R: Rng + ?Sized>(
    lambda: f64,
    t: f64,
    g: &WeightTable,
    rng: &mut R,
) -> PathSample {
    let mut events = Vec::new();
    if t > 0.0 {
        let gap = Exp::new(lambda).expect("positive rate");
        for &w in g.weights() {
            let mut clock = gap.sample(rng);
            while clock <= t {
                events.push((clock, w));
                clock += gap.sample(rng);
            }
        }
    }
    PathSample::from_events(events)
}

fn compound_path<R: Rng + ?Sized>(
    lambda: f64,
    t: f64,
    g: &WeightTable,
    rng: &mut R,
) -> PathSample {
    let n = poisson_u64(f64::from(g.order()) * lambda * t, rng);
    let mut events = Vec::with_capacity(n as usize);
    for _ in 0..n {
        let time = rng.random_range(0.0..t);
        let j = rng.random_range(0..g.weights().len());
        events.push((time, g.weights()[j]));
    }
    PathSample::from_events(events)
}

/// Subordinated process: draw the random window `H = H^f(t)`, then a
/// compound path over `[0, H]` in subordinator time. Timestamps are the
/// subordinator-time order of the marks; the terminal value is the
/// distributionally meaningful quantity.
///
/// The event count is Poisson with random mean `i*lambda*H` and can be
/// astronomically large under heavy-tailed kinds; past [`W_EVENT_CAP`] the
/// remaining marks are drawn as one multinomial block and recorded as a
/// single final event, which preserves the terminal law and the path
/// invariants.
pub fn sample_w<R: Rng + ?Sized>(p: &OrderParams, f: &BernsteinFn, rng: &mut R) -> PathSample {
    let h = subordinated_window(p, f, rng);
    let g = WeightTable::consecutive(p.order());
    let n = poisson_u64(f64::from(p.order()) * p.lambda() * h, rng);
    let materialized = if n > W_EVENT_CAP { W_EVENT_CAP - 1 } else { n };
    let mut events = Vec::with_capacity(materialized as usize + 1);
    for _ in 0..materialized {
        let time = rng.random_range(0.0..h);
        let j = rng.random_range(0..g.weights().len());
        events.push((time, g.weights()[j]));
    }
    if n > materialized {
        let aggregate = uniform_mark_sum(g.weights(), n - materialized, rng);
        events.push((h, aggregate));
    }
    PathSample::from_events(events)
}

/// Doubly stochastic process: a Poisson(`beta*t`) number of clock ticks at
/// uniform times, each contributing an independent order-`i` displacement
/// over a unit window; ticks with zero displacement leave no event.
pub fn sample_u<R: Rng + ?Sized>(p: &OrderParams, beta: f64, rng: &mut R) -> PathSample {
    let rounds = poisson_u64(beta * p.t(), rng);
    let i = u64::from(p.order());
    let mut events = Vec::new();
    for _ in 0..rounds {
        let n = poisson_u64(f64::from(p.order()) * p.lambda(), rng);
        let mut displacement = 0u64;
        for _ in 0..n {
            displacement += rng.random_range(1..=i);
        }
        if displacement > 0 {
            events.push((rng.random_range(0.0..p.t()), displacement));
        }
    }
    PathSample::from_events(events)
}

/// Outcome of running the embedded jump chain against a target level.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SkeletonOutcome {
    /// The chain visited the level exactly.
    pub hit: bool,
    /// Chain value when the run stopped: the level itself on a hit, the
    /// first value above it on an overshoot, and the last value below it
    /// when the run escaped into truncated residual mass.
    pub stop_value: u64,
    pub n_jumps: u64,
    /// A draw fell in the law's truncated residual: treated as a jump past
    /// the level, hence a miss (conservative for hit probabilities).
    pub escaped: bool,
}

/// Runs i.i.d. jumps from `q` until the cumulative value reaches or passes
/// `level`; a hit means landing on it exactly. Nondecreasing processes visit
/// a level if and only if their jump chain does, so this decides finiteness
/// of the hitting time with no time horizon involved.
pub fn sample_skeleton<R: Rng + ?Sized>(
    q: &JumpSampler,
    level: u64,
    rng: &mut R,
) -> SkeletonOutcome {
    let mut value = 0u64;
    let mut n_jumps = 0u64;
    while value < level {
        match q.sample(rng) {
            Some(d) => {
                value += d;
                n_jumps += 1;
            }
            None => {
                return SkeletonOutcome {
                    hit: false,
                    stop_value: value,
                    n_jumps,
                    escaped: true,
                };
            }
        }
    }
    SkeletonOutcome {
        hit: value == level,
        stop_value: value,
        n_jumps,
        escaped: false,
    }
}

/// Deterministic per-worker random stream: ChaCha12 keyed by the master seed
/// with the worker index as the stream id. This is the documented splitting
/// rule; all parallel runs in this crate derive their streams this way.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha12Rng {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Splits `n_paths` across `n_streams` workers, front-loading remainders so
/// the layout depends only on the two counts.
pub(crate) fn stream_shares(n_paths: u64, n_streams: u64) -> Vec<u64> {
    let base = n_paths / n_streams;
    let extra = n_paths % n_streams;
    (0..n_streams)
        .map(|s| base + u64::from(s < extra))
        .collect()
}

/// Histogram of terminal values over `cfg.n_paths` draws of the process at
/// window `cfg.horizon`, parallel across streams and merged in stream order;
/// bit-identical for identical `(seed, n_streams, params)`.
pub fn run_terminal_histogram(
    process: &Process,
    mode: SampleMode,
    cfg: &SimConfig,
) -> Result<BTreeMap<u64, u64>> {
    let process = process.with_t(cfg.horizon)?;
    let shares = stream_shares(cfg.n_paths, cfg.n_streams);
    let partials: Vec<BTreeMap<u64, u64>> = shares
        .par_iter()
        .enumerate()
        .map(|(stream, &share)| {
            let mut rng = stream_rng(cfg.seed, stream as u64);
            let mut hist = BTreeMap::new();
            for _ in 0..share {
                *hist.entry(process.sample_terminal(mode, &mut rng)).or_insert(0) += 1;
            }
            hist
        })
        .collect();
    let mut merged = BTreeMap::new();
    for partial in partials {
        for (value, count) in partial {
            *merged.entry(value).or_insert(0) += count;
        }
    }
    Ok(merged)
}
