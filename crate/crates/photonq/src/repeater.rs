//! Nested connect-and-purify repeater chains and the probabilistic
//! elementary-link model of atomic-ensemble memories.
//!
//! Times are in units of one link attempt `t_Δ` unless stated otherwise.

use std::f64::consts::PI;

use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::protocols::{bbpssw_closed_form, linear_optical_closed_form, Purification};
use crate::qubit::QubitRegister;
use crate::C64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PurificationMap {
    Bbpssw,
    LinearOptical,
}

impl PurificationMap {
    pub fn apply(self, f: f64) -> Purification {
        match self {
            PurificationMap::Bbpssw => bbpssw_closed_form(f),
            PurificationMap::LinearOptical => linear_optical_closed_form(f),
        }
    }
}

/// Fidelity after joining `L` pairs by swapping.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum ConnectionModel {
    /// `F → F^L`.
    Product,
    /// `F → F^L`, then each of the `L − 1` swaps depolarizes:
    /// `F → (1 − ε)F + ε/4`.
    Noisy { error: f64 },
}

impl ConnectionModel {
    pub fn apply(self, f: f64, l: u64) -> f64 {
        let joined = f.powi(l as i32);
        match self {
            ConnectionModel::Product => joined,
            ConnectionModel::Noisy { error } => (0..l.saturating_sub(1)).fold(joined, |x, _| (1.0 - error) * x + error / 4.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeaterConfig {
    /// `N = L^n`.
    pub segments: u64,
    pub branching: u64,
    /// Copies consumed per purified pair; `⌊log₂ M⌋` recurrence rounds.
    pub copies: u64,
    pub f1: f64,
    pub connection: ConnectionModel,
    pub purification: PurificationMap,
    pub f_min: f64,
    pub f_max: f64,
    /// Success probability of one swap; a failed swap discards its inputs.
    pub swap_success: f64,
}

impl RepeaterConfig {
    pub fn new(segments: u64, branching: u64, copies: u64, f1: f64) -> Result<Self> {
        let c = RepeaterConfig {
            segments,
            branching,
            copies,
            f1,
            connection: ConnectionModel::Product,
            purification: PurificationMap::Bbpssw,
            f_min: 0.5,
            f_max: 1.0,
            swap_success: 1.0,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        if self.branching < 2 {
            return Err(invalid("branching", "L must be at least 2"));
        }
        if self.copies == 0 {
            return Err(invalid("copies", "M must be at least 1"));
        }
        self.levels()?;
        if !(self.f_min < self.f1 && self.f1 <= self.f_max && self.f_max <= 1.0) {
            return Err(invalid("f1", format!("need F_min < F1 <= F_max <= 1, got {} < {} <= {}", self.f_min, self.f1, self.f_max)));
        }
        if !(self.swap_success > 0.0 && self.swap_success <= 1.0) {
            return Err(invalid("swap_success", "must lie in (0, 1]"));
        }
        if let ConnectionModel::Noisy { error } = self.connection {
            if !(0.0..=1.0).contains(&error) {
                return Err(invalid("error", "must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// `n` with `N = L^n`.
    pub fn levels(&self) -> Result<u32> {
        let mut n = 0;
        let mut p = 1u64;
        while p < self.segments {
            p = p.checked_mul(self.branching).ok_or_else(|| invalid("segments", "overflow"))?;
            n += 1;
        }
        if p != self.segments || self.segments == 0 {
            return Err(invalid("segments", format!("{} is not a power of {}", self.segments, self.branching)));
        }
        Ok(n)
    }

    pub fn rounds(&self) -> u32 {
        self.copies.ilog2()
    }
}

/// Total elementary pairs `(L·M)^n`, exact.
pub fn resource_count(config: &RepeaterConfig) -> Result<u128> {
    let n = config.levels()?;
    (config.branching as u128 * config.copies as u128)
        .checked_pow(n)
        .ok_or_else(|| invalid("segments", "resource count overflows"))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LevelTrace {
    pub level: u32,
    pub connected: f64,
    pub purified: f64,
    /// Probability that every recurrence round at this level succeeds.
    pub purification_success: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NestedResult {
    pub levels: Vec<LevelTrace>,
    pub final_fidelity: f64,
    /// Every fidelity stayed inside `[F_min, F_max]`.
    pub feasible: bool,
    /// Every level was purified back to at least `F1`.
    pub restored: bool,
    pub reason: Option<String>,
}

/// Iterates connection and purification level by level.
pub fn nested_protocol(config: &RepeaterConfig) -> Result<NestedResult> {
    config.validate()?;
    let n = config.levels()?;
    let mut f = config.f1;
    let mut levels = Vec::new();
    let mut reason = None;
    let mut restored = true;
    let inside = |x: f64| x > config.f_min && x <= config.f_max + 1e-15;
    for level in 1..=n {
        let connected = config.connection.apply(f, config.branching);
        if !inside(connected) {
            reason = Some(format!("level {level}: connected fidelity {connected:.6} left the window"));
            levels.push(LevelTrace { level, connected, purified: connected, purification_success: 0.0 });
            f = connected;
            break;
        }
        let mut purified = connected;
        let mut success = 1.0;
        for _ in 0..config.rounds() {
            let p = config.purification.apply(purified);
            purified = p.fidelity;
            success *= p.success_probability;
        }
        restored &= purified >= config.f1 - 1e-12;
        levels.push(LevelTrace { level, connected, purified, purification_success: success });
        f = purified;
    }
    Ok(NestedResult { levels, final_fidelity: f, feasible: reason.is_none(), restored: restored && reason.is_none(), reason })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum PhaseModel {
    Fixed(f64),
    /// Uniform on `[0, 2π)`, independently per link.
    Drift,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DlczLink {
    pub p_c: f64,
    pub t_delta: f64,
    pub phase: PhaseModel,
}

impl DlczLink {
    pub fn new(p_c: f64, t_delta: f64) -> Result<Self> {
        if !(p_c > 0.0 && p_c <= 0.2) {
            return Err(invalid("p_c", format!("{p_c} outside (0, 0.2]")));
        }
        if t_delta.is_nan() || t_delta <= 0.0 {
            return Err(invalid("t_delta", "must be positive"));
        }
        Ok(DlczLink { p_c, t_delta, phase: PhaseModel::Fixed(0.0) })
    }

    pub fn with_phase(mut self, phase: PhaseModel) -> Self {
        self.phase = phase;
        self
    }

    /// Set when the first-order model is stretched.
    pub fn warning(&self) -> Option<String> {
        (self.p_c > 0.1).then(|| format!("p_c = {} is large; multi-excitation terms are ignored", self.p_c))
    }

    /// `t_Δ / p_c`.
    pub fn mean_time(&self) -> f64 {
        self.t_delta / self.p_c
    }
}

/// One heralded link: `(|10⟩ + sign·e^{iφ}|01⟩)/√2` over the two
/// ensembles' single-excitation modes.
#[derive(Clone, Debug, PartialEq)]
pub struct DlczHerald {
    pub rounds: u64,
    pub time: f64,
    pub phase: f64,
    pub sign: i8,
    pub state: QubitRegister,
}

impl DlczHerald {
    /// Fidelity with `(|10⟩ + e^{iφ}|01⟩)/√2` once the sign is undone.
    pub fn fidelity(&self) -> f64 {
        let ideal = dlcz_state(self.phase, 1);
        let fixed = if self.sign < 0 { self.state.apply_pauli(1, crate::qubit::Pauli::Z) } else { self.state.clone() };
        fixed.overlap(&ideal)
    }
}

pub fn dlcz_state(phase: f64, sign: i8) -> QubitRegister {
    let h = std::f64::consts::FRAC_1_SQRT_2;
    QubitRegister::new(vec![C64::default(), C64::from_polar(h * sign as f64, phase), C64::new(h, 0.0), C64::default()]).expect("normalized")
}

/// Attempt index of the first success of a Bernoulli(`p`) sequence.
pub fn geometric(p: f64, rng: &mut ChaCha20Rng) -> u64 {
    if p >= 1.0 {
        return 1;
    }
    let u: f64 = 1.0 - rng.gen::<f64>();
    (u.ln() / (-p).ln_1p()).floor() as u64 + 1
}

pub fn dlcz_generate(link: &DlczLink, rng: &mut ChaCha20Rng, max_attempts: u64) -> Result<DlczHerald> {
    let rounds = geometric(link.p_c, rng);
    let phase = match link.phase {
        PhaseModel::Fixed(p) => p,
        PhaseModel::Drift => rng.gen::<f64>() * 2.0 * PI,
    };
    let sign = if rng.gen_bool(0.5) { 1 } else { -1 };
    if rounds > max_attempts {
        return Err(Error::AttemptsExhausted(max_attempts));
    }
    Ok(DlczHerald { rounds, time: rounds as f64 * link.t_delta, phase, sign, state: dlcz_state(phase, sign) })
}

/// Fringe visibility of the single-excitation interference averaged over
/// heralds, after undoing each herald's sign.
pub fn averaged_visibility(heralds: &[DlczHerald]) -> f64 {
    if heralds.is_empty() {
        return 0.0;
    }
    let sum: C64 = heralds.iter().map(|h| C64::from_polar(1.0, h.phase)).sum();
    sum.norm() / heralds.len() as f64
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkStats {
    pub runs: usize,
    pub mean_time: f64,
    pub p50: f64,
    pub p95: f64,
    pub final_fidelity: f64,
    pub feasible: bool,
    pub elementary_links: f64,
}

struct Network<'a> {
    config: &'a RepeaterConfig,
    p_c: f64,
    rng: &'a mut ChaCha20Rng,
    links: u64,
    purify_success: Vec<f64>,
}

impl Network<'_> {
    /// Time to hold one connected pair spanning `L^level` segments.
    fn connected(&mut self, level: u32) -> f64 {
        if level == 0 {
            self.links += 1;
            return geometric(self.p_c, self.rng) as f64;
        }
        let mut t = 0.0;
        loop {
            let mut longest: f64 = 0.0;
            for _ in 0..self.config.branching {
                longest = longest.max(self.purified(level - 1, self.config.rounds()));
            }
            t += longest;
            let swaps = self.config.branching - 1;
            if (0..swaps).all(|_| self.rng.gen_bool(self.config.swap_success)) {
                return t;
            }
        }
    }

    fn purified(&mut self, level: u32, rounds: u32) -> f64 {
        if level == 0 || rounds == 0 {
            return self.connected(level);
        }
        let p = self.purify_success[level as usize * 64 + rounds as usize - 1];
        let mut t = 0.0;
        loop {
            let a = self.purified(level, rounds - 1);
            let b = self.purified(level, rounds - 1);
            t += a.max(b);
            if self.rng.gen_bool(p.clamp(0.0, 1.0)) {
                return t;
            }
        }
    }
}

/// Event-driven run of the whole chain: links generate in parallel, each
/// swap and purification round may fail and force regeneration of its
/// inputs. Elementary segments are not purified.
pub fn simulate_network(config: &RepeaterConfig, link: &DlczLink, rng: &mut ChaCha20Rng, runs: usize) -> Result<NetworkStats> {
    if runs == 0 {
        return Err(invalid("runs", "need at least one run"));
    }
    let trace = nested_protocol(config)?;
    let n = config.levels()?;
    // per-round success at each level, from the fidelity recursion
    let mut purify_success = vec![1.0; (n as usize + 1) * 64];
    for t in &trace.levels {
        let mut f = t.connected;
        for r in 0..config.rounds() {
            let p = config.purification.apply(f);
            purify_success[t.level as usize * 64 + r as usize] = p.success_probability;
            f = p.fidelity;
        }
    }
    let mut net = Network { config, p_c: link.p_c, rng, links: 0, purify_success };
    let mut times: Vec<f64> = (0..runs).map(|_| net.connected(n) * link.t_delta).collect();
    let links = net.links as f64 / runs as f64;
    times.sort_by(|a, b| a.total_cmp(b));
    let quantile = |q: f64| times[((q * runs as f64).ceil() as usize).clamp(1, runs) - 1];
    Ok(NetworkStats {
        runs,
        mean_time: times.iter().sum::<f64>() / runs as f64,
        p50: quantile(0.5),
        p95: quantile(0.95),
        final_fidelity: trace.final_fidelity,
        feasible: trace.feasible,
        elementary_links: links,
    })
}

/// Mean attempts for direct transmission over `N` segments, each passed
/// with probability `p`.
pub fn direct_transmission(p: f64, segments: u64, rng: &mut ChaCha20Rng, runs: usize) -> Result<f64> {
    if !(p > 0.0 && p <= 1.0) || runs == 0 {
        return Err(invalid("p", "need p in (0, 1] and at least one run"));
    }
    let q = p.powi(segments as i32);
    Ok((0..runs).map(|_| geometric(q, rng) as f64).sum::<f64>() / runs as f64)
}

/// One CSV row of a repeater sweep.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    #[serde(rename = "N")]
    pub n: u64,
    #[serde(rename = "L")]
    pub l: u64,
    #[serde(rename = "M")]
    pub m: u64,
    #[serde(rename = "F1")]
    pub f1: f64,
    pub mean_time: f64,
    pub p50: f64,
    pub p95: f64,
    #[serde(rename = "final_F")]
    pub final_f: f64,
    #[serde(rename = "R")]
    pub r: u128,
}

impl SweepRow {
    pub const HEADER: &'static str = "N,L,M,F1,mean_time,p50,p95,final_F,R";

    pub fn csv(&self) -> String {
        format!("{},{},{},{},{},{},{},{},{}", self.n, self.l, self.m, self.f1, self.mean_time, self.p50, self.p95, self.final_f, self.r)
    }
}

/// Runs `simulate_network` for each segment count, others fixed.
pub fn sweep(base: &RepeaterConfig, segments: &[u64], link: &DlczLink, rng: &mut ChaCha20Rng, runs: usize) -> Result<Vec<SweepRow>> {
    segments
        .iter()
        .map(|&n| {
            let cfg = RepeaterConfig { segments: n, ..base.clone() };
            cfg.validate()?;
            let s = simulate_network(&cfg, link, rng, runs)?;
            Ok(SweepRow {
                n,
                l: cfg.branching,
                m: cfg.copies,
                f1: cfg.f1,
                mean_time: s.mean_time,
                p50: s.p50,
                p95: s.p95,
                final_f: s.final_fidelity,
                r: resource_count(&cfg)?,
            })
        })
        .collect()
}

/// Slopes of `ln y` against `ln x` between consecutive points.
pub fn loglog_slopes(points: &[(f64, f64)]) -> Vec<f64> {
    points.windows(2).map(|w| (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln())).collect()
}
