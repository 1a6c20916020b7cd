//! Canned experiments and their parameter schemas.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use photonq::nonlocal::{chsh_optimal_settings, chsh_value, correlation, ghz_paradox_check, ghz_paradox_threshold, leggett_interval, leggett_test_noisy};
use photonq::protocols::{entanglement_swap, lo_working_state, linear_optical_closed_form, purify_linear_optical_state, teleport, BsmMode};
use photonq::qubit::{Bell, DensityOperator, QubitRegister};
use photonq::repeater::{nested_protocol, resource_count, simulate_network, ConnectionModel, DlczLink, PurificationMap, RepeaterConfig, SweepRow};
use photonq::{mbqc, optics, sources, C64};
use rand::Rng;
use rand_chacha::ChaCha20Rng;
use serde::Serialize;
use serde_json::{json, Value};

use crate::params::{ParamSpec, Params};
use crate::CliError;

#[derive(Clone, Debug, Default, Serialize)]
pub struct Series {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Value>>,
}

impl Series {
    fn new(columns: &[&str]) -> Self {
        Series { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    Value::Null => String::new(),
                    other => other.to_string(),
                })
                .collect();
            out.push_str(&cells.join(","));
            out.push('\n');
        }
        out
    }
}

pub struct Outcome {
    pub summary: BTreeMap<String, Value>,
    pub series: Series,
    /// Overrides the generic series-to-CSV rendering.
    pub csv: Option<String>,
}

type Runner = fn(&Params, &mut ChaCha20Rng) -> Result<Outcome, CliError>;

pub struct Experiment {
    pub id: &'static str,
    pub doc: &'static str,
    pub schema: fn() -> Vec<ParamSpec>,
    pub run: Runner,
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment { id: "hom", doc: "two-photon coincidence at a balanced splitter versus distinguishability", schema: hom_schema, run: hom },
        Experiment { id: "chsh", doc: "CHSH value of the noisy singlet at the optimal settings", schema: chsh_schema, run: chsh },
        Experiment { id: "ghz-paradox", doc: "three-photon GHZ argument and the visibility where a local model stops existing", schema: ghz_schema, run: ghz },
        Experiment { id: "leggett", doc: "Leggett inequality sweep over the relative setting angle", schema: leggett_schema, run: leggett },
        Experiment { id: "teleport", doc: "teleportation of a polarization qubit through the singlet", schema: teleport_schema, run: teleport_run },
        Experiment { id: "swap", doc: "entanglement swapping of two singlets", schema: swap_schema, run: swap },
        Experiment { id: "purify-lo", doc: "linear-optical purification rounds on the working state", schema: purify_schema, run: purify },
        Experiment { id: "grover-box", doc: "two-qubit Grover search on the four-qubit box cluster", schema: grover_schema, run: grover },
        Experiment { id: "repeater-sweep", doc: "nested repeater completion time versus distance", schema: repeater_schema, run: repeater },
    ]
}

fn lib(e: photonq::Error) -> CliError {
    CliError::from(e)
}

/// Rounds to 13 significant digits.
fn r12(x: f64) -> Value {
    let s = format!("{x:.12e}");
    Value::from(s.parse::<f64>().unwrap_or(x) + 0.0)
}

fn binomial(rng: &mut ChaCha20Rng, shots: i64, p: f64) -> i64 {
    let p = p.clamp(0.0, 1.0);
    (0..shots).filter(|_| rng.gen_bool(p)).count() as i64
}

const CHSH_SIGNS: [[f64; 4]; 4] = [[-1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, 1.0], [1.0, 1.0, -1.0, 1.0], [1.0, 1.0, 1.0, -1.0]];

/// `|Σ s_k E_k|` for sign pattern `k`, with `E` ordered (a1b1, a1b2, a2b1, a2b2).
fn chsh_combine(e: &[f64], k: usize) -> f64 {
    e.iter().zip(CHSH_SIGNS[k]).map(|(x, s)| x * s).sum::<f64>().abs()
}

fn chsh_pattern(e: &[f64]) -> usize {
    (0..4).max_by(|&i, &j| chsh_combine(e, i).total_cmp(&chsh_combine(e, j))).unwrap_or(0)
}

fn summary(pairs: Vec<(&str, Value)>) -> BTreeMap<String, Value> {
    pairs.into_iter().map(|(k, v)| (k.to_string(), v)).collect()
}

fn hom_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("alpha", 1.0, "overlap |α| of the two photon wave packets").range(0.0, 1.0),
        ParamSpec::int("points", 21, "grid points on |α| ∈ [0, 1]").range(2.0, 10_001.0),
        ParamSpec::int("shots", 10_000, "sampled photon pairs per grid point").range(0.0, 10_000_000.0),
    ]
}

fn hom(p: &Params, rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let shots = p.i("shots");
    let points = p.i("points");
    let mut series = Series::new(&["alpha", "p_coincidence", "coincidences", "shots"]);
    for k in 0..points {
        let a = k as f64 / (points - 1) as f64;
        let pc = optics::hom_experiment(C64::new(a, 0.0)).map_err(lib)?;
        series.rows.push(vec![r12(a), r12(pc), json!(binomial(rng, shots, pc)), json!(shots)]);
    }
    let pc = optics::hom_experiment(C64::new(p.f("alpha"), 0.0)).map_err(lib)?;
    let dip = optics::hom_experiment(C64::new(0.0, 0.0)).map_err(lib)?;
    Ok(Outcome {
        summary: summary(vec![("p_coincidence", r12(pc)), ("dip_visibility", r12((dip - pc) / dip))]),
        series,
        csv: None,
    })
}

fn chsh_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("visibility", 1.0, "singlet weight against white noise").range(0.0, 1.0),
        ParamSpec::int("shots", 0, "sampled coincidences per setting pair; 0 for exact only").range(0.0, 10_000_000.0),
    ]
}

fn chsh(p: &Params, rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let v = p.f("visibility");
    let shots = p.i("shots");
    let rho = DensityOperator::with_white_noise(&Bell::PsiMinus.state(), v).map_err(lib)?;
    let [a1, a2, b1, b2] = chsh_optimal_settings();
    let s = chsh_value(&rho, a1, a2, b1, b2).map_err(lib)?;
    let mut series = Series::new(&["a", "b", "E", "sampled_E"]);
    let mut sampled = Vec::new();
    for (la, a) in [("a1", a1), ("a2", a2)] {
        for (lb, b) in [("b1", b1), ("b2", b2)] {
            let e = correlation(&rho, &[a, b]).map_err(lib)?;
            let est = (shots > 0).then(|| {
                let agree = binomial(rng, shots, (1.0 + e) / 2.0);
                (2 * agree - shots) as f64 / shots as f64
            });
            sampled.push(est);
            series.rows.push(vec![json!(la), json!(lb), r12(e), est.map_or(Value::Null, r12)]);
        }
    }
    let exact: Vec<f64> = series.rows.iter().map(|r| r[2].as_f64().unwrap_or(0.0)).collect();
    let best = chsh_pattern(&exact);
    let sampled_s = match sampled[..] {
        [Some(e11), Some(e12), Some(e21), Some(e22)] => r12(chsh_combine(&[e11, e12, e21, e22], best)),
        _ => Value::Null,
    };
    Ok(Outcome {
        summary: summary(vec![
            ("S", r12(s)),
            ("lhv_bound", json!(2.0)),
            ("violated", json!(s > 2.0 + photonq::TOL)),
            ("threshold_visibility", r12(1.0 / 2f64.sqrt())),
            ("S_sampled", sampled_s),
        ]),
        series,
        csv: None,
    })
}

fn ghz_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("visibility", 1.0, "GHZ weight against white noise").range(0.0, 1.0),
        ParamSpec::int("points", 21, "grid points on the visibility axis").range(2.0, 1001.0),
    ]
}

fn ghz(p: &Params, _rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let state = QubitRegister::ghz(3).map_err(lib)?;
    let check = ghz_paradox_check(&state, p.f("visibility")).map_err(lib)?;
    let mut series = Series::new(&["visibility", "E_xyy", "E_yxy", "E_yyx", "E_xxx", "contradiction"]);
    let points = p.i("points");
    for k in 0..points {
        let v = k as f64 / (points - 1) as f64;
        let c = ghz_paradox_check(&state, v).map_err(lib)?;
        let mut row = vec![r12(v)];
        row.extend(c.expectations.iter().map(|&e| r12(e)));
        row.push(json!(c.contradiction));
        series.rows.push(row);
    }
    Ok(Outcome {
        summary: summary(vec![
            ("expectations", Value::Array(check.expectations.iter().map(|&e| r12(e)).collect())),
            ("contradiction", json!(check.contradiction)),
            ("threshold_visibility", r12(ghz_paradox_threshold(&state).map_err(lib)?)),
        ]),
        series,
        csv: None,
    })
}

fn leggett_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("phi_min", 1.0, "first setting angle in degrees").above(0.0, 179.0),
        ParamSpec::float("phi_max", 45.0, "last setting angle in degrees").above(0.0, 179.0),
        ParamSpec::float("step", 1.0, "angle step in degrees").above(0.0, 90.0),
        ParamSpec::float("visibility", 1.0, "singlet weight against white noise").range(0.0, 1.0),
    ]
}

fn leggett(p: &Params, _rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let (lo, hi, step, v) = (p.f("phi_min"), p.f("phi_max"), p.f("step"), p.f("visibility"));
    if hi < lo {
        return Err(CliError::InvalidParam { field: "phi_max".into(), reason: format!("{hi} is below phi_min {lo}") });
    }
    let mut series = Series::new(&["phi_deg", "quantum", "bound", "violated"]);
    let count = ((hi - lo) / step + 1e-9).floor() as i64;
    for k in 0..=count {
        let deg = lo + k as f64 * step;
        let r = leggett_test_noisy(deg.to_radians(), v).map_err(lib)?;
        series.rows.push(vec![r12(deg), r12(r.quantum), r12(r.bound), json!(r.violated)]);
    }
    let interval = leggett_interval(v).map_err(lib)?;
    let edges = interval.map_or(Value::Null, |(a, b)| json!([r12(a.to_degrees()), r12(b.to_degrees())]));
    Ok(Outcome {
        summary: summary(vec![
            ("violation_interval_deg", edges),
            ("violated_points", json!(series.rows.iter().filter(|r| r[3] == json!(true)).count())),
        ]),
        series,
        csv: None,
    })
}

fn teleport_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("theta", PI / 3.0, "polar angle of the input qubit").range(0.0, PI),
        ParamSpec::float("phi", 0.0, "azimuth of the input qubit").range(-PI, PI),
        ParamSpec::choice("mode", &["full", "conclusive"], "Bell analyzer: all four outcomes or the ψ⁻ signature only"),
        ParamSpec::int("shots", 1000, "sampled teleportation events").range(0.0, 10_000_000.0),
    ]
}

fn teleport_run(p: &Params, rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let (t, ph) = (p.f("theta"), p.f("phi"));
    let input = QubitRegister::product(&[(C64::new((t / 2.0).cos(), 0.0), C64::from_polar((t / 2.0).sin(), ph))]).map_err(lib)?;
    let mode = if p.s("mode") == "full" { BsmMode::Full } else { BsmMode::ConclusiveOnly };
    let tp = teleport(&input, Bell::PsiMinus, mode).map_err(lib)?;
    let shots = p.i("shots");
    let mut counts = vec![0i64; tp.branches.len()];
    for _ in 0..shots {
        let mut u: f64 = rng.gen();
        let mut pick = tp.branches.len() - 1;
        for (i, b) in tp.branches.iter().enumerate() {
            if u < b.probability {
                pick = i;
                break;
            }
            u -= b.probability;
        }
        counts[pick] += 1;
    }
    let mut series = Series::new(&["outcome", "probability", "fidelity", "counts"]);
    for (b, n) in tp.branches.iter().zip(&counts) {
        let label = b.outcome.map_or("inconclusive", |o| o.label());
        series.rows.push(vec![json!(label), r12(b.probability), b.fidelity.map_or(Value::Null, r12), json!(n)]);
    }
    Ok(Outcome {
        summary: summary(vec![
            ("success_probability", r12(tp.success_probability)),
            ("fidelity", r12(tp.fidelity)),
            ("classical_limit", r12(tp.classical_limit)),
        ]),
        series,
        csv: None,
    })
}

fn swap_schema() -> Vec<ParamSpec> {
    vec![ParamSpec::float("z", 0.0, "pair-emission amplitude |z| of each source; 0 for single pairs").range(0.0, 0.7)]
}

fn swap(p: &Params, _rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let sw = entanglement_swap().map_err(lib)?;
    let mut series = Series::new(&["outcome", "probability", "heralded_state", "overlap", "chsh"]);
    let mut s_min = f64::INFINITY;
    for b in &sw.branches {
        let (closest, overlap) = Bell::closest(&b.state);
        let [a1, a2, b1, b2] = chsh_optimal_settings();
        let rho = b.state.density();
        let e = [(a1, b1), (a1, b2), (a2, b1), (a2, b2)]
            .iter()
            .map(|&(x, y)| correlation(&rho, &[x, y]))
            .collect::<photonq::Result<Vec<f64>>>()
            .map_err(lib)?;
        // relabeling outcomes picks the sign pattern
        let exact = chsh_combine(&e, chsh_pattern(&e));
        s_min = s_min.min(exact);
        series.rows.push(vec![json!(b.outcome.label()), r12(b.probability), json!(closest.label()), r12(overlap), r12(exact)]);
    }
    let mixed = DensityOperator::maximally_mixed(2).map_err(lib)?;
    let distance = (sw.unconditioned.matrix() - mixed.matrix()).norm();
    let z = p.f("z");
    let visibility = if z > 0.0 { r12(sources::multipair_visibility(C64::new(z, 0.0)).map_err(lib)?) } else { json!(1.0) };
    Ok(Outcome {
        summary: summary(vec![
            ("chsh_after_swap", r12(s_min)),
            ("unconditioned_distance_to_mixed", r12(distance)),
            ("four_photon_visibility", visibility),
        ]),
        series,
        csv: None,
    })
}

fn purify_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::float("fidelity", 0.75, "input fidelity F with φ⁺").above(0.5, 1.0),
        ParamSpec::int("rounds", 3, "purification rounds").range(1.0, 20.0),
    ]
}

fn purify(p: &Params, _rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let mut rho = lo_working_state(p.f("fidelity")).map_err(lib)?;
    let mut f = p.f("fidelity");
    let mut yield_ = 1.0;
    let mut series = Series::new(&["round", "F_in", "F_out", "closed_form", "success_probability"]);
    for round in 1..=p.i("rounds") {
        let (step, out) = purify_linear_optical_state(&rho).map_err(lib)?;
        let closed = linear_optical_closed_form(f);
        series.rows.push(vec![json!(round), r12(f), r12(step.fidelity), r12(closed.fidelity), r12(step.success_probability)]);
        yield_ *= step.success_probability / 2.0;
        f = step.fidelity;
        rho = out;
    }
    Ok(Outcome {
        summary: summary(vec![("final_fidelity", r12(f)), ("pair_yield", r12(yield_))]),
        series,
        csv: None,
    })
}

fn grover_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::int("marked", 0, "two-bit label of the marked item").range(0.0, 3.0),
        ParamSpec::float("visibility", 1.0, "cluster weight against white noise").range(0.0, 1.0),
        ParamSpec::int("shots", 1000, "sampled readouts").range(0.0, 10_000_000.0),
    ]
}

fn grover(p: &Params, rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let g = mbqc::grover_box_noisy(p.i("marked") as u8, p.f("visibility")).map_err(lib)?;
    let mut counts = [0i64; 4];
    for _ in 0..p.i("shots") {
        let mut u: f64 = rng.gen();
        let mut pick = 3;
        for (k, &q) in g.distribution.iter().enumerate() {
            if u < q {
                pick = k;
                break;
            }
            u -= q;
        }
        counts[pick] += 1;
    }
    let mut series = Series::new(&["label", "probability", "counts"]);
    for (k, (q, n)) in g.distribution.iter().zip(counts).enumerate() {
        series.rows.push(vec![json!(format!("{k:02b}")), r12(*q), json!(n)]);
    }
    Ok(Outcome { summary: summary(vec![("success", r12(g.success))]), series, csv: None })
}

fn repeater_schema() -> Vec<ParamSpec> {
    vec![
        ParamSpec::int("L", 2, "segments joined per nesting level").range(2.0, 16.0),
        ParamSpec::int("M", 2, "copies consumed per purified pair").range(1.0, 64.0),
        ParamSpec::float("f1", 0.95, "elementary pair fidelity").above(0.5, 1.0),
        ParamSpec::float("p_c", 0.1, "DLCZ herald probability per attempt").above(0.0, 0.2),
        ParamSpec::float("t_delta", 1.0, "duration of one attempt").above(0.0, 1e9),
        ParamSpec::int("max_segments", 16, "largest segment count; the sweep runs over powers of L").range(2.0, 1_048_576.0),
        ParamSpec::int("runs", 2000, "Monte Carlo runs per distance").range(1.0, 10_000_000.0),
        ParamSpec::float("connection_error", 0.0, "depolarizing error per swap").range(0.0, 1.0),
        ParamSpec::float("swap_success", 1.0, "probability that a swap succeeds").above(0.0, 1.0),
        ParamSpec::choice("purification", &["bbpssw", "linear-optical"], "recurrence map"),
    ]
}

fn repeater(p: &Params, rng: &mut ChaCha20Rng) -> Result<Outcome, CliError> {
    let l = p.i("L") as u64;
    let mut base = RepeaterConfig::new(l, l, p.i("M") as u64, p.f("f1")).map_err(lib)?;
    base.connection = ConnectionModel::Noisy { error: p.f("connection_error") };
    base.swap_success = p.f("swap_success");
    base.purification = if p.s("purification") == "bbpssw" { PurificationMap::Bbpssw } else { PurificationMap::LinearOptical };
    let link = DlczLink::new(p.f("p_c"), p.f("t_delta")).map_err(lib)?;
    let mut segments = Vec::new();
    let mut n = l;
    while n <= p.i("max_segments") as u64 {
        segments.push(n);
        n = match n.checked_mul(l) {
            Some(m) => m,
            None => break,
        };
    }
    if segments.is_empty() {
        return Err(CliError::InvalidParam { field: "max_segments".into(), reason: format!("below L = {l}") });
    }
    let mut series = Series::new(&["N", "L", "M", "F1", "mean_time", "p50", "p95", "final_F", "R"]);
    let mut csv = format!("{}\n", SweepRow::HEADER);
    let mut rows = Vec::new();
    for &n in &segments {
        let cfg = RepeaterConfig { segments: n, ..base.clone() };
        let trace = nested_protocol(&cfg).map_err(lib)?;
        if !trace.feasible {
            return Err(CliError::Infeasible {
                reason: json!({
                    "segments": n,
                    "detail": trace.reason.unwrap_or_default(),
                    "levels": trace.levels.iter().map(|t| json!({"level": t.level, "connected": t.connected, "purified": t.purified})).collect::<Vec<_>>(),
                }),
            });
        }
        let s = simulate_network(&cfg, &link, rng, p.i("runs") as usize).map_err(lib)?;
        let row = SweepRow {
            n,
            l: cfg.branching,
            m: cfg.copies,
            f1: cfg.f1,
            mean_time: s.mean_time,
            p50: s.p50,
            p95: s.p95,
            final_f: s.final_fidelity,
            r: resource_count(&cfg).map_err(lib)?,
        };
        csv.push_str(&row.csv());
        csv.push('\n');
        series.rows.push(vec![
            json!(row.n),
            json!(row.l),
            json!(row.m),
            r12(row.f1),
            r12(row.mean_time),
            r12(row.p50),
            r12(row.p95),
            r12(row.final_f),
            json!(row.r.to_string()),
        ]);
        rows.push(row);
    }
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.n as f64, r.mean_time)).collect();
    let slopes = photonq::repeater::loglog_slopes(&pts);
    Ok(Outcome {
        summary: summary(vec![
            ("loglog_slopes", Value::Array(slopes.iter().map(|&s| r12(s)).collect())),
            ("final_fidelity", r12(rows.last().map_or(0.0, |r| r.final_f))),
            ("direct_mean_attempts_at_max", r12(p.f("p_c").powi(-(rows.last().map_or(1, |r| r.n) as i32)))),
        ]),
        series,
        csv: Some(csv),
    })
}
