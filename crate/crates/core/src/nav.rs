//! Velocity-limit governor and a small 2D corridor simulation.
//!
//! The governor clamps planner velocity commands to the `vel_limit` of the
//! most recently retrieved descriptor. Retrieval is attempted at most once
//! per inference period; a failed attempt keeps the previous limit.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc::{self, SyncSender, TrySendError};
use std::sync::Arc;
use std::thread::JoinHandle;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::descriptor::DescriptorBounds;
use crate::par;
use crate::retrieval::wire::WireQuery;
use crate::retrieval::{Method, Query, RetrievalError, RetrievalResult, Retriever, DEFAULT_K};

#[derive(Debug, Error, PartialEq)]
pub enum NavError {
    #[error("{0} is empty")]
    EmptyInput(&'static str),
    #[error("bad governor config: {0}")]
    Config(String),
    #[error("bad scenario: {0}")]
    Scenario(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GovernorConfig {
    pub inference_period_s: f64,
    pub k: usize,
    pub method: Method,
    /// Limit in force before the first successful retrieval.
    pub fallback_vel_limit: f64,
}

impl Default for GovernorConfig {
    fn default() -> Self {
        Self {
            inference_period_s: 5.0,
            k: DEFAULT_K,
            method: Method::Mixed,
            fallback_vel_limit: 0.5,
        }
    }
}

impl GovernorConfig {
    pub fn validate(&self) -> Result<(), NavError> {
        if !(self.inference_period_s.is_finite() && self.inference_period_s > 0.0) {
            return Err(NavError::Config(format!(
                "inference_period_s must be > 0, got {}",
                self.inference_period_s
            )));
        }
        if self.k == 0 {
            return Err(NavError::Config("k must be at least 1".into()));
        }
        let max = DescriptorBounds::default().max_vel_limit;
        if !(self.fallback_vel_limit > 0.0 && self.fallback_vel_limit <= max) {
            return Err(NavError::Config(format!(
                "fallback_vel_limit must be in (0, {max}], got {}",
                self.fallback_vel_limit
            )));
        }
        Ok(())
    }
}

/// Source of limit recommendations for an observation.
pub trait LimitAdvisor {
    fn advise(&self, observation: &Query) -> Result<RetrievalResult, RetrievalError>;
}

impl<F> LimitAdvisor for F
where
    F: Fn(&Query) -> Result<RetrievalResult, RetrievalError>,
{
    fn advise(&self, observation: &Query) -> Result<RetrievalResult, RetrievalError> {
        self(observation)
    }
}

/// Advisor backed by skill-database retrieval.
pub struct RetrievalAdvisor<'a> {
    pub retriever: Retriever<'a>,
    pub k: usize,
    pub method: Method,
}

impl LimitAdvisor for RetrievalAdvisor<'_> {
    fn advise(&self, observation: &Query) -> Result<RetrievalResult, RetrievalError> {
        self.retriever.retrieve(observation, self.k, self.method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GovernorState {
    pub active_limit: f64,
    /// Time of the last inference attempt, successful or not.
    pub last_inference: Option<f64>,
    pub last_result: Option<RetrievalResult>,
    last_t: Option<f64>,
}

impl GovernorState {
    pub fn new(cfg: &GovernorConfig) -> Self {
        Self {
            active_limit: cfg.fallback_vel_limit,
            last_inference: None,
            last_result: None,
            last_t: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Inference {
    /// No observation, or the period gate was closed.
    Skipped,
    /// The limit was replaced.
    Swapped,
    /// Retrieval failed or returned an unusable descriptor; limit kept.
    Failed,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutput {
    pub cmd: [f64; 2],
    pub inference: Inference,
}

pub fn speed(v: [f64; 2]) -> f64 {
    v[0].hypot(v[1])
}

/// Scale `cmd` down so its magnitude does not exceed `limit`, keeping its
/// direction. Non-finite commands become a stop.
pub fn clamp_velocity(cmd: [f64; 2], limit: f64) -> [f64; 2] {
    let s = speed(cmd);
    if !s.is_finite() || !limit.is_finite() || limit <= 0.0 {
        return [0.0, 0.0];
    }
    if s <= limit {
        return cmd;
    }
    let mut out = [cmd[0] * limit / s, cmd[1] * limit / s];
    while speed(out) > limit {
        out = [out[0] * (1.0 - f64::EPSILON), out[1] * (1.0 - f64::EPSILON)];
    }
    out
}

fn usable_limit(result: &RetrievalResult) -> Option<f64> {
    result.descriptor.validate().ok().map(|_| result.descriptor.vel_limit)
}

/// One control tick: maybe refresh the limit from `observation`, then clamp.
///
/// Times are expected to be nondecreasing; a tick that goes back in time
/// only clamps.
pub fn governor_step(
    state: &mut GovernorState,
    cfg: &GovernorConfig,
    advisor: &dyn LimitAdvisor,
    t: f64,
    observation: Option<&Query>,
    cmd: [f64; 2],
) -> StepOutput {
    let monotone = state.last_t.is_none_or(|last| t >= last);
    if !monotone {
        log::warn!("governor tick at t={t} precedes t={:?}; skipping inference", state.last_t);
    } else {
        state.last_t = Some(t);
    }
    let gate_open = state
        .last_inference
        .is_none_or(|last| t - last >= cfg.inference_period_s);
    let inference = match observation {
        Some(obs) if monotone && gate_open => {
            state.last_inference = Some(t);
            match advisor.advise(obs) {
                Ok(result) => match usable_limit(&result) {
                    Some(limit) => {
                        state.active_limit = limit;
                        state.last_result = Some(result);
                        Inference::Swapped
                    }
                    None => {
                        log::warn!("t={t}: retrieved record {} has an invalid descriptor", result.chosen_id);
                        Inference::Failed
                    }
                },
                Err(e) => {
                    log::warn!("t={t}: retrieval failed, keeping limit {}: {e}", state.active_limit);
                    Inference::Failed
                }
            }
        }
        _ => Inference::Skipped,
    };
    StepOutput {
        cmd: clamp_velocity(cmd, state.active_limit),
        inference,
    }
}

/// An `f64` shared between one writer and any number of readers.
#[derive(Debug)]
pub struct SharedLimit(AtomicU64);

impl SharedLimit {
    pub fn new(v: f64) -> Self {
        Self(AtomicU64::new(v.to_bits()))
    }

    pub fn load(&self) -> f64 {
        f64::from_bits(self.0.load(Ordering::Acquire))
    }

    pub fn store(&self, v: f64) {
        self.0.store(v.to_bits(), Ordering::Release);
    }
}

/// Governor whose retrievals run on a worker thread.
///
/// [`clamp`](Self::clamp) only reads the shared limit and never waits.
/// Observations offered while the gate is closed or the worker is busy are
/// dropped.
pub struct AsyncGovernor {
    limit: Arc<SharedLimit>,
    period: f64,
    last_submit: Option<f64>,
    tx: Option<SyncSender<Query>>,
    worker: Option<JoinHandle<()>>,
}

impl AsyncGovernor {
    pub fn spawn<A>(cfg: &GovernorConfig, advisor: A) -> Result<Self, NavError>
    where
        A: LimitAdvisor + Send + 'static,
    {
        cfg.validate()?;
        let limit = Arc::new(SharedLimit::new(cfg.fallback_vel_limit));
        let (tx, rx) = mpsc::sync_channel::<Query>(1);
        let writer = Arc::clone(&limit);
        let worker = std::thread::spawn(move || {
            for obs in rx {
                match advisor.advise(&obs) {
                    Ok(r) => match usable_limit(&r) {
                        Some(v) => writer.store(v),
                        None => log::warn!("record {} has an invalid descriptor", r.chosen_id),
                    },
                    Err(e) => log::warn!("retrieval failed, keeping limit: {e}"),
                }
            }
        });
        Ok(Self {
            limit,
            period: cfg.inference_period_s,
            last_submit: None,
            tx: Some(tx),
            worker: Some(worker),
        })
    }

    /// Offer an observation; returns whether it was queued.
    pub fn observe(&mut self, t: f64, observation: Query) -> bool {
        if self.last_submit.is_some_and(|last| t - last < self.period) {
            return false;
        }
        let Some(tx) = &self.tx else { return false };
        match tx.try_send(observation) {
            Ok(()) => {
                self.last_submit = Some(t);
                true
            }
            Err(TrySendError::Full(_)) | Err(TrySendError::Disconnected(_)) => false,
        }
    }

    pub fn active_limit(&self) -> f64 {
        self.limit.load()
    }

    pub fn clamp(&self, cmd: [f64; 2]) -> [f64; 2] {
        clamp_velocity(cmd, self.limit.load())
    }

    /// Stop the worker after it drains pending observations.
    pub fn shutdown(mut self) {
        self.stop();
    }

    fn stop(&mut self) {
        self.tx.take();
        if let Some(w) = self.worker.take() {
            let _ = w.join();
        }
    }
}

impl Drop for AsyncGovernor {
    fn drop(&mut self) {
        self.stop();
    }
}

// ---------------------------------------------------------------------------
// Geometry and simulation

fn dist(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).hypot(a[1] - b[1])
}

fn nearest(p: [f64; 2], obstacles: &[[f64; 2]]) -> f64 {
    obstacles.iter().map(|&o| dist(p, o)).fold(f64::INFINITY, f64::min)
}

/// Smallest distance between any trajectory sample and any obstacle point.
pub fn min_clearance(trajectory: &[[f64; 2]], obstacles: &[[f64; 2]]) -> Result<f64, NavError> {
    if trajectory.is_empty() {
        return Err(NavError::EmptyInput("trajectory"));
    }
    if obstacles.is_empty() {
        return Err(NavError::EmptyInput("obstacle list"));
    }
    Ok(par::map(trajectory, |&p| nearest(p, obstacles))
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationEvent {
    pub t: f64,
    pub query: WireQuery,
}

fn d_dt() -> f64 {
    0.05
}
fn d_duration() -> f64 {
    120.0
}
fn d_cruise() -> f64 {
    1.5
}
fn d_lookahead() -> f64 {
    0.4
}
fn d_tau0() -> f64 {
    0.1
}
fn d_tau_gain() -> f64 {
    0.3
}
fn d_goal_tol() -> f64 {
    0.2
}

/// Scenario file: path, static obstacles and the observation schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    /// Path to follow; the robot starts on the first waypoint facing the second.
    pub waypoints: Vec<[f64; 2]>,
    pub obstacles: Vec<[f64; 2]>,
    #[serde(default)]
    pub observations: Vec<ObservationEvent>,
    #[serde(default = "d_dt")]
    pub dt: f64,
    #[serde(default = "d_duration")]
    pub duration_s: f64,
    /// Speed the planner always asks for.
    #[serde(default = "d_cruise")]
    pub cruise_speed: f64,
    #[serde(default = "d_lookahead")]
    pub lookahead: f64,
    /// Heading time constant is `tau0 + tau_gain * speed`.
    #[serde(default = "d_tau0")]
    pub tau0: f64,
    #[serde(default = "d_tau_gain")]
    pub tau_gain: f64,
    #[serde(default = "d_goal_tol")]
    pub goal_tolerance: f64,
}

/// The bundled L-shaped corridor scenario.
pub const CORRIDOR_SCENARIO_JSON: &str = include_str!("../scenarios/corridor.json");

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, NavError> {
        let s: Scenario =
            serde_json::from_str(text).map_err(|e| NavError::Scenario(e.to_string()))?;
        s.validate()?;
        Ok(s)
    }

    pub fn corridor() -> Self {
        Self::from_json_str(CORRIDOR_SCENARIO_JSON).expect("bundled scenario is valid")
    }

    pub fn validate(&self) -> Result<(), NavError> {
        let bad = |m: String| Err(NavError::Scenario(m));
        if self.waypoints.len() < 2 {
            return bad("at least two waypoints are required".into());
        }
        if self.obstacles.is_empty() {
            return bad("obstacle list is empty".into());
        }
        let all_points = self.waypoints.iter().chain(&self.obstacles);
        if all_points.flatten().any(|x| !x.is_finite()) {
            return bad("non-finite coordinate".into());
        }
        for (name, v) in [
            ("dt", self.dt),
            ("duration_s", self.duration_s),
            ("cruise_speed", self.cruise_speed),
            ("lookahead", self.lookahead),
            ("tau0", self.tau0),
            ("goal_tolerance", self.goal_tolerance),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be > 0, got {v}"));
            }
        }
        if !(self.tau_gain.is_finite() && self.tau_gain >= 0.0) {
            return bad(format!("tau_gain must be >= 0, got {}", self.tau_gain));
        }
        if self.observations.windows(2).any(|w| w[1].t < w[0].t) {
            return bad("observations must be sorted by time".into());
        }
        for o in &self.observations {
            o.query
                .to_query()
                .map_err(|e| NavError::Scenario(format!("observation at t={}: {e}", o.t)))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub t: f64,
    /// Commanded speed.
    pub cmd: f64,
    /// Speed after the governor.
    pub clamped: f64,
    pub active_limit: f64,
    pub clearance: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimRun {
    pub log: Vec<LogRow>,
    pub trajectory: Vec<[f64; 2]>,
    pub min_clearance: f64,
    pub reached_goal: bool,
    /// Times at which the active limit was replaced.
    pub swaps: Vec<f64>,
}

impl SimRun {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("t,cmd,clamped,active_limit,clearance\n");
        for r in &self.log {
            let limit = if r.active_limit.is_finite() {
                format!("{:.4}", r.active_limit)
            } else {
                "inf".into()
            };
            s.push_str(&format!(
                "{:.3},{:.4},{:.4},{limit},{:.4}\n",
                r.t, r.cmd, r.clamped, r.clearance
            ));
        }
        s
    }
}

fn wrap_angle(a: f64) -> f64 {
    let two_pi = std::f64::consts::TAU;
    let mut x = (a + std::f64::consts::PI).rem_euclid(two_pi) - std::f64::consts::PI;
    if x <= -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

/// Drive a point robot along the scenario path.
///
/// The planner is a pure-pursuit follower asking for `cruise_speed` toward
/// the next waypoint beyond `lookahead`. The robot's heading relaxes toward
/// the commanded direction with a time constant that grows with speed, so
/// fast runs swing wide in corners. With `governor` set, every command
/// passes through [`governor_step`] and observations are offered at their
/// scheduled times.
pub fn simulate(
    scenario: &Scenario,
    governor: Option<(&GovernorConfig, &dyn LimitAdvisor)>,
) -> Result<SimRun, NavError> {
    scenario.validate()?;
    if let Some((cfg, _)) = governor {
        cfg.validate()?;
    }
    let queries: Vec<(f64, Query)> = scenario
        .observations
        .iter()
        .map(|o| (o.t, o.query.to_query().expect("validated")))
        .collect();
    let wp = &scenario.waypoints;
    let goal = *wp.last().expect("validated");
    let mut pos = wp[0];
    let mut heading = (wp[1][1] - wp[0][1]).atan2(wp[1][0] - wp[0][0]);
    let mut target = 1;
    let mut state = governor.map(|(cfg, _)| GovernorState::new(cfg));
    let mut next_obs = 0;
    let steps = (scenario.duration_s / scenario.dt).floor() as usize;
    let mut log = Vec::with_capacity(steps + 1);
    let mut trajectory = vec![pos];
    let mut swaps = Vec::new();
    let mut reached_goal = false;

    for step in 0..=steps {
        let t = step as f64 * scenario.dt;
        if dist(pos, goal) <= scenario.goal_tolerance {
            reached_goal = true;
            break;
        }
        while target + 1 < wp.len() && dist(pos, wp[target]) < scenario.lookahead {
            target += 1;
        }
        let aim = wp[target];
        let psi = (aim[1] - pos[1]).atan2(aim[0] - pos[0]);
        let cmd = [scenario.cruise_speed * psi.cos(), scenario.cruise_speed * psi.sin()];

        let mut observation = None;
        while next_obs < queries.len() && queries[next_obs].0 <= t + 1e-9 {
            observation = Some(&queries[next_obs].1);
            next_obs += 1;
        }
        let (out, limit) = match (governor, state.as_mut()) {
            (Some((cfg, advisor)), Some(st)) => {
                let o = governor_step(st, cfg, advisor, t, observation, cmd);
                if o.inference == Inference::Swapped {
                    swaps.push(t);
                }
                (o.cmd, st.active_limit)
            }
            _ => (cmd, f64::INFINITY),
        };
        let v = speed(out);
        log.push(LogRow {
            t,
            cmd: speed(cmd),
            clamped: v,
            active_limit: limit,
            clearance: nearest(pos, &scenario.obstacles),
        });
        let tau = scenario.tau0 + scenario.tau_gain * v;
        let blend = (scenario.dt / tau).min(1.0);
        if v > 0.0 {
            let desired = out[1].atan2(out[0]);
            heading = wrap_angle(heading + blend * wrap_angle(desired - heading));
        }
        pos = [
            pos[0] + v * heading.cos() * scenario.dt,
            pos[1] + v * heading.sin() * scenario.dt,
        ];
        trajectory.push(pos);
    }
    let min_clearance = min_clearance(&trajectory, &scenario.obstacles)?;
    Ok(SimRun {
        log,
        trajectory,
        min_clearance,
        reached_goal,
        swaps,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::descriptor::MotionDescriptor;
    use proptest::prelude::*;
    use std::cell::Cell;

    fn result(vel: f64) -> RetrievalResult {
        RetrievalResult {
            chosen_id: 0,
            instruction: "x".into(),
            descriptor: MotionDescriptor::new([0.0, 0.5, 0.5, 0.0], 0.5, vel),
            method: Method::Mixed,
            query_kind: "text".into(),
            candidates: vec![0],
            similarities: vec![1.0],
            p1: vec![1.0],
            p2: vec![],
            combined: vec![1.0],
        }
    }

    fn fixed(vel: f64) -> impl Fn(&Query) -> Result<RetrievalResult, RetrievalError> {
        move |_| Ok(result(vel))
    }

    #[test]
    fn clamp_examples() {
        let cfg = GovernorConfig::default();
        let mut st = GovernorState::new(&cfg);
        st.active_limit = 0.6;
        let adv = fixed(0.6);
        let out = governor_step(&mut st, &cfg, &adv, 0.0, None, [1.5, 0.0]);
        assert!((speed(out.cmd) - 0.6).abs() < 1e-12);
        let out = governor_step(&mut st, &cfg, &adv, 0.1, None, [0.0, 0.4]);
        assert_eq!(out.cmd, [0.0, 0.4]);
        let out = governor_step(&mut st, &cfg, &adv, 0.2, None, [3.0, 4.0]);
        assert!((out.cmd[1] / out.cmd[0] - 4.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn period_gate_ignores_early_observation() {
        let cfg = GovernorConfig::default();
        let mut st = GovernorState::new(&cfg);
        let calls = Cell::new(0);
        let adv = |_: &Query| {
            calls.set(calls.get() + 1);
            Ok(result(if calls.get() == 1 { 0.6 } else { 2.0 }))
        };
        let obs = Query::Text("narrow".into());
        let a = governor_step(&mut st, &cfg, &adv, 0.0, Some(&obs), [1.0, 0.0]);
        assert_eq!(a.inference, Inference::Swapped);
        for t in [1.0, 2.0, 3.0, 4.9] {
            let o = governor_step(&mut st, &cfg, &adv, t, Some(&obs), [1.0, 0.0]);
            assert_eq!(o.inference, Inference::Skipped);
            assert_eq!(st.active_limit, 0.6);
        }
        assert_eq!(calls.get(), 1);
        let b = governor_step(&mut st, &cfg, &adv, 5.0, Some(&obs), [1.0, 0.0]);
        assert_eq!(b.inference, Inference::Swapped);
        assert_eq!(st.active_limit, 2.0);
    }

    #[test]
    fn failures_keep_previous_limit() {
        let cfg = GovernorConfig::default();
        let mut st = GovernorState::new(&cfg);
        let fail = |_: &Query| Err(RetrievalError::EmptyQuery);
        let obs = Query::Text("x".into());
        let o = governor_step(&mut st, &cfg, &fail, 0.0, Some(&obs), [2.0, 0.0]);
        assert_eq!(o.inference, Inference::Failed);
        assert_eq!(st.active_limit, cfg.fallback_vel_limit);
        assert_eq!(o.cmd, [cfg.fallback_vel_limit, 0.0]);
        let bad = fixed(9.0);
        let o = governor_step(&mut st, &cfg, &bad, 10.0, Some(&obs), [2.0, 0.0]);
        assert_eq!(o.inference, Inference::Failed);
        assert_eq!(st.active_limit, cfg.fallback_vel_limit);
    }

    #[test]
    fn backwards_time_only_clamps() {
        let cfg = GovernorConfig::default();
        let mut st = GovernorState::new(&cfg);
        let adv = fixed(1.0);
        let obs = Query::Text("x".into());
        governor_step(&mut st, &cfg, &adv, 10.0, None, [0.0, 0.0]);
        let o = governor_step(&mut st, &cfg, &adv, 2.0, Some(&obs), [5.0, 0.0]);
        assert_eq!(o.inference, Inference::Skipped);
    }

    #[test]
    fn clearance_examples() {
        assert_eq!(min_clearance(&[[0.0, 0.0]], &[[0.0, 1.0]]).unwrap(), 1.0);
        assert_eq!(min_clearance(&[[-1.0, 0.0], [2.0, 3.0]], &[[2.0, 3.0]]).unwrap(), 0.0);
        assert_eq!(min_clearance(&[], &[[0.0, 1.0]]), Err(NavError::EmptyInput("trajectory")));
        assert!(min_clearance(&[[0.0, 0.0]], &[]).is_err());
    }

    #[test]
    fn config_validation() {
        let mut c = GovernorConfig::default();
        assert!(c.validate().is_ok());
        c.inference_period_s = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn scenario_rejects_malformed_input() {
        assert!(Scenario::from_json_str("{").is_err());
        assert!(Scenario::from_json_str(r#"{"name":"x","waypoints":[[0,0]],"obstacles":[[1,1]]}"#).is_err());
        assert!(Scenario::from_json_str(
            r#"{"name":"x","waypoints":[[0,0],[1,0]],"obstacles":[[1,1]],"dt":-1}"#
        )
        .is_err());
        assert!(Scenario::from_json_str(
            r#"{"name":"x","waypoints":[[0,0],[1,0]],"obstacles":[[1,1]],"bogus":1}"#
        )
        .is_err());
    }

    #[test]
    fn corridor_run_is_deterministic() {
        let s = Scenario::corridor();
        let adv = fixed(0.3);
        let cfg = GovernorConfig::default();
        let a = simulate(&s, Some((&cfg, &adv))).unwrap();
        let b = simulate(&s, Some((&cfg, &adv))).unwrap();
        assert_eq!(a, b);
        assert!(a.reached_goal);
        assert!(a.log.iter().all(|r| r.clamped <= r.active_limit));
    }

    #[test]
    fn async_governor_swaps_without_blocking_clamp() {
        let cfg = GovernorConfig::default();
        let mut g = AsyncGovernor::spawn(&cfg, fixed(0.3)).unwrap();
        assert_eq!(g.clamp([2.0, 0.0]), [0.5, 0.0]);
        assert!(g.observe(0.0, Query::Text("x".into())));
        assert!(!g.observe(1.0, Query::Text("x".into())));
        let start = std::time::Instant::now();
        while g.active_limit() != 0.3 && start.elapsed().as_secs() < 5 {
            std::thread::yield_now();
        }
        assert_eq!(g.clamp([2.0, 0.0]), [0.3, 0.0]);
        g.shutdown();
    }

    proptest! {
        #[test]
        fn clamp_never_exceeds_limit(x in -50.0f64..50.0, y in -50.0f64..50.0, limit in 1e-3f64..5.0) {
            let out = clamp_velocity([x, y], limit);
            prop_assert!(speed(out) <= limit);
            if speed([x, y]) > 1e-9 && speed(out) > 1e-9 {
                let cross = x * out[1] - y * out[0];
                prop_assert!(cross.abs() <= 1e-9 * speed([x, y]) * speed(out).max(1.0));
                prop_assert!(x * out[0] + y * out[1] > 0.0);
            }
        }
    }
}
