//! Deterministic fixed-step closed-loop simulation.
//!
//! One flat state vector carries the plant, the optional reference model,
//! the optional disturbance generator, every observer node's internal
//! state and adaptive gains, and every controller's adaptive switching
//! gain. A classical fourth-order fixed-step scheme advances the coupled
//! system; all node and controller right-hand sides are evaluated from the
//! same stage snapshot, so the network is synchronously coupled with no
//! communication delay. Identical inputs produce bit-identical records.

use crate::controller::{self, ControllerNode, ReferenceSignal, UnknownInputModel};
use crate::error::{Error, Result};
use crate::graph::{self, CommGraph};
use crate::matrix::{self, Matrix, RankTolerance, Vector};
use crate::observer::{ObserverNode, ObserverState};

/// Any state component beyond this magnitude aborts the run.
pub const DIVERGENCE_GUARD: f64 = 1e9;

/// An input feed that is a known time signal rather than a controller.
#[derive(Debug, Clone)]
pub struct ExogenousFeed {
    pub channel: Matrix,
    pub signal: Vec<ReferenceSignal>,
}

/// Assembled closed loop: plant, observer network, controller bank,
/// optional reference model and disturbance generator, and the wiring
/// between them.
///
/// Input feeds are indexed controllers-first: feed `k < controllers.len()`
/// is controller k's output, the rest are the exogenous feeds in order.
/// `observer_feed[i]` names the feed whose value observer i receives as
/// its local input.
#[derive(Debug, Clone)]
pub struct ClosedLoop {
    pub a: Matrix,
    pub x0: Vector,
    pub graph: CommGraph,
    pub observers: Vec<ObserverNode>,
    pub controllers: Vec<ControllerNode>,
    pub exogenous: Vec<ExogenousFeed>,
    pub observer_feed: Vec<usize>,
    pub reference_x0: Option<Vector>,
    pub unknown_input: Option<UnknownInputModel>,
    /// Split factor when the stacked controller channels do not already
    /// form the plant's input matrix; identity when absent.
    pub channel_split: Option<Matrix>,
    pub tol: RankTolerance,
}

/// Full simulation state at one instant.
#[derive(Debug, Clone)]
pub struct ClosedLoopState {
    pub t: f64,
    flat: Vector,
}

struct Layout {
    n: usize,
    reference: Option<usize>,
    unknown: Option<(usize, usize)>,
    node_z: Vec<usize>,
    node_gain: Vec<usize>,
    node_switch: Vec<usize>,
    controller_gain: Vec<usize>,
    len: usize,
}

struct Snapshot {
    outputs: Vec<Vector>,
    estimates: Vec<Vector>,
    controls: Vec<Vector>,
}

impl ClosedLoop {
    fn layout(&self) -> Layout {
        let n = self.a.nrows();
        let mut at = n;
        let reference = self.reference_x0.as_ref().map(|_| {
            let here = at;
            at += n;
            here
        });
        let unknown = self.unknown_input.as_ref().map(|m| {
            let here = (at, m.dim());
            at += m.dim();
            here
        });
        let mut node_z = Vec::with_capacity(self.observers.len());
        let mut node_gain = Vec::with_capacity(self.observers.len());
        let mut node_switch = Vec::with_capacity(self.observers.len());
        for _ in &self.observers {
            node_z.push(at);
            at += n;
            node_gain.push(at);
            at += 1;
            node_switch.push(at);
            at += 1;
        }
        let mut controller_gain = Vec::with_capacity(self.controllers.len());
        for _ in &self.controllers {
            controller_gain.push(at);
            at += 1;
        }
        Layout {
            n,
            reference,
            unknown,
            node_z,
            node_gain,
            node_switch,
            controller_gain,
            len: at,
        }
    }

    /// State at t = 0: plant and reference at their initial vectors,
    /// observer internals at zero, adaptive gains at their initials.
    pub fn initial_state(&self) -> ClosedLoopState {
        let layout = self.layout();
        let mut flat = Vector::zeros(layout.len);
        flat.rows_mut(0, layout.n).copy_from(&self.x0);
        if let (Some(at), Some(x0r)) = (layout.reference, self.reference_x0.as_ref()) {
            flat.rows_mut(at, layout.n).copy_from(x0r);
        }
        if let (Some((at, dv)), Some(model)) = (layout.unknown, self.unknown_input.as_ref()) {
            flat.rows_mut(at, dv).copy_from(&model.initial);
        }
        for (i, node) in self.observers.iter().enumerate() {
            let init = node.initial_state();
            flat.rows_mut(layout.node_z[i], layout.n).copy_from(&init.z);
            flat[layout.node_gain[i]] = init.gain;
            flat[layout.node_switch[i]] = init.switch_gain;
        }
        for (k, node) in self.controllers.iter().enumerate() {
            flat[layout.controller_gain[k]] = node.initial_gain();
        }
        ClosedLoopState { t: 0.0, flat }
    }

    pub fn plant_state(&self, state: &ClosedLoopState) -> Vector {
        state.flat.rows(0, self.a.nrows()).into_owned()
    }

    pub fn reference_state(&self, state: &ClosedLoopState) -> Option<Vector> {
        let layout = self.layout();
        layout
            .reference
            .map(|at| state.flat.rows(at, layout.n).into_owned())
    }

    pub fn disturbance_state(&self, state: &ClosedLoopState) -> Option<Vector> {
        let layout = self.layout();
        layout
            .unknown
            .map(|(at, dv)| state.flat.rows(at, dv).into_owned())
    }

    pub fn observer_state(&self, state: &ClosedLoopState, i: usize) -> ObserverState {
        let layout = self.layout();
        ObserverState {
            z: state.flat.rows(layout.node_z[i], layout.n).into_owned(),
            gain: state.flat[layout.node_gain[i]],
            switch_gain: state.flat[layout.node_switch[i]],
        }
    }

    pub fn controller_gain(&self, state: &ClosedLoopState, k: usize) -> f64 {
        let layout = self.layout();
        state.flat[layout.controller_gain[k]]
    }

    fn feed_count(&self) -> usize {
        self.controllers.len() + self.exogenous.len()
    }

    fn feed_channel(&self, k: usize) -> &Matrix {
        if k < self.controllers.len() {
            &self.controllers[k].channel
        } else {
            &self.exogenous[k - self.controllers.len()].channel
        }
    }

    fn feed_value(&self, k: usize, snapshot: &Snapshot, t: f64) -> Vector {
        if k < self.controllers.len() {
            snapshot.controls[k].clone()
        } else {
            controller::signal_vector(&self.exogenous[k - self.controllers.len()].signal, t)
        }
    }

    /// Outputs, estimates, and control values at one stage snapshot.
    fn snapshot(&self, layout: &Layout, flat: &Vector, t: f64) -> Snapshot {
        let x = flat.rows(0, layout.n).into_owned();
        let mut outputs = Vec::with_capacity(self.observers.len());
        let mut estimates = Vec::with_capacity(self.observers.len());
        for (i, node) in self.observers.iter().enumerate() {
            let y = &node.output_map * &x;
            let z = flat.rows(layout.node_z[i], layout.n);
            let estimate = &node.gains.feedthrough_matrix * &y + z;
            outputs.push(y);
            estimates.push(estimate);
        }
        let mut controls = Vec::with_capacity(self.controllers.len());
        for (k, node) in self.controllers.iter().enumerate() {
            let beta = flat[layout.controller_gain[k]];
            controls.push(node.control(&estimates[node.source_observer], beta, t));
        }
        Snapshot {
            outputs,
            estimates,
            controls,
        }
    }

    fn rhs(&self, layout: &Layout, t: f64, flat: &Vector) -> Result<Vector> {
        let snapshot = self.snapshot(layout, flat, t);
        let x = flat.rows(0, layout.n).into_owned();
        let mut deriv = Vector::zeros(layout.len);

        // Plant: dynamics plus every feed plus the disturbance channel.
        let mut dx = &self.a * &x;
        for k in 0..self.feed_count() {
            dx += self.feed_channel(k) * self.feed_value(k, &snapshot, t);
        }
        if let (Some((at, dv)), Some(model)) = (layout.unknown, self.unknown_input.as_ref()) {
            let v = flat.rows(at, dv).into_owned();
            dx += &model.channel * &v;
            deriv.rows_mut(at, dv).copy_from(&(&model.generator * &v));
        }
        deriv.rows_mut(0, layout.n).copy_from(&dx);

        if let Some(at) = layout.reference {
            let x_r = flat.rows(at, layout.n).into_owned();
            let dxr = controller::reference_rhs(&self.a, &self.controllers, &x_r, t);
            deriv.rows_mut(at, layout.n).copy_from(&dxr);
        }

        for (i, node) in self.observers.iter().enumerate() {
            let mut disagreement = Vector::zeros(layout.n);
            for (j, weight) in self.graph.neighbors(i) {
                disagreement += (&snapshot.estimates[i] - &snapshot.estimates[j]) * weight;
            }
            let state = ObserverState {
                z: flat.rows(layout.node_z[i], layout.n).into_owned(),
                gain: flat[layout.node_gain[i]],
                switch_gain: flat[layout.node_switch[i]],
            };
            let u_local = self.feed_value(self.observer_feed[i], &snapshot, t);
            let node_deriv = node.rhs(&state, &snapshot.outputs[i], &u_local, &disagreement)?;
            deriv
                .rows_mut(layout.node_z[i], layout.n)
                .copy_from(&node_deriv.z_dot);
            deriv[layout.node_gain[i]] = node_deriv.gain_dot;
            deriv[layout.node_switch[i]] = node_deriv.switch_gain_dot;
        }

        for (k, node) in self.controllers.iter().enumerate() {
            let beta = flat[layout.controller_gain[k]];
            deriv[layout.controller_gain[k]] =
                node.adaptive_gain_rate(&snapshot.estimates[node.source_observer], beta);
        }
        Ok(deriv)
    }

    /// One classical fourth-order step of the full coupled system.
    pub fn step_rk4(&self, state: &ClosedLoopState, h: f64) -> Result<ClosedLoopState> {
        let layout = self.layout();
        self.step_rk4_with(&layout, state, h)
    }

    fn step_rk4_with(&self, layout: &Layout, state: &ClosedLoopState, h: f64) -> Result<ClosedLoopState> {
        let t = state.t;
        let y = &state.flat;
        let k1 = self.rhs(layout, t, y)?;
        let k2 = self.rhs(layout, t + h / 2.0, &(y + &k1 * (h / 2.0)))?;
        let k3 = self.rhs(layout, t + h / 2.0, &(y + &k2 * (h / 2.0)))?;
        let k4 = self.rhs(layout, t + h, &(y + &k3 * h))?;
        let flat = y + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
        Ok(ClosedLoopState { t: t + h, flat })
    }

    /// Check the structural wiring and every assumption gate that must
    /// hold before integration starts. Returns the named violations.
    pub fn validate(&self) -> Result<()> {
        let n = self.a.nrows();
        if self.a.ncols() != n {
            return Err(Error::DimensionMismatch("plant matrix must be square".into()));
        }
        matrix::require_finite("plant matrix", &self.a)?;
        if self.x0.len() != n {
            return Err(Error::DimensionMismatch(format!(
                "initial state has length {}, expected {n}",
                self.x0.len()
            )));
        }
        if self.graph.node_count() != self.observers.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} graph nodes for {} observers",
                self.graph.node_count(),
                self.observers.len()
            )));
        }
        if self.observer_feed.len() != self.observers.len() {
            return Err(Error::DimensionMismatch(
                "one input feed assignment per observer is required".into(),
            ));
        }
        for node in &self.controllers {
            node.validate(n)?;
            if node.source_observer >= self.observers.len() {
                return Err(Error::InvalidParameter(format!(
                    "controller {} reads estimate from missing observer {}",
                    node.index, node.source_observer
                )));
            }
        }
        for (i, node) in self.observers.iter().enumerate() {
            node.adaptive.validate()?;
            if node.output_map.ncols() != n {
                return Err(Error::DimensionMismatch(format!(
                    "observer {i}: output map has {} columns, expected {n}",
                    node.output_map.ncols()
                )));
            }
            let feed = self.observer_feed[i];
            if feed >= self.feed_count() {
                return Err(Error::InvalidParameter(format!(
                    "observer {i} wired to missing input feed {feed}"
                )));
            }
            let channel = self.feed_channel(feed);
            if channel.shape() != node.local_input.shape()
                || (channel - &node.local_input).norm() > 1e-9 * channel.norm().max(1.0)
            {
                return Err(Error::PreconditionViolated(format!(
                    "observer {i}: local input channel does not match its assigned feed"
                )));
            }
        }
        if self.reference_x0.as_ref().is_some_and(|x| x.len() != n) {
            return Err(Error::DimensionMismatch(
                "reference initial state has the wrong length".into(),
            ));
        }
        if let Some(model) = &self.unknown_input {
            if model.channel.nrows() != n || model.channel.ncols() != model.dim() {
                return Err(Error::DimensionMismatch(
                    "disturbance channel dimensions are inconsistent".into(),
                ));
            }
            if model.generator.nrows() != model.dim() || model.generator.ncols() != model.dim() {
                return Err(Error::DimensionMismatch(
                    "disturbance generator dimensions are inconsistent".into(),
                ));
            }
        }
        Ok(())
    }

    /// Assumption gates checked before a run: connected graph, collective
    /// strong detectability, stabilizing feedback (or a negative sliding
    /// certificate), switching-gain bound, and a matched disturbance
    /// channel.
    pub fn check_assumptions(&self) -> Result<()> {
        self.validate()?;
        if !graph::is_connected(&self.graph) {
            return Err(Error::PreconditionViolated(
                "observer communication graph is not connected".into(),
            ));
        }
        let bases: Vec<Matrix> = self
            .observers
            .iter()
            .map(|node| node.quad.detectable_basis.clone())
            .collect();
        let collective = graph::collective_strong_detectability(&self.graph, &bases, self.tol)?;
        if !collective.holds {
            return Err(Error::PreconditionViolated(format!(
                "collective strong detectability fails: stacked rank {} of {}",
                collective.stacked_rank,
                self.a.nrows()
            )));
        }

        if !self.controllers.is_empty() {
            let closed = controller::closed_loop_matrix(&self.a, &self.controllers);
            let sliding: Vec<&ControllerNode> = self
                .controllers
                .iter()
                .filter(|c| c.lyapunov.is_some())
                .collect();
            if sliding.is_empty() {
                let abscissa = matrix::spectral_abscissa(&closed);
                if abscissa >= 0.0 {
                    return Err(Error::PreconditionViolated(format!(
                        "feedback gains do not stabilize the plant (abscissa {abscissa:.3e})"
                    )));
                }
            } else {
                let p = sliding[0].lyapunov.as_ref().unwrap();
                for node in &sliding[1..] {
                    let q = node.lyapunov.as_ref().unwrap();
                    if (p - q).norm() > 1e-9 * p.norm().max(1.0) {
                        return Err(Error::PreconditionViolated(
                            "sliding controllers must share one Lyapunov matrix".into(),
                        ));
                    }
                }
                if matrix::min_symmetric_eigenvalue(p) <= 0.0 {
                    return Err(Error::PreconditionViolated(
                        "sliding Lyapunov matrix is not positive definite".into(),
                    ));
                }
                let cert = controller::stability_certificate(&self.a, &self.controllers, p);
                if cert >= 0.0 {
                    return Err(Error::PreconditionViolated(format!(
                        "sliding stability certificate is not negative definite ({cert:.3e})"
                    )));
                }
            }
        }

        if let Some(model) = &self.unknown_input {
            let stacked: Vec<&Matrix> = self.controllers.iter().map(|c| &c.channel).collect();
            if !stacked.is_empty() {
                let channels = matrix::hstack(&stacked);
                let full = match &self.channel_split {
                    Some(split) => &channels * split,
                    None => channels,
                };
                let mismatch = (&full * &model.matching - &model.channel).norm();
                if mismatch > 1e-10 * model.channel.norm().max(1.0) {
                    return Err(Error::PreconditionViolated(format!(
                        "disturbance channel is not matched by the control channels (residual {mismatch:.3e})"
                    )));
                }
            }
            let bound =
                controller::ideal_switch_gain_bound(model, self.channel_split.as_ref(), 100.0, 1e-2);
            for node in &self.controllers {
                if let controller::ControlMode::SlidingIdeal { switch_gain } = node.mode {
                    if switch_gain + 1e-12 < bound {
                        return Err(Error::PreconditionViolated(format!(
                            "controller {}: switching gain {switch_gain:.4} below its bound {bound:.4}",
                            node.index
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Integrate over `[0, horizon]` with step `h`, recording every
    /// `stride`-th step. The record is deterministic: identical loops and
    /// settings produce bit-identical traces.
    pub fn run(&self, horizon: f64, h: f64, stride: usize) -> Result<TrajectoryRecord> {
        self.check_assumptions()?;
        if !(h > 0.0) || !(horizon > 0.0) {
            return Err(Error::InvalidParameter(
                "horizon and step size must be positive".into(),
            ));
        }
        if stride == 0 {
            return Err(Error::InvalidParameter("stride must be at least 1".into()));
        }
        let steps = (horizon / h).round() as usize;
        if steps == 0 {
            return Err(Error::InvalidParameter(
                "horizon shorter than one step".into(),
            ));
        }
        if steps % stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "stride {stride} does not divide the step count {steps}"
            )));
        }

        let layout = self.layout();
        let n_obs = self.observers.len();
        let n_ctl = self.controllers.len();
        let mut record = TrajectoryRecord {
            step: h,
            stride,
            times: Vec::new(),
            state_norm: Vec::new(),
            tracking_error: self.reference_x0.as_ref().map(|_| Vec::new()),
            node_error: vec![Vec::new(); n_obs],
            node_consensus_norm: vec![Vec::new(); n_obs],
            node_functional_norm: vec![Vec::new(); n_obs],
            node_gain: vec![Vec::new(); n_obs],
            node_switch_gain: vec![Vec::new(); n_obs],
            controller_gain: vec![Vec::new(); n_ctl],
            control: vec![Vec::new(); n_ctl],
            chattering: vec![0.0; n_ctl],
        };

        let mut state = self.initial_state();
        let mut previous_controls: Option<Vec<Vector>> = None;
        for k in 0..=steps {
            let snapshot = self.snapshot(&layout, &state.flat, state.t);
            if let Some(prev) = &previous_controls {
                for (c, (now, before)) in snapshot.controls.iter().zip(prev).enumerate() {
                    record.chattering[c] += (now - before).norm();
                }
            }
            previous_controls = Some(snapshot.controls.clone());

            if k % stride == 0 {
                self.record_sample(&layout, &state, &snapshot, &mut record);
            }
            if k < steps {
                state = self.step_rk4_with(&layout, &state, h)?;
                let worst = state.flat.amax();
                if !worst.is_finite() || worst > DIVERGENCE_GUARD {
                    return Err(Error::Diverged {
                        t: state.t,
                        what: format!("state component reached {worst:.3e}"),
                    });
                }
            }
        }
        let span = steps as f64 * h;
        for c in record.chattering.iter_mut() {
            *c /= span;
        }
        Ok(record)
    }

    fn record_sample(
        &self,
        layout: &Layout,
        state: &ClosedLoopState,
        snapshot: &Snapshot,
        record: &mut TrajectoryRecord,
    ) {
        let x = state.flat.rows(0, layout.n).into_owned();
        record.times.push(state.t);
        record.state_norm.push(x.norm());
        if let (Some(trace), Some(at)) = (record.tracking_error.as_mut(), layout.reference) {
            let x_r = state.flat.rows(at, layout.n);
            trace.push((&x - x_r).norm());
        }
        for (i, node) in self.observers.iter().enumerate() {
            let estimate = &snapshot.estimates[i];
            record.node_error[i].push((estimate - &x).norm());
            let mut disagreement = Vector::zeros(layout.n);
            for (j, weight) in self.graph.neighbors(i) {
                disagreement += (estimate - &snapshot.estimates[j]) * weight;
            }
            record.node_consensus_norm[i].push(node.projected_disagreement(&disagreement).norm());
            record.node_functional_norm[i].push(node.functional_error(estimate, &x).norm());
            record.node_gain[i].push(state.flat[layout.node_gain[i]]);
            record.node_switch_gain[i].push(state.flat[layout.node_switch[i]]);
        }
        for k in 0..self.controllers.len() {
            record.controller_gain[k].push(state.flat[layout.controller_gain[k]]);
            record.control[k].push(snapshot.controls[k].iter().cloned().collect());
        }
    }
}

/// Sampled trajectories of one run plus the per-controller total
/// variation of the control signal accumulated at full step resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub step: f64,
    pub stride: usize,
    pub times: Vec<f64>,
    pub state_norm: Vec<f64>,
    pub tracking_error: Option<Vec<f64>>,
    pub node_error: Vec<Vec<f64>>,
    pub node_consensus_norm: Vec<Vec<f64>>,
    pub node_functional_norm: Vec<Vec<f64>>,
    pub node_gain: Vec<Vec<f64>>,
    pub node_switch_gain: Vec<Vec<f64>>,
    pub controller_gain: Vec<Vec<f64>>,
    pub control: Vec<Vec<Vec<f64>>>,
    /// Total variation of each control signal per unit time.
    pub chattering: Vec<f64>,
}

impl TrajectoryRecord {
    pub fn samples(&self) -> usize {
        self.times.len()
    }

    /// Largest value of a trace from the first sample with `t >= from`.
    pub fn max_after(&self, trace: &[f64], from: f64) -> f64 {
        self.times
            .iter()
            .zip(trace)
            .filter(|(t, _)| **t >= from)
            .map(|(_, v)| *v)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Summary metrics extracted from one record.
#[derive(Debug, Clone)]
pub struct Metrics {
    pub final_state_norm: f64,
    pub max_state_norm: f64,
    pub final_tracking_error: Option<f64>,
    pub max_tracking_error: Option<f64>,
    pub final_node_error: Vec<f64>,
    pub max_node_error: Vec<f64>,
    pub node_gain_sup: Vec<f64>,
    pub node_switch_gain_sup: Vec<f64>,
    pub controller_gain_sup: Vec<f64>,
    pub chattering: Vec<f64>,
}

fn sup(trace: &[f64]) -> f64 {
    trace.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
}

/// Final/max norms, gain suprema, and chattering indices of a record.
pub fn metrics(record: &TrajectoryRecord) -> Metrics {
    Metrics {
        final_state_norm: record.state_norm.last().copied().unwrap_or(0.0),
        max_state_norm: sup(&record.state_norm).max(0.0),
        final_tracking_error: record
            .tracking_error
            .as_ref()
            .and_then(|t| t.last().copied()),
        max_tracking_error: record.tracking_error.as_ref().map(|t| sup(t).max(0.0)),
        final_node_error: record
            .node_error
            .iter()
            .map(|t| t.last().copied().unwrap_or(0.0))
            .collect(),
        max_node_error: record.node_error.iter().map(|t| sup(t).max(0.0)).collect(),
        node_gain_sup: record.node_gain.iter().map(|t| sup(t)).collect(),
        node_switch_gain_sup: record.node_switch_gain.iter().map(|t| sup(t)).collect(),
        controller_gain_sup: record.controller_gain.iter().map(|t| sup(t)).collect(),
        chattering: record.chattering.clone(),
    }
}

/// First sample time after which the trace stays at or below `threshold`;
/// `None` if it never settles.
pub fn settling_time(times: &[f64], trace: &[f64], threshold: f64) -> Option<f64> {
    let mut settled: Option<f64> = None;
    for (t, v) in times.iter().zip(trace) {
        if *v <= threshold {
            if settled.is_none() {
                settled = Some(*t);
            }
        } else {
            settled = None;
        }
    }
    settled
}
