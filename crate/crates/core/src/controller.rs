//! Distributed controller nodes.
//!
//! Every controller drives its own input channel from a state estimate it
//! receives over a controller-observer link. Four laws are provided:
//! plain linear feedback, tracking (feedback plus a reference signal),
//! ideal sliding mode with a fixed switching gain, and an adaptive sliding
//! mode whose unit-vector term is smoothed inside a boundary layer and
//! whose gain follows a leaky adaptive law. Sliding modes share a
//! quadratic stability certificate built around one Lyapunov matrix.

use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, Vector};
use crate::observer::sign_direction;

/// Scalar reference signal component.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ReferenceSignal {
    Zero,
    Constant(f64),
    /// `amplitude * sin(frequency * t + phase)`
    Sine {
        amplitude: f64,
        frequency: f64,
        phase: f64,
    },
}

impl ReferenceSignal {
    pub fn value(&self, t: f64) -> f64 {
        match *self {
            ReferenceSignal::Zero => 0.0,
            ReferenceSignal::Constant(c) => c,
            ReferenceSignal::Sine {
                amplitude,
                frequency,
                phase,
            } => amplitude * (frequency * t + phase).sin(),
        }
    }
}

/// Evaluate a per-component signal vector.
pub fn signal_vector(signals: &[ReferenceSignal], t: f64) -> Vector {
    Vector::from_iterator(signals.len(), signals.iter().map(|s| s.value(t)))
}

/// Control law of a node.
#[derive(Debug, Clone, PartialEq)]
pub enum ControlMode {
    Linear,
    Tracking,
    /// Fixed switching gain; requires the Lyapunov matrix.
    SlidingIdeal { switch_gain: f64 },
    /// Boundary-layer smoothed switching with a leaky adaptive gain.
    SlidingAdaptive {
        boundary_width: f64,
        gain_init: f64,
        leak: f64,
        step: f64,
    },
}

/// One controller node.
#[derive(Debug, Clone)]
pub struct ControllerNode {
    pub index: usize,
    /// Input channel of this node into the plant (n x m_node).
    pub channel: Matrix,
    /// Feedback gain (m_node x n).
    pub gain: Matrix,
    pub mode: ControlMode,
    /// Shared quadratic-certificate matrix; required by sliding modes.
    pub lyapunov: Option<Matrix>,
    /// Per-component reference, used by the tracking law.
    pub reference: Vec<ReferenceSignal>,
    /// Which observer node supplies the estimate.
    pub source_observer: usize,
}

impl ControllerNode {
    pub fn input_dim(&self) -> usize {
        self.channel.ncols()
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if self.channel.nrows() != n {
            return Err(Error::DimensionMismatch(format!(
                "controller {}: channel has {} rows, expected {n}",
                self.index,
                self.channel.nrows()
            )));
        }
        if self.gain.nrows() != self.input_dim() || self.gain.ncols() != n {
            return Err(Error::DimensionMismatch(format!(
                "controller {}: gain must be {} x {n}",
                self.index,
                self.input_dim()
            )));
        }
        match &self.mode {
            ControlMode::Linear => {}
            ControlMode::Tracking => {
                if self.reference.len() != self.input_dim() {
                    return Err(Error::DimensionMismatch(format!(
                        "controller {}: {} reference components for {} inputs",
                        self.index,
                        self.reference.len(),
                        self.input_dim()
                    )));
                }
            }
            ControlMode::SlidingIdeal { switch_gain } => {
                if !(*switch_gain >= 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "controller {}: switching gain must be nonnegative",
                        self.index
                    )));
                }
            }
            ControlMode::SlidingAdaptive {
                boundary_width,
                gain_init,
                leak,
                step,
            } => {
                if !(*boundary_width > 0.0 && *gain_init > 0.0 && *leak > 0.0 && *step > 0.0) {
                    return Err(Error::InvalidParameter(format!(
                        "controller {}: boundary width, initial gain, leak, and step must all be positive",
                        self.index
                    )));
                }
            }
        }
        if matches!(
            self.mode,
            ControlMode::SlidingIdeal { .. } | ControlMode::SlidingAdaptive { .. }
        ) {
            match &self.lyapunov {
                None => {
                    return Err(Error::InvalidParameter(format!(
                        "controller {}: sliding law needs the Lyapunov matrix",
                        self.index
                    )))
                }
                Some(p) => {
                    if p.nrows() != n || p.ncols() != n {
                        return Err(Error::DimensionMismatch(format!(
                            "controller {}: Lyapunov matrix must be {n} x {n}",
                            self.index
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Initial adaptive switching gain (zero for non-adaptive modes).
    pub fn initial_gain(&self) -> f64 {
        match self.mode {
            ControlMode::SlidingAdaptive { gain_init, .. } => gain_init,
            _ => 0.0,
        }
    }

    pub fn reference_value(&self, t: f64) -> Vector {
        if self.reference.is_empty() {
            Vector::zeros(self.input_dim())
        } else {
            signal_vector(&self.reference, t)
        }
    }

    /// Switching-surface coordinate: channelᵀ P x̂.
    fn surface(&self, estimate: &Vector) -> Vector {
        let p = self.lyapunov.as_ref().expect("sliding law needs P");
        self.channel.transpose() * p * estimate
    }

    /// Control value for the current estimate, time, and (for the adaptive
    /// law) switching gain.
    pub fn control(&self, estimate: &Vector, adaptive_gain: f64, t: f64) -> Vector {
        let feedback = &self.gain * estimate;
        match &self.mode {
            ControlMode::Linear => feedback,
            ControlMode::Tracking => feedback + self.reference_value(t),
            ControlMode::SlidingIdeal { switch_gain } => {
                let s = self.surface(estimate);
                feedback - sign_direction(&s) * *switch_gain
            }
            ControlMode::SlidingAdaptive { boundary_width, .. } => {
                let s = self.surface(estimate);
                feedback - boundary_layer_direction(&s, adaptive_gain, *boundary_width) * adaptive_gain
            }
        }
    }

    /// Adaptive-gain law of the boundary-layer sliding mode; zero for the
    /// other modes.
    pub fn adaptive_gain_rate(&self, estimate: &Vector, adaptive_gain: f64) -> f64 {
        match &self.mode {
            ControlMode::SlidingAdaptive { leak, step, .. } => {
                -leak * adaptive_gain + step * self.surface(estimate).norm()
            }
            _ => 0.0,
        }
    }
}

/// Smoothed switching direction: the unit vector outside the boundary
/// layer, a linear ramp inside it. Continuous across the switching
/// surface: at `gain * |w| = width` both branches equal `w / |w|`.
pub fn boundary_layer_direction(w: &Vector, gain: f64, width: f64) -> Vector {
    let norm = w.norm();
    if gain * norm > width {
        w / norm
    } else {
        w * (gain / width)
    }
}

/// Reference-model dynamics: the plant driven by its own feedback gains
/// and the reference signals instead of estimates.
pub fn reference_rhs(a: &Matrix, controllers: &[ControllerNode], x_r: &Vector, t: f64) -> Vector {
    let mut dx = a * x_r;
    for node in controllers {
        dx += &node.channel * (&node.gain * x_r + node.reference_value(t));
    }
    dx
}

/// Closed-loop feedback matrix `a + sum(channel * gain)`.
pub fn closed_loop_matrix(a: &Matrix, controllers: &[ControllerNode]) -> Matrix {
    let mut cl = a.clone();
    for node in controllers {
        cl += &node.channel * &node.gain;
    }
    cl
}

/// Largest eigenvalue of `(A+BK)ᵀP + P(A+BK)`; the quadratic certificate
/// demands this be negative.
pub fn stability_certificate(a: &Matrix, controllers: &[ControllerNode], p: &Matrix) -> f64 {
    let cl = closed_loop_matrix(a, controllers);
    let m = cl.transpose() * p + p * cl;
    -matrix::min_symmetric_eigenvalue(&(-m))
}

/// Exogenous bounded disturbance entering through a known channel, with a
/// witness that the channel is matched by the control channels.
#[derive(Debug, Clone)]
pub struct UnknownInputModel {
    /// Generator dynamics (marginally stable rotation in the scenarios).
    pub generator: Matrix,
    pub initial: Vector,
    /// Channel through which the disturbance enters the plant.
    pub channel: Matrix,
    /// Matching witness: stacked-control-channel matrix times this equals
    /// `channel`.
    pub matching: Matrix,
}

impl UnknownInputModel {
    pub fn dim(&self) -> usize {
        self.initial.len()
    }

    pub fn is_skew_generator(&self) -> bool {
        (&self.generator + self.generator.transpose()).norm() < 1e-12
    }

    /// Worst-case disturbance norm. A skew-symmetric generator preserves
    /// the norm, so the bound is the initial norm; otherwise the bound is
    /// taken as the supremum over a sampled horizon.
    pub fn norm_bound(&self, horizon: f64, step: f64) -> f64 {
        if self.is_skew_generator() {
            return self.initial.norm();
        }
        let mut v = self.initial.clone();
        let mut bound = v.norm();
        let steps = (horizon / step).ceil() as usize;
        for _ in 0..steps {
            v = rk4_step(&self.generator, &v, step);
            bound = bound.max(v.norm());
        }
        bound
    }

    /// Disturbance value at time t, by integrating the generator from its
    /// initial state with the same fixed-step scheme the simulator uses.
    pub fn value_at(&self, t: f64, step: f64) -> Vector {
        let mut v = self.initial.clone();
        if t <= 0.0 {
            return v;
        }
        let steps = (t / step).round().max(1.0) as usize;
        let h = t / steps as f64;
        for _ in 0..steps {
            v = rk4_step(&self.generator, &v, h);
        }
        v
    }
}

fn rk4_step(gen: &Matrix, v: &Vector, h: f64) -> Vector {
    let k1 = gen * v;
    let k2 = gen * (v + &k1 * (h / 2.0));
    let k3 = gen * (v + &k2 * (h / 2.0));
    let k4 = gen * (v + &k3 * h);
    v + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0)
}

/// Lower bound on the ideal switching gain: disturbance bound times the
/// norm of the matched-channel witness (under the split factor when the
/// stacked channels do not form the full input matrix directly).
pub fn ideal_switch_gain_bound(
    model: &UnknownInputModel,
    split: Option<&Matrix>,
    horizon: f64,
    step: f64,
) -> f64 {
    let witness = match split {
        Some(b_tilde) => b_tilde * &model.matching,
        None => model.matching.clone(),
    };
    let spectral = witness
        .singular_values()
        .iter()
        .cloned()
        .fold(0.0_f64, f64::max);
    model.norm_bound(horizon, step) * spectral
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn linear_node(k: Matrix) -> ControllerNode {
        ControllerNode {
            index: 0,
            channel: Matrix::identity(k.ncols(), k.nrows()),
            gain: k,
            mode: ControlMode::Linear,
            lyapunov: None,
            reference: vec![],
            source_observer: 0,
        }
    }

    #[test]
    fn linear_feedback_values() {
        let node = linear_node(Matrix::identity(2, 2));
        let zero = node.control(&Vector::zeros(2), 0.0, 0.0);
        assert!(zero.norm() < 1e-15);
        let v = Vector::from_row_slice(&[1.0, -2.0]);
        assert!((node.control(&v, 0.0, 0.0) - &v).norm() < 1e-15);
    }

    #[test]
    fn tracking_reduces_to_linear_with_zero_reference() {
        let mut node = linear_node(Matrix::from_row_slice(1, 2, &[-1.0, -2.0]));
        node.channel = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        node.mode = ControlMode::Tracking;
        node.reference = vec![ReferenceSignal::Zero];
        let x = Vector::from_row_slice(&[0.5, 0.25]);
        let linear = &node.gain * &x;
        assert!((node.control(&x, 0.0, 3.3) - linear).norm() < 1e-15);

        node.reference = vec![ReferenceSignal::Sine {
            amplitude: 1.0,
            frequency: 1.0,
            phase: 2.0,
        }];
        let at_zero = node.reference_value(0.0);
        assert_relative_eq!(at_zero[0], 2.0_f64.sin(), epsilon = 1e-15);
    }

    #[test]
    fn reference_model_fixed_point() {
        // Scalar system a = 0, b = 1, k = -1, r = 1: equilibrium at 1.
        let node = ControllerNode {
            index: 0,
            channel: Matrix::from_row_slice(1, 1, &[1.0]),
            gain: Matrix::from_row_slice(1, 1, &[-1.0]),
            mode: ControlMode::Tracking,
            lyapunov: None,
            reference: vec![ReferenceSignal::Constant(1.0)],
            source_observer: 0,
        };
        let a = Matrix::zeros(1, 1);
        let at_eq = reference_rhs(&a, &[node.clone()], &Vector::from_element(1, 1.0), 0.0);
        assert!(at_eq.norm() < 1e-15);
        let at_zero = reference_rhs(&a, &[node], &Vector::zeros(1), 0.0);
        assert_relative_eq!(at_zero[0], 1.0, epsilon = 1e-15);
    }

    #[test]
    fn ideal_sliding_switching_term() {
        let p = Matrix::identity(2, 2);
        let node = ControllerNode {
            index: 0,
            channel: Matrix::identity(2, 2),
            gain: Matrix::zeros(2, 2),
            mode: ControlMode::SlidingIdeal { switch_gain: 2.0 },
            lyapunov: Some(p),
            reference: vec![],
            source_observer: 0,
        };
        assert!(node.control(&Vector::zeros(2), 0.0, 0.0).norm() < 1e-15);
        let x = Vector::from_row_slice(&[3.0, 4.0]);
        let u = node.control(&x, 0.0, 0.0);
        assert_relative_eq!(u[0], -2.0 * 0.6, epsilon = 1e-12);
        assert_relative_eq!(u[1], -2.0 * 0.8, epsilon = 1e-12);
        // Switching magnitude never exceeds the gain.
        for scale in [1e-3, 0.1, 10.0] {
            let u = node.control(&(&x * scale), 0.0, 0.0);
            assert!(u.norm() <= 2.0 + 1e-12);
        }
    }

    #[test]
    fn boundary_layer_branches_and_continuity() {
        assert!(boundary_layer_direction(&Vector::zeros(2), 1.0, 0.5).norm() < 1e-15);
        // Inside the layer: linear ramp.
        let w = Vector::from_row_slice(&[0.1, 0.0]);
        let h = boundary_layer_direction(&w, 2.0, 1.0);
        assert_relative_eq!(h[0], 0.2, epsilon = 1e-15);
        // At the boundary both branches coincide.
        let w = Vector::from_row_slice(&[0.5, 0.0]);
        let inside = boundary_layer_direction(&w, 2.0, 1.0 + 1e-12);
        let outside = boundary_layer_direction(&w, 2.0, 1.0 - 1e-12);
        assert!((inside - outside).norm() < 1e-9);
        // Never exceeds unit norm.
        for mag in [1e-6, 1e-2, 1.0, 100.0] {
            let w = Vector::from_row_slice(&[mag, mag]);
            assert!(boundary_layer_direction(&w, 3.0, 0.2).norm() <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn adaptive_gain_rate_fixed_point() {
        let node = ControllerNode {
            index: 0,
            channel: Matrix::identity(2, 2),
            gain: Matrix::zeros(2, 2),
            mode: ControlMode::SlidingAdaptive {
                boundary_width: 0.2,
                gain_init: 0.1,
                leak: 0.5,
                step: 2.0,
            },
            lyapunov: Some(Matrix::identity(2, 2)),
            reference: vec![],
            source_observer: 0,
        };
        // Zero estimate: pure leakage decay.
        assert_relative_eq!(node.adaptive_gain_rate(&Vector::zeros(2), 0.3), -0.15, epsilon = 1e-15);
        // Fixed surface norm s: equilibrium gain = step*s/leak.
        let x = Vector::from_row_slice(&[1.0, 0.0]);
        let eq = 2.0 * 1.0 / 0.5;
        assert!(node.adaptive_gain_rate(&x, eq).abs() < 1e-12);
    }

    #[test]
    fn rotation_generator_conserves_norm() {
        let model = UnknownInputModel {
            generator: Matrix::from_row_slice(2, 2, &[0.0, 0.5, -0.5, 0.0]),
            initial: Vector::from_row_slice(&[-2.0, 2.0]),
            channel: Matrix::zeros(2, 2),
            matching: Matrix::identity(2, 2),
        };
        assert!(model.is_skew_generator());
        assert_relative_eq!(model.norm_bound(10.0, 1e-2), 8.0_f64.sqrt(), epsilon = 1e-12);
        assert_relative_eq!(model.value_at(0.0, 1e-3).norm(), 8.0_f64.sqrt(), epsilon = 1e-12);

        // Quarter period of the rotation: v rotates by pi/2.
        let v = model.value_at(std::f64::consts::PI, 1e-3);
        let angle = std::f64::consts::FRAC_PI_2;
        let expected = Vector::from_row_slice(&[
            -2.0 * angle.cos() + 2.0 * angle.sin(),
            2.0 * angle.cos() + 2.0 * angle.sin(),
        ]);
        assert!((v - expected).norm() < 1e-8);
    }

    #[test]
    fn certificate_sign_matches_stability() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let stabilizing = ControllerNode {
            index: 0,
            channel: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            gain: Matrix::from_row_slice(1, 2, &[-1.0, -2.0]),
            mode: ControlMode::Linear,
            lyapunov: None,
            reference: vec![],
            source_observer: 0,
        };
        let cl = closed_loop_matrix(&a, &[stabilizing.clone()]);
        let p = matrix::solve_lyapunov(&cl, &Matrix::identity(2, 2)).unwrap();
        assert!(stability_certificate(&a, &[stabilizing], &p) < 0.0);
    }
}
