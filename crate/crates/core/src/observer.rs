//! Adaptive distributed observer nodes.
//!
//! Each node estimates the full plant state from its local output, its
//! local input, and the estimates received from neighboring nodes. The
//! internal state z evolves through gains derived from a
//! strong-detectability decomposition; the disagreement with neighbors is
//! projected onto the non-reconstructible directions and fed back through
//! a proportional term and a unit-vector switching term, each with its own
//! adaptive gain. On the reconstructible directions the estimation error
//! obeys the decomposition's own stable (or zero) dynamics regardless of
//! what the rest of the network does.

use nalgebra::Complex;

use crate::decomposition::{self, DecompositionQuadruplet, FunctionalMode};
use crate::error::{Error, Result};
use crate::matrix::{self, Matrix, RankTolerance, Vector};

/// Below this norm the switching function returns zero instead of a unit
/// vector, so the discontinuity never divides by a denormal inside the
/// fixed-step integrator.
pub const SWITCH_DEAD_ZONE: f64 = 1e-12;

/// Unit vector along `w`, or zero inside the dead zone.
pub fn sign_direction(w: &Vector) -> Vector {
    let norm = w.norm();
    if norm < SWITCH_DEAD_ZONE {
        Vector::zeros(w.len())
    } else {
        w / norm
    }
}

/// Adaptive-law settings of one observer node.
///
/// The proportional gain grows with the squared projected disagreement,
/// the switching gain with its norm; either law may carry a leak term.
/// `switch_step = 0` with `switch_gain_init = 0` disables the switching
/// term entirely (the ablation configuration).
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSettings {
    pub gain_init: f64,
    pub switch_gain_init: f64,
    pub gain_step: f64,
    pub switch_step: f64,
    pub gain_leak: f64,
    pub switch_leak: f64,
}

impl AdaptiveSettings {
    pub fn validate(&self) -> Result<()> {
        if !(self.gain_init > 0.0) {
            return Err(Error::InvalidParameter(
                "observer proportional gain must start positive".into(),
            ));
        }
        if !(self.gain_step > 0.0) {
            return Err(Error::InvalidParameter(
                "observer proportional step size must be positive".into(),
            ));
        }
        if self.switch_step > 0.0 && !(self.switch_gain_init > 0.0) {
            return Err(Error::InvalidParameter(
                "observer switching gain must start positive when its step size is positive".into(),
            ));
        }
        if self.switch_step < 0.0
            || self.switch_gain_init < 0.0
            || self.gain_leak < 0.0
            || self.switch_leak < 0.0
        {
            return Err(Error::InvalidParameter(
                "observer adaptive settings must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Gain matrices of the node dynamics, derived from a decomposition.
#[derive(Debug, Clone)]
pub struct ObserverGains {
    /// Drives the internal state.
    pub state_matrix: Matrix,
    /// Multiplies the local output.
    pub output_matrix: Matrix,
    /// Direct output feedthrough in the estimate.
    pub feedthrough_matrix: Matrix,
    /// Multiplies the local input.
    pub input_matrix: Matrix,
}

impl ObserverGains {
    /// Derive the node gains from a decomposition quadruplet.
    pub fn from_quadruplet(
        quad: &DecompositionQuadruplet,
        a: &Matrix,
        b_local: &Matrix,
        c: &Matrix,
    ) -> Result<Self> {
        let n = a.nrows();
        if quad.detectable_basis.nrows() != n
            || c.ncols() != n
            || (b_local.ncols() > 0 && b_local.nrows() != n)
        {
            return Err(Error::DimensionMismatch(
                "observer gain derivation: inconsistent dimensions".into(),
            ));
        }
        let t = &quad.detectable_basis;
        let u = &quad.complement_basis;
        let free = u * u.transpose() * a;
        let feedthrough = t * &quad.output_feedthrough;
        let state_matrix = t * &quad.functional_dynamics * t.transpose() + &free;
        let output_matrix = t * &quad.output_gain + &free * &feedthrough;
        let input_matrix = (Matrix::identity(n, n) - &feedthrough * c) * b_local;
        Ok(Self {
            state_matrix,
            output_matrix,
            feedthrough_matrix: feedthrough,
            input_matrix,
        })
    }
}

/// Dynamic state of one node: internal state and the two adaptive gains.
#[derive(Debug, Clone)]
pub struct ObserverState {
    pub z: Vector,
    pub gain: f64,
    pub switch_gain: f64,
}

/// Time derivative of an [`ObserverState`].
#[derive(Debug, Clone)]
pub struct ObserverDerivative {
    pub z_dot: Vector,
    pub gain_dot: f64,
    pub switch_gain_dot: f64,
}

/// One observer node: decomposition, derived gains, local maps, adaptive
/// settings. Dynamic state lives in [`ObserverState`] and is advanced by
/// the simulation engine; all methods here are pure.
#[derive(Debug, Clone)]
pub struct ObserverNode {
    pub index: usize,
    pub quad: DecompositionQuadruplet,
    pub gains: ObserverGains,
    pub output_map: Matrix,
    pub local_input: Matrix,
    pub unavailable_channel: Matrix,
    pub adaptive: AdaptiveSettings,
}

impl ObserverNode {
    pub fn state_dim(&self) -> usize {
        self.quad.detectable_basis.nrows()
    }

    /// Internal state starts at zero; adaptive gains at their initials.
    pub fn initial_state(&self) -> ObserverState {
        ObserverState {
            z: Vector::zeros(self.state_dim()),
            gain: self.adaptive.gain_init,
            switch_gain: self.adaptive.switch_gain_init,
        }
    }

    /// Estimate is the internal state plus the output feedthrough.
    pub fn estimate(&self, state: &ObserverState, y: &Vector) -> Vector {
        &state.z + &self.gains.feedthrough_matrix * y
    }

    /// Disagreement projected onto the non-reconstructible directions.
    pub fn projected_disagreement(&self, disagreement: &Vector) -> Vector {
        self.quad.complement_basis.transpose() * disagreement
    }

    /// Consensus correction: proportional plus unit-vector switching term,
    /// both acting inside the non-reconstructible subspace.
    pub fn consensus_injection(&self, state: &ObserverState, disagreement: &Vector) -> Vector {
        let projected = self.projected_disagreement(disagreement);
        let u = &self.quad.complement_basis;
        u * &projected * state.gain + u * sign_direction(&projected) * state.switch_gain
    }

    /// Node dynamics: internal state driven by output, local input, and
    /// the consensus correction; adaptive gains driven by the projected
    /// disagreement with optional leakage.
    pub fn rhs(
        &self,
        state: &ObserverState,
        y: &Vector,
        u_local: &Vector,
        disagreement: &Vector,
    ) -> Result<ObserverDerivative> {
        let n = self.state_dim();
        if y.len() != self.output_map.nrows()
            || u_local.len() != self.local_input.ncols()
            || disagreement.len() != n
            || state.z.len() != n
        {
            return Err(Error::DimensionMismatch(format!(
                "observer {} rhs: got y {}, u {}, d {}",
                self.index,
                y.len(),
                u_local.len(),
                disagreement.len()
            )));
        }
        let projected = self.projected_disagreement(disagreement);
        let z_dot = &self.gains.state_matrix * &state.z
            + &self.gains.output_matrix * y
            + &self.gains.input_matrix * u_local
            - self.consensus_injection(state, disagreement);
        let s = &self.adaptive;
        let gain_dot = -s.gain_leak * state.gain + s.gain_step * projected.norm_squared();
        let switch_gain_dot = -s.switch_leak * state.switch_gain + s.switch_step * projected.norm();
        Ok(ObserverDerivative {
            z_dot,
            gain_dot,
            switch_gain_dot,
        })
    }

    /// Estimation-error component along the reconstructible directions;
    /// needs the true state, so it is a simulation-only diagnostic.
    pub fn functional_error(&self, estimate: &Vector, truth: &Vector) -> Vector {
        self.quad.detectable_basis.transpose() * (estimate - truth)
    }
}

/// Build an observer node by decomposing the triplet seen by that node.
pub fn build_observer(
    index: usize,
    a: &Matrix,
    b_local: &Matrix,
    b_unavail: &Matrix,
    c: &Matrix,
    adaptive: AdaptiveSettings,
    tol: RankTolerance,
) -> Result<ObserverNode> {
    adaptive.validate()?;
    let quad = decomposition::decompose(a, b_unavail, c, tol)?;
    let gains = ObserverGains::from_quadruplet(&quad, a, b_local, c)?;
    Ok(ObserverNode {
        index,
        quad,
        gains,
        output_map: c.clone(),
        local_input: b_local.clone(),
        unavailable_channel: b_unavail.clone(),
        adaptive,
    })
}

/// One agent of a heterogeneous multi-agent system.
#[derive(Debug, Clone)]
pub struct MasAgent {
    pub dynamics: Matrix,
    pub input: Matrix,
    pub output: Matrix,
    /// Output injection rendering `dynamics + injection * output` Hurwitz.
    pub injection: Matrix,
}

/// Detectability test for a pair: every eigenvalue that is not strictly
/// stable must keep the stacked (dynamics - lambda*I over output) matrix
/// at full column rank.
pub fn is_detectable_pair(dynamics: &Matrix, output: &Matrix, tol: RankTolerance) -> bool {
    let n = dynamics.nrows();
    if n == 0 {
        return true;
    }
    let scale = dynamics.norm().max(output.norm()).max(1.0);
    let margin = 0.02 * scale;
    let rows = n + output.nrows();
    for lambda in matrix::eigenvalues(dynamics) {
        if lambda.re < -margin {
            continue;
        }
        let mut stacked = nalgebra::DMatrix::<Complex<f64>>::zeros(rows, n);
        for i in 0..n {
            for j in 0..n {
                stacked[(i, j)] = Complex::new(dynamics[(i, j)], 0.0);
            }
            stacked[(i, i)] -= lambda;
        }
        for i in 0..output.nrows() {
            for j in 0..n {
                stacked[(n + i, j)] = Complex::new(output[(i, j)], 0.0);
            }
        }
        let sv = stacked.singular_values();
        let largest = sv.iter().cloned().fold(0.0_f64, f64::max);
        let cut = tol.cutoff(largest.max(scale));
        let rank = sv.iter().filter(|&&s| s > cut).count();
        if rank < n {
            return false;
        }
    }
    true
}

/// Build the observer network of a heterogeneous multi-agent system where
/// agent i knows only its own input and output.
///
/// The stacked plant is block diagonal over the agents; each node's
/// reconstructible subspace is exactly its own block, with the functional
/// dynamics closed by the supplied output injection. The resulting nodes
/// are ordinary [`ObserverNode`]s whose output feedthrough vanishes, so
/// the estimate coincides with the internal state and the same simulation
/// engine drives them.
pub fn build_mas_observer(
    agents: &[MasAgent],
    adaptive: &[AdaptiveSettings],
    tol: RankTolerance,
) -> Result<Vec<ObserverNode>> {
    if agents.is_empty() {
        return Err(Error::InvalidParameter("no agents supplied".into()));
    }
    if adaptive.len() != agents.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} adaptive settings for {} agents",
            adaptive.len(),
            agents.len()
        )));
    }
    for (i, agent) in agents.iter().enumerate() {
        let ni = agent.dynamics.nrows();
        if agent.dynamics.ncols() != ni
            || agent.input.nrows() != ni
            || agent.output.ncols() != ni
            || agent.injection.nrows() != ni
            || agent.injection.ncols() != agent.output.nrows()
        {
            return Err(Error::DimensionMismatch(format!(
                "agent {i} has inconsistent dimensions"
            )));
        }
        if !is_detectable_pair(&agent.dynamics, &agent.output, tol) {
            return Err(Error::NotDetectable(format!("agent {i}")));
        }
        let closed = &agent.dynamics + &agent.injection * &agent.output;
        if matrix::spectral_abscissa(&closed) >= 0.0 {
            return Err(Error::InvalidParameter(format!(
                "agent {i}: output injection does not stabilize its dynamics"
            )));
        }
    }

    let dims: Vec<usize> = agents.iter().map(|a| a.dynamics.nrows()).collect();
    let n: usize = dims.iter().sum();
    let offsets: Vec<usize> = dims
        .iter()
        .scan(0, |acc, d| {
            let at = *acc;
            *acc += d;
            Some(at)
        })
        .collect();

    let mut stacked_a = Matrix::zeros(n, n);
    for (agent, &at) in agents.iter().zip(&offsets) {
        let ni = agent.dynamics.nrows();
        stacked_a
            .view_mut((at, at), (ni, ni))
            .copy_from(&agent.dynamics);
    }

    let mut nodes = Vec::with_capacity(agents.len());
    for (i, (agent, settings)) in agents.iter().zip(adaptive).enumerate() {
        settings.validate()?;
        let ni = dims[i];
        let at = offsets[i];
        let pi = agent.output.nrows();

        // Own-block selector and its complement.
        let mut basis = Matrix::zeros(n, ni);
        basis
            .view_mut((at, 0), (ni, ni))
            .copy_from(&Matrix::identity(ni, ni));
        let mut complement = Matrix::zeros(n, n - ni);
        let mut col = 0;
        for row in 0..n {
            if row < at || row >= at + ni {
                complement[(row, col)] = 1.0;
                col += 1;
            }
        }

        let mut b_local = Matrix::zeros(n, agent.input.ncols());
        b_local
            .view_mut((at, 0), (ni, agent.input.ncols()))
            .copy_from(&agent.input);
        let mut c = Matrix::zeros(pi, n);
        c.view_mut((0, at), (pi, ni)).copy_from(&agent.output);

        let unavail_cols: usize = agents
            .iter()
            .enumerate()
            .filter(|&(j, _)| j != i)
            .map(|(_, a)| a.input.ncols())
            .sum();
        let mut b_unavail = Matrix::zeros(n, unavail_cols);
        let mut ucol = 0;
        for (j, other) in agents.iter().enumerate() {
            if j == i {
                continue;
            }
            let mj = other.input.ncols();
            b_unavail
                .view_mut((offsets[j], ucol), (dims[j], mj))
                .copy_from(&other.input);
            ucol += mj;
        }

        let quad = DecompositionQuadruplet {
            detectable_basis: basis,
            complement_basis: complement,
            functional_dynamics: &agent.dynamics + &agent.injection * &agent.output,
            output_gain: -agent.injection.clone(),
            output_feedthrough: Matrix::zeros(ni, pi),
            dim: ni,
            mode: FunctionalMode::Stable,
        };
        let report = decomposition::verify_quadruplet(
            &stacked_a,
            &b_unavail,
            &c,
            &quad,
            decomposition::CERT_RESIDUAL_BOUND,
        );
        if !report.pass {
            return Err(Error::Internal(format!(
                "agent {i}: stacked quadruplet failed its certificate:\n{report}"
            )));
        }
        let gains = ObserverGains::from_quadruplet(&quad, &stacked_a, &b_local, &c)?;
        nodes.push(ObserverNode {
            index: i,
            quad,
            gains,
            output_map: c,
            local_input: b_local,
            unavailable_channel: b_unavail,
            adaptive: *settings,
        });
    }
    Ok(nodes)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CareForm;
    use approx::assert_relative_eq;

    fn tol() -> RankTolerance {
        RankTolerance::default()
    }

    fn settings() -> AdaptiveSettings {
        AdaptiveSettings {
            gain_init: 0.1,
            switch_gain_init: 0.1,
            gain_step: 0.2,
            switch_step: 0.5,
            gain_leak: 0.0,
            switch_leak: 0.0,
        }
    }

    #[test]
    fn sign_direction_cases() {
        assert_eq!(sign_direction(&Vector::zeros(3)), Vector::zeros(3));
        let w = Vector::from_row_slice(&[3.0, 4.0]);
        let h = sign_direction(&w);
        assert_relative_eq!(h[0], 0.6, epsilon = 1e-12);
        assert_relative_eq!(h[1], 0.8, epsilon = 1e-12);
        assert_relative_eq!(h.norm(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn full_measurement_node_is_output_driven() {
        // Everything measured and no unknown input: the estimate is read
        // off the output and the input gain vanishes.
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, -1.0]);
        let b_local = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let node = build_observer(
            0,
            &a,
            &b_local,
            &Matrix::zeros(2, 0),
            &Matrix::identity(2, 2),
            settings(),
            tol(),
        )
        .unwrap();
        let resolve = &node.gains.feedthrough_matrix * &node.output_map;
        assert!((resolve - Matrix::identity(2, 2)).norm() < 1e-10);
        assert!(node.gains.input_matrix.norm() < 1e-10);
    }

    #[test]
    fn gain_identities_hold() {
        let a = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b_local = Matrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let b_unavail = Matrix::from_row_slice(3, 1, &[0.0, 1.0, 0.0]);
        let c = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let node = build_observer(0, &a, &b_local, &b_unavail, &c, settings(), tol()).unwrap();
        let t = &node.quad.detectable_basis;
        let u = &node.quad.complement_basis;
        let free = u * u.transpose() * &a;
        let state = t * &node.quad.functional_dynamics * t.transpose() + &free;
        assert!((state - &node.gains.state_matrix).norm() < 1e-10);
        let feed = t * &node.quad.output_feedthrough;
        assert!((&feed - &node.gains.feedthrough_matrix).norm() < 1e-10);
        let output = t * &node.quad.output_gain + &free * &feed;
        assert!((output - &node.gains.output_matrix).norm() < 1e-10);
        let input = (Matrix::identity(3, 3) - &feed * &c) * &b_local;
        assert!((input - &node.gains.input_matrix).norm() < 1e-10);
    }

    #[test]
    fn consensus_injection_lives_in_the_complement() {
        let a = Matrix::from_row_slice(3, 3, &[0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0]);
        let b_local = Matrix::zeros(3, 0);
        let b_unavail = Matrix::from_row_slice(3, 1, &[0.0, 0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 3, &[1.0, 0.0, 0.0]);
        let node = build_observer(0, &a, &b_local, &b_unavail, &c, settings(), tol()).unwrap();
        let state = node.initial_state();

        assert!(node.consensus_injection(&state, &Vector::zeros(3)).norm() < 1e-12);
        // Disagreement along the reconstructible directions projects away.
        let along = &node.quad.detectable_basis * Vector::from_element(node.quad.dim, 1.0);
        assert!(node.consensus_injection(&state, &along).norm() < 1e-10);
        // Generic disagreement stays orthogonal to the reconstructible span.
        let d = Vector::from_row_slice(&[0.3, -0.7, 0.2]);
        let inj = node.consensus_injection(&state, &d);
        assert!((node.quad.detectable_basis.transpose() * inj).norm() < 1e-10);
    }

    #[test]
    fn identity_complement_passes_disagreement_through() {
        // One-dimensional reconstructible space in R^2 with unit gain and
        // no switching: the injection reproduces the complement component.
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b_unavail = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let mut s = settings();
        s.gain_init = 1.0;
        s.switch_gain_init = 0.0;
        s.switch_step = 0.0;
        let node = build_observer(0, &a, &Matrix::zeros(2, 0), &b_unavail, &c, s, tol()).unwrap();
        let state = node.initial_state();
        let d = Vector::from_row_slice(&[0.0, 2.5]);
        let inj = node.consensus_injection(&state, &d);
        assert!((inj - &d).norm() < 1e-10);
    }

    #[test]
    fn rhs_equilibrium_and_unit_disagreement() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b_unavail = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let mut s = settings();
        s.gain_leak = 0.3;
        let node = build_observer(0, &a, &Matrix::zeros(2, 0), &b_unavail, &c, s, tol()).unwrap();
        let state = node.initial_state();

        let zero = node
            .rhs(&state, &Vector::zeros(1), &Vector::zeros(0), &Vector::zeros(2))
            .unwrap();
        assert!(zero.z_dot.norm() < 1e-12);
        assert_relative_eq!(zero.gain_dot, -0.3 * state.gain, epsilon = 1e-12);

        // Unit projected disagreement drives the gains at their step sizes.
        let d = &node.quad.complement_basis * Vector::from_element(1, 1.0);
        let der = node
            .rhs(&state, &Vector::zeros(1), &Vector::zeros(0), &d)
            .unwrap();
        assert_relative_eq!(der.gain_dot, -0.3 * state.gain + s.gain_step, epsilon = 1e-10);
        assert_relative_eq!(der.switch_gain_dot, s.switch_step, epsilon = 1e-10);
    }

    #[test]
    fn estimate_composition() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let b_unavail = Matrix::from_row_slice(2, 1, &[0.0, 1.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let node =
            build_observer(0, &a, &Matrix::zeros(2, 0), &b_unavail, &c, settings(), tol()).unwrap();
        let state = node.initial_state();
        assert!(node.estimate(&state, &Vector::zeros(1)).norm() < 1e-12);
        let y = Vector::from_element(1, 2.0);
        let xhat = node.estimate(&state, &y);
        assert!((xhat - &node.gains.feedthrough_matrix * &y).norm() < 1e-12);
    }

    #[test]
    fn mas_network_matches_generic_gain_construction() {
        // Two simple agents; the block construction and the generic gain
        // derivation from the same quadruplet must agree exactly.
        let agents = vec![
            MasAgent {
                dynamics: Matrix::from_row_slice(1, 1, &[0.0]),
                input: Matrix::from_row_slice(1, 1, &[1.0]),
                output: Matrix::from_row_slice(1, 1, &[1.0]),
                injection: Matrix::from_row_slice(1, 1, &[-1.5]),
            },
            MasAgent {
                dynamics: Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]),
                input: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
                output: Matrix::from_row_slice(1, 2, &[1.0, 0.0]),
                injection: Matrix::from_row_slice(2, 1, &[-2.0, -1.0]),
            },
        ];
        let nodes = build_mas_observer(&agents, &[settings(), settings()], tol()).unwrap();
        assert_eq!(nodes.len(), 2);

        let n = 3;
        let mut a = Matrix::zeros(n, n);
        a[(1, 2)] = 1.0;
        for node in &nodes {
            let regains =
                ObserverGains::from_quadruplet(&node.quad, &a, &node.local_input, &node.output_map)
                    .unwrap();
            assert!((&regains.state_matrix - &node.gains.state_matrix).norm() < 1e-10);
            assert!((&regains.output_matrix - &node.gains.output_matrix).norm() < 1e-10);
            assert!((&regains.feedthrough_matrix - &node.gains.feedthrough_matrix).norm() < 1e-10);
            assert!((&regains.input_matrix - &node.gains.input_matrix).norm() < 1e-10);
            // Feedthrough vanishes, so the estimate is the internal state.
            assert!(node.gains.feedthrough_matrix.norm() < 1e-12);
        }
        // Reconstructible spans are the agents' own blocks.
        assert!(nodes[0].quad.detectable_basis[(0, 0)].abs() > 0.99);
        assert_eq!(nodes[1].quad.dim, 2);
    }

    #[test]
    fn single_fully_observed_agent_is_a_luenberger_observer() {
        let a = Matrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]);
        let c = Matrix::from_row_slice(1, 2, &[1.0, 0.0]);
        let x = matrix::solve_care(&a, &c, &Matrix::identity(2, 2), 0.2, CareForm::Observer).unwrap();
        let injection = -&x * c.transpose();
        let agents = vec![MasAgent {
            dynamics: a.clone(),
            input: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            output: c.clone(),
            injection: injection.clone(),
        }];
        let nodes = build_mas_observer(&agents, &[settings()], tol()).unwrap();
        let node = &nodes[0];
        // No other agents: the state matrix is the injection-closed loop
        // and the output gain is the negated injection.
        assert!((&node.gains.state_matrix - (&a + &injection * &c)).norm() < 1e-10);
        assert!((&node.gains.output_matrix + &injection).norm() < 1e-10);
        assert_eq!(node.unavailable_channel.ncols(), 0);
    }

    #[test]
    fn mas_rejects_undetectable_agent() {
        let agents = vec![MasAgent {
            dynamics: Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]),
            input: Matrix::from_row_slice(2, 1, &[0.0, 1.0]),
            output: Matrix::from_row_slice(1, 2, &[0.0, 1.0]),
            injection: Matrix::zeros(2, 1),
        }];
        assert!(matches!(
            build_mas_observer(&agents, &[settings()], tol()),
            Err(Error::NotDetectable(_))
        ));
    }
}
