//! Canonical cluster construction (one squeezed mode per node, one QND gate
//! per edge), nullifier extraction, and the closed-form teleported outputs of
//! the multi-rail family together with rail-weight optimization.

use nalgebra::DMatrix;

use crate::gates::{apply_qnd, ModeState};
use crate::qalg::{second_moment, ModeRegistry, OperatorExpr};
use crate::topology::{nrail, nrail_arms, ClusterSpec, INPUT_ALPHA, INPUT_BETA};
use crate::{Error, Result};

/// Which construction produced a cluster state.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Canonical,
    LinearOptical,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Canonical => "canonical",
            Family::LinearOptical => "lo",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "canonical" => Ok(Family::Canonical),
            "lo" | "linear-optical" => Ok(Family::LinearOptical),
            other => Err(Error::InvalidArg(format!("unknown family '{other}'"))),
        }
    }
}

/// Squeezing assignment for the cluster nodes.
#[derive(Debug, Clone, PartialEq)]
pub enum Squeezing {
    Uniform(f64),
    PerNode(Vec<f64>),
}

impl From<f64> for Squeezing {
    fn from(r: f64) -> Self {
        Squeezing::Uniform(r)
    }
}

impl Squeezing {
    fn resolve(&self, node_count: usize) -> Result<Vec<f64>> {
        match self {
            Squeezing::Uniform(r) => Ok(vec![*r; node_count]),
            Squeezing::PerNode(rs) => {
                if rs.len() != node_count {
                    return Err(Error::SqueezingLength {
                        expected: node_count,
                        got: rs.len(),
                    });
                }
                Ok(rs.clone())
            }
        }
    }
}

/// A cluster of node modes expressed over their base (pre-gate) modes,
/// together with the registry holding the base-mode statistics.
#[derive(Debug, Clone)]
pub struct ClusterState {
    spec: ClusterSpec,
    nodes: Vec<ModeState>,
    registry: ModeRegistry,
    family: Family,
}

impl ClusterState {
    pub(crate) fn from_parts(
        spec: ClusterSpec,
        nodes: Vec<ModeState>,
        registry: ModeRegistry,
        family: Family,
    ) -> Self {
        Self {
            spec,
            nodes,
            registry,
            family,
        }
    }

    pub fn spec(&self) -> &ClusterSpec {
        &self.spec
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn registry(&self) -> &ModeRegistry {
        &self.registry
    }

    /// Node quadratures, 1-based by node number.
    pub fn node(&self, k: usize) -> Result<&ModeState> {
        self.nodes
            .get(k.wrapping_sub(1))
            .ok_or(Error::UnknownMode { id: k })
    }

    pub fn node_mut(&mut self, k: usize) -> Result<&mut ModeState> {
        self.nodes
            .get_mut(k.wrapping_sub(1))
            .ok_or(Error::UnknownMode { id: k })
    }

    /// Base-mode id backing node k. Construction registers node modes in
    /// order, so this is k-1 once k is validated.
    pub fn base_id(&self, k: usize) -> Result<usize> {
        self.node(k)?;
        Ok(k - 1)
    }

    /// Register a fresh coherent input mode and return its id plus a mode
    /// state holding its bare quadratures.
    pub fn add_coherent_input(&mut self, label: &str) -> (usize, ModeState) {
        let id = self.registry.add_coherent(label);
        (id, ModeState::fresh(id))
    }
}

/// Build the canonical cluster on `spec`: one squeezed vacuum per node, one
/// QND gate per edge. Node k ends up with q_k = qbar_k and p_k = pbar_k plus
/// the sum of neighbor qbar's.
pub fn build_canonical(spec: &ClusterSpec, squeezing: &Squeezing) -> Result<ClusterState> {
    let m = spec.node_count();
    let rs = squeezing.resolve(m)?;
    let mut registry = ModeRegistry::new();
    let mut nodes = Vec::with_capacity(m);
    for r in rs {
        let id = registry.add_squeezed(r)?;
        nodes.push(ModeState::fresh(id));
    }
    for (a, b) in spec.edges() {
        let (na, nb) = apply_qnd(&nodes[a - 1], &nodes[b - 1]);
        nodes[a - 1] = na;
        nodes[b - 1] = nb;
    }
    Ok(ClusterState::from_parts(
        spec.clone(),
        nodes,
        registry,
        Family::Canonical,
    ))
}

/// Nullifier of node k: p_k minus the sum of neighbor q's, evaluated on the
/// current node expressions. For a freshly built canonical cluster this
/// collapses to the node's bare pbar.
pub fn nullifier(state: &ClusterState, k: usize) -> Result<OperatorExpr> {
    let mut delta = state.node(k)?.p.clone();
    for &l in state.spec().neighbors(k)? {
        delta = delta.sub(&state.node(l)?.q);
    }
    Ok(delta)
}

/// Full matrix of nullifier second moments <delta_k delta_l> over all nodes.
pub fn nullifier_covariance(state: &ClusterState) -> Result<DMatrix<f64>> {
    let m = state.spec().node_count();
    let deltas: Vec<OperatorExpr> = (1..=m).map(|k| nullifier(state, k)).collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in k..m {
            let v = second_moment(&deltas[k], &deltas[l], state.registry())?;
            c[(k, l)] = v;
            c[(l, k)] = v;
        }
    }
    Ok(c)
}

/// Normalized rail weights (sum fixed to 1).
#[derive(Debug, Clone, PartialEq)]
pub struct WeightVector {
    eta: Vec<f64>,
}

impl WeightVector {
    pub fn new(eta: Vec<f64>) -> Result<Self> {
        if eta.is_empty() || eta.iter().any(|e| !e.is_finite()) {
            return Err(Error::WeightSum { sum: f64::NAN });
        }
        let sum: f64 = eta.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(Error::WeightSum { sum });
        }
        Ok(Self { eta })
    }

    pub fn uniform(n: usize) -> Self {
        Self {
            eta: vec![1.0 / n as f64; n],
        }
    }

    pub fn eta(&self) -> &[f64] {
        &self.eta
    }

    pub fn len(&self) -> usize {
        self.eta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.eta.is_empty()
    }
}

/// Teleported output quadratures (q_mu, p_mu) and (q_nu, p_nu) expressed over
/// base modes, plus the registry needed to take their moments.
#[derive(Debug, Clone)]
pub struct TeleportOutputs {
    pub q_mu: OperatorExpr,
    pub p_mu: OperatorExpr,
    pub q_nu: OperatorExpr,
    pub p_nu: OperatorExpr,
    pub registry: ModeRegistry,
}

impl TeleportOutputs {
    /// Quadratures in the fixed order (q_mu, p_mu, q_nu, p_nu).
    pub fn quadratures(&self) -> [&OperatorExpr; 4] {
        [&self.q_mu, &self.p_mu, &self.q_nu, &self.p_nu]
    }
}

/// Teleported outputs of the canonical N-rail cluster at uniform squeezing r:
/// each output q picks up the weighted sum of its arm's rail nullifiers, each
/// output p picks up the two hub/end nullifiers, and the input quadratures
/// come through with the q's swapped onto the opposite p's (the CZ action).
/// `weights` defaults to uniform 1/N.
pub fn nrail_outputs_canonical(
    n: usize,
    r: f64,
    weights: Option<&WeightVector>,
) -> Result<TeleportOutputs> {
    let spec = nrail(n)?;
    let eta = match weights {
        Some(w) => {
            if w.len() != n {
                return Err(Error::WeightLength {
                    expected: n,
                    got: w.len(),
                });
            }
            w.clone()
        }
        None => WeightVector::uniform(n),
    };
    let mut state = build_canonical(&spec, &Squeezing::Uniform(r))?;
    let (arm1, arm2) = nrail_arms(n);
    let (_, input_a) = state.add_coherent_input(INPUT_ALPHA);
    let (_, input_b) = state.add_coherent_input(INPUT_BETA);

    let mut q_mu = input_a.q.clone();
    for (k, &e) in arm1.zip(eta.eta()) {
        q_mu.add_scaled_in_place(e, &nullifier(&state, k)?);
    }
    let mut p_mu = input_a.p.add(&input_b.q);
    p_mu.add_scaled_in_place(-1.0, &nullifier(&state, 1)?);
    p_mu.add_scaled_in_place(1.0, &nullifier(&state, n + 2)?);

    let mut q_nu = input_b.q.clone();
    for (k, &e) in arm2.zip(eta.eta()) {
        q_nu.add_scaled_in_place(e, &nullifier(&state, k)?);
    }
    let mut p_nu = input_b.p.add(&input_a.q);
    p_nu.add_scaled_in_place(-1.0, &nullifier(&state, 2 * n + 4)?);
    p_nu.add_scaled_in_place(1.0, &nullifier(&state, n + 3)?);

    Ok(TeleportOutputs {
        q_mu,
        p_mu,
        q_nu,
        p_nu,
        registry: state.registry().clone(),
    })
}

/// Weights minimizing the variance of sum_k eta_k delta_k subject to
/// sum eta = 1, for nullifier covariance `c`: solve c w = 1 and normalize.
pub fn optimal_weights(c: &DMatrix<f64>) -> Result<WeightVector> {
    if c.nrows() != c.ncols() || c.is_empty() {
        return Err(Error::SingularCovariance);
    }
    let ones = DMatrix::from_element(c.nrows(), 1, 1.0);
    let w = match c.clone().cholesky() {
        Some(chol) => chol.solve(&ones),
        None => c
            .clone()
            .lu()
            .solve(&ones)
            .ok_or(Error::SingularCovariance)?,
    };
    let sum: f64 = w.iter().sum();
    if !sum.is_finite() || sum.abs() < 1e-300 {
        return Err(Error::SingularCovariance);
    }
    WeightVector::new(w.iter().map(|x| x / sum).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::topology::linear_chain;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn chain_node_expressions() {
        let spec = linear_chain(4).unwrap();
        let state = build_canonical(&spec, &Squeezing::Uniform(0.7)).unwrap();
        // q untouched by CZ gates
        for k in 1..=4 {
            assert!(state.node(k).unwrap().q.approx_eq(&OperatorExpr::q(k - 1), 0.0));
        }
        // p_2 = pbar_2 + qbar_1 + qbar_3
        let expect = OperatorExpr::p(1)
            .add(&OperatorExpr::q(0))
            .add(&OperatorExpr::q(2));
        assert!(state.node(2).unwrap().p.approx_eq(&expect, 0.0));
    }

    #[test]
    fn nullifiers_reduce_to_bare_momenta() {
        let state = build_canonical(&nrail(2).unwrap(), &Squeezing::Uniform(0.4)).unwrap();
        for k in 1..=8 {
            let delta = nullifier(&state, k).unwrap();
            assert!(delta.approx_eq(&OperatorExpr::p(k - 1), 1e-15));
        }
    }

    #[test]
    fn nullifier_covariance_is_squeezed_diagonal() {
        let rs = vec![0.2, 0.9, 0.5, 1.3];
        let state =
            build_canonical(&linear_chain(4).unwrap(), &Squeezing::PerNode(rs.clone())).unwrap();
        let c = nullifier_covariance(&state).unwrap();
        for k in 0..4 {
            for l in 0..4 {
                let expect = if k == l { (-2.0 * rs[k]).exp() / 4.0 } else { 0.0 };
                assert_abs_diff_eq!(c[(k, l)], expect, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn squeezing_length_checked() {
        let err = build_canonical(&linear_chain(4).unwrap(), &Squeezing::PerNode(vec![0.1; 3]));
        assert!(matches!(
            err,
            Err(Error::SqueezingLength { expected: 4, got: 3 })
        ));
    }

    #[test]
    fn single_rail_outputs() {
        let out = nrail_outputs_canonical(1, 0.6, None).unwrap();
        // Node k maps to base id k-1; inputs register after the 6 nodes.
        let qa = OperatorExpr::q(6);
        let pa = OperatorExpr::p(6);
        let qb = OperatorExpr::q(7);
        let pb = OperatorExpr::p(7);
        assert!(out.q_mu.approx_eq(&qa.add(&OperatorExpr::p(1)), 1e-15));
        let p_mu = pa
            .add(&qb)
            .sub(&OperatorExpr::p(0))
            .add(&OperatorExpr::p(2));
        assert!(out.p_mu.approx_eq(&p_mu, 1e-15));
        assert!(out.q_nu.approx_eq(&qb.add(&OperatorExpr::p(4)), 1e-15));
        let p_nu = pb
            .add(&qa)
            .sub(&OperatorExpr::p(5))
            .add(&OperatorExpr::p(3));
        assert!(out.p_nu.approx_eq(&p_nu, 1e-15));
    }

    #[test]
    fn output_moments_match_closed_forms() {
        for n in [1, 2, 5] {
            let r: f64 = 0.45;
            let x = (-2.0 * r).exp();
            let out = nrail_outputs_canonical(n, r, None).unwrap();
            let reg = &out.registry;
            let a = second_moment(&out.q_mu, &out.q_mu, reg).unwrap();
            let b = second_moment(&out.p_mu, &out.p_mu, reg).unwrap();
            let c = second_moment(&out.q_mu, &out.p_nu, reg).unwrap();
            assert_abs_diff_eq!(a, (1.0 + x / n as f64) / 4.0, epsilon = 1e-14);
            assert_abs_diff_eq!(b, (1.0 + x) / 2.0, epsilon = 1e-14);
            assert_abs_diff_eq!(c, 0.25, epsilon = 1e-14);
            let a2 = second_moment(&out.q_nu, &out.q_nu, reg).unwrap();
            let b2 = second_moment(&out.p_nu, &out.p_nu, reg).unwrap();
            let c2 = second_moment(&out.p_mu, &out.q_nu, reg).unwrap();
            assert_abs_diff_eq!(a, a2, epsilon = 1e-14);
            assert_abs_diff_eq!(b, b2, epsilon = 1e-14);
            assert_abs_diff_eq!(c, c2, epsilon = 1e-14);
        }
    }

    #[test]
    fn weight_validation() {
        assert!(WeightVector::new(vec![0.5, 0.4]).is_err());
        assert!(WeightVector::new(vec![0.5, 0.5]).is_ok());
        let w = WeightVector::new(vec![0.25, 0.75]).unwrap();
        let err = nrail_outputs_canonical(3, 0.4, Some(&w));
        assert!(matches!(
            err,
            Err(Error::WeightLength { expected: 3, got: 2 })
        ));
    }

    #[test]
    fn custom_weights_shift_output_variance() {
        let r: f64 = 0.5;
        let x = (-2.0 * r).exp();
        let w = WeightVector::new(vec![0.7, 0.3]).unwrap();
        let out = nrail_outputs_canonical(2, r, Some(&w)).unwrap();
        let a = second_moment(&out.q_mu, &out.q_mu, &out.registry).unwrap();
        assert_abs_diff_eq!(a, 0.25 + (0.49 + 0.09) * x / 4.0, epsilon = 1e-15);
    }

    #[test]
    fn optimal_weights_examples() {
        let c = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![2.0, 1.0]));
        let w = optimal_weights(&c).unwrap();
        assert_abs_diff_eq!(w.eta()[0], 1.0 / 3.0, epsilon = 1e-14);
        assert_abs_diff_eq!(w.eta()[1], 2.0 / 3.0, epsilon = 1e-14);

        let singular = DMatrix::from_element(3, 3, 1.0);
        assert!(matches!(
            optimal_weights(&singular),
            Err(Error::SingularCovariance)
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// On a random positive definite covariance the normalized solution of
        /// C w = 1 beats every other weight vector summing to one.
        #[test]
        fn optimal_weights_minimize_variance(
            seed in proptest::array::uniform16(-1.0f64..1.0),
            dir in proptest::array::uniform4(-1.0f64..1.0),
        ) {
            let a = DMatrix::from_row_slice(4, 4, &seed);
            let c = &a * a.transpose() + DMatrix::identity(4, 4) * 0.05;
            let w = optimal_weights(&c).unwrap();
            let eta = nalgebra::DVector::from_row_slice(w.eta());
            let base = (eta.transpose() * &c * &eta)[(0, 0)];

            let mean: f64 = dir.iter().sum::<f64>() / 4.0;
            let mut d = nalgebra::DVector::from_row_slice(&dir);
            d.add_scalar_mut(-mean);
            if d.norm() > 1e-6 {
                let shifted = &eta + &d;
                let cost = (shifted.transpose() * &c * &shifted)[(0, 0)];
                prop_assert!(cost >= base - 1e-12);
            }
        }
    }
}
