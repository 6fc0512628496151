//! Measurement-based CZ-gate teleportation scenarios.
//!
//! A scenario fixes a cluster topology, a family (QND-coupled canonical
//! cluster or beamsplitter-coupled linear-optical one), optional Fourier
//! preparation steps, and for each teleported output quadrature two operator
//! expressions: the *definition* built from post-coupling node/port
//! quadratures (output modes plus measured corrections) and the *expansion*
//! as original input quadratures plus cluster nullifier noise. Running a
//! scenario replays the whole circuit on the operator algebra and demands the
//! two sides agree coefficient by coefficient.

use serde_json::json;

use crate::canonical::{build_canonical, nullifier, ClusterState, Family, Squeezing, TeleportOutputs};
use crate::gates::{apply_beamsplitter_5050, apply_fourier, apply_qnd, ModeState};
use crate::lincluster::build_lo_cluster;
use crate::qalg::{second_moment, OperatorExpr};
use crate::topology::{linear_chain, nrail, ClusterSpec, INPUT_ALPHA, INPUT_BETA};
use crate::{Error, Result};

/// Definition and expansion must agree to this coefficient tolerance.
pub const IDENTITY_TOL: f64 = 1e-12;

/// The two teleported inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Input {
    Alpha,
    Beta,
}

impl Input {
    fn label(self) -> &'static str {
        match self {
            Input::Alpha => INPUT_ALPHA,
            Input::Beta => INPUT_BETA,
        }
    }
}

/// Symbolic reference to one quadrature of the replayed circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OpRef {
    /// Post-coupling node position / momentum.
    NodeQ(usize),
    NodeP(usize),
    /// Post-coupling quadrature of a QND-coupled (possibly prepped) input.
    CoupledInQ(Input),
    CoupledInP(Input),
    /// Beamsplitter output port quadratures; port 1 carries the sum,
    /// port 2 the difference.
    PortQ(Input, u8),
    PortP(Input, u8),
    /// Original input quadratures before any preparation.
    InQ(Input),
    InP(Input),
    /// Pre-coupling nullifier of node k (in the scenario's nullifier form).
    Nullifier(usize),
}

impl std::fmt::Display for OpRef {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            OpRef::NodeQ(k) => write!(f, "q[{k}]"),
            OpRef::NodeP(k) => write!(f, "p[{k}]"),
            OpRef::CoupledInQ(i) => write!(f, "q[{}]", i.label()),
            OpRef::CoupledInP(i) => write!(f, "p[{}]", i.label()),
            OpRef::PortQ(i, port) => write!(f, "q[{}.port{port}]", i.label()),
            OpRef::PortP(i, port) => write!(f, "p[{}.port{port}]", i.label()),
            OpRef::InQ(i) => write!(f, "q[{}.in]", i.label()),
            OpRef::InP(i) => write!(f, "p[{}.in]", i.label()),
            OpRef::Nullifier(k) => write!(f, "delta[{k}]"),
        }
    }
}

/// Which combination acts as the noise operator of a node.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NullifierForm {
    /// p_k minus the neighbor position sum.
    Standard,
    /// q_k plus the neighbor momentum sum (for Fourier-rotated clusters).
    FourierTransformed,
}

/// One teleported quadrature: its constructive definition and its
/// input-plus-noise expansion.
#[derive(Debug, Clone)]
pub struct OutputIdentity {
    pub label: &'static str,
    pub definition: Vec<(f64, OpRef)>,
    pub expansion: Vec<(f64, OpRef)>,
}

/// A complete teleportation arrangement.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub spec: ClusterSpec,
    pub family: Family,
    /// Rotate every cluster node by a forward Fourier gate before coupling.
    pub fourier_cluster_prep: bool,
    /// Rotate both inputs by an inverse Fourier gate before coupling.
    pub fourier_input_prep: bool,
    pub nullifier_form: NullifierForm,
    /// Exactly four entries, ordered q_mu, p_mu, q_nu, p_nu.
    pub outputs: Vec<OutputIdentity>,
    /// Homodyne record needed to synthesize the corrections.
    pub measured: Vec<OpRef>,
    /// Human-readable correction string (display only; the identity check
    /// works on the operator expressions, not on this).
    pub corrections: String,
}

/// Result of replaying one scenario at a fixed squeezing.
#[derive(Debug, Clone)]
pub struct ScenarioReport {
    pub name: String,
    /// Largest definition-vs-expansion coefficient deviation over the four
    /// outputs.
    pub max_residual: f64,
    pub per_output: Vec<(String, f64)>,
    /// The teleported outputs (definition side), ready for moment taking.
    pub outputs: TeleportOutputs,
}

struct Circuit {
    state: ClusterState,
    originals: [ModeState; 2],
    coupled: Option<[ModeState; 2]>,
    ports: Option<[(ModeState, ModeState); 2]>,
    nullifiers: Vec<OperatorExpr>,
}

impl Circuit {
    fn input_index(i: Input) -> usize {
        match i {
            Input::Alpha => 0,
            Input::Beta => 1,
        }
    }

    fn resolve(&self, r: &OpRef) -> Result<OperatorExpr> {
        match *r {
            OpRef::NodeQ(k) => Ok(self.state.node(k)?.q.clone()),
            OpRef::NodeP(k) => Ok(self.state.node(k)?.p.clone()),
            OpRef::CoupledInQ(i) | OpRef::CoupledInP(i) => {
                let c = self
                    .coupled
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArg("no QND-coupled inputs in this scenario".into()))?;
                let s = &c[Self::input_index(i)];
                Ok(match r {
                    OpRef::CoupledInQ(_) => s.q.clone(),
                    _ => s.p.clone(),
                })
            }
            OpRef::PortQ(i, port) | OpRef::PortP(i, port) => {
                let p = self
                    .ports
                    .as_ref()
                    .ok_or_else(|| Error::InvalidArg("no beamsplitter ports in this scenario".into()))?;
                let pair = &p[Self::input_index(i)];
                let s = match port {
                    1 => &pair.0,
                    2 => &pair.1,
                    _ => return Err(Error::InvalidArg(format!("port {port} out of range"))),
                };
                Ok(match r {
                    OpRef::PortQ(..) => s.q.clone(),
                    _ => s.p.clone(),
                })
            }
            OpRef::InQ(i) => Ok(self.originals[Self::input_index(i)].q.clone()),
            OpRef::InP(i) => Ok(self.originals[Self::input_index(i)].p.clone()),
            OpRef::Nullifier(k) => self
                .nullifiers
                .get(k.wrapping_sub(1))
                .cloned()
                .ok_or(Error::UnknownMode { id: k }),
        }
    }

    fn combine(&self, terms: &[(f64, OpRef)]) -> Result<OperatorExpr> {
        let mut out = OperatorExpr::zero();
        for (c, r) in terms {
            out.add_scaled_in_place(*c, &self.resolve(r)?);
        }
        Ok(out)
    }
}

/// Replay `sc` at uniform squeezing r and check every output identity.
pub fn run_scenario(sc: &Scenario, r: f64) -> Result<ScenarioReport> {
    let mut state = match sc.family {
        Family::Canonical => build_canonical(&sc.spec, &Squeezing::Uniform(r))?,
        Family::LinearOptical => build_lo_cluster(&sc.spec, r)?,
    };
    let m = sc.spec.node_count();
    if sc.fourier_cluster_prep {
        for k in 1..=m {
            let rotated = apply_fourier(state.node(k)?, false);
            *state.node_mut(k)? = rotated;
        }
    }

    let mut nullifiers = Vec::with_capacity(m);
    for k in 1..=m {
        nullifiers.push(match sc.nullifier_form {
            NullifierForm::Standard => nullifier(&state, k)?,
            NullifierForm::FourierTransformed => {
                let mut d = state.node(k)?.q.clone();
                for &l in state.spec().neighbors(k)? {
                    d = d.add(&state.node(l)?.p);
                }
                d
            }
        });
    }

    let (_, orig_a) = state.add_coherent_input(INPUT_ALPHA);
    let (_, orig_b) = state.add_coherent_input(INPUT_BETA);
    let prep = |s: &ModeState| {
        if sc.fourier_input_prep {
            apply_fourier(s, true)
        } else {
            s.clone()
        }
    };
    let in_a = prep(&orig_a);
    let in_b = prep(&orig_b);
    let node_a = sc.spec.input_node(INPUT_ALPHA)?;
    let node_b = sc.spec.input_node(INPUT_BETA)?;

    let (coupled, ports) = match sc.family {
        Family::Canonical => {
            let (ca, na) = apply_qnd(&in_a, state.node(node_a)?);
            *state.node_mut(node_a)? = na;
            let (cb, nb) = apply_qnd(&in_b, state.node(node_b)?);
            *state.node_mut(node_b)? = nb;
            (Some([ca, cb]), None)
        }
        Family::LinearOptical => {
            let pa = apply_beamsplitter_5050(&in_a, state.node(node_a)?);
            let pb = apply_beamsplitter_5050(&in_b, state.node(node_b)?);
            (None, Some([pa, pb]))
        }
    };

    let circuit = Circuit {
        state,
        originals: [orig_a, orig_b],
        coupled,
        ports,
        nullifiers,
    };

    // every measured quantity must at least resolve
    for mref in &sc.measured {
        circuit.resolve(mref)?;
    }

    let mut per_output = Vec::with_capacity(sc.outputs.len());
    let mut exprs = Vec::with_capacity(sc.outputs.len());
    let mut max_residual = 0.0f64;
    for out in &sc.outputs {
        let def = circuit.combine(&out.definition)?;
        let exp = circuit.combine(&out.expansion)?;
        let residual = def.max_abs_diff(&exp);
        if residual > IDENTITY_TOL {
            return Err(Error::ScenarioIdentity {
                name: sc.name.clone(),
                output: out.label.to_string(),
                residual,
            });
        }
        max_residual = max_residual.max(residual);
        per_output.push((out.label.to_string(), residual));
        exprs.push(def);
    }

    let find = |label: &str| -> Result<OperatorExpr> {
        sc.outputs
            .iter()
            .position(|o| o.label == label)
            .map(|i| exprs[i].clone())
            .ok_or_else(|| Error::InvalidArg(format!("scenario lacks output '{label}'")))
    };
    let outputs = TeleportOutputs {
        q_mu: find("q_mu")?,
        p_mu: find("p_mu")?,
        q_nu: find("q_nu")?,
        p_nu: find("p_nu")?,
        registry: circuit.state.registry().clone(),
    };

    Ok(ScenarioReport {
        name: sc.name.clone(),
        max_residual,
        per_output,
        outputs,
    })
}

fn out(label: &'static str, definition: Vec<(f64, OpRef)>, expansion: Vec<(f64, OpRef)>) -> OutputIdentity {
    OutputIdentity {
        label,
        definition,
        expansion,
    }
}

use OpRef::*;

/// 4-chain, QND inputs on the end nodes 1 and 4, outputs on 2 and 3.
pub fn l4_canonical_end_scenario() -> Scenario {
    let spec = linear_chain(4)
        .and_then(|s| s.with_inputs(1, 4))
        .and_then(|s| s.with_outputs(2, 3))
        .expect("static topology");
    Scenario {
        name: "l4-canonical-end".into(),
        spec,
        family: Family::Canonical,
        fourier_cluster_prep: false,
        fourier_input_prep: false,
        nullifier_form: NullifierForm::Standard,
        outputs: vec![
            out(
                "q_mu",
                vec![(-1.0, NodeQ(2)), (1.0, NodeP(1))],
                vec![(1.0, InQ(Input::Alpha)), (1.0, Nullifier(1))],
            ),
            out(
                "p_mu",
                vec![(-1.0, NodeP(2)), (1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(4))],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (-1.0, Nullifier(2)),
                    (1.0, Nullifier(4)),
                ],
            ),
            out(
                "q_nu",
                vec![(-1.0, NodeQ(3)), (1.0, NodeP(4))],
                vec![(1.0, InQ(Input::Beta)), (1.0, Nullifier(4))],
            ),
            out(
                "p_nu",
                vec![(-1.0, NodeP(3)), (1.0, CoupledInP(Input::Beta)), (1.0, NodeP(1))],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (-1.0, Nullifier(3)),
                    (1.0, Nullifier(1)),
                ],
            ),
        ],
        measured: vec![
            CoupledInP(Input::Alpha),
            CoupledInP(Input::Beta),
            NodeP(1),
            NodeP(4),
        ],
        corrections: "X[2](s1) Z[2](s_alpha + s4) F[2]^2 ; X[3](s4) Z[3](s_beta + s1) F[3]^2"
            .into(),
    }
}

/// 4-chain, inverse-Fourier-prepped QND inputs on the middle nodes 2 and 3,
/// outputs on the end nodes 1 and 4.
pub fn l4_canonical_mid_scenario() -> Scenario {
    Scenario {
        name: "l4-canonical-mid".into(),
        spec: linear_chain(4).expect("static topology"),
        family: Family::Canonical,
        fourier_cluster_prep: false,
        fourier_input_prep: true,
        nullifier_form: NullifierForm::Standard,
        outputs: vec![
            out(
                "q_mu",
                vec![(1.0, NodeP(1)), (-1.0, CoupledInP(Input::Alpha))],
                vec![(1.0, InQ(Input::Alpha)), (1.0, Nullifier(1))],
            ),
            out(
                "p_mu",
                vec![(-1.0, NodeQ(1)), (-1.0, CoupledInP(Input::Beta)), (1.0, NodeP(2))],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (1.0, Nullifier(2)),
                ],
            ),
            out(
                "q_nu",
                vec![(1.0, NodeP(4)), (-1.0, CoupledInP(Input::Beta))],
                vec![(1.0, InQ(Input::Beta)), (1.0, Nullifier(4))],
            ),
            out(
                "p_nu",
                vec![(-1.0, NodeQ(4)), (-1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(3))],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (1.0, Nullifier(3)),
                ],
            ),
        ],
        measured: vec![
            CoupledInP(Input::Alpha),
            CoupledInP(Input::Beta),
            NodeP(2),
            NodeP(3),
        ],
        corrections:
            "Xd[1](s_alpha) Zd[1](s_beta - s2) Fd[1] ; Xd[4](s_beta) Zd[4](s_alpha - s3) Fd[4]"
                .into(),
    }
}

/// 6-chain with inverse-Fourier-prepped QND inputs on nodes 3 and 4.
pub fn l6_canonical_scenario() -> Scenario {
    Scenario {
        name: "l6-canonical".into(),
        spec: linear_chain(6).expect("static topology"),
        family: Family::Canonical,
        fourier_cluster_prep: false,
        fourier_input_prep: true,
        nullifier_form: NullifierForm::Standard,
        outputs: vec![
            out(
                "q_mu",
                vec![(-1.0, NodeQ(1)), (-1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(2))],
                vec![(1.0, InQ(Input::Alpha)), (1.0, Nullifier(2))],
            ),
            out(
                "p_mu",
                vec![(-1.0, NodeP(1)), (-1.0, CoupledInP(Input::Beta)), (1.0, NodeP(3))],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (-1.0, Nullifier(1)),
                    (1.0, Nullifier(3)),
                ],
            ),
            out(
                "q_nu",
                vec![(-1.0, NodeQ(6)), (-1.0, CoupledInP(Input::Beta)), (1.0, NodeP(5))],
                vec![(1.0, InQ(Input::Beta)), (1.0, Nullifier(5))],
            ),
            out(
                "p_nu",
                vec![(-1.0, NodeP(6)), (-1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(4))],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (-1.0, Nullifier(6)),
                    (1.0, Nullifier(4)),
                ],
            ),
        ],
        measured: vec![
            CoupledInP(Input::Alpha),
            CoupledInP(Input::Beta),
            NodeP(2),
            NodeP(3),
            NodeP(4),
            NodeP(5),
        ],
        corrections:
            "X[1](s2 - s_alpha) Z[1](s3 - s_beta) F[1]^2 ; X[6](s5 - s_beta) Z[6](s4 - s_alpha) F[6]^2"
                .into(),
    }
}

/// 4-chain, beamsplitter inputs on the middle nodes, outputs on the ends.
pub fn l4_lo_scenario() -> Scenario {
    let s2 = std::f64::consts::SQRT_2;
    Scenario {
        name: "l4-lo".into(),
        spec: linear_chain(4).expect("static topology"),
        family: Family::LinearOptical,
        fourier_cluster_prep: false,
        fourier_input_prep: false,
        nullifier_form: NullifierForm::Standard,
        outputs: vec![
            out(
                "q_mu",
                vec![(1.0, NodeP(1)), (s2, PortQ(Input::Alpha, 2))],
                vec![(1.0, InQ(Input::Alpha)), (1.0, Nullifier(1))],
            ),
            out(
                "p_mu",
                vec![
                    (-1.0, NodeQ(1)),
                    (s2, PortP(Input::Alpha, 1)),
                    (s2, PortQ(Input::Beta, 2)),
                ],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (1.0, Nullifier(2)),
                ],
            ),
            out(
                "q_nu",
                vec![(1.0, NodeP(4)), (s2, PortQ(Input::Beta, 2))],
                vec![(1.0, InQ(Input::Beta)), (1.0, Nullifier(4))],
            ),
            out(
                "p_nu",
                vec![
                    (-1.0, NodeQ(4)),
                    (s2, PortP(Input::Beta, 1)),
                    (s2, PortQ(Input::Alpha, 2)),
                ],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (1.0, Nullifier(3)),
                ],
            ),
        ],
        measured: vec![
            PortP(Input::Alpha, 1),
            PortQ(Input::Alpha, 2),
            PortP(Input::Beta, 1),
            PortQ(Input::Beta, 2),
        ],
        corrections:
            "X[1](sqrt2 s_alpha2) Z[1](sqrt2 (s_alpha1 + s_beta2)) Fd[1] ; X[4](sqrt2 s_beta2) Z[4](sqrt2 (s_beta1 + s_alpha2)) Fd[4]"
                .into(),
    }
}

/// 6-chain with beamsplitter inputs on nodes 3 and 4.
pub fn l6_lo_scenario() -> Scenario {
    let s2 = std::f64::consts::SQRT_2;
    Scenario {
        name: "l6-lo".into(),
        spec: linear_chain(6).expect("static topology"),
        family: Family::LinearOptical,
        fourier_cluster_prep: false,
        fourier_input_prep: false,
        nullifier_form: NullifierForm::Standard,
        outputs: vec![
            out(
                "q_mu",
                vec![(1.0, NodeQ(1)), (-1.0, NodeP(2)), (s2, PortQ(Input::Alpha, 1))],
                vec![(1.0, InQ(Input::Alpha)), (-1.0, Nullifier(2))],
            ),
            out(
                "p_mu",
                vec![
                    (1.0, NodeP(1)),
                    (s2, PortP(Input::Alpha, 2)),
                    (s2, PortQ(Input::Beta, 1)),
                ],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (1.0, Nullifier(1)),
                    (-1.0, Nullifier(3)),
                ],
            ),
            out(
                "q_nu",
                vec![(1.0, NodeQ(6)), (-1.0, NodeP(5)), (s2, PortQ(Input::Beta, 1))],
                vec![(1.0, InQ(Input::Beta)), (-1.0, Nullifier(5))],
            ),
            out(
                "p_nu",
                vec![
                    (1.0, NodeP(6)),
                    (s2, PortQ(Input::Alpha, 1)),
                    (s2, PortP(Input::Beta, 2)),
                ],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (1.0, Nullifier(6)),
                    (-1.0, Nullifier(4)),
                ],
            ),
        ],
        measured: vec![
            PortQ(Input::Alpha, 1),
            PortP(Input::Alpha, 2),
            PortQ(Input::Beta, 1),
            PortP(Input::Beta, 2),
            NodeP(2),
            NodeP(5),
        ],
        corrections:
            "X[1](sqrt2 s_alpha1 - s2) Z[1](sqrt2 (s_alpha2 + s_beta1)) ; X[6](sqrt2 s_beta1 - s5) Z[6](sqrt2 (s_alpha1 + s_beta2))"
                .into(),
    }
}

/// Parametric N-rail scenario for either family (uniform rail weights).
pub fn nrail_scenario(family: Family, n: usize) -> Result<Scenario> {
    let spec = nrail(n)?;
    let m = 2 * n + 4;
    let eta = 1.0 / n as f64;
    let arm1 = || 2..=n + 1;
    let arm2 = || n + 4..=2 * n + 3;
    let s2 = std::f64::consts::SQRT_2;

    let (outputs, measured, fourier_input_prep, corrections) = match family {
        Family::Canonical => {
            let mut q_mu_def = vec![(-1.0, NodeQ(1)), (-1.0, CoupledInP(Input::Alpha))];
            let mut q_mu_exp = vec![(1.0, InQ(Input::Alpha))];
            for k in arm1() {
                q_mu_def.push((eta, NodeP(k)));
                q_mu_exp.push((eta, Nullifier(k)));
            }
            let mut q_nu_def = vec![(-1.0, NodeQ(m)), (-1.0, CoupledInP(Input::Beta))];
            let mut q_nu_exp = vec![(1.0, InQ(Input::Beta))];
            for k in arm2() {
                q_nu_def.push((eta, NodeP(k)));
                q_nu_exp.push((eta, Nullifier(k)));
            }
            let outputs = vec![
                out("q_mu", q_mu_def, q_mu_exp),
                out(
                    "p_mu",
                    vec![(-1.0, NodeP(1)), (-1.0, CoupledInP(Input::Beta)), (1.0, NodeP(n + 2))],
                    vec![
                        (1.0, InP(Input::Alpha)),
                        (1.0, InQ(Input::Beta)),
                        (-1.0, Nullifier(1)),
                        (1.0, Nullifier(n + 2)),
                    ],
                ),
                out("q_nu", q_nu_def, q_nu_exp),
                out(
                    "p_nu",
                    vec![(-1.0, NodeP(m)), (-1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(n + 3))],
                    vec![
                        (1.0, InP(Input::Beta)),
                        (1.0, InQ(Input::Alpha)),
                        (-1.0, Nullifier(m)),
                        (1.0, Nullifier(n + 3)),
                    ],
                ),
            ];
            let mut measured = vec![CoupledInP(Input::Alpha), CoupledInP(Input::Beta)];
            measured.extend(arm1().map(NodeP));
            measured.push(NodeP(n + 2));
            measured.push(NodeP(n + 3));
            measured.extend(arm2().map(NodeP));
            let corrections = format!(
                "X[1](mean(s2..s{top1}) - s_alpha) Z[1](s{hub_a} - s_beta) F[1]^2 ; \
                 X[{m}](mean(s{lo2}..s{top2}) - s_beta) Z[{m}](s{hub_b} - s_alpha) F[{m}]^2",
                top1 = n + 1,
                hub_a = n + 2,
                lo2 = n + 4,
                top2 = 2 * n + 3,
                hub_b = n + 3,
            );
            (outputs, measured, true, corrections)
        }
        Family::LinearOptical => {
            let mut q_mu_def = vec![(1.0, NodeQ(1)), (s2, PortQ(Input::Alpha, 1))];
            let mut q_mu_exp = vec![(1.0, InQ(Input::Alpha))];
            for k in arm1() {
                q_mu_def.push((-eta, NodeP(k)));
                q_mu_exp.push((-eta, Nullifier(k)));
            }
            let mut q_nu_def = vec![(1.0, NodeQ(m)), (s2, PortQ(Input::Beta, 1))];
            let mut q_nu_exp = vec![(1.0, InQ(Input::Beta))];
            for k in arm2() {
                q_nu_def.push((-eta, NodeP(k)));
                q_nu_exp.push((-eta, Nullifier(k)));
            }
            let outputs = vec![
                out("q_mu", q_mu_def, q_mu_exp),
                out(
                    "p_mu",
                    vec![
                        (1.0, NodeP(1)),
                        (s2, PortP(Input::Alpha, 2)),
                        (s2, PortQ(Input::Beta, 1)),
                    ],
                    vec![
                        (1.0, InP(Input::Alpha)),
                        (1.0, InQ(Input::Beta)),
                        (1.0, Nullifier(1)),
                        (-1.0, Nullifier(n + 2)),
                    ],
                ),
                out("q_nu", q_nu_def, q_nu_exp),
                out(
                    "p_nu",
                    vec![
                        (1.0, NodeP(m)),
                        (s2, PortQ(Input::Alpha, 1)),
                        (s2, PortP(Input::Beta, 2)),
                    ],
                    vec![
                        (1.0, InP(Input::Beta)),
                        (1.0, InQ(Input::Alpha)),
                        (1.0, Nullifier(m)),
                        (-1.0, Nullifier(n + 3)),
                    ],
                ),
            ];
            let mut measured = vec![
                PortQ(Input::Alpha, 1),
                PortP(Input::Alpha, 2),
                PortQ(Input::Beta, 1),
                PortP(Input::Beta, 2),
            ];
            measured.extend(arm1().map(NodeP));
            measured.extend(arm2().map(NodeP));
            let corrections = format!(
                "X[1](sqrt2 s_alpha1 - mean(s2..s{top1})) Z[1](sqrt2 (s_alpha2 + s_beta1)) ; \
                 X[{m}](sqrt2 s_beta1 - mean(s{lo2}..s{top2})) Z[{m}](sqrt2 (s_alpha1 + s_beta2))",
                top1 = n + 1,
                lo2 = n + 4,
                top2 = 2 * n + 3,
            );
            (outputs, measured, false, corrections)
        }
    };

    Ok(Scenario {
        name: format!("nrail-{family}-{n}"),
        spec,
        family,
        fourier_cluster_prep: false,
        fourier_input_prep,
        nullifier_form: NullifierForm::Standard,
        outputs,
        measured,
        corrections,
    })
}

/// 4-chain whose nodes are all rotated by a forward Fourier gate before the
/// QND couplings; the inputs then need no preparation and the corrections
/// carry no Fourier gates at all.
pub fn l4_ft_scenario() -> Scenario {
    Scenario {
        name: "l4-ft".into(),
        spec: linear_chain(4).expect("static topology"),
        family: Family::Canonical,
        fourier_cluster_prep: true,
        fourier_input_prep: false,
        nullifier_form: NullifierForm::FourierTransformed,
        outputs: vec![
            out(
                "q_mu",
                vec![(1.0, NodeQ(1)), (1.0, NodeP(2))],
                vec![(1.0, InQ(Input::Alpha)), (1.0, Nullifier(1))],
            ),
            out(
                "p_mu",
                vec![(1.0, NodeP(1)), (1.0, CoupledInP(Input::Alpha)), (1.0, NodeP(3))],
                vec![
                    (1.0, InP(Input::Alpha)),
                    (1.0, InQ(Input::Beta)),
                    (1.0, Nullifier(2)),
                ],
            ),
            out(
                "q_nu",
                vec![(1.0, NodeQ(4)), (1.0, NodeP(3))],
                vec![(1.0, InQ(Input::Beta)), (1.0, Nullifier(4))],
            ),
            out(
                "p_nu",
                vec![(1.0, NodeP(4)), (1.0, CoupledInP(Input::Beta)), (1.0, NodeP(2))],
                vec![
                    (1.0, InP(Input::Beta)),
                    (1.0, InQ(Input::Alpha)),
                    (1.0, Nullifier(3)),
                ],
            ),
        ],
        measured: vec![
            CoupledInP(Input::Alpha),
            CoupledInP(Input::Beta),
            NodeP(2),
            NodeP(3),
        ],
        corrections: "X[1](s2) Z[1](s_alpha + s3) ; X[4](s3) Z[4](s_beta + s2)".into(),
    }
}

/// The built-in catalog: chain and small-rail arrangements of both families
/// plus the Fourier-rotated 4-chain variant.
pub fn builtin_scenarios() -> Vec<Scenario> {
    vec![
        l4_canonical_end_scenario(),
        l4_canonical_mid_scenario(),
        l6_canonical_scenario(),
        nrail_scenario(Family::Canonical, 2).expect("static rails"),
        nrail_scenario(Family::Canonical, 3).expect("static rails"),
        l4_lo_scenario(),
        l6_lo_scenario(),
        nrail_scenario(Family::LinearOptical, 2).expect("static rails"),
        nrail_scenario(Family::LinearOptical, 3).expect("static rails"),
        l4_ft_scenario(),
    ]
}

/// JSON catalog of scenarios: topology, attachments, measurement list, and
/// correction strings.
pub fn scenario_catalog_json(scenarios: &[Scenario]) -> serde_json::Value {
    let entries: Vec<_> = scenarios
        .iter()
        .map(|sc| {
            json!({
                "name": sc.name,
                "family": sc.family.to_string(),
                "topology": sc.spec.to_json(),
                "fourier_cluster_prep": sc.fourier_cluster_prep,
                "fourier_input_prep": sc.fourier_input_prep,
                "measured": sc.measured.iter().map(|m| m.to_string()).collect::<Vec<_>>(),
                "corrections": sc.corrections,
            })
        })
        .collect();
    json!({ "scenarios": entries })
}

/// Run the Fourier-rotated 4-chain variant and the mid-input reference
/// arrangement at squeezing r and compare both output covariances against
/// the shared closed forms a = (1+x)/4, b = (2+x)/4, c = 1/4 with
/// x = e^{-2r}. Returns the largest deviation found.
pub fn verify_ft_cluster_equivalence(r: f64) -> Result<f64> {
    let x = (-2.0 * r).exp();
    let a = (1.0 + x) / 4.0;
    let b = (2.0 + x) / 4.0;
    let c = 0.25;
    let mut worst = 0.0f64;
    for sc in [l4_ft_scenario(), l4_canonical_mid_scenario()] {
        let rep = run_scenario(&sc, r)?;
        let o = &rep.outputs;
        let reg = &o.registry;
        let checks = [
            (second_moment(&o.q_mu, &o.q_mu, reg)?, a),
            (second_moment(&o.q_nu, &o.q_nu, reg)?, a),
            (second_moment(&o.p_mu, &o.p_mu, reg)?, b),
            (second_moment(&o.p_nu, &o.p_nu, reg)?, b),
            (second_moment(&o.q_mu, &o.p_nu, reg)?, c),
            (second_moment(&o.p_mu, &o.q_nu, reg)?, c),
        ];
        for (got, expect) in checks {
            worst = worst.max((got - expect).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::nrail_outputs_canonical;
    use crate::lincluster::nrail_outputs_lo;

    #[test]
    fn builtin_scenarios_pass_at_several_squeezings() {
        for sc in builtin_scenarios() {
            for r in [0.2, 0.7, 1.5] {
                let rep = run_scenario(&sc, r).unwrap();
                assert!(
                    rep.max_residual <= IDENTITY_TOL,
                    "{} at r={r}: residual {}",
                    sc.name,
                    rep.max_residual
                );
            }
        }
    }

    #[test]
    fn parametric_single_rail_reproduces_the_six_chain() {
        let r = 0.6;
        let a = run_scenario(&l6_canonical_scenario(), r).unwrap();
        let b = run_scenario(&nrail_scenario(Family::Canonical, 1).unwrap(), r).unwrap();
        for (x, y) in a.outputs.quadratures().into_iter().zip(b.outputs.quadratures()) {
            assert!(x.approx_eq(y, 1e-14));
        }
        let a = run_scenario(&l6_lo_scenario(), r).unwrap();
        let b = run_scenario(&nrail_scenario(Family::LinearOptical, 1).unwrap(), r).unwrap();
        for (x, y) in a.outputs.quadratures().into_iter().zip(b.outputs.quadratures()) {
            assert!(x.approx_eq(y, 1e-14));
        }
    }

    #[test]
    fn scenario_outputs_match_module_closed_forms() {
        let r = 0.45;
        let rep = run_scenario(&nrail_scenario(Family::Canonical, 3).unwrap(), r).unwrap();
        let direct = nrail_outputs_canonical(3, r, None).unwrap();
        for (x, y) in rep.outputs.quadratures().into_iter().zip(direct.quadratures()) {
            assert!(x.approx_eq(y, 1e-13));
        }

        let rep = run_scenario(&nrail_scenario(Family::LinearOptical, 2).unwrap(), r).unwrap();
        let direct = nrail_outputs_lo(2, r, None).unwrap();
        for (x, y) in rep.outputs.quadratures().into_iter().zip(direct.quadratures()) {
            assert!(x.approx_eq(y, 1e-13));
        }
    }

    #[test]
    fn tampered_definition_is_rejected() {
        let mut sc = l4_lo_scenario();
        sc.outputs[0].definition[0].0 = 1.5;
        match run_scenario(&sc, 0.5) {
            Err(Error::ScenarioIdentity { output, .. }) => assert_eq!(output, "q_mu"),
            other => panic!("expected identity failure, got {other:?}"),
        }
    }

    #[test]
    fn ft_variant_matches_reference_covariance() {
        for r in [0.3, 1.0] {
            assert!(verify_ft_cluster_equivalence(r).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn catalog_export_lists_every_scenario() {
        let scenarios = builtin_scenarios();
        let v = scenario_catalog_json(&scenarios);
        let entries = v["scenarios"].as_array().unwrap();
        assert_eq!(entries.len(), scenarios.len());
        let names: Vec<_> = entries.iter().map(|e| e["name"].as_str().unwrap()).collect();
        assert!(names.contains(&"l4-ft"));
        assert!(names.contains(&"nrail-lo-3"));
        let unique: std::collections::BTreeSet<_> = names.iter().collect();
        assert_eq!(unique.len(), names.len());
    }

    #[test]
    fn rail_scenarios_scale_with_n() {
        for n in [4, 6] {
            for family in [Family::Canonical, Family::LinearOptical] {
                let sc = nrail_scenario(family, n).unwrap();
                let rep = run_scenario(&sc, 0.5).unwrap();
                assert!(rep.max_residual <= IDENTITY_TOL, "{}", sc.name);
            }
        }
    }
}
