//! Linear-optical cluster synthesis.
//!
//! A cluster over graph T can be produced without online gates by sending M
//! momentum-squeezed seeds through one passive network U. Writing row k of U
//! as alpha_k + i*beta_k, the node nullifiers drop every seed position
//! exactly when beta_k equals the sum of alpha_l over the neighbors of k and
//! the Gram matrix G = alpha*alpha^T satisfies G + T G T = I and G T = T G
//! (elementwise: G_kl plus the neighbor-pair block sum equals delta_kl, and
//! the two one-sided neighbor sums agree). This module solves those
//! constraints, factors G into overlap rows, assembles U, runs seeds through
//! it, and checks the resulting nullifier algebra.

use nalgebra::{Complex, DMatrix, DVector, SymmetricEigen};
use serde_json::json;

use crate::canonical::{nullifier, ClusterState, Family, TeleportOutputs, WeightVector};
use crate::gates::{apply_network, ModeState};
use crate::qalg::{second_moment, ModeRegistry, OperatorExpr};
use crate::topology::{common_neighbors, ClusterSpec, INPUT_ALPHA, INPUT_BETA};
use crate::{Error, Result};

/// Largest admissible entry of the constraint residuals after a solve.
pub const CONSTRAINT_TOL: f64 = 1e-10;
/// Largest admissible entry of U U^dagger - I.
pub const UNITARITY_TOL: f64 = 1e-10;
/// Largest admissible seed-position coefficient in a nullifier.
pub const MOMENTUM_TOL: f64 = 1e-12;
/// Eigenvalues of G above this (negative) floor are clipped to zero.
const PSD_TOL: f64 = 1e-10;

/// Node count up to which the constraints are solved as a literal
/// least-squares system over all M^2 entries of G. Larger graphs use the
/// equivalent resolvent form G = (I + T^2)^{-1}, which the commuting
/// constraint pair pins down uniquely.
const LS_NODE_LIMIT: usize = 24;

/// Symmetric Gram matrix of seed-row overlaps.
#[derive(Debug, Clone, PartialEq)]
pub struct GMatrix {
    m: DMatrix<f64>,
}

impl GMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<f64>> = (0..self.m.nrows())
            .map(|k| self.m.row(k).iter().copied().collect())
            .collect();
        json!({ "dim": self.dim(), "rows": rows })
    }

    /// Long-format CSV `row,col,value` with 1-based node indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,value\n");
        for k in 0..self.m.nrows() {
            for l in 0..self.m.ncols() {
                out.push_str(&format!("{},{},{:.16e}\n", k + 1, l + 1, self.m[(k, l)]));
            }
        }
        out
    }
}

/// Real factor of G: rows are the overlap vectors alpha_k with
/// alpha * alpha^T = G.
#[derive(Debug, Clone, PartialEq)]
pub struct AlphaMatrix {
    m: DMatrix<f64>,
}

impl AlphaMatrix {
    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn from_rows(m: DMatrix<f64>) -> Self {
        Self { m }
    }
}

/// Complex network matrix, checked unitary on construction.
#[derive(Debug, Clone, PartialEq)]
pub struct UMatrix {
    m: DMatrix<Complex<f64>>,
}

impl UMatrix {
    /// Wrap a square complex matrix, rejecting anything whose U U^dagger
    /// deviates from the identity by more than the unitarity tolerance.
    pub fn from_complex(m: DMatrix<Complex<f64>>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch {
                expected: m.nrows(),
                got: m.ncols(),
            });
        }
        let u = Self { m };
        let residual = u.unitarity_residual();
        if residual > UNITARITY_TOL {
            return Err(Error::NotUnitary { residual });
        }
        Ok(u)
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn re(&self, k: usize, l: usize) -> f64 {
        self.m[(k, l)].re
    }

    pub fn im(&self, k: usize, l: usize) -> f64 {
        self.m[(k, l)].im
    }

    pub fn as_matrix(&self) -> &DMatrix<Complex<f64>> {
        &self.m
    }

    /// Largest entry modulus of U U^dagger - I.
    pub fn unitarity_residual(&self) -> f64 {
        let p = &self.m * self.m.adjoint() - DMatrix::identity(self.dim(), self.dim());
        p.iter().fold(0.0f64, |w, z| w.max(z.norm()))
    }

    pub fn to_json(&self) -> serde_json::Value {
        let rows: Vec<Vec<[f64; 2]>> = (0..self.dim())
            .map(|k| (0..self.dim()).map(|l| [self.re(k, l), self.im(k, l)]).collect())
            .collect();
        json!({ "dim": self.dim(), "rows": rows })
    }

    /// Long-format CSV `row,col,re,im` with 1-based node indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("row,col,re,im\n");
        for k in 0..self.dim() {
            for l in 0..self.dim() {
                out.push_str(&format!(
                    "{},{},{:.16e},{:.16e}\n",
                    k + 1,
                    l + 1,
                    self.re(k, l),
                    self.im(k, l)
                ));
            }
        }
        out
    }
}

fn adjacency(spec: &ClusterSpec) -> DMatrix<f64> {
    let m = spec.node_count();
    let mut t = DMatrix::zeros(m, m);
    for (a, b) in spec.edges() {
        t[(a - 1, b - 1)] = 1.0;
        t[(b - 1, a - 1)] = 1.0;
    }
    t
}

/// Largest residual entry over both constraint sets for a candidate G.
fn constraint_residual(g: &DMatrix<f64>, t: &DMatrix<f64>) -> f64 {
    let m = g.nrows();
    let set1 = g + t * g * t - DMatrix::identity(m, m);
    let set2 = g * t - t * g;
    set1.iter()
        .chain(set2.iter())
        .fold(0.0f64, |w, v| w.max(v.abs()))
}

/// Literal least-squares solve: stack one equation per (k,l) pair for each
/// constraint set, unknowns being all M^2 entries of G, and solve the normal
/// equations. The system has full column rank (its Gram spectrum is bounded
/// below by 1), so Cholesky applies.
fn solve_ls(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = t.nrows();
    let mm = m * m;
    let idx = |k: usize, l: usize| k * m + l;
    let mut e = DMatrix::zeros(2 * mm, mm);
    let mut b = DVector::zeros(2 * mm);
    for k in 0..m {
        for l in 0..m {
            let r1 = idx(k, l);
            let r2 = mm + idx(k, l);
            e[(r1, idx(k, l))] += 1.0;
            b[r1] = if k == l { 1.0 } else { 0.0 };
            for mi in 0..m {
                if t[(k, mi)] == 0.0 {
                    continue;
                }
                for n in 0..m {
                    e[(r1, idx(mi, n))] += t[(k, mi)] * t[(n, l)];
                }
            }
            for n in 0..m {
                e[(r2, idx(k, n))] += t[(n, l)];
                e[(r2, idx(n, l))] -= t[(k, n)];
            }
        }
    }
    let ete = e.transpose() * &e;
    let etb = e.transpose() * b;
    let x = ete
        .cholesky()
        .map(|c| c.solve(&etb))
        .ok_or(Error::SingularCovariance)?;
    let mut g = DMatrix::zeros(m, m);
    for k in 0..m {
        for l in 0..m {
            g[(k, l)] = x[idx(k, l)];
        }
    }
    Ok(g)
}

/// Closed-form route: with T symmetric, G + TGT = I and GT = TG force
/// G = (I + T^2)^{-1}.
fn solve_resolvent(t: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let m = t.nrows();
    let a = DMatrix::identity(m, m) + t * t;
    a.lu()
        .solve(&DMatrix::identity(m, m))
        .ok_or(Error::SingularCovariance)
}

/// Solve the overlap constraints for `spec` and return the Gram matrix G.
///
/// Small graphs go through the literal least-squares encoding, larger ones
/// through the equivalent resolvent; either way the full residual of both
/// constraint sets is re-checked and must come in at or below 1e-10.
pub fn solve_geometric_constraints(spec: &ClusterSpec) -> Result<GMatrix> {
    let t = adjacency(spec);
    let g = if spec.node_count() <= LS_NODE_LIMIT {
        solve_ls(&t)?
    } else {
        solve_resolvent(&t)?
    };
    let residual = constraint_residual(&g, &t);
    if residual > CONSTRAINT_TOL {
        return Err(Error::ConstraintResidual { residual });
    }
    Ok(GMatrix { m: g })
}

/// Factor G into overlap rows via its eigensystem: A = Q sqrt(Lambda).
/// Eigenvalues below -1e-10 reject the matrix; small negatives clip to zero.
pub fn factor_alpha(g: &GMatrix) -> Result<AlphaMatrix> {
    let eig = SymmetricEigen::new(g.m.clone());
    let mut roots = eig.eigenvalues.clone();
    for v in roots.iter_mut() {
        if *v < -PSD_TOL {
            return Err(Error::NotPositiveSemidefinite { eigenvalue: *v });
        }
        *v = v.max(0.0).sqrt();
    }
    Ok(AlphaMatrix {
        m: &eig.eigenvectors * DMatrix::from_diagonal(&roots),
    })
}

/// Alternative factor: lower-triangular Cholesky rows. Any factor frame
/// differs from another by a right orthogonal rotation and yields the same
/// network statistics.
pub fn factor_alpha_lower(g: &GMatrix) -> Result<AlphaMatrix> {
    match g.m.clone().cholesky() {
        Some(c) => Ok(AlphaMatrix { m: c.l() }),
        None => {
            let min = SymmetricEigen::new(g.m.clone()).eigenvalues.min();
            Err(Error::NotPositiveSemidefinite { eigenvalue: min })
        }
    }
}

/// Assemble the network matrix: row k is alpha_k + i * sum of neighbor
/// alpha rows. The result must pass the unitarity gate.
#[allow(non_snake_case)]
pub fn assemble_U(spec: &ClusterSpec, alpha: &AlphaMatrix) -> Result<UMatrix> {
    let m = spec.node_count();
    if alpha.m.nrows() != m || alpha.m.ncols() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: alpha.m.nrows().max(alpha.m.ncols()),
        });
    }
    let mut u = DMatrix::from_element(m, m, Complex::new(0.0, 0.0));
    for k in 1..=m {
        let nbrs = spec.neighbors(k)?;
        for col in 0..m {
            let mut im = 0.0;
            for &l in nbrs {
                im += alpha.m[(l - 1, col)];
            }
            u[(k - 1, col)] = Complex::new(alpha.m[(k - 1, col)], im);
        }
    }
    UMatrix::from_complex(u)
}

/// Drive uniformly squeezed seeds through an already-assembled network.
/// Useful when sweeping the squeezing parameter at fixed topology: the
/// network only depends on the graph.
pub fn cluster_from_unitary(spec: &ClusterSpec, r: f64, u: &UMatrix) -> Result<ClusterState> {
    let m = spec.node_count();
    if u.dim() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: u.dim(),
        });
    }
    let mut registry = ModeRegistry::new();
    let mut seeds = Vec::with_capacity(m);
    for _ in 0..m {
        let id = registry.add_squeezed(r)?;
        seeds.push(ModeState::fresh(id));
    }
    let nodes = apply_network(u, &seeds)?;
    Ok(ClusterState::from_parts(
        spec.clone(),
        nodes,
        registry,
        Family::LinearOptical,
    ))
}

/// Full linear-optical construction for `spec` at uniform squeezing r:
/// solve G, factor, assemble U, run the seeds through it.
pub fn build_lo_cluster(spec: &ClusterSpec, r: f64) -> Result<ClusterState> {
    let g = solve_geometric_constraints(spec)?;
    let alpha = factor_alpha(&g)?;
    let u = assemble_U(spec, &alpha)?;
    cluster_from_unitary(spec, r, &u)
}

/// Nullifiers of every node of a linear-optical cluster, checked to be pure
/// momentum combinations of the seeds (position coefficients at or below
/// 1e-12).
pub fn nullifiers_lo(state: &ClusterState) -> Result<Vec<OperatorExpr>> {
    if state.family() != Family::LinearOptical {
        return Err(Error::NotLinearOptical);
    }
    let m = state.spec().node_count();
    let mut out = Vec::with_capacity(m);
    for k in 1..=m {
        let delta = nullifier(state, k)?;
        let coeff = delta.max_q_weight_on(0..m);
        if coeff > MOMENTUM_TOL {
            return Err(Error::NullifierNotMomentum { node: k, coeff });
        }
        out.push(delta);
    }
    Ok(out)
}

/// Check <delta_k delta_l> = (overlap_kl + delta_kl) e^{-2r}/4 across all
/// node pairs, where overlap_kl counts common neighbors (the degree on the
/// diagonal). Returns the largest absolute deviation.
pub fn verify_correlator_identity(state: &ClusterState) -> Result<f64> {
    let r = state.registry().uniform_squeezing()?;
    let x = (-2.0 * r).exp();
    let deltas = nullifiers_lo(state)?;
    let spec = state.spec();
    let m = spec.node_count();
    let mut worst = 0.0f64;
    for k in 0..m {
        for l in k..m {
            let overlap = common_neighbors(spec, k + 1, l + 1)? as f64;
            let kron = if k == l { 1.0 } else { 0.0 };
            let expect = (overlap + kron) * x / 4.0;
            let got = second_moment(&deltas[k], &deltas[l], state.registry())?;
            worst = worst.max((got - expect).abs());
        }
    }
    Ok(worst)
}

/// Covariance of the first-arm rail nullifiers (nodes 2..=N+1) of an N-rail
/// cluster built in the given family at uniform squeezing r. This is the
/// matrix rail-weight optimization runs on.
pub fn midrail_noise_cov(family: Family, n: usize, r: f64) -> Result<DMatrix<f64>> {
    let spec = crate::topology::nrail(n)?;
    let state = match family {
        Family::Canonical => {
            crate::canonical::build_canonical(&spec, &crate::canonical::Squeezing::Uniform(r))?
        }
        Family::LinearOptical => build_lo_cluster(&spec, r)?,
    };
    let deltas: Vec<OperatorExpr> = (2..=n + 1)
        .map(|k| nullifier(&state, k))
        .collect::<Result<_>>()?;
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = second_moment(&deltas[i], &deltas[j], state.registry())?;
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    Ok(c)
}

/// Teleported outputs read off a prebuilt N-rail cluster of either family.
///
/// The q outputs carry the weighted arm nullifier sums (added for the
/// canonical family, subtracted for the linear-optical one), the p outputs
/// carry the end/hub nullifier pair with family-matched signs, and each
/// input's position rides on the opposite output's momentum.
pub fn nrail_outputs_from_state(
    state: &mut ClusterState,
    weights: Option<&WeightVector>,
) -> Result<TeleportOutputs> {
    let m = state.spec().node_count();
    if m < 6 || !m.is_multiple_of(2) {
        return Err(Error::InvalidTopology(format!(
            "N-rail output extraction needs 2N+4 nodes, got {m}"
        )));
    }
    let n = (m - 4) / 2;
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
    // rail-sum sign and end/hub sign pattern per family
    let (rail_sign, end_sign) = match state.family() {
        Family::Canonical => (1.0, -1.0),
        Family::LinearOptical => (-1.0, 1.0),
    };
    let (_, input_a) = state.add_coherent_input(INPUT_ALPHA);
    let (_, input_b) = state.add_coherent_input(INPUT_BETA);

    let mut q_mu = input_a.q.clone();
    for (k, &e) in (2..=n + 1).zip(eta.eta()) {
        q_mu.add_scaled_in_place(rail_sign * e, &nullifier(state, k)?);
    }
    let mut p_mu = input_a.p.add(&input_b.q);
    p_mu.add_scaled_in_place(end_sign, &nullifier(state, 1)?);
    p_mu.add_scaled_in_place(-end_sign, &nullifier(state, n + 2)?);

    let mut q_nu = input_b.q.clone();
    for (k, &e) in (n + 4..=2 * n + 3).zip(eta.eta()) {
        q_nu.add_scaled_in_place(rail_sign * e, &nullifier(state, k)?);
    }
    let mut p_nu = input_b.p.add(&input_a.q);
    p_nu.add_scaled_in_place(end_sign, &nullifier(state, 2 * n + 4)?);
    p_nu.add_scaled_in_place(-end_sign, &nullifier(state, n + 3)?);

    Ok(TeleportOutputs {
        q_mu,
        p_mu,
        q_nu,
        p_nu,
        registry: state.registry().clone(),
    })
}

/// Teleported outputs of the linear-optical N-rail cluster at uniform
/// squeezing r. `weights` defaults to uniform 1/N.
pub fn nrail_outputs_lo(
    n: usize,
    r: f64,
    weights: Option<&WeightVector>,
) -> Result<TeleportOutputs> {
    let spec = crate::topology::nrail(n)?;
    let mut state = build_lo_cluster(&spec, r)?;
    nrail_outputs_from_state(&mut state, weights)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::canonical::{build_canonical, Squeezing};
    use crate::topology::{linear_chain, nrail};
    use approx::assert_abs_diff_eq;

    fn max_entry_diff(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
        (a - b).iter().fold(0.0f64, |w, v| w.max(v.abs()))
    }

    fn g_fixture_l4() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            4,
            4,
            &[
                3.0, 0.0, -1.0, 0.0, //
                0.0, 2.0, 0.0, -1.0, //
                -1.0, 0.0, 2.0, 0.0, //
                0.0, -1.0, 0.0, 3.0,
            ],
        ) / 5.0
    }

    fn g_fixture_l6() -> DMatrix<f64> {
        DMatrix::from_row_slice(
            6,
            6,
            &[
                8.0, 0.0, -3.0, 0.0, 1.0, 0.0, //
                0.0, 5.0, 0.0, -2.0, 0.0, 1.0, //
                -3.0, 0.0, 6.0, 0.0, -2.0, 0.0, //
                0.0, -2.0, 0.0, 6.0, 0.0, -3.0, //
                1.0, 0.0, -2.0, 0.0, 5.0, 0.0, //
                0.0, 1.0, 0.0, -3.0, 0.0, 8.0,
            ],
        ) / 13.0
    }

    #[test]
    fn solved_gram_matches_chain_fixtures() {
        let g4 = solve_geometric_constraints(&linear_chain(4).unwrap()).unwrap();
        assert!(max_entry_diff(g4.as_matrix(), &g_fixture_l4()) <= 1e-12);

        let g6 = solve_geometric_constraints(&linear_chain(6).unwrap()).unwrap();
        assert!(max_entry_diff(g6.as_matrix(), &g_fixture_l6()) <= 1e-12);
    }

    #[test]
    fn both_solver_routes_agree() {
        let mut specs = vec![linear_chain(4).unwrap(), linear_chain(6).unwrap()];
        for n in 1..=10 {
            specs.push(nrail(n).unwrap());
        }
        for spec in specs {
            let t = adjacency(&spec);
            let ls = solve_ls(&t).unwrap();
            let res = solve_resolvent(&t).unwrap();
            assert!(
                max_entry_diff(&ls, &res) <= 1e-12,
                "routes disagree on {} nodes",
                spec.node_count()
            );
        }
    }

    #[test]
    fn large_graphs_take_the_resolvent_route() {
        // 26 nodes exceeds the least-squares cutoff
        let spec = nrail(11).unwrap();
        let g = solve_geometric_constraints(&spec).unwrap();
        let t = adjacency(&spec);
        assert!(constraint_residual(g.as_matrix(), &t) <= 1e-12);
    }

    #[test]
    fn factors_reproduce_gram() {
        let g = solve_geometric_constraints(&nrail(2).unwrap()).unwrap();
        for alpha in [factor_alpha(&g).unwrap(), factor_alpha_lower(&g).unwrap()] {
            let back = alpha.as_matrix() * alpha.as_matrix().transpose();
            assert!(max_entry_diff(&back, g.as_matrix()) <= 1e-12);
        }
    }

    #[test]
    fn indefinite_matrix_rejected_by_both_factorizations() {
        let g = GMatrix {
            m: DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]),
        };
        assert!(matches!(
            factor_alpha(&g),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
        assert!(matches!(
            factor_alpha_lower(&g),
            Err(Error::NotPositiveSemidefinite { .. })
        ));
    }

    #[test]
    fn assembled_network_is_unitary_for_chains_and_rails() {
        for spec in [linear_chain(4).unwrap(), linear_chain(6).unwrap(), nrail(3).unwrap()] {
            let g = solve_geometric_constraints(&spec).unwrap();
            let alpha = factor_alpha(&g).unwrap();
            let u = assemble_U(&spec, &alpha).unwrap();
            assert!(u.unitarity_residual() <= 1e-12);
        }
    }

    #[test]
    fn wrong_overlaps_fail_the_unitarity_gate() {
        let spec = linear_chain(4).unwrap();
        let alpha = AlphaMatrix::from_rows(DMatrix::identity(4, 4));
        assert!(matches!(
            assemble_U(&spec, &alpha),
            Err(Error::NotUnitary { .. })
        ));
    }

    #[test]
    fn nullifiers_are_momentum_only_and_satisfy_the_correlator_identity() {
        for spec in [linear_chain(4).unwrap(), linear_chain(6).unwrap(), nrail(2).unwrap()] {
            let state = build_lo_cluster(&spec, 0.6).unwrap();
            let deltas = nullifiers_lo(&state).unwrap();
            assert_eq!(deltas.len(), spec.node_count());
            assert!(verify_correlator_identity(&state).unwrap() <= 1e-12);
        }
    }

    #[test]
    fn canonical_states_rejected_by_lo_checks() {
        let state = build_canonical(&linear_chain(4).unwrap(), &Squeezing::Uniform(0.3)).unwrap();
        assert!(matches!(nullifiers_lo(&state), Err(Error::NotLinearOptical)));
    }

    /// Pin the whole pipeline against one explicit hand-checked frame: a
    /// known factor of the 4-chain Gram matrix and the network and nullifier
    /// coefficients it induces.
    #[test]
    fn explicit_four_chain_frame() {
        let s2 = std::f64::consts::SQRT_2;
        let s10 = 10.0f64.sqrt();
        let alpha = AlphaMatrix::from_rows(DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0 / s2, 0.0, -1.0 / s10, 0.0, //
                0.0, (2.0f64 / 5.0).sqrt(), 0.0, 0.0, //
                0.0, 0.0, (2.0f64 / 5.0).sqrt(), 0.0, //
                0.0, -1.0 / s10, 0.0, 1.0 / s2,
            ],
        ));
        let outer = alpha.as_matrix() * alpha.as_matrix().transpose();
        assert!(max_entry_diff(&outer, &g_fixture_l4()) <= 1e-15);

        let spec = linear_chain(4).unwrap();
        let u = assemble_U(&spec, &alpha).unwrap();
        let expect = DMatrix::from_row_slice(
            4,
            4,
            &[
                Complex::new(1.0 / s2, 0.0),
                Complex::new(0.0, 2.0 / s10),
                Complex::new(-1.0 / s10, 0.0),
                Complex::new(0.0, 0.0),
                //
                Complex::new(0.0, 1.0 / s2),
                Complex::new(2.0 / s10, 0.0),
                Complex::new(0.0, 1.0 / s10),
                Complex::new(0.0, 0.0),
                //
                Complex::new(0.0, 0.0),
                Complex::new(0.0, 1.0 / s10),
                Complex::new(2.0 / s10, 0.0),
                Complex::new(0.0, 1.0 / s2),
                //
                Complex::new(0.0, 0.0),
                Complex::new(-1.0 / s10, 0.0),
                Complex::new(0.0, 2.0 / s10),
                Complex::new(1.0 / s2, 0.0),
            ],
        );
        let diff = (u.as_matrix() - expect)
            .iter()
            .fold(0.0f64, |w, z| w.max(z.norm()));
        assert!(diff <= 1e-15);

        let state = cluster_from_unitary(&spec, 0.8, &u).unwrap();
        let deltas = nullifiers_lo(&state).unwrap();
        let d1 = OperatorExpr::p(0).scale(s2);
        let d2 = OperatorExpr::p(1).scale(5.0 / s10).add(&OperatorExpr::p(3).scale(1.0 / s2));
        let d3 = OperatorExpr::p(0).scale(1.0 / s2).add(&OperatorExpr::p(2).scale(5.0 / s10));
        let d4 = OperatorExpr::p(3).scale(s2);
        for (got, expect) in deltas.iter().zip([d1, d2, d3, d4]) {
            assert!(got.approx_eq(&expect, 1e-12));
        }
    }

    #[test]
    fn factor_frames_give_identical_nullifier_statistics() {
        let spec = nrail(2).unwrap();
        let g = solve_geometric_constraints(&spec).unwrap();
        let r = 0.5;
        let mut covs = Vec::new();
        for alpha in [factor_alpha(&g).unwrap(), factor_alpha_lower(&g).unwrap()] {
            let u = assemble_U(&spec, &alpha).unwrap();
            let state = cluster_from_unitary(&spec, r, &u).unwrap();
            covs.push(crate::canonical::nullifier_covariance(&state).unwrap());
        }
        assert!(max_entry_diff(&covs[0], &covs[1]) <= 1e-12);
    }

    #[test]
    fn midrail_covariance_closed_forms() {
        let n = 3;
        let r: f64 = 0.35;
        let x = (-2.0 * r).exp();
        let canon = midrail_noise_cov(Family::Canonical, n, r).unwrap();
        let lo = midrail_noise_cov(Family::LinearOptical, n, r).unwrap();
        for i in 0..n {
            for j in 0..n {
                let expect_c = if i == j { x / 4.0 } else { 0.0 };
                let expect_l = if i == j { 3.0 * x / 4.0 } else { 2.0 * x / 4.0 };
                assert_abs_diff_eq!(canon[(i, j)], expect_c, epsilon = 1e-13);
                assert_abs_diff_eq!(lo[(i, j)], expect_l, epsilon = 1e-13);
            }
        }
    }

    #[test]
    fn lo_rail_output_moments() {
        for n in [1usize, 2, 4] {
            let r: f64 = 0.45;
            let x = (-2.0 * r).exp();
            let out = nrail_outputs_lo(n, r, None).unwrap();
            let reg = &out.registry;
            let nf = n as f64;
            let a = second_moment(&out.q_mu, &out.q_mu, reg).unwrap();
            let b = second_moment(&out.p_mu, &out.p_mu, reg).unwrap();
            let c = second_moment(&out.q_mu, &out.p_nu, reg).unwrap();
            assert_abs_diff_eq!(a, (1.0 + (2.0 * nf + 1.0) / nf * x) / 4.0, epsilon = 1e-13);
            assert_abs_diff_eq!(b, (2.0 + 3.0 * x) / 4.0, epsilon = 1e-13);
            assert_abs_diff_eq!(c, (1.0 + x) / 4.0, epsilon = 1e-13);
            let a2 = second_moment(&out.q_nu, &out.q_nu, reg).unwrap();
            let c2 = second_moment(&out.p_mu, &out.q_nu, reg).unwrap();
            assert_abs_diff_eq!(a, a2, epsilon = 1e-13);
            assert_abs_diff_eq!(c, c2, epsilon = 1e-13);
        }
    }

    #[test]
    fn from_state_route_matches_canonical_closed_form() {
        let n = 3;
        let r = 0.6;
        let spec = nrail(n).unwrap();
        let mut state = build_canonical(&spec, &Squeezing::Uniform(r)).unwrap();
        let via_state = nrail_outputs_from_state(&mut state, None).unwrap();
        let direct = crate::canonical::nrail_outputs_canonical(n, r, None).unwrap();
        for (a, b) in via_state.quadratures().into_iter().zip(direct.quadratures()) {
            assert!(a.approx_eq(b, 1e-15));
        }
    }

    #[test]
    fn export_formats() {
        let spec = linear_chain(4).unwrap();
        let g = solve_geometric_constraints(&spec).unwrap();
        let gj = g.to_json();
        assert_eq!(gj["dim"], 4);
        assert_abs_diff_eq!(gj["rows"][0][0].as_f64().unwrap(), 0.6, epsilon = 1e-12);
        let gc = g.to_csv();
        assert!(gc.starts_with("row,col,value\n"));
        assert_eq!(gc.lines().count(), 17);

        let u = assemble_U(&spec, &factor_alpha(&g).unwrap()).unwrap();
        let uj = u.to_json();
        assert_eq!(uj["rows"][0][0].as_array().unwrap().len(), 2);
        let uc = u.to_csv();
        assert!(uc.starts_with("row,col,re,im\n"));
        assert_eq!(uc.lines().count(), 17);
    }
}
