//! Linear-combination algebra for quadrature operators.
//!
//! Every operator in the engine is a real linear combination of the position
//! and momentum quadratures of a set of base modes: the offline-squeezed seed
//! modes that make up a cluster and the coherent input modes that get
//! teleported. Commutators and symmetrized second moments are exact bilinear
//! forms over those coefficient vectors, so no state vectors ever appear.

use std::collections::BTreeMap;

use crate::{Error, Result};

/// Scale of the canonical commutator: [q, p] = i * HBAR with HBAR = 1/2.
pub const HBAR: f64 = 0.5;

/// Vacuum quadrature variance at this scaling.
pub const VACUUM_VARIANCE: f64 = 0.25;

/// What kind of base mode an id refers to.
#[derive(Debug, Clone, PartialEq)]
pub enum BaseModeKind {
    /// Momentum-squeezed vacuum: <p^2> = e^{-2r}/4, <q^2> = e^{+2r}/4.
    SqueezedVacuum { r: f64 },
    /// Coherent input: <q^2> = <p^2> = 1/4.
    CoherentInput { label: String },
}

/// One base mode of the registry.
#[derive(Debug, Clone, PartialEq)]
pub struct BaseMode {
    pub id: usize,
    pub kind: BaseModeKind,
}

impl BaseMode {
    /// (qq, pp) second moments; the symmetrized qp moment is zero for both kinds.
    fn moments(&self) -> (f64, f64) {
        match &self.kind {
            BaseModeKind::SqueezedVacuum { r } => {
                ((2.0 * r).exp() * VACUUM_VARIANCE, (-2.0 * r).exp() * VACUUM_VARIANCE)
            }
            BaseModeKind::CoherentInput { .. } => (VACUUM_VARIANCE, VACUUM_VARIANCE),
        }
    }
}

/// Ordered collection of base modes; ids are assigned sequentially from 0.
#[derive(Debug, Clone, Default)]
pub struct ModeRegistry {
    modes: Vec<BaseMode>,
}

impl ModeRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register a momentum-squeezed seed mode and return its id.
    pub fn add_squeezed(&mut self, r: f64) -> Result<usize> {
        if !r.is_finite() || r < 0.0 {
            return Err(Error::InvalidSqueezing(r));
        }
        let id = self.modes.len();
        self.modes.push(BaseMode {
            id,
            kind: BaseModeKind::SqueezedVacuum { r },
        });
        Ok(id)
    }

    /// Register a coherent input mode and return its id.
    pub fn add_coherent(&mut self, label: &str) -> usize {
        let id = self.modes.len();
        self.modes.push(BaseMode {
            id,
            kind: BaseModeKind::CoherentInput {
                label: label.to_string(),
            },
        });
        id
    }

    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, id: usize) -> Result<&BaseMode> {
        self.modes.get(id).ok_or(Error::UnknownMode { id })
    }

    pub fn modes(&self) -> &[BaseMode] {
        &self.modes
    }

    /// The common squeezing parameter of all seed modes.
    ///
    /// Errors if the registry holds no squeezed mode or if seeds differ.
    pub fn uniform_squeezing(&self) -> Result<f64> {
        let mut found: Option<f64> = None;
        for m in &self.modes {
            if let BaseModeKind::SqueezedVacuum { r } = m.kind {
                match found {
                    None => found = Some(r),
                    Some(prev) if prev == r => {}
                    Some(_) => return Err(Error::NonUniformSqueezing),
                }
            }
        }
        found.ok_or(Error::NonUniformSqueezing)
    }
}

/// A quadrature operator as a sparse real linear combination
/// sum_l qcoef[l]*qbar_l + pcoef[l]*pbar_l over base-mode quadratures.
#[derive(Debug, Clone, Default)]
pub struct OperatorExpr {
    qcoef: BTreeMap<usize, f64>,
    pcoef: BTreeMap<usize, f64>,
}

impl OperatorExpr {
    pub fn zero() -> Self {
        Self::default()
    }

    /// The bare position quadrature of one base mode.
    pub fn q(id: usize) -> Self {
        let mut e = Self::default();
        e.qcoef.insert(id, 1.0);
        e
    }

    /// The bare momentum quadrature of one base mode.
    pub fn p(id: usize) -> Self {
        let mut e = Self::default();
        e.pcoef.insert(id, 1.0);
        e
    }

    pub fn qcoef(&self) -> &BTreeMap<usize, f64> {
        &self.qcoef
    }

    pub fn pcoef(&self) -> &BTreeMap<usize, f64> {
        &self.pcoef
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled_in_place(1.0, other);
        out
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.add_scaled_in_place(-1.0, other);
        out
    }

    pub fn scale(&self, s: f64) -> Self {
        let mut out = self.clone();
        for v in out.qcoef.values_mut() {
            *v *= s;
        }
        for v in out.pcoef.values_mut() {
            *v *= s;
        }
        out
    }

    /// self += s * other, merging coefficient maps.
    pub fn add_scaled_in_place(&mut self, s: f64, other: &Self) {
        for (&id, &c) in &other.qcoef {
            *self.qcoef.entry(id).or_insert(0.0) += s * c;
        }
        for (&id, &c) in &other.pcoef {
            *self.pcoef.entry(id).or_insert(0.0) += s * c;
        }
    }

    /// sum_i coeffs[i] * terms[i].
    pub fn linear_combination(terms: &[(f64, &Self)]) -> Self {
        let mut out = Self::default();
        for &(s, t) in terms {
            out.add_scaled_in_place(s, t);
        }
        out
    }

    /// Largest absolute coefficient difference against `other`, over the
    /// union of both q and p supports.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        fn side(a: &BTreeMap<usize, f64>, b: &BTreeMap<usize, f64>) -> f64 {
            let mut worst = 0.0f64;
            for (&id, &c) in a {
                worst = worst.max((c - b.get(&id).copied().unwrap_or(0.0)).abs());
            }
            for (&id, &c) in b {
                if !a.contains_key(&id) {
                    worst = worst.max(c.abs());
                }
            }
            worst
        }
        side(&self.qcoef, &other.qcoef).max(side(&self.pcoef, &other.pcoef))
    }

    /// Coefficient-wise equality within an absolute tolerance.
    pub fn approx_eq(&self, other: &Self, tol: f64) -> bool {
        self.max_abs_diff(other) <= tol
    }

    /// Largest absolute position coefficient over a set of mode ids.
    pub fn max_q_weight_on(&self, ids: impl Iterator<Item = usize>) -> f64 {
        let mut worst = 0.0f64;
        for id in ids {
            worst = worst.max(self.qcoef.get(&id).copied().unwrap_or(0.0).abs());
        }
        worst
    }

    fn check_registered(&self, reg: &ModeRegistry) -> Result<()> {
        for &id in self.qcoef.keys().chain(self.pcoef.keys()) {
            reg.mode(id)?;
        }
        Ok(())
    }
}

/// The real coefficient c in [A, B] = i*c, with [q_k, p_l] = i*HBAR*delta_kl.
pub fn commutator(a: &OperatorExpr, b: &OperatorExpr, reg: &ModeRegistry) -> Result<f64> {
    a.check_registered(reg)?;
    b.check_registered(reg)?;
    let mut acc = 0.0;
    for (&id, &qa) in &a.qcoef {
        if let Some(&pb) = b.pcoef.get(&id) {
            acc += qa * pb;
        }
    }
    for (&id, &pa) in &a.pcoef {
        if let Some(&qb) = b.qcoef.get(&id) {
            acc -= pa * qb;
        }
    }
    Ok(acc * HBAR)
}

/// Symmetrized centered second moment <{dA, dB}>/2.
///
/// Distinct base modes are uncorrelated and each mode has vanishing
/// symmetrized qp moment, so only diagonal qq and pp terms contribute.
pub fn second_moment(a: &OperatorExpr, b: &OperatorExpr, reg: &ModeRegistry) -> Result<f64> {
    a.check_registered(reg)?;
    b.check_registered(reg)?;
    let mut acc = 0.0;
    for (&id, &qa) in &a.qcoef {
        if let Some(&qb) = b.qcoef.get(&id) {
            acc += qa * qb * reg.mode(id)?.moments().0;
        }
    }
    for (&id, &pa) in &a.pcoef {
        if let Some(&pb) = b.pcoef.get(&id) {
            acc += pa * pb * reg.mode(id)?.moments().1;
        }
    }
    Ok(acc)
}
