//! Symplectic gate actions on Heisenberg-picture mode states.
//!
//! Gates never mutate their arguments: each returns fresh `ModeState`s so a
//! scenario can be replayed or evaluated in parallel across parameter sweeps.

use crate::lincluster::UMatrix;
use crate::qalg::OperatorExpr;
use crate::{Error, Result};

/// The current q and p quadratures of one labeled mode.
#[derive(Debug, Clone)]
pub struct ModeState {
    pub q: OperatorExpr,
    pub p: OperatorExpr,
}

impl ModeState {
    /// A fresh mode: its own bare base-mode quadratures.
    pub fn fresh(id: usize) -> Self {
        Self {
            q: OperatorExpr::q(id),
            p: OperatorExpr::p(id),
        }
    }
}

/// QND (CZ) coupling: each momentum picks up the other mode's position,
/// positions are untouched.
pub fn apply_qnd(a: &ModeState, b: &ModeState) -> (ModeState, ModeState) {
    (
        ModeState {
            q: a.q.clone(),
            p: a.p.add(&b.q),
        },
        ModeState {
            q: b.q.clone(),
            p: b.p.add(&a.q),
        },
    )
}

/// Balanced beam splitter: outputs ((a+b)/sqrt2, (a-b)/sqrt2) on both quadratures.
pub fn apply_beamsplitter_5050(a: &ModeState, b: &ModeState) -> (ModeState, ModeState) {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (
        ModeState {
            q: a.q.add(&b.q).scale(s),
            p: a.p.add(&b.p).scale(s),
        },
        ModeState {
            q: a.q.sub(&b.q).scale(s),
            p: a.p.sub(&b.p).scale(s),
        },
    )
}

/// Quarter rotation of phase space: forward (q,p) -> (-p,q), inverse (q,p) -> (p,-q).
pub fn apply_fourier(a: &ModeState, inverse: bool) -> ModeState {
    if inverse {
        ModeState {
            q: a.p.clone(),
            p: a.q.scale(-1.0),
        }
    } else {
        ModeState {
            q: a.p.scale(-1.0),
            p: a.q.clone(),
        }
    }
}

/// Passive network with unitary matrix U = A + iB acting on the seed modes:
/// q_k = sum_l (A_kl q_l - B_kl p_l), p_k = sum_l (A_kl p_l + B_kl q_l).
pub fn apply_network(u: &UMatrix, seeds: &[ModeState]) -> Result<Vec<ModeState>> {
    let m = u.dim();
    if seeds.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: seeds.len(),
        });
    }
    let mut out = Vec::with_capacity(m);
    for k in 0..m {
        let mut q = OperatorExpr::zero();
        let mut p = OperatorExpr::zero();
        for (l, seed) in seeds.iter().enumerate() {
            let a = u.re(k, l);
            let b = u.im(k, l);
            if a != 0.0 {
                q.add_scaled_in_place(a, &seed.q);
                p.add_scaled_in_place(a, &seed.p);
            }
            if b != 0.0 {
                q.add_scaled_in_place(-b, &seed.p);
                p.add_scaled_in_place(b, &seed.q);
            }
        }
        out.push(ModeState { q, p });
    }
    Ok(out)
}
