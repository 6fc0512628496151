//! Two-mode covariance analysis of the teleported output pair: X-form
//! correlators, symplectic spectra under partial transposition, logarithmic
//! negativity, squeezing thresholds, and the gain-tunable variance-sum
//! entanglement witness.

use nalgebra::DMatrix;

use crate::canonical::Family;
use crate::qalg::{second_moment, ModeRegistry, OperatorExpr};
use crate::{Error, Result};

/// Entries of the output covariance that the X form requires to vanish, and
/// the variance agreement between the two output modes, are checked to this
/// tolerance.
const X_FORM_TOL: f64 = 1e-12;

/// Residual tolerance for the threshold bisection.
const ROOT_TOL: f64 = 1e-12;

/// `sqrt(sqrt(2) - 1) / 4`: the value of `sqrt(ab) - c` at which the
/// log-negativity equals half of its infinite-squeezing limit.
fn half_limit_target() -> f64 {
    (std::f64::consts::SQRT_2 - 1.0).sqrt() / 4.0
}

/// Infinite-squeezing log-negativity of the teleported pair, `-ln(sqrt(2)-1)`.
pub fn en_ideal() -> f64 {
    -(std::f64::consts::SQRT_2 - 1.0).ln()
}

/// Rail count per arm of the multi-rail topology; the infinite-rail case is
/// evaluated by substituting the limiting correlators analytically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Rails {
    Finite(usize),
    Infinite,
}

impl Rails {
    /// 1/N, with zero for the infinite-rail limit.
    fn inv(self) -> Result<f64> {
        match self {
            Rails::Finite(0) => Err(Error::InvalidRails(0)),
            Rails::Finite(n) => Ok(1.0 / n as f64),
            Rails::Infinite => Ok(0.0),
        }
    }
}

impl std::fmt::Display for Rails {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Rails::Finite(n) => write!(f, "{n}"),
            Rails::Infinite => f.write_str("inf"),
        }
    }
}

impl std::str::FromStr for Rails {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "inf" {
            return Ok(Rails::Infinite);
        }
        match s.parse::<usize>() {
            Ok(0) => Err(Error::InvalidRails(0)),
            Ok(n) => Ok(Rails::Finite(n)),
            Err(_) => Err(Error::InvalidArg(format!(
                "rail count '{s}' is neither a positive integer nor 'inf'"
            ))),
        }
    }
}

/// The three independent entries of the X-form output covariance: `a` is the
/// position variance of each output, `b` the momentum variance, and `c` the
/// symmetrized cross moment between the position of one output and the
/// momentum of the other.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Correlators {
    a: f64,
    b: f64,
    c: f64,
}

impl Correlators {
    pub fn new(a: f64, b: f64, c: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) || a <= 0.0 || b <= 0.0 {
            return Err(Error::InvalidCorrelators(format!(
                "variances must be finite and positive, got a={a}, b={b}, c={c}"
            )));
        }
        // The larger eigenvalue of the partially transposed covariance is
        // sqrt(ab)+|c|; a physical state keeps it at or above the vacuum 1/4.
        let plus = (a * b).sqrt() + c.abs();
        if plus < 0.25 - 1e-9 {
            return Err(Error::InvalidCorrelators(format!(
                "sqrt(ab)+|c| = {plus} lies below the vacuum floor 0.25"
            )));
        }
        Ok(Self { a, b, c })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn c(&self) -> f64 {
        self.c
    }
}

/// 4x4 covariance of `(q_mu, p_mu, q_nu, p_nu)` in X form: variances on the
/// main diagonal, cross moments on the anti-diagonal, zero elsewhere.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceX {
    m: DMatrix<f64>,
}

impl CovarianceX {
    pub fn from_correlators(corr: &Correlators) -> Self {
        let (a, b, c) = (corr.a(), corr.b(), corr.c());
        #[rustfmt::skip]
        let m = DMatrix::from_row_slice(4, 4, &[
            a,   0.0, 0.0, c,
            0.0, b,   c,   0.0,
            0.0, c,   a,   0.0,
            c,   0.0, 0.0, b,
        ]);
        Self { m }
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }
}

/// Assembles the full 4x4 second-moment matrix of the output quadratures,
/// verifies it has the X form (zeros off the two diagonals, matching
/// variances and cross moments between the two outputs), and returns the
/// three independent entries.
pub fn correlators_from_outputs(
    q_mu: &OperatorExpr,
    p_mu: &OperatorExpr,
    q_nu: &OperatorExpr,
    p_nu: &OperatorExpr,
    reg: &ModeRegistry,
) -> Result<Correlators> {
    let quads = [q_mu, p_mu, q_nu, p_nu];
    let mut v = DMatrix::zeros(4, 4);
    for k in 0..4 {
        for l in k..4 {
            let m = second_moment(quads[k], quads[l], reg)?;
            v[(k, l)] = m;
            v[(l, k)] = m;
        }
    }
    // Position and momentum of the same output are uncorrelated, as are like
    // quadratures of the two outputs.
    for (k, l) in [(0, 1), (0, 2), (1, 3), (2, 3)] {
        if v[(k, l)].abs() > X_FORM_TOL {
            return Err(Error::XFormViolation {
                row: k + 1,
                col: l + 1,
                value: v[(k, l)],
            });
        }
    }
    let pairs = [
        (v[(0, 0)], v[(2, 2)], "position variances"),
        (v[(1, 1)], v[(3, 3)], "momentum variances"),
        (v[(0, 3)], v[(1, 2)], "cross moments"),
    ];
    for (x, y, what) in pairs {
        if (x - y).abs() > X_FORM_TOL {
            return Err(Error::InvalidCorrelators(format!(
                "{what} of the two outputs differ: {x} vs {y}"
            )));
        }
    }
    Correlators::new(
        0.5 * (v[(0, 0)] + v[(2, 2)]),
        0.5 * (v[(1, 1)] + v[(3, 3)]),
        0.5 * (v[(0, 3)] + v[(1, 2)]),
    )
}

/// Closed-form output correlators of the N-rail construction at uniform
/// squeezing `r`.
pub fn closed_correlators(family: Family, rails: Rails, r: f64) -> Result<Correlators> {
    if !r.is_finite() || r < 0.0 {
        return Err(Error::InvalidSqueezing(r));
    }
    let inv_n = rails.inv()?;
    let x = (-2.0 * r).exp();
    let (a, b, c) = match family {
        Family::Canonical => ((1.0 + inv_n * x) / 4.0, (1.0 + x) / 2.0, 0.25),
        Family::LinearOptical => (
            (1.0 + (2.0 + inv_n) * x) / 4.0,
            (2.0 + 3.0 * x) / 4.0,
            (1.0 + x) / 4.0,
        ),
    };
    Correlators::new(a, b, c)
}

/// Ordered symplectic eigenvalues of a partially transposed two-mode
/// covariance; `minus < 1/4` certifies entanglement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SymplecticPair {
    pub minus: f64,
    pub plus: f64,
}

impl SymplecticPair {
    fn ordered(x: f64, y: f64) -> Self {
        if x <= y {
            Self { minus: x, plus: y }
        } else {
            Self { minus: y, plus: x }
        }
    }
}

/// Partial-transpose symplectic eigenvalues of an X-form covariance in
/// closed form: `|sqrt(ab) - c|` and `|sqrt(ab) + c|`, ordered.
pub fn symplectic_pt(corr: &Correlators) -> SymplecticPair {
    let root = (corr.a() * corr.b()).sqrt();
    SymplecticPair::ordered((root - corr.c()).abs(), (root + corr.c()).abs())
}

/// Partial-transpose symplectic eigenvalues of an arbitrary two-mode
/// covariance via the invariants of its 2x2 blocks. Independent of the
/// X-form shortcut; kept as a cross-check, not a production path.
pub fn symplectic_pt_generic(v: &DMatrix<f64>) -> Result<SymplecticPair> {
    if v.nrows() != 4 || v.ncols() != 4 {
        return Err(Error::DimensionMismatch {
            expected: 4,
            got: if v.nrows() == 4 { v.ncols() } else { v.nrows() },
        });
    }
    // Partial transposition flips the sign of the second mode's momentum.
    let mut pt = v.clone();
    for k in 0..3 {
        pt[(k, 3)] = -pt[(k, 3)];
        pt[(3, k)] = -pt[(3, k)];
    }
    let det2 =
        |r0: usize, c0: usize| pt[(r0, c0)] * pt[(r0 + 1, c0 + 1)] - pt[(r0, c0 + 1)] * pt[(r0 + 1, c0)];
    let delta = det2(0, 0) + det2(2, 2) + 2.0 * det2(0, 2);
    let det_pt = pt.determinant();
    let tol = 1e-9 * delta.abs().max(1.0);
    let disc = delta * delta - 4.0 * det_pt;
    if disc < -tol {
        return Err(Error::InvalidCorrelators(format!(
            "partial transpose has a complex symplectic spectrum (discriminant {disc})"
        )));
    }
    let root = disc.max(0.0).sqrt();
    let lam2_minus = 0.5 * (delta - root);
    let lam2_plus = 0.5 * (delta + root);
    if lam2_minus < -tol {
        return Err(Error::InvalidCorrelators(format!(
            "negative squared symplectic eigenvalue {lam2_minus}"
        )));
    }
    Ok(SymplecticPair::ordered(
        lam2_minus.max(0.0).sqrt(),
        lam2_plus.max(0.0).sqrt(),
    ))
}

/// Logarithmic negativity from the smaller partial-transpose eigenvalue:
/// `max(0, -ln(4 lambda_minus))`.
pub fn log_negativity(lambda_minus: f64) -> f64 {
    (-(4.0 * lambda_minus).ln()).max(0.0)
}

/// Log-negativity of the N-rail outputs evaluated from the closed-form
/// correlators.
pub fn en_closed(family: Family, rails: Rails, r: f64) -> Result<f64> {
    let corr = closed_correlators(family, rails, r)?;
    Ok(log_negativity(symplectic_pt(&corr).minus))
}

/// Squeezing at which the log-negativity reaches half of its
/// infinite-squeezing limit, found by bisection of
/// `sqrt(ab) - c - sqrt(sqrt(2)-1)/4` over `r` in `[0, 5]`.
pub fn rbar(family: Family, rails: Rails) -> Result<f64> {
    let target = half_limit_target();
    let f = |r: f64| -> Result<f64> {
        let corr = closed_correlators(family, rails, r)?;
        Ok((corr.a() * corr.b()).sqrt() - corr.c() - target)
    };
    let (mut lo, mut hi) = (0.0_f64, 5.0_f64);
    let f_lo = f(lo)?;
    let f_hi = f(hi)?;
    if f_lo == 0.0 {
        return Ok(lo);
    }
    if f_lo.signum() == f_hi.signum() {
        return Err(Error::Bracket(format!(
            "no sign change over [0, 5]: f(0) = {f_lo}, f(5) = {f_hi}"
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid)?;
        if fm.abs() <= ROOT_TOL {
            return Ok(mid);
        }
        if fm.signum() == f_lo.signum() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(Error::Bracket(format!(
        "bisection stalled near r = {}",
        0.5 * (lo + hi)
    )))
}

/// Witness value together with its separability bound.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WitnessReport {
    pub w: f64,
    pub bound: f64,
    pub entangled: bool,
}

/// Gain-`g` variance-sum witness `W_g = 2(a + g^2 b - 2 g c)`; a value below
/// the bound `g` certifies entanglement.
pub fn witness_wg(corr: &Correlators, g: f64) -> WitnessReport {
    let w = 2.0 * (corr.a() + g * g * corr.b() - 2.0 * g * corr.c());
    WitnessReport {
        w,
        bound: g,
        entangled: w < g,
    }
}

/// Gain minimizing the witness margin `W_g - g`; at this gain the witness
/// fires exactly when `sqrt(ab) - c < 1/4`.
pub fn optimal_gain(corr: &Correlators) -> f64 {
    (corr.c() + 0.25) / corr.b()
}

/// Squeezing strength in decibels, `10 log10(e^{-2r})`.
pub fn db_of_r(r: f64) -> f64 {
    10.0 * (-2.0 * r) * std::f64::consts::LOG10_E
}
