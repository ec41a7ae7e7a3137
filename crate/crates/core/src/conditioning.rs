//! Geometric conditioning of trait direction sets.
//!
//! | scheme | transform |
//! |--------|-----------|
//! | `C0`   | identity |
//! | `C1`   | `((1−γ)G + γI)^{−1/2} D`, soft symmetric whitening |
//! | `C2`   | classical Gram–Schmidt in a given order |
//! | `C3`   | greedy projection removal when `|cos| > τ` |
//! | `C4`   | greedy partial removal `d_i ← d_i − β⟨d_i,d_j⟩d_j` when `|cos| > τ` |
//! | `C5`   | Löwdin `G^{−1/2} D`, so that `D′D′ᵀ = I` |
//!
//! Every scheme takes a row-normalized set and returns re-normalized rows,
//! recording the row norms seen just before that final normalization.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, SymmetricEigen};
use serde_json::json;

use crate::directions::DirectionSet;
use crate::linalg::asymmetry;
use crate::{Error, Result};

pub const DEFAULT_GAMMA: f64 = 0.5;
pub const DEFAULT_TAU: f64 = 0.5;
pub const DEFAULT_BETA: f64 = 0.5;

/// Relative eigenvalue floor below which a Gram matrix counts as singular.
pub const EIG_FLOOR: f64 = 1e-10;
/// Residual norm below which a sequential sweep counts as collapsed.
pub const RESIDUAL_FLOOR: f64 = 1e-10;
const SYMMETRY_TOLERANCE: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Scheme {
    C0,
    C1,
    C2,
    C3,
    C4,
    C5,
}

impl Scheme {
    pub const ALL: [Scheme; 6] = [
        Scheme::C0,
        Scheme::C1,
        Scheme::C2,
        Scheme::C3,
        Scheme::C4,
        Scheme::C5,
    ];

    pub fn describe(self) -> &'static str {
        match self {
            Scheme::C0 => "baseline",
            Scheme::C1 => "soft symmetric whitening",
            Scheme::C2 => "greedy orthogonalisation",
            Scheme::C3 => "selective orthogonalisation",
            Scheme::C4 => "soft projection",
            Scheme::C5 => "hard orthonormalisation",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "C{}", *self as u8)
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "C0" => Ok(Scheme::C0),
            "C1" => Ok(Scheme::C1),
            "C2" => Ok(Scheme::C2),
            "C3" => Ok(Scheme::C3),
            "C4" => Ok(Scheme::C4),
            "C5" => Ok(Scheme::C5),
            other => Err(Error::InvalidParameter(format!("unknown scheme `{other}`"))),
        }
    }
}

/// Which scheme to apply, with exactly the parameters that scheme uses.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditioningSpec {
    pub scheme: Scheme,
    pub gamma: Option<f64>,
    pub tau: Option<f64>,
    pub beta: Option<f64>,
    /// Processing order for C2–C4; `None` means canonical order.
    pub order: Option<Vec<usize>>,
}

impl ConditioningSpec {
    fn bare(scheme: Scheme) -> Self {
        Self {
            scheme,
            gamma: None,
            tau: None,
            beta: None,
            order: None,
        }
    }

    pub fn c0() -> Self {
        Self::bare(Scheme::C0)
    }

    pub fn c1(gamma: f64) -> Self {
        Self {
            gamma: Some(gamma),
            ..Self::bare(Scheme::C1)
        }
    }

    pub fn c2(order: Option<Vec<usize>>) -> Self {
        Self {
            order,
            ..Self::bare(Scheme::C2)
        }
    }

    pub fn c3(tau: f64, order: Option<Vec<usize>>) -> Self {
        Self {
            tau: Some(tau),
            order,
            ..Self::bare(Scheme::C3)
        }
    }

    pub fn c4(beta: f64, tau: f64, order: Option<Vec<usize>>) -> Self {
        Self {
            beta: Some(beta),
            tau: Some(tau),
            order,
            ..Self::bare(Scheme::C4)
        }
    }

    pub fn c5() -> Self {
        Self::bare(Scheme::C5)
    }

    /// Checks parameter presence and ranges against the scheme and, when
    /// `trait_count` is given, the order permutation's length.
    pub fn validate(&self, trait_count: Option<usize>) -> Result<()> {
        let (need_gamma, need_tau, need_beta, takes_order) = match self.scheme {
            Scheme::C0 | Scheme::C5 => (false, false, false, false),
            Scheme::C1 => (true, false, false, false),
            Scheme::C2 => (false, false, false, true),
            Scheme::C3 => (false, true, false, true),
            Scheme::C4 => (false, true, true, true),
        };
        check_param("gamma", self.gamma, need_gamma, self.scheme)?;
        check_param("tau", self.tau, need_tau, self.scheme)?;
        check_param("beta", self.beta, need_beta, self.scheme)?;
        if !takes_order && self.order.is_some() {
            return Err(Error::InvalidParameter(format!(
                "{} does not take an order",
                self.scheme
            )));
        }
        if let (Some(order), Some(c)) = (&self.order, trait_count) {
            check_permutation(order, c)?;
        }
        Ok(())
    }

    /// Parameter string for reports, e.g. `beta=0.5;tau=0.5`.
    pub fn params_label(&self) -> String {
        let mut parts = Vec::new();
        if let Some(g) = self.gamma {
            parts.push(format!("gamma={g}"));
        }
        if let Some(b) = self.beta {
            parts.push(format!("beta={b}"));
        }
        if let Some(t) = self.tau {
            parts.push(format!("tau={t}"));
        }
        if let Some(o) = &self.order {
            let o: Vec<String> = o.iter().map(usize::to_string).collect();
            parts.push(format!("order={}", o.join("-")));
        }
        parts.join(";")
    }

    pub fn to_json(&self) -> serde_json::Value {
        json!({
            "scheme": self.scheme.to_string(),
            "gamma": self.gamma,
            "tau": self.tau,
            "beta": self.beta,
            "order": self.order,
        })
    }
}

fn check_param(name: &'static str, value: Option<f64>, needed: bool, scheme: Scheme) -> Result<()> {
    match (value, needed) {
        (None, true) => Err(Error::MissingParameter(name)),
        (Some(_), false) => Err(Error::InvalidParameter(format!(
            "{scheme} does not take `{name}`"
        ))),
        (Some(v), true) if !(0.0..=1.0).contains(&v) => Err(Error::InvalidParameter(format!(
            "{name}={v} outside [0, 1]"
        ))),
        _ => Ok(()),
    }
}

pub(crate) fn check_permutation(order: &[usize], c: usize) -> Result<()> {
    let mut seen = vec![false; c];
    if order.len() != c {
        return Err(Error::InvalidParameter(format!(
            "order has {} entries for {c} traits",
            order.len()
        )));
    }
    for &i in order {
        if i >= c || std::mem::replace(&mut seen[i], true) {
            return Err(Error::InvalidParameter(format!(
                "order {order:?} is not a permutation of 0..{c}"
            )));
        }
    }
    Ok(())
}

/// Pairwise inner products of the rows of a direction set.
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub values: DMatrix<f64>,
}

pub fn gram(set: &DirectionSet) -> GramMatrix {
    let d = set.vectors();
    let mut g = d * d.transpose();
    // Exact symmetry; the product is only symmetric up to rounding.
    let n = g.nrows();
    for i in 0..n {
        for j in (i + 1)..n {
            let v = 0.5 * (g[(i, j)] + g[(j, i)]);
            g[(i, j)] = v;
            g[(j, i)] = v;
        }
    }
    GramMatrix { values: g }
}

/// Inverse principal square root of a symmetric positive (semi-)definite
/// matrix via its eigendecomposition, `V diag(λ^{-1/2}) Vᵀ`.
///
/// Fails with `RankDeficient` when the smallest eigenvalue is below
/// `eig_floor · λ_max`; no regularization is applied.
pub fn inv_sqrt_psd(m: &DMatrix<f64>, eig_floor: f64) -> Result<DMatrix<f64>> {
    if !m.is_square() {
        return Err(Error::ShapeMismatch(format!(
            "inv_sqrt_psd needs a square matrix, got {:?}",
            m.shape()
        )));
    }
    let asym = asymmetry(m);
    if asym > SYMMETRY_TOLERANCE {
        return Err(Error::NotSymmetric(asym));
    }
    let eig = SymmetricEigen::new(m.clone());
    let lmax = eig.eigenvalues.max();
    let lmin = eig.eigenvalues.min();
    if !(lmax > 0.0) || lmin < eig_floor * lmax {
        return Err(Error::RankDeficient(format!(
            "eigenvalue {lmin:e} below floor {eig_floor:e} x {lmax:e}"
        )));
    }
    let v = &eig.eigenvectors;
    let scale = DMatrix::from_diagonal(&eig.eigenvalues.map(|l| 1.0 / l.sqrt()));
    let s = v * scale * v.transpose();
    Ok((&s + s.transpose()) * 0.5)
}

/// Output of a conditioning scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionedSet {
    pub directions: DirectionSet,
    pub spec: ConditioningSpec,
    pub pre_normalization_norms: Vec<f64>,
    /// `(i, j)` pairs for which a projection of row `j` was removed from row
    /// `i`. Only the sequential schemes populate this.
    pub projections: Vec<(usize, usize)>,
}

fn require_normalized(set: &DirectionSet) -> Result<()> {
    if set.is_normalized() {
        Ok(())
    } else {
        Err(Error::NotNormalized)
    }
}

fn finish(
    set: &DirectionSet,
    mut rows: DMatrix<f64>,
    spec: ConditioningSpec,
    projections: Vec<(usize, usize)>,
) -> Result<ConditionedSet> {
    let mut norms = Vec::with_capacity(rows.nrows());
    for (i, mut row) in rows.row_iter_mut().enumerate() {
        let n = row.norm();
        if n < RESIDUAL_FLOOR {
            return Err(Error::RankDeficient(format!(
                "row {i} collapsed to norm {n:e}"
            )));
        }
        row /= n;
        norms.push(n);
    }
    let meta = json!({
        "source": set.source_meta(),
        "conditioning": spec.to_json(),
        "pre_normalization_norms": norms,
    });
    let directions = set.with_vectors(rows)?.with_meta(meta);
    Ok(ConditionedSet {
        directions,
        spec,
        pre_normalization_norms: norms,
        projections,
    })
}

pub fn condition_c0(set: &DirectionSet) -> Result<ConditionedSet> {
    require_normalized(set)?;
    Ok(ConditionedSet {
        directions: set.clone(),
        spec: ConditioningSpec::c0(),
        pre_normalization_norms: set.vectors().row_iter().map(|r| r.norm()).collect(),
        projections: Vec::new(),
    })
}

fn whiten(set: &DirectionSet, gamma: f64, spec: ConditioningSpec) -> Result<ConditionedSet> {
    require_normalized(set)?;
    let c = set.trait_count();
    let g = gram(set).values;
    let m = g * (1.0 - gamma) + DMatrix::<f64>::identity(c, c) * gamma;
    let s = inv_sqrt_psd(&m, EIG_FLOOR)?;
    finish(set, s * set.vectors(), spec, Vec::new())
}

pub fn condition_c1(set: &DirectionSet, gamma: f64) -> Result<ConditionedSet> {
    let spec = ConditioningSpec::c1(gamma);
    spec.validate(Some(set.trait_count()))?;
    whiten(set, gamma, spec)
}

pub fn condition_c5(set: &DirectionSet) -> Result<ConditionedSet> {
    whiten(set, 0.0, ConditioningSpec::c5())
}

fn resolve_order(order: Option<&[usize]>, c: usize) -> Result<Vec<usize>> {
    match order {
        Some(o) => {
            check_permutation(o, c)?;
            Ok(o.to_vec())
        }
        None => Ok((0..c).collect()),
    }
}

/// Classical Gram–Schmidt: every projection is taken against the original
/// row, then the residual is normalized.
pub fn condition_c2(set: &DirectionSet, order: Option<&[usize]>) -> Result<ConditionedSet> {
    require_normalized(set)?;
    let c = set.trait_count();
    let order = resolve_order(order, c)?;
    let d = set.vectors();
    let mut out = d.clone();
    let mut basis: Vec<usize> = Vec::with_capacity(c);
    let mut projections = Vec::new();
    let mut norms = vec![0.0; c];
    for &i in &order {
        let original = d.row(i);
        let mut v = original.clone_owned();
        for &j in &basis {
            let e = out.row(j);
            v -= e * original.dot(&e);
            projections.push((i, j));
        }
        let n = v.norm();
        if n < RESIDUAL_FLOOR {
            return Err(Error::RankDeficient(format!(
                "Gram-Schmidt residual of row {i} is {n:e}"
            )));
        }
        norms[i] = n;
        out.set_row(i, &(v / n));
        basis.push(i);
    }
    let spec = ConditioningSpec::c2(Some(order));
    let meta = json!({
        "source": set.source_meta(),
        "conditioning": spec.to_json(),
        "pre_normalization_norms": norms,
    });
    Ok(ConditionedSet {
        directions: set.with_vectors(out)?.with_meta(meta),
        spec,
        pre_normalization_norms: norms,
        projections,
    })
}

/// Single greedy pass shared by C3 (`beta = 1`) and C4. Row `i` is compared
/// with the already-processed rows in their current (updated) form.
fn greedy(
    set: &DirectionSet,
    beta: f64,
    tau: f64,
    order: &[usize],
    spec: ConditioningSpec,
) -> Result<ConditionedSet> {
    require_normalized(set)?;
    let mut out = set.vectors().clone();
    let mut done: Vec<usize> = Vec::with_capacity(order.len());
    let mut projections = Vec::new();
    let mut norms = vec![0.0; order.len()];
    for &i in order {
        let mut v = out.row(i).clone_owned();
        for &j in &done {
            let e = out.row(j);
            let n = v.norm();
            if n < RESIDUAL_FLOOR {
                break;
            }
            let inner = v.dot(&e);
            if (inner / n).abs() > tau {
                v -= e * (beta * inner);
                projections.push((i, j));
            }
        }
        let n = v.norm();
        if n < RESIDUAL_FLOOR {
            return Err(Error::RankDeficient(format!(
                "row {i} collapsed to norm {n:e} during projection"
            )));
        }
        norms[i] = n;
        out.set_row(i, &(v / n));
        done.push(i);
    }
    let meta = json!({
        "source": set.source_meta(),
        "conditioning": spec.to_json(),
        "pre_normalization_norms": norms,
    });
    Ok(ConditionedSet {
        directions: set.with_vectors(out)?.with_meta(meta),
        spec,
        pre_normalization_norms: norms,
        projections,
    })
}

pub fn condition_c3(set: &DirectionSet, tau: f64, order: Option<&[usize]>) -> Result<ConditionedSet> {
    let order = resolve_order(order, set.trait_count())?;
    let spec = ConditioningSpec::c3(tau, Some(order.clone()));
    spec.validate(None)?;
    greedy(set, 1.0, tau, &order, spec)
}

pub fn condition_c4(
    set: &DirectionSet,
    beta: f64,
    tau: f64,
    order: Option<&[usize]>,
) -> Result<ConditionedSet> {
    let order = resolve_order(order, set.trait_count())?;
    let spec = ConditioningSpec::c4(beta, tau, Some(order.clone()));
    spec.validate(None)?;
    greedy(set, beta, tau, &order, spec)
}

/// Dispatches on `spec.scheme`. The returned set carries `spec` as given.
pub fn apply_condition(set: &DirectionSet, spec: &ConditioningSpec) -> Result<ConditionedSet> {
    spec.validate(Some(set.trait_count()))?;
    let order = spec.order.as_deref();
    let mut out = match spec.scheme {
        Scheme::C0 => condition_c0(set),
        Scheme::C1 => condition_c1(set, spec.gamma.ok_or(Error::MissingParameter("gamma"))?),
        Scheme::C2 => condition_c2(set, order),
        Scheme::C3 => condition_c3(set, spec.tau.ok_or(Error::MissingParameter("tau"))?, order),
        Scheme::C4 => condition_c4(
            set,
            spec.beta.ok_or(Error::MissingParameter("beta"))?,
            spec.tau.ok_or(Error::MissingParameter("tau"))?,
            order,
        ),
        Scheme::C5 => condition_c5(set),
    }?;
    out.spec = spec.clone();
    Ok(out)
}
