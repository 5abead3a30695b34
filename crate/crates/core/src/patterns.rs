//! Sign patterns realizable on the data by affine functions.
//!
//! A pattern `s ∈ {±1}ᴺ` is admitted when the closed cone
//! `{(w, b) : s ⊙ (Xᵀw + b·1) ≥ 0}` contains a point whose total margin
//! `Σᵢ sᵢ(wᵀxᵢ + b)` exceeds [`FEASIBILITY_MARGIN`], maximized over the box
//! `‖(w, b)‖∞ ≤ 1`. The margin rule excludes only the all-zero map, which
//! lies in every cone.

use std::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{dot, DataSet};
use crate::error::{Error, Result};
use crate::solver::lp::lp_feasibility;

pub const FEASIBILITY_MARGIN: f64 = 1e-9;

/// Default largest `N` for exhaustive enumeration.
pub const DEFAULT_ENUMERATION_CUTOFF: usize = 20;

/// Affine map `(w, b)` certifying a pattern.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub w: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SignPattern {
    pub signs: Vec<i8>,
    pub witness: Witness,
    /// `sign(wᵀxᵢ + b) = sᵢ` holds at every point (with `sign(0) = +1`).
    /// False only for boundary patterns, where the cone forces some
    /// pre-activations to zero; the witness then satisfies `s ⊙ (Xᵀw + b) ≥ 0`.
    pub strict: bool,
}

impl SignPattern {
    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn negated_signs(&self) -> Vec<i8> {
        self.signs.iter().map(|&s| -s).collect()
    }
}

/// Canonical order: lexicographic with `+1 < -1`.
pub fn canonical_cmp(a: &[i8], b: &[i8]) -> Ordering {
    // +1 maps below -1 under reversal of the natural i8 order.
    b.cmp(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PatternSet {
    pub patterns: Vec<SignPattern>,
    pub data_hash: String,
}

impl PatternSet {
    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    pub fn contains(&self, signs: &[i8]) -> bool {
        self.patterns
            .binary_search_by(|p| canonical_cmp(&p.signs, signs))
            .is_ok()
    }

    pub fn iter(&self) -> impl Iterator<Item = &SignPattern> {
        self.patterns.iter()
    }

    /// Checks that this set belongs to `data`.
    pub fn ensure_matches(&self, data: &DataSet) -> Result<()> {
        if self.data_hash != data.digest() {
            return Err(Error::PatternMismatch);
        }
        Ok(())
    }

    fn from_unsorted(mut patterns: Vec<SignPattern>, data: &DataSet) -> Self {
        patterns.sort_by(|a, b| canonical_cmp(&a.signs, &b.signs));
        patterns.dedup_by(|a, b| a.signs == b.signs);
        Self { patterns, data_hash: data.digest() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EnumerationConfig {
    /// Largest `N` for which an exhaustive `2ᴺ` search is attempted.
    pub cutoff: usize,
    /// Run the exhaustive search even above the cutoff.
    pub force: bool,
}

impl Default for EnumerationConfig {
    fn default() -> Self {
        Self { cutoff: DEFAULT_ENUMERATION_CUTOFF, force: false }
    }
}

/// LP rows `sᵢ·(xᵢᵀw + b) ≥ 0` over `z = (w, b)`.
fn cone_rows(data: &DataSet, signs: &[i8]) -> DMatrix<f64> {
    let d = data.dim();
    DMatrix::from_fn(data.len(), d + 1, |i, j| {
        let s = f64::from(signs[i]);
        if j < d {
            s * data.features()[(j, i)]
        } else {
            s
        }
    })
}

fn witness_from(z: &DVector<f64>, d: usize) -> Witness {
    let w: Vec<f64> = z.rows(0, d).iter().copied().collect();
    let scale = w.iter().map(|v| v * v).sum::<f64>().sqrt().max(1.0);
    Witness { w: w.iter().map(|v| v / scale).collect(), b: z[d] / scale }
}

fn realizes_strictly(data: &DataSet, signs: &[i8], witness: &Witness) -> bool {
    (0..data.len()).all(|i| {
        let pre = dot(data.point(i), &witness.w) + witness.b;
        let sign = if pre >= 0.0 { 1 } else { -1 };
        sign == signs[i]
    })
}

/// Decides whether `signs` is an admissible pattern of `data`, returning a witness.
pub fn pattern_feasible(data: &DataSet, signs: &[i8]) -> Result<Option<SignPattern>> {
    let n = data.len();
    let d = data.dim();
    if signs.len() != n {
        return Err(Error::DimensionMismatch { expected: n, got: signs.len() });
    }
    if signs.iter().any(|&s| s != 1 && s != -1) {
        return Err(Error::InvalidConfig("sign entries must be +1 or -1".into()));
    }

    let a = cone_rows(data, signs);
    let c = DVector::from_fn(d + 1, |j, _| a.column(j).sum());
    let Some(sol) = lp_feasibility(&a, &DVector::zeros(n), &c, 1.0)? else {
        // The origin always satisfies the cone rows.
        return Err(Error::Lp("cone LP reported an empty cone".into()));
    };
    if sol.objective <= FEASIBILITY_MARGIN {
        return Ok(None);
    }

    // Prefer a witness with every row strictly positive: max t s.t. sᵢ·preᵢ ≥ t.
    let mut a_strict = a.clone().insert_column(d + 1, -1.0);
    a_strict = a_strict.insert_row(n, 0.0);
    a_strict[(n, d + 1)] = -1.0; // -t ≥ -1 is implied by the box; keeps the row set nonempty
    let mut c_strict = DVector::zeros(d + 2);
    c_strict[d + 1] = 1.0;
    let mut b_strict = DVector::zeros(n + 1);
    b_strict[n] = -1.0;
    if let Some(strict) = lp_feasibility(&a_strict, &b_strict, &c_strict, 1.0)? {
        if strict.objective > FEASIBILITY_MARGIN {
            let witness = witness_from(&strict.point.rows(0, d + 1).into_owned(), d);
            if realizes_strictly(data, signs, &witness) {
                return Ok(Some(SignPattern { signs: signs.to_vec(), witness, strict: true }));
            }
        }
    }

    let witness = witness_from(&sol.point, d);
    let strict = realizes_strictly(data, signs, &witness);
    Ok(Some(SignPattern { signs: signs.to_vec(), witness, strict }))
}

fn signs_of_index(bits: u64, n: usize) -> Vec<i8> {
    (0..n).map(|i| if bits >> (n - 1 - i) & 1 == 0 { 1 } else { -1 }).collect()
}

/// Tests every candidate in `{±1}ᴺ` with [`pattern_feasible`].
///
/// Candidates with `s₀ = -1` are obtained by negation, since the cone of `-s`
/// is the negated cone of `s` with the same margin.
pub fn enumerate_exhaustive(data: &DataSet) -> Result<PatternSet> {
    let n = data.len();
    if n >= 64 {
        return Err(Error::ResourceLimit(format!("cannot index 2^{n} candidates")));
    }
    let half = 1u64 << (n - 1);
    let found: Vec<SignPattern> = (0..half)
        .into_par_iter()
        .map(|bits| pattern_feasible(data, &signs_of_index(bits, n)))
        .filter_map(|r| r.transpose())
        .collect::<Result<_>>()?;

    let mut all = Vec::with_capacity(2 * found.len());
    for p in found {
        let neg = SignPattern {
            signs: p.negated_signs(),
            witness: Witness { w: p.witness.w.iter().map(|v| -v).collect(), b: -p.witness.b },
            strict: false,
        };
        let strict = realizes_strictly(data, &neg.signs, &neg.witness);
        let neg = if strict {
            SignPattern { strict, ..neg }
        } else {
            // Negating a strict witness may land a point exactly on zero; rerun the LP for a clean witness.
            pattern_feasible(data, &neg.signs)?.unwrap_or(neg)
        };
        all.push(p);
        all.push(neg);
    }
    Ok(PatternSet::from_unsorted(all, data))
}

/// Exact enumeration for scalar inputs: threshold patterns, plus the
/// boundary patterns obtained by splitting a repeated input value.
pub fn enumerate_scalar(data: &DataSet) -> Result<PatternSet> {
    if data.dim() != 1 {
        return Err(Error::DimensionMismatch { expected: 1, got: data.dim() });
    }
    let xs: Vec<f64> = data.features().iter().copied().collect();
    let n = xs.len();
    let mut values = xs.clone();
    values.sort_by(f64::total_cmp);
    values.dedup();

    let mut out = Vec::new();
    let mut push = |signs: Vec<i8>, w: f64, b: f64, strict: bool| {
        out.push(SignPattern { signs, witness: Witness { w: vec![w], b }, strict });
    };
    push(vec![1; n], 0.0, 1.0, true);
    push(vec![-1; n], 0.0, -1.0, true);
    for pair in values.windows(2) {
        let theta = 0.5 * (pair[0] + pair[1]);
        let up: Vec<i8> = xs.iter().map(|&x| if x >= theta { 1 } else { -1 }).collect();
        let down: Vec<i8> = up.iter().map(|&s| -s).collect();
        push(up, 1.0, -theta, true);
        push(down, -1.0, theta, true);
    }

    // A hyperplane through a repeated value leaves those points at zero, so any
    // split among them satisfies the closed cone rows.
    for &v in &values {
        let tied: Vec<usize> = (0..n).filter(|&i| xs[i] == v).collect();
        if tied.len() < 2 || tied.len() == n {
            continue;
        }
        if tied.len() > 20 {
            return Err(Error::ResourceLimit(format!("{} repeated inputs at {v}", tied.len())));
        }
        for dir in [1.0f64, -1.0] {
            for mask in 0u64..(1 << tied.len()) {
                let mut signs: Vec<i8> =
                    xs.iter().map(|&x| if dir * (x - v) > 0.0 { 1 } else { -1 }).collect();
                for (k, &i) in tied.iter().enumerate() {
                    signs[i] = if mask >> k & 1 == 1 { 1 } else { -1 };
                }
                let strict = tied.iter().all(|&i| signs[i] == 1);
                push(signs, dir, -dir * v, strict);
            }
        }
    }
    // Distinct strict patterns come first so dedup keeps them.
    out.sort_by(|a, b| canonical_cmp(&a.signs, &b.signs).then(b.strict.cmp(&a.strict)));
    Ok(PatternSet::from_unsorted(out, data))
}

/// Enumerates every admissible pattern of `data`.
///
/// Scalar inputs use [`enumerate_scalar`]; otherwise the exhaustive search
/// runs when `N ≤ config.cutoff` (or `config.force` is set).
pub fn enumerate_patterns(data: &DataSet, config: &EnumerationConfig) -> Result<PatternSet> {
    if data.dim() == 1 {
        return enumerate_scalar(data);
    }
    if data.len() > config.cutoff && !config.force {
        return Err(Error::ResourceLimit(format!(
            "exhaustive enumeration over 2^{} candidates exceeds the cutoff N ≤ {}",
            data.len(),
            config.cutoff
        )));
    }
    enumerate_exhaustive(data)
}

/// Cover's bound `2·Σ_{i=1..d} C(N, i)`, saturated at the trivial bound `2ᴺ`.
pub fn cover_bound(n: u64, d: u64) -> Result<u128> {
    if n == 0 || d == 0 {
        return Err(Error::InvalidConfig("cover bound needs N ≥ 1 and d ≥ 1".into()));
    }
    let trivial = if n < 128 { Some(1u128 << n) } else { None };
    let overflow = || Error::Overflow(format!("cover bound for N={n}, d={d}"));

    let mut sum: Option<u128> = Some(0);
    let mut binom: u128 = 1; // C(n, 0)
    for i in 1..=d.min(n) {
        // C(n, i) = C(n, i-1)·(n-i+1)/i; exact at every step.
        binom = match binom.checked_mul(u128::from(n - i + 1)) {
            Some(v) => v / u128::from(i),
            None => {
                sum = None;
                break;
            }
        };
        sum = sum.and_then(|s| s.checked_add(binom));
    }
    let doubled = sum.and_then(|s| s.checked_mul(2));
    match (doubled, trivial) {
        (Some(b), Some(t)) => Ok(b.min(t)),
        (Some(b), None) => Ok(b),
        (None, Some(t)) => Ok(t),
        (None, None) => Err(overflow()),
    }
}
