//! Hybrid Boolean constraints over `{-1, +1}` spins and their Walsh-Fourier
//! expansions.
//!
//! Convention throughout: `-1` is `true`, `+1` is `false`. A constraint
//! evaluates to `-1` when satisfied.

use std::collections::BTreeMap;
use std::fmt;

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::convolution;
use crate::error::{Error, Result};
use crate::Spin;

/// Largest arity accepted by the `2^d` enumeration paths (truth tables,
/// general compilation, the coefficient oracle).
pub const MAX_TABLE_ARITY: usize = 16;

/// A possibly negated occurrence of a variable. Variables are 1-based.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn pos(var: usize) -> Self {
        Literal { var, negated: false }
    }

    pub fn neg(var: usize) -> Self {
        Literal { var, negated: true }
    }

    /// `+v` / `-v` as in DIMACS. Returns `None` for 0.
    pub fn from_dimacs(lit: i64) -> Option<Self> {
        match lit {
            0 => None,
            l => Some(Literal {
                var: l.unsigned_abs() as usize,
                negated: l < 0,
            }),
        }
    }

    pub fn to_dimacs(self) -> i64 {
        if self.negated {
            -(self.var as i64)
        } else {
            self.var as i64
        }
    }

    /// `-1` for a negated occurrence, `+1` otherwise.
    pub fn sign(self) -> Spin {
        if self.negated {
            -1
        } else {
            1
        }
    }
}

impl std::ops::Not for Literal {
    type Output = Literal;

    fn not(self) -> Literal {
        Literal {
            var: self.var,
            negated: !self.negated,
        }
    }
}

impl fmt::Display for Literal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_dimacs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ConstraintKind {
    /// Satisfied iff an odd number of literals is true.
    Xor,
    /// Satisfied iff at least `threshold` literals are true.
    CardGe(usize),
    /// Satisfied iff at least one literal is true.
    Clause,
    /// Entry `idx` is the value when folded input `i` is true exactly for the
    /// set bits `i` of `idx`. Entries are `-1` (satisfied) or `+1`.
    TruthTable(Vec<Spin>),
}

impl ConstraintKind {
    pub fn name(&self) -> &'static str {
        match self {
            ConstraintKind::Xor => "xor",
            ConstraintKind::CardGe(_) => "card",
            ConstraintKind::Clause => "cnf",
            ConstraintKind::TruthTable(_) => "truth-table",
        }
    }

    pub fn is_symmetric(&self) -> bool {
        !matches!(self, ConstraintKind::TruthTable(_))
    }
}

/// A hybrid Boolean constraint over distinct variables.
///
/// Literals of symmetric kinds are kept sorted by variable; truth-table
/// literals keep their given order since the table is positional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    kind: ConstraintKind,
    literals: Vec<Literal>,
}

impl Constraint {
    pub fn new(kind: ConstraintKind, mut literals: Vec<Literal>) -> Result<Self> {
        if literals.is_empty() {
            return Err(Error::InvalidConstraint("no literals".into()));
        }
        if let Some(l) = literals.iter().find(|l| l.var == 0) {
            return Err(Error::InvalidConstraint(format!(
                "variable index must be >= 1, got {}",
                l.var
            )));
        }
        let mut vars: Vec<usize> = literals.iter().map(|l| l.var).collect();
        vars.sort_unstable();
        if let Some(w) = vars.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::InvalidConstraint(format!(
                "variable {} occurs twice",
                w[0]
            )));
        }
        let d = literals.len();
        match &kind {
            ConstraintKind::CardGe(k) if *k > d => {
                return Err(Error::InvalidConstraint(format!(
                    "threshold {k} exceeds arity {d}"
                )));
            }
            ConstraintKind::TruthTable(table) => {
                if d > MAX_TABLE_ARITY {
                    return Err(Error::ArityOverCap {
                        arity: d,
                        cap: MAX_TABLE_ARITY,
                    });
                }
                if table.len() != 1 << d {
                    return Err(Error::InvalidConstraint(format!(
                        "truth table has {} entries, expected {}",
                        table.len(),
                        1usize << d
                    )));
                }
                if let Some(v) = table.iter().find(|v| **v != 1 && **v != -1) {
                    return Err(Error::InvalidConstraint(format!(
                        "truth table entry {v} is not -1 or +1"
                    )));
                }
            }
            _ => {}
        }
        if kind.is_symmetric() {
            literals.sort_unstable_by_key(|l| l.var);
        }
        Ok(Constraint { kind, literals })
    }

    pub fn xor(literals: Vec<Literal>) -> Result<Self> {
        Self::new(ConstraintKind::Xor, literals)
    }

    pub fn card_ge(threshold: usize, literals: Vec<Literal>) -> Result<Self> {
        Self::new(ConstraintKind::CardGe(threshold), literals)
    }

    pub fn clause(literals: Vec<Literal>) -> Result<Self> {
        Self::new(ConstraintKind::Clause, literals)
    }

    pub fn truth_table(literals: Vec<Literal>, table: Vec<Spin>) -> Result<Self> {
        Self::new(ConstraintKind::TruthTable(table), literals)
    }

    pub fn kind(&self) -> &ConstraintKind {
        &self.kind
    }

    pub fn literals(&self) -> &[Literal] {
        &self.literals
    }

    pub fn arity(&self) -> usize {
        self.literals.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.kind.is_symmetric()
    }

    /// The same constraint with every literal made positive.
    pub fn folded(&self) -> Constraint {
        Constraint {
            kind: self.kind.clone(),
            literals: self
                .literals
                .iter()
                .map(|l| Literal::pos(l.var))
                .collect(),
        }
    }

    /// Values `g(0..=d)` by number of true folded inputs, for symmetric kinds.
    pub fn count_values(&self) -> Option<Vec<Spin>> {
        self.is_symmetric()
            .then(|| (0..=self.arity()).map(|t| self.symmetric_value(t)).collect())
    }

    /// Value as a function of the number of true folded inputs. Only
    /// meaningful for symmetric kinds.
    fn symmetric_value(&self, trues: usize) -> Spin {
        let sat = match &self.kind {
            ConstraintKind::Xor => trues % 2 == 1,
            ConstraintKind::CardGe(k) => trues >= *k,
            ConstraintKind::Clause => trues >= 1,
            ConstraintKind::TruthTable(_) => unreachable!("truth tables are not symmetric"),
        };
        if sat {
            -1
        } else {
            1
        }
    }

    /// Value given the bitmask of raw inputs equal to `-1`. Bit `i` refers to
    /// literal position `i`.
    pub(crate) fn value_at_mask(&self, raw_true: u64) -> Spin {
        let neg_mask = self
            .literals
            .iter()
            .enumerate()
            .filter(|(_, l)| l.negated)
            .fold(0u64, |m, (i, _)| m | (1 << i));
        let folded = raw_true ^ neg_mask;
        match &self.kind {
            ConstraintKind::TruthTable(table) => table[folded as usize],
            _ => self.symmetric_value(folded.count_ones() as usize),
        }
    }

    /// Truth value at a `±1` input vector, one entry per literal position.
    pub fn evaluate_truth(&self, x: &[Spin]) -> Result<Spin> {
        if x.len() != self.arity() {
            return Err(Error::DimensionMismatch {
                expected: self.arity(),
                got: x.len(),
            });
        }
        let mut trues = 0usize;
        let mut index = 0usize;
        for (i, (&xi, lit)) in x.iter().zip(&self.literals).enumerate() {
            if xi != 1 && xi != -1 {
                return Err(Error::NotASpin {
                    index: i,
                    value: xi as f64,
                });
            }
            // folded input is true when sign * x == -1
            if xi * lit.sign() == -1 {
                trues += 1;
                if i < usize::BITS as usize {
                    index |= 1 << i;
                }
            }
        }
        Ok(match &self.kind {
            ConstraintKind::TruthTable(table) => table[index],
            _ => self.symmetric_value(trues),
        })
    }

    fn check_table_arity(&self) -> Result<()> {
        if self.arity() > MAX_TABLE_ARITY {
            return Err(Error::ArityOverCap {
                arity: self.arity(),
                cap: MAX_TABLE_ARITY,
            });
        }
        Ok(())
    }
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ConstraintKind::CardGe(k) => write!(f, "card {k}")?,
            kind => write!(f, "{}", kind.name())?,
        }
        for l in &self.literals {
            write!(f, " {l}")?;
        }
        Ok(())
    }
}

/// Walsh-Fourier coefficients of one hyperedge function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum FourierTable {
    /// `coeffs[k]` is shared by every subset of size `k`; length is `d + 1`.
    Symmetric(Vec<f64>),
    /// Nonzero coefficients keyed by subset bitmask over `arity` bits.
    General {
        arity: usize,
        coeffs: BTreeMap<u32, f64>,
    },
}

impl FourierTable {
    pub fn arity(&self) -> usize {
        match self {
            FourierTable::Symmetric(c) => c.len() - 1,
            FourierTable::General { arity, .. } => *arity,
        }
    }

    /// Coefficient of the monomial over the variables in `subset`.
    pub fn coefficient(&self, subset: u32) -> f64 {
        match self {
            FourierTable::Symmetric(c) => c
                .get(subset.count_ones() as usize)
                .copied()
                .unwrap_or(0.0),
            FourierTable::General { coeffs, .. } => coeffs.get(&subset).copied().unwrap_or(0.0),
        }
    }

    /// Number of stored coefficients.
    pub fn term_count(&self) -> usize {
        match self {
            FourierTable::Symmetric(c) => c.len(),
            FourierTable::General { coeffs, .. } => coeffs.len(),
        }
    }

    /// `sum_S |f(S)|` over all subsets.
    pub fn l1_mass(&self) -> f64 {
        match self {
            FourierTable::Symmetric(c) => {
                let d = c.len() - 1;
                let mut binom = 1.0f64;
                let mut total = 0.0;
                for (k, ck) in c.iter().enumerate() {
                    total += ck.abs() * binom;
                    binom = binom * (d - k) as f64 / (k + 1) as f64;
                }
                total
            }
            FourierTable::General { coeffs, .. } => coeffs.values().map(|c| c.abs()).sum(),
        }
    }

    /// Evaluates the multilinear polynomial at a real point.
    pub fn evaluate(&self, a: &[f64]) -> Result<f64> {
        match self {
            FourierTable::Symmetric(c) => convolution::evaluate_edge(c, a),
            FourierTable::General { arity, coeffs } => {
                check_len(*arity, a)?;
                Ok(coeffs
                    .iter()
                    .map(|(&mask, &c)| c * monomial(mask, a, usize::MAX))
                    .sum())
            }
        }
    }

    /// Gradient of the multilinear polynomial at a real point.
    pub fn gradient(&self, a: &[f64]) -> Result<Vec<f64>> {
        match self {
            FourierTable::Symmetric(c) => convolution::edge_gradient(c, a),
            FourierTable::General { arity, coeffs } => {
                check_len(*arity, a)?;
                let mut g = vec![0.0; *arity];
                for (&mask, &c) in coeffs {
                    let mut bits = mask;
                    while bits != 0 {
                        let j = bits.trailing_zeros() as usize;
                        bits &= bits - 1;
                        g[j] += c * monomial(mask, a, j);
                    }
                }
                Ok(g)
            }
        }
    }
}

fn check_len(arity: usize, a: &[f64]) -> Result<()> {
    if a.len() != arity {
        return Err(Error::DimensionMismatch {
            expected: arity,
            got: a.len(),
        });
    }
    Ok(())
}

/// Product of `a_i` over the set bits of `mask`, skipping position `skip`.
fn monomial(mask: u32, a: &[f64], skip: usize) -> f64 {
    let mut p = 1.0;
    let mut bits = mask;
    while bits != 0 {
        let i = bits.trailing_zeros() as usize;
        bits &= bits - 1;
        if i != skip {
            p *= a[i];
        }
    }
    p
}

/// One Walsh-Fourier coefficient by direct summation over all `2^d`
/// assignments. Bit `i` of `subset` selects literal position `i`.
pub fn fourier_coefficient(c: &Constraint, subset: u32) -> Result<f64> {
    c.check_table_arity()?;
    let d = c.arity();
    if (subset as u64) >> d != 0 {
        return Err(Error::InvalidParameter(format!(
            "subset {subset:#b} is not a bitmask over {d} bits"
        )));
    }
    let mut total: i64 = 0;
    for raw_true in 0..(1u64 << d) {
        let f = c.value_at_mask(raw_true) as i64;
        // x_i = -1 exactly on the bits of raw_true
        let parity = (raw_true & subset as u64).count_ones() % 2;
        total += if parity == 1 { -f } else { f };
    }
    Ok(total as f64 / (1u64 << d) as f64)
}

/// Full subset-indexed expansion, with literal signs included in the
/// polynomial. Zero coefficients are dropped.
pub fn compile_general(c: &Constraint) -> Result<FourierTable> {
    c.check_table_arity()?;
    let d = c.arity();
    let size = 1usize << d;
    let mut spectrum: Vec<i64> = (0..size as u64)
        .map(|m| c.value_at_mask(m) as i64)
        .collect();
    // in-place Walsh-Hadamard transform; bit set <=> x_i = -1
    let mut h = 1;
    while h < size {
        for block in (0..size).step_by(2 * h) {
            for i in block..block + h {
                let (u, v) = (spectrum[i], spectrum[i + h]);
                spectrum[i] = u + v;
                spectrum[i + h] = u - v;
            }
        }
        h *= 2;
    }
    let scale = size as f64;
    let coeffs = spectrum
        .into_iter()
        .enumerate()
        .filter(|(_, s)| *s != 0)
        .map(|(mask, s)| (mask as u32, s as f64 / scale))
        .collect();
    Ok(FourierTable::General { arity: d, coeffs })
}

/// Degree-indexed expansion of a symmetric constraint in its sign-folded
/// variables, in `O(d^2)`.
///
/// For `|S| = k`, the assignments are grouped by `j` true inputs inside `S`
/// and `l` outside, giving
/// `f(k) = sum_j C(k,j)(-1)^j / 2^k * sum_l C(d-k,l) / 2^(d-k) * g(j + l)`.
/// The inner sums for every `d - k` come from repeated pairwise sums of `g`,
/// and the signed binomial rows from repeated convolution with `[1, -1]`.
pub fn compile_symmetric(c: &Constraint) -> Result<FourierTable> {
    let numerators = symmetric_numerators(c)?;
    let scale = 0.5f64.powi(c.arity() as i32);
    let coeffs = numerators
        .iter()
        .map(|n| n.to_f64().expect("finite") * scale)
        .collect();
    Ok(FourierTable::Symmetric(coeffs))
}

/// Exact `2^d` multiples of the degree-indexed coefficients of
/// [`compile_symmetric`].
///
/// Integer arithmetic throughout: the coefficients span many orders of
/// magnitude at large `d`, so they are rounded only once.
pub fn symmetric_numerators(c: &Constraint) -> Result<Vec<BigInt>> {
    let g = c
        .count_values()
        .ok_or(Error::NotSymmetric(c.kind().name()))?;
    let d = c.arity();
    // inner[r][j] = sum_l C(r,l) g(j+l), j = 0..=d-r
    let mut inner: Vec<Vec<BigInt>> = Vec::with_capacity(d + 1);
    inner.push(g.into_iter().map(BigInt::from).collect());
    for r in 1..=d {
        let prev = &inner[r - 1];
        let next = prev.windows(2).map(|w| &w[0] + &w[1]).collect();
        inner.push(next);
    }
    let mut out = Vec::with_capacity(d + 1);
    // signed[j] = C(k,j)(-1)^j
    let mut signed = vec![BigInt::from(1)];
    for k in 0..=d {
        let g = &inner[d - k];
        out.push(signed.iter().zip(g).map(|(s, g)| s * g).sum());
        let mut next = vec![BigInt::zero(); k + 2];
        for (j, s) in signed.iter().enumerate() {
            next[j] += s;
            next[j + 1] -= s;
        }
        signed = next;
    }
    Ok(out)
}

/// Compiles `c` in its sign-folded variables, taking the symmetric path when
/// possible.
pub fn compile_folded(c: &Constraint) -> Result<FourierTable> {
    if c.is_symmetric() {
        compile_symmetric(c)
    } else {
        compile_general(&c.folded())
    }
}
