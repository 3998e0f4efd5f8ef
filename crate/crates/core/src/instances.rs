//! Hybrid formulas: the text format, the parity-learning-with-error generator,
//! and conversion to Ising models.
//!
//! ```text
//! c <comment>
//! p hybrid <n> <num_constraints>
//! [w <weight>] xor  <lit> ... 0
//! [w <weight>] card <k> <lit> ... 0
//! [w <weight>] cnf  <lit> ... 0
//! ```

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::constraints::{compile_folded, Constraint, ConstraintKind, Literal};
use crate::error::{Error, Result};
use crate::hamiltonian::{HyperEdge, HyperIsingModel};
use crate::Spin;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedConstraint {
    pub constraint: Constraint,
    /// Explicit weight; `None` defers to the [`WeightRule`].
    pub weight: Option<f64>,
}

/// A conjunction of hybrid constraints over variables `1..=n`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct HybridFormula {
    pub n: usize,
    pub constraints: Vec<WeightedConstraint>,
    pub comments: Vec<String>,
}

impl HybridFormula {
    pub fn new(n: usize) -> Self {
        HybridFormula {
            n,
            ..Default::default()
        }
    }

    pub fn push(&mut self, constraint: Constraint, weight: Option<f64>) -> Result<()> {
        if let Some(l) = constraint.literals().iter().find(|l| l.var > self.n) {
            return Err(Error::InvalidConstraint(format!(
                "literal {l} is out of range for n = {}",
                self.n
            )));
        }
        if let Some(w) = weight {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidConstraint(format!("weight must be positive, got {w}")));
            }
        }
        self.constraints.push(WeightedConstraint { constraint, weight });
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
#[error("line {line}: {kind}")]
pub struct ParseError {
    pub line: usize,
    pub kind: ParseErrorKind,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseErrorKind {
    #[error("malformed header: {0}")]
    Header(String),
    #[error("constraint before the `p hybrid` header")]
    MissingHeader,
    #[error("unknown constraint tag `{0}`")]
    UnknownTag(String),
    #[error("literal {lit} is out of range 1..={n}")]
    LiteralOutOfRange { lit: i64, n: usize },
    #[error("missing terminating 0")]
    MissingTerminator,
    #[error("tokens after the terminating 0")]
    TrailingTokens,
    #[error("weight must be positive, got `{0}`")]
    NonPositiveWeight(String),
    #[error("invalid number `{0}`")]
    InvalidNumber(String),
    #[error("header declares {declared} constraints, found {found}")]
    CountMismatch { declared: usize, found: usize },
    #[error("{0}")]
    Constraint(String),
}

fn err(line: usize, kind: ParseErrorKind) -> ParseError {
    ParseError { line, kind }
}

pub fn parse(text: &str) -> Result<HybridFormula, ParseError> {
    let mut header: Option<(usize, usize)> = None;
    let mut formula = HybridFormula::default();
    let mut last_line = 0;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        last_line = line;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if trimmed == "c" {
            formula.comments.push(String::new());
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("c ").or_else(|| trimmed.strip_prefix("c\t")) {
            formula.comments.push(rest.to_string());
            continue;
        }
        let tokens: Vec<&str> = trimmed.split_whitespace().collect();
        if tokens[0] == "p" {
            if header.is_some() {
                return Err(err(line, ParseErrorKind::Header("duplicate header".into())));
            }
            header = Some(parse_header(line, &tokens)?);
            formula.n = header.unwrap().0;
            continue;
        }
        let Some((n, _)) = header else {
            return Err(err(line, ParseErrorKind::MissingHeader));
        };
        let (constraint, weight) = parse_constraint(line, n, &tokens)?;
        formula.constraints.push(WeightedConstraint { constraint, weight });
    }
    let Some((_, declared)) = header else {
        return Err(err(last_line.max(1), ParseErrorKind::MissingHeader));
    };
    if declared != formula.constraints.len() {
        return Err(err(
            last_line,
            ParseErrorKind::CountMismatch {
                declared,
                found: formula.constraints.len(),
            },
        ));
    }
    Ok(formula)
}

fn parse_header(line: usize, tokens: &[&str]) -> Result<(usize, usize), ParseError> {
    let bad = |msg: &str| err(line, ParseErrorKind::Header(msg.into()));
    if tokens.len() != 4 {
        return Err(bad("expected `p hybrid <n> <num_constraints>`"));
    }
    if tokens[1] != "hybrid" {
        return Err(bad(&format!("unknown format `{}`", tokens[1])));
    }
    let n = tokens[2]
        .parse()
        .map_err(|_| bad(&format!("invalid variable count `{}`", tokens[2])))?;
    let m = tokens[3]
        .parse()
        .map_err(|_| bad(&format!("invalid constraint count `{}`", tokens[3])))?;
    Ok((n, m))
}

fn parse_constraint(line: usize, n: usize, tokens: &[&str]) -> Result<(Constraint, Option<f64>), ParseError> {
    let mut rest = tokens;
    let mut weight = None;
    if rest[0] == "w" {
        let Some(tok) = rest.get(1) else {
            return Err(err(line, ParseErrorKind::InvalidNumber(String::new())));
        };
        let w: f64 = tok
            .parse()
            .map_err(|_| err(line, ParseErrorKind::InvalidNumber(tok.to_string())))?;
        if !(w.is_finite() && w > 0.0) {
            return Err(err(line, ParseErrorKind::NonPositiveWeight(tok.to_string())));
        }
        weight = Some(w);
        rest = &rest[2..];
    }
    let Some((&tag, mut rest)) = rest.split_first() else {
        return Err(err(line, ParseErrorKind::UnknownTag(String::new())));
    };
    let kind = match tag {
        "xor" => ConstraintKind::Xor,
        "cnf" => ConstraintKind::Clause,
        "card" => {
            let Some((&k, tail)) = rest.split_first() else {
                return Err(err(line, ParseErrorKind::MissingTerminator));
            };
            rest = tail;
            let k = k
                .parse()
                .map_err(|_| err(line, ParseErrorKind::InvalidNumber(k.to_string())))?;
            ConstraintKind::CardGe(k)
        }
        other => return Err(err(line, ParseErrorKind::UnknownTag(other.to_string()))),
    };
    let mut literals = Vec::new();
    let mut terminated = false;
    for (i, tok) in rest.iter().enumerate() {
        let lit: i64 = tok
            .parse()
            .map_err(|_| err(line, ParseErrorKind::InvalidNumber(tok.to_string())))?;
        if lit == 0 {
            if i + 1 != rest.len() {
                return Err(err(line, ParseErrorKind::TrailingTokens));
            }
            terminated = true;
            break;
        }
        if lit.unsigned_abs() as usize > n {
            return Err(err(line, ParseErrorKind::LiteralOutOfRange { lit, n }));
        }
        literals.push(Literal::from_dimacs(lit).expect("nonzero"));
    }
    if !terminated {
        return Err(err(line, ParseErrorKind::MissingTerminator));
    }
    let constraint =
        Constraint::new(kind, literals).map_err(|e| err(line, ParseErrorKind::Constraint(e.to_string())))?;
    Ok((constraint, weight))
}

/// Canonical text: comments, header, then one line per constraint in order.
/// Truth-table constraints have no text form.
pub fn serialize(f: &HybridFormula) -> Result<String> {
    let mut out = String::new();
    for c in &f.comments {
        if c.is_empty() {
            out.push_str("c\n");
        } else {
            let _ = writeln!(out, "c {c}");
        }
    }
    let _ = writeln!(out, "p hybrid {} {}", f.n, f.constraints.len());
    for wc in &f.constraints {
        if let Some(w) = wc.weight {
            let _ = write!(out, "w {w} ");
        }
        match wc.constraint.kind() {
            ConstraintKind::Xor => out.push_str("xor"),
            ConstraintKind::Clause => out.push_str("cnf"),
            ConstraintKind::CardGe(k) => {
                let _ = write!(out, "card {k}");
            }
            ConstraintKind::TruthTable(_) => {
                return Err(Error::Unsupported(
                    "truth-table constraints cannot be written in the hybrid text format".into(),
                ))
            }
        }
        for l in wc.constraint.literals() {
            let _ = write!(out, " {l}");
        }
        out.push_str(" 0\n");
    }
    Ok(out)
}

/// Weight given to constraints without an explicit one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum WeightRule {
    Unit,
    /// `w_e = |e|`.
    Arity,
}

pub fn to_model(f: &HybridFormula, rule: WeightRule) -> Result<HyperIsingModel> {
    let edges = f
        .constraints
        .iter()
        .map(|wc| {
            let w = wc.weight.unwrap_or(match rule {
                WeightRule::Unit => 1.0,
                WeightRule::Arity => wc.constraint.arity() as f64,
            });
            HyperEdge::new(wc.constraint.clone(), w)
        })
        .collect::<Result<Vec<_>>>()?;
    HyperIsingModel::new(f.n, edges)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct EncodingStats {
    /// Spins, `|V|`.
    pub variables: usize,
    /// Hyperedges, `|E|`.
    pub edges: usize,
    pub arity_histogram: BTreeMap<usize, usize>,
    /// Stored Fourier coefficients over all compiled edges.
    pub fourier_terms: usize,
}

pub fn encoding_stats(f: &HybridFormula) -> Result<EncodingStats> {
    let mut arity_histogram = BTreeMap::new();
    let mut fourier_terms = 0;
    for wc in &f.constraints {
        *arity_histogram.entry(wc.constraint.arity()).or_insert(0) += 1;
        fourier_terms += compile_folded(&wc.constraint)?.term_count();
    }
    Ok(EncodingStats {
        variables: f.n,
        edges: f.constraints.len(),
        arity_histogram,
        fourier_terms,
    })
}

/// Parameters of a parity-learning-with-error instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PleSpec {
    /// Number of parity bits.
    pub n: usize,
    /// Number of noisy samples.
    pub m: usize,
    /// Fault fraction `e` as a rational.
    pub noise_num: usize,
    pub noise_den: usize,
    pub seed: u64,
}

impl PleSpec {
    /// `m = 2n`, `e = 1/2`.
    pub fn new(n: usize, seed: u64) -> Self {
        PleSpec {
            n,
            m: 2 * n,
            noise_num: 1,
            noise_den: 2,
            seed,
        }
    }

    /// `floor(e * m)`.
    pub fn faults(&self) -> usize {
        self.m * self.noise_num / self.noise_den
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidParameter(format!(
                "need at least 2 parity bits, got {}",
                self.n
            )));
        }
        if self.m == 0 || self.noise_den == 0 || self.noise_num > self.noise_den {
            return Err(Error::InvalidParameter(format!(
                "invalid sample count {} or fault fraction {}/{}",
                self.m, self.noise_num, self.noise_den
            )));
        }
        Ok(())
    }
}

/// A generated formula together with the assignment it was built around.
#[derive(Debug, Clone, PartialEq)]
pub struct PlantedInstance {
    pub formula: HybridFormula,
    /// `±1` per variable, `-1` = true.
    pub planted: Vec<Spin>,
}

/// Parity learning with error as `m` slack-augmented XORs plus one
/// cardinality constraint.
///
/// Variables `1..=n` are parity bits and `n+j` is the slack of sample `j`,
/// true iff that sample's equation is violated. Exactly `floor(e m)` sample
/// outputs are flipped, so the planted secret satisfies the formula.
pub fn generate_ple(spec: &PleSpec) -> Result<PlantedInstance> {
    spec.validate()?;
    let (n, m, faults) = (spec.n, spec.m, spec.faults());
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let secret: Vec<bool> = (0..n).map(|_| rng.random_bool(0.5)).collect();
    let subsets: Vec<Vec<usize>> = (0..m)
        .map(|_| loop {
            let subset: Vec<usize> = (0..n).filter(|_| rng.random_bool(0.5)).collect();
            if !subset.is_empty() {
                break subset;
            }
        })
        .collect();
    let mut flipped = vec![false; m];
    for j in index::sample(&mut rng, m, faults) {
        flipped[j] = true;
    }

    let mut formula = HybridFormula::new(n + m);
    formula.comments = vec![
        format!(
            "parity learning with error: n={n} m={m} e={}/{} faults={faults} seed={}",
            spec.noise_num, spec.noise_den, spec.seed
        ),
        "subsets: each parity bit kept with probability 1/2, redrawn if empty".into(),
        format!("vars 1..{n} parity bits, {}..{} slack indicators", n + 1, n + m),
    ];
    for (j, subset) in subsets.iter().enumerate() {
        let parity = subset.iter().fold(false, |acc, &i| acc ^ secret[i]);
        let output = parity ^ flipped[j];
        let mut lits: Vec<Literal> = subset.iter().map(|&i| Literal::pos(i + 1)).collect();
        // XOR(x_A, y) must equal the output; a false output negates the slack
        let slack = n + j + 1;
        lits.push(if output { Literal::pos(slack) } else { Literal::neg(slack) });
        formula.push(Constraint::xor(lits)?, None)?;
    }
    let slacks = (n + 1..=n + m).map(Literal::neg).collect();
    formula.push(Constraint::card_ge(m - faults, slacks)?, None)?;

    let planted = secret
        .iter()
        .chain(&flipped)
        .map(|&b| if b { -1 } else { 1 })
        .collect();
    Ok(PlantedInstance { formula, planted })
}
