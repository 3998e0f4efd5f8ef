//! Weighted higher-order Ising models, their three continuous relaxations and
//! exact gradients.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::constraints::{compile_folded, Constraint, FourierTable};
use crate::convolution;
use crate::error::{Error, Result};
use crate::Spin;

/// How the discrete spins are relaxed to real values.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Relaxation {
    /// `H(a)` on `[-1, 1]^n`.
    TypeI,
    /// `H(a) + sum(a_i^4 - 2p a_i^2)` on `[-sqrt(p), sqrt(p)]^n`.
    TypeII,
    /// `H(sin a) + sum(cos 2a_i)` on `R^n`.
    TypeIII,
}

impl Relaxation {
    pub const ALL: [Relaxation; 3] = [Relaxation::TypeI, Relaxation::TypeII, Relaxation::TypeIII];

    /// Half-width of the box the spins live in, `None` when unconstrained.
    pub fn bound(self, p: f64) -> Option<f64> {
        match self {
            Relaxation::TypeI => Some(1.0),
            Relaxation::TypeII => Some(p.sqrt()),
            Relaxation::TypeIII => None,
        }
    }

    /// Relaxed objective without the domain check. Type I and II are
    /// polynomials and extend to all of `R^n`.
    pub fn objective(self, m: &HyperIsingModel, a: &[f64], p: f64) -> Result<f64> {
        m.check_len(a)?;
        Ok(match self {
            Relaxation::TypeI => hamiltonian(m, a)?,
            Relaxation::TypeII => {
                let lock: f64 = a.iter().map(|x| x.powi(4) - 2.0 * p * x * x).sum();
                hamiltonian(m, a)? + lock
            }
            Relaxation::TypeIII => {
                let s: Vec<f64> = a.iter().map(|x| x.sin()).collect();
                let lock: f64 = a.iter().map(|x| (2.0 * x).cos()).sum();
                hamiltonian(m, &s)? + lock
            }
        })
    }

    /// Gradient of [`Relaxation::objective`], without the domain check.
    pub fn gradient(self, m: &HyperIsingModel, a: &[f64], p: f64) -> Result<Vec<f64>> {
        m.check_len(a)?;
        Ok(match self {
            Relaxation::TypeI => hamiltonian_gradient(m, a)?,
            Relaxation::TypeII => {
                let mut g = hamiltonian_gradient(m, a)?;
                for (gi, x) in g.iter_mut().zip(a) {
                    *gi += 4.0 * x.powi(3) - 4.0 * p * x;
                }
                g
            }
            Relaxation::TypeIII => {
                let s: Vec<f64> = a.iter().map(|x| x.sin()).collect();
                let mut g = hamiltonian_gradient(m, &s)?;
                for (gi, x) in g.iter_mut().zip(a) {
                    *gi = x.cos() * *gi - 2.0 * (2.0 * x).sin();
                }
                g
            }
        })
    }

    /// Minimum of the relaxed objective for a satisfiable model.
    ///
    /// The Type II locking term bottoms out at `-p^2` per spin.
    pub fn target_energy(self, m: &HyperIsingModel, p: f64) -> f64 {
        let n = m.n() as f64;
        match self {
            Relaxation::TypeI => ground_energy(m),
            Relaxation::TypeII => ground_energy(m) - n * p * p,
            Relaxation::TypeIII => ground_energy(m) - n,
        }
    }
}

impl fmt::Display for Relaxation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relaxation::TypeI => "type-I",
            Relaxation::TypeII => "type-II",
            Relaxation::TypeIII => "type-III",
        })
    }
}

impl FromStr for Relaxation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let t = s.to_ascii_lowercase();
        let t = t.trim_start_matches("type").trim_start_matches(['-', '_']);
        match t {
            "1" | "i" => Ok(Relaxation::TypeI),
            "2" | "ii" => Ok(Relaxation::TypeII),
            "3" | "iii" => Ok(Relaxation::TypeIII),
            _ => Err(Error::InvalidParameter(format!("unknown relaxation `{s}`"))),
        }
    }
}

/// Symmetric edges above this arity are evaluated through the count
/// distribution instead of the degree expansion, which loses all accuracy near
/// the cube corners once `C(d, d/2)` approaches `1 / f64::EPSILON`.
pub const DEGREE_EXPANSION_MAX_ARITY: usize = 48;

/// One weighted hyperedge. `table` is expressed in sign-folded inputs
/// `signs[i] * x[vars[i]]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperEdge {
    constraint: Constraint,
    vars: Vec<usize>,
    signs: Vec<f64>,
    table: FourierTable,
    /// `g(t)` by number of true folded inputs, set for wide symmetric edges.
    counts: Option<Vec<f64>>,
    weight: f64,
}

impl HyperEdge {
    pub fn new(constraint: Constraint, weight: f64) -> Result<Self> {
        if !(weight.is_finite() && weight > 0.0) {
            return Err(Error::InvalidModel(format!(
                "edge weight must be positive, got {weight}"
            )));
        }
        let table = compile_folded(&constraint)?;
        let vars = constraint.literals().iter().map(|l| l.var - 1).collect();
        let signs = constraint
            .literals()
            .iter()
            .map(|l| l.sign() as f64)
            .collect();
        let counts = constraint
            .count_values()
            .filter(|g| g.len() > DEGREE_EXPANSION_MAX_ARITY + 1)
            .map(|g| g.into_iter().map(f64::from).collect());
        Ok(HyperEdge {
            constraint,
            vars,
            signs,
            table,
            counts,
            weight,
        })
    }

    pub fn constraint(&self) -> &Constraint {
        &self.constraint
    }

    /// 0-based variable indices.
    pub fn vars(&self) -> &[usize] {
        &self.vars
    }

    pub fn signs(&self) -> &[f64] {
        &self.signs
    }

    pub fn table(&self) -> &FourierTable {
        &self.table
    }

    pub fn weight(&self) -> f64 {
        self.weight
    }

    pub fn arity(&self) -> usize {
        self.vars.len()
    }

    fn fold(&self, x: &[f64]) -> Vec<f64> {
        self.vars
            .iter()
            .zip(&self.signs)
            .map(|(&v, s)| s * x[v])
            .collect()
    }

    /// Edge function value (unweighted) at a global state.
    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match &self.counts {
            Some(g) => convolution::evaluate_counts(g, &self.fold(x)),
            None => self.table.evaluate(&self.fold(x)),
        }
    }

    /// Gradient of [`Self::value`] with respect to the folded inputs.
    pub fn local_gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        match &self.counts {
            Some(g) => convolution::counts_gradient(g, &self.fold(x)),
            None => self.table.gradient(&self.fold(x)),
        }
    }

    /// Exact truth value at a global `±1` assignment.
    pub fn truth(&self, assignment: &[Spin]) -> Result<Spin> {
        let local: Vec<Spin> = self.vars.iter().map(|&v| assignment[v]).collect();
        self.constraint.evaluate_truth(&local)
    }
}

/// A weighted hypergraph of Boolean functions over `n` spins.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HyperIsingModel {
    n: usize,
    edges: Vec<HyperEdge>,
}

impl HyperIsingModel {
    pub fn new(n: usize, edges: Vec<HyperEdge>) -> Result<Self> {
        for (i, e) in edges.iter().enumerate() {
            if let Some(&v) = e.vars.iter().find(|&&v| v >= n) {
                return Err(Error::InvalidModel(format!(
                    "edge {i} references variable {} but n = {n}",
                    v + 1
                )));
            }
        }
        Ok(HyperIsingModel { n, edges })
    }

    /// Builds a model from `(constraint, weight)` pairs.
    pub fn from_constraints(
        n: usize,
        constraints: impl IntoIterator<Item = (Constraint, f64)>,
    ) -> Result<Self> {
        let edges = constraints
            .into_iter()
            .map(|(c, w)| HyperEdge::new(c, w))
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, edges)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[HyperEdge] {
        &self.edges
    }

    fn check_len<T>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// `sum_e w_e f_e(x_e)`.
pub fn hamiltonian(m: &HyperIsingModel, x: &[f64]) -> Result<f64> {
    m.check_len(x)?;
    let mut total = 0.0;
    for e in &m.edges {
        total += e.weight * e.value(x)?;
    }
    Ok(total)
}

/// `dH/dx`, scattering edge gradients in edge order.
pub fn hamiltonian_gradient(m: &HyperIsingModel, x: &[f64]) -> Result<Vec<f64>> {
    m.check_len(x)?;
    let mut g = vec![0.0; m.n];
    for e in &m.edges {
        let local = e.local_gradient(x)?;
        for ((&v, s), gl) in e.vars.iter().zip(&e.signs).zip(local) {
            g[v] += e.weight * s * gl;
        }
    }
    Ok(g)
}

/// `-sum_e w_e`, the energy of any satisfying assignment.
pub fn ground_energy(m: &HyperIsingModel) -> f64 {
    -m.edges.iter().map(|e| e.weight).sum::<f64>()
}

/// A relaxed spin vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpinState {
    pub a: Vec<f64>,
    pub relaxation: Relaxation,
    /// Type II domain parameter; ignored by the other relaxations.
    pub p: f64,
}

impl SpinState {
    pub fn new(a: Vec<f64>, relaxation: Relaxation, p: f64) -> Self {
        SpinState { a, relaxation, p }
    }

    pub fn check_domain(&self) -> Result<()> {
        if self.relaxation == Relaxation::TypeII && !(self.p > 0.0 && self.p.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "p must be positive, got {}",
                self.p
            )));
        }
        let bound = self.relaxation.bound(self.p).unwrap_or(f64::INFINITY);
        for (index, &value) in self.a.iter().enumerate() {
            if !value.is_finite() || value.abs() > bound {
                return Err(Error::OutsideDomain {
                    index,
                    value,
                    relaxation: self.relaxation,
                });
            }
        }
        Ok(())
    }
}

pub fn relaxed_objective(m: &HyperIsingModel, s: &SpinState) -> Result<f64> {
    s.check_domain()?;
    s.relaxation.objective(m, &s.a, s.p)
}

pub fn relaxed_gradient(m: &HyperIsingModel, s: &SpinState) -> Result<Vec<f64>> {
    s.check_domain()?;
    s.relaxation.gradient(m, &s.a, s.p)
}

/// Reads a Boolean assignment off a relaxed state; zeros round to `+1`.
pub fn round_to_assignment(s: &SpinState) -> Vec<Spin> {
    let sign = |x: f64| if x < 0.0 { -1 } else { 1 };
    match s.relaxation {
        Relaxation::TypeI | Relaxation::TypeII => s.a.iter().map(|&x| sign(x)).collect(),
        Relaxation::TypeIII => s.a.iter().map(|&x| sign(x.sin())).collect(),
    }
}

/// True iff every edge evaluates to `-1`, using exact truth evaluation.
pub fn is_satisfying(m: &HyperIsingModel, assignment: &[Spin]) -> Result<bool> {
    m.check_len(assignment)?;
    for e in &m.edges {
        if e.truth(assignment)? != -1 {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Exact satisfaction together with the floating-point energy identity.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SatisfactionReport {
    pub satisfied: bool,
    pub energy: f64,
    pub ground_energy: f64,
    /// `|energy - ground| <= 1e-6 |E|` agrees with `satisfied`.
    pub energy_consistent: bool,
}

pub fn satisfaction_report(m: &HyperIsingModel, assignment: &[Spin]) -> Result<SatisfactionReport> {
    let satisfied = is_satisfying(m, assignment)?;
    let x: Vec<f64> = assignment.iter().map(|&s| s as f64).collect();
    let energy = hamiltonian(m, &x)?;
    let ground = ground_energy(m);
    let at_ground = (energy - ground).abs() <= 1e-6 * m.edges.len().max(1) as f64;
    Ok(SatisfactionReport {
        satisfied,
        energy,
        ground_energy: ground,
        energy_consistent: at_ground == satisfied,
    })
}

/// Conservative weak-convexity constants. Diagnostic only.
///
/// `rho1 = max_i sum_{e ∋ i} w_e sum_S |f_e(S)|`; Type II adds `8p` for the
/// quartic locking term and Type III counts the edge mass twice plus 4.
pub fn weak_convexity_bound(m: &HyperIsingModel, relaxation: Relaxation, p: f64) -> f64 {
    let mut mass = vec![0.0; m.n];
    for e in &m.edges {
        let w = e.weight * e.table.l1_mass();
        for &v in &e.vars {
            mass[v] += w;
        }
    }
    let rho1 = mass.into_iter().fold(0.0, f64::max);
    match relaxation {
        Relaxation::TypeI => rho1,
        Relaxation::TypeII => rho1 + 8.0 * p,
        Relaxation::TypeIII => 2.0 * rho1 + 4.0,
    }
}
