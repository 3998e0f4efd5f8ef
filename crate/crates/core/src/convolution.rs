//! Linear convolution, elementary-symmetric profiles and the bidirectional
//! cumulative-convolution gradient.
//!
//! Factors are ordered `[1, a_j]`, so index `k` of a profile is the degree-`k`
//! elementary symmetric polynomial `E_k(a)` and pairs with the Fourier
//! coefficient shared by all subsets of size `k`.

use crate::error::{Error, Result};

/// `(g * h)_i = sum_{j <= i} g_{i-j} h_j`.
pub fn convolve(g: &[f64], h: &[f64]) -> Result<Vec<f64>> {
    if g.is_empty() || h.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mut out = vec![0.0; g.len() + h.len() - 1];
    for (i, o) in out.iter_mut().enumerate() {
        let lo = i.saturating_sub(g.len() - 1);
        let hi = i.min(h.len() - 1);
        let mut acc = g[i - lo] * h[lo];
        for j in lo + 1..=hi {
            acc += g[i - j] * h[j];
        }
        *o = acc;
    }
    Ok(out)
}

/// Elementary symmetric polynomials `E_0..=E_d` of some inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct Profile(Vec<f64>);

impl Profile {
    /// The empty product, `[1]`.
    pub fn identity() -> Self {
        Profile(vec![1.0])
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }

    pub fn into_values(self) -> Vec<f64> {
        self.0
    }

    /// Number of factors folded in so far.
    pub fn degree(&self) -> usize {
        self.0.len() - 1
    }

    /// Convolves in one `[1, a]` factor. Same arithmetic, in the same order, as
    /// `convolve(self, [1, a])`.
    pub fn push_factor(&mut self, a: f64) {
        let top = self.0[self.0.len() - 1] * a;
        for k in (1..self.0.len()).rev() {
            self.0[k] += self.0[k - 1] * a;
        }
        self.0.push(top);
    }

    fn with_factor(&self, a: f64) -> Profile {
        let mut p = self.clone();
        p.push_factor(a);
        p
    }
}

/// Profile of all inputs, `O(d^2)`.
pub fn symmetric_profile(a: &[f64]) -> Profile {
    let mut p = Profile(Vec::with_capacity(a.len() + 1));
    p.0.push(1.0);
    for &x in a {
        p.push_factor(x);
    }
    p
}

/// Evaluates `sum_k coeffs[k] E_k(a)`, summing in ascending `k`.
pub fn evaluate_edge(coeffs: &[f64], a: &[f64]) -> Result<f64> {
    if coeffs.len() != a.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: coeffs.len().saturating_sub(1),
            got: a.len(),
        });
    }
    Ok(dot(coeffs, symmetric_profile(a).values()))
}

fn dot(coeffs: &[f64], profile: &[f64]) -> f64 {
    coeffs
        .iter()
        .zip(profile)
        .fold(0.0, |acc, (c, e)| acc + c * e)
}

/// Prefix and suffix profiles of one input vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CumulativePair {
    /// `seq[j]` is the profile of `a_1..a_j`.
    pub seq: Vec<Profile>,
    /// `rev[k]` is the profile of the last `k` inputs, folded from the back.
    pub rev: Vec<Profile>,
}

pub fn cumulative_pair(a: &[f64]) -> CumulativePair {
    let d = a.len();
    let mut seq = Vec::with_capacity(d + 1);
    let mut rev = Vec::with_capacity(d + 1);
    seq.push(Profile::identity());
    rev.push(Profile::identity());
    for j in 0..d {
        let next = seq[j].with_factor(a[j]);
        seq.push(next);
        let next = rev[j].with_factor(a[d - 1 - j]);
        rev.push(next);
    }
    CumulativePair { seq, rev }
}

/// Number of convolutions spent on one edge gradient.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GradientCost {
    /// Length-2 factor convolutions building the prefix and suffix profiles.
    pub factor_convolutions: usize,
    /// One prefix-by-suffix merge per coordinate.
    pub merge_convolutions: usize,
}

impl GradientCost {
    pub fn total(&self) -> usize {
        self.factor_convolutions + self.merge_convolutions
    }
}

/// Gradient of `sum_k coeffs[k] E_k(a)`.
///
/// `d/da_j E_k(a) = E_{k-1}(a without a_j)`, and the leave-one-out profile is
/// `seq[j-1] * rev[d-j]`.
pub fn edge_gradient(coeffs: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    edge_gradient_traced(coeffs, a).map(|(g, _)| g)
}

/// [`edge_gradient`] together with its convolution count.
pub fn edge_gradient_traced(coeffs: &[f64], a: &[f64]) -> Result<(Vec<f64>, GradientCost)> {
    if coeffs.len() != a.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: coeffs.len().saturating_sub(1),
            got: a.len(),
        });
    }
    let d = a.len();
    let cc = cumulative_pair(a);
    let mut cost = GradientCost {
        factor_convolutions: 2 * d,
        merge_convolutions: 0,
    };
    let mut grad = Vec::with_capacity(d);
    for j in 1..=d {
        let loo = convolve(cc.seq[j - 1].values(), cc.rev[d - j].values())?;
        cost.merge_convolutions += 1;
        grad.push(dot(&coeffs[1..], &loo));
    }
    Ok((grad, cost))
}

/// Distribution of the number of true inputs when input `j` is true with
/// probability `(1 - a_j) / 2`: the convolution of the factors
/// `[(1 + a_j) / 2, (1 - a_j) / 2]`.
///
/// `sum_t g(t) P_t(a)` is the same multilinear polynomial as
/// `sum_k coeffs[k] E_k(a)` for the symmetric function `g` of the number of
/// true inputs. On the cube every term is nonnegative, so it stays accurate at
/// arities where the alternating degree expansion cancels catastrophically.
pub fn count_profile(a: &[f64]) -> Vec<f64> {
    let mut p = Vec::with_capacity(a.len() + 1);
    p.push(1.0);
    for &x in a {
        push_count_factor(&mut p, x);
    }
    p
}

fn push_count_factor(p: &mut Vec<f64>, a: f64) {
    let (f, t) = ((1.0 + a) * 0.5, (1.0 - a) * 0.5);
    let top = p[p.len() - 1] * t;
    for k in (1..p.len()).rev() {
        p[k] = p[k] * f + p[k - 1] * t;
    }
    p[0] *= f;
    p.push(top);
}

fn check_counts(values: &[f64], a: &[f64]) -> Result<()> {
    if values.len() != a.len() + 1 {
        return Err(Error::DimensionMismatch {
            expected: values.len().saturating_sub(1),
            got: a.len(),
        });
    }
    Ok(())
}

/// Evaluates `sum_t values[t] P_t(a)` where `values[t]` is the function value
/// with `t` true inputs.
pub fn evaluate_counts(values: &[f64], a: &[f64]) -> Result<f64> {
    check_counts(values, a)?;
    Ok(dot(values, &count_profile(a)))
}

/// Gradient of [`evaluate_counts`] via prefix and suffix count profiles:
/// `d/da_j = 1/2 sum_t P_t(a without a_j) (values[t] - values[t+1])`.
pub fn counts_gradient(values: &[f64], a: &[f64]) -> Result<Vec<f64>> {
    check_counts(values, a)?;
    let d = a.len();
    let mut seq = Vec::with_capacity(d + 1);
    let mut rev = Vec::with_capacity(d + 1);
    seq.push(vec![1.0]);
    rev.push(vec![1.0]);
    for j in 0..d {
        let mut next = seq[j].clone();
        push_count_factor(&mut next, a[j]);
        seq.push(next);
        let mut next = rev[j].clone();
        push_count_factor(&mut next, a[d - 1 - j]);
        rev.push(next);
    }
    let drops: Vec<f64> = values.windows(2).map(|w| 0.5 * (w[0] - w[1])).collect();
    (1..=d)
        .map(|j| Ok(dot(&drops, &convolve(&seq[j - 1], &rev[d - j])?)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::{compile_symmetric, Constraint, FourierTable, Literal};
    use proptest::prelude::*;

    /// Definition-level convolution with no index clamping.
    fn convolve_naive(g: &[f64], h: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; g.len() + h.len() - 1];
        for (i, gi) in g.iter().enumerate() {
            for (j, hj) in h.iter().enumerate() {
                out[i + j] += gi * hj;
            }
        }
        out
    }

    #[test]
    fn convolve_examples() {
        assert_eq!(convolve(&[1.0, 2.0], &[3.0, 4.0]).unwrap(), vec![3.0, 10.0, 8.0]);
        let (a, b) = (0.25, -3.0);
        assert_eq!(
            convolve(&[1.0, a], &[1.0, b]).unwrap(),
            vec![1.0, a + b, a * b]
        );
        let g = [0.5, -1.0, 7.0];
        assert_eq!(convolve(&[1.0], &g).unwrap(), g.to_vec());
        assert_eq!(convolve(&[], &g), Err(Error::EmptyInput));
        assert_eq!(convolve(&g, &[]), Err(Error::EmptyInput));
    }

    #[test]
    fn profile_examples() {
        assert_eq!(
            symmetric_profile(&[1.0; 4]).values(),
            &[1.0, 4.0, 6.0, 4.0, 1.0]
        );
        assert_eq!(symmetric_profile(&[2.0, 3.0]).values(), &[1.0, 5.0, 6.0]);
        assert_eq!(symmetric_profile(&[0.0; 3]).values(), &[1.0, 0.0, 0.0, 0.0]);
        assert_eq!(symmetric_profile(&[]).values(), &[1.0]);
    }

    #[test]
    fn push_factor_matches_convolve_bitwise() {
        let a = [0.3, -1.7, 2.9, 0.01, -0.6];
        let mut p = Profile::identity();
        let mut q = vec![1.0];
        for &x in &a {
            p.push_factor(x);
            q = convolve(&q, &[1.0, x]).unwrap();
            assert_eq!(p.values(), &q[..]);
        }
    }

    #[test]
    fn evaluate_edge_examples() {
        let card = [-0.375, 0.375, 0.125, -0.125, -0.375];
        assert_eq!(evaluate_edge(&card, &[-1.0; 4]).unwrap(), -1.0);
        let xor2 = [0.0, 0.0, 1.0];
        assert_eq!(evaluate_edge(&xor2, &[0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(evaluate_edge(&card, &[0.0; 4]).unwrap(), card[0]);
        assert!(matches!(
            evaluate_edge(&card, &[0.0; 3]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn cumulative_pair_examples() {
        let cc = cumulative_pair(&[2.0, 3.0]);
        let seq: Vec<_> = cc.seq.iter().map(|p| p.values().to_vec()).collect();
        let rev: Vec<_> = cc.rev.iter().map(|p| p.values().to_vec()).collect();
        assert_eq!(seq, vec![vec![1.0], vec![1.0, 2.0], vec![1.0, 5.0, 6.0]]);
        assert_eq!(rev, vec![vec![1.0], vec![1.0, 3.0], vec![1.0, 5.0, 6.0]]);

        let cc = cumulative_pair(&[0.7]);
        assert_eq!(cc.seq, cc.rev);
        assert_eq!(cc.seq[1].values(), &[1.0, 0.7]);
    }

    #[test]
    fn edge_gradient_examples() {
        let xor2 = [0.0, 0.0, 1.0];
        assert_eq!(edge_gradient(&xor2, &[0.3, -0.7]).unwrap(), vec![-0.7, 0.3]);
        // linear terms of the card(2 of 4) expansion at the origin
        let card = [-0.375, 0.375, 0.125, -0.125, -0.375];
        assert_eq!(edge_gradient(&card, &[0.0; 4]).unwrap(), vec![0.375; 4]);
        assert!(edge_gradient(&card, &[0.0; 5]).is_err());
    }

    #[test]
    fn gradient_cost_is_at_most_3d() {
        for d in 1..12 {
            let coeffs = vec![0.1; d + 1];
            let a = vec![0.2; d];
            let (_, cost) = edge_gradient_traced(&coeffs, &a).unwrap();
            assert_eq!(cost.factor_convolutions, 2 * d);
            assert_eq!(cost.merge_convolutions, d);
            assert!(cost.total() <= 3 * d);
        }
    }

    fn small_vec(max: usize) -> impl Strategy<Value = Vec<f64>> {
        proptest::collection::vec(-3.0f64..3.0, 1..=max)
    }

    proptest! {
        #[test]
        fn convolve_matches_naive(g in small_vec(8), h in small_vec(8)) {
            let a = convolve(&g, &h).unwrap();
            let b = convolve_naive(&g, &h);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
        }

        #[test]
        fn convolve_commutes_and_associates(g in small_vec(8), h in small_vec(8), k in small_vec(8)) {
            let gh = convolve(&g, &h).unwrap();
            let hg = convolve(&h, &g).unwrap();
            for (x, y) in gh.iter().zip(&hg) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            let left = convolve(&gh, &k).unwrap();
            let right = convolve(&g, &convolve(&h, &k).unwrap()).unwrap();
            for (x, y) in left.iter().zip(&right) {
                prop_assert!((x - y).abs() < 1e-12 * (1.0 + x.abs()));
            }
        }

        #[test]
        fn seq_end_is_full_profile(a in small_vec(10)) {
            let cc = cumulative_pair(&a);
            prop_assert_eq!(&cc.seq[a.len()], &symmetric_profile(&a));
            let full = symmetric_profile(&a);
            for (x, y) in cc.rev[a.len()].values().iter().zip(full.values()) {
                prop_assert!((x - y).abs() < 1e-12 * (1.0 + y.abs()));
            }
        }

        #[test]
        fn gradient_matches_finite_differences(
            a in proptest::collection::vec(-1.0f64..1.0, 1..=8),
            seed in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let coeffs = &seed[..=a.len()];
            let g = edge_gradient(coeffs, &a).unwrap();
            let h = 1e-5;
            for j in 0..a.len() {
                let mut up = a.clone();
                let mut dn = a.clone();
                up[j] += h;
                dn[j] -= h;
                let fd = (evaluate_edge(coeffs, &up).unwrap() - evaluate_edge(coeffs, &dn).unwrap()) / (2.0 * h);
                prop_assert!((fd - g[j]).abs() < 1e-6, "j={} fd={} g={}", j, fd, g[j]);
            }
        }

        #[test]
        fn gradient_matches_leave_one_out_recomputation(
            a in proptest::collection::vec(-2.0f64..2.0, 1..=10),
            seed in proptest::collection::vec(-1.0f64..1.0, 11),
        ) {
            let d = a.len();
            let coeffs = &seed[..=d];
            let g = edge_gradient(coeffs, &a).unwrap();
            for j in 1..=d {
                // rebuild both halves from scratch, then merge and contract
                let mut front = vec![1.0];
                for &x in &a[..j - 1] {
                    front = convolve(&front, &[1.0, x]).unwrap();
                }
                let mut back = vec![1.0];
                for &x in a[j..].iter().rev() {
                    back = convolve(&back, &[1.0, x]).unwrap();
                }
                let loo = convolve(&front, &back).unwrap();
                let mut expect = 0.0;
                for k in 0..d {
                    expect += coeffs[k + 1] * loo[k];
                }
                prop_assert_eq!(g[j - 1].to_bits(), expect.to_bits());
            }
        }

        #[test]
        fn counts_agree_with_degree_expansion(
            d in 1usize..=10,
            k in 0usize..=10,
            a in proptest::collection::vec(-1.0f64..1.0, 10),
        ) {
            let k = k.min(d);
            let a = &a[..d];
            let lits = (1..=d).map(Literal::pos).collect();
            let c = Constraint::card_ge(k, lits).unwrap();
            let FourierTable::Symmetric(coeffs) = compile_symmetric(&c).unwrap() else { unreachable!() };
            let values = card_values(d, k);
            let x = evaluate_counts(&values, a).unwrap();
            let y = evaluate_edge(&coeffs, a).unwrap();
            prop_assert!((x - y).abs() < 1e-10);
            let gx = counts_gradient(&values, a).unwrap();
            let gy = edge_gradient(&coeffs, a).unwrap();
            for (p, q) in gx.iter().zip(&gy) {
                prop_assert!((p - q).abs() < 1e-10);
            }
        }
    }

    fn card_values(d: usize, k: usize) -> Vec<f64> {
        (0..=d).map(|t| if t >= k { -1.0 } else { 1.0 }).collect()
    }

    #[test]
    fn counts_examples() {
        assert_eq!(count_profile(&[-1.0, -1.0, 1.0]), vec![0.0, 0.0, 1.0, 0.0]);
        assert_eq!(count_profile(&[0.0, 0.0]), vec![0.25, 0.5, 0.25]);
        // XOR2 in count form: odd number of trues is satisfied
        let xor = [1.0, -1.0, 1.0];
        assert_eq!(evaluate_counts(&xor, &[0.5, 0.5]).unwrap(), 0.25);
        assert_eq!(counts_gradient(&xor, &[0.5, -0.25]).unwrap(), vec![-0.25, 0.5]);
        assert!(evaluate_counts(&xor, &[0.0]).is_err());
    }

    #[test]
    fn counts_stay_exact_at_large_arity() {
        let d = 128;
        let values = card_values(d, 64);
        for t in 0..=d {
            let a: Vec<f64> = (0..d).map(|i| if i < t { -1.0 } else { 1.0 }).collect();
            assert_eq!(evaluate_counts(&values, &a).unwrap(), values[t]);
        }
        let a: Vec<f64> = (0..d).map(|i| ((i * 37) % 17) as f64 / 8.5 - 1.0).collect();
        let g = counts_gradient(&values, &a).unwrap();
        let h = 1e-6;
        for j in [0, 5, 64, 127] {
            let mut up = a.clone();
            let mut dn = a.clone();
            up[j] += h;
            dn[j] -= h;
            let fd = (evaluate_counts(&values, &up).unwrap() - evaluate_counts(&values, &dn).unwrap()) / (2.0 * h);
            assert!((fd - g[j]).abs() < 1e-7, "{fd} {}", g[j]);
        }
    }
}
