//! Candidate-function library `Y(x)`, control effectiveness `g(x)` and the right pseudoinverse.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{cholesky, cholesky_solve, symmetric_eigenvalues, Matrix};
use crate::scalar::Scalar;

pub type ScalarFn<S> = Arc<dyn Fn(&[S]) -> S + Send + Sync>;
pub type MatrixFn<S> = Arc<dyn Fn(&[S]) -> Matrix<S> + Send + Sync>;

/// One scalar candidate function `ℝⁿ → ℝ`.
#[derive(Clone)]
pub enum BasisFunction<S> {
    /// `∏ x_k^{e_k}`.
    Monomial(Vec<u32>),
    Custom {
        name: String,
        f: ScalarFn<S>,
    },
}

impl<S: Scalar> BasisFunction<S> {
    pub fn eval(&self, x: &[S]) -> S {
        match self {
            Self::Monomial(exps) => exps
                .iter()
                .zip(x)
                .fold(S::one(), |acc, (&e, &xi)| acc * xi.powi(e as i32)),
            Self::Custom { f, .. } => f(x),
        }
    }
}

impl<S> BasisFunction<S> {
    pub fn name(&self) -> String {
        match self {
            Self::Monomial(exps) => {
                let factors: Vec<String> = exps
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(k, &e)| match e {
                        1 => format!("x{}", k + 1),
                        _ => format!("x{}^{}", k + 1, e),
                    })
                    .collect();
                if factors.is_empty() {
                    "1".to_string()
                } else {
                    factors.join("*")
                }
            }
            Self::Custom { name, .. } => name.clone(),
        }
    }
}

impl<S> fmt::Debug for BasisFunction<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

/// All monomials in `n` variables of total degree at most `degree`, graded by degree and,
/// within a degree, ordered by descending exponent of the leading variables
/// (for two variables: `1, x1, x2, x1², x1x2, x2², x1³, x1²x2, x1x2², x2³`).
pub fn monomials(n: usize, degree: u32) -> Vec<Vec<u32>> {
    fn fill(rest: usize, budget: u32, prefix: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
        if rest == 1 {
            prefix.push(budget);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for e in (0..=budget).rev() {
            prefix.push(e);
            fill(rest - 1, budget - e, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    if n == 0 {
        return out;
    }
    for d in 0..=degree {
        fill(n, d, &mut Vec::with_capacity(n), &mut out);
    }
    out
}

/// How scalar-basis evaluations populate the `n × p` regressor.
#[derive(Clone, Debug, PartialEq)]
pub enum Layout {
    /// Row `i` holds `φ(x)ᵀ` in columns `i·L .. (i+1)·L`; `p = n·L`.
    BlockDiagonal,
    /// Each `(row, col, basis index)` entry sets `Y[row, col] = φ_index(x)`; remaining entries are zero.
    Explicit {
        p: usize,
        entries: Vec<(usize, usize, usize)>,
    },
}

#[derive(Clone, Debug)]
pub struct BasisLibrary<S> {
    n: usize,
    functions: Vec<BasisFunction<S>>,
    layout: Layout,
}

impl<S: Scalar> BasisLibrary<S> {
    pub fn new(n: usize, functions: Vec<BasisFunction<S>>, layout: Layout) -> Result<Self> {
        if n == 0 || functions.is_empty() {
            return Err(Error::InvalidConfig(
                "basis library needs a positive state dimension and at least one function".into(),
            ));
        }
        for f in &functions {
            if let BasisFunction::Monomial(e) = f {
                if e.len() != n {
                    return Err(Error::DimensionMismatch {
                        what: "monomial exponent vector",
                        expected: n,
                        got: e.len(),
                    });
                }
            }
        }
        if let Layout::Explicit { p, entries } = &layout {
            for &(r, c, k) in entries {
                if r >= n || c >= *p || k >= functions.len() {
                    return Err(Error::InvalidConfig(format!(
                        "layout entry ({r}, {c}, {k}) out of range"
                    )));
                }
            }
        }
        Ok(Self { n, functions, layout })
    }

    /// Block-diagonal library of all monomials of degree at most `degree`.
    pub fn polynomial(n: usize, degree: u32) -> Self {
        let functions = monomials(n, degree).into_iter().map(BasisFunction::Monomial).collect();
        Self::new(n, functions, Layout::BlockDiagonal).expect("monomial library is well formed")
    }

    /// The two-state cubic library: `Y(x) = blockdiag(φ(x)ᵀ, φ(x)ᵀ) ∈ ℝ^{2×20}`.
    pub fn cubic_2d() -> Self {
        Self::polynomial(2, 3)
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        match &self.layout {
            Layout::BlockDiagonal => self.n * self.functions.len(),
            Layout::Explicit { p, .. } => *p,
        }
    }

    pub fn functions(&self) -> &[BasisFunction<S>] {
        &self.functions
    }

    pub fn layout(&self) -> &Layout {
        &self.layout
    }

    fn check_dim(&self, x: &[S]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                what: "state vector",
                expected: self.n,
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Scalar basis `φ(x)` in library order.
    pub fn eval_phi(&self, x: &[S]) -> Result<Vec<S>> {
        self.check_dim(x)?;
        Ok(self.functions.iter().map(|f| f.eval(x)).collect())
    }

    /// Regressor `Y(x) ∈ ℝ^{n×p}`.
    pub fn eval_y(&self, x: &[S]) -> Result<Matrix<S>> {
        let mut y = Matrix::zeros(self.n, self.p());
        self.eval_y_into(x, &mut y)?;
        Ok(y)
    }

    /// Writes `Y(x)` into `out`, which must be `n × p`.
    pub fn eval_y_into(&self, x: &[S], out: &mut Matrix<S>) -> Result<()> {
        let phi = self.eval_phi(x)?;
        if out.shape() != (self.n, self.p()) {
            *out = Matrix::zeros(self.n, self.p());
        } else {
            out.fill_zero();
        }
        match &self.layout {
            Layout::BlockDiagonal => {
                let l = phi.len();
                for i in 0..self.n {
                    for (k, &v) in phi.iter().enumerate() {
                        out[(i, i * l + k)] = v;
                    }
                }
            }
            Layout::Explicit { entries, .. } => {
                for &(r, c, k) in entries {
                    out[(r, c)] = phi[k];
                }
            }
        }
        Ok(())
    }

    /// Human-readable name of each parameter column, e.g. `dx2:x1^2*x2`.
    pub fn term_names(&self) -> Vec<String> {
        let mut names = vec![String::new(); self.p()];
        match &self.layout {
            Layout::BlockDiagonal => {
                let l = self.functions.len();
                for i in 0..self.n {
                    for (k, f) in self.functions.iter().enumerate() {
                        names[i * l + k] = format!("dx{}:{}", i + 1, f.name());
                    }
                }
            }
            Layout::Explicit { entries, .. } => {
                for &(r, c, k) in entries {
                    names[c] = format!("dx{}:{}", r + 1, self.functions[k].name());
                }
            }
        }
        names
    }
}

/// The fixed two-state cubic basis, evaluated without a library object.
pub fn eval_phi_cubic_2d<S: Scalar>(x: &[S]) -> Result<[S; 10]> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            what: "state vector for the two-state cubic basis",
            expected: 2,
            got: x.len(),
        });
    }
    let (a, b) = (x[0], x[1]);
    Ok([
        S::one(),
        a,
        b,
        a * a,
        a * b,
        b * b,
        a * a * a,
        a * a * b,
        a * b * b,
        b * b * b,
    ])
}

/// Control effectiveness `g(x) ∈ ℝ^{n×m}`.
#[derive(Clone)]
pub enum ControlEffectiveness<S> {
    Identity(usize),
    Constant(Matrix<S>),
    Custom { n: usize, m: usize, g: MatrixFn<S> },
}

impl<S: fmt::Debug> fmt::Debug for ControlEffectiveness<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Identity(n) => write!(f, "Identity({n})"),
            Self::Constant(m) => write!(f, "Constant({m:?})"),
            Self::Custom { n, m, .. } => write!(f, "Custom({n}x{m})"),
        }
    }
}

impl<S: Scalar> ControlEffectiveness<S> {
    pub fn n(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Constant(m) => m.rows(),
            Self::Custom { n, .. } => *n,
        }
    }

    pub fn m(&self) -> usize {
        match self {
            Self::Identity(n) => *n,
            Self::Constant(m) => m.cols(),
            Self::Custom { m, .. } => *m,
        }
    }

    pub fn eval(&self, x: &[S]) -> Matrix<S> {
        match self {
            Self::Identity(n) => Matrix::identity(*n),
            Self::Constant(m) => m.clone(),
            Self::Custom { g, .. } => g(x),
        }
    }

    /// `g(x) u`.
    pub fn apply(&self, x: &[S], u: &[S]) -> Vec<S> {
        match self {
            Self::Identity(_) => u.to_vec(),
            _ => self.eval(x).matvec(u),
        }
    }

    /// `g⁺(x)`.
    pub fn pseudoinverse(&self, x: &[S]) -> Result<Matrix<S>> {
        match self {
            Self::Identity(n) => Ok(Matrix::identity(*n)),
            _ => right_pseudoinverse(&self.eval(x)),
        }
    }

    /// Smallest singular value of `g(x)`.
    pub fn min_singular_value(&self, x: &[S]) -> Result<S> {
        let g = self.eval(x);
        let ggt = g.matmul(&g.transpose())?;
        let eig = symmetric_eigenvalues(&ggt)?;
        Ok(eig[0].max(S::zero()).sqrt())
    }

    /// Checks full row rank at every sampled state: smallest singular value above `floor`.
    pub fn check_full_row_rank(&self, states: &[Vec<S>], floor: S) -> Result<()> {
        if self.m() < self.n() {
            return Err(Error::InvalidConfig(format!(
                "control effectiveness is {}x{}; at least as many inputs as states are required",
                self.n(),
                self.m()
            )));
        }
        for x in states {
            let s = self.min_singular_value(x)?;
            if !(s > floor) {
                return Err(Error::RankDeficient(format!(
                    "smallest singular value {s:e} at x = {x:?} is not above {floor:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Right pseudoinverse `G⁺ = Gᵀ(GGᵀ)⁻¹` of a full-row-rank `G`.
pub fn right_pseudoinverse<S: Scalar>(g: &Matrix<S>) -> Result<Matrix<S>> {
    let (n, m) = g.shape();
    if m < n {
        return Err(Error::RankDeficient(format!(
            "{n}x{m} matrix cannot have full row rank"
        )));
    }
    let gt = g.transpose();
    let ggt = g.matmul(&gt)?;
    let eig = symmetric_eigenvalues(&ggt)?;
    let (lo, hi) = (eig[0], eig[n - 1]);
    let limit = S::lit(0.01) / S::epsilon();
    if !(lo > S::zero()) || hi / lo > limit {
        return Err(Error::RankDeficient(format!(
            "condition estimate of G·Gᵀ is {:e}",
            (hi / lo).as_f64()
        )));
    }
    let l = cholesky(&ggt).ok_or_else(|| Error::RankDeficient("G·Gᵀ not positive definite".into()))?;
    // (GGᵀ)⁻¹ G, transposed.
    let x = cholesky_solve(&l, g);
    Ok(x.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cubic_phi_at_reference_points() {
        assert_eq!(
            eval_phi_cubic_2d(&[0.0, 0.0]).unwrap(),
            [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
        );
        assert_eq!(eval_phi_cubic_2d(&[1.0, 1.0]).unwrap(), [1.0; 10]);
        assert_eq!(
            eval_phi_cubic_2d(&[2.0, -1.0]).unwrap(),
            [1.0, 2.0, -1.0, 4.0, -2.0, 1.0, 8.0, -4.0, 2.0, -1.0]
        );
        assert!(matches!(
            eval_phi_cubic_2d(&[1.0, 2.0, 3.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn generated_monomials_match_fixed_basis() {
        let lib = BasisLibrary::<f64>::cubic_2d();
        let names: Vec<String> = lib.functions().iter().map(BasisFunction::name).collect();
        assert_eq!(
            names,
            ["1", "x1", "x2", "x1^2", "x1*x2", "x2^2", "x1^3", "x1^2*x2", "x1*x2^2", "x2^3"]
        );
        let x = [0.3, -1.7];
        let fixed = eval_phi_cubic_2d(&x).unwrap();
        for (a, b) in lib.eval_phi(&x).unwrap().iter().zip(fixed) {
            assert!((a - b).abs() < 1e-15);
        }
    }

    #[test]
    fn y_is_block_diagonal() {
        let lib = BasisLibrary::<f64>::cubic_2d();
        assert_eq!((lib.n(), lib.p()), (2, 20));
        let y = lib.eval_y(&[0.0, 0.0]).unwrap();
        assert_eq!(y.shape(), (2, 20));
        assert_eq!(y[(0, 0)], 1.0);
        assert_eq!(y[(1, 10)], 1.0);
        assert_eq!(y.as_slice().iter().filter(|&&v| v != 0.0).count(), 2);
        let y = lib.eval_y(&[1.3, -0.4]).unwrap();
        for j in 0..10 {
            assert_eq!(y[(0, 10 + j)], 0.0);
            assert_eq!(y[(1, j)], 0.0);
            assert_eq!(y[(0, j)], y[(1, 10 + j)]);
        }
        assert!(lib.eval_y(&[1.0]).is_err());
    }

    #[test]
    fn explicit_layout() {
        let lib = BasisLibrary::<f64>::new(
            2,
            vec![BasisFunction::Monomial(vec![1, 0]), BasisFunction::Monomial(vec![0, 1])],
            Layout::Explicit {
                p: 3,
                entries: vec![(0, 0, 0), (1, 1, 1), (1, 2, 0)],
            },
        )
        .unwrap();
        let y = lib.eval_y(&[2.0, 5.0]).unwrap();
        assert_eq!(y.to_rows(), vec![vec![2.0, 0.0, 0.0], vec![0.0, 5.0, 2.0]]);
        assert!(BasisLibrary::<f64>::new(
            2,
            vec![BasisFunction::Monomial(vec![1, 0])],
            Layout::Explicit {
                p: 1,
                entries: vec![(2, 0, 0)]
            },
        )
        .is_err());
    }

    #[test]
    fn pseudoinverse_examples() {
        let i2 = Matrix::<f64>::identity(2);
        assert_eq!(right_pseudoinverse(&i2).unwrap(), i2);

        let d = Matrix::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let expected = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 0.25]]).unwrap();
        assert!(right_pseudoinverse(&d).unwrap().max_abs_diff(&expected) < 1e-15);

        // Gᵀ(GGᵀ)⁻¹ with GGᵀ = [[2,0],[0,1]] gives [[1/2,0],[0,1],[1/2,0]].
        let g = Matrix::from_rows(&[vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 0.0]]).unwrap();
        let gp = right_pseudoinverse(&g).unwrap();
        let by_hand = Matrix::from_rows(&[vec![0.5, 0.0], vec![0.0, 1.0], vec![0.5, 0.0]]).unwrap();
        assert!(gp.max_abs_diff(&by_hand) < 1e-15);
        assert!(g.matmul(&gp).unwrap().max_abs_diff(&i2) < 1e-10);
    }

    #[test]
    fn pseudoinverse_rejects_rank_deficiency() {
        let g = Matrix::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        assert!(matches!(right_pseudoinverse(&g), Err(Error::RankDeficient(_))));
        let tall = Matrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap();
        assert!(matches!(right_pseudoinverse(&tall), Err(Error::RankDeficient(_))));
    }

    #[test]
    fn full_row_rank_check() {
        let g = ControlEffectiveness::<f64>::Identity(2);
        assert!(g.check_full_row_rank(&[vec![0.0, 0.0], vec![1.0, -2.0]], 1e-6).is_ok());
        let degenerate = ControlEffectiveness::Custom {
            n: 2,
            m: 2,
            g: Arc::new(|x: &[f64]| Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, x[0]]]).unwrap()),
        };
        assert!(degenerate.check_full_row_rank(&[vec![1.0, 0.0]], 1e-6).is_ok());
        assert!(degenerate.check_full_row_rank(&[vec![0.0, 0.0]], 1e-6).is_err());
    }
}
