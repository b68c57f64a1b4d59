//! Closed-form eigenfunctions of the classical transport operator.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

type ValueFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type GradientFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;

/// How an eigenfunction was built out of the elementary excitations.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModeLabel {
    /// The constant function (eigenvalue zero).
    Constant,
    /// The j-th elementary excitation, 1-based.
    Elementary(usize),
    /// A product of elementary excitations with the given powers.
    Monomial(Vec<usize>),
}

impl ModeLabel {
    /// Occupation-number view of the label; `modes` is the number of
    /// elementary excitations of the parent system.
    pub fn occupations(&self, modes: usize) -> Vec<usize> {
        match self {
            ModeLabel::Constant => vec![0; modes],
            ModeLabel::Elementary(j) => {
                let mut v = vec![0; modes];
                if *j >= 1 && *j <= modes {
                    v[*j - 1] = 1;
                }
                v
            }
            ModeLabel::Monomial(v) => {
                let mut out = v.clone();
                out.resize(modes, 0);
                out
            }
        }
    }
}

impl fmt::Display for ModeLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ModeLabel::Constant => write!(f, "constant"),
            ModeLabel::Elementary(j) => write!(f, "elementary-{j}"),
            ModeLabel::Monomial(v) => {
                write!(f, "(")?;
                for (i, n) in v.iter().enumerate() {
                    if i > 0 {
                        write!(f, ",")?;
                    }
                    write!(f, "{n}")?;
                }
                write!(f, ")")
            }
        }
    }
}

/// A function phi with  -grad W . grad phi = (eigenvalue) * phi,
/// carried around with its analytic gradient.
#[derive(Clone)]
pub struct ClassicalEigenfunction {
    dimension: usize,
    label: ModeLabel,
    eigenvalue: f64,
    value_fn: ValueFn,
    gradient_fn: GradientFn,
}

impl fmt::Debug for ClassicalEigenfunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ClassicalEigenfunction")
            .field("dimension", &self.dimension)
            .field("label", &self.label)
            .field("eigenvalue", &self.eigenvalue)
            .finish()
    }
}

impl ClassicalEigenfunction {
    pub fn new(
        dimension: usize,
        label: ModeLabel,
        eigenvalue: f64,
        value_fn: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
        gradient_fn: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static,
    ) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidInput(
                "eigenfunction dimension must be at least 1".into(),
            ));
        }
        if !eigenvalue.is_finite() || eigenvalue < 0.0 {
            return Err(Error::InvalidInput(format!(
                "classical eigenvalue must be finite and non-negative, got {eigenvalue}"
            )));
        }
        Ok(Self {
            dimension,
            label,
            eigenvalue,
            value_fn: Arc::new(value_fn),
            gradient_fn: Arc::new(gradient_fn),
        })
    }

    /// The constant eigenfunction phi = 1 with eigenvalue 0.
    pub fn constant_unit(dimension: usize) -> Self {
        Self {
            dimension,
            label: ModeLabel::Constant,
            eigenvalue: 0.0,
            value_fn: Arc::new(|_: &[f64]| 1.0),
            gradient_fn: Arc::new(move |_: &[f64]| vec![0.0; dimension]),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn label(&self) -> &ModeLabel {
        &self.label
    }

    pub fn eigenvalue(&self) -> f64 {
        self.eigenvalue
    }

    pub fn value(&self, q: &[f64]) -> f64 {
        (self.value_fn)(q)
    }

    pub fn gradient(&self, q: &[f64]) -> Vec<f64> {
        (self.gradient_fn)(q)
    }

    /// Pointwise product. Eigenvalues add; labels combine as occupation sums.
    pub fn product(&self, other: &ClassicalEigenfunction) -> Result<ClassicalEigenfunction> {
        if self.dimension != other.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: other.dimension,
            });
        }
        let label = match (&self.label, &other.label) {
            (ModeLabel::Constant, l) => l.clone(),
            (l, ModeLabel::Constant) => l.clone(),
            (a, b) => {
                // occupations() pads with the system dimension; for labels the
                // elementary-mode count is what matters, so take the longer view
                let modes = self
                    .dimension
                    .max(match b {
                        ModeLabel::Monomial(v) => v.len(),
                        _ => 0,
                    })
                    .max(match a {
                        ModeLabel::Monomial(v) => v.len(),
                        _ => 0,
                    });
                let mut occ = a.occupations(modes);
                for (o, e) in occ.iter_mut().zip(b.occupations(modes)) {
                    *o += e;
                }
                ModeLabel::Monomial(occ)
            }
        };
        let fa = Arc::clone(&self.value_fn);
        let fb = Arc::clone(&other.value_fn);
        let ga = Arc::clone(&self.gradient_fn);
        let gb = Arc::clone(&other.gradient_fn);
        let fa2 = Arc::clone(&self.value_fn);
        let fb2 = Arc::clone(&other.value_fn);
        Ok(ClassicalEigenfunction {
            dimension: self.dimension,
            label,
            eigenvalue: self.eigenvalue + other.eigenvalue,
            value_fn: Arc::new(move |q: &[f64]| fa(q) * fb(q)),
            gradient_fn: Arc::new(move |q: &[f64]| {
                let va = fa2(q);
                let vb = fb2(q);
                ga(q)
                    .into_iter()
                    .zip(gb(q))
                    .map(|(da, db)| da * vb + va * db)
                    .collect()
            }),
        })
    }
}
