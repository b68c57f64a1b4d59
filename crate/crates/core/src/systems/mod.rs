//! Prepotential-defined systems.
//!
//! A system is fixed by a real prepotential W(q) on a domain in R^r. From W
//! alone follow the classical potential V_C = |grad W|^2 / 2, the quantum
//! potential V = V_C + (hbar/2) tr hess W, and the transport operator
//! -grad W . grad whose polynomial eigenfunctions organize the O(hbar) part
//! of the spectrum. Built-in systems come with analytic gradients and
//! Hessians; user-defined ones fall back to central differences.

mod catalog;
mod eigenfunction;

pub use catalog::make_system;
pub use eigenfunction::{ClassicalEigenfunction, ModeLabel};

use std::collections::BTreeMap;
use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};

type ScalarFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;
type VectorFn = Arc<dyn Fn(&[f64]) -> Vec<f64> + Send + Sync>;
type MatrixFn = Arc<dyn Fn(&[f64]) -> DMatrix<f64> + Send + Sync>;
type DomainFn = Arc<dyn Fn(&[f64]) -> bool + Send + Sync>;
type StepLimitFn = Arc<dyn Fn(&[f64], &[f64]) -> Option<f64> + Send + Sync>;
type BoundCountFn = Arc<dyn Fn(f64) -> usize + Send + Sync>;
type ReferenceFn = Arc<dyn Fn(&[usize], f64) -> Option<f64> + Send + Sync>;

/// Relative step for central differences, floored away from zero.
pub(crate) fn fd_step(x: f64) -> f64 {
    1e-5 * x.abs().max(1.0)
}

/// An immutable prepotential system. Cheap to clone and safe to share
/// across threads; all evaluators are pure functions of the point.
#[derive(Clone)]
pub struct PrepotentialSystem {
    name: String,
    dimension: usize,
    params: BTreeMap<String, f64>,
    w: ScalarFn,
    grad: Option<VectorFn>,
    hess: Option<MatrixFn>,
    domain: DomainFn,
    default_guess: Vec<f64>,
    step_limit: Option<StepLimitFn>,
    bound_count: Option<BoundCountFn>,
    reference: Option<ReferenceFn>,
    eigenfunctions: Vec<ClassicalEigenfunction>,
}

impl std::fmt::Debug for PrepotentialSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PrepotentialSystem")
            .field("name", &self.name)
            .field("dimension", &self.dimension)
            .field("params", &self.params)
            .finish()
    }
}

impl PrepotentialSystem {
    pub fn builder(
        name: impl Into<String>,
        dimension: usize,
        w: impl Fn(&[f64]) -> f64 + Send + Sync + 'static,
    ) -> SystemBuilder {
        SystemBuilder {
            name: name.into(),
            dimension,
            params: BTreeMap::new(),
            w: Arc::new(w),
            grad: None,
            hess: None,
            domain: None,
            default_guess: None,
            step_limit: None,
            bound_count: None,
            reference: None,
            eigenfunctions: Vec::new(),
        }
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn params(&self) -> &BTreeMap<String, f64> {
        &self.params
    }

    /// True when `q` has the right dimension, finite entries, and lies in
    /// the (open) domain of the prepotential.
    pub fn in_domain(&self, q: &[f64]) -> bool {
        q.len() == self.dimension && q.iter().all(|x| x.is_finite()) && (self.domain)(q)
    }

    pub fn check_domain(&self, q: &[f64]) -> Result<()> {
        if q.len() != self.dimension {
            return Err(Error::DimensionMismatch {
                expected: self.dimension,
                got: q.len(),
            });
        }
        if self.in_domain(q) {
            Ok(())
        } else {
            Err(Error::OutsideDomain {
                system: self.name.clone(),
                point: q.to_vec(),
            })
        }
    }

    /// W(q).
    pub fn prepotential(&self, q: &[f64]) -> Result<f64> {
        self.check_domain(q)?;
        Ok((self.w)(q))
    }

    /// grad W(q); analytic when registered, otherwise central differences.
    pub fn gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        self.check_domain(q)?;
        if let Some(g) = &self.grad {
            return Ok(g(q));
        }
        let mut out = vec![0.0; self.dimension];
        let mut p = q.to_vec();
        for j in 0..self.dimension {
            let h = fd_step(q[j]);
            p[j] = q[j] + h;
            let wp = self.prepotential(&p)?;
            p[j] = q[j] - h;
            let wm = self.prepotential(&p)?;
            p[j] = q[j];
            out[j] = (wp - wm) / (2.0 * h);
        }
        Ok(out)
    }

    /// hess W(q); analytic when registered, otherwise central differences
    /// of the gradient, symmetrized.
    pub fn hessian(&self, q: &[f64]) -> Result<DMatrix<f64>> {
        self.check_domain(q)?;
        if let Some(h) = &self.hess {
            return Ok(h(q));
        }
        let r = self.dimension;
        let mut m = DMatrix::zeros(r, r);
        let mut p = q.to_vec();
        for j in 0..r {
            let h = fd_step(q[j]);
            p[j] = q[j] + h;
            let gp = self.gradient(&p)?;
            p[j] = q[j] - h;
            let gm = self.gradient(&p)?;
            p[j] = q[j];
            for i in 0..r {
                m[(i, j)] = (gp[i] - gm[i]) / (2.0 * h);
            }
        }
        // symmetrize: mixed partials commute, finite differences only nearly
        let mt = m.transpose();
        Ok((m + mt) * 0.5)
    }

    /// Classical potential V_C(q) = |grad W(q)|^2 / 2. Non-negative with its
    /// minimum value 0 at equilibrium.
    pub fn classical_potential(&self, q: &[f64]) -> Result<f64> {
        let g = self.gradient(q)?;
        Ok(0.5 * g.iter().map(|x| x * x).sum::<f64>())
    }

    /// Quantum potential V(q) = V_C(q) + (hbar/2) tr hess W(q).
    pub fn quantum_potential(&self, q: &[f64], hbar: f64) -> Result<f64> {
        if !(hbar > 0.0) || !hbar.is_finite() {
            return Err(Error::InvalidInput(format!(
                "hbar must be a positive finite number, got {hbar}"
            )));
        }
        let vc = self.classical_potential(q)?;
        let h = self.hessian(q)?;
        Ok(vc + 0.5 * hbar * h.trace())
    }

    /// Gradient of the classical potential, hess W . grad W.
    pub(crate) fn classical_potential_gradient(&self, q: &[f64]) -> Result<Vec<f64>> {
        let g = self.gradient(q)?;
        let h = self.hessian(q)?;
        let gv = nalgebra::DVector::from_column_slice(&g);
        Ok((h * gv).iter().copied().collect())
    }

    /// A domain-interior starting point for the equilibrium search.
    pub fn default_guess(&self) -> Vec<f64> {
        self.default_guess.clone()
    }

    /// Largest multiplier t such that q + s*dq stays in the domain for all
    /// s in [0, t], when the system can bound it (None = unbounded).
    pub fn step_limit(&self, q: &[f64], dq: &[f64]) -> Option<f64> {
        self.step_limit.as_ref().and_then(|f| f(q, dq))
    }

    /// Number of discrete levels below the continuum threshold at this hbar,
    /// for systems whose potential flattens out at infinity.
    pub fn bound_state_count(&self, hbar: f64) -> Option<usize> {
        self.bound_count.as_ref().map(|f| f(hbar))
    }

    pub fn has_reference_spectrum(&self) -> bool {
        self.reference.is_some()
    }

    /// Closed-form energy of the level with the given occupation numbers,
    /// when the system ships one (None otherwise or out of range).
    pub fn reference_energy(&self, occupations: &[usize], hbar: f64) -> Option<f64> {
        self.reference.as_ref().and_then(|f| f(occupations, hbar))
    }

    /// Closed-form eigenfunctions of the transport operator, when known.
    pub fn reference_eigenfunctions(&self) -> &[ClassicalEigenfunction] {
        &self.eigenfunctions
    }
}

/// Builder for user-defined systems; the catalog uses it too.
pub struct SystemBuilder {
    name: String,
    dimension: usize,
    params: BTreeMap<String, f64>,
    w: ScalarFn,
    grad: Option<VectorFn>,
    hess: Option<MatrixFn>,
    domain: Option<DomainFn>,
    default_guess: Option<Vec<f64>>,
    step_limit: Option<StepLimitFn>,
    bound_count: Option<BoundCountFn>,
    reference: Option<ReferenceFn>,
    eigenfunctions: Vec<ClassicalEigenfunction>,
}

impl SystemBuilder {
    pub fn param(mut self, key: impl Into<String>, value: f64) -> Self {
        self.params.insert(key.into(), value);
        self
    }

    pub fn gradient(mut self, f: impl Fn(&[f64]) -> Vec<f64> + Send + Sync + 'static) -> Self {
        self.grad = Some(Arc::new(f));
        self
    }

    pub fn hessian(
        mut self,
        f: impl Fn(&[f64]) -> DMatrix<f64> + Send + Sync + 'static,
    ) -> Self {
        self.hess = Some(Arc::new(f));
        self
    }

    /// Open-domain predicate; points failing it are rejected by every
    /// evaluator. Defaults to all of R^r.
    pub fn domain(mut self, f: impl Fn(&[f64]) -> bool + Send + Sync + 'static) -> Self {
        self.domain = Some(Arc::new(f));
        self
    }

    pub fn default_guess(mut self, q: Vec<f64>) -> Self {
        self.default_guess = Some(q);
        self
    }

    /// Bound on line-search steps toward the domain boundary:
    /// f(q, dq) = largest safe multiplier of dq from q, or None.
    pub fn step_limit(
        mut self,
        f: impl Fn(&[f64], &[f64]) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.step_limit = Some(Arc::new(f));
        self
    }

    pub fn bound_state_count(mut self, f: impl Fn(f64) -> usize + Send + Sync + 'static) -> Self {
        self.bound_count = Some(Arc::new(f));
        self
    }

    pub fn reference_spectrum(
        mut self,
        f: impl Fn(&[usize], f64) -> Option<f64> + Send + Sync + 'static,
    ) -> Self {
        self.reference = Some(Arc::new(f));
        self
    }

    pub fn eigenfunction(mut self, f: ClassicalEigenfunction) -> Self {
        self.eigenfunctions.push(f);
        self
    }

    pub fn build(self) -> Result<PrepotentialSystem> {
        if self.dimension == 0 {
            return Err(Error::InvalidParameter(
                "system dimension must be at least 1".into(),
            ));
        }
        for key in self.params.keys() {
            if key == "hbar" {
                // W must be a purely classical object; hbar enters only
                // through the quantum potential and the grid solver
                return Err(Error::InvalidParameter(
                    "`hbar` is not a system parameter: prepotentials must not depend on it"
                        .into(),
                ));
            }
        }
        for (key, value) in &self.params {
            if !value.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "parameter `{key}` must be finite, got {value}"
                )));
            }
        }
        for f in &self.eigenfunctions {
            if f.dimension() != self.dimension {
                return Err(Error::DimensionMismatch {
                    expected: self.dimension,
                    got: f.dimension(),
                });
            }
        }
        let domain = self
            .domain
            .unwrap_or_else(|| Arc::new(|_: &[f64]| true) as DomainFn);
        let default_guess = self.default_guess.unwrap_or_else(|| vec![0.0; self.dimension]);
        let system = PrepotentialSystem {
            name: self.name,
            dimension: self.dimension,
            params: self.params,
            w: self.w,
            grad: self.grad,
            hess: self.hess,
            domain,
            default_guess,
            step_limit: self.step_limit,
            bound_count: self.bound_count,
            reference: self.reference,
            eigenfunctions: self.eigenfunctions,
        };
        if !system.in_domain(&system.default_guess) {
            return Err(Error::InvalidParameter(format!(
                "default guess {:?} lies outside the domain of `{}`",
                system.default_guess,
                system.name()
            )));
        }
        Ok(system)
    }
}
