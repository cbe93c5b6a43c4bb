//! Communication weights shared by the particle, kinetic and hydrodynamic
//! solvers, together with the primitive of the singular weight and the
//! Fourier symbol of the fractional Laplacian on the 1-torus.

use crate::error::KernelError;

/// Family of communication weight.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelKind {
    /// `s^(-alpha)`, blows up at the origin.
    Singular,
    /// `(1 + s)^(-alpha)`, bounded by one.
    Regular,
    /// `(1 + s)^(-beta)`, the pattern-control weight. Callers pass the
    /// squared offset as the argument.
    ControlPhi,
}

/// A communication weight `psi` with its exponent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommKernel {
    kind: KernelKind,
    exponent: f64,
}

impl CommKernel {
    pub fn new(kind: KernelKind, exponent: f64) -> Result<Self, KernelError> {
        if !(exponent.is_finite() && exponent > 0.0) {
            return Err(KernelError::InvalidExponent(exponent));
        }
        Ok(Self { kind, exponent })
    }

    pub fn singular(alpha: f64) -> Result<Self, KernelError> {
        Self::new(KernelKind::Singular, alpha)
    }

    pub fn regular(alpha: f64) -> Result<Self, KernelError> {
        Self::new(KernelKind::Regular, alpha)
    }

    pub fn control_phi(beta: f64) -> Result<Self, KernelError> {
        Self::new(KernelKind::ControlPhi, beta)
    }

    pub fn kind(&self) -> KernelKind {
        self.kind
    }

    pub fn exponent(&self) -> f64 {
        self.exponent
    }

    pub fn is_singular(&self) -> bool {
        self.kind == KernelKind::Singular
    }

    /// Strongly singular weights (`alpha >= 1`) are not integrable at the
    /// origin, which rules out collisions.
    pub fn is_strongly_singular(&self) -> bool {
        self.is_singular() && self.exponent >= 1.0
    }

    /// Checked evaluation of the weight.
    pub fn eval(&self, s: f64) -> Result<f64, KernelError> {
        psi(self, s)
    }

    /// Evaluation without domain checks, for hot loops whose callers have
    /// already excluded `s <= 0` for singular weights.
    #[inline]
    pub fn eval_unchecked(&self, s: f64) -> f64 {
        match self.kind {
            KernelKind::Singular => s.powf(-self.exponent),
            KernelKind::Regular | KernelKind::ControlPhi => (1.0 + s).powf(-self.exponent),
        }
    }
}

/// Evaluates the communication weight at distance `s`.
pub fn psi(kernel: &CommKernel, s: f64) -> Result<f64, KernelError> {
    let ok = match kernel.kind {
        KernelKind::Singular => s > 0.0,
        KernelKind::Regular | KernelKind::ControlPhi => s >= 0.0,
    };
    if !ok || s.is_nan() {
        return Err(KernelError::Domain { kind: kernel.kind, s });
    }
    Ok(kernel.eval_unchecked(s))
}

/// Primitive `Psi` of the singular weight `s^(-alpha)`.
///
/// `alpha == 1` selects the logarithm by exact comparison; nearby exponents
/// use the power form.
pub fn psi_primitive(alpha: f64, s: f64) -> Result<f64, KernelError> {
    if !(alpha.is_finite() && alpha > 0.0) {
        return Err(KernelError::InvalidExponent(alpha));
    }
    if !(s > 0.0) {
        return Err(KernelError::PrimitiveDomain(s));
    }
    #[allow(clippy::float_cmp)]
    if alpha == 1.0 {
        Ok(s.ln())
    } else {
        Ok(s.powf(1.0 - alpha) / (1.0 - alpha))
    }
}

/// Fourier multiplier `|k|^gamma` of the fractional Laplacian on the torus.
///
/// # Panics
/// If `gamma` is outside `(0, 2)`.
pub fn frac_laplacian_symbol(gamma: f64, k: i64) -> f64 {
    assert!(gamma > 0.0 && gamma < 2.0, "gamma must lie in (0, 2), got {gamma}");
    if k == 0 {
        0.0
    } else {
        (k.unsigned_abs() as f64).powf(gamma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
        let n = if n % 2 == 1 { n + 1 } else { n };
        let h = (b - a) / n as f64;
        let mut acc = f(a) + f(b);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(a + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn psi_examples() {
        let k = CommKernel::singular(0.5).unwrap();
        assert_eq!(psi(&k, 1.0).unwrap(), 1.0);
        let k = CommKernel::singular(2.0).unwrap();
        assert!((psi(&k, 0.25).unwrap() - 16.0).abs() < 1e-12);
        let k = CommKernel::regular(1.0).unwrap();
        assert!((psi(&k, 1.0).unwrap() - 0.5).abs() < 1e-15);
    }

    #[test]
    fn psi_domain_errors() {
        let k = CommKernel::singular(1.0).unwrap();
        assert!(psi(&k, 0.0).is_err());
        assert!(psi(&k, -1.0).is_err());
        let r = CommKernel::regular(1.0).unwrap();
        assert_eq!(psi(&r, 0.0).unwrap(), 1.0);
        assert!(psi(&r, -1e-3).is_err());
        assert!(CommKernel::singular(0.0).is_err());
        assert!(CommKernel::control_phi(-1.0).is_err());
    }

    #[test]
    fn primitive_examples() {
        assert!((psi_primitive(0.5, 1.0).unwrap() - 2.0).abs() < 1e-15);
        assert_eq!(psi_primitive(1.0, 1.0).unwrap(), 0.0);
        assert!((psi_primitive(2.0, 1.0).unwrap() + 1.0).abs() < 1e-15);
        assert!(psi_primitive(0.5, 0.0).is_err());
    }

    #[test]
    fn primitive_minus_one_matches_quadrature() {
        // int_1^4 s^-2 ds = 3/4
        let k = CommKernel::singular(2.0).unwrap();
        let q = simpson(|s| k.eval_unchecked(s), 1.0, 4.0, 2000);
        let p = psi_primitive(2.0, 4.0).unwrap() - psi_primitive(2.0, 1.0).unwrap();
        assert!((q - 0.75).abs() < 1e-10);
        assert!((p - q).abs() / q < 1e-8);
    }

    #[test]
    fn primitive_alpha_one_branch_is_exact_comparison() {
        let near = psi_primitive(1.0 + 1e-12, 2.0).unwrap();
        // power form, huge because of the 1/(1-alpha) factor
        assert!(near.abs() > 1e10);
        assert!((psi_primitive(1.0, 2.0).unwrap() - 2f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn singular_weight_non_integrable_for_alpha_ge_one() {
        // integral over [eps, 1] grows without bound as eps shrinks for alpha >= 1,
        // and converges for alpha < 1
        let grow = |alpha: f64| {
            let k = CommKernel::singular(alpha).unwrap();
            let mut last = 0.0;
            let mut increments = Vec::new();
            for e in 1..=6 {
                let eps = 10f64.powi(-e);
                // log-substitution keeps the quadrature accurate near the origin
                let q = simpson(|u: f64| k.eval_unchecked(u.exp()) * u.exp(), eps.ln(), 0.0, 4000);
                increments.push(q - last);
                last = q;
            }
            increments
        };
        let strong = grow(1.0);
        assert!(strong.iter().skip(1).all(|d| (d - 10f64.ln()).abs() < 1e-6));
        let strong2 = grow(1.5);
        assert!(strong2.windows(2).all(|w| w[1] > w[0]));
        let weak = grow(0.5);
        assert!(weak.windows(2).all(|w| w[1] < w[0]));
        assert!(*weak.last().unwrap() < 1e-2);
    }

    #[test]
    fn symbol_examples() {
        assert_eq!(frac_laplacian_symbol(1.0, 0), 0.0);
        assert_eq!(frac_laplacian_symbol(1.0, 3), 3.0);
        assert_eq!(frac_laplacian_symbol(1.0, -3), 3.0);
        assert!((frac_laplacian_symbol(0.5, 4) - 2.0).abs() < 1e-15);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn monotone_in_distance(alpha in 0.05f64..3.0, a in 1e-3f64..10.0, gap in 1e-6f64..10.0, which in 0usize..3) {
                let kind = [KernelKind::Singular, KernelKind::Regular, KernelKind::ControlPhi][which];
                let k = CommKernel::new(kind, alpha).unwrap();
                prop_assert!(k.eval(a).unwrap() >= k.eval(a + gap).unwrap());
                prop_assert!(k.eval(a).unwrap() > 0.0);
            }

            #[test]
            fn primitive_consistent_with_quadrature(alpha in 0.1f64..2.5, a in 0.1f64..3.0, len in 0.01f64..3.0) {
                prop_assume!((alpha - 1.0).abs() > 1e-3);
                let b = a + len;
                let k = CommKernel::singular(alpha).unwrap();
                let q = simpson(|s| k.eval_unchecked(s), a, b, 4000);
                let p = psi_primitive(alpha, b).unwrap() - psi_primitive(alpha, a).unwrap();
                prop_assert!((p - q).abs() <= 1e-8 * q.abs());
            }
        }
    }
}
