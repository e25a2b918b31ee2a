//! Truncated power-series arithmetic, generic over exact-rational and float
//! coefficients.
//!
//! A [`TruncatedSeries`] stores the coefficients `c_0..c_N` of a formal power
//! series truncated at an inclusive order `N`. All operations are plain
//! O(N^2) coefficient recurrences; binary operations truncate to the smaller
//! operand order so precision loss is explicit rather than silent.

use crate::error::{Error, Result};
use crate::scalar::Coeff;

/// A power series truncated at an inclusive order.
#[derive(Debug, Clone, PartialEq)]
pub struct TruncatedSeries<C: Coeff> {
    coeffs: Vec<C>,
}

/// Outcome of evaluating a truncated series at a point.
#[derive(Debug, Clone)]
pub struct EvalOutcome<C: Coeff> {
    /// Partial sum `sum c_n x^n` over the retained orders.
    pub value: C,
    /// Geometric estimate of the discarded tail, from the magnitude and decay
    /// ratio of the last retained terms.
    pub tail_estimate: f64,
    /// False when the terms do not show geometric decay at `x`, i.e. `|x|`
    /// is at or beyond the estimated radius of convergence.
    pub reliable: bool,
}

impl<C: Coeff> TruncatedSeries<C> {
    /// The zero series of the given inclusive order.
    pub fn zero(order: usize) -> Self {
        Self {
            coeffs: vec![C::zero(); order + 1],
        }
    }

    /// Series with the given low-order coefficients, truncated at `order`.
    pub fn from_coeffs(mut coeffs: Vec<C>, order: usize) -> Self {
        coeffs.resize(order + 1, C::zero());
        Self { coeffs }
    }

    /// The monomial `c * z^k`, truncated at `order`.
    pub fn monomial(c: C, k: usize, order: usize) -> Self {
        let mut s = Self::zero(order);
        if k <= order {
            s.coeffs[k] = c;
        }
        s
    }

    /// The constant series `c`.
    pub fn constant(c: C, order: usize) -> Self {
        Self::monomial(c, 0, order)
    }

    /// The identity series `z`.
    pub fn identity(order: usize) -> Self {
        Self::monomial(C::one(), 1, order)
    }

    /// Inclusive truncation order.
    pub fn order(&self) -> usize {
        self.coeffs.len() - 1
    }

    /// Coefficient of `z^n` (zero beyond the truncation order).
    pub fn coeff(&self, n: usize) -> C {
        self.coeffs.get(n).cloned().unwrap_or_else(C::zero)
    }

    /// All retained coefficients, lowest order first.
    pub fn coeffs(&self) -> &[C] {
        &self.coeffs
    }

    /// Overwrite the coefficient of `z^n`; no-op beyond the order.
    pub fn set_coeff(&mut self, n: usize, c: C) {
        if n < self.coeffs.len() {
            self.coeffs[n] = c;
        }
    }

    /// Copy truncated (or zero-extended) to a new inclusive order.
    pub fn with_order(&self, order: usize) -> Self {
        let mut coeffs = self.coeffs.clone();
        coeffs.resize(order + 1, C::zero());
        Self { coeffs }
    }

    /// True when every retained coefficient is zero.
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(C::is_zero)
    }

    /// Valuation: order of the lowest nonzero coefficient, if any.
    pub fn valuation(&self) -> Option<usize> {
        self.coeffs.iter().position(|c| !c.is_zero())
    }

    pub fn add(&self, rhs: &Self) -> Self {
        let order = self.order().min(rhs.order());
        let coeffs = (0..=order)
            .map(|i| self.coeffs[i].add(&rhs.coeffs[i]))
            .collect();
        Self { coeffs }
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        let order = self.order().min(rhs.order());
        let coeffs = (0..=order)
            .map(|i| self.coeffs[i].sub(&rhs.coeffs[i]))
            .collect();
        Self { coeffs }
    }

    pub fn neg(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(C::neg).collect(),
        }
    }

    /// Multiply every coefficient by a scalar.
    pub fn scale(&self, c: &C) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|a| a.mul(c)).collect(),
        }
    }

    /// Add `c * z^k` in place.
    pub fn add_monomial(&mut self, c: &C, k: usize) {
        if k < self.coeffs.len() {
            self.coeffs[k] = self.coeffs[k].add(c);
        }
    }

    /// Cauchy product, truncated to the smaller operand order.
    pub fn mul(&self, rhs: &Self) -> Self {
        let order = self.order().min(rhs.order());
        let coeffs = (0..=order)
            .map(|d| C::convolve_term(&self.coeffs, &rhs.coeffs, d))
            .collect();
        Self { coeffs }
    }

    /// Series exponential; requires a zero constant term.
    pub fn exp(&self) -> Result<Self> {
        if !self.coeffs[0].is_zero() {
            return Err(Error::SeriesDomain(
                "exp requires a zero constant term".into(),
            ));
        }
        let order = self.order();
        // (exp a)' = a' * exp a, so n b_n = sum_{k=1..n} k a_k b_{n-k}.
        let pa: Vec<C> = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| c.mul(&C::from_i64(k as i64)))
            .collect();
        let mut b = vec![C::zero(); order + 1];
        b[0] = C::one();
        for n in 1..=order {
            let s = C::convolve_term(&pa, &b, n);
            b[n] = s.div(&C::from_i64(n as i64));
        }
        Ok(Self { coeffs: b })
    }

    /// Series logarithm; requires a unit constant term.
    pub fn log(&self) -> Result<Self> {
        if self.coeffs[0] != C::one() {
            return Err(Error::SeriesDomain(
                "log requires a unit constant term".into(),
            ));
        }
        let order = self.order();
        // a b' = a' with b = log a: n b_n = n a_n - sum_{k=1..n-1} k b_k a_{n-k}.
        let mut pb = vec![C::zero(); order + 1];
        let mut b = vec![C::zero(); order + 1];
        for n in 1..=order {
            let n_c = C::from_i64(n as i64);
            let s = C::convolve_term(&pb, &self.coeffs, n);
            let bn = n_c.mul(&self.coeffs[n]).sub(&s).div(&n_c);
            pb[n] = bn.mul(&n_c);
            b[n] = bn;
        }
        Ok(Self { coeffs: b })
    }

    /// Principal square root; requires a constant term with a square root in
    /// the coefficient ring (positive in float mode).
    pub fn sqrt(&self) -> Result<Self> {
        let c0 = &self.coeffs[0];
        if c0.is_zero() {
            return Err(Error::SeriesDomain(
                "sqrt requires a nonzero constant term".into(),
            ));
        }
        let b0 = c0.sqrt().ok_or_else(|| {
            Error::SeriesDomain("sqrt: constant term has no square root in the ring".into())
        })?;
        let order = self.order();
        let two_b0 = b0.add(&b0);
        let mut b = vec![C::zero(); order + 1];
        b[0] = b0;
        for n in 1..=order {
            // a_n = sum_{k=0..n} b_k b_{n-k} => solve for b_n.
            let s = C::convolve_term(&b, &b, n);
            b[n] = self.coeffs[n].sub(&s).div(&two_b0);
        }
        Ok(Self { coeffs: b })
    }

    /// Multiplicative inverse; requires a nonzero constant term.
    pub fn recip(&self) -> Result<Self> {
        if self.coeffs[0].is_zero() {
            return Err(Error::SeriesDomain(
                "recip requires a nonzero constant term".into(),
            ));
        }
        let order = self.order();
        let mut b = vec![C::zero(); order + 1];
        b[0] = C::one().div(&self.coeffs[0]);
        for n in 1..=order {
            let s = C::convolve_term(&self.coeffs, &b, n);
            b[n] = s.neg().div(&self.coeffs[0]);
        }
        Ok(Self { coeffs: b })
    }

    /// Quotient `self / rhs`; requires `rhs` to have a nonzero constant term.
    pub fn div(&self, rhs: &Self) -> Result<Self> {
        if rhs.coeffs[0].is_zero() {
            return Err(Error::SeriesDomain(
                "div requires a divisor with nonzero constant term".into(),
            ));
        }
        let order = self.order().min(rhs.order());
        let mut b = vec![C::zero(); order + 1];
        for n in 0..=order {
            let s = C::convolve_term(&rhs.coeffs, &b, n);
            b[n] = self.coeffs[n].sub(&s).div(&rhs.coeffs[0]);
        }
        Ok(Self { coeffs: b })
    }

    /// Substitution `a(z^k)` for `k >= 1`, truncated at the same order.
    pub fn substitute_power(&self, k: usize) -> Self {
        self.substitute_power_with_order(k, self.order())
    }

    /// Substitution `a(z^k)` truncated at an explicit order.
    pub fn substitute_power_with_order(&self, k: usize, order: usize) -> Self {
        assert!(k >= 1, "substitute_power requires k >= 1");
        let mut out = Self::zero(order);
        for (i, c) in self.coeffs.iter().enumerate() {
            match i.checked_mul(k) {
                Some(j) if j <= order => out.coeffs[j] = c.clone(),
                _ => break,
            }
        }
        out
    }

    /// Substitution `a(z^k)` with a geometric reweighting: the coefficient of
    /// `z^{k m}` in the result is `c_m * q^m`.
    ///
    /// This is the substitution rule for series kept in rescaled coordinates
    /// `c_m = a_m * s^m`: with `q = s^(k-1)` the result holds
    /// `a_m * s^(k m)`, the correctly rescaled coefficients of `a(z^k)`.
    /// Powers of `q` are built by iterated multiplication; float underflow to
    /// zero in the deep tail is harmless because the rescaled coefficients it
    /// multiplies are already negligible there.
    pub fn substitute_power_geom(&self, k: usize, q: &C, order: usize) -> Self {
        assert!(k >= 1, "substitute_power_geom requires k >= 1");
        let mut out = Self::zero(order);
        let mut qp = C::one();
        for (i, c) in self.coeffs.iter().enumerate() {
            match i.checked_mul(k) {
                Some(j) if j <= order => out.coeffs[j] = c.mul(&qp),
                _ => break,
            }
            qp = qp.mul(q);
        }
        out
    }

    /// Quotient `self / rhs` allowing a divisor with zero constant term, as
    /// long as the divisor's valuation does not exceed the dividend's.
    ///
    /// Both operands are shifted down by the divisor valuation `v` and the
    /// ordinary division recurrence runs on the shifted series, so the result
    /// order is `min(self.order(), rhs.order()) - v`.
    pub fn div_val(&self, rhs: &Self) -> Result<Self> {
        let v = rhs.valuation().ok_or_else(|| {
            Error::SeriesDomain("div_val requires a nonzero divisor".into())
        })?;
        if let Some(sv) = self.valuation() {
            if sv < v {
                return Err(Error::SeriesDomain(
                    "div_val: dividend valuation below divisor valuation".into(),
                ));
            }
        }
        if v == 0 {
            return self.div(rhs);
        }
        let order = self.order().min(rhs.order());
        if order < v {
            return Err(Error::SeriesDomain(
                "div_val: divisor valuation exceeds the retained order".into(),
            ));
        }
        let num = Self::from_coeffs(self.coeffs[v..].to_vec(), order - v);
        let den = Self::from_coeffs(rhs.coeffs[v..].to_vec(), order - v);
        num.div(&den)
    }

    /// Pointing operator `z * d/dz`.
    pub fn point(&self) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(n, c)| c.mul(&C::from_i64(n as i64)))
            .collect();
        Self { coeffs }
    }

    /// Formal derivative, truncated at `order - 1` (order 0 input gives the
    /// zero series of order 0).
    pub fn derivative(&self) -> Self {
        if self.order() == 0 {
            return Self::zero(0);
        }
        let coeffs = (1..self.coeffs.len())
            .map(|n| self.coeffs[n].mul(&C::from_i64(n as i64)))
            .collect();
        Self { coeffs }
    }

    /// Horner evaluation of the partial sum at `x`, with a geometric estimate
    /// of the discarded tail.
    ///
    /// The estimate takes the trailing nonzero terms `|c_n x^n|`, fits a decay
    /// ratio, and reports `last * r / (1 - r)`. When the fitted ratio is at or
    /// above one the tail is divergent at `x` within the retained window and
    /// the outcome is flagged unreliable.
    pub fn eval_at(&self, x: &C) -> EvalOutcome<C> {
        let mut value = C::zero();
        for c in self.coeffs.iter().rev() {
            value = value.mul(x).add(c);
        }

        // Trailing |c_n x^n| window for the tail model.
        let xf = x.to_f64().abs();
        let mut terms: Vec<f64> = Vec::new();
        let window = 8usize;
        let mut pow = xf.powi(self.order() as i32);
        for n in (0..=self.order()).rev() {
            let t = self.coeffs[n].to_f64().abs() * pow;
            if t > 0.0 {
                terms.push(t);
                if terms.len() == window {
                    break;
                }
            }
            if xf > 0.0 {
                pow /= xf;
            } else {
                break;
            }
        }
        if terms.len() < 2 {
            // Not enough signal; an (almost) empty tail is reliable.
            return EvalOutcome {
                value,
                tail_estimate: terms.first().copied().unwrap_or(0.0),
                reliable: true,
            };
        }
        // terms[0] is the last retained term; terms are in reverse order.
        let ratios: Vec<f64> = terms.windows(2).map(|w| w[0] / w[1]).collect();
        let mean_log = ratios.iter().map(|r| r.ln()).sum::<f64>() / ratios.len() as f64;
        let r = mean_log.exp();
        if r.is_finite() && r < 1.0 {
            EvalOutcome {
                value,
                tail_estimate: terms[0] * r / (1.0 - r),
                reliable: true,
            }
        } else {
            EvalOutcome {
                value,
                tail_estimate: f64::INFINITY,
                reliable: false,
            }
        }
    }
}
