//! Cancer-obesity dynamics with chemotherapy and immunotherapy.
//!
//! State `x = (T, I, F, D1, D2)`: tumor cells, immune cells, fat cells and the
//! two drug concentrations. Controls `u = (u1, u2)` are the chemo and immuno
//! doses. Every rate constant enters the fractional dynamics raised to the
//! power `alpha`, so [`ModelParams`] stores base values and [`Rates`] is the
//! derived, exponentiated view used by the kernels.
//!
//! ```text
//! T'  = r T (1 - p T) - xi1 T I + c1 T F - q1 D1 T
//! I'  = s + rho T^2 I / (h + T^2 + F^2) + beta D2 I / (g + D2)
//!         - xi2 T I - mu I - q2 D1 I
//! F'  = d F (1 - eps F) - c2 F T - q3 D1 F
//! D1' = u1 - gamma1 D1
//! D2' = u2 - gamma2 D2
//! ```
//!
//! `'` is the left Caputo derivative of order `alpha`.

use thiserror::Error;

use crate::scalar::Real;

/// Fat/tumor competition rate used when a configuration does not supply one.
///
/// The reference parameter set gives the two fat-competition rates only
/// symbolically. This value is calibrated, with
/// `c2 = c1`, so that the optimal combined-therapy cost at `alpha = 0.9`,
/// `gamma1 = 0.1` is 28.1606. See the README.
pub const FALLBACK_C1: f64 = 0.0463;
/// Tumor/fat competition rate fallback, see [`FALLBACK_C1`].
pub const FALLBACK_C2: f64 = 0.0463;

pub const STATE_DIM: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ParamError {
    #[error("alpha must lie in (0,1), got {0}")]
    Order(f64),
    #[error("parameter `{name}` must be strictly positive, got {value}")]
    NonPositive { name: &'static str, value: f64 },
}

/// Base model parameters (before exponentiation by `alpha`).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelParams<T> {
    /// Fractional order.
    pub alpha: T,
    /// Tumor growth rate.
    pub r: T,
    /// Reciprocal tumor carrying capacity.
    pub p: T,
    /// Tumor kill by immune cells.
    pub xi1: T,
    /// Immune kill by tumor cells.
    pub xi2: T,
    /// Fat-promoted tumor growth.
    pub c1: T,
    /// Tumor-driven fat loss.
    pub c2: T,
    pub q1: T,
    pub q2: T,
    pub q3: T,
    /// Immune source rate.
    pub s: T,
    /// Immune recruitment by tumor.
    pub rho: T,
    pub h: T,
    pub mu: T,
    /// Immune recruitment by the immunotherapy drug.
    pub beta: T,
    pub g: T,
    /// Fat growth rate.
    pub d: T,
    /// Reciprocal fat carrying capacity.
    pub eps: T,
    pub gamma1: T,
    pub gamma2: T,
    /// Cost weight on `u1^2`.
    pub omega1: T,
    /// Cost weight on `u2^2`.
    pub omega2: T,
}

impl<T: Real> Default for ModelParams<T> {
    fn default() -> Self {
        Self::table(T::lit(0.9))
    }
}

impl<T: Real> ModelParams<T> {
    /// Reference parameter set at fractional order `alpha`, with the
    /// [`FALLBACK_C1`]/[`FALLBACK_C2`] fat-competition rates.
    pub fn table(alpha: T) -> Self {
        let r = 0.00431;
        let p = 1.02e-9;
        let q2 = 2e-11;
        Self {
            alpha,
            r: T::lit(r),
            p: T::lit(p),
            xi1: T::lit(6.41e-11),
            xi2: T::lit(3.42e-6),
            c1: T::lit(FALLBACK_C1),
            c2: T::lit(FALLBACK_C2),
            q1: T::lit(0.08),
            q2: T::lit(q2),
            q3: T::lit(q2),
            s: T::lit(0.33),
            rho: T::lit(0.0125),
            h: T::lit(2.02e7),
            mu: T::lit(0.204),
            beta: T::lit(0.125),
            g: T::lit(2e7),
            d: T::lit(r / 100.0),
            eps: T::lit(p),
            gamma1: T::lit(0.1),
            gamma2: T::lit(1.0),
            omega1: T::lit(1.0),
            omega2: T::lit(2.0),
        }
    }

    /// Named base values, in declaration order (`alpha` excluded).
    pub fn named(&self) -> [(&'static str, T); 21] {
        [
            ("r", self.r),
            ("p", self.p),
            ("xi1", self.xi1),
            ("xi2", self.xi2),
            ("c1", self.c1),
            ("c2", self.c2),
            ("q1", self.q1),
            ("q2", self.q2),
            ("q3", self.q3),
            ("s", self.s),
            ("rho", self.rho),
            ("h", self.h),
            ("mu", self.mu),
            ("beta", self.beta),
            ("g", self.g),
            ("d", self.d),
            ("eps", self.eps),
            ("gamma1", self.gamma1),
            ("gamma2", self.gamma2),
            ("omega1", self.omega1),
            ("omega2", self.omega2),
        ]
    }

    /// Mutable access by field name, `alpha` included.
    pub fn field_mut(&mut self, name: &str) -> Option<&mut T> {
        Some(match name {
            "alpha" => &mut self.alpha,
            "r" => &mut self.r,
            "p" => &mut self.p,
            "xi1" => &mut self.xi1,
            "xi2" => &mut self.xi2,
            "c1" => &mut self.c1,
            "c2" => &mut self.c2,
            "q1" => &mut self.q1,
            "q2" => &mut self.q2,
            "q3" => &mut self.q3,
            "s" => &mut self.s,
            "rho" => &mut self.rho,
            "h" => &mut self.h,
            "mu" => &mut self.mu,
            "beta" => &mut self.beta,
            "g" => &mut self.g,
            "d" => &mut self.d,
            "eps" => &mut self.eps,
            "gamma1" => &mut self.gamma1,
            "gamma2" => &mut self.gamma2,
            "omega1" => &mut self.omega1,
            "omega2" => &mut self.omega2,
            _ => return None,
        })
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        if !(self.alpha > T::zero() && self.alpha < T::one()) {
            return Err(ParamError::Order(self.alpha.as_f64()));
        }
        for (name, v) in self.named() {
            if !(v > T::zero()) || !v.is_finite() {
                return Err(ParamError::NonPositive {
                    name,
                    value: v.as_f64(),
                });
            }
        }
        Ok(())
    }

    /// Exponentiated coefficients `base^alpha`. The cost weights are not
    /// exponentiated.
    pub fn rates(&self) -> Rates<T> {
        let a = self.alpha;
        let e = |x: T| x.powf(a);
        Rates {
            alpha: a,
            r: e(self.r),
            p: e(self.p),
            xi1: e(self.xi1),
            xi2: e(self.xi2),
            c1: e(self.c1),
            c2: e(self.c2),
            q1: e(self.q1),
            q2: e(self.q2),
            q3: e(self.q3),
            s: e(self.s),
            rho: e(self.rho),
            h: e(self.h),
            mu: e(self.mu),
            beta: e(self.beta),
            g: e(self.g),
            d: e(self.d),
            eps: e(self.eps),
            gamma1: e(self.gamma1),
            gamma2: e(self.gamma2),
            omega1: self.omega1,
            omega2: self.omega2,
        }
    }
}

/// Effective coefficients of the fractional system, each `base^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rates<T> {
    pub alpha: T,
    pub r: T,
    pub p: T,
    pub xi1: T,
    pub xi2: T,
    pub c1: T,
    pub c2: T,
    pub q1: T,
    pub q2: T,
    pub q3: T,
    pub s: T,
    pub rho: T,
    pub h: T,
    pub mu: T,
    pub beta: T,
    pub g: T,
    pub d: T,
    pub eps: T,
    pub gamma1: T,
    pub gamma2: T,
    pub omega1: T,
    pub omega2: T,
}

/// One sample of the state.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct StatePoint<T> {
    pub tumor: T,
    pub immune: T,
    pub fat: T,
    pub chemo: T,
    pub immuno: T,
}

impl<T: Real> StatePoint<T> {
    pub fn new(tumor: T, immune: T, fat: T, chemo: T, immuno: T) -> Self {
        Self {
            tumor,
            immune,
            fat,
            chemo,
            immuno,
        }
    }

    /// Initial condition of the reference runs: `(2, 0.1, 1, 0.5, 0.5)`.
    pub fn reference_initial() -> Self {
        Self::new(T::lit(2.0), T::lit(0.1), T::one(), T::lit(0.5), T::lit(0.5))
    }

    pub fn to_array(self) -> [T; 5] {
        [self.tumor, self.immune, self.fat, self.chemo, self.immuno]
    }

    pub fn from_array(a: [T; 5]) -> Self {
        Self::new(a[0], a[1], a[2], a[3], a[4])
    }

    pub fn is_nonnegative(&self) -> bool {
        self.to_array().iter().all(|v| *v >= T::zero())
    }
}

/// Chemo and immuno dose at one instant.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ControlPoint<T> {
    pub u1: T,
    pub u2: T,
}

impl<T: Real> ControlPoint<T> {
    pub fn new(u1: T, u2: T) -> Self {
        Self { u1, u2 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero())
    }

    /// Whether both doses lie in `[0, 1]`.
    pub fn is_admissible(&self) -> bool {
        let unit = |v: T| v >= T::zero() && v <= T::one();
        unit(self.u1) && unit(self.u2)
    }
}

/// Adjoint variables paired with `(T, I, F, D1, D2)`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct AdjointPoint<T> {
    pub lambda: [T; 5],
}

impl<T: Real> AdjointPoint<T> {
    pub fn new(lambda: [T; 5]) -> Self {
        Self { lambda }
    }

    pub fn zero() -> Self {
        Self::new([T::zero(); 5])
    }
}

impl<T: Real> Rates<T> {
    #[inline]
    fn immune_denominator(&self, x: &StatePoint<T>) -> T {
        self.h + x.tumor * x.tumor + x.fat * x.fat
    }

    /// Right-hand side of the state system.
    pub fn state_rhs(&self, x: &StatePoint<T>, u: &ControlPoint<T>) -> [T; 5] {
        let one = T::one();
        let StatePoint {
            tumor: t,
            immune: i,
            fat: f,
            chemo: d1,
            immuno: d2,
        } = *x;
        let big_h = self.immune_denominator(x);
        [
            self.r * t * (one - self.p * t) - self.xi1 * t * i + self.c1 * t * f - self.q1 * d1 * t,
            self.s + self.rho * t * t * i / big_h + self.beta * d2 * i / (self.g + d2)
                - self.xi2 * t * i
                - self.mu * i
                - self.q2 * d1 * i,
            self.d * f * (one - self.eps * f) - self.c2 * f * t - self.q3 * d1 * f,
            u.u1 - self.gamma1 * d1,
            u.u2 - self.gamma2 * d2,
        ]
    }

    /// Sum of absolute values of the individual terms in each component of
    /// [`Rates::state_rhs`]. Bounds the rounding error of the right-hand side.
    pub fn state_rhs_scale(&self, x: &StatePoint<T>, u: &ControlPoint<T>) -> [T; 5] {
        let StatePoint {
            tumor: t,
            immune: i,
            fat: f,
            chemo: d1,
            immuno: d2,
        } = *x;
        let a = |v: T| v.abs();
        let big_h = self.immune_denominator(x);
        [
            a(self.r * t) + a(self.r * self.p * t * t) + a(self.xi1 * t * i) + a(self.c1 * t * f)
                + a(self.q1 * d1 * t),
            a(self.s)
                + a(self.rho * t * t * i / big_h)
                + a(self.beta * d2 * i / (self.g + d2))
                + a(self.xi2 * t * i)
                + a(self.mu * i)
                + a(self.q2 * d1 * i),
            a(self.d * f) + a(self.d * self.eps * f * f) + a(self.c2 * f * t) + a(self.q3 * d1 * f),
            a(u.u1) + a(self.gamma1 * d1),
            a(u.u2) + a(self.gamma2 * d2),
        ]
    }

    /// Jacobian of [`Rates::state_rhs`] with respect to the state.
    pub fn state_jacobian(&self, x: &StatePoint<T>) -> [[T; 5]; 5] {
        let two = T::lit(2.0);
        let z = T::zero();
        let StatePoint {
            tumor: t,
            immune: i,
            fat: f,
            chemo: d1,
            immuno: d2,
        } = *x;
        let big_h = self.immune_denominator(x);
        let h2 = big_h * big_h;
        let gd = self.g + d2;
        [
            [
                self.r - two * self.r * self.p * t - self.xi1 * i + self.c1 * f - self.q1 * d1,
                -self.xi1 * t,
                self.c1 * t,
                -self.q1 * t,
                z,
            ],
            [
                two * self.rho * t * i * (self.h + f * f) / h2 - self.xi2 * i,
                self.rho * t * t / big_h + self.beta * d2 / gd - self.xi2 * t - self.mu - self.q2 * d1,
                -two * self.rho * t * t * i * f / h2,
                -self.q2 * i,
                self.beta * self.g * i / (gd * gd),
            ],
            [
                -self.c2 * f,
                z,
                self.d - two * self.d * self.eps * f - self.c2 * t - self.q3 * d1,
                -self.q3 * f,
                z,
            ],
            [z, z, z, -self.gamma1, z],
            [z, z, z, z, -self.gamma2],
        ]
    }

    /// Right Caputo derivative of the adjoint: `J(x)^T lambda + e_T`, where
    /// `e_T` is the gradient of the running cost with respect to the state.
    pub fn adjoint_rhs(&self, l: &AdjointPoint<T>, x: &StatePoint<T>) -> [T; 5] {
        let j = self.state_jacobian(x);
        let mut out = [T::zero(); 5];
        for (c, o) in out.iter_mut().enumerate() {
            *o = (0..5).map(|r| j[r][c] * l.lambda[r]).sum();
        }
        out[0] = out[0] + T::one();
        out
    }

    /// Running cost `T + omega1 u1^2 + omega2 u2^2`.
    pub fn cost_integrand(&self, x: &StatePoint<T>, u: &ControlPoint<T>) -> T {
        x.tumor + self.omega1 * u.u1 * u.u1 + self.omega2 * u.u2 * u.u2
    }
}

/// Right-hand side of the state system.
pub fn state_rhs<T: Real>(x: &StatePoint<T>, u: &ControlPoint<T>, p: &ModelParams<T>) -> [T; 5] {
    p.rates().state_rhs(x, u)
}

/// Jacobian of the state system with respect to `x`. The controls enter
/// additively, so `u` does not affect it.
pub fn state_jacobian<T: Real>(
    x: &StatePoint<T>,
    _u: &ControlPoint<T>,
    p: &ModelParams<T>,
) -> [[T; 5]; 5] {
    p.rates().state_jacobian(x)
}

pub fn adjoint_rhs<T: Real>(l: &AdjointPoint<T>, x: &StatePoint<T>, p: &ModelParams<T>) -> [T; 5] {
    p.rates().adjoint_rhs(l, x)
}

pub fn cost_integrand<T: Real>(x: &StatePoint<T>, u: &ControlPoint<T>, p: &ModelParams<T>) -> T {
    p.rates().cost_integrand(x, u)
}

/// Reference parameter set at `alpha = 0.9`.
pub fn default_params<T: Real>() -> ModelParams<T> {
    ModelParams::default()
}
