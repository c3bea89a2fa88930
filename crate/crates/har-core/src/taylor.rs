//! Taylor polynomials, regularized models, and local Lipschitz estimators.
//!
//! `TaylorModel` is the order-p expansion of f at a center point and
//! `RegularizedModel` adds the `(p+1)`th-power term with weight sigma.
//! Two estimators recover a local Lipschitz constant from an executed step:
//! one from the function-value remainder, one from the gradient residual of
//! the regularized model (used by the accelerated method).

use ndarray::{Array1, Array2};

use crate::factorial;
use crate::{Error, Result};

/// Order-p Taylor polynomial of f at a fixed center, p in {1, 2}.
#[derive(Clone, Debug)]
pub struct TaylorModel {
    center: Array1<f64>,
    f0: f64,
    grad: Array1<f64>,
    hessian: Option<Array2<f64>>,
    order: usize,
}

impl TaylorModel {
    /// `order = 2` requires a Hessian; higher orders are rejected.
    pub fn new(
        center: Array1<f64>,
        f0: f64,
        grad: Array1<f64>,
        hessian: Option<Array2<f64>>,
        order: usize,
    ) -> Result<Self> {
        if order == 0 || order > 2 {
            return Err(Error::UnsupportedOrder(order));
        }
        if grad.len() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                got: grad.len(),
            });
        }
        if order == 2 {
            let h = hessian.as_ref().ok_or(Error::UnsupportedConfiguration(
                "second-order model requires a Hessian".into(),
            ))?;
            if h.nrows() != center.len() || h.ncols() != center.len() {
                return Err(Error::DimensionMismatch {
                    expected: center.len(),
                    got: h.nrows(),
                });
            }
        }
        Ok(Self {
            center,
            f0,
            grad,
            hessian,
            order,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn dim(&self) -> usize {
        self.center.len()
    }

    pub fn center(&self) -> &Array1<f64> {
        &self.center
    }

    pub fn f0(&self) -> f64 {
        self.f0
    }

    pub fn grad(&self) -> &Array1<f64> {
        &self.grad
    }

    pub fn hessian(&self) -> Option<&Array2<f64>> {
        self.hessian.as_ref()
    }

    fn check_dim(&self, d: &Array1<f64>) -> Result<()> {
        if d.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: d.len(),
            });
        }
        Ok(())
    }

    /// `T_p(x + d; x)`.
    pub fn value(&self, d: &Array1<f64>) -> Result<f64> {
        self.check_dim(d)?;
        let mut v = self.f0 + self.grad.dot(d);
        if self.order == 2 {
            let h = self.hessian.as_ref().unwrap();
            v += 0.5 * d.dot(&h.dot(d));
        }
        Ok(v)
    }

    /// Gradient of `T_p` with respect to d.
    pub fn gradient(&self, d: &Array1<f64>) -> Result<Array1<f64>> {
        self.check_dim(d)?;
        let mut g = self.grad.clone();
        if self.order == 2 {
            let h = self.hessian.as_ref().unwrap();
            g = g + h.dot(d);
        }
        Ok(g)
    }
}

/// Taylor model plus the `sigma/(p+1)! * |d|^{p+1}` regularizer.
#[derive(Clone, Copy, Debug)]
pub struct RegularizedModel<'a> {
    pub base: &'a TaylorModel,
    pub sigma: f64,
}

impl<'a> RegularizedModel<'a> {
    pub fn new(base: &'a TaylorModel, sigma: f64) -> Self {
        debug_assert!(sigma > 0.0);
        Self { base, sigma }
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    pub fn value(&self, d: &Array1<f64>) -> Result<f64> {
        let p = self.base.order();
        let norm = d.dot(d).sqrt();
        Ok(self.base.value(d)? + self.sigma / factorial(p + 1) * norm.powi(p as i32 + 1))
    }

    /// `∇T_p(d) + (sigma/p!) |d|^{p-1} d`.
    pub fn gradient(&self, d: &Array1<f64>) -> Result<Array1<f64>> {
        let p = self.base.order();
        let norm = d.dot(d).sqrt();
        let coeff = self.sigma / factorial(p) * norm.powi(p as i32 - 1);
        Ok(self.base.gradient(d)? + &d.mapv(|v| coeff * v))
    }
}

/// Function-value local Lipschitz estimate:
/// `H = (p+1)! * (f_new - T_p(d)) / |d|^{p+1}`. May be negative.
///
/// Steps at or below `step_floor` cannot be divided by and signal degeneracy
/// to the caller.
pub fn local_estimate_value(
    model: &TaylorModel,
    d: &Array1<f64>,
    f_new: f64,
    step_floor: f64,
) -> Result<f64> {
    let norm = d.dot(d).sqrt();
    if norm <= step_floor {
        return Err(Error::DegenerateStep {
            step_norm: norm,
            floor: step_floor,
        });
    }
    let p = model.order();
    let remainder = f_new - model.value(d)?;
    Ok(factorial(p + 1) * remainder / norm.powi(p as i32 + 1))
}

/// Gradient-based local Lipschitz estimate used by the accelerated method.
///
/// Returns `(H, g_out)` with `g_out = grad_new - ∇Ω_p^sigma(d)` (the model
/// subgradient at the trial point) and
/// `H = p! * |g_out + (sigma/p!) |d|^{p-1} d| / |d|^p >= 0`.
pub fn local_estimate_gradient(
    model: &RegularizedModel<'_>,
    d: &Array1<f64>,
    grad_new: &Array1<f64>,
    step_floor: f64,
) -> Result<(f64, Array1<f64>)> {
    let norm = d.dot(d).sqrt();
    if norm <= step_floor {
        return Err(Error::DegenerateStep {
            step_norm: norm,
            floor: step_floor,
        });
    }
    let p = model.order();
    if grad_new.len() != d.len() {
        return Err(Error::DimensionMismatch {
            expected: d.len(),
            got: grad_new.len(),
        });
    }
    let g_out = grad_new - &model.gradient(d)?;
    let coeff = model.sigma / factorial(p) * norm.powi(p as i32 - 1);
    let taylor_residual = &g_out + &d.mapv(|v| coeff * v);
    let h = factorial(p) * taylor_residual.dot(&taylor_residual).sqrt() / norm.powi(p as i32);
    Ok((h, g_out))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn quadratic_model_1d(x: f64) -> TaylorModel {
        // f(x) = x^2 / 2
        TaylorModel::new(array![x], 0.5 * x * x, array![x], Some(array![[1.0]]), 2).unwrap()
    }

    #[test]
    fn taylor_value_exact_for_quadratic() {
        // f = |x|^2/2 at x = (1, 0), d = (1, 0): 0.5 + 1 + 0.5 = 2.
        let model = TaylorModel::new(
            array![1.0, 0.0],
            0.5,
            array![1.0, 0.0],
            Some(Array2::eye(2)),
            2,
        )
        .unwrap();
        assert_eq!(model.value(&array![1.0, 0.0]).unwrap(), 2.0);
    }

    #[test]
    fn taylor_value_at_zero_is_f0() {
        let model = quadratic_model_1d(0.7);
        assert_eq!(model.value(&array![0.0]).unwrap(), model.f0());
    }

    #[test]
    fn taylor_linear_form() {
        let model = TaylorModel::new(array![0.0, 0.0], 1.0, array![2.0, -1.0], None, 1).unwrap();
        assert_eq!(model.value(&array![1.0, 1.0]).unwrap(), 2.0);
    }

    #[test]
    fn taylor_rejects_unsupported_order() {
        assert!(matches!(
            TaylorModel::new(array![0.0], 0.0, array![0.0], None, 3),
            Err(Error::UnsupportedOrder(3))
        ));
    }

    #[test]
    fn regularized_gradient_scalar_root() {
        // p = 2, f0 = 0, g = 1, H = 1, sigma = 6: the stationary point solves
        // 3 d^2 - d - 1 = 0 on d < 0.
        let base = TaylorModel::new(array![0.0], 0.0, array![1.0], Some(array![[1.0]]), 2).unwrap();
        let model = RegularizedModel::new(&base, 6.0);
        let d = (1.0 - 13.0_f64.sqrt()) / 6.0;
        let g = model.gradient(&array![d]).unwrap();
        assert!(g[0].abs() <= 1e-4, "gradient {} not near zero", g[0]);
    }

    #[test]
    fn regularized_gradient_at_zero_is_g() {
        let base = TaylorModel::new(array![0.0], 0.0, array![1.0], Some(array![[1.0]]), 2).unwrap();
        let model = RegularizedModel::new(&base, 6.0);
        assert_eq!(model.gradient(&array![0.0]).unwrap(), array![1.0]);
    }

    #[test]
    fn regularized_gradient_p1() {
        // p = 1, g = (1, 0), sigma = 2: d = -g / sigma zeroes the gradient.
        let base = TaylorModel::new(array![0.0, 0.0], 0.0, array![1.0, 0.0], None, 1).unwrap();
        let model = RegularizedModel::new(&base, 2.0);
        let g = model.gradient(&array![-0.5, 0.0]).unwrap();
        assert!(g[0].abs() < 1e-15 && g[1].abs() < 1e-15);
    }

    #[test]
    fn local_estimate_value_quartic() {
        // f(x) = x^4 at x = 0: remainder over the unit step gives H = 6.
        let model =
            TaylorModel::new(array![0.0], 0.0, array![0.0], Some(array![[0.0]]), 2).unwrap();
        let h = local_estimate_value(&model, &array![1.0], 1.0, 1e-14).unwrap();
        assert_eq!(h, 6.0);
        let h = local_estimate_value(&model, &array![1.0], -1.0, 1e-14).unwrap();
        assert_eq!(h, -6.0);
    }

    #[test]
    fn local_estimate_value_zero_for_quadratic() {
        let model = quadratic_model_1d(1.0);
        let d = 0.37;
        let f_new = 0.5 * (1.0 + d) * (1.0 + d);
        let h = local_estimate_value(&model, &array![d], f_new, 1e-14).unwrap();
        assert!(h.abs() < 1e-12);
    }

    #[test]
    fn local_estimate_value_degenerate_step() {
        let model = quadratic_model_1d(1.0);
        assert!(matches!(
            local_estimate_value(&model, &array![0.0], 0.5, 1e-14),
            Err(Error::DegenerateStep { .. })
        ));
    }

    #[test]
    fn reconstruction_identity() {
        // f_new = T_p(d) + H/(p+1)! |d|^{p+1} for the H just computed.
        let model = quadratic_model_1d(0.3);
        let d = array![0.9];
        let f_new = 0.8123;
        let h = local_estimate_value(&model, &d, f_new, 1e-14).unwrap();
        let norm = d.dot(&d).sqrt();
        let rebuilt = model.value(&d).unwrap() + h / 6.0 * norm.powi(3);
        assert!((rebuilt - f_new).abs() <= 1e-12 * f_new.abs().max(1.0));
    }

    #[test]
    fn local_estimate_gradient_quartic_twelfth() {
        // f(x) = x^4 / 12 at x = 0, sigma = 6, d = 1:
        // grad f(1) = 1/3, reg-model gradient = 3, g_out = -8/3, H = 2/3.
        let base = TaylorModel::new(array![0.0], 0.0, array![0.0], Some(array![[0.0]]), 2).unwrap();
        let model = RegularizedModel::new(&base, 6.0);
        let (h, g_out) =
            local_estimate_gradient(&model, &array![1.0], &array![1.0 / 3.0], 1e-14).unwrap();
        assert!((g_out[0] + 8.0 / 3.0).abs() < 1e-15);
        assert!((h - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn local_estimate_gradient_exact_quadratic_gives_zero() {
        // For a quadratic the gradient Taylor expansion is exact, so the
        // residual collapses and H = 0 at the exact subproblem solution.
        let base = TaylorModel::new(array![1.0], 0.5, array![1.0], Some(array![[1.0]]), 2).unwrap();
        let model = RegularizedModel::new(&base, 6.0);
        let d = array![-0.25];
        // True gradient of f = x^2/2 at 1 + d.
        let grad_new = array![1.0 + d[0]];
        let (h, g_out) = local_estimate_gradient(&model, &d, &grad_new, 1e-14).unwrap();
        // g_out = -(sigma/2)|d| d.
        let expected = -(6.0 / 2.0) * d[0].abs() * d[0];
        assert!((g_out[0] - expected).abs() < 1e-14);
        assert!(h.abs() < 1e-12);
    }

    #[test]
    fn local_estimate_gradient_matching_gradient_gives_sigma() {
        // grad_new equal to the regularized-model gradient leaves only the
        // sigma term: H = sigma.
        let base = TaylorModel::new(array![0.0], 0.0, array![1.0], Some(array![[1.0]]), 2).unwrap();
        let model = RegularizedModel::new(&base, 6.0);
        let d = array![0.8];
        let grad_new = model.gradient(&d).unwrap();
        let (h, g_out) = local_estimate_gradient(&model, &d, &grad_new, 1e-14).unwrap();
        assert!(g_out[0].abs() < 1e-15);
        assert!((h - 6.0).abs() < 1e-12);
    }
}
