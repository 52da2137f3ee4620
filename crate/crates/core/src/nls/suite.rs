//! A fixed suite of ten scalable nonlinear least-squares test problems.
//!
//! Every problem ships an analytic residual together with exact Jacobian
//! actions `v -> J v` and `u -> J^T u`, so reduced Gauss-Newton models can be
//! built matrix-free at any dimension. Eight of the ten are square nonlinear
//! systems with a known root (`f^* = 0`); the chained Freudenstein-Roth and
//! penalty problems have strictly positive optimal values.
//!
//! Problems are scalable in the number of variables `d`; a few restrict the
//! admissible dimensions (even `d` for the extended Rosenbrock chain, a
//! perfect square for the 2-D Bratu grid). [`by_name`] enforces those
//! restrictions strictly, while [`problem_suite`] rounds a requested size to
//! the nearest admissible one.

use nalgebra::{DMatrix, DVector};

use super::{NlsProblem, ProblemError};

/// Names of the ten suite problems, in canonical order.
pub fn problem_names() -> &'static [&'static str] {
    &[
        "broyden_tridiagonal",
        "broyden_banded",
        "extended_rosenbrock",
        "discrete_boundary_value",
        "discrete_integral_equation",
        "trigonometric",
        "bratu_2d",
        "oscillating_path",
        "chained_freudenstein_roth",
        "penalty_1",
    ]
}

/// Builds the named problem at exactly the requested dimension, rejecting
/// inadmissible sizes.
pub fn by_name(name: &str, dim: usize) -> Result<NlsProblem, ProblemError> {
    match name {
        "broyden_tridiagonal" => broyden_tridiagonal(dim),
        "broyden_banded" => broyden_banded(dim),
        "extended_rosenbrock" => extended_rosenbrock(dim),
        "discrete_boundary_value" => discrete_boundary_value(dim),
        "discrete_integral_equation" => discrete_integral_equation(dim),
        "trigonometric" => trigonometric(dim),
        "bratu_2d" => bratu_2d(dim),
        "oscillating_path" => oscillating_path(dim),
        "chained_freudenstein_roth" => chained_freudenstein_roth(dim),
        "penalty_1" => penalty_1(dim),
        other => Err(ProblemError::UnknownProblem(other.to_string())),
    }
}

/// All ten problems at (or near) the requested dimension.
///
/// Sizes are rounded to the nearest admissible value per problem: down to an
/// even number for the Rosenbrock chain, to the nearest perfect square for
/// the Bratu grid, and up to the minimum size where one applies.
pub fn problem_suite(dim: usize) -> Vec<NlsProblem> {
    let even = (dim.max(2) / 2) * 2;
    let pair = dim.max(2);
    let square = {
        let k = ((dim as f64).sqrt().round() as usize).max(2);
        k * k
    };
    let any = dim.max(1);
    vec![
        broyden_tridiagonal(pair).expect("admissible"),
        broyden_banded(pair).expect("admissible"),
        extended_rosenbrock(even).expect("admissible"),
        discrete_boundary_value(any).expect("admissible"),
        discrete_integral_equation(any).expect("admissible"),
        trigonometric(any).expect("admissible"),
        bratu_2d(square).expect("admissible"),
        oscillating_path(pair).expect("admissible"),
        chained_freudenstein_roth(pair).expect("admissible"),
        penalty_1(any).expect("admissible"),
    ]
}

fn require_min(name: &str, dim: usize, min: usize) -> Result<(), ProblemError> {
    if dim < min {
        Err(ProblemError::UnsupportedDimension {
            name: name.into(),
            dim,
            reason: format!("requires at least {min} variables"),
        })
    } else {
        Ok(())
    }
}

/// Broyden tridiagonal system: `r_i = (3 - 2x_i) x_i - x_{i-1} - 2 x_{i+1} + 1`
/// with zero boundary terms. Square, zero residual at the root, `x_0 = -1`.
pub fn broyden_tridiagonal(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("broyden_tridiagonal", dim, 2)?;
    let n = dim;
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            (3.0 - 2.0 * x[i]) * x[i] - left - 2.0 * right + 1.0
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            (3.0 - 4.0 * x[i]) * v[i] - left - 2.0 * right
        })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(n, |j, _| {
            let below = if j + 1 < n { u[j + 1] } else { 0.0 };
            let above = if j > 0 { u[j - 1] } else { 0.0 };
            (3.0 - 4.0 * x[j]) * u[j] - below - 2.0 * above
        })
    });
    Ok(NlsProblem::new(
        "broyden_tridiagonal",
        dim,
        n,
        DVector::from_element(dim, -1.0),
        residual,
        jac,
        jac_t,
    )?
    .with_zero_residual())
}

/// Broyden banded system: `r_i = x_i (2 + 5 x_i^2) + 1 - sum_{j in J_i} x_j (1 + x_j)`
/// where `J_i` spans columns `i-5..=i+1` excluding `i`. Zero residual, `x_0 = -1`.
pub fn broyden_banded(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("broyden_banded", dim, 2)?;
    let n = dim;
    let band = move |i: usize| {
        let lo = i.saturating_sub(5);
        let hi = (i + 1).min(n - 1);
        (lo..=hi).filter(move |&j| j != i)
    };
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let coupling: f64 = band(i).map(|j| x[j] * (1.0 + x[j])).sum();
            x[i] * (2.0 + 5.0 * x[i] * x[i]) + 1.0 - coupling
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let coupling: f64 = band(i).map(|j| (1.0 + 2.0 * x[j]) * v[j]).sum();
            (2.0 + 15.0 * x[i] * x[i]) * v[i] - coupling
        })
    });
    // Row i touches column j exactly when j - 1 <= i <= j + 5 and i != j.
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(n, |j, _| {
            let lo = j.saturating_sub(1);
            let hi = (j + 5).min(n - 1);
            let rows: f64 = (lo..=hi).filter(|&i| i != j).map(|i| u[i]).sum();
            (2.0 + 15.0 * x[j] * x[j]) * u[j] - (1.0 + 2.0 * x[j]) * rows
        })
    });
    Ok(NlsProblem::new(
        "broyden_banded",
        dim,
        n,
        DVector::from_element(dim, -1.0),
        residual,
        jac,
        jac_t,
    )?
    .with_zero_residual())
}

/// Extended Rosenbrock chain of independent pairs:
/// `r_{2k} = 10 (x_{2k+1} - x_{2k}^2)`, `r_{2k+1} = 1 - x_{2k}`.
/// Requires even `d`; zero residual at the all-ones point.
pub fn extended_rosenbrock(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("extended_rosenbrock", dim, 2)?;
    if !dim.is_multiple_of(2) {
        return Err(ProblemError::UnsupportedDimension {
            name: "extended_rosenbrock".into(),
            dim,
            reason: "requires an even number of variables".into(),
        });
    }
    let n = dim;
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let k = i / 2;
            if i % 2 == 0 {
                10.0 * (x[2 * k + 1] - x[2 * k] * x[2 * k])
            } else {
                1.0 - x[2 * k]
            }
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let k = i / 2;
            if i % 2 == 0 {
                10.0 * (v[2 * k + 1] - 2.0 * x[2 * k] * v[2 * k])
            } else {
                -v[2 * k]
            }
        })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(n, |j, _| {
            let k = j / 2;
            if j % 2 == 0 {
                -20.0 * x[2 * k] * u[2 * k] - u[2 * k + 1]
            } else {
                10.0 * u[2 * k]
            }
        })
    });
    let x0 = DVector::from_fn(dim, |i, _| if i % 2 == 0 { -1.2 } else { 1.0 });
    Ok(NlsProblem::new("extended_rosenbrock", dim, n, x0, residual, jac, jac_t)?
        .with_zero_residual())
}

/// Discrete two-point boundary value problem:
/// `r_i = 2x_i - x_{i-1} - x_{i+1} + h^2 (x_i + t_i + 1)^3 / 2` on a uniform
/// grid `t_i = i h`, `h = 1/(d+1)`. Zero residual; `x_0 = t_i (t_i - 1)`.
pub fn discrete_boundary_value(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("discrete_boundary_value", dim, 1)?;
    let n = dim;
    let h = 1.0 / (n as f64 + 1.0);
    let t = move |i: usize| (i as f64 + 1.0) * h;
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] } else { 0.0 };
            let cube = x[i] + t(i) + 1.0;
            2.0 * x[i] - left - right + 0.5 * h * h * cube * cube * cube
        })
    });
    // The Jacobian is symmetric tridiagonal: constant -1 off-diagonals and
    // diagonal 2 + (3 h^2 / 2)(x_i + t_i + 1)^2, so both actions share it.
    let stencil = move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let left = if i > 0 { v[i - 1] } else { 0.0 };
            let right = if i + 1 < n { v[i + 1] } else { 0.0 };
            let slope = x[i] + t(i) + 1.0;
            (2.0 + 1.5 * h * h * slope * slope) * v[i] - left - right
        })
    };
    let x0 = DVector::from_fn(dim, |i, _| t(i) * (t(i) - 1.0));
    Ok(NlsProblem::new(
        "discrete_boundary_value",
        dim,
        n,
        x0,
        residual,
        Box::new(stencil),
        Box::new(stencil),
    )?
    .with_zero_residual())
}

/// Discrete integral equation analogue of the boundary value problem:
/// `r_i = x_i + h [ (1 - t_i) sum_{j<=i} t_j w_j + t_i sum_{j>i} (1 - t_j) w_j ] / 2`
/// with `w_j = (x_j + t_j + 1)^3`. Evaluated in O(d) via prefix/suffix sums.
pub fn discrete_integral_equation(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("discrete_integral_equation", dim, 1)?;
    let n = dim;
    let h = 1.0 / (n as f64 + 1.0);
    let t = move |i: usize| (i as f64 + 1.0) * h;
    // Shared kernel: given per-node weights c_j, returns the vector whose
    // i-th entry is (1 - t_i) * sum_{j<=i} t_j c_j + t_i * sum_{j>i} (1-t_j) c_j.
    let kernel = move |c: &DVector<f64>| {
        let mut prefix = vec![0.0f64; n];
        let mut acc = 0.0;
        for j in 0..n {
            acc += t(j) * c[j];
            prefix[j] = acc;
        }
        let mut suffix = vec![0.0f64; n];
        let mut acc = 0.0;
        for j in (0..n).rev() {
            suffix[j] = acc;
            acc += (1.0 - t(j)) * c[j];
        }
        DVector::from_fn(n, |i, _| (1.0 - t(i)) * prefix[i] + t(i) * suffix[i])
    };
    let residual = Box::new(move |x: &DVector<f64>| {
        let w = DVector::from_fn(n, |j, _| {
            let b = x[j] + t(j) + 1.0;
            b * b * b
        });
        let k = kernel(&w);
        DVector::from_fn(n, |i, _| x[i] + 0.5 * h * k[i])
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        let c = DVector::from_fn(n, |j, _| {
            let b = x[j] + t(j) + 1.0;
            3.0 * b * b * v[j]
        });
        let k = kernel(&c);
        DVector::from_fn(n, |i, _| v[i] + 0.5 * h * k[i])
    });
    // Transposed kernel: column j collects t_j (1 - t_i) from rows i >= j and
    // (1 - t_j) t_i from rows i < j.
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        let mut prefix = vec![0.0f64; n];
        let mut acc = 0.0;
        for i in 0..n {
            prefix[i] = acc;
            acc += t(i) * u[i];
        }
        let mut suffix = vec![0.0f64; n];
        let mut acc = 0.0;
        for i in (0..n).rev() {
            acc += (1.0 - t(i)) * u[i];
            suffix[i] = acc;
        }
        DVector::from_fn(n, |j, _| {
            let b = x[j] + t(j) + 1.0;
            u[j] + 0.5 * h * 3.0 * b * b * (t(j) * suffix[j] + (1.0 - t(j)) * prefix[j])
        })
    });
    let x0 = DVector::from_fn(dim, |i, _| t(i) * (t(i) - 1.0));
    Ok(
        NlsProblem::new("discrete_integral_equation", dim, n, x0, residual, jac, jac_t)?
            .with_zero_residual(),
    )
}

/// Trigonometric system:
/// `r_i = d - sum_j cos x_j + (i+1)(1 - cos x_i) - sin x_i`, `x_0 = (1/d) e`.
pub fn trigonometric(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("trigonometric", dim, 1)?;
    let n = dim;
    let residual = Box::new(move |x: &DVector<f64>| {
        let cos_sum: f64 = x.iter().map(|&xi| xi.cos()).sum();
        DVector::from_fn(n, |i, _| {
            n as f64 - cos_sum + (i as f64 + 1.0) * (1.0 - x[i].cos()) - x[i].sin()
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        let sin_dot: f64 = (0..n).map(|j| x[j].sin() * v[j]).sum();
        DVector::from_fn(n, |i, _| {
            sin_dot + ((i as f64 + 1.0) * x[i].sin() - x[i].cos()) * v[i]
        })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        let u_sum: f64 = u.iter().sum();
        DVector::from_fn(n, |j, _| {
            x[j].sin() * u_sum + ((j as f64 + 1.0) * x[j].sin() - x[j].cos()) * u[j]
        })
    });
    let x0 = DVector::from_element(dim, 1.0 / dim as f64);
    Ok(NlsProblem::new("trigonometric", dim, n, x0, residual, jac, jac_t)?
        .with_zero_residual())
}

/// 2-D Bratu problem on a `k x k` interior grid (`d = k^2`):
/// `r = 4u - u_N - u_S - u_E - u_W - h^2 lambda exp(u)` with `lambda = 4`,
/// homogeneous Dirichlet boundary, `h = 1/(k+1)`. The subcritical `lambda`
/// guarantees a solution branch, so the residual vanishes at the root.
pub fn bratu_2d(dim: usize) -> Result<NlsProblem, ProblemError> {
    let k = (dim as f64).sqrt().round() as usize;
    if k < 2 || k * k != dim {
        return Err(ProblemError::UnsupportedDimension {
            name: "bratu_2d".into(),
            dim,
            reason: "requires a perfect square of at least 4 variables".into(),
        });
    }
    let n = dim;
    let lambda = 4.0;
    let h = 1.0 / (k as f64 + 1.0);
    let h2l = h * h * lambda;
    let neighbors = move |x: &DVector<f64>, idx: usize| {
        let (a, b) = (idx / k, idx % k);
        let mut sum = 0.0;
        if a > 0 {
            sum += x[idx - k];
        }
        if a + 1 < k {
            sum += x[idx + k];
        }
        if b > 0 {
            sum += x[idx - 1];
        }
        if b + 1 < k {
            sum += x[idx + 1];
        }
        sum
    };
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| 4.0 * x[i] - neighbors(x, i) - h2l * x[i].exp())
    });
    // The five-point stencil is symmetric, so J = J^T and one action serves
    // both directions: (J v)_i = (4 - h^2 lambda e^{x_i}) v_i - neighbors(v).
    let stencil = move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            (4.0 - h2l * x[i].exp()) * v[i] - neighbors(v, i)
        })
    };
    Ok(NlsProblem::new(
        "bratu_2d",
        dim,
        n,
        DVector::zeros(dim),
        residual,
        Box::new(stencil),
        Box::new(stencil),
    )?
    .with_zero_residual())
}

/// Oscillating path problem: a stiff chained valley with
/// `r_1 = (x_1 - 1)/2` and `r_i = rho (x_i - 2 x_{i-1}^2 + 1)`, `rho = 500`.
/// Zero residual at the all-ones point; starts at `(-2, 1, ..., 1)`.
pub fn oscillating_path(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("oscillating_path", dim, 2)?;
    let n = dim;
    let rho = 500.0;
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            if i == 0 {
                0.5 * (x[0] - 1.0)
            } else {
                rho * (x[i] - 2.0 * x[i - 1] * x[i - 1] + 1.0)
            }
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            if i == 0 {
                0.5 * v[0]
            } else {
                rho * (v[i] - 4.0 * x[i - 1] * v[i - 1])
            }
        })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(n, |j, _| {
            let own = if j == 0 { 0.5 * u[0] } else { rho * u[j] };
            let chain = if j + 1 < n {
                -4.0 * rho * x[j] * u[j + 1]
            } else {
                0.0
            };
            own + chain
        })
    });
    let mut x0 = DVector::from_element(dim, 1.0);
    x0[0] = -2.0;
    Ok(NlsProblem::new("oscillating_path", dim, n, x0, residual, jac, jac_t)?
        .with_zero_residual())
}

/// Chained Freudenstein-Roth function: overlapping pairs give `n = 2(d-1)`
/// residuals `r_{2k} = -13 + x_k + ((5 - y) y - 2) y` and
/// `r_{2k+1} = -29 + x_k + ((y + 1) y - 14) y` with `y = x_{k+1}`.
/// The chain has no common root, so the optimal value is positive.
pub fn chained_freudenstein_roth(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("chained_freudenstein_roth", dim, 2)?;
    let n = 2 * (dim - 1);
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let k = i / 2;
            let y = x[k + 1];
            if i % 2 == 0 {
                -13.0 + x[k] + ((5.0 - y) * y - 2.0) * y
            } else {
                -29.0 + x[k] + ((y + 1.0) * y - 14.0) * y
            }
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            let k = i / 2;
            let y = x[k + 1];
            if i % 2 == 0 {
                v[k] + (10.0 * y - 3.0 * y * y - 2.0) * v[k + 1]
            } else {
                v[k] + (3.0 * y * y + 2.0 * y - 14.0) * v[k + 1]
            }
        })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(dim, |j, _| {
            let mut total = 0.0;
            if j + 1 < dim {
                total += u[2 * j] + u[2 * j + 1];
            }
            if j >= 1 {
                let y = x[j];
                let k = j - 1;
                total += (10.0 * y - 3.0 * y * y - 2.0) * u[2 * k]
                    + (3.0 * y * y + 2.0 * y - 14.0) * u[2 * k + 1];
            }
            total
        })
    });
    let x0 = DVector::from_fn(dim, |i, _| if i % 2 == 0 { 0.5 } else { -2.0 });
    NlsProblem::new(
        "chained_freudenstein_roth",
        dim,
        n,
        x0,
        residual,
        jac,
        jac_t,
    )
}

/// Penalty function I: `r_i = sqrt(a) (x_i - 1)` for `i <= d` plus the single
/// coupling residual `r_{d+1} = ||x||^2 - 1/4`, with `a = 1e-5` and
/// `x_0 = (1, 2, ..., d)`. The optimal value is positive.
pub fn penalty_1(dim: usize) -> Result<NlsProblem, ProblemError> {
    require_min("penalty_1", dim, 1)?;
    let n = dim + 1;
    let sqrt_a = 1.0e-5f64.sqrt();
    let residual = Box::new(move |x: &DVector<f64>| {
        DVector::from_fn(n, |i, _| {
            if i < dim {
                sqrt_a * (x[i] - 1.0)
            } else {
                x.norm_squared() - 0.25
            }
        })
    });
    let jac = Box::new(move |x: &DVector<f64>, v: &DVector<f64>| {
        let xv = 2.0 * x.dot(v);
        DVector::from_fn(n, |i, _| if i < dim { sqrt_a * v[i] } else { xv })
    });
    let jac_t = Box::new(move |x: &DVector<f64>, u: &DVector<f64>| {
        DVector::from_fn(dim, |j, _| sqrt_a * u[j] + 2.0 * x[j] * u[dim])
    });
    let x0 = DVector::from_fn(dim, |i, _| (i + 1) as f64);
    NlsProblem::new("penalty_1", dim, n, x0, residual, jac, jac_t)
}

/// Synthetic linear least-squares problem `r(x) = A x - b`, useful for tests
/// and demos: the Gauss-Newton model is exact, so one full-space step solves it.
pub fn linear_least_squares(a: DMatrix<f64>, b: DVector<f64>) -> NlsProblem {
    assert_eq!(a.nrows(), b.len(), "incompatible linear system shapes");
    let dim = a.ncols();
    let n = a.nrows();
    let a_res = a.clone();
    let a_jac = a.clone();
    let a_jac_t = a;
    NlsProblem::new(
        "linear_least_squares",
        dim,
        n,
        DVector::zeros(dim),
        Box::new(move |x: &DVector<f64>| &a_res * x - &b),
        Box::new(move |_x: &DVector<f64>, v: &DVector<f64>| &a_jac * v),
        Box::new(move |_x: &DVector<f64>, u: &DVector<f64>| a_jac_t.tr_mul(u)),
    )
    .expect("consistent dimensions")
}
