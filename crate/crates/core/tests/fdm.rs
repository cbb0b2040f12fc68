//! Reference-solver oracles: exact solutions, convergence rates, limit
//! profiles, and maximum principles.

use rte_core::fdm::{
    diffusion_limit_solve_1d, diffusion_limit_solve_2d, fdm_nonlinear_1d, fdm_rte_1d, fdm_rte_2d,
    nonlinear_limit_solve, FdmOptions, Mesh1D, Mesh2D, NonlinearFdmOptions,
};
use rte_core::losses::NonlinearConstants;
use rte_core::metrics::relative_l2;
use rte_core::problem::ProblemSpec;
use rte_core::quadrature::gauss_legendre;
use std::sync::Arc;

#[test]
fn toy_solution_is_reproduced_exactly() {
    // f* = 1 - x is linear, so first-order upwinding is exact up to solver
    // tolerance.
    let problem = ProblemSpec::<f64>::toy(1.0);
    let mesh = Mesh1D::uniform(200, 0.0, 1.0, 80).unwrap();
    let field = fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh)).unwrap();
    let nv = mesh.v_rule.len();
    let mut worst: f64 = 0.0;
    for (i, &x) in mesh.x.iter().enumerate() {
        for j in 0..nv {
            worst = worst.max((field.values[i * nv + j] - (1.0 - x)).abs());
        }
    }
    assert!(worst < 5e-3, "sup error {worst}");
}

#[test]
fn zero_data_gives_zero_field() {
    let problem = ProblemSpec::<f64> {
        inflow: Arc::new(|_, _, _| 0.0),
        source: Arc::new(|_, _| 0.0),
        ..ProblemSpec::toy(0.7)
    };
    let mesh = Mesh1D::uniform(40, 0.0, 1.0, 16).unwrap();
    let field = fdm_rte_1d(&problem, &mesh, &FdmOptions::default()).unwrap();
    assert!(field.values.iter().all(|&v| v.abs() < 1e-14));
}

#[test]
fn source_iteration_agrees_with_direct() {
    let problem = ProblemSpec::<f64>::boundary_layer_1d(1.0);
    let mesh = Mesh1D::uniform(60, 0.0, 1.0, 24).unwrap();
    let direct = fdm_rte_1d(
        &problem,
        &mesh,
        &FdmOptions {
            solver: rte_core::fdm::FdmSolver::Direct,
            ..Default::default()
        },
    )
    .unwrap();
    let si = fdm_rte_1d(
        &problem,
        &mesh,
        &FdmOptions {
            solver: rte_core::fdm::FdmSolver::SourceIteration,
            tol: 1e-12,
            max_sweeps: 100_000,
        },
    )
    .unwrap();
    let err = relative_l2(&si, &direct, true).unwrap();
    assert!(err < 1e-9, "solver mismatch {err}");
}

#[test]
fn first_order_convergence_on_smooth_problem() {
    // Against a fine-mesh proxy reference (same scheme at N = 3200), the
    // sup error at shared nodes halves (within 20%) when N doubles.
    let problem = ProblemSpec::<f64>::boundary_layer_1d(1.0);
    let nv = 24;
    let fine = fdm_rte_1d(
        &problem,
        &Mesh1D::uniform(3201, 0.0, 1.0, nv).unwrap(),
        &FdmOptions::default(),
    )
    .unwrap();
    let err_at = |n: usize| {
        let mesh = Mesh1D::uniform(n + 1, 0.0, 1.0, nv).unwrap();
        let field = fdm_rte_1d(&problem, &mesh, &FdmOptions::default()).unwrap();
        let stride = 3200 / n;
        let mut worst: f64 = 0.0;
        for i in 0..=n {
            for j in 0..nv {
                let coarse = field.values[i * nv + j];
                let reference = fine.values[(i * stride) * nv + j];
                worst = worst.max((coarse - reference).abs());
            }
        }
        worst
    };
    let e100 = err_at(100);
    let e200 = err_at(200);
    let ratio = e100 / e200;
    assert!(
        (1.6..=2.4).contains(&ratio),
        "convergence ratio {ratio} (e100 {e100}, e200 {e200})"
    );
}

#[test]
fn split_mesh_small_eps_matches_limit_density() {
    // Layer-refined run of the anisotropic-inflow problem at eps = 1e-3:
    // away from the layer the mean must follow the diffusion profile
    // 3.188 (1 - x) within 2%.
    let eps = 1e-3;
    let problem = ProblemSpec::<f64>::boundary_layer_1d(eps);
    let mesh = Mesh1D::split(150, 50, 0.0, eps, 1.0, 80).unwrap();
    let field = fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh)).unwrap();
    let rho = field.average_last_axis();
    let mut worst: f64 = 0.0;
    for (i, &x) in rho.axes[0].nodes.iter().enumerate() {
        if (0.1..=0.9).contains(&x) {
            let limit = 3.188 * (1.0 - x);
            worst = worst.max((rho.values[i] - limit).abs() / limit);
        }
    }
    assert!(worst < 0.02, "relative deviation from limit profile {worst}");
}

#[test]
fn analytic_2d_solution_within_first_order_error() {
    let problem = ProblemSpec::<f64>::analytic_2d(1.0);
    let mesh = Mesh2D::uniform(60, 60, &problem.domain, 40).unwrap();
    let field = fdm_rte_2d(&problem, &mesh, 1e-10, 100_000).unwrap();
    let exact = rte_core::fdm::Field {
        axes: field.axes.clone(),
        values: {
            let nv = mesh.v_rule.len();
            let ny = mesh.y.len();
            let mut vals = Vec::with_capacity(field.values.len());
            for i in 0..mesh.x.len() {
                for j in 0..ny {
                    for _k in 0..nv {
                        vals.push((-mesh.x[i] - mesh.y[j] as f64).exp());
                    }
                }
            }
            vals
        },
    };
    let err = relative_l2(&field, &exact, true).unwrap();
    assert!(err < 5e-2, "relative error {err}");
}

#[test]
fn hg_kernel_degenerates_to_isotropic_2d() {
    let iso = ProblemSpec::<f64>::boundary_layer_2d(1.0);
    let hg = ProblemSpec {
        kernel: rte_core::scattering::KernelSpec::HenyeyGreenstein { h: 1e-9 },
        ..iso.clone()
    };
    let mesh = Mesh2D::uniform(12, 12, &iso.domain, 16).unwrap();
    let fi = fdm_rte_2d(&iso, &mesh, 1e-11, 100_000).unwrap();
    let fh = fdm_rte_2d(&hg, &mesh, 1e-11, 100_000).unwrap();
    let mut worst: f64 = 0.0;
    for (a, b) in fi.values.iter().zip(&fh.values) {
        worst = worst.max((a - b).abs());
    }
    assert!(worst < 1e-8, "kernel degeneracy gap {worst}");
}

#[test]
fn zero_data_2d_gives_zero_field() {
    let problem = ProblemSpec::<f64> {
        inflow: Arc::new(|_, _, _| 0.0),
        source: Arc::new(|_, _| 0.0),
        ..ProblemSpec::analytic_2d(1.0)
    };
    let mesh = Mesh2D::uniform(8, 8, &problem.domain, 8).unwrap();
    let field = fdm_rte_2d(&problem, &mesh, 1e-12, 10_000).unwrap();
    assert!(field.values.iter().all(|&v| v.abs() < 1e-12));
}

#[test]
fn diffusion_1d_exact_for_linear_data() {
    let field = diffusion_limit_solve_1d::<f64>(
        101,
        (0.0, 1.0),
        (3.188, 0.0),
        &|_| 1.0,
        &|_| 0.0,
        &|_| 0.0,
    )
    .unwrap();
    for (i, &x) in field.axes[0].nodes.iter().enumerate() {
        assert!((field.values[i] - 3.188 * (1.0 - x)).abs() < 1e-10);
    }
}

#[test]
fn diffusion_2d_matches_separation_of_variables() {
    // Lap rho = 0 on [-1,1]^2 with rho(-1, y) = pi (1 - y^2), zero on the
    // other edges; oracle is the sine series in y with sinh profiles in x.
    let n = 81;
    let field = diffusion_limit_solve_2d(
        n,
        n,
        &[(-1.0, 1.0), (-1.0, 1.0)],
        &|x: f64, y: f64| {
            if (x + 1.0).abs() < 1e-14 {
                std::f64::consts::PI * (1.0 - y * y)
            } else {
                0.0
            }
        },
        1.0,
        &|_, _| 0.0,
        &|_, _| 0.0,
    )
    .unwrap();
    let series = |x: f64, y: f64| {
        let mut acc = 0.0;
        for m in 0..60 {
            let n_mode = 2 * m + 1; // even modes vanish for the symmetric datum
            let k = n_mode as f64 * std::f64::consts::PI / 2.0;
            // Fourier coefficient of pi (1 - y^2) against sin(k (y + 1)) on
            // [-1, 1]: c = pi * int (1 - y^2) sin(k(y+1)) dy = 4 pi / k^3
            // for odd modes.
            let c = 4.0 * std::f64::consts::PI / (k * k * k);
            acc += c * ((1.0 - x) * k).sinh() / ((2.0 * k).sinh()) * (k * (y + 1.0)).sin();
        }
        acc
    };
    let mut worst: f64 = 0.0;
    for (i, &x) in field.axes[0].nodes.iter().enumerate() {
        for (j, &y) in field.axes[1].nodes.iter().enumerate() {
            if x > -0.999 && x < 0.999 && y.abs() < 0.999 {
                let got = field.values[i * n + j];
                worst = worst.max((got - series(x, y)).abs());
            }
        }
    }
    assert!(worst < 1e-3, "worst deviation from series {worst}");
    // Discrete maximum principle: interior values within boundary range.
    let max_bc = std::f64::consts::PI;
    assert!(field
        .values
        .iter()
        .all(|&v| (-1e-12..=max_bc + 1e-12).contains(&v)));
}

#[test]
fn nonlinear_limit_profile() {
    let xs: Vec<f64> = (0..101).map(|i| i as f64 / 100.0).collect();
    // kappa = 0: exactly the linear profile.
    let t0 = nonlinear_limit_solve(0.0, &xs).unwrap();
    for (i, &x) in xs.iter().enumerate() {
        assert!((t0[i] - (1.0 - x)).abs() < 1e-14);
    }
    // Endpoints for any kappa.
    let t1 = nonlinear_limit_solve(1.0, &xs).unwrap();
    assert!((t1[0] - 1.0).abs() < 1e-12);
    assert!(t1[100].abs() < 1e-12);
    // kappa = 1, x = 0.5: the root of t^4 + t = 1 by bisection.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid * mid * mid * mid + mid < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mid = nonlinear_limit_solve(1.0, &[0.5]).unwrap()[0];
    assert!((mid - 0.5 * (lo + hi)).abs() < 1e-10);
}

#[test]
fn nonlinear_kinetic_solve_approaches_limit() {
    let consts = NonlinearConstants::<f64>::default();
    let v_rule = gauss_legendre(32, -1.0, 1.0).unwrap();
    let (i_field, t_field) =
        fdm_nonlinear_1d(&consts, 1e-3, 201, &v_rule, &NonlinearFdmOptions::default()).unwrap();
    assert!((t_field.values[0] - 1.0).abs() < 1e-14);
    assert!(t_field.values[200].abs() < 1e-14);
    let xs = &t_field.axes[0].nodes;
    let limit = nonlinear_limit_solve(consts.kappa(), xs).unwrap();
    let mut worst: f64 = 0.0;
    for (i, &x) in xs.iter().enumerate() {
        if (0.1..=0.9).contains(&x) {
            worst = worst.max((t_field.values[i] - limit[i]).abs() / limit[i]);
        }
    }
    assert!(worst < 0.02, "relative gap to the limit profile {worst}");
    assert!(i_field.values.iter().all(|v| v.is_finite()));
}
