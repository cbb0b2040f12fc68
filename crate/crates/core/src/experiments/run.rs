//! Drivers that assemble one experiment end to end: training set, two-phase
//! training, reference solution, metrics, and the result record.

use super::config::{ExperimentConfig, ExperimentId};
use crate::activation::Activation;
use crate::error::{invalid, Error, Result};
use crate::fdm::{
    diffusion_limit_solve_2d, fdm_nonlinear_1d, fdm_rte_1d, fdm_rte_2d,
    nonlinear_limit_solve, Axis, FdmOptions, Field, Mesh1D, Mesh2D, NonlinearFdmOptions,
};
use crate::halfspace::{
    chandrasekhar_h_1d, f_bl_infinity_1d, load_corrector_1d, reflection_bc_1d, save_corrector_1d,
    solve_halfspace_1d, solve_halfspace_2d, GammaCorrector1d, GammaCorrector2d, HalfSpaceSpec,
    StretchMap,
};
use crate::losses::{
    GammaSamples1d, GammaSamples2d, HeteroEpsLoss, HeteroEpsProblem, MacroMicroLoss1d,
    MacroMicroLoss2d, NonlinearConstants, NonlinearLoss, VanillaLoss1d,
};
use crate::metrics::relative_l2;
use crate::mlp::{forward, init_params, MlpSpec, ParamVector};
use crate::optim::{two_phase_train, Phase, TwoPhaseResult};
use crate::problem::{ProblemSpec, TrainingSet};
use crate::quadrature::gauss_legendre;
use std::sync::Arc;
use std::time::Instant;

#[derive(Debug, Clone, serde::Serialize)]
pub struct HistoryRow {
    pub iter: usize,
    pub phase: &'static str,
    pub loss: f64,
    pub rel_error: Option<f64>,
}

/// Everything one run produces. The config snapshot plus the build determine
/// every number in here except `wall_seconds`.
#[derive(Debug, Clone)]
pub struct ResultRecord {
    pub config: ExperimentConfig,
    pub history: Vec<HistoryRow>,
    pub final_loss: f64,
    pub metrics: Vec<(String, f64)>,
    pub statuses: Vec<String>,
    pub predicted: Option<Field<f64>>,
    pub reference: Option<Field<f64>>,
    pub wall_seconds: f64,
}

impl ResultRecord {
    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, v)| *v)
    }
}

/// Test mesh used for 1D error metrics (finer than the training grid).
fn test_mesh_1d(problem: &ProblemSpec<f64>) -> Mesh1D<f64> {
    let (lo, hi) = problem.domain[0];
    Mesh1D::uniform(200, lo, hi, 80).expect("static mesh")
}

fn history_recorder<'a>(
    rows: &'a mut Vec<HistoryRow>,
    error_every: usize,
    mut rel_error: Option<Box<dyn FnMut(&[f64]) -> f64 + 'a>>,
) -> impl FnMut(Phase, usize, f64, &[f64]) + 'a {
    move |phase, iter, loss, theta| {
        let err = match (&mut rel_error, iter % error_every) {
            (Some(f), 0) => Some(f(theta)),
            _ => None,
        };
        rows.push(HistoryRow {
            iter,
            phase: phase.label(),
            loss,
            rel_error: err,
        });
    }
}

fn push_statuses(statuses: &mut Vec<String>, result: &TwoPhaseResult<f64>) {
    statuses.push(format!("adam: {:?}", result.adam_status));
    statuses.push(format!("lbfgs: {:?}", result.lbfgs_status));
}

/// Evaluate `f = rho + eps g [+ Gamma]` on a 1D test mesh.
fn mm_field_1d(
    rho: (&MlpSpec<f64>, &[f64]),
    g: (&MlpSpec<f64>, &[f64]),
    eps: f64,
    gamma: Option<&GammaCorrector1d<f64>>,
    mesh: &Mesh1D<f64>,
) -> Field<f64> {
    let rho_params = ParamVector {
        data: rho.1.to_vec(),
    };
    let g_params = ParamVector { data: g.1.to_vec() };
    let nv = mesh.v_rule.len();
    let mut values = Vec::with_capacity(mesh.x.len() * nv);
    for &x in &mesh.x {
        let rho_val = forward(&rho_params, rho.0, &[x]).expect("1-input net")[0];
        for &v in &mesh.v_rule.nodes {
            let g_val = forward(&g_params, g.0, &[x, v]).expect("2-input net")[0];
            let corr = gamma.map_or(0.0, |c| c.eval(x, v).expect("corrector domain"));
            values.push(rho_val + eps * g_val + corr);
        }
    }
    Field {
        axes: vec![
            Axis {
                label: "x",
                nodes: mesh.x.clone(),
                weights: mesh.x_weights(),
            },
            Axis {
                label: "v",
                nodes: mesh.v_rule.nodes.clone(),
                weights: mesh.v_rule.weights.clone(),
            },
        ],
        values,
    }
}

fn f_field_1d(f: (&MlpSpec<f64>, &[f64]), mesh: &Mesh1D<f64>) -> Field<f64> {
    let params = ParamVector { data: f.1.to_vec() };
    let mut values = Vec::with_capacity(mesh.x.len() * mesh.v_rule.len());
    for &x in &mesh.x {
        for &v in &mesh.v_rule.nodes {
            values.push(forward(&params, f.0, &[x, v]).expect("2-input net")[0]);
        }
    }
    Field {
        axes: vec![
            Axis {
                label: "x",
                nodes: mesh.x.clone(),
                weights: mesh.x_weights(),
            },
            Axis {
                label: "v",
                nodes: mesh.v_rule.nodes.clone(),
                weights: mesh.v_rule.weights.clone(),
            },
        ],
        values,
    }
}

/// Evaluate `f = rho + eps g [+ Gamma]` on a 2D test mesh.
fn mm_field_2d(
    rho: (&MlpSpec<f64>, &[f64]),
    g: (&MlpSpec<f64>, &[f64]),
    eps: f64,
    gamma: Option<&GammaCorrector2d<f64>>,
    mesh: &Mesh2D<f64>,
) -> Field<f64> {
    let rho_params = ParamVector {
        data: rho.1.to_vec(),
    };
    let g_params = ParamVector { data: g.1.to_vec() };
    let nv = mesh.v_rule.len();
    let mut values = Vec::with_capacity(mesh.x.len() * mesh.y.len() * nv);
    for &x in &mesh.x {
        for &y in &mesh.y {
            let rho_val = forward(&rho_params, rho.0, &[x, y]).expect("2-input net")[0];
            for &a in &mesh.v_rule.nodes {
                let g_val = forward(&g_params, g.0, &[x, y, a]).expect("3-input net")[0];
                let corr = gamma.map_or(0.0, |c| c.eval(x, y, a).expect("corrector domain"));
                values.push(rho_val + eps * g_val + corr);
            }
        }
    }
    let trap = |nodes: &[f64]| {
        let n = nodes.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    };
    Field {
        axes: vec![
            Axis {
                label: "x",
                weights: trap(&mesh.x),
                nodes: mesh.x.clone(),
            },
            Axis {
                label: "y",
                weights: trap(&mesh.y),
                nodes: mesh.y.clone(),
            },
            Axis {
                label: "v",
                nodes: mesh.v_rule.nodes.clone(),
                weights: mesh.v_rule.weights.clone(),
            },
        ],
        values,
    }
}

fn analytic_2d_field(mesh: &Mesh2D<f64>) -> Field<f64> {
    let mut base = Mesh2D {
        x: mesh.x.clone(),
        y: mesh.y.clone(),
        v_rule: mesh.v_rule.clone(),
    };
    let _ = &mut base;
    let nv = mesh.v_rule.len();
    let mut values = Vec::with_capacity(mesh.x.len() * mesh.y.len() * nv);
    for &x in &mesh.x {
        for &y in &mesh.y {
            for _ in 0..nv {
                values.push((-x - y).exp());
            }
        }
    }
    let trap = |nodes: &[f64]| {
        let n = nodes.len();
        let mut w = vec![0.0; n];
        for i in 0..n - 1 {
            let h = nodes[i + 1] - nodes[i];
            w[i] += 0.5 * h;
            w[i + 1] += 0.5 * h;
        }
        w
    };
    Field {
        axes: vec![
            Axis {
                label: "x",
                weights: trap(&mesh.x),
                nodes: mesh.x.clone(),
            },
            Axis {
                label: "y",
                weights: trap(&mesh.y),
                nodes: mesh.y.clone(),
            },
            Axis {
                label: "v",
                nodes: mesh.v_rule.nodes.clone(),
                weights: mesh.v_rule.weights.clone(),
            },
        ],
        values,
    }
}

fn problem_for(cfg: &ExperimentConfig) -> Result<ProblemSpec<f64>> {
    let mut problem = match cfg.id {
        ExperimentId::ToyVanilla | ExperimentId::ToyMacroMicro => ProblemSpec::toy(cfg.epsilon),
        ExperimentId::Homogeneous1d => ProblemSpec::homogeneous_1d(cfg.epsilon),
        ExperimentId::BoundaryLayer1d | ExperimentId::PitfallWeights | ExperimentId::PitfallMesh => {
            ProblemSpec::boundary_layer_1d(cfg.epsilon)
        }
        ExperimentId::Analytic2d => ProblemSpec::analytic_2d(cfg.epsilon),
        ExperimentId::HenyeyGreenstein2d => {
            ProblemSpec::henyey_greenstein_2d(cfg.epsilon, cfg.hg_h)
        }
        ExperimentId::BoundaryLayer2d => ProblemSpec::boundary_layer_2d(cfg.epsilon),
        ExperimentId::HeteroEps => HeteroEpsProblem::default().equivalent_problem(),
        ExperimentId::Nonlinear => {
            NonlinearConstants {
                a: cfg.nl_a,
                c: cfg.nl_c,
                sigma: cfg.nl_sigma,
            }
            .problem_shell(cfg.epsilon)
        }
        ExperimentId::HalfSpace1d | ExperimentId::HalfSpace2d => {
            return Err(invalid("half-space experiments have no bulk problem"));
        }
    };
    problem.boundary_weights = cfg.boundary_weights.clone();
    Ok(problem)
}

/// Reference solution for an experiment id (what `rte fdm` emits).
pub fn run_reference(cfg: &ExperimentConfig) -> Result<Field<f64>> {
    match cfg.id {
        ExperimentId::ToyVanilla
        | ExperimentId::ToyMacroMicro
        | ExperimentId::Homogeneous1d => {
            let problem = problem_for(cfg)?;
            let mesh = test_mesh_1d(&problem);
            fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh))
        }
        ExperimentId::BoundaryLayer1d | ExperimentId::PitfallWeights | ExperimentId::PitfallMesh => {
            let problem = problem_for(cfg)?;
            if cfg.epsilon < 0.1 {
                let mesh = Mesh1D::split(150, 50, 0.0, cfg.epsilon, 1.0, 80)?;
                fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh))
            } else {
                let mesh = test_mesh_1d(&problem);
                fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh))
            }
        }
        ExperimentId::HeteroEps => {
            let problem = problem_for(cfg)?;
            let mesh = test_mesh_1d(&problem);
            fdm_rte_1d(&problem, &mesh, &FdmOptions::auto(&mesh))
        }
        ExperimentId::Analytic2d => {
            let problem = problem_for(cfg)?;
            let mesh = Mesh2D::uniform(60, 60, &problem.domain, 40)?;
            Ok(analytic_2d_field(&mesh))
        }
        ExperimentId::HenyeyGreenstein2d => {
            let problem = problem_for(cfg)?;
            let mesh = Mesh2D::uniform(60, 60, &problem.domain, 40)?;
            fdm_rte_2d(&problem, &mesh, 1e-10, 100_000)
        }
        ExperimentId::BoundaryLayer2d => {
            // Diffusion-limit density with the half-space boundary value.
            let table = crate::halfspace::chandrasekhar_h_2d::<f64>(48, 1e-10, 200_000)?;
            diffusion_limit_solve_2d(
                61,
                61,
                &[(-1.0, 1.0), (-1.0, 1.0)],
                &|x, y| {
                    if (x + 1.0).abs() < 1e-13 {
                        crate::halfspace::f_bl_infinity_2d(&|a: f64| (1.0 - y * y) * a, &table)
                    } else {
                        0.0
                    }
                },
                1.0,
                &|_, _| 0.0,
                &|_, _| 0.0,
            )
        }
        ExperimentId::Nonlinear => {
            let consts = NonlinearConstants {
                a: cfg.nl_a,
                c: cfg.nl_c,
                sigma: cfg.nl_sigma,
            };
            if cfg.epsilon < 0.1 {
                let xs: Vec<f64> = (0..200).map(|i| i as f64 / 199.0).collect();
                let limit = nonlinear_limit_solve(consts.kappa(), &xs)?;
                let mut weights = vec![1.0 / 199.0; 200];
                weights[0] *= 0.5;
                weights[199] *= 0.5;
                Ok(Field {
                    axes: vec![Axis {
                        label: "x",
                        nodes: xs,
                        weights,
                    }],
                    values: limit,
                })
            } else {
                let v_rule = gauss_legendre(80, -1.0, 1.0)?;
                let (_, t) =
                    fdm_nonlinear_1d(&consts, cfg.epsilon, 200, &v_rule, &NonlinearFdmOptions::default())?;
                Ok(t)
            }
        }
        ExperimentId::HalfSpace1d | ExperimentId::HalfSpace2d => {
            Err(invalid("half-space experiments have no grid reference; use `rte hfun`"))
        }
    }
}

/// Run one experiment. `allow_long` gates the 2D boundary-layer runs.
pub fn run_experiment(cfg: &ExperimentConfig, allow_long: bool) -> Result<ResultRecord> {
    cfg.validate()?;
    if cfg.id.is_long() && !allow_long {
        return Err(invalid(format!(
            "{} is a long experiment; pass --long to run it",
            cfg.id.label()
        )));
    }
    let start = Instant::now();
    let mut record = match cfg.id {
        ExperimentId::ToyVanilla => run_vanilla_1d(cfg)?,
        ExperimentId::ToyMacroMicro | ExperimentId::Homogeneous1d => run_mm_1d(cfg, None)?,
        ExperimentId::BoundaryLayer1d => {
            if cfg.epsilon < 0.1 {
                let corrector = obtain_corrector_1d(cfg)?;
                run_mm_1d(cfg, Some(corrector))?
            } else {
                run_mm_1d(cfg, None)?
            }
        }
        ExperimentId::PitfallWeights => run_mm_1d(cfg, None)?,
        ExperimentId::PitfallMesh => run_mm_1d_split(cfg)?,
        ExperimentId::HeteroEps => run_hetero(cfg)?,
        ExperimentId::Analytic2d | ExperimentId::HenyeyGreenstein2d => run_mm_2d(cfg, None)?,
        ExperimentId::BoundaryLayer2d => {
            let corrector = obtain_corrector_2d(cfg)?;
            run_mm_2d(cfg, Some(corrector))?
        }
        ExperimentId::Nonlinear => run_nonlinear(cfg)?,
        ExperimentId::HalfSpace1d => run_halfspace_1d(cfg)?,
        ExperimentId::HalfSpace2d => run_halfspace_2d(cfg)?,
    };
    record.wall_seconds = start.elapsed().as_secs_f64();
    Ok(record)
}

fn rel_error_pair(pred: &Field<f64>, reference: &Field<f64>) -> Result<(f64, f64)> {
    Ok((
        relative_l2(pred, reference, false)?,
        relative_l2(pred, reference, true)?,
    ))
}

fn run_vanilla_1d(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let problem = problem_for(cfg)?;
    let trainset = TrainingSet::build_1d(&problem, cfg.n_x, cfg.n_v, cfg.n_b, cfg.seed)?;
    let f_spec = MlpSpec::uniform(2, cfg.n_l, cfg.n_r, 1, Activation::Softplus)?;
    let loss = VanillaLoss1d {
        problem: &problem,
        trainset: &trainset,
        f_spec: f_spec.clone(),
    };
    let reference = run_reference(cfg)?;
    let mesh = test_mesh_1d(&problem);
    let theta0 = init_params(&f_spec, cfg.seed).data;
    let mut rows = Vec::new();
    let (adam, lbfgs, stop) = cfg.optimizer();
    let result = {
        let err_fn = |theta: &[f64]| {
            let pred = f_field_1d((&f_spec, theta), &mesh);
            relative_l2(&pred, &reference, true).unwrap_or(f64::NAN)
        };
        let mut observer =
            history_recorder(&mut rows, cfg.error_every, Some(Box::new(err_fn)));
        two_phase_train(&loss, theta0, &adam, &lbfgs, &stop, Some(&mut observer))?
    };
    let pred = f_field_1d((&f_spec, &result.theta), &mesh);
    let (e2, e) = rel_error_pair(&pred, &reference)?;
    let mut statuses = Vec::new();
    push_statuses(&mut statuses, &result);
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: result.final_loss,
        metrics: vec![
            ("rel_error".into(), e2),
            ("rel_error_sqrt".into(), e),
            ("final_loss".into(), result.final_loss),
        ],
        statuses,
        predicted: Some(pred),
        reference: Some(reference),
        wall_seconds: 0.0,
    })
}

fn mm_specs(cfg: &ExperimentConfig, dim: usize) -> Result<(MlpSpec<f64>, MlpSpec<f64>)> {
    let rho_spec = MlpSpec::uniform(dim, cfg.n_l, cfg.n_r, 1, Activation::Softplus)?;
    let g_spec = MlpSpec::uniform(dim + 1, cfg.n_l, cfg.n_r, 1, Activation::Identity)?;
    Ok((rho_spec, g_spec))
}

fn run_mm_1d(cfg: &ExperimentConfig, corrector: Option<GammaCorrector1d<f64>>) -> Result<ResultRecord> {
    let problem = problem_for(cfg)?;
    let trainset = TrainingSet::build_1d(&problem, cfg.n_x, cfg.n_v, cfg.n_b, cfg.seed)?;
    run_mm_1d_on(cfg, problem, trainset, corrector)
}

/// The layer-refined collocation variant (150 points inside `[0, eps)`, 50
/// outside), used to demonstrate that mesh refinement alone does not fix
/// the plain decomposition in the layer regime.
fn run_mm_1d_split(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let problem = problem_for(cfg)?;
    let mut nodes = Vec::new();
    let eps = cfg.epsilon;
    for i in 0..150 {
        nodes.push(eps * i as f64 / 150.0);
    }
    for i in 0..50 {
        nodes.push(eps + (1.0 - eps) * i as f64 / 50.0);
    }
    let trainset = TrainingSet::build_1d_on_nodes(&problem, nodes, cfg.n_v, cfg.n_b, cfg.seed)?;
    run_mm_1d_on(cfg, problem, trainset, None)
}

fn run_mm_1d_on(
    cfg: &ExperimentConfig,
    problem: ProblemSpec<f64>,
    trainset: TrainingSet<f64>,
    corrector: Option<GammaCorrector1d<f64>>,
) -> Result<ResultRecord> {
    let (rho_spec, g_spec) = mm_specs(cfg, 1)?;
    let gamma_samples = match &corrector {
        Some(c) => Some(GammaSamples1d::from_corrector(c, &trainset)?),
        None => None,
    };
    let mean_penalty = !matches!(cfg.id, ExperimentId::ToyMacroMicro);
    let loss = MacroMicroLoss1d {
        problem: &problem,
        trainset: &trainset,
        rho_spec: rho_spec.clone(),
        g_spec: g_spec.clone(),
        mean_penalty,
        gamma: gamma_samples.as_ref(),
    };
    let reference = run_reference(cfg)?;
    // The error metric lives on the reference mesh.
    let mesh = Mesh1D {
        x: reference.axes[0].nodes.clone(),
        v_rule: crate::quadrature::QuadratureRule {
            nodes: reference.axes[1].nodes.clone(),
            weights: reference.axes[1].weights.clone(),
            lo: -1.0,
            hi: 1.0,
            kind: crate::quadrature::RuleKind::GaussLegendre,
        },
    };
    let mut theta0 = init_params(&rho_spec, cfg.seed).data;
    theta0.extend(init_params(&g_spec, cfg.seed.wrapping_add(1)).data);
    let nrho = rho_spec.param_count();
    let mut rows = Vec::new();
    let (adam, lbfgs, stop) = cfg.optimizer();
    let result = {
        let err_fn = |theta: &[f64]| {
            let pred = mm_field_1d(
                (&rho_spec, &theta[..nrho]),
                (&g_spec, &theta[nrho..]),
                problem.epsilon,
                corrector.as_ref(),
                &mesh,
            );
            relative_l2(&pred, &reference, true).unwrap_or(f64::NAN)
        };
        let mut observer =
            history_recorder(&mut rows, cfg.error_every, Some(Box::new(err_fn)));
        two_phase_train(&loss, theta0, &adam, &lbfgs, &stop, Some(&mut observer))?
    };
    let pred = mm_field_1d(
        (&rho_spec, &result.theta[..nrho]),
        (&g_spec, &result.theta[nrho..]),
        problem.epsilon,
        corrector.as_ref(),
        &mesh,
    );
    let (e2, e) = rel_error_pair(&pred, &reference)?;
    let mut metrics = vec![
        ("rel_error".into(), e2),
        ("rel_error_sqrt".into(), e),
        ("final_loss".into(), result.final_loss),
    ];
    if let Some(c) = &corrector {
        metrics.push(("f_bl_inf".into(), c.f_inf));
    }
    let mut statuses = Vec::new();
    push_statuses(&mut statuses, &result);
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: result.final_loss,
        metrics,
        statuses,
        predicted: Some(pred),
        reference: Some(reference),
        wall_seconds: 0.0,
    })
}

fn run_hetero(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let hp = HeteroEpsProblem::default();
    let problem = hp.equivalent_problem();
    let trainset = TrainingSet::build_1d(&problem, cfg.n_x, cfg.n_v, cfg.n_b, cfg.seed)?;
    let (rho_spec, g_spec) = mm_specs(cfg, 1)?;
    let loss = HeteroEpsLoss {
        hp,
        trainset: &trainset,
        rho_spec: rho_spec.clone(),
        g_spec: g_spec.clone(),
    };
    let reference = run_reference(cfg)?;
    let mesh = test_mesh_1d(&problem);
    let mut theta0 = init_params(&rho_spec, cfg.seed).data;
    theta0.extend(init_params(&g_spec, cfg.seed.wrapping_add(1)).data);
    let nrho = rho_spec.param_count();
    let predict = |theta: &[f64]| -> Field<f64> {
        let rho_params = ParamVector {
            data: theta[..nrho].to_vec(),
        };
        let g_params = ParamVector {
            data: theta[nrho..].to_vec(),
        };
        let nv = mesh.v_rule.len();
        let mut values = Vec::with_capacity(mesh.x.len() * nv);
        for &x in &mesh.x {
            let r = forward(&rho_params, &rho_spec, &[x]).expect("net")[0];
            let e = hp.eps(x);
            for &v in &mesh.v_rule.nodes {
                let g = forward(&g_params, &g_spec, &[x, v]).expect("net")[0];
                values.push(r + e * g);
            }
        }
        Field {
            axes: reference.axes.clone(),
            values,
        }
    };
    let mut rows = Vec::new();
    let (adam, lbfgs, stop) = cfg.optimizer();
    let result = {
        let err_fn =
            |theta: &[f64]| relative_l2(&predict(theta), &reference, true).unwrap_or(f64::NAN);
        let mut observer =
            history_recorder(&mut rows, cfg.error_every, Some(Box::new(err_fn)));
        two_phase_train(&loss, theta0, &adam, &lbfgs, &stop, Some(&mut observer))?
    };
    let pred = predict(&result.theta);
    let (e2, e) = rel_error_pair(&pred, &reference)?;
    let mut statuses = Vec::new();
    push_statuses(&mut statuses, &result);
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: result.final_loss,
        metrics: vec![
            ("rel_error".into(), e2),
            ("rel_error_sqrt".into(), e),
            ("final_loss".into(), result.final_loss),
        ],
        statuses,
        predicted: Some(pred),
        reference: Some(reference),
        wall_seconds: 0.0,
    })
}

fn run_mm_2d(cfg: &ExperimentConfig, corrector: Option<GammaCorrector2d<f64>>) -> Result<ResultRecord> {
    let problem = problem_for(cfg)?;
    let trainset = TrainingSet::build_2d(
        &problem,
        cfg.n_x,
        cfg.n_y,
        cfg.n_v,
        cfg.n_b_space,
        cfg.n_b,
        cfg.seed,
    )?;
    let (rho_spec, g_spec) = mm_specs(cfg, 2)?;
    let gamma_samples = match &corrector {
        Some(c) => Some(GammaSamples2d::from_corrector(c, &problem, &trainset)?),
        None => None,
    };
    let loss = MacroMicroLoss2d {
        problem: &problem,
        trainset: &trainset,
        rho_spec: rho_spec.clone(),
        g_spec: g_spec.clone(),
        mean_penalty: true,
        gamma: gamma_samples.as_ref(),
    };
    let reference = run_reference(cfg)?;
    let mut theta0 = init_params(&rho_spec, cfg.seed).data;
    theta0.extend(init_params(&g_spec, cfg.seed.wrapping_add(1)).data);
    let nrho = rho_spec.param_count();
    let mut rows = Vec::new();
    let (adam, lbfgs, stop) = cfg.optimizer();
    // Error cadence in 2D: compare the density on the reference spatial grid
    // when the reference is a density; otherwise the full flux table.
    let density_reference = reference.axes.len() == 2;
    let mesh = Mesh2D::uniform(
        reference.axes[0].nodes.len(),
        reference.axes[1].nodes.len(),
        &problem.domain,
        if density_reference { 40 } else { reference.axes[2].nodes.len() },
    )?;
    let predict = |theta: &[f64]| -> Field<f64> {
        let full = mm_field_2d(
            (&rho_spec, &theta[..nrho]),
            (&g_spec, &theta[nrho..]),
            problem.epsilon,
            corrector.as_ref(),
            &mesh,
        );
        if density_reference {
            full.average_last_axis()
        } else {
            full
        }
    };
    let result = {
        let err_fn =
            |theta: &[f64]| relative_l2(&predict(theta), &reference, true).unwrap_or(f64::NAN);
        let mut observer =
            history_recorder(&mut rows, cfg.error_every, Some(Box::new(err_fn)));
        two_phase_train(&loss, theta0, &adam, &lbfgs, &stop, Some(&mut observer))?
    };
    let pred = predict(&result.theta);
    let (e2, e) = rel_error_pair(&pred, &reference)?;
    let mut statuses = Vec::new();
    push_statuses(&mut statuses, &result);
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: result.final_loss,
        metrics: vec![
            ("rel_error".into(), e2),
            ("rel_error_sqrt".into(), e),
            ("final_loss".into(), result.final_loss),
        ],
        statuses,
        predicted: Some(pred),
        reference: Some(reference),
        wall_seconds: 0.0,
    })
}

fn run_nonlinear(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let consts = NonlinearConstants {
        a: cfg.nl_a,
        c: cfg.nl_c,
        sigma: cfg.nl_sigma,
    };
    let shell = consts.problem_shell(cfg.epsilon);
    let trainset = TrainingSet::build_1d(&shell, cfg.n_x, cfg.n_v, cfg.n_b, cfg.seed)?;
    let (rho_spec, g_spec) = mm_specs(cfg, 1)?;
    let t_spec = MlpSpec::uniform(1, cfg.n_l, cfg.n_r, 1, Activation::Identity)?;
    let loss = NonlinearLoss {
        trainset: &trainset,
        rho_spec: rho_spec.clone(),
        g_spec: g_spec.clone(),
        t_spec: t_spec.clone(),
        consts,
        epsilon: cfg.epsilon,
    };
    let reference = run_reference(cfg)?; // temperature field
    let n1 = rho_spec.param_count();
    let n2 = n1 + g_spec.param_count();
    let mut theta0 = init_params(&rho_spec, cfg.seed).data;
    theta0.extend(init_params(&g_spec, cfg.seed.wrapping_add(1)).data);
    theta0.extend(init_params(&t_spec, cfg.seed.wrapping_add(2)).data);
    let predict_t = |theta: &[f64]| -> Field<f64> {
        let t_params = ParamVector {
            data: theta[n2..].to_vec(),
        };
        let values: Vec<f64> = reference.axes[0]
            .nodes
            .iter()
            .map(|&x| forward(&t_params, &t_spec, &[x]).expect("net")[0])
            .collect();
        Field {
            axes: reference.axes.clone(),
            values,
        }
    };
    let mut rows = Vec::new();
    let (adam, lbfgs, stop) = cfg.optimizer();
    let result = {
        let err_fn =
            |theta: &[f64]| relative_l2(&predict_t(theta), &reference, true).unwrap_or(f64::NAN);
        let mut observer =
            history_recorder(&mut rows, cfg.error_every, Some(Box::new(err_fn)));
        two_phase_train(&loss, theta0, &adam, &lbfgs, &stop, Some(&mut observer))?
    };
    let pred_t = predict_t(&result.theta);
    let (e2, e) = rel_error_pair(&pred_t, &reference)?;
    let mut statuses = Vec::new();
    push_statuses(&mut statuses, &result);
    let _ = g_spec;
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: result.final_loss,
        metrics: vec![
            ("rel_error_temperature".into(), e2),
            ("rel_error_temperature_sqrt".into(), e),
            ("final_loss".into(), result.final_loss),
        ],
        statuses,
        predicted: Some(pred_t),
        reference: Some(reference),
        wall_seconds: 0.0,
    })
}

fn halfspace_spec_1d(cfg: &ExperimentConfig) -> Result<HalfSpaceSpec<f64>> {
    HalfSpaceSpec::new_1d(
        cfg.z_max,
        cfg.n_z,
        cfg.n_v,
        cfg.n_b,
        Arc::new(|v: f64| 5.0 * v.sin()),
    )
}

fn run_halfspace_1d(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let spec = halfspace_spec_1d(cfg)?;
    let (adam, lbfgs, stop) = cfg.optimizer();
    let mut rows = Vec::new();
    let solution = {
        let mut observer = history_recorder(&mut rows, cfg.error_every, None);
        solve_halfspace_1d(
            &spec,
            cfg.n_l,
            cfg.n_r,
            &adam,
            &lbfgs,
            &stop,
            cfg.seed,
            Some(&mut observer),
        )?
    };
    // H-function cross-checks.
    let table = chandrasekhar_h_1d::<f64>(64, 1e-10, 200_000)?;
    let f_inf_exact = f_bl_infinity_1d(&|v: f64| 5.0 * v.sin(), &table);
    let flux_rule = gauss_legendre::<f64>(40, -1.0, 1.0)?;
    let mut flux_max: f64 = 0.0;
    for k in 0..20 {
        let z = (k as f64 + 0.5) * cfg.z_max / 20.0;
        flux_max = flux_max.max(solution.flux(z, &flux_rule, false).abs());
    }
    let mut trace_gap: f64 = 0.0;
    for k in 1..10 {
        let v = -(k as f64) / 10.0;
        let formula = reflection_bc_1d(&|w: f64| 5.0 * w.sin(), &table, v)?;
        let trained = solution.eval(0.0, v);
        trace_gap = trace_gap.max((formula - trained).abs());
    }
    // Sampled profile plus corrector checkpoint.
    let z_nodes: Vec<f64> = (0..=100).map(|i| cfg.z_max * i as f64 / 100.0).collect();
    let mut values = Vec::with_capacity(z_nodes.len() * flux_rule.len());
    for &z in &z_nodes {
        for &v in &flux_rule.nodes {
            values.push(solution.eval(z, v));
        }
    }
    let mut z_weights = vec![cfg.z_max / 100.0; z_nodes.len()];
    z_weights[0] *= 0.5;
    z_weights[100] *= 0.5;
    let predicted = Field {
        axes: vec![
            Axis {
                label: "x",
                nodes: z_nodes,
                weights: z_weights,
            },
            Axis {
                label: "v",
                nodes: flux_rule.nodes.clone(),
                weights: flux_rule.weights.clone(),
            },
        ],
        values,
    };
    if let Some(base) = &cfg.corrector {
        let corr = GammaCorrector1d::from_solution(
            &solution,
            StretchMap::constant_sigma(1.0, cfg.epsilon, 0.0),
            cfg.z_max,
        );
        if let Some(parent) = base.parent() {
            std::fs::create_dir_all(parent)?;
        }
        save_corrector_1d(base, &corr, cfg.seed)?;
    }
    Ok(ResultRecord {
        config: cfg.clone(),
        history: rows,
        final_loss: solution.final_loss,
        metrics: vec![
            ("f_bl_inf".into(), solution.f_inf),
            ("f_bl_inf_exact".into(), f_inf_exact),
            ("max_abs_flux".into(), flux_max),
            ("reflection_trace_gap".into(), trace_gap),
            ("final_loss".into(), solution.final_loss),
        ],
        statuses: Vec::new(),
        predicted: Some(predicted),
        reference: None,
        wall_seconds: 0.0,
    })
}

fn run_halfspace_2d(cfg: &ExperimentConfig) -> Result<ResultRecord> {
    let corrector = train_corrector_2d(cfg)?;
    if let Some(base) = &cfg.corrector {
        if let Some(parent) = base.parent() {
            std::fs::create_dir_all(parent)?;
        }
        crate::halfspace::save_corrector_2d(base, &corrector, cfg.seed)?;
    }
    let table = crate::halfspace::chandrasekhar_h_2d::<f64>(48, 1e-10, 200_000)?;
    let mut worst: f64 = 0.0;
    for (j, &y) in corrector.y_grid.iter().enumerate() {
        let exact =
            crate::halfspace::f_bl_infinity_2d(&|a: f64| (1.0 - y * y) * a, &table);
        worst = worst.max((corrector.f_inf[j] - exact).abs());
    }
    Ok(ResultRecord {
        config: cfg.clone(),
        history: Vec::new(),
        final_loss: 0.0,
        metrics: vec![
            ("max_f_inf_gap".into(), worst),
            (
                "f_inf_mid".into(),
                corrector.f_inf[corrector.f_inf.len() / 2],
            ),
        ],
        statuses: Vec::new(),
        predicted: None,
        reference: None,
        wall_seconds: 0.0,
    })
}

fn obtain_corrector_1d(cfg: &ExperimentConfig) -> Result<GammaCorrector1d<f64>> {
    if let Some(base) = &cfg.corrector {
        if base.with_extension("meta").exists() {
            return load_corrector_1d(base);
        }
    }
    let spec = halfspace_spec_1d(cfg)?;
    let (adam, lbfgs, stop) = cfg.optimizer();
    let solution = solve_halfspace_1d(&spec, cfg.n_l, cfg.n_r, &adam, &lbfgs, &stop, cfg.seed, None)?;
    let corr = GammaCorrector1d::from_solution(
        &solution,
        StretchMap::constant_sigma(1.0, cfg.epsilon, 0.0),
        cfg.z_max,
    );
    if let Some(base) = &cfg.corrector {
        if let Some(parent) = base.parent() {
            std::fs::create_dir_all(parent)?;
        }
        save_corrector_1d(base, &corr, cfg.seed)?;
    }
    Ok(corr)
}

fn train_corrector_2d(cfg: &ExperimentConfig) -> Result<GammaCorrector2d<f64>> {
    let (adam, lbfgs, stop) = cfg.optimizer();
    let ny = cfg.corrector_ny.max(3);
    let y_grid: Vec<f64> = (0..ny)
        .map(|j| -1.0 + 2.0 * j as f64 / (ny - 1) as f64)
        .collect();
    solve_halfspace_2d(
        cfg.z_max,
        cfg.n_z,
        cfg.n_v,
        cfg.n_b,
        y_grid,
        Arc::new(|y: f64, a: f64| (1.0 - y * y) * a),
        cfg.n_l,
        cfg.n_r,
        &adam,
        &lbfgs,
        &stop,
        cfg.seed,
        StretchMap::constant_sigma(1.0, cfg.epsilon, -1.0),
    )
}

fn obtain_corrector_2d(cfg: &ExperimentConfig) -> Result<GammaCorrector2d<f64>> {
    if let Some(base) = &cfg.corrector {
        if base.with_extension("meta").exists() {
            return crate::halfspace::load_corrector_2d(base);
        }
    }
    let corrector = train_corrector_2d(cfg)
        .map_err(|e| Error::Numerical(format!("corrector training: {e}")))?;
    if let Some(base) = &cfg.corrector {
        if let Some(parent) = base.parent() {
            std::fs::create_dir_all(parent)?;
        }
        crate::halfspace::save_corrector_2d(base, &corrector, cfg.seed)?;
    }
    Ok(corrector)
}
