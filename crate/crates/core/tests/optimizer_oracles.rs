//! Design-step checks: dense KKT oracles on one element, finite-difference
//! gradients of the discrete objective, fixed points and run-level properties.

use gradopt::bench::{cantilever_bc, cantilever_case, named_case, BenchmarkCase, Mode};
use gradopt::elasticity::{BoundaryConditions, Component, DirichletCondition, NeumannLoad};
use gradopt::fem::{BoundaryTag, StructuredQuadMesh};
use gradopt::material::{IsotropicElasticity, InterpolationSpec};
use gradopt::opt::{
    assemble_phase_rhs, delta_phi, material_fraction, DesignProblem, GradedConfig, GradedOptimizer, OptConfig,
    SingleOptimizer, Termination,
};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::strategy::ValueTree;
use proptest::test_runner::TestRunner;

const E: f64 = 12500.0;
const NU: f64 = 0.25;
const SPEC: InterpolationSpec = InterpolationSpec {
    penalty: 3.0,
    gamma_phi: 0.02,
    beta: 4.0,
};
const KAPPA_PHI: f64 = 4.0;
const KAPPA_CHI: f64 = 3.0;
const GAMMA_CHI: f64 = 0.05;
const TAU: f64 = 1e-3;
const M: f64 = 0.45;

/// Local counter-clockwise node `a` of the unit-square element is global node `GLOBAL[a]`.
const GLOBAL: [usize; 4] = [0, 1, 3, 2];

fn desk_problem() -> DesignProblem {
    let mesh = StructuredQuadMesh::new(1, 1, 1.0, 1.0).unwrap();
    let mut bc = BoundaryConditions::default();
    for node in [0, 2] {
        for component in [Component::X, Component::Y] {
            bc.dirichlet.push(DirichletCondition {
                node,
                component,
                value: 0.0,
            });
        }
    }
    let edge = *mesh.edges_with_tag(BoundaryTag::Right).next().unwrap();
    bc.neumann.push(NeumannLoad {
        edge,
        traction: [0.0, -600.0],
    });
    DesignProblem {
        material: IsotropicElasticity::new(E, NU).unwrap(),
        interpolation: SPEC,
        bc,
        mesh,
    }
}

fn opt_config() -> OptConfig {
    OptConfig {
        m: M,
        kappa_phi: KAPPA_PHI,
        tau: TAU,
        tol: 0.01,
        max_iter: 10,
        phi0: 0.5,
    }
}

fn graded_config() -> GradedConfig {
    GradedConfig {
        base: opt_config(),
        kappa_chi: KAPPA_CHI,
        gamma_chi: GAMMA_CHI,
        chi0: None,
    }
}

/// Consistent mass and Laplacian of the unit square in local ccw order.
fn unit_mass() -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, &[4., 2., 1., 2., 2., 4., 2., 1., 1., 2., 4., 2., 2., 1., 2., 4.]) / 36.0
}

fn unit_laplacian() -> DMatrix<f64> {
    DMatrix::from_row_slice(4, 4, &[4., -1., -2., -1., -1., 4., -1., -2., -2., -1., 4., -1., -1., -2., -1., 4.]) / 6.0
}

/// Shape values and physical gradients on the unit square, local ccw order.
fn shapes(x: f64, y: f64) -> ([f64; 4], [[f64; 2]; 4]) {
    (
        [(1. - x) * (1. - y), x * (1. - y), x * y, (1. - x) * y],
        [[-(1. - y), -(1. - x)], [1. - y, -x], [y, x], [-y, 1. - x]],
    )
}

/// Hand-rolled 2x2 Gauss integration of `\int N_a f(phi, chi, E_bulk) dx`
/// where `E_bulk = (C_bulk eps) : eps`; nodal inputs are in global order.
fn integrate_local(phi: &[f64], chi: &[f64], u: &[f64], f: impl Fn(f64, f64, f64) -> f64) -> DVector<f64> {
    let (lam, mu) = (E * NU / ((1. + NU) * (1. - 2. * NU)), E / (2. * (1. + NU)));
    let g = 0.5 / 3f64.sqrt();
    let mut out = DVector::zeros(4);
    for x in [0.5 - g, 0.5 + g] {
        for y in [0.5 - g, 0.5 + g] {
            let (n, dn) = shapes(x, y);
            let (mut p, mut c, mut exx, mut eyy, mut exy) = (0., 0., 0., 0., 0.);
            for a in 0..4 {
                let node = GLOBAL[a];
                p += n[a] * phi[node];
                c += n[a] * chi[node];
                let (ux, uy) = (u[2 * node], u[2 * node + 1]);
                exx += dn[a][0] * ux;
                eyy += dn[a][1] * uy;
                exy += 0.5 * (dn[a][1] * ux + dn[a][0] * uy);
            }
            let tr = exx + eyy;
            let e_bulk = lam * tr * tr + 2. * mu * (exx * exx + eyy * eyy + 2. * exy * exy);
            let v = f(p, c, e_bulk);
            for a in 0..4 {
                out[a] += 0.25 * n[a] * v;
            }
        }
    }
    out
}

fn to_local(v: &[f64]) -> DVector<f64> {
    DVector::from_iterator(4, GLOBAL.iter().map(|&g| v[g]))
}

fn well_prime(p: f64) -> f64 {
    2. * (p - p * p) * (1. - 2. * p)
}

fn density_scale_prime(p: f64) -> f64 {
    3. * p * p - 3. * SPEC.gamma_phi.powi(2) * (1. - p).powi(2)
}

fn density_scale(p: f64) -> f64 {
    p.powi(3) + SPEC.gamma_phi.powi(2) * (1. - p).powi(3)
}

fn blend(c: f64) -> f64 {
    c + (1. - c) / SPEC.beta
}

const PHI_N: [f64; 4] = [0.3, 0.6, 0.5, 0.8];
const CHI_N: [f64; 4] = [0.1, 0.5, 0.2, 0.7];
const U: [f64; 8] = [0.0, 0.0, 1e-3, -2e-3, 0.0, 0.0, 2e-3, -1e-3];

/// Dense `[A b; b^T 0]` solve; returns (phi, lambda) in global order.
fn dense_kkt(a: &DMatrix<f64>, rhs: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut kkt = DMatrix::zeros(5, 5);
    kkt.view_mut((0, 0), (4, 4)).copy_from(a);
    for i in 0..4 {
        kkt[(i, 4)] = 0.25;
        kkt[(4, i)] = 0.25;
    }
    let mut r = DVector::zeros(5);
    r.rows_mut(0, 4).copy_from(rhs);
    r[4] = M;
    let sol = kkt.lu().solve(&r).unwrap();
    let mut phi = vec![0.0; 4];
    for a in 0..4 {
        phi[GLOBAL[a]] = sol[a];
    }
    (phi, sol[4])
}

fn assert_close(got: &[f64], want: &[f64], rel: f64) {
    let scale = want.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (g, w) in got.iter().zip(want) {
        assert!((g - w).abs() <= rel * scale, "{got:?} vs {want:?}");
    }
}

#[test]
fn single_step_matches_dense_kkt() {
    let problem = desk_problem();
    let opt = SingleOptimizer::new(&problem, &opt_config()).unwrap();
    let gamma = SPEC.gamma_phi;
    let mass = unit_mass() * gamma;
    let a = &mass / TAU + unit_laplacian() * (KAPPA_PHI * gamma);

    let q_s = integrate_local(&PHI_N, &CHI_N, &U, |p, _, e| density_scale_prime(p) * e);
    let q_psi = integrate_local(&PHI_N, &CHI_N, &U, |p, _, _| -KAPPA_PHI / gamma * well_prime(p));
    let rhs = &mass * to_local(&PHI_N) / TAU + q_s + q_psi;

    let lib_rhs = assemble_phase_rhs(opt.elastic(), opt.matrices(), &PHI_N, None, &U);
    assert_close(to_local(&lib_rhs).as_slice(), rhs.as_slice(), 1e-12);

    let (phi, lambda) = dense_kkt(&a, &rhs);
    let step = opt.step(&PHI_N, &U).unwrap();
    assert_close(&step.phi, &phi, 1e-10);
    assert!((step.lambda - lambda).abs() <= 1e-10 * lambda.abs().max(1.0), "{} vs {lambda}", step.lambda);
    assert!(step.volume_residual <= 1e-10);
}

#[test]
fn graded_step_matches_dense_block_system() {
    let problem = desk_problem();
    let opt = GradedOptimizer::new(&problem, &graded_config()).unwrap();
    let gamma = SPEC.gamma_phi;
    let mass = unit_mass() * gamma;
    let a = &mass / TAU + unit_laplacian() * (KAPPA_PHI * gamma);
    let q_s = integrate_local(&PHI_N, &CHI_N, &U, |p, c, e| blend(c) * density_scale_prime(p) * e);
    let q_psi = integrate_local(&PHI_N, &CHI_N, &U, |p, _, _| -KAPPA_PHI / gamma * well_prime(p));
    let rhs = &mass * to_local(&PHI_N) / TAU + q_s + q_psi;

    let mass_chi = unit_mass() * GAMMA_CHI;
    let a_chi = &mass_chi / TAU + unit_laplacian() * (KAPPA_CHI * GAMMA_CHI);
    let q_t = integrate_local(&PHI_N, &CHI_N, &U, |p, _, e| (1. - 1. / SPEC.beta) * density_scale(p) * e);
    let rhs_chi = &mass_chi * to_local(&CHI_N) / TAU + &q_t;

    // the 9x9 block system is block diagonal between (phi, lambda) and chi
    let mut full = DMatrix::zeros(9, 9);
    full.view_mut((0, 0), (4, 4)).copy_from(&a);
    for i in 0..4 {
        full[(i, 4)] = 0.25;
        full[(4, i)] = 0.25;
    }
    full.view_mut((5, 5), (4, 4)).copy_from(&a_chi);
    let mut r = DVector::zeros(9);
    r.rows_mut(0, 4).copy_from(&rhs);
    r[4] = M;
    r.rows_mut(5, 4).copy_from(&rhs_chi);
    let sol = full.lu().solve(&r).unwrap();
    let (mut phi, mut chi) = (vec![0.0; 4], vec![0.0; 4]);
    for a in 0..4 {
        phi[GLOBAL[a]] = sol[a];
        chi[GLOBAL[a]] = sol[5 + a];
    }

    let step = opt.step(&PHI_N, &CHI_N, &U).unwrap();
    assert_close(&step.phi.phi, &phi, 1e-10);
    assert!((step.phi.lambda - sol[4]).abs() <= 1e-10 * sol[4].abs().max(1.0));
    assert_close(&step.chi, &chi, 1e-10);
    assert_close(to_local(&step.chi_forcing).as_slice(), q_t.as_slice(), 1e-12);
}

fn small_cantilever(scale: f64, mode: Mode) -> BenchmarkCase {
    let mut case = cantilever_case(2.0).unwrap().with_mesh_scale(scale).unwrap();
    case.mode = mode;
    case
}

fn random_field(runner: &mut TestRunner, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    proptest::collection::vec(lo..hi, n).new_tree(runner).unwrap().current()
}

/// Directional derivative of the discrete objective against the step residual
/// `K phi - q_s - q_psi`, the negative descent direction of the flow.
#[test]
fn single_gradient_matches_objective_fd() {
    let case = small_cantilever(1.0 / 16.0, Mode::Single);
    let opt = SingleOptimizer::new(&case.problem().unwrap(), &case.optimizer).unwrap();
    let n = opt.elastic().mesh().node_count();
    let mut runner = TestRunner::deterministic();
    for _ in 0..5 {
        let phi = random_field(&mut runner, n, 0.2, 0.8);
        let dir = random_field(&mut runner, n, -1.0, 1.0);
        let j = |p: &[f64]| opt.objective(p, opt.elastic().solve(p, None).unwrap().compliance);
        let mats = opt.matrices();
        let u = opt.elastic().solve(&phi, None).unwrap().u;
        let rhs = assemble_phase_rhs(opt.elastic(), mats, &phi, None, &u);
        let m_phi = mats.mass.mul_vec(&phi);
        let k_phi = mats.stiffness.mul_vec(&phi);
        let grad: Vec<f64> = (0..n).map(|i| k_phi[i] - (rhs[i] - m_phi[i] / mats.tau)).collect();
        let analytic: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();

        let h = 1e-5;
        let plus: Vec<f64> = phi.iter().zip(&dir).map(|(p, d)| p + h * d).collect();
        let minus: Vec<f64> = phi.iter().zip(&dir).map(|(p, d)| p - h * d).collect();
        let fd = (j(&plus) - j(&minus)) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-5 * fd.abs(), "analytic {analytic} fd {fd}");
    }
}

#[test]
fn graded_chi_gradient_matches_objective_fd() {
    let case = small_cantilever(1.0 / 16.0, Mode::Graded);
    let opt = GradedOptimizer::new(&case.problem().unwrap(), &case.graded_config()).unwrap();
    let n = opt.elastic().mesh().node_count();
    let mut runner = TestRunner::deterministic();
    for _ in 0..5 {
        let phi = random_field(&mut runner, n, 0.5, 0.9);
        let chi: Vec<f64> = random_field(&mut runner, n, 0.1, 0.4);
        let dir = random_field(&mut runner, n, -1.0, 1.0);
        let j = |c: &[f64]| opt.objective(&phi, c, opt.elastic().solve(&phi, Some(c)).unwrap().compliance);
        let u = opt.elastic().solve(&phi, Some(&chi)).unwrap().u;
        let step = opt.step(&phi, &chi, &u).unwrap();
        let k_chi = opt.chi_matrices().stiffness.mul_vec(&chi);
        let analytic: f64 = (0..n).map(|i| (k_chi[i] - step.chi_forcing[i]) * dir[i]).sum();

        let h = 1e-5;
        let plus: Vec<f64> = chi.iter().zip(&dir).map(|(c, d)| c + h * d).collect();
        let minus: Vec<f64> = chi.iter().zip(&dir).map(|(c, d)| c - h * d).collect();
        let fd = (j(&plus) - j(&minus)) / (2.0 * h);
        assert!((analytic - fd).abs() <= 1e-5 * fd.abs(), "analytic {analytic} fd {fd}");
    }
}

fn unloaded(mesh: StructuredQuadMesh) -> DesignProblem {
    let mut bc = cantilever_bc(&mesh);
    bc.neumann.clear();
    DesignProblem {
        material: IsotropicElasticity::new(E, NU).unwrap(),
        interpolation: SPEC,
        bc,
        mesh,
    }
}

#[test]
fn half_density_without_load_is_stationary() {
    let problem = unloaded(StructuredQuadMesh::new(8, 4, 2.0, 1.0).unwrap());
    let cfg = OptConfig {
        m: 0.5,
        ..opt_config()
    };
    let opt = SingleOptimizer::new(&problem, &cfg).unwrap();
    let n = problem.mesh.node_count();
    let step = opt.step(&vec![0.5; n], &vec![0.0; 2 * n]).unwrap();
    assert!(step.phi.iter().all(|p| (p - 0.5).abs() < 1e-12), "{:?}", step.phi);
    assert!(step.lambda.abs() < 1e-8, "lambda {}", step.lambda);
    let mean: f64 = material_fraction(&step.phi, &opt.matrices().node_areas);
    assert!((mean - 0.5).abs() < 1e-12);
}

#[test]
fn full_volume_start_terminates_at_once() {
    let mut case = small_cantilever(1.0 / 8.0, Mode::Single);
    case.optimizer.m = 1.0;
    case.optimizer.phi0 = 1.0;
    let record = case.run(None).unwrap();
    assert_eq!(record.termination, Termination::Converged);
    assert_eq!(record.iterations(), 1);
    assert!(record.rows[0].delta_phi < case.optimizer.tol);
    assert!(record.phi.iter().all(|&p| p <= 1.0));

    // without load the first step is the identity up to rounding
    let problem = unloaded(case.mesh().unwrap());
    let opt = SingleOptimizer::new(&problem, &case.optimizer).unwrap();
    let record = opt.run(None);
    assert_eq!(record.iterations(), 1);
    assert!(record.rows[0].delta_phi < 1e-12);
    assert!(record.phi.iter().all(|&p| (p - 1.0).abs() < 1e-12));
}

/// The two loaded edges are 16 times longer on the 8 x 4 mesh than on the
/// reference mesh; the traction is scaled down so the total force matches.
#[test]
fn objective_decreases_on_coarse_cantilever() {
    let case = small_cantilever(1.0 / 16.0, Mode::Single);
    let mut problem = case.problem().unwrap();
    for load in &mut problem.bc.neumann {
        load.traction[1] /= 16.0;
    }
    let cfg = OptConfig {
        max_iter: 30,
        tol: 1e-14,
        ..case.optimizer
    };
    let record = SingleOptimizer::new(&problem, &cfg).unwrap().run(None);
    assert_eq!(record.iterations(), 30);
    let j: Vec<f64> = record.rows.iter().map(|r| r.objective).collect();
    for k in 3..j.len() - 1 {
        assert!(j[k + 1] <= j[k] * (1.0 + 1e-12), "J rises at iteration {}: {:?}", k + 2, j);
    }
}

#[test]
fn unit_beta_leaves_grading_untouched() {
    let mut case = small_cantilever(1.0 / 8.0, Mode::Graded);
    case.interpolation.beta = 1.0;
    let opt = GradedOptimizer::new(&case.problem().unwrap(), &case.graded_config()).unwrap();
    let n = opt.elastic().mesh().node_count();
    let mut runner = TestRunner::deterministic();
    let phi = random_field(&mut runner, n, 0.3, 1.0);
    let chi = vec![0.2; n];
    let u = opt.elastic().solve(&phi, Some(&chi)).unwrap().u;
    let step = opt.step(&phi, &chi, &u).unwrap();
    assert!(step.chi_forcing.iter().all(|&q| q == 0.0));
    assert!(step.chi.iter().all(|c| (c - 0.2).abs() <= 1e-15), "{:?}", &step.chi[..4]);
}

#[test]
fn unit_beta_graded_run_reproduces_single_run() {
    let mut graded = small_cantilever(1.0 / 8.0, Mode::Graded);
    graded.interpolation.beta = 1.0;
    graded.optimizer.max_iter = 40;
    let single = BenchmarkCase {
        mode: Mode::Single,
        ..graded.clone()
    };
    let g = graded.run(None).unwrap();
    let s = single.run(None).unwrap();
    assert_eq!(g.iterations(), s.iterations());
    for (a, b) in g.rows.iter().zip(&s.rows) {
        assert!((a.compliance - b.compliance).abs() <= 1e-10 * b.compliance);
        assert_eq!(a.chi_forcing_max, Some(0.0));
    }
}

#[test]
fn box_constraints_hold_every_iteration() {
    let mut case = named_case("cantilever_s2").unwrap().with_mesh_scale(0.25).unwrap();
    case.optimizer.max_iter = 25;
    let mut violations = Vec::new();
    let mut observer = |row: &gradopt::opt::IterationRecord, phi: &[f64], chi: Option<&[f64]>| {
        let chi = chi.unwrap();
        let ok = phi.iter().zip(chi).all(|(&p, &c)| 0.0 <= c && c <= p && p <= 1.0);
        if !ok || row.volume_residual > 1e-8 {
            violations.push(row.iter);
        }
    };
    case.run(Some(&mut observer)).unwrap();
    assert!(violations.is_empty(), "iterations {violations:?}");
}

fn neumaier_sum(values: impl Iterator<Item = f64>) -> f64 {
    let (mut sum, mut comp) = (0.0f64, 0.0f64);
    for v in values {
        let t = sum + v;
        comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
        sum = t;
    }
    sum + comp
}

proptest! {
    #[test]
    fn delta_matches_compensated_norms(pair in proptest::collection::vec((0.0..1.0f64, 0.0..1.0f64), 1..500)) {
        let (new, old): (Vec<f64>, Vec<f64>) = pair.into_iter().unzip();
        prop_assume!(old.iter().any(|&v| v > 0.0));
        let num = neumaier_sum(new.iter().zip(&old).map(|(a, b)| (a - b) * (a - b))).sqrt();
        let den = neumaier_sum(old.iter().map(|v| v * v)).sqrt();
        let oracle = num / den;
        prop_assert!((delta_phi(&new, &old) - oracle).abs() <= 1e-12 * oracle.max(1e-300));
    }

    #[test]
    fn material_fraction_matches_exact_integral(values in proptest::collection::vec(0.0..1.0f64, 45)) {
        // 8 x 4 mesh; the bilinear interpolant integrates to area times the corner mean
        let mesh = StructuredQuadMesh::new(8, 4, 2.0, 1.0).unwrap();
        let quad = gradopt::fem::ElementQuadrature::gauss_2x2(&mesh).unwrap();
        let mats = gradopt::opt::assemble_phase_matrices(&mesh, &quad, 1.0, 1.0, 1.0).unwrap();
        let cell = mesh.hx() * mesh.hy();
        let integral = neumaier_sum(mesh.elements().iter().map(|c| cell * c.iter().map(|&n| values[n]).sum::<f64>() / 4.0));
        let oracle = integral / mesh.area();
        prop_assert!((material_fraction(&values, &mats.node_areas) - oracle).abs() <= 1e-10);
    }
}
