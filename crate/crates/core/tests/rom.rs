use gdlspg::fom::{ResidualProblem, TimeScheme, Velocity};
use gdlspg::num::{DenseMatrix, LinearMap};
use gdlspg::rom::{gn_step, pod_lspg, rom_solve, Normalization, RomConfig, StepPolicy};
use gdlspg::{Error, Result};

struct Linear(DenseMatrix);

impl Velocity for Linear {
    fn dim(&self) -> usize {
        self.0.rows()
    }
    fn velocity(&self, x: &[f64], _t: f64) -> Result<Vec<f64>> {
        self.0.matvec(x)
    }
    fn jacobian_apply(&self, _x: &[f64], _t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        self.0.matmul(v)
    }
}

// f(x) = -x^2 componentwise, a mildly nonlinear sink
struct Quadratic(usize);

impl Velocity for Quadratic {
    fn dim(&self) -> usize {
        self.0
    }
    fn velocity(&self, x: &[f64], _t: f64) -> Result<Vec<f64>> {
        Ok(x.iter().map(|v| -v * v).collect())
    }
    fn jacobian_apply(&self, x: &[f64], _t: f64, v: &DenseMatrix) -> Result<DenseMatrix> {
        Ok(DenseMatrix::from_fn(v.rows(), v.cols(), |i, j| -2.0 * x[i] * v[(i, j)]))
    }
}

fn basis() -> DenseMatrix {
    // two orthonormal columns in R^4
    let h = 0.5;
    DenseMatrix::from_rows(&[vec![h, h], vec![h, -h], vec![h, h], vec![h, -h]]).unwrap()
}

#[test]
fn converged_guess_takes_no_iterations() {
    let f = Linear(DenseMatrix::zeros(3, 3));
    let scheme = TimeScheme::backward_euler(0.1).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let dec = LinearMap(DenseMatrix::identity(3));
    let x0 = [0.3, -1.0, 2.0];
    let traj = rom_solve(&p, &dec, &x0, 4, &RomConfig::gd_lspg()).unwrap();
    assert_eq!(traj.iterations, vec![0; 4]);
    assert!(traj.latents.iter().all(|l| l == &x0));
    assert_eq!(traj.reference_norm, 0.0);
}

#[test]
fn explicit_scheme_test_basis_is_the_trial_jacobian() {
    let f = Quadratic(4);
    let scheme = TimeScheme::forward_euler(0.05).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let v = basis();
    let psi = p.jacobian_apply(&[1.0, 2.0, 3.0, 4.0], 0.05, &v).unwrap();
    assert_eq!(psi, v);
}

#[test]
fn linear_problem_converges_in_one_step_and_matches_direct_pod() {
    let a = DenseMatrix::from_fn(4, 4, |i, j| if i == j { -1.0 - i as f64 } else { 0.1 });
    let f = Linear(a);
    let scheme = TimeScheme::backward_euler(0.1).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let phi = basis();
    let cfg = RomConfig {
        kappa: 1e-10,
        ..RomConfig::pod_lspg()
    };
    let general = rom_solve(&p, &LinearMap(phi.clone()), &[1.0, 0.5], 6, &cfg).unwrap();
    let direct = pod_lspg(&p, &phi, &[1.0, 0.5], 6, &cfg).unwrap();
    assert!(general.iterations.iter().all(|&k| k <= 1));
    for (g, d) in general.states.iter().zip(&direct.states) {
        for (x, y) in g.iter().zip(d) {
            assert!((x - y).abs() < 1e-13);
        }
    }
}

#[test]
fn all_step_policies_reach_the_same_solution() {
    let f = Quadratic(4);
    let scheme = TimeScheme::backward_euler(0.2).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let dec = LinearMap(basis());
    let mut finals = Vec::new();
    for policy in [StepPolicy::unit(), StepPolicy::decaying(), StepPolicy::armijo()] {
        let cfg = RomConfig {
            kappa: 1e-9,
            policy,
            ..RomConfig::pod_lspg()
        };
        let t = rom_solve(&p, &dec, &[1.5, 0.2], 5, &cfg).unwrap();
        assert!(t.ratios.iter().all(|&r| r <= 1e-9));
        finals.push(t.latents.last().unwrap().clone());
    }
    for f in &finals[1..] {
        for (a, b) in f.iter().zip(&finals[0]) {
            assert!((a - b).abs() < 1e-6, "{f:?} vs {:?}", finals[0]);
        }
    }
}

#[test]
fn per_step_normalization_uses_each_steps_guess() {
    let f = Quadratic(4);
    let scheme = TimeScheme::backward_euler(0.2).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let phi = basis();
    let cfg = RomConfig {
        normalization: Normalization::PerStep,
        ..RomConfig::pod_lspg()
    };
    let t = pod_lspg(&p, &phi, &[1.5, 0.2], 4, &cfg).unwrap();
    assert!(t.ratios.iter().all(|&r| r <= cfg.kappa));
    // the general solver with an explicit None reference does the same per step
    let h = p.history_term(&[&phi.matvec(&[1.5, 0.2]).unwrap()], 0.2).unwrap();
    let out = gn_step(&p, &LinearMap(phi.clone()), &[1.5, 0.2], &h, 0.2, &cfg, None, 1).unwrap();
    for (a, b) in out.xhat.iter().zip(&t.latents[1]) {
        assert!((a - b).abs() < 1e-12);
    }
}

#[test]
fn iteration_cap_reports_best_ratio() {
    let f = Quadratic(4);
    let scheme = TimeScheme::backward_euler(0.5).unwrap();
    let p = ResidualProblem::new(&f, &scheme);
    let cfg = RomConfig {
        kappa: 1e-12,
        policy: StepPolicy::Fixed { beta: 0.01 },
        max_iterations: 3,
        normalization: Normalization::FirstStep,
    };
    match rom_solve(&p, &LinearMap(basis()), &[2.0, 0.5], 3, &cfg) {
        Err(Error::GaussNewton {
            step,
            iterations,
            best_ratio,
        }) => {
            assert_eq!((step, iterations), (1, 3));
            assert!(best_ratio > 0.0 && best_ratio < 1.0);
        }
        other => panic!("expected a Gauss-Newton failure, got {other:?}"),
    }
}

#[test]
fn config_validation_and_serialization() {
    assert!(RomConfig {
        kappa: 1.5,
        ..RomConfig::gd_lspg()
    }
    .validate()
    .is_err());
    assert!(RomConfig {
        policy: StepPolicy::Fixed { beta: 0.0 },
        ..RomConfig::gd_lspg()
    }
    .validate()
    .is_err());
    let cfg = RomConfig {
        policy: StepPolicy::decaying(),
        ..RomConfig::gd_lspg()
    };
    let text = toml::to_string(&cfg).unwrap();
    assert_eq!(toml::from_str::<RomConfig>(&text).unwrap(), cfg);
}
