use std::fmt;

use nalgebra::{DVector, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::dynamics::{error_vector, flow_rhs, hessian};
use super::{Configuration, FormationError, FormationSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Classification {
    Correct,
    IncorrectStableCandidate,
    IncorrectUnstable,
    Degenerate,
}

impl Classification {
    pub fn as_str(&self) -> &'static str {
        match self {
            Classification::Correct => "correct",
            Classification::IncorrectStableCandidate => "incorrect-stable-candidate",
            Classification::IncorrectUnstable => "incorrect-unstable",
            Classification::Degenerate => "degenerate",
        }
    }

    pub fn is_incorrect(&self) -> bool {
        !matches!(self, Classification::Correct)
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ClassifyOptions {
    /// Largest `|flow_rhs|` accepted as an equilibrium.
    pub eq_tol: f64,
    /// Largest `|e|` counted as the desired shape.
    pub err_tol: f64,
    /// Eigenvalues within this of zero are treated as zero.
    pub zero_tol: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        ClassifyOptions {
            eq_tol: 1e-9,
            err_tol: 1e-6,
            zero_tol: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EquilibriumReport {
    pub p: Configuration,
    pub rhs_norm: f64,
    pub error_norm: f64,
    /// Ascending.
    pub hessian_eigs: Vec<f64>,
    pub classification: Classification,
}

/// Rigid motions of the ambient space: translations plus rotations.
fn structural_zeros(dim: usize) -> usize {
    dim * (dim + 1) / 2
}

pub fn hessian_eigenvalues(spec: &FormationSpec, p: &[f64]) -> Result<Vec<f64>, FormationError> {
    let h = hessian(spec, p)?;
    let eig = SymmetricEigen::try_new(h, f64::EPSILON, 100_000).ok_or(FormationError::Eigen)?;
    let mut v: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

pub fn classify_equilibrium(
    spec: &FormationSpec,
    p: &[f64],
    opts: &ClassifyOptions,
) -> Result<EquilibriumReport, FormationError> {
    let config = Configuration::new(p.to_vec())?;
    let rhs_norm = flow_rhs(spec, p)?.norm();
    if rhs_norm > opts.eq_tol {
        return Err(FormationError::NotEquilibrium(rhs_norm));
    }
    let error_norm = error_vector(spec, p)?.norm();
    let eigs = hessian_eigenvalues(spec, p)?;
    let classification = if error_norm <= opts.err_tol {
        Classification::Correct
    } else if eigs.iter().any(|&l| l <= -opts.zero_tol) {
        Classification::IncorrectUnstable
    } else if eigs.iter().filter(|l| l.abs() < opts.zero_tol).count() == structural_zeros(spec.dim()) {
        Classification::IncorrectStableCandidate
    } else {
        Classification::Degenerate
    };
    Ok(EquilibriumReport {
        p: config,
        rhs_norm,
        error_norm,
        hessian_eigs: eigs,
        classification,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct SimOptions {
    pub step: f64,
    pub max_time: f64,
    pub eq_tol: f64,
    pub err_tol: f64,
    pub zero_tol: f64,
    /// Abort when any coordinate exceeds this in magnitude.
    pub divergence_bound: f64,
    /// Record every k-th accepted step; 0 keeps only the endpoints.
    pub record_every: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            step: 1e-3,
            max_time: 1e4,
            eq_tol: 1e-9,
            err_tol: 1e-6,
            zero_tol: 1e-6,
            divergence_bound: 1e6,
            record_every: 0,
        }
    }
}

impl SimOptions {
    pub fn classify_options(&self) -> ClassifyOptions {
        ClassifyOptions {
            eq_tol: self.eq_tol,
            err_tol: self.err_tol,
            zero_tol: self.zero_tol,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrajectoryPoint {
    pub t: f64,
    pub p: Vec<f64>,
    pub potential: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Simulation {
    pub trajectory: Vec<TrajectoryPoint>,
    pub final_p: Configuration,
    pub time: f64,
    pub steps: usize,
    /// Trial steps discarded because the potential rose.
    pub rejected_steps: usize,
    pub converged: bool,
    /// Set when a step could not decrease the potential even after repeated
    /// halving.
    pub stalled: bool,
    pub max_centroid_drift: f64,
    /// Terminal classification, present when the run converged.
    pub report: Option<EquilibriumReport>,
}

/// Bound on the floating-point error of `potential` at `p`. A step whose
/// potential rises by more than this is rejected.
pub fn potential_slack(spec: &FormationSpec, p: &[f64], e: &DVector<f64>) -> f64 {
    let d = spec.dim();
    let dbar = spec.dbar_sq_f64();
    let mut scale: f64 = 0.0;
    for (&(i, j), db) in spec.edges().iter().zip(&dbar) {
        let sq: f64 = (0..d).map(|k| (p[i * d + k] - p[j * d + k]).powi(2)).sum();
        scale = scale.max(sq + db);
    }
    let phi = 0.25 * e.norm_squared();
    16.0 * f64::EPSILON * scale * e.lp_norm(1) + 1e-12 * phi
}

fn rk4(spec: &FormationSpec, p: &DVector<f64>, k1: &DVector<f64>, h: f64) -> Result<DVector<f64>, FormationError> {
    let f = |x: &DVector<f64>| flow_rhs(spec, x.as_slice());
    let k2 = f(&(p + k1 * (h / 2.0)))?;
    let k3 = f(&(p + &k2 * (h / 2.0)))?;
    let k4 = f(&(p + &k3 * h))?;
    Ok(p + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0))
}

/// Fixed-step RK4 on the gradient flow until `|flow_rhs| <= eq_tol` or
/// `max_time`. A step that raises the potential beyond rounding is retried
/// with half the step, so the potential is non-increasing along the run.
pub fn simulate(
    spec: &FormationSpec,
    p0: &[f64],
    opts: &SimOptions,
) -> Result<Simulation, FormationError> {
    spec.check(p0)?;
    if !(opts.step > 0.0) || !(opts.max_time >= 0.0) {
        return Err(FormationError::InvalidOptions("step must be positive".into()));
    }
    let start = Configuration::new(p0.to_vec())?;
    let dim = spec.dim();
    let c0 = start.centroid(dim);
    let mut p = DVector::from_column_slice(p0);
    let mut e = error_vector(spec, p.as_slice())?;
    let mut phi = 0.25 * e.norm_squared();
    let mut f = flow_rhs(spec, p.as_slice())?;
    let mut t = 0.0;
    let mut steps = 0;
    let mut rejected = 0;
    let mut drift: f64 = 0.0;
    let mut stalled = false;
    let mut trajectory = vec![TrajectoryPoint {
        t,
        p: p0.to_vec(),
        potential: phi,
    }];
    let max_steps = (opts.max_time / opts.step).round() as usize;
    let converged = loop {
        if f.norm() <= opts.eq_tol {
            break true;
        }
        if steps >= max_steps {
            break false;
        }
        let slack = potential_slack(spec, p.as_slice(), &e);
        let mut h = opts.step;
        let mut accepted = None;
        for _ in 0..40 {
            let next = rk4(spec, &p, &f, h)?;
            if next.iter().any(|v| !v.is_finite() || v.abs() > opts.divergence_bound) {
                return Err(FormationError::Diverged(t + h));
            }
            let e_next = error_vector(spec, next.as_slice())?;
            let phi_next = 0.25 * e_next.norm_squared();
            if phi_next <= phi + slack {
                accepted = Some((next, e_next, phi_next));
                break;
            }
            rejected += 1;
            h /= 2.0;
        }
        let Some((next, e_next, phi_next)) = accepted else {
            stalled = true;
            break false;
        };
        p = next;
        e = e_next;
        phi = phi_next;
        t += h;
        steps += 1;
        f = flow_rhs(spec, p.as_slice())?;
        let c = Configuration::new(p.as_slice().to_vec())?.centroid(dim);
        for (a, b) in c.iter().zip(&c0) {
            drift = drift.max((a - b).abs());
        }
        if opts.record_every > 0 && steps % opts.record_every == 0 {
            trajectory.push(TrajectoryPoint {
                t,
                p: p.as_slice().to_vec(),
                potential: phi,
            });
        }
    };
    if trajectory.last().is_none_or(|tp| tp.t != t) {
        trajectory.push(TrajectoryPoint {
            t,
            p: p.as_slice().to_vec(),
            potential: phi,
        });
    }
    let final_p = Configuration::new(p.as_slice().to_vec())?;
    let report = if converged {
        Some(classify_equilibrium(spec, &final_p, &opts.classify_options())?)
    } else {
        None
    };
    Ok(Simulation {
        trajectory,
        final_p,
        time: t,
        steps,
        rejected_steps: rejected,
        converged,
        stalled,
        max_centroid_drift: drift,
        report,
    })
}

/// Uniform sample from `[-range, range]^coords`. Run `index` of a batch
/// seeded with `seed` draws from its own ChaCha stream, so results do not
/// depend on scheduling.
pub fn random_configuration(coords: usize, range: f64, seed: u64, index: u64) -> Configuration {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    let p = (0..coords).map(|_| rng.random_range(-range..=range)).collect();
    Configuration(p)
}

/// Simulates every start independently; `jobs > 1` runs them on a pool of
/// that many threads.
pub fn simulate_batch(
    spec: &FormationSpec,
    starts: &[Configuration],
    opts: &SimOptions,
    jobs: usize,
) -> Vec<Result<Simulation, FormationError>> {
    let run = |p: &Configuration| simulate(spec, p, opts);
    if jobs <= 1 {
        return starts.iter().map(run).collect();
    }
    match rayon::ThreadPoolBuilder::new().num_threads(jobs).build() {
        Ok(pool) => pool.install(|| starts.par_iter().map(run).collect()),
        Err(_) => starts.iter().map(run).collect(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square() -> Vec<f64> {
        vec![0.0, 0.0, 1.0, 0.0, 1.0, 1.0, 0.0, 1.0]
    }

    #[test]
    fn desired_shape_is_immediately_at_rest() {
        let spec = FormationSpec::unit_square();
        let sim = simulate(&spec, &square(), &SimOptions::default()).unwrap();
        assert!(sim.converged);
        assert_eq!(sim.steps, 0);
        let r = sim.report.unwrap();
        assert_eq!(r.classification, Classification::Correct);
        assert_eq!(r.error_norm, 0.0);
    }

    #[test]
    fn square_is_classified_correct() {
        let spec = FormationSpec::unit_square();
        let r = classify_equilibrium(&spec, &square(), &ClassifyOptions::default()).unwrap();
        assert_eq!(r.classification, Classification::Correct);
        assert_eq!(r.hessian_eigs.iter().filter(|v| v.abs() < 1e-6).count(), 3);
    }

    #[test]
    fn classification_requires_equilibrium() {
        let spec = FormationSpec::unit_square();
        let mut p = square();
        p[0] = 0.3;
        assert!(matches!(
            classify_equilibrium(&spec, &p, &ClassifyOptions::default()),
            Err(FormationError::NotEquilibrium(_))
        ));
    }

    #[test]
    fn collinear_triangle_stays_collinear_and_is_unstable() {
        let spec = FormationSpec::equilateral();
        let p0 = [-0.7, 0.0, 0.2, 0.0, 1.3, 0.0];
        let sim = simulate(&spec, &p0, &SimOptions::default()).unwrap();
        assert!(sim.converged);
        assert!(sim.final_p.iter().skip(1).step_by(2).all(|&y| y == 0.0));
        let r = sim.report.unwrap();
        assert_eq!(r.classification, Classification::IncorrectUnstable);
        assert!(r.hessian_eigs[0] <= -1e-4);
    }

    #[test]
    fn triangle_converges_from_generic_start() {
        let spec = FormationSpec::equilateral();
        let p0 = [0.1, -0.3, 1.4, 0.2, 0.5, 1.1];
        let sim = simulate(&spec, &p0, &SimOptions::default()).unwrap();
        assert!(sim.converged);
        assert!(sim.report.unwrap().error_norm <= 1e-6);
        assert!(sim.max_centroid_drift <= 1e-9);
    }

    #[test]
    fn seeded_configurations_are_reproducible() {
        let a = random_configuration(8, 2.0, 7, 3);
        let b = random_configuration(8, 2.0, 7, 3);
        let c = random_configuration(8, 2.0, 7, 4);
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.iter().all(|v| v.abs() <= 2.0));
    }

    #[test]
    fn invalid_step() {
        let spec = FormationSpec::equilateral();
        let opts = SimOptions {
            step: 0.0,
            ..SimOptions::default()
        };
        assert!(simulate(&spec, &[0.0; 6], &opts).is_err());
    }
}
