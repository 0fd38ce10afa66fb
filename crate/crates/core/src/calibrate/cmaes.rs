//! A compact (μ/μ_w, λ)-CMA-ES for minimisation over the unit hypercube.
//!
//! Candidates outside `[0, 1]^n` are evaluated at their coordinate-wise clip;
//! the squared clipping distance is added to the ranking fitness so the search
//! distribution is pulled back inside the box. Non-finite objective values
//! rank last and are left out of the recombination.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CmaesOptions {
    pub population: usize,
    pub max_evals: usize,
    pub sigma0: f64,
    /// Stop once `σ · sqrt(max eig C)` falls below this.
    pub tol_x: f64,
    /// Stop once recent fitness values agree to this relative tolerance.
    pub tol_fun: f64,
}

impl CmaesOptions {
    /// Default population size `4 + ⌊3 ln n⌋`.
    pub fn default_population(dim: usize) -> usize {
        4 + (3.0 * (dim as f64).ln()).floor() as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    /// Best point in unit coordinates (always inside the box).
    pub best_x: Vec<f64>,
    pub best_f: f64,
    pub evaluations: usize,
    /// Stopped on a tolerance rather than the evaluation budget.
    pub converged: bool,
}

fn clip_unit(x: &DVector<f64>) -> (Vec<f64>, f64) {
    let mut dist2 = 0.0;
    let clipped = x
        .iter()
        .map(|&v| {
            let c = v.clamp(0.0, 1.0);
            dist2 += (v - c) * (v - c);
            c
        })
        .collect();
    (clipped, dist2)
}

pub fn minimize_unit_box<F, R>(
    mut objective: F,
    x0: &[f64],
    opts: &CmaesOptions,
    rng: &mut R,
) -> RunOutcome
where
    F: FnMut(&[f64]) -> f64,
    R: Rng + ?Sized,
{
    let n = x0.len();
    let nf = n as f64;
    let lambda = opts.population.max(4);
    let mu = lambda / 2;

    let raw: Vec<f64> = (0..mu)
        .map(|i| ((mu as f64) + 0.5).ln() - ((i + 1) as f64).ln())
        .collect();
    let wsum: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / wsum).collect();
    let full_mueff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();
    let mueff = full_mueff;

    let cc = (4.0 + mueff / nf) / (nf + 4.0 + 2.0 * mueff / nf);
    let cs = (mueff + 2.0) / (nf + mueff + 5.0);
    let c1 = 2.0 / ((nf + 1.3).powi(2) + mueff);
    let cmu = (1.0 - c1).min(2.0 * (mueff - 2.0 + 1.0 / mueff) / ((nf + 2.0).powi(2) + mueff));
    let damps = 1.0 + 2.0 * (((mueff - 1.0) / (nf + 1.0)).sqrt() - 1.0).max(0.0) + cs;
    let chi_n = nf.sqrt() * (1.0 - 1.0 / (4.0 * nf) + 1.0 / (21.0 * nf * nf));

    let mut mean = DVector::from_column_slice(x0);
    let mut sigma = opts.sigma0;
    let mut cov = DMatrix::<f64>::identity(n, n);
    let mut basis = DMatrix::<f64>::identity(n, n);
    let mut scales = DVector::<f64>::from_element(n, 1.0);
    let mut ps = DVector::<f64>::zeros(n);
    let mut pc = DVector::<f64>::zeros(n);

    let mut best_x = clip_unit(&mean).0;
    let mut best_f = f64::INFINITY;
    let mut evaluations = 0usize;
    let mut converged = false;
    let history_len = 10 + (30.0 * nf / lambda as f64).ceil() as usize;
    let mut history: Vec<f64> = Vec::new();
    let mut generation = 0usize;

    while evaluations + lambda <= opts.max_evals {
        let mut ys = Vec::with_capacity(lambda);
        let mut fitness = Vec::with_capacity(lambda);
        let mut gen_raw = Vec::with_capacity(lambda);
        for _ in 0..lambda {
            let z = DVector::<f64>::from_fn(n, |_, _| rng.sample(StandardNormal));
            let y = &basis * z.component_mul(&scales);
            let x = &mean + &y * sigma;
            let (clipped, dist2) = clip_unit(&x);
            let mut f = objective(&clipped);
            evaluations += 1;
            if f.is_nan() {
                f = f64::INFINITY;
            }
            if f < best_f {
                best_f = f;
                best_x = clipped;
            }
            gen_raw.push(f);
            fitness.push(f + dist2 * (1.0 + f.abs()));
            ys.push(y);
        }

        let mut order: Vec<usize> = (0..lambda).collect();
        order.sort_by(|&i, &j| fitness[i].total_cmp(&fitness[j]));

        // Rejected candidates carry no ranking information, so only the
        // finite part of the top mu is recombined.
        let selected: Vec<usize> = order[..mu]
            .iter()
            .copied()
            .filter(|&i| fitness[i].is_finite())
            .collect();
        generation += 1;
        if selected.is_empty() {
            sigma *= 0.5;
            if sigma * scales.max() < opts.tol_x {
                converged = true;
                break;
            }
            continue;
        }
        let wsel: f64 = weights[..selected.len()].iter().sum();
        let sel_weights: Vec<f64> = weights[..selected.len()].iter().map(|w| w / wsel).collect();
        let mueff = 1.0 / sel_weights.iter().map(|w| w * w).sum::<f64>();
        let cmu = cmu * (mueff / full_mueff).min(1.0);

        let mut y_w = DVector::<f64>::zeros(n);
        for (w, &i) in sel_weights.iter().zip(&selected) {
            y_w += &ys[i] * *w;
        }
        mean += &y_w * sigma;

        // C^{-1/2} y_w = B D^{-1} B^T y_w
        let inv_scales = scales.map(|d| 1.0 / d);
        let c_inv_sqrt_y = &basis * (basis.transpose() * &y_w).component_mul(&inv_scales);
        ps = &ps * (1.0 - cs) + c_inv_sqrt_y * (cs * (2.0 - cs) * mueff).sqrt();
        let ps_norm = ps.norm();
        let hsig_denom = (1.0 - (1.0 - cs).powi(2 * generation as i32)).sqrt();
        let hsig = ps_norm / hsig_denom / chi_n < 1.4 + 2.0 / (nf + 1.0);
        let hsig_f = if hsig { 1.0 } else { 0.0 };
        pc = &pc * (1.0 - cc) + &y_w * (hsig_f * (cc * (2.0 - cc) * mueff).sqrt());

        let mut rank_mu = DMatrix::<f64>::zeros(n, n);
        for (w, &i) in sel_weights.iter().zip(&selected) {
            rank_mu += &ys[i] * ys[i].transpose() * *w;
        }
        cov = &cov * (1.0 - c1 - cmu)
            + (&pc * pc.transpose() + &cov * ((1.0 - hsig_f) * cc * (2.0 - cc))) * c1
            + rank_mu * cmu;
        cov = (&cov + cov.transpose()) * 0.5;

        sigma *= ((cs / damps) * (ps_norm / chi_n - 1.0)).exp();
        sigma = sigma.min(2.0);

        let eig = SymmetricEigen::new(cov.clone());
        basis = eig.eigenvectors;
        scales = eig.eigenvalues.map(|v| v.max(1e-30).sqrt());

        let max_scale = scales.iter().cloned().fold(0.0, f64::max);
        let min_scale = scales.iter().cloned().fold(f64::INFINITY, f64::min);
        if sigma * max_scale < opts.tol_x {
            converged = true;
            break;
        }
        if (max_scale / min_scale).powi(2) > 1e14 {
            converged = true;
            break;
        }

        history.push(gen_raw[order[0]]);
        if history.len() > history_len {
            history.remove(0);
        }
        let finite: Vec<f64> = gen_raw
            .iter()
            .chain(history.iter())
            .copied()
            .filter(|v| v.is_finite())
            .collect();
        if history.len() == history_len && finite.len() == gen_raw.len() + history.len() {
            let hi = finite.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let lo = finite.iter().cloned().fold(f64::INFINITY, f64::min);
            if hi - lo <= opts.tol_fun * lo.abs() {
                converged = true;
                break;
            }
        }
    }

    RunOutcome {
        best_x,
        best_f,
        evaluations,
        converged,
    }
}
