//! Test-only support: an independent brute-force oracle for the cubic
//! subproblem (dense grid plus derivative-free pattern refinement) and
//! random instance generators. Deliberately avoids the solver's
//! secular-equation path. Not every test target uses every helper.
#![allow(dead_code)]

use ndarray::{array, Array1, Array2};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub fn model_value(g: &Array1<f64>, h: &Array2<f64>, sigma: f64, d: &Array1<f64>) -> f64 {
    let norm = d.dot(d).sqrt();
    g.dot(d) + 0.5 * d.dot(&h.dot(d)) + sigma / 6.0 * norm.powi(3)
}

fn search_radius(g: &Array1<f64>, h: &Array2<f64>, sigma: f64) -> f64 {
    let gnorm = g.dot(g).sqrt();
    let hnorm = h.iter().fold(0.0_f64, |a, &v| a.max(v.abs())) * h.nrows() as f64;
    let r = (hnorm + (hnorm * hnorm + 2.0 * sigma * gnorm).sqrt()) / sigma;
    1.5 * r + 0.5
}

/// Derivative-free local refinement: shrinking pattern search around a
/// starting point, using only model evaluations.
fn pattern_refine(
    g: &Array1<f64>,
    h: &Array2<f64>,
    sigma: f64,
    start: Array1<f64>,
    mut radius: f64,
) -> (Array1<f64>, f64) {
    let n = start.len();
    let mut best = start;
    let mut best_val = model_value(g, h, sigma, &best);
    for _ in 0..90 {
        let mut improved = true;
        while improved {
            improved = false;
            for i in 0..n {
                for step in [-radius, radius] {
                    let mut cand = best.clone();
                    cand[i] += step;
                    let val = model_value(g, h, sigma, &cand);
                    if val < best_val {
                        best = cand;
                        best_val = val;
                        improved = true;
                    }
                }
            }
        }
        radius *= 0.55;
    }
    (best, best_val)
}

/// Global minimum of the cubic model by dense grid plus pattern polish.
/// Supports n = 1 and n = 2.
pub fn brute_force_cubic_min(g: &Array1<f64>, h: &Array2<f64>, sigma: f64) -> (Array1<f64>, f64) {
    let n = g.len();
    let r = search_radius(g, h, sigma);
    match n {
        1 => {
            let points = 4001;
            let mut best = array![0.0];
            let mut best_val = model_value(g, h, sigma, &best);
            for i in 0..points {
                let d = -r + 2.0 * r * i as f64 / (points - 1) as f64;
                let cand = array![d];
                let val = model_value(g, h, sigma, &cand);
                if val < best_val {
                    best = cand;
                    best_val = val;
                }
            }
            let cell = 2.0 * r / (points - 1) as f64;
            pattern_refine(g, h, sigma, best, cell)
        }
        2 => {
            let points = 301;
            let mut best = array![0.0, 0.0];
            let mut best_val = model_value(g, h, sigma, &best);
            for i in 0..points {
                for j in 0..points {
                    let d = array![
                        -r + 2.0 * r * i as f64 / (points - 1) as f64,
                        -r + 2.0 * r * j as f64 / (points - 1) as f64
                    ];
                    let val = model_value(g, h, sigma, &d);
                    if val < best_val {
                        best = d;
                        best_val = val;
                    }
                }
            }
            let cell = 2.0 * r / (points - 1) as f64;
            pattern_refine(g, h, sigma, best, 1.5 * cell)
        }
        _ => panic!("brute force supports n in {{1, 2}} only"),
    }
}

/// Random symmetric matrix with entries of order one.
pub fn random_symmetric(rng: &mut ChaCha8Rng, n: usize) -> Array2<f64> {
    let mut a = Array2::<f64>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let v: f64 = rng.sample(StandardNormal);
            a[[i, j]] = v;
            a[[j, i]] = v;
        }
    }
    a
}

pub fn random_vector(rng: &mut ChaCha8Rng, n: usize) -> Array1<f64> {
    Array1::from_iter((0..n).map(|_| rng.sample::<f64, _>(StandardNormal)))
}

/// A planted hard-case instance: the gradient is exactly orthogonal to the
/// smallest eigenvector and small enough that the secular equation has no
/// interior root.
pub fn hard_case_instance(seed: u64) -> (Array1<f64>, Array2<f64>, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let theta: f64 = rng.gen::<f64>() * std::f64::consts::PI;
    let (c, s) = (theta.cos(), theta.sin());
    let lambda1 = -(0.5 + rng.gen::<f64>()); // negative eigenvalue
    let lambda2 = lambda1 + 1.0 + rng.gen::<f64>(); // strictly larger
                                                    // H = Q diag(lambda1, lambda2) Q^T with Q = [[c, -s], [s, c]].
    let q1 = array![c, s];
    let q2 = array![-s, c];
    let mut h = Array2::<f64>::zeros((2, 2));
    for i in 0..2 {
        for j in 0..2 {
            h[[i, j]] = lambda1 * q1[i] * q1[j] + lambda2 * q2[i] * q2[j];
        }
    }
    let sigma = 0.5 + 2.0 * rng.gen::<f64>();
    let radius = 2.0 * (-lambda1) / sigma;
    // |d_perp| = |coef| / (lambda2 - lambda1) must stay below the radius.
    let coef = 0.8 * (lambda2 - lambda1) * radius * (2.0 * rng.gen::<f64>() - 1.0);
    let g = q2.mapv(|v| v * coef);
    (g, h, sigma)
}

pub fn seeded_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
